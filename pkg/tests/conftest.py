import struct

import numpy as np
import pytest

from qflsim import data


def write_idx_pair(images_path, labels_path, images: np.ndarray, labels: np.ndarray):
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        fh.write(images.astype(np.uint8).tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, n))
        fh.write(labels.astype(np.uint8).tobytes())


@pytest.fixture(scope="session")
def mnist_idx(tmp_path_factory):
    """Synthetic MNIST-format IDX pair: 2500 28x28 images, labels 0-9.

    Digits 0-2 get >= 250 samples each with label-dependent pixel statistics
    so condensation has real structure to match.
    """
    rng = np.random.default_rng(20240901)
    n = 2500
    labels = rng.integers(0, 10, n)
    labels[:900] = np.arange(900) % 3  # guarantee >= 300 each of digits 0-2
    images = np.zeros((n, 28, 28), dtype=np.uint8)
    for i, lab in enumerate(labels):
        base = rng.integers(0, 60, (28, 28))
        block = 40 + 20 * int(lab)
        r0 = 2 * int(lab) % 20
        base[r0 : r0 + 8, 4:24] += block
        images[i] = np.clip(base, 0, 255)
    root = tmp_path_factory.mktemp("mnist")
    img_path, lab_path = root / "images-idx3", root / "labels-idx1"
    write_idx_pair(img_path, lab_path, images, labels)
    return img_path, lab_path


@pytest.fixture(scope="session")
def genomic_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("genomic") / "corpus.txt"
    data.write_genomic(path, 400, seed=7)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
