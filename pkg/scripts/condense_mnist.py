#!/usr/bin/env python3
"""Condense an MNIST-format IDX corpus (digits 0-2, m images per class).

Usage:
    python scripts/condense_mnist.py IMAGES_IDX LABELS_IDX --out DIR [-m 200]

Writes condensed.csv and provenance.json via the `qflsim condense` machinery.
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

from qflsim import cli


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("images")
    parser.add_argument("labels")
    parser.add_argument("--out", required=True)
    parser.add_argument("-m", "--images-per-class", type=int, default=200)
    parser.add_argument("--steps", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    config = {
        "name": f"mnist-condense-m{args.images_per_class}",
        "dataset": "mnist",
        "dataset_path": args.images,
        "labels_path": args.labels,
        "keep_digits": [0, 1, 2],
        "seed": args.seed,
        "condensation": {
            "images_per_class": args.images_per_class,
            "steps": args.steps,
        },
    }
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(config, fh)
        cfg_path = fh.name
    rc = cli.main(["condense", cfg_path, "--out", args.out])
    Path(cfg_path).unlink(missing_ok=True)
    if rc == 0:
        prov = json.loads((Path(args.out) / "provenance.json").read_text())
        print(f"condensed {prov['original_rows']} -> {prov['condensed_rows']} rows "
              f"(ratio {prov['size_ratio']:.4f})")
    return rc


if __name__ == "__main__":
    sys.exit(main())
