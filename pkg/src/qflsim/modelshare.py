"""Device-to-server parameter protocols: pruning, SVD split with
sigma-only encryption, rank-truncated reconstruction, and federated
averaging."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .qkd import CipherBlob, otp_decrypt, otp_encrypt

TRUNCATION_RANK = 2


@dataclass(frozen=True)
class PruneSpec:
    tau: float = 0.5
    avg_initial: bool = False

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be >= 0")


def prune(theta: np.ndarray, tau: float) -> np.ndarray:
    """Zero every component with |theta_i| strictly below tau."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    theta = np.asarray(theta, dtype=float)
    return np.where(np.abs(theta) < tau, 0.0, theta)


def apply_global(
    theta_current: np.ndarray, theta_global: np.ndarray, avg_initial: bool
) -> np.ndarray:
    theta_current = np.asarray(theta_current, dtype=float)
    theta_global = np.asarray(theta_global, dtype=float)
    if avg_initial:
        return (theta_global + theta_current) / 2.0
    return theta_global.copy()


def reshape_dims(n: int) -> tuple[int, int]:
    """Most-square factorization m1*m2 == n with m1 <= m2."""
    m1 = int(math.isqrt(n))
    while n % m1:
        m1 -= 1
    return m1, n // m1


def svd_split(theta: np.ndarray, m1: int, m2: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    theta = np.asarray(theta, dtype=float)
    if m1 * m2 != theta.size:
        raise ValueError(f"cannot reshape {theta.size} parameters to {m1}x{m2}")
    A = theta.reshape(m1, m2)
    U, sigma, Vt = np.linalg.svd(A, full_matrices=True)
    # sign convention: largest-magnitude entry of each U column positive
    for j in range(len(sigma)):
        if U[np.argmax(np.abs(U[:, j])), j] < 0:
            U[:, j] = -U[:, j]
            Vt[j, :] = -Vt[j, :]
    return U, sigma, Vt


def serialize_sigma(sigma: np.ndarray) -> bytes:
    return struct.pack(f">{len(sigma)}d", *np.asarray(sigma, dtype=float))


def deserialize_sigma(data: bytes) -> np.ndarray:
    return np.array(struct.unpack(f">{len(data) // 8}d", data))


def encrypt_sigma(sigma: np.ndarray, key: str) -> CipherBlob:
    return otp_encrypt(serialize_sigma(sigma), key)


def decrypt_sigma(blob: CipherBlob, key: str) -> np.ndarray:
    return deserialize_sigma(otp_decrypt(blob, key))


def reconstruct(
    U: np.ndarray, sigma: np.ndarray, Vt: np.ndarray, m1: int, m2: int
) -> np.ndarray:
    """Rank-truncated rebuild keeping the top r = min(min(m1, m2), 2) values."""
    r = min(min(m1, m2), TRUNCATION_RANK)
    S = np.zeros((m1, m2))
    S[:r, :r] = np.diag(np.asarray(sigma, dtype=float)[:r])
    return (U @ S @ Vt).reshape(-1)


def federated_average(thetas: list[np.ndarray]) -> np.ndarray:
    """Elementwise mean with exact summation (permutation-invariant)."""
    if not thetas:
        raise ValueError("no parameter vectors to average")
    stacked = np.stack([np.asarray(t, dtype=float) for t in thetas])
    if stacked.ndim != 2:
        raise ValueError("parameter vectors must be 1-D and equal length")
    k = stacked.shape[0]
    return np.array([math.fsum(stacked[:, j]) / k for j in range(stacked.shape[1])])


@dataclass(frozen=True)
class SvdPackage:
    U: np.ndarray
    Vt: np.ndarray
    sigma_cipher: CipherBlob
    m1: int
    m2: int

    def to_bytes(self) -> bytes:
        """Canonical encoding: dims, bit length, ciphertext, row-major U, Vt."""
        header = struct.pack(
            ">IIII", self.m1, self.m2, self.sigma_cipher.bit_length, len(self.sigma_cipher.ciphertext)
        )
        u_bytes = struct.pack(f">{self.m1 * self.m1}d", *self.U.reshape(-1))
        vt_bytes = struct.pack(f">{self.m2 * self.m2}d", *self.Vt.reshape(-1))
        return header + self.sigma_cipher.ciphertext + u_bytes + vt_bytes

    @classmethod
    def from_bytes(cls, data: bytes) -> "SvdPackage":
        m1, m2, bit_length, clen = struct.unpack(">IIII", data[:16])
        off = 16
        cipher = data[off : off + clen]
        off += clen
        u_len = m1 * m1 * 8
        U = np.array(struct.unpack(f">{m1 * m1}d", data[off : off + u_len])).reshape(m1, m1)
        off += u_len
        Vt = np.array(struct.unpack(f">{m2 * m2}d", data[off : off + m2 * m2 * 8])).reshape(m2, m2)
        return cls(U=U, Vt=Vt, sigma_cipher=CipherBlob(cipher, bit_length), m1=m1, m2=m2)
