"""BB84 key exchange (statevector-backed) and one-time-pad encryption."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import qsim

DEFAULT_ABORT_THRESHOLD = 0.15

Z_BASIS, X_BASIS = 0, 1


class KeyCompromisedError(RuntimeError):
    """Raised when the estimated QBER exceeds the abort threshold."""


@dataclass(frozen=True)
class KeyPair:
    sender_key: str
    receiver_key: str
    sifted_length: int
    qber: float


@dataclass(frozen=True)
class CipherBlob:
    ciphertext: bytes
    bit_length: int

    def __post_init__(self):
        if len(self.ciphertext) * 8 < self.bit_length:
            raise ValueError("ciphertext shorter than bit_length")


def _prepare(bit: int, basis: int) -> qsim.StateVector:
    gates = []
    if bit:
        gates.append(qsim.x(0))
    if basis == X_BASIS:
        gates.append(qsim.h(0))
    return qsim.apply_circuit(qsim.zero_state(1), qsim.Circuit(1, tuple(gates)))


@lru_cache(maxsize=1)
def _p_one_table() -> np.ndarray:
    """p(measure 1) indexed by [prepared bit, prepare basis, measure basis].

    Computed once through the simulator; sampling then vectorizes over bits.
    """
    table = np.empty((2, 2, 2))
    meas_x = qsim.Circuit(1, (qsim.h(0),))
    for bit in (0, 1):
        for pb in (Z_BASIS, X_BASIS):
            state = _prepare(bit, pb)
            for mb in (Z_BASIS, X_BASIS):
                measured = qsim.apply_circuit(state, meas_x) if mb == X_BASIS else state
                table[bit, pb, mb] = qsim.probabilities(measured)[1]
    return table


def bb84_exchange(
    required_bits: int,
    rng: np.random.Generator,
    eavesdrop: bool = False,
    check_fraction: float = 0.25,
    abort_threshold: float = DEFAULT_ABORT_THRESHOLD,
    force_matching_bases: bool = False,
) -> KeyPair:
    """Run BB84 until at least `required_bits` sifted bits survive checking.

    `force_matching_bases` is a test hook that skips basis sifting losses.
    """
    if required_bits < 1:
        raise ValueError("required_bits must be >= 1")
    if not 0 <= check_fraction < 0.5:
        raise ValueError("check_fraction must be in [0, 0.5)")

    table = _p_one_table()
    sender_key: list[int] = []
    receiver_key: list[int] = []
    check_errors = 0
    check_total = 0

    while len(sender_key) < required_bits:
        batch = 4 * (required_bits - len(sender_key))
        s_bits = rng.integers(0, 2, batch)
        s_bases = rng.integers(0, 2, batch)
        r_bases = s_bases if force_matching_bases else rng.integers(0, 2, batch)
        if eavesdrop:
            e_bases = rng.integers(0, 2, batch)
            e_bits = (rng.random(batch) < table[s_bits, s_bases, e_bases]).astype(int)
            # intercept-resend: Eve re-encodes her outcome in her basis
            r_bits = (rng.random(batch) < table[e_bits, e_bases, r_bases]).astype(int)
        else:
            r_bits = (rng.random(batch) < table[s_bits, s_bases, r_bases]).astype(int)

        keep = s_bases == r_bases
        sifted_s = s_bits[keep]
        sifted_r = r_bits[keep]
        n_sifted = len(sifted_s)
        n_check = int(math.floor(check_fraction * n_sifted))
        check_mask = np.zeros(n_sifted, dtype=bool)
        if n_check > 0:
            check_mask[rng.choice(n_sifted, size=n_check, replace=False)] = True
        check_errors += int(np.sum(sifted_s[check_mask] != sifted_r[check_mask]))
        check_total += n_check
        sender_key.extend(sifted_s[~check_mask].tolist())
        receiver_key.extend(sifted_r[~check_mask].tolist())

    qber = check_errors / check_total if check_total else 0.0
    if qber > abort_threshold:
        raise KeyCompromisedError(f"QBER {qber:.3f} exceeds threshold {abort_threshold}")
    sender = "".join(str(b) for b in sender_key[:required_bits])
    receiver = "".join(str(b) for b in receiver_key[:required_bits])
    return KeyPair(sender, receiver, required_bits, qber)


def _key_to_bytes(key: str, n_bytes: int) -> bytes:
    bits = np.frombuffer(key[: n_bytes * 8].encode("ascii"), dtype=np.uint8) - ord("0")
    return np.packbits(bits).tobytes()  # MSB-first per byte


def otp_encrypt(plain: bytes, key: str) -> CipherBlob:
    if len(key) < 8 * len(plain):
        raise ValueError(f"key too short: need {8 * len(plain)} bits, have {len(key)}")
    pad = _key_to_bytes(key, len(plain))
    cipher = bytes(a ^ b for a, b in zip(plain, pad))
    return CipherBlob(cipher, 8 * len(plain))


def otp_decrypt(blob: CipherBlob, key: str) -> bytes:
    n_bytes = blob.bit_length // 8
    if len(key) < blob.bit_length:
        raise ValueError(f"key too short: need {blob.bit_length} bits, have {len(key)}")
    pad = _key_to_bytes(key, n_bytes)
    return bytes(a ^ b for a, b in zip(blob.ciphertext[:n_bytes], pad))
