"""PSK, square QAM and PAM constellations with natural binary labels.

Every constellation is normalized to unit average energy.  The point stored
at position ``b`` is the symbol carrying the label ``b`` (MSB first).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidOrderError, UsageError


def _is_pow2(m: int) -> bool:
    return m >= 2 and (m & (m - 1)) == 0


def bits_to_int(bits) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def int_to_bits(value: int, width: int) -> np.ndarray:
    if width == 0:
        return np.zeros(0, dtype=np.uint8)
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def parse_bits(bits) -> np.ndarray:
    """Accept ``"0101"``, a list of ints or an array and return a uint8 array."""
    if isinstance(bits, str):
        if any(c not in "01" for c in bits):
            raise UsageError(f"not a bit string: {bits!r}")
        return np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise UsageError("bits must be 0 or 1")
    return arr


def bits_str(bits) -> str:
    return "".join(str(int(b)) for b in bits)


@dataclass(frozen=True, eq=False)
class Constellation:
    points: np.ndarray
    kind: str
    order: int
    phase_offset: float = 0.0
    label_rule: str = "natural"
    name: str = field(default="")

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if not self.name:
            object.__setattr__(self, "name", f"{self.order}-{self.kind}")

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    def __len__(self) -> int:
        return self.order

    def modulate(self, bits) -> np.ndarray:
        """Map a bit array (length multiple of bits_per_symbol) to symbols."""
        bits = parse_bits(bits)
        q = self.bits_per_symbol
        if bits.size % q:
            raise UsageError(f"{bits.size} bits is not a multiple of {q}")
        labels = bits.reshape(-1, q) @ (1 << np.arange(q - 1, -1, -1))
        return self.points[labels]

    def labels_to_bits(self, labels) -> np.ndarray:
        labels = np.asarray(labels, dtype=np.int64)
        q = self.bits_per_symbol
        shifts = np.arange(q - 1, -1, -1)
        return ((labels[..., None] >> shifts) & 1).astype(np.uint8)

    def demodulate(self, symbols) -> np.ndarray:
        """Hard nearest-point decision, returned as bits."""
        symbols = np.atleast_1d(np.asarray(symbols, dtype=complex))
        labels = np.argmin(np.abs(symbols[:, None] - self.points[None, :]), axis=1)
        return self.labels_to_bits(labels).reshape(-1)

    def scaled(self, factor: float) -> "Constellation":
        return Constellation(self.points * factor, self.kind, self.order,
                             self.phase_offset, self.label_rule, self.name)

    def rotated(self, theta: float) -> "Constellation":
        return Constellation(self.points * np.exp(1j * theta), self.kind, self.order,
                             self.phase_offset + theta, self.label_rule,
                             f"{self.name}@{theta:.4g}")

    @property
    def average_energy(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))


def make_psk(M: int, phase_offset: float = 0.0) -> Constellation:
    if not _is_pow2(M):
        raise InvalidOrderError(f"PSK order must be a power of 2 >= 2, got {M}")
    b = np.arange(M)
    pts = np.exp(1j * (phase_offset + 2 * np.pi * b / M))
    # snap exact axis values so tabulated codebooks compare exactly
    pts = np.where(np.abs(pts.real) < 1e-15, 1j * pts.imag, pts)
    pts = np.where(np.abs(pts.imag) < 1e-15, pts.real + 0j, pts)
    return Constellation(pts, "PSK", M, phase_offset)


def _pam_levels(L: int) -> np.ndarray:
    # natural label b -> amplitude 2b - (L-1)
    return 2.0 * np.arange(L) - (L - 1)


def make_qam(M: int) -> Constellation:
    """Square M-QAM; I-rail label bits come first, then Q-rail bits."""
    if not _is_pow2(M) or (M.bit_length() - 1) % 2:
        raise InvalidOrderError(f"square QAM needs M = 4, 16, 64, ...; got {M}")
    L = int(round(np.sqrt(M)))
    lv = _pam_levels(L)
    pts = (lv[:, None] + 1j * lv[None, :]).reshape(-1)
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    return Constellation(pts, "QAM", M)


def make_rect_qam(M_i: int, M_q: int) -> Constellation:
    """Rectangular (M_i x M_q)-QAM, e.g. 8-QAM as 4 x 2."""
    if not (_is_pow2(M_i) and _is_pow2(M_q)):
        raise InvalidOrderError(f"rail orders must be powers of 2, got {M_i}x{M_q}")
    li, lq = _pam_levels(M_i), _pam_levels(M_q)
    pts = (li[:, None] + 1j * lq[None, :]).reshape(-1)
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    return Constellation(pts, "QAM", M_i * M_q, name=f"{M_i * M_q}-QAM")


def make_pam(M_sqrt: int) -> Constellation:
    if not _is_pow2(M_sqrt):
        raise InvalidOrderError(f"PAM order must be a power of 2 >= 2, got {M_sqrt}")
    lv = _pam_levels(M_sqrt)
    lv = lv / np.sqrt(np.mean(lv ** 2))
    return Constellation(lv.astype(complex), "PAM", M_sqrt)


def default_constellation(M: int, modulation: str | None = None) -> Constellation:
    """PSK up to 8 points, square QAM above, unless ``modulation`` says otherwise.

    QPSK carries the pi/4 offset so that it coincides with 4-QAM.
    """
    mod = (modulation or ("psk" if M <= 8 else "qam")).lower()
    if mod == "psk":
        return make_psk(M, np.pi / 4 if M == 4 else 0.0)
    if mod == "qam":
        if M == 2:
            return make_psk(2)
        if M == 8:
            return make_rect_qam(4, 2)
        return make_qam(M)
    if mod == "pam":
        return make_pam(M)
    raise UsageError(f"unknown modulation {modulation!r}")


def make_star_qam8() -> Constellation:
    """Circular 8-QAM: a QPSK ring at pi/4 inside an axis-aligned ring of radius 1+sqrt(3)."""
    inner = np.exp(1j * (np.pi / 4 + np.arange(4) * np.pi / 2))
    outer = (1 + np.sqrt(3)) * np.exp(1j * np.arange(4) * np.pi / 2)
    pts = np.concatenate([inner, outer])
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    return Constellation(pts, "QAM", 8, name="8-QAM-star")
