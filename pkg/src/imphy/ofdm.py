"""OFDM-IM, OFDM-GIM-I and OFDM-GIM-II framing.

A frame of N_F subcarriers is split into G subblocks of N.  Index bits pick
an activation pattern per subblock, the remaining bits pick the symbols on
the active positions (lowest position first).  Active subcarriers carry
unit-energy symbols; inactive ones are zero.
"""
from __future__ import annotations

import csv
import dataclasses
import io
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import combinations
from math import comb

import numpy as np

from . import combinatorics as cmb
from .combinatorics import ActivationPattern, IndexSelector
from .constellation import (Constellation, bits_to_int, default_constellation, int_to_bits,
                            make_pam, parse_bits)
from .errors import DomainError, UsageError

VARIANTS = ("IM", "GIM-I", "GIM-II")
CODEBOOK_GUARD = 20


@dataclass(frozen=True, eq=False)
class OfdmImConfig:
    n_f: int
    n: int
    k: int
    M: int
    variant: str = "IM"
    interleave: bool = False
    cp_len: int = 0
    modulation: str | None = None
    selector: IndexSelector | None = field(default=None, repr=False)
    power: str = "symbol"

    def __post_init__(self):
        v = self.variant.upper().replace("_", "-")
        v = {"GIM1": "GIM-I", "GIM-1": "GIM-I", "GIM2": "GIM-II", "GIM-2": "GIM-II"}.get(v, v)
        object.__setattr__(self, "variant", v)
        if v not in VARIANTS:
            raise UsageError(f"unknown OFDM-IM variant {self.variant!r}")
        if self.n < 1 or self.n_f % self.n:
            raise UsageError(f"N_F={self.n_f} is not a multiple of N={self.n}")
        if v != "GIM-I" and not 1 <= self.k <= self.n:
            raise UsageError(f"K={self.k} must satisfy 1 <= K <= N={self.n}")
        if not 0 <= self.cp_len < self.n_f:
            raise UsageError(f"cp_len={self.cp_len} must lie in [0, N_F)")
        if v == "GIM-II":
            q = self.M.bit_length() - 1
            if self.M < 4 or self.M & (self.M - 1) or q % 2:
                raise UsageError(f"GIM-II needs a square QAM order, got M={self.M}")
        if self.power not in ("symbol", "frame"):
            raise UsageError(f"power normalization must be 'symbol' or 'frame', got {self.power!r}")
        sel = self.selector
        if sel is None and v != "GIM-I":
            sel = IndexSelector(self.n, self.k)
        if sel is not None and (sel.n, sel.k) != (self.n, self.k):
            raise UsageError("selector dimensions disagree with (N, K)")
        object.__setattr__(self, "selector", sel)

    @property
    def G(self) -> int:
        return self.n_f // self.n

    @cached_property
    def power_scale(self) -> float:
        """Amplitude applied to active symbols; 1 unless power='frame'.

        With power='frame' the average energy per subcarrier (inactive ones
        included) is 1, i.e. an OFDM-IM frame radiates as much as plain OFDM.
        """
        if self.power == "symbol":
            return 1.0
        if self.variant == "GIM-I":
            base = _codebook(dataclasses.replace(self, power="symbol"), None)
            return float(1 / np.sqrt(np.mean(np.abs(base) ** 2)))
        return float(np.sqrt(self.n / self.k))

    @cached_property
    def constellation(self) -> Constellation:
        c = default_constellation(self.M, self.modulation)
        return c if self.power_scale == 1.0 else c.scaled(self.power_scale)

    @cached_property
    def rail(self) -> Constellation:
        """sqrt(M)-PAM scaled to the I/Q rail energy of unit-energy M-QAM."""
        return make_pam(int(round(np.sqrt(self.M)))).scaled(self.power_scale / np.sqrt(2))

    @property
    def q(self) -> int:
        return self.M.bit_length() - 1

    @property
    def p1(self) -> int:
        return cmb.index_bits(self.n, self.k) if self.variant != "GIM-I" else 0

    @property
    def rail_bits(self) -> int:
        return self.p1 + self.k * self.rail.bits_per_symbol

    @property
    def p(self) -> int:
        """Bits per subblock."""
        if self.variant == "IM":
            return self.p1 + self.k * self.q
        if self.variant == "GIM-I":
            return cmb.floor_log2(realization_count(self))
        return 2 * self.rail_bits

    @property
    def frame_bits(self) -> int:
        return self.p * self.G

    @property
    def symbol_energy(self) -> float:
        """Average energy per subcarrier, inactive ones included."""
        if self.power == "frame":
            return 1.0
        if self.variant in ("IM", "GIM-II"):
            return self.k / self.n
        return float(np.mean(np.abs(subblock_codebook(self)) ** 2))

    def metadata(self) -> dict:
        return {
            "N_F": self.n_f, "N": self.n, "K": self.k, "M": self.M, "G": self.G,
            "variant": self.variant, "interleave": self.interleave, "cp_len": self.cp_len,
            "constellation": self.constellation.name,
            "index_selection": self.selector.mode if self.selector else "enumerated",
            "power": self.power,
            "active_symbol_energy": self.power_scale ** 2,
        }


def realization_count(config: OfdmImConfig) -> int:
    n, M = config.n, config.M
    if config.variant == "GIM-I":
        return sum(comb(n, k) * M ** k for k in range(n + 1))
    if config.variant == "GIM-II":
        r = comb(n, config.k) * int(round(np.sqrt(M))) ** config.k
        return r * r
    return comb(n, config.k) * M ** config.k


def frame_bits(config: OfdmImConfig) -> int:
    return config.frame_bits


# ------------------------------------------------------------- subblocks

def _gim1_realization(config: OfdmImConfig, r: int) -> tuple[tuple[int, ...], list[int]]:
    n, M = config.n, config.M
    for k in range(n + 1):
        block = comb(n, k) * M ** k
        if r < block:
            pat_idx, lab = divmod(r, M ** k)
            pat = cmb.unrank(pat_idx, n, k).active if k else ()
            labels = [(lab // M ** (k - 1 - i)) % M for i in range(k)]
            return pat, labels
        r -= block
    raise DomainError("realization index out of range")


def _gim1_index(config: OfdmImConfig, pattern: tuple[int, ...], labels) -> int:
    n, M = config.n, config.M
    k = len(pattern)
    base = sum(comb(n, j) * M ** j for j in range(k))
    lab = 0
    for v in labels:
        lab = lab * M + int(v)
    pat_idx = cmb.rank(ActivationPattern(n, k, tuple(pattern))) if k else 0
    return base + pat_idx * M ** k + lab


def _im_vector(n, pattern, symbols) -> np.ndarray:
    x = np.zeros(n, dtype=complex)
    x[list(pattern)] = symbols
    return x


def build_subblock(bits, config: OfdmImConfig, selector: IndexSelector | None = None) -> np.ndarray:
    bits = parse_bits(bits)
    if bits.size != config.p:
        raise UsageError(f"subblock carries {config.p} bits, got {bits.size}")
    sel = selector or config.selector
    if config.variant == "IM":
        pat = sel.pattern(bits_to_int(bits[:config.p1]))
        return _im_vector(config.n, pat.active, config.constellation.modulate(bits[config.p1:]))
    if config.variant == "GIM-I":
        pat, labels = _gim1_realization(config, bits_to_int(bits))
        return _im_vector(config.n, pat, config.constellation.points[labels])
    half = config.rail_bits
    rails = []
    for rb in (bits[:half], bits[half:]):
        pat = sel.pattern(bits_to_int(rb[:config.p1]))
        rails.append(_im_vector(config.n, pat.active, config.rail.modulate(rb[config.p1:]).real))
    return rails[0].real + 1j * rails[1].real


def subblock_to_bits(subblock, config: OfdmImConfig, selector: IndexSelector | None = None,
                     atol: float = 1e-9) -> np.ndarray:
    """Exact inverse of build_subblock for noiseless subblocks."""
    x = np.asarray(subblock, dtype=complex)
    sel = selector or config.selector
    if config.variant == "IM":
        pat = ActivationPattern.from_positions(config.n, np.flatnonzero(np.abs(x) > atol))
        if pat.k != config.k:
            raise DomainError(f"subblock has {pat.k} active subcarriers, expected {config.k}")
        return np.concatenate([cmb.pattern_bits(pat, sel),
                               config.constellation.demodulate(x[list(pat.active)])])
    if config.variant == "GIM-I":
        act = tuple(int(i) for i in np.flatnonzero(np.abs(x) > atol))
        pts = config.constellation.points
        labels = [int(np.argmin(np.abs(pts - x[i]))) for i in act]
        r = _gim1_index(config, act, labels)
        if r >= 1 << config.p:
            raise DomainError("realization lies outside the 2**p codebook")
        return int_to_bits(r, config.p)
    out = []
    for comp in (x.real, x.imag):
        pat = ActivationPattern.from_positions(config.n, np.flatnonzero(np.abs(comp) > atol))
        if pat.k != config.k:
            raise DomainError(f"rail has {pat.k} active positions, expected {config.k}")
        out.append(cmb.pattern_bits(pat, sel))
        out.append(config.rail.demodulate(comp[list(pat.active)]))
    return np.concatenate(out)


def subblock_codebook(config: OfdmImConfig, selector: IndexSelector | None = None) -> np.ndarray:
    """All 2**p legal subblocks, row v holds the subblock for bit value v."""
    return _codebook(config, selector or config.selector)


@lru_cache(maxsize=32)
def _codebook(config: OfdmImConfig, selector) -> np.ndarray:
    p = config.rail_bits if config.variant == "GIM-II" else config.p
    if p > CODEBOOK_GUARD:
        raise UsageError(f"subblock codebook would have 2**{p} rows (limit 2**{CODEBOOK_GUARD})")
    if config.variant == "GIM-I":
        rows = []
        for r in range(1 << p):
            pat, labels = _gim1_realization(config, r)
            rows.append(_im_vector(config.n, pat, config.constellation.points[labels]))
        cb = np.array(rows)
    else:
        const = config.constellation if config.variant == "IM" else config.rail
        masks = selector.masks()
        q = const.bits_per_symbol
        nsym = 1 << (config.k * q)
        labels = np.arange(nsym)[:, None] >> (q * np.arange(config.k - 1, -1, -1))[None, :] & ((1 << q) - 1)
        syms = const.points[labels]  # (nsym, K)
        cb = np.zeros((masks.shape[0], nsym, config.n), dtype=complex)
        for v, m in enumerate(masks):
            cb[v][:, m] = syms
        cb = cb.reshape(-1, config.n)
        if config.variant == "GIM-II":
            cb = cb.real  # per-rail codebook
    cb.setflags(write=False)
    return cb


def build_subblocks(bits: np.ndarray, config: OfdmImConfig,
                    selector: IndexSelector | None = None) -> np.ndarray:
    """Vectorized build for a (..., p) bit array; returns (..., N)."""
    bits = np.asarray(bits, dtype=np.uint8)
    sel = selector or config.selector
    lead = bits.shape[:-1]
    b = bits.reshape(-1, config.p)
    if config.variant == "IM":
        out = _im_batch(b, config.n, config.k, config.p1, sel, config.constellation)
    elif config.variant == "GIM-I":
        cb = subblock_codebook(config, sel)
        out = cb[_bits_value(b)]
    else:
        h = config.rail_bits
        out = (_im_batch(b[:, :h], config.n, config.k, config.p1, sel, config.rail).real
               + 1j * _im_batch(b[:, h:], config.n, config.k, config.p1, sel, config.rail).real)
    return out.reshape(lead + (config.n,))


def _bits_value(b: np.ndarray) -> np.ndarray:
    w = b.shape[-1]
    if w == 0:
        return np.zeros(b.shape[:-1], dtype=np.int64)
    return b.astype(np.int64) @ (np.int64(1) << np.arange(w - 1, -1, -1, dtype=np.int64))


def _im_batch(b, n, k, p1, sel, const) -> np.ndarray:
    masks = sel.masks()
    v = _bits_value(b[:, :p1])
    q = const.bits_per_symbol
    labels = _bits_value(b[:, p1:].reshape(b.shape[0], k, q))
    out = np.zeros((b.shape[0], n), dtype=complex)
    m = masks[v]
    out[m] = const.points[labels].reshape(-1)
    return out


def decisions_to_bits(values: np.ndarray, labels: np.ndarray, config: OfdmImConfig) -> np.ndarray:
    """IM decisions (pattern value, K symbol labels) -> (..., p) bits."""
    q = config.q
    shifts = np.arange(config.p1 - 1, -1, -1)
    ib = (values[..., None] >> shifts) & 1
    sb = (labels[..., None] >> np.arange(q - 1, -1, -1)) & 1
    sb = sb.reshape(labels.shape[:-1] + (config.k * q,))
    return np.concatenate([ib, sb], axis=-1).astype(np.uint8)


# ---------------------------------------------------------------- frames

@dataclass(frozen=True, eq=False)
class OfdmImFrame:
    subblocks: np.ndarray  # (G, N)
    active_sets: tuple
    x: np.ndarray          # (N_F,)


def interleave_map(G: int, N: int) -> np.ndarray:
    """perm such that frame[perm[g*N + n]] = subblock_g[n]; here perm[g*N+n] = g + G*n."""
    g, n = np.meshgrid(np.arange(G), np.arange(N), indexing="ij")
    return (g + G * n).reshape(-1)


def assemble_frame(subblocks, config: OfdmImConfig) -> OfdmImFrame:
    sb = np.asarray(subblocks, dtype=complex)
    if sb.shape != (config.G, config.n):
        raise UsageError(f"need {config.G} subblocks of length {config.n}, got shape {sb.shape}")
    x = place(sb.reshape(-1), config)
    active = tuple(ActivationPattern.from_positions(config.n, np.flatnonzero(np.abs(s) > 0)) for s in sb)
    return OfdmImFrame(sb, active, x)


def place(concat: np.ndarray, config: OfdmImConfig) -> np.ndarray:
    """Apply the optional G x N interleaver to concatenated subblocks (last axis)."""
    if not config.interleave:
        return concat
    out = np.empty_like(concat)
    out[..., interleave_map(config.G, config.n)] = concat
    return out


def unplace(x: np.ndarray, config: OfdmImConfig) -> np.ndarray:
    if not config.interleave:
        return x
    return x[..., interleave_map(config.G, config.n)]


def split_frame(x, config: OfdmImConfig) -> np.ndarray:
    """De-interleave and reshape to (..., G, N)."""
    x = np.asarray(x)
    return unplace(x, config).reshape(x.shape[:-1] + (config.G, config.n))


def build_frame(bits, config: OfdmImConfig) -> OfdmImFrame:
    bits = parse_bits(bits)
    if bits.size != config.frame_bits:
        raise UsageError(f"frame carries {config.frame_bits} bits, got {bits.size}")
    sb = build_subblocks(bits.reshape(config.G, config.p), config)
    return assemble_frame(sb, config)


def modulate(x, config: OfdmImConfig) -> np.ndarray:
    """Unitary IDFT over the last axis followed by cyclic-prefix insertion."""
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] != config.n_f:
        raise UsageError(f"frame length {x.shape[-1]} != N_F={config.n_f}")
    t = np.fft.ifft(x, axis=-1, norm="ortho")
    if config.cp_len:
        t = np.concatenate([t[..., -config.cp_len:], t], axis=-1)
    return t


def demodulate(samples, config: OfdmImConfig) -> np.ndarray:
    s = np.asarray(samples, dtype=complex)
    if s.shape[-1] != config.n_f + config.cp_len:
        raise UsageError(f"expected {config.n_f + config.cp_len} samples, got {s.shape[-1]}")
    return np.fft.fft(s[..., config.cp_len:], axis=-1, norm="ortho")


def deframe(x, config: OfdmImConfig, decisions=None) -> np.ndarray:
    """Frame (or per-subblock detected vectors) back to the frame's bit string.

    ``decisions`` may be a (G, N) array of hard subblock decisions already in
    subblock order; otherwise ``x`` is de-interleaved and split first.
    """
    sb = np.asarray(decisions) if decisions is not None else split_frame(x, config)
    return np.concatenate([subblock_to_bits(s, config) for s in sb])


def frame_to_csv(x) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subcarrier", "real", "imag"])
    for i, v in enumerate(np.asarray(x, dtype=complex)):
        w.writerow([i, f"{v.real:.12g}", f"{v.imag:.12g}"])
    return buf.getvalue()


def frame_from_csv(text: str) -> np.ndarray:
    rows = list(csv.DictReader(io.StringIO(text)))
    x = np.zeros(len(rows), dtype=complex)
    for r in rows:
        x[int(r["subcarrier"])] = complex(float(r["real"]), float(r["imag"]))
    return x
