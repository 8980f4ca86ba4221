"""Minimum-distance, rate and detection-complexity accounting."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .spatial import SpatialScheme, codebook_matrix, make_scheme


@dataclass(frozen=True)
class DminReport:
    scheme: str
    bpcu: int
    n_t: int
    d_min: float
    argmin: tuple[int, int]


def min_squared_distance(codebook) -> tuple[float, tuple[int, int]]:
    """Exhaustive minimum of ||x_i - x_j||^2; ties resolve to the lowest (i, j)."""
    cb = np.asarray(codebook, dtype=complex)
    if cb.ndim == 1:
        cb = cb[:, None]
    n = cb.shape[0]
    if n < 2:
        raise UsageError("d_min needs at least two codewords")
    best, arg = np.inf, (0, 1)
    chunk = max(1, 2 ** 22 // max(1, n * cb.shape[1]))
    for lo in range(0, n - 1, chunk):
        hi = min(n - 1, lo + chunk)
        d = np.sum(np.abs(cb[lo:hi, None, :] - cb[None, :, :]) ** 2, axis=2)
        # keep only j > i
        d[np.arange(hi - lo)[:, None] >= np.arange(n)[None, :] - lo] = np.inf
        flat = int(np.argmin(d))
        i, j = divmod(flat, n)
        if d[i, j] < best:
            best, arg = float(d[i, j]), (lo + i, j)
    return best, arg


def d_min(scheme_or_codebook, name: str | None = None) -> DminReport:
    if isinstance(scheme_or_codebook, SpatialScheme):
        s = scheme_or_codebook
        value, arg = min_squared_distance(codebook_matrix(s))
        return DminReport(name or s.label, s.bits_per_use, s.n_t, value, arg)
    cb = np.asarray(scheme_or_codebook, dtype=complex)
    if cb.ndim == 1:
        cb = cb[:, None]
    value, arg = min_squared_distance(cb)
    bpcu = int(np.log2(cb.shape[0])) if cb.shape[0] & (cb.shape[0] - 1) == 0 else 0
    return DminReport(name or "codebook", bpcu, cb.shape[1], value, arg)


# d_min comparison configurations (fig2 preset): (bpcu, n_T, SIMO M, SM M, ESM primary M, QSM M)
FIG2_CONFIGS = {
    "a": (4, 2, 16, 8, 4, 4),
    "b": (6, 4, 64, 16, 4, 4),
    "c": (8, 4, 256, 64, 16, 16),
    "d": (10, 4, 1024, 256, 64, 64),
}


def fig2_schemes(config: str) -> dict[str, SpatialScheme]:
    bpcu, n_t, m_simo, m_sm, m_esm, m_qsm = FIG2_CONFIGS[config]
    schemes = {
        "simo": make_scheme("SIMO", 1, m_simo, modulation="qam"),
        "sm": make_scheme("SM", n_t, m_sm),
        "esm": make_scheme("ESM", n_t, m_esm),
        "qsm": make_scheme("QSM", n_t, m_qsm),
    }
    for s in schemes.values():
        assert s.bits_per_use == bpcu
    return schemes


def fig2_reports() -> list[tuple[str, DminReport]]:
    rows = []
    for cfg in FIG2_CONFIGS:
        for name, s in fig2_schemes(cfg).items():
            rows.append((cfg, d_min(s, name)))
    return rows


def dmin_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheme", "bpcu", "n_T", "d_min"])
    for r in reports:
        w.writerow([r.scheme, r.bpcu, r.n_t, f"{r.d_min:.12g}"])
    return buf.getvalue()


def complexity_reduction_vs_vblast(n_t: int) -> float:
    """Percentage saving in real multiplications of SM-ML over V-BLAST-ML."""
    if n_t < 1:
        raise UsageError("n_T must be >= 1")
    return 200.0 * (n_t - 1) / (2 * n_t + 1)


# ------------------------------------------------------ instrumented detectors

class MulCounter:
    """Counts real multiplications; a complex product costs 4, |z|^2 costs 2."""

    def __init__(self):
        self.real_mults = 0
        self.metrics = 0

    def cmul(self, a: complex, b: complex) -> complex:
        self.real_mults += 4
        return a * b

    def abs2(self, z: complex) -> float:
        self.real_mults += 2
        return z.real * z.real + z.imag * z.imag


def _ml_sm_counted(y, H, points, ctr: MulCounter):
    n_r, n_t = H.shape
    best = (np.inf, 0, 0)
    for n in range(n_t):
        for i, s in enumerate(points):
            m = 0.0
            for r in range(n_r):
                m += ctr.abs2(y[r] - ctr.cmul(H[r, n], s))
            ctr.metrics += 1
            if m < best[0]:
                best = (m, n, i)
    return best


def _two_stage_counted(y, H, points, ctr: MulCounter):
    n_r, n_t = H.shape
    best_n, best_stat = 0, -np.inf
    for n in range(n_t):
        corr, norm = 0j, 0.0
        for r in range(n_r):
            corr += ctr.cmul(np.conj(H[r, n]), y[r])
            norm += ctr.abs2(H[r, n])
        stat = ctr.abs2(corr) / norm
        ctr.metrics += 1
        if stat > best_stat:
            best_n, best_stat = n, stat
    best = (np.inf, best_n, 0)
    for i, s in enumerate(points):
        m = 0.0
        for r in range(n_r):
            m += ctr.abs2(y[r] - ctr.cmul(H[r, best_n], s))
        ctr.metrics += 1
        if m < best[0]:
            best = (m, best_n, i)
    return best


@dataclass(frozen=True)
class ComplexityReport:
    detector: str
    real_multiplications: int
    search_space: int


def count_real_multiplications(detector: str, scheme: SpatialScheme, n_r: int = 1,
                               seed: int = 0) -> ComplexityReport:
    """Run one instrumented decision on a random channel and noisy observation."""
    if scheme.kind != "SM":
        raise UsageError(f"instrumented counting supports SM only, got {scheme.kind}")
    rng = np.random.default_rng(seed)
    H = (rng.standard_normal((n_r, scheme.n_t)) + 1j * rng.standard_normal((n_r, scheme.n_t))) / np.sqrt(2)
    y = H[:, 0] * scheme.constellation.points[0] + 0.1 * (
        rng.standard_normal(n_r) + 1j * rng.standard_normal(n_r))
    ctr = MulCounter()
    pts = [complex(p) for p in scheme.constellation.points]
    if detector == "ml":
        _ml_sm_counted(y, H, pts, ctr)
    elif detector == "two-stage":
        _two_stage_counted(y, H, pts, ctr)
    else:
        raise UsageError(f"unknown detector {detector!r}")
    return ComplexityReport(detector, ctr.real_mults, ctr.metrics)
