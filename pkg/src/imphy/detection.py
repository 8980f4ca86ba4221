"""Receivers: joint ML, two-stage SM, subblock ML/LLR and MMSE-SIC for MIMO-OFDM-IM.

Batch functions take leading batch axes and are what the simulator calls;
the single-instance functions wrap them and return a ``Decision``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .combinatorics import IndexSelector
from .constellation import bits_str, int_to_bits
from .errors import UsageError
from .ofdm import OfdmImConfig, decisions_to_bits, subblock_codebook
from .spatial import SpatialScheme, codebook_matrix


@dataclass
class Decision:
    bits: str
    metric: float
    branch_metrics: tuple[float, ...] | None = None
    illegal_pattern: bool = False
    index: int | None = None
    extra: dict = field(default_factory=dict)


# ------------------------------------------------------------ spatial ML

def ml_spatial_batch(y: np.ndarray, H: np.ndarray, codebook: np.ndarray):
    """argmin_i ||y - H c_i||^2 for y (B, n_R), H (B, n_R, n_T), codebook (C, n_T)."""
    if codebook.shape[0] == 0:
        raise UsageError("empty codebook")
    HC = np.einsum("brt,ct->bcr", H, codebook)
    d = y[:, None, :] - HC
    metric = np.sum(d.real ** 2 + d.imag ** 2, axis=2)
    idx = np.argmin(metric, axis=1)
    return idx, metric[np.arange(len(idx)), idx]


def ml_spatial(y, H, codebook) -> Decision:
    cb = np.asarray(codebook, dtype=complex)
    if cb.ndim == 1:
        cb = cb[:, None]
    if cb.shape[0] == 0:
        raise UsageError("empty codebook")
    H = np.asarray(H, dtype=complex).reshape(-1, cb.shape[1])
    y = np.asarray(y, dtype=complex).reshape(-1)
    if y.size != H.shape[0]:
        raise UsageError(f"y has {y.size} entries, H has {H.shape[0]} rows")
    idx, m = ml_spatial_batch(y[None], H[None], cb)
    width = max(1, int(np.ceil(np.log2(cb.shape[0]))))
    return Decision(bits_str(int_to_bits(int(idx[0]), width)), float(m[0]), index=int(idx[0]))


def two_stage_sm_batch(y: np.ndarray, H: np.ndarray, scheme: SpatialScheme):
    """Stage 1: antenna with the largest |h_n^H y| / ||h_n||; stage 2: M-ary ML on it.

    With one receive antenna the statistic equals |y| for every antenna, so
    stage 1 carries no information and n_R >= 2 is required.
    """
    if scheme.kind != "SM":
        raise UsageError(f"two-stage detection needs an SM scheme, got {scheme.kind}")
    if H.shape[-2] < 2:
        raise UsageError("two-stage detection needs n_R >= 2: with one receive antenna the "
                         "matched-filter statistic is identical for every transmit antenna")
    corr = np.einsum("brt,br->bt", H.conj(), y)
    norm2 = np.sum(np.abs(H) ** 2, axis=1)
    stat = np.abs(corr) ** 2 / norm2
    ant = np.argmax(stat, axis=1)
    h = H[np.arange(len(ant)), :, ant]  # (B, n_R)
    pts = scheme.constellation.points
    d = y[:, None, :] - h[:, None, :] * pts[None, :, None]
    metric = np.sum(d.real ** 2 + d.imag ** 2, axis=2)
    lab = np.argmin(metric, axis=1)
    idx = ant * scheme.constellation.order + lab
    return idx, metric[np.arange(len(lab)), lab], stat


def two_stage_sm(y, H, scheme: SpatialScheme) -> Decision:
    y = np.asarray(y, dtype=complex).reshape(-1)
    H = np.asarray(H, dtype=complex).reshape(-1, scheme.n_t)
    idx, m, stat = two_stage_sm_batch(y[None], H[None], scheme)
    i = int(idx[0])
    return Decision(bits_str(int_to_bits(i, scheme.bits_per_use)), float(m[0]),
                    branch_metrics=tuple(float(s) for s in stat[0]), index=i)


def ml_spatial_scheme(y, H, scheme: SpatialScheme) -> Decision:
    cb = codebook_matrix(scheme)
    dec = ml_spatial(y, H, cb)
    dec.bits = bits_str(int_to_bits(dec.index, scheme.bits_per_use))
    return dec


# ------------------------------------------------------------ subblock ML

_ML_CHUNK = 1 << 22  # complex entries per metric block


def _metric(y, h, cb):
    d = y[..., None, :] - h[..., None, :] * cb
    return np.sum(d.real ** 2 + d.imag ** 2, axis=-1)


def ml_subblock_batch(y: np.ndarray, h: np.ndarray, config: OfdmImConfig,
                      selector: IndexSelector | None = None):
    """Joint ML over all legal subblocks; returns (bits (..., p), metric (...))."""
    sel = selector or config.selector
    if config.variant == "GIM-II":
        # |y - h x|^2 = |h|^2 |y/h - x|^2 splits into independent real rails
        cb = subblock_codebook(config, sel)
        hh = np.abs(h) ** 2
        z = y / np.where(hh > 0, h, 1)
        out, tot = [], 0.0
        for comp in (z.real, z.imag):
            d = comp[..., None, :] - cb
            m = np.sum(hh[..., None, :] * d ** 2, axis=-1)
            i = np.argmin(m, axis=-1)
            out.append(_value_bits(i, config.rail_bits))
            tot = tot + np.take_along_axis(m, i[..., None], -1)[..., 0]
        return np.concatenate(out, axis=-1), tot
    cb = subblock_codebook(config, sel)
    lead = y.shape[:-1]
    yf, hf = y.reshape(-1, config.n), np.broadcast_to(h, y.shape).reshape(-1, config.n)
    idx = np.empty(yf.shape[0], dtype=np.int64)
    best = np.empty(yf.shape[0])
    step = max(1, _ML_CHUNK // (cb.shape[0] * config.n))
    for lo in range(0, yf.shape[0], step):
        m = _metric(yf[lo:lo + step], hf[lo:lo + step], cb)
        i = np.argmin(m, axis=-1)
        idx[lo:lo + step] = i
        best[lo:lo + step] = np.take_along_axis(m, i[:, None], -1)[:, 0]
    return _value_bits(idx.reshape(lead), config.p), best.reshape(lead)


def _value_bits(v: np.ndarray, width: int) -> np.ndarray:
    return ((v[..., None] >> np.arange(width - 1, -1, -1)) & 1).astype(np.uint8)


def ml_subblock(y_sub, h_sub, config: OfdmImConfig, selector: IndexSelector | None = None) -> Decision:
    y = np.asarray(y_sub, dtype=complex)
    h = np.asarray(h_sub, dtype=complex)
    if y.shape != (config.n,) or h.shape != (config.n,):
        raise UsageError(f"subblock inputs must have length N={config.n}")
    bits, m = ml_subblock_batch(y[None], h[None], config, selector)
    return Decision(bits_str(bits[0]), float(m[0]))


# ------------------------------------------------------------ subblock LLR

@lru_cache(maxsize=32)
def _mask_lookup(selector: IndexSelector) -> np.ndarray:
    """bitmask of active positions -> pattern value, or -1 if not in the codebook."""
    table = np.full(1 << selector.n, -1, dtype=np.int64)
    weights = 1 << np.arange(selector.n)
    for v, m in enumerate(selector.masks()):
        table[int(m @ weights)] = v
    return table


def _llr_from_dist(y, dist, N0, k, n, max_log):
    e = -dist / N0[..., None]
    lse = np.max(e, axis=-1) if max_log else logsumexp(e, axis=-1)
    # log P(active)/P(inactive): the inactive hypothesis is exp(-|y|^2/N0)
    prior = np.log(k / (n - k)) - np.log(dist.shape[-1])
    return prior + np.abs(y) ** 2 / N0 + lse


def activity_llr(y, h, N0, constellation_points, k: int, n: int, max_log: bool = False):
    """Per-subcarrier active/inactive log-likelihood ratio, prior included."""
    y = np.asarray(y, dtype=complex)
    N0 = np.broadcast_to(np.asarray(N0, dtype=float), y.shape)
    d = y[..., None] - np.asarray(h)[..., None] * constellation_points
    return _llr_from_dist(y, d.real ** 2 + d.imag ** 2, N0, k, n, max_log)


def llr_subblock_batch(y: np.ndarray, h: np.ndarray, config: OfdmImConfig, N0,
                       selector: IndexSelector | None = None, max_log: bool = False):
    """Vectorized LLR detector for IM subblocks.

    ``N0`` may be scalar or broadcastable to ``y`` (per-subcarrier effective
    noise after MMSE filtering).  Returns bits (..., p), symbol estimates
    (..., N) and an illegal-pattern flag (...).
    """
    if config.variant != "IM":
        raise UsageError("LLR detection is defined for fixed-K OFDM-IM subblocks")
    N0 = np.broadcast_to(np.asarray(N0, dtype=float), y.shape)
    if np.any(N0 <= 0):
        raise UsageError("LLR detection needs N0 > 0")
    sel = selector or config.selector
    n, k = config.n, config.k
    pts = config.constellation.points
    lead = y.shape[:-1]
    # symbol decisions per subcarrier do not depend on activity
    d = y[..., None] - h[..., None] * pts
    dist = d.real ** 2 + d.imag ** 2
    lab_all = np.argmin(dist, axis=-1)
    if k == n:
        values = np.zeros(lead, dtype=np.int64)
        mask = np.ones(y.shape, dtype=bool)
        illegal = np.zeros(lead, dtype=bool)
    else:
        lam = _llr_from_dist(y, dist, N0, k, n, max_log)
        order = np.argsort(-lam, axis=-1, kind="stable")[..., :k]
        mask = np.zeros(y.shape, dtype=bool)
        np.put_along_axis(mask, order, True, axis=-1)
        weights = 1 << np.arange(n)
        values = _mask_lookup(sel)[mask.astype(np.int64) @ weights]
        illegal = values < 0
        if np.any(illegal):
            legal = sel.masks().astype(float)  # (S, N)
            best = np.argmax(lam[illegal] @ legal.T, axis=-1)
            values[illegal] = best
            mask[illegal] = sel.masks()[best]
    labels = lab_all[mask].reshape(lead + (k,))
    bits = decisions_to_bits(values, labels, config)
    xhat = np.zeros(y.shape, dtype=complex)
    xhat[mask] = pts[labels].reshape(-1)
    return bits, xhat, illegal


def llr_subblock(y_sub, h_sub, config: OfdmImConfig, N0, selector: IndexSelector | None = None,
                 max_log: bool = False) -> Decision:
    y = np.asarray(y_sub, dtype=complex)
    h = np.asarray(h_sub, dtype=complex)
    if y.shape != (config.n,) or h.shape != (config.n,):
        raise UsageError(f"subblock inputs must have length N={config.n}")
    if np.any(np.asarray(N0) <= 0):
        raise UsageError("LLR detection needs N0 > 0")
    bits, xhat, illegal = llr_subblock_batch(y[None], h[None], config, N0, selector, max_log)
    metric = float(np.sum(np.abs(y - h * xhat[0]) ** 2))
    return Decision(bits_str(bits[0]), metric, illegal_pattern=bool(illegal[0]))


# ------------------------------------------------------------ MMSE-SIC

@dataclass
class MimoDetection:
    bits: np.ndarray        # (..., n_T, G, p)
    illegal: np.ndarray     # (..., n_T, G) bool
    order: np.ndarray       # (..., G, n_T) detection order per subblock
    regularized: int = 0


def mmse_sic_batch(Y: np.ndarray, Hs: np.ndarray, config: OfdmImConfig, N0: float,
                   max_log: bool = False, floor: float = 1e-12) -> MimoDetection:
    """Successive MMSE detection of parallel OFDM-IM streams, one subblock at a time.

    Y is (..., G, N, n_R) and Hs is (..., G, N, n_R, n_T), both in subblock
    order.  Per subblock the undetected stream whose weakest subcarrier has
    the largest post-filter SINR is detected with the LLR rule, reconstructed and
    cancelled before the filter is recomputed.  The filter output for stream
    t is modelled as mu_t x_t + w with var(w) = Es sum_{j != t} |(WH)_tj|^2
    + N0 ||w_t||^2.
    """
    Y = np.array(Y, dtype=complex)
    Hs = np.asarray(Hs, dtype=complex)
    n_r, n_t = Hs.shape[-2:]
    lead = Hs.shape[:-4]
    G, N = Hs.shape[-4], Hs.shape[-3]
    Es = config.symbol_energy
    reg = max(N0 / Es, 0.0)
    regularized = 0
    if reg < floor:
        regularized = int(np.prod(lead + (G,)))
        reg = floor
    done = np.zeros(lead + (G, n_t), dtype=bool)
    bits = np.zeros(lead + (n_t, G, config.p), dtype=np.uint8)
    illegal = np.zeros(lead + (n_t, G), dtype=bool)
    order = np.zeros(lead + (G, n_t), dtype=np.int64)
    eye = np.eye(n_t)
    for stage in range(n_t):
        Hm = Hs * (~done)[..., None, None, :]
        Hh = np.conj(np.swapaxes(Hm, -1, -2))
        A = Hh @ Hm + reg * eye
        W = np.linalg.solve(A, Hh)                      # (..., G, N, n_T, n_R)
        z = np.einsum("...tr,...r->...t", W, Y)
        WH = W @ Hm
        mu = np.real(np.einsum("...tt->...t", WH))
        cross = np.abs(WH) ** 2
        interf = Es * (np.sum(cross, axis=-1) - mu ** 2)
        noise = N0 * np.sum(np.abs(W) ** 2, axis=-1)
        var = np.maximum(interf + noise, floor)
        sinr = Es * mu ** 2 / var
        score = np.min(sinr, axis=-2)                   # (..., G, n_T)
        score = np.where(done, -np.inf, score)
        t = np.argmax(score, axis=-1)                   # (..., G)
        order[..., stage] = t
        sel_t = t[..., None, None]
        zt = np.take_along_axis(z, sel_t, -1)[..., 0]
        mut = np.take_along_axis(mu, sel_t, -1)[..., 0]
        vt = np.take_along_axis(var, sel_t, -1)[..., 0]
        b, xhat, ill = llr_subblock_batch(zt, mut.astype(complex), config, vt, max_log=max_log)
        _scatter_stream(bits, t, b)
        _scatter_stream(illegal, t, ill)
        hcol = np.take_along_axis(Hs, t[..., None, None, None], -1)[..., 0]  # (..., G, N, n_R)
        Y = Y - hcol * xhat[..., None]
        np.put_along_axis(done, t[..., None], True, axis=-1)
    return MimoDetection(bits, illegal, order, regularized)


def _scatter_stream(target: np.ndarray, t: np.ndarray, values: np.ndarray) -> None:
    """target[..., t[..., g], g, ...] = values[..., g, ...]"""
    lead = t.shape[:-1]
    G = t.shape[-1]
    flat_t = t.reshape(-1, G)
    tgt = target.reshape((-1,) + target.shape[len(lead):])
    val = values.reshape((-1,) + values.shape[len(lead):])
    rows = np.arange(flat_t.shape[0])[:, None]
    cols = np.arange(G)[None, :]
    tgt[rows, flat_t, cols] = val


def mmse_llr_mimo(Y, H_k, config: OfdmImConfig, N0: float, max_log: bool = False):
    """Frame-level MMSE-SIC + LLR detection.

    Y is (N_F, n_R) received subcarrier vectors, H_k is (N_F, n_R, n_T).
    Returns one Decision per transmit stream carrying that stream's frame bits.
    """
    Y = np.asarray(Y, dtype=complex)
    H_k = np.asarray(H_k, dtype=complex)
    if Y.ndim != 2 or H_k.ndim != 3 or Y.shape[0] != config.n_f or H_k.shape[:2] != Y.shape:
        raise UsageError("expected Y (N_F, n_R) and H_k (N_F, n_R, n_T)")
    from .ofdm import unplace
    Ys = unplace(Y.T, config).T.reshape(config.G, config.n, -1)
    Hs = np.moveaxis(unplace(np.moveaxis(H_k, 0, -1), config), -1, 0)
    Hs = Hs.reshape(config.G, config.n, *H_k.shape[1:])
    det = mmse_sic_batch(Ys, Hs, config, N0, max_log=max_log)
    out = []
    for t in range(H_k.shape[2]):
        b = det.bits[t].reshape(-1)
        out.append(Decision(bits_str(b), float("nan"), illegal_pattern=bool(det.illegal[t].any()),
                            extra={"illegal_count": int(det.illegal[t].sum()),
                                   "regularized": det.regularized}))
    return out
