"""Seeded Monte Carlo BER engine.

A *link* turns a scheme description into a vectorized trial runner.  Points
are seeded from (master seed, SNR) and batches from (master seed, SNR, batch
index), so results do not depend on the grid layout or the worker count.
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import channel as chn
from . import detection as det
from . import ofdm
from .errors import UsageError
from .spatial import codebook_matrix, make_scheme

SPATIAL = {"sm", "gsm", "masm", "ma-sm", "esm", "qsm", "simo", "vblast", "v-blast"}
OFDM_SISO = {"ofdm-im", "ofdm-gim1", "ofdm-gim2", "ofdm"}
OFDM_MIMO = {"mimo-ofdm-im", "mimo-ofdm", "vblast-ofdm"}

DESIGN_FLAGS = {
    "bit_labeling": "natural",
    "snr_definition": "1/N0 per receive antenna with unit-energy reference symbols (power='symbol': active symbols have unit energy; power='frame': average energy per subcarrier is unity)",
    "ebn0_definition": "snr_db - 10 log10(bits per channel use incl. CP)",
    "fading": "flat: constant per codeword; selective: constant per OFDM frame",
    "active_symbol_energy": "unit unless power='frame' (then N/K, equal frame power)",
    "pattern_order": "lexicographic combinadic",
    "llr": "log(K/(N-K)) prior, exact log-sum-exp unless max_log",
    "illegal_pattern_repair": "legal pattern with largest summed LLR",
    "two_stage_statistic": "|h_n^H y| / ||h_n||",
    "sic_order": "per subblock, stream with the largest minimum post-MMSE SINR first, hard cancellation",
    "post_mmse_model": "z = mu x + w, var(w) = Es sum_{j!=t}|(WH)_tj|^2 + N0 ||w_t||^2",
    "stopping_rule": "errors >= min_errors and trials >= min_trials, or trials >= max_trials",
}


SCHEME_ALIASES = {"gim-i": "ofdm-gim1", "gim1": "ofdm-gim1", "ofdm-gim-i": "ofdm-gim1",
                  "gim-ii": "ofdm-gim2", "gim2": "ofdm-gim2", "ofdm-gim-ii": "ofdm-gim2",
                  "im": "ofdm-im", "v-blast-ofdm": "vblast-ofdm"}


def _norm(name: str) -> str:
    name = str(name).lower().replace("_", "-")
    return SCHEME_ALIASES.get(name, name)


@dataclass
class Link:
    name: str
    n_t: int
    n_r: int
    bits_per_trial: int
    bpcu: float
    batch: int
    runner: object = field(repr=False)

    def run(self, rng: np.random.Generator, n: int, N0: float) -> tuple[int, int]:
        return self.runner(rng, n, N0)


def _popcount_errors(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.count_nonzero(a != b))


def _spatial_link(spec: dict) -> Link:
    name = _norm(spec["scheme"])
    kind = {"masm": "MA-SM", "ma-sm": "MA-SM", "vblast": "V-BLAST", "v-blast": "V-BLAST"}.get(name, name.upper())
    scheme = make_scheme(kind, int(spec.get("nt", 1)), int(spec.get("m", 2)), int(spec.get("na", 1)),
                         spec.get("modulation"))
    n_r = int(spec.get("nr", 1))
    detector = spec.get("detector", "ml")
    if detector not in ("ml", "two-stage"):
        raise UsageError(f"detector {detector!r} not available for {kind}")
    cb = codebook_matrix(scheme)
    b = scheme.bits_per_use
    shifts = np.arange(b - 1, -1, -1)

    def run(rng, n, N0):
        v = rng.integers(0, 1 << b, size=n)
        x = cb[v]
        H = chn.draw_flat(n_r, scheme.n_t, rng, size=n)
        y = chn.apply_flat(H, x, N0, rng)
        if detector == "ml":
            idx, _ = det.ml_spatial_batch(y, H.H, cb)
        else:
            idx, _, _ = det.two_stage_sm_batch(y, H.H, scheme)
        errs = ((v ^ idx)[:, None] >> shifts) & 1
        return int(errs.sum()), 0

    return Link(name, scheme.n_t, n_r, b, b, int(spec.get("batch", 20000)), run)


def ofdm_config(spec: dict) -> ofdm.OfdmImConfig:
    name = _norm(spec["scheme"])
    variant = {"ofdm-gim1": "GIM-I", "ofdm-gim2": "GIM-II"}.get(name, "IM")
    n, k = int(spec.get("n", 4)), int(spec.get("k", 2))
    if name in ("ofdm", "mimo-ofdm", "vblast-ofdm"):
        n = k = 1
    return ofdm.OfdmImConfig(int(spec.get("n_f", 512)), n, k, int(spec.get("m", 2)), variant,
                             bool(spec.get("interleave", False)), int(spec.get("cp", int(spec.get("n_f", 512)) // 32)),
                             spec.get("modulation"), power=spec.get("power", "symbol"))


def _ofdm_link(spec: dict) -> Link:
    cfg = ofdm_config(spec)
    name = _norm(spec["scheme"])
    mimo = name in OFDM_MIMO
    n_t = int(spec.get("nt", 1)) if mimo else 1
    n_r = int(spec.get("nr", n_t)) if mimo else 1
    L = int(spec.get("taps", 10))
    if L - 1 > cfg.cp_len:
        raise UsageError(f"{L} taps need a cyclic prefix of at least {L - 1}")
    detector = spec.get("detector", "mmse-sic" if mimo else "llr")
    max_log = bool(spec.get("max_log", False))
    if mimo and detector != "mmse-sic":
        raise UsageError("MIMO-OFDM links use the mmse-sic detector")
    if not mimo and detector not in ("ml", "llr"):
        raise UsageError(f"detector {detector!r} not available for {name}")
    G, N, p = cfg.G, cfg.n, cfg.p

    def run(rng, n, N0):
        bits = rng.integers(0, 2, size=(n, n_t, G, p), dtype=np.uint8)
        sb = ofdm.build_subblocks(bits, cfg)                       # (n, n_t, G, N)
        x = ofdm.place(sb.reshape(n, n_t, G * N), cfg)
        s = ofdm.modulate(x, cfg)                                   # (n, n_t, T)
        ch = chn.draw_selective(n_r, n_t, L, rng, size=n)
        r = chn.apply_selective(ch, s, N0, rng)                     # (n, n_r, T)
        Y = ofdm.demodulate(r, cfg)                                 # (n, n_r, N_F)
        Hf = ch.frequency_response(cfg.n_f)                         # (n, N_F, n_r, n_t)
        Ys = ofdm.unplace(Y, cfg).reshape(n, n_r, G, N)
        Hs = ofdm.unplace(np.moveaxis(Hf, 1, -1), cfg).reshape(n, n_r, n_t, G, N)
        if mimo:
            out = det.mmse_sic_batch(np.moveaxis(Ys, 1, -1), np.moveaxis(Hs, (1, 2), (-2, -1)),
                                     cfg, N0, max_log=max_log)
            return _popcount_errors(out.bits, bits), int(out.illegal.sum())
        y1, h1 = Ys[:, 0], Hs[:, 0, 0]
        if detector == "ml":
            bh, _ = det.ml_subblock_batch(y1, h1, cfg)
            ill = 0
        else:
            bh, _, il = det.llr_subblock_batch(y1, h1, cfg, max(N0, 1e-300), max_log=max_log)
            ill = int(il.sum())
        return _popcount_errors(bh, bits[:, 0]), ill

    bpt = n_t * cfg.frame_bits
    default_batch = max(1, 40 // max(1, n_t * n_r // 2))
    return Link(name, n_t, n_r, bpt, bpt / (cfg.n_f + cfg.cp_len), int(spec.get("batch", default_batch)), run)


def make_link(spec: dict) -> Link:
    name = _norm(spec.get("scheme", ""))
    if name in SPATIAL:
        return _spatial_link(spec)
    if name in OFDM_SISO | OFDM_MIMO:
        return _ofdm_link(spec)
    raise UsageError(f"unknown scheme {spec.get('scheme')!r}")


@dataclass
class Experiment:
    scheme: dict
    snr_db: list
    max_trials: int = 100_000
    min_trials: int = 1
    min_errors: int = 100
    seed: int = 0
    label: str = ""
    metadata: dict = field(default_factory=lambda: dict(DESIGN_FLAGS))

    def __post_init__(self):
        self.snr_db = [float(s) for s in self.snr_db]
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise UsageError("SNR grid must be strictly increasing")
        if self.max_trials < 1:
            raise UsageError("max_trials must be >= 1")
        if not self.label:
            self.label = _norm(self.scheme.get("scheme", "link"))


@dataclass
class BerRecord:
    scheme: str
    n_t: int
    n_r: int
    snr_db: float
    ebn0_db: float
    trials: int
    bit_errors: int
    bits: int
    ber: float
    stderr: float
    illegal_patterns: int
    seconds: float
    below_resolution: bool = False


def _snr_key(snr_db: float) -> int:
    return int(round(snr_db * 1000)) + (1 << 31)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("IMPHY_THREADS", "1")))
    except ValueError:
        return 1


def run_point(exp: Experiment, snr_db: float, link: Link | None = None,
              N0: float | None = None) -> BerRecord:
    """Run one SNR point.  ``N0`` overrides the SNR-derived noise variance."""
    link = link or make_link(exp.scheme)
    noise = chn.NoiseSpec(snr_db, link.bpcu)
    n0 = noise.N0 if N0 is None else N0
    key = _snr_key(snr_db)
    t0 = time.perf_counter()
    trials = errors = illegal = 0
    batch_idx = 0
    workers = _workers()

    def job(i, size):
        rng = np.random.default_rng(np.random.SeedSequence(exp.seed, spawn_key=(key, i)))
        return link.run(rng, size, n0)

    def finished():
        return ((errors >= exp.min_errors and trials >= exp.min_trials)
                or trials >= exp.max_trials)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        while not finished():
            sizes = []
            planned = trials
            for _ in range(workers):
                if planned >= exp.max_trials:
                    break
                s = min(link.batch, exp.max_trials - planned)
                sizes.append(s)
                planned += s
            results = list(pool.map(job, range(batch_idx, batch_idx + len(sizes)), sizes))
            for s, (e, il) in zip(sizes, results):
                if finished():
                    break  # discard surplus batches so the outcome is worker-count independent
                trials += s
                errors += e
                illegal += il
                batch_idx += 1
    nbits = trials * link.bits_per_trial
    ber = errors / nbits
    return BerRecord(exp.label, link.n_t, link.n_r, snr_db, noise.ebn0_db, trials, errors, nbits, ber,
                     float(np.sqrt(ber * (1 - ber) / nbits)), illegal,
                     time.perf_counter() - t0, errors == 0)


def run_sweep(exp: Experiment) -> list[BerRecord]:
    if not exp.snr_db:
        return []
    link = make_link(exp.scheme)
    return [run_point(exp, s, link) for s in exp.snr_db]


CSV_HEADER = ["scheme", "n_T", "n_R", "snr_db", "ebn0_db", "trials", "bit_errors", "ber",
              "stderr", "illegal_patterns", "seconds"]


def _fmt(v: float) -> str:
    s = f"{v:.12g}"
    return "0" if s == "-0" else s


def records_to_csv(records, include_timing: bool = False) -> str:
    """CSV text; ``seconds`` is blank unless timing is requested, which keeps output byte-stable."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([r.scheme, r.n_t, r.n_r, _fmt(r.snr_db), _fmt(r.ebn0_db), r.trials, r.bit_errors,
                    _fmt(r.ber), _fmt(r.stderr), r.illegal_patterns,
                    _fmt(r.seconds) if include_timing else ""])
    return buf.getvalue()


def records_from_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def manifest(experiments, records, extra: dict | None = None) -> dict:
    doc = {
        "experiments": [asdict(e) for e in experiments],
        "records": [asdict(r) for r in records],
    }
    if extra:
        doc.update(extra)
    return doc


def write_manifest(path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ------------------------------------------------------------ presets

FIG6 = {
    "m": 2, "n": 4, "k": 2, "n_f": 512, "cp": 16, "taps": 10, "profile": "uniform",
    "detector": "mmse-sic", "power": "frame",
}


def fig6_experiments(mimo: str = "2x2", snr_db=None, frames: int = 10_000, seed: int = 0,
                     interleave: bool = True, min_errors: int = 100, max_frames: int | None = None,
                     power: str = "frame") -> list[Experiment]:
    """MIMO-OFDM-IM and the equal-rate V-BLAST-OFDM baseline with the fig6 preset parameters.

    Every point runs at least ``frames`` frames and continues (up to
    ``max_frames``) until ``min_errors`` bit errors are seen.
    """
    try:
        n_t, n_r = (int(v) for v in mimo.lower().split("x"))
    except ValueError:
        raise UsageError(f"--mimo expects NTxNR, got {mimo!r}") from None
    grid = list(snr_db) if snr_db is not None else [0, 5, 10, 15, 20, 25]
    base = dict(FIG6, nt=n_t, nr=n_r, interleave=interleave, power=power)
    base.pop("profile")
    out = []
    for scheme, label in (("mimo-ofdm-im", "mimo-ofdm-im"), ("mimo-ofdm", "v-blast-ofdm")):
        spec = dict(base, scheme=scheme)
        meta = dict(DESIGN_FLAGS, profile="uniform", preset="fig6")
        out.append(Experiment(spec, grid, max_trials=max_frames or 10 * frames, min_trials=frames,
                              min_errors=min_errors, seed=seed, label=label, metadata=meta))
    return out
