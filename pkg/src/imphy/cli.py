"""Command-line front end: ``imphy {codebook,rate,dmin,ber}``.

Parameters come from an optional JSON config (``--config``) overridden by
flat ``--key value`` flags.  Errors go to stderr prefixed with a stable code.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import analysis, sim
from .combinatorics import binomial
from .errors import CapacityError, ImphyError, UsageError
from .ofdm import OfdmImConfig, realization_count
from .spatial import enumerate_codebook, load_esm_table, make_scheme

SPATIAL_KEYS = {"scheme", "nt", "na", "m", "modulation", "esm_table"}
OFDM_KEYS = {"n_f", "n", "k", "cp", "power"}
KEYS = {
    "codebook": SPATIAL_KEYS,
    "rate": SPATIAL_KEYS | OFDM_KEYS,
    "dmin": {"schemes"},
    "ber": SPATIAL_KEYS | OFDM_KEYS | {
        "nr", "detector", "taps", "interleave", "max_log", "batch", "snr", "max_trials",
        "min_trials", "min_errors", "label", "mimo", "frames", "max_frames", "timing"},
}
ALIASES = {"nf": "n_f", "n-f": "n_f", "cp_len": "cp", "cp-len": "cp", "max-log": "max_log",
           "max-trials": "max_trials", "min-trials": "min_trials", "min-errors": "min_errors",
           "max-frames": "max_frames", "esm-table": "esm_table"}


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(extra: list[str], command: str) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise UsageError(f"flag --{key} needs a value")
            val = extra[i + 1]
            i += 2
        key = ALIASES.get(key, key).replace("-", "_")
        if key not in KEYS[command]:
            raise UsageError(f"unknown key {key!r} for {command}; allowed: {', '.join(sorted(KEYS[command]))}")
        out[key] = _value(val)
    return out


def resolve_config(args, extra) -> dict:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        cfg = {ALIASES.get(k, k): v for k, v in cfg.items()}
        unknown = set(cfg) - KEYS[args.command] - {"seed", "preset", "out"}
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)} for {args.command}")
        for k in ("seed", "preset", "out"):
            if k in cfg and getattr(args, k) is None:
                setattr(args, k, cfg[k])
            cfg.pop(k, None)
    cfg.update(parse_overrides(extra, args.command))
    return cfg


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------ formatting

def fmt_num(v: float) -> str:
    if abs(v) < 1e-14:
        return "0"
    s = f"{v:.12g}"
    return "0" if s in ("-0", "0") else s


def rationalize(z: complex, tol: float = 1e-12) -> str:
    """Exact-looking form for values built from 0, +-1 and +-1/sqrt(2)."""
    def unit(a, b):
        parts = []
        if a:
            parts.append("1" if a > 0 else "-1")
        if b:
            parts.append(("+" if parts and b > 0 else "-" if b < 0 else "") + "j")
        return "".join(parts)

    for scale, suffix in ((1.0, ""), (np.sqrt(2), "/√2")):
        a, b = z.real * scale, z.imag * scale
        ra, rb = round(a), round(b)
        if abs(a - ra) < tol and abs(b - rb) < tol and {ra, rb} <= {-1, 0, 1}:
            if ra == 0 and rb == 0:
                return "0"
            num = unit(ra, rb)
            if suffix and ra and rb:
                return f"({num}){suffix}"
            return num + suffix
    return f"{fmt_num(z.real)}{'+' if z.imag >= 0 else '-'}{fmt_num(abs(z.imag))}j"


def _scheme_from_cfg(cfg: dict):
    if "scheme" not in cfg:
        raise UsageError("missing --scheme")
    esm = load_esm_table(cfg["esm_table"]) if cfg.get("esm_table") else None
    kind = str(cfg["scheme"])
    return make_scheme(kind, int(cfg.get("nt", 1)), int(cfg.get("m", 2)), int(cfg.get("na", 1)),
                       cfg.get("modulation"), esm=esm)


# ------------------------------------------------------------ commands

def cmd_codebook(args, cfg) -> str:
    scheme = _scheme_from_cfg(cfg)
    try:
        rows = enumerate_codebook(scheme)
    except CapacityError as exc:
        raise CapacityError(f"{exc}; pick a smaller n_T or M, or use `imphy dmin` for analysis") from None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = scheme.n_t
    w.writerow(["bits"] + [f"x{i + 1}" for i in range(n)]
               + [f"x{i + 1}_{c}" for i in range(n) for c in ("re", "im")])
    for cw in rows:
        w.writerow([cw.bits] + [rationalize(v) for v in cw.vector]
                   + [fmt_num(p) for v in cw.vector for p in (v.real, v.imag)])
    return buf.getvalue()


def _rate_rows(cfg: dict) -> list[tuple[str, object]]:
    kind = sim._norm(cfg.get("scheme", ""))
    if kind in sim.OFDM_SISO | sim.OFDM_MIMO:
        spec = dict(cfg)
        spec.setdefault("scheme", kind)
        c = sim.ofdm_config(spec)
        rows = [("scheme", kind), ("N_F", c.n_f), ("N", c.n), ("G", c.G), ("M", c.M)]
        if c.variant != "GIM-I":
            rows.append(("K", c.k))
            rows.append(("index_bits_per_subblock", c.p1))
        rows += [("realizations_per_subblock", realization_count(c)),
                 ("bits_per_subblock", c.p), ("bits_per_frame", c.frame_bits)]
        if c.variant == "GIM-II":
            im = OfdmImConfig(c.n_f, c.n, c.k, c.M)
            gain = Fraction(c.p - im.p, im.p) * 100
            rows += [("im_bits_per_subblock", im.p), ("gain_over_im_percent", fmt_num(float(gain)))]
        rows += [("cp_len", c.cp_len), ("cp_factor", f"{c.n_f}/{c.n_f + c.cp_len}"),
                 ("cp_factor_value", fmt_num(c.n_f / (c.n_f + c.cp_len))),
                 ("bits_per_subcarrier", fmt_num(c.frame_bits / c.n_f)),
                 ("spectral_efficiency_cp", fmt_num(c.frame_bits / (c.n_f + c.cp_len)))]
        return rows
    if kind == "binomial":
        v = binomial(int(cfg.get("n", 0)), int(cfg.get("k", 0)))
        return [("binomial", v), ("leading", f"{v / 10 ** (len(str(v)) - 1):.4f}e{len(str(v)) - 1}")]
    s = _scheme_from_cfg(cfg)
    return [("scheme", s.kind), ("n_T", s.n_t), ("n_A", s.n_a), ("M", s.constellation.order),
            ("spatial_bits", s.spatial_bits), ("symbol_bits", s.symbol_bits), ("bpcu", s.bits_per_use)]


def cmd_rate(args, cfg) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in _rate_rows(cfg):
        w.writerow([k, v])
    return buf.getvalue()


def cmd_dmin(args, cfg) -> str:
    if args.preset == "fig2":
        reports = [r for _, r in analysis.fig2_reports()]
    elif args.preset:
        raise UsageError(f"unknown dmin preset {args.preset!r}; available: fig2")
    else:
        specs = cfg.get("schemes")
        if not specs:
            raise UsageError("dmin needs --preset fig2 or a config with a 'schemes' list")
        reports = []
        for spec in specs:
            unknown = set(spec) - SPATIAL_KEYS
            if unknown:
                raise UsageError(f"unknown scheme keys {sorted(unknown)}")
            reports.append(analysis.d_min(_scheme_from_cfg(spec), str(spec["scheme"]).lower()))
    return analysis.dmin_csv(reports)


def _grid(v) -> list[float]:
    if v is None:
        return None
    if isinstance(v, (int, float)):
        return [float(v)]
    if isinstance(v, list):
        return [float(x) for x in v]
    text = str(v)
    if ":" in text:
        a, b, step = (float(x) for x in text.split(":"))
        return [float(x) for x in np.round(np.arange(a, b + step / 2, step), 9)]
    return [float(x) for x in text.split(",")]


def cmd_ber(args, cfg) -> tuple[str, dict]:
    seed = int(args.seed or 0)
    grid = _grid(cfg.get("snr"))
    if args.preset == "fig6":
        exps = sim.fig6_experiments(
            str(cfg.get("mimo", "2x2")), grid, int(cfg.get("frames", 10_000)), seed,
            bool(cfg.get("interleave", True)), int(cfg.get("min_errors", 100)),
            cfg.get("max_frames"), str(cfg.get("power", "frame")))
    elif args.preset:
        raise UsageError(f"unknown ber preset {args.preset!r}; available: fig6")
    else:
        if "scheme" not in cfg:
            raise UsageError("ber needs --scheme or --preset fig6")
        spec = {k: v for k, v in cfg.items()
                if k not in {"snr", "max_trials", "min_trials", "min_errors", "label", "mimo",
                             "frames", "max_frames", "timing"}}
        if spec.get("esm_table"):
            raise UsageError("custom ESM tables are not supported by the ber command")
        exps = [sim.Experiment(spec, grid if grid is not None else [0.0, 10.0, 20.0],
                               int(cfg.get("max_trials", 100_000)), int(cfg.get("min_trials", 1)),
                               int(cfg.get("min_errors", 100)), seed, str(cfg.get("label", "")))]
    records = []
    for e in exps:
        sim.make_link(e.scheme)  # validate before running anything
    for e in exps:
        records.extend(sim.run_sweep(e))
    text = sim.records_to_csv(records, include_timing=bool(cfg.get("timing", False)))
    doc = sim.manifest(exps, records, {"command": "ber", "preset": args.preset, "seed": seed,
                                       "resolved_config": cfg})
    return text, doc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON parameter document")
    common.add_argument("--seed", type=int, default=None, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--preset", help="named parameter set (dmin: fig2, ber: fig6)")
    p = argparse.ArgumentParser(prog="imphy", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("codebook", parents=[common], help="dump a spatial codebook")
    sub.add_parser("rate", parents=[common], help="bits per channel use / per frame")
    sub.add_parser("dmin", parents=[common], help="minimum squared Euclidean distance report")
    sub.add_parser("ber", parents=[common], help="Monte Carlo BER sweep")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        cfg = resolve_config(args, extra)
        if args.command == "codebook":
            _emit(cmd_codebook(args, cfg), args.out)
        elif args.command == "rate":
            _emit(cmd_rate(args, cfg), args.out)
        elif args.command == "dmin":
            _emit(cmd_dmin(args, cfg), args.out)
        else:
            text, doc = cmd_ber(args, cfg)
            _emit(text, args.out)
            if args.out:
                sim.write_manifest(Path(str(args.out) + ".manifest.json"), doc)
    except ImphyError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
