"""Minimum squared Euclidean distance of SIMO / SM / ESM / QSM at 4, 6, 8 and 10 bpcu.

Writes a CSV (default results/fig2_dmin.csv) and prints each scheme's
distance relative to SIMO at the same rate.
"""
import argparse
from pathlib import Path

from imphy import analysis


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/fig2_dmin.csv")
    args = ap.parse_args()

    rows = analysis.fig2_reports()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(analysis.dmin_csv([r for _, r in rows]))

    table = {(cfg, r.scheme): r for cfg, r in rows}
    print(f"{'cfg':>3} {'bpcu':>4} " + " ".join(f"{s:>10}" for s in ("simo", "sm", "esm", "qsm"))
          + "   ratios to SIMO (sm / esm / qsm)")
    for cfg in analysis.FIG2_CONFIGS:
        d = {s: table[(cfg, s)].d_min for s in ("simo", "sm", "esm", "qsm")}
        ratios = " / ".join(f"{d[s] / d['simo']:.3g}" for s in ("sm", "esm", "qsm"))
        print(f"{cfg:>3} {table[(cfg, 'sm')].bpcu:>4} " + " ".join(f"{v:10.4g}" for v in d.values())
              + f"   {ratios}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
