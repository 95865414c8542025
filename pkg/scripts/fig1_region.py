"""Regenerate the MER optimality region (boundary P_R versus P_S).

Writes a CSV with the exact, large-n_S and Jensen boundaries and, for
comparison, the boundary of the budget-preserving slope.

    python scripts/fig1_region.py --out fig1.csv
"""

import argparse
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from mer_relay.cli import write_csv
from mer_relay.criteria import boundary_db


@dataclass
class RegionConfig:
    p_s_db: Tuple[float, float, float] = (0.0, 20.0, 1.0)
    rhos: Tuple[float, ...] = (0.3, 0.5)
    n_s: Tuple[int, ...] = (2, 4)
    n_r: int = 2
    criteria: Tuple[str, ...] = field(default=("exact", "large_ns", "jensen", "saturated"))


def run(cfg: RegionConfig):
    start, stop, step = cfg.p_s_db
    grid = np.arange(start, stop + step / 2, step)
    rows = []
    for ps in grid:
        for rho in cfg.rhos:
            for n_s in cfg.n_s:
                rows.append([float(ps), rho, n_s] +
                            [boundary_db(float(ps), rho, n_s, cfg.n_r, criterion=c)
                             for c in cfg.criteria])
    columns = ["p_s_db", "rho", "n_s"] + [f"p_r_boundary_{c}_db" for c in cfg.criteria]
    return columns, rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", default="fig1_region.csv")
    ap.add_argument("--step", type=float, default=1.0)
    args = ap.parse_args()
    cfg = RegionConfig(p_s_db=(0.0, 20.0, args.step))
    columns, rows = run(cfg)
    write_csv(args.out, columns, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    for r in rows[:: max(1, len(rows) // 8)]:
        print("  " + "  ".join(f"{v:.2f}" if isinstance(v, float) else str(v) for v in r))


if __name__ == "__main__":
    main()
