"""Regenerate the figure data sets as CSV files.

    python scripts/reproduce_figures.py --out results/          # full protocols
    python scripts/reproduce_figures.py --out results/ --quick  # small smoke run

One CSV per data set: state grids, realignment curves and per-player reward curves.
"""

from __future__ import annotations

import argparse
import math
import time
from pathlib import Path

from qcmab import experiments
from qcmab.agents import EpisodeConfig, policies_for
from qcmab.game import MachineConfig
from qcmab.states import a4, psi3, s4, singlet


def write(path: Path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        experiments.write_csv(columns, rows, fh)
    print(f"wrote {path}")


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quick", action="store_true", help="shrink every protocol for a fast check")
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    q = args.quick
    seed = args.seed
    ones = MachineConfig()
    t0 = time.perf_counter()

    # singlet over (theta1, theta2): exact plus 1000 turns x 20 repetitions
    spec = experiments.GridSpec(singlet(), step=15 if q else 5, mode="both", trials=100 if q else 1000,
                                repetitions=3 if q else 20, seed=seed)
    write(out / "singlet_grid.csv", *experiments.run_grid(spec))

    # N=2 realignment, one player moving
    n2 = [
        EpisodeConfig(singlet(), (policy, "passive"), ones, horizon=300 if q else 2000, eval_mode="montecarlo",
                      trials=200 if q else 1000, repetitions=4 if q else 20, n_initial=10 if q else 100, seed=seed)
        for policy in ("random", "incremental")
    ]
    write(out / "realign_n2.csv", *experiments.run_realign(n2))

    # psi3 over (theta1, theta2, theta3)
    write(out / "psi3_grid.csv", *experiments.run_grid(experiments.GridSpec(psi3(), step=30 if q else 5)))

    # N=3 realignment with 1, 2, 3 active players, and per-player rewards
    base = dict(horizon=500 if q else 10_000, repetitions=3 if q else 10, n_initial=5 if q else 30, seed=seed)
    n3 = [EpisodeConfig(psi3(), policies_for(3, k), ones, eval_mode="montecarlo", trials=200 if q else 1000, **base)
          for k in (1, 2, 3)]
    write(out / "realign_n3.csv", *experiments.run_realign(n3))
    for k in (1, 2):
        cols, rows, _ = experiments.run_stability(EpisodeConfig(psi3(), policies_for(3, k), ones, **base))
        write(out / f"stability_{k}active.csv", cols, rows)

    # four photons with player 4 fixed at 0
    step4 = 30 if q else 5
    write(out / "s4_grid.csv", *experiments.run_grid(experiments.GridSpec(s4(), step=step4, fixed={3: 0.0})))
    for name, phi in (("0", 0.0), ("90", math.pi / 2), ("180", math.pi)):
        spec = experiments.GridSpec(a4(phi), step=step4, fixed={3: 0.0})
        write(out / f"a4_phi{name}_grid.csv", *experiments.run_grid(spec))

    print(f"done in {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
