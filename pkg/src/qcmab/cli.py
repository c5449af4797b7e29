"""Command-line front end.

    qcmab grid       metrics over an angle grid (CSV)
    qcmab simulate   Monte Carlo ledgers at fixed angles (CSV)
    qcmab realign    realignment convergence curves (CSV)
    qcmab stability  per-player reward curves with passive players (CSV)
    qcmab verify     certify a state file (JSON; exit 0 pass, 1 fail)
    qcmab solve      search a rule-satisfying state (state file + JSON report)

Angles are in degrees. ``--config FILE`` reads flat ``key=value`` lines whose
keys are flag names; explicit flags win. ``QCMAB_SEED`` sets the default seed.
Exit codes: 0 success, 1 certification failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import agents, experiments, solver
from .game import MachineConfig
from .rules import DEFAULT_TOLERANCE
from .states import StateFileError, build_state, load_state, save_state

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SEED_ENV = "QCMAB_SEED"


class UsageError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _fixed(text: str) -> dict[int, float]:
    """``"4=0,3=30"`` -> {3: 0.0, 2: 30.0} (players are 1-based on the command line)."""
    out = {}
    for item in filter(None, (x.strip() for x in text.split(","))):
        player, _, value = item.partition("=")
        out[int(player) - 1] = float(value)
    return out


def read_config_file(path: str) -> dict[str, str]:
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for number, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{number}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


def _add_common(p: argparse.ArgumentParser, state_default: str | None = None) -> None:
    p.add_argument("--config", help="flat key=value file mirroring flag names")
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (default ${SEED_ENV} or 0)")
    p.add_argument("--out", "-o", help="output path (default stdout)")


def _add_machines(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pa", type=float, default=1.0, help="payout probability of machine A")
    p.add_argument("--pb", type=float, default=1.0, help="payout probability of machine B")


def _add_realign_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--state", default="singlet", help="state spec (singlet, psi3, s4, a4:90, ...) or file")
    p.add_argument("--active", type=int, default=1, help="number of active players (players 1..k)")
    p.add_argument("--n-init", type=int, default=100, help="random initial angle configurations")
    p.add_argument("--init", help="explicit initial angles, ';'-separated tuples like '0,90;45,10'")
    p.add_argument("--reps", type=int, default=20, help="repetitions per initial configuration")
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--checkpoints", help="comma-separated turns (default 1,2,3,5,7,10,...)")
    p.add_argument("--eval", dest="eval_mode", choices=agents.EVAL_MODES, default="exact")
    p.add_argument("--trials", type=int, default=1000, help="Monte Carlo turns per checkpoint evaluation")
    p.add_argument("--memory", type=int, default=8)
    p.add_argument("--threshold", type=int, default=2)
    p.add_argument("--angle-step", type=int, default=5)
    _add_machines(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcmab", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("grid", help="metrics over an angle grid")
    _add_common(p)
    p.add_argument("--state", default="singlet")
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--stop", type=float, default=180.0)
    p.add_argument("--step", type=float, default=5.0)
    p.add_argument("--fixed", default="", help="fixed players, e.g. '4=0' (1-based)")
    p.add_argument("--mode", choices=("exact", "montecarlo", "both"), default="exact")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--reps", type=int, default=20)
    _add_machines(p)

    p = sub.add_parser("simulate", help="Monte Carlo ledgers at fixed angles")
    _add_common(p)
    p.add_argument("--state", default="singlet")
    p.add_argument("--angles", required=False, default=None, help="comma-separated degrees, one per player")
    p.add_argument("--turns", type=int, default=1000)
    p.add_argument("--reps", type=int, default=20)
    _add_machines(p)

    p = sub.add_parser("realign", help="realignment convergence curves")
    _add_common(p)
    _add_realign_opts(p)
    p.add_argument("--policy", default="random", help="random, incremental, or a comma list to compare")

    p = sub.add_parser("stability", help="per-player rewards with passive players")
    _add_common(p)
    _add_realign_opts(p)
    p.add_argument("--policy", default="random", choices=("random", "incremental"))

    p = sub.add_parser("verify", help="certify a state file")
    p.add_argument("state_file")
    p.add_argument("--tol", type=float, default=DEFAULT_TOLERANCE)
    p.add_argument("--out", "-o", help="write the JSON report here as well")

    p = sub.add_parser("solve", help="search a rule-satisfying state")
    _add_common(p)
    p.add_argument("--n", type=int, required=False, default=None, help="number of players")
    p.add_argument("--restarts", type=int, default=64)
    p.add_argument("--theta-samples", type=int, default=12)
    p.add_argument("--max-iter", type=int, default=3000)
    p.add_argument("--w-inv", type=float, default=1.0)
    p.add_argument("--w-perm", type=float, default=1.0)
    p.add_argument("--w-mirror", type=float, default=1.0)
    p.add_argument("--w-conflict", type=float, default=1.0)
    p.add_argument("--w-eigen", type=float, default=1.0, help="strict invariance penalty (0 disables)")
    p.add_argument("--tol", type=float, default=DEFAULT_TOLERANCE, help="certification tolerance")
    p.add_argument("--report", help="JSON report path (default: <out>.report.json)")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if not path:
        return args
    values = read_config_file(path)
    sub = parser._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    known = {a.dest: a for a in sub._actions}  # noqa: SLF001
    defaults = {}
    for key, raw in values.items():
        if key not in known or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        action = known[key]
        try:
            defaults[key] = action.type(raw) if action.type else raw
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {key}: {raw!r}") from exc
    sub.set_defaults(**defaults)
    # explicit flags override the file
    return parser.parse_args(argv)


def _open_out(path: str | None):
    if path is None:
        return sys.stdout, False
    try:
        return open(path, "w", newline="", encoding="utf-8"), True
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _emit_csv(columns, rows, path: str | None) -> None:
    stream, close = _open_out(path)
    try:
        experiments.write_csv(columns, rows, stream)
    finally:
        if close:
            stream.close()


def _state(text: str):
    try:
        return build_state(text)
    except StateFileError:
        raise
    except (ValueError, IndexError) as exc:
        raise UsageError(f"bad state spec {text!r}: {exc}") from exc


def _episode_configs(args: argparse.Namespace, seed: int, policies: Sequence[str]) -> list[agents.EpisodeConfig]:
    state = _state(args.state)
    init = None
    if args.init:
        init = [_ints(chunk) for chunk in args.init.split(";") if chunk.strip()]
    checkpoints = tuple(_ints(args.checkpoints)) if args.checkpoints else None
    return [
        agents.EpisodeConfig(
            state=state,
            policies=agents.policies_for(state.n_players, args.active, policy),
            machines=MachineConfig(args.pa, args.pb),
            horizon=args.horizon,
            checkpoints=checkpoints,
            eval_mode=args.eval_mode,
            trials=args.trials,
            repetitions=args.reps,
            n_initial=args.n_init,
            initial_angles=init,
            seed=seed,
            memory_capacity=args.memory,
            conflict_threshold=args.threshold,
            angle_step=args.angle_step,
        )
        for policy in policies
    ]


def cmd_grid(args, seed: int) -> int:
    spec = experiments.GridSpec(
        state=_state(args.state),
        start=args.start,
        stop=args.stop,
        step=args.step,
        fixed=_fixed(args.fixed),
        machines=MachineConfig(args.pa, args.pb),
        mode=args.mode,
        trials=args.trials,
        repetitions=args.reps,
        seed=seed,
    )
    _emit_csv(*experiments.run_grid(spec), args.out)
    return EXIT_OK


def cmd_simulate(args, seed: int) -> int:
    state = _state(args.state)
    angles = _floats(args.angles) if args.angles else [0.0] * state.n_players
    spec = experiments.SimulateSpec(state, angles, MachineConfig(args.pa, args.pb), args.turns, args.reps, seed)
    _emit_csv(*experiments.run_simulate(spec), args.out)
    return EXIT_OK


def cmd_realign(args, seed: int) -> int:
    policies = [p.strip() for p in args.policy.split(",") if p.strip()]
    _emit_csv(*experiments.run_realign(_episode_configs(args, seed, policies)), args.out)
    return EXIT_OK


def cmd_stability(args, seed: int) -> int:
    (cfg,) = _episode_configs(args, seed, [args.policy])
    columns, rows, _ = experiments.run_stability(cfg)
    _emit_csv(columns, rows, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        state = load_state(args.state_file)
    except StateFileError as exc:
        print(f"error: {args.state_file}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = experiments.verify_state(state, args.tol)
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return EXIT_OK if report["pass"] else EXIT_FAIL


def cmd_solve(args, seed: int) -> int:
    if args.n is None:
        raise UsageError("solve needs --n")
    if not args.out:
        raise UsageError("solve needs --out for the state file")
    config = solver.SearchConfig(
        n_players=args.n,
        theta_samples=args.theta_samples,
        restarts=args.restarts,
        max_iterations=args.max_iter,
        w_inv=args.w_inv,
        w_perm=args.w_perm,
        w_mirror=args.w_mirror,
        w_conflict=args.w_conflict,
        w_eigen=args.w_eigen,
    )
    state, report = experiments.solve(config, seed, args.tol)
    try:
        save_state(state, args.out)
        report_path = args.report or f"{args.out}.report.json"
        Path(report_path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write output: {exc}") from exc
    print(json.dumps({k: report[k] for k in ("n_players", "objective", "best_restart", "seed")}))
    return EXIT_OK if report["certification"]["pass"] else EXIT_FAIL


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
        if args.command == "verify":
            return cmd_verify(args)
        seed = args.seed if args.seed is not None else _default_seed()
        handler = {
            "grid": cmd_grid,
            "simulate": cmd_simulate,
            "realign": cmd_realign,
            "stability": cmd_stability,
            "solve": cmd_solve,
        }[args.command]
        return handler(args, seed)
    except SystemExit as exc:  # argparse
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, StateFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
