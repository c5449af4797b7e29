"""Experiment runners behind the command-line interface.

Every runner returns ``(columns, rows)`` ready for CSV output; angles are in
degrees. Column layouts are versioned by ``CSV_SCHEMA_VERSION`` and pinned by
golden-file tests.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import agents, rules, solver
from .game import (
    MachineConfig,
    conflict_probability_batch,
    expected_pondered_index,
    expected_rewards_batch,
    jain_index_batch,
    pondered_index_batch,
    simulate_turns,
)
from .qcore import DimensionError, StateVector, rotated_probabilities

CSV_SCHEMA_VERSION = 1
# rows of Monte Carlo turns simulated per chunk in grid scans
_MC_CHUNK = 2_000_000


def grid_axis(start: float, stop: float, step: float) -> np.ndarray:
    """``start, start+step, ...`` strictly below ``stop``; the step must divide the range."""
    if step <= 0:
        raise ValueError("step must be positive")
    count = (stop - start) / step
    if count < 1 or not math.isclose(count, round(count), abs_tol=1e-9):
        raise ValueError(f"step {step} does not divide the range [{start}, {stop})")
    return start + step * np.arange(int(round(count)))


@dataclass
class GridSpec:
    state: StateVector
    start: float = 0.0
    stop: float = 180.0
    step: float = 5.0
    fixed: dict[int, float] = field(default_factory=dict)  # 0-based player -> degrees
    machines: MachineConfig = field(default_factory=MachineConfig)
    mode: str = "exact"  # exact | montecarlo | both
    trials: int = 1000
    repetitions: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("exact", "montecarlo", "both"):
            raise ValueError(f"unknown mode {self.mode!r}")
        n = self.state.n_players
        bad = [k for k in self.fixed if not 0 <= k < n]
        if bad:
            raise DimensionError(f"fixed players {bad} out of range for {n} players")
        if self.trials < 1 or self.repetitions < 1:
            raise ValueError("trials and repetitions must be at least 1")

    def angle_grid(self) -> np.ndarray:
        n = self.state.n_players
        axis = grid_axis(self.start, self.stop, self.step)
        varied = [j for j in range(n) if j not in self.fixed]
        points = np.array(list(itertools.product(axis, repeat=len(varied)))).reshape(-1, len(varied))
        out = np.empty((points.shape[0], n))
        out[:, varied] = points
        for j, value in self.fixed.items():
            out[:, j] = value
        return out


def grid_columns(n: int, mode: str) -> list[str]:
    cols = [f"theta_{j}" for j in range(1, n + 1)]
    if mode in ("exact", "both"):
        cols += [f"exp_reward_{j}" for j in range(1, n + 1)]
        cols += ["exp_total", "exp_jain", "conflict_prob", "exp_ip"]
    if mode in ("montecarlo", "both"):
        cols += [f"mc_reward_{j}" for j in range(1, n + 1)]
        cols += ["mc_total", "mc_jain", "mc_ip"]
    return cols


def grid_metrics(spec: GridSpec) -> dict[str, np.ndarray]:
    """Column arrays for every grid point."""
    state, m = spec.state, spec.machines
    n = state.n_players
    angles = spec.angle_grid()
    rad = np.deg2rad(angles)
    out: dict[str, np.ndarray] = {f"theta_{j + 1}": angles[:, j] for j in range(n)}
    if spec.mode in ("exact", "both"):
        exp = expected_rewards_batch(state, rad, m)
        for j in range(n):
            out[f"exp_reward_{j + 1}"] = exp[:, j]
        out["exp_total"] = exp.sum(axis=1)
        out["exp_jain"] = jain_index_batch(exp)
        out["conflict_prob"] = conflict_probability_batch(state, rad)
        out["exp_ip"] = expected_pondered_index(exp, m)
    if spec.mode in ("montecarlo", "both"):
        rng = np.random.default_rng(spec.seed)
        probs = rotated_probabilities(state, rad)
        reps = spec.repetitions
        mean_r = np.zeros((len(angles), n))
        jain = np.zeros(len(angles))
        ip = np.zeros(len(angles))
        ip_count = np.zeros(len(angles))
        chunk = max(1, _MC_CHUNK // spec.trials)
        for rep in range(reps):
            for lo in range(0, len(angles), chunk):
                sl = slice(lo, lo + chunk)
                acc, pay = simulate_turns(probs[sl], m, n, spec.trials, rng)
                mean_r[sl] += acc / spec.trials
                jain[sl] += jain_index_batch(acc)
                value = pondered_index_batch(acc, pay.sum(axis=1))
                ok = ~np.isnan(value)
                ip[sl] += np.where(ok, value, 0.0)
                ip_count[sl] += ok
        mean_r /= reps
        for j in range(n):
            out[f"mc_reward_{j + 1}"] = mean_r[:, j]
        out["mc_total"] = mean_r.sum(axis=1)
        out["mc_jain"] = jain / reps
        with np.errstate(invalid="ignore"):
            out["mc_ip"] = np.where(ip_count > 0, ip / np.maximum(ip_count, 1), np.nan)
    return out


def run_grid(spec: GridSpec) -> tuple[list[str], list[list[float]]]:
    cols = grid_columns(spec.state.n_players, spec.mode)
    data = grid_metrics(spec)
    return cols, np.column_stack([data[c] for c in cols]).tolist()


@dataclass
class SimulateSpec:
    state: StateVector
    angles_deg: Sequence[float]
    machines: MachineConfig = field(default_factory=MachineConfig)
    turns: int = 1000
    repetitions: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.angles_deg) != self.state.n_players:
            raise DimensionError(f"{len(self.angles_deg)} angles given for {self.state.n_players} players")
        if self.turns < 1 or self.repetitions < 1:
            raise ValueError("turns and repetitions must be at least 1")


def run_simulate(spec: SimulateSpec) -> tuple[list[str], list[list[float]]]:
    """Accumulated ledgers of ``repetitions`` independent runs at fixed angles."""
    n = spec.state.n_players
    rng = np.random.default_rng(spec.seed)
    probs = rotated_probabilities(spec.state, np.deg2rad([list(spec.angles_deg)]))
    probs = np.repeat(probs, spec.repetitions, axis=0)
    acc, pay = simulate_turns(probs, spec.machines, n, spec.turns, rng)
    jain = jain_index_batch(acc)
    ip = pondered_index_batch(acc, pay.sum(axis=1))
    cols = ["repetition"] + [f"R_{j}" for j in range(1, n + 1)] + ["X_A", "X_B", "jain", "ip"]
    rows = [
        [rep, *acc[rep], pay[rep, 0], pay[rep, 1], jain[rep], ip[rep]]
        for rep in range(spec.repetitions)
    ]
    return cols, rows


def realign_columns(n: int) -> list[str]:
    return (
        ["policy", "n_active", "checkpoint", "mean_ip", "stderr_ip"]
        + [f"mean_reward_{j}" for j in range(1, n + 1)]
    )


def run_realign(configs: Iterable[agents.EpisodeConfig]) -> tuple[list[str], list[list]]:
    """Convergence curves (mean and standard error of the checkpoint pondered index)."""
    rows: list[list] = []
    n = None
    for cfg in configs:
        n = cfg.n_players
        traj = agents.run_episode(cfg)
        policy = next((p for p in cfg.policies if p != "passive"), "passive")
        mean_ip, se_ip = traj.mean_pondered(), traj.stderr_pondered()
        rewards = traj.mean_rewards()
        for c, cp in enumerate(traj.checkpoints):
            rows.append([policy, int(cfg.active.sum()), int(cp), mean_ip[c], se_ip[c], *rewards[c]])
    if n is None:
        raise ValueError("no configurations given")
    return realign_columns(n), rows


def stability_columns(n: int) -> list[str]:
    return (
        ["checkpoint", "mean_ip", "active_mean", "passive_mean"]
        + [f"reward_{j}" for j in range(1, n + 1)]
        + [f"stderr_{j}" for j in range(1, n + 1)]
        + [f"active_{j}" for j in range(1, n + 1)]
    )


def run_stability(cfg: agents.EpisodeConfig) -> tuple[list[str], list[list], agents.StabilityResult]:
    n = cfg.n_players
    active = cfg.active
    traj = agents.run_episode(cfg)
    result = agents.StabilityResult(
        checkpoints=traj.checkpoints,
        active=active,
        mean_rewards=traj.mean_rewards(),
        stderr_rewards=traj.stderr_rewards(),
        trajectory=traj,
    )
    mean_ip = traj.mean_pondered()
    rows = []
    for c, cp in enumerate(traj.checkpoints):
        r = result.mean_rewards[c]
        act = float(r[active].mean()) if active.any() else math.nan
        pas = float(r[~active].mean()) if (~active).any() else math.nan
        rows.append([int(cp), mean_ip[c], act, pas, *r, *result.stderr_rewards[c], *active.astype(int)])
    return stability_columns(n), rows, result


def verify_state(state: StateVector, tolerance: float = rules.DEFAULT_TOLERANCE) -> dict:
    report = rules.certify(state, tolerance)
    out = report.to_dict()
    out["n_players"] = state.n_players
    return out


def solve(config: solver.SearchConfig, seed: int, tolerance: float = rules.DEFAULT_TOLERANCE):
    """Search a state and certify it; returns ``(state, report_dict)``."""
    result = solver.search_state(config, np.random.default_rng(seed))
    cert = rules.certify(result.state, tolerance)
    report = {
        "n_players": config.n_players,
        "objective": result.objective,
        "best_restart": result.restart,
        "restarts": config.restarts,
        "theta_samples": config.theta_samples,
        "seed": seed,
        "certification": cert.to_dict(),
    }
    return result.state, report


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return ""
        if value.is_integer() and abs(value) < 1e15:
            return str(int(value))
        return repr(value)
    return str(value)


def write_csv(columns: Sequence[str], rows: Iterable[Sequence], stream) -> None:
    writer = csv.writer(stream, lineterminator="\r\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def to_csv_text(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    write_csv(columns, rows, buf)
    return buf.getvalue()
