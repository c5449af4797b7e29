"""Two-machine competitive bandit: reward splitting, accounting and fairness.

Outcome H sends a player to machine A, V to machine B. A machine that pays
out splits its unit reward evenly among the players that selected it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .qcore import (
    Angles,
    DimensionError,
    StateVector,
    _as_radians,
    apply_rotations,
    outcome_bits,
    outcome_distribution,
    rotated_probabilities,
    sample_outcome,
    sample_outcomes,
)

MACHINE_A, MACHINE_B = 0, 1


@dataclass(frozen=True)
class MachineConfig:
    """Bernoulli payout probabilities of machines A and B (payout is 1)."""

    p_a: float = 1.0
    p_b: float = 1.0

    def __post_init__(self) -> None:
        for name in ("p_a", "p_b"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    @property
    def total(self) -> float:
        return self.p_a + self.p_b


@dataclass(frozen=True)
class TurnResult:
    outcome: int
    selections: tuple[int, ...]
    payouts: tuple[int, int]
    rewards: tuple[float, ...]


@dataclass
class RewardLedger:
    """Accumulated player rewards and machine payouts."""

    n_players: int
    rewards: np.ndarray | None = None
    payouts: np.ndarray | None = None
    turns: int = 0

    def __post_init__(self) -> None:
        if self.rewards is None:
            self.rewards = np.zeros(self.n_players)
        if self.payouts is None:
            self.payouts = np.zeros(2)

    def record(self, turn: TurnResult) -> None:
        self.rewards = self.rewards + np.asarray(turn.rewards)
        self.payouts = self.payouts + np.asarray(turn.payouts)
        self.turns += 1

    @property
    def total_reward(self) -> float:
        return float(self.rewards.sum())

    @property
    def total_payout(self) -> float:
        return float(self.payouts.sum())


def split_rewards(selections: Sequence[int], payouts: Sequence[int]) -> np.ndarray:
    """Per-player reward: a paying machine's unit reward split among its selectors."""
    sel = np.asarray(selections, dtype=int)
    if sel.size == 0:
        raise ValueError("at least one player is required")
    pay = np.asarray(payouts, dtype=float)
    counts = np.bincount(sel, minlength=2)
    return pay[sel] / counts[sel]


def play_turn(
    state: StateVector,
    angles: Angles,
    machines: MachineConfig,
    rng: np.random.Generator,
) -> TurnResult:
    """One measured turn: rotate, sample the joint outcome, then the two payouts.

    Draws one uniform for the outcome and two for the payouts, in that order.
    """
    dist = outcome_distribution(apply_rotations(state, angles))
    outcome = sample_outcome(dist, rng)
    u = rng.random(2)
    payouts = (int(u[0] < machines.p_a), int(u[1] < machines.p_b))
    selections = tuple(int(b) for b in outcome_bits(state.n_players)[outcome])
    rewards = split_rewards(selections, payouts)
    return TurnResult(outcome, selections, payouts, tuple(float(r) for r in rewards))


def jain_index(rewards: Sequence[float], n: int | None = None) -> float:
    """Jain fairness index ``(sum R)^2 / (n * sum R^2)``; 1 when every reward is 0."""
    r = np.asarray(rewards, dtype=float)
    n = r.size if n is None else n
    if n < 1:
        raise ValueError("n must be at least 1")
    if np.any(r < 0):
        raise ValueError("rewards must be nonnegative")
    sq = float(np.sum(r**2))
    if sq == 0.0:
        return 1.0
    return float(np.sum(r) ** 2 / (n * sq))


def jain_index_batch(rewards: np.ndarray) -> np.ndarray:
    """Row-wise Jain index of a ``(B, N)`` reward array."""
    r = np.asarray(rewards, dtype=float)
    sq = np.sum(r**2, axis=-1)
    tot = np.sum(r, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = tot**2 / (r.shape[-1] * sq)
    return np.where(sq == 0.0, 1.0, out)


def pondered_index(ledger: RewardLedger) -> float | None:
    """Jain index times the captured fraction of paid-out reward; None if nothing was paid."""
    total = ledger.total_payout
    if total <= 0:
        return None
    return jain_index(ledger.rewards) * ledger.total_reward / total


def pondered_index_batch(rewards: np.ndarray, payouts_total: np.ndarray) -> np.ndarray:
    """Vectorized pondered index; NaN where the payout total is zero."""
    rewards = np.asarray(rewards, dtype=float)
    payouts_total = np.asarray(payouts_total, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = rewards.sum(axis=-1) / payouts_total
    return np.where(payouts_total > 0, jain_index_batch(rewards) * frac, np.nan)


def reward_shares(n_players: int, machines: MachineConfig) -> np.ndarray:
    """``(2**N, N)`` expected reward of each player for each joint outcome."""
    bits = outcome_bits(n_players)
    n_b = bits.sum(axis=1, keepdims=True)
    n_a = n_players - n_b
    on_a = bits == 0
    share_a = np.divide(machines.p_a, n_a, out=np.zeros_like(n_a, dtype=float), where=n_a > 0)
    share_b = np.divide(machines.p_b, n_b, out=np.zeros_like(n_b, dtype=float), where=n_b > 0)
    return np.where(on_a, share_a, share_b)


def _check_angles(state: StateVector, angles: Angles) -> np.ndarray:
    rad = _as_radians(angles)
    if rad.shape[-1] != state.n_players:
        raise DimensionError(f"{rad.shape[-1]} angles given for {state.n_players} players")
    return rad


def expected_rewards(state: StateVector, angles: Angles, machines: MachineConfig) -> np.ndarray:
    """Exact per-turn expected reward of each player."""
    rad = _check_angles(state, angles)
    probs = rotated_probabilities(state, rad[None, :])[0]
    return probs @ reward_shares(state.n_players, machines)


def expected_rewards_batch(state: StateVector, angles: np.ndarray, machines: MachineConfig) -> np.ndarray:
    """Expected rewards for a ``(B, N)`` batch of angle configurations (radians)."""
    rad = _check_angles(state, angles)
    return rotated_probabilities(state, rad) @ reward_shares(state.n_players, machines)


def conflict_probability(state: StateVector, angles: Angles) -> float:
    rad = _check_angles(state, angles)
    probs = rotated_probabilities(state, rad[None, :])[0]
    return float(probs[0] + probs[-1])


def conflict_probability_batch(state: StateVector, angles: np.ndarray) -> np.ndarray:
    probs = rotated_probabilities(state, _check_angles(state, angles))
    return probs[:, 0] + probs[:, -1]


def expected_pondered_index(rewards: np.ndarray, machines: MachineConfig) -> np.ndarray:
    """Exact-mode analog of the pondered index: Jain of the expected rewards
    times their sum over ``p_a + p_b``. NaN when both machines never pay."""
    rewards = np.asarray(rewards, dtype=float)
    if machines.total == 0:
        return np.full(rewards.shape[:-1], np.nan)
    return jain_index_batch(rewards) * rewards.sum(axis=-1) / machines.total


def simulate_turns(
    probs: np.ndarray,
    machines: MachineConfig,
    n_players: int,
    n_turns: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo over frozen configurations.

    ``probs`` is ``(B, 2**N)``. Returns accumulated player rewards ``(B, N)``
    and machine payouts ``(B, 2)`` after ``n_turns`` turns per row.
    """
    probs = np.atleast_2d(probs)
    batch = probs.shape[0]
    outcomes = sample_outcomes(probs, rng.random((batch, n_turns)))
    pay = rng.random((batch, n_turns, 2)) < np.array([machines.p_a, machines.p_b])
    bits = outcome_bits(n_players)[outcomes]  # (B, T, N)
    n_b = bits.sum(-1, keepdims=True)
    n_a = n_players - n_b
    r_a = np.divide(pay[..., :1], n_a, out=np.zeros(n_a.shape), where=n_a > 0)
    r_b = np.divide(pay[..., 1:], n_b, out=np.zeros(n_b.shape), where=n_b > 0)
    rewards = np.where(bits == 0, r_a, r_b).sum(axis=1)
    payouts = pay.sum(axis=1).astype(float)
    return rewards, payouts
