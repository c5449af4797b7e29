"""Decentralized basis realignment.

Each agent sees only its own scalar reward and the number of players. A
reward of exactly ``1/N`` can only come from a paying machine chosen by all
``N`` players, so it flags a full conflict. Agents keep the conflict flags of
their last ``memory_capacity`` reward-giving turns (own reward > 0). Once the
memory holds ``conflict_threshold`` conflicts, an active agent moves and
forgets:

* ``random``: redraw the angle uniformly from the 5-degree grid on [0, 360),
* ``incremental``: advance the angle by one step,
* ``passive``: never moves.

``run_episode`` simulates every (initial configuration, repetition) pair of a
config in one vectorized batch; the scalar functions below are the reference
semantics it reproduces.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .game import (
    MachineConfig,
    expected_pondered_index,
    pondered_index_batch,
    reward_shares,
    simulate_turns,
)
from .qcore import DimensionError, StateVector, rotated_probabilities, sample_outcomes

POLICIES = ("random", "incremental", "passive")
CONFLICT_ATOL = 1e-9
EVAL_MODES = ("exact", "montecarlo")


@dataclass
class AgentState:
    angle: int
    policy: str = "random"
    memory_capacity: int = 8
    conflict_threshold: int = 2
    angle_step: int = 5
    memory: deque = field(default_factory=deque)

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if 360 % self.angle_step:
            raise ValueError("angle_step must divide 360")
        if self.angle % self.angle_step or not 0 <= self.angle < 360:
            raise ValueError(f"angle {self.angle} is not on the {self.angle_step}-degree grid")
        self.memory = deque(self.memory, maxlen=self.memory_capacity)

    @property
    def n_positions(self) -> int:
        return 360 // self.angle_step

    @property
    def conflicts(self) -> int:
        return sum(self.memory)

    @property
    def triggered(self) -> bool:
        return self.conflicts >= self.conflict_threshold


def is_conflict_reward(own_reward: float, n_players: int) -> bool:
    return abs(own_reward - 1.0 / n_players) < CONFLICT_ATOL


def observe(agent: AgentState, own_reward: float, n_players: int) -> None:
    """Record one turn; zero-reward turns carry no information and are skipped."""
    if own_reward > 0:
        agent.memory.append(is_conflict_reward(own_reward, n_players))


def random_realign_step(agent: AgentState, rng) -> bool:
    """Redraw the angle when the memory holds enough conflicts. Returns True on a move."""
    if not agent.triggered:
        return False
    agent.angle = int(rng.integers(agent.n_positions)) * agent.angle_step
    agent.memory.clear()
    return True


def incremental_realign_step(agent: AgentState) -> bool:
    if not agent.triggered:
        return False
    agent.angle = (agent.angle + agent.angle_step) % 360
    agent.memory.clear()
    return True


def realign_step(agent: AgentState, rng) -> bool:
    if agent.policy == "random":
        return random_realign_step(agent, rng)
    if agent.policy == "incremental":
        return incremental_realign_step(agent)
    return False


def log_checkpoints(horizon: int) -> tuple[int, ...]:
    """1, 2, 3, 5, 7, 10, 20, ... up to and including ``horizon``."""
    points = {horizon}
    scale = 1
    while scale <= horizon:
        for m in (1, 2, 3, 5, 7):
            if m * scale <= horizon:
                points.add(m * scale)
        scale *= 10
    return tuple(sorted(points))


@dataclass(frozen=True)
class EpisodeConfig:
    """One realignment experiment.

    ``initial_angles`` (degrees, shape ``(K, N)``) fixes the starting
    configurations; otherwise ``n_initial`` of them are drawn from the angle
    grid with the seed. Every configuration is run ``repetitions`` times.
    """

    state: StateVector
    policies: tuple[str, ...]
    machines: MachineConfig = MachineConfig()
    horizon: int = 1000
    checkpoints: tuple[int, ...] | None = None
    eval_mode: str = "exact"
    trials: int = 1000
    repetitions: int = 20
    n_initial: int = 100
    initial_angles: np.ndarray | None = None
    seed: int = 0
    memory_capacity: int = 8
    conflict_threshold: int = 2
    angle_step: int = 5

    def __post_init__(self) -> None:
        n = self.state.n_players
        policies = tuple(self.policies)
        if len(policies) != n:
            raise DimensionError(f"{len(policies)} policies for {n} players")
        bad = set(policies) - set(POLICIES)
        if bad:
            raise ValueError(f"unknown policies {sorted(bad)}")
        object.__setattr__(self, "policies", policies)
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        cps = log_checkpoints(self.horizon) if self.checkpoints is None else tuple(sorted(set(self.checkpoints)))
        if not cps or cps[0] < 1 or cps[-1] > self.horizon:
            raise ValueError(f"checkpoints must lie in [1, {self.horizon}]")
        object.__setattr__(self, "checkpoints", cps)
        if self.eval_mode not in EVAL_MODES:
            raise ValueError(f"eval_mode must be one of {EVAL_MODES}")
        if self.trials < 1 or self.repetitions < 1 or self.n_initial < 1:
            raise ValueError("trials, repetitions and n_initial must be positive")
        if self.memory_capacity < 1 or self.conflict_threshold < 1:
            raise ValueError("memory_capacity and conflict_threshold must be positive")
        if self.angle_step < 1 or 360 % self.angle_step:
            raise ValueError("angle_step must be a positive divisor of 360")
        if self.initial_angles is not None:
            init = np.atleast_2d(np.asarray(self.initial_angles, dtype=int))
            if init.shape[1] != n:
                raise DimensionError(f"initial angles have {init.shape[1]} columns for {n} players")
            if np.any(init % self.angle_step):
                raise ValueError("initial angles must lie on the angle grid")
            object.__setattr__(self, "initial_angles", init % 360)

    @property
    def n_players(self) -> int:
        return self.state.n_players

    @property
    def active(self) -> np.ndarray:
        return np.array([p != "passive" for p in self.policies])


@dataclass
class Trajectory:
    """Checkpoint records of a batch of episodes.

    Episode ``b`` starts from initial configuration ``b // repetitions`` and is
    repetition ``b % repetitions`` of it.
    """

    config: EpisodeConfig
    checkpoints: np.ndarray  # (C,)
    angles: np.ndarray  # (C, B, N) degrees
    pondered: np.ndarray  # (C, B)
    rewards: np.ndarray  # (C, B, N) expected or estimated per-turn rewards
    ledger_rewards: np.ndarray  # (B, N)
    ledger_payouts: np.ndarray  # (B, 2)
    moves: np.ndarray  # (B, N) number of angle changes

    @property
    def n_episodes(self) -> int:
        return self.pondered.shape[1]

    def mean_pondered(self) -> np.ndarray:
        return np.nanmean(self.pondered, axis=1)

    def stderr_pondered(self) -> np.ndarray:
        b = np.sum(~np.isnan(self.pondered), axis=1)
        return np.nanstd(self.pondered, axis=1, ddof=1) / np.sqrt(b) if self.n_episodes > 1 else np.zeros(len(b))

    def mean_rewards(self) -> np.ndarray:
        """(C, N) mean per-player reward over all episodes."""
        return self.rewards.mean(axis=1)

    def stderr_rewards(self) -> np.ndarray:
        if self.n_episodes < 2:
            return np.zeros(self.rewards.shape[::2])
        return self.rewards.std(axis=1, ddof=1) / np.sqrt(self.n_episodes)

    def by_repetition(self, values: np.ndarray) -> np.ndarray:
        """Average an episode-indexed axis (axis 1) over initial configs, keyed by repetition."""
        reps = self.config.repetitions
        shaped = values.reshape(values.shape[:1] + (-1, reps) + values.shape[2:])
        return np.nanmean(shaped, axis=1)


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    init_ss, dyn_ss, eval_ss = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init_ss), np.random.default_rng(dyn_ss), np.random.default_rng(eval_ss)


def initial_configurations(config: EpisodeConfig) -> np.ndarray:
    """Starting angles (degrees) of each initial configuration, shape ``(K, N)``."""
    if config.initial_angles is not None:
        return config.initial_angles
    init_rng, _, _ = _streams(config.seed)
    n_pos = 360 // config.angle_step
    return init_rng.integers(0, n_pos, (config.n_initial, config.n_players)) * config.angle_step


def reward_table(n_players: int) -> np.ndarray:
    """``(2**N, 2, 2, N)`` realized rewards indexed by outcome and the two payout bits."""
    table = np.zeros((2**n_players, 2, 2, n_players))
    for pay_a in (0, 1):
        for pay_b in (0, 1):
            table[:, pay_a, pay_b] = reward_shares(n_players, MachineConfig(pay_a, pay_b))
    return table


def _evaluate(
    config: EpisodeConfig, probs: np.ndarray, eval_rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    n = config.n_players
    if config.eval_mode == "exact":
        rewards = probs @ reward_shares(n, config.machines)
        return expected_pondered_index(rewards, config.machines), rewards
    acc, payouts = simulate_turns(probs, config.machines, n, config.trials, eval_rng)
    return pondered_index_batch(acc, payouts.sum(axis=1)), acc / config.trials


def run_episode(config: EpisodeConfig) -> Trajectory:
    """Run all episodes of ``config``; bit-identical for identical configs.

    Per turn the dynamics stream draws, in order: one outcome uniform per
    episode ``(B,)``, two payout uniforms ``(B, 2)`` and one redraw index per
    player ``(B, N)`` (used only by agents that redraw).
    """
    n = config.n_players
    _, rng, eval_rng = _streams(config.seed)
    init = initial_configurations(config)
    angles = np.repeat(init, config.repetitions, axis=0).astype(np.int64)
    batch = angles.shape[0]
    step = config.angle_step
    n_pos = 360 // step
    cap = config.memory_capacity
    active_random = np.array([p == "random" for p in config.policies])
    active_incr = np.array([p == "incremental" for p in config.policies])
    table = reward_table(n)
    pay_thresholds = np.array([config.machines.p_a, config.machines.p_b])
    conflict_reward = 1.0 / n

    mem = np.zeros((batch, n, cap), dtype=bool)
    filled = np.zeros((batch, n), dtype=np.int64)
    head = np.zeros((batch, n), dtype=np.int64)
    n_conf = np.zeros((batch, n), dtype=np.int64)
    moves = np.zeros((batch, n), dtype=np.int64)
    rows = np.arange(batch)[:, None]
    cols = np.arange(n)[None, :]

    probs = rotated_probabilities(config.state, np.deg2rad(angles))
    ledger_r = np.zeros((batch, n))
    ledger_x = np.zeros((batch, 2))

    cps = config.checkpoints
    rec_angles, rec_ip, rec_rewards = [], [], []
    next_cp = 0
    for t in range(1, config.horizon + 1):
        outcome = sample_outcomes(probs, rng.random(batch))
        pay = (rng.random((batch, 2)) < pay_thresholds).astype(np.int64)
        redraw = rng.integers(0, n_pos, (batch, n))
        rewards = table[outcome, pay[:, 0], pay[:, 1]]
        ledger_r += rewards
        ledger_x += pay

        giving = rewards > 0
        flag = np.abs(rewards - conflict_reward) < CONFLICT_ATOL
        if np.any(giving):
            evicted = mem[rows, cols, head] & (filled == cap)
            n_conf += np.where(giving, flag.astype(np.int64) - evicted, 0)
            mem[rows, cols, head] = np.where(giving, flag, mem[rows, cols, head])
            head = np.where(giving, (head + 1) % cap, head)
            filled = np.where(giving, np.minimum(filled + 1, cap), filled)

        trig = n_conf >= config.conflict_threshold
        move_random = trig & active_random
        move_incr = trig & active_incr
        moved = move_random | move_incr
        if np.any(moved):
            angles = np.where(move_random, redraw * step, angles)
            angles = np.where(move_incr, (angles + step) % 360, angles)
            mem[moved] = False
            filled[moved] = 0
            head[moved] = 0
            n_conf[moved] = 0
            moves += moved
            changed = np.any(moved, axis=1)
            probs[changed] = rotated_probabilities(config.state, np.deg2rad(angles[changed]))
        if next_cp < len(cps) and t == cps[next_cp]:
            ip, exp_r = _evaluate(config, probs, eval_rng)
            rec_angles.append(angles.copy())
            rec_ip.append(ip)
            rec_rewards.append(exp_r)
            next_cp += 1

    return Trajectory(
        config=config,
        checkpoints=np.asarray(cps),
        angles=np.stack(rec_angles),
        pondered=np.stack(rec_ip),
        rewards=np.stack(rec_rewards),
        ledger_rewards=ledger_r,
        ledger_payouts=ledger_x,
        moves=moves,
    )


@dataclass
class StabilityResult:
    checkpoints: np.ndarray
    active: np.ndarray  # (N,) bool
    mean_rewards: np.ndarray  # (C, N)
    stderr_rewards: np.ndarray  # (C, N)
    trajectory: Trajectory

    def group_means(self) -> tuple[np.ndarray, np.ndarray]:
        """(C,) mean reward of the active players and of the passive players."""
        return (
            self.mean_rewards[:, self.active].mean(axis=1),
            self.mean_rewards[:, ~self.active].mean(axis=1),
        )

    def passive_advantage(self, late_fraction: float = 0.2) -> tuple[float, float]:
        """Mean and standard error over repetitions of (passive - active) reward
        on the last ``late_fraction`` of checkpoints."""
        traj = self.trajectory
        n_late = max(1, int(np.ceil(late_fraction * len(traj.checkpoints))))
        late = traj.rewards[-n_late:]  # (L, B, N)
        diff = late[..., ~self.active].mean(-1) - late[..., self.active].mean(-1)  # (L, B)
        per_rep = traj.by_repetition(diff).mean(axis=0)  # (R,)
        if per_rep.size < 2:
            return float(per_rep.mean()), 0.0
        return float(per_rep.mean()), float(per_rep.std(ddof=1) / np.sqrt(per_rep.size))


def stability_experiment(config: EpisodeConfig) -> StabilityResult:
    active = config.active
    if active.all() or not active.any():
        raise ValueError("stability experiment needs at least one active and one passive player")
    traj = run_episode(config)
    return StabilityResult(
        checkpoints=traj.checkpoints,
        active=active,
        mean_rewards=traj.mean_rewards(),
        stderr_rewards=traj.stderr_rewards(),
        trajectory=traj,
    )


def policies_for(n_players: int, n_active: int, policy: str = "random") -> tuple[str, ...]:
    """First ``n_active`` players use ``policy``, the rest stay passive."""
    if not 0 <= n_active <= n_players:
        raise ValueError(f"n_active must be in [0, {n_players}]")
    return (policy,) * n_active + ("passive",) * (n_players - n_active)
