"""Numerical search for rule-satisfying N-photon states.

The amplitudes are parametrized by ``2 * 2**N`` reals ``[re..., im...]`` and
projected onto the unit sphere inside the objective, which sums squared
violations of the design rules:

    w_conflict * (p(H..H) + p(V..V))
  + w_inv      * sum_theta sum_o (p_theta(o) - p_0(o))**2
  + w_perm     * sum_pi    sum_o (p(o) - p(pi o))**2
  + w_mirror   * sum_o (p(o) - p(mirror o))**2
  + w_eigen    * sum_theta (1 - |<psi|R(theta)|psi>|**2)

The permutation sum runs over all N! player permutations; it is evaluated
through the identity ``2 N! sum_classes sum_o (p(o) - mean_class)**2`` where
the classes are outcomes with the same number of V's.

The last term asks for a rotation eigenvector. Without it the search can land
on superpositions of two eigenvectors whose H/V probabilities happen to be
rotation invariant while ``|<psi|R(theta)|psi>| = |cos(theta)|``; those fail
certification. ``w_eigen=0`` drops the term.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .qcore import (
    DimensionError,
    StateVector,
    outcome_bits,
    rotated_probabilities,
    rotation_matrices,
)


@dataclass(frozen=True)
class SearchConfig:
    n_players: int
    theta_samples: int = 12
    restarts: int = 64
    max_iterations: int = 3000
    w_inv: float = 1.0
    w_perm: float = 1.0
    w_mirror: float = 1.0
    w_conflict: float = 1.0
    w_eigen: float = 1.0
    tolerance: float = 1e-12

    def __post_init__(self) -> None:
        if self.n_players < 2:
            raise ValueError("n_players must be at least 2")
        if min(self.theta_samples, self.restarts, self.max_iterations) < 1:
            raise ValueError("counts must be at least 1")
        if min(self.w_inv, self.w_perm, self.w_mirror, self.w_conflict) <= 0:
            raise ValueError("penalty weights must be positive")
        if self.w_eigen < 0:
            raise ValueError("w_eigen must be nonnegative")

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.theta_samples) * np.pi / self.theta_samples


class Objective:
    """Penalty objective with analytic gradient for a fixed configuration."""

    def __init__(self, config: SearchConfig) -> None:
        self.config = config
        n = config.n_players
        self.n = n
        self.dim = 2**n
        # full 2**N x 2**N real rotation for every sampled theta
        mats = rotation_matrices(config.thetas)
        full = []
        for m in mats:
            r = np.array([[1.0]])
            for _ in range(n):
                r = np.kron(r, m)
            full.append(r)
        self.rotations = np.stack(full)  # (T, D, D)
        weights = outcome_bits(n).sum(axis=1)
        self.classes = [np.flatnonzero(weights == w) for w in range(n + 1)]
        self.perm_scale = 2.0 * math.factorial(n)

    def _split(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        x = np.asarray(x, dtype=float)
        if x.shape != (2 * self.dim,):
            raise DimensionError(f"expected {2 * self.dim} reals, got {x.shape}")
        norm = float(np.linalg.norm(x))
        if norm == 0:
            raise ValueError("objective is undefined at the zero vector")
        return x / norm, norm

    def value_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        c = self.config
        v, norm = self._split(x)
        re, im = v[: self.dim], v[self.dim :]
        rot_re = self.rotations @ re  # (T, D)
        rot_im = self.rotations @ im
        p = rot_re**2 + rot_im**2
        p0 = re**2 + im**2

        g_p = np.zeros_like(p)  # d f / d p_theta
        g_p0 = np.zeros(self.dim)

        value = c.w_conflict * (p0[0] + p0[-1])
        g_p0[0] += c.w_conflict
        g_p0[-1] += c.w_conflict

        diff = p - p0[None, :]
        value += c.w_inv * float(np.sum(diff**2))
        g_p += 2 * c.w_inv * diff
        g_p0 -= 2 * c.w_inv * diff.sum(axis=0)

        dev = np.zeros(self.dim)
        for cls in self.classes:
            dev[cls] = p0[cls] - p0[cls].mean()
        value += c.w_perm * self.perm_scale * float(np.sum(dev**2))
        g_p0 += 2 * c.w_perm * self.perm_scale * dev

        mir = p0 - p0[::-1]
        value += c.w_mirror * float(np.sum(mir**2))
        g_p0 += 4 * c.w_mirror * mir

        g_re = 2 * np.einsum("tdk,td->k", self.rotations, g_p * rot_re) + 2 * g_p0 * re
        g_im = 2 * np.einsum("tdk,td->k", self.rotations, g_p * rot_im) + 2 * g_p0 * im

        if c.w_eigen:
            # <psi|R|psi> = a + ib with R real
            tr_re = np.einsum("tdk,d->tk", self.rotations, re)  # R^T re
            tr_im = np.einsum("tdk,d->tk", self.rotations, im)
            a = rot_re @ re + rot_im @ im
            b = rot_im @ re - rot_re @ im
            # 1 - |<psi|R|psi>|^2 as the squared norm of the part of R psi
            # orthogonal to psi, which avoids cancellation near zero
            psi = re + 1j * im
            resid = (rot_re + 1j * rot_im) - (a + 1j * b)[:, None] * psi[None, :]
            value += c.w_eigen * float(np.sum(resid.real**2 + resid.imag**2))
            g_re -= 2 * c.w_eigen * (a @ (rot_re + tr_re) + b @ (rot_im - tr_im))
            g_im -= 2 * c.w_eigen * (a @ (rot_im + tr_im) + b @ (tr_re - rot_re))
        g_v = np.concatenate([g_re, g_im])
        grad = (g_v - v * float(v @ g_v)) / norm
        return float(value), grad

    def __call__(self, x: np.ndarray) -> float:
        return self.value_and_grad(x)[0]


def amplitudes_to_reals(state: StateVector) -> np.ndarray:
    return np.concatenate([state.amplitudes.real, state.amplitudes.imag])


def reals_to_state(x: np.ndarray) -> StateVector:
    x = np.asarray(x, dtype=float)
    half = x.size // 2
    return StateVector.from_amplitudes(x[:half] + 1j * x[half:], normalize=True)


def objective(amplitudes: np.ndarray, config: SearchConfig | None = None) -> float:
    """Penalty value of ``2 * 2**N`` amplitude reals (normalized internally)."""
    amplitudes = np.asarray(amplitudes, dtype=float)
    if config is None:
        n = int(round(math.log2(amplitudes.size // 2)))
        config = SearchConfig(n_players=n)
    return Objective(config)(amplitudes)


@dataclass
class SearchResult:
    state: StateVector
    objective: float
    restart: int
    objectives: list[float] = field(default_factory=list)

    def __iter__(self):
        # unpacks as (state, objective)
        return iter((self.state, self.objective))


POLISH_ABOVE = 1e-24


def search_state(config: SearchConfig, rng: np.random.Generator | int) -> SearchResult:
    """Multi-start L-BFGS from standard-normal starting points.

    The best restart wins; ties go to the lowest restart index. Deterministic
    for a fixed seed.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    obj = Objective(config)
    starts = rng.standard_normal((config.restarts, 2 * obj.dim))
    best: tuple[float, int, np.ndarray] | None = None
    values = []
    for k, x0 in enumerate(starts):
        res = minimize(
            obj.value_and_grad,
            x0,
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": config.max_iterations, "ftol": 0.0, "gtol": 1e-15, "maxcor": 30},
        )
        x = res.x
        val = obj(x)
        # L-BFGS can stall around 1e-20; a BFGS pass finishes the descent
        if val > POLISH_ABOVE:
            res2 = minimize(obj.value_and_grad, x, jac=True, method="BFGS", options={"gtol": 1e-16, "maxiter": 500})
            if obj(res2.x) < val:
                x, val = res2.x, obj(res2.x)
        values.append(val)
        if best is None or val < best[0]:
            best = (val, k, x)
    val, k, x = best
    return SearchResult(reals_to_state(x), val, k, values)


# -- fingerprints -------------------------------------------------------------

FINGERPRINT_STEP_DEG = 15
FINGERPRINT_MAX_POINTS = 4096


@dataclass(frozen=True)
class Fingerprint:
    """Sorted outcome-probability vectors over a relative-angle grid.

    ``grid`` holds the angles in degrees with player 1 fixed at 0.
    """

    grid: np.ndarray  # (G, N)
    vectors: np.ndarray  # (G, 2**N)

    def distance(self, other: "Fingerprint") -> float:
        if self.vectors.shape != other.vectors.shape or not np.array_equal(self.grid, other.grid):
            raise DimensionError("fingerprints were taken on different grids")
        return float(np.max(np.abs(self.vectors - other.vectors)))


def relative_angle_grid(n_players: int, step_deg: int = FINGERPRINT_STEP_DEG, seed: int = 0) -> np.ndarray:
    """All ``{0, step, ..., 180-step}^(N-1)`` offsets with player 1 at 0, randomly
    subsampled (seeded) to at most 4096 points."""
    axis = np.arange(0, 180, step_deg)
    count = axis.size ** (n_players - 1)
    if count > FINGERPRINT_MAX_POINTS:
        rng = np.random.default_rng(seed)
        flat = np.sort(rng.choice(count, FINGERPRINT_MAX_POINTS, replace=False))
        rest = np.stack(np.unravel_index(flat, (axis.size,) * (n_players - 1)), axis=1)
        rest = axis[rest]
    else:
        rest = np.array(list(itertools.product(axis, repeat=n_players - 1))).reshape(-1, n_players - 1)
    return np.hstack([np.zeros((rest.shape[0], 1)), rest])


def fingerprint(state: StateVector, relative_angle_grid_deg: np.ndarray | None = None) -> Fingerprint:
    grid = relative_angle_grid(state.n_players) if relative_angle_grid_deg is None else np.asarray(
        relative_angle_grid_deg, dtype=float
    )
    if grid.ndim == 1:
        # bare offsets of player 2 for two-player states
        grid = np.stack([np.zeros_like(grid), grid], axis=1)
    if grid.shape[1] != state.n_players:
        raise DimensionError(f"grid has {grid.shape[1]} columns for {state.n_players} players")
    probs = rotated_probabilities(state, np.deg2rad(grid))
    return Fingerprint(grid, np.sort(probs, axis=1))


# permutations are enumerated only up to this many players
MAX_PERMUTED_PLAYERS = 6


def fingerprint_distance(s1: StateVector, s2: StateVector) -> float:
    """Smallest fingerprint distance between one state and any player
    permutation of the other, taken both ways so the result is symmetric."""
    if s1.n_players != s2.n_players:
        raise DimensionError(f"states have {s1.n_players} and {s2.n_players} players")
    return min(_directed_distance(s1, s2), _directed_distance(s2, s1))


def _directed_distance(s1: StateVector, s2: StateVector) -> float:
    n = s1.n_players
    fp1 = fingerprint(s1)
    orders = itertools.permutations(range(n)) if n <= MAX_PERMUTED_PLAYERS else [tuple(range(n))]
    best = math.inf
    for order in orders:
        best = min(best, fp1.distance(fingerprint(s2.permute_players(order), fp1.grid)))
        if best == 0.0:
            break
    return best


def states_equivalent(s1: StateVector, s2: StateVector, tol: float = 1e-6) -> bool:
    return fingerprint_distance(s1, s2) < tol
