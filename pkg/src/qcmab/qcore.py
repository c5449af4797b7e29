"""Dense state-vector algebra for N-photon polarization states.

Basis ordering: player 1 is the most significant bit, H=0 and V=1, so the
ket string ``"HHV"`` reads left to right as players 1..N and maps to index 1.
Angles are polarization-rotation angles in radians (a half-waveplate at
``theta/2`` rotates the polarization by ``theta``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

MAX_PLAYERS = 16
NORM_ATOL = 1e-12
UNNORMALIZED_ATOL = 1e-9
NEGATIVE_PROB_ATOL = 1e-15

_HALF_PI = np.pi / 2
# cos/sin at k * pi/2, k = 0..3
_QUARTER_TURNS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


class DimensionError(ValueError):
    """Raised when a state, angle configuration or distribution disagree in size."""


class NormalizationError(ValueError):
    """Raised when a state that must be normalized is not."""


def basis_index(label: str) -> int:
    """Index of a ket label such as ``"HVH"`` in the amplitude vector."""
    label = label.strip().upper()
    if not label or set(label) - {"H", "V"}:
        raise ValueError(f"invalid basis label {label!r}")
    return int(label.replace("H", "0").replace("V", "1"), 2)


def basis_label(index: int, n_players: int) -> str:
    return format(index, f"0{n_players}b").replace("0", "H").replace("1", "V")


def outcome_bits(n_players: int) -> np.ndarray:
    """(2**n, n) array of outcome bits, 1 meaning V (machine B) for that player."""
    idx = np.arange(2**n_players)[:, None]
    shifts = n_players - 1 - np.arange(n_players)[None, :]
    return (idx >> shifts) & 1


@dataclass(frozen=True)
class StateVector:
    """Pure N-photon polarization state.

    ``amplitudes`` is stored as a read-only complex array of length
    ``2**n_players``. Pass ``normalized=False`` to skip the norm check (used
    by intermediate and test states).
    """

    n_players: int
    amplitudes: np.ndarray
    normalized: bool = field(default=True, compare=False)

    def __post_init__(self) -> None:
        if not 1 <= self.n_players <= MAX_PLAYERS:
            raise DimensionError(f"n_players must be in [1, {MAX_PLAYERS}], got {self.n_players}")
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != 2**self.n_players:
            raise DimensionError(
                f"expected {2**self.n_players} amplitudes for {self.n_players} players, got {amps.size}"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        if self.normalized:
            deviation = abs(float(np.vdot(amps, amps).real) - 1.0)
            if deviation > NORM_ATOL:
                raise NormalizationError(f"state norm deviates from 1 by {deviation:.3e}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes: Sequence[complex], normalize: bool = False) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        n = int(round(np.log2(amps.size))) if amps.size else 0
        if amps.size == 0 or 2**n != amps.size:
            raise DimensionError(f"amplitude count {amps.size} is not a power of two")
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise NormalizationError("cannot normalize the zero vector")
            amps = amps / norm
        return cls(n, amps)

    @classmethod
    def from_kets(cls, terms: dict[str, complex], normalize: bool = True) -> "StateVector":
        """Build a state from ``{"HHV": amp, ...}``; labels must share one length."""
        lengths = {len(k) for k in terms}
        if len(lengths) != 1:
            raise DimensionError("all ket labels must have the same length")
        n = lengths.pop()
        amps = np.zeros(2**n, dtype=np.complex128)
        for label, amp in terms.items():
            amps[basis_index(label)] += amp
        return cls.from_amplitudes(amps, normalize=normalize)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def amplitude(self, label: str) -> complex:
        if len(label) != self.n_players:
            raise DimensionError(f"label {label!r} does not have {self.n_players} players")
        return complex(self.amplitudes[basis_index(label)])

    def with_global_phase(self, phase: float) -> "StateVector":
        return StateVector(self.n_players, self.amplitudes * np.exp(1j * phase))

    def permute_players(self, order: Sequence[int]) -> "StateVector":
        """New state whose player ``k`` is the old player ``order[k]`` (0-based)."""
        if sorted(order) != list(range(self.n_players)):
            raise ValueError(f"{order!r} is not a permutation of the players")
        tensor = self.amplitudes.reshape((2,) * self.n_players)
        return StateVector(self.n_players, np.transpose(tensor, order).reshape(-1), self.normalized)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StateVector):
            return NotImplemented
        return self.n_players == other.n_players and np.array_equal(self.amplitudes, other.amplitudes)

    def __hash__(self) -> int:
        return hash((self.n_players, self.amplitudes.tobytes()))


@dataclass(frozen=True)
class AngleConfig:
    """One polarization-rotation angle per player, radians."""

    angles: tuple[float, ...]

    def __post_init__(self) -> None:
        angles = tuple(float(a) for a in self.angles)
        if not all(np.isfinite(angles)):
            raise ValueError("angles must be finite")
        object.__setattr__(self, "angles", angles)

    @classmethod
    def from_degrees(cls, degrees: Sequence[float]) -> "AngleConfig":
        return cls(tuple(np.deg2rad(np.asarray(degrees, dtype=float))))

    @classmethod
    def uniform(cls, theta: float, n_players: int) -> "AngleConfig":
        return cls((theta,) * n_players)

    @property
    def degrees(self) -> tuple[float, ...]:
        return tuple(np.rad2deg(self.angles))

    def __len__(self) -> int:
        return len(self.angles)


Angles = Union[AngleConfig, Sequence[float], np.ndarray]


def _as_radians(config: Angles) -> np.ndarray:
    if isinstance(config, AngleConfig):
        return np.asarray(config.angles, dtype=float)
    arr = np.asarray(config, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("angles must be finite")
    return arr


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probabilities of the 2**N joint H/V outcomes."""

    n_players: int
    probs: np.ndarray

    def __post_init__(self) -> None:
        probs = np.array(self.probs, dtype=float).reshape(-1)
        if probs.size != 2**self.n_players:
            raise DimensionError(f"expected {2**self.n_players} probabilities, got {probs.size}")
        if np.any(probs < -NEGATIVE_PROB_ATOL):
            raise ValueError(f"negative probability {probs.min():.3e}")
        probs = np.clip(probs, 0.0, None)
        total = probs.sum()
        if abs(total - 1.0) > NORM_ATOL:
            raise NormalizationError(f"probabilities sum to {total!r}")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def prob(self, label: str) -> float:
        return float(self.probs[basis_index(label)])


def _cos_sin(theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """cos/sin that are exact at multiples of pi/2 and reduce angles mod 2*pi."""
    theta = np.mod(theta, 2 * np.pi)
    c, s = np.cos(theta), np.sin(theta)
    k = theta / _HALF_PI
    exact = k == np.round(k)
    if np.any(exact):
        q = np.round(k[exact]).astype(int) % 4
        table = np.asarray(_QUARTER_TURNS)
        c = np.where(exact, 0.0, c)
        s = np.where(exact, 0.0, s)
        c[exact] = table[q, 0]
        s[exact] = table[q, 1]
    return c, s


def single_rotation(theta: float) -> np.ndarray:
    """2x2 rotation ``[[cos, sin], [-sin, cos]]`` acting on the (H, V) coefficients."""
    if not np.isfinite(theta):
        raise ValueError("theta must be finite")
    c, s = _cos_sin(np.atleast_1d(np.asarray(theta, dtype=float)))
    return np.array([[c[0], s[0]], [-s[0], c[0]]])


def rotation_matrices(angles: np.ndarray) -> np.ndarray:
    """Stack of single-photon rotations, shape ``angles.shape + (2, 2)``."""
    c, s = _cos_sin(np.asarray(angles, dtype=float))
    return np.stack([np.stack([c, s], -1), np.stack([-s, c], -1)], -2)


def _rotate_tensor(tensor: np.ndarray, mats: np.ndarray) -> np.ndarray:
    """Apply per-player 2x2 matrices to a batch of amplitude tensors.

    ``tensor`` has shape ``(B, 2, ..., 2)`` and ``mats`` has shape ``(B, N, 2, 2)``.
    """
    n = mats.shape[1]
    for j in range(n):
        moved = np.moveaxis(tensor, j + 1, -1)
        moved = np.einsum("bij,b...j->b...i", mats[:, j], moved)
        tensor = np.moveaxis(moved, -1, j + 1)
    return tensor


def apply_rotations(state: StateVector, config: Angles) -> StateVector:
    """Rotate every player's photon by its own angle (tensor product of rotations)."""
    angles = _as_radians(config)
    if angles.shape != (state.n_players,):
        raise DimensionError(f"{angles.size} angles given for {state.n_players} players")
    if not np.any(angles):
        return state
    mats = rotation_matrices(angles)[None]
    tensor = state.amplitudes.reshape((1,) + (2,) * state.n_players)
    out = _rotate_tensor(tensor, mats).reshape(-1)
    return StateVector(state.n_players, out, state.normalized)


def rotated_amplitudes(state: StateVector, angles: np.ndarray) -> np.ndarray:
    """Rotated amplitude vectors for a batch of configurations.

    ``angles`` has shape ``(B, N)`` in radians; returns ``(B, 2**N)`` complex.
    """
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    if angles.ndim != 2 or angles.shape[1] != state.n_players:
        raise DimensionError(f"{angles.shape[-1]} angles given for {state.n_players} players")
    batch = angles.shape[0]
    tensor = np.broadcast_to(
        state.amplitudes.reshape((1,) + (2,) * state.n_players),
        (batch,) + (2,) * state.n_players,
    )
    return _rotate_tensor(tensor, rotation_matrices(angles)).reshape(batch, -1)


def rotated_probabilities(state: StateVector, angles: np.ndarray) -> np.ndarray:
    """Outcome probabilities for a batch of configurations, shape ``(B, 2**N)``."""
    out = rotated_amplitudes(state, angles)
    return out.real**2 + out.imag**2


def global_rotation_angles(thetas: np.ndarray, n_players: int) -> np.ndarray:
    """``(len(thetas), n_players)`` array with every player at the same angle."""
    thetas = np.asarray(thetas, dtype=float).reshape(-1, 1)
    return np.repeat(thetas, n_players, axis=1)


def outcome_distribution(state: StateVector) -> OutcomeDistribution:
    deviation = abs(state.norm() - 1.0)
    if deviation > UNNORMALIZED_ATOL:
        raise NormalizationError(f"state norm deviates from 1 by {deviation:.3e}")
    amps = state.amplitudes
    probs = amps.real**2 + amps.imag**2
    total = probs.sum()
    if abs(total - 1.0) > NORM_ATOL:
        probs = probs / total
    return OutcomeDistribution(state.n_players, probs)


def make_rng(seed: int | None) -> np.random.Generator:
    """Seeded PCG64 generator; ``seed`` is a 64-bit unsigned integer."""
    if seed is not None and not 0 <= int(seed) < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return np.random.default_rng(seed)


def sample_outcome(dist: OutcomeDistribution, rng: np.random.Generator) -> int:
    """Draw one outcome index by inverse CDF; consumes exactly one uniform."""
    return int(sample_outcomes(dist.probs, rng.random()))


def sample_outcomes(probs: np.ndarray, uniforms: np.ndarray | float) -> np.ndarray:
    """Inverse-CDF sampling of outcome indices.

    ``probs`` has shape ``batch + (K,)``; ``uniforms`` has shape ``batch + extra``
    and the result has the shape of ``uniforms``. Zero-probability outcomes are
    never returned.
    """
    probs = np.asarray(probs, dtype=float)
    u = np.asarray(uniforms, dtype=float)
    batch_ndim = probs.ndim - 1
    if u.shape[:batch_ndim] != probs.shape[:-1]:
        raise DimensionError("uniforms must share the leading batch shape of probs")
    cdf = np.cumsum(probs, axis=-1)
    cdf = cdf / cdf[..., -1:]
    extra = u.ndim - batch_ndim
    cdf = cdf.reshape(probs.shape[:-1] + (1,) * extra + probs.shape[-1:])
    idx = (cdf <= u[..., None]).sum(-1)
    return np.minimum(idx, probs.shape[-1] - 1)
