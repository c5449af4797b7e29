"""Certification of N-photon states against the design rules.

A state is accepted when it has

* no amplitude on the all-H / all-V outcomes (no full conflict),
* outcome probabilities unchanged when every player rotates by the same angle,
* probabilities symmetric under player permutation and under the global
  H<->V mirror.

The eigenphase check is the strict form of rotation invariance: a pure state
whose density matrix commutes with every global rotation is an eigenvector of
that rotation, so ``|<psi|R(theta)|psi>| = 1``.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field

import numpy as np

from .qcore import (
    StateVector,
    basis_index,
    global_rotation_angles,
    outcome_bits,
    outcome_distribution,
    rotated_amplitudes,
)
from .states import mirror_label

DEFAULT_TOLERANCE = 1e-9
DEFAULT_THETA_GRID = np.deg2rad(np.arange(0, 180, 5))
# amplitudes below this count as structural zeros when matching an ansatz
ZERO_AMPLITUDE_ATOL = 1e-12

RULE_NAMES = ("no_conflict_terms", "rotation_invariance", "eigenphase", "permutation", "mirror")


def check_no_conflict_terms(state: StateVector) -> float:
    p = outcome_distribution(state).probs
    return float(p[0] + p[-1])


def _grid(theta_grid) -> np.ndarray:
    grid = DEFAULT_THETA_GRID if theta_grid is None else np.asarray(theta_grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise ValueError("theta grid must be nonempty")
    return grid


def check_rotation_invariance(state: StateVector, theta_grid=None) -> float:
    """Largest change of any outcome probability under a global rotation on the grid."""
    grid = _grid(theta_grid)
    p0 = outcome_distribution(state).probs
    amps = rotated_amplitudes(state, global_rotation_angles(grid, state.n_players))
    p = amps.real**2 + amps.imag**2
    return float(np.max(np.abs(p - p0[None, :])))


def check_eigenphase(state: StateVector, theta_grid=None) -> float:
    """``max_theta (1 - |<psi|R(theta)|psi>|)`` over the grid."""
    grid = _grid(theta_grid)
    amps = rotated_amplitudes(state, global_rotation_angles(grid, state.n_players))
    overlaps = np.abs(amps @ state.amplitudes.conj())
    return float(max(0.0, np.max(1.0 - overlaps)))


def check_permutation_mirror(state: StateVector) -> tuple[float, float]:
    """Probability-level residuals for player permutation and H<->V mirror symmetry.

    Two outcomes are related by some player permutation exactly when they have
    the same number of V's, so the permutation residual is the largest spread of
    probabilities inside one Hamming-weight class.
    """
    p = outcome_distribution(state).probs
    weights = outcome_bits(state.n_players).sum(axis=1)
    perm = 0.0
    for w in np.unique(weights):
        cls = p[weights == w]
        perm = max(perm, float(cls.max() - cls.min()))
    # the mirror of index i is its bitwise complement, i.e. the reversed array
    mirror = float(np.max(np.abs(p - p[::-1])))
    return perm, mirror


@dataclass(frozen=True)
class CoefficientReport:
    """Residuals of the closed-form coefficient equations for one ansatz.

    ``ansatz`` is ``None`` when the zero pattern of the state matches none of
    the known ansatzes (N=3, balanced N=4, 3-1 N=4).
    """

    ansatz: str | None
    residuals: dict[str, float] = field(default_factory=dict)

    @property
    def applicable(self) -> bool:
        return self.ansatz is not None


def _support(state: StateVector) -> set[int]:
    return set(np.flatnonzero(np.abs(state.amplitudes) > ZERO_AMPLITUDE_ATOL).tolist())


def _labels_with_weight(n: int, weight: int) -> list[str]:
    out = []
    for pos in itertools.combinations(range(n), weight):
        out.append("".join("V" if k in pos else "H" for k in range(n)))
    return out


def check_coefficient_conditions(state: StateVector) -> CoefficientReport:
    """Check the sum / mirror / modulus equations of the matching ansatz.

    * three photons, no HHH/VVV: ``a1+a2+a3 = 0`` over HHV, HVH, VHH; each
      mirror is ``b = s*i*a`` with one common sign ``s``; all moduli 1/sqrt(6).
    * four photons on balanced outcomes: ``c(HHVV)+c(HVHV)+c(HVVH) = 0``,
      mirror terms equal, moduli 1/sqrt(6).
    * four photons on 3-1 outcomes: the four single-V amplitudes sum to zero,
      mirror terms opposite, moduli 1/sqrt(8).
    """
    n = state.n_players
    support = _support(state)
    a = state.amplitudes

    def amp(label: str) -> complex:
        return complex(a[basis_index(label)])

    if n == 3 and not support & {0, 7}:
        singles = ["HHV", "HVH", "VHH"]
        firsts = [amp(x) for x in singles]
        mirrors = [amp(mirror_label(x)) for x in singles]
        mirror_res = min(
            max(abs(fa - s * 1j * fb) for fa, fb in zip(mirrors, firsts)) for s in (1, -1)
        )
        moduli = [abs(z) for z in firsts + mirrors]
        return CoefficientReport(
            "three_photon",
            {
                "sum_rule": abs(sum(firsts)),
                "mirror_rule": float(mirror_res),
                "modulus_rule": float(max(abs(m - 1 / np.sqrt(6)) for m in moduli)),
            },
        )
    if n == 4 and support:
        balanced = {basis_index(x) for x in _labels_with_weight(4, 2)}
        three_one = {basis_index(x) for x in _labels_with_weight(4, 1) + _labels_with_weight(4, 3)}
        if support <= balanced:
            firsts = ["HHVV", "HVHV", "HVVH"]
            return CoefficientReport(
                "four_photon_balanced",
                {
                    "sum_rule": abs(sum(amp(x) for x in firsts)),
                    "mirror_rule": max(abs(amp(x) - amp(mirror_label(x))) for x in firsts),
                    "modulus_rule": float(max(abs(abs(amp(x)) - 1 / np.sqrt(6)) for x in _labels_with_weight(4, 2))),
                },
            )
        if support <= three_one:
            singles = _labels_with_weight(4, 1)
            labels = singles + [mirror_label(x) for x in singles]
            return CoefficientReport(
                "four_photon_three_one",
                {
                    "sum_rule": abs(sum(amp(x) for x in singles)),
                    "mirror_rule": max(abs(amp(x) + amp(mirror_label(x))) for x in singles),
                    "modulus_rule": float(max(abs(abs(amp(x)) - 1 / np.sqrt(8)) for x in labels)),
                },
            )
    return CoefficientReport(None)


@dataclass(frozen=True)
class CertificationReport:
    residual_no_conflict_terms: float
    residual_rotation_invariance: float
    residual_eigenphase: float
    residual_permutation: float
    residual_mirror: float
    tolerance: float
    coefficients: CoefficientReport = field(default_factory=lambda: CoefficientReport(None))

    def residual(self, rule: str) -> float:
        return getattr(self, f"residual_{rule}")

    @property
    def rule_passes(self) -> dict[str, bool]:
        return {rule: self.residual(rule) < self.tolerance for rule in RULE_NAMES}

    @property
    def passed(self) -> bool:
        return all(self.rule_passes.values())

    def failing_rules(self) -> list[str]:
        return [rule for rule, ok in self.rule_passes.items() if not ok]

    def to_dict(self) -> dict:
        out = {
            "pass": self.passed,
            "tolerance": self.tolerance,
            "residuals": {rule: self.residual(rule) for rule in RULE_NAMES},
            "rule_pass": self.rule_passes,
            "failing_rules": self.failing_rules(),
            "coefficient_conditions": asdict(self.coefficients),
        }
        return out


def certify(state: StateVector, tolerance: float = DEFAULT_TOLERANCE, theta_grid=None) -> CertificationReport:
    perm, mirror = check_permutation_mirror(state)
    return CertificationReport(
        residual_no_conflict_terms=check_no_conflict_terms(state),
        residual_rotation_invariance=check_rotation_invariance(state, theta_grid),
        residual_eigenphase=check_eigenphase(state, theta_grid),
        residual_permutation=perm,
        residual_mirror=mirror,
        tolerance=tolerance,
        coefficients=check_coefficient_conditions(state),
    )
