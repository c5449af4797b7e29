import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import kron_rotation, random_state_amplitudes
from qcmab.qcore import StateVector, basis_index, outcome_bits
from qcmab.rules import (
    RULE_NAMES,
    certify,
    check_coefficient_conditions,
    check_eigenphase,
    check_no_conflict_terms,
    check_permutation_mirror,
    check_rotation_invariance,
)
from qcmab.states import a4, basis_state, cube_root_of_unity, psi2, psi3, s4, singlet

SHIPPED = [
    singlet(),
    psi3(),
    psi3(1, -1),
    psi3(-1, 1),
    psi3(-1, -1),
    s4(),
    s4(-1),
    a4(0.0),
    a4(math.pi / 2),
    a4(math.pi),
    a4(0.4, -1),
]
GRID_5 = np.deg2rad(np.arange(0, 180, 5))


def oracle_rotation_residual(state, grid):
    """Dense 2**N x 2**N rotation of the full state vector."""
    p0 = np.abs(state.amplitudes) ** 2
    worst = 0.0
    for t in grid:
        p = np.abs(kron_rotation([t] * state.n_players) @ state.amplitudes) ** 2
        worst = max(worst, float(np.max(np.abs(p - p0))))
    return worst


def oracle_permutation_residual(state):
    """Brute force over every player permutation and every outcome."""
    n = state.n_players
    p = np.abs(state.amplitudes) ** 2
    bits = outcome_bits(n)
    worst = 0.0
    for perm in itertools.permutations(range(n)):
        for o, b in enumerate(bits):
            moved = "".join("V" if b[perm[k]] else "H" for k in range(n))
            worst = max(worst, abs(p[o] - p[basis_index(moved)]))
    return worst


def test_no_conflict_examples():
    assert check_no_conflict_terms(singlet()) == 0
    assert check_no_conflict_terms(basis_state("HHH")) == 1
    uniform = StateVector(3, np.full(8, 1 / math.sqrt(8)))
    assert check_no_conflict_terms(uniform) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("state", SHIPPED, ids=range(len(SHIPPED)))
def test_shipped_states_certify(state):
    report = certify(state, 1e-9)
    assert report.passed, report.to_dict()
    assert check_rotation_invariance(state, GRID_5) < 1e-12
    assert check_eigenphase(state, GRID_5) < 1e-12


@pytest.mark.parametrize("state", SHIPPED, ids=range(len(SHIPPED)))
def test_rotation_residual_matches_dense_oracle(state):
    assert check_rotation_invariance(state, GRID_5) == pytest.approx(oracle_rotation_residual(state, GRID_5), abs=1e-13)


@pytest.mark.parametrize("state", SHIPPED, ids=range(len(SHIPPED)))
def test_grid_sufficiency(state):
    fine = np.deg2rad(np.arange(0, 180, 1))
    assert abs(check_rotation_invariance(state, fine) - check_rotation_invariance(state)) < 1e-10
    assert abs(check_eigenphase(state, fine) - check_eigenphase(state)) < 1e-10


def test_psi2_zero_phase_fails_rotation_invariance():
    state = psi2(0.0)
    assert check_rotation_invariance(state, GRID_5) > 0.1
    assert check_rotation_invariance(state, GRID_5) == pytest.approx(oracle_rotation_residual(state, GRID_5))
    report = certify(state)
    assert "rotation_invariance" in report.failing_rules()
    # the strict eigenphase form necessarily fails alongside it
    assert set(report.failing_rules()) <= {"rotation_invariance", "eigenphase"}
    assert report.rule_passes["no_conflict_terms"]
    assert report.rule_passes["permutation"] and report.rule_passes["mirror"]


def test_basis_state_failures():
    report = certify(basis_state("HHH"))
    assert not report.passed
    assert {"no_conflict_terms", "rotation_invariance"} <= set(report.failing_rules())
    assert report.residual("no_conflict_terms") == 1


def test_eigenphase_of_product_state():
    # |<HV|R(45)xR(45)|HV>| = cos^2(45) = 0.5
    assert check_eigenphase(basis_state("HV"), [math.pi / 4]) == pytest.approx(0.5, abs=1e-15)
    assert check_eigenphase(singlet()) < 1e-12


def test_permutation_mirror_examples():
    state = StateVector.from_kets({"HHV": math.sqrt(0.8), "VVH": math.sqrt(0.2)})
    perm, mirror = check_permutation_mirror(state)
    # p(HHV) = 0.8 against p(HVH) = 0 under a player swap
    assert perm == pytest.approx(0.8, abs=1e-15)
    assert perm == pytest.approx(oracle_permutation_residual(state), abs=1e-15)
    assert mirror == pytest.approx(0.6, abs=1e-15)
    for state in (psi3(), a4(0.3)):
        perm, mirror = check_permutation_mirror(state)
        assert perm < 1e-15 and mirror < 1e-15


@given(st.integers(1, 5), st.integers(0, 2**31))
def test_permutation_residual_matches_bruteforce(n, seed):
    state = StateVector(n, random_state_amplitudes(np.random.default_rng(seed), n))
    perm, _ = check_permutation_mirror(state)
    assert perm == pytest.approx(oracle_permutation_residual(state), abs=1e-14)


def test_coefficient_conditions():
    for state, ansatz in ((psi3(), "three_photon"), (s4(), "four_photon_balanced"), (a4(0.0), "four_photon_three_one"),
                          (a4(math.pi / 2), "four_photon_three_one"), (a4(math.pi), "four_photon_three_one")):
        rep = check_coefficient_conditions(state)
        assert rep.ansatz == ansatz
        assert max(rep.residuals.values()) < 1e-15, rep.residuals
    assert check_coefficient_conditions(singlet()).ansatz is None
    assert not check_coefficient_conditions(basis_state("HHHH")).applicable


def test_coefficient_sum_rule_detects_phase_perturbation():
    base = psi3()
    amps = base.amplitudes.copy()
    amps[basis_index("HVH")] *= np.exp(0.01j)
    rep = check_coefficient_conditions(StateVector(3, amps))
    z = cube_root_of_unity()
    expected = abs(1 + z * np.exp(0.01j) + z.conjugate()) / math.sqrt(6)
    assert rep.residuals["sum_rule"] == pytest.approx(expected, rel=1e-12)
    assert rep.residuals["sum_rule"] > 0


@given(st.integers(1, 4), st.integers(0, 2**31), st.floats(0, 2 * math.pi))
def test_residuals_phase_blind(n, seed, phase):
    state = StateVector(n, random_state_amplitudes(np.random.default_rng(seed), n))
    a, b = certify(state), certify(state.with_global_phase(phase))
    for rule in RULE_NAMES:
        assert a.residual(rule) == pytest.approx(b.residual(rule), abs=1e-12)


def test_eigenphase_zero_implies_invariance_and_no_false_pass():
    rng = np.random.default_rng(99)
    states = list(SHIPPED)
    for _ in range(100):
        n = int(rng.integers(2, 5))
        states.append(StateVector(n, random_state_amplitudes(rng, n)))
    for state in states:
        report = certify(state)
        if report.residual("eigenphase") < 1e-12:
            assert report.residual("rotation_invariance") < 1e-12
        if check_no_conflict_terms(state) > 1e-6:
            assert not report.passed
        residuals = [report.residual(r) for r in RULE_NAMES]
        assert all(np.isfinite(residuals)) and min(residuals) >= 0


def test_report_serializes():
    d = certify(psi3()).to_dict()
    assert d["pass"] is True
    assert set(d["residuals"]) == set(RULE_NAMES)
    assert d["coefficient_conditions"]["ansatz"] == "three_photon"
    with pytest.raises(ValueError):
        check_rotation_invariance(singlet(), [])
