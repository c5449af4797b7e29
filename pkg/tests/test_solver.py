import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import kron_rotation, random_state_amplitudes
from qcmab.qcore import DimensionError, StateVector
from qcmab.rules import certify
from qcmab.solver import (
    Objective,
    SearchConfig,
    amplitudes_to_reals,
    fingerprint,
    fingerprint_distance,
    objective,
    reals_to_state,
    relative_angle_grid,
    search_state,
    states_equivalent,
)
from qcmab.states import a4, basis_state, psi3, s4, singlet


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


@pytest.mark.parametrize("n", [2, 3, 4])
def test_gradient_matches_finite_differences(n):
    obj = Objective(SearchConfig(n, w_inv=1.3, w_perm=0.7, w_mirror=2.0, w_conflict=0.5))
    rng = np.random.default_rng(n)
    points = 100 if n < 4 else 20
    for _ in range(points):
        x = rng.standard_normal(2 * 2**n)
        _, grad = obj.value_and_grad(x)
        fd = central_difference(obj, x)
        assert np.linalg.norm(grad - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-8)


@pytest.mark.parametrize("state", [psi3(), singlet(), s4(), a4(0.0), a4(2.0)], ids=["psi3", "singlet", "s4", "a4_0", "a4_2"])
def test_objective_vanishes_on_optimal_states(state):
    assert objective(amplitudes_to_reals(state)) < 1e-24


def test_objective_positive_on_single_term():
    assert objective(amplitudes_to_reals(basis_state("HHV"))) > 0.1


def test_objective_rejects_zero_and_bad_shape():
    obj = Objective(SearchConfig(2))
    with pytest.raises(ValueError):
        obj(np.zeros(8))
    with pytest.raises(DimensionError):
        obj(np.ones(6))


@given(st.integers(0, 2**31), st.floats(0, 2 * math.pi), st.floats(0.1, 10))
def test_objective_phase_and_scale_invariant(seed, phase, scale):
    amps = random_state_amplitudes(np.random.default_rng(seed), 3)
    obj = Objective(SearchConfig(3))
    base = obj(np.concatenate([amps.real, amps.imag]))
    turned = amps * np.exp(1j * phase) * scale
    assert obj(np.concatenate([turned.real, turned.imag])) == pytest.approx(base, abs=1e-12)


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(1)
    with pytest.raises(ValueError):
        SearchConfig(3, w_perm=0)
    with pytest.raises(ValueError):
        SearchConfig(3, restarts=0)
    np.testing.assert_allclose(SearchConfig(2).thetas, np.arange(12) * np.pi / 12)


def test_reals_roundtrip():
    s = psi3()
    np.testing.assert_allclose(reals_to_state(amplitudes_to_reals(s)).amplitudes, s.amplitudes, atol=1e-15)


def test_search_is_deterministic():
    cfg = SearchConfig(3, restarts=4, max_iterations=200)
    a, b = search_state(cfg, 5), search_state(cfg, np.random.default_rng(5))
    assert a.state == b.state and a.objective == b.objective and a.objectives == b.objectives
    state, value = a
    assert value == min(a.objectives)


def test_search_soundness_n3():
    result = search_state(SearchConfig(3, restarts=6), 0)
    assert result.objective < 1e-20
    assert certify(result.state, 1e-9).passed
    assert any(states_equivalent(result.state, psi3(r, i)) for r in (1, -1) for i in (1, -1))


def test_soundness_small_objective_certifies():
    for seed in range(12):
        result = search_state(SearchConfig(4, restarts=1), seed)
        if result.objective < 1e-20:
            assert certify(result.state, 1e-9).passed


@pytest.mark.parametrize("n", [2, 3, 4])
def test_eigen_term_matches_overlap_oracle(n):
    rng = np.random.default_rng(10 + n)
    cfg = SearchConfig(n, w_eigen=0.7)
    strict, loose = Objective(cfg), Objective(SearchConfig(n, w_eigen=0.0))
    for _ in range(5):
        amps = random_state_amplitudes(rng, n)
        expected = sum(1 - abs(np.vdot(amps, kron_rotation([t] * n) @ amps)) ** 2 for t in cfg.thetas)
        x = np.concatenate([amps.real, amps.imag])
        assert strict(x) - loose(x) == pytest.approx(0.7 * expected, rel=1e-10)


def test_singlet_fingerprint_example():
    fp = fingerprint(singlet(), [0, 30, 60, 90])
    expected = [[0, 0, 0.5, 0.5], [0.125, 0.125, 0.375, 0.375], [0.125, 0.125, 0.375, 0.375], [0, 0, 0.5, 0.5]]
    np.testing.assert_allclose(fp.vectors, expected, atol=1e-15)
    np.testing.assert_allclose(fp.vectors.sum(axis=1), 1, atol=1e-9)


def test_fingerprint_grids():
    assert relative_angle_grid(3).shape == (144, 3)
    big = relative_angle_grid(5)
    assert big.shape == (4096, 5) and np.all(big[:, 0] == 0)
    assert np.array_equal(big, relative_angle_grid(5))
    with pytest.raises(DimensionError):
        fingerprint(psi3(), np.zeros((3, 2)))
    with pytest.raises(DimensionError):
        fingerprint(psi3()).distance(fingerprint(psi3(), relative_angle_grid(3, 30)))


def test_fingerprint_global_rotation_blind():
    # shifting every grid angle by the same amount leaves the fingerprint of an invariant state unchanged
    grid = relative_angle_grid(3)
    a = fingerprint(psi3(), grid)
    b = fingerprint(psi3(), grid + 37.0)
    assert np.max(np.abs(a.vectors - b.vectors)) < 1e-12


def test_equivalence_examples():
    assert states_equivalent(singlet(), singlet().with_global_phase(math.pi / 3))
    assert states_equivalent(psi3(), psi3())
    assert fingerprint(psi3(1, 1)).distance(fingerprint(psi3(-1, -1))) < 1e-12
    assert states_equivalent(a4(0.0), a4(math.pi), 1e-6)
    assert not states_equivalent(a4(0.0), a4(math.pi / 2))
    assert not states_equivalent(singlet(), basis_state("HV"))
    # player 1 sits at 0 on every grid point, so the fingerprint cannot see a
    # global rotation: the symmetric triplet looks exactly like the singlet
    assert states_equivalent(singlet(), StateVector.from_kets({"HV": 1, "VH": 1}))
    with pytest.raises(DimensionError):
        states_equivalent(psi3(), s4())


def test_equivalence_symmetric():
    rng = np.random.default_rng(4)
    for _ in range(5):
        s1 = StateVector(3, random_state_amplitudes(rng, 3))
        s2 = StateVector(3, random_state_amplitudes(rng, 3))
        assert fingerprint_distance(s1, s2) == fingerprint_distance(s2, s1)
        assert fingerprint_distance(s1, s1) == 0
