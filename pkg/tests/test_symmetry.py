import numpy as np
import pytest

from qwzness.lattice import ImpuritySet, LatticeSpec, build_hamiltonian
from qwzness.symmetry import (check_gph_state, check_hamiltonian_symmetry, classify_impurities, flavor_pi,
                              flavor_swap, gph, pi_r_pi, pi_theta_sigma_y, r_pi, sigma_x, sigma_y,
                              symmetry_report, theta_sigma_x, time_reversal)
from qwzness.weakcoupling import lattice_spectrum, mode_couplings

from conftest import fermion_bath, solve


@pytest.fixture
def spec():
    return LatticeSpec(8, 8, m=1.0)


def test_actions_unitary_and_spatial_involutions(spec):
    for make in (r_pi, sigma_y, sigma_x, flavor_pi, flavor_swap, time_reversal, gph):
        action = make(spec)
        assert action.unitarity_residual() < 1e-14
    for make in (r_pi, sigma_y, sigma_x):
        W = make(spec).matrix
        assert set(np.unique(W)) <= {0.0, 1.0}
        np.testing.assert_array_equal(W @ W, np.eye(spec.dim))


@pytest.mark.parametrize("make", [pi_r_pi, pi_theta_sigma_y, theta_sigma_x])
@pytest.mark.parametrize("m", [1.0, -0.4, 3.0])
def test_hamiltonian_symmetries(make, m):
    spec = LatticeSpec(8, 8, m=m)
    H = build_hamiltonian(spec)
    assert check_hamiltonian_symmetry(H, make(spec)) < 1e-12


def test_gph_on_shifted_hamiltonian(spec):
    H = build_hamiltonian(spec)
    assert check_hamiltonian_symmetry(H, gph(spec), shift=spec.omega0) < 1e-12
    assert check_hamiltonian_symmetry(H, gph(spec)) > 1.0


@pytest.mark.parametrize("make", [sigma_y, r_pi])
def test_partial_actions_fail(spec, make):
    assert check_hamiltonian_symmetry(build_hamiltonian(spec), make(spec)) > 0.1


def test_composition_order_insensitive(spec):
    H = build_hamiltonian(spec)
    a = flavor_pi(spec) @ (sigma_y(spec) @ time_reversal(spec))
    b = time_reversal(spec) @ (flavor_pi(spec) @ sigma_y(spec))
    c = (sigma_y(spec) @ flavor_pi(spec)) @ time_reversal(spec)
    for action in (a, b, c):
        assert action.antiunitary
        assert check_hamiltonian_symmetry(H, action) < 1e-12
    np.testing.assert_allclose(a.matrix, b.matrix)


def test_shape_mismatch(spec):
    with pytest.raises(ValueError):
        check_hamiltonian_symmetry(np.eye(4), r_pi(spec))
    with pytest.raises(ValueError):
        check_gph_state(np.eye(3))


def test_classification_examples(spec):
    assert classify_impurities(ImpuritySet(), spec) == (True, True, True)
    cls = classify_impurities(ImpuritySet([(4, 4), (5, 5)]), spec)
    assert cls.r_pi_symmetric and not cls.sigma_y_symmetric and cls.protected
    cls = classify_impurities(ImpuritySet([(2, 3)]), spec)
    assert not cls.r_pi_symmetric and not cls.sigma_y_symmetric and not cls.protected
    cls = classify_impurities(ImpuritySet([(3, 1), (3, 8)]), spec)
    assert cls.sigma_x_symmetric and not cls.protected


@pytest.mark.parametrize("sites", [(), ((4, 4), (5, 5)), ((3, 3), (6, 6)), ((3, 4), (6, 4)),
                                   ((2, 2), (7, 2), (4, 6), (5, 6)), ((2, 3),), ((3, 1), (3, 8))])
def test_classification_consistent_with_couplings(spec, sites):
    imp = ImpuritySet(sites)
    H = build_hamiltonian(spec, imp)
    cp = mode_couplings(lattice_spectrum(H, spec, imp), spec)
    if classify_impurities(imp, spec).protected:
        assert cp.asymmetry < 1e-10
    else:
        assert cp.asymmetry > 1e-3


def test_gph_state_examples(spec):
    assert check_gph_state(0.5 * np.eye(spec.dim)) == 0.0
    assert check_gph_state(np.zeros((spec.dim, spec.dim))) == 1.0


@pytest.mark.parametrize("gamma", [0.005, 0.5])
def test_gph_state_of_ness(spec, gamma):
    _, _, _, C = solve(spec, fermion_bath(gamma, mu=spec.omega0))
    assert check_gph_state(C) < 1e-8
    _, _, _, C = solve(spec, fermion_bath(gamma, mu=spec.omega0 + 0.1))
    assert check_gph_state(C) > 1e-3


def test_report(spec):
    rep = symmetry_report(build_hamiltonian(spec), spec)
    assert max(rep["hamiltonian_residuals"].values()) < 1e-12
    rep = symmetry_report(build_hamiltonian(spec, ImpuritySet([(2, 3)])), spec, ImpuritySet([(2, 3)]))
    assert rep["hamiltonian_residuals"]["Pi*R_pi"] > 1.0
    assert rep["impurities"] == {"sigma_y_symmetric": False, "r_pi_symmetric": False,
                                 "sigma_x_symmetric": False}
