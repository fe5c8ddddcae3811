import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwzness.baths import BathSpec, build_self_energies, check_bosonic_admissibility, occupation
from qwzness.errors import ConfigurationError, DivergenceError, ValidationError
from qwzness.lattice import LatticeSpec, column_indices, flavor_swap, build_hamiltonian
from qwzness.symmetry import pi_r_pi

mpmath.mp.dps = 40


def test_fermi_symmetry_point_and_limits():
    assert occupation(10.0, 0.3, 10.0, "fermion") == 0.5
    assert occupation(1e6, 1.0, 0.0, "fermion") == 0.0
    assert occupation(-1e6, 1.0, 0.0, "fermion") == 1.0


def test_bose_deep_tail_underflows_to_zero():
    # exp(-800) ~ 3.6e-348 is below the double range; the oracle agrees it is < 1e-300
    exact = 1 / (mpmath.e ** (mpmath.mpf(8) / mpmath.mpf("0.01")) - 1)
    assert exact < mpmath.mpf("1e-300")
    assert occupation(8.0, 0.01, 0.0, "boson") == 0.0


@pytest.mark.parametrize("x", [1e-6, 1e-3, 0.1, 1.0, 7.0, 30.0, 300.0, 690.0])
def test_bose_matches_arbitrary_precision(x):
    exact = float(1 / mpmath.expm1(mpmath.mpf(x)))
    assert occupation(x, 1.0, 0.0, "boson") == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("x", [-700.0, -40.0, -1.0, -1e-7, 0.3, 5.0, 40.0, 700.0])
def test_fermi_matches_arbitrary_precision(x):
    exact = float(1 / (mpmath.exp(mpmath.mpf(x)) + 1))
    assert occupation(x, 1.0, 0.0, "fermion") == pytest.approx(exact, rel=1e-13, abs=1e-300)


def test_bose_divergence():
    with pytest.raises(DivergenceError):
        occupation(0.0, 1.0, 0.0, "boson")
    with pytest.raises(DivergenceError):
        occupation(np.array([1.0, -1.0]), 1.0, 0.0, "boson")


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(["boson", "fermion"]), st.floats(0.01, 10), st.floats(-5, 5),
       st.lists(st.floats(0.05, 50), min_size=2, max_size=30, unique=True))
def test_occupation_strictly_decreasing(stat, T, mu, omegas):
    mu = 0.0 if stat == "boson" else mu
    w = np.sort(np.asarray(omegas)) + (0.0 if stat == "boson" else mu - 25)
    n = occupation(w, T, mu, stat)
    # strict decrease wherever the values are representable and distinct from the limits
    live = (n > 1e-290) & (n < 1)
    assert np.all(np.diff(n) <= 0)
    assert np.all(np.diff(n[live]) < 0) or live.sum() < 2


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 10), st.floats(-20, 20), st.floats(0, 50))
def test_fermion_particle_hole_identity(T, mu, ratio):
    d = ratio * T
    total = occupation(mu + d, T, mu, "fermion") + occupation(mu - d, T, mu, "fermion")
    assert abs(total - 1.0) < 1e-14


def test_bath_validation():
    with pytest.raises(ValidationError, match="bosonic chemical potential must be zero"):
        BathSpec(1.0, 0.1, 0.1, "boson", 0.5)
    for bad in ({"t_hot": 0.0}, {"t_cold": -1.0}, {"gamma": 0.0}, {"statistics": "anyon"}):
        kw = dict(t_hot=1.0, t_cold=0.1, gamma=0.1, statistics="fermion")
        kw.update(bad)
        with pytest.raises(ValidationError):
            BathSpec(**kw)


@pytest.mark.parametrize("gamma", [0.5, 0.005])
def test_self_energy_support(gamma):
    spec = LatticeSpec(8, 8)
    se = build_self_energies(spec, BathSpec(1.0, 0.01, gamma, "boson"))
    assert np.count_nonzero(se.hot) == 16 and np.count_nonzero(se.cold) == 16
    assert set(np.nonzero(se.hot)[0]) == set(column_indices(1, spec))
    assert set(np.nonzero(se.cold)[0]) == set(column_indices(8, spec))
    assert np.all(se.hot[se.hot > 0] == gamma)
    assert not np.any(se.hot * se.cold)


def test_total_rates_commute_with_symmetries():
    spec = LatticeSpec(6, 6)
    G = np.diag(build_self_energies(spec, BathSpec(1.0, 0.01, 0.3, "boson")).total)
    for W in (flavor_swap(spec), pi_r_pi(spec).matrix):
        assert np.array_equal(W @ G, G @ W)


def test_single_column_rejected():
    with pytest.raises(ConfigurationError):
        build_self_energies(LatticeSpec(1, 4), BathSpec(1.0, 0.01, 0.1, "boson"))


def test_bosonic_admissibility():
    bath = BathSpec(1.0, 0.01, 0.1, "boson")
    check_bosonic_admissibility(0.5, bath)
    with pytest.raises(DivergenceError):
        check_bosonic_admissibility(-0.1, bath)
    H = build_hamiltonian(LatticeSpec(4, 4, m=3.0, omega0=1.0))
    assert np.linalg.eigvalsh(H)[0] < 0
