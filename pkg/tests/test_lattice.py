import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwzness.errors import ValidationError
from qwzness.lattice import (DOWN, UP, ImpuritySet, LatticeSpec, SiteIndex, build_hamiltonian,
                             bulk_gap, column_indices, flat_index, flavor_swap, hermiticity_residual,
                             in_gap_count, single_particle_spectrum, site_of)


def test_flat_index_anchors():
    spec = LatticeSpec(8, 8)
    assert flat_index(SiteIndex(1, 1, UP), spec) == 0
    assert flat_index(SiteIndex(1, 1, DOWN), spec) == 1
    assert flat_index(SiteIndex(2, 1, UP), spec) == 2
    assert flat_index(SiteIndex(1, 2, UP), spec) == 16


@pytest.mark.parametrize("site", [SiteIndex(0, 1), SiteIndex(9, 1), SiteIndex(1, 9), SiteIndex(1, 1, 2)])
def test_flat_index_out_of_range(site):
    with pytest.raises(IndexError):
        flat_index(site, LatticeSpec(8, 8))


@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_flat_index_round_trip(lx, ly, data):
    spec = LatticeSpec(lx, ly)
    idx = data.draw(st.integers(0, spec.dim - 1))
    assert flat_index(site_of(idx, spec), spec) == idx


def test_single_site_hamiltonian():
    H = build_hamiltonian(LatticeSpec(1, 1, m=3.0, omega0=10.0))
    np.testing.assert_array_equal(H, np.diag([13.0, 7.0]))
    omega = single_particle_spectrum(H).omega
    np.testing.assert_allclose(omega, [7.0, 13.0])


def test_x_bond_block_transcription():
    spec = LatticeSpec(2, 1, tx=1.0)
    H = build_hamiltonian(spec)
    # rows on x=2, columns on x=1: (t/2)(sigma_z + i sigma_y)
    np.testing.assert_allclose(H[2:4, 0:2], 0.5 * np.array([[1, 1], [-1, -1]]))
    np.testing.assert_allclose(H[0:2, 2:4], H[2:4, 0:2].conj().T)


def test_y_bond_block_transcription():
    spec = LatticeSpec(1, 2, ty=1.0)
    H = build_hamiltonian(spec)
    np.testing.assert_allclose(H[2:4, 0:2], 0.5 * np.array([[1, 1j], [1j, -1]]))


def test_impurity_shift():
    spec = LatticeSpec(3, 3)
    clean = build_hamiltonian(spec)
    H = build_hamiltonian(spec, ImpuritySet([(1, 1)], 1e4))
    diff = H - clean
    assert diff[0, 0] == 1e4 and diff[1, 1] == 1e4
    diff[0, 0] = diff[1, 1] = 0
    assert not np.any(diff)


def test_impurity_validation():
    with pytest.raises(ValidationError):
        build_hamiltonian(LatticeSpec(4, 4), ImpuritySet([(5, 1)]))
    with pytest.raises(ValidationError):
        ImpuritySet([(1, 1), (1, 1)])
    with pytest.raises(ValidationError):
        LatticeSpec(0, 3)
    with pytest.raises(ValidationError):
        LatticeSpec(3, 3, tx=0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.floats(-3, 3), st.floats(0.2, 2), st.floats(0.2, 2))
def test_hermitian_and_nearest_neighbour(lx, ly, m, tx, ty):
    spec = LatticeSpec(lx, ly, tx=tx, ty=ty, m=m)
    H = build_hamiltonian(spec)
    assert hermiticity_residual(H) < 1e-14 * np.max(np.abs(H))
    for j in range(spec.dim):
        for k in np.nonzero(H[j])[0]:
            a, b = site_of(j, spec), site_of(int(k), spec)
            assert abs(a.x - b.x) + abs(a.y - b.y) <= 1


def test_spectrum_unitary_and_diagonalizing(spec8):
    H = build_hamiltonian(spec8)
    sp = single_particle_spectrum(H)
    assert np.all(np.diff(sp.omega) >= 0)
    assert np.max(np.abs(sp.U.conj().T @ sp.U - np.eye(spec8.dim))) < 1e-12
    assert np.max(np.abs(H @ sp.U - sp.U * sp.omega)) < 1e-10


@pytest.mark.parametrize("m", [0.5, 1.0, 3.0])
def test_spectrum_invariant_under_m_reflection(m):
    ep = np.linalg.eigvalsh(build_hamiltonian(LatticeSpec(6, 5, m=m)))
    em = np.linalg.eigvalsh(build_hamiltonian(LatticeSpec(6, 5, m=-m)))
    np.testing.assert_allclose(ep, em, atol=1e-10)


def test_spectrum_invariant_under_r_pi():
    spec = LatticeSpec(6, 6, m=1.3)
    H = build_hamiltonian(spec)
    from qwzness.symmetry import r_pi
    W = r_pi(spec).matrix
    np.testing.assert_allclose(np.linalg.eigvalsh(W @ H @ W.T), np.linalg.eigvalsh(H), atol=1e-12)


def test_in_gap_states_topological_vs_trivial():
    for m, topological in ((1.0, True), (3.0, False)):
        spec = LatticeSpec(20, 20, m=m)
        omega = single_particle_spectrum(build_hamiltonian(spec)).omega
        low, high = bulk_gap(spec)
        count = in_gap_count(omega, low, high)
        assert (count > 0) == topological


def test_column_indices_and_flavor_swap():
    spec = LatticeSpec(3, 2)
    idx = column_indices(3, spec)
    assert sorted(idx.tolist()) == [4, 5, 10, 11]
    S = flavor_swap(spec)
    np.testing.assert_array_equal(S @ S, np.eye(spec.dim))


def test_is_topological():
    assert LatticeSpec(4, 4, m=1.0).is_topological()
    assert not LatticeSpec(4, 4, m=3.0).is_topological()
    assert LatticeSpec(4, 4, m=-1.5).is_topological()
