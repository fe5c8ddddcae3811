import os
import subprocess
import sys

import mpmath
import numpy as np
import pytest

from qwzness import kernels
from qwzness.quadrature import panel_rule

pytestmark = pytest.mark.skipif(kernels.NUMBA_KERNELS is None, reason="numba not importable")

NP, NB = kernels.NUMPY_KERNELS, kernels.NUMBA_KERNELS


def random_modes(rng, n=12, gamma=0.05):
    lam = rng.uniform(7, 13, n) - 1j * rng.uniform(0.1, 1.0, n) * gamma
    return np.ascontiguousarray(lam)


def test_select_respects_names():
    assert kernels.select("numpy") is NP
    assert kernels.select("numba") is NB
    with pytest.raises(ValueError):
        kernels.select("fortran")


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_env_flag_selects_backend(backend):
    env = dict(os.environ, QWZNESS_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", "from qwzness import kernels; print(kernels.active.name)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == backend


def test_resolvent_panel_agrees(rng):
    lam = random_modes(rng)
    n = lam.size
    mh = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    mc = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    nodes, wk, wg = panel_rule(9.0, 9.7)
    fh, fc = np.exp(-nodes), np.exp(-3 * nodes)
    a = NP.resolvent_panel(lam, nodes, wk, wg, fh, fc, mh, mc)
    b = NB.resolvent_panel(lam, nodes, wk, wg, fh, fc, mh, mc)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-14 * np.max(np.abs(x)))


def test_transmission_nodes_agrees(rng):
    lam = random_modes(rng)
    n = lam.size
    A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    weight = A @ A.conj().T
    nodes = np.linspace(6, 14, 37)
    np.testing.assert_allclose(NP.transmission_nodes(lam, nodes, weight),
                               NB.transmission_nodes(lam, nodes, weight), rtol=1e-12)


@pytest.mark.parametrize("m,tx,ty", [(1.0, 1.0, 1.0), (-0.7, 1.0, 1.3), (2.5, 0.8, 1.0)])
def test_curvature_grid_agrees(m, tx, ty):
    k = np.linspace(-np.pi, np.pi, 31)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    kx, ky = np.ascontiguousarray(kx), np.ascontiguousarray(ky)
    np.testing.assert_allclose(NP.curvature_grid(kx, ky, m, tx, ty), NB.curvature_grid(kx, ky, m, tx, ty),
                               rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("sign", [1, -1])
def test_link_flux_agrees(sign):
    a = NP.link_flux(40, 1.2, 1.0, 1.0, sign)
    b = NB.link_flux(40, 1.2, 1.0, 1.0, sign)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-13)


def s_oracle(z, low, high, temperature, mu, stat):
    """Pole-subtracted transform by arbitrary-precision quadrature."""
    def f(w):
        if stat == kernels.FERMI:
            return 1 / (mpmath.exp((w - mu) / temperature) + 1)
        return 1 / mpmath.expm1(w / temperature)
    x = min(max(z.real, low), high)
    fx = f(mpmath.mpf(x))
    zz = mpmath.mpc(z.real, z.imag)
    pts = sorted({low, x, high} | ({mu} if stat == kernels.FERMI and low < mu < high else set()))
    return complex(mpmath.quad(lambda w: (f(w) - fx) / (w - zz), pts))


@pytest.mark.parametrize("stat,mu,low", [(kernels.FERMI, 9.9, 4.0), (kernels.BOSE, 0.0, 3.5)])
@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_mode_transforms_match_oracle(stat, mu, low, backend):
    mpmath.mp.dps = 30
    lam = np.array([8.0 - 0.02j, 9.91 - 1e-4j, 10.5 - 0.5j, 12.2 - 3e-3j])
    high = 16.0
    seeds = np.array([low, high] + ([mu] if stat == kernels.FERMI else []))
    tol = np.full(lam.size, 1e-12)
    k = kernels.select(backend)
    sh, sc, err, npan = k.mode_transforms(lam, low, high, seeds, 1.0, 0.05, mu, stat, tol, 200000)
    assert np.all(err <= tol)
    for i, z in enumerate(lam):
        assert abs(sh[i] - s_oracle(z, low, high, 1.0, mu, stat)) < 1e-10
        assert abs(sc[i] - s_oracle(z, low, high, 0.05, mu, stat)) < 1e-10


def test_mode_transforms_backends_agree(rng):
    lam = random_modes(rng, 20, gamma=0.01)
    seeds = np.array([4.0, 18.0, 9.8])
    tol = np.full(lam.size, 1e-11)
    a = NP.mode_transforms(lam, 4.0, 18.0, seeds, 1.0, 0.01, 9.8, kernels.FERMI, tol, 200000)
    b = NB.mode_transforms(lam, 4.0, 18.0, seeds, 1.0, 0.01, 9.8, kernels.FERMI, tol, 200000)
    np.testing.assert_allclose(a[0], b[0], atol=1e-9)
    np.testing.assert_allclose(a[1], b[1], atol=1e-9)


@pytest.mark.parametrize("stat", [kernels.FERMI, kernels.BOSE, kernels.UNIT])
def test_occupation_kernels_agree(stat):
    w = np.linspace(0.2, 30, 301)
    a = kernels._occupation_np(w, 0.7, 0.0 if stat == kernels.BOSE else 10.0, stat)
    b = np.array([kernels._occupation_nb(x, 0.7, 0.0 if stat == kernels.BOSE else 10.0, stat) for x in w])
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-300)
