"""Hot inner loops, each with a numba and a pure-numpy implementation.

The backend is chosen once at import from ``QWZNESS_BACKEND``
(``numba`` or ``numpy``; default ``numba`` when it imports).  Both
implementations are always importable as ``NUMPY_KERNELS`` and, if numba is
present, ``NUMBA_KERNELS`` so they can be compared directly.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np
from scipy.special import expit

from .quadrature import GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES, integrate, panel_rule

# occupation codes shared by both backends
FERMI, BOSE, UNIT = 0, 1, 2

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None


# ---------------------------------------------------------------- numpy path

def _resolvent_panel_np(lam, nodes, wk, wg, fh, fc, mh, mc):
    """Kronrod and Gauss sums of ``(fh*mh + fc*mc) o (d d^H)`` with ``d = 1/(w - lam)``."""
    d = 1.0 / (nodes[:, None] - lam[None, :])
    dc = d.conj()
    out = []
    for w in (wk, wg):
        ah = (d.T * (w * fh)) @ dc
        ac = (d.T * (w * fc)) @ dc
        out.append(mh * ah + mc * ac)
    return out[0], out[1]


def _transmission_nodes_np(lam, nodes, weight):
    d = 1.0 / (nodes[:, None] - lam[None, :])
    return np.einsum("qi,ij,qj->q", d, weight, d.conj()).real


def _curvature_grid_np(kx, ky, m, tx, ty):
    """Lower-band Berry curvature ``+1/2 h.(d_x h x d_y h)/|h|^3`` on a grid."""
    sx, cx = np.sin(kx), np.cos(kx)
    sy, cy = np.sin(ky), np.cos(ky)
    h1, h2, h3 = ty * sy, tx * sx, m + tx * cx + ty * cy
    # d_kx h = (0, tx cx, -tx sx); d_ky h = (ty cy, 0, -ty sy)
    c1 = -tx * ty * cx * sy
    c2 = -tx * ty * sx * cy
    c3 = -tx * ty * cx * cy
    norm = np.sqrt(h1 * h1 + h2 * h2 + h3 * h3)
    return 0.5 * (h1 * c1 + h2 * c2 + h3 * c3) / norm**3


def _spinors_np(kx, ky, m, tx, ty, sign):
    """Normalized eigenvectors of ``h.sigma`` with eigenvalue ``sign*|h|``.

    Two gauges are mixed pointwise to avoid the Dirac-string singularity;
    the link-variable flux is gauge invariant so this is harmless.
    """
    h1 = ty * np.sin(ky)
    h2 = tx * np.sin(kx)
    h3 = m + tx * np.cos(kx) + ty * np.cos(ky)
    e = sign * np.sqrt(h1 * h1 + h2 * h2 + h3 * h3)
    # (h3 - e, h1 + i h2)^T is annihilated by the first row when using the second gauge;
    # gauge A: (h1 - i h2, e - h3), gauge B: (e + h3, h1 + i h2)
    a0, a1 = h1 - 1j * h2, e - h3
    b0, b1 = e + h3 + 0j, h1 + 1j * h2
    use_a = np.abs(e - h3) > np.abs(e + h3)
    u0 = np.where(use_a, a0, b0)
    u1 = np.where(use_a, a1, b1)
    norm = np.sqrt(np.abs(u0) ** 2 + np.abs(u1) ** 2)
    return u0 / norm, u1 / norm


def _link_flux_np(n, m, tx, ty, sign):
    """Plaquette Berry fluxes on an ``n x n`` periodic grid starting at -pi."""
    k = -np.pi + 2 * np.pi * np.arange(n + 1) / n
    kx, ky = np.meshgrid(k, k, indexing="ij")
    u0, u1 = _spinors_np(kx, ky, m, tx, ty, sign)
    # close the torus exactly
    u0[n, :], u1[n, :] = u0[0, :], u1[0, :]
    u0[:, n], u1[:, n] = u0[:, 0], u1[:, 0]

    def link(a0, a1, b0, b1):
        z = a0.conj() * b0 + a1.conj() * b1
        return z / np.abs(z)

    ux = link(u0[:-1, :], u1[:-1, :], u0[1:, :], u1[1:, :])   # (n, n+1)
    uy = link(u0[:, :-1], u1[:, :-1], u0[:, 1:], u1[:, 1:])   # (n+1, n)
    loop = ux[:, :-1] * uy[1:, :] * ux[:, 1:].conj() * uy[:-1, :].conj()
    return np.angle(loop)


def _occupation_np(w, temperature, mu, stat):
    if stat == UNIT:
        return np.ones_like(w)
    x = (w - mu) / temperature
    if stat == FERMI:
        return expit(-x)
    with np.errstate(over="ignore"):
        out = 1.0 / np.expm1(x)
    return np.where(out < 1e-300, 0.0, out)


def _mode_transforms_np(lam, low, high, seeds, th, tc, mu, stat, tol, max_panels):
    """Pole-subtracted transforms ``int_low^high (f(w) - f(x_i))/(w - lam_i) dw``.

    ``x_i = Re lam_i`` clipped to the window; one value per mode and bath.
    This path integrates all modes on one shared adaptive partition and
    returns the (shared) number of panels for every mode.
    """
    x = np.clip(lam.real, low, high)
    fx = np.stack([_occupation_np(x, th, mu, stat), _occupation_np(x, tc, mu, stat)])
    inv_tol = 1.0 / tol

    def panel(a, b):
        nodes, wk, wg = panel_rule(a, b)
        d = 1.0 / (nodes[:, None] - lam[None, :])
        fh = _occupation_np(nodes, th, mu, stat)[:, None]
        fc = _occupation_np(nodes, tc, mu, stat)[:, None]
        g = np.stack([(fh - fx[0]) * d, (fc - fx[1]) * d])       # (2, q, n)
        return g.transpose(0, 2, 1) @ wk, g.transpose(0, 2, 1) @ wg

    def norm(v):
        return float(np.max(np.abs(v) * inv_tol))

    pts = np.concatenate([seeds, x])
    res = integrate(panel, pts, rtol=0.0, atol=1.0, max_panels=max_panels,
                    norm=norm, strategy="global")
    n = lam.size
    return (res.value[0], res.value[1], np.full(n, res.error) * tol,
            np.full(n, res.n_panels, dtype=np.int64))


NUMPY_KERNELS = SimpleNamespace(
    name="numpy",
    resolvent_panel=_resolvent_panel_np,
    transmission_nodes=_transmission_nodes_np,
    curvature_grid=_curvature_grid_np,
    link_flux=_link_flux_np,
    mode_transforms=_mode_transforms_np,
)


# ---------------------------------------------------------------- numba path

NUMBA_KERNELS = None

if numba is not None:
    _jit = numba.njit(cache=True, fastmath=False, nogil=True)

    @_jit
    def _resolvent_panel_nb(lam, nodes, wk, wg, fh, fc, mh, mc):
        n = lam.shape[0]
        q = nodes.shape[0]
        d = np.empty((q, n), dtype=np.complex128)
        for a in range(q):
            for i in range(n):
                d[a, i] = 1.0 / (nodes[a] - lam[i])
        xk = np.zeros((n, n), dtype=np.complex128)
        xg = np.zeros((n, n), dtype=np.complex128)
        for i in range(n):
            for j in range(n):
                mhij = mh[i, j]
                mcij = mc[i, j]
                sk = 0j
                sg = 0j
                for a in range(q):
                    p = d[a, i] * np.conj(d[a, j]) * (fh[a] * mhij + fc[a] * mcij)
                    sk += wk[a] * p
                    sg += wg[a] * p
                xk[i, j] = sk
                xg[i, j] = sg
        return xk, xg

    @_jit
    def _transmission_nodes_nb(lam, nodes, weight):
        n = lam.shape[0]
        q = nodes.shape[0]
        out = np.empty(q)
        d = np.empty(n, dtype=np.complex128)
        for a in range(q):
            for i in range(n):
                d[i] = 1.0 / (nodes[a] - lam[i])
            s = 0j
            for i in range(n):
                row = 0j
                for j in range(n):
                    row += weight[i, j] * np.conj(d[j])
                s += d[i] * row
            out[a] = s.real
        return out

    @_jit
    def _curvature_grid_nb(kx, ky, m, tx, ty):
        out = np.empty(kx.shape)
        fx = kx.ravel()
        fy = ky.ravel()
        fo = out.ravel()
        for p in range(fx.shape[0]):
            sx, cx = np.sin(fx[p]), np.cos(fx[p])
            sy, cy = np.sin(fy[p]), np.cos(fy[p])
            h1, h2, h3 = ty * sy, tx * sx, m + tx * cx + ty * cy
            c1 = -tx * ty * cx * sy
            c2 = -tx * ty * sx * cy
            c3 = -tx * ty * cx * cy
            norm = np.sqrt(h1 * h1 + h2 * h2 + h3 * h3)
            fo[p] = 0.5 * (h1 * c1 + h2 * c2 + h3 * c3) / norm**3
        return out

    @_jit
    def _spinor_nb(kx, ky, m, tx, ty, sign):
        h1 = ty * np.sin(ky)
        h2 = tx * np.sin(kx)
        h3 = m + tx * np.cos(kx) + ty * np.cos(ky)
        e = sign * np.sqrt(h1 * h1 + h2 * h2 + h3 * h3)
        if abs(e - h3) > abs(e + h3):
            u0 = complex(h1, -h2)
            u1 = complex(e - h3, 0.0)
        else:
            u0 = complex(e + h3, 0.0)
            u1 = complex(h1, h2)
        norm = np.sqrt(abs(u0) ** 2 + abs(u1) ** 2)
        return u0 / norm, u1 / norm

    @_jit
    def _link_flux_nb(n, m, tx, ty, sign):
        u0 = np.empty((n, n), dtype=np.complex128)
        u1 = np.empty((n, n), dtype=np.complex128)
        for i in range(n):
            for j in range(n):
                a, b = _spinor_nb(-np.pi + 2 * np.pi * i / n, -np.pi + 2 * np.pi * j / n,
                                  m, tx, ty, sign)
                u0[i, j] = a
                u1[i, j] = b
        out = np.empty((n, n))
        for i in range(n):
            ip = (i + 1) % n
            for j in range(n):
                jp = (j + 1) % n
                z1 = np.conj(u0[i, j]) * u0[ip, j] + np.conj(u1[i, j]) * u1[ip, j]
                z2 = np.conj(u0[ip, j]) * u0[ip, jp] + np.conj(u1[ip, j]) * u1[ip, jp]
                z3 = np.conj(u0[i, jp]) * u0[ip, jp] + np.conj(u1[i, jp]) * u1[ip, jp]
                z4 = np.conj(u0[i, j]) * u0[i, jp] + np.conj(u1[i, j]) * u1[i, jp]
                loop = (z1 / abs(z1)) * (z2 / abs(z2)) * np.conj(z3 / abs(z3)) * np.conj(z4 / abs(z4))
                out[i, j] = np.angle(loop)
        return out


    _NODES = NODES.copy()
    _WK = KRONROD_WEIGHTS.copy()
    _WG = GAUSS_WEIGHTS.copy()

    @_jit
    def _occupation_nb(w, temperature, mu, stat):
        if stat == 2:
            return 1.0
        x = (w - mu) / temperature
        if stat == 0:
            if x > 0:
                e = np.exp(-x)
                return e / (1.0 + e)
            return 1.0 / (1.0 + np.exp(x))
        if x > 700.0:
            return 0.0
        v = 1.0 / np.expm1(x)
        return v if v >= 1e-300 else 0.0

    @_jit
    def _mode_panel_nb(a, b, z, fxh, fxc, th, tc, mu, stat):
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        kh = 0j
        kc = 0j
        gh = 0j
        gc = 0j
        for q in range(15):
            w = mid + half * _NODES[q]
            d = 1.0 / (w - z)
            vh = (_occupation_nb(w, th, mu, stat) - fxh) * d
            vc = (_occupation_nb(w, tc, mu, stat) - fxc) * d
            kh += _WK[q] * vh
            kc += _WK[q] * vc
            gh += _WG[q] * vh
            gc += _WG[q] * vc
        return kh * half, kc * half, gh * half, gc * half

    @_jit
    def _mode_transforms_nb(lam, low, high, seeds, th, tc, mu, stat, tol, max_panels):
        n = lam.shape[0]
        sh = np.zeros(n, dtype=np.complex128)
        sc = np.zeros(n, dtype=np.complex128)
        err = np.zeros(n)
        npan = np.zeros(n, dtype=np.int64)
        pa = np.empty(max_panels)
        pb = np.empty(max_panels)
        kh = np.empty(max_panels, dtype=np.complex128)
        kc = np.empty(max_panels, dtype=np.complex128)
        pe = np.empty(max_panels)
        min_width = 64 * 2.220446049250313e-16 * max(abs(low), abs(high), 1.0)
        for i in range(n):
            z = lam[i]
            x = min(max(z.real, low), high)
            fxh = _occupation_nb(x, th, mu, stat)
            fxc = _occupation_nb(x, tc, mu, stat)
            pts = np.empty(seeds.shape[0] + 1)
            pts[:-1] = seeds
            pts[-1] = x
            pts = np.sort(pts)
            cnt = 0
            for s in range(pts.shape[0] - 1):
                if pts[s + 1] > pts[s] and cnt < max_panels:
                    a, b = pts[s], pts[s + 1]
                    r = _mode_panel_nb(a, b, z, fxh, fxc, th, tc, mu, stat)
                    pa[cnt], pb[cnt], kh[cnt], kc[cnt] = a, b, r[0], r[1]
                    pe[cnt] = max(abs(r[0] - r[2]), abs(r[1] - r[3]))
                    cnt += 1
            frozen = 0.0
            while True:
                total = 0.0
                worst = 0
                for p in range(cnt):
                    total += pe[p]
                    if pe[p] > pe[worst]:
                        worst = p
                if total <= tol[i] or pe[worst] == 0.0:
                    break
                a, b = pa[worst], pb[worst]
                if b - a < min_width:
                    frozen += pe[worst]
                    pe[worst] = 0.0
                    continue
                if cnt >= max_panels:
                    break
                mid = 0.5 * (a + b)
                r = _mode_panel_nb(a, mid, z, fxh, fxc, th, tc, mu, stat)
                pa[worst], pb[worst], kh[worst], kc[worst] = a, mid, r[0], r[1]
                pe[worst] = max(abs(r[0] - r[2]), abs(r[1] - r[3]))
                r = _mode_panel_nb(mid, b, z, fxh, fxc, th, tc, mu, stat)
                pa[cnt], pb[cnt], kh[cnt], kc[cnt] = mid, b, r[0], r[1]
                pe[cnt] = max(abs(r[0] - r[2]), abs(r[1] - r[3]))
                cnt += 1
            vh = 0j
            vc = 0j
            total = 0.0
            for p in range(cnt):
                vh += kh[p]
                vc += kc[p]
                total += pe[p]
            sh[i] = vh
            sc[i] = vc
            err[i] = total + frozen
            npan[i] = cnt
        return sh, sc, err, npan

    NUMBA_KERNELS = SimpleNamespace(
        name="numba",
        resolvent_panel=_resolvent_panel_nb,
        transmission_nodes=_transmission_nodes_nb,
        curvature_grid=_curvature_grid_nb,
        link_flux=_link_flux_nb,
        mode_transforms=_mode_transforms_nb,
    )


def select(name: str | None = None) -> SimpleNamespace:
    """Return the kernel set called ``name`` (or the env-selected default)."""
    name = (name or os.environ.get("QWZNESS_BACKEND", "numba")).strip().lower()
    if name == "numpy":
        return NUMPY_KERNELS
    if name == "numba":
        return NUMBA_KERNELS if NUMBA_KERNELS is not None else NUMPY_KERNELS
    raise ValueError(f"QWZNESS_BACKEND must be 'numba' or 'numpy', got {name!r}")


active = select()
