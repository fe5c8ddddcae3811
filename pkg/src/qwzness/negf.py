"""Exact NESS correlation matrix in the wide-band limit.

The retarded Green function is ``G(w) = (w - H_eff)^-1`` with
``H_eff = H - i(Gamma_h + Gamma_c)/2``.  ``H_eff`` is diagonalised once,
``H_eff = V diag(lam) V^-1``, so that

    C = V [ B_h o I_h + B_c o I_c ] V^H,   B_b = V^-1 Gamma_b V^-H,
    I_b[i, j] = int dw/2pi  n_b(w) / ((w - lam_i)(w - conj(lam_j)))

and every quadrature node costs O(N^2) instead of a dense solve.  When the
eigenvector matrix is too ill-conditioned the integrand falls back to a
linear solve per node.

The default ``"modes"`` method avoids the N x N integrand altogether.  By
partial fractions

    1/((w - lam_i)(w - conj(lam_j))) = [1/(w - lam_i) - 1/(w - conj(lam_j))]
                                       / (lam_i - conj(lam_j)),

so ``I_b`` follows from the N scalar transforms ``int n_b(w)/(w - lam) dw``.
Each transform is integrated with the occupation at ``Re(lam)`` subtracted
(the subtracted piece is a logarithm), and the parts outside the window are
added in closed form.  The matrix route is kept as ``method="matrix"`` for
cross-checks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .baths import BOSON, BathSpec, SelfEnergyPair, check_bosonic_admissibility, occupation
from .errors import IntegrationError, NumericalError, SingularityError
from .quadrature import QuadratureResult, QuadratureSpec, integrate, panel_rule

log = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
# eigenvector condition number above which per-node solves are used instead
COND_LIMIT = 1e8
# thermal factors are taken as exactly constant this many temperatures from mu
THERMAL_SPAN = 40.0


class EffectiveHamiltonian:
    """``H - i Gamma/2`` together with its (cached) eigendecomposition."""

    def __init__(self, H: np.ndarray, se: SelfEnergyPair):
        H = np.asarray(H, dtype=complex)
        if H.shape != (se.hot.size, se.hot.size):
            raise ValueError(f"Hamiltonian shape {H.shape} does not match self-energy size {se.hot.size}")
        self.H = H
        self.gamma_total = np.asarray(se.total, dtype=float)
        self.matrix = H - 0.5j * np.diag(self.gamma_total)
        self.matrix.setflags(write=False)
        self._decompose()

    def _decompose(self):
        if not np.any(self.gamma_total):
            lam, V = np.linalg.eigh(self.H)
            self.eigenvalues = lam.astype(complex)
            self.V = V
            self.V_inv = V.conj().T
            self.condition = 1.0
        else:
            lam, V = np.linalg.eig(self.matrix)
            if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(V))):
                raise NumericalError("eigendecomposition of H_eff produced non-finite values")
            order = np.lexsort((lam.imag, lam.real))
            lam, V = lam[order], V[:, order]
            self.eigenvalues = lam
            self.V = V
            self.condition = float(np.linalg.cond(V))
            self.V_inv = np.linalg.inv(V) if self.condition < 1e15 else None
        self.direct = self.condition > COND_LIMIT
        if self.direct:
            log.warning("H_eff eigenvectors ill-conditioned (cond %.3g); using per-node solves",
                        self.condition)
        gmax = float(self.gamma_total.max(initial=0.0))
        # eigenvalues of modes with no boundary weight sit at Im = 0 up to eps * |H|
        slack = 1e-12 * gmax + 64 * np.finfo(float).eps * float(np.max(np.abs(self.H), initial=0.0))
        if gmax > 0 and np.max(self.eigenvalues.imag) > slack:
            raise NumericalError(
                f"H_eff has eigenvalue with positive imaginary part {np.max(self.eigenvalues.imag):.3g}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def reconstruction_error(self) -> float:
        if self.V_inv is None:
            return np.inf
        rec = (self.V * self.eigenvalues) @ self.V_inv
        return float(np.max(np.abs(rec - self.matrix)) / np.max(np.abs(self.matrix)))

    def coefficients(self, rates: np.ndarray) -> np.ndarray:
        """``V^-1 diag(rates) V^-H`` -- a bath's weight in the eigenbasis."""
        return (self.V_inv * rates) @ self.V_inv.conj().T

    @cached_property
    def real_range(self) -> tuple[float, float]:
        return float(self.eigenvalues.real.min()), float(self.eigenvalues.real.max())


def effective_hamiltonian(H: np.ndarray, se: SelfEnergyPair) -> EffectiveHamiltonian:
    return EffectiveHamiltonian(H, se)


def green_function(eff: EffectiveHamiltonian, omega: float) -> np.ndarray:
    """Retarded Green function ``(omega - H_eff)^-1`` at real ``omega``."""
    dist = np.min(np.abs(omega - eff.eigenvalues))
    if dist < 1e-14 * max(1.0, abs(omega)):
        raise SingularityError(f"omega = {omega!r} coincides with a pole of the resolvent")
    if eff.direct:
        return np.linalg.solve(omega * np.eye(eff.dim) - eff.matrix, np.eye(eff.dim))
    return (eff.V / (omega - eff.eigenvalues)) @ eff.V_inv


def resolvent_identity_residual(eff: EffectiveHamiltonian, omega: float) -> float:
    """``max |G Gamma G^H - i(G - G^H)|`` relative to ``max |G|``."""
    G = green_function(eff, omega)
    lhs = (G * eff.gamma_total) @ G.conj().T
    rhs = 1j * (G - G.conj().T)
    return float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(G)))


def transmission(eff: EffectiveHamiltonian, se: SelfEnergyPair, omega) -> np.ndarray:
    """``Tr[Gamma_c G Gamma_h G^H]`` at one or more frequencies."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if eff.direct:
        out = np.empty(omega.size)
        for q, w in enumerate(omega):
            G = green_function(eff, w)
            out[q] = np.einsum("i,ij,j,ij->", se.cold, G, se.hot, G.conj()).real
        return out
    weight = _transmission_weight(eff, se)
    return kernels.active.transmission_nodes(eff.eigenvalues, omega, weight)


def _transmission_weight(eff, se):
    b_hot = eff.coefficients(se.hot)
    a_cold = (eff.V.conj().T * se.cold) @ eff.V
    return np.ascontiguousarray(b_hot * a_cold.T)


# ------------------------------------------------------------------ windows

@dataclass
class Window:
    low: float
    high: float
    lower_fill: tuple[float, float] | None   # (hot, cold) filling below ``low``
    upper_fill: tuple[float, float] | None   # filling above ``high``


def frequency_window(eff: EffectiveHamiltonian, bath: BathSpec, quad: QuadratureSpec) -> Window:
    lo_e, hi_e = eff.real_range
    margin = quad.margin(bath.gamma, bath.t_max)
    low, high = lo_e - margin, hi_e + margin
    high = max(high, bath.mu + THERMAL_SPAN * bath.t_max)
    if bath.statistics == BOSON:
        check_bosonic_admissibility(lo_e, bath)
        low = max(low, quad.boson_floor * lo_e)
        return Window(low, high, None, (0.0, 0.0))
    low = min(low, bath.mu - THERMAL_SPAN * bath.t_max)
    return Window(low, high, (1.0, 1.0), (0.0, 0.0))


def _phi(z):
    """``log1p(z)/z`` with the removable singularity at 0 filled in."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z / 2 + z * z / 3, np.log1p(safe) / safe)


def tail_integrals(lam: np.ndarray, low: float | None, high: float | None):
    """Closed-form ``int 1/((w - lam_i)(w - conj lam_j)) dw`` over the tails.

    Returns ``(below, above)`` for ``(-inf, low]`` and ``[high, inf)``; either
    entry is ``None`` when the bound is ``None``.  Both bounds must lie
    outside ``[min Re lam, max Re lam]``.
    """
    li = lam[:, None]
    ljc = lam.conj()[None, :]
    below = above = None
    if low is not None:
        z = (ljc - li) / (low - ljc)
        below = -_phi(z) / (low - ljc)
    if high is not None:
        z = (ljc - li) / (high - ljc)
        above = _phi(z) / (high - ljc)
    return below, above


def _tail_correction(eff, b_hot, b_cold, window: Window):
    below, above = tail_integrals(
        eff.eigenvalues,
        window.low if window.lower_fill else None,
        window.high if window.upper_fill else None)
    out = np.zeros_like(b_hot)
    for tail, fill in ((below, window.lower_fill), (above, window.upper_fill)):
        if tail is None or not any(fill):
            continue
        out += (fill[0] * b_hot + fill[1] * b_cold) * tail
    return out / TWO_PI


def _direct_tail(eff, se, window: Window, quad: QuadratureSpec):
    """Tails by quadrature in the variable ``u`` with ``w = edge -+ u/(1-u)``."""
    total = np.zeros((eff.dim, eff.dim), dtype=complex)
    eye = np.eye(eff.dim)
    for edge, fill, direction in ((window.low, window.lower_fill, -1.0),
                                  (window.high, window.upper_fill, 1.0)):
        if fill is None or not any(fill):
            continue
        rates = fill[0] * se.hot + fill[1] * se.cold

        def panel(a, b, edge=edge, rates=rates, direction=direction):
            nodes, wk, wg = panel_rule(a, b)
            xk = np.zeros((eff.dim, eff.dim), dtype=complex)
            xg = np.zeros_like(xk)
            for u, ck, cg in zip(nodes, wk, wg):
                w = edge + direction * u / (1.0 - u)
                G = np.linalg.solve(w * eye - eff.matrix, eye)
                x = (G * rates) @ G.conj().T / (1.0 - u) ** 2
                xk += ck * x
                xg += cg * x
            return xk, xg

        res = integrate(panel, [0.0, 0.5, 0.9, 0.99, 1.0], quad.rtol, quad.atol, quad.max_panels)
        total += res.value
    return total / TWO_PI


# ------------------------------------------------------------------ solvers

@dataclass
class SolveInfo:
    error: float
    n_panels: int
    tolerance: float
    window: tuple[float, float]
    hermitization: float
    condition: float
    direct: bool


def _breakpoints(eff, window: Window, extra=()):
    """Seeds at every resonance, graded geometrically by its width.

    A Lorentzian much narrower than the node spacing is invisible to both
    the Kronrod and the Gauss rule, so each peak gets breakpoints at
    ``Re lam -+ eta 10^k`` out to the size of the window.
    """
    lam = eff.eigenvalues
    pts = [np.array([window.low, window.high, *extra]), lam.real]
    span = window.high - window.low
    eta = np.maximum(-lam.imag, 1e-15 * np.maximum(np.abs(lam.real), 1.0))
    steps = 10.0 ** np.arange(0, 17)
    offsets = eta[:, None] * steps[None, :]
    offsets = np.where(offsets < 0.1 * span, offsets, np.nan)
    for sign in (-1.0, 1.0):
        graded = (lam.real[:, None] + sign * offsets).ravel()
        pts.append(graded[np.isfinite(graded)])
    pts = np.concatenate(pts)
    return np.unique(pts[(pts >= window.low) & (pts <= window.high)])


def _integrate_correlation(eff, se, fill_hot, fill_cold, window, quad, extra_points=()):
    """``int G (Gamma_h n_h + Gamma_c n_c) G^H dw/2pi`` in the site basis."""
    pts = _breakpoints(eff, window, extra_points)
    if eff.direct:
        eye = np.eye(eff.dim)

        def panel(a, b):
            nodes, wk, wg = panel_rule(a, b)
            fh, fc = fill_hot(nodes), fill_cold(nodes)
            xk = np.zeros((eff.dim, eff.dim), dtype=complex)
            xg = np.zeros_like(xk)
            for q, w in enumerate(nodes):
                G = np.linalg.solve(w * eye - eff.matrix, eye)
                x = (G * (fh[q] * se.hot + fc[q] * se.cold)) @ G.conj().T
                xk += wk[q] * x
                xg += wg[q] * x
            return xk / TWO_PI, xg / TWO_PI

        res = integrate(panel, pts, quad.rtol, quad.atol, quad.max_panels)
        C = res.value + _direct_tail(eff, se, window, quad)
        return C, res

    b_hot = np.ascontiguousarray(eff.coefficients(se.hot))
    b_cold = np.ascontiguousarray(eff.coefficients(se.cold))
    lam = eff.eigenvalues
    kern = kernels.active.resolvent_panel

    def panel(a, b):
        nodes, wk, wg = panel_rule(a, b)
        fh = np.ascontiguousarray(fill_hot(nodes), dtype=float)
        fc = np.ascontiguousarray(fill_cold(nodes), dtype=float)
        return kern(lam, nodes, wk / TWO_PI, wg / TWO_PI, fh, fc, b_hot, b_cold)

    res = integrate(panel, pts, quad.rtol, quad.atol, quad.max_panels)
    X = res.value + _tail_correction(eff, b_hot, b_cold, window)
    C = (eff.V @ X) @ eff.V.conj().T
    return C, res


def _stat_code(bath: BathSpec) -> int:
    return kernels.BOSE if bath.statistics == BOSON else kernels.FERMI


def _pair_denominators(lam):
    den = lam[:, None] - lam.conj()[None, :]
    return np.where(den == 0, np.inf, den)


def _mode_correlation(eff, se, bath, window: Window, quad: QuadratureSpec, stat=None):
    """Eigenbasis NESS matrix from per-mode scalar transforms.

    With ``d_i = 1/(w - lam_i)`` the partial-fraction identity
    ``d_i conj(d_j) = (d_i - conj d_j)/(lam_i - conj lam_j)`` reduces every
    entry of the frequency integral to the transforms
    ``J_b(z) = int n_b(w)/(w - z) dw`` at the N eigenvalues.  The pole of each
    transform is subtracted analytically, so the quadrature only sees a
    bounded integrand, and the tails beyond the window are closed-form logs
    (with the same regularisation for every mode, which cancels in the
    differences).
    """
    lam = eff.eigenvalues
    b_hot = eff.coefficients(se.hot)
    b_cold = eff.coefficients(se.cold)
    den = _pair_denominators(lam)
    stat = _stat_code(bath) if stat is None else stat

    # error in J_i reaches X through |B_ij| / |lam_i - conj lam_j|
    amp = np.maximum(np.abs(b_hot), np.abs(b_cold)) / np.abs(den)
    amp = 2.0 * amp.max(axis=1) / TWO_PI
    fill_lo = window.lower_fill or (0.0, 0.0)
    fill_hi = window.upper_fill or (0.0, 0.0)
    if stat == kernels.UNIT:
        fill_lo = fill_hi = (1.0, 1.0)
    scale = 1.0 if stat != kernels.BOSE else float(bath.hot(window.low))
    tol_x = max(quad.atol, quad.rtol * scale)
    tol = np.where(amp > 0, tol_x / np.where(amp > 0, amp, 1.0), np.inf)

    seeds = [window.low, window.high]
    if stat == kernels.FERMI and window.low < bath.mu < window.high:
        seeds.append(bath.mu)
    seeds = np.asarray(seeds, dtype=float)
    s_hot, s_cold, err, npan = kernels.active.mode_transforms(
        np.ascontiguousarray(lam), window.low, window.high, seeds,
        bath.t_hot, bath.t_cold, bath.mu, stat, np.ascontiguousarray(tol), quad.max_panels)
    bad = err > tol
    if np.any(bad):
        worst = int(np.argmax(err / tol))
        raise IntegrationError(
            f"mode transform {worst} did not converge (error {err[worst]:.3g} > {tol[worst]:.3g})",
            error_estimate=float(np.max(err * amp)), n_panels=int(npan.sum()))

    a, b = window.low, window.high
    x = np.clip(lam.real, a, b)
    log_lo = np.log(lam - a)          # Re > 0, principal branch is safe
    log_hi = np.log(b - lam)
    X = np.zeros((eff.dim, eff.dim), dtype=complex)
    for s_b, coef, temp, k in ((s_hot, b_hot, bath.t_hot, 0), (s_cold, b_cold, bath.t_cold, 1)):
        if stat == kernels.UNIT:
            fx = np.ones_like(x)
        else:
            fx = occupation_values(x, temp, bath.mu, stat)
        J = s_b + fx * (log_hi - log_lo - 1j * np.pi) + fill_lo[k] * log_lo - fill_hi[k] * log_hi
        K = (J[:, None] - J.conj()[None, :]) / den
        X += coef * K
    X /= TWO_PI
    info = QuadratureResult(None, float(np.max(err * amp)), int(npan.sum()), tol_x)
    return X, info


def occupation_values(x, temperature, mu, stat):
    if stat == kernels.BOSE:
        return occupation(x, temperature, 0.0, BOSON)
    return occupation(x, temperature, mu, "fermion")


METHODS = ("modes", "matrix")


def steady_correlation(eff: EffectiveHamiltonian, se: SelfEnergyPair, bath: BathSpec,
                       quad: QuadratureSpec | None = None, full_output: bool = False,
                       method: str = "modes"):
    """NESS correlation matrix ``C[j, k] = <a_k^+ a_j>``.

    Parameters
    ----------
    eff : EffectiveHamiltonian
    se : SelfEnergyPair
    bath : BathSpec
    quad : QuadratureSpec, optional
    full_output : bool
        Also return a :class:`SolveInfo` with error estimates.
    method : {"modes", "matrix"}
        ``"modes"`` (default) integrates N pole-subtracted scalar transforms;
        ``"matrix"`` integrates the full N x N eigenbasis integrand node by
        node.  Both share the window and tail treatment.  An ill-conditioned
        eigenbasis always uses per-node linear solves.

    Notes
    -----
    Bosonic reservoirs carry no spectral weight below
    ``quad.boson_floor * min Re(lam)``; fermionic tails beyond the window
    are added in closed form with the occupation frozen at 1 (below) and
    0 (above).
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    quad = quad or QuadratureSpec()
    window = frequency_window(eff, bath, quad)
    for w in (0.5 * (window.low + window.high), eff.real_range[0] + 0.1 * bath.gamma):
        resid = resolvent_identity_residual(eff, w)
        if resid > 1e-8:
            log.warning("resolvent identity residual %.3g at omega=%g", resid, w)
    if method == "modes" and not eff.direct:
        X, res = _mode_correlation(eff, se, bath, window, quad)
        C = (eff.V @ X) @ eff.V.conj().T
    else:
        extra = (bath.mu,) if bath.statistics != BOSON else ()
        C, res = _integrate_correlation(eff, se, bath.hot, bath.cold, window, quad, extra)
    anti = float(np.max(np.abs(C - C.conj().T)))
    C = 0.5 * (C + C.conj().T)
    log.debug("NESS: %d panels, error %.3g, hermitization %.3g", res.n_panels, res.error, anti)
    if full_output:
        return C, SolveInfo(res.error, res.n_panels, res.tolerance, (window.low, window.high),
                            anti, eff.condition, eff.direct)
    return C


def unit_filling_integral(eff: EffectiveHamiltonian, se: SelfEnergyPair,
                          quad: QuadratureSpec | None = None, margin: float = 10.0) -> np.ndarray:
    """``int G Gamma G^H dw/2pi`` over the whole real line (should be identity)."""
    quad = quad or QuadratureSpec()
    lo, hi = eff.real_range
    window = Window(lo - margin, hi + margin, (1.0, 1.0), (1.0, 1.0))
    one = lambda w: np.ones_like(w)
    C, _ = _integrate_correlation(eff, se, one, one, window, quad)
    return C


def spectral_weight_integral(eff: EffectiveHamiltonian, quad: QuadratureSpec | None = None,
                             margin: float = 10.0) -> np.ndarray:
    """``int i (G - G^H) dw/2pi`` over the whole real line (should be identity).

    ``G = V diag(1/(w - lam)) V^-1``, so the integral reduces to one scalar
    resolvent per mode.  Those are integrated numerically over the window
    ``[min Re lam - margin, max Re lam + margin]``; the two tails are added
    in closed form as the symmetric limit
    ``-i pi + Log(low - lam) - Log(high - lam)``.
    """
    if eff.V_inv is None:
        raise NumericalError("H_eff eigenbasis is singular; sum rule needs an invertible V")
    quad = quad or QuadratureSpec()
    lo, hi = eff.real_range
    window = Window(lo - margin, hi + margin, None, None)
    lam = eff.eigenvalues

    def panel(a, b):
        nodes, wk, wg = panel_rule(a, b)
        d = 1.0 / (nodes[:, None] - lam[None, :])
        return wk @ d, wg @ d

    res = integrate(panel, _breakpoints(eff, window), quad.rtol, quad.atol, quad.max_panels,
                    strategy="global")
    total = res.value - 1j * np.pi + np.log(window.low - lam) - np.log(window.high - lam)
    G_int = (eff.V * total) @ eff.V_inv
    return 1j * (G_int - G_int.conj().T) / TWO_PI


def landauer_current(eff: EffectiveHamiltonian, se: SelfEnergyPair, bath: BathSpec,
                     quad: QuadratureSpec | None = None, full_output: bool = False):
    """Total particle current ``int T(w) [n_h - n_c] dw/2pi`` into the cold bath."""
    quad = quad or QuadratureSpec()
    window = frequency_window(eff, bath, quad)
    pts = _breakpoints(eff, window, (bath.mu,) if bath.statistics != BOSON else ())
    tmin = [np.inf]
    tmax = [0.0]
    if eff.direct:
        def trans(nodes):
            return transmission(eff, se, nodes)
    else:
        weight = _transmission_weight(eff, se)
        lam = eff.eigenvalues
        kern = kernels.active.transmission_nodes

        def trans(nodes):
            return kern(lam, nodes, weight)

    def panel(a, b):
        nodes, wk, wg = panel_rule(a, b)
        T = trans(nodes)
        tmin[0] = min(tmin[0], float(T.min()))
        tmax[0] = max(tmax[0], float(T.max()))
        f = T * (bath.hot(nodes) - bath.cold(nodes)) / TWO_PI
        return np.array(wk @ f), np.array(wg @ f)

    res = integrate(panel, pts, quad.rtol, quad.atol, quad.max_panels, strategy="global")
    if tmin[0] < -1e-10 * max(tmax[0], 1e-300):
        raise NumericalError(f"negative transmission {tmin[0]:.3g} encountered")
    value = float(res.value)
    if full_output:
        return value, SolveInfo(res.error, res.n_panels, res.tolerance, (window.low, window.high),
                                0.0, eff.condition, eff.direct)
    return value
