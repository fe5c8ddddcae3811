"""Secular weak-coupling NESS in the energy eigenbasis.

For gamma -> 0 the steady state is diagonal in the eigenmodes of H with
occupations

    n_a = (s_a nbar_h(w_a) + r_a nbar_c(w_a)) / (s_a + r_a)

where ``s_a`` and ``r_a`` are the weights of mode ``a`` on the hot and cold
columns.  The same state is the fixed point of the quadratic secular
Lindblad equation, whose correlation-matrix dynamics is checked here both
as a rate equation and through an explicit jump decomposition.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .baths import BOSON, BathSpec
from .lattice import ImpuritySet, LatticeSpec, Spectrum, column_indices, single_particle_spectrum

# spacing below which two modes count as degenerate
DEGENERACY_TOL = 1e-8
# total boundary weight below which a mode counts as decoupled
DECOUPLED_TOL = 1e-14
# Fock-space cutoff for the bosonic jump check
BOSON_FOCK_DIM = 80


class DegeneracyWarning(UserWarning):
    """The secular diagonal form is being used on a degenerate spectrum."""


class DecoupledModeWarning(UserWarning):
    """A mode has (almost) no weight on either bath column."""


@dataclass(frozen=True)
class ModeCouplings:
    """Boundary weights of each eigenmode on the hot (``s``) and cold (``r``) columns."""

    s: np.ndarray
    r: np.ndarray
    degenerate: bool = False

    @property
    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.s - self.r), initial=0.0))


def mode_couplings(spectrum: Spectrum, spec: LatticeSpec) -> ModeCouplings:
    """``s_a = sum |U[(1, y, f), a]|^2`` and ``r_a`` likewise on column ``L_X``.

    ``degenerate`` is set when two eigenvalues lie closer than
    :data:`DEGENERACY_TOL`; it is a flag, not an error.
    """
    U = np.asarray(spectrum.U)
    if U.shape != (spec.dim, spec.dim):
        raise ValueError(f"spectrum dimension {U.shape[0]} does not match lattice dimension {spec.dim}")
    weight = np.abs(U) ** 2
    s = weight[column_indices(1, spec)].sum(axis=0)
    r = weight[column_indices(spec.lx, spec)].sum(axis=0)
    omega = np.sort(np.asarray(spectrum.omega))
    degenerate = bool(np.any(np.diff(omega) < DEGENERACY_TOL))
    return ModeCouplings(s, r, degenerate)


def symmetry_adapted_spectrum(H: np.ndarray, W: np.ndarray, antiunitary: bool = False,
                              tol: float = 1e-10) -> Spectrum:
    """Eigenmodes of ``H`` that are also invariant under a commuting symmetry.

    Inside a degenerate (or nearly degenerate) multiplet ``eigh`` returns an
    arbitrary basis, so boundary weights of partner modes can differ far
    above round-off.  Pinning the basis to the symmetry removes that freedom.

    Parameters
    ----------
    H : ndarray
        Hermitian single-particle Hamiltonian.
    W : ndarray
        Unitary involution (``W @ W = 1``) commuting with ``H``; Hermitian
        for a unitary action, real symmetric for an antiunitary one.
    antiunitary : bool
        If true the symmetry is ``psi -> W conj(psi)``.

    Notes
    -----
    Unitary case: ``H`` is diagonalized separately on the ``W = +1`` and
    ``W = -1`` eigenspaces.  Antiunitary case: with ``Q = sqrt(W)`` the
    symmetry becomes plain conjugation, ``Q^H H Q`` is real symmetric and
    its real eigenvectors map to modes with ``W conj(v) = v``.
    """
    H = np.asarray(H, dtype=complex)
    W = np.asarray(W, dtype=complex)
    n = H.shape[0]
    if np.max(np.abs(W - W.conj().T)) > tol or np.max(np.abs(W @ W - np.eye(n))) > tol:
        raise ValueError("W must be a Hermitian involution")
    scale = max(float(np.max(np.abs(H))), 1.0)
    if antiunitary:
        if np.max(np.abs(W.imag)) > tol:
            raise ValueError("antiunitary symmetry needs a real W")
        if np.max(np.abs(W @ H.conj() - H @ W)) > tol * scale:
            raise ValueError("W K does not commute with H")
        d, P = np.linalg.eigh(W.real)
        Q = (P * np.sqrt(d.astype(complex))) @ P.T
        Ht = Q.conj().T @ H @ Q
        if np.max(np.abs(Ht.imag)) > tol * scale:
            raise ValueError("transformed Hamiltonian is not real")
        omega, u = np.linalg.eigh(Ht.real)
        return Spectrum(omega, Q @ u)
    if np.max(np.abs(W @ H - H @ W)) > tol * scale:
        raise ValueError("W does not commute with H")
    wv, Q = np.linalg.eigh(W)
    omega, U = [], []
    for sector in (wv < 0, wv > 0):
        Qs = Q[:, sector]
        if not Qs.shape[1]:
            continue
        w, u = np.linalg.eigh(Qs.conj().T @ H @ Qs)
        omega.append(w)
        U.append(Qs @ u)
    omega = np.concatenate(omega)
    U = np.concatenate(U, axis=1)
    order = np.argsort(omega, kind="stable")
    return Spectrum(omega[order], U[:, order])


def lattice_spectrum(H: np.ndarray, spec: LatticeSpec, impurities: ImpuritySet | None = None) -> Spectrum:
    """Spectrum in a basis adapted to whichever bath-exchanging symmetry survives.

    Uses ``Pi R_pi`` when the impurity set is R_pi symmetric, otherwise
    ``Pi Theta Sigma_y`` when it is Sigma_y symmetric, otherwise plain
    ``eigh``.  Only valid for ``t_X, t_Y`` as built by the lattice module.
    """
    from .symmetry import classify_impurities, pi_r_pi, pi_theta_sigma_y

    cls = classify_impurities(impurities or ImpuritySet(), spec)
    if cls.r_pi_symmetric:
        return symmetry_adapted_spectrum(H, pi_r_pi(spec).matrix)
    if cls.sigma_y_symmetric:
        return symmetry_adapted_spectrum(H, pi_theta_sigma_y(spec).matrix, antiunitary=True)
    return single_particle_spectrum(H)


def bath_occupations(omega, bath: BathSpec):
    """``(nbar_h, nbar_c)`` at the mode frequencies."""
    return bath.hot(omega), bath.cold(omega)


def weak_coupling_occupations(spectrum: Spectrum, couplings: ModeCouplings,
                              bath: BathSpec) -> np.ndarray:
    omega = np.asarray(spectrum.omega)
    nh, nc = bath_occupations(omega, bath)
    total = couplings.s + couplings.r
    decoupled = total < DECOUPLED_TOL
    if np.any(decoupled):
        warnings.warn(
            f"{int(decoupled.sum())} mode(s) decoupled from both baths; "
            "using the average bath occupation for them", DecoupledModeWarning, stacklevel=3)
    safe = np.where(decoupled, 1.0, total)
    n = (couplings.s * nh + couplings.r * nc) / safe
    return np.where(decoupled, 0.5 * (nh + nc), n)


def weak_coupling_correlation(spectrum: Spectrum, couplings: ModeCouplings,
                              bath: BathSpec) -> np.ndarray:
    """``C = U diag(n_a) U^H`` with the secular occupations.

    Raises
    ------
    DivergenceError
        Bosonic baths and a mode at or below zero frequency.
    """
    if couplings.degenerate:
        warnings.warn("degenerate single-particle spectrum: the secular diagonal form is "
                      "only validated against the exact solver", DegeneracyWarning, stacklevel=2)
    n = weak_coupling_occupations(spectrum, couplings, bath)
    U = np.asarray(spectrum.U)
    return (U * n) @ U.conj().T


def lindblad_rates(spectrum: Spectrum, couplings: ModeCouplings, bath: BathSpec,
                   C: np.ndarray, gamma: float | None = None):
    """Time derivative of ``U^H C U`` under the secular Lindblad generator.

    The derivative is returned in the frame rotating with H, where the
    coherent part ``-i (w_a - w_b) C_ab`` is absent.  That term vanishes
    for any stationary state, and leaving it out keeps the result free of
    the ``eps * |H|`` round-off that a lab-frame commutator would add.
    """
    gamma = bath.gamma if gamma is None else gamma
    U = np.asarray(spectrum.U)
    Ct = U.conj().T @ C @ U
    nh, nc = bath_occupations(np.asarray(spectrum.omega), bath)
    s, r = couplings.s, couplings.r
    kappa = s + r
    rates = -0.5 * gamma * (kappa[:, None] + kappa[None, :]) * Ct
    n = Ct.diagonal().real
    np.fill_diagonal(rates, gamma * s * (nh - n) + gamma * r * (nc - n))
    return rates


def lindblad_residual(spectrum: Spectrum, couplings: ModeCouplings, bath: BathSpec,
                      C: np.ndarray, gamma: float | None = None) -> float:
    """``max |dC/dt|`` in the eigenbasis; zero at the weak-coupling fixed point."""
    return float(np.max(np.abs(lindblad_rates(spectrum, couplings, bath, C, gamma))))


# ------------------------------------------------------------ jump check

def _ladder(statistics: str):
    if statistics == BOSON:
        dim = BOSON_FOCK_DIM
        a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    else:
        a = np.array([[0, 1], [0, 0]], dtype=complex)
    return a


def _mode_state(n: float, statistics: str) -> np.ndarray:
    """Diagonal Fock-space state with mean occupation ``n``."""
    if statistics == BOSON:
        k = np.arange(BOSON_FOCK_DIM)
        p = (n / (1.0 + n)) ** k / (1.0 + n)
    else:
        p = np.array([1.0 - n, n])
    return np.diag(p).astype(complex)


def _drift_nonhermitian(a, rho, omega, rates_in, rates_out, stat_sign, gamma_nbar):
    """``d<N>/dt`` from ``H_eff = w N - i/2 (k N + c)`` plus explicit jumps.

    ``k = sum gamma s (1 +- 2 nbar)`` and ``c = sum gamma s nbar``; the
    jump part is ``out a rho a^+ + in a^+ rho a`` with ``out = gamma s (1 +- nbar)``.
    """
    N = a.conj().T @ a
    eye = np.eye(a.shape[0])
    k = sum(g * (1 + 2 * stat_sign * nb) for g, nb in gamma_nbar)
    c = sum(g * nb for g, nb in gamma_nbar)
    h_eff = omega * N - 0.5j * (k * N + c * eye)
    drho = -1j * (h_eff @ rho - rho @ h_eff.conj().T)
    drho += rates_out * (a @ rho @ a.conj().T) + rates_in * (a.conj().T @ rho @ a)
    return float(np.trace(N @ drho).real)


def _drift_dissipator(a, rho, omega, rates_in, rates_out):
    """``d<N>/dt`` from ``-i[w N, rho] + out D[a] rho + in D[a^+] rho``."""
    N = a.conj().T @ a

    def dissipator(L):
        LdL = L.conj().T @ L
        return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)

    drho = -1j * omega * (N @ rho - rho @ N)
    drho += rates_out * dissipator(a) + rates_in * dissipator(a.conj().T)
    return float(np.trace(N @ drho).real)


def jump_decomposition_check(spectrum: Spectrum, couplings: ModeCouplings, bath: BathSpec,
                             n_samples: int = 3, seed: int = 0, tol: float = 1e-12,
                             gamma: float | None = None, modes=None) -> bool:
    """Verify the non-Hermitian + jump form against the mode rate equation.

    For random mode occupations the drift ``d<N_a>/dt`` is evaluated three
    ways on the single-mode Fock space (bosons truncated at
    :data:`BOSON_FOCK_DIM` levels, occupations drawn below 1 so the
    truncation is invisible): the effective non-Hermitian Hamiltonian with
    explicit jumps, the standard dissipator form, and the rate equation
    ``gamma s (nbar_h - n) + gamma r (nbar_c - n)``.

    Returns ``True`` when all three agree within ``tol * max(gamma, 1)``.
    """
    gamma = bath.gamma if gamma is None else gamma
    omega = np.asarray(spectrum.omega)
    modes = range(omega.size) if modes is None else modes
    nh, nc = bath_occupations(omega, bath)
    stat_sign = 1.0 if bath.statistics == BOSON else -1.0
    a = _ladder(bath.statistics)
    rng = np.random.default_rng(seed)
    scale = tol * max(gamma, 1.0)
    for alpha in modes:
        gs, gr = gamma * couplings.s[alpha], gamma * couplings.r[alpha]
        rates_in = gs * nh[alpha] + gr * nc[alpha]
        rates_out = gs * (1 + stat_sign * nh[alpha]) + gr * (1 + stat_sign * nc[alpha])
        pairs = ((gs, nh[alpha]), (gr, nc[alpha]))
        for n in rng.uniform(0.0, 0.9, size=n_samples):
            rho = _mode_state(n, bath.statistics)
            n_eff = float(np.trace(a.conj().T @ a @ rho).real)
            expected = gs * (nh[alpha] - n_eff) + gr * (nc[alpha] - n_eff)
            d1 = _drift_nonhermitian(a, rho, omega[alpha], rates_in, rates_out, stat_sign, pairs)
            d2 = _drift_dissipator(a, rho, omega[alpha], rates_in, rates_out)
            if abs(d1 - expected) > scale or abs(d2 - expected) > scale:
                return False
    return True
