"""Discrete lattice symmetries as unitary or antiunitary matrices.

An action is ``psi -> W psi`` (unitary) or ``psi -> W conj(psi)``
(antiunitary, i.e. composed with time reversal ``Theta`` which is complex
conjugation in the local site/flavor basis).  A single-particle matrix
transforms as ``W M W^H`` or ``W conj(M) W^H``.

Spatial pieces are exact 0/1 permutations, flavor pieces are block
diagonal Pauli matrices.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lattice import SIGMA_X, SIGMA_Z, ImpuritySet, LatticeSpec, site_permutation

KINDS = ("R_pi", "Sigma_y", "Sigma_x", "Pi", "FlavorSwap", "Theta", "GPH")


@dataclass(frozen=True)
class SymmetryAction:
    """A (possibly antiunitary) single-particle transformation.

    Parameters
    ----------
    kind : str
        Label, e.g. ``"Pi*R_pi"`` for a composition.
    matrix : ndarray
        Unitary part ``W``.
    antiunitary : bool
        Whether the action includes complex conjugation.
    sign : int
        ``+1`` when the Hamiltonian is expected to be invariant and ``-1``
        when it should change sign (particle-hole type).
    """

    kind: str
    matrix: np.ndarray
    antiunitary: bool = False
    sign: int = 1

    def apply(self, M: np.ndarray) -> np.ndarray:
        W = self.matrix
        M = np.conj(M) if self.antiunitary else M
        return W @ M @ W.conj().T

    def __matmul__(self, other: "SymmetryAction") -> "SymmetryAction":
        """Composition ``self o other`` (``other`` acts first)."""
        right = np.conj(other.matrix) if self.antiunitary else other.matrix
        return SymmetryAction(f"{self.kind}*{other.kind}", self.matrix @ right,
                              self.antiunitary != other.antiunitary, self.sign * other.sign)

    def unitarity_residual(self) -> float:
        W = self.matrix
        return float(np.max(np.abs(W @ W.conj().T - np.eye(W.shape[0]))))


def _site_map(spec: LatticeSpec, flip_x: bool, flip_y: bool) -> np.ndarray:
    def mapping(x, y):
        return (spec.lx + 1 - x if flip_x else x, spec.ly + 1 - y if flip_y else y)
    return site_permutation(spec, mapping)


def _per_site(spec: LatticeSpec, block: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(spec.n_sites), block)


def r_pi(spec: LatticeSpec) -> SymmetryAction:
    """Spatial pi rotation ``(x, y) -> (L_X+1-x, L_Y+1-y)``."""
    return SymmetryAction("R_pi", _site_map(spec, True, True))


def sigma_y(spec: LatticeSpec) -> SymmetryAction:
    """Reflection about the y axis, ``x -> L_X+1-x``."""
    return SymmetryAction("Sigma_y", _site_map(spec, True, False))


def sigma_x(spec: LatticeSpec) -> SymmetryAction:
    """Reflection about the x axis, ``y -> L_Y+1-y``."""
    return SymmetryAction("Sigma_x", _site_map(spec, False, True))


def flavor_pi(spec: LatticeSpec) -> SymmetryAction:
    """Flavor pi rotation about z, ``a -> sigma_z a`` on every site."""
    return SymmetryAction("Pi", _per_site(spec, SIGMA_Z))


def flavor_swap(spec: LatticeSpec) -> SymmetryAction:
    """``S``: exchange the two flavors on every site."""
    return SymmetryAction("FlavorSwap", _per_site(spec, SIGMA_X))


def time_reversal(spec: LatticeSpec) -> SymmetryAction:
    return SymmetryAction("Theta", np.eye(spec.dim, dtype=complex), antiunitary=True)


def gph(spec: LatticeSpec) -> SymmetryAction:
    """Generalized particle-hole: ``H' -> -S conj(H') S`` with ``H' = H - w0``."""
    return SymmetryAction("GPH", _per_site(spec, SIGMA_X), antiunitary=True, sign=-1)


def pi_r_pi(spec: LatticeSpec) -> SymmetryAction:
    return flavor_pi(spec) @ r_pi(spec)


def pi_theta_sigma_y(spec: LatticeSpec) -> SymmetryAction:
    """Conjugation first, then the reflection, then the flavor rotation."""
    return flavor_pi(spec) @ (sigma_y(spec) @ time_reversal(spec))


def theta_sigma_x(spec: LatticeSpec) -> SymmetryAction:
    """A Hamiltonian symmetry that does not exchange the two baths."""
    return sigma_x(spec) @ time_reversal(spec)


def check_hamiltonian_symmetry(H: np.ndarray, action: SymmetryAction, shift: float = 0.0) -> float:
    """``max |W H(*) W^H - sign H|`` after subtracting ``shift`` from the diagonal.

    For the GPH action pass ``shift = omega0``.
    """
    H = np.asarray(H, dtype=complex)
    if H.shape != action.matrix.shape:
        raise ValueError(f"Hamiltonian shape {H.shape} does not match action shape {action.matrix.shape}")
    Hs = H - shift * np.eye(H.shape[0])
    return float(np.max(np.abs(action.apply(Hs) - action.sign * Hs)))


def check_gph_state(C: np.ndarray) -> float:
    """``max |C - (1 - S conj(C) S)|`` for a fermionic correlation matrix."""
    C = np.asarray(C)
    n = C.shape[0]
    if C.shape != (n, n) or n % 2:
        raise ValueError(f"correlation matrix must be square with even size, got {C.shape}")
    S = np.kron(np.eye(n // 2), SIGMA_X)
    return float(np.max(np.abs(C - (np.eye(n) - S @ np.conj(C) @ S))))


class ImpurityClassification(NamedTuple):
    sigma_y_symmetric: bool
    r_pi_symmetric: bool
    sigma_x_symmetric: bool

    @property
    def protected(self) -> bool:
        """True when a bath-exchanging symmetry survives."""
        return self.sigma_y_symmetric or self.r_pi_symmetric


def classify_impurities(impurities: ImpuritySet, spec: LatticeSpec) -> ImpurityClassification:
    """Which spatial symmetries leave the impurity site set invariant.

    Only the site set matters; every impurity carries the same shift.
    """
    impurities.validate_against(spec)
    sites = set(map(tuple, impurities.sites))
    lx, ly = spec.lx, spec.ly
    return ImpurityClassification(
        sigma_y_symmetric={(lx + 1 - x, y) for x, y in sites} == sites,
        r_pi_symmetric={(lx + 1 - x, ly + 1 - y) for x, y in sites} == sites,
        sigma_x_symmetric={(x, ly + 1 - y) for x, y in sites} == sites,
    )


def standard_actions(spec: LatticeSpec) -> dict[str, SymmetryAction]:
    """The actions reported for every run, keyed by label."""
    return {
        "Pi*R_pi": pi_r_pi(spec),
        "Pi*Theta*Sigma_y": pi_theta_sigma_y(spec),
        "Theta*Sigma_x": theta_sigma_x(spec),
        "GPH": gph(spec),
    }


def symmetry_report(H: np.ndarray, spec: LatticeSpec, impurities: ImpuritySet | None = None) -> dict:
    """Hamiltonian residuals of the standard actions plus impurity classification."""
    impurities = impurities or ImpuritySet()
    out = {}
    for label, action in standard_actions(spec).items():
        shift = spec.omega0 if action.kind == "GPH" else 0.0
        out[label] = check_hamiltonian_symmetry(H, action, shift)
    cls = classify_impurities(impurities, spec)
    return {"hamiltonian_residuals": out, "impurities": cls._asdict()}
