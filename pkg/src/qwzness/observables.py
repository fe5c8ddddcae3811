"""Bond currents, edge/bulk averages and mode occupations from a NESS."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baths import BathSpec, SelfEnergyPair
from .lattice import HOP_X, HOP_Y, LatticeSpec, Spectrum
from .negf import EffectiveHamiltonian, landauer_current
from .quadrature import QuadratureSpec


@dataclass(frozen=True)
class CurrentField:
    """Particle currents on the directed bonds of the lattice.

    ``jx[x-1, y-1]`` flows from ``(x, y)`` to ``(x+1, y)`` and has shape
    ``(L_X - 1, L_Y)``; ``jy[x-1, y-1]`` flows from ``(x, y)`` to
    ``(x, y+1)`` and has shape ``(L_X, L_Y - 1)``.
    """

    jx: np.ndarray
    jy: np.ndarray

    @property
    def lx(self) -> int:
        return self.jy.shape[0]

    @property
    def ly(self) -> int:
        return self.jx.shape[1]

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.jx), initial=0.0), np.max(np.abs(self.jy), initial=0.0)))

    def rows(self):
        """``(x, y, direction, value)`` tuples, X bonds first."""
        out = []
        for (i, j), v in np.ndenumerate(self.jx):
            out.append((i + 1, j + 1, "X", float(v)))
        for (i, j), v in np.ndenumerate(self.jy):
            out.append((i + 1, j + 1, "Y", float(v)))
        return out


@dataclass(frozen=True)
class CurrentDiagnostics:
    j_edge: float
    j_bulk: float
    j_tot: float
    x_mid: int


@dataclass(frozen=True)
class ModeOccupation:
    omega: np.ndarray
    n: np.ndarray


def _blocks(C: np.ndarray, spec: LatticeSpec) -> np.ndarray:
    if C.shape != (spec.dim, spec.dim):
        raise ValueError(f"correlation matrix shape {C.shape} does not match lattice dimension {spec.dim}")
    return C.reshape(spec.ly, spec.lx, 2, spec.ly, spec.lx, 2)


def bond_currents(C: np.ndarray, spec: LatticeSpec) -> CurrentField:
    """Mean bond currents ``t Im Tr[B C_(site, next site)]``.

    ``B`` is the flavor block of the corresponding hopping term and the
    2x2 slice of ``C`` has rows on the source site and columns on the
    destination site.
    """
    c6 = _blocks(C, spec)
    ys = np.arange(spec.ly)[:, None]
    xs = np.arange(spec.lx - 1)[None, :]
    bx = c6[ys, xs, :, ys, xs + 1, :]                      # (ly, lx-1, 2, 2)
    jx = spec.tx * np.einsum("ab,...ba->...", HOP_X, bx)
    ys = np.arange(spec.ly - 1)[:, None]
    xs = np.arange(spec.lx)[None, :]
    by = c6[ys, xs, :, ys + 1, xs, :]                      # (ly-1, lx, 2, 2)
    jy = spec.ty * np.einsum("ab,...ba->...", HOP_Y, by)
    return CurrentField(np.ascontiguousarray(jx.imag.T), np.ascontiguousarray(jy.imag.T))


def site_divergence(field: CurrentField) -> np.ndarray:
    """Net bond inflow into every site, shape ``(L_X, L_Y)``."""
    lx, ly = field.lx, field.ly
    div = np.zeros((lx, ly))
    div[1:, :] += field.jx
    div[:-1, :] -= field.jx
    div[:, 1:] += field.jy
    div[:, :-1] -= field.jy
    return div


def continuity_residual(field: CurrentField) -> float:
    """Largest bond-inflow imbalance on sites not coupled to a bath."""
    div = site_divergence(field)
    interior = div[1:-1, :]
    return float(np.max(np.abs(interior), initial=0.0))


def column_currents(field: CurrentField) -> np.ndarray:
    """``sum_y J^X[x, y]`` for every bond column x = 1..L_X-1."""
    return field.jx.sum(axis=1)


def edge_bulk_diagnostics(field: CurrentField, spec: LatticeSpec) -> CurrentDiagnostics:
    # the 1/(2 L_X) prefactor is kept although only L_X - 1 bonds exist per row
    j_edge = float(np.sum(field.jx[:, -1] - field.jx[:, 0]) / (2 * spec.lx))
    x_mid = spec.lx // 2
    j_bulk = float(np.mean(field.jx[x_mid - 1, :]))
    return CurrentDiagnostics(j_edge, j_bulk, spec.ly * j_bulk, x_mid)


def boundary_bond_masks(spec: LatticeSpec):
    """Boolean masks of ``jx``/``jy`` bonds that run along the lattice edge."""
    mx = np.zeros((spec.lx - 1, spec.ly), dtype=bool)
    mx[:, [0, -1]] = True
    my = np.zeros((spec.lx, spec.ly - 1), dtype=bool)
    my[[0, -1], :] = True
    return mx, my


def edge_dominance(field: CurrentField, spec: LatticeSpec) -> float:
    """Largest boundary-bond current over largest interior-bond current."""
    mx, my = boundary_bond_masks(spec)
    ax, ay = np.abs(field.jx), np.abs(field.jy)
    edge = max(np.max(ax[mx], initial=0.0), np.max(ay[my], initial=0.0))
    inner = max(np.max(ax[~mx], initial=0.0), np.max(ay[~my], initial=0.0))
    return float(edge / inner) if inner > 0 else np.inf


def landauer_total(eff: EffectiveHamiltonian, se: SelfEnergyPair, bath: BathSpec,
                   quad: QuadratureSpec | None = None) -> float:
    return landauer_current(eff, se, bath, quad)


def mode_occupations(C: np.ndarray, spectrum: Spectrum) -> ModeOccupation:
    U = spectrum.U
    if C.shape != (U.shape[0], U.shape[0]):
        raise ValueError("correlation matrix and spectrum dimensions differ")
    n = np.einsum("ia,ij,ja->a", U.conj(), C, U)
    if np.max(np.abs(n.imag), initial=0.0) > 1e-10:
        raise ValueError(f"mode occupations not real (max imag {np.max(np.abs(n.imag)):.3g})")
    return ModeOccupation(np.asarray(spectrum.omega), n.real)
