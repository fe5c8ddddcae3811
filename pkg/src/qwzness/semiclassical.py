"""Bloch bands, Berry curvature, Chern numbers and the semiclassical edge current.

The periodic model is ``h(k) . sigma`` with

    h(k) = (t_Y sin k_Y, t_X sin k_X, m + t_X cos k_X + t_Y cos k_Y)

and bands ``w_+- = omega0 +- |h|``.  Curvature sign convention:
``F_+- = -+ 1/2 n . (d_kx n x d_ky n)`` with ``n = h/|h|``, so that
``F_+ = -F_-``.

The semiclassical current field keeps only the anomalous-velocity term,

    I(x, y) = Phi * (d_y V, -d_x V),
    Phi = sum_k dk^2 {n[w_-(k)] - n[w_+(k)]} F_-(k),

with a uniform Brillouin-zone grid (no ``1/(2 pi)^2`` factor).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .errors import ConvergenceError, SingularityError, ValidationError
from .lattice import LatticeSpec

PLUS, MINUS = "+", "-"
GAP_FLOOR = 1e-12
CHERN_WARN = 0.01
CHERN_FAIL = 0.1


class BlochPoint(NamedTuple):
    k: tuple
    h: np.ndarray
    omega_plus: float
    omega_minus: float


def _band_sign(band) -> int:
    if band in (PLUS, +1, "plus", "upper"):
        return 1
    if band in (MINUS, -1, "minus", "lower"):
        return -1
    raise ValidationError(f"band must be '+' or '-', got {band!r}")


def bloch_vector(kx, ky, spec: LatticeSpec):
    """``h(k)`` as three arrays broadcast over ``kx, ky``."""
    kx, ky = np.asarray(kx, dtype=float), np.asarray(ky, dtype=float)
    return (spec.ty * np.sin(ky), spec.tx * np.sin(kx),
            spec.m + spec.tx * np.cos(kx) + spec.ty * np.cos(ky))


def bloch_point(k, spec: LatticeSpec) -> BlochPoint:
    h = np.array(bloch_vector(k[0], k[1], spec), dtype=float)
    e = float(np.linalg.norm(h))
    return BlochPoint(tuple(k), h, spec.omega0 + e, spec.omega0 - e)


def bands(kx, ky, spec: LatticeSpec):
    """``(w_-, w_+)`` on the given k points."""
    h1, h2, h3 = bloch_vector(kx, ky, spec)
    e = np.sqrt(h1 * h1 + h2 * h2 + h3 * h3)
    return spec.omega0 - e, spec.omega0 + e


def _gap_check(kx, ky, spec):
    h1, h2, h3 = bloch_vector(kx, ky, spec)
    norm = np.sqrt(h1 * h1 + h2 * h2 + h3 * h3)
    if np.any(norm <= GAP_FLOOR * max(spec.tx, spec.ty)):
        raise SingularityError(f"|h(k)| vanishes: gap closes at m = {spec.m:g}")


def berry_curvature(k, band, spec: LatticeSpec):
    """Berry curvature of band ``'+'`` or ``'-'`` at ``k = (kx, ky)``.

    Uses the closed form for ``t_X = t_Y`` and the general
    ``h . (d_x h x d_y h) / (2 |h|^3)`` expression otherwise.  Accepts
    array-valued ``kx, ky``.

    Raises
    ------
    SingularityError
        When ``|h(k)|`` vanishes (gap closing).
    """
    sign = _band_sign(band)
    kx, ky = np.asarray(k[0], dtype=float), np.asarray(k[1], dtype=float)
    _gap_check(kx, ky, spec)
    if spec.tx == spec.ty:
        t = spec.tx
        cx, cy = np.cos(kx), np.cos(ky)
        mt = spec.m / t
        num = cx + cy + mt * cx * cy
        den = 2.0 * (np.sin(kx) ** 2 + np.sin(ky) ** 2 + (mt + cx + cy) ** 2) ** 1.5
        out = sign * num / den
    else:
        out = -sign * curvature_general(kx, ky, spec)
    return out[()] if np.ndim(out) == 0 else out


def curvature_general(kx, ky, spec: LatticeSpec):
    """Lower-band curvature ``+1/2 h . (d_x h x d_y h)/|h|^3`` (any ``t_X, t_Y``)."""
    kx = np.ascontiguousarray(np.asarray(kx, dtype=float))
    ky = np.ascontiguousarray(np.asarray(ky, dtype=float))
    kx, ky = np.broadcast_arrays(kx, ky)
    return kernels.active.curvature_grid(np.ascontiguousarray(kx), np.ascontiguousarray(ky),
                                         float(spec.m), float(spec.tx), float(spec.ty))


@dataclass(frozen=True)
class KGrid:
    """Uniform ``n x n`` Brillouin-zone grid ``k_j = -pi + (j + offset) 2pi/n``.

    ``offset`` 0 or 1/2 makes the grid symmetric under ``k -> -k`` (modulo
    ``2 pi``); any other value breaks that pairing.
    """

    n: int = 200
    offset: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("k grid needs at least 2 points per axis")

    @property
    def step(self) -> float:
        return 2.0 * np.pi / self.n

    def axis(self) -> np.ndarray:
        return -np.pi + (np.arange(self.n) + self.offset) * self.step

    def mesh(self):
        k = self.axis()
        return np.meshgrid(k, k, indexing="ij")

    @property
    def symmetric(self) -> bool:
        return float(self.offset) in (0.0, 0.5)


def chern_sum(band, spec: LatticeSpec, grid_n: int = 200) -> float:
    """Pre-rounding ``(1/2 pi) sum F dk^2`` on the uniform grid."""
    grid = KGrid(grid_n, 0.5)
    kx, ky = grid.mesh()
    F = berry_curvature((kx, ky), band, spec)
    return float(F.sum() * grid.step ** 2 / (2.0 * np.pi))


def chern_number(band, spec: LatticeSpec, grid_n: int = 200) -> int:
    """Chern number of a band by a Riemann sum of the closed-form curvature.

    Raises
    ------
    ConvergenceError
        The sum is 0.1 or more away from an integer (gap closing suspected).
    """
    if grid_n < 50:
        raise ValidationError(f"grid_n must be >= 50, got {grid_n}")
    value = chern_sum(band, spec, grid_n)
    nearest = round(value)
    if abs(value - nearest) >= CHERN_FAIL:
        raise ConvergenceError(
            f"Chern sum {value:.4f} is not close to an integer (m = {spec.m:g}, grid {grid_n})")
    return int(nearest)


def link_fluxes(band, spec: LatticeSpec, grid_n: int = 200) -> np.ndarray:
    """Berry flux through each plaquette from link variables (Fukui method).

    Plaquette ``(i, j)`` spans ``[k_i, k_i + dk] x [k_j, k_j + dk]`` with
    ``k_i = -pi + i dk``; the sign matches :func:`berry_curvature`.
    """
    sign = _band_sign(band)
    _gap_check(*KGrid(grid_n).mesh(), spec)
    # the Berry-phase loop of the eigenvector runs opposite to the curvature convention
    return -kernels.active.link_flux(int(grid_n), float(spec.m), float(spec.tx), float(spec.ty),
                                     float(sign))


def plaquette_fluxes(band, spec: LatticeSpec, grid_n: int = 200, order: int = 6) -> np.ndarray:
    """Closed-form curvature integrated over each plaquette (Gauss-Legendre)."""
    dk = 2.0 * np.pi / grid_n
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * dk * (x + 1.0)
    w = 0.5 * dk * w
    corner = -np.pi + dk * np.arange(grid_n)
    out = np.zeros((grid_n, grid_n))
    for xi, wi in zip(x, w):
        for xj, wj in zip(x, w):
            kx, ky = np.meshgrid(corner + xi, corner + xj, indexing="ij")
            out += wi * wj * berry_curvature((kx, ky), band, spec)
    return out


# ----------------------------------------------------- semiclassical field

def power_potential(x, y, scale: float = 8.0, power: int = 10):
    return (np.asarray(x) / scale) ** power + (np.asarray(y) / scale) ** power


@dataclass(frozen=True)
class PotentialSpec:
    """Confining potential sampled on a square grid centred on the lattice.

    The default ``V = (x/8)^10 + (y/8)^10`` on ``x, y`` in ``[-10, 10]``.
    Gradients are central differences with step ``h_g``.
    """

    func: Callable = field(default=power_potential, compare=False)
    half_width: float = 10.0
    points: int = 21
    h_g: float = 1e-4

    def __post_init__(self):
        if self.points < 3:
            raise ValidationError("potential grid needs at least 3 points per axis")
        if not (self.half_width > 0 and self.h_g > 0):
            raise ValidationError("half_width and h_g must be > 0")

    def axis(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.points)

    def gradient(self, x, y):
        h = self.h_g
        gx = (self.func(x + h, y) - self.func(x - h, y)) / (2 * h)
        gy = (self.func(x, y + h) - self.func(x, y - h)) / (2 * h)
        return gx, gy


@dataclass(frozen=True)
class VectorField:
    """Planar field on a grid; ``ix[i, j]`` is the x component at ``(x[i], y[j])``."""

    x: np.ndarray
    y: np.ndarray
    ix: np.ndarray
    iy: np.ndarray

    def rows(self):
        """``(x, y, direction, value)`` tuples in the bond-current file layout."""
        out = []
        for (i, j), v in np.ndenumerate(self.ix):
            out.append((float(self.x[i]), float(self.y[j]), "X", float(v)))
        for (i, j), v in np.ndenumerate(self.iy):
            out.append((float(self.x[i]), float(self.y[j]), "Y", float(v)))
        return out


def occupation_weight(spec: LatticeSpec, occupation: Callable, grid: KGrid) -> float:
    """``Phi = sum dk^2 {n[w_-] - n[w_+]} F_-``."""
    kx, ky = grid.mesh()
    w_minus, w_plus = bands(kx, ky, spec)
    F = berry_curvature((kx, ky), MINUS, spec)
    return float(np.sum((occupation(w_minus) - occupation(w_plus)) * F) * grid.step ** 2)


def semiclassical_current_field(spec: LatticeSpec, occupation: Callable,
                                potential: PotentialSpec | None = None,
                                grid: KGrid | None = None) -> VectorField:
    """Anomalous-velocity current ``I = Phi (d_y V, -d_x V)`` on the potential grid.

    ``occupation`` maps frequencies to occupations, e.g. the average of the
    two bath distributions.
    """
    potential = potential or PotentialSpec()
    grid = grid or KGrid(200, 0.5)
    phi = occupation_weight(spec, occupation, grid)
    axis = potential.axis()
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    gx, gy = potential.gradient(X, Y)
    return VectorField(axis, axis, phi * gy, -phi * gx)


def bulk_cancellation_check(spec: LatticeSpec, occupation: Callable, grid: KGrid | None = None) -> float:
    """``|sum dk^2 {n[w_-] - n[w_+]} grad_k w_-|`` (zero on symmetric grids)."""
    grid = grid or KGrid(200, 0.5)
    kx, ky = grid.mesh()
    h1, h2, h3 = bloch_vector(kx, ky, spec)
    e = np.sqrt(h1 * h1 + h2 * h2 + h3 * h3)
    # grad_k |h| = (h . d_kx h, h . d_ky h) / |h|
    dx = (h2 * spec.tx * np.cos(kx) - h3 * spec.tx * np.sin(kx)) / e
    dy = (h1 * spec.ty * np.cos(ky) - h3 * spec.ty * np.sin(ky)) / e
    weight = occupation(spec.omega0 - e) - occupation(spec.omega0 + e)
    vx = -np.sum(weight * dx) * grid.step ** 2
    vy = -np.sum(weight * dy) * grid.step ** 2
    return float(np.hypot(vx, vy))


def boundary_circulation(field: VectorField, potential: PotentialSpec | None = None,
                         ring: int = 1) -> np.ndarray:
    """Counter-clockwise tangential components on the ``ring``-th outermost square."""
    n = field.x.size
    lo, hi = ring, n - 1 - ring
    comps = []
    comps.extend(field.ix[lo:hi, lo])                # bottom, moving +x
    comps.extend(field.iy[hi, lo:hi])                # right, moving +y
    comps.extend(-field.ix[lo + 1:hi + 1, hi])       # top, moving -x
    comps.extend(-field.iy[lo, lo + 1:hi + 1])       # left, moving -y
    return np.asarray(comps)


def edge_sign(field: VectorField, ring: int = 1) -> int:
    """Sign of ``I_x(top) - I_x(bottom)``, the analogue of ``J_edge``."""
    n = field.x.size
    lo, hi = ring, n - 1 - ring
    value = float(np.sum(field.ix[lo:hi + 1, hi]) - np.sum(field.ix[lo:hi + 1, lo]))
    return int(np.sign(value))
