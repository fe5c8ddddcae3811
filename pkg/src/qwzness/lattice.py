"""Real-space two-flavor QWZ lattice with open boundaries.

Flat index convention (frozen, shared by every other module)::

    index(x, y, flavor) = flavor + 2 * ((x - 1) + L_X * (y - 1))

with ``flavor = 0`` for up and ``1`` for down and 1-based lattice
coordinates.  Flavor runs fastest, then x, then y.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .errors import ValidationError

UP, DOWN = 0, 1

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
EYE2 = np.eye(2, dtype=complex)

# flavor blocks of the hopping terms, acting from site x to site x+1 (y to y+1)
HOP_X = SIGMA_Z + 1j * SIGMA_Y
HOP_Y = SIGMA_Z + 1j * SIGMA_X

DEFAULT_IMPURITY_SHIFT = 1.0e4


@dataclass(frozen=True)
class LatticeSpec:
    """Geometry and couplings of the lattice; all energies in units of t."""

    lx: int
    ly: int
    tx: float = 1.0
    ty: float = 1.0
    m: float = 1.0
    omega0: float = 10.0

    def __post_init__(self):
        for name in ("lx", "ly"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValidationError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        for name in ("tx", "ty"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0, got {getattr(self, name)!r}")
        for name in ("tx", "ty", "m", "omega0"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValidationError(f"{name} must be finite")
            object.__setattr__(self, name, value)

    @property
    def n_sites(self) -> int:
        return self.lx * self.ly

    @property
    def dim(self) -> int:
        return 2 * self.lx * self.ly

    def is_topological(self) -> bool:
        """Nonzero Chern number of the periodic Bloch bands.

        Gap closings sit at ``|m| = |tx - ty|`` and ``|m| = tx + ty``; for
        ``tx == ty == t`` this is the familiar ``0 < |m| < 2t``.
        """
        return abs(self.tx - self.ty) < abs(self.m) < self.tx + self.ty


@dataclass(frozen=True)
class ImpuritySet:
    """Sites carrying a large on-site shift ``delta`` on both flavors."""

    sites: tuple = ()
    delta: float = DEFAULT_IMPURITY_SHIFT

    def __post_init__(self):
        sites = tuple((int(x), int(y)) for x, y in self.sites)
        if len(set(sites)) != len(sites):
            raise ValidationError(f"duplicate impurity sites in {sites}")
        if not self.delta >= 0:
            raise ValidationError(f"impurity shift must be >= 0, got {self.delta!r}")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "delta", float(self.delta))

    def validate_against(self, spec: LatticeSpec) -> None:
        for x, y in self.sites:
            if not (1 <= x <= spec.lx and 1 <= y <= spec.ly):
                raise ValidationError(
                    f"impurity site ({x}, {y}) outside lattice {spec.lx}x{spec.ly}")

    def __len__(self):
        return len(self.sites)


class SiteIndex(NamedTuple):
    x: int
    y: int
    flavor: int = UP


class Spectrum(NamedTuple):
    """Eigenvalues (ascending) and unitary eigenvector matrix (columns)."""

    omega: np.ndarray
    U: np.ndarray


def flat_index(site: SiteIndex, spec: LatticeSpec) -> int:
    x, y, flavor = site
    if not (1 <= x <= spec.lx and 1 <= y <= spec.ly):
        raise IndexError(f"site ({x}, {y}) outside lattice {spec.lx}x{spec.ly}")
    if flavor not in (UP, DOWN):
        raise IndexError(f"flavor must be 0 (up) or 1 (down), got {flavor!r}")
    return flavor + 2 * ((x - 1) + spec.lx * (y - 1))


def site_of(index: int, spec: LatticeSpec) -> SiteIndex:
    """Inverse of :func:`flat_index`."""
    if not 0 <= index < spec.dim:
        raise IndexError(f"flat index {index} outside [0, {spec.dim})")
    flavor = index % 2
    cell = index // 2
    return SiteIndex(cell % spec.lx + 1, cell // spec.lx + 1, flavor)


def site_slice(x: int, y: int, spec: LatticeSpec) -> slice:
    start = 2 * ((x - 1) + spec.lx * (y - 1))
    return slice(start, start + 2)


def column_indices(x: int, spec: LatticeSpec) -> np.ndarray:
    """Flat indices (both flavors) of every site in column ``x``."""
    ys = np.arange(spec.ly)
    base = 2 * ((x - 1) + spec.lx * ys)
    return np.sort(np.concatenate([base, base + 1]))


def build_hamiltonian(spec: LatticeSpec, impurities: ImpuritySet | None = None) -> np.ndarray:
    """Dense single-particle Hamiltonian of dimension ``2 * lx * ly``.

    On-site blocks are ``omega0 + m sigma_z`` (plus ``delta`` on impurity
    sites); the block coupling ``(x, y) -> (x+1, y)`` is
    ``(tx/2)(sigma_z + i sigma_y)`` and ``(x, y) -> (x, y+1)`` is
    ``(ty/2)(sigma_z + i sigma_x)``, each sitting in the row of the
    destination site.  Hermitian-conjugate blocks fill the reverse bonds.
    """
    impurities = impurities if impurities is not None else ImpuritySet()
    impurities.validate_against(spec)
    H = np.zeros((spec.dim, spec.dim), dtype=complex)
    onsite = spec.omega0 * EYE2 + spec.m * SIGMA_Z
    hx = 0.5 * spec.tx * HOP_X
    hy = 0.5 * spec.ty * HOP_Y
    for y in range(1, spec.ly + 1):
        for x in range(1, spec.lx + 1):
            s = site_slice(x, y, spec)
            H[s, s] = onsite
            if x < spec.lx:
                d = site_slice(x + 1, y, spec)
                H[d, s] = hx
                H[s, d] = hx.conj().T
            if y < spec.ly:
                d = site_slice(x, y + 1, spec)
                H[d, s] = hy
                H[s, d] = hy.conj().T
    for x, y in impurities.sites:
        s = site_slice(x, y, spec)
        H[s, s] += impurities.delta * EYE2
    return H


def single_particle_spectrum(H: np.ndarray) -> Spectrum:
    omega, U = np.linalg.eigh(H)
    return Spectrum(omega, U)


def hermiticity_residual(H: np.ndarray) -> float:
    scale = np.max(np.abs(H)) or 1.0
    return float(np.max(np.abs(H - H.conj().T)) / scale)


def flavor_swap(spec: LatticeSpec) -> np.ndarray:
    """Matrix exchanging up and down on every site (``sigma_x`` per site)."""
    return np.kron(np.eye(spec.n_sites), SIGMA_X.real)


def site_permutation(spec: LatticeSpec, mapping) -> np.ndarray:
    """Permutation matrix ``P`` with ``P[i(mapping(s)), i(s)] = 1``.

    ``mapping`` takes and returns 1-based ``(x, y)``; flavors are untouched.
    """
    P = np.zeros((spec.dim, spec.dim))
    for y in range(1, spec.ly + 1):
        for x in range(1, spec.lx + 1):
            xp, yp = mapping(x, y)
            src = site_slice(x, y, spec)
            dst = site_slice(xp, yp, spec)
            P[dst, src] = np.eye(2)
    return P


def in_gap_count(omega: Iterable[float], low: float, high: float) -> int:
    omega = np.asarray(omega)
    return int(np.count_nonzero((omega > low) & (omega < high)))


def bulk_gap(spec: LatticeSpec) -> tuple[float, float]:
    """Energy window ``(omega0 - g, omega0 + g)`` of the periodic-band gap."""
    k = np.linspace(-np.pi, np.pi, 401)
    kx, ky = np.meshgrid(k, k, indexing="ij")
    h = np.sqrt((spec.ty * np.sin(ky)) ** 2 + (spec.tx * np.sin(kx)) ** 2
                + (spec.m + spec.tx * np.cos(kx) + spec.ty * np.cos(ky)) ** 2)
    g = float(h.min())
    return spec.omega0 - g, spec.omega0 + g
