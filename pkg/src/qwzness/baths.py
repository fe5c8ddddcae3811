"""Thermal reservoirs: occupation functions and wide-band self-energies."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .errors import ConfigurationError, DivergenceError, ValidationError
from .lattice import LatticeSpec, column_indices

BOSON = "boson"
FERMION = "fermion"
STATISTICS = (BOSON, FERMION)

# Bose values below this are flushed to zero
BOSE_FLUSH = 1e-300


@dataclass(frozen=True)
class BathSpec:
    """Hot bath on column ``x = 1``, cold bath on ``x = L_X``.

    Energies and temperatures are in units of t.  For bosons the chemical
    potential must be zero.
    """

    t_hot: float
    t_cold: float
    gamma: float
    statistics: str = BOSON
    mu: float = 0.0

    def __post_init__(self):
        if self.statistics not in STATISTICS:
            raise ValidationError(f"statistics must be one of {STATISTICS}, got {self.statistics!r}")
        for name in ("t_hot", "t_cold", "gamma"):
            value = float(getattr(self, name))
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"{name} must be finite and > 0, got {value!r}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "mu", float(self.mu))
        if self.statistics == BOSON and self.mu != 0.0:
            raise ValidationError("bosonic chemical potential must be zero")

    @property
    def t_max(self) -> float:
        return max(self.t_hot, self.t_cold)

    def hot(self, omega):
        return occupation(omega, self.t_hot, self.mu, self.statistics)

    def cold(self, omega):
        return occupation(omega, self.t_cold, self.mu, self.statistics)


class SelfEnergyPair(NamedTuple):
    """Diagonals of the hot and cold rate matrices Gamma_h, Gamma_c."""

    hot: np.ndarray
    cold: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.hot + self.cold

    def matrices(self):
        return np.diag(self.hot), np.diag(self.cold)


def occupation(omega, temperature, mu=0.0, statistics=FERMION):
    """Fermi-Dirac or Bose-Einstein occupation ``1 / (exp((w - mu)/T) +- 1)``.

    Scalars in, scalar out; arrays are evaluated elementwise.
    """
    omega = np.asarray(omega, dtype=float)
    x = (omega - mu) / temperature
    if statistics == FERMION:
        out = expit(-x)
    elif statistics == BOSON:
        if np.any(x <= 0):
            raise DivergenceError(
                f"Bose occupation diverges for omega <= mu (min omega - mu = {np.min(omega - mu):g})")
        with np.errstate(over="ignore"):
            out = 1.0 / np.expm1(x)
        out = np.where(out < BOSE_FLUSH, 0.0, out)
    else:
        raise ValidationError(f"unknown statistics {statistics!r}")
    return out[()] if out.ndim == 0 else out


def build_self_energies(spec: LatticeSpec, bath: BathSpec) -> SelfEnergyPair:
    """Rate ``gamma`` on both flavors of column 1 (hot) and column L_X (cold)."""
    if spec.lx < 2:
        raise ConfigurationError("L_X must be >= 2 so the hot and cold baths couple to distinct columns")
    hot = np.zeros(spec.dim)
    cold = np.zeros(spec.dim)
    hot[column_indices(1, spec)] = bath.gamma
    cold[column_indices(spec.lx, spec)] = bath.gamma
    return SelfEnergyPair(hot, cold)


def check_bosonic_admissibility(omega_min: float, bath: BathSpec) -> None:
    if bath.statistics == BOSON and not omega_min > 0:
        raise DivergenceError(
            f"bosonic reservoirs need every mode frequency above zero (lowest is {omega_min:g})")
