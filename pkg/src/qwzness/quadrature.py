"""Adaptive Gauss-Kronrod (7/15) quadrature for array-valued integrands.

Two refinement strategies are offered.  The local one bisects each panel
until it meets its share of the tolerance and accumulates accepted panels
at once, so memory stays at a handful of result arrays.  The global one
keeps every panel in a heap and always splits the worst, which resolves
narrow features that a local test would accept too early.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

import numpy as np

from .errors import IntegrationError

log = logging.getLogger(__name__)

# relative Kronrod-Gauss difference treated as converged round-off noise
ROUNDOFF = 1e-13

_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# 15 nodes on [-1, 1]: -x_0..-x_6, 0, x_6..x_0
NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
GAUSS_WEIGHTS = np.zeros(15)
# Gauss nodes are the odd-indexed Kronrod abscissae
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and frequency-window settings for the NESS integrals.

    ``window`` is the margin added beyond the extreme mode energies; ``None``
    selects ``20 gamma + 10 max(T) + 2`` at solve time.
    ``boson_floor`` is the fraction of the lowest mode frequency below which
    bosonic reservoirs are taken to have no spectral weight.
    """

    rtol: float = 1e-9
    atol: float = 1e-12
    window: float | None = None
    max_panels: int = 200_000
    boson_floor: float = 0.5

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("quadrature tolerances must be > 0")
        if self.window is not None and not self.window > 0:
            raise ValueError("window margin must be > 0")
        if not 0 < self.boson_floor < 1:
            raise ValueError("boson_floor must lie in (0, 1)")

    def margin(self, gamma: float, t_max: float, t: float = 1.0) -> float:
        if self.window is not None:
            return self.window
        return 20.0 * gamma + 10.0 * t_max + 2.0 * t


@dataclass
class QuadratureResult:
    value: np.ndarray
    error: float
    n_panels: int
    tolerance: float


def panel_rule(a: float, b: float):
    """Nodes and (Kronrod, Gauss) weights mapped onto ``[a, b]``."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return mid + half * NODES, half * KRONROD_WEIGHTS, half * GAUSS_WEIGHTS


def integrate(panel, breakpoints, rtol=1e-9, atol=1e-12, max_panels=200_000,
              norm=None, strategy="local") -> QuadratureResult:
    """Integrate over ``[breakpoints[0], breakpoints[-1]]``.

    Parameters
    ----------
    panel : callable
        ``panel(a, b) -> (kronrod, gauss)`` estimates of the integral over
        ``[a, b]``; both may be arrays.
    breakpoints : array_like
        Seed subdivision, e.g. at every resonance.
    norm : callable, optional
        Scalar size of an array result (default: max absolute entry).
    strategy : {"local", "global"}
        ``"global"`` keeps every panel in a heap and always bisects the
        worst one until the summed error estimate meets the tolerance (best
        for small results).  ``"local"`` accepts a panel of width ``h`` once
        its error is below ``tol * h / L`` and discards it, so memory does
        not grow with the panel count (needed for large matrix results).

    Notes
    -----
    ``tol = max(atol, rtol * |I|)`` with ``|I|`` taken from the seed pass.
    Panels narrower than a few ulps of their position are accepted as is.
    """
    norm = norm or (lambda x: float(np.max(np.abs(x))))
    pts = np.unique(np.asarray(breakpoints, dtype=float))
    if pts.size < 2:
        raise ValueError("need at least two distinct breakpoints")
    seeds = [(a, b, *panel(a, b)) for a, b in zip(pts[:-1], pts[1:])]
    tol = max(atol, rtol * norm(sum(s[2] for s in seeds)))
    min_width = 64 * np.finfo(float).eps * max(abs(pts[0]), abs(pts[-1]), 1.0)
    if strategy == "global":
        return _integrate_global(panel, seeds, tol, max_panels, norm, min_width)
    if strategy != "local":
        raise ValueError(f"unknown strategy {strategy!r}")
    return _integrate_local(panel, seeds, tol, max_panels, norm, min_width, pts[-1] - pts[0])


def _integrate_local(panel, seeds, tol, max_panels, norm, min_width, length):
    total = 0
    err_total = 0.0
    count = len(seeds)
    stack = seeds[::-1]
    while stack:
        a, b, k, g = stack.pop()
        err = norm(k - g)
        if err <= tol * (b - a) / length or err <= ROUNDOFF * norm(k) or (b - a) < min_width:
            total = total + k
            err_total += err
            continue
        if count >= max_panels:
            raise IntegrationError(
                f"quadrature exceeded {max_panels} panels (error estimate {err_total + err:.3g})",
                error_estimate=err_total + err, n_panels=count)
        mid = 0.5 * (a + b)
        count += 2
        stack.append((mid, b, *panel(mid, b)))
        stack.append((a, mid, *panel(a, mid)))
    return QuadratureResult(total, err_total, count, tol)


def _panel_error(norm, k, g):
    # differences at the round-off level of the panel value are not refinable
    err = norm(k - g)
    return 0.0 if err <= ROUNDOFF * norm(k) else err


def _integrate_global(panel, seeds, tol, max_panels, norm, min_width):
    heap = []
    frozen_err = 0.0
    frozen = 0
    for n, (a, b, k, g) in enumerate(seeds):
        heapq.heappush(heap, (-_panel_error(norm, k, g), n, a, b, k))
    serial = len(seeds)
    err_total = -sum(h[0] for h in heap)
    while heap and err_total > tol:
        neg_err, _, a, b, k = heapq.heappop(heap)
        err_total += neg_err
        if (b - a) < min_width:
            frozen = frozen + k
            frozen_err -= neg_err
            continue
        if serial >= max_panels:
            err_total -= neg_err
            raise IntegrationError(
                f"quadrature exceeded {max_panels} panels (error estimate {err_total + frozen_err:.3g})",
                error_estimate=err_total + frozen_err, n_panels=serial)
        mid = 0.5 * (a + b)
        for lo, hi in ((a, mid), (mid, b)):
            kk, gg = panel(lo, hi)
            e = _panel_error(norm, kk, gg)
            heapq.heappush(heap, (-e, serial, lo, hi, kk))
            serial += 1
            err_total += e
    total = frozen + sum(h[4] for h in heap)
    return QuadratureResult(total, max(err_total, 0.0) + frozen_err, serial, tol)
