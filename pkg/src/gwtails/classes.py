"""Finite-grid diagnostics for distribution-class hypotheses.

Membership in the asymptotic classes (dominated varying, intermediate
regular variation, h-insensitivity, strong subexponentiality, rapid
variation, hazard regularity) cannot be decided from finitely many tail
evaluations.  Each check therefore returns a three-valued verdict:

* ``consistent``  - the statistic behaves as the class predicts on the
  top decade of the grid, within the documented tolerance;
* ``violated``    - a concrete witness point contradicts the property
  (re-evaluating the statistic at the witness reproduces the violation);
* ``inconclusive`` - the grid cannot tell (tail underflow, finite
  support, or a statistic still drifting).

Finite-support laws are never reported ``consistent``: every asymptotic
class here is a heavy-tail property.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadParam
from .offspring import OffspringLaw

__all__ = [
    "ClassReport",
    "default_grid",
    "check_dominated_varying",
    "check_matuszewska",
    "check_insensitive",
    "check_sstar",
    "check_rapid_variation",
    "check_hazard_increment",
    "check_hazard_slope",
]

# finite-grid conventions (see module docstring)
STABILISE_REL = 0.05   # "stabilised": top-decade sup within 5% of earlier sup
DRIFT_MIN = 0.10       # smallest deviation we are willing to call violated
CONSISTENT = "consistent"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"


@dataclass
class ClassReport:
    class_name: str
    grid: np.ndarray
    statistic: np.ndarray
    verdict: str
    witness: object = None
    detail: str = ""

    def __post_init__(self):
        if self.verdict == VIOLATED and self.witness is None:
            raise ValueError("violated verdicts must carry a witness point")


def default_grid(lo: float = 8.0, hi: float = float(1 << 20), count: int = 64):
    """Geometric grid; the default covers the precomputed tail table."""
    if not (lo >= 1 and hi > lo and count >= 2):
        raise BadParam("grid must satisfy 1 <= lo < hi, count >= 2")
    return np.geomspace(lo, hi, count)


def _top_decade(grid, valid):
    top = grid[valid][-1]
    return valid & (grid > top / 10.0)


def _finite_support_guard(law, grid, stat, name, detail=""):
    if law.support_max is None:
        return None
    edge = float(law.support_max)
    return ClassReport(
        class_name=name,
        grid=grid,
        statistic=stat,
        verdict=INCONCLUSIVE,
        witness=edge,
        detail=detail or "finite support: asymptotic class undecidable, tail hits 0",
    )


def check_dominated_varying(law: OffspringLaw, x_max: float = float(1 << 20)) -> ClassReport:
    """Dominated variation: sup_x tail(x/2)/tail(x) finite.

    Consistent when the running sup has stabilised: the sup over the top
    decade exceeds the sup over earlier points by at most 5%.
    """
    if x_max < 4:
        raise BadParam("x_max must be at least 4")
    grid = default_grid(8.0, x_max)
    t_half = np.asarray(law.tail(grid / 2.0))
    t_full = np.asarray(law.tail(grid))
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(t_full > 0.0, t_half / np.maximum(t_full, 1e-320), np.nan)
    guard = _finite_support_guard(law, grid, stat, "DominatedVarying")
    if guard is not None:
        return guard
    valid = np.isfinite(stat)
    if valid.sum() < 8:
        wit = float(grid[~valid][0]) if (~valid).any() else None
        return ClassReport("DominatedVarying", grid, stat, INCONCLUSIVE, wit,
                           "tail underflow leaves too few evaluable points")
    top = _top_decade(grid, valid)
    early = valid & ~top
    sup_top = float(np.nanmax(stat[top]))
    sup_early = float(np.nanmax(stat[early])) if early.any() else math.inf
    if sup_top <= (1.0 + STABILISE_REL) * sup_early:
        return ClassReport("DominatedVarying", grid, stat, CONSISTENT, None,
                           f"sup stabilised near {max(sup_top, sup_early):.4g}")
    wit = float(grid[valid][np.argmax(stat[valid])])
    return ClassReport("DominatedVarying", grid, stat, INCONCLUSIVE, wit,
                       "tail(x/2)/tail(x) still growing at the top decade")


def check_matuszewska(law: OffspringLaw, delta: float, c: float, grid=None) -> ClassReport:
    """Upper Matuszewska-type bound: tail(xy) <= c tail(x) / y^(1+delta)."""
    if delta <= 0:
        raise BadParam("delta must be positive")
    if c < 1:
        raise BadParam("c must be at least 1")
    x_grid = default_grid(2.0, float(1 << 16), 32) if grid is None else np.asarray(grid, dtype=float)
    y_grid = np.geomspace(1.5, float(1 << 30), 28)
    stat = np.full(len(x_grid), np.nan)
    witness = None
    informative = False
    for i, x in enumerate(x_grid):
        tx = law.tail(x)
        if tx <= 0.0:
            continue
        txy = np.asarray(law.tail(x * y_grid))
        bound = c * tx / y_grid ** (1.0 + delta)
        ok = txy > 0.0
        if not ok.any():
            continue
        informative = True
        ratio = txy / bound
        stat[i] = float(np.max(ratio[ok] if ok.all() else np.where(ok, ratio, 0.0)))
        if stat[i] > 1.0 and witness is None:
            j = int(np.argmax(np.where(ok, ratio, 0.0)))
            witness = (float(x), float(y_grid[j]))
    if witness is not None:
        return ClassReport("Matuszewska", x_grid, stat, VIOLATED, witness,
                           f"tail(xy) > c tail(x) y^-(1+delta) at (x, y) = {witness}")
    guard = _finite_support_guard(law, x_grid, stat, "Matuszewska")
    if guard is not None:
        return guard
    if not informative:
        return ClassReport("Matuszewska", x_grid, stat, INCONCLUSIVE, None,
                           "tails underflowed on the whole product grid")
    return ClassReport("Matuszewska", x_grid, stat, CONSISTENT, None,
                       f"inequality holds on the product grid (max ratio {np.nanmax(stat):.3g})")


def _limit_verdict(law, grid, stat, name, target, tol, detail_target):
    """Shared verdict logic for statistics expected to converge to a limit."""
    guard = _finite_support_guard(law, grid, stat, name)
    if guard is not None:
        return guard
    valid = np.isfinite(stat)
    if valid.sum() < 8:
        wit = float(grid[~valid][0]) if (~valid).any() else None
        return ClassReport(name, grid, stat, INCONCLUSIVE, wit,
                           "too few evaluable grid points")
    top = _top_decade(grid, valid)
    dev = np.abs(stat - target)
    if np.all(dev[top] <= tol):
        return ClassReport(name, grid, stat, CONSISTENT, None,
                           f"statistic within {tol:g} of {detail_target} over the top decade")
    # violated: deviation grows along the top decade and ends far from target
    dev_top = dev[top]
    drifting = len(dev_top) >= 3 and np.all(np.diff(dev_top) >= -1e-12)
    if drifting and dev_top[-1] > DRIFT_MIN:
        wit = float(grid[top][-1])
        return ClassReport(name, grid, stat, VIOLATED, wit,
                           f"deviation from {detail_target} grows and reaches "
                           f"{dev_top[-1]:.3g} at x = {wit:.4g}")
    wit = float(grid[top][int(np.argmax(dev_top))])
    return ClassReport(name, grid, stat, INCONCLUSIVE, wit,
                       f"statistic has not settled within {tol:g} of {detail_target}")


def check_insensitive(law: OffspringLaw, gamma: float, grid=None, tol: float = 0.02) -> ClassReport:
    """h-insensitivity with h(x) = x^gamma: tail(x + x^gamma) ~ tail(x)."""
    if not 0.0 <= gamma < 1.0:
        raise BadParam("gamma must lie in [0, 1)")
    g = default_grid() if grid is None else np.asarray(grid, dtype=float)
    shifted = np.asarray(law.tail(g + np.maximum(g**gamma, 1.0)))
    base = np.asarray(law.tail(g))
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(base > 0.0, shifted / np.maximum(base, 1e-320), np.nan)
    return _limit_verdict(law, g, stat, "HInsensitive", 1.0, tol, "1")


def check_sstar(law: OffspringLaw, x_grid=None, tol: float = 0.05) -> ClassReport:
    """Strong subexponentiality: int_0^x tail(x-y) tail(y) dy ~ 2 m tail(x).

    Tails are unit-cell step functions, so the integral is an exact finite
    sum; it is assembled from the half-range [0, x/2) using the symmetry
    of the integrand (the quadrature tolerance 1e-8 is met exactly).
    """
    if x_grid is None:
        x_grid = np.unique(np.geomspace(16, 1 << 20, 48).astype(np.int64))
    x_grid = np.asarray(x_grid)
    if np.any(x_grid != np.floor(x_grid)):
        raise BadParam("S* grid points must be integers")
    xs = x_grid.astype(np.int64)
    kmax = int(xs.max())
    t = np.asarray(law.tail(np.arange(kmax + 1, dtype=np.int64)))
    stat = np.full(len(xs), np.nan)
    for i, x in enumerate(xs):
        tx = t[x]
        if tx <= 0.0:
            continue
        half = int(x) // 2
        # integrand is symmetric about x/2: fold the exact cell sum
        left = t[:half]
        right = t[int(x) - half : int(x)][::-1]
        integral = 2.0 * float(np.dot(left, right))
        if int(x) % 2 == 1:
            integral += float(t[half] * t[int(x) - 1 - half])
        stat[i] = integral / (2.0 * law.mean_m * tx)
    # the small-x regime says nothing about the limit: drop x below 4*E xi
    small = xs < 4.0 * law.mean_m
    stat[small] = np.nan
    return _limit_verdict(law, xs.astype(float), stat, "SStar", 1.0, tol, "1")


def check_rapid_variation(law: OffspringLaw, eps: float, grid=None, tol: float = 0.02) -> ClassReport:
    """Rapid variation: tail(x(1+eps)) = o(tail(x)).

    Consistent when the ratio is below ``tol`` across the top decade;
    violated when the ratio has stabilised at a level above ``tol``.
    """
    if eps <= 0.0:
        raise BadParam("eps must be positive")
    g = default_grid() if grid is None else np.asarray(grid, dtype=float)
    num = np.asarray(law.tail(g * (1.0 + eps)))
    den = np.asarray(law.tail(g))
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(den > 0.0, num / np.maximum(den, 1e-320), np.nan)
    guard = _finite_support_guard(law, g, stat, "RapidlyVarying")
    if guard is not None:
        return guard
    valid = np.isfinite(stat)
    if valid.sum() < 8:
        wit = float(g[~valid][0]) if (~valid).any() else None
        return ClassReport("RapidlyVarying", g, stat, INCONCLUSIVE, wit,
                           "too few evaluable grid points")
    top = _top_decade(g, valid)
    if np.all(stat[top] <= tol):
        return ClassReport("RapidlyVarying", g, stat, CONSISTENT, None,
                           f"ratio below {tol:g} over the top decade")
    top_vals = stat[top]
    spread = float(np.max(top_vals) - np.min(top_vals))
    if spread <= STABILISE_REL * float(np.max(top_vals)) and float(np.min(top_vals)) > tol:
        wit = float(g[top][-1])
        return ClassReport("RapidlyVarying", g, stat, VIOLATED, wit,
                           f"ratio stabilised near {float(np.mean(top_vals)):.3g} > {tol:g}")
    wit = float(g[top][int(np.argmax(top_vals))])
    return ClassReport("RapidlyVarying", g, stat, INCONCLUSIVE, wit,
                       "ratio neither vanished nor stabilised on the grid")


def check_hazard_increment(law: OffspringLaw, c1: float, k_max: int = 1 << 16) -> ClassReport:
    """Hazard increments: R(k) - R(k-1) <= c1 R(k) / k for all k >= 1."""
    if c1 <= 0:
        raise BadParam("c1 must be positive")
    if k_max < 2:
        raise BadParam("k_max must be at least 2")
    ks = np.arange(0, k_max + 1, dtype=np.int64)
    t = np.asarray(law.tail(ks))
    pos = t > 0.0
    last = int(np.nonzero(pos)[0][-1]) if pos.any() else 0
    with np.errstate(divide="ignore"):
        R = -np.log(np.maximum(t[: last + 1], 1e-320))
    k_arr = np.arange(1, last + 1, dtype=np.float64)
    inc = R[1:] - R[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(R[1:] > 0.0, inc * k_arr / R[1:], np.nan)
    valid = np.isfinite(stat)
    bad = valid & (stat > c1 * (1.0 + 1e-12))
    # store a geometric subsample; the scan itself covers every k
    keep = np.unique(np.geomspace(1, max(last, 2), 64).astype(np.int64)) - 1
    keep = keep[keep < len(stat)]
    grid = k_arr[keep]
    sub = stat[keep]
    if bad.any():
        kw = int(k_arr[bad][0])
        return ClassReport("HazardIncrement", grid, sub, VIOLATED, float(kw),
                           f"R({kw}) - R({kw - 1}) > c1 R({kw})/{kw}")
    guard = _finite_support_guard(law, grid, sub, "HazardIncrement")
    if guard is not None:
        return guard
    if valid.sum() < 2:
        return ClassReport("HazardIncrement", grid, sub, INCONCLUSIVE, None,
                           "hazard not evaluable on the scan range")
    return ClassReport("HazardIncrement", grid, sub, CONSISTENT, None,
                       f"increment bound holds for k = 1..{last} "
                       f"(max ratio {np.nanmax(stat):.4g})")


def check_hazard_slope(law: OffspringLaw, eps: float, x0: float, grid=None) -> ClassReport:
    """Hazard slope: R(x)/x <= (1+eps) R(z)/z for all x >= z >= x0."""
    if eps <= 0:
        raise BadParam("eps must be positive")
    if x0 < 1:
        raise BadParam("x0 must be at least 1")
    g = default_grid(max(x0, 1.0), float(1 << 20)) if grid is None else np.asarray(grid, dtype=float)
    g = g[g >= x0]
    t = np.asarray(law.tail(g))
    pos = t > 0.0
    slope = np.full(len(g), np.nan)
    slope[pos] = -np.log(t[pos]) / g[pos]
    guard = _finite_support_guard(law, g, slope, "HazardSlope")
    if guard is not None:
        return guard
    valid = np.isfinite(slope)
    if valid.sum() < 4:
        return ClassReport("HazardSlope", g, slope, INCONCLUSIVE, None,
                           "hazard not evaluable on the grid")
    run_min = np.fmin.accumulate(np.where(valid, slope, np.inf))
    argmin = np.zeros(len(g), dtype=np.int64)
    best = np.inf
    for i, s in enumerate(slope):
        if valid[i] and s < best:
            best = s
            bi = i
        argmin[i] = bi if best < np.inf else 0
    bad = valid & (slope > (1.0 + eps) * run_min * (1.0 + 1e-12))
    if bad.any():
        i = int(np.nonzero(bad)[0][0])
        wit = (float(g[i]), float(g[argmin[i]]))
        return ClassReport("HazardSlope", g, slope, VIOLATED, wit,
                           f"R(x)/x exceeds (1+eps) R(z)/z at (x, z) = {wit}")
    return ClassReport("HazardSlope", g, slope, CONSISTENT, None,
                       "R(x)/x is (1+eps)-almost nonincreasing on the grid")
