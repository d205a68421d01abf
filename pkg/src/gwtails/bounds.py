"""Upper bounds for tails of centered i.i.d. sums T_n = eta_1 + ... + eta_n.

The summands are eta = xi - shift for an offspring law xi, so the summand
tail is Gbar(x) = tail(x + shift).  The workhorse is the two-term
jump/Chernoff decomposition

    P{T_n > x} <= n Gbar(y) + e^(-lambda x) (E{e^(lambda eta); eta <= y})^n,

valid for every lambda > 0 and y < x; the proposition-style evaluators
plug in specific (y, lambda) recipes and report whether the requested
(n, x) sits inside the range for which the sharper cn*Gbar form is claimed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadParam, NoConvergence, Overflow, TailZero, TooLarge
from .offspring import FiniteSupportLaw, OffspringLaw
from .rng import as_streams

__all__ = [
    "CenteredSummandLaw",
    "BoundResult",
    "truncated_mgf",
    "chebyshev_sum_bound",
    "prop22_bound",
    "prop23_bound",
    "exact_sum_tail",
    "sample_sum_tails",
    "sstar_bound_harness",
    "SstarHarnessRow",
]

_EXP_GUARD = 700.0
_DOMAIN_HARNESS = 0x5757


@dataclass
class CenteredSummandLaw:
    """eta = xi - shift with xi from an offspring law."""

    base: OffspringLaw
    shift: float

    @property
    def mean_eta(self) -> float:
        return self.base.mean_m - self.shift

    def g_tail(self, x):
        """Gbar(x) = P{eta > x}."""
        return self.base.tail(np.asarray(x) + self.shift)

    def g_hazard(self, x) -> float:
        t = self.g_tail(x)
        if np.any(np.asarray(t) == 0.0):
            raise TailZero(f"summand tail underflowed at x={x!r}")
        out = -np.log(t)
        return float(out) if np.isscalar(t) else out

    def sample_t_n(self, rng, n: int, replicas: int) -> np.ndarray:
        """T_n = sum of n i.i.d. eta draws, vectorised over replicas."""
        total = np.zeros(replicas)
        chunk = max(1, (1 << 24) // max(n, 1))
        done = 0
        while done < replicas:
            r = min(chunk, replicas - done)
            draws = self.base.sample(rng, (r, n)).astype(np.float64)
            total[done : done + r] = draws.sum(axis=1) - n * self.shift
            done += r
        return total


@dataclass
class BoundResult:
    bound_value: float
    jump_term: float
    chernoff_term: float
    lambda_used: float
    y_used: float
    validity: str              # 'in_range' | 'out_of_range'
    range_note: str = ""
    cross_check: "BoundResult | None" = None


def truncated_mgf(summand: CenteredSummandLaw, lam: float, y: float, rtol: float = 1e-12) -> float:
    """E{e^(lambda eta); eta <= y} by direct summation over the support."""
    if lam <= 0.0:
        raise BadParam("lambda must be positive")
    if lam * max(y, 0.0) > _EXP_GUARD:
        raise Overflow(f"exponent guard: lambda*y = {lam * y:.3g} > {_EXP_GUARD}")
    k_max = math.floor(y + summand.shift)
    if k_max < 0:
        return 0.0
    base = summand.base
    if base.support_max is not None:
        k_max = min(k_max, base.support_max)
    total = 0.0
    start = 0
    chunk = 1 << 16
    while start <= k_max:
        stop = min(start + chunk, k_max + 1)
        ks = np.arange(start, stop, dtype=np.int64)
        eta = ks.astype(np.float64) - summand.shift
        total += float(np.dot(np.exp(lam * eta), base._pmf_int(ks)))
        start = stop
        if start > k_max:
            break
        # remaining terms are at most e^(lam y) * P{xi >= start}
        rem = math.exp(min(lam * y, _EXP_GUARD)) * base.tail(start - 1)
        if rem < rtol * max(total, 1e-300):
            break
        if start > 10**8:
            raise NoConvergence("truncated mgf summation exhausted its budget")
    return total


def chebyshev_sum_bound(
    summand: CenteredSummandLaw, n: int, x: float, y: float, lam: float
) -> BoundResult:
    """Two-term bound n Gbar(y) + e^(-lambda x) mgf(lambda, y)^n."""
    if not 0.0 < y < x:
        raise BadParam(f"need 0 < y < x, got y={y}, x={x}")
    if lam <= 0.0:
        raise BadParam("lambda must be positive")
    if n < 0:
        raise BadParam("n must be nonnegative")
    if summand.mean_eta > 0.0:
        raise BadParam(f"summand mean must be <= 0, got {summand.mean_eta:.6g}")
    jump = n * float(summand.g_tail(y))
    mgf = truncated_mgf(summand, lam, y)
    if mgf <= 0.0:
        chern = 0.0
    else:
        log_chern = -lam * x + n * math.log(mgf)
        if log_chern > _EXP_GUARD:
            raise Overflow(f"Chernoff term overflows: exponent {log_chern:.3g}")
        chern = math.exp(log_chern)
    return BoundResult(
        bound_value=jump + chern,
        jump_term=jump,
        chernoff_term=chern,
        lambda_used=lam,
        y_used=y,
        validity="in_range",
        range_note="unconditional exponential-Chebyshev bound",
    )


def prop22_bound(
    summand: CenteredSummandLaw,
    n: int,
    x: float,
    eps: float,
    c_range: float = 8.0,
) -> BoundResult:
    """Regularly-varying-type recipe: y = eps*x and lambda = 2 R(x)/x.

    The c n Gbar(x) form behind it is claimed for n <= x^2 / (c log x);
    outside that range the returned value is still a valid Chebyshev
    bound, only the validity flag changes.
    """
    if x < 1.0:
        raise BadParam("x must be at least 1")
    if not 0.0 < eps < 1.0:
        raise BadParam("eps must lie in (0, 1)")
    if c_range <= 0.0:
        raise BadParam("c_range must be positive")
    hz = summand.g_hazard(x)
    lam = 2.0 * hz / x
    res = chebyshev_sum_bound(summand, n, x, eps * x, lam)
    limit = x**2 / (c_range * math.log(max(x, math.e)))
    in_range = n <= limit
    return BoundResult(
        bound_value=res.bound_value,
        jump_term=res.jump_term,
        chernoff_term=res.chernoff_term,
        lambda_used=lam,
        y_used=eps * x,
        validity="in_range" if in_range else "out_of_range",
        range_note=(
            f"n = {n} vs x^2/(c log x) = {limit:.4g} with c = {c_range:g}; "
            "bound itself is unconditional"
        ),
    )


def prop23_bound(
    summand: CenteredSummandLaw,
    n: int,
    x: float,
    y: float,
    eps: float,
    c_param: float = 8.0,
) -> BoundResult:
    """Weibullian-type recipe: (n+1) Gbar(y) for y <= (1-eps) x.

    Claimed for n R(y) / x^2 <= 1/c; the unspecified constant c is exposed
    as ``c_param`` (default 8) and only affects the validity flag.  The
    lambda = (1+eps) R(y)/x Chebyshev evaluation is attached as a
    cross-check.
    """
    if not 0.0 < eps < 1.0:
        raise BadParam("eps must lie in (0, 1)")
    if y > (1.0 - eps) * x:
        raise BadParam(f"need y <= (1-eps) x = {(1 - eps) * x:.6g}, got y = {y}")
    if y <= 0.0:
        raise BadParam("y must be positive")
    if n < 0:
        raise BadParam("n must be nonnegative")
    if c_param <= 0.0:
        raise BadParam("c_param must be positive")
    g_y = float(summand.g_tail(y))
    hz_y = summand.g_hazard(y)
    lam = (1.0 + eps) * hz_y / x
    try:
        cross = chebyshev_sum_bound(summand, n, x, y, lam)
    except Overflow:
        cross = None
    in_range = n * hz_y / x**2 <= 1.0 / c_param
    return BoundResult(
        bound_value=(n + 1) * g_y,
        jump_term=n * g_y,
        chernoff_term=g_y,
        lambda_used=lam,
        y_used=y,
        validity="in_range" if in_range else "out_of_range",
        range_note=(
            f"n R(y)/x^2 = {n * hz_y / x**2:.4g} vs 1/c = {1.0 / c_param:.4g}"
        ),
        cross_check=cross,
    )


# ----------------------------------------------------------------------
# exact and Monte Carlo references
# ----------------------------------------------------------------------


def exact_sum_tail(summand: CenteredSummandLaw, n: int, x: float) -> float:
    """Exact P{T_n > x} by n-fold convolution of a finite-support base."""
    base = summand.base
    if not isinstance(base, FiniteSupportLaw):
        raise BadParam("exact convolution needs a finite-support base law")
    if len(base.atoms) > 8 or n > 12:
        raise TooLarge("exact convolution limited to support <= 8, n <= 12")
    if n == 0:
        return float(0.0 > x)
    pmf = np.zeros(base.support_max + 1)
    pmf[base.atoms] = base.probs
    dist = np.array([1.0])
    for _ in range(n):
        dist = np.convolve(dist, pmf)
    support = np.arange(len(dist), dtype=np.float64) - n * summand.shift
    return float(dist[support > x].sum())


def sample_sum_tails(summand, n, x_grid, replicas, rng) -> tuple[np.ndarray, np.ndarray]:
    """MC estimates of P{T_n > x} on a grid, one sample reused across x."""
    streams = as_streams(rng)
    t = summand.sample_t_n(streams.stream(_DOMAIN_HARNESS, n), n, replicas)
    xs = np.asarray(x_grid, dtype=np.float64)
    hits = (t[None, :] > xs[:, None]).sum(axis=1)
    p = hits / replicas
    se = np.sqrt(np.maximum(p * (1.0 - p), 0.0) / replicas)
    return p, se


@dataclass
class SstarHarnessRow:
    n: int
    x: float
    p_hat: float
    std_error: float
    n_gbar: float
    ratio: float
    informative: bool
    exact: bool = False


def sstar_bound_harness(summand, n_grid, x_grid, replicas, rng) -> list:
    """Validate P{T_n > x} <= (1+o(1)) n Gbar(x) for negative-mean summands.

    Reports the ratio p_hat / (n Gbar(x)) over the grid; n = 1 rows are
    computed exactly (ratio identically 1).  Rows with x <= n |mean| sit
    in the law-of-large-numbers region and are flagged uninformative.
    """
    if summand.mean_eta >= 0.0:
        raise BadParam(f"harness needs a negative-mean summand, got {summand.mean_eta:.6g}")
    rows = []
    a = abs(summand.mean_eta)
    for n in n_grid:
        if n < 1:
            raise BadParam("n grid entries must be >= 1")
        if n == 1:
            for x in x_grid:
                g = float(summand.g_tail(x))
                rows.append(
                    SstarHarnessRow(
                        n=1, x=float(x), p_hat=g, std_error=0.0, n_gbar=g,
                        ratio=1.0 if g > 0 else math.nan,
                        informative=float(x) > a, exact=True,
                    )
                )
            continue
        p, se = sample_sum_tails(summand, n, x_grid, replicas, rng)
        for x, pi, si in zip(x_grid, p, se):
            ng = n * float(summand.g_tail(x))
            rows.append(
                SstarHarnessRow(
                    n=int(n), x=float(x), p_hat=float(pi), std_error=float(si),
                    n_gbar=ng, ratio=float(pi) / ng if ng > 0 else math.nan,
                    informative=float(x) > n * a,
                )
            )
    return rows
