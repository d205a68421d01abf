"""Heavy-tailed integer offspring distributions.

Each law lives on the nonnegative integers, is supercritical (mean > 1,
enforced at construction), and exposes exact tail/hazard/pmf evaluation,
moment computation, and exact inverse-CDF sampling.  Tails at real
arguments are evaluated as step functions, ``tail(x) = tail(floor(x))``.

Laws are immutable after construction and safe to share across workers;
sampling always takes an externally supplied generator.
"""

from __future__ import annotations

import math
import re
from functools import cached_property

import numpy as np
from scipy import special

from .errors import (
    BadParam,
    BadPmf,
    ConditionalTailEmpty,
    NoConvergence,
    ParseError,
    SubcriticalMean,
    TailZero,
)

__all__ = [
    "OffspringLaw",
    "make_pareto_integer",
    "make_discrete_weibull",
    "make_log_corrected_index_one",
    "make_lognormal_integer",
    "make_finite_support",
    "tune_to_mean",
    "parse_law_spec",
    "tail",
    "hazard",
    "pmf",
    "truncated_moment",
    "sample",
    "TAIL_FLOOR",
    "TABLE_MAX",
]

# Tail values below this report exactly 0; hazard raises TailZero there.
TAIL_FLOOR = 1e-300
# Horizon of the precomputed tail table used by the sampler.
TABLE_MAX = 1 << 20
# The histogram sampling kernel treats {0..head_k} exactly via multinomial
# counts; head_k is the smallest k with tail(k) <= HEAD_TAIL_TARGET.
HEAD_TAIL_TARGET = 3e-4
_HEAD_MIN, _HEAD_MAX = 8, 512

_I64_MAX = np.iinfo(np.int64).max


def _floor_arg(x):
    """floor(x) kept in float64: exact for |x| < 2^53, and beyond that the
    unit-step structure of the tail is below float resolution anyway."""
    return np.floor(np.asarray(x, dtype=np.float64))


class OffspringLaw:
    """Base class; concrete families implement the exact integer tail."""

    family = "abstract"

    def __init__(self):
        self.params: dict = {}
        self.mean_m: float = math.nan
        self.variance: float = math.nan
        self.e_xi_log_xi: float | None = None
        self.has_finite_xi_log_xi: bool = True
        self.support_max: int | None = None

    # -- family-specific primitives -------------------------------------

    def _tail_int(self, k):
        """Exact tail P{xi > k} at integer k >= 0 (vectorised, no floor)."""
        raise NotImplementedError

    def _pmf_int(self, k):
        """Exact pmf at integer k >= 0 (vectorised)."""
        k = np.asarray(k, dtype=np.int64)
        prev = np.where(k > 0, self._tail_int(np.maximum(k - 1, 0)), 1.0)
        return np.maximum(prev - self._tail_int(k), 0.0)

    def _invert_beyond(self, v: float) -> int:
        """min{k > table horizon : tail(k) <= v}; v below the table end."""
        return _refine_inverse(self, v, 2.0 * (self._table_len - 1))

    def tail_smooth(self, u):
        """Analytic interpolant of the tail, used by quadrature routines."""
        raise NotImplementedError

    def tail_integral_smooth(self, lo: float) -> float:
        """Closed form of ``integral_lo^inf tail_smooth(u) du`` if known."""
        raise NotImplementedError

    # -- public evaluation ----------------------------------------------

    def tail(self, x):
        """P{xi > x}; step function of floor(x), floored at 1e-300."""
        k = _floor_arg(x)
        out = np.where(k < 0, 1.0, self._tail_int(np.maximum(k, 0.0)))
        out = np.where(out < TAIL_FLOOR, 0.0, out)
        if np.isscalar(x) or np.asarray(x).ndim == 0:
            return float(np.atleast_1d(out)[0])
        return out

    def hazard(self, x):
        """R(x) = -log tail(x); raises TailZero on underflowed tails."""
        t = self.tail(x)
        if np.any(np.asarray(t) == 0.0):
            raise TailZero(f"tail underflowed to 0 at x={x!r}")
        out = -np.log(t)
        return float(out) if np.isscalar(t) else out

    def pmf(self, k):
        k_arr = np.asarray(k)
        if np.any(k_arr != np.floor(k_arr)):
            raise BadParam("pmf is defined on integers only")
        ki = k_arr.astype(np.int64)
        out = np.where(ki < 0, 0.0, self._pmf_int(np.maximum(ki, 0)))
        if np.isscalar(k) or k_arr.ndim == 0:
            return float(np.atleast_1d(out)[0])
        return out

    def truncated_moment(self, order, cutoff) -> float:
        """E{xi^order; xi <= cutoff} by summation, relative tol 1e-12."""
        if order <= 0:
            raise BadParam("moment order must be positive")
        if math.isinf(cutoff):
            if order == 1:
                return self.mean_m
            if order == 2:
                if math.isinf(self.variance):
                    return math.inf
                return self.variance + self.mean_m**2
            cutoff_k = _I64_MAX
        else:
            cutoff_k = int(math.floor(cutoff))
        if cutoff_k < 0:
            return 0.0
        if self.support_max is not None:
            cutoff_k = min(cutoff_k, self.support_max)
        total = 0.0
        chunk = 1 << 16
        start = 0
        while start <= cutoff_k:
            stop = min(start + chunk, cutoff_k + 1)
            ks = np.arange(start, stop, dtype=np.int64)
            part = float(np.dot(ks.astype(np.float64) ** order, self._pmf_int(ks)))
            total += part
            start = stop
            if start > cutoff_k:
                return total
            # early stop once the running tail bound is negligible
            tail_bound = float(start) ** order * float(self._tail_int(np.int64(start - 1)))
            if part < 1e-13 * max(total, 1e-300) and tail_bound < 1e-13 * max(total, 1e-300):
                return total
            if start > 10**8:
                raise NoConvergence("truncated_moment exhausted its term budget")
        return total

    # -- sampling ---------------------------------------------------------

    @cached_property
    def _tail_table(self) -> np.ndarray:
        k_hi = TABLE_MAX if self.support_max is None else self.support_max + 1
        t = self._tail_int(np.arange(k_hi + 1, dtype=np.int64))
        return np.where(t < TAIL_FLOOR, 0.0, t)

    @cached_property
    def _neg_tail_table(self) -> np.ndarray:
        return -self._tail_table

    @property
    def _table_len(self) -> int:
        return len(self._tail_table)

    @cached_property
    def _head(self):
        """(head_k, conditional pmf on 0..head_k, tail mass beyond head)."""
        t = self._tail_table
        if self.support_max is not None:
            head_k = self.support_max
        else:
            idx = np.nonzero(t <= HEAD_TAIL_TARGET)[0]
            head_k = int(idx[0]) if len(idx) else len(t) - 1
            head_k = min(max(head_k, _HEAD_MIN), _HEAD_MAX)
        pr_tail = float(t[head_k])
        probs = np.empty(head_k + 1)
        probs[0] = 1.0 - t[0]
        probs[1:] = t[:head_k] - t[1 : head_k + 1]
        probs = np.maximum(probs, 0.0)
        s = probs.sum()
        if s <= 0.0:
            raise BadPmf("degenerate head in sampling table")
        return head_k, probs / s, pr_tail

    def _tail_quantile(self, v):
        """min{k : tail(k) <= v} for v in [0, 1), vectorised and exact."""
        v_arr = np.atleast_1d(np.asarray(v, dtype=np.float64))
        idx = np.searchsorted(self._neg_tail_table, -v_arr, side="left").astype(np.int64)
        beyond = idx >= self._table_len
        if beyond.any():
            vb = np.maximum(v_arr[beyond], TAIL_FLOOR)
            idx[beyond] = [self._invert_beyond(float(x)) for x in vb]
        return idx

    def sample(self, rng: np.random.Generator, size=None):
        """Exact inverse-CDF draw(s) of xi."""
        if size is None:
            return int(self._tail_quantile(rng.random())[0])
        return self._tail_quantile(rng.random(size))

    def sample_conditional_tail(self, rng: np.random.Generator, threshold, size=None):
        """Exact draw(s) from xi | xi > threshold."""
        ft = self.tail(threshold)
        if ft <= 0.0:
            raise ConditionalTailEmpty(
                f"tail({threshold}) underflowed; cannot condition on xi > {threshold}"
            )
        if size is None:
            return int(self._tail_quantile(rng.random() * ft)[0])
        return self._tail_quantile(rng.random(size) * ft)

    # ---------------------------------------------------------------------

    @property
    def spec_string(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.family}({inner})"

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec_string} m={self.mean_m:.6g}>"


def _check_supercritical(law: OffspringLaw):
    if not law.mean_m > 1.0:
        raise SubcriticalMean(
            f"{law.family} law has mean {law.mean_m:.12g} <= 1; "
            "a supercritical offspring law is required"
        )


def _sum_tail_with_remainder(term_fn, remainder_fn, start=0, rtol=1e-13, budget=10**8):
    """Sum term_fn(k) for k >= start, chunked, plus analytic remainder.

    remainder_fn(K) must bound/approximate sum_{k>K} term_fn(k) to well
    below the target accuracy once terms are small.
    """
    total = 0.0
    chunk = 1 << 15
    k0 = start
    while True:
        ks = np.arange(k0, k0 + chunk, dtype=np.int64)
        part = float(np.sum(term_fn(ks)))
        total += part
        k0 += chunk
        if part < rtol * max(total, 1e-300):
            return total + remainder_fn(k0 - 1)
        if k0 - start > budget:
            raise NoConvergence("moment summation exhausted its term budget")


# ======================================================================
# Pareto-integer family: pmf(k) ~ (k + scale)^-(alpha+1)
# ======================================================================


class ParetoIntegerLaw(OffspringLaw):
    family = "pareto"

    def __init__(self, alpha: float, scale: float):
        super().__init__()
        if not alpha > 1.0:
            raise BadParam(f"pareto alpha must be > 1 (finite mean), got {alpha}")
        if not scale > 0.0:
            raise BadParam(f"pareto scale must be positive, got {scale}")
        self.alpha = float(alpha)
        self.scale = float(scale)
        self.params = {"alpha": self.alpha, "scale": self.scale}
        self._z0 = float(special.zeta(self.alpha + 1.0, self.scale))
        # closed Hurwitz-zeta forms; accurate to machine precision, which
        # is well inside the 1e-12 summation contract
        self.mean_m = float(
            (special.zeta(self.alpha, self.scale) - self.scale * self._z0) / self._z0
        )
        if self.alpha > 2.0:
            ex2 = (
                special.zeta(self.alpha - 1.0, self.scale)
                - 2.0 * self.scale * special.zeta(self.alpha, self.scale)
                + self.scale**2 * self._z0
            ) / self._z0
            self.variance = float(ex2 - self.mean_m**2)
        else:
            self.variance = math.inf
        _check_supercritical(self)

    def _tail_int(self, k):
        q = np.asarray(k, dtype=np.float64) + 1.0 + self.scale
        return special.zeta(self.alpha + 1.0, q) / self._z0

    def _pmf_int(self, k):
        return (np.asarray(k, dtype=np.float64) + self.scale) ** (-(self.alpha + 1.0)) / self._z0

    def tail_smooth(self, u):
        q = np.maximum(np.asarray(u, dtype=np.float64), 0.0) + 1.0 + self.scale
        return special.zeta(self.alpha + 1.0, q) / self._z0

    def tail_integral_smooth(self, lo: float) -> float:
        lo = max(lo, 0.0)
        return float(
            special.zeta(self.alpha, lo + 1.0 + self.scale) / (self.alpha * self._z0)
        )

    def _invert_beyond(self, v: float) -> int:
        # zeta(a+1, q) ~ q^-a / a  =>  q ~ (a Z0 v)^(-1/a)
        guess = (self.alpha * self._z0 * v) ** (-1.0 / self.alpha) - 1.0 - self.scale
        return _refine_inverse(self, v, guess)


def _refine_inverse(law: OffspringLaw, v: float, guess: float) -> int:
    """Turn an approximate continuum inverse into min{k: tail(k) <= v}.

    Caller guarantees tail(table_end) > v, so the table end is a valid
    lower bracket.
    """
    cap = _I64_MAX // 4

    def t(k):
        return float(law._tail_int(np.float64(k)))

    lo = law._table_len - 1  # tail(lo) > v
    guess = min(guess, float(cap)) if math.isfinite(guess) else float(cap)
    k = min(max(int(guess), lo + 1), cap)
    if t(k) <= v:
        hi = k
    else:
        step = max(k // 4, 16)
        while t(k) > v:
            lo = k
            k = min(k + step, cap)
            step *= 2
            if k >= cap:
                if t(cap) > v:
                    return cap  # numeric horizon, P < 1e-300
                break
        hi = k
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if t(mid) > v:
            lo = mid
        else:
            hi = mid
    return hi


def make_pareto_integer(alpha: float, scale: float = 1.0) -> OffspringLaw:
    """Integer Pareto law: pmf(k) proportional to (k+scale)^-(alpha+1).

    The tail is regularly varying with index -alpha; alpha > 1 keeps the
    mean finite, and the computed mean must exceed 1.
    """
    return ParetoIntegerLaw(alpha, scale)


# ======================================================================
# Discrete Weibull family: tail(k) = q exp(-c k^beta)
# ======================================================================


class DiscreteWeibullLaw(OffspringLaw):
    family = "weibull"

    def __init__(self, beta: float, c: float, q: float = 1.0):
        super().__init__()
        if not 0.0 < beta < 1.0:
            raise BadParam(f"weibull beta must lie in (0,1), got {beta}")
        if not c > 0.0:
            raise BadParam(f"weibull c must be positive, got {c}")
        if not 0.0 < q <= 1.0:
            raise BadParam(f"weibull q must lie in (0,1], got {q}")
        self.beta = float(beta)
        self.c = float(c)
        self.q = float(q)
        self.params = {"beta": self.beta, "c": self.c, "q": self.q}
        self.mean_m = self._moment_sum(order=1)
        ex2 = self._moment_sum(order=2)
        self.variance = ex2 - self.mean_m**2
        _check_supercritical(self)

    def _moment_sum(self, order: int) -> float:
        # E xi = sum_k tail(k); E xi^2 = sum_k (2k+1) tail(k)
        b, c, q = self.beta, self.c, self.q

        def term(ks):
            t = q * np.exp(-c * ks.astype(np.float64) ** b)
            t[ks == 0] = q
            return t if order == 1 else (2.0 * ks + 1.0) * t

        def remainder(K):
            # integral_K^inf (...) q e^{-c u^b} du via upper incomplete gamma
            z = c * float(K) ** b
            r1 = q * (c ** (-1.0 / b) / b) * special.gamma(1.0 / b) * special.gammaincc(1.0 / b, z)
            if order == 1:
                r = r1
            else:
                r2 = q * 2.0 * (c ** (-2.0 / b) / b) * special.gamma(2.0 / b) * special.gammaincc(2.0 / b, z)
                r = r2 + r1
            return r + 0.5 * float(term(np.array([K], dtype=np.int64))[0])

        return _sum_tail_with_remainder(term, remainder)

    def _tail_int(self, k):
        ks = np.asarray(k, dtype=np.float64)
        out = self.q * np.exp(-self.c * ks**self.beta)
        return np.where(ks == 0, self.q, out)

    def tail_smooth(self, u):
        us = np.maximum(np.asarray(u, dtype=np.float64), 0.0)
        return self.q * np.exp(-self.c * us**self.beta)

    def tail_integral_smooth(self, lo: float) -> float:
        lo = max(lo, 0.0)
        z = self.c * lo**self.beta
        b = self.beta
        return float(
            self.q * (self.c ** (-1.0 / b) / b) * special.gamma(1.0 / b) * special.gammaincc(1.0 / b, z)
        )

    def _invert_beyond(self, v: float) -> int:
        guess = ((math.log(self.q) - math.log(v)) / self.c) ** (1.0 / self.beta)
        return _refine_inverse(self, v, guess)


def make_discrete_weibull(beta: float, c: float, q: float = 1.0) -> OffspringLaw:
    """Weibull-type law with hazard R(k) = c k^beta - log q, beta in (0,1)."""
    return DiscreteWeibullLaw(beta, c, q)


# ======================================================================
# Regularly varying index -1 with logarithmic correction
# ======================================================================


class LogCorrectedLaw(OffspringLaw):
    family = "logcorr"

    def __init__(self, p: float, x0: int = 3, c: float = 1.0):
        super().__init__()
        if not p > 1.0:
            raise BadParam(f"logcorr p must be > 1 (E xi log xi < inf), got {p}")
        if int(x0) != x0 or x0 < 3:
            raise BadParam(f"logcorr x0 must be an integer >= 3, got {x0}")
        if not c > 0.0:
            raise BadParam(f"logcorr tail constant must be positive, got {c}")
        self.p = float(p)
        self.x0 = int(x0)
        self.c = float(c)
        self.params = {"p": self.p, "x0": self.x0, "c": self.c}
        seam = min(1.0, self._raw(self.x0 - 1))
        # uniform head mass on {1, ..., x0-1} normalises the law
        self._head_step = (1.0 - seam) / (self.x0 - 1)
        # where the clamped region min(1, raw) ends
        k = self.x0 - 1
        while self._raw(k) >= 1.0:
            k += 1
        self._clamp_end = k  # raw(k) < 1 for k >= _clamp_end
        self.mean_m = self._mean_sum()
        self.variance = math.inf  # index -1: no second moment
        self.e_xi_log_xi = self._xi_log_xi_sum()
        _check_supercritical(self)

    def _raw(self, u):
        uu = np.asarray(u, dtype=np.float64)
        with np.errstate(over="ignore"):
            # u log^(p+1) u may overflow near 1e308; c/inf -> 0 is the limit
            return self.c / (uu * np.log(uu) ** (self.p + 1.0))

    def _tail_int(self, k):
        ks = np.asarray(k, dtype=np.float64)
        out = np.minimum(1.0, self._raw(np.maximum(ks, 2.0)))
        small = ks < self.x0 - 1
        head = 1.0 - np.where(small, ks, 0.0) * self._head_step
        return np.where(small, head, out)

    def tail_smooth(self, u):
        us = np.asarray(u, dtype=np.float64)
        out = np.minimum(1.0, self._raw(np.maximum(us, 2.0)))
        small = us < self.x0 - 1
        head = 1.0 - np.where(small, us, 0.0) * self._head_step
        return np.where(small, head, out)

    def _tail_integral_raw(self, lo: float) -> float:
        # integral of c / (u log^{p+1} u) from lo to infinity
        return self.c / (self.p * math.log(lo) ** self.p)

    def tail_integral_smooth(self, lo: float) -> float:
        lo = max(lo, 0.0)
        ce = self._clamp_end
        if lo >= ce:
            return self._tail_integral_raw(lo)
        total = self._tail_integral_raw(ce)
        # clamped stretch [max(lo, x0-1), ce) integrates to its length
        a = max(lo, self.x0 - 1.0)
        if ce > a:
            total += ce - a
        if lo < self.x0 - 1:
            # linear head: tail(u) = 1 - u*h on [lo, x0-1)
            b = self.x0 - 1.0
            h = self._head_step
            total += (b - lo) - 0.5 * h * (b**2 - lo**2)
        return total

    def _mean_sum(self) -> float:
        # mean = sum_{k<K} tail(k) + sum_{k>=K} raw(k); the second sum via
        # Euler-Maclaurin: integral_K^inf raw + raw(K)/2 (next term ~1e-16)
        K = TABLE_MAX
        ks = np.arange(0, K, dtype=np.int64)
        part = float(np.sum(self._tail_int(ks)))
        return part + self._tail_integral_raw(float(K)) + 0.5 * float(self._raw(float(K)))

    def _xi_log_xi_sum(self) -> float:
        # E xi log xi = sum_{j>=1} tail(j) ((j+1)log(j+1) - j log j)
        ks = np.arange(1, TABLE_MAX, dtype=np.int64).astype(np.float64)
        g = (ks + 1.0) * np.log(ks + 1.0) - ks * np.log(ks)
        part = float(np.dot(self._tail_int(ks.astype(np.int64)), g))
        K = float(TABLE_MAX)
        # integral_K^inf (log u + 1) c u^-1 log^{-p-1} u du, plus EM half-term
        rem = self.c * (
            math.log(K) ** (1.0 - self.p) / (self.p - 1.0)
            + math.log(K) ** (-self.p) / self.p
        )
        gK = (K + 1.0) * math.log(K + 1.0) - K * math.log(K)
        return part + rem + 0.5 * float(self._raw(K)) * gK

    def _invert_beyond(self, v: float) -> int:
        # iterate u = c / (v log^{p+1} u)
        u = max(self.c / v, 4.0)
        for _ in range(40):
            u = self.c / (v * math.log(u) ** (self.p + 1.0))
        return _refine_inverse(self, v, u)


def make_log_corrected_index_one(p: float, x0: int = 3, c: float = 1.0) -> OffspringLaw:
    """Law with tail c * k^-1 (log k)^-(p+1) beyond x0 and a uniform head.

    p > 1 keeps E xi log xi finite (verified numerically at construction
    via partial summation plus a tail-integral remainder).
    """
    return LogCorrectedLaw(p, x0, c)


# ======================================================================
# Integer log-normal family: xi = ceil(exp(mu + sigma N(0,1)))
# ======================================================================


class LogNormalIntegerLaw(OffspringLaw):
    family = "lognormal"

    def __init__(self, mu: float = 0.0, sigma: float = 1.5):
        super().__init__()
        if not sigma > 0.0:
            raise BadParam(f"lognormal sigma must be positive, got {sigma}")
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.params = {"mu": self.mu, "sigma": self.sigma}
        self.mean_m = self._moment_sum(order=1)
        ex2 = self._moment_sum(order=2)
        self.variance = ex2 - self.mean_m**2
        _check_supercritical(self)

    def _sf(self, u):
        return special.ndtr(-(np.log(u) - self.mu) / self.sigma)

    def _partial_int(self, K: float, n: int) -> float:
        # E[Y^n; Y > K] for Y lognormal(mu, sigma)
        z = (math.log(K) - self.mu - n * self.sigma**2) / self.sigma
        return math.exp(n * self.mu + 0.5 * n**2 * self.sigma**2) * float(special.ndtr(-z))

    def _moment_sum(self, order: int) -> float:
        def term(ks):
            t = np.ones(len(ks))
            pos = ks >= 1
            t[pos] = self._sf(ks[pos].astype(np.float64))
            return t if order == 1 else (2.0 * ks + 1.0) * t

        def remainder(K):
            Kf = float(K)
            sf = float(self._sf(Kf))
            if order == 1:
                r = self._partial_int(Kf, 1) - Kf * sf
            else:
                r = (self._partial_int(Kf, 2) - Kf**2 * sf) + (self._partial_int(Kf, 1) - Kf * sf)
            return r + 0.5 * float(term(np.array([K], dtype=np.int64))[0])

        return _sum_tail_with_remainder(term, remainder)

    def _tail_int(self, k):
        ks = np.asarray(k, dtype=np.float64)
        out = self._sf(np.maximum(ks, 1.0))
        return np.where(ks < 1, 1.0, out)

    def tail_smooth(self, u):
        us = np.asarray(u, dtype=np.float64)
        out = self._sf(np.maximum(us, 1.0))
        return np.where(us < 1, 1.0, out)

    def tail_integral_smooth(self, lo: float) -> float:
        lo = max(lo, 1.0)
        return self._partial_int(lo, 1) - lo * float(self._sf(lo))

    def _invert_beyond(self, v: float) -> int:
        # isf of the normal: -ndtri(v) stays accurate for tiny v
        guess = math.exp(self.mu - self.sigma * float(special.ndtri(v)))
        return _refine_inverse(self, v, guess)


def make_lognormal_integer(mu: float = 0.0, sigma: float = 1.5) -> OffspringLaw:
    """Integer log-normal law, xi = ceil(Y) with log Y ~ N(mu, sigma^2)."""
    return LogNormalIntegerLaw(mu, sigma)


# ======================================================================
# Finite support (exact-oracle substrate)
# ======================================================================


class FiniteSupportLaw(OffspringLaw):
    family = "finite"

    def __init__(self, pmf_pairs):
        super().__init__()
        pairs = sorted((int(k), float(p)) for k, p in pmf_pairs)
        if not pairs:
            raise BadPmf("empty pmf")
        if any(k < 0 for k, _ in pairs):
            raise BadPmf("finite-support atoms must be nonnegative integers")
        if any(p < 0 for _, p in pairs):
            raise BadPmf("negative probability mass")
        if len({k for k, _ in pairs}) != len(pairs):
            raise BadPmf("duplicate atoms in pmf")
        s = math.fsum(p for _, p in pairs)
        if abs(s - 1.0) > 1e-15:
            raise BadPmf(f"pmf sums to {s!r}, not 1 within 1e-15")
        pairs = [(k, p / s) for k, p in pairs if p > 0.0]
        self.atoms = np.array([k for k, _ in pairs], dtype=np.int64)
        self.probs = np.array([p for _, p in pairs])
        self.params = {"pmf": {int(k): float(p) for k, p in pairs}}
        self.support_max = int(self.atoms[-1])
        self.mean_m = float(np.dot(self.atoms, self.probs))
        ex2 = float(np.dot(self.atoms.astype(np.float64) ** 2, self.probs))
        self.variance = ex2 - self.mean_m**2
        self._cum_from_above = np.concatenate(
            [np.cumsum(self.probs[::-1])[::-1], [0.0]]
        )  # mass at atoms >= atoms[i]
        _check_supercritical(self)

    def _tail_int(self, k):
        # clip before the int cast: beyond-support floats may not fit int64
        ks = np.minimum(np.asarray(k, dtype=np.float64), self.support_max + 1.0)
        idx = np.searchsorted(self.atoms, ks.astype(np.int64), side="right")
        return self._cum_from_above[idx]

    def _pmf_int(self, k):
        ks = np.atleast_1d(np.asarray(k, dtype=np.int64))
        idx = np.searchsorted(self.atoms, ks)
        idx_c = np.minimum(idx, len(self.atoms) - 1)
        hit = self.atoms[idx_c] == ks
        return np.where(hit, self.probs[idx_c], 0.0)

    def tail_smooth(self, u):
        return self.tail(u)

    def tail_integral_smooth(self, lo: float) -> float:
        ks = np.arange(max(int(math.floor(lo)), 0), self.support_max + 1)
        t = self._tail_int(ks)
        lengths = np.minimum(ks + 1.0, self.support_max + 1.0) - np.maximum(ks, lo)
        return float(np.dot(t, np.maximum(lengths, 0.0)))

    @property
    def spec_string(self) -> str:
        inner = ", ".join(f"{int(k)}:{p!r}" for k, p in zip(self.atoms, self.probs))
        return f"finite({inner})"


def make_finite_support(pmf_pairs) -> OffspringLaw:
    """Exact finite law from (atom, probability) pairs or a dict."""
    if isinstance(pmf_pairs, dict):
        pmf_pairs = list(pmf_pairs.items())
    return FiniteSupportLaw(pmf_pairs)


# ======================================================================
# Free-function mirrors of the per-law operations
# ======================================================================


def tail(law: OffspringLaw, x):
    return law.tail(x)


def hazard(law: OffspringLaw, x):
    return law.hazard(x)


def pmf(law: OffspringLaw, k):
    return law.pmf(k)


def truncated_moment(law: OffspringLaw, order, cutoff):
    return law.truncated_moment(order, cutoff)


def sample(law: OffspringLaw, rng: np.random.Generator, size=None):
    return law.sample(rng, size)


# ======================================================================
# Mean tuning
# ======================================================================

# family -> (free parameter, whether mean increases with it)
_TUNABLE = {
    "pareto": ("scale", True),
    "weibull": ("c", False),
    "logcorr": ("c", True),
    "lognormal": ("mu", True),
}

_FACTORIES = {
    "pareto": make_pareto_integer,
    "weibull": make_discrete_weibull,
    "logcorr": make_log_corrected_index_one,
    "lognormal": make_lognormal_integer,
    "finite": make_finite_support,
}


def _construct_quiet(family, params):
    try:
        return _FACTORIES[family](**params), None
    except SubcriticalMean as err:
        return None, err


def tune_to_mean(family: str, target_m: float, **params) -> OffspringLaw:
    """Adjust the family's designated free parameter until mean = target_m.

    Bisection on the free parameter (scale for pareto, c for weibull and
    logcorr, mu for lognormal) to relative tolerance 1e-9 on the mean.
    """
    if target_m <= 1.0:
        raise BadParam(f"target mean must exceed 1, got {target_m}")
    if family not in _TUNABLE:
        raise BadParam(f"family {family!r} has no tunable parameter")
    pname, increasing = _TUNABLE[family]
    params = dict(params)
    start = float(params.pop(pname, 1.0))
    additive = family == "lognormal"

    last = {}

    def mean_at(v):
        law, _ = _construct_quiet(family, {**params, pname: v})
        last[v] = law
        # a subcritical construction means the mean fell at or below 1
        return law.mean_m if law is not None else 1.0

    def toward_smaller_mean(v):
        if additive:
            return v - 1.0
        return v / 2.0 if increasing else v * 2.0

    def toward_larger_mean(v):
        if additive:
            return v + 1.0
        return v * 2.0 if increasing else v / 2.0

    a = b = start  # mean(a) <= target <= mean(b)
    for _ in range(200):
        if mean_at(a) <= target_m:
            break
        a = toward_smaller_mean(a)
    else:
        raise BadParam(f"could not bracket target mean {target_m} for {family}")
    for _ in range(200):
        if mean_at(b) >= target_m:
            break
        b = toward_larger_mean(b)
    else:
        raise BadParam(f"target mean {target_m} is unreachable for {family}")
    for _ in range(200):
        mid = 0.5 * (a + b)
        m_mid = mean_at(mid)
        if abs(m_mid - target_m) <= 1e-9 * target_m and last[mid] is not None:
            return last[mid]
        if m_mid < target_m:
            a = mid
        else:
            b = mid
    raise NoConvergence(f"tune_to_mean failed to reach {target_m} for {family}")


# ======================================================================
# Law specification grammar
# ======================================================================

_TOKEN_RE = re.compile(r"\s*([A-Za-z_][A-Za-z_0-9]*|[-+]?\d+\.?\d*(?:[eE][-+]?\d+)?|[(),:=])")


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r} in law spec", pos)
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    return tokens


class _LawParser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def next(self, expect=None):
        if self.i >= len(self.tokens):
            raise ParseError(f"unexpected end of law spec {self.text!r}", len(self.text))
        tok, pos = self.tokens[self.i]
        self.i += 1
        if expect is not None and tok != expect:
            raise ParseError(f"expected {expect!r} but found {tok!r} in law spec", pos)
        return tok, pos

    def parse(self) -> OffspringLaw:
        law = self.parse_call()
        if self.i != len(self.tokens):
            tok, pos = self.tokens[self.i]
            raise ParseError(f"trailing token {tok!r} in law spec", pos)
        return law

    def parse_family(self):
        """Parse ``family(args)`` into (name, kwargs) without constructing."""
        name, pos = self.next()
        if not name.isidentifier():
            raise ParseError(f"expected a family name, found {name!r}", pos)
        if name == "tuned":
            raise ParseError("tuned(...) cannot be nested inside tuned(...)", pos)
        self.next("(")
        if name == "finite":
            pairs = []
            while self.peek() != ")":
                k = self.parse_number()
                self.next(":")
                p = self.parse_number()
                pairs.append((k, p))
                if self.peek() == ",":
                    self.next(",")
            self.next(")")
            return name, {"pmf_pairs": pairs}
        if name not in _FACTORIES:
            raise ParseError(f"unknown law family {name!r}", pos)
        kwargs = {}
        while self.peek() != ")":
            key, kpos = self.next()
            if not key.isidentifier():
                raise ParseError(f"expected parameter name, found {key!r}", kpos)
            self.next("=")
            kwargs[key] = self.parse_number()
            if self.peek() == ",":
                self.next(",")
        self.next(")")
        return name, kwargs

    def parse_number(self):
        tok, pos = self.next()
        try:
            return int(tok)
        except ValueError:
            try:
                return float(tok)
            except ValueError:
                raise ParseError(f"expected a number, found {tok!r}", pos) from None

    def parse_call(self) -> OffspringLaw:
        if self.peek() == "tuned":
            pos = self.tokens[self.i][1]
            self.next()
            self.next("(")
            name, kwargs = self.parse_family()
            self.next(",")
            key, kpos = self.next()
            if key != "m":
                raise ParseError(f"tuned(...) takes m=<target>, found {key!r}", kpos)
            self.next("=")
            target = self.parse_number()
            self.next(")")
            if name == "finite":
                raise ParseError("finite(...) has no tunable parameter", pos)
            return tune_to_mean(name, float(target), **kwargs)
        name, kwargs = self.parse_family()
        pos = 0
        try:
            if name == "finite":
                return make_finite_support(kwargs["pmf_pairs"])
            return _FACTORIES[name](**kwargs)
        except TypeError as err:
            raise ParseError(f"bad parameters for {name}: {err}", pos) from None


def parse_law_spec(text: str) -> OffspringLaw:
    """Build a law from the grammar, e.g. ``tuned(pareto(alpha=2), m=2)``."""
    return _LawParser(text).parse()
