"""Rare-event estimators for P{W_n > x}.

Three routes with very different variance/exactness trade-offs:

* ``naive_mc``          - plain trajectory counting, binomial error;
* ``exact_convolution`` - exact distribution of Z_n for finite laws
  (dynamic programming over generation pmfs), zero variance;
* ``big_jump_estimator`` - the jump decomposition over disjoint events
  A_k(x) = {typical prefix, one offspring in generation k above
  m^(k+1)(1+eps)x}: stage one weights trajectories by the analytic
  conditional jump probability 1 - (1 - F(t_k))^(Z_k) (no rare sampling
  at all), stage two forces the jump and measures survival.

Replicas are simulated in fixed-size blocks, one splittable stream per
block, so results are bit-identical for a given (config, seed) no matter
how many workers participate.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics
from .errors import BadParam, TooLarge
from .offspring import FiniteSupportLaw, OffspringLaw
from .rng import BLOCK, as_streams
from .simulator import I64_MAX, _transition, simulate_batch

__all__ = [
    "EstimatorResult",
    "naive_mc",
    "exact_convolution",
    "big_jump_estimator",
    "compare_to_asymptotics",
    "ComparisonRow",
]

_DOMAIN_NAIVE = 0x4E41
_DOMAIN_BIGJUMP = 0x424A

_Z95 = 1.959963984540054


@dataclass
class EstimatorResult:
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    replicas_used: int
    method: str
    per_generation_breakdown: list | None = None
    overflowed: int = 0
    note: str = ""

    def __post_init__(self):
        if not 0.0 <= self.estimate <= 1.0:
            raise ValueError("estimate must lie in [0, 1]")
        if not self.ci_low <= self.estimate <= self.ci_high:
            raise ValueError("CI must bracket the estimate")


def _binomial_result(hits, replicas, method, overflowed=0, note=""):
    p = hits / replicas
    se = math.sqrt(max(p * (1.0 - p), 0.0) / replicas)
    if hits == 0:
        # rule-of-three upper limit when nothing was observed
        lo, hi = 0.0, min(3.0 / replicas, 1.0)
    else:
        lo = max(p - _Z95 * se, 0.0)
        hi = min(p + _Z95 * se, 1.0)
    return EstimatorResult(
        estimate=p,
        std_error=se,
        ci_low=lo,
        ci_high=hi,
        replicas_used=replicas,
        method=method,
        overflowed=overflowed,
        note=note,
    )


def _naive_block(law, n, threshold, start_block, n_blocks, block_sizes, streams, cap):
    hits = 0
    over_n = 0
    for b in range(start_block, start_block + n_blocks):
        g = streams.stream(_DOMAIN_NAIVE, b)
        sizes, over = simulate_batch(law, n, block_sizes[b], g, population_cap=cap)
        z_n = sizes[:, n].astype(np.float64)
        hits += int(np.sum((z_n > threshold) | over))
        over_n += int(over.sum())
    return hits, over_n


def naive_mc(
    law: OffspringLaw,
    n: int,
    x: float,
    replicas: int,
    rng,
    population_cap=None,
    workers: int = 1,
) -> EstimatorResult:
    """Fraction of trajectories with W_n > x, with binomial error bars.

    Replicas that hit the 63-bit population limit are conservatively
    counted as exceedances and reported in ``overflowed``.
    """
    if replicas < 100:
        raise BadParam("naive_mc needs at least 100 replicas")
    if n < 0 or x < 0.0:
        raise BadParam("need n >= 0 and x >= 0")
    streams = as_streams(rng)
    threshold = law.mean_m**n * x
    n_blocks = (replicas + BLOCK - 1) // BLOCK
    block_sizes = [min(BLOCK, replicas - b * BLOCK) for b in range(n_blocks)]
    if workers > 1 and n_blocks > 1:
        per = (n_blocks + workers - 1) // workers
        tasks = [(b0, min(per, n_blocks - b0)) for b0 in range(0, n_blocks, per)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _naive_block, law, n, threshold, b0, nb, block_sizes, streams,
                    population_cap,
                )
                for b0, nb in tasks
            ]
            parts = [f.result() for f in futures]
        hits = sum(p[0] for p in parts)
        over = sum(p[1] for p in parts)
    else:
        hits, over = _naive_block(
            law, n, threshold, 0, n_blocks, block_sizes, streams, population_cap
        )
    note = f"{over} replicas overflowed and were counted as exceedances" if over else ""
    return _binomial_result(hits, replicas, "NaiveMC", overflowed=over, note=note)


def exact_convolution(law: OffspringLaw, n: int, threshold: int) -> EstimatorResult:
    """Exact P{Z_n > threshold} by generation-wise pmf self-composition."""
    if not isinstance(law, FiniteSupportLaw):
        raise BadParam("exact_convolution needs a finite-support law")
    if n < 0:
        raise BadParam("n must be nonnegative")
    s = law.support_max
    if s >= 2 and n * math.log(s) > math.log(1e8):
        raise TooLarge(f"support^n = {s}^{n} exceeds the 1e8-entry guard")
    pmf = np.zeros(s + 1)
    pmf[law.atoms] = law.probs
    dist = np.zeros(2)
    dist[1] = 1.0  # Z_0 = 1
    for _ in range(n):
        # Z_{k+1} | Z_k = j is the j-fold self-convolution of the pmf
        new = np.zeros((len(dist) - 1) * s + 1 if len(dist) > 1 else 1)
        conv = np.array([1.0])  # pmf^{*0}
        for j, pj in enumerate(dist):
            if pj > 0.0:
                new[: len(conv)] += pj * conv
            if j < len(dist) - 1:
                conv = np.convolve(conv, pmf)
        dist = new
    p = float(dist[int(threshold) + 1 :].sum()) if threshold < len(dist) else 0.0
    p = min(max(p, 0.0), 1.0)
    return EstimatorResult(
        estimate=p,
        std_error=0.0,
        ci_low=p,
        ci_high=p,
        replicas_used=0,
        method="ExactConvolution",
    )


def _stage_weights(law, k, x, t_k, replicas, g):
    """Simulate generations 0..k; weight = 1{B_k} (1 - (1 - F(t_k))^(Z_k))."""
    sizes, over = simulate_batch(law, k, replicas, g)
    m = law.mean_m
    b_holds = ~over
    for j in range(k + 1):
        b_holds &= sizes[:, j].astype(np.float64) <= m**j * x
    z_k = sizes[:, k]
    f_t = law.tail(t_k)
    with np.errstate(invalid="ignore"):
        w = -np.expm1(z_k.astype(np.float64) * math.log1p(-f_t))
    w = np.where(z_k == 1, f_t, w)  # 1 - (1-F)^1 = F exactly
    w = np.where(b_holds & (z_k > 0), w, 0.0)
    return w, z_k


def big_jump_estimator(
    law: OffspringLaw,
    n: int,
    x: float,
    eps: float,
    replicas_per_k: int,
    rng,
    population_cap=None,
) -> EstimatorResult:
    """Sum over k of P{A_k(x)} * P{Z_n > m^n x | A_k(x)}.

    Per generation k (independent streams for the two stages):

    1. P{A_k}: unconditional trajectories to generation k; trajectories
       violating B_k(x) get weight 0, the rest the analytic conditional
       jump probability, so no rare event is ever sampled.
    2. P{survive | A_k}: fresh trajectories, one generation-k individual
       forced above t_k = m^(k+1)(1+eps)x, continued to generation n;
       survival is averaged under the stage-one weights
       (self-normalised), and the product gets a delta-method error.
    """
    if n < 1:
        raise BadParam("n must be at least 1")
    if x <= 0.0:
        raise BadParam("x must be positive")
    if eps < 0.0:
        raise BadParam("eps must be nonnegative")
    if replicas_per_k < 100:
        raise BadParam("big_jump_estimator needs at least 100 replicas per k")
    streams = as_streams(rng)
    m = law.mean_m
    r = replicas_per_k
    breakdown = []
    variances = []
    notes = []
    threshold = m**n * x
    for k in range(n):
        t_k = m ** (k + 1) * (1.0 + eps) * x
        if law.tail(t_k) <= 0.0:
            breakdown.append(0.0)
            variances.append(0.0)
            notes.append(f"k={k}: conditional tail empty at t={t_k:.3g}")
            continue
        g1 = streams.stream(_DOMAIN_BIGJUMP, k, 0)
        w1, _ = _stage_weights(law, k, x, t_k, r, g1)
        if w1.min() == w1.max():  # constant weights (k = 0): mean is exact
            a_hat, var_a = float(w1[0]), 0.0
        else:
            a_hat = float(w1.mean())
            var_a = float(w1.var(ddof=1)) / r if r > 1 else 0.0
        if a_hat <= 0.0:
            breakdown.append(0.0)
            variances.append(0.0)
            notes.append(f"k={k}: no B_k trajectories at x={x:g}")
            continue

        g2 = streams.stream(_DOMAIN_BIGJUMP, k, 1)
        w2, z_k2 = _stage_weights(law, k, x, t_k, r, g2)
        alive = w2 > 0.0
        n_alive = int(alive.sum())
        if n_alive == 0:
            breakdown.append(0.0)
            variances.append(0.0)
            notes.append(f"k={k}: no stage-two trajectories alive")
            continue
        jumps = law.sample_conditional_tail(g2, t_k, size=n_alive)
        z = z_k2[alive] - 1
        z_next, _, over = _transition(law, g2, z)
        survived_by_overflow = over.copy()
        z = np.where(over, I64_MAX, z_next + jumps)
        for j in range(k + 1, n):
            live = ~survived_by_overflow
            if not live.any():
                break
            z_new, _, over_j = _transition(law, g2, z[live])
            zz = z.copy()
            zz[live] = z_new
            z = zz
            grew = np.zeros(len(z), dtype=bool)
            grew[live] = over_j
            survived_by_overflow |= grew
        surv = (z.astype(np.float64) > threshold) | survived_by_overflow
        wa = w2[alive]
        w_sum = float(wa.sum())
        if surv.all() or not surv.any():
            p_hat = float(surv[0])  # constant outcome: the average is exact
            var_p = 0.0
        else:
            p_hat = float(np.dot(wa, surv)) / w_sum
            resid = wa * (surv.astype(np.float64) - p_hat)
            var_p = float(np.dot(resid, resid)) / w_sum**2
        c_k = a_hat * p_hat
        breakdown.append(c_k)
        variances.append(p_hat**2 * var_a + a_hat**2 * var_p)
        if survived_by_overflow.any():
            notes.append(
                f"k={k}: {int(survived_by_overflow.sum())} overflowed continuations "
                "counted as survivors"
            )
    estimate = min(math.fsum(breakdown), 1.0)
    se = math.sqrt(math.fsum(variances))
    return EstimatorResult(
        estimate=estimate,
        std_error=se,
        ci_low=max(estimate - _Z95 * se, 0.0),
        ci_high=min(estimate + _Z95 * se, 1.0),
        replicas_used=2 * n * r,
        method="BigJumpDecomposition",
        per_generation_breakdown=breakdown,
        note="; ".join(notes),
    )


@dataclass
class ComparisonRow:
    n: int
    x: float
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    approximation: float
    ratio: float
    method: str
    estimator: str
    breakdown: list | None = field(default=None, repr=False)


_METHODS = {
    "series": lambda law, n, x: asymptotics.series_tail(law, n, x),
    "series_inf": lambda law, n, x: asymptotics.series_tail_infinite(law, x),
    "weibull": lambda law, n, x: asymptotics.weibull_tail(law, x),
    "index_one": lambda law, n, x: asymptotics.index_one_tail(law, n, x),
}


def compare_to_asymptotics(
    law: OffspringLaw,
    n_list,
    x_list,
    method: str,
    estimator: str,
    budget: int,
    rng,
    eps: float = 0.0,
    population_cap=None,
) -> list:
    """Estimate P{W_n > x} on a grid and tabulate against an approximation.

    ``budget`` is replicas for naive_mc and replicas-per-k for the big
    jump estimator; the exact estimator ignores it.
    """
    if method not in _METHODS:
        raise BadParam(f"unknown method tag {method!r}; choose from {sorted(_METHODS)}")
    if estimator not in {"naive", "bigjump", "exact"}:
        raise BadParam(f"unknown estimator tag {estimator!r}")
    streams = as_streams(rng)
    rows = []
    for n in n_list:
        for x in x_list:
            if estimator == "naive":
                est = naive_mc(law, n, x, budget, streams, population_cap)
            elif estimator == "bigjump":
                est = big_jump_estimator(
                    law, n, x, eps, budget, streams, population_cap
                )
            else:
                est = exact_convolution(law, n, int(math.floor(law.mean_m**n * x)))
            approx = _METHODS[method](law, n, x).value
            rows.append(
                ComparisonRow(
                    n=int(n),
                    x=float(x),
                    estimate=est.estimate,
                    std_error=est.std_error,
                    ci_low=est.ci_low,
                    ci_high=est.ci_high,
                    approximation=approx,
                    ratio=est.estimate / approx if approx > 0.0 else math.nan,
                    method=method,
                    estimator=estimator,
                    breakdown=est.per_generation_breakdown,
                )
            )
    return rows
