"""Galton-Watson trajectory simulation with big-jump event tracking.

Simulation is exact: generation sizes follow the exact offspring law and
per-generation offspring maxima are exact.  Two interchangeable sampling
modes produce identical laws for every recorded statistic:

* small generations draw each individual's offspring by inverse CDF;
* large generations split the population into "head" counts (a multinomial
  histogram over 0..head_k) plus individually drawn tail exceeders.

Sums, maxima and threshold exceedances are symmetric functions of the
offspring multiset, so the histogram mode is exactly equidistributed with
per-individual sampling while costing O(head_k) per generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadParam, PopulationOverflow
from .offspring import OffspringLaw

__all__ = [
    "TrajectoryRecord",
    "EventFlags",
    "simulate",
    "simulate_with_events",
    "simulate_forced_jump",
    "simulate_batch",
]

I64_MAX = np.iinfo(np.int64).max
# flat per-individual sampling below this size, histogram mode above
_SMALL_LIMIT = 256
# rows at least this large go through the exact python-int path
_PY_ROW_LIMIT = 1 << 50
# refuse transitions that would need more exact tail draws than this
_TAIL_DRAW_BUDGET = 1 << 28


@dataclass
class TrajectoryRecord:
    """One simulated path Z_0..Z_n with per-generation maxima."""

    sizes: list            # exact generation sizes, ints
    w_values: list         # W_k = Z_k / m^k, recomputed per generation
    gen_max_offspring: list
    extinct_at: int | None
    seed: str
    capped_at: int | None = None


@dataclass
class EventFlags:
    """Flags of the events B_k(x) and A_k(x) along one trajectory."""

    b_k_holds: tuple
    a_k_fired: tuple
    threshold_x: float
    eps: float
    threshold_factor: float = field(default=1.0)


# ----------------------------------------------------------------------
# batched one-generation transition
# ----------------------------------------------------------------------


def _segment_rows(draws, starts):
    """Row sums and maxima of a flat draw array split at ``starts``.

    Returns int64 (sums, maxs) plus a dict {row: exact python-int sum}
    for rows whose float shadow exceeded 2^62 (where int64 could wrap).
    """
    sums = np.add.reduceat(draws, starts)
    maxs = np.maximum.reduceat(draws, starts)
    shadow = np.add.reduceat(draws.astype(np.float64), starts)
    exact = {}
    risky = np.nonzero(shadow > float(1 << 62))[0]
    if len(risky):
        ends = np.append(starts[1:], len(draws))
        for i in risky:
            exact[int(i)] = sum(int(v) for v in draws[starts[i] : ends[i]])
    return sums, maxs, exact


def _transition_row_python(law, rng, z):
    """Exact one-row transition for huge populations, python integers."""
    head_k, cond, pr = law._head
    b = int(rng.binomial(z, pr)) if pr > 0.0 else 0
    counts = rng.multinomial(z - b, cond)
    total = sum(int(c) * k for k, c in enumerate(counts))
    nz = np.nonzero(counts)[0]
    gen_max = int(nz[-1]) if len(nz) else 0
    if b:
        if b > _TAIL_DRAW_BUDGET:
            raise PopulationOverflow(
                f"generation of size {z} needs {b} exact tail draws; "
                "beyond the exact-simulation budget"
            )
        draws = law._tail_quantile(rng.random(b) * pr)
        total += sum(int(v) for v in draws)
        gen_max = max(gen_max, int(draws.max()))
    return total, gen_max


def _transition(law: OffspringLaw, rng: np.random.Generator, z: np.ndarray):
    """One generation for a vector of populations.

    Returns (z_next int64, gen_max int64, overflow bool).  Rows that
    would exceed the 63-bit limit get overflow=True and z_next=I64_MAX.
    Draw order is a fixed function of z, so results are reproducible.
    """
    z = np.asarray(z, dtype=np.int64)
    n_rows = len(z)
    z_next = np.zeros(n_rows, dtype=np.int64)
    gen_max = np.zeros(n_rows, dtype=np.int64)
    overflow = np.zeros(n_rows, dtype=bool)

    huge = z >= _PY_ROW_LIMIT
    for i in np.nonzero(huge)[0]:
        total, gm = _transition_row_python(law, rng, int(z[i]))
        if total > I64_MAX:
            overflow[i] = True
            z_next[i] = I64_MAX
        else:
            z_next[i] = total
        gen_max[i] = min(gm, I64_MAX)

    small = (z > 0) & (z <= _SMALL_LIMIT)
    if small.any():
        zs = z[small]
        idx = np.nonzero(small)[0]
        draws = law._tail_quantile(rng.random(int(zs.sum())))
        starts = np.concatenate([[0], np.cumsum(zs)[:-1]])
        sums, maxs, exact = _segment_rows(draws, starts)
        z_next[idx] = sums
        gen_max[idx] = maxs
        for j, tot in exact.items():
            if tot > I64_MAX:
                overflow[idx[j]] = True
                z_next[idx[j]] = I64_MAX
            else:
                z_next[idx[j]] = tot

    large = (z > _SMALL_LIMIT) & ~huge
    if large.any():
        head_k, cond, pr = law._head
        zl = z[large]
        idx = np.nonzero(large)[0]
        if pr > 0.0:
            b = rng.binomial(zl, pr)
        else:
            b = np.zeros(len(zl), dtype=np.int64)
        counts = rng.multinomial(zl - b, cond)
        ks = np.arange(head_k + 1, dtype=np.int64)
        sums = counts @ ks  # zl < 2^50 and head_k <= 512: no wrap possible
        nonzero = counts > 0
        has_head = nonzero.any(axis=1)
        last_nz = head_k - np.argmax(nonzero[:, ::-1], axis=1)
        hmax = np.where(has_head, last_nz, 0)
        total_b = int(b.sum())
        if total_b > _TAIL_DRAW_BUDGET:
            raise PopulationOverflow(
                f"{total_b} exact tail draws requested in one generation; "
                "beyond the exact-simulation budget"
            )
        if total_b:
            draws = law._tail_quantile(rng.random(total_b) * pr)
            rows = b > 0
            rows_idx = np.nonzero(rows)[0]
            starts = np.concatenate([[0], np.cumsum(b[rows])[:-1]])
            tsums, tmaxs, exact = _segment_rows(draws, starts)
            tail_sum = np.zeros(len(zl), dtype=np.int64)
            tail_max = np.zeros(len(zl), dtype=np.int64)
            tail_sum[rows] = tsums
            tail_max[rows] = tmaxs
            # head sums < 2^59 and non-risky tail sums < 2^62: no wrap
            z_next[idx] = sums + tail_sum
            gen_max[idx] = np.maximum(hmax, tail_max)
            for j, tot in exact.items():
                row = rows_idx[j]
                total = int(sums[row]) + tot
                if total > I64_MAX:
                    overflow[idx[row]] = True
                    z_next[idx[row]] = I64_MAX
                else:
                    z_next[idx[row]] = total
        else:
            z_next[idx] = sums
            gen_max[idx] = hmax
    return z_next, gen_max, overflow


# ----------------------------------------------------------------------
# public simulation entry points
# ----------------------------------------------------------------------


def _check_cap(population_cap):
    cap = I64_MAX if population_cap is None else int(population_cap)
    if not 1 <= cap <= I64_MAX:
        raise BadParam(f"population_cap must be in [1, 2^63-1], got {population_cap}")
    return cap


def simulate(
    law: OffspringLaw,
    n: int,
    rng: np.random.Generator,
    population_cap=None,
    stream_id: str = "",
) -> TrajectoryRecord:
    """Simulate Z_0=1, ..., Z_n exactly; raises PopulationOverflow on 63-bit excess."""
    if n < 0:
        raise BadParam("generation count must be nonnegative")
    cap = _check_cap(population_cap)
    m = law.mean_m
    sizes = [1]
    w_values = [1.0]
    maxima = []
    capped_at = None
    z = np.array([1], dtype=np.int64)
    for k in range(n):
        z, gmax, over = _transition(law, rng, z)
        if over[0]:
            raise PopulationOverflow(
                f"generation {k + 1} exceeded the 63-bit population limit"
            )
        zi = int(z[0])
        if capped_at is None and zi > cap:
            capped_at = k + 1
        sizes.append(zi)
        maxima.append(int(gmax[0]))
        w_values.append(zi / m ** (k + 1))
        if zi == 0:
            # extinct: remaining generations are deterministically zero
            for j in range(k + 1, n):
                sizes.append(0)
                maxima.append(0)
                w_values.append(0.0)
            break
    extinct = next((i for i, s in enumerate(sizes) if s == 0), None)
    return TrajectoryRecord(
        sizes=sizes,
        w_values=w_values,
        gen_max_offspring=maxima,
        extinct_at=extinct,
        seed=stream_id,
        capped_at=capped_at,
    )


def simulate_with_events(
    law: OffspringLaw,
    n: int,
    x: float,
    eps: float,
    rng: np.random.Generator,
    threshold_factor: float | None = None,
    population_cap=None,
    stream_id: str = "",
):
    """Simulate and track B_k(x) = {Z_j <= m^j x, j <= k} and the jump events
    A_k(x) = {B_k(x), some offspring in generation k exceeds factor * m^(k+1) x}.

    ``threshold_factor`` defaults to (1 + eps); the alternative (1 - eps)
    convention can be selected explicitly.
    """
    if x <= 0.0:
        raise BadParam("event threshold x must be positive")
    if eps < 0.0:
        raise BadParam("eps must be nonnegative")
    factor = (1.0 + eps) if threshold_factor is None else float(threshold_factor)
    rec = simulate(law, n, rng, population_cap=population_cap, stream_id=stream_id)
    m = law.mean_m
    b_flags = []
    a_flags = []
    b = True
    for k in range(n):
        b = b and rec.sizes[k] <= m**k * x
        b_flags.append(b)
        t_k = factor * m ** (k + 1) * x
        fired = b and k < len(rec.gen_max_offspring) and rec.gen_max_offspring[k] > t_k
        a_flags.append(bool(fired))
    flags = EventFlags(
        b_k_holds=tuple(b_flags),
        a_k_fired=tuple(a_flags),
        threshold_x=float(x),
        eps=float(eps),
        threshold_factor=factor,
    )
    return rec, flags


def simulate_forced_jump(
    law: OffspringLaw,
    n: int,
    k: int,
    jump_threshold: float,
    rng: np.random.Generator,
    population_cap=None,
    stream_id: str = "",
) -> TrajectoryRecord:
    """Simulate with one generation-k individual forced above jump_threshold.

    Generations 0..k evolve normally; one individual of generation k (if
    any are alive) has its offspring count replaced by a draw from
    xi | xi > jump_threshold; the process then continues normally.
    """
    if not 0 <= k < n:
        raise BadParam(f"jump generation must satisfy 0 <= k < n, got k={k}, n={n}")
    cap = _check_cap(population_cap)
    m = law.mean_m
    sizes = [1]
    w_values = [1.0]
    maxima = []
    capped_at = None
    z = np.array([1], dtype=np.int64)
    for j in range(n):
        if j == k and int(z[0]) > 0:
            zj = int(z[0])
            rest = np.array([zj - 1], dtype=np.int64)
            if zj > 1:
                z_rest, gmax_rest, over = _transition(law, rng, rest)
            else:
                z_rest = np.array([0], dtype=np.int64)
                gmax_rest = np.array([0], dtype=np.int64)
                over = np.array([False])
            jump = int(law.sample_conditional_tail(rng, jump_threshold))
            total = int(z_rest[0]) + jump
            if over[0] or total > I64_MAX:
                raise PopulationOverflow(
                    f"generation {j + 1} exceeded the 63-bit population limit"
                )
            z = np.array([total], dtype=np.int64)
            gmax = np.array([max(int(gmax_rest[0]), jump)], dtype=np.int64)
        else:
            z, gmax, over = _transition(law, rng, z)
            if over[0]:
                raise PopulationOverflow(
                    f"generation {j + 1} exceeded the 63-bit population limit"
                )
        zi = int(z[0])
        if capped_at is None and zi > cap:
            capped_at = j + 1
        sizes.append(zi)
        maxima.append(int(gmax[0]))
        w_values.append(zi / m ** (j + 1))
        if zi == 0 and j >= k:
            for jj in range(j + 1, n):
                sizes.append(0)
                maxima.append(0)
                w_values.append(0.0)
            break
    extinct = next((i for i, s in enumerate(sizes) if s == 0), None)
    return TrajectoryRecord(
        sizes=sizes,
        w_values=w_values,
        gen_max_offspring=maxima,
        extinct_at=extinct,
        seed=stream_id,
        capped_at=capped_at,
    )


def simulate_batch(
    law: OffspringLaw,
    n: int,
    replicas: int,
    rng: np.random.Generator,
    population_cap=None,
):
    """Vectorised simulation of many replicas.

    Returns (sizes, overflowed): ``sizes`` is an int64 array of shape
    (replicas, n+1) of exact generation sizes; rows that hit the 63-bit
    limit are frozen at the failing generation and flagged in
    ``overflowed``.  W values follow as sizes / m**k.
    """
    if n < 0:
        raise BadParam("generation count must be nonnegative")
    _check_cap(population_cap)
    sizes = np.zeros((replicas, n + 1), dtype=np.int64)
    sizes[:, 0] = 1
    overflowed = np.zeros(replicas, dtype=bool)
    z = np.ones(replicas, dtype=np.int64)
    for k in range(n):
        alive = (z > 0) & ~overflowed
        if alive.any():
            znew, _, over = _transition(law, rng, z[alive])
            z_next = z.copy()
            z_next[alive] = znew
            new_over = np.zeros(replicas, dtype=bool)
            new_over[alive] = over
            overflowed |= new_over
            z = z_next
        # overflowed rows stay pinned at the sentinel from here on
        sizes[:, k + 1] = np.where(overflowed, I64_MAX, z)
    return sizes, overflowed
