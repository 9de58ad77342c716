"""Comparison methods: k-means partition baseline and the exchange-chain MCMC
sampler with a multiple-sequence convergence diagnostic."""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import scipy.linalg

from .coreset import CoreModel, Coreset, Partition, build_core_model, kmeanspp_init
from .errors import InsufficientChains, TooManyParts
from .kernels import KernelMatrix, PointSet

LOGDET_REFRESH = 1000


def kpp_baseline(points: PointSet, kernel: KernelMatrix, m: int, k: int,
                 rng: np.random.Generator) -> CoreModel:
    """Partition by full Lloyd k-means from D^2-weighted seeds; medoid cores.

    Clusters become the parts and each part's core is the member nearest its
    centroid (cores must be ground-set indices, so centroids themselves do
    not qualify). Lloyd runs to center movement below 1e-6 or 100 iterations;
    emptied clusters are reseeded with the point farthest from its center.
    """
    n = points.n
    if m > n:
        raise TooManyParts(f"m={m} parts but only {n} points")
    partition, _ = kmeanspp_init(points, m, rng)
    labels = partition.assignment.copy()
    coords = points.coords
    centers = np.stack([coords[labels == c].mean(axis=0) for c in range(m)])
    for _ in range(100):
        d2 = (np.sum(coords ** 2, axis=1)[:, None]
              + np.sum(centers ** 2, axis=1)[None, :]
              - 2.0 * coords @ centers.T)
        labels = np.argmin(d2, axis=1)
        for c in range(m):
            if not np.any(labels == c):
                worst = int(np.argmax(d2[np.arange(n), labels]))
                labels[worst] = c
        new_centers = np.stack([coords[labels == c].mean(axis=0) for c in range(m)])
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if shift < 1e-6:
            break
    partition = Partition.from_assignment(labels, m)
    cores = []
    for c in range(m):
        mem = partition.members[c]
        dist = np.linalg.norm(coords[mem] - centers[c], axis=1)
        cores.append(int(mem[int(np.argmin(dist))]))
    return build_core_model(kernel, partition, Coreset(np.array(cores, dtype=np.intp)), k)


# -- exchange-chain MCMC ---------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class ChainState:
    """Current size-k subset with a cached log determinant."""

    current: tuple[int, ...]
    log_det: float
    step_count: int


def _log_minor_det(kernel: KernelMatrix, subset) -> float:
    sub = kernel.entries[np.ix_(subset, subset)]
    sign, logdet = np.linalg.slogdet(sub)
    return logdet if sign > 0 else -math.inf


def initial_chain_state(kernel: KernelMatrix, subset) -> ChainState:
    items = tuple(sorted(int(i) for i in subset))
    return ChainState(items, _log_minor_det(kernel, list(items)), 0)


def _conditioned_value(entries: np.ndarray, s: list[int], x: int) -> float:
    if not s:
        return float(entries[x, x])
    block = entries[np.ix_(s, s)]
    cross = entries[s, x]
    try:
        cho = scipy.linalg.cho_factor(block, check_finite=False)
        solved = scipy.linalg.cho_solve(cho, cross, check_finite=False)
        return float(entries[x, x] - cross @ solved)
    except scipy.linalg.LinAlgError:
        return math.nan


def mcmc_kdpp_step(kernel: KernelMatrix, state: ChainState,
                   rng: np.random.Generator) -> ChainState:
    """One exchange proposal: swap a uniform member for a uniform outsider.

    The acceptance ratio det(L_{Y - u + v}) / det(L_Y) is the ratio of the two
    conditioned norms of u and v against the shared remainder Y - u, so only
    one small factorization is needed per proposal.
    """
    n = kernel.n
    k = len(state.current)
    u_pos = int(rng.integers(k))
    u = state.current[u_pos]
    r = int(rng.integers(n - k))
    v = r
    for item in state.current:  # map r onto the r-th index outside Y (sorted)
        if item <= v:
            v += 1
        else:
            break
    remainder = [i for i in state.current if i != u]
    q_u = _conditioned_value(kernel.entries, remainder, u)
    q_v = _conditioned_value(kernel.entries, remainder, v)
    if math.isnan(q_u) or math.isnan(q_v):
        det_cur = math.exp(_log_minor_det(kernel, list(state.current)))
        proposed = sorted(remainder + [v])
        det_new = math.exp(_log_minor_det(kernel, proposed))
        ratio = math.inf if det_cur <= 0 else det_new / det_cur
    else:
        ratio = math.inf if q_u <= 0 else max(q_v, 0.0) / q_u
    steps = state.step_count + 1
    if rng.random() < min(1.0, ratio):
        items = tuple(sorted(remainder + [v]))
        if q_v > 0 and q_u > 0 and not math.isinf(ratio):
            log_det = state.log_det + math.log(q_v) - math.log(q_u)
        else:
            log_det = _log_minor_det(kernel, list(items))
    else:
        items, log_det = state.current, state.log_det
    if steps % LOGDET_REFRESH == 0:
        log_det = _log_minor_det(kernel, list(items))
    return ChainState(items, log_det, steps)


def psrf(traces) -> float:
    """Potential scale reduction factor over the second halves of the traces.

    With W the mean within-chain variance and B/n the variance of the chain
    means, returns sqrt((W (n-1)/n + B/n) / W). Identical constant chains
    give 1 by convention; distinct constants give infinity.
    """
    arr = np.asarray(traces, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise InsufficientChains("need >= 2 equal-length chains")
    if arr.shape[1] < 10:
        raise InsufficientChains(f"chains of length {arr.shape[1]} < 10")
    half = arr[:, arr.shape[1] // 2:]
    n = half.shape[1]
    w = float(np.mean(np.var(half, axis=1, ddof=1)))
    means = half.mean(axis=1)
    b = n * float(np.var(means, ddof=1))
    if w < 1e-300:
        return 1.0 if b < 1e-300 else math.inf
    v = w * (n - 1) / n + b / n
    return float(math.sqrt(v / w))


@dataclasses.dataclass(frozen=True)
class McmcRun:
    items: tuple[int, ...]
    iterations: int
    converged: bool
    psrf: float


def mcmc_sample_until_converged(kernel: KernelMatrix, k: int, n_chains: int,
                                psrf_threshold: float, cap: int,
                                rng: np.random.Generator,
                                check_every: int = 50) -> McmcRun:
    """Run parallel chains until the diagnostic drops below the threshold.

    Returns chain 0's final subset, the iteration count, and a converged
    flag (False when the cap was reached; the sample is still returned).
    The diagnostic statistic is the log determinant of each chain's state.
    """
    if n_chains < 2:
        raise InsufficientChains("need >= 2 chains")
    streams = rng.spawn(n_chains)
    states = [initial_chain_state(kernel, streams[c].choice(kernel.n, size=k, replace=False))
              for c in range(n_chains)]
    traces: list[list[float]] = [[s.log_det] for s in states]
    last = math.inf
    for t in range(1, cap + 1):
        for c in range(n_chains):
            states[c] = mcmc_kdpp_step(kernel, states[c], streams[c])
            traces[c].append(states[c].log_det)
        if t >= 20 and t % check_every == 0:
            last = psrf(traces)
            if last <= psrf_threshold:
                return McmcRun(states[0].current, t, True, last)
    return McmcRun(states[0].current, cap, False, last)
