"""Approximation-error diagnostics.

Everything here is enumeration-grade: exact total variation between the
two-stage law and the true fixed-size DPP, the nonsingularity probability,
the within-part distortion factor and its geometric bound, and the closed
form upper bound on the total variation distance. All exact quantities are
budgeted; beyond budget the report leaves them unset rather than guessing.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np
import scipy.linalg

from .coreset import CoreModel, Coreset, Partition
from .enumeration import (
    batched_minor_dets,
    count_singular_sets,
    k_subsets,
    singular_sets,
)
from .errors import (
    DegenerateConditional,
    EnumerationTooLarge,
    InsufficientChains,  # noqa: F401  (re-exported for report consumers)
)
from .kdpp import build_kdpp, kdpp_sample
from .kernels import KernelMatrix, eigendecompose, elementary_symmetric
from .sampler import enumerate_coredpp_probs

DEFAULT_BUDGET = 2_000_000
CONDITIONAL_FLOOR = 1e-12


def _check_budget(count: int, budget: int, what: str) -> None:
    if count > budget:
        raise EnumerationTooLarge(f"{what}: {count} cases exceed budget {budget}")


def _full_normalizer(kernel: KernelMatrix, k: int) -> float:
    return elementary_symmetric(eigendecompose(kernel).eigenvalues, k)


def tv_exact(kernel: KernelMatrix, model: CoreModel, k: int,
             budget: int = DEFAULT_BUDGET) -> float:
    """Exact total variation (half L1) between the two laws, by enumeration."""
    if k != model.k:
        raise ValueError(f"model built for k={model.k}, asked for k={k}")
    n = kernel.n
    _check_budget(math.comb(n, k), budget, "exact total variation")
    subsets = k_subsets(n, k)
    z = _full_normalizer(kernel, k)
    p = batched_minor_dets(kernel.entries, subsets) / z
    q = enumerate_coredpp_probs(model, subsets)
    return float(0.5 * np.abs(p - q).sum())


def tv_empirical(kernel: KernelMatrix, model: CoreModel, k: int, n_probes: int,
                 rng: np.random.Generator) -> tuple[float, float]:
    """Unbiased estimate of the exact total variation from uniform probes.

    Each probe is a uniform size-k subset; the estimator is half the number
    of subsets times the mean absolute gap, returned with its standard error
    (infinite for a single probe).
    """
    if n_probes < 1:
        raise ValueError("n_probes must be >= 1")
    n = kernel.n
    probes = np.stack([np.sort(rng.choice(n, size=k, replace=False))
                       for _ in range(n_probes)])
    z = _full_normalizer(kernel, k)
    p = batched_minor_dets(kernel.entries, probes) / z
    q = enumerate_coredpp_probs(model, probes)
    gaps = np.abs(p - q)
    scale = 0.5 * math.comb(n, k)
    estimate = float(scale * gaps.mean())
    if n_probes < 2:
        return estimate, math.inf
    stderr = float(scale * gaps.std(ddof=1) / math.sqrt(n_probes))
    return estimate, stderr


def nonsingularity_prob(kernel: KernelMatrix, partition: Partition, k: int,
                        mode: str = "exact", budget: int = DEFAULT_BUDGET,
                        rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Probability that an exact DPP draw collides inside some part.

    Exact mode enumerates singular subsets and returns 1 minus their total
    mass (standard error 0); Monte Carlo mode counts collisions over `budget`
    sampler draws and returns the fraction with its binomial standard error.
    """
    if mode == "exact":
        members = list(partition.members)
        count = count_singular_sets([m.size for m in members], k)
        _check_budget(count, budget, "nonsingularity probability")
        idx = singular_sets(members, k)
        singular_mass = float(batched_minor_dets(kernel.entries, idx).sum()) if idx.size else 0.0
        z = _full_normalizer(kernel, k)
        return min(max(1.0 - singular_mass / z, 0.0), 1.0), 0.0
    if mode == "montecarlo":
        if rng is None:
            raise ValueError("montecarlo mode needs an rng")
        model = build_kdpp(kernel, k)
        hits = 0
        for _ in range(budget):
            draw = kdpp_sample(model, rng)
            parts = partition.assignment[list(draw)]
            hits += int(np.unique(parts).size < len(draw))
        p = hits / budget
        return p, math.sqrt(max(p * (1.0 - p), 0.0) / budget)
    raise ValueError(f"unknown mode {mode!r}")


def _conditioned_norms(entries: np.ndarray, s: np.ndarray,
                       targets: np.ndarray) -> np.ndarray:
    """L_uu - L_uS L_S^{-1} L_Su for every u in targets, given conditioning set S."""
    diag = entries[targets, targets]
    if s.size == 0:
        return diag.copy()
    cross = entries[np.ix_(s, targets)]
    try:
        cho = scipy.linalg.cho_factor(entries[np.ix_(s, s)], check_finite=False)
        solved = scipy.linalg.cho_solve(cho, cross, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise DegenerateConditional(f"conditioning set {s.tolist()} is singular") from exc
    return diag - np.sum(cross * solved, axis=0)


def _complement_sets(partition: Partition, part: int, size: int,
                     budget: int) -> np.ndarray:
    others = [partition.members[c] for c in range(partition.m) if c != part]
    count = count_singular_sets([m.size for m in others], size)
    _check_budget(count, budget, "singular complement enumeration")
    return singular_sets(others, size)


def distortion_exact(kernel: KernelMatrix, partition: Partition, coreset: Coreset,
                     k: int, budget: int = DEFAULT_BUDGET) -> float:
    """Worst within-part ratio of conditioned determinants, minus one.

    Maximizes det(L_{S u {u}}) / det(L_{S u {v}}) over parts, member pairs
    (u, v), and (k-1)-sized singular complements S from the other parts.
    Conditioned denominators below the floor raise: they violate the
    positivity assumption on all size-k minors.
    """
    total_tuples = 0
    for c in range(partition.m):
        others = [partition.members[d] for d in range(partition.m) if d != c]
        n_s = count_singular_sets([m.size for m in others], k - 1)
        total_tuples += n_s * partition.members[c].size ** 2
    _check_budget(total_tuples, budget, "distortion enumeration")

    eps = 0.0
    for c in range(partition.m):
        targets = partition.members[c]
        if targets.size == 0:
            continue
        complements = _complement_sets(partition, c, k - 1, budget)
        for s in complements:
            q = _conditioned_norms(kernel.entries, s, targets)
            q_min = float(q.min())
            if q_min < CONDITIONAL_FLOOR:
                raise DegenerateConditional(
                    f"conditioned norm {q_min:.3g} in part {c} given {s.tolist()}")
            eps = max(eps, float(q.max()) / q_min - 1.0)
    return eps


def part_diameter(kernel: KernelMatrix, partition: Partition, c: int) -> float:
    """Largest kernel-induced distance between two members of part c."""
    mem = partition.members[c]
    diag = kernel.diagonal[mem]
    d2 = diag[:, None] + diag[None, :] - 2.0 * kernel.entries[np.ix_(mem, mem)]
    return float(np.sqrt(max(float(d2.max()), 0.0)))


def min_complement_distance(kernel: KernelMatrix, partition: Partition, c: int,
                            k: int, budget: int = DEFAULT_BUDGET) -> float:
    """Smallest conditioned norm of a part member against singular complements.

    Minimum over members u of part c and (k-1)-sized singular sets S from the
    other parts of sqrt(L_uu - L_uS L_S^{-1} L_Su). Infinite when no such S
    exists (fewer than k-1 other parts).
    """
    targets = partition.members[c]
    complements = _complement_sets(partition, c, k - 1, budget)
    if complements.shape[0] == 0:
        return math.inf
    best = math.inf
    for s in complements:
        q = _conditioned_norms(kernel.entries, s, targets)
        best = min(best, float(np.sqrt(max(float(q.min()), 0.0))))
    return best


def distortion_bound(kernel: KernelMatrix, partition: Partition, k: int,
                     budget: int = DEFAULT_BUDGET) -> float | None:
    """Geometric distortion bound from part diameters and complement distances.

    Valid only when every part's complement distance exceeds its diameter;
    returns None (not applicable) otherwise.
    """
    worst = 0.0
    for c in range(partition.m):
        rho = part_diameter(kernel, partition, c)
        d = min_complement_distance(kernel, partition, c, k, budget)
        if not d > rho:
            return None
        if math.isinf(d):
            continue  # limit of the bound term as separation grows is 0
        worst = max(worst, (2.0 * d - rho) * rho / (d - rho) ** 2)
    return worst


def tv_bound(kernel: KernelMatrix, model: CoreModel, k: int, epsilon: float,
             p_ns: float) -> float:
    """Closed-form upper bound |1 - Zc/Z| + k*eps + (1 - k*eps) * p_ns."""
    z = _full_normalizer(kernel, k)
    z_core = model.core_normalizer
    return abs(1.0 - z_core / z) + k * epsilon + (1.0 - k * epsilon) * p_ns


@dataclasses.dataclass(frozen=True)
class RatioEnvelope:
    """Extremal core-replacement determinant ratios against the (1+eps)^k band."""

    min_ratio: float
    max_ratio: float
    lower: float
    upper: float
    passed: bool


def determinant_ratio_envelope(kernel: KernelMatrix, partition: Partition,
                               coreset: Coreset, k: int, epsilon: float,
                               budget: int = DEFAULT_BUDGET) -> RatioEnvelope:
    """Check det(L_{C(Y)}) / det(L_Y) over all singular Y against the band.

    The pass flag allows a 1e-8 relative slack for the two determinant routes
    rounding differently.
    """
    members = list(partition.members)
    count = count_singular_sets([m.size for m in members], k)
    _check_budget(count, budget, "determinant ratio envelope")
    idx = singular_sets(members, k)
    if idx.shape[0] == 0:
        return RatioEnvelope(1.0, 1.0, 0.0, math.inf, True)
    num = batched_minor_dets(kernel.entries, coreset.cores[partition.assignment[idx]])
    den = batched_minor_dets(kernel.entries, idx)
    if np.any(den <= 0):
        raise DegenerateConditional("a singular subset has nonpositive determinant")
    ratios = num / den
    lower = (1.0 + epsilon) ** (-k)
    upper = (1.0 + epsilon) ** k
    lo, hi = float(ratios.min()), float(ratios.max())
    slack = 1e-8
    passed = (lo >= lower * (1.0 - slack)) and (hi <= upper * (1.0 + slack))
    return RatioEnvelope(lo, hi, lower, upper, passed)


# -- aggregated report -----------------------------------------------------------


@dataclasses.dataclass
class DiagnosticsReport:
    """Flat bundle of the error-analysis quantities; None marks NotComputed."""

    tv_exact: float | None
    tv_estimate: float | None
    tv_estimate_stderr: float | None
    p_ns: float | None
    epsilon: float | None
    epsilon_bound: float | None
    z: float
    z_core: float
    tv_bound: float | None
    per_part: list[tuple[float, float]]  # (diameter, complement distance) per part

    def to_dict(self) -> dict:
        def clean(x):
            if x is None:
                return None
            if isinstance(x, float) and math.isinf(x):
                return "inf"
            return float(x)

        return {
            "tv_exact": clean(self.tv_exact),
            "tv_estimate": clean(self.tv_estimate),
            "tv_estimate_stderr": clean(self.tv_estimate_stderr),
            "p_ns": clean(self.p_ns),
            "epsilon": clean(self.epsilon),
            "epsilon_bound": clean(self.epsilon_bound),
            "z": float(self.z),
            "z_core": float(self.z_core),
            "tv_bound": clean(self.tv_bound),
            "per_part": [[clean(rho), clean(d)] for rho, d in self.per_part],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def evaluate_model(kernel: KernelMatrix, model: CoreModel, k: int,
                   rng: np.random.Generator, budget: int = DEFAULT_BUDGET,
                   n_probes: int = 20_000, mc_draws: int = 20_000) -> DiagnosticsReport:
    """Compute every report field that fits the enumeration budget.

    Exact quantities fall back to None (total variation additionally to its
    Monte Carlo estimate, the nonsingularity probability to sampler draws)
    when enumeration would exceed the budget.
    """
    partition, coreset = model.partition, model.coreset
    z = _full_normalizer(kernel, k)
    z_core = model.core_normalizer

    exact_tv = None
    if math.comb(kernel.n, k) <= budget:
        exact_tv = tv_exact(kernel, model, k, budget)
    est, stderr = tv_empirical(kernel, model, k, n_probes, rng)

    singular_count = count_singular_sets([m.size for m in partition.members], k)
    if singular_count <= budget:
        p_ns, _ = nonsingularity_prob(kernel, partition, k, "exact", budget)
    else:
        p_ns, _ = nonsingularity_prob(kernel, partition, k, "montecarlo", mc_draws, rng)

    epsilon = None
    try:
        epsilon = distortion_exact(kernel, partition, coreset, k, budget)
    except EnumerationTooLarge:
        pass

    epsilon_bound = None
    per_part: list[tuple[float, float]] = []
    try:
        for c in range(partition.m):
            rho = part_diameter(kernel, partition, c)
            d = min_complement_distance(kernel, partition, c, k, budget)
            per_part.append((rho, d))
        if all(d > rho for rho, d in per_part):
            finite = [(2 * d - rho) * rho / (d - rho) ** 2
                      for rho, d in per_part if not math.isinf(d)]
            epsilon_bound = max(finite) if finite else 0.0
    except EnumerationTooLarge:
        per_part = []

    bound = None
    if epsilon is not None and p_ns is not None:
        bound = tv_bound(kernel, model, k, epsilon, p_ns)

    return DiagnosticsReport(exact_tv, est, stderr, p_ns, epsilon, epsilon_bound,
                             z, z_core, bound, per_part)
