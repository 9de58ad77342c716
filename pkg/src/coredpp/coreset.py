"""Partition and coreset construction by local search.

The construction maintains a partition of the ground set into M non-empty
parts and one core point per part, then iterates two moves per pass:

* reassign each non-core point to the part whose conditioned, rescaled core
  kernel gives it the highest score (checked only against the nu nearest
  cores plus the current part);
* greedily promote points to cores whenever that increases the core
  normalizer e_k of the rescaled core kernel, both lazily after a move and
  in a final per-part sweep.

An exact variant scores moves against the full kernel by enumeration and
swaps cores to minimize the gap to the full normalizer; it exists for
desk-scale validation of the accelerated objectives.
"""

from __future__ import annotations

import dataclasses
import functools
import itertools

import numpy as np

from .enumeration import batched_minor_dets
from .errors import DegenerateModel, KOutOfRange, TooManyParts
from .kdpp import KDppModel, build_kdpp
from .kernels import (
    PIVOT_FLOOR,
    KernelMatrix,
    PointSet,
    Spectrum,
    eigendecompose,
    elementary_symmetric,
    pairwise_kernel_distances,
    schur_reduce,
)


@dataclasses.dataclass(frozen=True)
class Partition:
    """Assignment of every ground-set index to one of m non-empty parts."""

    assignment: np.ndarray          # (n,) part ids in [0, m)
    m: int
    members: tuple[np.ndarray, ...]  # per part, sorted index arrays

    @classmethod
    def from_assignment(cls, assignment, m: int) -> "Partition":
        assignment = np.asarray(assignment, dtype=np.intp).copy()
        if assignment.ndim != 1:
            raise ValueError("assignment must be one-dimensional")
        if assignment.size and (assignment.min() < 0 or assignment.max() >= m):
            raise ValueError(f"part ids must lie in [0, {m})")
        members = tuple(np.flatnonzero(assignment == c) for c in range(m))
        if any(mem.size == 0 for mem in members):
            empty = [c for c, mem in enumerate(members) if mem.size == 0]
            raise ValueError(f"parts {empty} are empty")
        assignment.flags.writeable = False
        for mem in members:
            mem.flags.writeable = False
        return cls(assignment, m, members)

    @property
    def n(self) -> int:
        return self.assignment.size

    @property
    def part_sizes(self) -> np.ndarray:
        return np.array([mem.size for mem in self.members], dtype=np.intp)


@dataclasses.dataclass(frozen=True)
class Coreset:
    """One representative ground-set index per part."""

    cores: np.ndarray  # (m,) ground-set indices

    def __post_init__(self):
        cores = np.asarray(self.cores, dtype=np.intp).copy()
        if np.unique(cores).size != cores.size:
            raise ValueError("core indices must be distinct")
        cores.flags.writeable = False
        object.__setattr__(self, "cores", cores)

    def validate_for(self, partition: Partition) -> None:
        if self.cores.size != partition.m:
            raise ValueError("coreset size does not match part count")
        for c, core in enumerate(self.cores):
            if partition.assignment[core] != c:
                raise ValueError(f"core {core} of part {c} is not a member of it")

    @property
    def m(self) -> int:
        return self.cores.size


@dataclasses.dataclass(frozen=True)
class CoreModel:
    """Immutable sampling artifact: partition, coreset, and rescaled core kernel."""

    partition: Partition
    coreset: Coreset
    core_kernel: KernelMatrix     # m x m, entries sqrt(|Y_c||Y_c'|) L[core_c][core_c']
    core_spectrum: Spectrum
    part_sizes: np.ndarray
    k: int
    core_normalizer: float        # e_k(core_kernel), cached; > 0

    @functools.cached_property
    def stage_one(self) -> KDppModel:
        return build_kdpp(self.core_kernel, self.k, spectrum=self.core_spectrum)


def rescaled_core_kernel(kernel: KernelMatrix, partition: Partition,
                         coreset: Coreset) -> KernelMatrix:
    """Core kernel rescaled by sqrt of the represented part sizes."""
    coreset.validate_for(partition)
    w = np.sqrt(partition.part_sizes.astype(float))
    sub = kernel.entries[np.ix_(coreset.cores, coreset.cores)]
    return KernelMatrix(np.outer(w, w) * sub)


def build_core_model(kernel: KernelMatrix, partition: Partition, coreset: Coreset,
                     k: int) -> CoreModel:
    core_kernel = rescaled_core_kernel(kernel, partition, coreset)
    spectrum = eigendecompose(core_kernel)
    normalizer = elementary_symmetric(spectrum.eigenvalues, k)
    if normalizer <= 1e-300:
        raise DegenerateModel(f"core normalizer e_{k} = {normalizer:.3g}")
    return CoreModel(partition, coreset, core_kernel, spectrum,
                     partition.part_sizes, k, normalizer)


# -- initialization ------------------------------------------------------------


def _sq_dist_columns(source, targets: np.ndarray) -> np.ndarray:
    """Squared distance from every point to each target, shape (n, len(targets))."""
    if isinstance(source, PointSet):
        diff = source.coords[:, None, :] - source.coords[targets][None, :, :]
        return np.sum(diff * diff, axis=2)
    d = pairwise_kernel_distances(source, np.arange(source.n), targets)
    return d * d


def kmeanspp_init(source: PointSet | KernelMatrix, m: int,
                  rng: np.random.Generator) -> tuple[Partition, Coreset]:
    """Seed m cores by squared-distance weighting; assign points to the nearest.

    Works either on raw coordinates or directly on a kernel through the
    kernel-induced distance; the two agree for the linear kernel.
    """
    n = source.n
    if m > n:
        raise TooManyParts(f"m={m} parts but only {n} points")
    seeds = [int(rng.integers(n))]
    dist_cols = _sq_dist_columns(source, np.array(seeds, dtype=np.intp))
    best = dist_cols[:, 0].copy()
    for _ in range(1, m):
        total = float(best.sum())
        if total > 0:
            cum = np.cumsum(best)
            r = rng.random() * total
            nxt = int(min(np.searchsorted(cum, r, side="right"), n - 1))
        else:
            remaining = np.setdiff1d(np.arange(n), np.array(seeds, dtype=np.intp))
            nxt = int(remaining[rng.integers(remaining.size)])
        seeds.append(nxt)
        col = _sq_dist_columns(source, np.array([nxt], dtype=np.intp))[:, 0]
        dist_cols = np.concatenate([dist_cols, col[:, None]], axis=1)
        np.minimum(best, col, out=best)
    assignment = np.argmin(dist_cols, axis=1)
    for c, s in enumerate(seeds):
        assignment[s] = c
    partition = Partition.from_assignment(assignment, m)
    return partition, Coreset(np.array(seeds, dtype=np.intp))


def random_init(n: int, m: int, rng: np.random.Generator) -> tuple[Partition, Coreset]:
    """Random cores, every other point assigned to a uniformly random part."""
    if m > n:
        raise TooManyParts(f"m={m} parts but only {n} points")
    seeds = rng.choice(n, size=m, replace=False)
    assignment = rng.integers(m, size=n)
    for c, s in enumerate(seeds):
        assignment[s] = c
    return Partition.from_assignment(assignment, m), Coreset(np.asarray(seeds, dtype=np.intp))


# -- local-search objectives ----------------------------------------------------


def nearest_cores(kernel: KernelMatrix, y: int, coreset: Coreset, nu: int,
                  current_part: int | None = None) -> list[int]:
    """The nu part ids whose cores are closest to y in kernel distance.

    Ties break toward the lower part id. When given, the current part of y is
    always present (appended if it did not make the cut, so the list may hold
    nu + 1 ids).
    """
    if nu < 1 or nu > coreset.m:
        raise ValueError(f"nu={nu} outside [1, {coreset.m}]")
    d = pairwise_kernel_distances(kernel, [y], coreset.cores)[0]
    order = np.argsort(d, kind="stable")[:nu]
    out = [int(c) for c in order]
    if current_part is not None and current_part not in out:
        out.append(int(current_part))
    return out


def _conditioned_core_esp(entries: np.ndarray, core_idx: np.ndarray,
                          weights: np.ndarray, y: int, order: int,
                          pivot_tol: float) -> float:
    """e_order of the size-weighted core kernel conditioned on item y."""
    idx = np.concatenate([core_idx, [y]])
    sub = entries[np.ix_(idx, idx)]
    reduced = schur_reduce(sub, len(core_idx), pivot_tol)
    scaled = np.outer(weights, weights) * reduced
    eigs = np.maximum(np.linalg.eigvalsh(scaled), 0.0)
    return elementary_symmetric(eigs, order)


def assignment_score(kernel: KernelMatrix, partition: Partition, coreset: Coreset,
                     y: int, candidate: int, k: int) -> float:
    """Score of hypothetically placing y in `candidate`.

    Conditions the cores of all other parts on y, rescales by the part sizes
    those cores would represent after the move (y leaves its current part),
    and returns L[y][y] times e_{k-1} of the result. O(m^3) per call.
    """
    if k - 1 > partition.m - 1:
        raise KOutOfRange(f"k={k} needs at least k parts, have {partition.m}")
    sizes = partition.part_sizes.astype(float)
    sizes[partition.assignment[y]] -= 1.0
    keep = np.arange(partition.m) != candidate
    weights = np.sqrt(np.maximum(sizes[keep], 0.0))
    max_diag = float(np.max(kernel.diagonal, initial=0.0))
    esp = _conditioned_core_esp(kernel.entries, coreset.cores[keep], weights, y,
                                k - 1, PIVOT_FLOOR * max_diag)
    return float(kernel.entries[y, y] * esp)


def core_swap_objective(kernel: KernelMatrix, partition: Partition, coreset: Coreset,
                        part: int, candidate: int, k: int) -> float:
    """e_k of the rescaled core kernel with the given part's core replaced."""
    if partition.assignment[candidate] != part:
        raise ValueError(f"candidate {candidate} is not a member of part {part}")
    cores = coreset.cores.copy()
    cores[part] = candidate
    w = np.sqrt(partition.part_sizes.astype(float))
    sub = kernel.entries[np.ix_(cores, cores)]
    eigs = np.maximum(np.linalg.eigvalsh(np.outer(w, w) * sub), 0.0)
    return elementary_symmetric(eigs, k)


def exact_assignment_score(kernel: KernelMatrix, partition: Partition, y: int,
                           candidate: int, k: int) -> float:
    """Unaccelerated score: enumerate singular complements against the full kernel.

    Sums det(L_{S u {y}}) over all (k-1)-sized sets S drawing at most one
    point from each part other than `candidate` (y itself excluded, since it
    hypothetically moves). Exponential in k; desk-scale validation only.
    """
    groups = [np.setdiff1d(partition.members[c], [y]) for c in range(partition.m)
              if c != candidate]
    groups = [g for g in groups if g.size > 0]
    size = k - 1
    if size == 0:
        return float(kernel.entries[y, y])
    total = 0.0
    for combo in itertools.combinations(range(len(groups)), size):
        arrays = [groups[c] for c in combo]
        grid = np.meshgrid(*arrays, indexing="ij")
        block = np.stack([g.ravel() for g in grid], axis=1)
        idx = np.concatenate([block, np.full((block.shape[0], 1), y, dtype=np.intp)], axis=1)
        total += float(batched_minor_dets(kernel.entries, idx).sum())
    return total


# -- iterative construction ------------------------------------------------------


class _SearchState:
    """Mutable working copy of (assignment, members, cores) during construction."""

    def __init__(self, kernel: KernelMatrix, partition: Partition, coreset: Coreset, k: int):
        self.kernel = kernel
        self.k = k
        self.m = partition.m
        self.assignment = partition.assignment.copy()
        self.members = [set(mem.tolist()) for mem in partition.members]
        self.sizes = partition.part_sizes.astype(np.intp)
        self.cores = coreset.cores.copy()
        self.core_set = set(self.cores.tolist())

    def partition(self) -> Partition:
        return Partition.from_assignment(self.assignment, self.m)

    def coreset(self) -> Coreset:
        return Coreset(self.cores.copy())

    def core_normalizer(self) -> float:
        w = np.sqrt(self.sizes.astype(float))
        sub = self.kernel.entries[np.ix_(self.cores, self.cores)]
        eigs = np.maximum(np.linalg.eigvalsh(np.outer(w, w) * sub), 0.0)
        return elementary_symmetric(eigs, self.k)

    def swap_objective(self, part: int, candidate: int) -> float:
        cores = self.cores.copy()
        cores[part] = candidate
        w = np.sqrt(self.sizes.astype(float))
        sub = self.kernel.entries[np.ix_(cores, cores)]
        eigs = np.maximum(np.linalg.eigvalsh(np.outer(w, w) * sub), 0.0)
        return elementary_symmetric(eigs, self.k)

    def move(self, y: int, dst: int) -> None:
        src = int(self.assignment[y])
        self.members[src].discard(y)
        self.members[dst].add(y)
        self.sizes[src] -= 1
        self.sizes[dst] += 1
        self.assignment[y] = dst

    def set_core(self, part: int, candidate: int) -> None:
        self.core_set.discard(int(self.cores[part]))
        self.cores[part] = candidate
        self.core_set.add(int(candidate))


def _accelerated_score(state: _SearchState, y: int, candidate: int,
                       pivot_tol: float) -> float:
    sizes = state.sizes.astype(float)
    sizes[state.assignment[y]] -= 1.0
    keep = np.arange(state.m) != candidate
    weights = np.sqrt(np.maximum(sizes[keep], 0.0))
    esp = _conditioned_core_esp(state.kernel.entries, state.cores[keep], weights, y,
                                state.k - 1, pivot_tol)
    return float(state.kernel.entries[y, y] * esp)


def _exact_score(state: _SearchState, y: int, candidate: int) -> float:
    groups = []
    for c in range(state.m):
        if c == candidate:
            continue
        g = np.array(sorted(state.members[c] - {y}), dtype=np.intp)
        if g.size:
            groups.append(g)
    size = state.k - 1
    if size == 0:
        return float(state.kernel.entries[y, y])
    total = 0.0
    for combo in itertools.combinations(range(len(groups)), size):
        arrays = [groups[c] for c in combo]
        grid = np.meshgrid(*arrays, indexing="ij")
        block = np.stack([g.ravel() for g in grid], axis=1)
        idx = np.concatenate([block, np.full((block.shape[0], 1), y, dtype=np.intp)], axis=1)
        total += float(batched_minor_dets(state.kernel.entries, idx).sum())
    return total


def construct(kernel: KernelMatrix, k: int, m: int, nu: int,
              rng: np.random.Generator, max_passes: int = 1,
              init: str = "kmeanspp", exact: bool = False) -> CoreModel:
    """Iterative local-search construction of the partition and coreset.

    Per pass, every non-core point is scored against its nu nearest parts and
    moved to the argmax; a move immediately tests promoting the moved point to
    core of its new part, and a final sweep re-optimizes every part's core.
    Stops early on a pass with no changes. With ``exact=True`` the assignment
    scores enumerate against the full kernel, every part is a candidate, and
    core swaps minimize |e_k(L) - e_k(core kernel)| instead of greedily
    increasing the latter.

    Moves that would empty a part are skipped; core points are never
    reassigned.
    """
    n = kernel.n
    if m > n:
        raise TooManyParts(f"m={m} parts but only {n} points")
    if k < 1 or k > m:
        raise KOutOfRange(f"k={k} outside [1, m={m}]")
    if nu < 1:
        raise ValueError(f"nu={nu} must be >= 1")
    nu = min(nu, m)

    if init == "kmeanspp":
        partition, coreset = kmeanspp_init(kernel, m, rng)
    elif init == "random":
        partition, coreset = random_init(n, m, rng)
    else:
        raise ValueError(f"unknown init {init!r}")

    state = _SearchState(kernel, partition, coreset, k)
    pivot_tol = PIVOT_FLOOR * float(np.max(kernel.diagonal, initial=0.0))
    full_normalizer = None
    if exact:
        full_normalizer = elementary_symmetric(eigendecompose(kernel).eigenvalues, k)

    def swap_gain(new: float, cur: float) -> bool:
        if exact:
            return abs(full_normalizer - new) < abs(full_normalizer - cur)
        return new > cur

    diag = kernel.diagonal
    for _ in range(max_passes):
        changed = False
        for y in range(n):
            if y in state.core_set:
                continue
            current = int(state.assignment[y])
            if exact:
                candidates = list(range(m))
            else:
                d = diag[y] + diag[state.cores] - 2.0 * kernel.entries[y, state.cores]
                order = np.argsort(d, kind="stable")[:nu]
                candidates = sorted(int(c) for c in order)
                if current not in candidates:
                    candidates.append(current)
                    candidates.sort()
            best_part, best_score = -1, -np.inf
            for g in candidates:  # ascending ids, so ties keep the lowest
                s = (_exact_score(state, y, g) if exact
                     else _accelerated_score(state, y, g, pivot_tol))
                if s > best_score:
                    best_part, best_score = g, s
            if best_part == current:
                continue
            if state.sizes[current] == 1:
                continue  # the move would empty a part
            state.move(y, best_part)
            changed = True
            z_cur = state.core_normalizer()
            z_new = state.swap_objective(best_part, y)
            if swap_gain(z_new, z_cur):
                state.set_core(best_part, y)
        for g in range(m):
            best_j, best_val = int(state.cores[g]), state.core_normalizer()
            for j in sorted(state.members[g]):
                if j == state.cores[g]:
                    continue
                val = state.swap_objective(g, j)
                if swap_gain(val, best_val) or (val == best_val and j < best_j):
                    best_j, best_val = j, val
            if best_j != state.cores[g]:
                state.set_core(g, best_j)
                changed = True
        if not changed:
            break

    return build_core_model(kernel, state.partition(), state.coreset(), k)
