"""Two-stage approximate sampling and exact evaluation of its law.

Stage one draws a k-subset of parts from the DPP on the rescaled core
kernel; stage two replaces each drawn part with one of its members chosen
uniformly. The induced distribution over ground-set subsets equals the
fixed-size DPP on the kernel in which every item is replaced by its core.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .coreset import CoreModel, Coreset, Partition
from .errors import WrongCardinality
from .kdpp import kdpp_sample
from .kernels import det_lu, PIVOT_FLOOR


@dataclasses.dataclass(frozen=True)
class CoreSample:
    """One draw: the selected items and the parts they were drawn from."""

    items: tuple[int, ...]
    core_trace: tuple[int, ...]  # part ids from stage one, aligned with items


def coredpp_sample(model: CoreModel, rng: np.random.Generator) -> CoreSample:
    """Draw a size-k subset in time independent of the ground-set size."""
    parts = kdpp_sample(model.stage_one, rng)
    items = []
    for c in parts:
        mem = model.partition.members[c]
        items.append(int(mem[rng.integers(mem.size)]))
    return CoreSample(tuple(items), tuple(int(c) for c in parts))


def core_replace(partition: Partition, coreset: Coreset, subset) -> tuple[int, ...]:
    """Map every index to its part's core; duplicates are preserved."""
    return tuple(int(coreset.cores[partition.assignment[y]]) for y in subset)


def coredpp_prob(model: CoreModel, subset) -> float:
    """Exact probability the two-stage sampler draws this size-k subset.

    Zero whenever two items share a part; otherwise the determinant of the
    core kernel restricted to (and descaled over) the touched parts, divided
    by the core normalizer.
    """
    idx = np.asarray(subset, dtype=int).ravel()
    if idx.size != model.k:
        raise WrongCardinality(f"expected |Y| = {model.k}, got {idx.size}")
    parts = model.partition.assignment[idx]
    if np.unique(parts).size != parts.size:
        return 0.0
    w = np.sqrt(model.part_sizes[parts].astype(float))
    sub = model.core_kernel.entries[np.ix_(parts, parts)] / np.outer(w, w)
    scale = float(np.max(np.diag(sub), initial=0.0))
    d = det_lu(sub, PIVOT_FLOOR * scale) if scale > 0 else 0.0
    return min(max(d / model.core_normalizer, 0.0), 1.0)


def enumerate_coredpp_probs(model: CoreModel, subsets: np.ndarray) -> np.ndarray:
    """Vectorized coredpp_prob over a (B, k) array of subsets (desk scale)."""
    from .enumeration import batched_minor_dets

    b = subsets.shape[0]
    out = np.zeros(b)
    if b == 0:
        return out
    parts = model.partition.assignment[subsets]
    sorted_parts = np.sort(parts, axis=1)
    singular = np.ones(b, dtype=bool)
    if model.k > 1:
        singular = np.all(np.diff(sorted_parts, axis=1) > 0, axis=1)
    if not singular.any():
        return out
    w = np.sqrt(model.part_sizes.astype(float))
    descaled = model.core_kernel.entries / np.outer(w, w)
    dets = batched_minor_dets(descaled, parts[singular])
    out[singular] = np.clip(dets / model.core_normalizer, 0.0, 1.0)
    return out
