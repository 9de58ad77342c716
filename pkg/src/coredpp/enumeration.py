"""Desk-scale enumeration plumbing shared by diagnostics and exact objectives.

Index sets are materialized as integer arrays so determinant work can be
batched through LAPACK instead of per-subset Python loops.
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np

from .errors import EnumerationTooLarge


@functools.lru_cache(maxsize=16)
def k_subsets(n: int, k: int) -> np.ndarray:
    """All size-k subsets of range(n) as a (C(n,k), k) int array, lex order."""
    count = math.comb(n, k)
    if k == 0:
        return np.zeros((1, 0), dtype=np.intp)
    flat = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), k)),
                       dtype=np.intp, count=count * k)
    out = flat.reshape(count, k)
    out.flags.writeable = False
    return out


def count_singular_sets(part_sizes, size: int) -> int:
    """Number of index sets of the given size with at most one item per part.

    Coefficient of x^size in prod_c (1 + |part c| x), computed by convolution.
    """
    coeffs = [1]
    for s in part_sizes:
        nxt = coeffs + [0]
        for j in range(len(coeffs), 0, -1):
            nxt[j] += coeffs[j - 1] * int(s)
        coeffs = nxt
    return coeffs[size] if size < len(coeffs) else 0


def singular_sets(member_arrays: list[np.ndarray], size: int,
                  budget: int | None = None) -> np.ndarray:
    """All size-`size` sets drawing at most one index per member array.

    Rows are sorted blocks: one part combination after another, each expanded
    as a full cartesian product, so the order is deterministic.
    """
    total = count_singular_sets([len(m) for m in member_arrays], size)
    if budget is not None and total > budget:
        raise EnumerationTooLarge(f"{total} singular sets exceed budget {budget}")
    if size == 0:
        return np.zeros((1, 0), dtype=np.intp)
    blocks = []
    for combo in itertools.combinations(range(len(member_arrays)), size):
        arrays = [np.asarray(member_arrays[c], dtype=np.intp) for c in combo]
        if any(a.size == 0 for a in arrays):
            continue
        grid = np.meshgrid(*arrays, indexing="ij")
        blocks.append(np.stack([g.ravel() for g in grid], axis=1))
    if not blocks:
        return np.zeros((0, size), dtype=np.intp)
    return np.concatenate(blocks, axis=0)


def batched_minor_dets(entries: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    """det(L_Y) for every row Y of `subsets`, via one batched LAPACK call."""
    if subsets.shape[0] == 0:
        return np.zeros(0)
    if subsets.shape[1] == 0:
        return np.ones(subsets.shape[0])
    gathered = entries[subsets[:, :, None], subsets[:, None, :]]
    return np.linalg.det(gathered)
