"""Exact fixed-cardinality DPP: probability evaluation and spectral sampling.

This is both the stage-one sampler over the small core kernel and the
ground-truth oracle that diagnostics compare against.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import DegenerateModel, KOutOfRange, WrongCardinality
from .kernels import (
    KernelMatrix,
    Spectrum,
    eigendecompose,
    elementary_symmetric,
    elementary_symmetric_table,
    principal_minor_det,
)

NORMALIZER_FLOOR = 1e-300


@dataclasses.dataclass(frozen=True)
class KDppModel:
    """Immutable sampling artifact: kernel, spectrum, k, and normalizer.

    The selection table is precomputed on eigenvalues rescaled by their
    maximum; selection probabilities are invariant under that rescaling and
    the table then stays far from overflow at any ground-set size.
    """

    kernel: KernelMatrix
    spectrum: Spectrum
    k: int
    normalizer: float
    _scaled_eigenvalues: np.ndarray = dataclasses.field(repr=False)
    _selection_table: np.ndarray = dataclasses.field(repr=False)

    @property
    def n(self) -> int:
        return self.kernel.n


def build_kdpp(kernel: KernelMatrix, k: int, spectrum: Spectrum | None = None) -> KDppModel:
    """Eigendecompose once and fix the normalizer e_k of the spectrum."""
    n = kernel.n
    if k < 1 or k > n:
        raise KOutOfRange(f"k={k} outside [1, {n}]")
    if spectrum is None:
        spectrum = eigendecompose(kernel)
    normalizer = elementary_symmetric(spectrum.eigenvalues, k)
    if normalizer <= NORMALIZER_FLOOR:
        raise DegenerateModel(f"e_{k} = {normalizer:.3g}; kernel rank is below {k}")
    scale = float(spectrum.eigenvalues.max(initial=0.0))
    scaled = spectrum.eigenvalues / scale if scale > 0 else spectrum.eigenvalues
    table = elementary_symmetric_table(scaled, k)
    return KDppModel(kernel, spectrum, k, normalizer, scaled, table)


def kdpp_prob(model: KDppModel, subset) -> float:
    """Exact probability det(L_Y) / e_k(L) for a size-k subset Y."""
    idx = np.asarray(subset, dtype=int).ravel()
    if idx.size != model.k:
        raise WrongCardinality(f"expected |Y| = {model.k}, got {idx.size}")
    d = principal_minor_det(model.kernel, idx)
    return min(max(d / model.normalizer, 0.0), 1.0)


def _weighted_draw(weights: np.ndarray, rng: np.random.Generator) -> int:
    cum = np.cumsum(weights)
    r = rng.random() * cum[-1]
    return int(min(np.searchsorted(cum, r, side="right"), weights.size - 1))


def _select_eigenindices(model: KDppModel, rng: np.random.Generator) -> list[int]:
    # Backward walk over the prefix table: include index i-1 with the exact
    # conditional probability of membership given `rem` indices still needed.
    lam = model._scaled_eigenvalues
    table = model._selection_table
    rem = model.k
    chosen: list[int] = []
    for i in range(model.n, 0, -1):
        if rem == 0:
            break
        if i == rem:
            marg = 1.0
        else:
            denom = table[rem, i]
            marg = lam[i - 1] * table[rem - 1, i - 1] / denom if denom > 0 else 0.0
        if rng.random() < marg:
            chosen.append(i - 1)
            rem -= 1
    return chosen


def kdpp_sample(model: KDppModel, rng: np.random.Generator) -> tuple[int, ...]:
    """Draw one size-k subset, exactly distributed as kdpp_prob.

    Phase one picks k eigenindices by the backward recursion over the
    e-polynomial table; phase two samples one item per selected eigenvector
    with sequential orthogonalizing projections.
    """
    chosen = _select_eigenindices(model, rng)
    v = model.spectrum.eigenvectors[:, chosen].copy()
    items: list[int] = []
    for t in range(len(chosen), 0, -1):
        w = np.einsum("ij,ij->i", v, v)
        np.maximum(w, 0.0, out=w)
        i = _weighted_draw(w, rng)
        items.append(i)
        if t == 1:
            break
        j = int(np.argmax(np.abs(v[i])))
        col = v[:, j].copy()
        v = np.delete(v, j, axis=1)
        v -= np.outer(col, v[i] / col[i])
        v[i, :] = 0.0
        if v.shape[1] == 1:
            v /= np.sqrt(v[:, 0] @ v[:, 0])  # cheap orthonormalization
        else:
            v, _ = np.linalg.qr(v)
    return tuple(sorted(items))


def enumerate_kdpp_probs(model: KDppModel, subsets: np.ndarray) -> np.ndarray:
    """Vectorized kdpp_prob over a (B, k) array of subsets (desk scale)."""
    from .enumeration import batched_minor_dets

    dets = batched_minor_dets(model.kernel.entries, subsets)
    return np.clip(dets / model.normalizer, 0.0, 1.0)
