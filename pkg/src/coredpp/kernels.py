"""Kernel construction and dense linear-algebra primitives.

Everything downstream (samplers, coreset search, diagnostics) consumes the
immutable types defined here: point sets, dense PSD kernels, and their
spectra. Numerical tolerances are fixed once and reused across the repo.
"""

from __future__ import annotations

import dataclasses
import warnings
from collections.abc import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    DuplicateIndex,
    IndexOutOfRange,
    InvalidBandwidth,
    KOutOfRange,
    NegativeRadicand,
    NotPSD,
    SingularPivot,
)

# Repo-wide tolerances (relative unless stated otherwise).
REL_TOL = 1e-8        # identity and reconstruction checks
SYM_TOL = 1e-10       # symmetry slack at construction
PIVOT_FLOOR = 1e-12   # pivots below this fraction of the max diagonal count as 0
EIG_CLAMP = 1e-10     # eigenvalue clamp tolerance, relative to lambda_max
DIST_CLAMP = 1e-10    # largest negative squared distance absorbed as roundoff


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclasses.dataclass(frozen=True)
class PointSet:
    """n x d array of raw feature vectors."""

    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] < 1:
            raise ValueError(f"coords must be 2-d with d >= 1, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coords contain non-finite entries")
        object.__setattr__(self, "coords", _freeze(coords.copy()))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


@dataclasses.dataclass(frozen=True)
class KernelMatrix:
    """Dense symmetric similarity matrix over the ground set.

    The constructor checks shape and symmetry (within ``SYM_TOL``) and stores
    an exactly symmetrized copy. Use :func:`linear_kernel` / :func:`rbf_kernel`
    for kernels built from data (they also enforce the positive diagonal), or
    :meth:`from_array` to validate an arbitrary matrix including the PSD check.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"kernel must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("kernel contains non-finite entries")
        if a.size:
            scale = np.maximum(1.0, np.abs(a))
            if not np.all(np.abs(a - a.T) <= SYM_TOL * scale):
                raise ValueError("kernel is not symmetric within tolerance")
        object.__setattr__(self, "entries", _freeze((a + a.T) / 2.0))

    @classmethod
    def from_array(cls, arr) -> "KernelMatrix":
        """Validating constructor: symmetry, strictly positive diagonal, PSD."""
        kernel = cls(arr)
        diag = np.diag(kernel.entries)
        if kernel.n and np.any(diag <= 0):
            bad = int(np.argmin(diag))
            raise NotPSD(f"diagonal entry {bad} is {diag[bad]:.3g}, must be > 0")
        if kernel.n:
            eigs = np.linalg.eigvalsh(kernel.entries)
            if eigs[0] < -1e-8 * max(eigs[-1], 0.0):
                raise NotPSD(f"smallest eigenvalue {eigs[0]:.3g} below PSD tolerance")
        return kernel

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries)


@dataclasses.dataclass(frozen=True)
class Spectrum:
    """Eigendecomposition with nonincreasing, nonnegative eigenvalues."""

    eigenvalues: np.ndarray   # length n, sorted nonincreasing, clamped >= 0
    eigenvectors: np.ndarray  # n x n, orthonormal columns aligned with eigenvalues

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _freeze(self.eigenvalues))
        object.__setattr__(self, "eigenvectors", _freeze(self.eigenvectors))


def eigendecompose(kernel: KernelMatrix) -> Spectrum:
    """Symmetric eigendecomposition, eigenvalues clamped at zero.

    PSD inputs only produce negative eigenvalues through roundoff, so values
    in [-EIG_CLAMP * lambda_max, 0) are clamped to 0 (as is anything below:
    the PSD check belongs to kernel construction, not here).
    """
    vals, vecs = np.linalg.eigh(kernel.entries)
    vals, vecs = vals[::-1].copy(), vecs[:, ::-1].copy()
    vals = np.maximum(vals, 0.0)
    return Spectrum(vals, vecs)


# -- kernel constructors -------------------------------------------------------


def linear_kernel(points: PointSet) -> KernelMatrix:
    """Gram matrix of dot products, L[i][j] = <x_i, x_j>."""
    g = points.coords @ points.coords.T
    kernel = KernelMatrix(g)
    diag = kernel.diagonal
    if points.n and np.any(diag <= 0):
        bad = int(np.argmin(diag))
        raise NotPSD(f"point {bad} has squared norm {diag[bad]:.3g}; zero vectors "
                     "make the kernel diagonal nonpositive")
    return kernel


def rbf_kernel(points: PointSet, bandwidth: float) -> KernelMatrix:
    """Gaussian kernel exp(-||x_i - x_j||^2 / (2 bandwidth^2)), unit diagonal."""
    if not np.isfinite(bandwidth) or bandwidth <= 0:
        raise InvalidBandwidth(f"bandwidth must be a finite positive number, got {bandwidth}")
    sq = np.sum(points.coords ** 2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (points.coords @ points.coords.T)
    np.maximum(d2, 0.0, out=d2)
    g = np.exp(-d2 / (2.0 * bandwidth * bandwidth))
    np.fill_diagonal(g, 1.0)
    return KernelMatrix(g)


def median_heuristic_bandwidth(points: PointSet, rng: np.random.Generator,
                               subsample: int = 1000) -> float:
    """Median pairwise distance of a random subsample; the default RBF scale."""
    n = points.n
    if n < 2:
        return 1.0
    if n > subsample:
        idx = rng.choice(n, size=subsample, replace=False)
        coords = points.coords[np.sort(idx)]
    else:
        coords = points.coords
    sq = np.sum(coords ** 2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (coords @ coords.T)
    np.maximum(d2, 0.0, out=d2)
    upper = d2[np.triu_indices(coords.shape[0], k=1)]
    med = float(np.median(np.sqrt(upper)))
    return med if med > 0 else 1.0


# -- scalar primitives ---------------------------------------------------------


def elementary_symmetric(eigenvalues, k: int) -> float:
    """e_k of the given values via the stable triangular prefix recurrence.

    e_0 = 1; absorbing each value lam updates e_j <- e_j + lam * e_{j-1}
    for j = k..1 over growing prefixes.
    """
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    n = lam.size
    if k < 0 or k > n:
        raise KOutOfRange(f"k={k} outside [0, {n}]")
    e = np.zeros(k + 1)
    e[0] = 1.0
    for v in lam:
        e[1:] = e[1:] + v * e[:-1]
    return float(e[k])


def elementary_symmetric_table(eigenvalues, k: int) -> np.ndarray:
    """Prefix table E with E[j, i] = e_j(first i values), shape (k+1, n+1).

    The sequential eigenindex-selection step of the exact sampler walks this
    table backwards.
    """
    lam = np.asarray(eigenvalues, dtype=float).ravel()
    n = lam.size
    if k < 0 or k > n:
        raise KOutOfRange(f"k={k} outside [0, {n}]")
    table = np.zeros((k + 1, n + 1))
    table[0, :] = 1.0
    for i in range(1, n + 1):
        table[1:, i] = table[1:, i - 1] + lam[i - 1] * table[:-1, i - 1]
    return table


def _check_subset(n: int, subset) -> np.ndarray:
    idx = np.asarray(subset, dtype=int).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexOutOfRange(f"subset indices must lie in [0, {n})")
    if np.unique(idx).size != idx.size:
        raise DuplicateIndex("subset contains repeated indices")
    return idx


def det_lu(a: np.ndarray, pivot_tol: float) -> float:
    """Determinant via pivoted LU; 0 when any pivot magnitude < pivot_tol."""
    m = a.shape[0]
    if m == 0:
        return 1.0
    with warnings.catch_warnings():
        # exactly singular minors are a supported input; they map to det 0
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    d = np.diag(lu)
    if np.any(np.abs(d) < pivot_tol):
        return 0.0
    sign = 1.0 if (np.sum(piv != np.arange(m)) % 2 == 0) else -1.0
    return float(sign * np.prod(d))


def principal_minor_det(kernel: KernelMatrix, subset) -> float:
    """det(L_Y) for an index subset Y; the empty minor is 1.

    Uses pivoted LU and returns exactly 0 for numerically singular minors
    (some pivot below PIVOT_FLOOR times the minor's max diagonal entry).
    """
    idx = _check_subset(kernel.n, subset)
    if idx.size == 0:
        return 1.0
    sub = kernel.entries[np.ix_(idx, idx)]
    scale = float(np.max(np.diag(sub), initial=0.0))
    if scale <= 0.0:
        return 0.0
    return det_lu(sub, PIVOT_FLOOR * scale)


def schur_reduce(entries: np.ndarray, pivot_index: int, pivot_tol: float) -> np.ndarray:
    """Normalized Schur complement: eliminate one index from a symmetric matrix.

    Returns entries - col * row / pivot with the pivot row/column dropped, so
    that det(A_{S u {y}}) = A[y][y] * det(result_S) for any S avoiding y.
    """
    pivot = entries[pivot_index, pivot_index]
    if pivot <= pivot_tol:
        raise SingularPivot(f"pivot {pivot:.3g} at index {pivot_index} below tolerance "
                            f"{pivot_tol:.3g}")
    col = entries[:, pivot_index]
    reduced = entries - np.outer(col, col) / pivot
    keep = np.arange(entries.shape[0]) != pivot_index
    return reduced[np.ix_(keep, keep)]


def schur_condition(kernel: KernelMatrix, y: int) -> KernelMatrix:
    """Kernel over the remaining indices after conditioning on item y.

    Index i of the result corresponds to original index i for i < y and i + 1
    for i >= y. The result is PSD up to roundoff; its diagonal may contain
    zeros (items whose feature vector lies in the span of item y's).
    """
    if y < 0 or y >= kernel.n:
        raise IndexOutOfRange(f"index {y} outside [0, {kernel.n})")
    max_diag = float(np.max(kernel.diagonal, initial=0.0))
    reduced = schur_reduce(kernel.entries, y, PIVOT_FLOOR * max_diag)
    return KernelMatrix(reduced)


def kernel_distance(kernel: KernelMatrix, u: int, v: int) -> float:
    """Feature-space distance sqrt(L_uu + L_vv - 2 L_uv).

    Radicands in [-DIST_CLAMP, 0) are clamped to 0; anything more negative
    signals a non-PSD kernel and raises.
    """
    n = kernel.n
    if not (0 <= u < n and 0 <= v < n):
        raise IndexOutOfRange(f"indices ({u}, {v}) outside [0, {n})")
    a = kernel.entries
    r = a[u, u] + a[v, v] - 2.0 * a[u, v]
    if r < -DIST_CLAMP:
        raise NegativeRadicand(f"squared distance {r:.3g} for pair ({u}, {v}); kernel "
                               "is not PSD")
    return float(np.sqrt(max(r, 0.0)))


def pairwise_kernel_distances(kernel: KernelMatrix, rows: Sequence[int],
                              cols: Sequence[int]) -> np.ndarray:
    """Matrix of kernel_distance values for rows x cols (vectorized helper)."""
    rows = np.asarray(rows, dtype=int)
    cols = np.asarray(cols, dtype=int)
    diag = kernel.diagonal
    d2 = diag[rows][:, None] + diag[cols][None, :] - 2.0 * kernel.entries[np.ix_(rows, cols)]
    if d2.size and d2.min() < -DIST_CLAMP:
        raise NegativeRadicand(f"squared distance {d2.min():.3g}; kernel is not PSD")
    return np.sqrt(np.maximum(d2, 0.0))
