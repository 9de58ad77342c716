import itertools
import math

import numpy as np
import pytest

from coredpp import (
    KernelMatrix,
    PointSet,
    eigendecompose,
    elementary_symmetric,
    kernel_distance,
    linear_kernel,
    principal_minor_det,
    rbf_kernel,
    schur_condition,
)
from coredpp.errors import (
    DuplicateIndex,
    IndexOutOfRange,
    InvalidBandwidth,
    KOutOfRange,
    NegativeRadicand,
    NotPSD,
    SingularPivot,
)
from oracles import det_cofactor, esp_bruteforce, random_psd_kernel


def test_linear_kernel_single_unit_vector():
    k = linear_kernel(PointSet([[1.0, 0.0, 0.0]]))
    np.testing.assert_allclose(k.entries, [[1.0]])


def test_linear_kernel_orthogonal_unit_vectors():
    k = linear_kernel(PointSet([[1.0, 0.0], [0.0, 1.0]]))
    np.testing.assert_allclose(k.entries, np.eye(2), atol=1e-15)


def test_linear_kernel_hand_dot_products():
    k = linear_kernel(PointSet([[1.0, 1.0], [2.0, 0.0]]))
    np.testing.assert_allclose(k.entries, [[2.0, 2.0], [2.0, 4.0]])
    # determinant pinned by the 2x2 cofactor oracle: 2*4 - 2*2 = 4
    assert det_cofactor(k.entries) == pytest.approx(4.0)
    assert principal_minor_det(k, [0, 1]) == pytest.approx(4.0)


def test_linear_kernel_rejects_zero_vector():
    with pytest.raises(NotPSD):
        linear_kernel(PointSet([[0.0, 0.0], [1.0, 0.0]]))


def test_rbf_single_point_and_identical_points():
    np.testing.assert_allclose(rbf_kernel(PointSet([[3.0, 4.0]]), 2.0).entries, [[1.0]])
    k = rbf_kernel(PointSet([[1.0, 2.0], [1.0, 2.0]]), 0.7)
    np.testing.assert_allclose(k.entries, np.ones((2, 2)))


def test_rbf_distance_two_bandwidth_one():
    k = rbf_kernel(PointSet([[0.0], [2.0]]), 1.0)
    assert k.entries[0, 1] == pytest.approx(math.exp(-2.0), rel=1e-12)
    assert k.entries[0, 0] == 1.0 and k.entries[1, 1] == 1.0


@pytest.mark.parametrize("bw", [0.0, -1.0, math.inf, math.nan])
def test_rbf_invalid_bandwidth(bw):
    with pytest.raises(InvalidBandwidth):
        rbf_kernel(PointSet([[0.0]]), bw)


def test_elementary_symmetric_identity_eigenvalues():
    for n, k in [(4, 0), (4, 2), (6, 6), (5, 3)]:
        assert elementary_symmetric(np.ones(n), k) == pytest.approx(math.comb(n, k))


def test_elementary_symmetric_two_three():
    # constant term of (x-2)(x-3) is 6
    assert elementary_symmetric([2.0, 3.0], 2) == pytest.approx(6.0)


def test_elementary_symmetric_k_zero_and_range_errors():
    assert elementary_symmetric([5.0, 7.0, 11.0], 0) == 1.0
    with pytest.raises(KOutOfRange):
        elementary_symmetric([1.0], 2)
    with pytest.raises(KOutOfRange):
        elementary_symmetric([1.0], -1)


def test_principal_minor_det_examples():
    k = KernelMatrix([[2.0, 1.0], [1.0, 2.0]])
    assert principal_minor_det(k, []) == 1.0
    assert principal_minor_det(k, [0, 1]) == pytest.approx(3.0)
    dup = KernelMatrix([[1.0, 1.0], [1.0, 1.0]])  # two identical items
    assert principal_minor_det(dup, [0, 1]) == 0.0


def test_principal_minor_det_index_errors():
    k = KernelMatrix(np.eye(3))
    with pytest.raises(IndexOutOfRange):
        principal_minor_det(k, [0, 3])
    with pytest.raises(DuplicateIndex):
        principal_minor_det(k, [1, 1])


def test_schur_condition_diagonal_kernel():
    k = KernelMatrix(np.diag([2.0, 3.0, 4.0]))
    out = schur_condition(k, 1)
    np.testing.assert_allclose(out.entries, np.diag([2.0, 4.0]))


def test_schur_condition_two_by_two():
    k = KernelMatrix([[2.0, 1.0], [1.0, 2.0]])
    out = schur_condition(k, 0)
    np.testing.assert_allclose(out.entries, [[1.5]])
    # det identity: L[0][0] * det(reduced) == det(L)
    assert 2.0 * 1.5 == pytest.approx(det_cofactor(k.entries))


def test_schur_condition_singular_pivot():
    k = KernelMatrix(np.diag([1.0, 0.0]))
    with pytest.raises(SingularPivot):
        schur_condition(k, 1)


def test_schur_condition_determinant_identity_enumeration():
    # det(L_{S u {y}}) = L[y][y] * det(reduced_S) for every S, random 6x6 PSD
    rng = np.random.default_rng(7)
    for trial in range(5):
        k = random_psd_kernel(rng, 6)
        y = int(rng.integers(6))
        reduced = schur_condition(k, y)
        rest = [i for i in range(6) if i != y]
        for size in range(0, 6):
            for s in itertools.combinations(rest, size):
                lhs = principal_minor_det(k, list(s) + [y])
                pos = [rest.index(i) for i in s]
                rhs = k.entries[y, y] * det_cofactor(
                    reduced.entries[np.ix_(pos, pos)])
                assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-8)


def test_kernel_distance_examples():
    eye = KernelMatrix(np.eye(3))
    assert kernel_distance(eye, 1, 1) == 0.0
    assert kernel_distance(eye, 0, 2) == pytest.approx(math.sqrt(2.0))
    k = KernelMatrix([[2.0, 1.0], [1.0, 2.0]])
    assert kernel_distance(k, 0, 1) == pytest.approx(math.sqrt(2.0))


def test_kernel_distance_negative_radicand():
    bad = KernelMatrix([[0.1, 1.0], [1.0, 0.1]])  # indefinite but symmetric
    with pytest.raises(NegativeRadicand):
        kernel_distance(bad, 0, 1)


def test_kernel_distance_triangle_inequality_rbf():
    rng = np.random.default_rng(3)
    pts = PointSet(rng.standard_normal((10, 4)))
    k = rbf_kernel(pts, 1.3)
    for a, b, c in itertools.permutations(range(10), 3):
        assert kernel_distance(k, a, c) <= (
            kernel_distance(k, a, b) + kernel_distance(k, b, c) + 1e-9)


def test_rbf_kernel_is_psd():
    rng = np.random.default_rng(11)
    for bw in (0.3, 1.0, 5.0):
        pts = PointSet(rng.standard_normal((12, 3)) * 2.0)
        k = rbf_kernel(pts, bw)
        eigs = np.linalg.eigvalsh(k.entries)
        assert eigs[0] >= -1e-8 * eigs[-1]


def test_esp_equals_sum_of_principal_minors():
    rng = np.random.default_rng(5)
    for n in range(2, 9):
        k = random_psd_kernel(rng, n)
        spectrum = eigendecompose(k)
        for kk in range(0, n + 1):
            total = sum(principal_minor_det(k, list(y))
                        for y in itertools.combinations(range(n), kk))
            ek = elementary_symmetric(spectrum.eigenvalues, kk)
            assert ek == pytest.approx(total, rel=1e-8)


def test_esp_matches_bruteforce_products():
    rng = np.random.default_rng(9)
    vals = rng.random(7) * 3.0
    for kk in range(0, 8):
        assert elementary_symmetric(vals, kk) == pytest.approx(
            esp_bruteforce(vals, kk), rel=1e-10)


def test_spectrum_reconstruction_and_clamping():
    rng = np.random.default_rng(13)
    k = random_psd_kernel(rng, 8)
    s = eigendecompose(k)
    assert np.all(np.diff(s.eigenvalues) <= 0)
    assert np.all(s.eigenvalues >= 0)
    recon = s.eigenvectors @ np.diag(s.eigenvalues) @ s.eigenvectors.T
    scale = np.abs(k.entries).max()
    assert np.abs(recon - k.entries).max() <= 1e-8 * scale


def test_kernel_matrix_symmetry_validation():
    with pytest.raises(ValueError):
        KernelMatrix([[1.0, 0.5], [0.2, 1.0]])
    with pytest.raises(NotPSD):
        KernelMatrix.from_array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalue -1
