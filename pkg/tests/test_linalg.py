import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dle.adapted import build_frame
from dle.linalg import (
    DEFAULT_REL_TOL,
    is_symplectic,
    null_space,
    orthonormal_range,
    pinv,
    projector,
    same_subspace,
    svd,
    symplectic_defect,
    symplectic_form,
    symplectic_inverse,
)

from printed_matrices import EX1, EX2, EX4
from dle.checks import random_system


def random_matrix(rng):
    m, n = rng.integers(1, 9, size=2)
    A = rng.uniform(-5, 5, size=(m, n))
    if m > 1 and rng.random() < 0.5:
        # force rank deficiency by duplicating rows
        k = int(rng.integers(1, m))
        A[k:] = A[rng.integers(0, k, size=m - k)]
    return A


def penrose_residual(A, Ap):
    return max(
        np.abs(A @ Ap @ A - A).max(),
        np.abs(Ap @ A @ Ap - Ap).max(),
        np.abs(A @ Ap - (A @ Ap).T).max(),
        np.abs(Ap @ A - (Ap @ A).T).max(),
    )


def scaled_penrose_residual(A, Ap):
    # each condition relative to the size of the matrix it reproduces
    a, ap = max(np.abs(A).max(), 1e-300), max(np.abs(Ap).max(), 1e-300)
    return max(
        np.abs(A @ Ap @ A - A).max() / a,
        np.abs(Ap @ A @ Ap - Ap).max() / ap,
        np.abs(A @ Ap - (A @ Ap).T).max(),
        np.abs(Ap @ A - (Ap @ A).T).max(),
    )


def check_bundle(A, b):
    m, n = A.shape
    assert np.abs(b.U.T @ b.U - np.eye(m)).max() <= 1e-10
    assert np.abs(b.V.T @ b.V - np.eye(n)).max() <= 1e-10
    assert np.all(np.diff(b.sigma_r) <= 0)
    assert np.all(b.sigma_r > b.tolerance_used)
    s1 = b.sigma_r[0] if b.rank else 0.0
    assert np.abs(A - b.reconstruct()).max() <= 1e-10 * max(1.0, s1)


def test_identity():
    b = svd(np.eye(3))
    assert b.rank == 3
    np.testing.assert_allclose(b.sigma_r, [1, 1, 1])
    np.testing.assert_allclose(pinv(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(projector(np.eye(3), "range"), np.eye(3))


def test_example_singular_values():
    b = svd(EX2["R"])
    assert b.rank == 1
    np.testing.assert_allclose(b.sigma_r, [2 * np.sqrt(3)])
    b = svd(EX4["R"])
    assert b.rank == 1
    np.testing.assert_allclose(b.sigma_r, [4.0])


def test_pinv_examples():
    np.testing.assert_allclose(pinv(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    Rp = pinv(EX2["R"])
    expected = np.zeros((3, 3))
    expected[1] = 1 / 6
    np.testing.assert_allclose(Rp, expected, atol=1e-12)
    # consistent with the printed E_0 block -R^+ L
    np.testing.assert_allclose(-Rp @ EX2["L"], EX2["E0"][:3, :3], atol=1e-12)


def test_left_null_projector_shrinking_loop():
    np.testing.assert_allclose(projector(EX2["R"], "left_nullspace"), EX2["P_left_null"], atol=1e-12)


def test_zero_matrix():
    b = svd(np.zeros((3, 2)))
    assert b.rank == 0
    assert b.U1.shape == (3, 0) and b.V1.shape == (2, 0)
    np.testing.assert_array_equal(pinv(np.zeros((3, 2))), np.zeros((2, 3)))
    np.testing.assert_allclose(projector(np.zeros((3, 2)), "nullspace"), np.eye(2))


def test_wide_and_tall_shapes():
    rng = np.random.default_rng(1)
    for shape in [(2, 5), (5, 2), (1, 4), (4, 1)]:
        A = rng.normal(size=shape)
        b = svd(A)
        check_bundle(A, b)
        assert penrose_residual(A, pinv(A)) <= 1e-9


def test_rejects_non_finite_and_bad_tol():
    with pytest.raises(ValueError):
        svd([[1.0, np.nan]])
    with pytest.raises(ValueError):
        svd([[1.0, np.inf]])
    with pytest.raises(ValueError):
        svd(np.eye(2), rel_tol=0.0)
    with pytest.raises(ValueError):
        svd(np.zeros((2, 2, 2)))


def test_unknown_space():
    with pytest.raises(ValueError, match="unknown space"):
        projector(np.eye(2), "kernel")


def test_sign_canonicalization():
    rng = np.random.default_rng(2)
    for _ in range(50):
        A = random_matrix(rng)
        b = svd(A)
        for col in b.V.T:
            i = int(np.argmax(np.abs(col) >= np.abs(col).max() - 1e-12))
            assert col[i] > 0
        # flipping the sign of A leaves V unchanged
        np.testing.assert_allclose(svd(-A).V1, b.V1, atol=1e-10)


def test_degenerate_cluster_is_deterministic_under_rotation():
    # rotating the input inside a degenerate block must not change V
    Q, _ = np.linalg.qr(np.random.default_rng(3).normal(size=(3, 3)))
    A = Q @ np.diag([2.0, 2.0, 1.0])
    b1 = svd(A)
    b2 = svd(A.copy())
    np.testing.assert_array_equal(b1.V, b2.V)
    assert same_subspace(b1.V1[:, :2], np.eye(3)[:, :2])


def test_rank_threshold_is_relative():
    A = np.diag([1.0, 1e-13])
    assert svd(A).rank == 1
    assert svd(A, rel_tol=1e-15).rank == 2
    # absolute floor catches an all-noise matrix
    assert svd([[1e-17]]).rank == 1
    assert svd([[1e-17]], abs_tol=1e-12).rank == 0


def test_500_random_matrices():
    rng = np.random.default_rng(1234)
    for _ in range(500):
        A = random_matrix(rng)
        b = svd(A)
        check_bundle(A, b)
        assert penrose_residual(A, pinv(A, bundle=b)) <= 1e-9
        for space in ("range", "rowspace", "nullspace", "left_nullspace"):
            P = projector(A, space, bundle=b)
            assert np.abs(P - P.T).max() <= 1e-10
            assert np.abs(P @ P - P).max() <= 1e-10
        np.testing.assert_allclose(
            projector(A, "range", bundle=b) + projector(A, "left_nullspace", bundle=b), np.eye(A.shape[0]),
            atol=1e-10)
        assert np.abs(A @ b.V2).max() <= 1e-9 if b.V2.size else True
        assert np.abs(projector(A, "nullspace", bundle=b) @ A.T).max() <= 1e-9


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(-5, 5, allow_nan=False, allow_infinity=False)))
def test_penrose_conditions_property(A):
    b = svd(A)
    check_bundle(A, b)
    # attainable accuracy degrades with the condition of the retained spectrum
    kappa = b.sigma_r[0] / b.sigma_r[-1] if b.rank else 1.0
    assert scaled_penrose_residual(A, pinv(A, bundle=b)) <= 1e-9 + 1e-13 * kappa


def test_range_and_null_helpers():
    A = EX2["R"]
    assert orthonormal_range(A).shape == (3, 1)
    assert null_space(A).shape == (3, 2)
    assert np.abs(A @ null_space(A)).max() < 1e-12


def test_symplectic_form():
    s = symplectic_form(3)
    np.testing.assert_array_equal(s.T, -s)
    np.testing.assert_array_equal(s @ s, -np.eye(6))


def test_is_symplectic():
    assert is_symplectic(np.eye(4))
    assert is_symplectic(EX1["Wdot"])
    assert not is_symplectic(np.diag([2.0, 2.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        is_symplectic(np.eye(3))
    with pytest.raises(ValueError):
        symplectic_defect(np.ones((2, 4)))


def test_symplectic_inverse():
    np.testing.assert_allclose(symplectic_inverse(np.eye(4)), np.eye(4))
    s = symplectic_form(2)
    np.testing.assert_allclose(symplectic_inverse(s), -s)
    W = EX1["Wdot"]
    Winv = symplectic_inverse(W)
    np.testing.assert_allclose(W @ Winv, np.eye(6), atol=1e-9)
    # pattern [[0, -U], [U, -L U]] with the example's own U
    U, L = EX1["U"], EX1["L"]
    expected = np.block([[np.zeros((3, 3)), -U], [U, -L @ U]])
    np.testing.assert_allclose(Winv, expected, atol=1e-9)
    with pytest.raises(ValueError, match="not symplectic"):
        symplectic_inverse(np.diag([2.0, 2.0, 1.0, 1.0]))


def test_symplectic_inverse_on_generated_frames():
    rng = np.random.default_rng(7)
    for _ in range(100):
        f = build_frame(random_system(rng))
        for W in (f.Wdot, f.Wddot):
            np.testing.assert_allclose(symplectic_inverse(W) @ W, np.eye(W.shape[0]), atol=1e-9)


def test_outputs_are_read_only():
    b = svd(np.eye(2))
    with pytest.raises(ValueError):
        b.U1[0, 0] = 5.0


def test_default_tolerance_value():
    assert DEFAULT_REL_TOL == 1e-12
