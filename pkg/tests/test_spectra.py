import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import spiked_panel
from optbias.errors import DimensionError, InvalidProjector, RankDeficient, SpikeBelowNoiseFloor
from optbias.spectra import (
    BASIS_TOL, DataMatrix, bulk_level, make_centering, sample_spectrum, select_eigvecs, select_singvecs,
)


def _leading_positive(cols):
    return all(c[np.argmax(np.abs(c) > BASIS_TOL)] > 0 for c in cols.T)


def test_centering_two_points():
    J = make_centering(2)
    np.testing.assert_allclose(J.matrix(), [[0.5, -0.5], [-0.5, 0.5]])


def test_identity_projector(rng):
    J = make_centering(5, center=False)
    v = rng.standard_normal(5)
    assert J.mode == "identity"
    np.testing.assert_array_equal(J.apply(v), v)


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=12).filter(lambda g: np.linalg.norm(g) > 1e-3))
def test_projector_kills_g(g):
    g = np.array(g)
    J = make_centering(g.size, g)
    assert np.linalg.norm(J.apply(g)) <= 1e-14 * max(1.0, np.linalg.norm(g))
    M = J.matrix()
    np.testing.assert_allclose(M @ M, M, atol=1e-12)


def test_projector_right_apply_matches_matrix(rng):
    J = make_centering(7, rng.standard_normal(7))
    Y = rng.standard_normal((4, 7))
    np.testing.assert_allclose(J.right_apply(Y), Y @ J.matrix(), atol=1e-13)


@pytest.mark.parametrize("g", [np.zeros(3), np.ones(4)])
def test_bad_centering_vector(g):
    with pytest.raises(InvalidProjector):
        make_centering(3, g)


def test_centering_vector_with_centering_off():
    with pytest.raises(InvalidProjector):
        make_centering(3, np.ones(3), center=False)


def test_data_matrix_validation():
    with pytest.raises(DimensionError):
        DataMatrix(np.ones((3, 1)))
    with pytest.raises(DimensionError):
        DataMatrix(np.array([[1.0, np.nan]]))
    Y = DataMatrix(np.arange(12.0).reshape(4, 3))
    assert Y.head(2).p == 2 and Y.n == 3


def test_select_identity_is_exact():
    out = select_singvecs(np.eye(6), 4)
    assert np.array_equal(out, np.eye(6)[:, :4])


def test_select_diag_first_axis():
    out = select_singvecs(np.diag([3.0, 1.0]), 1)
    np.testing.assert_array_equal(out[:, 0], [1.0, 0.0])


def test_select_matches_dense_svd(rng):
    A = rng.standard_normal((6, 4))
    out = select_singvecs(A, 3)
    U = np.linalg.svd(A)[0][:, :3]
    signs = np.sign(np.sum(U * out, axis=0))
    np.testing.assert_allclose(out, U * signs, atol=1e-12)
    assert _leading_positive(out)


def test_select_is_bit_deterministic(rng):
    A = rng.standard_normal((30, 8))
    assert np.array_equal(select_singvecs(A, 5), select_singvecs(A.copy(order="F"), 5))


def test_select_tied_block_is_axis_aligned():
    # singular value 2 twice: the tie is resolved by projecting e1, e2, ...
    A = np.diag([2.0, 2.0, 1.0])
    R = np.linalg.qr(np.random.default_rng(1).standard_normal((2, 2)))[0]
    A[:2, :2] = 2.0 * R
    out = select_singvecs(A, 2)
    np.testing.assert_allclose(out[:, :2], np.eye(3)[:, :2], atol=1e-12)


def test_select_too_many():
    with pytest.raises(DimensionError):
        select_singvecs(np.ones((3, 2)), 3)


def test_select_eigvecs_descending(rng):
    X = rng.standard_normal((5, 5))
    vals, vecs = select_eigvecs(X @ X.T, 3)
    assert np.all(np.diff(vals) < 0)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(3), atol=1e-12)
    np.testing.assert_allclose((X @ X.T) @ vecs, vecs * vals, atol=1e-10)


def test_gram_trick_matches_dense(rng):
    p, n, q = 40, 10, 2
    _, Y = spiked_panel(rng, p, n, q)
    J = make_centering(n)
    spec = sample_spectrum(Y, J, q)
    S = Y @ J.matrix() @ Y.T / n
    w, V = np.linalg.eigh(S)
    w, V = w[::-1], V[:, ::-1]
    np.testing.assert_allclose(spec.eigvals, w[:q], rtol=1e-9)
    align = np.abs(np.sum(spec.eigvecs * V[:, :q], axis=0))
    assert np.all(align >= 1 - 1e-8)
    # the sign rule is applied to the n-dimensional vectors nu(J Y^T)
    assert _leading_positive(J.right_apply(Y).T @ spec.eigvecs)
    np.testing.assert_allclose(spec.eigvecs.T @ spec.eigvecs, np.eye(q), atol=1e-12)


def test_rank_counts(rng):
    _, Y = spiked_panel(rng, 50, 12, 3)
    assert sample_spectrum(Y, make_centering(12), 3).n_plus == 11
    assert sample_spectrum(Y, make_centering(12, center=False), 3).n_plus == 12


def test_rank_deficient(rng):
    Y = np.outer(rng.standard_normal(20), rng.standard_normal(6))
    with pytest.raises(RankDeficient):
        sample_spectrum(Y, None, 1)


def test_flat_spectrum_has_no_spike():
    n = 6
    with pytest.raises(SpikeBelowNoiseFloor):
        sample_spectrum(np.sqrt(n) * np.eye(n), None, 1)


def test_mp_bulk_with_constant_tail():
    c, tail, n, p = 2.5, 9, 120, 500
    got = bulk_level(c * tail, tail + 7, 7, n, p, "mp")
    assert got == pytest.approx(c * tail * (1 + n / p) / (tail + n / p), rel=1e-14)
    assert bulk_level(c * tail, tail + 7, 7, n, p, "plain") == pytest.approx(c)


@given(st.integers(2, 200), st.integers(1, 5000), st.floats(0.1, 100))
@settings(max_examples=50)
def test_mp_bulk_relation(tail, p, level):
    n = 120
    plain = bulk_level(level * tail, tail + 3, 3, n, p, "plain")
    mp = bulk_level(level * tail, tail + 3, 3, n, p, "mp")
    assert mp < plain * (1 + n / p)
    assert abs(bulk_level(level * tail, tail + 3, 3, n, 10 ** 12, "mp") - plain) <= 1e-8 * plain


def test_spectrum_fields(rng):
    p, n, q = 300, 25, 2
    _, Y = spiked_panel(rng, p, n, q)
    spec = sample_spectrum(Y, make_centering(n), q, "mp")
    assert spec.p == p
    assert np.all((spec.psi > 0) & (spec.psi < 1))
    np.testing.assert_allclose(spec.psi_sq, 1 - spec.kappa_sq / spec.eigvals)
    assert spec.gamma_hat_sq == pytest.approx(n * spec.kappa_sq / p)


def test_spectrum_deterministic(rng):
    _, Y = spiked_panel(rng, 100, 20, 3)
    a = sample_spectrum(Y, make_centering(20), 3)
    b = sample_spectrum(Y.copy(), make_centering(20), 3)
    assert np.array_equal(a.eigvecs, b.eigvecs) and np.array_equal(a.eigvals, b.eigvals)
