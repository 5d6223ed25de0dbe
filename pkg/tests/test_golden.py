import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from goldenconn import catalog
from goldenconn.errors import DegenerateEigenspace, NonConstantRank, NotAlmostProduct, NotGolden, NotPure
from goldenconn.exprdsl import PHI, PHIBAR
from goldenconn.fields import ChartSpec, MetricField, OneOneField, sample_points
from goldenconn.golden import (
    GoldenPair,
    adapted_orthonormal_frame,
    check_golden,
    check_product,
    eigen_ranks,
    induced_golden,
    induced_product,
    projectors,
    purity_residuals,
)

from conftest import ALL_ENTRIES, get_pair

PLANE = ChartSpec.euclidean(["x", "y"])


def test_constants():
    assert PHI**2 == pytest.approx(PHI + 1, rel=1e-15)
    assert PHIBAR**2 == pytest.approx(PHIBAR + 1, rel=1e-15)
    assert PHI + PHIBAR == pytest.approx(1.0)


def test_fibonacci_eigenvalues_are_golden_means():
    phi = get_pair("flat_fibonacci").phi_field.at([0.0, 0.0])
    np.testing.assert_allclose(sorted(np.linalg.eigvalsh(phi)), [PHIBAR, PHI], atol=1e-15)


@pytest.mark.parametrize("name", ALL_ENTRIES)
def test_correspondence_round_trips(name):
    pair = get_pair(name)
    pts = pair.points
    assert check_golden(pair.phi_field, pts) < 1e-9
    assert check_product(pair.j_field, pts) < 1e-9
    back = induced_golden(pair.j_field, pts)
    np.testing.assert_allclose(back.jet(pts).value, pair.phi_field.jet(pts).value, atol=1e-12)
    again = induced_product(back, pts)
    np.testing.assert_allclose(again.jet(pts).value, pair.j_field.jet(pts).value, atol=1e-12)


@pytest.mark.parametrize("name", ALL_ENTRIES)
def test_purity_forms_agree(name):
    pair = get_pair(name)
    r1, r2 = purity_residuals(pair.phi_field, pair.g, pair.points)
    assert r1 < 1e-10 and r2 < 1e-10


@pytest.mark.parametrize("name", ALL_ENTRIES)
def test_projectors_are_complementary_idempotents(name):
    pair = get_pair(name)
    plus, minus = pair.projectors
    p = plus.jet(pair.points).value
    m = minus.jet(pair.points).value
    eye = np.eye(pair.chart.dim)
    np.testing.assert_allclose(p + m, np.broadcast_to(eye, p.shape), atol=1e-14)
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    np.testing.assert_allclose(p @ m, 0 * p, atol=1e-12)
    # P+ projects onto the phi eigenspace of the golden mean
    phi = pair.phi_field.jet(pair.points).value
    np.testing.assert_allclose(phi @ p, PHI * p, atol=1e-12)
    np.testing.assert_allclose(phi @ m, PHIBAR * m, atol=1e-12)


@pytest.mark.parametrize("name", ALL_ENTRIES)
def test_adapted_frame(name):
    pair = get_pair(name)
    f = adapted_orthonormal_frame(pair, pair.points)
    gm = pair.g.jet(pair.points).value
    jm = pair.j_field.jet(pair.points).value
    eye = np.eye(pair.chart.dim)
    np.testing.assert_allclose(np.swapaxes(f, 1, 2) @ gm @ f, np.broadcast_to(eye, gm.shape), atol=1e-10)
    signs = np.r_[np.ones(pair.r), -np.ones(pair.s)]
    np.testing.assert_allclose(jm @ f, f * signs, atol=1e-10)


def test_twisted_book_frame_by_hand():
    pair = get_pair("twisted_book")
    f = adapted_orthonormal_frame(pair, [0.5, 0.1, 0.2])
    np.testing.assert_allclose(f, [[1, 0, 0], [0, 1, 0], [0, 0.5, 1]], atol=1e-12)


def test_ranks_and_summary():
    pair = get_pair("twisted_book")
    assert (pair.r, pair.s) == (2, 1)
    assert set(pair.summary) >= {"dim", "r", "s", "golden_residual", "purity_residual"}


def test_identity_is_not_golden():
    eye = OneOneField.from_strings(PLANE, [["1", "0"], ["0", "1"]])
    with pytest.raises(NotGolden) as info:
        GoldenPair(eye, MetricField.euclidean(PLANE))
    assert info.value.residual == pytest.approx(1.0)
    assert "Golden relation residual 1.0" in str(info.value)


def test_not_almost_product():
    with pytest.raises(NotAlmostProduct):
        induced_golden(OneOneField.from_strings(PLANE, [["2", "0"], ["0", "1"]]))
    with pytest.raises(NotAlmostProduct):
        projectors(OneOneField.from_strings(PLANE, [["0", "0"], ["0", "1"]]))


def test_impure_metric():
    j = OneOneField.from_strings(PLANE, [["1", "0"], ["0", "-1"]])
    g = MetricField.from_strings(PLANE, [["2", "0.5"], ["0.5", "1"]])
    with pytest.raises(NotPure):
        GoldenPair.from_product(j, g)


def test_non_constant_rank():
    # J squares to I on both sides of x = 0 but its trace jumps there
    j = OneOneField.from_strings(PLANE, [["x / abs(x)", "0"], ["0", "-1"]])
    pts = np.array([[0.5, 0.0], [-0.5, 0.0]])
    with pytest.raises(NonConstantRank):
        eigen_ranks(j, pts)


@given(st.floats(-3, 3), st.floats(0.2, 3))
@settings(max_examples=30, deadline=None)
def test_rotated_product_structures_are_valid(angle, stretch):
    # J = R diag(1,-1) R^T with a rotation R, g = R diag(a, b) R^T is pure
    c, s = np.cos(angle), np.sin(angle)
    r = np.array([[c, -s], [s, c]])
    j = r @ np.diag([1.0, -1.0]) @ r.T
    g = r @ np.diag([stretch, 1.0]) @ r.T
    jf = OneOneField.constant(PLANE, j)
    gf = MetricField(PLANE, OneOneField.constant(PLANE, g).entries)
    pair = GoldenPair.from_product(jf, gf)
    assert pair.summary["purity_residual"] < 1e-12
    assert (pair.r, pair.s) == (1, 1)


def test_degenerate_frame_detected():
    pair = get_pair("flat_fibonacci")
    with pytest.raises((DegenerateEigenspace, NonConstantRank)):
        adapted_orthonormal_frame(pair, [0.1, 0.1], tol=-1.0)
