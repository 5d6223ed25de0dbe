import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from goldenconn import catalog
from goldenconn import connections as cn
from goldenconn.errors import NonUniqueSolution, NotTorsionFree, SolverResidualTooLarge
from goldenconn.fields import VectorField, sample_points
from goldenconn.jets import Jet

import oracles
from conftest import ALL_ENTRIES, get_pair

POINT = (sp.Rational(1, 2), sp.Rational(1, 5), sp.Rational(-1, 3))


def _sym(name):
    e = catalog.get(name)
    xs = oracles.symbols(e.chart.coords)
    g = oracles.matrix(e.g.texts(), e.chart.coords)
    pair = get_pair(name)
    J = oracles.matrix(pair.j_field.texts(), e.chart.coords)
    pt = POINT[: e.chart.dim]
    return pair, xs, g, J, pt, np.array([float(v) for v in pt])


ORACLE_ENTRIES = ["twisted_book", "integrable_nonparallel", "product_example"]


@pytest.mark.parametrize("name", ORACLE_ENTRIES)
def test_levi_civita_matches_symbolic_christoffels(name):
    pair, xs, g, J, pt, p = _sym(name)
    want = oracles.numeric(oracles.christoffel(g, xs), xs, pt)
    np.testing.assert_allclose(pair.levi_civita.coefficients(p), want, atol=1e-13)


@pytest.mark.parametrize("name", ORACLE_ENTRIES)
def test_first_canonical_matches_symbolic(name):
    pair, xs, g, J, pt, p = _sym(name)
    want = oracles.numeric(oracles.first_canonical(g, J, xs), xs, pt)
    np.testing.assert_allclose(pair.first_canonical.coefficients(p), want, atol=1e-13)


@pytest.mark.parametrize("name", ["twisted_book", "integrable_nonparallel"])
def test_levi_civita_curvature_matches_symbolic(name):
    pair, xs, g, J, pt, p = _sym(name)
    want = oracles.numeric(oracles.riemann(oracles.christoffel(g, xs), xs), xs, pt)
    np.testing.assert_allclose(cn.curvature(pair.levi_civita, p), want, atol=1e-12)


@pytest.mark.parametrize("name", ALL_ENTRIES)
def test_levi_civita_is_torsion_free_and_metric(name):
    pair = get_pair(name)
    pts = pair.points
    lc = pair.levi_civita
    assert np.abs(cn.torsion_tensor(lc, pts)).max() < 1e-12
    for i in range(pair.chart.dim):
        assert np.abs(cn.covariant_deriv_metric(lc, pair.g, i, pts)).max() < 1e-12


def test_coefficient_jets_match_finite_differences(twisted):
    p = np.array([0.3, -0.4, 0.2])
    law = twisted.first_canonical
    jet = law.jet(p[None], 1)
    for k, i, j in [(2, 1, 0), (1, 2, 1), (2, 2, 1)]:
        fd = oracles.central_difference(lambda q: law.coefficients(q)[k, i, j], p, 1e-6)
        np.testing.assert_allclose(jet.parts[1][0, k, i, j], fd, atol=1e-8)


# ---------------------------------------------------------------------------
# Nijenhuis tensor
# ---------------------------------------------------------------------------


def test_twisted_book_nijenhuis_values(twisted):
    pts = sample_points(twisted.chart, 20, 3)
    nj = cn.nijenhuis_tensor(twisted.j_field, pts)
    nphi = cn.nijenhuis_tensor(twisted.phi_field, pts)
    np.testing.assert_allclose(nj[:, :, 0, 1], np.tile([0, 0, 4.0], (20, 1)), atol=1e-8)
    np.testing.assert_allclose(nphi[:, :, 0, 1], np.tile([0, 0, 5.0], (20, 1)), atol=1e-8)


def test_nijenhuis_matches_symbolic_and_finite_differences(twisted):
    e = catalog.get("twisted_book")
    xs = oracles.symbols(e.chart.coords)
    J = oracles.matrix(twisted.j_field.texts(), e.chart.coords)
    p = np.array([0.5, 0.2, -1 / 3])
    want = oracles.numeric(oracles.nijenhuis(J, xs), xs, POINT)
    np.testing.assert_allclose(cn.nijenhuis_tensor(twisted.j_field, p), want, atol=1e-13)

    # finite differences of J's values only
    h = 1e-6
    dj = np.stack(
        [(twisted.j_field.at(p + h * e_) - twisted.j_field.at(p - h * e_)) / (2 * h) for e_ in np.eye(3)], axis=-1
    )
    jm = twisted.j_field.at(p)
    fd = (
        np.einsum("mi,kjm->kij", jm, dj)
        - np.einsum("mj,kim->kij", jm, dj)
        + np.einsum("km,mij->kij", jm, dj)
        - np.einsum("km,mji->kij", jm, dj)
    )
    np.testing.assert_allclose(cn.nijenhuis_tensor(twisted.j_field, p), fd, atol=1e-8)


def test_nijenhuis_general_fields_is_tensorial(twisted):
    chart = twisted.chart
    X = VectorField.from_strings(chart, ["1 + y", "x*z", "0"])
    Y = VectorField.from_strings(chart, ["0", "exp(z)", "x"])
    pts = twisted.points
    n = cn.nijenhuis_tensor(twisted.j_field, pts)
    want = np.einsum("Zkij,Zi,Zj->Zk", n, X.jet(pts).value, Y.jet(pts).value)
    np.testing.assert_allclose(cn.nijenhuis(twisted.j_field, X, Y, pts), want, atol=1e-12)


@pytest.mark.parametrize("name", ALL_ENTRIES)
def test_nijenhuis_via_torsion_free_connection(name):
    pair = get_pair(name)
    chart = pair.chart
    pts = pair.points
    for i in range(chart.dim):
        for j in range(i + 1, chart.dim):
            X, Y = VectorField.coordinate(chart, i), VectorField.coordinate(chart, j)
            direct = cn.nijenhuis(pair.j_field, X, Y, pts)
            via = cn.nijenhuis_via_connection(pair.levi_civita, pair.j_field, X, Y, pts)
            np.testing.assert_allclose(via, direct, atol=1e-12)


def test_nijenhuis_via_connection_rejects_torsion(twisted):
    X, Y = VectorField.coordinate(twisted.chart, 0), VectorField.coordinate(twisted.chart, 1)
    with pytest.raises(NotTorsionFree):
        cn.nijenhuis_via_connection(twisted.first_canonical, twisted.j_field, X, Y, twisted.points)


# ---------------------------------------------------------------------------
# Adapted laws
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name", ALL_ENTRIES)
def test_schouten_equals_nabla0_and_phi_formula(name):
    pair = get_pair(name)
    pts = pair.points
    for base in (pair.levi_civita, pair.levi_civita.plus(cn.PotentialTensor.constant(pair.chart, _rand(pair.chart.dim, 5)))):
        s = cn.schouten(base, pair.j_field).coefficients(pts)
        z = cn.nabla0_type(base, pair.j_field).coefficients(pts)
        c = cn.crasmareanu_formula(base, pair.phi_field).coefficients(pts)
        assert np.abs(s - z).max() < 1e-12
        assert np.abs(c - z).max() < 1e-12


def _rand(n, seed):
    return np.random.default_rng(seed).uniform(-1, 1, (n, n, n))


@pytest.mark.parametrize("name", ALL_ENTRIES)
def test_schouten_and_vranceanu_are_adapted_to_phi(name):
    pair = get_pair(name)
    for law in (cn.schouten(pair.levi_civita, pair.j_field), cn.vranceanu(pair.levi_civita, pair.j_field)):
        res = cn.is_adapted(law, pair.phi_field, None, pair.points)
        assert res["verdict"] and res["equivalence_holds"]


@pytest.mark.parametrize("name", ALL_ENTRIES)
def test_first_canonical_is_natural(name):
    pair = get_pair(name)
    res = cn.is_adapted(pair.first_canonical, pair.phi_field, pair.g, pair.points, tol=1e-9)
    assert res["verdict"]
    assert res["phi_residual"] < 1e-9 and res["g_residual"] < 1e-9


def test_levi_civita_adaptedness_ground_truth():
    for name in catalog.NAMED:
        pair = get_pair(name)
        res = cn.is_adapted(pair.levi_civita, pair.phi_field, pair.g, pair.points)
        assert res["verdict"] == catalog.get(name).ground_truth["levi_civita_adapted"]
        assert res["equivalence_holds"]


def test_integrable_nonparallel_covariant_derivative_by_hand():
    pair = get_pair("integrable_nonparallel")
    c = np.stack([cn.covariant_deriv_tensor11(pair.levi_civita, pair.j_field, i, [0.5, 0.5]) for i in range(2)])
    assert np.abs(c).max() > 1e-3


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_projections_land_in_the_natural_set(seed):
    pair = get_pair("twisted_book")
    q = cn.PotentialTensor.constant(pair.chart, _rand(3, seed))
    proj = cn.metric_skew(pair.g, cn.obata(pair.j_field, q))
    l_res, s_res = cn.membership_residuals(proj, pair.j_field, pair.g, pair.points)
    assert l_res < 1e-12 and s_res < 1e-12
    # projections are idempotent
    again = cn.metric_skew(pair.g, cn.obata(pair.j_field, proj))
    np.testing.assert_allclose(again.values(pair.points), proj.values(pair.points), atol=1e-12)
    law = pair.first_canonical.plus(proj)
    assert cn.is_adapted(law, pair.phi_field, pair.g, pair.points)["verdict"]


def test_adapted_equivalence_on_non_adapted_law(twisted):
    q = cn.PotentialTensor.constant(twisted.chart, _rand(3, 1))
    res = cn.is_adapted(twisted.first_canonical.plus(q), twisted.phi_field, twisted.g, twisted.points)
    assert not res["verdict"] and res["equivalence_holds"]


# ---------------------------------------------------------------------------
# Well adapted connection
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name", ORACLE_ENTRIES)
def test_well_adapted_matches_exact_solution(name):
    pair, xs, g, J, pt, p = _sym(name)
    want, free = oracles.well_adapted_exact(g, J, xs, pt)
    assert free == 0
    np.testing.assert_allclose(pair.well_adapted.coefficients(p), want, atol=1e-12)


@pytest.mark.parametrize("name", ALL_ENTRIES)
def test_well_adapted_conditions(name):
    pair = get_pair(name)
    sol = cn.solve_well_adapted(pair.g, pair.j_field, pair.points)
    assert sol.residual.max() < 1e-8
    assert np.all(sol.nullity == 0)
    law = pair.well_adapted
    res = cn.is_adapted(law, pair.phi_field, pair.g, pair.points)
    assert res["verdict"]
    jm = pair.j_field.jet(pair.points).value
    gm = pair.g.jet(pair.points).value
    plus, minus = cn.split_torsion_condition(cn.torsion_of(sol.gamma), jm, gm)
    assert np.abs(plus).max() < 1e-10 and np.abs(minus).max() < 1e-10


def test_flat_well_adapted_vanishes(flat):
    assert np.abs(flat.well_adapted.coefficients(flat.points)).max() < 1e-10


def test_numeric_curvature_against_exact(flat):
    pair = get_pair("integrable_nonparallel")
    # here the well adapted law equals the first canonical law, so the finite
    # difference curvature can be compared with the AD one
    r_w = cn.curvature(pair.well_adapted, pair.points)
    r_0 = cn.curvature(pair.first_canonical, pair.points)
    np.testing.assert_allclose(r_w, r_0, atol=1e-6)


def test_solver_errors(twisted, monkeypatch):
    with pytest.raises(SolverResidualTooLarge):
        cn.solve_well_adapted(twisted.g, twisted.j_field, twisted.points[:2], residual_tol=-1.0)
    monkeypatch.setattr(cn, "NULLSPACE_RTOL", 0.5)
    with pytest.raises(NonUniqueSolution):
        cn.solve_well_adapted(twisted.g, twisted.j_field, twisted.points[:2])


def test_derivation_law_tags():
    pair = get_pair("twisted_book")
    assert pair.levi_civita.tag == cn.AD
    assert pair.well_adapted.tag == cn.NUMERIC
    with pytest.raises(ValueError):
        pair.well_adapted.jet(pair.points, 2)
    assert isinstance(pair.first_canonical.difference(pair.levi_civita).jet(pair.points, 1), Jet)
