"""Numerical checks of the identities, integrability criteria and coincidences.

All checks evaluate tensors on the coordinate fields ``d_i``.  Every tensor
involved is C-infinity-multilinear in its arguments, so vanishing on a
coordinate basis at a point is equivalent to vanishing on all vectors there.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import connections as cn
from .errors import DependentBasis, InvalidRank
from .fields import SplitMix64, as_points
from .golden import GoldenPair, validation_points
from .jets import Jet

DEFAULT_TOL = 1e-8
CURVATURE_TOL = 1e-4
COINCIDENCE_TOL = 1e-8
# residuals below this are treated as rounding noise when a check fails only
# because the requested tolerance is tighter than double precision allows
NOISE_FLOOR = 1e-10
SCHEMA_VERSION = "1"


@dataclass
class IdentityCheck:
    id: str
    anchor: str
    residual: float
    tol: float
    passed: bool
    worst_point: list
    universal: bool = True

    @property
    def tolerance_bound(self) -> bool:
        """Failed, but only because ``tol`` sits below the rounding floor."""
        return not self.passed and self.residual <= NOISE_FLOOR

    def status(self) -> str:
        if self.passed:
            return "pass"
        return "tol-bound" if self.tolerance_bound else "FAIL"


def _check(id_, anchor, res, pts, tol, universal=True) -> IdentityCheck:
    """Build a check from per-point residuals ``res``."""
    res = np.asarray(res, dtype=float).reshape(len(pts), -1).max(axis=1)
    k = int(np.argmax(res))
    worst = float(res[k])
    return IdentityCheck(id_, anchor, worst, float(tol), bool(worst <= tol), [float(v) for v in pts[k]], universal)


def _sup(a: np.ndarray) -> np.ndarray:
    """Per-point sup norm over all trailing axes."""
    return np.abs(a).reshape(a.shape[0], -1).max(axis=1)


class _Data:
    """Pointwise tensors shared by the checks of one pair."""

    def __init__(self, pair: GoldenPair, points):
        self.pair = pair
        self.pts = validation_points(pair.chart, points)
        pts = self.pts
        self.jm = pair.j_field.jet(pts, 0).value
        self.gm = pair.g.jet(pts, 0).value
        self.n_phi = cn.nijenhuis_of(pair.phi_field.jet(pts, 1)).value
        self.n_j = cn.nijenhuis_of(pair.j_field.jet(pts, 1)).value
        self.lc = pair.levi_civita.jet(pts, 0)
        self.t0 = cn.torsion_of(pair.first_canonical.jet(pts, 0))
        self.nabla_g_j = cn.nabla_11(self.lc, pair.j_field.jet(pts, 1)).value  # [i, k, j]


def _data(pair, points) -> _Data:
    return points if isinstance(points, _Data) else _Data(pair, points)


# ---------------------------------------------------------------------------
# Integrability
# ---------------------------------------------------------------------------


def integrability_verdict(pair: GoldenPair, points=None, tol: float = DEFAULT_TOL) -> dict:
    """Sup of ``|N_phi(d_i, d_j)|`` and of ``|N_J(d_i, d_j)|`` with verdicts."""
    d = _data(pair, points)
    nphi = _sup(d.n_phi)
    nj = _sup(d.n_j)
    phi_ok = bool(nphi.max() < tol)
    j_ok = bool(nj.max() < tol)
    return {
        "max_nijenhuis_phi": float(nphi.max()),
        "max_nijenhuis_j": float(nj.max()),
        "scaling_residual": float(_sup(d.n_j - 0.8 * d.n_phi).max()),
        "integrable": phi_ok,
        "verdicts_agree": phi_ok == j_ok,
    }


def check_nijenhuis_scaling(pair, points=None, tol: float = DEFAULT_TOL) -> IdentityCheck:
    d = _data(pair, points)
    return _check("nijenhuis_scaling", "N_J = (4/5) N_phi", _sup(d.n_j - 0.8 * d.n_phi), d.pts, tol)


def check_t0_nijenhuis(pair, points=None, tol: float = DEFAULT_TOL) -> IdentityCheck:
    """``T0(JX, JY) + T0(X, Y) + N_J(X, Y)/2 = 0``."""
    d = _data(pair, points)
    tjj = np.einsum("Zkab,Zai,Zbj->Zkij", d.t0, d.jm, d.jm)
    return _check(
        "t0_nijenhuis_relation", "T0(JX,JY) + T0(X,Y) = -N_J(X,Y)/2", _sup(tjj + d.t0 + 0.5 * d.n_j), d.pts, tol
    )


def restricted_torsion(pair, points=None) -> tuple[np.ndarray, np.ndarray]:
    """``T0(P+ d_i, P+ d_j)`` and ``T0(P- d_i, P- d_j)`` per point."""
    d = _data(pair, points)
    eye = np.eye(pair.chart.dim)
    out = []
    for proj in (0.5 * (eye + d.jm), 0.5 * (eye - d.jm)):
        out.append(np.einsum("Zkab,Zai,Zbj->Zkij", d.t0, proj, proj))
    return out[0], out[1]


def check_torsion_criterion(pair, points=None, tol: float = DEFAULT_TOL) -> IdentityCheck:
    """First canonical torsion restricted to each eigen-distribution.

    ``passed`` means both restrictions vanish, i.e. the torsion criterion
    declares ``phi`` integrable; ``agrees`` compares with the Nijenhuis verdict.
    """
    d = _data(pair, points)
    plus, minus = restricted_torsion(pair, d)
    res = np.maximum(_sup(plus), _sup(minus))
    chk = _check("torsion_criterion", "T0 = 0 on D_phi and on D_phibar <=> N_phi = 0", res, d.pts, tol, False)
    chk.agrees = chk.passed == integrability_verdict(pair, d, tol)["integrable"]
    chk.plus_residual = float(_sup(plus).max())
    chk.minus_residual = float(_sup(minus).max())
    return chk


# ---------------------------------------------------------------------------
# Universal identities for nabla^g J and T0
# ---------------------------------------------------------------------------


def nablagj_residuals(pair, points=None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Residual tensors ``[Z, x, y, z]`` of the three ``nabla^g J`` identities."""
    d = _data(pair, points)
    c, jm, gm = d.nabla_g_j, d.jm, d.gm
    a = np.einsum("Zxky,Zkz->Zxyz", c, gm)  # g((nabla_X J)Y, Z)
    b = np.einsum("Zxka,Zay,Zkz->Zxyz", c, jm, gm)  # g((nabla_X J)JY, Z)
    e = np.einsum("Zxky,Zkl,Zlz->Zxyz", c, gm, jm)  # g((nabla_X J)Y, JZ)
    return a - np.swapaxes(a, 2, 3), b + e, b + np.swapaxes(b, 2, 3)


def check_nablagJ_identities(pair, points=None, tol: float = DEFAULT_TOL) -> IdentityCheck:
    d = _data(pair, points)
    r1, r2, r3 = nablagj_residuals(pair, d)
    res = np.maximum(np.maximum(_sup(r1), _sup(r2)), _sup(r3))
    return _check(
        "nablag_J_identities",
        "(nabla^g_X J) is g-symmetric and g((nabla^g_X J)JY,Z) = -g((nabla^g_X J)Y,JZ) = -g((nabla^g_X J)JZ,Y)",
        res,
        d.pts,
        tol,
    )


def toro_nijenhuis_sides(pair, points=None) -> tuple[np.ndarray, np.ndarray]:
    """Both sides, indexed ``[Z, x, y, z]`` for ``(X, Y, Z) = (d_x, d_y, d_z)``."""
    d = _data(pair, points)
    t, jm, gm = d.t0, d.jm, d.gm
    g_t = np.einsum("Zkxy,Zkz->Zxyz", t, gm)  # g(T(X,Y),Z)
    # g(T(JX,Y),JZ)
    g_tj = np.einsum("Zkay,Zax,Zkl,Zlz->Zxyz", t, jm, gm, jm)
    lhs = g_t - np.swapaxes(g_t, 1, 3) + g_tj - np.swapaxes(g_tj, 1, 3)
    rhs = 0.5 * np.einsum("Zkxz,Zky->Zxyz", d.n_j, gm)
    return lhs, rhs


def check_toro_nijenhuis(pair, points=None, tol: float = DEFAULT_TOL) -> IdentityCheck:
    d = _data(pair, points)
    lhs, rhs = toro_nijenhuis_sides(pair, d)
    return _check(
        "toro_nijenhuis",
        "g(T0(X,Y),Z) - g(T0(Z,Y),X) + g(T0(JX,Y),JZ) - g(T0(JZ,Y),JX) = g(N_J(X,Z),Y)/2",
        _sup(lhs - rhs),
        d.pts,
        tol,
    )


# ---------------------------------------------------------------------------
# Connections
# ---------------------------------------------------------------------------


def check_first_canonical(pair, points=None, tol: float = DEFAULT_TOL) -> IdentityCheck:
    d = _data(pair, points)
    gamma = pair.first_canonical.jet(d.pts, 0)
    rj = _sup(cn.nabla_11(gamma, pair.j_field.jet(d.pts, 1)).value)
    rg = _sup(cn.nabla_metric(gamma, pair.g.jet(d.pts, 1)).value)
    return _check("first_canonical_adapted", "nabla0 g = 0 and nabla0 J = 0", np.maximum(rj, rg), d.pts, tol)


def check_schouten_formulas(pair, points=None, tol: float = DEFAULT_TOL) -> IdentityCheck:
    """Schouten, ``nabla - (nabla J)J/2`` and the phi-formula agree over Levi-Civita."""
    d = _data(pair, points)
    base = pair.levi_civita
    a = cn.schouten(base, pair.j_field).jet(d.pts, 0).value
    b = cn.nabla0_type(base, pair.j_field).jet(d.pts, 0).value
    c = cn.crasmareanu_formula(base, pair.phi_field).jet(d.pts, 0).value
    res = np.maximum(_sup(a - b), _sup(c - b))
    return _check("schouten_formulas", "Schouten = nabla - (nabla J)J/2 = phi-formula", res, d.pts, tol)


def check_well_adapted_solver(pair, points=None, tol: float = DEFAULT_TOL):
    """Solver residual and uniqueness; returns the check and the solution."""
    d = _data(pair, points)
    sol = cn.solve_well_adapted(pair.g, pair.j_field, d.pts, residual_tol=np.inf)
    chk = _check(
        "well_adapted_solver",
        "nabla^w g = 0, nabla^w J = 0, well-adapted torsion condition",
        sol.residual,
        d.pts,
        tol,
    )
    if np.any(sol.nullity > 0):
        chk.passed = False
    chk.max_nullity = int(sol.nullity.max())
    return chk, sol


def gstructure_integrability(pair, points=None, tol: float = DEFAULT_TOL, curvature_tol: float = CURVATURE_TOL) -> dict:
    """Torsion (exact from the solved coefficients) and curvature (finite differences) of the well adapted law."""
    d = _data(pair, points)
    law = pair.well_adapted
    gj = law.jet(d.pts, 1)
    t = _sup(cn.torsion_of(gj.value))
    r = _sup(cn.curvature_of(gj))
    return {
        "max_torsion": float(t.max()),
        "max_curvature": float(r.max()),
        "torsion_check": _check("well_adapted_torsion", "T^w = 0", t, d.pts, tol, False),
        "curvature_check": _check("well_adapted_curvature", "R^w = 0", r, d.pts, curvature_tol, False),
        "integrable": bool(t.max() < tol and r.max() < curvature_tol),
    }


COINCIDENCE_LABELS = ("levi-civita", "first-canonical", "well-adapted")


def connection_coincidence(pair, points=None, tol: float = COINCIDENCE_TOL) -> dict:
    """Pairwise sup distances of the three distinguished laws and both coincidence clauses."""
    d = _data(pair, points)
    gammas = [pair.levi_civita.coefficients(d.pts), pair.first_canonical.coefficients(d.pts),
              pair.well_adapted.coefficients(d.pts)]
    dist = np.zeros((3, 3))
    for a, b in itertools.combinations(range(3), 2):
        dist[a, b] = dist[b, a] = float(_sup(gammas[a] - gammas[b]).max())
    integrable = integrability_verdict(pair, d, tol)["integrable"]
    lc_adapted = cn.is_adapted(pair.levi_civita, pair.phi_field, pair.g, d.pts, tol)["verdict"]
    canonical_eq = bool(dist[1, 2] < tol)
    lc_eq = bool(dist[0, 2] < tol)
    clause_ii = lc_eq == lc_adapted
    if lc_adapted:
        clause_ii = clause_ii and bool(dist.max() < tol)
    return {
        "labels": list(COINCIDENCE_LABELS),
        "distances": dist,
        "phi_integrable": integrable,
        "levi_civita_adapted": bool(lc_adapted),
        "canonical_equals_well_adapted": canonical_eq,
        "levi_civita_equals_well_adapted": lc_eq,
        "clause_canonical": canonical_eq == integrable,
        "clause_levi_civita": bool(clause_ii),
    }


# ---------------------------------------------------------------------------
# Constructed laws and potentials
# ---------------------------------------------------------------------------


def _random_tensor(rng: SplitMix64, n: int) -> np.ndarray:
    return np.array([2.0 * rng.uniform() - 1.0 for _ in range(n**3)]).reshape(n, n, n)


def natural_closure_trials(pair, count: int = 25, seed: int = 0, points=None, tol: float = DEFAULT_TOL) -> list[dict]:
    """``first_canonical + skew(obata(Q))`` for random constant ``Q`` must stay natural."""
    pts = validation_points(pair.chart, points)
    rng = SplitMix64(seed)
    n = pair.chart.dim
    out = []
    for k in range(count):
        q = cn.PotentialTensor.constant(pair.chart, _random_tensor(rng, n), f"Q{k}")
        proj = cn.metric_skew(pair.g, cn.obata(pair.j_field, q))
        law = pair.first_canonical.plus(proj, f"nabla0 + Q{k}")
        l_res, s_res = cn.membership_residuals(proj, pair.j_field, pair.g, pts)
        adapted = cn.is_adapted(law, pair.phi_field, pair.g, pts, tol)
        out.append({"obata_residual": l_res, "skew_residual": s_res, **adapted})
    return out


def adapted_equivalence_trials(pair, count: int = 10, seed: int = 0, points=None, tol: float = DEFAULT_TOL) -> list[dict]:
    """``nabla phi = 0 <=> nabla J = 0`` on adapted and non-adapted laws.

    Even trials add a J-commuting potential to the first canonical law (adapted),
    odd trials add a raw random potential (generically not adapted).
    """
    pts = validation_points(pair.chart, points)
    rng = SplitMix64(seed)
    n = pair.chart.dim
    out = []
    for k in range(count):
        q = cn.PotentialTensor.constant(pair.chart, _random_tensor(rng, n), f"Q{k}")
        if k % 2 == 0:
            q = cn.obata(pair.j_field, q)
        law = pair.first_canonical.plus(q, f"law{k}")
        out.append(cn.is_adapted(law, pair.phi_field, None, pts, tol))
    return out


# ---------------------------------------------------------------------------
# First prolongation
# ---------------------------------------------------------------------------


@dataclass
class MatrixLieAlgebra:
    n: int
    basis: list = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        self.basis = [np.asarray(b, dtype=float) for b in self.basis]
        for b in self.basis:
            if b.shape != (self.n, self.n):
                raise DependentBasis(f"basis matrix of shape {b.shape}, expected {(self.n, self.n)}")
        if self.dim and np.linalg.matrix_rank(self._flat()) < self.dim:
            raise DependentBasis("basis matrices are linearly dependent")

    @property
    def dim(self) -> int:
        return len(self.basis)

    def _flat(self) -> np.ndarray:
        return np.array([b.ravel() for b in self.basis]).T

    def span_residual(self, m: np.ndarray) -> float:
        if not self.dim:
            return float(np.abs(m).max())
        a = self._flat()
        coef, *_ = np.linalg.lstsq(a, m.ravel(), rcond=None)
        return float(np.abs(a @ coef - m.ravel()).max())

    def closure_residual(self) -> float:
        res = [self.span_residual(a @ b - b @ a) for a, b in itertools.combinations(self.basis, 2)]
        return max(res, default=0.0)


def _unit(n, i, j):
    m = np.zeros((n, n))
    m[i, j] = 1.0
    return m


def orthogonal_algebra(n: int) -> MatrixLieAlgebra:
    return MatrixLieAlgebra(n, [_unit(n, i, j) - _unit(n, j, i) for i, j in itertools.combinations(range(n), 2)], f"o({n})")


def general_linear_algebra(n: int) -> MatrixLieAlgebra:
    return MatrixLieAlgebra(n, [_unit(n, i, j) for i in range(n) for j in range(n)], f"gl({n})")


def _block_sum(a: MatrixLieAlgebra, b: MatrixLieAlgebra, name: str) -> MatrixLieAlgebra:
    n = a.n + b.n
    basis = []
    for m in a.basis:
        big = np.zeros((n, n))
        big[: a.n, : a.n] = m
        basis.append(big)
    for m in b.basis:
        big = np.zeros((n, n))
        big[a.n :, a.n :] = m
        basis.append(big)
    return MatrixLieAlgebra(n, basis, name)


def _check_ranks(r, s):
    if r < 1 or s < 1:
        raise InvalidRank(f"block ranks must be positive, got r={r}, s={s}")


def orthogonal_block_algebra(r: int, s: int) -> MatrixLieAlgebra:
    _check_ranks(r, s)
    return _block_sum(orthogonal_algebra(r), orthogonal_algebra(s), f"o({r})+o({s})")


def general_linear_block_algebra(r: int, s: int) -> MatrixLieAlgebra:
    _check_ranks(r, s)
    return _block_sum(general_linear_algebra(r), general_linear_algebra(s), f"gl({r})+gl({s})")


def prolongation_matrix(algebra: MatrixLieAlgebra) -> np.ndarray:
    """Matrix of ``S -> (S(e_i) e_j - S(e_j) e_i)_{i<j}``.

    Unknowns are ``c[i, a]`` with ``S(e_i) = sum_a c[i, a] B_a``.
    """
    n, d = algebra.n, algebra.dim
    pairs = list(itertools.combinations(range(n), 2))
    m = np.zeros((len(pairs) * n, n * d))
    for row, (i, j) in enumerate(pairs):
        for a, b in enumerate(algebra.basis):
            m[row * n : (row + 1) * n, i * d + a] += b[:, j]
            m[row * n : (row + 1) * n, j * d + a] -= b[:, i]
    return m


def first_prolongation_dim(algebra: MatrixLieAlgebra, rtol: float = 1e-10) -> dict:
    """Dimension of the first prolongation and transpose invariance of the algebra."""
    m = prolongation_matrix(algebra)
    unknowns = m.shape[1]
    if unknowns == 0:
        dim = 0
    elif m.shape[0] == 0:
        dim = unknowns
    else:
        sv = np.linalg.svd(m, compute_uv=False)
        rank = int(np.sum(sv > rtol * sv[0])) if sv[0] > 0 else 0
        dim = unknowns - rank
    invariant = all(algebra.span_residual(b.T) < 1e-10 for b in algebra.basis)
    return {"dimension": int(dim), "transpose_invariant": bool(invariant)}


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------


@dataclass
class VerificationReport:
    structure: dict
    checks: list
    verdicts: dict
    coincidence: dict
    meta: dict

    def check(self, id_: str) -> IdentityCheck:
        for c in self.checks:
            if c.id == id_:
                return c
        raise KeyError(id_)

    @property
    def universal_checks(self) -> list:
        return [c for c in self.checks if c.universal]


def lemma_checks(pair: GoldenPair, points=None, tol: float = DEFAULT_TOL) -> list[IdentityCheck]:
    """Checks of identities that hold for every almost Golden Riemannian structure."""
    d = _data(pair, points)
    return [
        _check("golden_relation", "phi^2 = phi + I", _sup(_phi_res(pair, d)), d.pts, tol),
        _check("purity", "g(phi X, Y) = g(X, phi Y)", _sup(_purity_res(pair, d)), d.pts, tol),
        check_nijenhuis_scaling(pair, d, tol),
        check_t0_nijenhuis(pair, d, tol),
        check_nablagJ_identities(pair, d, tol),
        check_toro_nijenhuis(pair, d, tol),
        check_first_canonical(pair, d, tol),
        check_schouten_formulas(pair, d, tol),
    ]


def _phi_res(pair, d):
    phi = pair.phi_field.jet(d.pts, 0).value
    return phi @ phi - phi - np.eye(pair.chart.dim)


def _purity_res(pair, d):
    phi = pair.phi_field.jet(d.pts, 0).value
    return d.gm @ phi - np.swapaxes(phi, 1, 2) @ d.gm


def build_report(pair: GoldenPair, points=None, tol: float = DEFAULT_TOL, curvature_tol: float = CURVATURE_TOL,
                 meta: dict | None = None) -> VerificationReport:
    d = _data(pair, points)
    checks = lemma_checks(pair, d, tol)
    solver_check, _ = check_well_adapted_solver(pair, d, tol)
    checks.append(solver_check)
    integ = integrability_verdict(pair, d, tol)
    checks.append(
        _check("nijenhuis_phi", "N_phi = 0", _sup(d.n_phi), d.pts, tol, universal=False)
    )
    crit = check_torsion_criterion(pair, d, tol)
    checks.append(crit)
    gs = gstructure_integrability(pair, d, tol, curvature_tol)
    checks += [gs["torsion_check"], gs["curvature_check"]]
    coin = connection_coincidence(pair, d, tol)
    lc = cn.is_adapted(pair.levi_civita, pair.phi_field, pair.g, d.pts, tol)
    checks.append(
        _check(
            "levi_civita_adapted",
            "nabla^g phi = 0",
            _sup(cn.nabla_11(d.lc, pair.phi_field.jet(d.pts, 1)).value),
            d.pts,
            tol,
            universal=False,
        )
    )
    structure = {k: pair.summary[k] for k in ("dim", "r", "s", "golden_residual", "purity_residual")}
    verdicts = {
        "phi_integrable": integ["integrable"],
        "g_structure_integrable": gs["integrable"],
        "levi_civita_adapted": bool(lc["verdict"]),
        "j_integrable_agrees": integ["verdicts_agree"],
        "torsion_criterion_agrees": bool(crit.agrees),
        "coincidence_clause_canonical": coin["clause_canonical"],
        "coincidence_clause_levi_civita": coin["clause_levi_civita"],
    }
    coincidence = {"labels": coin["labels"], "distances": coin["distances"].tolist()}
    base_meta = {"points": int(len(d.pts))}
    base_meta.update(meta or {})
    return VerificationReport(structure, checks, verdicts, coincidence, base_meta)
