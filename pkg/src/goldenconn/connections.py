"""Derivation laws as coefficient fields, and the connections built from ``(phi, g)``.

Every law is a function ``points -> gamma`` with ``gamma[p, k, i, j]`` the
``d_k`` component of ``nabla_{d_i} d_j`` at point ``p``.  Laws defined by a
closed formula carry exact derivatives (tag ``AD``); the well adapted law is
solved pointwise and is differentiated by central differences (tag ``NUMERIC``).
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    NonUniqueSolution,
    NotAlmostProduct,
    NotGolden,
    NotTorsionFree,
    SingularMetric,
    SolverResidualTooLarge,
)
from .fields import ChartSpec, MetricField, OneOneField, VectorField, as_points, bracket_jet
from .golden import DEFAULT_TOL, fmt_residual, golden_residuals, induced_product, product_residuals, validation_points
from .jets import Jet, jeinsum, jinv

AD = "AD"
NUMERIC = "NUMERIC"

DEFAULT_FD_STEP = 1e-5
SOLVER_RESIDUAL_TOL = 1e-8
NULLSPACE_RTOL = 1e-10


class PotentialTensor:
    """A (1,2) tensor field ``Q[k, i, j] = Q(d_i, d_j)^k``."""

    def __init__(self, chart: ChartSpec, jet_fn, exact: bool = True, label: str = "custom"):
        self.chart = chart
        self._jet_fn = jet_fn
        self.exact = exact
        self.label = label

    @classmethod
    def constant(cls, chart: ChartSpec, array, label: str = "constant") -> "PotentialTensor":
        a = np.asarray(array, dtype=float)
        if a.shape != (chart.dim,) * 3:
            raise ValueError(f"potential tensor must have shape {(chart.dim,) * 3}")
        return cls(chart, lambda pts, order: Jet.constant(a, len(pts), chart.dim, order), True, label)

    @classmethod
    def from_values(cls, chart: ChartSpec, fn, label: str = "custom") -> "PotentialTensor":
        """Wrap ``fn(points) -> (P, n, n, n)``; no derivatives available."""

        def jet_fn(pts, order):
            if order > 0:
                raise ValueError(f"{label}: potential tensor has no derivative information")
            return Jet([fn(pts)], chart.dim)

        return cls(chart, jet_fn, False, label)

    def jet(self, points, order: int = 0) -> Jet:
        pts, _ = as_points(self.chart, points)
        return self._jet_fn(pts, order)

    def values(self, p) -> np.ndarray:
        pts, single = as_points(self.chart, p)
        v = self.jet(pts, 0).value
        return v[0] if single else v


class DerivationLaw:
    def __init__(self, chart: ChartSpec, label: str, tag: str, jet_fn, fd_step: float = DEFAULT_FD_STEP):
        if tag not in (AD, NUMERIC):
            raise ValueError(f"unknown differentiability tag {tag!r}")
        self.chart = chart
        self.label = label
        self.tag = tag
        self.fd_step = fd_step
        self._jet_fn = jet_fn
        self._memo: OrderedDict = OrderedDict()

    def __repr__(self):
        return f"DerivationLaw({self.label!r}, tag={self.tag})"

    def _values(self, pts: np.ndarray) -> np.ndarray:
        key = (pts.shape, pts.tobytes())
        hit = self._memo.get(key)
        if hit is None:
            hit = self._jet_fn(pts, 0).value
            self._memo[key] = hit
            if len(self._memo) > 32:
                self._memo.popitem(last=False)
        return hit

    def jet(self, points, order: int = 0) -> Jet:
        pts, _ = as_points(self.chart, points)
        if self.tag == AD:
            return self._jet_fn(pts, order)
        if order == 0:
            return Jet([self._values(pts)], self.chart.dim)
        if order > 1:
            raise ValueError("numeric laws provide first derivatives only")
        n, h = self.chart.dim, self.fd_step
        shifted = np.concatenate([pts + s * h * np.eye(n)[l] for l in range(n) for s in (1.0, -1.0)])
        vals = self._values(shifted).reshape((n, 2) + (len(pts),) + (n, n, n))
        deriv = (vals[:, 0] - vals[:, 1]) / (2 * h)
        return Jet([self._values(pts), np.moveaxis(deriv, 0, -1)], n)

    def coefficients(self, p) -> np.ndarray:
        pts, single = as_points(self.chart, p)
        v = self.jet(pts, 0).value
        return v[0] if single else v

    def plus(self, q: PotentialTensor, label: str = "custom") -> "DerivationLaw":
        tag = AD if (self.tag == AD and q.exact) else NUMERIC

        def jet_fn(pts, order):
            return self.jet(pts, order) + q.jet(pts, order)

        return DerivationLaw(self.chart, label, tag, jet_fn, self.fd_step)

    def difference(self, other: "DerivationLaw") -> PotentialTensor:
        """``self - other``, a tensor field."""
        exact = self.tag == AD and other.tag == AD

        def jet_fn(pts, order):
            return self.jet(pts, order) - other.jet(pts, order)

        return PotentialTensor(self.chart, jet_fn, exact, f"{self.label} - {other.label}")


# ---------------------------------------------------------------------------
# Tensor calculus on jets
# ---------------------------------------------------------------------------


def nabla_11(gamma: Jet, t: Jet) -> Jet:
    """``C[i, k, j] = (nabla_{d_i} T)^k_j``; ``t`` must be one order above ``gamma``."""
    dt = t.grad()
    return (
        jeinsum("kji->ikj", dt)
        + jeinsum("kim,mj->ikj", gamma, t)
        - jeinsum("mij,km->ikj", gamma, t)
    )


def nabla_metric(gamma: Jet, g: Jet) -> Jet:
    """``D[i, j, k] = (nabla_{d_i} g)_{jk}``."""
    dg = g.grad()
    return jeinsum("jki->ijk", dg) - jeinsum("mij,mk->ijk", gamma, g) - jeinsum("mik,jm->ijk", gamma, g)


def torsion_of(gamma) -> np.ndarray:
    g = gamma.value if isinstance(gamma, Jet) else gamma
    return g - np.swapaxes(g, -1, -2)


def nijenhuis_of(j: Jet) -> Jet:
    """``N[k, i, j] = N_J(d_i, d_j)^k`` from a first-order jet of ``J``."""
    dj = j.grad()  # dj[k, j, m] = d_m J^k_j
    return (
        jeinsum("mi,kjm->kij", j, dj)
        - jeinsum("mj,kim->kij", j, dj)
        + jeinsum("km,mij->kij", j, dj)
        - jeinsum("km,mji->kij", j, dj)
    )


def _projector_jets(j: Jet) -> tuple[Jet, Jet]:
    eye = Jet.constant(np.eye(j.dim), j.npts, j.dim, j.order)
    return 0.5 * (eye + j), 0.5 * (eye - j)


def _check_product(j_field: OneOneField, points=None, tol=DEFAULT_TOL):
    pts = validation_points(j_field.chart, points)
    res = product_residuals(j_field, pts)
    if res.max() > tol:
        k = int(np.argmax(res))
        raise NotAlmostProduct(f"almost product residual |J^2 - I| = {fmt_residual(res[k])}", pts[k], float(res[k]))


# ---------------------------------------------------------------------------
# Constructions
# ---------------------------------------------------------------------------


def levi_civita(g: MetricField) -> DerivationLaw:
    chart = g.chart

    def jet_fn(pts, order):
        gj = g.jet(pts, order + 1)
        low = np.linalg.eigvalsh(0.5 * (gj.value + np.swapaxes(gj.value, 1, 2)))[:, 0]
        if np.any(low <= 1e-10):
            k = int(np.argmin(low))
            raise SingularMetric(f"metric is singular (smallest eigenvalue {low[k]:.3e})", pts[k], float(low[k]))
        ginv = jinv(gj.truncate(order))
        dg = gj.grad()  # dg[a, b, c] = d_c g_ab
        lower = jeinsum("jli->lij", dg) + jeinsum("ilj->lij", dg) - jeinsum("ijl->lij", dg)
        return 0.5 * jeinsum("kl,lij->kij", ginv, lower)

    return DerivationLaw(chart, "levi-civita", AD, jet_fn)


def covariant_deriv_tensor11(law: DerivationLaw, t: OneOneField, i: int, p) -> np.ndarray:
    """``(nabla_{d_i} T)^k_j`` at ``p`` as a matrix indexed ``[k, j]``."""
    pts, single = as_points(law.chart, p)
    c = nabla_11(law.jet(pts, 0), t.jet(pts, 1)).value[:, i]
    return c[0] if single else c


def covariant_deriv_metric(law: DerivationLaw, g: MetricField, i: int, p) -> np.ndarray:
    pts, single = as_points(law.chart, p)
    d = nabla_metric(law.jet(pts, 0), g.jet(pts, 1)).value[:, i]
    return d[0] if single else d


def _vector_values(X, pts):
    if isinstance(X, VectorField):
        return X.jet(pts, 0).value
    return np.broadcast_to(np.asarray(X, dtype=float), (len(pts), pts.shape[1]))


def torsion(law: DerivationLaw, X, Y, p) -> np.ndarray:
    """``T(X, Y) = T^k_{ij} X^i Y^j`` with ``T^k_{ij} = gamma^k_{ij} - gamma^k_{ji}``."""
    pts, single = as_points(law.chart, p)
    t = torsion_of(law.jet(pts, 0))
    v = np.einsum("Zkij,Zi,Zj->Zk", t, _vector_values(X, pts), _vector_values(Y, pts))
    return v[0] if single else v


def torsion_tensor(law: DerivationLaw, p) -> np.ndarray:
    pts, single = as_points(law.chart, p)
    t = torsion_of(law.jet(pts, 0))
    return t[0] if single else t


def curvature_of(gj: Jet) -> np.ndarray:
    """``R[l, k, i, j] = R(d_i, d_j) d_k`` component ``l`` from a first-order jet of gamma."""
    g = gj.value
    dg = gj.parts[1]  # dg[l, j, k, i] = d_i gamma^l_jk
    return (
        np.einsum("Zljki->Zlkij", dg)
        - np.einsum("Zlikj->Zlkij", dg)
        + np.einsum("Zlim,Zmjk->Zlkij", g, g)
        - np.einsum("Zljm,Zmik->Zlkij", g, g)
    )


def curvature(law: DerivationLaw, p) -> np.ndarray:
    pts, single = as_points(law.chart, p)
    r = curvature_of(law.jet(pts, 1))
    return r[0] if single else r


def nijenhuis(J: OneOneField, X: VectorField, Y: VectorField, p) -> np.ndarray:
    """``N_J(X, Y) = J^2[X,Y] + [JX, JY] - J[JX, Y] - J[X, JY]`` with exact brackets."""
    pts, single = as_points(J.chart, p)
    jj = J.jet(pts, 1)
    xj, yj = X.jet(pts, 1), Y.jet(pts, 1)
    jx = jeinsum("ki,i->k", jj, xj)
    jy = jeinsum("ki,i->k", jj, yj)
    jm = jj.value
    xy = bracket_jet(xj, yj).value
    v = (
        np.einsum("Zkm,Zml,Zl->Zk", jm, jm, xy)
        + bracket_jet(jx, jy).value
        - np.einsum("Zkm,Zm->Zk", jm, bracket_jet(jx, yj).value)
        - np.einsum("Zkm,Zm->Zk", jm, bracket_jet(xj, jy).value)
    )
    return v[0] if single else v


def nijenhuis_tensor(J: OneOneField, p) -> np.ndarray:
    pts, single = as_points(J.chart, p)
    n = nijenhuis_of(J.jet(pts, 1)).value
    return n[0] if single else n


def nijenhuis_via_connection(law: DerivationLaw, J: OneOneField, X, Y, p, tol: float = 1e-8) -> np.ndarray:
    """``(nabla_X J)JY + (nabla_{JX} J)Y - (nabla_Y J)JX - (nabla_{JY} J)X`` for a torsion-free law."""
    pts, single = as_points(law.chart, p)
    gamma = law.jet(pts, 0)
    tres = float(np.abs(torsion_of(gamma)).max())
    if tres > tol:
        raise NotTorsionFree(tres)
    jj = J.jet(pts, 1)
    c = nabla_11(gamma, jj).value  # c[i, k, j]
    jm = jj.value
    x, y = _vector_values(X, pts), _vector_values(Y, pts)
    jx = np.einsum("Zki,Zi->Zk", jm, x)
    jy = np.einsum("Zki,Zi->Zk", jm, y)

    def apply(dirn, arg):
        return np.einsum("Zi,Zikj,Zj->Zk", dirn, c, arg)

    v = apply(x, jy) + apply(jx, y) - apply(y, jx) - apply(jy, x)
    return v[0] if single else v


def schouten(base: DerivationLaw, J: OneOneField) -> DerivationLaw:
    """``P+ nabla_X (P+ Y) + P- nabla_X (P- Y)``."""
    _check_product(J)

    def jet_fn(pts, order):
        gamma = base.jet(pts, order)
        plus, minus = _projector_jets(J.jet(pts, order + 1))
        total = None
        for proj in (plus, minus):
            inner = jeinsum("lji->ilj", proj.grad()) + jeinsum("lim,mj->ilj", gamma, proj)
            term = jeinsum("kl,ilj->kij", proj, inner)
            total = term if total is None else total + term
        return total

    return DerivationLaw(base.chart, "schouten", base.tag, jet_fn, base.fd_step)


def vranceanu(base: DerivationLaw, J: OneOneField) -> DerivationLaw:
    """``P+ nabla_{P+X} P+Y + P- nabla_{P-X} P-Y + P+[P-X, P+Y] + P-[P+X, P-Y]``."""
    _check_product(J)

    def jet_fn(pts, order):
        gamma = base.jet(pts, order)
        plus, minus = _projector_jets(J.jet(pts, order + 1))
        total = None
        for proj in (plus, minus):
            # nabla_{d_a}(P d_j)^l, then contract direction with P^a_i
            inner = jeinsum("lja->alj", proj.grad()) + jeinsum("lam,mj->alj", gamma, proj)
            term = jeinsum("kl,ai,alj->kij", proj, proj, inner)
            total = term if total is None else total + term
        for outer, a_proj, b_proj in ((plus, minus, plus), (minus, plus, minus)):
            # [A d_i, B d_j]^l = A^a_i d_a B^l_j - B^a_j d_a A^l_i
            br = jeinsum("ai,lja->lij", a_proj, b_proj.grad()) - jeinsum("aj,lia->lij", b_proj, a_proj.grad())
            total = total + jeinsum("kl,lij->kij", outer, br)
        return total

    return DerivationLaw(base.chart, "vranceanu", base.tag, jet_fn, base.fd_step)


def nabla0_type(base: DerivationLaw, J: OneOneField, label: str = "nabla0") -> DerivationLaw:
    """``nabla_X Y - 1/2 (nabla_X J) J Y``."""

    def jet_fn(pts, order):
        gamma = base.jet(pts, order)
        jj = J.jet(pts, order + 1)
        c = nabla_11(gamma, jj)
        return gamma - 0.5 * jeinsum("ikm,mj->kij", c, jj)

    return DerivationLaw(base.chart, label, base.tag, jet_fn, base.fd_step)


def crasmareanu_formula(base: DerivationLaw, phi_field: OneOneField) -> DerivationLaw:
    """``(3 nabla_X Y + 2 phi(nabla_X phi Y) - phi(nabla_X Y) - nabla_X phi Y) / 5``."""
    pts = validation_points(phi_field.chart)
    res = golden_residuals(phi_field, pts)
    if res.max() > DEFAULT_TOL:
        k = int(np.argmax(res))
        raise NotGolden(f"Golden relation residual {fmt_residual(res[k])}", pts[k], float(res[k]))

    def jet_fn(pts, order):
        gamma = base.jet(pts, order)
        ph = phi_field.jet(pts, order + 1)
        d = jeinsum("lji->lij", ph.grad()) + jeinsum("lim,mj->lij", gamma, ph)  # nabla_{d_i}(phi d_j)
        return (3.0 * gamma + 2.0 * jeinsum("kl,lij->kij", ph, d) - jeinsum("kl,lij->kij", ph, gamma) - d) / 5.0

    return DerivationLaw(base.chart, "crasmareanu", base.tag, jet_fn, base.fd_step)


def first_canonical(g: MetricField, J: OneOneField) -> DerivationLaw:
    return nabla0_type(levi_civita(g), J, label="first-canonical")


def obata(J: OneOneField, q: PotentialTensor) -> PotentialTensor:
    """``(Q(X, Y) + J Q(X, J Y)) / 2``, the projection onto J-commuting potentials."""

    def jet_fn(pts, order):
        qj = q.jet(pts, order)
        jj = J.jet(pts, order)
        return 0.5 * (qj + jeinsum("kl,lim,mj->kij", jj, qj, jj))

    return PotentialTensor(q.chart, jet_fn, q.exact, f"obata({q.label})")


def metric_skew(g: MetricField, q: PotentialTensor) -> PotentialTensor:
    """Projection making ``g(Q(X, Y), Z) + g(Q(X, Z), Y) = 0``."""

    def jet_fn(pts, order):
        qj = q.jet(pts, order)
        gj = g.jet(pts, order)
        return 0.5 * (qj - jeinsum("kl,jm,mil->kij", jinv(gj), gj, qj))

    return PotentialTensor(q.chart, jet_fn, q.exact, f"skew({q.label})")


def membership_residuals(q: PotentialTensor, J: OneOneField, g: MetricField, points) -> tuple[float, float]:
    """Sup residuals of ``Q(X, JY) = J Q(X, Y)`` and ``g(Q(X,Y),Z) + g(Q(X,Z),Y) = 0``."""
    pts, _ = as_points(q.chart, points)
    qv = q.jet(pts, 0).value
    jm = J.jet(pts, 0).value
    gm = g.jet(pts, 0).value
    l_res = np.einsum("Zkim,Zmj->Zkij", qv, jm) - np.einsum("Zkm,Zmij->Zkij", jm, qv)
    s_res = np.einsum("Zkl,Zkij->Zijl", gm, qv) + np.einsum("Zkj,Zkil->Zijl", gm, qv)
    return float(np.abs(l_res).max()), float(np.abs(s_res).max())


def natural_membership(q: PotentialTensor, J: OneOneField, g: MetricField, points, tol: float = 1e-8) -> bool:
    l_res, s_res = membership_residuals(q, J, g, points)
    return l_res < tol and s_res < tol


def adaptation_residuals(law: DerivationLaw, phi_field: OneOneField, g: MetricField | None, points):
    pts, _ = as_points(law.chart, points)
    gamma = law.jet(pts, 0)
    j_field = induced_product(phi_field, tol=np.inf)
    phi_res = float(np.abs(nabla_11(gamma, phi_field.jet(pts, 1)).value).max())
    j_res = float(np.abs(nabla_11(gamma, j_field.jet(pts, 1)).value).max())
    g_res = float(np.abs(nabla_metric(gamma, g.jet(pts, 1)).value).max()) if g is not None else None
    return phi_res, j_res, g_res


def is_adapted(law: DerivationLaw, phi_field: OneOneField, g: MetricField | None = None, points=None, tol: float = 1e-8):
    """Sup residuals of ``nabla phi``, ``nabla J_phi`` and ``nabla g``, with the verdict."""
    pts = validation_points(law.chart, points)
    phi_res, j_res, g_res = adaptation_residuals(law, phi_field, g, pts)
    verdict = phi_res < tol and (g_res is None or g_res < tol)
    return {
        "phi_residual": phi_res,
        "j_residual": j_res,
        "g_residual": g_res,
        "verdict": verdict,
        "equivalence_holds": (phi_res < tol) == (j_res < tol),
    }


# ---------------------------------------------------------------------------
# Well adapted connection
# ---------------------------------------------------------------------------


def torsion_condition(t: np.ndarray, jm: np.ndarray, gm: np.ndarray) -> np.ndarray:
    """``g(T(X,Y),Z) - g(T(Z,Y),X) - g(T(JZ,Y),JX) + g(T(JX,Y),JZ)`` indexed ``[x, y, z]``.

    ``t`` may carry one extra batch axis after the point axis.
    """
    e = "" if t.ndim == 4 else "e"
    return (
        np.einsum(f"Z{e}kxy,Zkz->Z{e}xyz", t, gm)
        - np.einsum(f"Z{e}kzy,Zkx->Z{e}xyz", t, gm)
        - np.einsum(f"Z{e}kay,Zaz,Zkc,Zcx->Z{e}xyz", t, jm, gm, jm)
        + np.einsum(f"Z{e}kay,Zax,Zkc,Zcz->Z{e}xyz", t, jm, gm, jm)
    )


def split_torsion_condition(t: np.ndarray, jm: np.ndarray, gm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``g(T(PX,Y),PZ) - g(T(PZ,Y),PX)`` for ``P = P+`` and ``P = P-``."""
    eye = np.eye(jm.shape[-1])
    out = []
    for proj in (0.5 * (eye + jm), 0.5 * (eye - jm)):
        a = np.einsum("Zkay,Zax,Zkl,Zlz->Zxyz", t, proj, gm, proj)
        out.append(a - np.swapaxes(a, 1, 3))
    return out[0], out[1]


@dataclass
class WellAdaptedSolution:
    points: np.ndarray
    gamma: np.ndarray
    potential: np.ndarray
    residual: np.ndarray
    nullity: np.ndarray
    min_singular_ratio: np.ndarray


def _constraint_system(t0, jm, gm):
    npts, n = jm.shape[0], jm.shape[1]
    m = n**3
    basis = np.eye(m).reshape(m, n, n, n)
    basis_z = np.broadcast_to(basis, (npts,) + basis.shape)
    a_l = np.einsum("ekim,Zmj->Zekij", basis, jm) - np.einsum("Zkm,emij->Zekij", jm, basis)
    a_s = np.einsum("Zkl,ekij->Zeijl", gm, basis) + np.einsum("Zkj,ekil->Zeijl", gm, basis)
    a_t = torsion_condition(basis_z - np.swapaxes(basis_z, -1, -2), jm, gm)
    a = np.concatenate([a_l.reshape(npts, m, -1), a_s.reshape(npts, m, -1), a_t.reshape(npts, m, -1)], axis=2)
    a = np.swapaxes(a, 1, 2)
    b = np.concatenate([np.zeros((npts, 2 * m)), -torsion_condition(t0, jm, gm).reshape(npts, m)], axis=1)
    return a, b


def solve_well_adapted(g: MetricField, J: OneOneField, points, residual_tol: float = SOLVER_RESIDUAL_TOL):
    """Pointwise solve for ``Q`` with ``nabla^w = nabla^0 + Q``.

    ``Q`` must commute with ``J``, be skew for ``g``, and make the torsion
    of ``nabla^w`` satisfy the well-adapted symmetry condition.
    """
    pts, _ = as_points(g.chart, points)
    n = g.chart.dim
    gamma0 = first_canonical(g, J).jet(pts, 0).value
    jm = J.jet(pts, 0).value
    gm = g.jet(pts, 0).value
    a, b = _constraint_system(torsion_of(gamma0), jm, gm)
    npts = len(pts)
    q = np.empty((npts, n**3))
    residual = np.empty(npts)
    nullity = np.empty(npts, dtype=int)
    ratio = np.empty(npts)
    for p in range(npts):
        sol, *_ = scipy.linalg.lstsq(a[p], b[p], lapack_driver="gelsy", cond=NULLSPACE_RTOL)
        sv = np.linalg.svd(a[p], compute_uv=False)
        nullity[p] = int(np.sum(sv <= NULLSPACE_RTOL * sv[0])) if sv[0] > 0 else n**3
        ratio[p] = sv[-1] / sv[0] if sv[0] > 0 else 0.0
        q[p] = sol
        scale = max(1.0, float(np.abs(b[p]).max()))
        residual[p] = float(np.abs(a[p] @ sol - b[p]).max()) / scale
    for p in range(npts):
        if nullity[p] > 0:
            raise NonUniqueSolution(pts[p], int(nullity[p]))
        if residual[p] > residual_tol:
            raise SolverResidualTooLarge(pts[p], float(residual[p]))
    qt = q.reshape(npts, n, n, n)
    return WellAdaptedSolution(pts, gamma0 + qt, qt, residual, nullity, ratio)


def well_adapted(g: MetricField, J: OneOneField, fd_step: float = DEFAULT_FD_STEP,
                 residual_tol: float = SOLVER_RESIDUAL_TOL) -> DerivationLaw:
    _check_product(J)

    def jet_fn(pts, order):
        return Jet([solve_well_adapted(g, J, pts, residual_tol).gamma], g.chart.dim)

    return DerivationLaw(g.chart, "well-adapted", NUMERIC, jet_fn, fd_step)
