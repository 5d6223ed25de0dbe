"""Almost Golden and almost product structures, pure metrics and adapted frames."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import exprdsl as ex
from .errors import (
    DegenerateEigenspace,
    DimensionMismatch,
    NonConstantRank,
    NotAlmostProduct,
    NotGolden,
    NotPure,
)
from .fields import ChartSpec, MetricField, OneOneField, as_points, sample_points

DEFAULT_TOL = 1e-9
VALIDATION_POINTS = 20
VALIDATION_SEED = 42


@dataclass(frozen=True)
class GoldenConstants:
    phi: float = ex.PHI
    phibar: float = ex.PHIBAR


GOLDEN = GoldenConstants()


def validation_points(chart: ChartSpec, points=None) -> np.ndarray:
    if points is None:
        return sample_points(chart, VALIDATION_POINTS, VALIDATION_SEED)
    return as_points(chart, points)[0]


def fmt_residual(x: float) -> str:
    """Six significant digits, always with a decimal point or exponent."""
    out = f"{x:.6g}"
    return out if any(c in out for c in ".en") else out + ".0"


def _worst(chart, pts, res):
    k = int(np.argmax(res))
    return pts[k], float(res[k])


def _check_square(field: OneOneField, chart: ChartSpec | None = None):
    if field.shape != (field.chart.dim, field.chart.dim):
        raise DimensionMismatch("expected a square (1,1) field of chart dimension")
    if chart is not None and chart.dim != field.chart.dim:
        raise DimensionMismatch("fields live on charts of different dimension")


# ---------------------------------------------------------------------------
# Pointwise residuals
# ---------------------------------------------------------------------------


def golden_residuals(phi_field: OneOneField, points) -> np.ndarray:
    phi = phi_field.jet(points, 0).value
    eye = np.eye(phi_field.chart.dim)
    return np.abs(phi @ phi - phi - eye).max(axis=(1, 2))


def product_residuals(j_field: OneOneField, points) -> np.ndarray:
    j = j_field.jet(points, 0).value
    return np.abs(j @ j - np.eye(j_field.chart.dim)).max(axis=(1, 2))


def check_golden(phi_field: OneOneField, p) -> float:
    """Max-norm of ``phi^2 - phi - I`` (worst case over ``p`` when several points are given)."""
    _check_square(phi_field)
    pts, _ = as_points(phi_field.chart, p)
    return float(golden_residuals(phi_field, pts).max())


def check_product(j_field: OneOneField, p) -> float:
    _check_square(j_field)
    pts, _ = as_points(j_field.chart, p)
    return float(product_residuals(j_field, pts).max())


def purity_residuals(phi_field: OneOneField, g: MetricField, p) -> tuple[float, float]:
    """``(|g phi - phi^T g|, |phi^T g phi - phi^T g - g|)``, both max-norms.

    The second is the equivalent quadratic form of purity, valid for Golden ``phi``.
    """
    _check_square(phi_field, g.chart)
    pts, _ = as_points(phi_field.chart, p)
    phi = phi_field.jet(pts, 0).value
    gm = g.jet(pts, 0).value
    pt = np.swapaxes(phi, 1, 2)
    r1 = np.abs(gm @ phi - pt @ gm).max()
    r2 = np.abs(pt @ gm @ phi - pt @ gm - gm).max()
    return float(r1), float(r2)


def purity_residual(phi_field: OneOneField, g: MetricField, p) -> float:
    return purity_residuals(phi_field, g, p)[0]


# ---------------------------------------------------------------------------
# The phi <-> J correspondence
# ---------------------------------------------------------------------------


def induced_product(phi_field: OneOneField, points=None, tol: float = DEFAULT_TOL) -> OneOneField:
    """``J = (2 phi - I) / sqrt(5)`` as expressions; ``phi`` must be Golden at the check points."""
    _check_square(phi_field)
    chart = phi_field.chart
    pts = validation_points(chart, points)
    res = golden_residuals(phi_field, pts)
    if res.max() > tol:
        where, worst = _worst(chart, pts, res)
        raise NotGolden(f"Golden relation residual {fmt_residual(worst)} exceeds {tol:g}", where, worst)
    n = chart.dim
    sqrt5 = ex.Const("sqrt5")
    entries = [
        [ex.div(ex.sub(ex.mul(ex.Num(2.0), phi_field.entry(k, i)), ex.Num(float(k == i))), sqrt5) for i in range(n)]
        for k in range(n)
    ]
    return OneOneField(chart, entries)


def induced_golden(j_field: OneOneField, points=None, tol: float = DEFAULT_TOL) -> OneOneField:
    """``phi = (I + sqrt(5) J) / 2``; ``J`` must square to the identity at the check points."""
    _check_square(j_field)
    chart = j_field.chart
    pts = validation_points(chart, points)
    res = product_residuals(j_field, pts)
    if res.max() > tol:
        where, worst = _worst(chart, pts, res)
        raise NotAlmostProduct(f"almost product residual |J^2 - I| = {fmt_residual(worst)} exceeds {tol:g}", where, worst)
    n = chart.dim
    sqrt5 = ex.Const("sqrt5")
    entries = [
        [ex.div(ex.add(ex.Num(float(k == i)), ex.mul(sqrt5, j_field.entry(k, i))), ex.Num(2.0)) for i in range(n)]
        for k in range(n)
    ]
    return OneOneField(chart, entries)


def projectors(j_field: OneOneField, points=None, tol: float = DEFAULT_TOL) -> tuple[OneOneField, OneOneField]:
    """``P+ = (I + J)/2`` and ``P- = (I - J)/2``, the projections onto the +1/-1 eigenbundles."""
    _check_square(j_field)
    chart = j_field.chart
    pts = validation_points(chart, points)
    res = product_residuals(j_field, pts)
    if res.max() > tol:
        where, worst = _worst(chart, pts, res)
        raise NotAlmostProduct(f"almost product residual |J^2 - I| = {fmt_residual(worst)} exceeds {tol:g}", where, worst)
    n = chart.dim
    half = ex.Num(2.0)
    plus = [[ex.div(ex.add(ex.Num(float(k == i)), j_field.entry(k, i)), half) for i in range(n)] for k in range(n)]
    minus = [[ex.div(ex.sub(ex.Num(float(k == i)), j_field.entry(k, i)), half) for i in range(n)] for k in range(n)]
    return OneOneField(chart, plus), OneOneField(chart, minus)


def rank_at(j: np.ndarray) -> np.ndarray:
    n = j.shape[-1]
    return np.rint((n + np.trace(j, axis1=-2, axis2=-1)) / 2).astype(int)


def eigen_ranks(j_field: OneOneField, p=None) -> tuple[int, int]:
    """``(r, s)`` from the trace of ``J``; the rank must not vary over the points."""
    chart = j_field.chart
    pts = validation_points(chart, p)
    r = rank_at(j_field.jet(pts, 0).value)
    if np.any(r != r[0]):
        k = int(np.argmax(r != r[0]))
        raise NonConstantRank(f"rank of D_phi changes from {r[0]} to {r[k]}", pts[k], float(r[k]))
    return int(r[0]), chart.dim - int(r[0])


# ---------------------------------------------------------------------------
# Validated structure
# ---------------------------------------------------------------------------


class GoldenPair:
    """A validated almost Golden Riemannian structure ``(phi, g)`` on a chart.

    ``j_field`` is always the induced almost product structure
    ``(2 phi - I)/sqrt(5)`` built from ``phi``'s expressions.
    """

    def __init__(self, phi_field: OneOneField, g: MetricField, points=None, tol: float = DEFAULT_TOL,
                 fd_step: float = 1e-5):
        _check_square(phi_field, g.chart)
        self.chart = phi_field.chart
        self.phi_field = phi_field
        self.g = g
        self.tol = tol
        self.fd_step = fd_step
        self.points = validation_points(self.chart, points)
        g.validate(self.points)
        self.j_field = induced_product(phi_field, self.points, tol)
        self.r, self.s = eigen_ranks(self.j_field, self.points)
        pur, pur_alt = purity_residuals(phi_field, g, self.points)
        if pur > tol:
            phi = phi_field.jet(self.points).value
            gm = g.jet(self.points).value
            res = np.abs(gm @ phi - np.swapaxes(phi, 1, 2) @ gm).max(axis=(1, 2))
            where, worst = _worst(self.chart, self.points, res)
            raise NotPure(f"metric is not pure: |g(phi X, Y) - g(X, phi Y)| = {fmt_residual(worst)}", where, worst)
        self.summary = {
            "dim": self.chart.dim,
            "r": self.r,
            "s": self.s,
            "golden_residual": check_golden(phi_field, self.points),
            "product_residual": check_product(self.j_field, self.points),
            "purity_residual": pur,
            "purity_residual_quadratic": pur_alt,
        }

    @classmethod
    def from_product(cls, j_field: OneOneField, g: MetricField, points=None, tol: float = DEFAULT_TOL,
                     fd_step: float = 1e-5) -> "GoldenPair":
        return cls(induced_golden(j_field, points, tol), g, points, tol, fd_step)

    @cached_property
    def projectors(self) -> tuple[OneOneField, OneOneField]:
        return projectors(self.j_field, self.points, self.tol)

    @cached_property
    def levi_civita(self):
        from .connections import levi_civita

        return levi_civita(self.g)

    @cached_property
    def first_canonical(self):
        from .connections import first_canonical

        return first_canonical(self.g, self.j_field)

    @cached_property
    def well_adapted(self):
        from .connections import well_adapted

        return well_adapted(self.g, self.j_field, self.fd_step)


# ---------------------------------------------------------------------------
# Adapted orthonormal frames
# ---------------------------------------------------------------------------


def _pivoted_gram_schmidt(cands: np.ndarray, gm: np.ndarray, count: int, basis: list, floor: float):
    cands = [cands[:, c].copy() for c in range(cands.shape[1])]
    for v in basis:
        cands = [c - (v @ gm @ c) * v for c in cands]
    out = []
    for _ in range(count):
        norms = [np.sqrt(max(c @ gm @ c, 0.0)) for c in cands]
        k = int(np.argmax(norms))
        if norms[k] < floor:
            raise DegenerateEigenspace(f"eigenspace numerically rank deficient (pivot norm {norms[k]:.3e})")
        v = cands.pop(k) / norms[k]
        out.append(v)
        cands = [c - (v @ gm @ c) * v for c in cands]
    return out


def _fix_sign(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    return -v if nz.size and v[nz[0]] < 0 else v


def adapted_orthonormal_frame(pair: GoldenPair, p, tol: float = 1e-10) -> np.ndarray:
    """g-orthonormal frame whose first ``r`` columns span ``ker(J - I)`` and the rest ``ker(J + I)``.

    Columns come from the projector columns by pivoted modified Gram-Schmidt
    in the ``g`` inner product; each column's first nonzero entry is positive.
    """
    pts, single = as_points(pair.chart, p)
    r = rank_at(pair.j_field.jet(pts, 0).value)
    if np.any(r != pair.r):
        k = int(np.argmax(r != pair.r))
        raise NonConstantRank(f"rank {r[k]} differs from the validated rank {pair.r}", pts[k], float(r[k]))
    j = pair.j_field.jet(pts, 0).value
    gm = pair.g.jet(pts, 0).value
    n = pair.chart.dim
    eye = np.eye(n)
    frames = np.empty((len(pts), n, n))
    for a in range(len(pts)):
        plus = 0.5 * (eye + j[a])
        minus = 0.5 * (eye - j[a])
        scale = max(1.0, np.abs(gm[a]).max())
        cols = _pivoted_gram_schmidt(plus, gm[a], pair.r, [], 1e-8)
        cols += _pivoted_gram_schmidt(minus, gm[a], pair.s, cols, 1e-8)
        f = np.column_stack([_fix_sign(c) for c in cols]) if cols else np.zeros((n, 0))
        signs = np.concatenate([np.ones(pair.r), -np.ones(pair.s)])
        eig_res = np.abs(j[a] @ f - f * signs).max() if n else 0.0
        orth_res = np.abs(f.T @ gm[a] @ f - eye).max()
        if max(eig_res, orth_res) > tol * scale:
            raise DegenerateEigenspace(
                f"adapted frame residual {max(eig_res, orth_res):.3e} exceeds {tol:g}", pts[a], max(eig_res, orth_res)
            )
        frames[a] = f
    return frames[0] if single else frames
