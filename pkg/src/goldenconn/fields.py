"""Charts, sample points and expression-valued fields.

Index conventions used everywhere in the package:

* ``OneOneField[k][i]`` is the ``k``-th component of ``T(d_i)``;
* ``MetricField[i][j]`` is ``g(d_i, d_j)``;
* connection coefficients ``gamma[k, i, j]`` are the ``d_k`` component of
  ``nabla_{d_i} d_j``;
* derivative axes of jets are appended last, ``dT[..., l] = d_l T``.

All tensors live in the coordinate frame.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import exprdsl
from .errors import AsymmetricMetric, DimensionMismatch, SingularMetric
from .exprdsl import Dual, Expr
from .jets import Jet, jeinsum

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ChartSpec:
    dim: int
    coords: tuple[str, ...]
    box: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        coords = tuple(self.coords)
        object.__setattr__(self, "coords", coords)
        if self.dim < 1:
            raise ValueError("chart dimension must be positive")
        if len(coords) != self.dim or len(set(coords)) != self.dim:
            raise ValueError(f"need {self.dim} distinct coordinate names, got {coords}")
        clash = set(coords) & exprdsl.RESERVED
        if clash:
            raise ValueError(f"coordinate names clash with reserved words: {sorted(clash)}")
        box = tuple((float(lo), float(hi)) for lo, hi in self.box) or ((-1.0, 1.0),) * self.dim
        if len(box) != self.dim:
            raise ValueError("sample box must have one interval per coordinate")
        for lo, hi in box:
            if not lo < hi:
                raise ValueError(f"empty sample interval [{lo}, {hi}]")
        object.__setattr__(self, "box", box)

    @classmethod
    def euclidean(cls, coords: Sequence[str], box=()) -> "ChartSpec":
        return cls(len(coords), tuple(coords), tuple(box))


def as_points(chart: ChartSpec, p) -> tuple[np.ndarray, bool]:
    """Promote a single point or a list of points to a ``(P, n)`` array."""
    a = np.asarray(p, dtype=float)
    single = a.ndim == 1
    a = np.atleast_2d(a)
    if a.shape[1] != chart.dim:
        raise DimensionMismatch(f"points have {a.shape[1]} coordinates, chart has {chart.dim}")
    return a, single


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


class SplitMix64:
    """The splitmix64 generator (Steele, Lea & Flood), bit-exact on every platform.

    Each draw adds the golden-gamma increment 0x9E3779B97F4A7C15 to the state
    and returns the state run through the 64-bit finaliser; floats in [0, 1)
    use the top 53 bits.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def sample_points(chart: ChartSpec, count: int, seed: int) -> np.ndarray:
    if count < 1:
        raise ValueError("count must be positive")
    rng = SplitMix64(seed)
    out = np.empty((count, chart.dim))
    for a in range(count):
        for i, (lo, hi) in enumerate(chart.box):
            out[a, i] = lo + (hi - lo) * rng.uniform()
    return out


# ---------------------------------------------------------------------------
# Expression evaluation into jets
# ---------------------------------------------------------------------------


def _seed(points: np.ndarray, order: int) -> list:
    n = points.shape[1]
    xs = [points[:, i] for i in range(n)]
    if order == 0:
        return xs
    if order == 1:
        return [Dual(x, [1.0 if j == i else 0.0 for j in range(n)]) for i, x in enumerate(xs)]
    if order == 2:
        zeros = [0.0] * n
        return [
            Dual(
                Dual(x, [1.0 if j == i else 0.0 for j in range(n)]),
                [Dual(1.0 if j == i else 0.0, zeros) for j in range(n)],
            )
            for i, x in enumerate(xs)
        ]
    raise ValueError("expression jets are available up to order 2")


def _split(x, n):
    if isinstance(x, Dual):
        return x.val, x.der
    return x, (0.0,) * n


def evaluate_jet(exprs: Sequence[Expr], coords: Sequence[str], points: np.ndarray, order: int) -> list[np.ndarray]:
    """Evaluate scalar expressions at ``points``; returns ``parts`` stacked over ``exprs``."""
    npts, n = points.shape
    env = dict(zip(coords, _seed(points, order)))
    vals = [np.zeros((len(exprs), npts)), np.zeros((len(exprs), npts, n)), np.zeros((len(exprs), npts, n, n))]
    memo: dict = {}
    for a, e in enumerate(exprs):
        r = exprdsl.evaluate(e, env, memo)
        if order == 0:
            vals[0][a] = r
        elif order == 1:
            v, d = _split(r, n)
            vals[0][a] = v
            for i in range(n):
                vals[1][a, :, i] = d[i]
        else:
            v, d = _split(r, n)
            v0, dv = _split(v, n)
            vals[0][a] = v0
            for i in range(n):
                vals[1][a, :, i] = dv[i]
            for j in range(n):
                _, dd = _split(d[j], n)
                for i in range(n):
                    vals[2][a, :, i, j] = dd[i]
    return [np.moveaxis(vals[q], 0, 1) for q in range(order + 1)]


class _ExprTensor:
    """Fixed-shape array of expressions over a chart, with memoised jets."""

    _CACHE_SIZE = 16

    def __init__(self, chart: ChartSpec, entries, shape: tuple[int, ...]):
        flat = list(np.asarray(entries, dtype=object).reshape(-1))
        if len(flat) != int(np.prod(shape)):
            raise DimensionMismatch(f"expected {shape} entries")
        self.chart = chart
        self.shape = shape
        self.flat: tuple[Expr, ...] = tuple(flat)
        unknown = set().union(*(exprdsl.variables(e) for e in self.flat)) - set(chart.coords)
        if unknown:
            raise DimensionMismatch(f"expressions use undeclared coordinates {sorted(unknown)}")
        self._cache: OrderedDict = OrderedDict()

    @classmethod
    def _parse_all(cls, chart, texts, shape):
        arr = np.asarray(texts, dtype=object)
        if arr.shape != shape:
            raise DimensionMismatch(f"expected shape {shape}, got {arr.shape}")
        return [exprdsl.parse(str(t), chart.coords) for t in arr.reshape(-1)]

    def entry(self, *idx) -> Expr:
        return self.flat[int(np.ravel_multi_index(idx, self.shape))]

    @property
    def entries(self):
        return np.array(self.flat, dtype=object).reshape(self.shape).tolist()

    def texts(self) -> list:
        return np.array([exprdsl.to_text(e) for e in self.flat], dtype=object).reshape(self.shape).tolist()

    def jet(self, points, order: int = 0) -> Jet:
        pts, _ = as_points(self.chart, points)
        key = (pts.shape, pts.tobytes())
        hit = self._cache.get(key)
        if hit is not None and hit.order >= order:
            self._cache.move_to_end(key)
            return hit.truncate(order)
        parts = evaluate_jet(self.flat, self.chart.coords, pts, order)
        npts = pts.shape[0]
        j = Jet([p.reshape((npts,) + self.shape + p.shape[2:]) for p in parts], self.chart.dim)
        self._cache[key] = j
        if len(self._cache) > self._CACHE_SIZE:
            self._cache.popitem(last=False)
        return j

    def at(self, p) -> np.ndarray:
        pts, single = as_points(self.chart, p)
        v = self.jet(pts, 0).value
        return v[0] if single else v


class VectorField(_ExprTensor):
    def __init__(self, chart: ChartSpec, components: Sequence[Expr]):
        super().__init__(chart, list(components), (chart.dim,))

    @classmethod
    def from_strings(cls, chart, texts) -> "VectorField":
        return cls(chart, cls._parse_all(chart, list(texts), (chart.dim,)))

    @classmethod
    def coordinate(cls, chart, i: int) -> "VectorField":
        return cls(chart, [exprdsl.Num(1.0 if k == i else 0.0) for k in range(chart.dim)])


class OneOneField(_ExprTensor):
    def __init__(self, chart: ChartSpec, entries):
        super().__init__(chart, entries, (chart.dim, chart.dim))

    @classmethod
    def from_strings(cls, chart, texts) -> "OneOneField":
        return cls(chart, cls._parse_all(chart, texts, (chart.dim, chart.dim)))

    @classmethod
    def constant(cls, chart, matrix) -> "OneOneField":
        m = np.asarray(matrix, dtype=float)
        return cls(chart, [[exprdsl.num(v) for v in row] for row in m])

    def apply(self, X: VectorField) -> VectorField:
        """The vector field ``T X`` as expressions."""
        n = self.chart.dim
        comps = []
        for k in range(n):
            terms = [
                exprdsl.mul(self.entry(k, i), X.entry(i))
                for i in range(n)
                if not (exprdsl.is_zero(self.entry(k, i)) or exprdsl.is_zero(X.entry(i)))
            ]
            e = terms[0] if terms else exprdsl.Num(0.0)
            for t in terms[1:]:
                e = exprdsl.add(e, t)
            comps.append(e)
        return VectorField(self.chart, comps)


class MetricField(_ExprTensor):
    def __init__(self, chart: ChartSpec, entries):
        super().__init__(chart, entries, (chart.dim, chart.dim))

    @classmethod
    def from_strings(cls, chart, texts) -> "MetricField":
        return cls(chart, cls._parse_all(chart, texts, (chart.dim, chart.dim)))

    @classmethod
    def euclidean(cls, chart) -> "MetricField":
        return cls(chart, [[exprdsl.Num(1.0 if i == j else 0.0) for j in range(chart.dim)] for i in range(chart.dim)])

    def validate(self, points, sym_tol: float = 1e-12, eig_floor: float = 1e-10) -> None:
        """Symmetric (as trees or numerically) and positive definite at ``points``."""
        g = self.jet(points, 0).value
        n = self.chart.dim
        for i in range(n):
            for j in range(i + 1, n):
                if self.entry(i, j) == self.entry(j, i):
                    continue
                diff = np.abs(g[:, i, j] - g[:, j, i])
                worst = int(np.argmax(diff))
                if diff[worst] > sym_tol:
                    pts, _ = as_points(self.chart, points)
                    raise AsymmetricMetric(
                        f"metric is not symmetric: |g[{i}][{j}] - g[{j}][{i}]| = {diff[worst]:.3e}",
                        pts[worst],
                        float(diff[worst]),
                    )
        eig = np.linalg.eigvalsh(0.5 * (g + np.swapaxes(g, 1, 2)))
        low = eig[:, 0]
        worst = int(np.argmin(low))
        if low[worst] <= eig_floor:
            pts, _ = as_points(self.chart, points)
            raise SingularMetric(
                f"metric is not positive definite (smallest eigenvalue {low[worst]:.3e})",
                pts[worst],
                float(low[worst]),
            )


# ---------------------------------------------------------------------------
# Derivatives and brackets
# ---------------------------------------------------------------------------


def partial(f, i: int, p, chart: ChartSpec | None = None):
    """Exact ``d f / d x^i`` at ``p``; ``f`` is an expression (or text with ``chart``)."""
    if isinstance(f, str):
        if chart is None:
            raise ValueError("parsing text needs a chart")
        f = exprdsl.parse(f, chart.coords)
    if chart is None:
        raise ValueError("partial needs the chart the expression lives on")
    if not 0 <= i < chart.dim:
        raise DimensionMismatch(f"coordinate index {i} out of range")
    pts, single = as_points(chart, p)
    parts = evaluate_jet([f], chart.coords, pts, 1)
    d = parts[1][:, 0, i]
    return float(d[0]) if single else d


def bracket_jet(X: Jet, Y: Jet) -> Jet:
    """``[X, Y]^k = X^i d_i Y^k - Y^i d_i X^k`` from jets of the components."""
    return jeinsum("i,ki->k", X, Y.grad()) - jeinsum("i,ki->k", Y, X.grad())


def lie_bracket(X: VectorField, Y: VectorField, p) -> np.ndarray:
    pts, single = as_points(X.chart, p)
    v = bracket_jet(X.jet(pts, 1), Y.jet(pts, 1)).value
    return v[0] if single else v
