"""Built-in structures with known ground truth and a seeded random generator."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import exprdsl as ex
from .errors import InvalidRank
from .fields import ChartSpec, MetricField, OneOneField, SplitMix64
from .golden import DEFAULT_TOL, GoldenPair

RANDOM_EPSILON = 0.2


@dataclass
class CatalogEntry:
    name: str
    chart: ChartSpec
    g: MetricField
    kind: str  # "golden" (structure is phi) or "product" (structure is J)
    structure: OneOneField
    ground_truth: dict = field(default_factory=dict)

    def pair(self, points=None, tol: float = DEFAULT_TOL, fd_step: float = 1e-5) -> GoldenPair:
        if self.kind == "golden":
            return GoldenPair(self.structure, self.g, points, tol, fd_step)
        return GoldenPair.from_product(self.structure, self.g, points, tol, fd_step)


def flat_fibonacci() -> CatalogEntry:
    chart = ChartSpec.euclidean(["x", "y"])
    return CatalogEntry(
        "flat_fibonacci",
        chart,
        MetricField.euclidean(chart),
        "golden",
        OneOneField.from_strings(chart, [["1", "1"], ["1", "0"]]),
        {"pure": True, "phi_integrable": True, "ranks": (1, 1), "levi_civita_adapted": True},
    )


def twisted_book() -> CatalogEntry:
    chart = ChartSpec.euclidean(["x", "y", "z"])
    # the frame {d_x, d_y + x d_z, d_z} is g-orthonormal and adapted to J
    return CatalogEntry(
        "twisted_book",
        chart,
        MetricField.from_strings(chart, [["1", "0", "0"], ["0", "1 + x^2", "-x"], ["0", "-x", "1"]]),
        "product",
        OneOneField.from_strings(chart, [["1", "0", "0"], ["0", "1", "0"], ["0", "2*x", "-1"]]),
        {
            "pure": True,
            "phi_integrable": False,
            "ranks": (2, 1),
            "levi_civita_adapted": False,
            "nijenhuis_J_xy": (0.0, 0.0, 4.0),
            "nijenhuis_phi_xy": (0.0, 0.0, 5.0),
        },
    )


def product_example() -> CatalogEntry:
    chart = ChartSpec.euclidean(["x", "y", "z"])
    return CatalogEntry(
        "product_example",
        chart,
        MetricField.from_strings(chart, [["1", "0", "0"], ["0", "1 + x^2", "0"], ["0", "0", "1"]]),
        "product",
        OneOneField.from_strings(chart, [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "-1"]]),
        {"pure": True, "phi_integrable": True, "ranks": (2, 1), "levi_civita_adapted": True},
    )


def integrable_nonparallel() -> CatalogEntry:
    chart = ChartSpec.euclidean(["x", "y"])
    return CatalogEntry(
        "integrable_nonparallel",
        chart,
        MetricField.from_strings(chart, [["1 + y^2", "0"], ["0", "1 + x^2"]]),
        "product",
        OneOneField.from_strings(chart, [["1", "0"], ["0", "-1"]]),
        {"pure": True, "phi_integrable": True, "ranks": (1, 1), "levi_civita_adapted": False},
    )


# ---------------------------------------------------------------------------
# Random structures
# ---------------------------------------------------------------------------


def _sum(terms):
    terms = [t for t in terms if not ex.is_zero(t)]
    if not terms:
        return ex.Num(0.0)
    out = terms[0]
    for t in terms[1:]:
        out = ex.add(out, t)
    return out


def _prod(a, b):
    if ex.is_zero(a) or ex.is_zero(b):
        return ex.Num(0.0)
    return ex.mul(a, b)


def _determinant(m, rows, cols, memo):
    key = (rows, cols)
    if key in memo:
        return memo[key]
    if len(rows) == 1:
        out = m[rows[0]][cols[0]]
    else:
        terms = []
        for a, c in enumerate(cols):
            minor = _determinant(m, rows[1:], cols[:a] + cols[a + 1 :], memo)
            t = _prod(m[rows[0]][c], minor)
            if not ex.is_zero(t):
                terms.append(ex.Neg(t) if a % 2 else t)
        out = _sum(terms)
    memo[key] = out
    return out


def _adjugate(m, n, memo):
    idx = tuple(range(n))
    adj = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if n == 1:
                adj[i][j] = ex.Num(1.0)
                continue
            # adj[i][j] = (-1)^(i+j) * minor with row j and column i removed
            minor = _determinant(m, idx[:j] + idx[j + 1 :], idx[:i] + idx[i + 1 :], memo)
            adj[i][j] = ex.Neg(minor) if (i + j) % 2 else minor
    return adj


def _monomials(coords):
    out = [ex.Num(1.0)] + [ex.Var(c) for c in coords]
    out += [ex.mul(ex.Var(a), ex.Var(b)) for a, b in itertools.combinations_with_replacement(coords, 2)]
    return out


def random_pure_structure(n: int, r: int, seed: int) -> CatalogEntry:
    """Structure built from a prescribed adapted frame ``F = I + 0.2 A``.

    Each entry of ``A`` is a random polynomial of degree <= 2 whose
    coefficients have absolute sum at most ``min(1, 4/n)``, so
    ``|0.2 A|_inf <= 0.8`` on ``[-1, 1]^n`` and ``F`` stays invertible.  The
    first ``r`` columns of ``F`` span the +1 eigenbundle.  Then
    ``J = F diag(I_r, -I_s) F^-1`` and ``g = F^-T F^-1``.
    """
    if not (isinstance(n, int) and n >= 1 and 1 <= r <= n):
        raise InvalidRank(f"need 1 <= r <= n, got n={n}, r={r}")
    coords = [f"x{i + 1}" for i in range(n)]
    chart = ChartSpec.euclidean(coords)
    rng = SplitMix64(seed)
    monos = _monomials(coords)
    quad_start = 1 + n
    budget = min(1.0, 4.0 / n)
    frame = []
    for i in range(n):
        row = []
        for j in range(n):
            # constant, all linear terms and one quadratic monomial
            q = quad_start + int(rng.next_u64() % (len(monos) - quad_start))
            chosen = list(range(quad_start)) + [q]
            coef = np.array([2.0 * rng.uniform() - 1.0 for _ in chosen])
            coef *= budget * RANDOM_EPSILON / np.abs(coef).sum()
            terms = [ex.num(float(f"{c:.6g}")) if k == 0 else _prod(ex.num(float(f"{c:.6g}")), monos[k])
                     for c, k in zip(coef, chosen)]
            if i == j:
                terms = [ex.Num(1.0)] + terms
            row.append(_sum(terms))
        frame.append(row)

    memo: dict = {}
    idx = tuple(range(n))
    det = _determinant(frame, idx, idx, memo)
    adj = _adjugate(frame, n, memo)
    j_entries = []
    for i in range(n):
        row = []
        for j in range(n):
            neg = _sum([_prod(frame[i][k], adj[k][j]) for k in range(r, n)])
            corr = ex.div(ex.mul(ex.Num(2.0), neg), det) if not ex.is_zero(neg) else ex.Num(0.0)
            row.append(ex.sub(ex.Num(float(i == j)), corr) if not ex.is_zero(corr) else ex.Num(float(i == j)))
        j_entries.append(row)
    det2 = ex.mul(det, det)
    g_entries = [
        [ex.div(_sum([_prod(adj[k][i], adj[k][j]) for k in range(n)]), det2) for j in range(n)] for i in range(n)
    ]
    truth = {"pure": True, "ranks": (r, n - r)}
    if n - r <= 1 and r <= 1:
        truth["phi_integrable"] = True
    return CatalogEntry(
        f"random:{n}:{r}:{seed}",
        chart,
        MetricField(chart, g_entries),
        "product",
        OneOneField(chart, j_entries),
        truth,
    )


NAMED = {
    "flat_fibonacci": flat_fibonacci,
    "twisted_book": twisted_book,
    "product_example": product_example,
    "integrable_nonparallel": integrable_nonparallel,
}


def get(name: str) -> CatalogEntry:
    """Look up a named entry, or ``random:<n>:<r>:<seed>``."""
    if name in NAMED:
        return NAMED[name]()
    if name.startswith("random:"):
        try:
            n, r, seed = (int(v) for v in name.split(":")[1:])
        except ValueError:
            raise KeyError(f"malformed random entry name {name!r}") from None
        return random_pure_structure(n, r, seed)
    raise KeyError(f"unknown catalog entry {name!r}; known: {', '.join(NAMED)}")


def _toml_str(s: str) -> str:
    return json.dumps(s)


def _toml_matrix(rows) -> str:
    lines = ",\n".join("  [" + ", ".join(_toml_str(t) for t in row) + "]" for row in rows)
    return "[\n" + lines + ",\n]"


def export(entry: CatalogEntry, options: dict | None = None) -> str:
    """The entry as a spec file (TOML) that the command line tool can load."""
    chart = entry.chart
    n = chart.dim
    key = "phi" if entry.kind == "golden" else "J"
    box = ", ".join(f"[{lo!r}, {hi!r}]" for lo, hi in chart.box)
    texts = entry.structure.texts()
    gtexts = entry.g.texts()
    out = [
        f"# catalog entry {entry.name}",
        "[manifold]",
        f"dim = {n}",
        "coords = [" + ", ".join(_toml_str(c) for c in chart.coords) + "]",
        f"sample_box = [{box}]",
        "",
        "[metric]",
        "g = " + _toml_matrix(gtexts),
        "",
        "[structure]",
        f'kind = "{entry.kind}"',
        f"{key} = " + _toml_matrix(texts),
    ]
    if options:
        out += ["", "[options]"] + [f"{k} = {v!r}" for k, v in options.items()]
    return "\n".join(out) + "\n"
