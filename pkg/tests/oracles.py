"""Independent reference computations with sympy and finite differences.

Nothing here imports the tensor code under test; only expression *texts*
cross the boundary, and they are re-read by sympy.
"""

from __future__ import annotations

import itertools

import numpy as np
import sympy as sp

SYMPY_CONSTANTS = {"pi": sp.pi, "sqrt5": sp.sqrt(5), "phi": (1 + sp.sqrt(5)) / 2, "phibar": (1 - sp.sqrt(5)) / 2}


def symbols(coords):
    return tuple(sp.Symbol(c, real=True) for c in coords)


def to_sympy(text: str, coords):
    names = dict(zip(coords, symbols(coords)))
    names.update(SYMPY_CONSTANTS)
    names.update({"abs": sp.Abs, "sqrt": sp.sqrt, "log": sp.log, "exp": sp.exp, "sin": sp.sin, "cos": sp.cos, "tan": sp.tan})
    return sp.sympify(text.replace("^", "**"), locals=names)


def matrix(texts, coords) -> sp.Matrix:
    return sp.Matrix([[to_sympy(t, coords) for t in row] for row in texts])


def christoffel(g: sp.Matrix, xs):
    n = len(xs)
    ginv = g.inv()
    return [
        [
            [
                sp.Rational(1, 2)
                * sum(ginv[k, l] * (sp.diff(g[l, j], xs[i]) + sp.diff(g[l, i], xs[j]) - sp.diff(g[i, j], xs[l])) for l in range(n))
                for j in range(n)
            ]
            for i in range(n)
        ]
        for k in range(n)
    ]


def nabla_tensor11(gamma, J: sp.Matrix, xs):
    """``C[i][k][j] = (nabla_i J)^k_j``."""
    n = len(xs)
    return [
        [
            [
                sp.diff(J[k, j], xs[i])
                + sum(gamma[k][i][m] * J[m, j] for m in range(n))
                - sum(gamma[m][i][j] * J[k, m] for m in range(n))
                for j in range(n)
            ]
            for k in range(n)
        ]
        for i in range(n)
    ]


def first_canonical(g, J, xs):
    n = len(xs)
    gam = christoffel(g, xs)
    c = nabla_tensor11(gam, J, xs)
    return [
        [[gam[k][i][j] - sp.Rational(1, 2) * sum(c[i][k][m] * J[m, j] for m in range(n)) for j in range(n)] for i in range(n)]
        for k in range(n)
    ]


def torsion(gamma, n):
    return [[[gamma[k][i][j] - gamma[k][j][i] for j in range(n)] for i in range(n)] for k in range(n)]


def bracket(X, Y, xs):
    n = len(xs)
    return [sum(X[a] * sp.diff(Y[k], xs[a]) - Y[a] * sp.diff(X[k], xs[a]) for a in range(n)) for k in range(n)]


def nijenhuis(J: sp.Matrix, xs):
    """``N[k][i][j]`` from the bracket definition on coordinate fields."""
    n = len(xs)
    out = [[[0] * n for _ in range(n)] for _ in range(n)]
    for i, j in itertools.product(range(n), repeat=2):
        ei = [sp.Integer(int(a == i)) for a in range(n)]
        ej = [sp.Integer(int(a == j)) for a in range(n)]
        jei = list(J[:, i])
        jej = list(J[:, j])
        b0 = bracket(ei, ej, xs)  # zero, kept for the full formula
        jj = J * J
        v = sp.Matrix(jj) * sp.Matrix(b0) + sp.Matrix(bracket(jei, jej, xs))
        v -= J * sp.Matrix(bracket(jei, ej, xs)) + J * sp.Matrix(bracket(ei, jej, xs))
        for k in range(n):
            out[k][i][j] = v[k]
    return out


def riemann(gamma, xs):
    """``R[l][k][i][j] = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik``."""
    n = len(xs)
    r = np.empty((n, n, n, n), dtype=object)
    for l, k, i, j in itertools.product(range(n), repeat=4):
        r[l, k, i, j] = (
            sp.diff(gamma[l][j][k], xs[i])
            - sp.diff(gamma[l][i][k], xs[j])
            + sum(gamma[l][i][m] * gamma[m][j][k] - gamma[l][j][m] * gamma[m][i][k] for m in range(n))
        )
    return r


def numeric(tensor, xs, point) -> np.ndarray:
    """Evaluate a nested list / array of sympy expressions at ``point``."""
    subs = dict(zip(xs, point))
    arr = np.array(tensor, dtype=object)
    return np.vectorize(lambda e: float(sp.sympify(e).subs(subs)), otypes=[float])(arr)


def well_adapted_exact(g, J, xs, point):
    """Exact solve for ``Gamma^w = Gamma^0 + Q`` at a rational point.

    Conditions written out directly: ``Q(X, JY) = J Q(X, Y)``,
    ``g(Q(X,Y),Z) + g(Q(X,Z),Y) = 0`` and the torsion symmetry
    ``g(T(X,Y),Z) - g(T(Z,Y),X) = g(T(JZ,Y),JX) - g(T(JX,Y),JZ)``.
    Returns ``(gamma_w, number_of_free_parameters)``.
    """
    n = len(xs)
    subs = dict(zip(xs, point))
    g0 = g.subs(subs)
    j0 = J.subs(subs)
    gam0 = [[[sp.nsimplify(sp.simplify(e.subs(subs))) for e in row] for row in mat] for mat in first_canonical(g, J, xs)]
    q = [[[sp.Symbol(f"q_{k}{i}{j}") for j in range(n)] for i in range(n)] for k in range(n)]
    unknowns = [q[k][i][j] for k in range(n) for i in range(n) for j in range(n)]
    gw = [[[gam0[k][i][j] + q[k][i][j] for j in range(n)] for i in range(n)] for k in range(n)]
    t = torsion(gw, n)
    eqs = []
    for k, i, j in itertools.product(range(n), repeat=3):
        eqs.append(sum(q[k][i][m] * j0[m, j] for m in range(n)) - sum(j0[k, m] * q[m][i][j] for m in range(n)))
    for i, j, l in itertools.product(range(n), repeat=3):
        eqs.append(sum(g0[k, l] * q[k][i][j] + g0[k, j] * q[k][i][l] for k in range(n)))

    def gt(xv, yv, zv):
        # g(T(X, Y), Z) for column vectors
        return sum(t[k][a][b] * xv[a] * yv[b] * g0[k, c] * zv[c] for k in range(n) for a in range(n) for b in range(n) for c in range(n))

    basis = [[sp.Integer(int(a == i)) for a in range(n)] for i in range(n)]
    for x, y, z in itertools.product(range(n), repeat=3):
        ex, ey, ez = basis[x], basis[y], basis[z]
        jx, jz = list(j0[:, x]), list(j0[:, z])
        eqs.append(gt(ex, ey, ez) - gt(ez, ey, ex) - gt(jz, ey, jx) + gt(jx, ey, jz))
    sol = sp.linsolve(eqs, unknowns)
    (values,) = list(sol)
    free = set().union(*(sp.sympify(v).free_symbols for v in values)) & set(unknowns)
    vals = dict(zip(unknowns, values))
    gw_num = np.array([[[float(gam0[k][i][j] + vals[q[k][i][j]].subs({s: 0 for s in free})) for j in range(n)]
                        for i in range(n)] for k in range(n)])
    return gw_num, len(free)


def central_difference(f, x: np.ndarray, h: float) -> np.ndarray:
    """Gradient of scalar ``f`` at ``x`` by central differences."""
    out = np.empty(len(x))
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2 * h)
    return out
