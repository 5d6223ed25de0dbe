"""Truncated Taylor data of tensor fields sampled at a batch of points.

A :class:`Jet` of order ``m`` stores ``parts[0..m]`` where ``parts[q]`` has
shape ``(P, *shape, n, ..., n)`` with ``q`` trailing derivative axes, i.e.
``parts[1][p, ..., l] = d_l T(p)`` and ``parts[2][p, ..., l, r] = d_l d_r T(p)``.
Products go through :func:`jeinsum`, which applies the Leibniz rule, so any
tensor expression built from jets carries exact derivatives along with it.
"""

from __future__ import annotations

import itertools

import numpy as np

_DERIV_LETTERS = "UVW"
_POINT = "Z"


class Jet:
    __slots__ = ("parts", "dim")

    def __init__(self, parts, dim: int):
        self.parts = tuple(np.asarray(p, dtype=float) for p in parts)
        self.dim = int(dim)

    @classmethod
    def constant(cls, array, npts: int, dim: int, order: int = 0) -> "Jet":
        a = np.asarray(array, dtype=float)
        base = np.broadcast_to(a, (npts,) + a.shape)
        parts = [np.array(base)]
        for q in range(1, order + 1):
            parts.append(np.zeros((npts,) + a.shape + (dim,) * q))
        return cls(parts, dim)

    @property
    def order(self) -> int:
        return len(self.parts) - 1

    @property
    def value(self) -> np.ndarray:
        return self.parts[0]

    @property
    def npts(self) -> int:
        return self.parts[0].shape[0]

    @property
    def shape(self) -> tuple:
        return self.parts[0].shape[1:]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError(f"jet of order {self.order} cannot supply order {order}")
        return Jet(self.parts[: order + 1], self.dim)

    def grad(self) -> "Jet":
        """Jet of the derivative tensor ``d_l T`` (derivative index last)."""
        if self.order < 1:
            raise ValueError("order-0 jet carries no derivative")
        return Jet(self.parts[1:], self.dim)

    def _combine(self, other, op):
        if isinstance(other, Jet):
            m = min(self.order, other.order)
            return Jet([op(a, b) for a, b in zip(self.parts[: m + 1], other.parts[: m + 1])], self.dim)
        raise TypeError("jets combine only with jets")

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __neg__(self):
        return Jet([-p for p in self.parts], self.dim)

    def __mul__(self, c):
        if isinstance(c, Jet):
            raise TypeError("use jeinsum for products of jets")
        return Jet([c * p for p in self.parts], self.dim)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)


def jeinsum(subscripts: str, *jets: Jet) -> Jet:
    """Multilinear contraction of jets with the Leibniz rule applied.

    ``subscripts`` uses lowercase letters only and omits the point axis, e.g.
    ``"kim,mj->kij"``.
    """
    lhs, out = subscripts.replace(" ", "").split("->")
    ins = lhs.split(",")
    if len(ins) != len(jets):
        raise ValueError("subscript count does not match operand count")
    order = min(j.order for j in jets)
    parts = []
    for m in range(order + 1):
        letters = _DERIV_LETTERS[:m]
        total = None
        # distribute each derivative over the factors
        for assign in itertools.product(range(len(jets)), repeat=m):
            ops = []
            subs = []
            for f, (jet, sub) in enumerate(zip(jets, ins)):
                mine = "".join(letters[t] for t in range(m) if assign[t] == f)
                ops.append(jet.parts[len(mine)])
                subs.append(_POINT + sub + mine)
            term = np.einsum(",".join(subs) + "->" + _POINT + out + letters, *ops)
            total = term if total is None else total + term
        parts.append(total)
    return Jet(parts, jets[0].dim)


def jinv(a: Jet) -> Jet:
    """Matrix inverse over the last two tensor axes (order <= 2)."""
    if a.order > 2:
        raise ValueError("jinv supports order <= 2")
    b = np.linalg.inv(a.parts[0])
    parts = [b]
    if a.order >= 1:
        a1 = a.parts[1]
        parts.append(-np.einsum("Zab,ZbcU,Zcd->ZadU", b, a1, b))
    if a.order >= 2:
        a1 = a.parts[1]
        t = np.einsum("Zab,ZbcU,Zcd,ZdeV,Zef->ZafUV", b, a1, b, a1, b)
        parts.append(
            -np.einsum("Zab,ZbcUV,Zcd->ZadUV", b, a.parts[2], b) + t + np.swapaxes(t, -1, -2)
        )
    return Jet(parts, a.dim)
