"""Degree-capped multivariate Taylor arithmetic (jets).

A jet stores the Taylor coefficients of a scalar function around a base
point, up to a fixed total degree K, in m variables.  Products truncate at
degree K, so +, *, /, sqrt are exact operations in the quotient algebra.
Frame fields built from jet arithmetic therefore yield machine-precision
structural functions together with their first and second frame
derivatives, with no finite-difference error.

Only what the embedded sphere models need is implemented: arithmetic,
partial derivatives, and value/gradient extraction.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

__all__ = ["JetContext", "Jet"]


@lru_cache(maxsize=None)
def _context_tables(m: int, K: int):
    idxs = [tuple(0 for _ in range(m))]
    for deg in range(1, K + 1):
        for combo in combinations_with_replacement(range(m), deg):
            a = [0] * m
            for v in combo:
                a[v] += 1
            idxs.append(tuple(a))
    idxs = sorted(set(idxs), key=lambda a: (sum(a), a))
    pos = {a: i for i, a in enumerate(idxs)}
    degs = np.array([sum(a) for a in idxs])
    # multiplication table: all (i, j, target) with deg_i + deg_j <= K
    ii, jj, kk = [], [], []
    for i, a in enumerate(idxs):
        for j, b in enumerate(idxs):
            if degs[i] + degs[j] > K:
                continue
            c = tuple(x + y for x, y in zip(a, b))
            ii.append(i)
            jj.append(j)
            kk.append(pos[c])
    # partial-derivative maps: for variable v, (src, dst, factor)
    partials = []
    for v in range(m):
        src, dst, fac = [], [], []
        for i, a in enumerate(idxs):
            if a[v] == 0:
                continue
            b = list(a)
            b[v] -= 1
            src.append(i)
            dst.append(pos[tuple(b)])
            fac.append(a[v])
        partials.append((np.array(src), np.array(dst), np.array(fac, dtype=float)))
    return idxs, pos, degs, (np.array(ii), np.array(jj), np.array(kk)), partials


class JetContext:
    """Shared tables for jets in m variables truncated at total degree K."""

    def __init__(self, m: int, K: int):
        self.m = m
        self.K = K
        self.idxs, self.pos, self.degs, self.multable, self.partials = _context_tables(m, K)
        self.size = len(self.idxs)

    def constant(self, value: float) -> "Jet":
        c = np.zeros(self.size)
        c[0] = value
        return Jet(self, c)

    def variables(self, x0) -> list["Jet"]:
        """Jets of the coordinate functions around the base point x0."""
        out = []
        for v in range(self.m):
            c = np.zeros(self.size)
            c[0] = x0[v]
            if self.K >= 1:
                e = [0] * self.m
                e[v] = 1
                c[self.pos[tuple(e)]] = 1.0
            out.append(Jet(self, c))
        return out


class Jet:
    __slots__ = ("ctx", "c")

    def __init__(self, ctx: JetContext, c: np.ndarray):
        self.ctx = ctx
        self.c = c

    # -- ring operations ------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            return other
        return self.ctx.constant(float(other))

    def __add__(self, other):
        o = self._coerce(other)
        return Jet(self.ctx, self.c + o.c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.ctx, -self.c)

    def __sub__(self, other):
        o = self._coerce(other)
        return Jet(self.ctx, self.c - o.c)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.ctx, self.c * float(other))
        ii, jj, kk = self.ctx.multable
        out = np.zeros(self.ctx.size)
        np.add.at(out, kk, self.c[ii] * other.c[jj])
        return Jet(self.ctx, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.ctx, self.c / float(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)

    # -- analytic functions ----------------------------------------------

    def _nilpotent_series(self, coeffs):
        """sum coeffs[k] * u^k where u = self with zero constant term."""
        acc = self.ctx.constant(coeffs[0])
        upow = None
        for k in range(1, len(coeffs)):
            upow = self if upow is None else upow * self
            acc = acc + coeffs[k] * upow
        return acc

    def reciprocal(self):
        a0 = self.c[0]
        if a0 == 0.0:
            raise ZeroDivisionError("jet with zero constant term")
        u = Jet(self.ctx, self.c / a0)
        u.c[0] = 0.0
        coeffs = [(-1.0) ** k for k in range(self.ctx.K + 1)]
        return u._nilpotent_series(coeffs) / a0

    def sqrt(self):
        a0 = self.c[0]
        if a0 <= 0.0:
            raise ValueError("jet sqrt needs positive constant term")
        u = Jet(self.ctx, self.c / a0)
        u.c[0] = 0.0
        # binomial series for (1+u)^{1/2}
        coeffs = [1.0]
        cur = 1.0
        for k in range(1, self.ctx.K + 1):
            cur *= (0.5 - (k - 1)) / k
            coeffs.append(cur)
        return u._nilpotent_series(coeffs) * np.sqrt(a0)

    # -- extraction -------------------------------------------------------

    @property
    def value(self) -> float:
        return float(self.c[0])

    def gradient(self) -> np.ndarray:
        g = np.zeros(self.ctx.m)
        for v in range(self.ctx.m):
            e = [0] * self.ctx.m
            e[v] = 1
            g[v] = self.c[self.ctx.pos[tuple(e)]]
        return g

    def partial(self, v: int) -> "Jet":
        """d/dx_v as a jet.  The result is valid one degree lower than the
        input; its top-degree coefficients are zero placeholders."""
        src, dst, fac = self.ctx.partials[v]
        out = np.zeros(self.ctx.size)
        out[dst] = self.c[src] * fac
        return Jet(self.ctx, out)

    def directional(self, vec) -> float:
        """First derivative along a constant coordinate direction."""
        return float(self.gradient() @ np.asarray(vec, dtype=float))
