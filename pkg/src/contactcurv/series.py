"""Truncated matrix-valued Taylor/Laurent series arithmetic.

A :class:`MatrixSeries` stores square-matrix coefficients for consecutive
powers ``t^k``, ``k = k_min .. trunc``.  Powers below ``k_min`` are known to
be zero; powers above ``trunc`` are *unknown* (truncated away), and every
operation propagates truncation pessimistically so that no reported
coefficient can be silently wrong.

Coefficients are either float64 arrays or object arrays of
:class:`fractions.Fraction` (exact mode).  Exact mode exists for the
rational fixtures of the Laurent-inversion pipeline; everything else runs
in floats.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "MatrixSeries",
    "SingularSeries",
    "series_add",
    "series_mul",
    "series_invert",
    "series_derivative",
]

MAX_POLE_BOUND = 3


class SingularSeries(Exception):
    """Coefficient matching failed: the series has no inverse with the
    requested pole bound."""


def _is_exact(mat) -> bool:
    return isinstance(mat, np.ndarray) and mat.dtype == object


def _zero_matrix(n: int, exact: bool):
    if exact:
        z = np.empty((n, n), dtype=object)
        z[:] = Fraction(0)
        return z
    return np.zeros((n, n))


def _eye_matrix(n: int, exact: bool):
    if exact:
        m = _zero_matrix(n, exact)
        for i in range(n):
            m[i, i] = Fraction(1)
        return m
    return np.eye(n)


def _as_coeff(mat, exact: bool):
    mat = np.asarray(mat)
    if exact:
        out = np.empty(mat.shape, dtype=object)
        for idx in np.ndindex(*mat.shape):
            v = mat[idx]
            out[idx] = v if isinstance(v, Fraction) else Fraction(v)
        return out
    return np.asarray(mat, dtype=float)


@dataclass
class MatrixSeries:
    """Matrix-valued truncated Laurent series sum_k coeffs[k - k_min] t^k."""

    n: int
    k_min: int
    coeffs: list = field(default_factory=list)
    exact: bool = False

    def __post_init__(self):
        self.coeffs = [_as_coeff(c, self.exact) for c in self.coeffs]
        for c in self.coeffs:
            if c.shape != (self.n, self.n):
                raise ValueError(f"coefficient shape {c.shape} != ({self.n},{self.n})")
        if not self.coeffs:
            raise ValueError("a series needs at least one retained coefficient")

    @property
    def trunc(self) -> int:
        return self.k_min + len(self.coeffs) - 1

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero(n: int, trunc: int, k_min: int = 0, exact: bool = False) -> "MatrixSeries":
        m = trunc - k_min + 1
        return MatrixSeries(n, k_min, [_zero_matrix(n, exact) for _ in range(m)], exact)

    @staticmethod
    def identity(n: int, trunc: int, exact: bool = False) -> "MatrixSeries":
        s = MatrixSeries.zero(n, trunc, 0, exact)
        s.coeffs[0] = _eye_matrix(n, exact)
        return s

    @staticmethod
    def from_terms(n: int, terms: dict, trunc: int, exact: bool = False) -> "MatrixSeries":
        """Series from a {power: matrix} dict; unlisted powers up to trunc are
        exactly zero (use for exact polynomials, declaring how far that is known)."""
        k_min = min(terms) if terms else 0
        s = MatrixSeries.zero(n, trunc, k_min, exact)
        for k, mat in terms.items():
            if k > trunc:
                raise ValueError("term beyond declared truncation")
            s.coeffs[k - s.k_min] = _as_coeff(mat, exact)
        return s

    # -- access --------------------------------------------------------

    def coeff(self, k: int):
        """Coefficient of t^k.  Zero below k_min, error above trunc."""
        if k > self.trunc:
            raise ValueError(f"power {k} beyond truncation {self.trunc}")
        if k < self.k_min:
            return _zero_matrix(self.n, self.exact)
        return self.coeffs[k - self.k_min]

    def astype_float(self) -> "MatrixSeries":
        return MatrixSeries(self.n, self.k_min,
                            [np.asarray(c, dtype=float) for c in self.coeffs], False)

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(np.asarray(c, dtype=float)))) for c in self.coeffs)

    def __repr__(self):
        return (f"MatrixSeries(n={self.n}, k_min={self.k_min}, trunc={self.trunc}, "
                f"exact={self.exact})")


def _check_same_n(a: MatrixSeries, b: MatrixSeries):
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")


def series_add(a: MatrixSeries, b: MatrixSeries) -> MatrixSeries:
    """Coefficientwise sum; trunc = min(trunc_a, trunc_b)."""
    _check_same_n(a, b)
    exact = a.exact and b.exact
    k_min = min(a.k_min, b.k_min)
    trunc = min(a.trunc, b.trunc)
    if trunc < k_min:
        raise ValueError("operands share no retained powers")
    out = MatrixSeries.zero(a.n, trunc, k_min, exact)
    for k in range(k_min, trunc + 1):
        ca = a.coeff(k) if k <= a.trunc else None
        cb = b.coeff(k) if k <= b.trunc else None
        out.coeffs[k - k_min] = _as_coeff(ca + cb, exact)
    return out


def series_mul(a: MatrixSeries, b: MatrixSeries) -> MatrixSeries:
    """Cauchy product.

    The coefficient of t^r is exact only if no unknown coefficient of an
    operand could contribute, hence trunc = min(trunc_a + k_min_b,
    trunc_b + k_min_a).
    """
    _check_same_n(a, b)
    exact = a.exact and b.exact
    k_min = a.k_min + b.k_min
    trunc = min(a.trunc + b.k_min, b.trunc + a.k_min)
    if trunc < k_min:
        raise ValueError("product retains no powers at these truncations")
    out = MatrixSeries.zero(a.n, trunc, k_min, exact)
    for r in range(k_min, trunc + 1):
        acc = _zero_matrix(a.n, exact)
        lo = max(a.k_min, r - b.trunc)
        hi = min(a.trunc, r - b.k_min)
        for i in range(lo, hi + 1):
            acc = acc + a.coeff(i) @ b.coeff(r - i)
        out.coeffs[r - k_min] = _as_coeff(acc, exact)
    return out


def series_derivative(a: MatrixSeries) -> MatrixSeries:
    """Termwise d/dt: k coeff_k t^{k-1}."""
    k_min = a.k_min - 1
    trunc = a.trunc - 1
    out = MatrixSeries.zero(a.n, trunc, k_min, a.exact)
    for k in range(a.k_min, a.trunc + 1):
        fac = Fraction(k) if a.exact else float(k)
        out.coeffs[k - 1 - k_min] = _as_coeff(a.coeff(k) * fac, a.exact)
    return out


def _solve_block_system(rows: list, rhs_rows: list, n: int, exact: bool):
    """Solve the stacked (possibly overdetermined) block-linear system.

    ``rows[r]`` is the list of n x n blocks multiplying the unknown block
    column vector; ``rhs_rows[r]`` the n x n right-hand side of equation r.
    Returns the unknown blocks or raises SingularSeries when the system is
    inconsistent or rank deficient.
    """
    n_eq = len(rows)
    n_unk = len(rows[0])
    if exact:
        big = np.empty((n_eq * n, n_unk * n), dtype=object)
        big[:] = Fraction(0)
        rhs = np.empty((n_eq * n, n), dtype=object)
        rhs[:] = Fraction(0)
    else:
        big = np.zeros((n_eq * n, n_unk * n))
        rhs = np.zeros((n_eq * n, n))
    for r in range(n_eq):
        rhs[r * n:(r + 1) * n, :] = rhs_rows[r]
        for m in range(n_unk):
            big[r * n:(r + 1) * n, m * n:(m + 1) * n] = rows[r][m]

    if exact:
        sol, ok = _exact_solve(big, rhs)
    else:
        sol, res, rank, _ = np.linalg.lstsq(big, rhs, rcond=None)
        resid = big @ sol - rhs
        scale = max(1.0, float(np.max(np.abs(rhs))), float(np.max(np.abs(big))))
        ok = float(np.max(np.abs(resid))) <= 1e-9 * scale
    if not ok:
        raise SingularSeries("coefficient matching has no solution at the "
                             "requested pole bound")
    return [sol[m * n:(m + 1) * n, :] for m in range(n_unk)]


def _exact_solve(big, rhs):
    """Gaussian elimination over Fractions.

    Solves a consistent (possibly rank-deficient) system, assigning zero to
    free variables; returns (solution, consistent)."""
    m, k = big.shape
    aug = np.empty((m, k + rhs.shape[1]), dtype=object)
    aug[:, :k] = big
    aug[:, k:] = rhs
    row = 0
    pivots = []
    for col in range(k):
        piv = None
        best = Fraction(0)
        for r in range(row, m):
            v = abs(aug[r, col])
            if v > best:
                best, piv = v, r
        if piv is None or best == 0:
            continue  # free variable, set to zero
        if piv != row:
            aug[[row, piv]] = aug[[piv, row]]
        aug[row] = aug[row] / aug[row, col]
        for r in range(m):
            if r != row and aug[r, col] != 0:
                aug[r] = aug[r] - aug[r, col] * aug[row]
        pivots.append(col)
        row += 1
        if row == m:
            break
    # remaining rows must be identically zero for consistency
    for r in range(row, m):
        if any(v != 0 for v in aug[r]):
            return None, False
    sol = np.empty((k, rhs.shape[1]), dtype=object)
    sol[:] = Fraction(0)
    for i, col in enumerate(pivots):
        sol[col, :] = aug[i, k:]
    return sol, True


def series_invert(b: MatrixSeries, pole_bound: int) -> MatrixSeries:
    """Invert a Taylor series whose inverse has a pole of order <= pole_bound.

    Matches coefficients of b(t) X(t) = I for X with k_min = -pole_bound.
    The retained order of X is q = trunc_b - 2 * pole_bound: perturbing b
    above its truncation perturbs X by O(t^{q + 1}).  The linear system
    carries auxiliary unknown coefficients up to power q + pole_bound so
    that every imposed equation is exactly satisfied by the true inverse
    (since b(0) is singular, equations above q constrain the retained
    coefficients through the higher ones); the auxiliaries are discarded.
    """
    if b.k_min < 0:
        raise ValueError("series_invert expects a Taylor series (k_min >= 0)")
    if not 0 <= pole_bound <= MAX_POLE_BOUND:
        raise ValueError(f"pole_bound must lie in [0, {MAX_POLE_BOUND}]; "
                         f"order > {MAX_POLE_BOUND} signals a bug upstream")
    p = pole_bound
    q = b.trunc - 2 * p
    if q < -p:
        raise ValueError("input truncation too small for this pole bound")
    n = b.n
    # unknown blocks x_{-p} .. x_{q+p}; equations for powers r = -p .. q+p;
    # every equation involves only known b coefficients (b is Taylor)
    unknowns = list(range(-p, q + p + 1))
    rows, rhs_rows = [], []
    for r in range(-p, q + p + 1):
        rows.append([b.coeff(r - m) if 0 <= r - m <= b.trunc
                     else _zero_matrix(n, b.exact) for m in unknowns])
        rhs_rows.append(_eye_matrix(n, b.exact) if r == 0
                        else _zero_matrix(n, b.exact))
    blocks = _solve_block_system(rows, rhs_rows, n, b.exact)
    return MatrixSeries(n, -p, blocks[:q + p + 1], b.exact)
