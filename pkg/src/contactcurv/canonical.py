"""Canonical (Darboux) frame data along a geodesic and curvature blocks.

The moving frame is the adapted, parallel-transported frame: X_0 the Reeb
field, X_2d a horizontal extension of the tangent T, X_1 = -J T, and
X_2..X_{2d-1} transported by

    nabla_T X_j = (h_0 J X_j + a_j J X_2d) / 2,
    a_j = g(h_0 X_2d - 2 Q(X_2d, X_2d), X_j).

Curvature blocks are reported in the canonical order (a, b, c_2..c_2d)
with the tangent in the last c slot.  The bb, bc, cc blocks use the
general-Q closed forms; aa and ac use the CR (Q = 0) closed forms when
|Q| vanishes at the point and otherwise fall back to the numerical
symplectic route.

Numerical aa/ac route.  The canonical frame element above the Reeb slot
is, in chart components, E_a = (0, e_0): the contact form seen as a
vertical tangent vector.  The structural equations chain everything else
to its flow derivatives,

    E_b = E_a',   F_b = -E_a'',   F_a = R_bb E_a' + sum_j R_bc_j E_c_j + E_a''',

with E_c_j = (0, a_j e_0 + row_j of the moving frame), so R_aa =
sigma(F_a', F_a) and R_ac_j = sigma(F_a', F_c_j) reduce to flow pullbacks
of concrete vertical vectors plus the already-known bb/bc closed forms.
No off-geodesic extension of the moving frame is ever needed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .flow import (
    ExtremalState,
    FlowLinearization,
    GeodesicRecord,
    IntegrationFailure,
    flow,
    hamiltonian,
    symplectic_product,
)
from .structure import ContactModel, TensorCache

__all__ = [
    "DegenerateCovector",
    "MovingFrame",
    "CurvatureBlocks",
    "adapted_frame",
    "parallel_frame",
    "canonical_splitting",
    "curvature_blocks",
    "numerical_aa_ac",
    "ricci",
    "curvature_profile",
    "curvature_taylor_data",
    "blocks_to_dict",
]

Q_CLOSED_FORM_THRESHOLD = 1e-9


class DegenerateCovector(Exception):
    """The covector has H = 0; no adapted frame exists."""


# --------------------------------------------------------------------------
# adapted frame
# --------------------------------------------------------------------------

def adapted_frame(model: ContactModel, state: ExtremalState,
                  seed_rotation: Optional[np.ndarray] = None) -> np.ndarray:
    """Deterministic adapted frame at one point.

    Returns an (n, n) matrix O whose rows are the adapted frame in
    reference-frame components: row 0 the Reeb field, row 2d the unit
    tangent, row 1 = -J T, rows 2..2d-1 a completion of span{T, JT}^perp
    by modified Gram-Schmidt over a fixed seed basis (optionally rotated
    by ``seed_rotation`` in O(2d-2)), signs fixed so the first nonzero
    component is positive.
    """
    n = model.n
    k = n - 1
    if hamiltonian(state) <= 0.0:
        raise DegenerateCovector("adapted frame needs H > 0")
    T = state.h[1:] / np.linalg.norm(state.h[1:])
    J = TensorCache(model, state.x).Jmat
    JT = J @ T
    O = np.zeros((n, n))
    O[0, 0] = 1.0
    O[n - 1, 1:] = T
    O[1, 1:] = -JT
    if k > 2:
        seeds = np.eye(k)
        if seed_rotation is not None:
            U = np.asarray(seed_rotation, dtype=float)
            if U.shape != (k - 2, k - 2):
                raise ValueError(f"seed rotation must be O({k - 2})")
        rows = [T, JT]
        built = []
        for s in range(k):
            v = seeds[s].copy()
            for r in rows + built:
                v -= (v @ r) * r
            nv = np.linalg.norm(v)
            if nv < 1e-8:
                continue
            v /= nv
            built.append(v)
            if len(built) == k - 2:
                break
        if len(built) != k - 2:
            raise DegenerateCovector("Gram-Schmidt completion failed")
        B = np.array(built)
        if seed_rotation is not None:
            B = U @ B
        # deterministic sign: first component of nontrivial magnitude positive
        for i in range(B.shape[0]):
            idx = np.argmax(np.abs(B[i]) > 1e-12)
            if B[i, idx] < 0:
                B[i] *= -1.0
        O[2:n - 1, 1:] = B
    return O


# --------------------------------------------------------------------------
# parallel transported frame along a geodesic
# --------------------------------------------------------------------------

@dataclass
class MovingFrame:
    """Adapted, parallel-transported frame sampled densely along a geodesic."""

    model: ContactModel
    geo: GeodesicRecord
    seed_rotation: Optional[np.ndarray] = None
    initial_rotation: Optional[np.ndarray] = None
    tol: float = 1e-11
    _fwd: object = field(default=None, repr=False)
    _bwd: object = field(default=None, repr=False)
    _O0: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        model, geo = self.model, self.geo
        n = model.n
        if self.initial_rotation is not None:
            self._O0 = np.asarray(self.initial_rotation, dtype=float)
        else:
            self._O0 = adapted_frame(model, geo.state(0.0), self.seed_rotation)
        if n - 1 > 2:
            y0 = self._O0[2:n - 1, 1:].ravel()
            rhs = self._transport_rhs()
            if geo.T > 0:
                sol = solve_ivp(rhs, (0.0, geo.T), y0, method="DOP853",
                                rtol=self.tol, atol=self.tol, dense_output=True)
                if not sol.success:
                    raise IntegrationFailure(f"frame transport failed: {sol.message}")
                self._fwd = sol.sol
            if geo.t_lo < 0:
                sol = solve_ivp(rhs, (0.0, geo.t_lo), y0, method="DOP853",
                                rtol=self.tol, atol=self.tol, dense_output=True)
                if not sol.success:
                    raise IntegrationFailure(f"frame transport failed: {sol.message}")
                self._bwd = sol.sol

    def _transport_rhs(self):
        model, geo = self.model, self.geo
        k = model.n - 1
        nrows = k - 2
        cr_identically = model.meta.get("CR_identically", False)

        def rhs(t, y):
            st = geo.state(t)
            cache = TensorCache(model, st.x)
            h1 = st.h[1:]
            h0 = st.h[0]
            J = cache.Jmat
            G = cache.gamma
            conv = np.einsum("i,ikm->km", h1, G)  # nabla_T X^ref coefficients
            if cr_identically:
                qtt = np.zeros(k)
            else:
                qtt = np.einsum("i,j,ijm->m", h1, h1, cache.Q)
            avec = h0 * h1 - 2.0 * qtt
            JT = J @ h1
            Y = y.reshape(nrows, k)
            a = Y @ avec
            dY = (-Y @ conv + 0.5 * h0 * (Y @ J.T)
                  + 0.5 * np.outer(a, JT))
            return dY.ravel()
        return rhs

    def _raw_rows(self, t: float) -> np.ndarray:
        k = self.model.n - 1
        if k - 2 == 0:
            return np.zeros((0, k))
        if t >= 0:
            return self._fwd(t).reshape(k - 2, k)
        return self._bwd(t).reshape(k - 2, k)

    def rotation(self, t: float) -> np.ndarray:
        """Frame rows at time t (orthonormality restored by Gram-Schmidt)."""
        model, geo = self.model, self.geo
        n = model.n
        st = geo.state(t)
        h1 = st.h[1:]
        T = h1 / np.linalg.norm(h1)
        J = TensorCache(model, st.x).Jmat
        JT = J @ T
        O = np.zeros((n, n))
        O[0, 0] = 1.0
        O[n - 1, 1:] = T
        O[1, 1:] = -JT
        if n - 1 > 2:
            rows = self._raw_rows(t)
            built = []
            for v in rows:
                w = v.copy()
                for r in [T, JT] + built:
                    w -= (w @ r) * r
                w /= np.linalg.norm(w)
                built.append(w)
            O[2:n - 1, 1:] = np.array(built)
        return O

    def transport_residual(self, t: float, eps: float = 1e-5) -> float:
        """Residual of nabla_T X_j - (h0 J X_j + a_j J T)/2 at time t."""
        model, geo = self.model, self.geo
        n = model.n
        if n - 1 <= 2:
            return 0.0
        st = geo.state(t)
        cache = TensorCache(model, st.x)
        rows_p = self._raw_rows(t + eps)
        rows_m = self._raw_rows(t - eps) if (t - eps >= geo.t_lo) else None
        if rows_m is None:
            return 0.0
        dY = (rows_p - rows_m) / (2 * eps)
        h1, h0 = st.h[1:], st.h[0]
        conv = np.einsum("i,ikm->km", h1, cache.gamma)
        qtt = np.einsum("i,j,ijm->m", h1, h1, cache.Q)
        avec = h0 * h1 - 2.0 * qtt
        Y = self._raw_rows(t)
        a = Y @ avec
        expect = -Y @ conv + 0.5 * h0 * (Y @ cache.Jmat.T) + 0.5 * np.outer(a, cache.Jmat @ h1)
        return float(np.max(np.abs(dY - expect)))

    def h0(self, t: float) -> float:
        return float(self.geo.state(t).h[0])

    def a(self, t: float) -> np.ndarray:
        """a_i = g(h0 T - 2 Q(T,T), X_i) for the frame rows i = 1..2d."""
        st = self.geo.state(t)
        cache = TensorCache(self.model, st.x)
        h1, h0 = st.h[1:], st.h[0]
        if self.model.meta.get("CR_identically", False):
            qtt = np.zeros(self.model.n - 1)
        else:
            qtt = np.einsum("i,j,ijm->m", h1, h1, cache.Q)
        avec = h0 * h1 - 2.0 * qtt
        return self.rotation(t)[1:, 1:] @ avec

    def orthonormality_drift(self, t: float) -> float:
        """Deviation of the raw transported rows from orthonormality."""
        if self.model.n - 1 <= 2:
            return 0.0
        st = self.geo.state(t)
        h1 = st.h[1:]
        T = h1 / np.linalg.norm(h1)
        JT = TensorCache(self.model, st.x).Jmat @ T
        rows = self._raw_rows(t)
        M = np.vstack([T, JT, rows])
        G = M @ M.T
        return float(np.max(np.abs(G - np.eye(G.shape[0]))))


def parallel_frame(model: ContactModel, geo: GeodesicRecord,
                   seed_rotation: Optional[np.ndarray] = None,
                   initial_rotation: Optional[np.ndarray] = None) -> MovingFrame:
    if abs(2 * hamiltonian(geo.state0) - 1.0) > 1e-9:
        raise DegenerateCovector("parallel_frame expects a unit-speed geodesic")
    return MovingFrame(model, geo, seed_rotation=seed_rotation,
                       initial_rotation=initial_rotation)


def canonical_splitting(model: ContactModel, state: ExtremalState) -> dict:
    """X_a, X_b and an orthonormal basis of S^c at one point.

    Full-frame components (index 0 the Reeb slot).  X_a follows the
    derived Step-7 convention X_a = X_0 - sum_j a_j X_j."""
    O = adapted_frame(model, state)
    n = model.n
    cache = TensorCache(model, state.x)
    h1, h0 = state.h[1:], state.h[0]
    qtt = np.einsum("i,j,ijm->m", h1, h1, cache.Q)
    avec_ref = h0 * h1 - 2.0 * qtt  # sum_j a_j X_j in reference components
    X_a = np.concatenate(([1.0], -avec_ref))
    X_b = np.concatenate(([0.0], O[1, 1:]))
    S_c = [np.concatenate(([0.0], O[j, 1:])) for j in range(2, n)]
    return {"X_a": X_a, "X_b": X_b, "S_c": np.array(S_c),
            "xa_convention": "step7"}


# --------------------------------------------------------------------------
# curvature blocks
# --------------------------------------------------------------------------

@dataclass
class CurvatureBlocks:
    t: float
    d: int
    Raa: float
    Rac: np.ndarray
    Rbb: float
    Rbc: np.ndarray
    Rcc: np.ndarray
    ricci_a: float
    ricci_b: float
    ricci_c: float
    aa_ac_mode: str
    h0: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def assembled(self) -> np.ndarray:
        n = 2 * self.d + 1
        R = np.zeros((n, n))
        R[0, 0] = self.Raa
        R[0, 2:] = self.Rac
        R[2:, 0] = self.Rac
        R[1, 1] = self.Rbb
        R[1, 2:] = self.Rbc
        R[2:, 1] = self.Rbc
        R[2:, 2:] = self.Rcc
        return R


def _closed_blocks_bcc(model: ContactModel, cache: TensorCache, h: np.ndarray,
                       rows: np.ndarray, avec_frame: np.ndarray):
    """bb, bc, cc blocks (general Q) in the moving frame.

    ``rows`` are the horizontal frame rows (index 1..2d), ``avec_frame``
    the a_i values in that frame."""
    k = model.n - 1
    h1, h0 = h[1:], h[0]
    T = rows[k - 1]
    JT = cache.Jmat @ T
    R4 = cache.R
    tau, Q = cache.tau, cache.Q

    def emb(w):
        return np.concatenate(([0.0], w))

    Tf, JTf = emb(T), emb(JT)
    qtt = np.einsum("i,j,ijm->m", T, T, Q)
    nablaQ_T = np.einsum("a,aijm->ijm", emb(T), cache.nabla_Q)
    nqttt = (np.einsum("i,j,ijm->m", T, T, nablaQ_T))
    tauT = tau @ T

    R_T_JT_JT_T = np.einsum("a,b,c,e,abce->", Tf, JTf, JTf, Tf, R4)
    Rbb = R_T_JT_JT_T + 3.0 * float(qtt @ qtt) - 3.0 * float(tauT @ JT) + h0 ** 2

    cidx = list(range(2, k + 1))  # moving-frame rows of the c block
    Rbc = np.zeros(k - 1)
    for a, j in enumerate(cidx):
        Xj = rows[j - 1]
        Xjf = emb(Xj)
        Rbc[a] = (-np.einsum("a,b,c,e,abce->", Tf, JTf, Xjf, Tf, R4)
                  + float(tauT @ Xj) - float(tauT @ T) * float(T @ Xj)
                  + 3.0 * float(nqttt @ Xj)
                  + 8.0 * h0 * float(qtt @ (cache.Jmat @ Xj)))
    Rcc = np.zeros((k - 1, k - 1))
    for a, i in enumerate(cidx):
        Xi = rows[i - 1]
        for b, j in enumerate(cidx[a:], start=a):
            Xj = rows[j - 1]
            rp = np.einsum("a,b,c,e,abce->", Tf, emb(Xi), emb(Xj), Tf, R4)
            rq = np.einsum("a,b,c,e,abce->", Tf, emb(Xj), emb(Xi), Tf, R4)
            qp = float(T @ np.einsum("i,j,ijm->m", Xj, Xi, Q))
            qq = float(T @ np.einsum("i,j,ijm->m", Xi, Xj, Q))
            val = (0.5 * (rp + rq) + 0.5 * h0 * (qp + qq)
                   + 0.25 * h0 ** 2 * float(Xi @ Xj)
                   - 0.25 * avec_frame[i - 1] * avec_frame[j - 1])
            Rcc[a, b] = val
            Rcc[b, a] = val
    RicT = np.einsum("a,e,aiie->", Tf, Tf, R4[:, 1:, 1:, :])
    Ric_c = (RicT - R_T_JT_JT_T + 0.25 * h0 ** 2 * (k - 2)
             - float(qtt @ qtt))
    return Rbb, Rbc, Rcc, Ric_c


def _closed_blocks_aa_ac_CR(model: ContactModel, cache: TensorCache, h: np.ndarray,
                            rows: np.ndarray):
    """aa and ac blocks from the Q = 0 closed forms."""
    from .structure import second_covariant_derivative_tau

    k = model.n - 1
    h1, h0 = h[1:], h[0]
    T = rows[k - 1]
    JT = cache.Jmat @ T
    tau = cache.tau
    tauT = tau @ T
    Tfull = np.concatenate(([0.0], T))
    nt_T = np.einsum("m,mij->ij", Tfull, cache.nabla_tau)
    nt_0 = cache.nabla_tau[0]
    n2t = second_covariant_derivative_tau(model, cache.x, Tfull, Tfull, cache=cache)
    Raa = (float((n2t @ T) @ JT)
           - 5.0 * h0 * float((nt_T @ T) @ T)
           - 2.0 * float(tauT @ T) ** 2
           - 6.0 * h0 ** 2 * float(tauT @ JT)
           - 2.0 * float(tauT @ tauT)
           - float((nt_0 @ T) @ T))
    R4 = cache.R

    def emb(w):
        return np.concatenate(([0.0], w))

    Tf = emb(T)
    X0f = np.eye(model.n)[0]
    proj = float((nt_T @ T) @ T) + 2.0 * h0 * float(tauT @ JT)
    Rac = np.zeros(k - 1)
    for a, j in enumerate(range(2, k + 1)):
        Xj = rows[j - 1]
        Rac[a] = (np.einsum("a,b,c,e,abce->", Tf, X0f, emb(Xj), Tf, R4)
                  + float((nt_T @ T) @ Xj)
                  + 2.0 * h0 * float(tauT @ (cache.Jmat @ Xj))
                  - proj * float(T @ Xj))
    return Raa, Rac


def curvature_blocks(model: ContactModel, geo: GeodesicRecord, t: float,
                     frame: Optional[MovingFrame] = None,
                     aa_ac_mode: str = "auto") -> CurvatureBlocks:
    """Canonical curvature blocks at time t along the geodesic.

    bb, bc, cc always come from the general-Q closed forms.  aa and ac use
    the CR closed forms when |Q| <= 1e-9 at the point, and the numerical
    symplectic route otherwise (mode recorded in the result)."""
    if frame is None:
        frame = parallel_frame(model, geo)
    st = geo.state(t)
    cache = TensorCache(model, st.x)
    O = frame.rotation(t)
    rows = O[1:, 1:]
    avec = frame.a(t)
    Rbb, Rbc, Rcc, Ric_c = _closed_blocks_bcc(model, cache, st.h, rows, avec)
    Qnorm = float(np.max(np.abs(cache.Q)))
    diagnostics = {"Q_norm": Qnorm}
    if aa_ac_mode == "auto":
        aa_ac_mode = "closed" if Qnorm <= Q_CLOSED_FORM_THRESHOLD else "numerical"
    if aa_ac_mode == "closed":
        Raa, Rac = _closed_blocks_aa_ac_CR(model, cache, st.h, rows)
    elif aa_ac_mode == "numerical":
        Raa, Rac, diag = numerical_aa_ac(model, geo, t, frame=frame)
        diagnostics.update(diag)
    else:
        raise ValueError(f"unknown aa_ac_mode {aa_ac_mode!r}")
    blocks = CurvatureBlocks(
        t=t, d=model.d, Raa=float(Raa), Rac=np.asarray(Rac, dtype=float),
        Rbb=float(Rbb), Rbc=Rbc, Rcc=Rcc,
        ricci_a=float(Raa), ricci_b=float(Rbb), ricci_c=float(np.trace(Rcc)),
        aa_ac_mode=aa_ac_mode, h0=float(st.h[0]), diagnostics=diagnostics)
    blocks.diagnostics["ricci_c_closed_form"] = float(Ric_c)
    return blocks


def ricci(blocks: CurvatureBlocks):
    """Partial traces over the invariant subspaces."""
    return blocks.ricci_a, blocks.ricci_b, blocks.ricci_c


# --------------------------------------------------------------------------
# numerical aa / ac route
# --------------------------------------------------------------------------

def _cheb_lie_derivatives(pullback, s0: float, orders, half_width: float,
                          n_nodes: int = 17, degree: int = 12) -> dict:
    """Lie derivatives at s0 of a curve of chart vectors along the flow.

    ``pullback(s)`` must return the vector at lambda(s) transported back to
    lambda(s0).  A Chebyshev least-squares fit on [s0 - w, s0 + w] yields
    the requested derivative orders."""
    xi = np.cos(np.pi * (np.arange(n_nodes) + 0.5) / n_nodes)
    samples = np.array([pullback(s0 + half_width * x) for x in xi])
    coeffs = cheb.chebfit(xi, samples, degree)
    out = {}
    for k in orders:
        dk = cheb.chebder(coeffs, k)
        out[k] = cheb.chebval(0.0, dk) / half_width ** k
    return out


def numerical_aa_ac(model: ContactModel, geo: GeodesicRecord, t0: float,
                    frame: Optional[MovingFrame] = None,
                    inner_width: float = 0.25, outer_step: float = 0.015,
                    lin_tol: float = 1e-12):
    """R_aa and R_ac by symplectic products of flow pullbacks.

    Builds a local window around t0, computes the canonical elements from
    Lie derivatives of the constant vertical vector E_a = (0, e_0) and of
    the concrete E_c vectors, assembles F_a through the structural
    equations with the closed-form R_bb, R_bc, and finally evaluates
    R_aa = sigma(F_a', F_a), R_ac_j = sigma(F_a', F_c_j).
    Returns (Raa, Rac, diagnostics)."""
    if frame is None:
        frame = parallel_frame(model, geo)
    n, cd = model.n, model.chart_dim
    dim = cd + n
    w_total = inner_width + 2 * outer_step + 0.01
    st0 = geo.state(t0)
    local = flow(model, st0, w_total, tol=lin_tol, t_lo=-w_total)
    lframe = MovingFrame(model, local, initial_rotation=frame.rotation(t0))
    lin = FlowLinearization(model, local, -w_total, w_total, tol=lin_tol)

    E_a = np.zeros(dim)
    E_a[cd] = 1.0

    def E_c(s):
        O = lframe.rotation(s)
        avec = lframe.a(s)
        out = np.zeros((n - 2, dim))
        for a, j in enumerate(range(2, n)):
            out[a, cd] = avec[j - 1]
            out[a, cd + 1:] = O[j, 1:]
        return out

    def bb_bc(s):
        stl = local.state(s)
        cache = TensorCache(model, stl.x)
        O = lframe.rotation(s)
        Rbb, Rbc, _, _ = _closed_blocks_bcc(model, cache, stl.h, O[1:, 1:],
                                            lframe.a(s))
        return Rbb, Rbc

    def F_a_at(s0: float) -> np.ndarray:
        derivs = _cheb_lie_derivatives(
            lambda s: lin.pull(E_a, s, s0), s0, (1, 3), inner_width)
        Rbb, Rbc = bb_bc(s0)
        Ec = E_c(s0)
        return Rbb * derivs[1] + Rbc @ Ec + derivs[3]

    # outer 5-point stencil for the Lie derivative of F_a at t0
    nodes = [-2, -1, 0, 1, 2]
    weights = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * outer_step)
    Fa_nodes = {}
    for k in nodes:
        s = t0 * 0.0 + k * outer_step
        Fa_nodes[k] = lin.pull(F_a_at(s), s, 0.0)
    Fdot_a = sum(weights[i] * Fa_nodes[k] for i, k in enumerate(nodes))
    F_a0 = Fa_nodes[0]

    # F_c_j(t0) = -E_c_j'(t0)
    Ec0 = E_c(0.0)
    F_c = np.zeros_like(Ec0)
    for a in range(n - 2):
        derivs = _cheb_lie_derivatives(
            lambda s, _a=a: lin.pull(E_c(s)[_a], s, 0.0), 0.0, (1,), inner_width)
        F_c[a] = -derivs[1]

    state_t0 = local.state(0.0)
    Raa = symplectic_product(model, state_t0, Fdot_a, F_a0)
    k = n - 1
    Rac = np.zeros(k - 1)
    for a in range(k - 2):
        Rac[a] = symplectic_product(model, state_t0, Fdot_a, F_c[a])
    # the tangent slot is structurally zero for unit-speed input
    Rac_full = np.zeros(k - 1)
    Rac_full[:k - 2] = Rac[:k - 2]

    # diagnostics: verticality of F_a' and the bb cross-check
    vert_residual = float(np.max(np.abs(Fdot_a[:cd]))) if cd else 0.0
    derivs_t0 = _cheb_lie_derivatives(lambda s: lin.pull(E_a, s, 0.0),
                                      0.0, (2, 3), inner_width)
    Rbb_num = symplectic_product(model, state_t0, derivs_t0[3], derivs_t0[2])
    Rbb_closed, _ = bb_bc(0.0)
    diag = {
        "verticality_residual": vert_residual,
        "Rbb_numeric": float(Rbb_num),
        "Rbb_closed": float(Rbb_closed),
        "Rbb_gap": float(abs(Rbb_num - Rbb_closed)),
    }
    return float(Raa), Rac_full, diag


# --------------------------------------------------------------------------
# profiles along geodesics
# --------------------------------------------------------------------------

def curvature_profile(model: ContactModel, geo: GeodesicRecord,
                      frame: Optional[MovingFrame] = None,
                      n_samples: int = 64):
    """Spline interpolant t -> assembled canonical R(t) over [0, T]."""
    if frame is None:
        frame = parallel_frame(model, geo)
    ts = np.linspace(0.0, geo.T, max(4, n_samples))
    mats = np.array([curvature_blocks(model, geo, t, frame=frame).assembled
                     for t in ts])
    if np.max(np.abs(mats - mats[0])) < 1e-12:
        R0 = mats[0]
        return lambda t: R0
    spline = CubicSpline(ts, mats, axis=0)
    T = geo.T

    def Rfun(t):
        return spline(min(max(t, 0.0), T))
    return Rfun


def curvature_taylor_data(model: ContactModel, geo: GeodesicRecord,
                          frame: Optional[MovingFrame] = None,
                          delta: float = 1e-2, n_fit: int = 7, deg: int = 4):
    """R(0), R'(0), R''(0) of the canonical curvature by polynomial fit.

    Degree-``deg`` least squares over ``n_fit`` equispaced samples of each
    block entry on [0, (n_fit - 1) delta]; avoids third derivatives of the
    structural functions."""
    if frame is None:
        frame = parallel_frame(model, geo)
    ts = np.array([k * delta for k in range(n_fit)])
    mats = np.array([curvature_blocks(model, geo, t, frame=frame).assembled
                     for t in ts])
    n = model.n
    R0 = np.zeros((n, n))
    R1 = np.zeros((n, n))
    R2 = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            p = np.polynomial.polynomial.polyfit(ts, mats[:, i, j], deg)
            R0[i, j] = p[0]
            R1[i, j] = p[1]
            R2[i, j] = 2.0 * p[2]
    return R0, R1, R2


def blocks_to_dict(blocks: CurvatureBlocks) -> dict:
    return {
        "schema": 1,
        "t": blocks.t,
        "Raa": blocks.Raa,
        "Rac": blocks.Rac.tolist(),
        "Rbb": blocks.Rbb,
        "Rbc": blocks.Rbc.tolist(),
        "Rcc": blocks.Rcc.tolist(),
        "ricci": {"a": blocks.ricci_a, "b": blocks.ricci_b, "c": blocks.ricci_c},
        "aa_ac_mode": blocks.aa_ac_mode,
        "xa_convention": "step7",
    }
