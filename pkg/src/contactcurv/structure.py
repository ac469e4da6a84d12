"""Contact sub-Riemannian structures in frame form, and their Tanno calculus.

A structure on a (2d+1)-manifold is described by an orthonormal frame
X_0, X_1, ..., X_2d (X_0 the Reeb field, X_1..X_2d spanning the contact
distribution) through its structural functions

    [X_a, X_b] = sum_g  c[a,b,g] X_g ,     a, b, g = 0..2d,

their first and second frame-directional derivatives, and the coordinate
components of the frame on a chart.  The metric is implicit: the supplied
frame is declared orthonormal (the Reeb field is the unit normal of the
extended metric).  All tensors of the Tanno connection are algebraic in
(c, dc, d2c):

    Gamma_ij^k   = (c_ij^k + c_ki^j + c_kj^i) / 2          (horizontal)
    nabla_0 X_j  = sum_k (c_k0^j - c_j0^k)/2 X_k,   nabla X_0 = 0
    tau(X_i)     = sum_k (c_k0^i + c_i0^k)/2 X_k
    J X_i        = sum_j c_ij^0 X_j
    Q(X, Y)      = (nabla_Y J) X

Index conventions used throughout the package: Greek indices run 0..2d
with 0 the Reeb slot, Latin 1..2d (horizontal); arrays carry full 0..2d
axes and horizontal blocks are slices [1:].  Operator matrices act on
component vectors, e.g. (J v)_components = Jmat @ v with
Jmat[j, i] = c[i, j, 0].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import bernoulli

from .jets import JetContext

__all__ = [
    "ContactModel",
    "TannoData",
    "ValidationReport",
    "ModelError",
    "ChartDomainError",
    "left_invariant_model",
    "builtin_model",
    "builtin_registry",
    "load_model",
    "validate",
    "christoffel",
    "connection_coefficients",
    "tanno_tensors",
    "tanno_curvature",
    "curvature_tensor",
    "covariant_derivative_tau",
    "second_covariant_derivative_tau",
    "covariant_derivative_Q",
    "yang_mills_residual",
    "sasakian_nijenhuis_residual",
    "fd_dc",
    "TensorCache",
]


class ModelError(Exception):
    """The supplied structural data does not define a valid contact model."""


class ChartDomainError(Exception):
    """A chart evaluation was requested outside its validity domain."""


# --------------------------------------------------------------------------
# model container
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ContactModel:
    """Immutable contact sub-Riemannian structure in frame form.

    Evaluators are array-valued: ``c(x) -> (n,n,n)``; ``dc(x) ->
    (n,n,n,n)`` with ``dc[mu] = X_mu(c)``; ``d2c(x) -> (n,n,n,n,n)`` with
    ``d2c[mu,nu] = X_mu(X_nu(c))``; ``frame(x) -> (chart_dim, n)`` whose
    columns are the coordinate components of X_alpha; ``frame_jac(x) ->
    (n, chart_dim, chart_dim)`` the per-field coordinate Jacobians.  For
    embedded models chart_dim may exceed 2d+1 (ambient coordinates with
    frame fields tangent to the embedded manifold).  All evaluators must
    be re-entrant; the model is safe to share across workers.
    """

    name: str
    d: int
    chart_dim: int
    left_invariant: bool
    c: Callable[[np.ndarray], np.ndarray]
    frame: Callable[[np.ndarray], np.ndarray]
    dc: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d2c: Optional[Callable[[np.ndarray], np.ndarray]] = None
    frame_jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    base_point: np.ndarray = None
    exact: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return 2 * self.d + 1

    def c_at(self, x) -> np.ndarray:
        return np.asarray(self.c(np.asarray(x, dtype=float)))

    def dc_at(self, x) -> np.ndarray:
        if self.dc is not None:
            return np.asarray(self.dc(np.asarray(x, dtype=float)))
        return fd_dc(self, x)

    def d2c_at(self, x) -> np.ndarray:
        if self.d2c is None:
            raise ModelError(f"model {self.name!r} provides no second frame "
                             "derivatives of the structural functions")
        return np.asarray(self.d2c(np.asarray(x, dtype=float)))

    def frame_at(self, x) -> np.ndarray:
        return np.asarray(self.frame(np.asarray(x, dtype=float)))

    def frame_jac_at(self, x) -> np.ndarray:
        if self.frame_jac is not None:
            return np.asarray(self.frame_jac(np.asarray(x, dtype=float)))
        return _fd_frame_jac(self, np.asarray(x, dtype=float))

    def flag_tol(self) -> float:
        # classification tolerance: machine-exact evaluators support 1e-9,
        # finite-difference-backed general models only 1e-6
        return 1e-9 if self.exact else 1e-6


# --------------------------------------------------------------------------
# pointwise tensors
# --------------------------------------------------------------------------

def _christoffel_from_c(c: np.ndarray) -> np.ndarray:
    ch = c[1:, 1:, 1:]
    return 0.5 * (ch + np.einsum("kij->ijk", ch) + np.einsum("kji->ijk", ch))


def _connection_from_c(c: np.ndarray) -> np.ndarray:
    """A[a,b,g]: nabla_{X_a} X_b = sum_g A[a,b,g] X_g (nabla X_0 = 0)."""
    n = c.shape[0]
    A = np.zeros((n, n, n))
    A[1:, 1:, 1:] = _christoffel_from_c(c)
    ch0 = c[1:, 0, 1:]  # ch0[j,k] = c_j0^k
    A[0, 1:, 1:] = 0.5 * (ch0.T - ch0)
    return A


def _tau_from_c(c: np.ndarray) -> np.ndarray:
    ch0 = c[1:, 0, 1:]
    return 0.5 * (ch0 + ch0.T)


def _Jmat_from_c(c: np.ndarray) -> np.ndarray:
    """Operator matrix of J on horizontal components: (J v) = Jmat @ v."""
    return c[1:, 1:, 0].T


def _Q_from(c: np.ndarray, dc: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Q[i,j,m]: Q(X_i, X_j) = sum_m Q[i,j,m] X_m  (all horizontal)."""
    C0 = c[1:, 1:, 0]
    dq = np.einsum("jim->ijm", dc[1:, 1:, 1:, 0])  # X_j(c_im^0)
    return dq + np.einsum("ik,jkm->ijm", C0, gamma) - np.einsum("jik,km->ijm", gamma, C0)


class TensorCache:
    """Per-point, lazily computed frame tensors of a model."""

    def __init__(self, model: ContactModel, x):
        self.model = model
        self.x = np.asarray(x, dtype=float)
        self._store = {}

    def _get(self, key, fn):
        if key not in self._store:
            self._store[key] = fn()
        return self._store[key]

    @property
    def c(self):
        return self._get("c", lambda: self.model.c_at(self.x))

    @property
    def dc(self):
        if self.model.left_invariant:
            n = self.model.n
            return self._get("dc", lambda: np.zeros((n, n, n, n)))
        return self._get("dc", lambda: self.model.dc_at(self.x))

    @property
    def d2c(self):
        if self.model.left_invariant:
            n = self.model.n
            return self._get("d2c", lambda: np.zeros((n,) * 5))
        return self._get("d2c", lambda: self.model.d2c_at(self.x))

    @property
    def gamma(self):
        return self._get("gamma", lambda: _christoffel_from_c(self.c))

    @property
    def A(self):
        return self._get("A", lambda: _connection_from_c(self.c))

    @property
    def dA(self):
        def build():
            n = self.model.n
            dA = np.zeros((n, n, n, n))
            if not self.model.left_invariant:
                for mu in range(n):
                    dA[mu] = _connection_from_c(self.dc[mu])
            return dA
        return self._get("dA", build)

    @property
    def tau(self):
        return self._get("tau", lambda: _tau_from_c(self.c))

    @property
    def Jmat(self):
        return self._get("Jmat", lambda: _Jmat_from_c(self.c))

    @property
    def Q(self):
        return self._get("Q", lambda: _Q_from(self.c, self.dc, self.gamma))

    @property
    def torsion(self):
        """T[a,b,g]: T(X_a, X_b) = sum_g T[a,b,g] X_g."""
        def build():
            A = self.A
            return A - np.einsum("bag->abg", A) - self.c
        return self._get("torsion", build)

    @property
    def R(self):
        """Curvature R[a,b,g,e] = g(R(X_a, X_b) X_g, X_e)."""
        def build():
            A, c = self.A, self.c
            R = (np.einsum("bgm,ame->abge", A, A)
                 - np.einsum("agm,bme->abge", A, A)
                 - np.einsum("abm,mge->abge", c, A))
            if not self.model.left_invariant:
                dA = self.dA
                R = R + dA - np.einsum("bage->abge", dA)
            return R
        return self._get("R", build)

    @property
    def dtau(self):
        """dtau[mu,i,j] = X_mu(tau[i,j])."""
        def build():
            D = self.dc[:, 1:, 0, 1:]
            return 0.5 * (D + np.einsum("mij->mji", D))
        return self._get("dtau", build)

    @property
    def nabla_tau(self):
        """(nabla_{X_mu} tau)[i,j] indexed [mu,i,j]."""
        def build():
            Ah = self.A[:, 1:, 1:]
            corr = (np.einsum("mik,kj->mij", Ah, self.tau)
                    + np.einsum("mjk,ik->mij", Ah, self.tau))
            return self.dtau - corr
        return self._get("nabla_tau", build)

    @property
    def nabla_Q(self):
        """(nabla_{X_mu} Q)[i,j,m] indexed [mu,i,j,m]."""
        def build():
            A, Q, n = self.A, self.Q, self.model.n
            dQ = np.zeros((n,) + Q.shape)
            if not self.model.left_invariant:
                dc, d2c, gamma = self.dc, self.d2c, self.gamma
                C0 = self.c[1:, 1:, 0]
                for mu in range(n):
                    dgam = _christoffel_from_c(dc[mu])
                    dC0 = dc[mu, 1:, 1:, 0]
                    dQ[mu] = (np.einsum("jim->ijm", d2c[mu][1:, 1:, 1:, 0])
                              + np.einsum("ik,jkm->ijm", dC0, gamma)
                              + np.einsum("ik,jkm->ijm", C0, dgam)
                              - np.einsum("jik,km->ijm", dgam, C0)
                              - np.einsum("jik,km->ijm", gamma, dC0))
            Ah = A[:, 1:, 1:]
            corr = (np.einsum("aik,kjm->aijm", Ah, Q)
                    + np.einsum("ajk,ikm->aijm", Ah, Q)
                    - np.einsum("ijk,akm->aijm", Q, Ah))
            return dQ - corr
        return self._get("nabla_Q", build)


def christoffel(model: ContactModel, x) -> np.ndarray:
    """Horizontal Christoffel symbols Gamma[i,j,k], 0-based over 1..2d."""
    return _christoffel_from_c(model.c_at(x))


def connection_coefficients(model: ContactModel, x) -> np.ndarray:
    return _connection_from_c(model.c_at(x))


def curvature_tensor(model: ContactModel, x) -> np.ndarray:
    return TensorCache(model, x).R


def tanno_curvature(model: ContactModel, x, i: int, j: int, k: int, l: int) -> float:
    """Single curvature component R(X_i, X_j, X_k, X_l)."""
    return float(curvature_tensor(model, x)[i, j, k, l])


def _direction_vector(model: ContactModel, direction) -> np.ndarray:
    if np.isscalar(direction):
        v = np.zeros(model.n)
        v[int(direction)] = 1.0
        return v
    v = np.asarray(direction, dtype=float)
    if v.shape == (model.n - 1,):
        v = np.concatenate(([0.0], v))
    if v.shape != (model.n,):
        raise ValueError("direction must be a frame index or component vector")
    return v


def covariant_derivative_tau(model: ContactModel, x, direction, order: int = 1):
    """(nabla_v tau)[i,j], or for order=2 the tensorial second covariant
    derivative (nabla^2_{v,v} tau) = nabla_v(nabla tau)(.; v)."""
    cache = TensorCache(model, x)
    v = _direction_vector(model, direction)
    if order == 1:
        return np.einsum("m,mij->ij", v, cache.nabla_tau)
    if order == 2:
        return second_covariant_derivative_tau(model, x, v, v, cache=cache)
    raise ValueError("order must be 1 or 2")


def second_covariant_derivative_tau(model, x, v, w, cache: TensorCache = None):
    """(nabla^2_{v,w} tau) = nabla_v(nabla_w tau) - nabla_{(nabla_v w)} tau
    for directions given by constant frame components."""
    cache = cache or TensorCache(model, x)
    v = _direction_vector(model, v)
    w = _direction_vector(model, w)
    A, nt, tau = cache.A, cache.nabla_tau, cache.tau
    n = model.n
    # X_v applied to the component functions of (nabla_w tau)
    if model.left_invariant:
        term1 = np.zeros((n - 1, n - 1))
    else:
        d2c = cache.d2c
        dterm = np.zeros((n, n - 1, n - 1))
        for mu in range(n):
            D2 = np.einsum("n,nij->ij", w, d2c[mu][:, 1:, 0, 1:])
            d2tau_w = 0.5 * (D2 + D2.T)
            dA_mu = _connection_from_c(cache.dc[mu])[:, 1:, 1:]
            dAw = np.einsum("n,nik->ik", w, dA_mu)
            dtau_mu = 0.5 * (cache.dc[mu, 1:, 0, 1:] + cache.dc[mu, 1:, 0, 1:].T)
            Aw = np.einsum("n,nik->ik", w, A[:, 1:, 1:])
            dterm[mu] = (d2tau_w
                         - dAw @ tau - tau @ dAw.T
                         - Aw @ dtau_mu - dtau_mu @ Aw.T)
        term1 = np.einsum("m,mij->ij", v, dterm)
    # connection corrections on the slots of (nabla_w tau)
    ntw = np.einsum("n,nij->ij", w, nt)
    Av = np.einsum("m,mbg->bg", v, A)[1:, 1:]
    slot_corr = Av @ ntw + ntw @ Av.T
    # - nabla_{nabla_v w} tau  (directions have constant frame components)
    nvw = np.einsum("m,n,mng->g", v, w, A)
    conn_corr = np.einsum("g,gij->ij", nvw, nt)
    return term1 - slot_corr - conn_corr


def covariant_derivative_Q(model: ContactModel, x, direction) -> np.ndarray:
    cache = TensorCache(model, x)
    v = _direction_vector(model, direction)
    return np.einsum("a,aijm->ijm", v, cache.nabla_Q)


def yang_mills_residual(model: ContactModel, x) -> dict:
    """Both sides of the Yang-Mills equivalence.

    tau route: sum_i (nabla_{X_i} tau)(X_i), a horizontal vector.
    torsion route: sum_i (nabla_{X_i} T)(X_i, Y) for all frame Y.
    The two must agree: the torsion form equals -omega(Y) times the tau
    divergence, and vanishes on horizontal Y.
    """
    cache = TensorCache(model, x)
    n = model.n
    tau_div = np.einsum("iij->j", cache.nabla_tau[1:])
    T, A = cache.torsion, cache.A
    dT = np.zeros((n, n, n, n))
    if not model.left_invariant:
        for mu in range(n):
            dA_mu = _connection_from_c(cache.dc[mu])
            dT[mu] = dA_mu - np.einsum("bag->abg", dA_mu) - cache.dc[mu]
    nT = dT + (np.einsum("abk,mkg->mabg", T, A)
               - np.einsum("mak,kbg->mabg", A, T)
               - np.einsum("mbk,akg->mabg", A, T))
    torsion_form = np.einsum("iibg->bg", nT[1:, 1:])  # [Y index b, component g]
    gap = float(np.max(np.abs(torsion_form[0, 1:] + tau_div)))
    if n > 1:
        gap = max(gap, float(np.max(np.abs(torsion_form[1:, :]))),
                  float(abs(torsion_form[0, 0])))
    tol = model.flag_tol()
    res_tau = float(np.max(np.abs(tau_div)))
    res_T = float(np.max(np.abs(torsion_form)))
    return {
        "tau_divergence": tau_div,
        "torsion_form": torsion_form,
        "tau_residual": res_tau,
        "torsion_residual": res_T,
        "equivalence_gap": gap,
        "is_yang_mills": bool(res_tau <= tol and res_T <= tol),
    }


def sasakian_nijenhuis_residual(model: ContactModel, x) -> float:
    """Diagnostic residual of [J,J](X,Y) + domega(X,Y) X_0 on horizontal
    frame pairs.  The authoritative Sasakian flag uses Q = tau = 0."""
    cache = TensorCache(model, x)
    c = cache.c
    dc = cache.dc
    n = model.n
    C0 = c[1:, 1:, 0]

    def jop(w):
        out = np.zeros(n)
        out[1:] = C0.T @ w[1:]
        return out

    def bracket_fields(ci, cj, i, j):
        """[ci . X, cj . X] for horizontal coefficient rows that come from
        rows i, j of either C0 (coefficients vary) or identity rows."""
        out = np.einsum("k,l,klg->g", ci, cj, c[1:, 1:, :])
        return out

    worst = 0.0
    eye = np.eye(n - 1)
    for i in range(n - 1):
        for j in range(n - 1):
            br = c[i + 1, j + 1, :]
            t1 = np.zeros(n)
            t1[1:] = -br[1:]                      # J^2 [X,Y]
            # [JX_i, JX_j] with derivative corrections of the J coefficients
            t2 = bracket_fields(C0[i], C0[j], i, j)
            t2[1:] = t2[1:] + np.einsum("k,kl->l", C0[i], dc[1:, j + 1, 1:, 0])
            t2[1:] = t2[1:] - np.einsum("l,lk->k", C0[j], dc[1:, i + 1, 1:, 0])
            # [JX_i, X_j] and [X_i, JX_j]
            b1 = bracket_fields(C0[i], eye[j], i, j)
            b1[1:] = b1[1:] - dc[j + 1, i + 1, 1:, 0]
            b2 = bracket_fields(eye[i], C0[j], i, j)
            b2[1:] = b2[1:] + dc[i + 1, j + 1, 1:, 0]
            nij = t1 + t2 - jop(b1) - jop(b2)
            nij[0] += C0[j, i]                    # domega(X_i, X_j)
            worst = max(worst, float(np.max(np.abs(nij))))
    return worst


# --------------------------------------------------------------------------
# Tanno data and classification
# --------------------------------------------------------------------------

@dataclass
class TannoData:
    point: np.ndarray
    gamma: np.ndarray
    tau: np.ndarray
    J: np.ndarray
    Q: np.ndarray
    flags: dict

    def __repr__(self):
        f = {k: v for k, v in self.flags.items() if isinstance(v, bool)}
        return f"TannoData(flags={f})"


def tanno_tensors(model: ContactModel, x) -> TannoData:
    cache = TensorCache(model, x)
    tol = model.flag_tol()
    tau_norm = float(np.max(np.abs(cache.tau)))
    Q_norm = float(np.max(np.abs(cache.Q)))
    ym = yang_mills_residual(model, x)
    flags = {
        "is_K_type": bool(tau_norm <= tol),
        "tau_residual": tau_norm,
        "is_CR": bool(Q_norm <= tol),
        "Q_residual": Q_norm,
        "is_sasakian": bool(tau_norm <= tol and Q_norm <= tol),
        "is_yang_mills": ym["is_yang_mills"],
        "yang_mills_residual": max(ym["tau_residual"], ym["torsion_residual"]),
    }
    return TannoData(point=np.asarray(x, dtype=float), gamma=cache.gamma,
                     tau=cache.tau, J=cache.Jmat, Q=cache.Q, flags=flags)


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

@dataclass
class ValidationReport:
    model_name: str
    residuals: dict
    tols: dict

    @property
    def passed(self) -> bool:
        return all(self.residuals[k] <= self.tols[k] for k in self.residuals)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    def failures(self) -> dict:
        return {k: v for k, v in self.residuals.items() if v > self.tols[k]}

    def to_dict(self) -> dict:
        return {"schema": 1, "model": self.model_name, "passed": self.passed,
                "residuals": self.residuals, "tolerances": self.tols}


def validate(model: ContactModel, points=None) -> ValidationReport:
    """Report the max violation of each ContactModel invariant over points."""
    if points is None:
        points = [model.base_point]
        if not model.left_invariant:
            rng = np.random.default_rng(11)
            for _ in range(4):
                points.append(_nudge_point(model, 0.15 * rng.standard_normal(model.chart_dim)))
    base_tol = model.flag_tol()
    res = {"antisymmetry": 0.0, "reeb_condition": 0.0, "compatibility": 0.0}
    tols = {"antisymmetry": base_tol, "reeb_condition": base_tol,
            "compatibility": base_tol}
    if model.left_invariant:
        res["jacobi"] = 0.0
        tols["jacobi"] = base_tol
        res["frame_brackets"] = 0.0
        tols["frame_brackets"] = 1e-6  # finite-difference bracket accuracy
    for x in points:
        c = model.c_at(x)
        res["antisymmetry"] = max(res["antisymmetry"],
                                  float(np.max(np.abs(c + np.einsum("abg->bag", c)))))
        res["reeb_condition"] = max(res["reeb_condition"],
                                    float(np.max(np.abs(c[:, 0, 0]))))
        J = _Jmat_from_c(c)
        res["compatibility"] = max(res["compatibility"],
                                   float(np.max(np.abs(J @ J + np.eye(model.n - 1)))))
        if model.left_invariant:
            res["jacobi"] = max(res["jacobi"], _jacobi_residual(c))
            res["frame_brackets"] = max(res["frame_brackets"],
                                        _bracket_residual(model, x))
    return ValidationReport(model.name, res, tols)


def _nudge_point(model: ContactModel, step: np.ndarray) -> np.ndarray:
    x = model.base_point + step
    if model.meta.get("sphere"):
        x = x / np.linalg.norm(x)
    return x


def _jacobi_residual(c: np.ndarray) -> float:
    t = np.einsum("abm,mge->abge", c, c)
    cyc = t + np.einsum("abge->bgae", t) + np.einsum("abge->gabe", t)
    return float(np.max(np.abs(cyc)))


def _bracket_residual(model: ContactModel, x, h: float = 1e-4) -> float:
    """Finite-difference Lie brackets of the chart frame vs the structural
    functions (documented 1e-6 check for left-invariant models)."""
    F = model.frame_at(x)
    c = model.c_at(x)
    n = model.n
    worst = 0.0

    def field(y, a):
        return model.frame_at(y)[:, a]

    for a in range(n):
        for b in range(a + 1, n):
            va, vb = F[:, a], F[:, b]

            def dfield(idx, along):
                return (field(x + h * along, idx) - field(x - h * along, idx)) / (2 * h)

            br = dfield(b, va) - dfield(a, vb)
            worst = max(worst, float(np.max(np.abs(br - F @ c[a, b]))))
    return worst


# --------------------------------------------------------------------------
# finite-difference fallbacks
# --------------------------------------------------------------------------

def fd_dc(model: ContactModel, x, step: float = 1e-5) -> np.ndarray:
    """Frame-directional derivatives of c by central differences along
    integral curves of the frame.  Documented accuracy ~1e-4; exact models
    provide analytic dc instead."""
    x = np.asarray(x, dtype=float)
    n = model.n
    out = np.zeros((n, n, n, n))
    for mu in range(n):
        xp = _frame_flow_step(model, x, mu, step)
        xm = _frame_flow_step(model, x, mu, -step)
        out[mu] = (model.c_at(xp) - model.c_at(xm)) / (2 * step)
    return out


def _frame_flow_step(model: ContactModel, x, mu: int, h: float) -> np.ndarray:
    def f(y):
        return model.frame_at(y)[:, mu]
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _fd_frame_jac(model: ContactModel, x, h: float = 7e-4) -> np.ndarray:
    # 4th-order central differences; step balances h^4 truncation against
    # the 1e-16/h roundoff floor
    cd, n = model.chart_dim, model.n
    out = np.zeros((n, cd, cd))
    h = h * max(1.0, float(np.max(np.abs(x))))
    for j in range(cd):
        e = np.zeros(cd)
        e[j] = 1.0
        col = (-model.frame_at(x + 2 * h * e) + 8 * model.frame_at(x + h * e)
               - 8 * model.frame_at(x - h * e) + model.frame_at(x - 2 * h * e)) / (12 * h)
        out[:, :, j] = col.T
    return out


# --------------------------------------------------------------------------
# left-invariant models (exponential chart)
# --------------------------------------------------------------------------

_BERNOULLI = bernoulli(42)


def _dexpinv_series(A: np.ndarray) -> np.ndarray:
    """psi(ad_x) = ad_x / (1 - exp(-ad_x)) via the Bernoulli series.

    The series converges for spectral radius < 2 pi (it terminates exactly
    when ad_x is nilpotent, whatever its norm); a conservative spectral
    bound guards the chart domain.
    """
    n = A.shape[0]
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    if rho > 5.5:
        raise ChartDomainError("exponential chart evaluated outside its "
                               f"validity domain (spectral radius = {rho:.2f})")
    out = np.eye(n) + 0.5 * A
    term = np.eye(n)
    A2 = A @ A
    for k in range(1, 21):
        term = term @ A2 / ((2 * k - 1) * (2 * k))
        contrib = _BERNOULLI[2 * k] * term
        out += contrib
        if np.max(np.abs(contrib)) < 1e-18 * max(1.0, np.max(np.abs(out))):
            break
    return out


def left_invariant_model(d: int, entries, name: str = "left_invariant",
                         check: bool = True, meta: dict = None) -> ContactModel:
    """Left-invariant contact model from constant structural data.

    ``entries`` is a full (n,n,n) array or an iterable of (a, b, g, value)
    rows with antisymmetry auto-completed.  The chart is exponential
    coordinates of the first kind: frame fields psi(ad_x) e_a."""
    n = 2 * d + 1
    if isinstance(entries, np.ndarray) and entries.shape == (n, n, n):
        c0 = np.array(entries, dtype=float)
    else:
        c0 = np.zeros((n, n, n))
        for a, b, g, v in entries:
            c0[a, b, g] = v
            c0[b, a, g] = -v
    if check:
        _check_left_invariant(c0, d, name)
    ad = np.einsum("abg->agb", c0)  # ad[a][g, b] = c[a, b, g]

    def frame(x):
        return _dexpinv_series(np.einsum("j,jgb->gb", x, ad))

    zero_dc = np.zeros((n, n, n, n))
    zero_d2c = np.zeros((n,) * 5)
    return ContactModel(
        name=name, d=d, chart_dim=n, left_invariant=True,
        c=lambda x, _c=c0: _c,
        dc=lambda x, _z=zero_dc: _z,
        d2c=lambda x, _z=zero_d2c: _z,
        frame=frame,
        base_point=np.zeros(n),
        exact=True,
        meta={"c0": c0, **(meta or {})},
    )


def _check_left_invariant(c0: np.ndarray, d: int, name: str):
    n = 2 * d + 1
    if float(np.max(np.abs(c0 + np.einsum("abg->bag", c0)))) > 1e-12:
        raise ModelError(f"{name}: structural constants not antisymmetric")
    if float(np.max(np.abs(c0[:, 0, 0]))) > 1e-12:
        raise ModelError(f"{name}: c_a0^0 != 0 violates the Reeb condition")
    J = _Jmat_from_c(c0)
    if float(np.max(np.abs(J @ J + np.eye(n - 1)))) > 1e-9:
        raise ModelError(f"{name}: J^2 != -I, metric not compatible with the "
                         "contact structure")
    if _jacobi_residual(c0) > 1e-9:
        raise ModelError(f"{name}: structural constants violate the Jacobi identity")


# --------------------------------------------------------------------------
# builtin models
# --------------------------------------------------------------------------

def heisenberg(d: int) -> ContactModel:
    entries = [(i, i + d, 0, 1.0) for i in range(1, d + 1)]
    return left_invariant_model(d, entries, name=f"heisenberg({d})")


def _quaternion_right_mult(u: np.ndarray) -> np.ndarray:
    """Matrix of q -> q * u in coordinates (w, x, y, z)."""
    w, x, y, z = u
    return np.array([
        [w, -x, -y, -z],
        [x,  w,  z, -y],
        [y, -z,  w,  x],
        [z,  y, -x,  w],
    ])


def hopf_sphere_3d() -> ContactModel:
    """Hopf structure on S^3, left-invariant on the unit quaternions with
    the ambient R^4 chart (frame fields q -> q u are linear and global)."""
    entries = [(1, 2, 0, 1.0), (1, 0, 2, -4.0), (2, 0, 1, 4.0)]
    base = left_invariant_model(1, entries, name="hopf_sphere(1)")
    mats = np.stack([
        _quaternion_right_mult(np.array([0.0, 2.0, 0.0, 0.0])),  # 2i (Reeb)
        _quaternion_right_mult(np.array([0.0, 0.0, 1.0, 0.0])),  # j
        _quaternion_right_mult(np.array([0.0, 0.0, 0.0, 1.0])),  # k
    ])

    def frame(q):
        return np.stack([m @ q for m in mats], axis=1)

    return ContactModel(
        name="hopf_sphere(1)", d=1, chart_dim=4, left_invariant=True,
        c=base.c, dc=base.dc, d2c=base.d2c,
        frame=frame, frame_jac=lambda q: mats,
        base_point=np.array([1.0, 0.0, 0.0, 0.0]),
        exact=True,
        meta={"c0": base.meta["c0"], "sphere": True},
    )


class _HopfFrameJets:
    """Frame fields of the Hopf structure on S^{2d+1} in the ambient
    R^{2d+2} chart, evaluated with jet arithmetic.

    Complex coordinates z_k = x_{2k} + i x_{2k+1}, k = 0..d.  The Reeb
    field is 2iz (unit for the extended metric after the compatible
    normalization of the contact form).  The horizontal frame is a complex
    Gram-Schmidt frame E_1..E_d of the complex orthogonal complement of z
    seeded by e_1..e_d, giving real fields (E_k, i E_k); it degenerates on
    a codimension-2 locus away from the base point z = e_0.  Structural
    functions and their first two frame derivatives come out to machine
    precision (no finite differencing)."""

    def __init__(self, d: int):
        self.d = d
        self.m = 2 * d + 2
        self.n = 2 * d + 1

    def fields(self, x, K: int):
        ctx = JetContext(self.m, K)
        xj = ctx.variables(np.asarray(x, dtype=float))
        d = self.d
        zre = [xj[2 * k] for k in range(d + 1)]
        zim = [xj[2 * k + 1] for k in range(d + 1)]

        def herm(ar, ai, br, bi):
            re = ar[0] * br[0] + ai[0] * bi[0]
            im = ai[0] * br[0] - ar[0] * bi[0]
            for k in range(1, d + 1):
                re = re + ar[k] * br[k] + ai[k] * bi[k]
                im = im + ai[k] * br[k] - ar[k] * bi[k]
            return re, im

        zero = ctx.constant(0.0)
        basis = [(zre, zim)]
        frames = []
        for k in range(1, d + 1):
            ur = [ctx.constant(1.0) if j == k else zero for j in range(d + 1)]
            ui = [zero] * (d + 1)
            for br, bi in basis:
                nr, _ = herm(br, bi, br, bi)
                sr, si = herm(ur, ui, br, bi)
                sr, si = sr / nr, si / nr
                ur = [ur[j] - (sr * br[j] - si * bi[j]) for j in range(d + 1)]
                ui = [ui[j] - (sr * bi[j] + si * br[j]) for j in range(d + 1)]
            nr, _ = herm(ur, ui, ur, ui)
            inv = nr.sqrt().reciprocal()
            ur = [u * inv for u in ur]
            ui = [u * inv for u in ui]
            basis.append((ur, ui))
            frames.append((ur, ui))

        fields = []
        f0 = []
        for k in range(d + 1):
            f0.append(-2.0 * zim[k])
            f0.append(2.0 * zre[k])
        fields.append(f0)
        for ur, ui in frames:
            fE, fiE = [], []
            for k in range(d + 1):
                fE.append(ur[k])
                fE.append(ui[k])
                fiE.append(-1.0 * ui[k])
                fiE.append(ur[k])
            fields.append(fE)
            fields.append(fiE)
        return ctx, fields

    def frame(self, x) -> np.ndarray:
        _, fields = self.fields(x, 0)
        return np.array([[j.value for j in f] for f in fields]).T

    def frame_jac(self, x) -> np.ndarray:
        _, fields = self.fields(x, 1)
        out = np.zeros((self.n, self.m, self.m))
        for a, f in enumerate(fields):
            for i, jet in enumerate(f):
                out[a, i, :] = jet.gradient()
        return out

    def _bracket_jets(self, ctx, fields):
        n, m = self.n, self.m
        P = [[[comp.partial(v) for v in range(m)] for comp in f] for f in fields]
        cjets = {}
        zero = ctx.constant(0.0)
        for a in range(n):
            for b in range(a + 1, n):
                br = []
                for i in range(m):
                    acc = zero
                    for v in range(m):
                        acc = acc + P[b][i][v] * fields[a][v] - P[a][i][v] * fields[b][v]
                    br.append(acc)
                for g in range(n):
                    acc = zero
                    for i in range(m):
                        acc = acc + fields[g][i] * br[i]
                    if g == 0:
                        acc = acc * 0.25  # the Reeb field has ambient length 2
                    cjets[(a, b, g)] = acc
        return cjets

    def c(self, x) -> np.ndarray:
        ctx, fields = self.fields(x, 1)
        out = np.zeros((self.n,) * 3)
        for (a, b, g), jet in self._bracket_jets(ctx, fields).items():
            out[a, b, g] = jet.value
            out[b, a, g] = -jet.value
        return out

    def dc(self, x) -> np.ndarray:
        ctx, fields = self.fields(x, 2)
        Fv = np.array([[j.value for j in f] for f in fields]).T
        out = np.zeros((self.n,) * 4)
        for (a, b, g), jet in self._bracket_jets(ctx, fields).items():
            v = jet.gradient() @ Fv
            out[:, a, b, g] = v
            out[:, b, a, g] = -v
        return out

    def d2c(self, x) -> np.ndarray:
        ctx, fields = self.fields(x, 3)
        Fv = np.array([[j.value for j in f] for f in fields]).T
        out = np.zeros((self.n,) * 5)
        for (a, b, g), jet in self._bracket_jets(ctx, fields).items():
            parts = [jet.partial(i) for i in range(self.m)]
            for nu in range(self.n):
                gj = None
                for i in range(self.m):
                    t = parts[i] * fields[nu][i]
                    gj = t if gj is None else gj + t
                v = gj.gradient() @ Fv
                out[:, nu, a, b, g] = v
                out[:, nu, b, a, g] = -v
        return out


def hopf_sphere(d: int) -> ContactModel:
    """Hopf fibration sub-Riemannian structure on S^{2d+1}."""
    if d < 1:
        raise ModelError("hopf_sphere needs d >= 1")
    if d == 1:
        return hopf_sphere_3d()
    h = _HopfFrameJets(d)
    base = np.zeros(2 * d + 2)
    base[0] = 1.0
    return ContactModel(
        name=f"hopf_sphere({d})", d=d, chart_dim=2 * d + 2, left_invariant=False,
        c=h.c, dc=h.dc, d2c=h.d2c, frame=h.frame, frame_jac=h.frame_jac,
        base_point=base, exact=True, meta={"sphere": True},
    )


def generic3d(c121: float = 0.0, c122: float = 0.0, c101: float = 0.0,
              c102: float = 0.0, c201: float = 0.0, c202: float = None) -> ContactModel:
    """d = 1 left-invariant family with c_12^0 = 1 and user structural
    constants, subject to the Jacobi identity (c_20^2 defaults to the
    value -c_10^1 that the identity forces)."""
    if c202 is None:
        c202 = -c101
    entries = [(1, 2, 0, 1.0), (1, 2, 1, c121), (1, 2, 2, c122),
               (1, 0, 1, c101), (1, 0, 2, c102), (2, 0, 1, c201), (2, 0, 2, c202)]
    name = f"generic3d({c121},{c122},{c101},{c102},{c201},{c202})"
    return left_invariant_model(1, entries, name=name)


def builtin_model(name: str, d: int = None, params: dict = None) -> ContactModel:
    params = params or {}
    if name == "heisenberg":
        return heisenberg(d if d is not None else 1)
    if name == "hopf_sphere":
        return hopf_sphere(d if d is not None else 1)
    if name == "generic3d":
        return generic3d(**params)
    raise ModelError(f"unknown builtin model {name!r}")


def builtin_registry() -> list:
    """Default model registry used by the CLI and conservation tests."""
    return [
        heisenberg(1),
        heisenberg(2),
        hopf_sphere(1),
        hopf_sphere(2),
        generic3d(c101=0.3),
    ]


# --------------------------------------------------------------------------
# model files
# --------------------------------------------------------------------------

def load_model(source) -> ContactModel:
    """Load a left-invariant model from a JSON file, path or dict.

    Schema: {"d": int, "left_invariant": true, "c": [[a, b, g, value], ...]}
    with omitted entries zero and antisymmetry auto-completed.  Files
    violating the ContactModel invariants are rejected with ModelError.
    """
    if isinstance(source, dict):
        data = source
        label = "<dict>"
    else:
        with open(source) as fh:
            data = json.load(fh)
        label = str(source)
    try:
        d = int(data["d"])
        li = bool(data.get("left_invariant", True))
        entries = data.get("c", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"{label}: malformed model file: {exc}") from exc
    if not li:
        raise ModelError(f"{label}: only left-invariant model files are supported")
    if d < 1:
        raise ModelError(f"{label}: d must be >= 1")
    n = 2 * d + 1
    c0 = np.zeros((n, n, n))
    for row in entries:
        if len(row) != 4:
            raise ModelError(f"{label}: c entries must be [a, b, g, value]")
        a, b, g, v = int(row[0]), int(row[1]), int(row[2]), float(row[3])
        if not (0 <= a < n and 0 <= b < n and 0 <= g < n):
            raise ModelError(f"{label}: index out of range in {row}")
        if c0[a, b, g] not in (0.0, v):
            raise ModelError(f"{label}: conflicting duplicate entry {row}")
        c0[a, b, g] = v
        c0[b, a, g] = -v
    return left_invariant_model(d, c0, name=data.get("name", f"file({label})"))
