"""Tests for the frame-form Tanno calculus."""

import json

import numpy as np
import pytest

from contactcurv import structure as st
from contactcurv.structure import (
    ModelError,
    TensorCache,
    builtin_model,
    covariant_derivative_Q,
    covariant_derivative_tau,
    christoffel,
    curvature_tensor,
    generic3d,
    heisenberg,
    hopf_sphere,
    left_invariant_model,
    load_model,
    second_covariant_derivative_tau,
    tanno_curvature,
    tanno_tensors,
    validate,
    yang_mills_residual,
)
from model_zoo import non_cr_model, random_model, random_rotation, rotate_horizontal_frame, tau_cr_model


RNG = np.random.default_rng(2024)


def models_for_identities():
    out = [heisenberg(1), heisenberg(2), hopf_sphere(1),
           generic3d(c101=0.4, c102=-0.2), non_cr_model(2), tau_cr_model()]
    out += [random_model(d, np.random.default_rng(100 + d)) for d in (1, 2, 3)]
    return out


# ------------------------------------------------------------ validate

def test_validate_heisenberg_all_zero_residuals():
    rep = validate(heisenberg(1))
    assert rep.passed
    for key in ("antisymmetry", "reeb_condition", "compatibility", "jacobi"):
        assert rep.residuals[key] == 0.0


def test_validate_flags_bad_compatibility():
    # c_12^0 = 2 gives J^2 = -4 I, so |J^2 + I| = 3
    c = np.zeros((3, 3, 3))
    c[1, 2, 0] = 2.0
    c[2, 1, 0] = -2.0
    m = left_invariant_model(1, c, name="bad", check=False)
    rep = validate(m)
    assert not rep.passed
    assert abs(rep.residuals["compatibility"] - 3.0) < 1e-14


def test_validate_flags_reeb_violation():
    c = np.zeros((3, 3, 3))
    c[1, 2, 0] = 1.0
    c[2, 1, 0] = -1.0
    c[1, 0, 0] = 1.0
    c[0, 1, 0] = -1.0
    m = left_invariant_model(1, c, name="bad_reeb", check=False)
    rep = validate(m)
    assert rep.residuals["reeb_condition"] == 1.0
    assert not rep.passed


def test_validate_frame_brackets_left_invariant():
    for m in (heisenberg(2), generic3d(c101=0.3), hopf_sphere(1)):
        rep = validate(m)
        assert rep.passed, (m.name, rep.residuals)
        assert rep.residuals["frame_brackets"] <= 1e-6


# ---------------------------------------------------------- christoffel

def test_christoffel_heisenberg_zero():
    for d in (1, 2):
        m = heisenberg(d)
        assert np.max(np.abs(christoffel(m, m.base_point))) == 0.0


def test_christoffel_antisymmetry_and_c_recovery():
    m = random_model(2, np.random.default_rng(7))
    G = christoffel(m, m.base_point)
    assert np.allclose(G, -np.einsum("ijk->ikj", G), atol=1e-14)
    ch = m.c_at(m.base_point)[1:, 1:, 1:]
    assert np.allclose(ch, G - np.einsum("ijk->jik", G), atol=1e-14)


# --------------------------------------------------------- tanno tensors

def test_heisenberg_is_sasakian():
    for d in (1, 2):
        td = tanno_tensors(heisenberg(d), heisenberg(d).base_point)
        assert np.max(np.abs(td.tau)) == 0.0
        assert np.max(np.abs(td.Q)) == 0.0
        assert td.flags["is_sasakian"]
        assert td.flags["is_yang_mills"]


def test_hopf_3d_sasakian():
    m = hopf_sphere(1)
    td = tanno_tensors(m, m.base_point)
    assert td.flags["is_K_type"] and td.flags["is_CR"] and td.flags["is_sasakian"]


def test_generic3d_tau_from_c101():
    m = generic3d(c101=0.8)
    td = tanno_tensors(m, m.base_point)
    assert abs(td.tau[0, 0] - 0.8) < 1e-14
    assert not td.flags["is_K_type"]
    # 3d structures are automatically CR
    assert td.flags["is_CR"]


def test_generic3d_degenerates_to_heisenberg():
    m = generic3d()
    assert np.allclose(m.meta["c0"], heisenberg(1).meta["c0"])


def test_tau_symmetric_and_anticommutes_with_J():
    for m in models_for_identities():
        cache = TensorCache(m, m.base_point)
        tau, J = cache.tau, cache.Jmat
        assert np.allclose(tau, tau.T, atol=1e-12)
        assert np.max(np.abs(tau @ J + J @ tau)) < 1e-12, m.name


# ------------------------------------------------------------ curvature

def test_heisenberg_curvature_vanishes():
    for d in (1, 2):
        m = heisenberg(d)
        R = curvature_tensor(m, m.base_point)
        assert np.max(np.abs(R)) == 0.0


def test_hopf_3d_sectional_curvature_is_4():
    m = hopf_sphere(1)
    assert abs(tanno_curvature(m, m.base_point, 1, 2, 2, 1) - 4.0) < 1e-12
    # R(T, JT, JT, T) = 4 for any unit horizontal T
    for theta in np.linspace(0.0, 2 * np.pi, 7):
        T = np.array([np.cos(theta), np.sin(theta)])
        R = curvature_tensor(m, m.base_point)[1:, 1:, 1:, 1:]
        JT = TensorCache(m, m.base_point).Jmat @ T
        val = np.einsum("a,b,c,d,abcd->", T, JT, JT, T, R)
        assert abs(val - 4.0) < 1e-12


def test_curvature_skew_symmetries_random_model():
    m = random_model(2, np.random.default_rng(3))
    R = curvature_tensor(m, m.base_point)
    assert np.allclose(R, -np.einsum("abge->bage", R), atol=1e-12)
    assert np.allclose(R, -np.einsum("abge->abeg", R), atol=1e-12)


def test_hopf_5d_curvature_and_ricci():
    m = hopf_sphere(2)
    pts = [m.base_point]
    rng = np.random.default_rng(5)
    for _ in range(2):
        x = m.base_point + 0.2 * rng.standard_normal(m.chart_dim)
        pts.append(x / np.linalg.norm(x))
    for x in pts:
        cache = TensorCache(m, x)
        assert np.max(np.abs(cache.tau)) < 1e-10
        assert np.max(np.abs(cache.Q)) < 1e-10
        Rh = cache.R[1:, 1:, 1:, 1:]
        for _ in range(4):
            v = rng.standard_normal(2 * m.d)
            v /= np.linalg.norm(v)
            Jv = cache.Jmat @ v
            sec = np.einsum("a,b,c,d,abcd->", v, Jv, Jv, v, Rh)
            assert abs(sec - 4.0) < 1e-9
            # Ric(v) - R(v,Jv,Jv,v) = 2d - 2 = 2 on the Hopf sphere
            ricv = sum(np.einsum("a,b,c,d,abcd->", v, e, e, v, Rh)
                       for e in np.eye(2 * m.d))
            assert abs(ricv - sec - 2.0) < 1e-9


def test_hopf_5d_reeb_curvature_slot_vanishes():
    m = hopf_sphere(2)
    R = curvature_tensor(m, m.base_point)
    # R(X, X_0, X_0, X) = 0 since the Reeb field is parallel
    assert np.max(np.abs(R[:, 0, 0, :])) < 1e-10


# ----------------------------------------------- jets evaluators (hopf d=2)

def test_hopf_5d_dc_matches_finite_differences():
    m = hopf_sphere(2)
    x = m.base_point + np.array([0.0, 0.05, -0.08, 0.02, 0.04, -0.03])
    x /= np.linalg.norm(x)
    dc = m.dc_at(x)
    fd = st.fd_dc(m, x, step=1e-5)
    assert np.max(np.abs(dc - fd)) < 5e-5


def test_hopf_5d_d2c_matches_finite_differences():
    m = hopf_sphere(2)
    x = m.base_point.copy()
    x = x + np.array([0.0, 0.03, 0.01, -0.02, 0.05, 0.02])
    x /= np.linalg.norm(x)
    d2c = m.d2c_at(x)
    h = 1e-4
    worst = 0.0
    for mu in range(m.n):
        xp = st._frame_flow_step(m, x, mu, h)
        xm = st._frame_flow_step(m, x, mu, -h)
        fd = (m.dc_at(xp) - m.dc_at(xm)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(d2c[mu] - fd))))
    assert worst < 5e-5


def test_hopf_5d_frame_tangency_and_orthonormality():
    m = hopf_sphere(2)
    rng = np.random.default_rng(1)
    for _ in range(3):
        x = m.base_point + 0.3 * rng.standard_normal(6)
        x /= np.linalg.norm(x)
        F = m.frame_at(x)
        assert np.max(np.abs(x @ F)) < 1e-12          # tangent to the sphere
        H = F[:, 1:]
        assert np.allclose(H.T @ H, np.eye(4), atol=1e-12)
        assert abs(F[:, 0] @ F[:, 0] - 4.0) < 1e-12    # Reeb has ambient norm 2
        assert np.max(np.abs(F[:, 0] @ H)) < 1e-12


# ------------------------------------------- covariant derivative oracles

def _transport_tensor_oracle(model, x, mu, s=5e-5):
    """Finite-difference covariant derivative of tau along the X_mu flow:
    parallel-transport the frame, evaluate tau, differentiate centrally."""
    n = model.n

    def flow_and_frame(sign):
        h = sign * s
        y = st._frame_flow_step(model, x, mu, h)
        A = st.connection_coefficients(model, x)[mu, 1:, 1:]
        # first-order parallel transport of horizontal frame components
        P = np.eye(n - 1) - h * A
        tau_y = TensorCache(model, y).tau
        return P @ tau_y @ P.T

    tp = flow_and_frame(+1)
    tm = flow_and_frame(-1)
    return (tp - tm) / (2 * s)


def test_nabla_tau_matches_transport_oracle():
    m = tau_cr_model()
    x = m.base_point
    for mu in range(m.n):
        got = covariant_derivative_tau(m, x, mu)
        oracle = _transport_tensor_oracle(m, x, mu)
        assert np.max(np.abs(got - oracle)) < 1e-6, mu


def test_nabla_tau_sasakian_zero():
    for m in (heisenberg(2), hopf_sphere(1), non_cr_model(2)):
        got = covariant_derivative_tau(m, m.base_point, 1)
        assert np.max(np.abs(got)) < 1e-12


def test_nabla_tau_symmetric():
    m = random_model(1, np.random.default_rng(8))
    for mu in range(3):
        nt = covariant_derivative_tau(m, m.base_point, mu)
        assert np.allclose(nt, nt.T, atol=1e-12)


def test_nabla2_tau_matches_fd_oracle():
    m = tau_cr_model()
    x = m.base_point
    cache = TensorCache(m, x)
    for mu in (1, 2):
        s = 1e-3
        n = m.n

        def tau_along(h):
            y = st._frame_flow_step(m, x, mu, h)
            # second-order transport: P(h) solves P' = -P A along the curve
            A = cache.A[mu, 1:, 1:]
            P = np.eye(n - 1) - h * A + 0.5 * h * h * (A @ A)
            ty = TensorCache(m, y).tau
            return P @ ty @ P.T

        fd2 = (tau_along(s) - 2 * tau_along(0.0) + tau_along(-s)) / s**2
        # remove the reparametrization term nabla_{nabla_mu X_mu} tau
        acc = cache.A[mu, mu]
        corr = np.einsum("g,gij->ij", acc, cache.nabla_tau)
        got = second_covariant_derivative_tau(m, x, mu, mu)
        assert np.max(np.abs(got - (fd2 - corr))) < 1e-5, mu


def test_nabla_Q_zero_for_CR():
    for m in (heisenberg(2), hopf_sphere(1), tau_cr_model()):
        nq = covariant_derivative_Q(m, m.base_point, 1)
        assert np.max(np.abs(nq)) < 1e-12, m.name


def test_nabla_Q_transport_oracle_and_contraction():
    m = non_cr_model(2)
    x = m.base_point
    cache = TensorCache(m, x)
    s = 5e-5
    for mu in range(1, m.n):
        got = covariant_derivative_Q(m, x, mu)

        def q_along(h):
            y = st._frame_flow_step(m, x, mu, h)
            A = cache.A[mu, 1:, 1:]
            P = np.eye(m.n - 1) - h * A
            Qy = TensorCache(m, y).Q
            # transport all three slots
            return np.einsum("ia,jb,abc,mc->ijm", P, P, Qy, P)
        oracle = (q_along(s) - q_along(-s)) / (2 * s)
        assert np.max(np.abs(got - oracle)) < 1e-6
    # contraction identity g((nabla_T Q)(T, T), T) = 0 along any horizontal T
    rng = np.random.default_rng(4)
    for _ in range(6):
        T = rng.standard_normal(2 * m.d)
        T /= np.linalg.norm(T)
        nq = covariant_derivative_Q(m, x, np.concatenate(([0.0], T)))
        val = np.einsum("i,j,ijm,m->", T, T, nq, T)
        assert abs(val) < 1e-11


# ---------------------------------------------------- tensor identities

def test_lemma_identities_suite():
    rng = np.random.default_rng(42)
    for m in models_for_identities():
        cache = TensorCache(m, m.base_point)
        Q, J = cache.Q, cache.Jmat
        k = 2 * m.d
        for _ in range(25):
            X = rng.standard_normal(k)
            Y = rng.standard_normal(k)
            Z = rng.standard_normal(k)
            QXY = np.einsum("i,j,ijm->m", X, Y, Q)
            # b) Q(JX, Y) = -J Q(X, Y)
            QJX_Y = np.einsum("i,j,ijm->m", J @ X, Y, Q)
            assert np.max(np.abs(QJX_Y + J @ QXY)) < 1e-9
            # c) g(Q(X,Y), X) = 0
            assert abs(QXY @ X) < 1e-9
            # d) g(X, Q(Y,Z)) = -g(Y, Q(X,Z))
            QYZ = np.einsum("i,j,ijm->m", Y, Z, Q)
            QXZ = np.einsum("i,j,ijm->m", X, Z, Q)
            assert abs(X @ QYZ + Y @ QXZ) < 1e-9
            # h) Q(Y, JY) = -J Q(Y, Y)
            QY_JY = np.einsum("i,j,ijm->m", Y, J @ Y, Q)
            QYY = np.einsum("i,j,ijm->m", Y, Y, Q)
            assert np.max(np.abs(QY_JY + J @ QYY)) < 1e-9
        # i) trace Q = 0
        assert np.max(np.abs(np.einsum("iim->m", Q))) < 1e-9


def test_propcurv_id1():
    rng = np.random.default_rng(17)
    for m in models_for_identities():
        cache = TensorCache(m, m.base_point)
        R = cache.R[1:, 1:, 1:, 1:]
        tau, J = cache.tau, cache.Jmat
        for _ in range(25):
            X, Y, Z = rng.standard_normal((3, 2 * m.d))
            lhs = np.einsum("a,b,c,d,abcd->", X, Z, Y, X, R)
            rhs = (np.einsum("a,b,c,d,abcd->", X, Y, Z, X, R)
                   + (X @ (J @ Z)) * (X @ (tau @ Y))
                   + (Z @ (J @ Y)) * (X @ (tau @ X))
                   + (Y @ (J @ X)) * (X @ (tau @ Z)))
            assert abs(lhs - rhs) < 1e-9, m.name


def test_propcurv_id2():
    # S g(X, Q(X_i, X_j)) = g(X_j, Q(X_i, X))/2 - g(X_j, Q(X, X_i))
    rng = np.random.default_rng(23)
    m = non_cr_model(2)
    Q = TensorCache(m, m.base_point).Q
    for _ in range(20):
        X = rng.standard_normal(2 * m.d)
        i, j = rng.integers(0, 2 * m.d, size=2)
        lhs = 0.5 * (X @ Q[i, j] + X @ Q[j, i])
        rhs = 0.5 * np.einsum("b,b->", X, Q[i, :, j]) - np.einsum("a,a->", X, Q[:, i, j])
        assert abs(lhs - rhs) < 1e-9


# ------------------------------------------------------------ yang-mills

def test_yang_mills_heisenberg_and_sasakian():
    for m in (heisenberg(1), heisenberg(3), hopf_sphere(1)):
        ym = yang_mills_residual(m, m.base_point)
        assert ym["tau_residual"] < 1e-12
        assert ym["is_yang_mills"]


def test_yang_mills_equivalence_gap():
    for seed in range(5):
        m = random_model(1, np.random.default_rng(300 + seed))
        ym = yang_mills_residual(m, m.base_point)
        assert ym["equivalence_gap"] < 1e-10, m.name
    m = non_cr_model(2)
    ym = yang_mills_residual(m, m.base_point)
    assert ym["equivalence_gap"] < 1e-10


# --------------------------------------------------------- rotations

def test_rotation_preserves_classification():
    m = non_cr_model(2)
    O = random_rotation(4, np.random.default_rng(9))
    m2 = rotate_horizontal_frame(m, O)
    t1 = tanno_tensors(m, m.base_point)
    t2 = tanno_tensors(m2, m2.base_point)
    assert t1.flags["is_CR"] == t2.flags["is_CR"]
    assert t1.flags["is_K_type"] == t2.flags["is_K_type"]
    assert abs(np.linalg.norm(t1.Q) - np.linalg.norm(t2.Q)) < 1e-10


# ------------------------------------------------------------- loader

def test_load_model_roundtrip(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({
        "d": 1, "left_invariant": True,
        "c": [[1, 2, 0, 1.0], [1, 0, 1, 0.5], [2, 0, 2, -0.5]],
    }))
    m = load_model(str(path))
    assert m.d == 1
    assert abs(m.c_at(m.base_point)[1, 2, 0] - 1.0) < 1e-15
    assert abs(m.c_at(m.base_point)[2, 1, 0] + 1.0) < 1e-15
    assert validate(m).passed


def test_load_model_rejects_invalid(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"d": 1, "c": [[1, 2, 0, 2.0]]}))
    with pytest.raises(ModelError):
        load_model(str(bad))
    with pytest.raises(ModelError):
        load_model({"d": 0, "c": []})
    # Jacobi violation: c_10^1 = s without the forced c_20^2 = -s
    with pytest.raises(ModelError):
        load_model({"d": 1, "c": [[1, 2, 0, 1.0], [1, 0, 1, 0.5]]})


def test_builtin_model_dispatch():
    assert builtin_model("heisenberg", 2).d == 2
    assert builtin_model("hopf_sphere", 1).name == "hopf_sphere(1)"
    with pytest.raises(ModelError):
        builtin_model("nope")
