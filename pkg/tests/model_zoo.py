"""Deterministic random contact models for the test suite.

Two constructions cover the left-invariant landscape we can sample freely:

* d = 1: the generic3d family (both the tau-type and the horizontal-bracket
  type satisfy the Jacobi identity).
* d >= 2: central extensions of 2-step nilpotent horizontal algebras whose
  bracket targets are symplectic partners of the arguments (these are the
  single-entry patterns for which the cocycle condition and the nilpotency
  products vanish identically).  They are K-type but generically non-CR.

Any model may additionally be conjugated by a random orthogonal rotation of
the horizontal frame, which preserves every invariant we test.
"""

from __future__ import annotations

import numpy as np

from contactcurv.structure import ContactModel, left_invariant_model


def rotate_horizontal_frame(model: ContactModel, O_h: np.ndarray, name=None) -> ContactModel:
    n = model.n
    M = np.eye(n)
    M[1:, 1:] = O_h
    c0 = model.meta["c0"]
    c_rot = np.einsum("am,bn,gr,mnr->abg", M, M, M, c0)
    return left_invariant_model(model.d, c_rot, name=name or model.name + "+rot")


def random_rotation(k: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    return q * np.sign(np.diag(r))


def random_model(d: int, rng, rotated: bool = True) -> ContactModel:
    """Random valid left-invariant contact model of dimension 2d+1."""
    if d == 1:
        if rng.random() < 0.5:
            m = _tau_model_3d(rng)
        else:
            m = _bracket_model_3d(rng)
    else:
        m = _nilpotent_extension(d, rng)
    if rotated:
        m = rotate_horizontal_frame(m, random_rotation(2 * d, rng))
    return m


def _tau_model_3d(rng) -> ContactModel:
    s, u, v = rng.uniform(-1.0, 1.0, size=3)
    entries = [(1, 2, 0, 1.0), (1, 0, 1, s), (2, 0, 2, -s),
               (1, 0, 2, u), (2, 0, 1, v)]
    return left_invariant_model(1, entries, name=f"rand3d_tau(s={s:.3f})")


def _bracket_model_3d(rng) -> ContactModel:
    p, q = rng.uniform(-1.0, 1.0, size=2)
    entries = [(1, 2, 0, 1.0), (1, 2, 1, p), (1, 2, 2, q)]
    return left_invariant_model(1, entries, name=f"rand3d_br(p={p:.3f})")


def _nilpotent_extension(d: int, rng) -> ContactModel:
    entries = [(i, i + d, 0, 1.0) for i in range(1, d + 1)]
    # horizontal brackets [X_a, X_b] = gamma X_e for a < b <= d with target
    # e the symplectic partner of a or b; disjointness keeps gamma nilpotent
    for a in range(1, d + 1):
        for b in range(a + 1, d + 1):
            for e in (a + d, b + d):
                if rng.random() < 0.7:
                    entries.append((a, b, e, rng.uniform(-1.0, 1.0)))
    return left_invariant_model(d, entries, name=f"rand{2 * d + 1}d_nil")


def non_cr_model(d: int = 2, strength: float = 0.8) -> ContactModel:
    """Fixed 5d left-invariant model with Q != 0 (and tau = 0)."""
    entries = [(i, i + d, 0, 1.0) for i in range(1, d + 1)]
    entries.append((1, 2, 2 + d, strength))
    return left_invariant_model(d, entries, name=f"non_cr_{2 * d + 1}d")


def tau_cr_model(s: float = 0.7, u: float = 0.25) -> ContactModel:
    """3d model with tau != 0 (automatically CR); the fixture for the
    numerical-vs-closed-form aa/ac cross-check."""
    entries = [(1, 2, 0, 1.0), (1, 0, 1, s), (2, 0, 2, -s), (1, 0, 2, u),
               (2, 0, 1, u)]
    return left_invariant_model(1, entries, name=f"tau_cr(s={s},u={u})")
