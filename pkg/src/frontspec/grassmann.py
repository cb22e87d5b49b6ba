"""Longitudinal propagation of solution subspaces of Y' = A(x; lambda) Y.

Two complementary representations are integrated:

* Riccati chart flows.  An m-plane is written in a coordinate patch
  (identity block on a chosen row set, chart variable y_hat on the
  complement); the chart obeys the matrix Riccati equation

      y_hat' = c + d y_hat - y_hat a - y_hat b y_hat

  with (a, b, c, d) the patch-induced blocks of A.  Chart blow-up just
  means a poorly chosen patch, so the integration swaps to a better patch
  (greedy row selection) and keeps the determinant of the swap
  transformation, preserving analyticity of the Evans determinant.

* The Drury-Oja flow, which transports an orthonormal frame Q together
  with the exponentially rescaled determinant of the R factor,

      Q' = (I - Q Q+) A Q,      (log det R)' = Tr(Q+ A Q).

Both carry half the integration to a matching point; the evans module
combines left and right states into the matching determinant.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from . import numkit, projection
from .numkit import LogDet


class SwapThrashError(Exception):
    """The Riccati flow exceeded the patch-swap budget."""


class BlowupError(Exception):
    """The Riccati flow blew up and a patch swap could not recover it."""


@dataclass(frozen=True)
class CoordinatePatch:
    """Row multi-index of a Grassmannian coordinate patch.

    ``rows`` are the p rows carrying the identity block of the chart
    representative; the complement rows carry the chart variable.
    """

    rows: tuple
    n: int

    def __post_init__(self):
        rows = tuple(sorted(int(r) for r in self.rows))
        object.__setattr__(self, "rows", rows)
        if len(set(rows)) != len(rows) or not rows:
            raise ValueError("patch rows must be distinct and non-empty")
        if rows[0] < 0 or rows[-1] >= self.n:
            raise ValueError("patch rows out of range")

    @property
    def complement(self):
        members = set(self.rows)
        return tuple(i for i in range(self.n) if i not in members)


def default_patch(n, m, side):
    """The patches used for the matching determinant: rows {1..m} for the
    left half-line problem, rows {m+1..n} for the right one."""
    if side == "left":
        return CoordinatePatch(tuple(range(m)), n)
    if side == "right":
        return CoordinatePatch(tuple(range(m, n)), n)
    raise ValueError("side must be 'left' or 'right'")


@dataclass
class RiccatiState:
    """Riccati chart state: patch, chart variable, accumulated log of the
    patch-swap determinants, current position."""

    patch: CoordinatePatch
    y_hat: np.ndarray
    swap_log_det: LogDet
    x: float
    n_swaps: int = 0

    def frame(self):
        """The n x p chart representative (identity on patch rows)."""
        p = len(self.patch.rows)
        out = np.zeros((self.patch.n, p), dtype=np.complex128)
        out[list(self.patch.rows), :] = np.eye(p)
        out[list(self.patch.complement), :] = self.y_hat
        return out


@dataclass
class OrthoState:
    """Orthonormal frame plus continuously accumulated log det R."""

    q: np.ndarray
    log_det_r: complex
    x: float

    def orthonormality_defect(self):
        p = self.q.shape[1]
        return float(np.linalg.norm(self.q.conj().T @ self.q - np.eye(p)))


def riccati_rhs(a, b, c, d, y_hat):
    """c + d y - y a - y b y with the patch-induced blocks of A."""
    return c + d @ y_hat - y_hat @ a - y_hat @ (b @ y_hat)


def chart_init(basis, patch):
    """Chart variable of the subspace spanned by ``basis`` in ``patch``:
    the complement-row block postmultiplied by the inverse of the
    patch-row block.  Independent of the basis normalization."""
    rows, comp = list(patch.rows), list(patch.complement)
    u = basis[rows, :]
    try:
        inv = np.linalg.inv(u)
    except np.linalg.LinAlgError as err:
        raise numkit.RankDeficiencyError(0, f"subspace not in patch {patch.rows}") from err
    return basis[comp, :] @ inv


def _pick_patch(frame):
    """Greedy row selection for a fresh patch: QR with column pivoting on
    the transpose ranks rows by their contribution to the column space."""
    p = frame.shape[1]
    _, _, piv = scipy.linalg.qr(frame.conj().T, pivoting=True, mode="economic")
    return tuple(sorted(int(i) for i in piv[:p]))


def _swap_patch(state):
    frame = state.frame()
    new_rows = _pick_patch(frame)
    patch = CoordinatePatch(new_rows, state.patch.n)
    u = frame[list(patch.rows), :]
    y_new = frame[list(patch.complement), :] @ np.linalg.inv(u)
    return replace(
        state,
        patch=patch,
        y_hat=y_new,
        swap_log_det=state.swap_log_det * numkit.det_via_lu(u),
        n_swaps=state.n_swaps + 1,
    )


def _riccati_rhs_fn(sys, lam, patch, side):
    """RHS closure for one patch.  The default left/right patches use the
    block structure of A directly; a general patch slices the assembled
    matrix."""
    n, m = sys.n, sys.m
    if patch == default_patch(n, m, "left"):
        def rhs(x, y):
            a3, a4 = projection.a_blocks(sys, x, lam)
            return a3 + a4[:, None] * y - y @ y
        return rhs
    if patch == default_patch(n, m, "right"):
        def rhs(x, y):
            a3, a4 = projection.a_blocks(sys, x, lam)
            return np.eye(n - m) - y * a4[None, :] - y @ (a3 @ y)
        return rhs
    rows, comp = list(patch.rows), list(patch.complement)

    def rhs(x, y):
        a_full = projection.assemble_A(sys, x, lam)
        a = a_full[np.ix_(rows, rows)]
        b = a_full[np.ix_(rows, comp)]
        c = a_full[np.ix_(comp, rows)]
        d = a_full[np.ix_(comp, comp)]
        return riccati_rhs(a, b, c, d, y)

    return rhs


def integrate_riccati(sys, lam, side, patch0, y_hat0, x_from, x_to, tol=None,
                      swap_threshold=1e3, max_swaps=50):
    """Propagate a Riccati chart state from x_from to x_to.

    When the chart norm exceeds ``swap_threshold`` (or the integrator
    underflows its step size) the patch is swapped and the determinant of
    the swap transformation accumulated.  Raises SwapThrashError past
    ``max_swaps`` swaps and BlowupError if a swap fails to unblock the
    flow.

    The accumulated swap determinants keep the matching determinant
    continuous and nonvanishing across patch changes, so zeros and
    winding counts are unaffected by swaps; the chart-based Evans value
    itself is defined up to the (deliberately dropped) slaved-transform
    determinant and therefore depends on the patch history away from
    zeros.
    """
    state = RiccatiState(patch0, np.asarray(y_hat0, dtype=np.complex128),
                         LogDet(0.0, 0.0), float(x_from))
    if x_from == x_to:
        return state

    def stop(x, y):
        return np.abs(y).max() > swap_threshold

    x_last_swap = None
    while state.x != x_to:
        rhs = _riccati_rhs_fn(sys, lam, state.patch, side)
        shape = state.y_hat.shape
        flat_rhs = lambda x, y: rhs(x, y.reshape(shape)).ravel()
        flat_stop = lambda x, y: stop(x, y.reshape(shape))
        try:
            res = numkit.integrate_adaptive(
                flat_rhs, state.x, x_to, state.y_hat.ravel(), tol, stop=flat_stop
            )
            state = replace(state, y_hat=res.y.reshape(shape), x=res.x)
            if not res.stopped:
                return state
        except numkit.StepUnderflowError as err:
            if x_last_swap is not None and abs(err.x - x_last_swap) < 1e-12 * abs(x_to - x_from):
                raise BlowupError(
                    f"Riccati flow unrecoverable at x = {err.x} (side {side}, lambda {lam})"
                ) from err
            state = replace(state, y_hat=err.y.reshape(shape), x=err.x)
        if state.n_swaps + 1 > max_swaps:
            raise SwapThrashError(f"more than {max_swaps} patch swaps (side {side})")
        x_last_swap = state.x
        state = _swap_patch(state)
    return state


def integrate_drury_oja(sys, lam, side, q0, x_from, x_to, tol=None,
                        log_det_r0=0.0, reorth_tol=1e-10, a_matrix=None):
    """Propagate an orthonormal frame and log det R from x_from to x_to.

    log det R integrates the trace form continuously (no post-hoc arg
    unwrapping); whenever orthonormality drifts past ``reorth_tol`` the
    frame is re-orthonormalized and the correction's determinant folded
    into log det R.

    ``a_matrix``, a callable x -> full coefficient matrix, replaces the
    projected system (pass sys=None); used for synthetic flows.
    """
    q = np.asarray(q0, dtype=np.complex128)
    n, p = q.shape
    if a_matrix is None and n != sys.n:
        raise ValueError("frame row count does not match the system order")
    state = OrthoState(q, complex(log_det_r0), float(x_from))
    if x_from == x_to:
        return state

    if a_matrix is not None:
        def apply_a(x, q):
            return a_matrix(x) @ q
    else:
        m = sys.m

        def apply_a(x, q):
            a3, a4 = projection.a_blocks(sys, x, lam)
            aq = np.empty_like(q)
            aq[:m] = q[m:]
            aq[m:] = a3 @ q[:m] + a4[:, None] * q[m:]
            return aq

    def rhs(x, z):
        q = z[:-1].reshape(n, p)
        aq = apply_a(x, q)
        qaq = q.conj().T @ aq
        out = np.empty_like(z)
        out[:-1] = (aq - q @ qaq).ravel()
        out[-1] = np.trace(qaq)
        return out

    def drift_stop(x, z):
        q = z[:-1].reshape(n, p)
        return np.linalg.norm(q.conj().T @ q - np.eye(p)) > reorth_tol

    z = np.concatenate([state.q.ravel(), [state.log_det_r]])
    x = state.x
    while True:
        res = numkit.integrate_adaptive(rhs, x, x_to, z, tol, stop=drift_stop)
        q = res.y[:-1].reshape(n, p)
        ld = complex(res.y[-1])
        if not res.stopped:
            return OrthoState(q, ld, float(res.x))
        q, r = numkit.qr_decompose(q)
        corr = numkit.det_via_lu(r)
        ld = ld + complex(corr.log_abs, corr.arg)
        z = np.concatenate([q.ravel(), [ld]])
        x = res.x


def subspace_angle(qm, qp):
    """Angle between the subspaces spanned by the orthonormal frames:
    arcsin of the smallest singular value of (I - Qm Qm+) Qp, which is
    accurate precisely when the angle is small."""
    resid = qp - qm @ (qm.conj().T @ qp)
    s = scipy.linalg.svdvals(resid)
    return float(np.arcsin(min(1.0, s[-1])))


def max_principal_angle(a, b):
    """Largest principal angle between the column spans of a and b
    (inputs need not be orthonormal; dimensions must agree)."""
    if a.shape != b.shape:
        raise ValueError("subspace dimensions differ")
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    resid = qb - qa @ (qa.conj().T @ qb)
    s = scipy.linalg.svdvals(resid)
    return float(np.arcsin(min(1.0, s[0])))
