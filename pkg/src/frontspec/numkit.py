"""Dense complex linear algebra and adaptive explicit ODE integration.

Everything in this module works on plain numpy arrays with complex128
entries.  Matrices are validated on entry (finite, correctly shaped) and
never mutated; all routines are pure and safe to call concurrently.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class NumericsError(Exception):
    """Base class for numerical failures in this package."""


class RankDeficiencyError(NumericsError):
    """A matrix expected to have full column rank does not.

    ``column`` is the index of the first offending column.
    """

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"rank deficiency detected at column {column}")


class SpectralGapError(NumericsError):
    """An eigenvalue sits too close to the imaginary axis to split the
    spectrum into stable and unstable parts (typically: the spectral
    parameter lies in or near the essential spectrum)."""

    def __init__(self, eigenvalue, gap_tol):
        self.eigenvalue = eigenvalue
        self.gap_tol = gap_tol
        super().__init__(
            f"spectral gap violated: eigenvalue {eigenvalue} has |Re| < {gap_tol}"
        )


class StepUnderflowError(NumericsError):
    """The adaptive integrator drove the step size below the underflow
    threshold, i.e. the solution is blowing up.  Carries the last accepted
    point so callers (e.g. the Riccati patch-swapping loop) can recover."""

    def __init__(self, x, y):
        self.x = x
        self.y = y
        super().__init__(f"step size underflow at x = {x}")


@dataclass(frozen=True)
class ToleranceSpec:
    """Absolute/relative tolerance pair for adaptive integration.

    Defaults follow the package-wide convention: absolute 1e-8,
    relative 1e-6.
    """

    abs_tol: float = 1e-8
    rel_tol: float = 1e-6

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be strictly positive")


DEFAULT_TOL = ToleranceSpec()


def as_matrix(a, square=False):
    """Validate and return ``a`` as a 2-d complex128 array.

    Raises ValueError on non-finite entries or wrong shape.
    """
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("matrix contains non-finite entries")
    if square and m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def qr_decompose(m, rank_tol=1e-13):
    """Thin QR decomposition with a fixed sign convention.

    Returns (Q, R) with Q of orthonormal columns and the diagonal of R
    real and non-negative, so the factorization is unique and results are
    reproducible across runs.

    Raises RankDeficiencyError if the smallest singular value is below
    ``rank_tol`` times the largest; the error carries the index of the
    first column whose R diagonal entry is negligible.
    """
    m = as_matrix(m)
    if m.shape[1] > m.shape[0]:
        raise ValueError("qr_decompose expects m <= n (tall or square matrix)")
    sv = scipy.linalg.svdvals(m)
    if sv[-1] <= rank_tol * sv[0]:
        q, r = np.linalg.qr(m)
        diag = np.abs(np.diagonal(r))
        bad = np.nonzero(diag <= rank_tol * max(diag.max(), 1e-300))[0]
        col = int(bad[0]) if bad.size else m.shape[1] - 1
        raise RankDeficiencyError(col)
    q, r = np.linalg.qr(m)
    d = np.diagonal(r).copy()
    phase = np.where(np.abs(d) > 0, d / np.abs(np.where(np.abs(d) > 0, d, 1.0)), 1.0)
    q = q * phase[np.newaxis, :]
    r = r * np.conj(phase)[:, np.newaxis]
    return q, r


def smallest_singular_value(m):
    """Smallest singular value of ``m`` (non-negative real)."""
    m = as_matrix(m)
    return float(scipy.linalg.svdvals(m)[-1])


@dataclass(frozen=True)
class LogDet:
    """A determinant carried as (log magnitude, phase).

    The Evans determinants of interest reach magnitudes like 1e-60, far
    below double-precision underflow once many transverse modes multiply
    together, so log form is the primary representation and the plain
    complex value is derived.
    """

    log_abs: float
    arg: float

    @property
    def value(self):
        if self.log_abs == -np.inf:
            return 0j
        return np.exp(complex(self.log_abs, self.arg))

    def __mul__(self, other):
        if isinstance(other, LogDet):
            return LogDet(self.log_abs + other.log_abs, self.arg + other.arg)
        return NotImplemented

    @staticmethod
    def from_value(z):
        z = complex(z)
        if z == 0:
            return LogDet(-np.inf, 0.0)
        return LogDet(float(np.log(abs(z))), float(np.angle(z)))


def det_via_lu(m):
    """Determinant by LU with partial pivoting, in LogDet form.

    Multiplying the U diagonal is numerically stable even when the result
    is far below underflow; a singular matrix yields log_abs = -inf
    (value 0).
    """
    m = as_matrix(m, square=True)
    if m.shape[0] == 0:
        return LogDet(0.0, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(m, check_finite=False)
    d = np.diagonal(lu)
    if np.any(d == 0):
        return LogDet(-np.inf, 0.0)
    log_abs = float(np.sum(np.log(np.abs(d))))
    arg = float(np.sum(np.angle(d)))
    # each pivot row swap flips the determinant sign
    n_swaps = int(np.sum(piv != np.arange(len(piv))))
    if n_swaps % 2:
        arg += np.pi
    return LogDet(log_abs, arg)


def _normalize_columns(vecs, tol=1e-8):
    """Unit 2-norm columns with the first significant entry rotated to the
    positive real axis (deterministic phase)."""
    out = np.array(vecs, dtype=np.complex128, copy=True)
    for j in range(out.shape[1]):
        v = out[:, j]
        nrm = np.linalg.norm(v)
        v = v / nrm
        mags = np.abs(v)
        idx = int(np.nonzero(mags > tol * mags.max())[0][0])
        phase = v[idx] / abs(v[idx])
        out[:, j] = v * np.conj(phase)
    return out


def eig_split(m, gap_tol=1e-10):
    """Split the eigenvectors of ``m`` into unstable and stable bases.

    Returns (unstable, stable): column matrices of eigenvectors for
    eigenvalues of positive / negative real part, each column normalized
    to unit norm with deterministic phase, ordered by (Re, Im) of the
    eigenvalue.

    Raises SpectralGapError if any eigenvalue has |Re| < gap_tol, which
    signals a spectral parameter in or near the essential spectrum.
    """
    m = as_matrix(m, square=True)
    w, v = np.linalg.eig(m)
    gap = np.min(np.abs(w.real)) if len(w) else np.inf
    if gap < gap_tol:
        bad = w[np.argmin(np.abs(w.real))]
        raise SpectralGapError(bad, gap_tol)
    order = np.lexsort((w.imag, w.real))
    w, v = w[order], v[:, order]
    unstable = v[:, w.real > 0]
    stable = v[:, w.real < 0]
    return _normalize_columns(unstable), _normalize_columns(stable)


@dataclass
class OdeResult:
    """Outcome of integrate_adaptive.

    ``x`` is the abscissa actually reached (equal to the requested
    endpoint unless a stop condition fired), ``y`` the state there.
    """

    x: float
    y: np.ndarray
    n_accepted: int
    n_rejected: int
    stopped: bool = False


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b5 - b4: coefficients of the embedded error estimate
_DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


def integrate_adaptive(rhs, x0, x1, y0, tol=None, stop=None, max_steps=1_000_000,
                       first_step=None):
    """Integrate y' = rhs(x, y) from x0 to x1 with the Dormand-Prince 5(4)
    embedded pair and PI step-size control.

    ``y0`` may be real or complex and of any flat shape; backward
    integration (x1 < x0) is supported.  ``stop(x, y)``, if given, is
    checked after every accepted step and ends the integration early with
    ``stopped=True`` in the result (used by the Riccati flow to trigger
    coordinate-patch swaps).

    Raises StepUnderflowError, carrying the last accepted (x, y), when the
    step size falls below 1e-14 times the interval length.
    """
    tol = tol or DEFAULT_TOL
    x = float(x0)
    span = float(x1) - x
    y = np.asarray(y0, dtype=np.complex128).copy()
    if span == 0.0:
        return OdeResult(x, y, 0, 0)
    direction = 1.0 if span > 0 else -1.0
    h_min = 1e-14 * abs(span)

    def err_norm(err, ya, yb):
        # max norm: insensitive to structurally-zero state entries, so the
        # step control treats a block-diagonal system and its extracted
        # blocks identically
        scale = tol.abs_tol + tol.rel_tol * np.maximum(np.abs(ya), np.abs(yb))
        return float(np.max(np.abs(err / scale)))

    f0 = np.asarray(rhs(x, y), dtype=np.complex128)
    if first_step is None:
        # standard heuristic: a step small against both span and dynamics
        scale = tol.abs_tol + tol.rel_tol * np.abs(y)
        d0 = np.sqrt(np.mean(np.abs(y / scale) ** 2))
        d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
        h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6 * abs(span)
        h = min(h, 0.1 * abs(span))
    else:
        h = min(abs(first_step), abs(span))
    h = max(h, h_min)

    k = np.empty((7,) + y.shape, dtype=np.complex128)
    k[0] = f0
    err_prev = 1.0
    n_acc = n_rej = 0

    for _ in range(max_steps):
        h_eff = direction * min(h, abs(x1 - x))
        last = abs(h_eff) >= abs(x1 - x) - 1e-300
        for i in range(1, 7):
            yi = y + h_eff * np.tensordot(_DP_A[i], k[:i], axes=(0, 0))
            k[i] = rhs(x + _DP_C[i] * h_eff, yi)
        y_new = y + h_eff * np.tensordot(_DP_B5, k, axes=(0, 0))
        err_vec = h_eff * np.tensordot(_DP_E, k, axes=(0, 0))
        bad = not np.isfinite(y_new).all()
        err = np.inf if bad else err_norm(err_vec, y, y_new)
        if err <= 1.0:
            x = x1 if last else x + h_eff
            y = y_new
            k[0] = k[6]  # FSAL
            n_acc += 1
            if stop is not None and stop(x, y):
                return OdeResult(x, y, n_acc, n_rej, stopped=True)
            if last:
                return OdeResult(x, y, n_acc, n_rej)
            fac = 0.9 * err ** -0.14 * err_prev ** 0.08 if err > 0 else 5.0
            err_prev = max(err, 1e-10)
        else:
            n_rej += 1
            fac = max(0.2, 0.9 * err ** -0.2) if np.isfinite(err) else 0.2
        h = h * min(5.0, max(0.2, fac))
        if h < h_min:
            raise StepUnderflowError(x, y)
    raise NumericsError("integrate_adaptive exceeded max_steps")
