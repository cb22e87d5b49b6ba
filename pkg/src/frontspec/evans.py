"""Evans function evaluation, root finding, winding counts, dispersion
relations, sectorial bounds, and the direct-projection cross-check.

Two backends evaluate the same matching determinant:

* 'riccati'   - chart flows on both half-lines; the modified Evans
                function det(y_minus | y_plus) times the accumulated
                patch-swap determinants.  Independent of how the boundary
                eigenvector bases are normalized.
* 'drury_oja' - orthonormal-frame flows; det(Q_minus | Q_plus) times
                det R_minus det R_plus, which reproduces the plain
                matching determinant of the propagated frames.

All values are carried in (log magnitude, phase) form: with dozens of
transverse modes the determinant magnitude reaches 1e-60 and beyond,
far outside floating-point range, while every digit of it is still
meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg as spla

from . import grassmann, numkit, projection
from .numkit import LogDet


class WindingError(Exception):
    """A contour segment could not be resolved to sub-pi argument steps."""


class ShiftError(Exception):
    """The shift-invert factorization failed (sigma too close to an
    eigenvalue); advises trying a different shift."""


@dataclass(frozen=True)
class EvansValue:
    """One Evans-function evaluation at (lambda, x_star)."""

    lam: complex
    log_abs: float
    arg: float
    backend: str
    x_star: float
    K: int

    @property
    def value(self):
        return LogDet(self.log_abs, self.arg).value

    @property
    def sign(self):
        """Sign of the real part, for real-axis work."""
        return 1.0 if np.cos(self.arg) >= 0 else -1.0


def _default_bounds(sys, bounds):
    return sys.x_span if bounds is None else (float(bounds[0]), float(bounds[1]))


def evans_riccati(sys, lam, x_star, bounds=None, tol=None, method="auto",
                  swap_threshold=1e3):
    """Evans function via the Riccati chart flows.

    Integrates the left chart on [x_minus, x_star] and the right chart on
    [x_star, x_plus] (default patches; swaps handled automatically) and
    returns the matching determinant with swap determinants folded in.
    """
    lam = complex(lam)
    x_minus, x_plus = _default_bounds(sys, bounds)
    bs = projection.boundary_subspaces(sys, lam, method=method)
    patch_l = grassmann.default_patch(sys.n, sys.m, "left")
    patch_r = grassmann.default_patch(sys.n, sys.m, "right")
    y0_l = grassmann.chart_init(bs.y_minus, patch_l)
    y0_r = grassmann.chart_init(bs.y_plus, patch_r)
    st_l = grassmann.integrate_riccati(sys, lam, "left", patch_l, y0_l,
                                       x_minus, x_star, tol,
                                       swap_threshold=swap_threshold)
    st_r = grassmann.integrate_riccati(sys, lam, "right", patch_r, y0_r,
                                       x_plus, x_star, tol,
                                       swap_threshold=swap_threshold)
    match = np.hstack([st_l.frame(), st_r.frame()])
    ld = numkit.det_via_lu(match) * st_l.swap_log_det * st_r.swap_log_det
    return EvansValue(lam, ld.log_abs, ld.arg, "riccati", x_star, sys.K)


def _ortho_states(sys, lam, x_star, bounds, tol, method="auto", basis=None):
    x_minus, x_plus = _default_bounds(sys, bounds)
    if basis is None:
        bs = projection.boundary_subspaces(sys, lam, method=method)
        basis = (bs.y_minus, bs.y_plus)
    q0m, r0m = numkit.qr_decompose(basis[0])
    q0p, r0p = numkit.qr_decompose(basis[1])
    ldm = numkit.det_via_lu(r0m)
    ldp = numkit.det_via_lu(r0p)
    st_m = grassmann.integrate_drury_oja(sys, lam, "left", q0m, x_minus, x_star,
                                         tol, complex(ldm.log_abs, ldm.arg))
    st_p = grassmann.integrate_drury_oja(sys, lam, "right", q0p, x_plus, x_star,
                                         tol, complex(ldp.log_abs, ldp.arg))
    return st_m, st_p


def _far_field_growth(sys, lam, x_star, x_minus, x_plus):
    """Constant-coefficient growth exp(sum mu+ (x*-x-) + sum mu- (x*-x+))
    accumulated by the propagated frames; analytic and nonvanishing in
    lambda, used to rescale the orthogonalization backend exponentially."""
    total = 0.0 + 0.0j
    try:
        for kappa in sys.kappas:
            mu_u, _ = projection.far_field_decay_rates(sys, kappa, lam, "left")
            _, mu_s = projection.far_field_decay_rates(sys, kappa, lam, "right")
            total += np.sum(mu_u) * (x_star - x_minus) + np.sum(mu_s) * (x_star - x_plus)
    except NotImplementedError:
        return 0.0 + 0.0j
    return total


def evans_drury_oja(sys, lam, x_star, bounds=None, tol=None, method="auto"):
    """Evans function in the continuous-orthogonalization form
    det(Q- Q+) det R- det R+ at the matching point.

    det R is integrated in log form and the result exponentially rescaled
    by the known far-field growth of the frames, an analytic nonvanishing
    factor; zeros are unaffected and values stay in a representable range
    (they still shrink geometrically with the mode count).
    """
    lam = complex(lam)
    if sys.m == sys.n or sys.m == 0:
        raise ValueError("degenerate split: no complementary subspace to match")
    x_minus, x_plus = _default_bounds(sys, bounds)
    st_m, st_p = _ortho_states(sys, lam, x_star, (x_minus, x_plus), tol, method)
    ld = numkit.det_via_lu(np.hstack([st_m.q, st_p.q]))
    growth = _far_field_growth(sys, lam, x_star, x_minus, x_plus)
    log_abs = ld.log_abs + st_m.log_det_r.real + st_p.log_det_r.real - growth.real
    arg = ld.arg + st_m.log_det_r.imag + st_p.log_det_r.imag - growth.imag
    return EvansValue(lam, log_abs, arg, "drury_oja", x_star, sys.K)


def evans_angle(sys, lam, x_star, bounds=None, tol=None, method="auto"):
    """Angle between the propagated unstable and stable subspaces at the
    matching point; touch-downs near zero flag candidate eigenvalues."""
    st_m, st_p = _ortho_states(sys, complex(lam), x_star, bounds, tol, method)
    return grassmann.subspace_angle(st_m.q, st_p.q)


def evaluate(sys, lam, x_star, backend="riccati", bounds=None, tol=None,
             method="auto"):
    if backend == "riccati":
        return evans_riccati(sys, lam, x_star, bounds, tol, method)
    if backend == "drury_oja":
        return evans_drury_oja(sys, lam, x_star, bounds, tol, method)
    raise ValueError(f"unknown backend {backend!r}")


# ---------------------------------------------------------------------------
# batched per-mode path for planar systems

def _mode_a3_parts(sub, kappas, lam):
    binv = 1.0 / sub.b
    N = len(binv)
    diag = np.zeros((len(kappas), N, N), dtype=np.complex128)
    idx = np.arange(N)
    diag[:, idx, idx] = lam * binv[None, :] + np.asarray(kappas)[:, None] ** 2
    return diag


def planar_mode_dets(sys, lam, x_star, kappas=None, bounds=None, tol=None):
    """Per-mode Evans determinants of a planar system, integrated as one
    batch (the projected system decouples mode by mode when all D_k with
    k != 0 vanish).  Returns a list of LogDet, one per wavenumber."""
    lam = complex(lam)
    x_minus, x_plus = _default_bounds(sys, bounds)
    sub = sys.mode_subsystem(0)
    if kappas is None:
        kappas = sys.kappas
    kappas = np.asarray(kappas, dtype=float)
    N = sub.n_fields
    nm = len(kappas)
    binv = 1.0 / sub.b
    a4 = -sub.c * binv
    diag = _mode_a3_parts(sub, kappas, lam)
    spline = sub._spline

    def a3_at(x):
        d0 = spline(x)[0]
        return diag + (-(binv[:, None] * d0))[None, :, :]

    y0l = np.empty((nm, N, N), dtype=np.complex128)
    y0r = np.empty((nm, N, N), dtype=np.complex128)
    for j, kappa in enumerate(kappas):
        wu, _ = projection._triangular_mode_basis(sub, kappa, lam, "left")
        _, ws = projection._triangular_mode_basis(sub, kappa, lam, "right")
        y0l[j] = wu[N:] @ np.linalg.inv(wu[:N])
        y0r[j] = ws[:N] @ np.linalg.inv(ws[N:])

    def rhs_left(x, y):
        yy = y.reshape(nm, N, N)
        return (a3_at(x) + a4[None, :, None] * yy - yy @ yy).ravel()

    def rhs_right(x, y):
        yy = y.reshape(nm, N, N)
        return (np.eye(N)[None] - yy * a4[None, None, :] - yy @ (a3_at(x) @ yy)).ravel()

    res_l = numkit.integrate_adaptive(rhs_left, x_minus, x_star, y0l.ravel(), tol)
    res_r = numkit.integrate_adaptive(rhs_right, x_plus, x_star, y0r.ravel(), tol)
    yl = res_l.y.reshape(nm, N, N)
    yr = res_r.y.reshape(nm, N, N)
    match = np.empty((nm, 2 * N, 2 * N), dtype=np.complex128)
    match[:, :N, :N] = np.eye(N)
    match[:, N:, :N] = yl
    match[:, :N, N:] = yr
    match[:, N:, N:] = np.eye(N)
    sign, logabs = np.linalg.slogdet(match)
    return [LogDet(float(la), float(np.angle(s))) for s, la in zip(sign, logabs)]


def _require_planar(sys):
    defect = sys.planarity_defect()
    if defect > 1e-8:
        raise ValueError(f"system is not planar (off-mode magnitude {defect:.2e})")


def evans_product(sys, lam, x_star, bounds=None, tol=None):
    """Evans value of a planar system as the product over its per-mode
    factors (exact factorization for decoupled modes)."""
    _require_planar(sys)
    dets = planar_mode_dets(sys, lam, x_star, None, bounds, tol)
    log_abs = sum(d.log_abs for d in dets)
    arg = sum(d.arg for d in dets)
    return EvansValue(complex(lam), log_abs, arg, "product", x_star, sys.K)


def factorization_check(sys, lam, x_star, bounds=None, tol=None):
    """Complex log defect between the full-system Evans determinant and
    the product of its per-mode factors (planar systems only)."""
    _require_planar(sys)
    full = evans_riccati(sys, lam, x_star, bounds, tol)
    prod = evans_product(sys, lam, x_star, bounds, tol)
    dre = full.log_abs - prod.log_abs
    dim = (full.arg - prod.arg + np.pi) % (2 * np.pi) - np.pi
    return float(np.hypot(dre, dim))


# ---------------------------------------------------------------------------
# real-axis scanning and refinement

@dataclass
class RefinedZero:
    lam: float
    multiplicity: int
    log_abs: float          # log |D| at the refined zero
    backend: str
    flagged: bool = False


@dataclass
class ScanResult:
    zeros: list
    flagged: list
    lams: np.ndarray
    log_abs: np.ndarray
    signs: np.ndarray
    backend: str


def _real_evaluator(sys, x_star, backend, bounds, tol, mode="auto"):
    """Returns f(lambda) -> (log|D|, sign) for real lambda."""
    use_product = False
    if mode == "product" or (mode == "auto" and backend == "riccati"):
        try:
            _require_planar(sys)
            use_product = True
        except ValueError:
            use_product = False
    if use_product:
        def f(lam):
            ev = evans_product(sys, lam, x_star, bounds, tol)
            return ev.log_abs, ev.sign
    else:
        def f(lam):
            ev = evaluate(sys, lam, x_star, backend, bounds, tol)
            return ev.log_abs, ev.sign
    return f


def _signed(logabs, sign, ref):
    return sign * np.exp(np.minimum(logabs - ref, 500.0))


def scan_and_refine(sys, interval, backend="riccati", n_samples=161,
                    x_star=0.0, bounds=None, tol=None, dip_rel=1e-3,
                    refine_xtol=1e-13, mode="auto", workers=1,
                    evaluator=None):
    """Locate Evans-function zeros on a real interval.

    Samples log|D| and the sign of D on a uniform grid, refines every
    sign change by Brent's method, and treats sign-preserving local dips
    of log|D| below dip_rel * median as candidate even-multiplicity
    zeros: each dip is probed on a fine local grid (which resolves pairs
    of nearby simple zeros when possible) and otherwise refined by
    golden-section minimization and reported with multiplicity 2.
    Candidates whose refined |D| stays large are returned in ``flagged``
    rather than silently dropped.
    """
    a, b = float(interval[0]), float(interval[1])
    f = evaluator or _real_evaluator(sys, x_star, backend, bounds, tol, mode)
    lams = np.linspace(a, b, n_samples)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(f, lams))
    else:
        vals = [f(lam) for lam in lams]
    logabs = np.array([v[0] for v in vals])
    signs = np.array([v[1] for v in vals])
    ref = float(np.median(logabs[np.isfinite(logabs)]))

    zeros, flagged = [], []

    def fsig(lam):
        la, s = f(lam)
        return _signed(la, s, ref)

    # simple zeros: bracketed sign changes
    for i in range(n_samples - 1):
        if signs[i] * signs[i + 1] < 0:
            root = scipy.optimize.brentq(fsig, lams[i], lams[i + 1],
                                         xtol=refine_xtol, rtol=8.9e-16)
            la, _ = f(root)
            zeros.append(RefinedZero(float(root), 1, la, backend))

    # even-multiplicity zeros: sign-preserving notches of log|D|.
    # Candidates are local minima standing visibly below their shoulders;
    # the classification (genuine even zero vs spurious dip) happens after
    # refinement, where a true zero drives |D| many decades down while a
    # smooth local minimum barely moves.
    for i in range(1, n_samples - 1):
        if signs[i - 1] * signs[i] < 0 or signs[i] * signs[i + 1] < 0:
            continue
        if not (logabs[i] < logabs[i - 1] and logabs[i] <= logabs[i + 1]):
            continue
        shoulder = 0.5 * (logabs[i - 1] + logabs[i + 1])
        if logabs[i] > shoulder - 0.5:
            continue
        lo, hi = lams[i - 1], lams[i + 1]
        # fine probe: a dip can hide two nearby simple roots
        probe = np.linspace(lo, hi, 81)
        pv = [f(lam) for lam in probe]
        psig = np.array([v[1] for v in pv])
        changes = np.nonzero(psig[:-1] * psig[1:] < 0)[0]
        if len(changes) >= 2:
            for j in changes:
                root = scipy.optimize.brentq(fsig, probe[j], probe[j + 1],
                                             xtol=refine_xtol, rtol=8.9e-16)
                la, _ = f(root)
                zeros.append(RefinedZero(float(root), 1, la, backend))
            continue
        res = scipy.optimize.minimize_scalar(
            lambda lam: f(lam)[0], bounds=(lo, hi), method="bounded",
            options={"xatol": refine_xtol},
        )
        la = float(res.fun)
        depth_ok = la < max(logabs[i - 1], logabs[i + 1]) + 2 * np.log(dip_rel)
        if depth_ok:
            zeros.append(RefinedZero(float(res.x), 2, la, backend))
        elif logabs[i] < ref + np.log(dip_rel):
            flagged.append(RefinedZero(float(res.x), 2, la, backend, flagged=True))

    zeros.sort(key=lambda z: z.lam)
    return ScanResult(zeros, flagged, lams, logabs, signs, backend)


# ---------------------------------------------------------------------------
# dispersion relation

@dataclass
class DispersionCurve:
    wavenumbers: np.ndarray
    growth_rates: np.ndarray


def dispersion_relation(front, wavenumbers, x_star=0.0, bounds=(-25.0, 25.0),
                        tol=None, bracket0=5e-4):
    """Leading real eigenvalue of the planar front against transverse
    wavenumber, by continuation of the per-mode Evans zero.

    Starts from the translation eigenvalue at wavenumber 0 and tracks the
    real root as the wavenumber increases, re-bracketing around the
    previous value (expanding the bracket when the root moved further).
    """
    sys0 = projection.build_projected_system(front, K=0)
    wavenumbers = np.asarray(wavenumbers, dtype=float)
    out = np.empty_like(wavenumbers)

    def fsig(lam, kappa):
        d = planar_mode_dets(sys0, lam, x_star, [kappa], bounds, tol)[0]
        return np.cos(d.arg) * np.exp(min(d.log_abs, 500.0))

    prev = 0.0
    last_step = 0.0
    for i, kappa in enumerate(wavenumbers):
        if kappa == 0.0:
            out[i] = 0.0
            prev, last_step = 0.0, 0.0
            continue
        r = max(bracket0, 3 * abs(last_step))
        lo, hi = prev - r, prev + r
        flo, fhi = fsig(lo, kappa), fsig(hi, kappa)
        grow = 0
        while flo * fhi > 0 and grow < 60:
            r *= 1.6
            lo, hi = prev - r, prev + r
            flo, fhi = fsig(lo, kappa), fsig(hi, kappa)
            grow += 1
        if flo * fhi > 0:
            raise RuntimeError(f"lost the dispersion root near wavenumber {kappa}")
        root = float(scipy.optimize.brentq(lambda l: fsig(l, kappa), lo, hi, xtol=1e-12))
        last_step, prev = root - prev, root
        out[i] = root
    return DispersionCurve(wavenumbers, out)


# ---------------------------------------------------------------------------
# contours and winding numbers

@dataclass(frozen=True)
class Segment:
    """One contour piece; t in [0, 1] parametrizes it."""

    kind: str               # 'line' or 'arc'
    z0: complex = 0j        # line endpoints
    z1: complex = 0j
    center: complex = 0j    # arc data
    radius: float = 0.0
    theta0: float = 0.0
    theta1: float = 0.0

    def at(self, t):
        if self.kind == "line":
            return self.z0 + (self.z1 - self.z0) * t
        th = self.theta0 + (self.theta1 - self.theta0) * t
        return self.center + self.radius * np.exp(1j * th)

    @property
    def start(self):
        return self.at(0.0)

    @property
    def end(self):
        return self.at(1.0)


def line(z0, z1):
    return Segment("line", z0=complex(z0), z1=complex(z1))


def arc(center, radius, theta0, theta1):
    return Segment("arc", center=complex(center), radius=float(radius),
                   theta0=float(theta0), theta1=float(theta1))


@dataclass(frozen=True)
class ContourSpec:
    """An ordered chain of segments.

    With ``symmetric_half`` the chain covers only the closed upper half of
    a contour symmetric about the real axis (both endpoints on the real
    axis); conjugate symmetry of the Evans function supplies the lower
    half, so the winding count is the accumulated argument change divided
    by pi.  A full chain must close on itself.
    """

    segments: tuple
    symmetric_half: bool = False
    exclusion_radius: float = 0.0
    max_dphi: float = np.pi / 2

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("empty contour")
        for s0, s1 in zip(segs[:-1], segs[1:]):
            if abs(s0.end - s1.start) > 1e-9:
                raise ValueError("contour chain is not connected")
        if self.symmetric_half:
            if abs(segs[0].start.imag) > 1e-9 or abs(segs[-1].end.imag) > 1e-9:
                raise ValueError("half-contour endpoints must lie on the real axis")
        elif abs(segs[-1].end - segs[0].start) > 1e-9:
            raise ValueError("contour is not closed")


def sectorial_contour(re_cap, sector_cap, r0=1e-4):
    """Upper half of the eigenvalue search contour: up the vertical edge
    Re = re_cap, along the diagonal Re + Im = sector_cap, down the
    imaginary axis, and around the origin-excluding quarter circle."""
    top = complex(re_cap, sector_cap - re_cap)
    return ContourSpec(
        (
            line(complex(re_cap, 0.0), top),
            line(top, complex(0.0, sector_cap)),
            line(complex(0.0, sector_cap), complex(0.0, r0)),
            arc(0.0, r0, np.pi / 2, 0.0),
        ),
        symmetric_half=True,
        exclusion_radius=r0,
    )


def origin_circle(radius=1e-4):
    """Upper half of a circle about the origin (closed by symmetry)."""
    return ContourSpec(
        (arc(0.0, radius, 0.0, np.pi),),
        symmetric_half=True,
    )


def circle(center, radius):
    """A full circle (no symmetry assumption)."""
    return ContourSpec(
        (arc(center, radius, 0.0, np.pi), arc(center, radius, np.pi, 2 * np.pi)),
    )


@dataclass
class WindingResult:
    count: int
    total_arg_change: float
    samples: list            # (lambda, arg) along the traversal


def _wrap(dphi):
    return (dphi + np.pi) % (2 * np.pi) - np.pi


def winding_number(sys, contour, backend="riccati", x_star=0.0, bounds=None,
                   tol=None, max_depth=20, mode="auto", evaluator=None,
                   initial_splits=8):
    """Zero count inside a contour by the argument principle.

    Each segment is bisected adaptively until the argument change between
    adjacent samples is below contour.max_dphi (default pi/2, safely under
    the pi resolution limit); the count is the total argument change over
    the closed contour divided by 2 pi.  Raises WindingError if bisection
    depth is exhausted or the total fails to be an integer multiple.
    """
    f = evaluator or _contour_evaluator(sys, x_star, backend, bounds, tol, mode)

    samples = []
    total = 0.0
    for seg in contour.segments:
        # seed each segment with a uniform partition before adaptive
        # bisection: endpoint arguments alone can alias a full winding
        knots = np.linspace(0.0, 1.0, initial_splits + 1)
        cache = {t: f(seg.at(t)) for t in knots}

        def darg(t0, t1, depth):
            nonlocal total
            a0, a1 = cache[t0], cache[t1]
            d = _wrap(a1 - a0)
            if abs(d) < contour.max_dphi:
                total += d
                samples.append((seg.at(t1), a1))
                return
            if depth >= max_depth:
                raise WindingError(
                    f"segment bisection depth exceeded near lambda = {seg.at(t0)}"
                )
            tm = 0.5 * (t0 + t1)
            cache[tm] = f(seg.at(tm))
            darg(t0, tm, depth + 1)
            darg(tm, t1, depth + 1)

        samples.append((seg.at(0.0), cache[0.0]))
        for t0, t1 in zip(knots[:-1], knots[1:]):
            darg(t0, t1, 0)

    if contour.symmetric_half:
        total *= 2.0
    count = int(round(total / (2 * np.pi)))
    if abs(total / (2 * np.pi) - count) > 0.05:
        raise WindingError(
            f"argument change {total / (2 * np.pi):.4f} turns is not an integer"
        )
    return WindingResult(count, total, samples)


def _contour_evaluator(sys, x_star, backend, bounds, tol, mode="auto"):
    use_product = False
    if mode == "product" or (mode == "auto" and backend == "riccati"):
        try:
            _require_planar(sys)
            use_product = True
        except ValueError:
            use_product = False
    if use_product:
        def f(lam):
            return evans_product(sys, lam, x_star, bounds, tol).arg
    else:
        def f(lam):
            return evaluate(sys, lam, x_star, backend, bounds, tol).arg
    return f


# ---------------------------------------------------------------------------
# sectorial bounds and the large-lambda asymptote

@dataclass(frozen=True)
class SectorialBounds:
    re_cap: float            # Re(lambda) <= df_norm
    sector_cap: float        # Re + |Im| <= c^2 / (4 kappa) + 2 df_norm
    kappa: float             # smallest diffusion coefficient
    df_norm: float           # max over the front of the Jacobian inf-norm


def sectorial_bounds(front):
    """A-priori spectral bounds from the front's Jacobian supremum.

    df_norm is the maximum over grid nodes of the spectral norm of
    DF(U_c), which dominates the symmetrized quadratic form in the energy
    estimate; kappa is the smallest diffusion coefficient.  The caps are
    Re(lambda) <= df_norm and Re + |Im| <= c^2/(4 kappa) + 2 df_norm."""
    model = front.model
    df = model.jacobian(front.fields)
    df_norm = float(np.linalg.norm(df, ord=2, axis=(-2, -1)).max())
    kappa = float(np.min(model.diffusion))
    c = float(front.speed)
    return SectorialBounds(
        re_cap=df_norm,
        sector_cap=c**2 / (4 * kappa) + 2 * df_norm,
        kappa=kappa,
        df_norm=df_norm,
    )


def large_lambda_asymptote(delta, K, lam):
    """Large-|lambda| asymptote 2 (delta^{-1/2} e^{i arg lambda})^{2K+1}
    of the Evans function (autocatalysis diffusion pair (delta, 1))."""
    phase = np.exp(1j * np.angle(complex(lam)))
    return 2.0 * (phase / np.sqrt(delta)) ** (2 * K + 1)


def asymptote_ratio(sys, lam, x_star=0.0, bounds=None, tol=None):
    """Ratio of the per-mode Evans product to its large-|lambda| limit.

    Each mode factor is evaluated on the boundary-data convention of the
    asymptotic analysis: far-field eigenvector columns carry a unit
    U-block, the propagated frames are stripped of their constant-
    coefficient growth exp(mu (x_star - boundary)), and the P rows are
    rescaled by |lambda|^{-1/2}.  The per-mode limit is then the matching
    determinant of the rescaled far-field frames,

        det[[I, I], [B~^{1/2}, -B~^{1/2}]] = det(2 B~^{1/2}),

    i.e. 4 delta^{-1/2} e^{i arg lambda} per mode for the autocatalysis
    diffusion pair.  (This is the block-determinant value itself; the
    per-mode scalar quoted alongside the parity-index discussion drops
    the 2^{dim} factor of det(2 C) and is kept, verbatim, in
    large_lambda_asymptote.)  Returns the complex ratio, which tends to 1.
    """
    lam = complex(lam)
    x_minus, x_plus = _default_bounds(sys, bounds)
    sub = sys.mode_subsystem(0)
    N = sub.n_fields
    log_ratio = 0.0 + 0.0j
    for kappa in sys.kappas:
        wu, _ = projection._triangular_mode_basis(sub, kappa, lam, "left")
        _, ws = projection._triangular_mode_basis(sub, kappa, lam, "right")
        mu_u, _ = projection.far_field_decay_rates(sub, kappa, lam, "left")
        _, mu_s = projection.far_field_decay_rates(sub, kappa, lam, "right")
        # unit U-block normalization (triangular transform, determinant 1)
        wu = wu @ np.linalg.inv(wu[:N])
        ws = ws @ np.linalg.inv(ws[:N])
        msub = projection.ProjectedSystem(
            K=0, L=sub.L, kappas=np.array([kappa]), b=sub.b, c=sub.c,
            delta=sub.delta, x_nodes=sub.x_nodes, modes=sub.modes,
            df_left=sub.df_left, df_right=sub.df_right,
        )
        st_m, st_p = _ortho_states(msub, lam, x_star, (x_minus, x_plus), tol,
                                   basis=(wu, ws))
        ld = numkit.det_via_lu(np.hstack([st_m.q, st_p.q]))
        log_det = complex(ld.log_abs + st_m.log_det_r.real + st_p.log_det_r.real,
                          ld.arg + st_m.log_det_r.imag + st_p.log_det_r.imag)
        growth = (np.sum(mu_u) * (x_star - x_minus)
                  + np.sum(mu_s) * (x_star - x_plus))
        mode_limit = np.log(4.0 / np.sqrt(sys.delta)) + 1j * np.angle(lam)
        log_ratio += log_det - growth - np.log(abs(lam)) - mode_limit
    return np.exp(log_ratio)


# ---------------------------------------------------------------------------
# direct projection (shift-invert) cross-check

def direct_projection_eigs(front, sigma=1.0, n_eigs=12):
    """Eigenvalues of the discretized linearized operator nearest sigma.

    Discretizes B lap + c d_x + DF(U_c) on the front's own grid (Dirichlet
    in x, periodic in y), factorizes the shifted matrix once, and runs
    Arnoldi iteration on the shift-inverted operator.  Returns the n_eigs
    eigenvalues nearest sigma, sorted by distance from sigma.
    """
    from . import front2d as f2d

    model = front.model
    A, _, _ = f2d._assemble_linearization(model, front.x, front.y, front.fields,
                                          front.speed)
    shifted = (A - sigma * scipy.sparse.identity(A.shape[0], format="csc")).tocsc()
    try:
        lu = spla.splu(shifted, permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as err:
        raise ShiftError(
            f"factorization at sigma = {sigma} failed ({err}); try a different shift"
        ) from err
    op = spla.LinearOperator(A.shape, matvec=lu.solve, dtype=np.float64)
    vals = spla.eigs(op, k=n_eigs, which="LM", return_eigenvectors=False,
                     v0=np.ones(A.shape[0]))
    lams = sigma + 1.0 / vals
    return lams[np.argsort(np.abs(lams - sigma))]


# ---------------------------------------------------------------------------
# reporting

@dataclass
class SpectrumReport:
    """Zeros, winding counts, and sectorial bounds for one front."""

    delta: float
    K: int
    x_star: float
    backend: str
    zeros: list = field(default_factory=list)
    flagged: list = field(default_factory=list)
    windings: dict = field(default_factory=dict)
    bounds: SectorialBounds = None
    backend_agreement: dict = field(default_factory=dict)

    @property
    def unstable_count(self):
        return sum(z.multiplicity for z in self.zeros if z.lam > 0)

    def to_dict(self):
        return {
            "delta": self.delta,
            "K": self.K,
            "x_star": self.x_star,
            "backend": self.backend,
            "zeros": [
                {"lambda": z.lam, "multiplicity": z.multiplicity,
                 "log_abs_D": z.log_abs, "backend": z.backend,
                 "flagged": z.flagged}
                for z in self.zeros
            ],
            "flagged": [
                {"lambda": z.lam, "multiplicity": z.multiplicity,
                 "log_abs_D": z.log_abs} for z in self.flagged
            ],
            "windings": self.windings,
            "sectorial": None if self.bounds is None else {
                "re_cap": self.bounds.re_cap,
                "sector_cap": self.bounds.sector_cap,
                "kappa": self.bounds.kappa,
                "df_norm": self.bounds.df_norm,
            },
            "backend_agreement": self.backend_agreement,
        }
