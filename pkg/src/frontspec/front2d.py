"""Two-dimensional travelling fronts by the freezing method.

The co-moving formulation evolves

    V_t = B lap(V) + zeta(t) V_x + F(V),
    0   = <T_x, T - V>            (phase condition, template T)

with Dirichlet far-field values in x and periodic boundary conditions in
y.  The algebraic constraint is index-reduced: zeta is chosen at every
step so the phase-condition time derivative vanishes.  Steady states are
then polished by a bordered Newton solve, and fronts at new parameter
values are obtained by natural continuation.

The stepper treats diffusion implicitly (backward Euler) and reaction
plus advection explicitly; the implicit solve diagonalizes in y by FFT
and reduces to batched tridiagonal solves in x.  A one-node-wide y grid
degenerates gracefully, which is how the 1D planar solver reuses this
stepper for time-evolution preconditioning.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
import json

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import ModelSpec, cubic_autocatalysis


class FreezeError(Exception):
    """Time stepping failed (non-finite fields or rejected steps)."""


class RunawayError(FreezeError):
    """The frame speed zeta diverged; the initial data is not in the
    attracting set of a travelling front."""


class NewtonError(Exception):
    """Newton refinement failed to converge.  Carries the residual history."""

    def __init__(self, history, message=None):
        self.history = list(history)
        super().__init__(message or f"Newton did not converge; residuals {self.history}")


class ContinuationStallError(Exception):
    """Parameter continuation could not proceed below the minimal step."""


@dataclass
class FrontProfile2D:
    """A computed 2D travelling front on a tensor grid.

    fields has shape (nx, ny, N); y is periodic by storage convention
    (the last row wraps onto the first).  provenance records how the
    front was obtained ('frozen', 'newton', 'continued-from <delta0>').
    """

    x: np.ndarray
    y: np.ndarray
    fields: np.ndarray
    speed: float
    delta: float
    model: ModelSpec
    provenance: str = "frozen"

    @property
    def period(self):
        ny = len(self.y)
        return float((self.y[1] - self.y[0]) * ny) if ny > 1 else 0.0

    def transverse_variation(self):
        """Max deviation of the two x-boundary slices from their y-mean."""
        edges = self.fields[[0, -1]]
        return float(np.abs(edges - edges.mean(axis=1, keepdims=True)).max())


@dataclass
class FreezeState:
    """One snapshot of the frozen evolution."""

    t: float
    fields: np.ndarray
    zeta: float


@dataclass
class FreezeHistory:
    """Trajectory of the freezing method: zeta(t) at every step plus a
    thinned set of field snapshots and the final state."""

    times: np.ndarray
    zetas: np.ndarray
    template: np.ndarray
    snapshots: list = field(default_factory=list)
    final: FreezeState = None

    def phase_residual(self, state=None):
        """Discrete phase-condition integral at a snapshot (default: final)."""
        s = state or self.final
        tx = _ddx(self.template)
        return float(np.sum(tx * (self.template - s.fields)))


def _ddx(fields):
    out = np.zeros_like(fields)
    out[1:-1] = fields[2:] - fields[:-2]
    return out  # un-normalized central difference; callers carry 1/(2 hx)


def _ddy(fields):
    return np.roll(fields, -1, axis=1) - np.roll(fields, 1, axis=1)


class _ImexStepper:
    """Backward-Euler diffusion / explicit reaction+advection stepper with
    precomputed FFT-tridiagonal factorizations (fixed dt)."""

    def __init__(self, model, x, y, dt):
        self.model = model
        self.x, self.y = x, y
        self.dt = float(dt)
        self.hx = float(x[1] - x[0])
        ny = len(y)
        self.hy = float(y[1] - y[0]) if ny > 1 else 1.0
        self.ny = ny
        self.ni = len(x) - 2
        # eigenvalues of -d_yy on the periodic grid, per rfft mode
        j = np.arange(ny // 2 + 1)
        s = 4.0 * np.sin(np.pi * j / ny) ** 2 / self.hy**2 if ny > 1 else np.zeros(1)
        self.r = self.dt * model.diffusion / self.hx**2          # per field
        if ny == 1:
            # banded factor input for scipy.solve_banded (fast 1D path)
            self.banded = []
            for i in range(model.n_fields):
                ab = np.zeros((3, self.ni))
                ab[0, 1:] = -self.r[i]
                ab[1, :] = 1.0 + 2.0 * self.r[i]
                ab[2, :-1] = -self.r[i]
                self.banded.append(ab)
            return
        # Thomas factorization per field and y-mode: diag d, offdiag -r
        self.cp = []     # modified upper coefficients, shape (ni, nmodes)
        self.inv_den = []
        for i in range(model.n_fields):
            d = 1.0 + 2.0 * self.r[i] + self.dt * model.diffusion[i] * s
            cp = np.zeros((self.ni, len(s)))
            inv = np.zeros((self.ni, len(s)))
            inv[0] = 1.0 / d
            cp[0] = -self.r[i] * inv[0]
            for k in range(1, self.ni):
                inv[k] = 1.0 / (d + self.r[i] * cp[k - 1])
                cp[k] = -self.r[i] * inv[k]
            self.cp.append(cp)
            self.inv_den.append(inv)

    def zeta(self, fields, template_x):
        """Frame speed from the index-reduced phase condition."""
        lap = self._laplacian(fields)
        f = self.model.reaction(fields)
        num = -np.sum(template_x[1:-1] * (self.model.diffusion * lap + f[1:-1]))
        vx = _ddx(fields) / (2 * self.hx)
        den = np.sum(template_x[1:-1] * vx[1:-1])
        if den == 0:
            raise FreezeError("degenerate phase condition (template has no x-variation)")
        return num / den, vx, f

    def _laplacian(self, fields):
        hx2, hy2 = self.hx**2, self.hy**2
        lap = (fields[:-2] - 2 * fields[1:-1] + fields[2:]) / hx2
        if self.ny > 1:
            lap = lap + (
                np.roll(fields[1:-1], 1, axis=1)
                - 2 * fields[1:-1]
                + np.roll(fields[1:-1], -1, axis=1)
            ) / hy2
        return lap

    def step(self, fields, zeta, vx, f):
        """One IMEX step; fields and the explicit pieces at the old time."""
        rhs = fields[1:-1] + self.dt * (zeta * vx[1:-1] + f[1:-1])
        new = fields.copy()
        for i in range(self.model.n_fields):
            r = rhs[:, :, i].copy()
            r[0] += self.r[i] * fields[0, :, i]
            r[-1] += self.r[i] * fields[-1, :, i]
            if self.ny == 1:
                new[1:-1, 0, i] = scipy.linalg.solve_banded((1, 1), self.banded[i], r[:, 0])
                continue
            rh = np.fft.rfft(r, axis=1)
            # batched Thomas sweep over y-modes
            dp = np.empty_like(rh)
            dp[0] = rh[0] * self.inv_den[i][0]
            cp, inv = self.cp[i], self.inv_den[i]
            ri = self.r[i]
            for k in range(1, self.ni):
                dp[k] = (rh[k] + ri * dp[k - 1]) * inv[k]
            for k in range(self.ni - 2, -1, -1):
                dp[k] -= cp[k] * dp[k + 1]
            new[1:-1, :, i] = np.fft.irfft(dp, n=self.ny, axis=1)
        return new


def freeze_evolve(model, initial, t_end, dt, template=None, store_every=None,
                  zeta_cap=None):
    """Advance the frozen PDAE from ``initial`` (a FrontProfile2D or a bare
    fields array on the same grid) to t_end.

    Returns a FreezeHistory with zeta at every step, thinned field
    snapshots, and the final state.  Raises RunawayError if |zeta| exceeds
    ``zeta_cap`` (default: 10x the initial profile speed) and FreezeError
    on non-finite fields.
    """
    if isinstance(initial, FrontProfile2D):
        x, y, fields = initial.x, initial.y, initial.fields.copy()
        c_ref = abs(initial.speed)
    else:
        raise TypeError("initial must be a FrontProfile2D (build one with plant_front)")
    if zeta_cap is None:
        zeta_cap = 10.0 * max(c_ref, 0.1)

    stepper = _ImexStepper(model, x, y, dt)
    template = fields.copy() if template is None else template
    template_x = _ddx(template) / (2 * stepper.hx)

    n_steps = int(round(t_end / dt))
    if store_every is None:
        store_every = max(1, n_steps // 10)
    times = np.empty(n_steps)
    zetas = np.empty(n_steps)
    hist = FreezeHistory(times, zetas, template)
    zeta = 0.0
    for k in range(n_steps):
        zeta, vx, f = stepper.zeta(fields, template_x)
        if not np.isfinite(zeta) or abs(zeta) > zeta_cap:
            raise RunawayError(f"zeta = {zeta} at t = {k * dt}")
        fields = stepper.step(fields, zeta, vx, f)
        if not np.isfinite(fields).all():
            raise FreezeError(f"non-finite fields at t = {(k + 1) * dt}")
        times[k] = (k + 1) * dt
        zetas[k] = zeta
        if k % store_every == 0:
            hist.snapshots.append(FreezeState(times[k], fields.copy(), zeta))
    hist.final = FreezeState(times[-1] if n_steps else 0.0, fields, zeta)
    return hist


def plant_front(model, profile1d, x, y, center=0.0, wrinkle_amplitude=0.0,
                wrinkle_mode=1):
    """Embed a 1D front profile into the 2D grid, optionally modulating the
    front position by wrinkle_amplitude * cos(2 pi wrinkle_mode y / L).

    Returns a FrontProfile2D tagged 'seed' carrying the planar speed.
    """
    L = (y[1] - y[0]) * len(y) if len(y) > 1 else 0.0
    shift = np.zeros(len(y))
    if wrinkle_amplitude != 0.0 and len(y) > 1:
        shift = wrinkle_amplitude * np.cos(2 * np.pi * wrinkle_mode * y / L)
    fields = np.empty((len(x), len(y), model.n_fields))
    for i in range(model.n_fields):
        lo, hi = model.left_state[i], model.right_state[i]
        for j, s in enumerate(shift):
            xi = np.clip(x - center - s, profile1d.x[0], profile1d.x[-1])
            fields[:, j, i] = np.interp(xi, profile1d.x, profile1d.fields[:, i])
        fields[0, :, i] = lo
        fields[-1, :, i] = hi
    return FrontProfile2D(x.copy(), y.copy(), fields, profile1d.speed,
                          model.delta, model, provenance="seed")


def _assemble_linearization(model, x, y, fields, theta, eta=0.0):
    """Sparse matrix of B lap + theta d_x + eta d_y + DF(U) on interior-x
    nodes (Dirichlet in x, periodic in y), plus the flattened d_x and d_y
    of the current fields (border columns for the Newton system).
    """
    nx, ny, nf = fields.shape
    ni = nx - 2
    hx = x[1] - x[0]
    hy = (y[1] - y[0]) if ny > 1 else 1.0
    n_unknown = nf * ni * ny

    iy = np.arange(ny)
    ixg, iyg = np.meshgrid(np.arange(ni), iy, indexing="ij")

    def node(i_field, ix, iy_):
        return (i_field * ni + ix) * ny + iy_

    J = model.jacobian(fields[1:-1])
    rows, cols, vals = [], [], []
    for i in range(nf):
        b = model.diffusion[i]
        diag_lap = -2 * b / hx**2 + (-2 * b / hy**2 if ny > 1 else 0.0)
        me = node(i, ixg, iyg)
        rows.append(me); cols.append(me)
        vals.append(np.full((ni, ny), diag_lap) + J[:, :, i, i])
        for j in range(nf):
            if j != i:
                rows.append(me); cols.append(node(j, ixg, iyg))
                vals.append(J[:, :, i, j])
        # x neighbours (couplings to the clamped boundary planes drop out)
        left = ixg >= 1
        rows.append(me[left]); cols.append(node(i, ixg - 1, iyg)[left])
        vals.append(np.full(left.sum(), b / hx**2 - theta / (2 * hx)))
        right = ixg <= ni - 2
        rows.append(me[right]); cols.append(node(i, ixg + 1, iyg)[right])
        vals.append(np.full(right.sum(), b / hx**2 + theta / (2 * hx)))
        if ny > 1:
            rows.append(me); cols.append(node(i, ixg, (iyg + 1) % ny))
            vals.append(np.full((ni, ny), b / hy**2 + eta / (2 * hy)))
            rows.append(me); cols.append(node(i, ixg, (iyg - 1) % ny))
            vals.append(np.full((ni, ny), b / hy**2 - eta / (2 * hy)))
    rows = np.concatenate([np.ravel(r) for r in rows])
    cols = np.concatenate([np.ravel(c) for c in cols])
    vals = np.concatenate([np.ravel(v) for v in vals])
    A = sp.csc_matrix((vals, (rows, cols)), shape=(n_unknown, n_unknown))

    vx = (_ddx(fields) / (2 * hx))[1:-1]
    vy = (_ddy(fields) / (2 * hy))[1:-1] if ny > 1 else np.zeros_like(vx)
    flat = lambda a: np.moveaxis(a, 2, 0).reshape(-1)
    return A, flat(vx), flat(vy)


def _interior_residual(model, x, y, U, theta, eta=0.0):
    hx = x[1] - x[0]
    hy = (y[1] - y[0]) if len(y) > 1 else 1.0
    lap = (U[:-2] - 2 * U[1:-1] + U[2:]) / hx**2
    if len(y) > 1:
        lap = lap + (np.roll(U[1:-1], 1, 1) - 2 * U[1:-1] + np.roll(U[1:-1], -1, 1)) / hy**2
    vx = (_ddx(U) / (2 * hx))[1:-1]
    res = model.diffusion * lap + theta * vx + model.reaction(U[1:-1])
    if eta != 0.0 and len(y) > 1:
        res = res + eta * (_ddy(U) / (2 * hy))[1:-1]
    return res


def stationary_residual(model, profile, theta=None, eta=0.0):
    """Interior residual of B lap(U) + theta U_x + eta U_y + F(U)."""
    theta = profile.speed if theta is None else theta
    return _interior_residual(model, profile.x, profile.y, profile.fields, theta, eta)


def newton_refine(model, guess, template=None, tol=1e-10, max_iter=25,
                  pin_transverse=None, reuse_jacobian=True):
    """Polish a front guess to a steady state of the frozen system.

    Solves the bordered system (stationary PDE + phase condition) for the
    fields and the frame speed theta.  For genuinely two-dimensional
    fronts the y-translation symmetry makes the single-bordered matrix
    singular, so a second (transverse) phase condition and drift speed
    eta are appended; eta converges to zero for reflection-symmetric
    fronts.  ``pin_transverse`` forces that choice (default: automatic,
    based on the transverse variation of the guess).

    With ``reuse_jacobian`` the sparse factorization is kept across
    iterations while the residual keeps contracting well (the
    factorization dominates the cost on large grids) and refreshed
    whenever contraction stalls.

    Raises NewtonError with the residual history on failure.
    """
    x, y, U = guess.x, guess.y, guess.fields.copy()
    nx, ny, nf = U.shape
    ni = nx - 2
    hx = x[1] - x[0]
    hy = (y[1] - y[0]) if ny > 1 else 1.0
    theta = guess.speed
    eta = 0.0
    T = guess.fields.copy() if template is None else template
    Tx = (_ddx(T) / (2 * hx))[1:-1]
    Ty = (_ddy(T) / (2 * hy))[1:-1] if ny > 1 else np.zeros_like(Tx)
    w = hx * hy
    if pin_transverse is None:
        pin_transverse = ny > 1 and float(np.abs(Ty).max()) > 1e-8

    flat = lambda a: np.moveaxis(a, 2, 0).reshape(-1)
    history = []
    lu = None
    for _ in range(max_iter):
        res = _interior_residual(model, x, y, U, theta, eta)
        p_x = float(np.sum(Tx * (T[1:-1] - U[1:-1])) * w)
        rhs = [-flat(res), [-p_x]]
        if pin_transverse:
            p_y = float(np.sum(Ty * (T[1:-1] - U[1:-1])) * w)
            rhs.append([-p_y])
        rhs = np.concatenate([np.asarray(r, dtype=float).ravel() for r in rhs])
        rnorm = float(np.abs(rhs).max())
        history.append(rnorm)
        if rnorm < tol:
            return FrontProfile2D(x, y, U, theta, model.delta, model, "newton")
        stalled = len(history) >= 2 and rnorm > 0.3 * history[-2]
        if lu is None or stalled or not reuse_jacobian:
            A, vx_col, vy_col = _assemble_linearization(model, x, y, U, theta, eta)
            tx_row = -flat(Tx * w)
            blocks = [[A, vx_col[:, None]], [tx_row[None, :], None]]
            if pin_transverse:
                ty_row = -flat(Ty * w)
                blocks[0].append(vy_col[:, None])
                blocks[1].append(np.zeros((1, 1)))
                blocks.append([ty_row[None, :], np.zeros((1, 1)), np.zeros((1, 1))])
            M = sp.bmat(blocks, format="csc")
            lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A")
        dz = lu.solve(rhs)
        nu = nf * ni * ny
        U[1:-1] += np.moveaxis(dz[:nu].reshape(nf, ni, ny), 0, 2)
        theta += dz[nu]
        if pin_transverse:
            eta += dz[nu + 1]
    raise NewtonError(history)


def continue_in_delta(model_factory, start, delta_target, steps=5,
                      min_step=1e-4, newton_kwargs=None):
    """Natural continuation of a converged front in the parameter delta.

    Steps from start.delta to delta_target in ``steps`` increments,
    Newton-refining at each value with the previous solution as guess and
    template; the increment halves on Newton failure.  Raises
    ContinuationStallError below ``min_step``.
    """
    newton_kwargs = newton_kwargs or {}
    current = start
    d0 = float(start.delta)
    if delta_target == d0:
        return start
    dstep = (delta_target - d0) / steps
    d = d0
    while abs(d - delta_target) > 1e-14:
        dstep = np.sign(delta_target - d) * min(abs(dstep), abs(delta_target - d))
        d_try = d + dstep
        model = model_factory(d_try)
        guess = FrontProfile2D(current.x, current.y, current.fields.copy(),
                               current.speed, d_try, model, current.provenance)
        try:
            refined = newton_refine(model, guess, **newton_kwargs)
        except NewtonError:
            if abs(dstep) / 2 < min_step:
                raise ContinuationStallError(
                    f"continuation stalled at delta = {d} (step {dstep})"
                )
            dstep /= 2
            continue
        current = FrontProfile2D(refined.x, refined.y, refined.fields,
                                 refined.speed, d_try, model,
                                 f"continued-from {d0:g}")
        d = d_try
    return current


def save_front2d(profile, path):
    """Write a restart archive (.npz, bit-exact round-trip) plus a JSON
    metadata sidecar and a CSV field dump."""
    path = Path(path)
    np.savez(
        path.with_suffix(".npz"),
        x=profile.x, y=profile.y, fields=profile.fields,
        speed=profile.speed, delta=profile.delta,
        provenance=np.array(profile.provenance),
    )
    meta = {
        "c": profile.speed,
        "delta": profile.delta,
        "grid": [len(profile.x), len(profile.y)],
        "provenance": profile.provenance,
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    with open(path.with_suffix(".csv"), "w") as fh:
        fh.write("# c = %.9g, delta = %.9g\n" % (profile.speed, profile.delta))
        fh.write("x,y," + ",".join(f"f{i}" for i in range(profile.fields.shape[2])) + "\n")
        for i, xv in enumerate(profile.x):
            for j, yv in enumerate(profile.y):
                vals = ",".join("%.9g" % v for v in profile.fields[i, j])
                fh.write("%.9g,%.9g,%s\n" % (xv, yv, vals))
    return path.with_suffix(".npz")


def load_front2d(path, model_factory=cubic_autocatalysis):
    """Load a restart archive written by save_front2d."""
    with np.load(Path(path).with_suffix(".npz")) as npz:
        delta = float(npz["delta"])
        model = model_factory(delta)
        return FrontProfile2D(
            npz["x"].copy(), npz["y"].copy(), npz["fields"].copy(),
            float(npz["speed"]), delta, model, str(npz["provenance"]),
        )
