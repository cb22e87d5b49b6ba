"""Transverse Fourier projection of the linearized front operator.

Projecting the spectral problem for B lap + c d_x + DF(U_c) onto the
transverse Fourier modes e^{2 pi i k y / L}, |k| <= K, turns it into one
large first-order ODE system in x,

    Y' = A(x; lambda) Y,     A = [[0, I], [A3(x; lambda), A4]],

of size n = 2 N (2K+1).  A4 is block-diagonal with -c B^{-1} per mode;
A3 couples modes through the Fourier coefficients D_k(x) of the Jacobian
along y (block Toeplitz in k - nu) and carries the lambda and kappa^2
shifts on its diagonal blocks.  Mode k has transverse wavenumber
2 pi k / L.

A ProjectedSystem stores the lambda-independent data: cubic splines of
the retained D_k(x) (modes up to |k| = 2K are needed by the Toeplitz
blocks), the far-field Jacobians, and the model constants.  It is
immutable, picklable, and serializable, so Evans sweeps can be re-run
without recomputing the front.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import numkit
from .front1d import FrontProfile1D
from .front2d import FrontProfile2D


class AliasingError(Exception):
    """The transverse grid cannot represent the requested mode cut-off."""


class ModeSplitError(Exception):
    """A far-field mode block failed to split into N unstable and N stable
    directions (spectral parameter in or near the essential spectrum)."""

    def __init__(self, mode, inner):
        self.mode = mode
        self.inner = inner
        super().__init__(f"boundary subspace split failed for mode k={mode}: {inner}")


@dataclass
class ProjectedSystem:
    """Lambda-independent data of the Fourier-projected spectral problem."""

    K: int
    L: float
    kappas: np.ndarray          # (2K+1,) transverse wavenumbers of retained modes
    b: np.ndarray               # diffusion diagonal (N,)
    c: float                    # frame speed
    delta: float
    x_nodes: np.ndarray         # (nx,)
    modes: np.ndarray           # (nx, 4K+1, N, N) complex, index j <-> k = j - 2K
    df_left: np.ndarray         # far-field Jacobian at x -> -inf
    df_right: np.ndarray
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.kappas = np.asarray(self.kappas, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self._spline = CubicSpline(self.x_nodes, self.modes, axis=0, bc_type="natural")

    @property
    def n_fields(self):
        return len(self.b)

    @property
    def n_modes(self):
        return len(self.kappas)

    @property
    def n(self):
        return 2 * self.n_fields * self.n_modes

    @property
    def m(self):
        return self.n_fields * self.n_modes

    @property
    def x_span(self):
        return float(self.x_nodes[0]), float(self.x_nodes[-1])

    def d_modes_at(self, x):
        """Spline-interpolated Jacobian modes at x, shape (4K+1, N, N)."""
        x0, x1 = self.x_span
        if not (x0 <= x <= x1):
            raise ValueError(f"x = {x} outside the spline domain [{x0}, {x1}]")
        return self._spline(x)

    def mode_subsystem(self, k):
        """The decoupled 4x4 subsystem of transverse mode k.

        Only meaningful for planar fronts (all D_k with k != 0 vanish);
        the subsystem keeps the k = 0 Jacobian and the single wavenumber
        2 pi k / L.
        """
        N = self.n_fields
        center = self.modes.shape[1] // 2
        sub = self.modes[:, center : center + 1].copy()
        return ProjectedSystem(
            K=0, L=self.L, kappas=np.array([2 * np.pi * k / self.L]),
            b=self.b, c=self.c, delta=self.delta,
            x_nodes=self.x_nodes, modes=sub,
            df_left=self.df_left, df_right=self.df_right,
        )

    def planarity_defect(self):
        """Largest off-center mode magnitude (zero for a planar front)."""
        center = self.modes.shape[1] // 2
        off = np.delete(self.modes, center, axis=1)
        return float(np.abs(off).max()) if off.size else 0.0


def build_projected_system(front, K, L=None):
    """Fourier-project the Jacobian along the front and spline it in x.

    ``front`` is a FrontProfile1D (planar: only the k = 0 mode survives;
    the transverse period L must be supplied) or a FrontProfile2D (modes
    computed by FFT along y; requires n_y >= 4K + 2 so that modes up to
    2K are alias-free).
    """
    model = front.model
    N = model.n_fields
    if isinstance(front, FrontProfile1D):
        if L is None:
            if K != 0:
                raise ValueError("planar projection with K > 0 needs the period L")
            L = 1.0
        dm = np.zeros((len(front.x), 4 * K + 1, N, N), dtype=np.complex128)
        dm[:, 2 * K] = model.jacobian(front.fields)
    elif isinstance(front, FrontProfile2D):
        ny = len(front.y)
        if ny < 4 * K + 2:
            raise AliasingError(f"n_y = {ny} < 4K + 2 = {4 * K + 2}")
        if not np.isfinite(front.fields).all():
            raise ValueError("front fields contain non-finite values")
        L = front.period
        dfs = model.jacobian(front.fields)              # (nx, ny, N, N)
        dhat = np.fft.fft(dfs, axis=1) / ny
        ks = np.arange(-2 * K, 2 * K + 1)
        dm = np.ascontiguousarray(dhat[:, ks % ny])
        # rephase the DFT (taken against the grid index) to physical y, so
        # D_k is the coefficient of e^{2 pi i k y / L}
        phase = np.exp(-2j * np.pi * ks * front.y[0] / L)
        dm *= phase[np.newaxis, :, np.newaxis, np.newaxis]
    else:
        raise TypeError("front must be FrontProfile1D or FrontProfile2D")
    kappas = 2 * np.pi * np.arange(-K, K + 1) / L
    return ProjectedSystem(
        K=K, L=float(L), kappas=kappas, b=model.diffusion, c=front.speed,
        delta=front.delta, x_nodes=np.asarray(front.x, dtype=float), modes=dm,
        df_left=np.asarray(model.jacobian(model.left_state), dtype=float),
        df_right=np.asarray(model.jacobian(model.right_state), dtype=float),
    )


def _a_blocks(sys, dmodes, lam):
    """A3 (m x m) and the diagonal of A4 (m,) from given Jacobian modes."""
    N, M = sys.n_fields, sys.n_modes
    K2 = (dmodes.shape[0] - 1) // 2
    binv = 1.0 / sys.b
    # block-Toeplitz convolution part: block (p, q) = -B^{-1} D_{k_p - k_q}
    pq = np.arange(M)
    tidx = pq[:, None] - pq[None, :] + K2
    blocks = -(binv[:, None] * dmodes)[tidx]            # (M, M, N, N)
    # diagonal shift E_k = lambda B^{-1} + kappa_k^2 I
    ee = lam * binv[None, :] + (sys.kappas**2)[:, None]  # (M, N)
    a3 = np.transpose(blocks, (0, 2, 1, 3)).reshape(sys.m, sys.m).copy()
    diag = np.arange(sys.m)
    a3[diag, diag] += ee.reshape(-1)
    a4_diag = np.tile(-sys.c * binv, M)
    return a3, a4_diag


def assemble_A(sys, x, lam):
    """The full n x n coefficient matrix A(x; lambda)."""
    dm = sys.d_modes_at(x)
    return _assemble_from_modes(sys, dm, lam)


def a_blocks(sys, x, lam):
    """The lower blocks of A(x; lambda): A3 (m x m) and diag(A4) (m,).

    The upper blocks are constant ([0, I]); the subspace flows only need
    these two, which avoids assembling the full matrix in inner loops.
    """
    return _a_blocks(sys, sys.d_modes_at(x), lam)


def far_field_A(sys, side, lam):
    """A(-inf; lambda) or A(+inf; lambda) from the far-field Jacobian."""
    df = sys.df_left if side == "left" else sys.df_right
    dm = np.zeros((4 * sys.K + 1, sys.n_fields, sys.n_fields), dtype=np.complex128)
    dm[2 * sys.K] = df
    return _assemble_from_modes(sys, dm, lam)


def _assemble_from_modes(sys, dmodes, lam):
    m = sys.m
    a3, a4_diag = _a_blocks(sys, dmodes, lam)
    a = np.zeros((2 * m, 2 * m), dtype=np.complex128)
    a[:m, m:] = np.eye(m)
    a[m:, :m] = a3
    a[m + np.arange(m), m + np.arange(m)] = a4_diag
    return a


def _mode_far_matrix(sys, kappa, lam, side):
    """The 2N x 2N far-field block of a single transverse mode."""
    N = sys.n_fields
    df = sys.df_left if side == "left" else sys.df_right
    binv = 1.0 / sys.b
    a3 = -(binv[:, None] * df).astype(np.complex128)
    a3[np.arange(N), np.arange(N)] += lam * binv + kappa**2
    out = np.zeros((2 * N, 2 * N), dtype=np.complex128)
    out[:N, N:] = np.eye(N)
    out[N:, :N] = a3
    out[N + np.arange(N), N + np.arange(N)] = -sys.c * binv
    return out


def _triangular_mode_basis(sys, kappa, lam, side):
    """Closed-form mode basis vectors at one far field (N = 2 only).

    Works when the far-field Jacobian is triangular, which decouples the
    quadratic characteristic equations per component; the principal square
    root makes every vector analytic in lambda across the region of
    interest (and continues the basis analytically through the weak edge
    of the essential spectrum, which the real-axis scans rely on).

    Returns (unstable, stable): 2N x N column matrices.
    """
    if sys.n_fields != 2:
        raise NotImplementedError("closed-form basis implemented for N = 2")
    df = sys.df_left if side == "left" else sys.df_right
    b1, b2 = sys.b
    c = sys.c
    a11 = (lam - df[0, 0]) / b1 + kappa**2
    a12 = -df[0, 1] / b1
    a21 = -df[1, 0] / b2
    a22 = (lam - df[1, 1]) / b2 + kappa**2
    if a12 != 0 and a21 != 0:
        raise NotImplementedError("far-field Jacobian is not triangular")

    def branch(a_own, b_own, sign):
        return -c / (2 * b_own) + sign * np.sqrt((c / (2 * b_own)) ** 2 + a_own + 0j)

    cols = {+1: [], -1: []}
    for sign in (+1, -1):
        # component-1 branch; couples into component 2 when a21 != 0
        mu = branch(a11, b1, sign)
        if a21 == 0:
            cols[sign].append(np.array([1.0, 0.0, mu, 0.0], dtype=complex))
        else:
            # second components scaled by nu to avoid the nu = 0 singularity
            nu = a22 - (c / b2) * mu - mu**2
            cols[sign].append(np.array([nu, -a21, mu * nu, -mu * a21], dtype=complex))
        # component-2 branch
        mu = branch(a22, b2, sign)
        if a12 == 0:
            cols[sign].append(np.array([0.0, 1.0, 0.0, mu], dtype=complex))
        else:
            nu = a11 - (c / b1) * mu - mu**2
            cols[sign].append(np.array([-a12, nu, -mu * a12, mu * nu], dtype=complex))
    unstable = np.stack(cols[+1], axis=1)
    stable = np.stack(cols[-1], axis=1)
    return unstable, stable


def far_field_decay_rates(sys, kappa, lam, side):
    """Spatial eigenvalues mu at one far field (N = 2, triangular case).

    Returns (unstable, stable): arrays of the two mu with positive and
    negative real part (analytic branches, matching the closed-form
    eigenvectors of _triangular_mode_basis)."""
    if sys.n_fields != 2:
        raise NotImplementedError("decay rates implemented for N = 2")
    df = sys.df_left if side == "left" else sys.df_right
    b1, b2 = sys.b
    c = sys.c
    a11 = (lam - df[0, 0]) / b1 + kappa**2
    a22 = (lam - df[1, 1]) / b2 + kappa**2
    out = {}
    for sign in (+1, -1):
        out[sign] = np.array([
            -c / (2 * b1) + sign * np.sqrt((c / (2 * b1)) ** 2 + a11 + 0j),
            -c / (2 * b2) + sign * np.sqrt((c / (2 * b2)) ** 2 + a22 + 0j),
        ])
    return out[+1], out[-1]


@dataclass
class BoundarySubspaces:
    """Bases of the boundary subspaces: y_minus spans the unstable
    subspace of A(-inf; lambda) (n x m), y_plus the stable subspace of
    A(+inf; lambda) (n x (n-m))."""

    y_minus: np.ndarray
    y_plus: np.ndarray
    lam: complex
    method: str


def boundary_subspaces(sys, lam, method="auto", gap_tol=1e-10):
    """Construct the far-field boundary subspace bases, mode by mode.

    ``method``:
      'closed'  - closed-form eigenvectors (analytic in lambda; default
                  when the far-field Jacobians are triangular),
      'numeric' - dense eigendecomposition of each far-field mode block,
                  split by the sign of Re(mu),
      'auto'    - closed form when available, else numeric.

    The numeric path raises ModeSplitError (wrapping the spectral-gap
    error and naming the offending mode) when lambda is not to the right
    of the continuous spectrum.
    """
    lam = complex(lam)
    N, M = sys.n_fields, sys.n_modes

    def closed(kappa, side):
        return _triangular_mode_basis(sys, kappa, lam, side)

    def numeric(kappa, side):
        mat = _mode_far_matrix(sys, kappa, lam, side)
        try:
            unstable, stable = numkit.eig_split(mat, gap_tol=gap_tol)
        except numkit.SpectralGapError as err:
            raise ModeSplitError(_mode_of(sys, kappa), err) from err
        if unstable.shape[1] != N or stable.shape[1] != N:
            raise ModeSplitError(
                _mode_of(sys, kappa),
                f"expected {N}+{N} split, got {unstable.shape[1]}+{stable.shape[1]}",
            )
        return unstable, stable

    if method == "auto":
        try:
            _triangular_mode_basis(sys, sys.kappas[0], lam, "left")
            picker, method = closed, "closed"
        except NotImplementedError:
            picker, method = numeric, "numeric"
    elif method == "closed":
        picker = closed
    elif method == "numeric":
        picker = numeric
    else:
        raise ValueError(f"unknown method {method!r}")

    y_minus = np.zeros((sys.n, sys.m), dtype=np.complex128)
    y_plus = np.zeros((sys.n, sys.n - sys.m), dtype=np.complex128)
    for j, kappa in enumerate(sys.kappas):
        wu, _ = picker(kappa, "left")
        _, ws = picker(kappa, "right")
        rows = np.r_[j * N : (j + 1) * N, sys.m + j * N : sys.m + (j + 1) * N]
        y_minus[rows, j * N : (j + 1) * N] = wu
        y_plus[rows, j * N : (j + 1) * N] = ws
    return BoundarySubspaces(y_minus, y_plus, lam, method)


def _mode_of(sys, kappa):
    return int(round(kappa * sys.L / (2 * np.pi)))


def convolution_jacobian_modes(front, K):
    """Jacobian Fourier modes via mode-space convolution of the fields.

    Independent route to the same coefficients as build_projected_system
    (which differentiates pointwise and FFTs): for the cubic autocatalysis
    Jacobian the entries are quadratic monomials, so their transverse
    Fourier coefficients are circular convolutions of the field mode
    sequences.  Used as a cross-check of the FFT path's conventions.
    """
    model = front.model
    from .model import _cubic_jacobian
    if model.jacobian is not _cubic_jacobian:
        raise NotImplementedError("convolution route implemented for cubic autocatalysis")
    u = front.fields[:, :, 0]
    v = front.fields[:, :, 1]
    ny = u.shape[1]
    uh = np.fft.fft(u, axis=1) / ny
    vh = np.fft.fft(v, axis=1) / ny
    ell = np.arange(ny)
    circ = (ell[:, None] - ell[None, :]) % ny      # index of (k - l) mod ny

    def conv(ah, bh):
        # full circular convolution, summed explicitly over all ny modes
        return np.einsum("xl,xkl->xk", ah, bh[:, circ])

    vv = conv(vh, vh)
    uv = conv(uh, vh)
    ks = np.arange(-2 * K, 2 * K + 1)
    phase = np.exp(-2j * np.pi * ks * front.y[0] / front.period)
    out = np.empty((u.shape[0], 4 * K + 1, 2, 2), dtype=np.complex128)
    out[:, :, 0, 0] = -vv[:, ks % ny]
    out[:, :, 0, 1] = -2.0 * uv[:, ks % ny]
    out[:, :, 1, 0] = vv[:, ks % ny]
    out[:, :, 1, 1] = 2.0 * uv[:, ks % ny]
    return out * phase[np.newaxis, :, np.newaxis, np.newaxis]


def save_projected_system(sys, path):
    """Serialize to a single .npz archive (bit-exact round trip)."""
    path = Path(path).with_suffix(".npz")
    np.savez(
        path,
        K=sys.K, L=sys.L, kappas=sys.kappas, b=sys.b, c=sys.c,
        delta=np.nan if sys.delta is None else sys.delta,
        x_nodes=sys.x_nodes, modes=sys.modes,
        df_left=sys.df_left, df_right=sys.df_right,
    )
    return path


def load_projected_system(path):
    with np.load(Path(path).with_suffix(".npz")) as z:
        delta = float(z["delta"])
        return ProjectedSystem(
            K=int(z["K"]), L=float(z["L"]), kappas=z["kappas"].copy(),
            b=z["b"].copy(), c=float(z["c"]),
            delta=None if np.isnan(delta) else delta,
            x_nodes=z["x_nodes"].copy(), modes=z["modes"].copy(),
            df_left=z["df_left"].copy(), df_right=z["df_right"].copy(),
        )
