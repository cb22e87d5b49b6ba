"""Planar (one-dimensional) travelling fronts and continuous spectrum.

The planar front solver computes the minimal-speed front selected by the
parabolic dynamics: a short time evolution in the freezing frame brings a
tanh-shaped guess into the attracting neighbourhood of that front (Newton
alone can land on faster, non-selected fronts), and a bordered Newton
solve then converges profile and speed together to high accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
import json

import numpy as np

from .model import ModelSpec, cubic_autocatalysis
from . import front2d


class DomainTooShortError(Exception):
    """The requested domain does not contain the front's far-field decay."""


@dataclass
class FrontProfile1D:
    """A planar travelling front: uniform x grid, field values, speed."""

    x: np.ndarray
    fields: np.ndarray           # (n_x, N)
    speed: float
    delta: float
    model: ModelSpec

    def residual(self):
        """Discrete travelling-wave residual on interior nodes."""
        prof = self._as_2d()
        return front2d.stationary_residual(self.model, prof)

    def _as_2d(self):
        return front2d.FrontProfile2D(
            self.x, np.zeros(1), self.fields[:, np.newaxis, :],
            self.speed, self.delta, self.model, "planar",
        )


def _tanh_guess(model, x, width=2.0, center=0.0):
    s = 0.5 * (1.0 + np.tanh((x - center) / width))
    left, right = model.left_state, model.right_state
    return left[np.newaxis, :] + s[:, np.newaxis] * (right - left)[np.newaxis, :]


def solve_planar_front(model, domain=(-150.0, 150.0), n_x=3001, tol=1e-10,
                       evolve_time=160.0, dt=0.2, guess_width=2.0,
                       max_newton=25):
    """Compute the minimal-speed planar front of ``model`` on ``domain``.

    Returns a FrontProfile1D with Newton-converged profile and speed
    (bordered residual below ``tol``).  Raises DomainTooShortError when
    the tanh initial guess cannot meet the far-field states to 1e-2, and
    front2d.NewtonError if the polish step fails.
    """
    x = np.linspace(domain[0], domain[1], n_x)
    guess = _tanh_guess(model, x, width=guess_width)
    bres = max(
        np.abs(guess[0] - model.left_state).max(),
        np.abs(guess[-1] - model.right_state).max(),
    )
    if bres > 1e-2:
        raise DomainTooShortError(
            f"initial guess boundary residual {bres:.2e} exceeds 1e-2"
        )
    guess[0] = model.left_state
    guess[-1] = model.right_state

    seed = front2d.FrontProfile2D(
        x, np.zeros(1), guess[:, np.newaxis, :], 0.0, model.delta, model, "seed"
    )
    hist = front2d.freeze_evolve(model, seed, evolve_time, dt, zeta_cap=50.0)
    evolved = front2d.FrontProfile2D(
        x, np.zeros(1), hist.final.fields, hist.final.zeta, model.delta, model
    )
    refined = front2d.newton_refine(model, evolved, tol=tol, max_iter=max_newton)
    return FrontProfile1D(x, refined.fields[:, 0, :], refined.speed,
                          model.delta, model)


@dataclass
class SpectrumCurve:
    """One parametric family of the continuous spectrum."""

    diffusion: float
    offset: float            # far-field Jacobian diagonal entry
    multiplicity: int
    mu: np.ndarray
    values: np.ndarray       # lambda(mu), complex

    def real_cap(self):
        return float(self.values.real.max())


def continuous_spectrum_curves(model, c, k=0, L=1.0, mu=None):
    """Continuous-spectrum curves for transverse mode ``k`` of period L.

    Mode k carries transverse wavenumber 2 pi k / L.  Each far-field
    state contributes one parabolic curve per field,

        lambda(mu) = -b (kappa^2 + mu^2) + i c mu + d,

    where b is the field's diffusion coefficient and d the corresponding
    diagonal entry of the far-field Jacobian (valid because the far-field
    Jacobians are triangular for the models handled here).  Coinciding
    curves are merged with their multiplicity.
    """
    if mu is None:
        mu = np.linspace(-2.0, 2.0, 801)
    mu = np.asarray(mu, dtype=float)
    kappa = 2.0 * np.pi * k / L
    pairs = []
    for state in (model.left_state, model.right_state):
        df = model.jacobian(state)
        if np.abs(np.triu(df, 1)).max() > 1e-12 and np.abs(np.tril(df, -1)).max() > 1e-12:
            raise NotImplementedError(
                "continuous_spectrum_curves needs a triangular far-field Jacobian"
            )
        for i in range(model.n_fields):
            pairs.append((float(model.diffusion[i]), float(df[i, i])))
    merged = []
    for b, d in pairs:
        for entry in merged:
            if abs(entry[0] - b) < 1e-12 and abs(entry[1] - d) < 1e-12:
                entry[2] += 1
                break
        else:
            merged.append([b, d, 1])
    curves = []
    for b, d, mult in merged:
        lam = -b * (kappa**2 + mu**2) + 1j * c * mu + d
        curves.append(SpectrumCurve(b, d, mult, mu, lam))
    return curves


def is_right_of_continuous_spectrum(model, c, kappas, lam, margin=0.0):
    """True when ``lam`` lies strictly right of every continuous-spectrum
    curve for all the transverse wavenumbers in ``kappas``.

    Uses the closed-form curve shape: on the curve with parameters (b, d),
    Im lambda = c mu, so the curve point sharing Im(lam) has real part
    -b (kappa^2 + mu^2) + d with mu = Im(lam) / c.
    """
    lam = complex(lam)
    if c == 0:
        raise ValueError("requires a nonzero frame speed")
    mu = lam.imag / c
    for kappa in np.atleast_1d(kappas):
        for state in (model.left_state, model.right_state):
            df = model.jacobian(state)
            for i in range(model.n_fields):
                edge = -model.diffusion[i] * (kappa**2 + mu**2) + df[i, i]
                if lam.real <= edge + margin:
                    return False
    return True


def save_front_csv(profile, path):
    """CSV export (columns x, u, v, ...) with speed/delta header and a
    JSON metadata sidecar; 9 significant digits, byte-deterministic."""
    path = Path(path)
    n_fields = profile.fields.shape[1]
    names = ["u", "v"] if n_fields == 2 else [f"f{i}" for i in range(n_fields)]
    with open(path, "w") as fh:
        fh.write("# c = %.9g, delta = %.9g\n" % (profile.speed, profile.delta))
        fh.write("x," + ",".join(names) + "\n")
        for i, xv in enumerate(profile.x):
            fh.write("%.9g,%s\n" % (xv, ",".join("%.9g" % v for v in profile.fields[i])))
    meta = {
        "c": profile.speed,
        "delta": profile.delta,
        "n_x": len(profile.x),
        "domain": [float(profile.x[0]), float(profile.x[-1])],
    }
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def load_front_csv(path, model_factory=cubic_autocatalysis):
    """Load a profile written by save_front_csv."""
    path = Path(path)
    with open(path) as fh:
        header = fh.readline()
        fh.readline()
        data = np.loadtxt(fh, delimiter=",")
    parts = header.strip("#\n ").split(",")
    c = float(parts[0].split("=")[1])
    delta = float(parts[1].split("=")[1])
    model = model_factory(delta)
    return FrontProfile1D(data[:, 0], data[:, 1:], c, delta, model)
