"""Shared fixtures.

The planar and wrinkled fronts are expensive session fixtures; they are
cached on disk under .cache/ (keyed by their parameters and a cache
version) so iterating on the test suite does not recompute them.  Set
FRONTSPEC_CACHE=0 to force recomputation.
"""

import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from frontspec.model import cubic_autocatalysis
from frontspec import front1d, front2d

CACHE_VERSION = "3"
CACHE_DIR = Path(__file__).resolve().parent.parent / ".cache"


def _cache_enabled():
    return os.environ.get("FRONTSPEC_CACHE", "1") != "0"


def cached_planar(delta, domain=(-150.0, 150.0), n_x=3001):
    tag = f"front1d_v{CACHE_VERSION}_d{delta:g}_{domain[0]:g}_{domain[1]:g}_{n_x}"
    path = CACHE_DIR / f"{tag}.npz"
    if _cache_enabled() and path.exists():
        with np.load(path) as z:
            model = cubic_autocatalysis(float(z["delta"]))
            return front1d.FrontProfile1D(z["x"].copy(), z["fields"].copy(),
                                          float(z["speed"]), float(z["delta"]),
                                          model)
    model = cubic_autocatalysis(delta)
    prof = front1d.solve_planar_front(model, domain, n_x)
    if _cache_enabled():
        CACHE_DIR.mkdir(exist_ok=True)
        np.savez(path, x=prof.x, fields=prof.fields, speed=prof.speed,
                 delta=prof.delta)
    return prof


def wrinkled_grid():
    x = np.linspace(-150.0, 150.0, 301)
    y = -60.0 + 0.5 * np.arange(240)
    return x, y


def cached_wrinkled25():
    tag = f"front2d_v{CACHE_VERSION}_d2.5"
    path = CACHE_DIR / f"{tag}.npz"
    if _cache_enabled() and path.exists():
        return front2d.load_front2d(path)
    model = cubic_autocatalysis(2.5)
    planar = cached_planar(2.5)
    x, y = wrinkled_grid()
    seed = front2d.plant_front(model, planar, x, y, center=50.0,
                               wrinkle_amplitude=2.0, wrinkle_mode=1)
    hist = front2d.freeze_evolve(model, seed, t_end=100.0, dt=0.25)
    evolved = front2d.FrontProfile2D(x, y, hist.final.fields, hist.final.zeta,
                                     2.5, model, "frozen")
    refined = front2d.newton_refine(model, evolved)
    if _cache_enabled():
        CACHE_DIR.mkdir(exist_ok=True)
        front2d.save_front2d(refined, path)
    return refined


def cached_wrinkled30():
    tag = f"front2d_v{CACHE_VERSION}_d3_cont"
    path = CACHE_DIR / f"{tag}.npz"
    if _cache_enabled() and path.exists():
        return front2d.load_front2d(path)
    start = cached_wrinkled25()
    refined = front2d.continue_in_delta(cubic_autocatalysis, start, 3.0, steps=5)
    if _cache_enabled():
        CACHE_DIR.mkdir(exist_ok=True)
        front2d.save_front2d(refined, path)
    return refined


def refine_in_x(profile, n_x_new):
    """Interpolate a front onto a finer x grid and Newton-polish it."""
    from scipy.interpolate import CubicSpline

    x_new = np.linspace(profile.x[0], profile.x[-1], n_x_new)
    fields = CubicSpline(profile.x, profile.fields, axis=0)(x_new)
    guess = front2d.FrontProfile2D(x_new, profile.y.copy(), fields,
                                   profile.speed, profile.delta,
                                   profile.model, "interp")
    refined = front2d.newton_refine(profile.model, guess)
    return front2d.FrontProfile2D(refined.x, refined.y, refined.fields,
                                  refined.speed, refined.delta, profile.model,
                                  profile.provenance)


def cached_wrinkled30_fine(n_x=1201):
    tag = f"front2d_v{CACHE_VERSION}_d3_fine{n_x}"
    path = CACHE_DIR / f"{tag}.npz"
    if _cache_enabled() and path.exists():
        return front2d.load_front2d(path)
    refined = refine_in_x(cached_wrinkled30(), n_x)
    if _cache_enabled():
        CACHE_DIR.mkdir(exist_ok=True)
        front2d.save_front2d(refined, path)
    return refined


@pytest.fixture(scope="session")
def planar1():
    return cached_planar(1.0)


@pytest.fixture(scope="session")
def planar2():
    return cached_planar(2.0)


@pytest.fixture(scope="session")
def planar25():
    return cached_planar(2.5)


@pytest.fixture(scope="session")
def planar3():
    return cached_planar(3.0)


@pytest.fixture(scope="session")
def wrinkled25():
    return cached_wrinkled25()


@pytest.fixture(scope="session")
def wrinkled30():
    return cached_wrinkled30()


@pytest.fixture(scope="session")
def wrinkled30_fine():
    return cached_wrinkled30_fine()


@pytest.fixture(scope="session")
def model3():
    return cubic_autocatalysis(3.0)
