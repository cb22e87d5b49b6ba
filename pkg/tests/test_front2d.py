import numpy as np
import pytest

from frontspec.model import cubic_autocatalysis
from frontspec import front2d
from frontspec.front2d import (
    ContinuationStallError,
    FrontProfile2D,
    RunawayError,
    continue_in_delta,
    freeze_evolve,
    load_front2d,
    newton_refine,
    plant_front,
    save_front2d,
    stationary_residual,
)

from conftest import cached_planar, wrinkled_grid


def small_embed(delta, ny=8, period=120.0, n_x=3001):
    """A planar front embedded in a thin 2D strip.  The default x grid
    matches the 1D solver's, so speeds are comparable to 1e-6."""
    model = cubic_autocatalysis(delta)
    planar = cached_planar(delta)
    x = np.linspace(-150.0, 150.0, n_x)
    y = -period / 2 + (period / ny) * np.arange(ny)
    return model, plant_front(model, planar, x, y, center=0.0)


def front_position_modulation(profile):
    v = profile.fields[:, :, 1]
    pos = [np.interp(0.5, v[::-1, j], profile.x[::-1])
           for j in range(v.shape[1])]
    pos = np.array(pos)
    return 0.5 * (pos.max() - pos.min())


class TestFreezeEvolve:
    def test_converged_front_is_fixed_point(self, wrinkled25):
        model = cubic_autocatalysis(2.5)
        hist = freeze_evolve(model, wrinkled25, t_end=10 * 0.25, dt=0.25)
        assert np.abs(hist.zetas - wrinkled25.speed).max() < 1e-6
        drift = np.abs(hist.final.fields - wrinkled25.fields).max()
        assert drift < 1e-6

    def test_zeta_converges_to_planar_speed(self):
        model, seed = small_embed(2.0)
        hist = freeze_evolve(model, seed, t_end=60.0, dt=0.2)
        assert hist.final.zeta == pytest.approx(cached_planar(2.0).speed, abs=2e-3)

    def test_runaway_error(self):
        model, seed = small_embed(2.0)
        with pytest.raises(RunawayError):
            freeze_evolve(model, seed, t_end=10.0, dt=0.2, zeta_cap=1e-6)

    def test_phase_residual_small_at_fixed_point(self, wrinkled25):
        model = cubic_autocatalysis(2.5)
        hist = freeze_evolve(model, wrinkled25, t_end=2.5, dt=0.25)
        # template is the initial data, so the drift of the constraint
        # integral measures the index-reduction error
        assert abs(hist.phase_residual()) < 1e-8


@pytest.mark.slow
class TestWrinkleDynamics:
    def test_delta25_wrinkle_grows_and_zeta_near_paper(self):
        # just past the cellular instability a seeded transverse mode-1
        # perturbation grows; the frame speed settles near the planar value
        model = cubic_autocatalysis(2.5)
        planar = cached_planar(2.5)
        x, y = wrinkled_grid()
        seed = plant_front(model, planar, x, y, center=50.0,
                           wrinkle_amplitude=1.0, wrinkle_mode=1)
        a0 = front_position_modulation(seed)
        hist = freeze_evolve(model, seed, t_end=1500.0, dt=0.5)
        prof = FrontProfile2D(x, y, hist.final.fields, hist.final.zeta,
                              2.5, model, "frozen")
        a1 = front_position_modulation(prof)
        assert hist.final.zeta == pytest.approx(0.577, abs=1e-2)
        assert a1 > 1.1 * a0

    def test_delta2_wrinkle_decays(self):
        model = cubic_autocatalysis(2.0)
        planar = cached_planar(2.0)
        x, y = wrinkled_grid()
        seed = plant_front(model, planar, x, y, center=50.0,
                           wrinkle_amplitude=1.0, wrinkle_mode=1)
        a0 = front_position_modulation(seed)
        hist = freeze_evolve(model, seed, t_end=1500.0, dt=0.5)
        prof = FrontProfile2D(x, y, hist.final.fields, hist.final.zeta,
                              2.0, model, "frozen")
        a1 = front_position_modulation(prof)
        assert a1 < 0.75 * a0


class TestNewtonRefine:
    def test_planar_embedded_matches_1d_speed(self):
        model, seed = small_embed(2.0)
        refined = newton_refine(model, seed)
        assert refined.speed == pytest.approx(cached_planar(2.0).speed, abs=1e-6)
        # stays y-independent
        assert np.abs(refined.fields - refined.fields.mean(axis=1, keepdims=True)).max() < 1e-9

    def test_exact_solution_needs_no_steps(self, wrinkled25):
        model = cubic_autocatalysis(2.5)
        refined = newton_refine(model, wrinkled25)
        assert np.abs(refined.fields - wrinkled25.fields).max() < 1e-12
        assert refined.speed == pytest.approx(wrinkled25.speed, abs=1e-12)

    def test_wrinkled_front_invariants(self, wrinkled25):
        model = cubic_autocatalysis(2.5)
        assert np.abs(stationary_residual(model, wrinkled25)).max() < 1e-10
        assert wrinkled25.transverse_variation() < 1e-4
        assert wrinkled25.speed == pytest.approx(0.577, abs=1e-2)

    def test_reflection_symmetry(self, wrinkled25):
        # cos-seeded fronts stay even in y: grid index j -> (-j) mod ny
        f = wrinkled25.fields
        ny = f.shape[1]
        reflected = f[:, (-np.arange(ny)) % ny, :]
        assert np.abs(f - reflected).max() < 1e-8

    def test_conservation_surrogate_identity(self, wrinkled25):
        # the reaction cancels in the summed equations, so the residual of
        # the sum is a pure diffusion-advection balance and equals the sum
        # of the per-field residuals exactly
        model = cubic_autocatalysis(2.5)
        res = stationary_residual(model, wrinkled25)
        summed = res.sum(axis=-1)
        x, y, U = wrinkled25.x, wrinkled25.y, wrinkled25.fields
        hx, hy = x[1] - x[0], y[1] - y[0]
        lap = (U[:-2] - 2 * U[1:-1] + U[2:]) / hx**2 + (
            np.roll(U[1:-1], 1, 1) - 2 * U[1:-1] + np.roll(U[1:-1], -1, 1)) / hy**2
        vx = (U[2:] - U[:-2]) / (2 * hx)
        direct = (model.diffusion * lap).sum(axis=-1) \
            + wrinkled25.speed * vx.sum(axis=-1)
        assert np.abs(summed - direct).max() < 1e-12

    def test_grid_refinement_order_for_speed(self):
        # c(h) converges at second order: observed order from three grids
        model = cubic_autocatalysis(2.0)
        planar = cached_planar(2.0)
        speeds = []
        for n_x in (376, 751, 1501):
            x = np.linspace(-150.0, 150.0, n_x)
            y = np.zeros(1)
            seed = plant_front(model, planar, x, y, center=0.0)
            refined = newton_refine(model, seed)
            speeds.append(refined.speed)
        order = np.log2(abs(speeds[0] - speeds[1]) / abs(speeds[1] - speeds[2]))
        assert 1.7 < order < 2.3


class TestContinuation:
    def test_identity_continuation(self, wrinkled25):
        out = continue_in_delta(cubic_autocatalysis, wrinkled25, 2.5)
        assert out is wrinkled25

    def test_small_step_matches_dynamics(self, wrinkled25):
        # two independent routes to the front at delta = 2.6: continuation
        # vs time evolution started from the continued front (which must
        # therefore be a fixed point of the dynamics)
        cont = continue_in_delta(cubic_autocatalysis, wrinkled25, 2.6, steps=1)
        assert cont.provenance == "continued-from 2.5"
        model = cubic_autocatalysis(2.6)
        hist = freeze_evolve(model, cont, t_end=50.0, dt=0.25)
        assert np.abs(hist.final.fields - cont.fields).max() < 1e-4
        assert np.abs(hist.zetas - cont.speed).max() < 1e-4

    def test_stall_error(self, wrinkled25):
        # an unreachable target with a tiny permitted step must stall
        with pytest.raises((ContinuationStallError, front2d.NewtonError)):
            continue_in_delta(cubic_autocatalysis, wrinkled25, 30.0, steps=1,
                              min_step=4.0)


class TestIO:
    def test_round_trip_bit_exact(self, wrinkled25, tmp_path):
        path = save_front2d(wrinkled25, tmp_path / "front")
        loaded = load_front2d(path)
        assert (loaded.fields == wrinkled25.fields).all()
        assert (loaded.x == wrinkled25.x).all()
        assert loaded.speed == wrinkled25.speed
        assert loaded.delta == wrinkled25.delta
        assert loaded.provenance == wrinkled25.provenance

    def test_metadata_and_csv(self, wrinkled25, tmp_path):
        save_front2d(wrinkled25, tmp_path / "front")
        import json
        meta = json.loads((tmp_path / "front.json").read_text())
        assert meta["delta"] == 2.5
        assert meta["grid"] == [301, 240]
        first = (tmp_path / "front.csv").read_text().splitlines()[0]
        assert first.startswith("# c = ")
