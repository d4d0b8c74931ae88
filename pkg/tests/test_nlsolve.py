import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critwave.core import FieldState, RadialGrid, cutoff, ground_state, h1l2_norm_sq, w_alpha
from critwave.errors import InvalidParameterError, PreconditionError
from critwave.linwave import RadiationProfile, data_from_profile, free_wave_state
from critwave.nlsolve import (
    BLOWUP,
    COMPLETED,
    NUMERIC_FAILURE,
    EvolutionConfig,
    evolve,
    evolve_linear,
    read_record,
    rescale_state,
    write_record,
)
from critwave.scenario import blowup_ode_data, gaussian_profile
from critwave.verify import linear_convergence, unstable_eigenvalue, w_growth_rate


def gaussian_state(grid, amp=0.1, center=3.0):
    r = grid.r
    return FieldState(grid, amp * np.exp(-((r - center) ** 2)), 0.5 * amp * np.exp(-((r - center) ** 2)))


class TestConfig:
    @pytest.mark.parametrize(
        "kw", [{"cfl": 0.0}, {"cfl": 1.1}, {"t_final": -1.0}, {"snapshot_stride": 0},
               {"blowup_amp": -1.0}, {"nonlinearity": "cubic"}, {"exterior_radius": -1.0}]
    )
    def test_rejects(self, kw):
        with pytest.raises(InvalidParameterError):
            EvolutionConfig(**kw)

    def test_replace_roundtrip(self):
        cfg = EvolutionConfig(t_final=3.0, snapshot_times=[1, 2])
        assert cfg.replace(cfl=0.5).to_dict() == dict(cfg.to_dict(), cfl=0.5)


class TestEvolve:
    def test_zero_data(self):
        grid = RadialGrid.from_extent(10.0, 0.05)
        rec = evolve(FieldState.zeros(grid), EvolutionConfig(t_final=2.0))
        assert rec.outcome.kind == COMPLETED
        assert all(np.all(s.u == 0) for s in rec.snapshots)

    def test_domain_precondition(self):
        grid = RadialGrid.from_extent(6.0, 0.05)
        with pytest.raises(PreconditionError):
            evolve(gaussian_state(grid), EvolutionConfig(t_final=5.0))

    def test_zero_duration_needs_no_margin(self):
        grid = RadialGrid.from_extent(20.0, 0.05)
        rec = evolve(ground_state(1.0, grid), EvolutionConfig(t_final=0.0))
        assert len(rec.snapshots) == 1
        np.testing.assert_array_equal(rec.final.u, ground_state(1.0, grid).u)

    def test_snapshot_times_strictly_increasing(self):
        grid = RadialGrid.from_extent(15.0, 0.05)
        rec = evolve(gaussian_state(grid), EvolutionConfig(t_final=5.0, snapshot_stride=7, snapshot_times=(2.5,)))
        assert np.all(np.diff(rec.times) > 0)
        assert rec.times[-1] == pytest.approx(5.0)
        assert np.min(np.abs(rec.times - 2.5)) <= rec.dt / 2

    def test_truncated_w_stays_close_for_short_times(self):
        grid = RadialGrid.from_extent(30.0, 0.01)
        W = cutoff(ground_state(1.0, grid), 10.0)
        rec = evolve(W, EvolutionConfig(t_final=0.5, snapshot_stride=10))
        m = grid.r < 5.0
        dev = max(np.max(np.abs(s.u[m] - w_alpha(grid.r[m], 1.0))) for s in rec.snapshots)
        assert dev < 1e-3

    def test_w_instability_growth_rate(self):
        # the dr**2 residual of the discrete ground state seeds the unstable mode
        rate, rec = w_growth_rate()
        oracle = math.sqrt(-unstable_eigenvalue())
        assert rate == pytest.approx(oracle, rel=0.03)

    def test_ode_blowup_tracks_profile(self):
        T, r0, dr = 1.0, 6.0, 0.02
        grid = RadialGrid.from_extent(1.5 * r0 + 2 * T + 1.0, dr)
        rec = evolve(blowup_ode_data(grid, T, r0), EvolutionConfig(t_final=2 * T, snapshot_stride=1))
        assert rec.outcome.kind == BLOWUP and rec.outcome.time < T + 0.1
        k = 0.75**0.25
        for s in rec.snapshots:
            if s.time <= T - 10 * rec.dt:
                assert s.u[0] == pytest.approx(k * (T - s.time) ** -0.5, rel=0.01)

    def test_numeric_failure_reported(self):
        grid = RadialGrid.from_extent(20.0, 0.02)
        data = cutoff(ground_state(1.0, grid), 5.0).scaled(3.0)
        rec = evolve(data, EvolutionConfig(t_final=5.0, blowup_amp=math.inf, blowup_grad=math.inf))
        assert rec.outcome.kind == NUMERIC_FAILURE and rec.outcome.time < 5.0
        assert all(np.all(np.isfinite(s.u)) for s in rec.snapshots)

    def test_nonlinear_energy_drift(self):
        grid = RadialGrid.from_extent(20.0, 0.01)
        data = gaussian_state(grid, 0.2)
        rec = evolve(data, EvolutionConfig(t_final=10.0, snapshot_stride=10**6, energy_stride=20))
        assert rec.outcome.completed
        assert rec.max_energy_drift() < 1e-4

    def test_finite_speed_of_propagation(self):
        grid = RadialGrid.from_extent(20.0, 0.02)
        a = gaussian_state(grid, 0.3, 5.0)
        extra = np.where(grid.r < 2.0, 0.2 * np.exp(-grid.r**2) * (2 - grid.r) ** 4, 0.0)
        b = FieldState(grid, a.u + extra, a.ut)
        t = 3.0
        ua = evolve(a, EvolutionConfig(t_final=t)).final
        ub = evolve(b, EvolutionConfig(t_final=t)).final
        m = grid.r > 2.0 + t + 2 * grid.dr
        np.testing.assert_allclose(ua.u[m], ub.u[m], atol=1e-14)

    def test_small_data_decay(self):
        grid = RadialGrid.from_extent(40.0, 0.02)
        rec = evolve(gaussian_state(grid, 0.2, 2.0), EvolutionConfig(t_final=30.0, snapshot_stride=100))
        core = grid.r < 1.0
        first = np.max(np.abs(rec.snapshots[0].u[core])) + 1e-12
        assert np.max(np.abs(rec.final.u[core])) < 0.05 * first


class TestLinear:
    def test_zero(self):
        grid = RadialGrid.from_extent(5.0, 0.05)
        rec = evolve_linear(FieldState.zeros(grid), EvolutionConfig(t_final=1.0))
        assert np.all(rec.final.u == 0)

    def test_second_order_against_exact(self):
        errs, orders = linear_convergence(drs=(0.04, 0.02, 0.01), t=5.0)
        assert min(orders) > 1.9

    def test_energy_trace_constant(self):
        G = RadiationProfile.from_function(lambda s: gaussian_profile(s, 2.0, 1.0, 1.0), -15, 15, 0.005)
        grid = RadialGrid.from_extent(25.0, 0.02)
        rec = evolve_linear(data_from_profile(G, grid), EvolutionConfig(t_final=10.0, energy_stride=5))
        assert rec.max_energy_drift() < 1e-6

    def test_matches_free_wave(self):
        G = RadiationProfile.from_function(lambda s: gaussian_profile(s, 1.0, 1.0, 1.0), -15, 15, 0.0025)
        grid = RadialGrid.from_extent(25.0, 0.01)
        rec = evolve_linear(data_from_profile(G, grid), EvolutionConfig(t_final=4.0))
        exact = free_wave_state(G, grid, 4.0)
        assert np.max(np.abs(rec.final.u - exact.u)) < 1e-4


class TestRescale:
    def test_identity(self):
        grid = RadialGrid.from_extent(5.0, 0.05)
        s = gaussian_state(grid)
        assert rescale_state(s, 1.0) is s

    @pytest.mark.parametrize("lam", [0.5, 2.0])
    def test_ground_state_family(self, lam):
        grid = RadialGrid.from_extent(20.0, 0.01)
        mu = 0.8
        out = rescale_state(ground_state(math.sqrt(mu), grid), lam)
        m = grid.r <= min(20.0, 20.0 * lam) - 0.1
        np.testing.assert_allclose(out.u[m], w_alpha(grid.r[m], math.sqrt(lam * mu)), rtol=1e-6)

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidParameterError):
            rescale_state(FieldState.zeros(RadialGrid(0.1, 8)), 0.0)

    def test_covariance(self):
        lam, t = 2.0, 2.0
        grid = RadialGrid.from_extent(12.0, 0.01)
        big = RadialGrid.from_extent(24.0, 0.01)
        s = gaussian_state(grid, 0.5, 2.0)
        a = rescale_state(evolve(s, EvolutionConfig(t_final=t)).final, lam, big)
        b = evolve(rescale_state(s, lam, big), EvolutionConfig(t_final=lam * t)).final
        assert a.time == pytest.approx(b.time)
        assert np.max(np.abs(a.u - b.u)) < 1e-3 * np.max(np.abs(b.u))


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 4.0))
def test_rescale_preserves_energy_norm(lam):
    grid = RadialGrid.from_extent(60.0, 0.01)
    s = gaussian_state(grid, 0.3, 3.0)
    out = rescale_state(s, lam)
    assert h1l2_norm_sq(out) == pytest.approx(h1l2_norm_sq(s), rel=1e-3)


def test_record_roundtrip(tmp_path):
    grid = RadialGrid.from_extent(12.0, 0.05)
    rec = evolve(gaussian_state(grid), EvolutionConfig(t_final=2.0, snapshot_stride=10))
    files = write_record(rec, tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == sorted(files + ["meta.json", "energy.csv"])
    back = read_record(tmp_path)
    assert back.outcome == rec.outcome and back.config == rec.config
    np.testing.assert_array_equal(back.energy_trace, rec.energy_trace)
    for a, b in zip(back.snapshots, rec.snapshots):
        np.testing.assert_array_equal(a.u, b.u)
        assert a.time == b.time
