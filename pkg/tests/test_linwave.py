import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critwave.core import FieldState, RadialGrid, h1l2_norm_sq, smooth_step
from critwave.errors import DomainError, InvalidParameterError
from critwave.linwave import (
    MINUS,
    PLUS,
    RadiationProfile,
    conjugate,
    data_from_profile,
    free_wave_evaluate,
    free_wave_state,
    profile_from_data,
    read_profile_csv,
    tail_identity_check,
    window_integral,
    write_profile_csv,
)
from helpers import bump


def indicator(a, b, ds=1e-3, pad=5.0, direction=MINUS):
    """Indicator of ``[a, b]`` with the midpoint value 1/2 at the jumps."""
    return RadiationProfile.from_function(
        lambda s: 0.5 * (np.sign(s - a) - np.sign(s - b)), a - pad, b + pad, ds, direction
    )


def smooth_profile(ds=1e-3):
    return RadiationProfile.from_function(lambda s: bump(s, 1.0, 2.0) - 0.4 * bump(s, -1.5, 1.0), -8, 8, ds)


def random_data(seed, dr=1e-3):
    rng = np.random.default_rng(seed)
    grid = RadialGrid.from_extent(8.0, dr)
    r = grid.r
    c1, c2 = rng.uniform(1.5, 4.0, 2)
    u0 = rng.normal() * bump(r, c1, 1.2) + rng.uniform(0.2, 1) * bump(r, 0.0, 2.0)
    u1 = rng.normal() * bump(r, c2, 1.0)
    return FieldState(grid, u0, u1)


class TestProfileFromData:
    def test_zero(self):
        G = profile_from_data(FieldState.zeros(RadialGrid.from_extent(2.0, 0.01)))
        assert np.all(G.g == 0) and G.direction == MINUS

    def test_indicator_data(self):
        grid = RadialGrid.from_extent(5.0, 1e-3)
        r = grid.r
        s = FieldState(grid, np.minimum(1.0, 1.0 / r), np.where(r < 1, 1.0 / r, 0.0))
        G = profile_from_data(s)
        inside = (G.s > 0.05) & (G.s < 0.95)
        outside = (np.abs(G.s - 0.5) > 0.55) & (np.abs(G.s + 1) > 0.05) & (np.abs(G.s) > 0.05) & (G.s < 4.9)
        np.testing.assert_allclose(G.g[inside], 1.0, atol=1e-12)
        np.testing.assert_allclose(G.g[outside], 0.0, atol=1e-12)

    def test_one_over_r_tail_is_non_radiative(self):
        grid = RadialGrid.from_extent(20.0, 1e-3)
        r = grid.r
        u0 = 2.0 / r * smooth_step(r - 0.5)
        G = profile_from_data(FieldState(grid, u0, np.zeros_like(r)))
        far = (np.abs(G.s) > 1.5 + 2e-3) & (np.abs(G.s) < 19.9)
        assert np.max(np.abs(G.g[far])) < 1e-10

    def test_ds_equals_dr(self):
        grid = RadialGrid.from_extent(3.0, 0.01)
        G = profile_from_data(FieldState.zeros(grid))
        assert G.ds == grid.dr and G.s_min == pytest.approx(-grid.r_max)


class TestDataFromProfile:
    def test_zero(self):
        G = RadiationProfile(-1.0, 0.5, np.zeros(5))
        s = data_from_profile(G, RadialGrid.from_extent(3.0, 0.1))
        assert np.all(s.u == 0) and np.all(s.ut == 0)

    def test_indicator(self):
        grid = RadialGrid.from_extent(5.0, 0.01)
        s = data_from_profile(indicator(0.0, 1.0, ds=1e-4), grid)
        np.testing.assert_allclose(s.u, np.minimum(1.0, 1.0 / grid.r), atol=1e-3)

    def test_rejects_plus(self):
        with pytest.raises(InvalidParameterError):
            data_from_profile(indicator(0, 1, direction=PLUS), RadialGrid.from_extent(2.0, 0.1))

    def test_roundtrip(self):
        G = smooth_profile(ds=1e-3)
        grid = RadialGrid.from_extent(8.0, 1e-3)
        back = profile_from_data(data_from_profile(G, grid))
        assert np.max(np.abs(back.g - G(back.s))) < 1e-5

    @pytest.mark.parametrize("seed", range(3))
    def test_data_roundtrip_second_order(self, seed):
        errs = []
        for dr in (0.01, 0.005):
            s = random_data(seed, dr)
            back = data_from_profile(profile_from_data(s), s.grid)
            errs.append(np.max(np.abs(back.u - s.u)))
        assert math.log2(errs[0] / errs[1]) > 1.8


class TestConjugate:
    def test_zero(self):
        G = RadiationProfile(-1.0, 0.5, np.zeros(5))
        assert np.all(conjugate(G).g == 0)

    def test_indicator(self):
        Gp = conjugate(indicator(0.0, 1.0))
        assert Gp.direction == PLUS
        np.testing.assert_allclose(Gp([-0.9, -0.5, -0.1, 0.5, -1.5]), [-1, -1, -1, 0, 0])

    def test_involution_and_isometry(self):
        G = smooth_profile()
        back = conjugate(conjugate(G))
        np.testing.assert_array_equal(back.g, G.g)
        assert back.direction == G.direction and back.s_min == G.s_min
        assert conjugate(G).norm_sq() == pytest.approx(G.norm_sq(), rel=1e-14)


class TestFreeWave:
    def test_zero(self):
        G = RadiationProfile(-1.0, 0.5, np.zeros(5))
        assert free_wave_evaluate(G, 1.0, 3.0)[0] == 0.0

    def test_indicator_value(self):
        u, ut, ur = free_wave_evaluate(indicator(0.0, 1.0), 2.0, 0.0)
        assert u == pytest.approx(0.5, abs=1e-12)

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(DomainError):
            free_wave_evaluate(smooth_profile(), 0.0, 1.0)

    @pytest.mark.parametrize("t", [10.0, 100.0])
    def test_outgoing_limit(self, t):
        G = smooth_profile()
        Gp = conjugate(G)
        s = np.linspace(-3, 3, 31)
        r = t + s
        _, ut, ur = free_wave_evaluate(G, r, t)
        np.testing.assert_allclose(r * ut, Gp(s), atol=5e-6 * (1 + 100 / t))

    def test_matches_derivatives(self):
        G = smooth_profile(ds=1e-4)
        r, t, h = 2.3, 0.7, 1e-4
        u, ut, ur = free_wave_evaluate(G, r, t)
        up, _, _ = free_wave_evaluate(G, r + h, t)
        um, _, _ = free_wave_evaluate(G, r - h, t)
        tp, _, _ = free_wave_evaluate(G, r, t + h)
        tm, _, _ = free_wave_evaluate(G, r, t - h)
        assert ur == pytest.approx((up - um) / (2 * h), abs=1e-5)
        assert ut == pytest.approx((tp - tm) / (2 * h), abs=1e-5)

    def test_compact_profile_gives_one_over_r_exterior(self):
        G = smooth_profile()
        t = 3.0
        grid = RadialGrid.from_extent(30.0, 0.01)
        s = free_wave_state(G, grid, t)
        m = grid.r > t + 8.0
        charge = s.u[m] * grid.r[m]
        assert np.ptp(charge) < 1e-12 * max(1.0, abs(charge[0]))


class TestTailIdentity:
    def test_zero(self):
        assert tail_identity_check(FieldState.zeros(RadialGrid.from_extent(4.0, 0.01)), 1.0) == (0.0, 0.0)

    @pytest.mark.parametrize("R", [0.5, 1.0, 2.0, 3.0])
    def test_gaussian_bump(self, R):
        grid = RadialGrid.from_extent(10.0, 2.5e-4)
        r = grid.r
        s = FieldState(grid, np.exp(-((r - 2) ** 2)), 0.3 * np.exp(-((r - 1.5) ** 2)))
        lhs, rhs = tail_identity_check(s, R)
        assert rhs == pytest.approx(lhs, rel=1e-6)

    def test_small_radius_limit_is_isometry(self, smooth_state):
        lhs, rhs = tail_identity_check(smooth_state, 1e-3)
        full = 8 * math.pi * profile_from_data(smooth_state).norm_sq()
        assert lhs == pytest.approx(full, rel=1e-4)

    def test_domain(self, smooth_state):
        with pytest.raises(DomainError):
            tail_identity_check(smooth_state, 0.0)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_isometry_property(seed):
    s = random_data(seed)
    n = h1l2_norm_sq(s)
    assert 8 * math.pi * profile_from_data(s).norm_sq() == pytest.approx(n, rel=1e-5)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 7.0))
def test_tail_inequality(seed, R):
    s = random_data(seed, dr=2e-3)
    G = profile_from_data(s)
    tail = G.norm_sq(-math.inf, -R) + G.norm_sq(R, math.inf)
    assert h1l2_norm_sq(s, R) >= 8 * math.pi * tail * (1 - 1e-6) - 1e-12


def test_window_integral_additive():
    G = smooth_profile()
    whole = window_integral(G, -3, 4)
    assert window_integral(G, -3, 0.3) + window_integral(G, 0.3, 4) == pytest.approx(whole, abs=1e-14)


def test_profile_csv_roundtrip(tmp_path):
    G = smooth_profile(ds=0.01)
    write_profile_csv(G, tmp_path / "g.csv", {"spread": np.zeros(G.g.size)})
    back = read_profile_csv(tmp_path / "g.csv")
    np.testing.assert_array_equal(back.g, G.g)
    assert back.ds == G.ds and back.direction == G.direction
    assert (tmp_path / "g.csv").read_text().splitlines()[0] == "# critwave profile dir=minus ds=0.01"
