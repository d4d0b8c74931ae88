import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critwave.bubbles import (
    BubbleList,
    PeelConfig,
    ResidualModel,
    detection_level,
    membership_M,
    membership_R,
    peel,
    radial_weights,
    refine_scales,
)
from critwave.core import FieldState, RadialGrid, ground_state, radial_integral, superpose, w_alpha
from critwave.errors import DomainError, InvalidParameterError, ResolutionError
from critwave.scenario import noise_state


@settings(max_examples=50)
@given(st.floats(1e-3, 10.0), st.sampled_from([-1, 1]), st.floats(10.0, 1e4))
def test_detection_identity(a, sign, c2):
    alpha = sign * a
    R1 = c2 * alpha**2
    assert math.sqrt(R1) * abs(w_alpha(R1, alpha)) == pytest.approx(detection_level(c2), rel=1e-12)


def test_default_detection_level():
    cfg = PeelConfig()
    assert cfg.beta1 == pytest.approx(0.09999833, abs=1e-8)
    assert cfg.beta > 2 * cfg.beta1


class TestConfig:
    @pytest.mark.parametrize("kw", [{"c2": 5.0}, {"beta": 0.15}, {"n_max": 0}])
    def test_rejects(self, kw):
        with pytest.raises(InvalidParameterError):
            PeelConfig(**kw)


class TestBubbleList:
    def test_ordering_enforced(self):
        with pytest.raises(InvalidParameterError):
            BubbleList((0.1, -0.5))
        with pytest.raises(InvalidParameterError):
            BubbleList((0.5, -0.5))

    def test_derived_fields(self):
        bl = BubbleList((1.0, -0.1, 0.01), 0.5)
        assert bl.signs == (1, -1, 1)
        assert bl.ratios == pytest.approx((0.1, 0.1))
        assert bl.scale_ratios == pytest.approx((0.01, 0.01))
        assert set(bl.as_dict()) >= {"alphas", "lambdas", "signs", "ratios", "residual_sq"}


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 4.99), st.integers(0, 1000))
def test_radial_weights_match_quadrature(R, seed):
    grid = RadialGrid.from_extent(5.0, 0.01)
    f = np.random.default_rng(seed).normal(size=grid.n_points)
    via_weights = 4 * math.pi * np.dot(radial_weights(grid, R) * grid.r**2, f)
    assert via_weights == pytest.approx(radial_integral(grid, f, R), rel=1e-9, abs=1e-12)


class TestPeel:
    def test_zero(self):
        bl = peel(FieldState.zeros(RadialGrid.from_extent(10.0, 0.01)))
        assert len(bl) == 0 and bl.residual_sq == 0 and bl.case == "a"

    @pytest.mark.parametrize("alpha", [1.0, -0.6, 0.3])
    @pytest.mark.parametrize("refine", [True, False])
    def test_single_bubble(self, alpha, refine):
        grid = RadialGrid.from_extent(1.5 * 100 * alpha**2 + 5, 0.005)
        bl = peel(ground_state(alpha, grid), None, PeelConfig(refine=refine))
        assert len(bl) == 1
        assert bl.alphas[0] == pytest.approx(alpha, rel=1e-3)
        assert bl.detection_radii[0] == pytest.approx(100 * alpha**2, rel=1e-3)

    def test_two_bubbles_with_noise(self):
        grid = RadialGrid.from_extent(155.0, 1e-3)
        noise = noise_state(grid, np.random.default_rng(5), 1e-3)
        bl = peel(superpose([1.0, -1e-2], noise))
        assert bl.signs == (1, -1)
        np.testing.assert_allclose(bl.lambdas, [1.0, 1e-4], rtol=0.01)

    def test_background_subtracted(self):
        grid = RadialGrid.from_extent(155.0, 0.005)
        bg = ground_state(1.0, grid)
        bl = peel(superpose([1.0, 0.3], FieldState.zeros(grid)), bg)
        assert len(bl) == 1 and bl.alphas[0] == pytest.approx(0.3, rel=1e-3)

    def test_n_max_gives_case_b(self):
        grid = RadialGrid.from_extent(155.0, 0.002)
        bl = peel(superpose([1.0, -0.1], FieldState.zeros(grid)), None, PeelConfig(n_max=1))
        assert bl.case == "b" and len(bl) == 1
        assert bl.R_stop == pytest.approx(100 * bl.alphas[0] ** 2)

    def test_resolution_error(self):
        # the inner bubble is detected at r ~ 0.48, fewer than 12 nodes out
        grid = RadialGrid.from_extent(155.0, 0.05)
        with pytest.raises(ResolutionError):
            peel(superpose([1.0, 0.06], FieldState.zeros(grid)), None, PeelConfig(refine=False, min_nodes=12))

    def test_domain_error(self):
        grid = RadialGrid.from_extent(50.0, 0.05)
        with pytest.raises(DomainError):
            peel(ground_state(1.0, grid))


def test_refinement_recovers_exact_scales():
    grid = RadialGrid.from_extent(40.0, 0.01)
    state = superpose([1.0, -0.2], FieldState.zeros(grid))
    alphas, res = refine_scales(state, [1.1, -0.18])
    np.testing.assert_allclose(alphas, [1.0, -0.2], rtol=1e-5)
    assert res < 1e-9 * ResidualModel(state).value(())


class TestMembershipM:
    def test_ground_state_member(self):
        grid = RadialGrid.from_extent(155.0, 0.005)
        v = membership_M(ground_state(1.0, grid), 1, 0.1, 0.1)
        assert v.member and v.fitted.lambdas[0] == pytest.approx(1.0, rel=1e-4)
        assert all(s >= 0 for s in v.slack.values())

    def test_ground_state_not_two_bubbles(self):
        grid = RadialGrid.from_extent(155.0, 0.005)
        v = membership_M(ground_state(1.0, grid), 2, 0.1, 0.1)
        assert not v.member

    def test_two_separated_bubbles(self):
        grid = RadialGrid.from_extent(155.0, 1e-3)
        state = superpose([1.0, 1e-2], FieldState.zeros(grid))
        v = membership_M(state, 2, 0.1, 0.1)
        assert v.member and v.fitted.scale_ratios[0] == pytest.approx(1e-4, rel=1e-3)

    def test_sign_patterns_exclusive(self):
        grid = RadialGrid.from_extent(155.0, 1e-3)
        state = superpose([1.0, -1e-2], noise_state(grid, np.random.default_rng(1), 1e-3))
        verdicts = {s: membership_M(state, 2, 0.1, 0.1, signs=s).member for s in [(1, 1), (1, -1), (-1, 1), (-1, -1)]}
        assert verdicts == {(1, 1): False, (1, -1): True, (-1, 1): False, (-1, -1): False}

    def test_validation(self):
        grid = RadialGrid.from_extent(10.0, 0.05)
        with pytest.raises(InvalidParameterError):
            membership_M(FieldState.zeros(grid), 0, 0.1, 0.1)


class TestMembershipR:
    GRID = RadialGrid.from_extent(60.0, 0.02)

    def test_ground_state_member(self):
        v = membership_R(ground_state(1.0, self.GRID), 1, 0.05)
        assert v.member, v.slack
        assert v.details["G_plus_norm"] < 1e-3 and v.details["G_minus_norm"] < 1e-3

    def test_zero_not_member(self):
        v = membership_R(FieldState.zeros(self.GRID), 1, 0.05)
        assert not v.member and v.slack["norm_low"] < 0

    def test_scaled_ground_state(self):
        v = membership_R(ground_state(1.0, self.GRID).scaled(1.5), 2, 0.05)
        assert not v.member
        assert "exterior_blowup" in v.flags

    @pytest.mark.parametrize("seed", range(3))
    def test_bubble_neighbourhood_inclusion(self, seed):
        rng = np.random.default_rng(seed)
        lam = 10 ** rng.uniform(-0.1, 0.1)
        state = superpose([rng.choice([-1, 1]) * math.sqrt(lam)], noise_state(self.GRID, rng, 1e-3, top=10.0))
        assert membership_M(state, 1, 0.01, 0.1, cfg=PeelConfig(c2=10.0, beta=0.7)).member
        assert membership_R(state, 1, 0.05).member

    def test_s_max_beyond_taper_rejected(self):
        with pytest.raises(InvalidParameterError):
            membership_R(ground_state(1.0, self.GRID), 1, 0.05, s_max=40.0)
