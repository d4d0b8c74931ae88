import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from critwave.core import W_ENERGY, FieldState, RadialGrid, ground_state
from critwave.errors import InvalidParameterError
from critwave.estimators import BubblePeeler, PeriodSegmenter, RadiationExtractor
from critwave.linwave import PLUS, RadiationProfile, data_from_profile
from critwave.nlsolve import EvolutionConfig, evolve_linear
from critwave.scenario import gaussian_profile
from critwave.verify import SEGMENT_PARAMS, synthetic_profile

GRID = RadialGrid.from_extent(200.0, 0.01)


@pytest.mark.parametrize(
    "est,params",
    [
        (BubblePeeler(), {"c2": 10.0, "beta": 0.7, "n_max": 3, "refine": False}),
        (RadiationExtractor(), {"t_samples": (5.0, 10.0), "s_window": (-1.0, 1.0), "ell": 4.0}),
        (PeriodSegmenter(), {"delta": 0.01, "delta_star": 0.03, "ell": 4.0, "radius": 2.0}),
    ],
)
def test_params_roundtrip(est, params):
    est.set_params(**params)
    cloned = clone(est)
    for k, v in params.items():
        assert cloned.get_params()[k] == v


class TestBubblePeeler:
    def test_single_bubble(self):
        est = BubblePeeler(c2=10.0, beta=0.7).fit(ground_state(1.0, GRID))
        assert est.bubbles_.alphas == pytest.approx((1.0,), abs=1e-6)

    def test_predict_many(self):
        est = BubblePeeler(c2=10.0, beta=0.7)
        out = est.predict([ground_state(1.0, GRID), ground_state(-1.0, GRID), FieldState.zeros(GRID)])
        assert out[0] == pytest.approx((1.0,), abs=1e-6)
        assert out[1] == pytest.approx((-1.0,), abs=1e-6)
        assert out[2] == ()

    def test_membership(self):
        est = BubblePeeler(c2=10.0, beta=0.7)
        assert est.membership(ground_state(1.0, GRID), 1, 0.1, 0.1).member

    @pytest.mark.parametrize("bad", [{"c2": -1.0}, {"beta": float("nan")}])
    def test_bad_params(self, bad):
        with pytest.raises(InvalidParameterError):
            BubblePeeler(**bad).fit(ground_state(1.0, GRID))

    def test_bad_input(self):
        with pytest.raises(InvalidParameterError):
            BubblePeeler().fit(np.zeros(10))


@pytest.fixture(scope="module")
def record():
    G = RadiationProfile.from_function(lambda s: gaussian_profile(s, 1.0, 0.5, 1.0), -10, 10, 0.01)
    grid = RadialGrid.from_extent(40.0, 0.01)
    cfg = EvolutionConfig(t_final=20.0, snapshot_stride=10**9, snapshot_times=(10.0, 20.0))
    return G, evolve_linear(data_from_profile(G, grid), cfg)


class TestRadiationExtractor:
    def test_fit_transform(self, record):
        G, rec = record
        est = RadiationExtractor(t_samples=(10.0, 20.0), s_window=(-5.0, 5.0), ell=4.0).fit(rec)
        assert est.report_.converged and est.profile_.direction == PLUS
        assert est.profile_.norm_sq() == pytest.approx(G.norm_sq(), rel=1e-3)
        X = est.transform([0.5, 1.0, 2.0])
        assert X.shape == (3, 2) and np.all(X >= 0) and np.all(X <= 1 + 1e-12)

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            RadiationExtractor().transform([1.0])

    def test_bad_window(self, record):
        with pytest.raises(InvalidParameterError):
            RadiationExtractor(t_samples=(10.0, 20.0), s_window=(1.0, -1.0)).fit(record[1])


class TestPeriodSegmenter:
    def test_quiet_profile(self):
        s_min, ds = -100.0, 0.01
        G = RadiationProfile(s_min, ds, np.zeros(10501), PLUS)
        est = PeriodSegmenter(ell=4.0).fit(G, energy=W_ENERGY)
        np.testing.assert_array_equal(est.predict([1.0, 5.0, 50.0]), [-1, 1, 1])

    def test_two_bursts(self):
        est = PeriodSegmenter(**SEGMENT_PARAMS).fit(synthetic_profile(2), 2 * W_ENERGY + 1e-3)
        assert [J for *_, J in est.segmentation_.stable] == [2, 1, 0]
        assert est.predict([8.0])[0] == 2

    def test_needs_energy(self):
        with pytest.raises(TypeError):
            PeriodSegmenter().fit(synthetic_profile(1))

    def test_wrong_direction(self):
        G = RadiationProfile(-10.0, 0.1, np.zeros(101), "minus")
        with pytest.raises(InvalidParameterError):
            PeriodSegmenter().fit(G, energy=1.0)

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            PeriodSegmenter().predict([1.0])
