"""Estimator-style wrappers around the diagnostics.

Each wrapper keeps its configuration as constructor parameters (so
``get_params`` / ``set_params`` work) and stores results in attributes
with a trailing underscore after ``fit``.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import (
    check_interval,
    check_is_fitted,
    check_positive,
    check_profile,
    check_record,
    check_state,
)
from .bubbles import PeelConfig, membership_M, peel
from .dynamics import segment
from .linwave import PLUS
from .radiation import ExtractionConfig, extract_gplus, strength


class BubblePeeler(BaseEstimator):
    """Peel ground-state bubbles off a field state.

    Parameters
    ----------
    c2, beta, n_max, refine
        See :class:`critwave.bubbles.PeelConfig`.

    Attributes
    ----------
    bubbles_ : BubbleList
    """

    def __init__(self, c2=100.0, beta=0.25, n_max=8, refine=True):
        self.c2 = c2
        self.beta = beta
        self.n_max = n_max
        self.refine = refine

    def _config(self):
        return PeelConfig(check_positive(self.c2, "c2"), check_positive(self.beta, "beta"),
                          int(self.n_max), bool(self.refine))

    def fit(self, X, y=None, background=None):
        check_state(X)
        if background is not None:
            check_state(background, "background")
        self.bubbles_ = peel(X, background, self._config())
        return self

    def predict(self, X):
        """Signed scales of each state in ``X`` (a state or a list of states)."""
        states = [X] if not isinstance(X, (list, tuple)) else list(X)
        return [peel(check_state(s), None, self._config()).alphas for s in states]

    def membership(self, X, n, eps, kappa, signs=None):
        return membership_M(check_state(X), n, eps, kappa, signs, self._config())


class RadiationExtractor(BaseEstimator, TransformerMixin):
    """Extract ``G_+`` from a record and map times to strength values.

    Attributes
    ----------
    profile_ : RadiationProfile
    report_ : ExtractionReport
    """

    def __init__(self, t_samples=(15.0, 30.0, 60.0), s_window=(-10.0, 10.0), ds=None,
                 consistency_tol=0.05, ell=100.0):
        self.t_samples = t_samples
        self.s_window = s_window
        self.ds = ds
        self.consistency_tol = consistency_tol
        self.ell = ell

    def fit(self, X, y=None):
        rec = check_record(X)
        cfg = ExtractionConfig(tuple(self.t_samples), check_interval(self.s_window, "s_window"),
                               self.ds, self.consistency_tol)
        self.profile_, self.report_ = extract_gplus(rec, cfg)
        return self

    def transform(self, X):
        """Columns ``phi(t), phi_ell(t)`` for the times in ``X``."""
        check_is_fitted(self, "profile_")
        ts = np.asarray(X, dtype=float).ravel()
        curve = strength(self.profile_, ts, check_positive(self.ell, "ell"))
        return np.column_stack([curve.phi, curve.phi_ell])


class PeriodSegmenter(BaseEstimator):
    """Stable and collision periods of an outgoing profile.

    Attributes
    ----------
    segmentation_ : Segmentation
    """

    def __init__(self, delta=0.05, delta_star=0.2, ell=100.0, radius=1.0, n_mesh=4000):
        self.delta = delta
        self.delta_star = delta_star
        self.ell = ell
        self.radius = radius
        self.n_mesh = n_mesh

    def fit(self, X, y=None, energy=None):
        """``X`` is a plus profile; ``energy`` (or ``y``) the solution energy."""
        G = check_profile(X, PLUS)
        E = energy if energy is not None else y
        if E is None:
            raise TypeError("PeriodSegmenter.fit needs the energy")
        self.segmentation_ = segment(G, float(E), check_positive(self.radius, "radius"),
                                     self.delta, self.delta_star, self.ell, n_mesh=int(self.n_mesh))
        return self

    def predict(self, X):
        """Bubble count of the stable period containing each time (-1 elsewhere)."""
        check_is_fitted(self, "segmentation_")
        ts = np.asarray(X, dtype=float).ravel()
        out = np.full(ts.size, -1)
        for a, b, J in self.segmentation_.stable:
            out[(ts >= a) & (ts <= b)] = J
        return out
