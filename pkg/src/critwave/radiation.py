"""Outgoing radiation profiles of computed solutions and strength functions.

Along the outgoing null line ``r = t + s`` both ``r u_t`` and ``-d_r(r u)``
converge to ``G_+(s)`` as ``t`` grows.  The profile is estimated from a
few extraction times in geometric progression and the spread between
times is reported as a convergence diagnostic.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.interpolate import CubicSpline

from .core import FOUR_PI
from .errors import CoverageError, InvalidParameterError
from .linwave import PLUS, RadiationProfile


@dataclass(frozen=True)
class ExtractionConfig:
    """Where and when to read off the outgoing profile.

    Parameters
    ----------
    t_samples : sequence of float
        Extraction times, elapsed from the first snapshot.  The nearest
        snapshot is used at its own recorded time.
    s_window : (float, float)
        Range of the null coordinate ``s = r - t``.
    ds : float or None
        Profile spacing; defaults to the record's ``dr``.
    consistency_tol : float
        Largest acceptable relative spread between extraction times.
    """

    t_samples: tuple
    s_window: tuple
    ds: float | None = None
    consistency_tol: float = 0.05

    def __post_init__(self):
        ts = tuple(float(t) for t in self.t_samples)
        if not ts or any(t <= 0 for t in ts):
            raise InvalidParameterError("t_samples must be a non-empty list of positive times")
        a, b = map(float, self.s_window)
        if not a < b:
            raise InvalidParameterError("s_window must satisfy s_min < s_max")
        if self.ds is not None and not self.ds > 0:
            raise InvalidParameterError("ds must be positive")
        object.__setattr__(self, "t_samples", ts)
        object.__setattr__(self, "s_window", (a, b))


@dataclass(frozen=True, eq=False)
class ExtractionReport:
    """Diagnostics of one extraction.

    ``ab_mismatch`` is ``max |A - B|`` over samples, ``ab_relative`` the
    worst ratio ``||A - B|| / (||A|| + ||B||)`` over times, ``time_spread``
    the pointwise maximal spread of ``(A + B) / 2`` across times and
    ``spread_relative`` its worst ``L^2`` deviation from the mean relative
    to the mean.
    """

    ab_mismatch: float
    ab_relative: float
    time_spread: float
    spread_relative: float
    converged: bool
    spread_profile: np.ndarray = field(repr=False)
    per_time: tuple = field(repr=False, default=())


def _snapshot(rec, t):
    times = rec.times
    k = int(np.argmin(np.abs(times - t)))
    gap = float(np.max(np.diff(times))) if times.size > 1 else rec.dt
    tol = 0.5 * max(gap, rec.dt) + 1e-9 * max(1.0, abs(t))
    if abs(times[k] - t) > tol:
        raise CoverageError(f"no snapshot at t={t} (closest {times[k]})")
    return rec.snapshots[k]


def _null_samples(snap, s, t0):
    """``A = r u_t`` and ``B = -d_r(r u)`` at ``r = t + s`` by cubic splines."""
    grid = snap.grid
    rr = grid.r_with_origin
    v = CubicSpline(rr, np.concatenate(([0.0], grid.r * snap.u)))
    w = CubicSpline(rr, np.concatenate(([0.0], grid.r * snap.ut)))
    r = (snap.time - t0) + s
    return w(r), -v(r, 1)


def extract_gplus(rec, cfg):
    """Estimate ``G_+`` on ``cfg.s_window`` from a simulation record.

    Times are elapsed times from the first snapshot.

    Returns
    -------
    profile : RadiationProfile
        Direction ``"plus"``.
    report : ExtractionReport

    Raises
    ------
    CoverageError
        If an extraction time is missing or ``t + s`` leaves ``(0, r_max]``.
    """
    t0 = rec.snapshots[0].time
    s_min, s_max = cfg.s_window
    ds = cfg.ds or rec.grid.dr
    n = int(round((s_max - s_min) / ds)) + 1
    s = s_min + ds * np.arange(n)
    end = rec.times[-1] - t0
    if not rec.outcome.completed and rec.outcome.time is not None:
        end = rec.outcome.time - t0
    per_time = []
    for t in cfg.t_samples:
        if t > end + 0.5 * rec.dt + 1e-9:
            raise CoverageError(f"extraction time {t} beyond the regular part of the record ({end})")
        if t + s_min <= 0 or t + s[-1] > rec.grid.r_max - 2 * rec.grid.dr:
            raise CoverageError(f"window [{s_min}, {s_max}] leaves the grid at t={t}")
        snap = _snapshot(rec, t0 + t)
        per_time.append(_null_samples(snap, s, t0))
    A = np.array([a for a, _ in per_time])
    B = np.array([b for _, b in per_time])
    Gs = 0.5 * (A + B)
    G = Gs.mean(axis=0)
    l2 = lambda f: math.sqrt(ds * float(np.sum(f * f)))
    ab_rel = max(
        (l2(a - b) / (l2(a) + l2(b)) if l2(a) + l2(b) > 0 else 0.0) for a, b in zip(A, B)
    )
    spread = Gs.max(axis=0) - Gs.min(axis=0)
    gnorm = l2(G)
    spread_rel = max(l2(g - G) for g in Gs) / gnorm if gnorm > 0 else 0.0
    report = ExtractionReport(
        ab_mismatch=float(np.max(np.abs(A - B))),
        ab_relative=float(ab_rel),
        time_spread=float(spread.max()),
        spread_relative=float(spread_rel),
        converged=bool(spread_rel <= cfg.consistency_tol),
        spread_profile=spread,
        per_time=tuple(Gs),
    )
    return RadiationProfile(s_min, ds, G, PLUS), report


@dataclass(frozen=True, eq=False)
class StrengthCurve:
    """``phi(t) = ||G||_{[-t, inf)}`` and ``phi_ell(t) = ||G||_{[-t, -t/ell]}``."""

    t: np.ndarray
    phi: np.ndarray
    phi_ell: np.ndarray
    ell: float


def strength(G, ts, ell):
    """Radiation strength functions of ``G`` at the times ``ts``."""
    if not ell > 1:
        raise InvalidParameterError(f"ell must exceed 1, got {ell}")
    ts = np.asarray(ts, dtype=float)
    if np.any(ts <= 0):
        raise InvalidParameterError("times must be positive")
    F = G.sq_antiderivative()
    lo, hi = G.s_min, G.s_max

    def mass(a, b):
        a = np.clip(a, lo, hi)
        b = np.clip(b, lo, hi)
        return np.maximum(F(b) - F(a), 0.0)

    phi = np.sqrt(mass(-ts, np.full_like(ts, hi)))
    phi_ell = np.sqrt(mass(-ts, -ts / ell))
    return StrengthCurve(ts, phi, np.minimum(phi_ell, phi), float(ell))


def strength_times(G, n=200):
    """Geometric time grid on which the strength functions of ``G`` vary."""
    top = max(-G.s_min, 2 * G.ds)
    return np.geomspace(min(G.ds, top / 2), top, n)


def write_strength_csv(curve, path):
    np.savetxt(path, np.column_stack([curve.t, curve.phi, curve.phi_ell]),
               delimiter=",", header="t,phi,phi_ell", comments="", fmt="%.17g")


def window_energy(G, a, b):
    """``4 pi int_a^b G^2 ds``; 0 when the window misses the samples."""
    if b < a:
        raise InvalidParameterError("window_energy needs a <= b")
    return FOUR_PI * G.norm_sq(a, b)
