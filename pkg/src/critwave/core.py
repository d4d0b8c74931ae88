"""Radial grids, field states, the ground-state family and energy norms.

Fields live on the uniform mesh ``r_i = i * dr`` for ``i = 1..n_points``.
The origin is not stored; where a value at ``r = 0`` is needed the regular
boundary condition ``r * u -> 0`` is used.  All integrals are composite
trapezoid rules over ``[0, r_max]`` and are therefore truncated: a field
with a slow ``c / r`` tail misses ``4 pi c**2 / r_max`` of its energy norm,
which :func:`tail_correction` restores on request.
"""
from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np

from ._quad import Antiderivative, integrate_window
from .errors import (
    CoverageError,
    DomainError,
    GridMismatchError,
    InvalidParameterError,
    NumericError,
)

#: ``||W||^2`` in the homogeneous energy space, ``3 sqrt(3) pi^2 / 4``.
W_NORM_SQ = 3.0 * math.sqrt(3.0) * math.pi**2 / 4.0
#: Energy of the ground state, ``E(W, 0) = ||W||^2 / 3``.
W_ENERGY = W_NORM_SQ / 3.0

FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial mesh ``r_i = i * dr``, ``i = 1..n_points``."""

    dr: float
    n_points: int

    def __post_init__(self):
        if not (np.isfinite(self.dr) and self.dr > 0):
            raise InvalidParameterError(f"dr must be positive, got {self.dr!r}")
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise InvalidParameterError(
                f"n_points must be an integer >= 8, got {self.n_points!r}"
            )
        object.__setattr__(self, "dr", float(self.dr))
        object.__setattr__(self, "n_points", int(self.n_points))

    @classmethod
    def from_extent(cls, r_max, dr):
        """Grid with spacing ``dr`` whose last node is at (or just past) ``r_max``."""
        return cls(dr, int(math.ceil(r_max / dr - 1e-9)))

    @property
    def r_max(self):
        return self.n_points * self.dr

    @cached_property
    def r(self):
        r = self.dr * np.arange(1, self.n_points + 1, dtype=float)
        r.flags.writeable = False
        return r

    @cached_property
    def r_with_origin(self):
        r = self.dr * np.arange(0, self.n_points + 1, dtype=float)
        r.flags.writeable = False
        return r

    def extended(self, r_max):
        """Same spacing, extended outward so that ``r_max`` is covered."""
        return RadialGrid(self.dr, max(self.n_points, int(math.ceil(r_max / self.dr - 1e-9))))


def _frozen(a, n, name):
    a = np.array(a, dtype=float, copy=True)
    if a.shape != (n,):
        raise InvalidParameterError(f"{name} must have shape ({n},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{name} contains non-finite values")
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class FieldState:
    """Samples of ``(u, u_t)`` on a radial grid at one instant."""

    grid: RadialGrid
    u: np.ndarray
    ut: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        n = self.grid.n_points
        object.__setattr__(self, "u", _frozen(self.u, n, "u"))
        object.__setattr__(self, "ut", _frozen(self.ut, n, "ut"))
        object.__setattr__(self, "time", float(self.time))

    @classmethod
    def zeros(cls, grid, time=0.0):
        return cls(grid, np.zeros(grid.n_points), np.zeros(grid.n_points), time)

    @property
    def r(self):
        return self.grid.r

    def _check_grid(self, other):
        if self.grid != other.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        self._check_grid(other)
        return FieldState(self.grid, self.u + other.u, self.ut + other.ut, self.time)

    def __sub__(self, other):
        self._check_grid(other)
        return FieldState(self.grid, self.u - other.u, self.ut - other.ut, self.time)

    def scaled(self, a, b=None):
        """``(a u, b u_t)``; ``b`` defaults to ``a``."""
        b = a if b is None else b
        return FieldState(self.grid, a * self.u, b * self.ut, self.time)

    def with_time(self, time):
        return FieldState(self.grid, self.u, self.ut, time)

    def time_reversed(self):
        """Data of ``u(x, -t)``: velocity flipped, time negated."""
        return FieldState(self.grid, self.u, -self.ut, -self.time)

    def support_radius(self, rtol=1e-13):
        """Largest node radius where the data are not negligible (0 if none)."""
        scale = max(1.0, float(np.max(np.abs(self.u))), float(np.max(np.abs(self.ut))))
        mask = (np.abs(self.u) > rtol * scale) | (np.abs(self.ut) > rtol * scale)
        idx = np.flatnonzero(mask)
        return 0.0 if idx.size == 0 else float(self.grid.r[idx[-1]])

    def on_grid(self, grid):
        """Copy onto a grid with the same spacing, truncating or zero padding."""
        if grid.dr != self.grid.dr:
            raise GridMismatchError("on_grid only changes the extent, not the spacing")
        n = min(grid.n_points, self.grid.n_points)
        u = np.zeros(grid.n_points)
        ut = np.zeros(grid.n_points)
        u[:n] = self.u[:n]
        ut[:n] = self.ut[:n]
        return FieldState(grid, u, ut, self.time)


@dataclass(frozen=True)
class GroundStateParam:
    """Signed scale parameter of ``W^alpha``; ``lambda = alpha**2``."""

    alpha: float

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha == 0:
            raise InvalidParameterError(f"alpha must be finite and nonzero, got {self.alpha!r}")

    @classmethod
    def from_scale(cls, sign, lam):
        if lam <= 0:
            raise InvalidParameterError(f"lambda must be positive, got {lam!r}")
        return cls(math.copysign(math.sqrt(lam), sign))

    @property
    def sign(self):
        return 1 if self.alpha > 0 else -1

    @property
    def lam(self):
        return self.alpha**2


def w_alpha(r, alpha):
    """``W^alpha(r) = (1/alpha) (1/3 + r^2/alpha^4)^(-1/2)``."""
    r = np.asarray(r, dtype=float)
    a2 = alpha * alpha
    return 1.0 / (alpha * np.sqrt(1.0 / 3.0 + (r / a2) ** 2))


def w_alpha_dr(r, alpha):
    """Radial derivative of :func:`w_alpha`."""
    r = np.asarray(r, dtype=float)
    a2 = alpha * alpha
    q = 1.0 / 3.0 + (r / a2) ** 2
    return -(r / (alpha * a2 * a2)) * q**-1.5


def ground_state(p, grid):
    """Sample ``(W^alpha, 0)`` on ``grid`` at time 0.

    Parameters
    ----------
    p : GroundStateParam or float
        Signed scale ``alpha``.
    grid : RadialGrid
    """
    if not isinstance(p, GroundStateParam):
        p = GroundStateParam(float(p))
    return FieldState(grid, w_alpha(grid.r, p.alpha), np.zeros(grid.n_points), 0.0)


def smooth_step(x):
    """C-infinity step: 0 for ``x <= 0``, 1 for ``x >= 1``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        f = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        g = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
        return f / (f + g)


def smooth_step_derivative(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xi = np.where(inside, x, 0.5)
    f = np.exp(-1.0 / xi)
    g = np.exp(-1.0 / (1.0 - xi))
    fp = f / xi**2
    gp = -g / (1.0 - xi) ** 2
    d = (fp * (f + g) - f * (fp + gp)) / (f + g) ** 2
    return np.where(inside, d, 0.0)


def cutoff(state, r_cut, width=None):
    """Multiply both components by a smooth ramp from 1 (``r <= r_cut``) to 0.

    ``width`` defaults to ``0.2 * r_cut``.
    """
    width = 0.2 * r_cut if width is None else width
    chi = 1.0 - smooth_step((state.r - r_cut) / width)
    return FieldState(state.grid, state.u * chi, state.ut * chi, state.time)


def radial_derivative(grid, u):
    """Centered second-order differences, one-sided second order at the ends."""
    return np.gradient(np.asarray(u, dtype=float), grid.dr, edge_order=2)


def radial_integral(grid, density, R=0.0, r_top=None):
    """``4 pi * int_R^{r_top} density(r) r^2 dr`` by the composite trapezoid rule."""
    r_top = grid.r_max if r_top is None else r_top
    y = np.concatenate(([0.0], np.asarray(density, dtype=float) * grid.r**2))
    return FOUR_PI * integrate_window(grid.r_with_origin, y, R, r_top)


def _check_finite(state):
    if not (np.all(np.isfinite(state.u)) and np.all(np.isfinite(state.ut))):
        raise NumericError("state contains non-finite values")


def h1l2_norm_sq(s, R=0.0):
    """``||(u, u_t)||^2`` of the energy space restricted to ``r > R``.

    Raises
    ------
    DomainError
        If ``R`` is not below ``r_max``.
    """
    if R < 0 or R >= s.grid.r_max:
        raise DomainError(f"R={R} outside [0, r_max={s.grid.r_max})")
    ur = radial_derivative(s.grid, s.u)
    return max(0.0, radial_integral(s.grid, ur**2 + s.ut**2, R))


def energy(s):
    """Conserved energy ``int (|grad u|^2/2 + u_t^2/2 - u^6/6) dx``."""
    _check_finite(s)
    ur = radial_derivative(s.grid, s.u)
    return radial_integral(s.grid, 0.5 * ur**2 + 0.5 * s.ut**2 - s.u**6 / 6.0)


def free_energy(s):
    """Energy of the linear equation, ``||(u, u_t)||^2 / 2``."""
    _check_finite(s)
    return 0.5 * h1l2_norm_sq(s, 0.0)


def l6_norm(s):
    return max(0.0, radial_integral(s.grid, s.u**6)) ** (1.0 / 6.0)


def tail_correction(charge, r_max):
    """Energy-space norm squared of ``(charge / r, 0)`` on ``r > r_max``."""
    return FOUR_PI * charge**2 / r_max


def energy_tail_correction(charge, r_max):
    """Energy of ``(charge / r, 0)`` on ``r > r_max`` (leading terms)."""
    return 0.5 * tail_correction(charge, r_max) - FOUR_PI * charge**6 / (18.0 * r_max**3)


@dataclass(frozen=True, eq=False)
class NormReport:
    """Bundle of norms of one state; ``exterior_sq(R)`` is evaluated lazily."""

    state: FieldState = field(repr=False)
    h1l2_sq: float
    l6: float
    energy: float

    def exterior_sq(self, R):
        return h1l2_norm_sq(self.state, R)


def norm_report(s):
    return NormReport(s, h1l2_norm_sq(s, 0.0), l6_norm(s), energy(s))


def y_norm(history, t_interval, R=0.0, rtol=1e-6):
    """Quadrature approximation of the ``L^5_t L^10_x`` norm on ``|x| > |t| + R``.

    Parameters
    ----------
    history : sequence of FieldState
        Snapshots with uniform time spacing.
    t_interval : (float, float)
    R : float
        Exterior radius of the cone.

    Raises
    ------
    CoverageError
        If the snapshots do not cover the interval or are unevenly spaced.
    """
    t0, t1 = map(float, t_interval)
    if t1 < t0:
        raise InvalidParameterError("t_interval must be ordered")
    if t1 == t0:
        return 0.0
    snaps = sorted(history, key=lambda s: s.time)
    times = np.array([s.time for s in snaps])
    if times.size < 2:
        raise CoverageError("at least two snapshots are needed for a positive-length interval")
    step = np.diff(times)
    if np.any(step <= 0) or np.ptp(step) > rtol * max(1.0, step.mean()) + 1e-12:
        raise CoverageError("snapshot times must be strictly increasing and uniform")
    tol = 0.5 * step.mean()
    if times[0] > t0 + tol or times[-1] < t1 - tol:
        raise CoverageError(f"snapshots span [{times[0]}, {times[-1]}], need [{t0}, {t1}]")
    keep = [(t, s) for t, s in zip(times, snaps) if t0 - tol <= t <= t1 + tol]
    if len(keep) < 2:
        raise CoverageError("fewer than two snapshots inside the interval")
    ts = np.array([t for t, _ in keep])
    inner = []
    for t, s in keep:
        lo = abs(t) + R
        val = radial_integral(s.grid, s.u**10, R=lo) if lo < s.grid.r_max else 0.0
        inner.append(math.sqrt(max(val, 0.0)))
    return float(np.trapezoid(inner, ts)) ** 0.2


def superpose(bubbles, extra):
    """``extra + sum_j (W^{alpha_j}, 0)`` on the grid of ``extra``.

    ``bubbles`` is any object with an ``alphas`` attribute or an iterable of
    signed scales.
    """
    alphas = getattr(bubbles, "alphas", bubbles)
    u = np.array(extra.u, dtype=float)
    for a in alphas:
        u += w_alpha(extra.r, GroundStateParam(float(a)).alpha)
    return FieldState(extra.grid, u, extra.ut, extra.time)


def cubic_value(grid, u, R):
    """Cubic interpolation of the odd extension ``r u`` evaluated at ``R``, divided by ``R``."""
    from scipy.interpolate import CubicSpline

    v = np.concatenate(([0.0], grid.r * np.asarray(u, dtype=float)))
    spline = CubicSpline(grid.r_with_origin, v)
    R = np.asarray(R, dtype=float)
    return spline(R) / R


# -- CSV serialisation --------------------------------------------------------

_FLOAT_FMT = "%.17g"


def write_state_csv(state, path):
    """Write ``r, u, ut`` columns with a ``# critwave fieldstate`` header."""
    header = f"critwave fieldstate t={state.time:.17g} dr={state.grid.dr:.17g}\nr,u,ut"
    data = np.column_stack([state.r, state.u, state.ut])
    np.savetxt(path, data, delimiter=",", header=header, comments="# ", fmt=_FLOAT_FMT)


def _parse_header(line, kind):
    line = line.lstrip("#").strip()
    parts = line.split()
    if len(parts) < 2 or parts[0] != "critwave" or parts[1] != kind:
        raise ValueError(f"not a critwave {kind} file: {line!r}")
    out = {}
    for p in parts[2:]:
        k, _, v = p.partition("=")
        out[k] = v
    return out


def read_state_csv(path):
    with open(path) as fh:
        meta = _parse_header(fh.readline(), "fieldstate")
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    dr = float(meta["dr"])
    n = data.shape[0]
    expected = dr * np.arange(1, n + 1)
    if not np.allclose(data[:, 0], expected, rtol=1e-9, atol=1e-12 * dr):
        raise ValueError("radius column is not the uniform mesh i*dr, i>=1")
    return FieldState(RadialGrid(dr, n), data[:, 1], data[:, 2], float(meta.get("t", 0.0)))
