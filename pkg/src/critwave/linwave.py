"""Free radial waves in the radiation-profile representation.

A radial free wave is ``u(r, t) = (1/r) int_{t-r}^{t+r} G_-(s) ds`` for a
profile ``G_-`` in ``L^2(R)``.  The maps between initial data and profiles
are isometries up to the factor ``8 pi``.  Profiles live on their own
uniform ``s`` mesh and vanish outside it.
"""
from dataclasses import dataclass
import math

import numpy as np

from ._quad import Antiderivative
from .core import FOUR_PI, FieldState, RadialGrid, h1l2_norm_sq
from .errors import DomainError, InvalidParameterError, NumericError

PLUS = "plus"
MINUS = "minus"


@dataclass(frozen=True, eq=False)
class RadiationProfile:
    """Samples ``g[k] = G(s_min + k * ds)``; ``G`` is zero off the mesh."""

    s_min: float
    ds: float
    g: np.ndarray
    direction: str = MINUS

    def __post_init__(self):
        if self.direction not in (PLUS, MINUS):
            raise InvalidParameterError(f"direction must be 'plus' or 'minus', got {self.direction!r}")
        if not (self.ds > 0 and math.isfinite(self.ds)):
            raise InvalidParameterError(f"ds must be positive, got {self.ds!r}")
        g = np.array(self.g, dtype=float, copy=True)
        if g.ndim != 1 or g.size < 2:
            raise InvalidParameterError("g must be a 1-D array with at least two samples")
        if not np.all(np.isfinite(g)):
            raise NumericError("profile samples must be finite")
        g.flags.writeable = False
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "s_min", float(self.s_min))
        object.__setattr__(self, "ds", float(self.ds))

    @classmethod
    def from_function(cls, func, s_min, s_max, ds, direction=MINUS):
        n = int(round((s_max - s_min) / ds)) + 1
        s = s_min + ds * np.arange(n)
        return cls(s_min, ds, func(s), direction)

    @property
    def s(self):
        return self.s_min + self.ds * np.arange(self.g.size)

    @property
    def s_max(self):
        return self.s_min + self.ds * (self.g.size - 1)

    def __call__(self, s):
        """Linear interpolation, zero outside ``[s_min, s_max]``."""
        return np.interp(s, self.s, self.g, left=0.0, right=0.0)

    def antiderivative(self):
        return Antiderivative(self.s, self.g)

    def sq_antiderivative(self):
        """Antiderivative of the piecewise-linear interpolant of ``g**2``."""
        return Antiderivative(self.s, self.g**2)

    def norm_sq(self, a=-math.inf, b=math.inf):
        """``int_a^b G^2 ds`` with fractional end cells."""
        return max(0.0, self.sq_antiderivative().window(max(a, self.s_min), min(b, self.s_max)))

    def norm(self, a=-math.inf, b=math.inf):
        return math.sqrt(self.norm_sq(a, b))


def window_integral(G, a, b):
    """``int_a^b G(s) ds`` for the linear interpolant of the samples."""
    return G.antiderivative().window(max(a, G.s_min), min(b, G.s_max))


def _v_derivative(grid, u):
    """``d/dr (r u)`` by centered differences on ``v = r u`` with ``v(0) = 0``."""
    v = np.concatenate(([0.0], grid.r * u))
    dv = np.gradient(v, grid.dr, edge_order=2)
    return dv[1:], dv[0]


def profile_from_data(s):
    """Incoming profile ``G_-`` of the free wave with data ``(u0, u1)``.

    For ``r > 0``::

        G_-(r)  = (d_r(r u0) + r u1) / 2
        G_-(-r) = (d_r(r u0) - r u1) / 2

    sampled on ``s = k dr``, ``|k| <= n_points``, so ``ds = dr``.
    """
    grid = s.grid
    dv, dv0 = _v_derivative(grid, s.u)
    if not np.all(np.isfinite(dv)):
        raise NumericError("non-finite derivative of r*u0")
    rv = grid.r * s.ut
    pos = 0.5 * (dv + rv)
    neg = 0.5 * (dv - rv)
    g = np.concatenate((neg[::-1], [0.5 * dv0], pos))
    return RadiationProfile(-grid.r_max, grid.dr, g, MINUS)


def data_from_profile(G, grid):
    """Initial data ``(u0, u1)`` on ``grid`` generated by ``G_-``.

    ``u0(r) = (1/r) int_{-r}^{r} G``, ``u1(r) = (G(r) - G(-r)) / r``.
    The profile is taken to vanish beyond its stored range.
    """
    if G.direction != MINUS:
        raise InvalidParameterError("data_from_profile needs a 'minus' profile")
    r = grid.r
    F = G.antiderivative()
    u0 = (F(r) - F(-r)) / r
    u1 = (G(r) - G(-r)) / r
    return FieldState(grid, u0, u1, 0.0)


def conjugate(G):
    """``s -> -G(-s)`` with the direction flipped."""
    flipped = PLUS if G.direction == MINUS else MINUS
    return RadiationProfile(-G.s_max, G.ds, -G.g[::-1], flipped)


def free_wave_evaluate(G, r, t):
    """Free wave generated by ``G_-`` at ``(r, t)``.

    Returns
    -------
    u, ut, ur : float or ndarray
        ``u = (1/r) int_{t-r}^{t+r} G``, ``ut = (G(t+r) - G(t-r)) / r`` and
        ``ur = (G(t+r) + G(t-r)) / r - u / r``.
    """
    if G.direction != MINUS:
        raise InvalidParameterError("free_wave_evaluate needs a 'minus' profile")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("free_wave_evaluate needs r > 0")
    F = G.antiderivative()
    gp = G(t + r)
    gm = G(t - r)
    u = (F(t + r) - F(t - r)) / r
    ut = (gp - gm) / r
    ur = (gp + gm) / r - u / r
    return u, ut, ur


def free_wave_state(G, grid, t):
    """Free wave at time ``t`` sampled on ``grid``."""
    u, ut, _ = free_wave_evaluate(G, grid.r, t)
    return FieldState(grid, u, ut, t)


def tail_identity_check(s, R):
    """Both sides of the exterior energy identity at radius ``R``.

    Returns
    -------
    lhs, rhs : float
        ``||(u0, u1)||^2`` on ``r > R`` and
        ``8 pi ||G_-||^2_{|s|>R} + 4 pi R u0(R)^2``.
    """
    if not 0 < R < s.grid.r_max:
        raise DomainError(f"R={R} outside (0, r_max={s.grid.r_max})")
    lhs = h1l2_norm_sq(s, R)
    G = profile_from_data(s)
    tail = G.norm_sq(-math.inf, -R) + G.norm_sq(R, math.inf)
    u0R = float(np.interp(R, s.grid.r, s.u))
    rhs = 2.0 * FOUR_PI * tail + FOUR_PI * R * u0R**2
    return lhs, rhs


# -- CSV serialisation --------------------------------------------------------

def write_profile_csv(G, path, extra=None):
    """Write ``s, g`` (plus optional named extra columns) with a header line."""
    cols = [G.s, G.g]
    names = ["s", "g"]
    for name, values in (extra or {}).items():
        names.append(name)
        cols.append(np.asarray(values, dtype=float))
    header = f"critwave profile dir={G.direction} ds={G.ds:.17g}\n" + ",".join(names)
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header, comments="# ", fmt="%.17g")


def read_profile_csv(path):
    from .core import _parse_header

    with open(path) as fh:
        meta = _parse_header(fh.readline(), "profile")
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    ds = float(meta["ds"])
    s = data[:, 0]
    if s.size > 1 and not np.allclose(np.diff(s), ds, rtol=1e-6, atol=1e-12):
        raise ValueError("profile s column is not uniform with the header ds")
    return RadiationProfile(float(s[0]), ds, data[:, 1], meta.get("dir", MINUS))
