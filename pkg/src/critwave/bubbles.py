"""Bubble peeling and the two neighbourhoods of multi-bubble configurations.

Peeling works from the outside in.  The weighted profile
``h(r) = r**0.5 |w(r)|`` of a bubble ``W^alpha`` crosses the level
``beta1 = c2**0.5 (1/3 + c2**2)**-0.5`` exactly at ``r = c2 alpha**2``, so
the outermost crossing of ``beta1`` reveals the scale of the outermost
remaining bubble.  Every bubble shares the ``alpha / r`` far field, which
biases the raw estimate by the sum of the inner amplitudes; an optional
refinement step fits all scales found so far to the data in the energy
norm before the next bubble is sought.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import minimize_scalar

from .core import (
    FOUR_PI,
    W_NORM_SQ,
    FieldState,
    h1l2_norm_sq,
    radial_derivative,
    w_alpha,
)
from .errors import DomainError, InvalidParameterError, ResolutionError


def detection_level(c2):
    """``beta1 = c2**0.5 (1/3 + c2**2)**-0.5``."""
    return math.sqrt(c2) / math.sqrt(1.0 / 3.0 + c2 * c2)


@dataclass(frozen=True)
class PeelConfig:
    """Constants of the peeling procedure.

    Parameters
    ----------
    c2 : float
        Cone constant; detection happens at ``r = c2 alpha**2``.
    beta : float
        Stop once ``sup r**0.5 |w| < beta``.  Must exceed ``2 beta1``.
    n_max : int
        Cap on the number of bubbles.
    refine : bool
        Fit all scales found so far after each detection.
    min_nodes : int
        Minimal number of grid nodes below a detection radius.
    """

    c2: float = 100.0
    beta: float = 0.25
    n_max: int = 8
    refine: bool = True
    min_nodes: int = 8

    def __post_init__(self):
        if not self.c2 >= 10:
            raise InvalidParameterError(f"c2 must be >= 10, got {self.c2}")
        if not self.beta > 2 * self.beta1:
            raise InvalidParameterError(
                f"beta={self.beta} must exceed 2*beta1={2 * self.beta1:.8g}"
            )
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise InvalidParameterError("n_max must be a positive integer")

    @property
    def beta1(self):
        return detection_level(self.c2)


@dataclass(frozen=True, eq=False)
class BubbleList:
    """Signed scales ``alpha_j`` ordered by decreasing ``|alpha_j|``.

    ``residual_sq`` is the squared energy norm of the remainder on
    ``r > R_stop``.  ``case`` is ``"a"`` when peeling stopped because the
    remainder fell below ``beta`` and ``"b"`` when ``n_max`` was reached.
    """

    alphas: tuple = ()
    residual_sq: float = 0.0
    R_stop: float = 0.0
    case: str = "a"
    detection_radii: tuple = ()

    def __post_init__(self):
        a = tuple(float(x) for x in self.alphas)
        mags = [abs(x) for x in a]
        if any(m == 0 for m in mags):
            raise InvalidParameterError("bubble scales must be nonzero")
        if any(m1 <= m2 for m1, m2 in zip(mags, mags[1:])):
            raise InvalidParameterError(f"|alpha_j| must be strictly decreasing, got {a}")
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "residual_sq", max(0.0, float(self.residual_sq)))

    def __len__(self):
        return len(self.alphas)

    @property
    def lambdas(self):
        return tuple(a * a for a in self.alphas)

    @property
    def signs(self):
        return tuple(1 if a > 0 else -1 for a in self.alphas)

    @property
    def ratios(self):
        """``|alpha_{j+1}| / |alpha_j|``."""
        return tuple(abs(b) / abs(a) for a, b in zip(self.alphas, self.alphas[1:]))

    @property
    def scale_ratios(self):
        """``lambda_{j+1} / lambda_j``."""
        return tuple(q * q for q in self.ratios)

    def as_dict(self):
        return {
            "alphas": list(self.alphas),
            "lambdas": list(self.lambdas),
            "signs": list(self.signs),
            "ratios": list(self.ratios),
            "residual_sq": self.residual_sq,
            "R_stop": self.R_stop,
            "case": self.case,
        }


@dataclass(frozen=True, eq=False)
class NeighborhoodVerdict:
    """Outcome of a membership test; every slack is non-negative for members."""

    member: bool
    fitted: BubbleList
    slack: dict = field(default_factory=dict)
    flags: tuple = ()
    details: dict = field(default_factory=dict, repr=False)


def radial_weights(grid, R=0.0):
    """Node weights ``c_i`` with ``sum_i c_i f_i = int_R^{r_max} f`` for the
    piecewise-linear interpolant of ``f`` through ``(0, 0)`` and the nodes."""
    dr = grid.dr
    r = grid.r
    n = r.size
    wts = np.full(n, dr)
    wts[-1] = 0.5 * dr
    if R <= 0:
        return wts
    k = int(np.searchsorted(r, R, side="left"))  # r[k-1] < R <= r[k]
    if k >= n:
        return np.zeros(n)
    left = r[k - 1] if k > 0 else 0.0
    x0 = (R - left) / dr
    wts[:k] = 0.0
    if k > 0:
        wts[k - 1] = 0.5 * dr * (1.0 - x0) ** 2
    wts[k] = 0.5 * dr * (1.0 - x0 * x0) + (0.5 * dr if k < n - 1 else 0.0)
    return wts


class ResidualModel:
    """Energy norm of ``w - sum_j W^{alpha_j}`` on ``r > R`` as a function of the scales.

    Bubble derivatives use the same finite differences as the data, so a
    state sampled from exact bubbles has zero residual at the true scales
    whatever the resolution.
    """

    def __init__(self, w, R=0.0):
        self.grid = w.grid
        self.r = w.grid.r
        self.du = radial_derivative(w.grid, w.u)
        self.ut_sq = np.asarray(w.ut) ** 2
        self.R = R
        self.weights = FOUR_PI * self.r**2 * radial_weights(w.grid, R)

    def bubble_gradient(self, alpha):
        return radial_derivative(self.grid, w_alpha(self.r, alpha))

    def value(self, alphas):
        d = self.du.copy()
        for a in alphas:
            d -= self.bubble_gradient(a)
        return max(0.0, float(np.dot(self.weights, d * d + self.ut_sq)))


def refine_scales(w, alphas, R=0.0, sweeps=6, xtol=1e-6, window=0.25):
    """Coordinate-wise golden-section fit of ``log |alpha_j|``, outermost first.

    Signs are kept.  Sweeps stop early once no scale moves by more than
    ``10 * xtol`` in log.

    Returns
    -------
    alphas : tuple of float
    residual_sq : float
    """
    model = ResidualModel(w, R)
    alphas = [float(a) for a in alphas]
    if not alphas:
        return (), model.value(())
    grads = [model.bubble_gradient(a) for a in alphas]
    for _ in range(sweeps):
        moved = 0.0
        for j, a in enumerate(alphas):
            sign = math.copysign(1.0, a)
            base = model.du - sum(g for i, g in enumerate(grads) if i != j)
            x0 = math.log(abs(a))

            def f(y, base=base, sign=sign, x0=x0):
                d = base - model.bubble_gradient(sign * math.exp(x0 + y - 1.0))
                return float(np.dot(model.weights, d * d))

            res = minimize_scalar(
                f, bracket=(1.0 - window, 1.0 + window), method="golden",
                tol=xtol, options={"maxiter": 200},
            )
            y = float(res.x)
            new = sign * math.exp(x0 + y - 1.0)
            moved = max(moved, abs(y - 1.0))
            alphas[j] = new
            grads[j] = model.bubble_gradient(new)
        if moved < 10 * xtol:
            break
    return tuple(alphas), model.value(alphas)


def _outermost_crossing(r, h, level):
    """Largest radius where ``h`` reaches ``level`` (linear interpolation)."""
    above = np.flatnonzero(h >= level)
    i = int(above[-1])
    if i == r.size - 1:
        return None, i
    h0, h1 = h[i], h[i + 1]
    x = (h0 - level) / (h0 - h1) if h0 != h1 else 0.0
    return float(r[i] + x * (r[i + 1] - r[i])), i


def peel(state, background=None, cfg=None):
    """Extract ground-state bubbles from ``state - background``, outside in.

    Parameters
    ----------
    state, background : FieldState
        ``background`` defaults to zero.
    cfg : PeelConfig

    Returns
    -------
    BubbleList

    Raises
    ------
    ResolutionError
        If fewer than ``cfg.min_nodes`` nodes lie below a detection radius.
    DomainError
        If ``r**0.5 |w|`` is still above ``beta1`` at the last node.
    """
    cfg = cfg or PeelConfig()
    w = state if background is None else state - background
    grid = w.grid
    r = grid.r
    sq = np.sqrt(r)
    u = np.array(w.u, dtype=float)
    alphas = []
    radii = []
    case = "a"
    for _ in range(cfg.n_max):
        h = sq * np.abs(u)
        if h.max() < cfg.beta:
            break
        R1, i = _outermost_crossing(r, h, cfg.beta1)
        if R1 is None:
            raise DomainError(
                f"after removing {len(alphas)} bubble(s), r^(1/2)|w| still reaches the detection "
                "level at the outer edge of the grid"
            )
        if R1 < cfg.min_nodes * grid.dr:
            raise ResolutionError(
                f"detection radius {R1:.3g} has fewer than {cfg.min_nodes} grid nodes below it"
            )
        alpha = math.copysign(math.sqrt(R1 / cfg.c2), u[i])
        if alphas and abs(alpha) >= abs(alphas[-1]):
            break
        alphas.append(alpha)
        radii.append(R1)
        if cfg.refine:
            fitted, _ = refine_scales(FieldState(grid, np.asarray(w.u), np.zeros(grid.n_points)), alphas)
            if all(abs(b) > abs(c) for b, c in zip(fitted, fitted[1:])):
                alphas = list(fitted)
        u = np.array(w.u, dtype=float)
        for a in alphas:
            u -= w_alpha(r, a)
    else:
        case = "b"
    R_stop = cfg.c2 * alphas[-1] ** 2 if case == "b" else 0.0
    rem = FieldState(grid, u, w.ut, w.time)
    res = h1l2_norm_sq(rem, R_stop) if R_stop < grid.r_max else 0.0
    return BubbleList(tuple(alphas), res, R_stop, case, tuple(radii))


def membership_M(state, n, eps, kappa, signs=None, cfg=None):
    """Is ``state`` within ``eps`` of ``n`` decoupled bubbles with scale ratios below ``kappa**2``?

    The scales come from :func:`peel` with ``n_max = n``, followed by a
    golden-section refinement of every scale in the full energy norm.
    With ``signs`` given, the fit is carried out with those signs imposed
    and the verdict refers to that sign pattern only.

    Returns
    -------
    NeighborhoodVerdict
        Slacks: ``"residual"`` is ``eps - ||w||`` and ``"ratio_j"`` is
        ``kappa**2 - lambda_{j+1} / lambda_j``.
    """
    if int(n) != n or n < 1:
        raise InvalidParameterError("n must be a positive integer")
    if not (eps > 0 and kappa > 0):
        raise InvalidParameterError("eps and kappa must be positive")
    cfg = cfg or PeelConfig()
    cfg = PeelConfig(cfg.c2, cfg.beta, int(n), cfg.refine, cfg.min_nodes)
    found = peel(state, None, cfg)
    flags = []
    alphas = list(found.alphas)
    if len(alphas) < n:
        flags.append("too_few_bubbles")
        model = ResidualModel(state)
        res = model.value(alphas)
        fitted = BubbleList(tuple(alphas), res, 0.0, found.case, found.detection_radii)
        return NeighborhoodVerdict(
            False, fitted, {"count": float(len(alphas) - n), "residual": eps - math.sqrt(res)}, tuple(flags)
        )
    if signs is not None:
        signs = tuple(int(math.copysign(1, s)) for s in signs)
        if len(signs) != n:
            raise InvalidParameterError("signs must have length n")
        alphas = [sg * abs(a) for sg, a in zip(signs, alphas)]
    alphas, _ = refine_scales(state, alphas)
    res = ResidualModel(state).value(alphas)
    mags = [abs(a) for a in alphas]
    if any(m1 <= m2 for m1, m2 in zip(mags, mags[1:])):
        flags.append("scales_not_ordered")
        order = sorted(range(len(alphas)), key=lambda j: -mags[j])
        alphas = [alphas[j] for j in order]
        if len(set(abs(a) for a in alphas)) < len(alphas):
            alphas = list(found.alphas)
    fitted = BubbleList(tuple(alphas), res, 0.0, found.case, found.detection_radii)
    slack = {"residual": eps - math.sqrt(res)}
    for j, q in enumerate(fitted.scale_ratios):
        slack[f"ratio_{j + 1}"] = kappa**2 - q
    member = all(v > 0 for v in slack.values()) and "scales_not_ordered" not in flags
    return NeighborhoodVerdict(member, fitted, slack, tuple(flags))


def exterior_profiles(state, horizon, s_max=None, cfl=0.9, taper=0.75):
    """Outgoing and incoming radiation of the exterior solution on ``s > 0``.

    The exterior solution feels the nonlinearity only on ``r > |t|``; its
    profiles on ``s > 0`` depend on the data alone.  The data are tapered
    smoothly to zero between ``taper * r_max`` and ``r_max`` and placed on
    a grid padded by ``horizon``; the incoming profile is the outgoing one
    of the time-reversed data.  The inward wave launched by the taper
    crosses the extraction lines unless ``s_max <= taper * r_max - horizon / 2``,
    which is the default bound.

    Returns
    -------
    dict
        ``"plus"`` and ``"minus"``: ``(profile, report)`` pairs or ``None``
        when the run stopped early; ``"outcomes"``: the two run outcomes.
    """
    from .core import smooth_step
    from .nlsolve import EvolutionConfig, evolve
    from .radiation import ExtractionConfig, extract_gplus

    grid = state.grid
    Rs = grid.r_max
    limit = taper * Rs - 0.5 * horizon
    s_max = min(0.5 * Rs, limit) if s_max is None else s_max
    if not 0 < s_max <= limit:
        raise InvalidParameterError(
            f"s_max={s_max:.6g} must lie in (0, taper*r_max - horizon/2 = {limit:.6g}]; enlarge the grid"
        )
    chi = 1.0 - smooth_step((grid.r - taper * Rs) / ((1.0 - taper) * Rs))
    base = FieldState(grid, state.u * chi, state.ut * chi, 0.0)
    big = grid.extended(Rs + horizon + 4 * grid.dr + 1.0)
    times = (horizon / 4.0, horizon / 2.0, horizon)
    ecfg = EvolutionConfig(
        cfl=cfl, t_final=horizon, snapshot_stride=10**9, energy_stride=10**9,
        exterior_radius=0.0, snapshot_times=times,
    )
    out = {"outcomes": {}}
    for key, data in (("plus", base), ("minus", base.time_reversed().with_time(0.0))):
        rec = evolve(data.on_grid(big), ecfg)
        out["outcomes"][key] = rec.outcome
        if not rec.outcome.completed:
            out[key] = None
            continue
        out[key] = extract_gplus(rec, ExtractionConfig(times, (0.0, s_max)))
    return out


def membership_R(state, n, delta, horizon=40.0, s_max=None, cfl=0.9, taper=0.75, s_edge=None):
    """Is ``state`` in the radiation neighbourhood of ``n`` bubbles?

    Members have squared energy norm strictly between ``(n - 1/2)`` and
    ``(n + 1/2)`` times ``||W||^2``, a global exterior solution, and
    outgoing and incoming radiation of ``L^2(0, s_max)`` norm below
    ``delta``.  The exterior solution has a derivative jump on the light
    cone ``r = |t|`` which the scheme smears over roughly ten cells, so the
    norms are taken over ``[s_edge, s_max]`` with ``s_edge = 25 dr`` by
    default.

    Returns
    -------
    NeighborhoodVerdict
        Slacks ``"norm_low"``, ``"norm_high"``, ``"G_plus"``, ``"G_minus"``;
        the flag ``"exterior_blowup"`` marks an exterior run that stopped.
    """
    if int(n) != n or n < 1:
        raise InvalidParameterError("n must be a positive integer")
    if not delta > 0:
        raise InvalidParameterError("delta must be positive")
    norm_sq = h1l2_norm_sq(state, 0.0)
    slack = {
        "norm_low": norm_sq - (n - 0.5) * W_NORM_SQ,
        "norm_high": (n + 0.5) * W_NORM_SQ - norm_sq,
    }
    flags = []
    details = {"norm_sq": norm_sq}
    s_edge = 25.0 * state.grid.dr if s_edge is None else float(s_edge)
    details["s_edge"] = s_edge
    prof = exterior_profiles(state, horizon, s_max, cfl, taper)
    for key in ("plus", "minus"):
        if prof[key] is None:
            flags.append("exterior_blowup")
            slack[f"G_{key}"] = -math.inf
            continue
        G, rep = prof[key]
        norm = G.norm(s_edge, math.inf)
        slack[f"G_{key}"] = delta - norm
        details[f"G_{key}_norm"] = norm
        details[f"{key}_spread"] = rep.spread_relative
    member = not flags and all(v > 0 for v in slack.values())
    return NeighborhoodVerdict(member, BubbleList(), slack, tuple(flags), details)
