"""Long-time diagnostics: period segmentation, virial bounds, one-pass checks.

Segmentation reads only the outgoing radiation profile ``G_+`` and the
energy ``E``.  Times when the local strength ``phi_ell`` is small are
quiet; there the number of bubbles follows from energy quantisation,
``E ~ J E(W, 0) + 4 pi ||G_+||^2_{[-t, inf)}``.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import brentq

from .core import (
    FOUR_PI,
    W_ENERGY,
    FieldState,
    GroundStateParam,
    cutoff,
    energy,
    ground_state,
    h1l2_norm_sq,
    radial_integral,
    smooth_step,
    smooth_step_derivative,
)
from .errors import (
    CoverageError,
    CritwaveError,
    InconsistencyError,
    InvalidParameterError,
    PreconditionError,
)
from .radiation import strength, window_energy


@dataclass(frozen=True)
class BubbleCount:
    """Energy-quantised bubble number at one time."""

    J: int
    residual: float
    ambiguous: bool


def bubble_count(E, G, t):
    """``round((E - 4 pi ||G||^2_{[-t, inf)}) / E(W, 0))``, clamped at 0.

    ``residual`` is the distance of the radiated-energy balance from the
    chosen multiple of ``E(W, 0)``; beyond ``0.4 E(W, 0)`` the count is
    flagged as ambiguous.
    """
    if not math.isfinite(E):
        raise InvalidParameterError("energy must be finite")
    left = E - FOUR_PI * G.norm_sq(-t, math.inf)
    J = max(0, int(round(left / W_ENERGY)))
    residual = abs(left - J * W_ENERGY)
    return BubbleCount(J, float(residual), bool(residual > 0.4 * W_ENERGY))


@dataclass(frozen=True, eq=False)
class Segmentation:
    """Preparation, stable and collision periods read off a radiation profile.

    ``stable`` holds ``(a_k, b_k, J_k)``; the last one ends at the data
    horizon and is marked by ``unbounded``.  ``budgets[k]`` is the energy
    radiated during collision ``k``, ``stable_leak[k]`` during stable
    period ``k``, ``prep_energy`` before ``a_1`` (including ``s > 0``) and
    ``tail`` after the last stable period.
    """

    prep: tuple
    stable: tuple
    collision: tuple
    budgets: tuple
    stable_leak: tuple
    prep_energy: float
    tail: float
    ratios: dict
    unbounded: bool
    t_end: float
    params: dict
    flags: tuple = ()
    diagnosis: str = ""
    mesh: np.ndarray = field(default=None, repr=False)
    phi_ell: np.ndarray = field(default=None, repr=False)
    counts: np.ndarray = field(default=None, repr=False)

    def total_energy(self):
        return sum(self.budgets) + sum(self.stable_leak) + self.prep_energy + self.tail

    def as_dict(self):
        return {
            "prep": list(self.prep),
            "stable": [{"a": a, "b": b, "J": J} for a, b, J in self.stable],
            "collision": [list(c) for c in self.collision],
            "budgets": list(self.budgets),
            "stable_leak": list(self.stable_leak),
            "prep_energy": self.prep_energy,
            "tail": self.tail,
            "ratios": self.ratios,
            "unbounded": self.unbounded,
            "t_end": self.t_end,
            "params": self.params,
            "flags": list(self.flags),
            "diagnosis": self.diagnosis,
        }


def _components(mask):
    """Index ranges ``[i, j]`` of maximal runs of True."""
    out = []
    i = None
    for k, m in enumerate(mask):
        if m and i is None:
            i = k
        elif not m and i is not None:
            out.append((i, k - 1))
            i = None
    if i is not None:
        out.append((i, len(mask) - 1))
    return out


def segment(G, E, R, delta=0.05, delta_star=0.2, ell=100.0, t_end=None, n_mesh=4000):
    """Split ``[ell R, t_end]`` into stable and collision periods.

    Parameters
    ----------
    G : RadiationProfile
        Outgoing profile covering ``[-t_end, s_max]``.
    E : float
        Energy of the solution.
    R : float
        Radius beyond which the data are small.
    delta, delta_star : float
        Thresholds with ``delta < delta_star``; quiet times satisfy
        ``phi_ell < delta_star / 4``, very quiet ones ``phi_ell <= delta / 4``.
    ell : float
        Window ratio of the local strength.
    t_end : float, optional
        Data horizon, default ``-G.s_min``.
    n_mesh : int
        Points of the geometric time mesh; boundaries are refined by root finding.

    Raises
    ------
    InconsistencyError
        If the bubble count increases with time on the quiet set.
    """
    if not 0 < delta < delta_star:
        raise InvalidParameterError("need 0 < delta < delta_star")
    if not ell > 1:
        raise InvalidParameterError("ell must exceed 1")
    if not R > 0:
        raise InvalidParameterError("R must be positive")
    t_end = -G.s_min if t_end is None else float(t_end)
    t0 = ell * R
    if not t_end > t0:
        raise CoverageError(f"profile horizon {t_end} does not exceed ell*R = {t0}")
    if -t_end < G.s_min - 1e-9 * max(1.0, t_end):
        raise CoverageError("profile does not cover [-t_end, s_max]")
    params = {"delta": delta, "delta_star": delta_star, "ell": ell, "R": R, "E": E}
    level_q = delta_star / 4.0
    level_p = delta / 4.0
    ts = np.geomspace(t0, t_end, n_mesh)
    phil = strength(G, ts, ell).phi_ell

    def f(t):
        return float(strength(G, [t], ell).phi_ell[0]) - level_q

    def edge(i, j):
        # root of phi_ell = level_q between mesh points i and j
        try:
            return brentq(f, ts[i], ts[j], xtol=1e-12 * ts[j], rtol=1e-12)
        except ValueError:
            return 0.5 * (ts[i] + ts[j])

    quiet = phil < level_q
    comps = []
    for i, j in _components(quiet):
        a = t0 if i == 0 else edge(i - 1, i)
        b = t_end if j == n_mesh - 1 else edge(j, j + 1)
        comps.append({"i": i, "j": j, "a": a, "b": b, "meets_P": bool(np.any(phil[i:j + 1] <= level_p))})

    counts = np.full(n_mesh, -1)
    flags = []
    if not comps:
        return Segmentation(
            prep=(0.0, t_end), stable=(), collision=(), budgets=(), stable_leak=(),
            prep_energy=window_energy(G, -t_end, G.s_max), tail=0.0, ratios={},
            unbounded=False, t_end=t_end, params=params, flags=("empty_quiet_set",),
            diagnosis=(
                f"phi_ell >= delta_star/4 = {level_q:.3g} on the whole mesh [{t0:.6g}, {t_end:.6g}]; "
                "the profile is not quiet at its horizon, extend the data"
            ),
            mesh=ts, phi_ell=phil, counts=counts,
        )

    # bubble counts on the closure of the quiet set
    probe_t, probe_J = [], []
    for c in comps:
        pts = [c["a"]] + list(ts[c["i"]:c["j"] + 1]) + [c["b"]]
        Js = []
        for t in pts:
            bc = bubble_count(E, G, t)
            if bc.ambiguous and "ambiguous_count" not in flags:
                flags.append("ambiguous_count")
            Js.append(bc.J)
            probe_t.append(t)
            probe_J.append(bc.J)
        counts[c["i"]:c["j"] + 1] = Js[1:-1]
        vals, freq = np.unique(Js, return_counts=True)
        c["J"] = int(vals[np.argmax(freq)])
        if len(vals) > 1 and "count_varies_in_component" not in flags:
            flags.append("count_varies_in_component")
    order = np.argsort(probe_t, kind="stable")
    pt = np.asarray(probe_t)[order]
    pj = np.asarray(probe_J)[order]
    bad = np.flatnonzero(np.diff(pj) > 0)
    if bad.size:
        times = tuple(float(x) for k in bad for x in (pt[k], pt[k + 1]))
        raise InconsistencyError(
            f"bubble count increases with time at {len(bad)} place(s)", times
        )

    # one component per count value, following the selection rule
    chosen = []
    Js_present = sorted({c["J"] for c in comps}, reverse=True)
    for J in Js_present:
        cands = [c for c in comps if c["J"] == J]
        last_value = J == Js_present[-1]
        with_p = [c for c in cands if c["meets_P"]]
        if last_value and cands[-1]["j"] == n_mesh - 1:
            pick = cands[-1]
        elif with_p:
            pick = with_p[0]
            if len(with_p) > 1 and "several_components_meet_P" not in flags:
                flags.append("several_components_meet_P")
        else:
            pick = cands[0]
            flags.append(f"arbitrary_choice_J{J}")
        chosen.append(pick)
    chosen.sort(key=lambda c: c["a"])

    stable = tuple((float(c["a"]), float(c["b"]), int(c["J"])) for c in chosen)
    collision = tuple((stable[k][1], stable[k + 1][0]) for k in range(len(stable) - 1))
    budgets = tuple(window_energy(G, -a_next, -b) for b, a_next in collision)
    leaks = tuple(window_energy(G, -b, -a) for a, b, _ in stable)
    a1 = stable[0][0]
    prep_energy = window_energy(G, -a1, G.s_max)
    b_last = stable[-1][1]
    tail = window_energy(G, -t_end, -b_last) if b_last < t_end else 0.0
    ratios = {"a1_over_R": a1 / R, "collision": [a_next / b for b, a_next in collision]}
    return Segmentation(
        prep=(0.0, a1), stable=stable, collision=collision, budgets=budgets,
        stable_leak=leaks, prep_energy=prep_energy, tail=tail, ratios=ratios,
        unbounded=bool(chosen[-1]["j"] == n_mesh - 1), t_end=t_end, params=params,
        flags=tuple(flags), mesh=ts, phi_ell=phil, counts=counts,
    )


# -- virial functional ------------------------------------------------------------

def virial_weight(s):
    """``phi(s) = varphi(s)**2`` with a smooth ``varphi``: 1 for ``s <= 2``, 0 for ``s >= 3``."""
    vp = 1.0 - smooth_step(np.asarray(s, dtype=float) - 2.0)
    return vp * vp


def virial_weight_derivative(s):
    s = np.asarray(s, dtype=float)
    vp = 1.0 - smooth_step(s - 2.0)
    return -2.0 * vp * smooth_step_derivative(s - 2.0)


@dataclass(frozen=True, eq=False)
class VirialTrace:
    """Samples of ``J(t)``, ``J'(t)`` and ``Q = J'/J`` (NaN where ``J = 0``).

    ``dJ_fd`` is the finite-difference derivative of the ``J`` samples,
    an independent check on ``J'``.
    """

    t: np.ndarray
    J: np.ndarray
    dJ: np.ndarray
    Q: np.ndarray
    dJ_fd: np.ndarray
    cutoff: str = "phi(s) = varphi(s)^2, varphi = 1 on s <= 2, 0 on s >= 3 (C-infinity)"


@dataclass(frozen=True)
class LeastNormReport:
    """Least squared energy norm on ``[T, 5T]`` against ``6E + K0``."""

    T: float
    least_norm_sq: float
    t_least: float
    energy: float
    K0: float
    bound: float
    satisfied: bool
    q_undefined_times: tuple = ()


def virial(rec, T, K0=None):
    """Virial functional along ``rec`` on ``[T, 5T]`` and the least-norm check.

    Raises
    ------
    CoverageError
        If the regular part of the record does not reach ``5T``.
    """
    if not T > 0:
        raise InvalidParameterError("T must be positive")
    K0 = 10.0 * W_ENERGY if K0 is None else float(K0)
    times = rec.times
    tol = 0.5 * (rec.dt or 0.0) + 1e-9 * T
    if times[0] > T + tol or times[-1] < 5 * T - tol:
        raise CoverageError(f"record spans [{times[0]}, {times[-1]}], need [{T}, {5 * T}]")
    snaps = [s for s in rec.snapshots if T - tol <= s.time <= 5 * T + tol]
    if len(snaps) < 2:
        raise CoverageError("fewer than two snapshots in [T, 5T]")
    t = np.array([s.time for s in snaps])
    J = np.empty(t.size)
    dJ = np.empty(t.size)
    norms = np.empty(t.size)
    for k, s in enumerate(snaps):
        x = s.r / s.time
        phi = virial_weight(x)
        dphi = virial_weight_derivative(x)
        J[k] = max(0.0, radial_integral(s.grid, s.u**2 * phi))
        dJ[k] = radial_integral(s.grid, 2.0 * s.u * s.ut * phi - s.u**2 * dphi * s.r / s.time**2)
        norms[k] = h1l2_norm_sq(s, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        Q = np.where(J > 0, dJ / np.where(J > 0, J, 1.0), np.nan)
    dJ_fd = np.gradient(J, t) if t.size > 2 else np.full(t.size, (J[-1] - J[0]) / (t[-1] - t[0]))
    E = float(rec.energy_trace[0, 1])
    k = int(np.argmin(norms))
    bound = 6.0 * E + K0
    report = LeastNormReport(
        T=float(T), least_norm_sq=float(norms[k]), t_least=float(t[k]), energy=E, K0=K0,
        bound=bound, satisfied=bool(norms[k] <= bound),
        q_undefined_times=tuple(float(x) for x in t[J <= 0]),
    )
    return VirialTrace(t, J, dJ, Q, dJ_fd), report


# -- one-pass checks ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OnePassReport:
    """Membership sequence along a trajectory; ``None`` marks failed evaluations."""

    times: tuple
    members: tuple
    contiguous: bool
    counterexample: tuple = ()
    verdicts: tuple = field(default=(), repr=False)


def is_contiguous(seq):
    """True when the True entries (ignoring ``None``) form one run."""
    known = [m for m in seq if m is not None]
    idx = [k for k, m in enumerate(known) if m]
    return not idx or idx[-1] - idx[0] + 1 == len(idx)


def one_pass_check(trajectory, n, delta, sample_times, **membership_kw):
    """Evaluate the radiation neighbourhood along ``trajectory``.

    Extra keyword arguments go to :func:`critwave.bubbles.membership_R`.
    Non-contiguous sequences come with the states at the offending times.
    """
    from .bubbles import membership_R

    span = trajectory.times
    tol = 0.5 * float(np.max(np.diff(span))) if span.size > 1 else 0.0
    late = [t for t in sample_times if t > span[-1] + tol or t < span[0] - tol]
    if late:
        raise CoverageError(f"sample times {late} lie outside the trajectory [{span[0]}, {span[-1]}]")
    times, members, verdicts = [], [], []
    for t in sample_times:
        snap = trajectory.at(t)
        try:
            v = membership_R(snap, n, delta, **membership_kw)
            members.append(bool(v.member))
        except CritwaveError as exc:
            v = exc
            members.append(None)
        times.append(float(snap.time))
        verdicts.append(v)
    contiguous = is_contiguous(members)
    counter = ()
    if not contiguous:
        first = members.index(True)
        last = len(members) - 1 - members[::-1].index(True)
        counter = tuple(
            (times[k], trajectory.at(times[k])) for k in range(first, last + 1) if members[k] is False
        )
    return OnePassReport(tuple(times), tuple(members), contiguous, counter, tuple(verdicts))


# -- dichotomy --------------------------------------------------------------------

SCATTER = "scatter_proxy"
BLOWUP = "blowup"
UNDECIDED = "undecided"


def dichotomy_data(lambda_amp, grid, r_cut=8.0, velocity_amp=0.0, width=None):
    """``lambda W`` cut off smoothly past ``r_cut`` with a localised velocity bump.

    The ramp runs from ``r_cut`` to ``r_cut + width`` (default ``width = 2 r_cut``)
    so that it adds little gradient energy.  The bump is
    ``velocity_amp * lambda * exp(-r**2)``; a positive amplitude pushes the
    core upward.
    """
    width = 2.0 * r_cut if width is None else width
    W = cutoff(ground_state(GroundStateParam(1.0), grid), r_cut, width)
    ut = velocity_amp * lambda_amp * np.exp(-grid.r**2)
    return FieldState(grid, lambda_amp * W.u, ut, 0.0)


def classify_record(rec, r_core=1.0, decay=1e-2, sustain=0.2):
    """Classify a run as ``blowup``, ``scatter_proxy`` or ``undecided``.

    ``scatter_proxy`` requires ``sup_{r < r_core} |u|`` to stay below
    ``decay`` times its initial value over the last ``sustain`` fraction of
    the run (at least two snapshots).
    """
    if rec.outcome.blowup:
        return BLOWUP
    if not rec.outcome.completed:
        return UNDECIDED
    core = rec.grid.r < r_core
    sup = np.array([np.max(np.abs(s.u[core])) for s in rec.snapshots])
    t = rec.times
    start = t[0] + (1.0 - sustain) * (t[-1] - t[0])
    tail = sup[t >= start]
    if tail.size >= 2 and np.all(tail < decay * sup[0]):
        return SCATTER
    return UNDECIDED


@dataclass(frozen=True)
class DichotomyResult:
    lambda_amp: float
    classification: str
    energy: float
    norm_sq: float
    outcome: str
    outcome_time: float | None
    flags: tuple = ()


def dichotomy_experiment(lambda_amp, grid, cfg, r_cut=8.0, velocity_amp=0.0, **classify_kw):
    """Run ``lambda W`` data below the ground-state energy and classify the outcome.

    Raises
    ------
    PreconditionError
        If the data have energy ``>= E(W, 0)``.
    """
    from .nlsolve import evolve

    if lambda_amp == 1.0:
        return DichotomyResult(1.0, UNDECIDED, W_ENERGY, float("nan"), "not_run", None, ("threshold_case",))
    data = dichotomy_data(lambda_amp, grid, r_cut, velocity_amp)
    E = energy(data)
    if E >= W_ENERGY:
        raise PreconditionError(f"energy {E:.6g} is not below E(W,0) = {W_ENERGY:.6g}")
    rec = evolve(data, cfg)
    cls = classify_record(rec, **classify_kw)
    return DichotomyResult(
        float(lambda_amp), cls, float(E), float(h1l2_norm_sq(data)), rec.outcome.kind, rec.outcome.time
    )
