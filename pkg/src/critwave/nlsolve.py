"""Leapfrog evolution of the radial focusing quintic wave equation.

The solver advances ``v = r u``, which obeys the one-dimensional equation
``v_tt = v_rr + v**5 / r**4`` with ``v(0) = 0``.  The last grid node is a
homogeneous Dirichlet wall; callers keep it outside the causal horizon of
the data so the wall is never felt.
"""
from dataclasses import asdict, dataclass, field
import json
import math
import os

import numpy as np
from scipy.interpolate import CubicSpline

from .core import FieldState, energy, free_energy, read_state_csv, write_state_csv
from .errors import InvalidParameterError, PreconditionError

FOCUSING = "focusing_quintic"
OFF = "off"

COMPLETED = "completed"
BLOWUP = "blowup_detected"
NUMERIC_FAILURE = "numeric_failure"


@dataclass(frozen=True)
class EvolutionConfig:
    """Run parameters for :func:`evolve`.

    Parameters
    ----------
    cfl : float
        ``dt / dr``, in ``(0, 1]``.
    t_final : float
        Duration of the run (elapsed time, not absolute time).
    snapshot_stride : int
        Steps between recorded snapshots.  The final state is always kept.
    blowup_amp : float or None
        Halt once ``max |u|`` exceeds this.  ``None`` means
        ``1e3 * max(1, max |u0|)``.
    blowup_grad : float
        Halt once ``max (d_r v)**2`` exceeds this.
    nonlinearity : {"focusing_quintic", "off"}
    exterior_radius : float or None
        If set, the nonlinearity only acts where ``r > |t| + exterior_radius``
        (``t`` is the elapsed time), which evolves the exterior solution.
    check_domain : bool
        Refuse to run when the data plus the light cone reach the wall.
    energy_stride : int or None
        Steps between energy samples; defaults to ``snapshot_stride``.
    snapshot_times : tuple of float
        Extra elapsed times to record (rounded to the nearest step).
    """

    cfl: float = 0.9
    t_final: float = 1.0
    snapshot_stride: int = 10
    blowup_amp: float | None = None
    blowup_grad: float = 1e100
    nonlinearity: str = FOCUSING
    exterior_radius: float | None = None
    check_domain: bool = True
    energy_stride: int | None = None
    snapshot_times: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "snapshot_times", tuple(float(x) for x in self.snapshot_times))
        if not 0 < self.cfl <= 1:
            raise InvalidParameterError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not (self.t_final >= 0 and math.isfinite(self.t_final)):
            raise InvalidParameterError(f"t_final must be finite and >= 0, got {self.t_final}")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise InvalidParameterError("snapshot_stride must be a positive integer")
        if self.blowup_amp is not None and not self.blowup_amp > 0:
            raise InvalidParameterError("blowup_amp must be positive")
        if not self.blowup_grad > 0:
            raise InvalidParameterError("blowup_grad must be positive")
        if self.nonlinearity not in (FOCUSING, OFF):
            raise InvalidParameterError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.exterior_radius is not None and self.exterior_radius < 0:
            raise InvalidParameterError("exterior_radius must be >= 0")
        if self.energy_stride is not None and self.energy_stride < 1:
            raise InvalidParameterError("energy_stride must be a positive integer")

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return EvolutionConfig(**d)

    def to_dict(self):
        d = asdict(self)
        d["snapshot_times"] = list(self.snapshot_times)
        return d


@dataclass(frozen=True)
class Outcome:
    """How a run ended; ``time`` is the halting time for abnormal ends."""

    kind: str = COMPLETED
    time: float | None = None

    @property
    def completed(self):
        return self.kind == COMPLETED

    @property
    def blowup(self):
        return self.kind == BLOWUP


@dataclass(frozen=True, eq=False)
class SimulationRecord:
    """Snapshots, energy samples and the outcome of one run.

    The energy trace samples the staggered discrete energy of the leapfrog
    scheme (free energy for linear runs), averaged over the two half steps
    around each recorded step.  It converges to the continuum energy at
    second order and is exactly invariant for linear runs.
    """

    snapshots: tuple
    energy_trace: np.ndarray
    outcome: Outcome
    config: EvolutionConfig = field(default_factory=EvolutionConfig)
    dt: float = 0.0

    @property
    def grid(self):
        return self.snapshots[0].grid

    @property
    def times(self):
        return np.array([s.time for s in self.snapshots])

    @property
    def final(self):
        return self.snapshots[-1]

    def at(self, t):
        """Snapshot closest in time to ``t``."""
        k = int(np.argmin(np.abs(self.times - t)))
        return self.snapshots[k]

    def max_energy_drift(self):
        """``max |E(t) - E(0)| / max(|E(0)|, 1)`` over the trace."""
        e = self.energy_trace[:, 1]
        return float(np.max(np.abs(e - e[0])) / max(abs(e[0]), 1.0))


def _default_amp(u0):
    return 1e3 * max(1.0, float(np.max(np.abs(u0))))


def _check_domain(initial, cfg):
    need = initial.support_radius() + cfg.t_final + 2 * initial.grid.dr
    if need > initial.grid.r_max:
        raise PreconditionError(
            f"grid too small: support + t_final + margin = {need:.6g} > r_max = {initial.grid.r_max:.6g}"
        )


def evolve(initial, cfg):
    """Evolve ``initial`` for ``cfg.t_final``.

    Returns
    -------
    SimulationRecord
        ``outcome.kind`` is ``"blowup_detected"`` when a threshold was
        crossed and ``"numeric_failure"`` when non-finite values appeared.

    Raises
    ------
    PreconditionError
        If the light cone of the data reaches the outer wall.
    """
    if cfg.check_domain and cfg.t_final > 0:
        _check_domain(initial, cfg)
    grid = initial.grid
    r = grid.r
    dr = grid.dr
    dt = cfg.cfl * dr
    n_steps = int(math.ceil(cfg.t_final / dt - 1e-9)) if cfg.t_final > 0 else 0
    if n_steps:
        dt = cfg.t_final / n_steps
    amp = cfg.blowup_amp if cfg.blowup_amp is not None else _default_amp(initial.u)
    estride = cfg.energy_stride or cfg.snapshot_stride
    nonlinear = cfg.nonlinearity == FOCUSING
    t0 = initial.time
    lam2 = (dt / dr) ** 2
    extra_steps = {int(round(x / dt)) for x in cfg.snapshot_times if 0 < x <= cfg.t_final + 0.5 * dt} if n_steps else set()

    # Padded buffers: index 0 is the origin, index N+1 the wall.
    N = grid.n_points
    v_prev = np.zeros(N + 2)
    v_cur = np.zeros(N + 2)
    v_next = np.zeros(N + 2)
    rr = np.concatenate(([1.0], r, [1.0]))
    r_inner = r
    r4 = r**4

    def force(vi, t_elapsed):
        # r F(v / r) = v^5 / r^4, masked to the exterior cone when requested.
        f = vi**5 / r4
        if cfg.exterior_radius is not None:
            f = np.where(r_inner > abs(t_elapsed) + cfg.exterior_radius, f, 0.0)
        return f

    v_cur[1:N] = (r * initial.u)[: N - 1]
    vt0 = r * initial.ut
    vt0[N - 1] = 0.0

    def e_half(va, vb):
        # Staggered leapfrog energy between two levels; exact invariant of the linear scheme.
        kin = 0.5 * np.sum(((vb - va)[1:-1] / dt) ** 2)
        pot = 0.5 * np.sum(np.diff(va[: N + 1]) * np.diff(vb[: N + 1])) / dr**2
        if nonlinear:
            pot -= (np.sum(va[1:-1] ** 6 / r4) + np.sum(vb[1:-1] ** 6 / r4)) / 12.0
        return 4.0 * math.pi * dr * (kin + pot)

    snapshots = [initial]
    etrace = []
    outcome = Outcome()

    def lap(v):
        return v[2:] - 2.0 * v[1:-1] + v[:-2]

    if n_steps:
        acc = lap(v_cur) / dr**2
        if nonlinear:
            acc = acc + force(v_cur[1:-1], 0.0)
        v_next[1:-1] = v_cur[1:-1] + dt * vt0 + 0.5 * dt * dt * acc
        v_next[N] = 0.0
        etrace.append((t0, e_half(v_cur, v_next)))
    else:
        etrace.append((t0, (energy if nonlinear else free_energy)(initial)))

    def state_at(level_prev, level, level_next, t):
        u = level[1:-1] / r
        ut = (level_next[1:-1] - level_prev[1:-1]) / (2.0 * dt) / r
        return FieldState(grid, u, ut, t)

    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_steps + 1):
            # v_next holds level n; advance it to the current slot.
            v_prev, v_cur, v_next = v_cur, v_next, v_prev
            t_el = n * dt
            vi = v_cur[1:-1]
            if not np.all(np.isfinite(vi)):
                outcome = Outcome(NUMERIC_FAILURE, t0 + t_el)
                break
            umax = np.max(np.abs(vi / r))
            dv = np.diff(v_cur[: N + 1]) / dr
            if umax > amp or np.max(dv * dv) > cfg.blowup_grad:
                outcome = Outcome(BLOWUP, t0 + t_el)
                # keep the last regular snapshot, do not record the exploded level
                break
            acc = lap(v_cur) * lam2
            if nonlinear:
                acc = acc + dt * dt * force(vi, t_el)
            v_next[1:-1] = 2.0 * vi - v_prev[1:-1] + acc
            v_next[N] = 0.0
            last = n == n_steps
            snap_here = n % cfg.snapshot_stride == 0 or last or n in extra_steps
            if snap_here or n % estride == 0:
                st = state_at(v_prev, v_cur, v_next, t0 + t_el)
                if not (np.all(np.isfinite(st.ut))):
                    outcome = Outcome(NUMERIC_FAILURE, t0 + t_el)
                    break
                if snap_here:
                    snapshots.append(st)
                if n % estride == 0 or last:
                    etrace.append((st.time, 0.5 * (e_half(v_prev, v_cur) + e_half(v_cur, v_next))))
    return SimulationRecord(tuple(snapshots), np.array(etrace, dtype=float), outcome, cfg, dt)


def evolve_linear(initial, cfg):
    """:func:`evolve` with the nonlinearity switched off."""
    return evolve(initial, cfg.replace(nonlinearity=OFF))


def rescale_state(s, lam, grid=None):
    """``(lam^-1/2 u(r/lam), lam^-3/2 u_t(r/lam))`` on ``grid`` (default: same grid).

    Values are obtained from cubic splines of ``r u`` and ``r u_t`` through
    the origin, and vanish beyond the source extent.  Time scales to ``lam t``.
    """
    if not lam > 0:
        raise InvalidParameterError(f"lambda must be positive, got {lam!r}")
    grid = s.grid if grid is None else grid
    if lam == 1.0 and grid == s.grid:
        return s
    src = s.grid.r_with_origin
    rho = grid.r / lam
    inside = rho <= s.grid.r_max

    def pull(f):
        spline = CubicSpline(src, np.concatenate(([0.0], s.grid.r * f)))
        out = np.zeros(grid.n_points)
        out[inside] = spline(rho[inside]) / rho[inside]
        return out

    return FieldState(grid, pull(s.u) / math.sqrt(lam), pull(s.ut) / lam**1.5, lam * s.time)


# -- record directories ----------------------------------------------------------

def write_record(rec, path, extra_meta=None):
    """Write ``meta.json``, ``energy.csv`` and ``snap_<k>.csv`` into ``path``."""
    os.makedirs(path, exist_ok=True)
    files = []
    for k, snap in enumerate(rec.snapshots):
        name = f"snap_{k}.csv"
        write_state_csv(snap, os.path.join(path, name))
        files.append(name)
    np.savetxt(
        os.path.join(path, "energy.csv"), rec.energy_trace, delimiter=",",
        header="t,E", comments="", fmt="%.17g",
    )
    meta = {
        "config": rec.config.to_dict(),
        "outcome": {"kind": rec.outcome.kind, "time": rec.outcome.time},
        "dt": rec.dt,
        "grid": {"dr": rec.grid.dr, "n_points": rec.grid.n_points},
        "snapshots": [{"file": f, "t": s.time} for f, s in zip(files, rec.snapshots)],
    }
    if extra_meta:
        meta.update(extra_meta)
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2)
    return files


def read_record(path):
    with open(os.path.join(path, "meta.json")) as fh:
        meta = json.load(fh)
    snaps = tuple(read_state_csv(os.path.join(path, e["file"])) for e in meta["snapshots"])
    trace = np.loadtxt(os.path.join(path, "energy.csv"), delimiter=",", skiprows=1, ndmin=2)
    cfg = EvolutionConfig(**meta["config"])
    out = Outcome(meta["outcome"]["kind"], meta["outcome"]["time"])
    return SimulationRecord(snaps, trace, out, cfg, float(meta.get("dt", 0.0)))
