"""YAML scenarios and the pipeline that runs them.

A scenario names one kind of initial data, a grid, an evolution setup
and the diagnostics to run afterwards.  Unknown keys are rejected.
"""
import hashlib
import json
import math
import os
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .core import (
    FieldState,
    RadialGrid,
    cutoff,
    energy,
    h1l2_norm_sq,
    read_state_csv,
    smooth_step,
    superpose,
    write_state_csv,
)
from .errors import ConfigError, CritwaveError

STAGES = ("simulate", "radiate", "peel", "segment")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class BubblesData(_Strict):
    bubbles: list[tuple[Literal[-1, 1], float]]
    noise: float = 0.0

    @model_validator(mode="after")
    def _positive(self):
        if any(lam <= 0 for _, lam in self.bubbles):
            raise ValueError("every bubble lambda must be positive")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        return self


class ProfileSpec(_Strict):
    file: Optional[str] = None
    shape: Optional[Literal["gaussian"]] = None
    center: float = 3.0
    width: float = 1.0
    amplitude: float = 1.0

    @model_validator(mode="after")
    def _one(self):
        if (self.file is None) == (self.shape is None):
            raise ValueError("profile needs exactly one of 'file' or 'shape'")
        return self


class ProfileData(_Strict):
    profile: ProfileSpec


class GroundStateScaled(_Strict):
    lambda_amp: float
    r_cut: float = 8.0
    velocity_amp: float = 0.0


class GroundStateScaledData(_Strict):
    ground_state_scaled: GroundStateScaled


class BlowupODE(_Strict):
    T: float = Field(gt=0)
    r0: float = Field(gt=0)


class BlowupODEData(_Strict):
    blowup_ode: BlowupODE


class CustomSpec(_Strict):
    file: str


class CustomData(_Strict):
    custom: CustomSpec


InitialData = Union[BubblesData, ProfileData, GroundStateScaledData, BlowupODEData, CustomData]


class GridSpec(_Strict):
    dr: float = Field(gt=0)
    r_max: float = Field(gt=0)


class EvolutionSpec(_Strict):
    cfl: float = Field(0.9, gt=0, le=1)
    t_final: float = Field(0.0, ge=0)
    snapshot_stride: int = Field(100, ge=1)
    nonlinearity: Literal["focusing_quintic", "off"] = "focusing_quintic"

    @field_validator("nonlinearity", mode="before")
    @classmethod
    def _yaml_off(cls, v):
        return "off" if v is False else v  # bare ``off`` loads as a boolean


class DiagnosticsSpec(_Strict):
    ell: float = Field(100.0, gt=1)
    delta: float = Field(0.05, gt=0)
    delta_star: float = Field(0.2, gt=0)
    extraction_times: list[float] = Field(default_factory=list)
    s_window: Optional[tuple[float, float]] = None
    radius: float = Field(1.0, gt=0)
    c2: float = 100.0
    beta: float = 0.25
    n_max: int = 8


class Scenario(_Strict):
    name: str
    seed: int = 0
    initial_data: InitialData
    grid: GridSpec
    evolution: EvolutionSpec = EvolutionSpec()
    diagnostics: DiagnosticsSpec = DiagnosticsSpec()
    stages: list[Literal["simulate", "radiate", "peel", "segment"]] = ["simulate"]

    @model_validator(mode="after")
    def _diag(self):
        if not self.diagnostics.delta < self.diagnostics.delta_star:
            raise ValueError("diagnostics.delta must be smaller than diagnostics.delta_star")
        return self


_VARIANTS = {
    "bubbles": BubblesData,
    "profile": ProfileData,
    "ground_state_scaled": GroundStateScaledData,
    "blowup_ode": BlowupODEData,
    "custom": CustomData,
}


def _format_errors(exc, prefix=()):
    msgs = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in (*prefix, *err["loc"]))
        msgs.append(f"{loc}: {err['msg']}" if loc else err["msg"])
    return "; ".join(dict.fromkeys(msgs))


def _raw_variant(raw):
    init = raw.get("initial_data") if isinstance(raw, dict) else None
    if isinstance(init, dict):
        keys = [k for k in ("bubbles", "profile", "ground_state_scaled", "blowup_ode", "custom") if k in init]
        if len(keys) != 1:
            raise ConfigError(
                "initial_data: exactly one of bubbles, profile, ground_state_scaled, blowup_ode, custom "
                f"is required, found {keys or 'none'}"
            )
        return keys[0]
    return None


def parse_scenario(text, source="<string>", base_dir="."):
    """Parse YAML text into a :class:`Scenario`.

    Raises
    ------
    ConfigError
        With the line of a YAML syntax error or the dotted path of an
        invalid field.
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{source}:{where} YAML syntax error: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    variant = _raw_variant(raw)
    if variant is not None:
        model = _VARIANTS[variant]
        try:
            raw = dict(raw, initial_data=model.model_validate(raw["initial_data"]))
        except ValidationError as exc:
            raise ConfigError(f"{source}: " + _format_errors(exc, ("initial_data",))) from None
    try:
        sc = Scenario.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: " + _format_errors(exc)) from None
    for f in _referenced_files(sc):
        path = f if os.path.isabs(f) else os.path.join(base_dir, f)
        if not os.path.exists(path):
            raise ConfigError(f"{source}: initial_data file {f!r} does not exist")
    return sc


def load_scenario(path):
    with open(path) as fh:
        text = fh.read()
    return parse_scenario(text, path, os.path.dirname(os.path.abspath(path)))


def _referenced_files(sc):
    d = sc.initial_data
    if isinstance(d, ProfileData) and d.profile.file:
        return [d.profile.file]
    if isinstance(d, CustomData):
        return [d.custom.file]
    return []


def gaussian_profile(s, center, width, amplitude):
    """Derivative-of-Gaussian profile; zero mean, so its data have compact support."""
    x = (s - center) / width
    return -2.0 * amplitude * x * np.exp(-x * x)


def noise_state(grid, rng, norm, top=None):
    """Three random Gaussian shells in ``u`` and ``ut`` scaled to energy norm ``norm``."""
    r = grid.r
    u = np.zeros(grid.n_points)
    ut = np.zeros(grid.n_points)
    top = min(20.0, 0.5 * grid.r_max) if top is None else top
    for _ in range(3):
        r0 = rng.uniform(0.05 * top, top)
        w = rng.uniform(0.02 * top, 0.15 * top)
        prof = np.exp(-(((r - r0) / w) ** 2))
        u += rng.normal() * prof
        ut += rng.normal() * prof
    s = FieldState(grid, u, ut)
    return s.scaled(norm / math.sqrt(h1l2_norm_sq(s)))


def build_initial_data(sc, base_dir="."):
    """Initial state of a scenario on its grid."""
    from .dynamics import dichotomy_data
    from .linwave import RadiationProfile, data_from_profile, read_profile_csv

    grid = RadialGrid.from_extent(sc.grid.r_max, sc.grid.dr)
    d = sc.initial_data
    rng = np.random.default_rng(sc.seed)
    if isinstance(d, BubblesData):
        extra = noise_state(grid, rng, d.noise) if d.noise > 0 else FieldState.zeros(grid)
        alphas = sorted((sg * math.sqrt(lam) for sg, lam in d.bubbles), key=lambda a: -abs(a))
        return superpose(alphas, extra)
    if isinstance(d, ProfileData):
        p = d.profile
        if p.file:
            path = p.file if os.path.isabs(p.file) else os.path.join(base_dir, p.file)
            G = read_profile_csv(path)
        else:
            half = p.center + 6.0 * p.width + grid.r_max
            ds = grid.dr / 4.0
            G = RadiationProfile.from_function(
                lambda s: gaussian_profile(s, p.center, p.width, p.amplitude), -half, half, ds
            )
        return data_from_profile(G, grid)
    if isinstance(d, GroundStateScaledData):
        g = d.ground_state_scaled
        return dichotomy_data(g.lambda_amp, grid, g.r_cut, g.velocity_amp)
    if isinstance(d, BlowupODEData):
        return blowup_ode_data(grid, d.blowup_ode.T, d.blowup_ode.r0)
    path = d.custom.file if os.path.isabs(d.custom.file) else os.path.join(base_dir, d.custom.file)
    st = read_state_csv(path)
    if st.grid.dr != grid.dr:
        raise ConfigError("custom state spacing differs from grid.dr")
    return st.on_grid(grid)


def blowup_ode_data(grid, T, r0):
    """Spatially constant ODE blow-up data, cut off smoothly on ``[r0, 1.5 r0]``."""
    k = 0.75**0.25
    chi = 1.0 - smooth_step((grid.r - r0) / (0.5 * r0))
    return FieldState(grid, k * T**-0.5 * chi, 0.5 * k * T**-1.5 * chi)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def run(scenario_path, out_dir=None):
    """Run every stage of a scenario file and write ``manifest.json``.

    Stage failures are recorded in the manifest; earlier outputs are kept.
    Returns the manifest dictionary.
    """
    sc = load_scenario(scenario_path)
    base = os.path.dirname(os.path.abspath(scenario_path))
    out_dir = out_dir or os.path.join(base, f"run_{sc.name}")
    return run_scenario(sc, out_dir, base)


def run_scenario(sc, out_dir, base_dir="."):
    from .bubbles import PeelConfig, peel
    from .dynamics import segment
    from .nlsolve import EvolutionConfig, evolve, write_record

    os.makedirs(out_dir, exist_ok=True)
    stages = {}
    outputs = []
    state0 = build_initial_data(sc, base_dir)
    need = state0.support_radius() + sc.evolution.t_final + 2 * state0.grid.dr
    if sc.evolution.t_final > 0 and need > state0.grid.r_max:
        raise ConfigError(
            f"grid.r_max: {state0.grid.r_max:.6g} is smaller than data support + evolution.t_final "
            f"+ 2 dr = {need:.6g}"
        )
    E0 = energy(state0)
    rec = None
    G = None

    def fail(stage, exc):
        stages[stage] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}

    wanted = [s for s in STAGES if s in sc.stages or s == "simulate"]
    if "simulate" in wanted:
        ev = sc.evolution
        cfg = EvolutionConfig(
            cfl=ev.cfl, t_final=ev.t_final, snapshot_stride=ev.snapshot_stride,
            nonlinearity=ev.nonlinearity, snapshot_times=tuple(sc.diagnostics.extraction_times),
        )
        try:
            rec = evolve(state0, cfg)
            files = write_record(rec, out_dir, {"scenario": sc.model_dump(mode="json")})
            outputs += ["meta.json", "energy.csv"] + files
            stages["simulate"] = {"status": "ok", "outcome": rec.outcome.kind, "outcome_time": rec.outcome.time}
        except CritwaveError as exc:
            fail("simulate", exc)
    dg = sc.diagnostics
    if "radiate" in wanted:
        if rec is None:
            stages["radiate"] = {"status": "skipped", "reason": "no simulation record"}
        else:
            try:
                G, rep = radiate_record(rec, out_dir, dg.extraction_times, dg.s_window, dg.ell)
                outputs += ["gplus.csv", "strength.csv"]
                stages["radiate"] = {"status": "ok", "converged": rep.converged,
                                     "spread_relative": rep.spread_relative, "ab_relative": rep.ab_relative}
            except CritwaveError as exc:
                fail("radiate", exc)
    if "peel" in wanted:
        try:
            bl = peel(state0, None, PeelConfig(dg.c2, dg.beta, dg.n_max))
            with open(os.path.join(out_dir, "peel.json"), "w") as fh:
                json.dump(bl.as_dict(), fh, indent=2)
            outputs.append("peel.json")
            stages["peel"] = {"status": "ok", "n_bubbles": len(bl)}
        except CritwaveError as exc:
            fail("peel", exc)
    if "segment" in wanted:
        if G is None:
            stages["segment"] = {"status": "skipped", "reason": "no radiation profile"}
        else:
            try:
                seg = segment(G, E0, dg.radius, dg.delta, dg.delta_star, dg.ell)
                with open(os.path.join(out_dir, "segmentation.json"), "w") as fh:
                    json.dump(seg.as_dict(), fh, indent=2)
                outputs.append("segmentation.json")
                stages["segment"] = {"status": "ok", "n_stable": len(seg.stable)}
            except CritwaveError as exc:
                fail("segment", exc)
    manifest = {
        "scenario": sc.model_dump(mode="json"),
        "energy": E0,
        "stages": stages,
        "artifacts": {name: {"path": os.path.join(out_dir, name), "sha256": _sha256(os.path.join(out_dir, name))}
                      for name in outputs},
        "outcome": stages.get("simulate", {}).get("outcome", "not_run"),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


def radiate_record(rec, out_dir, times=None, s_window=None, ell=100.0):
    """Extract ``G+`` from ``rec`` and write ``gplus.csv`` and ``strength.csv``."""
    from .linwave import write_profile_csv
    from .radiation import ExtractionConfig, extract_gplus, strength, strength_times, write_strength_csv

    times = tuple(times or _default_times(rec))
    window = tuple(s_window or (-0.25 * times[0], 0.25 * times[0]))
    G, rep = extract_gplus(rec, ExtractionConfig(times, window))
    write_profile_csv(G, os.path.join(out_dir, "gplus.csv"), {"spread": rep.spread_profile})
    write_strength_csv(strength(G, strength_times(G), ell), os.path.join(out_dir, "strength.csv"))
    return G, rep


def _default_times(rec):
    T = rec.times[-1] - rec.times[0]
    return [T / 4.0, T / 2.0, T]


def verify_manifest(manifest):
    """True when every listed artifact exists and matches its checksum."""
    return all(
        os.path.exists(a["path"]) and _sha256(a["path"]) == a["sha256"]
        for a in manifest["artifacts"].values()
    )
