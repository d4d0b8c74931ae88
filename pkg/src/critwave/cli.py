"""Command-line front end: ``critwave <subcommand> ...``."""
import argparse
from concurrent.futures import ProcessPoolExecutor
import copy
import csv
import itertools
import json
import os
import sys

import yaml

from .errors import ConfigError, CritwaveError

SWEEP_FIELDS = ("outcome", "outcome_time", "classification", "energy", "norm_sq", "error")


def _fmt(x):
    return f"{x:.17g}" if isinstance(x, float) else ("" if x is None else str(x))


def cmd_simulate(args):
    from .scenario import run

    manifest = run(args.scenario, args.out)
    print(json.dumps({k: manifest[k] for k in ("outcome", "stages")}, indent=2))
    failed = [k for k, v in manifest["stages"].items() if v["status"] == "failed"]
    return 1 if failed else 0


def cmd_radiate(args):
    from .nlsolve import read_record
    from .scenario import radiate_record

    rec = read_record(args.run_dir)
    G, rep = radiate_record(rec, args.run_dir, args.times, args.window, args.ell)
    print(json.dumps({"converged": rep.converged, "ab_relative": rep.ab_relative,
                      "spread_relative": rep.spread_relative, "norm_sq": G.norm_sq()}))
    return 0


def cmd_peel(args):
    from .bubbles import PeelConfig, peel
    from .core import read_state_csv

    state = read_state_csv(args.state)
    bl = peel(state, None, PeelConfig(c2=args.c2, beta=args.beta, n_max=args.nmax))
    out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.state)), "peel.json")
    with open(out, "w") as fh:
        json.dump(bl.as_dict(), fh, indent=2)
    print(out)
    return 0


def cmd_segment(args):
    from .dynamics import segment
    from .linwave import read_profile_csv

    G = read_profile_csv(args.gplus)
    seg = segment(G, args.energy, args.radius, args.delta, args.delta_star, args.ell)
    out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.gplus)), "segmentation.json")
    with open(out, "w") as fh:
        json.dump(seg.as_dict(), fh, indent=2)
    print(out)
    return 0


def _set_dotted(tree, key, value):
    node = tree
    parts = key.split(".")
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"sweep key {key!r}: {p!r} is not a mapping in the template")
        node = node[p]
    node[parts[-1]] = value


def load_param_grid(path):
    """Mapping ``dotted.key -> list of values``; the sweep is their Cartesian product."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict) or not all(isinstance(v, list) for v in raw.values()):
        raise ConfigError(f"{path}: parameter grid must map keys to lists")
    keys = list(raw)
    return keys, [dict(zip(keys, combo)) for combo in itertools.product(*raw.values())] if keys else []


def run_instance(template, base_dir, params):
    """Simulate one sweep instance and classify it; failures become a row."""
    from .dynamics import classify_record
    from .scenario import build_initial_data, parse_scenario
    from .nlsolve import EvolutionConfig, evolve
    from .core import energy, h1l2_norm_sq

    row = dict(params)
    row.update(dict.fromkeys(SWEEP_FIELDS))
    try:
        tree = copy.deepcopy(template)
        for k, v in params.items():
            _set_dotted(tree, k, v)
        sc = parse_scenario(yaml.safe_dump(tree), "sweep instance", base_dir)
        state = build_initial_data(sc, base_dir)
        ev = sc.evolution
        rec = evolve(state, EvolutionConfig(cfl=ev.cfl, t_final=ev.t_final, snapshot_stride=ev.snapshot_stride,
                                            nonlinearity=ev.nonlinearity))
        row.update(outcome=rec.outcome.kind, outcome_time=rec.outcome.time,
                   classification=classify_record(rec), energy=energy(state), norm_sq=h1l2_norm_sq(state))
    except CritwaveError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def thread_cap(requested):
    env = os.environ.get("CRITWAVE_THREADS")
    cap = int(env) if env else os.cpu_count() or 1
    return max(1, min(requested or cap, cap))


def sweep(template_path, grid_path, parallelism=None, out=None):
    """Run every grid instance and write one CSV row each, in grid order."""
    with open(template_path) as fh:
        template = yaml.safe_load(fh)
    base_dir = os.path.dirname(os.path.abspath(template_path))
    keys, instances = load_param_grid(grid_path)
    workers = thread_cap(parallelism)
    if workers == 1 or len(instances) <= 1:
        rows = [run_instance(template, base_dir, p) for p in instances]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_instance, [template] * len(instances), [base_dir] * len(instances), instances))
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["index", *keys, *SWEEP_FIELDS])
        for i, row in enumerate(rows):
            w.writerow([i, *(_fmt(row[k]) for k in keys), *(_fmt(row[k]) for k in SWEEP_FIELDS)])
    finally:
        if out:
            fh.close()
    return rows


def cmd_sweep(args):
    sweep(args.template, args.grid, args.parallelism, args.out)
    return 0


def cmd_verify(args):
    from .verify import run_checks

    results = run_checks("full" if args.full else "fast")
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    return 1 if n_fail else 0


def build_parser():
    p = argparse.ArgumentParser(prog="critwave", description="Radial energy-critical wave toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario file")
    s.add_argument("scenario")
    s.add_argument("--out", help="output directory (default: run_<name> next to the scenario)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("radiate", help="extract the outgoing profile from a run directory")
    s.add_argument("run_dir")
    s.add_argument("--times", type=float, nargs="+", help="extraction times")
    s.add_argument("--window", type=float, nargs=2, metavar=("S_MIN", "S_MAX"))
    s.add_argument("--ell", type=float, default=100.0)
    s.set_defaults(func=cmd_radiate)

    s = sub.add_parser("peel", help="peel bubbles off a state CSV")
    s.add_argument("state")
    s.add_argument("--c2", type=float, default=100.0)
    s.add_argument("--beta", type=float, default=0.25)
    s.add_argument("--nmax", type=int, default=8)
    s.add_argument("--out")
    s.set_defaults(func=cmd_peel)

    s = sub.add_parser("segment", help="segment an outgoing profile CSV")
    s.add_argument("gplus")
    s.add_argument("--energy", type=float, required=True)
    s.add_argument("--delta", type=float, default=0.05)
    s.add_argument("--delta-star", type=float, default=0.2)
    s.add_argument("--ell", type=float, default=100.0)
    s.add_argument("--radius", type=float, default=1.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_segment)

    s = sub.add_parser("sweep", help="run a scenario template over a parameter grid")
    s.add_argument("template")
    s.add_argument("grid")
    s.add_argument("--parallelism", type=int)
    s.add_argument("--out", help="CSV path (default: stdout)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("verify", help="run the acceptance checks")
    s.add_argument("--full", action="store_true")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CritwaveError, OSError) as exc:
        print(f"critwave {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
