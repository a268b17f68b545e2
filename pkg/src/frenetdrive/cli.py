"""Command-line interface.

    frenetdrive run   --scenario F [--config F] [--seed N] --out DIR [--plot]
    frenetdrive fan   --mode lateral|velocity [--config F] --out F [--plot]
    frenetdrive suite --manifest F --out DIR

Exit codes: 0 on clean completion, 2 when a run ends on a collision or
blocked ego, 1 on usage, input or harness errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .config import Config, load_config
from .errors import PlanningError, ScenarioError
from .planner import gen_lateral, gen_velocity_keeping
from .polynomial import sample

log = logging.getLogger("frenetdrive")

FAN_COLUMNS = ("candidate_id", "t", "value", "velocity", "target")
FAN_DT = 0.02
INFRACTION_TERMINATIONS = ("collision_stop", "blocked")


def _parse_triple(text: str):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return tuple(parts)


def fan_rows(mode: str, cfg: Config, start=None, v_des: float = 10.0) -> List[tuple]:
    """Every candidate profile of one axis sampled at :data:`FAN_DT`."""
    if mode == "lateral":
        start = start or (0.0, 0.0, 0.0)
        cands = gen_lateral(start, cfg.grid, cfg.weights)
    elif mode == "velocity":
        start = start or (0.0, 8.0, 0.0)
        cands = gen_velocity_keeping(start, v_des, cfg.grid, cfg.weights)
    else:
        raise ScenarioError(f"unknown fan mode {mode!r}")
    rows = []
    for cid, c in enumerate(cands):
        n = int(round(c.poly.T / FAN_DT))
        t = np.arange(n + 1) * FAN_DT
        t[-1] = c.poly.T
        pos, vel, _, _ = sample(c.poly, t)
        target = c.tc.target[0]
        rows.extend((cid, float(ti), float(p), float(v), float(target)) for ti, p, v in zip(t, pos, vel))
    return rows


def write_fan(rows, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FAN_COLUMNS)
        for cid, t, p, v, target in rows:
            w.writerow([cid, f"{t:.6f}", f"{p:.6f}", f"{v:.6f}", f"{target:.6f}"])
    return path


def cmd_run(args) -> int:
    from .sim import load_scenario, run_scenario, write_outputs

    scenario = load_scenario(args.scenario)
    cfg = load_config(args.config)
    result = run_scenario(scenario, cfg, args.seed)
    mpath, cpath = write_outputs(result, args.out)
    print(f"metrics: {mpath}")
    print(f"trajectory: {cpath}")
    if args.plot:
        from .plotting import plot_run
        print(f"figure: {plot_run(result, Path(args.out) / 'trajectory.png')}")
    m = result.metrics
    print(f"termination={m.termination} route_completion={m.route_completion:.2f} "
          f"infraction_penalty={m.infraction_penalty:.4f} driving_score={m.driving_score:.2f}")
    return 2 if m.termination in INFRACTION_TERMINATIONS else 0


def cmd_fan(args) -> int:
    cfg = load_config(args.config)
    rows = fan_rows(args.mode, cfg, args.start, args.v_des)
    path = write_fan(rows, args.out)
    n = len({r[0] for r in rows})
    print(f"{n} candidates -> {path}")
    if args.plot:
        from .plotting import plot_fan
        print(f"figure: {plot_fan(rows, args.mode, Path(args.out).with_suffix('.png'))}")
    return 0


def _load_manifest(path: Path):
    from .roadmap import load_json

    doc = load_json(path)
    routes = doc.get("routes") if isinstance(doc, dict) else doc
    if not isinstance(routes, list):
        raise ScenarioError(f"{path}: expected a list of routes")
    if not routes:
        raise ScenarioError(f"{path}: manifest lists no routes")
    out = []
    for i, r in enumerate(routes):
        if isinstance(r, str):
            r = {"scenario": r}
        if not isinstance(r, dict) or "scenario" not in r:
            raise ScenarioError(f"{path}: routes[{i}] needs a 'scenario'")
        cfg = r.get("config")
        out.append((path.parent / r["scenario"], None if cfg is None else path.parent / cfg, int(r.get("seed", 0))))
    return out


SUITE_COLUMNS = ("route", "termination", "route_completion", "infraction_penalty", "driving_score",
                 "distance_driven")


def cmd_suite(args) -> int:
    from .sim import aggregate, load_scenario, run_scenario, write_outputs

    manifest = Path(args.manifest)
    routes = _load_manifest(manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports, rows = [], []
    for i, (scen, cfg_path, seed) in enumerate(routes):
        scenario = load_scenario(scen)
        result = run_scenario(scenario, load_config(cfg_path), seed)
        name = f"{i:02d}_{scen.stem}"
        write_outputs(result, out / name)
        m = result.metrics
        reports.append(m)
        rows.append((name, m.termination, m.route_completion, m.infraction_penalty, m.driving_score,
                     m.distance_driven))
        print(f"{name}: {m.termination} score={m.driving_score:.2f}")
    summary = aggregate(reports)
    (out / "aggregate.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    with (out / "routes.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUITE_COLUMNS)
        for r in rows:
            w.writerow([r[0], r[1]] + [f"{v:.6f}" for v in r[2:]])
    print(f"mean driving_score={summary['driving_score']:.2f} "
          f"route_completion={summary['route_completion']:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frenetdrive", description="Frenet-frame planner and closed-loop simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario")
    r.add_argument("--scenario", required=True)
    r.add_argument("--config")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.add_argument("--plot", action="store_true", help="also render trajectory.png")
    r.set_defaults(func=cmd_run)

    f = sub.add_parser("fan", help="emit the candidate fan of one axis as CSV")
    f.add_argument("--mode", required=True, choices=("lateral", "velocity"))
    f.add_argument("--config")
    f.add_argument("--out", required=True)
    f.add_argument("--start", type=_parse_triple, help="start (pos,vel,acc)")
    f.add_argument("--v-des", type=float, default=10.0, help="desired speed for the velocity fan")
    f.add_argument("--plot", action="store_true", help="also render a PNG next to the CSV")
    f.set_defaults(func=cmd_fan)

    s = sub.add_parser("suite", help="run every route of a manifest and aggregate")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_suite)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, PlanningError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # a crash in the harness, not a driving outcome
        log.exception("harness failure")
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
