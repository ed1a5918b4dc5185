"""Command-line front end for reproducible experiments.

Four subcommands cover the lab workflow: ``simulate`` runs random-start
ensembles, ``construct`` builds and certifies an orbit for a word,
``rotation-set`` estimates reachable rotation data, and ``entropy``
brackets the itinerary growth rate.  Outputs are plot-ready tables and
JSON; every run is byte-identical for a given seed, including
multi-worker runs (per-orbit seed streams merged in index order).

Exit codes: 0 success, 2 configuration error, 3 construction failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from . import _kernel
from .admissible import (
    BalanceViolation,
    NonConvergence,
    PlanError,
    ValidationMismatch,
    close_periodic,
    insert_idle_runs,
    minimize_arclength,
    plan_word,
    validate_orbit,
)
from .admissible.planner import _coerce_word
from .entropy import count_itineraries
from .flow import simulate
from .rotation import (
    random_phase_point,
    sample_rotation_set,
)

SIMULATE_HEADER = [
    "seed", "T", "r0", "n_x", "n_y", "n_z",
    "word_length", "word_prefix", "singular",
]
ROTATION_HEADER = [
    "seed", "T", "speed", "word_length", "n_x", "n_y", "n_z", "prefix",
]
ENTROPY_HEADER = [
    "T", "eps0", "r0", "n_orbits", "N_hat",
    "log_rate", "f", "upper_rate", "lower_rate",
]
CONTACT_HEADER = [
    "index", "cell_x", "cell_y", "cell_z", "edge_axis", "edge_a", "edge_b",
    "edge_lo", "parameter", "angle", "force", "role",
]


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# formatting helpers


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _write_json(path: Path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _event_lines(rec):
    """The record's events in the one-object-per-line wire format."""
    kind_names = {
        _kernel.KIND_FACE: "face",
        _kernel.KIND_COLLISION: "collision",
        _kernel.KIND_GRAZE: "graze",
    }
    for i in range(rec.event_times.size):
        kind = int(rec.event_kinds[i])
        sign = int(rec.event_b[i]) if kind == _kernel.KIND_FACE else 0
        payload = {
            "t": float(rec.event_times[i]),
            "kind": kind_names[kind],
            "axis": int(rec.event_axes[i]),
            "sign": sign,
            "q": [float(x) for x in rec.event_points[i]],
            "v": [float(x) for x in rec.event_velocities[i]],
        }
        yield json.dumps(payload, separators=(",", ":"))


def _write_jsonl(path: Path, rec):
    with open(path, "w") as fh:
        for line in _event_lines(rec):
            fh.write(line + "\n")


def _word_prefix(word, limit=64):
    text = str(word)
    return text[:limit] if text else "-"


def _plan_payload(plan, r0):
    return {
        "word": str(plan.word),
        "radius": r0,
        "cyclic": plan.cyclic,
        "shift": list(plan.shift) if plan.shift is not None else None,
        "compartments": [list(c) for c in plan.compartments],
        "case_names": list(plan.case_names),
        "time_bounds": [float(b) for b in plan.time_bounds],
        "entry_index": list(plan.entry_index),
        "contacts": [
            {
                "cell": list(pc.cell),
                "edge": {
                    "axis": pc.edge.line.axis,
                    "trans": list(pc.edge.line.trans),
                    "lo": pc.edge.lo,
                },
                "force": pc.force,
                "role": pc.role,
                "compartment": pc.compartment,
            }
            for pc in plan.contacts
        ],
    }


def _contact_rows(orbit):
    for i, pc in enumerate(orbit.plan.contacts):
        yield (
            i,
            pc.cell[0], pc.cell[1], pc.cell[2],
            pc.edge.line.axis, pc.edge.line.trans[0], pc.edge.line.trans[1],
            pc.edge.lo,
            float(orbit.params[i]), float(orbit.angles[i]),
            pc.force, pc.role,
        )


# ---------------------------------------------------------------------------
# configuration file support


def _load_config(path: str) -> dict:
    """Plain key=value lines; '#' starts a comment."""
    cfg = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def _apply_config(sub: argparse.ArgumentParser, cfg: dict):
    """Install config values as subcommand defaults; explicit flags win."""
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in cfg.items():
        dest = key.replace("-", "_")
        action = actions.get(dest)
        if action is None or dest in ("help", "config"):
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
            defaults[dest] = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                defaults[dest] = action.type(raw)
            except ValueError as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from exc
        else:
            defaults[dest] = raw
    sub.set_defaults(**defaults)


# ---------------------------------------------------------------------------
# argument parsing


def _common(sub, *, jobs=False):
    sub.add_argument("--config", metavar="FILE",
                     help="key=value file supplementing flags (flags win)")
    sub.add_argument("--out", metavar="DIR", default=".",
                     help="output directory (created if missing)")
    sub.add_argument("--seed", type=int, default=0)
    if jobs:
        sub.add_argument("--jobs", type=int, default=1,
                         help="worker processes; results are merged in "
                              "orbit order so the output does not depend "
                              "on this")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tricylinder",
        description="Billiard flow on the three-torus with three "
                    "orthogonal cylindrical scatterers.",
    )
    subs = parser.add_subparsers(dest="command", metavar="command")
    subs.required = True
    index = {}

    s = index["simulate"] = subs.add_parser(
        "simulate", help="random-start ensemble summaries")
    _common(s, jobs=True)
    s.add_argument("--r0", type=float, default=0.1)
    s.add_argument("--T", type=float, default=100.0)
    s.add_argument("--n", type=int, default=100, help="number of orbits")
    s.add_argument("--events", action="store_true",
                   help="also write per-orbit event JSONL files")

    c = index["construct"] = subs.add_parser(
        "construct", help="build and certify an admissible orbit")
    _common(c)
    c.add_argument("--word", help="letters aAbBcC, e.g. abAc")
    c.add_argument("--r0", type=float, default=0.05)
    c.add_argument("--target-speed", type=float, default=None,
                   help="slow the orbit to this speed by idle insertion")
    c.add_argument("--periodic", action="store_true",
                   help="close the word into a periodic orbit")
    c.add_argument("--max-extension", type=int, default=6,
                   help="letters allowed when closing a word that does "
                        "not return to its entry state")

    r = index["rotation-set"] = subs.add_parser(
        "rotation-set", help="sample reachable rotation data")
    _common(r, jobs=True)
    r.add_argument("--r0", type=float, default=0.1)
    r.add_argument("--T", type=float, default=100.0)
    r.add_argument("--n", type=int, default=100)
    r.add_argument("--depth", type=int, default=6, help="prefix tree depth")
    r.add_argument("--prefix-len", type=int, default=64)
    r.add_argument("--words", default=None,
                   help="comma-separated words to realize constructively")

    e = index["entropy"] = subs.add_parser(
        "entropy", help="itinerary counting against the analytic bounds")
    _common(e, jobs=True)
    e.add_argument("--r0", type=float, default=0.1)
    e.add_argument("--T-grid", default="10,20,40",
                   help="comma-separated horizon times")
    e.add_argument("--n", type=int, default=1000)
    e.add_argument("--eps0", type=float, default=0.1)

    return parser, index


def _check(cond, message):
    if not cond:
        raise ConfigError(message)


def _reduced_text(text):
    word = _coerce_word(text)
    _check(str(word) == text, f"word {text!r} is not reduced")
    return word


# ---------------------------------------------------------------------------
# simulate


def _simulate_one(task):
    seed, index, T, r0, keep = task
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    q, v = random_phase_point(rng, r0)
    rec = simulate(q, v, T, r0, record_events=keep)
    row = (
        seed, T, r0,
        rec.n_x, rec.n_y, rec.n_z,
        len(rec.word), _word_prefix(rec.word), int(rec.singular),
    )
    lines = list(_event_lines(rec)) if keep else None
    return index, row, lines


def cmd_simulate(args, out: Path):
    _check(args.n >= 1, "--n must be at least 1")
    _check(0.0 < args.r0 < 0.5, "--r0 must lie in (0, 0.5)")
    _check(args.T > 0, "--T must be positive")
    tasks = [(args.seed, i, args.T, args.r0, args.events) for i in range(args.n)]
    if args.jobs > 1:
        with Pool(args.jobs) as pool:
            results = pool.map(_simulate_one, tasks)
    else:
        results = [_simulate_one(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    _write_csv(out / "summary.csv", SIMULATE_HEADER, (r[1] for r in results))
    if args.events:
        events_dir = out / "events"
        events_dir.mkdir(exist_ok=True)
        for index, _, lines in results:
            with open(events_dir / f"orbit_{index:05d}.jsonl", "w") as fh:
                for line in lines:
                    fh.write(line + "\n")
    print(f"simulate: {args.n} orbits, T={_fmt(args.T)}, r0={_fmt(args.r0)} "
          f"-> {out / 'summary.csv'}")
    return 0


# ---------------------------------------------------------------------------
# construct


def cmd_construct(args, out: Path):
    _check(args.word is not None, "construct needs --word")
    word = _reduced_text(args.word)
    _check(0.0 < args.r0 <= 0.2, "--r0 must lie in (0, 0.2] for construction")
    if args.target_speed is not None:
        _check(not args.periodic, "--target-speed applies to anchored "
                                  "realizations, not --periodic")
        _check(args.target_speed > 0, "--target-speed must be positive")

    if args.periodic:
        orbit = close_periodic(word, args.r0, max_extension=args.max_extension)
        _write_json(out / "plan.json", _plan_payload(orbit.plan, args.r0))
        _write_csv(out / "contacts.csv", CONTACT_HEADER, _contact_rows(orbit))
        _write_json(out / "closure.json", {
            "word": str(orbit.plan.word),
            "shift": list(orbit.plan.shift),
            "period": orbit.length,
            "closure_error": orbit.closure_error,
            "validated": orbit.validated,
        })
        print(f"construct: periodic {orbit.plan.word}, period "
              f"{_fmt(orbit.length)}, shift {orbit.plan.shift}, closure "
              f"{orbit.closure_error:.3e} -> {out}")
        return 0

    orbit = minimize_arclength(plan_word(word), args.r0)
    if args.target_speed is not None:
        orbit = insert_idle_runs(orbit, args.target_speed)
    rec = validate_orbit(orbit)
    _write_json(out / "plan.json", _plan_payload(orbit.plan, args.r0))
    _write_csv(out / "contacts.csv", CONTACT_HEADER, _contact_rows(orbit))
    _write_jsonl(out / "orbit.jsonl", rec)
    # Report the chain's own traversal: the shot record stops short of
    # the terminal anchor, so its window would understate the time.
    codes = [int(c) for c in orbit.plan.word.codes]
    net = [0, 0, 0]
    for c in codes:
        net[c // 2] += 1 if c % 2 == 0 else -1
    _write_csv(out / "rotation.csv", ROTATION_HEADER, [(
        args.seed, orbit.length, orbit.speed, len(codes),
        net[0], net[1], net[2], _word_prefix(rec.word),
    )])
    print(f"construct: {orbit.plan.word} at r0={_fmt(args.r0)}, length "
          f"{_fmt(orbit.length)}, speed {_fmt(orbit.speed)}, "
          f"{rec.n_collisions} reflections -> {out}")
    return 0


# ---------------------------------------------------------------------------
# rotation-set


def cmd_rotation_set(args, out: Path):
    _check(args.n >= 1, "--n must be at least 1")
    _check(0.0 < args.r0 < 0.5, "--r0 must lie in (0, 0.5)")
    _check(args.T > 0, "--T must be positive")
    est = sample_rotation_set(
        args.n, args.T, args.r0, args.seed,
        prefix_len=args.prefix_len, tree_depth=args.depth, jobs=args.jobs,
    )
    _write_csv(out / "samples.csv", ROTATION_HEADER, (
        (
            args.seed, s.T, s.vector.speed, s.word_length,
            s.crossings[0], s.crossings[1], s.crossings[2],
            str(s.vector.direction) or "-",
        )
        for s in est.samples
    ))
    _write_json(out / "prefix_tree.json", est.prefix_tree)
    message = (f"rotation-set: {len(est.samples)} samples "
               f"({est.n_singular} singular, {est.n_truncated} truncated "
               f"dropped) -> {out}")
    if args.words:
        _check(args.r0 <= 0.2, "--words constructions need r0 <= 0.2")
        rows = []
        for text in args.words.split(","):
            word = _reduced_text(text.strip())
            orbit = minimize_arclength(plan_word(word), args.r0)
            rec = validate_orbit(orbit)
            rows.append((
                args.seed, orbit.length, orbit.speed, len(word),
                rec.n_x, rec.n_y, rec.n_z, _word_prefix(word),
            ))
        _write_csv(out / "constructed.csv", ROTATION_HEADER, rows)
        message += f" (+{len(rows)} constructed)"
    print(message)
    return 0


# ---------------------------------------------------------------------------
# entropy


def cmd_entropy(args, out: Path):
    _check(args.n >= 1, "--n must be at least 1")
    _check(0.0 < args.r0 < 0.5, "--r0 must lie in (0, 0.5)")
    _check(0.0 < args.eps0 < 0.5, "--eps0 must lie in (0, 0.5)")
    try:
        grid = tuple(float(x) for x in args.T_grid.split(","))
    except ValueError as exc:
        raise ConfigError(f"--T-grid: {exc}") from exc
    _check(all(t > 0 for t in grid), "--T-grid times must be positive")
    _check(list(grid) == sorted(grid), "--T-grid must increase")
    report = count_itineraries(args.n, grid, args.eps0, args.r0, args.seed,
                               jobs=args.jobs)
    _write_csv(out / "entropy.csv", ENTROPY_HEADER, (
        tuple(row[k] for k in ENTROPY_HEADER) for row in report.rows()
    ))
    print(f"entropy: {args.n} orbits over T grid {args.T_grid} -> "
          f"{out / 'entropy.csv'}")
    return 0


# ---------------------------------------------------------------------------
# entry point


COMMANDS = {
    "simulate": cmd_simulate,
    "construct": cmd_construct,
    "rotation-set": cmd_rotation_set,
    "entropy": cmd_entropy,
}


def main(argv=None) -> int:
    parser, index = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            _apply_config(index[args.command], _load_config(args.config))
            args = parser.parse_args(argv)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BalanceViolation, NonConvergence, PlanError,
            ValidationMismatch) as exc:
        print(f"construction failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
