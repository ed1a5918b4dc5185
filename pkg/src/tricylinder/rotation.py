"""Homotopical rotation data of orbit segments.

An orbit segment of duration T carries a reduced word; its average speed
is |word| / T and its direction is the initial stretch of the word, read
as an address into the space of ends of the Cayley tree.  Sampling many
random segments gives an inner picture of the attainable (speed,
direction) pairs; the total-crossing bound caps every speed by
sqrt(3) + 3/T, so the whole picture lives in a ball of radius sqrt(3).
"""

from __future__ import annotations

from dataclasses import dataclass
from multiprocessing import Pool

import numpy as np

from .flow import OrbitRecord, random_phase_point, simulate
from .words import EndPrefix, RotationVector

SQRT3 = float(np.sqrt(3.0))

DEFAULT_PREFIX_LEN = 64
DEFAULT_TREE_DEPTH = 6


@dataclass(frozen=True, eq=False)
class RotationSample:
    vector: RotationVector
    T: float
    word_length: int
    crossings: tuple[int, int, int]
    provenance: str


@dataclass(eq=False)
class RotationSetEstimate:
    samples: list[RotationSample]
    prefix_tree: dict
    T: float
    r0: float
    seed: int
    n_singular: int = 0
    n_truncated: int = 0


@dataclass(frozen=True)
class SpeedBoundCheck:
    passed: bool
    slack: float


def speed_bound(T: float) -> float:
    """Radius of the ball certain to contain every duration-T speed."""
    return SQRT3 + 3.0 / T


def rotation_vector(record: OrbitRecord, prefix_len: int = DEFAULT_PREFIX_LEN) -> RotationSample:
    """Terminal-time rotation data of a finished orbit record.

    The limit object is approximated by the plain value at time T; no
    averaging is applied.
    """
    T = record.final.time - record.initial.time
    if T <= 0:
        raise ValueError("record must cover positive time")
    word = record.word
    n = len(word)
    prefix = EndPrefix(word.codes[: min(prefix_len, n)], _trusted=True)
    vec = RotationVector(speed=n / T, direction=prefix)
    return RotationSample(
        vector=vec,
        T=T,
        word_length=n,
        crossings=record.crossing_counts,
        provenance="record",
    )


def check_speed_bound(record: OrbitRecord) -> SpeedBoundCheck:
    """Total crossings against sqrt(3)*T + 3.  A failure here is not a
    property of the orbit, it is a bug in the stepping code."""
    T = record.final.time - record.initial.time
    total = sum(record.crossing_counts)
    slack = SQRT3 * T + 3.0 - total
    return SpeedBoundCheck(passed=slack >= 0.0, slack=slack)


# ----------------------------------------------------------------------
# ensemble sampling


def _orbit_rng(seed: int, index: int) -> np.random.Generator:
    # One child stream per orbit, independent of how work is batched.
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _sample_one(args):
    seed, index, T, r0, prefix_len = args
    rng = _orbit_rng(seed, index)
    q, v = random_phase_point(rng, r0)
    rec = simulate(q, v, T, r0, record_events=False)
    if rec.singular:
        return ("singular", None)
    if rec.truncated:
        return ("truncated", None)
    sample = rotation_vector(rec, prefix_len)
    return (
        "ok",
        RotationSample(
            vector=sample.vector,
            T=sample.T,
            word_length=sample.word_length,
            crossings=sample.crossings,
            provenance=f"seed={seed}:{index}",
        ),
    )


def sample_rotation_set(
    n_orbits: int,
    T: float,
    r0: float,
    seed: int,
    *,
    prefix_len: int = DEFAULT_PREFIX_LEN,
    tree_depth: int = DEFAULT_TREE_DEPTH,
    jobs: int = 1,
) -> RotationSetEstimate:
    """Simulate n_orbits random starts and aggregate their rotation data.

    Deterministic for a given seed: orbit i draws from the child stream
    (seed, i) no matter how many workers run, and results are merged in
    index order.
    """
    if n_orbits < 1:
        raise ValueError("need at least one orbit")
    tasks = [(seed, i, float(T), float(r0), prefix_len) for i in range(n_orbits)]
    if jobs > 1:
        with Pool(jobs) as pool:
            results = pool.map(_sample_one, tasks, chunksize=max(1, n_orbits // (4 * jobs)))
    else:
        results = [_sample_one(t) for t in tasks]

    samples = []
    n_singular = 0
    n_truncated = 0
    for status, sample in results:
        if status == "ok":
            samples.append(sample)
        elif status == "singular":
            n_singular += 1
        else:
            n_truncated += 1
    tree = build_prefix_tree(samples, depth=tree_depth)
    return RotationSetEstimate(
        samples=samples,
        prefix_tree=tree,
        T=float(T),
        r0=float(r0),
        seed=seed,
        n_singular=n_singular,
        n_truncated=n_truncated,
    )


# ----------------------------------------------------------------------
# prefix tree


def _new_node() -> dict:
    return {"count": 0, "min_speed": None, "max_speed": None, "children": {}}


def _touch(node: dict, speed: float) -> None:
    node["count"] += 1
    if node["min_speed"] is None or speed < node["min_speed"]:
        node["min_speed"] = speed
    if node["max_speed"] is None or speed > node["max_speed"]:
        node["max_speed"] = speed


def build_prefix_tree(samples, depth: int = DEFAULT_TREE_DEPTH) -> dict:
    """Aggregate samples into a tree keyed by direction-prefix letters.

    Each node records how many samples pass through it and the speed range
    seen among them; children are keyed by the letter character.
    """
    root = _new_node()
    for s in samples:
        speed = s.vector.speed
        _touch(root, speed)
        node = root
        for letter in s.vector.direction[:depth]:
            node = node["children"].setdefault(str(letter), _new_node())
            _touch(node, speed)
    return root


def merge_prefix_trees(a: dict, b: dict) -> dict:
    """Commutative, associative merge of two aggregates."""
    out = _new_node()
    out["count"] = a["count"] + b["count"]
    mins = [x["min_speed"] for x in (a, b) if x["min_speed"] is not None]
    maxs = [x["max_speed"] for x in (a, b) if x["max_speed"] is not None]
    out["min_speed"] = min(mins) if mins else None
    out["max_speed"] = max(maxs) if maxs else None
    keys = set(a["children"]) | set(b["children"])
    for k in sorted(keys):
        if k in a["children"] and k in b["children"]:
            out["children"][k] = merge_prefix_trees(a["children"][k], b["children"][k])
        else:
            src = a["children"].get(k) or b["children"][k]
            out["children"][k] = _copy_tree(src)
    return out


def _copy_tree(node: dict) -> dict:
    out = _new_node()
    out["count"] = node["count"]
    out["min_speed"] = node["min_speed"]
    out["max_speed"] = node["max_speed"]
    for k, child in node["children"].items():
        out["children"][k] = _copy_tree(child)
    return out
