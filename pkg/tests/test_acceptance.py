"""Full-scale acceptance runs, one test per headline guarantee.

Each test here drives an end-to-end claim at the size it is meant to
hold, so the file is slower than the unit files by design.  The unit
files pin internals; these runs certify the package does what it says
when pushed to realistic scale.  `pytest -v tests/test_acceptance.py`
prints one verdict line per guarantee, in declaration order:

  1. crossing envelope and speed cap over random ensembles
  2. every random word constructible, paced variants on request
  3. periodic closures hold over three full periods
  4. minimizer against a brute-force grid oracle
  5. itinerary growth inside the analytic bracket
  6. conservation, time reversal, bytewise determinism
  7. bulk word-algebra properties
"""

import json
import math

import numpy as np
from mpmath import mp

from tricylinder import _kernel
from tricylinder.admissible import (
    close_periodic,
    insert_idle_runs,
    minimize_arclength,
    plan_word,
    validate_orbit,
)
from tricylinder.admissible.refine import _Chain
from tricylinder.admissible.validate import _shoot
from tricylinder.cli import main as cli_main
from tricylinder.entropy import (
    LOWER_RATE,
    UPPER_RATE,
    lower_bound_words,
    upper_bound_f,
)
from tricylinder.flow import simulate
from tricylinder.rotation import (
    check_speed_bound,
    random_phase_point,
    rotation_vector,
)
from tricylinder.words import (
    ReducedWord,
    cayley_distance,
    concat,
    count_reduced_words,
    random_word,
    reduce,
)
from util import grid_minimize_chain

SQRT3 = math.sqrt(3.0)
SEED = 20260822


def test_crossing_envelope_over_random_ensembles():
    """10^4 random orbits per radius: crossings <= sqrt(3)T + 3 with zero
    violations, reduced speed <= sqrt(3) + 3/T."""
    T = 1000.0
    cap = SQRT3 + 3.0 / T
    envelope = SQRT3 * T + 3.0
    for radius in (0.05, 0.1, 0.2):
        rng = np.random.default_rng(
            np.random.SeedSequence([SEED, 1, int(radius * 100)])
        )
        min_slack = math.inf
        max_speed = 0.0
        for _ in range(10_000):
            q, v = random_phase_point(rng, radius)
            rec = simulate(q, v, T, radius, record_events=False)
            total = rec.n_x + rec.n_y + rec.n_z
            assert total <= envelope, (radius, total)
            chk = check_speed_bound(rec)
            assert chk.passed
            min_slack = min(min_slack, chk.slack)
            speed = rotation_vector(rec).vector.speed
            assert speed <= cap, (radius, speed)
            max_speed = max(max_speed, speed)
        print(
            f"r0={radius}: min crossing slack {min_slack:.1f}, "
            f"max speed {max_speed:.4f} (cap {cap:.4f})"
        )


def test_every_random_word_is_constructible(tmp_path):
    """100 random length-50 words at r0=0.02 all minimize and certify,
    each compartment crossing within its time bound and the whole orbit
    no slower than the anchored floor; paced variants land within 2% of
    the requested speed without disturbing the word."""
    rng = np.random.default_rng(np.random.SeedSequence([SEED, 2]))
    words = [str(random_word(50, rng)) for _ in range(100)]
    floor = 1.0 / 3.0 - 0.05
    kept = {}
    worst_cell = 0.0
    slowest = math.inf
    for k, text in enumerate(words):
        orbit = minimize_arclength(plan_word(text), 0.02)
        rec = validate_orbit(orbit)
        assert str(rec.word) == text
        assert max(orbit.per_cell_times) <= 3.0, text
        assert orbit.speed >= floor, text
        worst_cell = max(worst_cell, max(orbit.per_cell_times))
        slowest = min(slowest, orbit.speed)
        if k < 2:
            kept[text] = orbit
    print(f"worst cell time {worst_cell:.3f}, slowest speed {slowest:.4f}")

    # same construction through the command front end
    for k, text in enumerate(words[:5]):
        out = tmp_path / f"base{k}"
        assert (
            cli_main(
                ["construct", "--word", text, "--r0", "0.02",
                 "--out", str(out)]
            )
            == 0
        )
        payload = json.loads((out / "plan.json").read_text())
        assert payload["word"] == text
        row = (out / "rotation.csv").read_text().splitlines()[1].split(",")
        assert float(row[2]) >= floor

    # paced variants: library on two words, front end on a third
    for s in (0.05, 0.15, 0.30):
        for text in words[:2]:
            slowed = insert_idle_runs(kept[text], s)
            rec = validate_orbit(slowed)
            assert str(rec.word) == text
            assert abs(slowed.speed - s) <= 0.02 * s, (text, s)
        out = tmp_path / f"paced{int(s * 100)}"
        assert (
            cli_main(
                ["construct", "--word", words[2], "--r0", "0.02",
                 "--target-speed", str(s), "--out", str(out)]
            )
            == 0
        )
        payload = json.loads((out / "plan.json").read_text())
        assert payload["word"] == words[2]
        row = (out / "rotation.csv").read_text().splitlines()[1].split(",")
        assert abs(float(row[2]) - s) <= 0.02 * s


def test_periodic_orbits_close_over_three_periods():
    """20 cyclically reduced words of length <= 10: shoot the closed
    orbit for three periods and pair every reflection with its image one
    period later; positions must differ by the lattice shift and
    velocities not at all, both to 1e-6."""
    rng = np.random.default_rng(np.random.SeedSequence([SEED, 3]))
    lengths = [2, 3, 4, 5, 6, 7, 8, 9, 10]
    words = []
    k = 0
    while len(words) < 20:
        w = random_word(lengths[k % len(lengths)], rng)
        codes = [int(c) for c in w.codes]
        if codes[0] == (codes[-1] ^ 1) or str(w) in words:
            continue
        words.append(str(w))
        k += 1

    for text in words:
        orbit = close_periodic(text, 0.05)
        assert str(orbit.plan.word).startswith(text)
        assert orbit.closure_error < 1e-6
        old_dps = mp.dps
        try:
            mp.dps = orbit.mp_dps
            chain = _Chain(orbit.plan, orbit.r0)
            pts, rho, uhat = chain._geometry(orbit.mp_u, orbit.mp_theta)
            period = sum(rho, mp.mpf(0))
            shift = orbit.plan.shift
            events, _, _ = _shoot(
                list(pts[0]), list(uhat[0]), mp.mpf(orbit.r0),
                3 * period - rho[-1] / 2,
            )
            coll = [e for e in events if e[1] == _kernel.KIND_COLLISION]
            n_c = len(orbit.plan.contacts)
            assert len(coll) == 3 * n_c - 1, text
            for j in range(len(coll) - n_c):
                a, b = coll[j], coll[j + n_c]
                dq = max(
                    abs(float(b[5][c] - a[5][c] - shift[c]))
                    for c in range(3)
                )
                dv = max(abs(float(b[6][c] - a[6][c])) for c in range(3))
                dt = abs(float(b[0] - a[0] - period))
                assert dq < 1e-6 and dv < 1e-6 and dt < 1e-6, (text, j)
        finally:
            mp.dps = old_dps


def test_minimizer_agrees_with_grid_oracle():
    """50 random two-letter plans (two or three free contacts) at zero
    radius against a hierarchical grid scan, then the reflection law at
    r0=0.05 on the same words."""
    rng = np.random.default_rng(np.random.SeedSequence([SEED, 4]))
    cache = {}
    free_counts = set()
    for _ in range(50):
        text = str(random_word(2, rng))
        if text not in cache:
            plan = plan_word(text)
            flat = minimize_arclength(plan, 0.0)
            centers, best = grid_minimize_chain(plan)
            free = [
                i for i, pc in enumerate(plan.contacts) if not pc.pinned
            ]
            assert (
                np.abs(np.asarray(flat.params)[free] - centers).max()
                <= 1e-3
            ), text
            assert abs(flat.length - best) <= 1e-6, text

            fat = minimize_arclength(plan_word(text), 0.05)
            pts = fat.contact_points
            residual = 0.0
            for i in range(1, len(pts) - 1):
                pc = fat.plan.contacts[i]
                axis = pc.edge.line.axis
                j, l = [x for x in (1, 2, 3) if x != axis]
                n = np.zeros(3)
                n[j - 1] = pts[i][j - 1] - pc.edge.line.trans[0]
                n[l - 1] = pts[i][l - 1] - pc.edge.line.trans[1]
                n /= np.linalg.norm(n)
                u_in = pts[i] - pts[i - 1]
                u_in /= np.linalg.norm(u_in)
                u_out = pts[i + 1] - pts[i]
                u_out /= np.linalg.norm(u_out)
                bounce = u_in - 2 * float(u_in @ n) * n
                residual = max(
                    residual, float(np.abs(u_out - bounce).max())
                )
            assert residual <= 1e-8, text
            cache[text] = len(free)
        free_counts.add(cache[text])
    assert {2, 3} <= free_counts


def test_itinerary_growth_stays_inside_analytic_bracket(tmp_path):
    """Counted itinerary growth strictly below the crossing-budget rate
    at n=10^5 orbits, plus the closed-form tails of both bounds."""
    out = tmp_path / "ent"
    assert (
        cli_main(
            ["entropy", "--n", "100000", "--T-grid", "10,20,40",
             "--eps0", "0.1", "--r0", "0.1", "--seed", "31",
             "--out", str(out)]
        )
        == 0
    )
    lines = (out / "entropy.csv").read_text().splitlines()
    assert (
        lines[0]
        == "T,eps0,r0,n_orbits,N_hat,log_rate,f,upper_rate,lower_rate"
    )
    assert len(lines) == 4
    for line in lines[1:]:
        row = line.split(",")
        n_hat = int(row[4])
        log_rate = float(row[5])
        upper_rate = float(row[7])
        assert n_hat >= 1
        assert log_rate > 0.0
        assert log_rate < upper_rate, line
        print(f"T={row[0]}: {log_rate:.4f} < {upper_rate:.4f}")

    # closed-form tails of the bracket
    assert abs(UPPER_RATE - 2.0 * SQRT3 * math.log(12.0)) < 1e-12
    assert abs(upper_bound_f(1e6, 1e-6)[1] - UPPER_RATE) < 1e-4
    assert abs(LOWER_RATE - math.log(5.0) / 3.0) < 1e-12
    assert abs(lower_bound_words(1e5) - LOWER_RATE) < 1e-4


def test_conservation_reversal_and_bytewise_determinism(tmp_path):
    """Speed drift below 1e-9 across a million reflections, event
    sequences reproduced under time reversal, and byte-identical output
    files across reruns and worker counts."""
    rng = np.random.default_rng(np.random.SeedSequence([SEED, 6]))
    q, v = random_phase_point(rng, 0.2)
    rec = simulate(q, v, 1_200_000.0, 0.2, record_events=False)
    assert rec.n_collisions >= 1_000_000
    assert rec.max_speed_drift < 1e-9
    print(f"{rec.n_collisions} reflections, drift {rec.max_speed_drift:.2e}")

    for case in range(5):
        rng = np.random.default_rng(np.random.SeedSequence([SEED, 6, case]))
        q, v = random_phase_point(rng, 0.2)
        fwd = simulate(q, v, 6.0, 0.2)
        back = simulate(fwd.final.position, -fwd.final.velocity, 6.0, 0.2)
        assert len(back.event_times) == len(fwd.event_times)
        assert (back.event_kinds[::-1] == fwd.event_kinds).all()
        assert (back.event_axes[::-1] == fwd.event_axes).all()
        dt = np.abs((6.0 - back.event_times[::-1]) - fwd.event_times).max()
        dq = np.abs(back.event_points[::-1] - fwd.event_points).max()
        assert dt < 1e-6 and dq < 1e-6, case

    sim_args = ["simulate", "--n", "40", "--T", "50", "--r0", "0.1",
                "--seed", "9", "--events"]
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli_main([*sim_args, "--out", str(a)]) == 0
    assert cli_main([*sim_args, "--out", str(b)]) == 0
    assert cli_main([*sim_args, "--jobs", "2", "--out", str(c)]) == 0
    for name in ("summary.csv", "events/orbit_00000.jsonl"):
        ref = (a / name).read_bytes()
        assert (b / name).read_bytes() == ref, name
        assert (c / name).read_bytes() == ref, name

    rot_args = ["rotation-set", "--n", "60", "--T", "50", "--r0", "0.1",
                "--seed", "9"]
    d, e = tmp_path / "d", tmp_path / "e"
    assert cli_main([*rot_args, "--out", str(d)]) == 0
    assert cli_main([*rot_args, "--jobs", "2", "--out", str(e)]) == 0
    for name in ("samples.csv", "prefix_tree.json"):
        assert (d / name).read_bytes() == (e / name).read_bytes(), name

    ent_args = ["entropy", "--n", "300", "--T-grid", "5,10", "--eps0",
                "0.1", "--r0", "0.1", "--seed", "9"]
    f, g = tmp_path / "f", tmp_path / "g"
    assert cli_main([*ent_args, "--out", str(f)]) == 0
    assert cli_main([*ent_args, "--jobs", "2", "--out", str(g)]) == 0
    assert (f / "entropy.csv").read_bytes() == (g / "entropy.csv").read_bytes()


def test_word_algebra_bulk_properties():
    """Reduction idempotence, concatenation associativity, and the
    triangle inequality at 10^4 random cases each; the length-count
    formula against exhaustive enumeration through length 7."""
    rng = np.random.default_rng(np.random.SeedSequence([SEED, 7]))

    for _ in range(10_000):
        raw = rng.integers(0, 6, size=rng.integers(0, 60)).tolist()
        w = reduce(raw)
        assert reduce([int(c) for c in w.codes]) == w

    def draw():
        return random_word(int(rng.integers(0, 11)), rng)

    for _ in range(10_000):
        u, v, w = draw(), draw(), draw()
        assert concat(concat(u, v), w) == concat(u, concat(v, w))

    for _ in range(10_000):
        u, v, w = draw(), draw(), draw()
        assert cayley_distance(u, w) <= (
            cayley_distance(u, v) + cayley_distance(v, w)
        )

    for n in range(8):
        stack = [()] if n == 0 else [(c,) for c in range(6)]
        for _ in range(n - 1):
            stack = [
                t + (c,) for t in stack for c in range(6)
                if c != (t[-1] ^ 1)
            ]
        assert len(stack) == count_reduced_words(n)
        assert len(set(stack)) == len(stack)
        if n and n <= 4:
            for t in stack:
                assert len(ReducedWord(list(t))) == n
