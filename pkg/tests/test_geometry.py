import itertools
import math

import numpy as np
import pytest

from tricylinder.geometry import (
    SYMMETRIES,
    Cylinder,
    Edge,
    LatticeLine,
    all_symmetries,
    candidate_cylinders,
    cell_of,
    cylinder_normal,
    edges_of_cell,
    line_distance,
    perp_components,
    ray_cylinder_hit,
    reflect,
)

from util import segment_line_distance


def bisect_hit_oracle(p, v, line, r0, horizon=10.0):
    """First time dist(p+tv, line) == r0 by scan + bisection, approaching
    side only.  Independent of the quadratic-formula implementation."""
    p = np.asarray(p, float)
    v = np.asarray(v, float)

    def dist(t):
        return line_distance(p + t * v, line)

    ts = np.linspace(0.0, horizon, 200001)
    j, l = {1: (1, 2), 2: (0, 2), 3: (0, 1)}[line.axis]
    base = np.array(line.trans, float)
    rel0 = np.array([p[j], p[l]]) - base
    dv = np.array([v[j], v[l]])
    ds = np.hypot(rel0[0] + ts * dv[0], rel0[1] + ts * dv[1])
    inside = ds < r0
    if not inside.any():
        return None
    k = int(np.argmax(inside))
    if k == 0:
        return 0.0
    lo, hi = ts[k - 1], ts[k]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if dist(mid) < r0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def map_line(g, line):
    axis2, _ = g.apply_axis(line.axis, 1)
    img = g.apply_vector(line.point(0.0).astype(np.int64))
    trans = perp_components(img, axis2)
    return LatticeLine(axis2, (int(trans[0]), int(trans[1])))


# -- ray_cylinder_hit -------------------------------------------------------


def test_hit_head_on_frozen():
    cyl = Cylinder(LatticeLine(1, (0, 0)), 0.1)
    res = ray_cylinder_hit((0.5, 0.5, 0.0), (0.0, -1.0, 0.0), cyl)
    assert res is not None
    t, point, grazing = res
    assert not grazing
    assert abs(t - 0.4) < 1e-12
    assert np.allclose(point, (0.5, 0.1, 0.0), atol=1e-12)


def test_hit_radial_frozen():
    cyl = Cylinder(LatticeLine(3, (0, 0)), 0.1)
    res = ray_cylinder_hit((0.3, 0.0, 0.5), (-1.0, 0.0, 0.0), cyl)
    t, point, grazing = res
    assert abs(t - 0.2) < 1e-12
    assert np.allclose(point, (0.1, 0.0, 0.5), atol=1e-12)


def test_hit_miss_and_parallel():
    cyl = Cylinder(LatticeLine(3, (0, 0)), 0.1)
    # impact parameter 0.2 > r0
    assert ray_cylinder_hit((1.0, 0.2, 0.0), (-1.0, 0.0, 0.0), cyl) is None
    # parallel to the axis
    assert ray_cylinder_hit((0.05, 0.0, 0.0), (0.0, 0.0, 1.0), cyl) is None
    # moving away
    assert ray_cylinder_hit((0.3, 0.0, 0.0), (1.0, 0.0, 0.0), cyl) is None


def test_hit_tangency_reports_grazing():
    cyl = Cylinder(LatticeLine(3, (0, 0)), 0.1)
    res = ray_cylinder_hit((1.0, 0.1, 0.7), (-1.0, 0.0, 0.0), cyl)
    assert res is not None
    t, point, grazing = res
    assert grazing
    assert abs(t - 1.0) < 1e-6
    assert np.allclose(point, (0.0, 0.1, 0.7), atol=1e-6)


def test_hit_from_surface_moving_outward_is_none():
    cyl = Cylinder(LatticeLine(3, (0, 0)), 0.2)
    p = np.array([0.2, 0.0, 0.3])
    n = cylinder_normal(p, cyl)
    v_out = reflect(np.array([-1.0, 0.3, 0.1]) / np.linalg.norm([1.0, 0.3, 0.1]), n)
    assert ray_cylinder_hit(p, v_out, cyl) is None


def test_hit_matches_bisection_oracle():
    rng = np.random.default_rng(2026)
    checked = 0
    while checked < 60:
        axis = int(rng.integers(1, 4))
        line = LatticeLine(axis, (int(rng.integers(-1, 2)), int(rng.integers(-1, 2))))
        r0 = float(rng.uniform(0.03, 0.3))
        cyl = Cylinder(line, r0)
        p = rng.uniform(-1.5, 1.5, size=3)
        if line_distance(p, line) <= r0 + 1e-3:
            continue
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        res = ray_cylinder_hit(p, v, cyl, t_min=0.0)
        want = bisect_hit_oracle(p, v, line, r0)
        if want is None:
            assert res is None or res[0] > 9.99
        else:
            assert res is not None
            t, point, _ = res
            assert abs(t - want) < 1e-8
            assert abs(line_distance(point, line) - r0) < 1e-9
        checked += 1


# -- reflect / normal -------------------------------------------------------


def test_reflect_frozen_cases():
    assert np.allclose(reflect((0.0, -1.0, 0.0), (0.0, 1.0, 0.0)), (0.0, 1.0, 0.0))
    s = 1.0 / math.sqrt(2.0)
    assert np.allclose(reflect((s, -s, 0.0), (0.0, 1.0, 0.0)), (s, s, 0.0))


def test_reflect_properties():
    rng = np.random.default_rng(5)
    for _ in range(300):
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        w = reflect(v, n)
        assert abs(np.linalg.norm(w) - 1.0) < 1e-12  # isometry
        assert np.allclose(reflect(w, n), v, atol=1e-12)  # involution
        # tangential part kept, normal part flipped
        assert abs((w - v) @ (v + w)) < 1e-9
        assert abs((w + v) @ n - 2 * (v @ n + 0) + 2 * (v @ n)) < 1e-12
    with pytest.raises(ValueError):
        reflect((1.0, 0.0, 0.0), (0.0, 2.0, 0.0))


def test_cylinder_normal_radial_unit():
    cyl = Cylinder(LatticeLine(2, (1, -1)), 0.15)
    p = cyl.line.point(0.3) + 0.15 * np.array([math.cos(1.1), 0.0, math.sin(1.1)])
    n = cylinder_normal(p, cyl)
    assert abs(np.linalg.norm(n) - 1.0) < 1e-12
    assert abs(n[1]) < 1e-15  # no axial component
    assert abs(n @ (p - cyl.line.point(0.3)) - 0.15) < 1e-12


# -- cells and candidate search --------------------------------------------


def test_cell_of_interior_and_boundary():
    assert cell_of((0.5, 0.5, 0.5)) == (0, 0, 0)
    assert cell_of((1.0, 0.5, 0.5), (1.0, 0.0, 0.0)) == (1, 0, 0)
    assert cell_of((1.0, 0.5, 0.5), (-1.0, 0.0, 0.0)) == (0, 0, 0)
    assert cell_of((-0.25, 2.0, 0.5), (0.0, 1.0, 0.0)) == (-1, 2, 0)


def test_edges_of_cell_structure():
    edges = edges_of_cell((0, 0, 0))
    assert len(edges) == 12
    keys = {(e.line.axis, e.line.trans, e.lo) for e in edges}
    assert len(keys) == 12
    assert (3, (0, 1), 0) in keys
    assert (1, (1, 1), 0) in keys
    corners = set()
    for e in edges:
        corners.add(tuple(e.point(0.0)))
        corners.add(tuple(e.point(1.0)))
    assert corners == {tuple(map(float, c)) for c in itertools.product((0, 1), repeat=3)}


def test_candidate_cylinders_complete_vs_brute_force():
    rng = np.random.default_rng(77)
    for _ in range(40):
        p = rng.uniform(-1.0, 2.0, size=3)
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        horizon = float(rng.uniform(0.5, 3.0))
        r0 = float(rng.uniform(0.05, 0.45))
        cands = {(c.line.axis, c.line.trans) for c in candidate_cylinders(p, v, horizon, r0)}
        q = p + horizon * v
        lo = np.floor(np.minimum(p, q)).astype(int) - 1
        hi = np.ceil(np.maximum(p, q)).astype(int) + 1
        for axis in (1, 2, 3):
            j, l = {1: (1, 2), 2: (0, 2), 3: (0, 1)}[axis]
            for a in range(lo[j], hi[j] + 1):
                for b in range(lo[l], hi[l] + 1):
                    line = LatticeLine(axis, (a, b))
                    d = segment_line_distance(p, q, line.point(0.0), line.direction())
                    if d < r0 - 1e-6:
                        assert (axis, (a, b)) in cands, (
                            p,
                            v,
                            horizon,
                            r0,
                            axis,
                            (a, b),
                            d,
                        )


# -- the 48 symmetries ------------------------------------------------------


def test_symmetry_group_is_a_group_of_order_48():
    mats = {g.matrix.tobytes() for g in SYMMETRIES}
    assert len(mats) == 48
    for g in SYMMETRIES[:8]:
        assert np.array_equal(g.matrix @ g.matrix.T, np.eye(3, dtype=np.int64))
        assert np.array_equal(g.compose(g.inverse()).matrix, np.eye(3, dtype=np.int64))
    rng = np.random.default_rng(11)
    for _ in range(60):
        g = SYMMETRIES[rng.integers(48)]
        h = SYMMETRIES[rng.integers(48)]
        assert g.compose(h).matrix.tobytes() in mats


def test_symmetry_cube_action_permutes_corners():
    corners = {tuple(map(float, c)) for c in itertools.product((0, 1), repeat=3)}
    for g in SYMMETRIES:
        imgs = {tuple(np.round(g.apply_cube_point(c), 12)) for c in corners}
        assert imgs == corners


def test_symmetry_axis_action_consistent_with_matrix():
    for g in SYMMETRIES:
        for axis in (1, 2, 3):
            e = np.zeros(3)
            e[axis - 1] = 1.0
            img = g.apply_vector(e)
            axis2, sign2 = g.apply_axis(axis, 1)
            want = np.zeros(3)
            want[axis2 - 1] = sign2
            assert np.allclose(img, want)


def test_hit_commutes_with_symmetry():
    rng = np.random.default_rng(13)
    done = 0
    while done < 50:
        g = SYMMETRIES[rng.integers(48)]
        line = LatticeLine(
            int(rng.integers(1, 4)), (int(rng.integers(-2, 3)), int(rng.integers(-2, 3)))
        )
        r0 = float(rng.uniform(0.05, 0.3))
        p = rng.uniform(-1.5, 1.5, size=3)
        if line_distance(p, line) <= r0:
            continue
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        res = ray_cylinder_hit(p, v, Cylinder(line, r0))
        line2 = map_line(g, line)
        res2 = ray_cylinder_hit(g.apply_vector(p), g.apply_vector(v), Cylinder(line2, r0))
        if res is None:
            assert res2 is None
        else:
            assert res2 is not None
            assert abs(res[0] - res2[0]) < 1e-9
            assert np.allclose(g.apply_vector(res[1]), res2[1], atol=1e-9)
        done += 1
