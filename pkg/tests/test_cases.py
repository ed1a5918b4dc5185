"""Turn-case table tests.

The table is tiny (four corner cases, one straight case) but everything
downstream leans on it, so the frozen entries below were re-derived by
hand from the reference corner geometry: entry along +x1, exit along
+x2, compartment the unit cube at the origin.
"""

import math

import numpy as np
import pytest

from tricylinder.admissible.cases import (
    CORNER_CASES,
    INITIAL_ANCHOR_EDGE,
    INITIAL_FIRST_CONTACT,
    INITIAL_FIRST_FORCE,
    STRAIGHT_CASES,
    TERMINAL_ANCHOR_EDGE,
    TERMINAL_ENTRY_STATE,
    canonicalize_turn,
    entrance_states,
    face_edges,
    initial_anchor,
    local_edge_midpoint,
    map_entry_state,
    map_local_edge,
    realize_case,
    terminal_anchor,
    thread_state,
    turn_fixers,
)
from tricylinder.geometry import SYMMETRIES
from tricylinder.words import Letter

SQRT3 = math.sqrt(3.0)

LETTERS = [Letter.from_code(c) for c in range(6)]

TURNS = [
    (e, d)
    for e in LETTERS
    for d in LETTERS
    if d.code != (e.code ^ 1)
]


# ---------------------------------------------------------------------------
# frozen reference table


def test_corner_table_is_the_expected_four_cases():
    assert set(tc.name for tc in CORNER_CASES.values()) == {
        "detour",
        "direct",
        "diagonal",
        "diagonal_detour",
    }
    assert set(CORNER_CASES) == {
        ((3, (0, 1)), -1),
        ((3, (0, 0)), -1),
        ((2, (0, 0)), -1),
        ((2, (0, 0)), 1),
    }


def test_detour_case_frozen():
    tc = CORNER_CASES[((3, (0, 1)), -1)]
    assert tc.name == "detour"
    assert tc.middles == ((1, (0, 1)),)
    assert tc.middle_forces == (-1,)
    assert tc.exit_edge == (3, (1, 1))
    assert tc.exit_force == 1
    assert tc.time_bound == 3.0
    assert tc.alt_exit is None


def test_direct_case_frozen():
    tc = CORNER_CASES[((3, (0, 0)), -1)]
    assert tc.name == "direct"
    assert tc.middles == ()
    assert tc.exit_edge == (1, (1, 1))
    assert tc.exit_force == -1
    assert abs(tc.time_bound - SQRT3) < 1e-15


def test_diagonal_case_has_the_alternate_exit():
    tc = CORNER_CASES[((2, (0, 0)), -1)]
    assert tc.name == "diagonal"
    assert tc.middles == ()
    assert tc.exit_edge == (3, (1, 1))
    assert tc.alt_exit == (1, (1, 1))
    assert tc.alt_exit_force == -1
    assert abs(tc.time_bound - SQRT3) < 1e-15


def test_diagonal_detour_case_frozen():
    tc = CORNER_CASES[((2, (0, 0)), 1)]
    assert tc.name == "diagonal_detour"
    assert tc.middles == ((1, (0, 1)),)
    assert tc.middle_forces == (-1,)
    assert tc.exit_edge == (3, (1, 1))
    assert tc.exit_force == 1
    assert tc.time_bound == 3.0


def test_straight_case_passes_without_intermediate_contact():
    # A straight run leaves through the opposite face with no contact in
    # between; the sole entry in the table must reflect that.
    assert list(STRAIGHT_CASES) == [((2, (0, 0)), -1)]
    tc = STRAIGHT_CASES[((2, (0, 0)), -1)]
    assert tc.name == "straight"
    assert tc.middles == ()
    assert tc.exit_edge == (3, (1, 1))
    assert tc.exit_force == -1
    assert abs(tc.time_bound - SQRT3) < 1e-15


def test_time_bounds_cover_both_kinds():
    for tc in CORNER_CASES.values():
        assert tc.time_bound in (3.0, SQRT3)
        assert (tc.time_bound == 3.0) == (len(tc.middles) == 1)


# ---------------------------------------------------------------------------
# edge bookkeeping


def test_face_edges_enumeration():
    assert face_edges(1, 0) == [(2, (0, 0)), (2, (0, 1)), (3, (0, 0)), (3, (0, 1))]
    for axis in (1, 2, 3):
        for c in (0, 1):
            edges = face_edges(axis, c)
            assert len(edges) == 4
            for eaxis, _ in edges:
                assert eaxis != axis


def test_local_edge_midpoint_values():
    # trans coordinates run over the two perpendicular axes in
    # increasing order: (x2,x3) for axis 1, (x1,x3) for axis 2, (x1,x2)
    # for axis 3
    assert np.allclose(local_edge_midpoint((3, (1, 1))), [1.0, 1.0, 0.5])
    assert np.allclose(local_edge_midpoint((1, (0, 1))), [0.5, 0.0, 1.0])
    assert np.allclose(local_edge_midpoint((2, (1, 0))), [1.0, 0.5, 0.0])


def test_entrance_states_enumeration():
    for letter in LETTERS:
        states = entrance_states(letter)
        assert len(states) == 8
        assert len(set(states)) == 8
        for (eaxis, _), force in states:
            assert eaxis != letter.axis
            assert force in (-1, 1)


# ---------------------------------------------------------------------------
# symmetry action


def test_map_local_edge_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(200):
        g = SYMMETRIES[int(rng.integers(0, len(SYMMETRIES)))]
        axis = int(rng.integers(1, 4))
        trans = (int(rng.integers(0, 2)), int(rng.integers(0, 2)))
        edge = (axis, trans)
        assert map_local_edge(g.inverse(), map_local_edge(g, edge)) == edge


def test_map_entry_state_round_trip():
    rng = np.random.default_rng(4)
    for _ in range(200):
        g = SYMMETRIES[int(rng.integers(0, len(SYMMETRIES)))]
        state = (
            (int(rng.integers(1, 4)), (int(rng.integers(0, 2)), int(rng.integers(0, 2)))),
            -1 if rng.integers(0, 2) else 1,
        )
        assert map_entry_state(g.inverse(), map_entry_state(g, state)) == state


def test_map_local_edge_moves_the_midpoint():
    # the cube action on edges must agree with the point action on their
    # midpoints
    rng = np.random.default_rng(5)
    for _ in range(100):
        g = SYMMETRIES[int(rng.integers(0, len(SYMMETRIES)))]
        edge = (int(rng.integers(1, 4)), (int(rng.integers(0, 2)), int(rng.integers(0, 2))))
        moved = map_local_edge(g, edge)
        assert np.allclose(
            local_edge_midpoint(moved),
            g.apply_cube_point(local_edge_midpoint(edge)),
        )


def test_turn_fixer_counts():
    a, b = LETTERS[0], LETTERS[2]
    assert len(turn_fixers(a, b)) == 2
    assert len(turn_fixers(a, a)) == 8
    for e, d in TURNS:
        expected = 8 if d.code == e.code else 2
        assert len(turn_fixers(e, d)) == expected


# ---------------------------------------------------------------------------
# canonicalization closure


def test_backtracking_turn_is_rejected():
    a, A = LETTERS[0], LETTERS[1]
    with pytest.raises(ValueError):
        canonicalize_turn(a, A, ((2, (0, 0)), -1))


def test_every_turn_and_state_canonicalizes_uniquely():
    # 30 reduced turns times 8 entrance states: each must land on exactly
    # one table row through exactly one fixer.
    seen_cases = set()
    for e, d in TURNS:
        table = STRAIGHT_CASES if d.code == e.code else CORNER_CASES
        for state in entrance_states(e):
            hits = []
            for g in turn_fixers(e, d):
                if map_entry_state(g, state) in table:
                    hits.append(g)
            assert len(hits) == 1, (str(e), str(d), state)
            g, case = canonicalize_turn(e, d, state)
            assert g is hits[0] or map_entry_state(g, state) == case.entry
            assert case.entry == map_entry_state(g, state)
            seen_cases.add(case.name)
    assert seen_cases == {
        "detour",
        "direct",
        "diagonal",
        "diagonal_detour",
        "straight",
    }


def test_realize_case_pulls_the_row_back():
    # realization maps edges through the inverse symmetry; pull signs
    # conjugate along, flipping whenever the symmetry reverses the
    # contact's axis orientation
    for e, d in TURNS:
        for state in entrance_states(e):
            g, case = canonicalize_turn(e, d, state)
            middles, forces, exit_edge, exit_force = realize_case(g, case)
            h = g.inverse()
            assert middles == tuple(map_local_edge(h, m) for m in case.middles)
            assert forces == tuple(
                h.apply_axis(m[0], f)[1]
                for m, f in zip(case.middles, case.middle_forces)
            )
            assert exit_edge == map_local_edge(h, case.exit_edge)
            assert exit_force == h.apply_axis(case.exit_edge[0], case.exit_force)[1]
            assert all(f in (-1, 1) for f in forces)
            assert exit_force in (-1, 1)
            if case.alt_exit is not None:
                alt_m, alt_f, alt_exit, alt_force = realize_case(g, case, use_alt=True)
                assert alt_m == () and alt_f == ()
                assert alt_exit == map_local_edge(h, case.alt_exit)
                assert alt_force == h.apply_axis(case.alt_exit[0], case.alt_exit_force)[1]


def test_exit_edge_lies_on_the_crossed_face():
    # after realization the exit edge must belong to the face the next
    # letter crosses
    for e, d in TURNS:
        for state in entrance_states(e):
            g, case = canonicalize_turn(e, d, state)
            _, _, exit_edge, _ = realize_case(g, case)
            k = d.axis
            c = 1 if d.sign > 0 else 0
            assert exit_edge in face_edges(k, c), (str(e), str(d), state)


# ---------------------------------------------------------------------------
# state threading


def test_thread_state_frozen_values():
    a, b = LETTERS[0], LETTERS[2]
    g, case = canonicalize_turn(a, b, ((2, (0, 0)), -1))
    _, _, exit_edge, exit_force = realize_case(g, case)
    state = thread_state(exit_edge, exit_force, b)
    (axis, trans), force = state
    assert axis != b.axis
    assert force == exit_force
    assert trans[0] in (0, 1) and trans[1] in (0, 1)


def test_thread_state_is_a_valid_entrance():
    for e, d in TURNS:
        for state in entrance_states(e):
            g, case = canonicalize_turn(e, d, state)
            _, _, exit_edge, exit_force = realize_case(g, case)
            nxt = thread_state(exit_edge, exit_force, d)
            assert nxt in entrance_states(d), (str(e), str(d), state)


# ---------------------------------------------------------------------------
# anchors


def test_terminal_reference_state_is_the_detour_entry():
    assert TERMINAL_ENTRY_STATE == ((3, (0, 1)), -1)
    assert TERMINAL_ANCHOR_EDGE == (2, (1, 1))


def test_initial_anchor_reference_values():
    assert INITIAL_ANCHOR_EDGE == (2, (0, 1))
    assert INITIAL_FIRST_CONTACT == (3, (1, 1))
    assert INITIAL_FIRST_FORCE == 1


def test_initial_anchor_per_letter():
    for letter in LETTERS:
        anchor, first, force = initial_anchor(letter)
        assert anchor[0] != letter.axis
        assert first in face_edges(letter.axis, 1 if letter.sign > 0 else 0)
        assert force in (-1, 1)


def test_terminal_anchor_per_state():
    for letter in LETTERS:
        for state in entrance_states(letter):
            edge = terminal_anchor(letter, state)
            assert edge[0] != 0
            (axis, trans) = edge
            assert axis in (1, 2, 3)
            assert trans[0] in (0, 1, 2) and trans[1] in (0, 1, 2)


def test_initial_anchor_is_deterministic():
    for letter in LETTERS:
        assert initial_anchor(letter) == initial_anchor(letter)
