"""Turn-case table: how a reduced word threads through the cubical lattice.

Each letter of the word moves the orbit into the next unit cell.  Between
two consecutive letters the orbit spends time in one cell (a corner turn
when the axes differ, a straight run when the letter repeats) and must
touch a short list of scatterer edges there.  The table below stores the
touch patterns for one reference turn only; every other turn is carried
onto the reference by a signed permutation of the axes, which is how the
whole case analysis stays executable from five entries.

The bookkeeping that travels along the word is the *entry state*: the edge
contacted on the entrance face of the current cell, plus the direction
along that edge's free axis in which the accumulated past pulls the
contact point (+1 or -1).  Each case consumes an entry state and emits the
entry state of the next cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..geometry import PERP_AXES, SYMMETRIES, CubeSymmetry
from ..words import Letter

# An axis-parallel cube edge in cell-local coordinates: the free axis and
# the two fixed transverse coordinates (ascending axis order, values 0/1).
LocalEdge = tuple[int, tuple[int, int]]

# (edge on the entrance face, pull direction along its free axis)
EntryState = tuple[LocalEdge, int]

SQRT3 = math.sqrt(3.0)


class PlanError(RuntimeError):
    """A word could not be threaded through the table."""


def local_edge_midpoint(edge: LocalEdge) -> np.ndarray:
    axis, (cj, cl) = edge
    j, l = PERP_AXES[axis]
    out = np.empty(3)
    out[axis - 1] = 0.5
    out[j - 1] = float(cj)
    out[l - 1] = float(cl)
    return out


def _edge_from_midpoint(m: np.ndarray) -> LocalEdge:
    # Signed-permutation images of {0, 1/2, 1} stay exact in floats, so the
    # comparisons below are not fragile.
    axis = 0
    for i in range(3):
        if m[i] == 0.5:
            axis = i + 1
            break
    else:
        raise PlanError(f"not a cube edge midpoint: {m}")
    j, l = PERP_AXES[axis]
    cj, cl = int(round(m[j - 1])), int(round(m[l - 1]))
    if (m[j - 1], m[l - 1]) != (cj, cl) or cj not in (0, 1) or cl not in (0, 1):
        raise PlanError(f"not a cube edge midpoint: {m}")
    return (axis, (cj, cl))


def map_local_edge(g: CubeSymmetry, edge: LocalEdge) -> LocalEdge:
    """Image of a cell edge under a symmetry of the cell."""
    return _edge_from_midpoint(g.apply_cube_point(local_edge_midpoint(edge)))


def map_entry_state(g: CubeSymmetry, state: EntryState) -> EntryState:
    edge, force = state
    _, sign = g.apply_axis(edge[0], force)
    return (map_local_edge(g, edge), sign)


@dataclass(frozen=True)
class TurnCase:
    """One canonical contact pattern inside a cell.

    Edges are written in the cell's own [0,1]^3 coordinates for the
    reference turn (enter along +x1, leave along +x2, or along +x1 again
    for the straight run).  ``exit_force`` is the pull handed to the next
    cell.  ``alt_exit`` is a second admissible exit for the one case that
    has a choice; it is only taken when explicitly requested.
    """

    name: str
    entry: EntryState
    middles: tuple[LocalEdge, ...]
    middle_forces: tuple[int, ...]
    exit_edge: LocalEdge
    exit_force: int
    time_bound: float
    alt_exit: Optional[LocalEdge] = None
    alt_exit_force: int = 0

    @property
    def contact_count(self) -> int:
        return 2 + len(self.middles)


# Corner reference: enter along +x1, exit along +x2 (entrance face x1 = 0,
# exit face x2 = 1).  Four patterns cover the four reachable (entry edge,
# pull) classes; the mirror x3 -> 1 - x3 folds the remaining states onto
# them.  Middle pulls are the pull exerted by the preceding contact.
CORNER_CASES: dict[EntryState, TurnCase] = {}
for _case in (
    TurnCase(
        name="detour",
        entry=((3, (0, 1)), -1),
        middles=((1, (0, 1)),),
        middle_forces=(-1,),
        exit_edge=(3, (1, 1)),
        exit_force=+1,
        time_bound=3.0,
    ),
    TurnCase(
        name="direct",
        entry=((3, (0, 0)), -1),
        middles=(),
        middle_forces=(),
        exit_edge=(1, (1, 1)),
        exit_force=-1,
        time_bound=SQRT3,
    ),
    TurnCase(
        name="diagonal",
        entry=((2, (0, 0)), -1),
        middles=(),
        middle_forces=(),
        exit_edge=(3, (1, 1)),
        exit_force=-1,
        time_bound=SQRT3,
        alt_exit=(1, (1, 1)),
        alt_exit_force=-1,
    ),
    TurnCase(
        name="diagonal_detour",
        entry=((2, (0, 0)), +1),
        middles=((1, (0, 1)),),
        middle_forces=(-1,),
        exit_edge=(3, (1, 1)),
        exit_force=+1,
        time_bound=3.0,
    ),
):
    CORNER_CASES[_case.entry] = _case

# Straight reference: enter and exit along +x1.  The exit edge follows the
# entry edge immediately.
STRAIGHT_CASES: dict[EntryState, TurnCase] = {
    ((2, (0, 0)), -1): TurnCase(
        name="straight",
        entry=((2, (0, 0)), -1),
        middles=(),
        middle_forces=(),
        exit_edge=(3, (1, 1)),
        exit_force=-1,
        time_bound=SQRT3,
    )
}


def turn_fixers(eps: Letter, delt: Letter) -> list[CubeSymmetry]:
    """Symmetries carrying the actual turn onto the reference turn.

    Corner turns admit two, straight runs eight; exactly one of them will
    land the entry state in the case table.
    """
    straight = delt.code == eps.code
    out = []
    for g in SYMMETRIES:
        if g.apply_axis(eps.axis, eps.sign) != (1, 1):
            continue
        if not straight and g.apply_axis(delt.axis, delt.sign) != (2, 1):
            continue
        out.append(g)
    return out


def canonicalize_turn(
    eps: Letter, delt: Letter, state: EntryState
) -> tuple[CubeSymmetry, TurnCase]:
    """Resolve a turn against the table.

    Returns the symmetry g with g(actual) = reference and the matching
    case.  Raises ValueError on a backtracking turn (the word was not
    reduced) and PlanError if the table failed to produce exactly one
    match, which would mean the table itself is wrong.
    """
    if delt.code == eps.inverse().code:
        raise ValueError(f"turn {eps}{delt} backtracks, the word is not reduced")
    table = STRAIGHT_CASES if delt.code == eps.code else CORNER_CASES
    hits = []
    for g in turn_fixers(eps, delt):
        case = table.get(map_entry_state(g, state))
        if case is not None:
            hits.append((g, case))
    if len(hits) != 1:
        raise PlanError(
            f"entry state {state} matched {len(hits)} cases at turn {eps}{delt}"
        )
    return hits[0]


def realize_case(
    g: CubeSymmetry, case: TurnCase, use_alt: bool = False
) -> tuple[tuple[LocalEdge, ...], tuple[int, ...], LocalEdge, int]:
    """Map a case's contacts back through g onto the actual turn.

    Returns (middles, middle pulls, exit edge, exit pull) in the
    coordinates of the cell the turn happens in.
    """
    h = g.inverse()
    middles = tuple(map_local_edge(h, m) for m in case.middles)
    forces = tuple(
        h.apply_axis(m[0], f)[1] for m, f in zip(case.middles, case.middle_forces)
    )
    if use_alt:
        if case.alt_exit is None:
            raise ValueError(f"case {case.name} has a single exit edge")
        exit_local, exit_f = case.alt_exit, case.alt_exit_force
    else:
        exit_local, exit_f = case.exit_edge, case.exit_force
    exit_edge = map_local_edge(h, exit_local)
    _, exit_force = h.apply_axis(exit_local[0], exit_f)
    return middles, forces, exit_edge, exit_force


def thread_state(exit_edge: LocalEdge, exit_force: int, letter: Letter) -> EntryState:
    """Re-express an exit contact in the coordinates of the cell it leads to."""
    axis, (cj, cl) = exit_edge
    j, l = PERP_AXES[axis]
    if letter.axis == j:
        cj -= letter.sign
    elif letter.axis == l:
        cl -= letter.sign
    else:
        raise PlanError("exit edge is parallel to the crossing direction")
    if cj not in (0, 1) or cl not in (0, 1):
        raise PlanError("exit edge does not lie on the crossed face")
    return ((axis, (cj, cl)), exit_force)


# Anchor pattern for the reference letter +x1.  The terminal side: the
# final cell is entered through its top rear vertical edge with the pull
# pointing down, and the anchor is the top far horizontal edge, pinned at
# its midpoint.  The initial side is the terminal picture run backwards in
# time and mirrored in x1 so that the word still reads forward: start
# pinned at the midpoint of (2,(0,1)), first touch the far vertical edge
# (3,(1,1)) with the pull pointing up.
TERMINAL_ENTRY_STATE: EntryState = ((3, (0, 1)), -1)
TERMINAL_ANCHOR_EDGE: LocalEdge = (2, (1, 1))
INITIAL_ANCHOR_EDGE: LocalEdge = (2, (0, 1))
INITIAL_FIRST_CONTACT: LocalEdge = (3, (1, 1))
INITIAL_FIRST_FORCE = +1


def initial_anchor(first: Letter) -> tuple[LocalEdge, LocalEdge, int]:
    """Anchor edge, first contact edge and first pull for the start cell.

    Any of the eight symmetries fixing the first letter's direction gives a
    valid (mirrored) start; the first one in the global symmetry order is
    chosen so plans are reproducible.
    """
    for g in SYMMETRIES:
        if g.apply_axis(first.axis, first.sign) == (1, 1):
            h = g.inverse()
            anchor = map_local_edge(h, INITIAL_ANCHOR_EDGE)
            first_edge = map_local_edge(h, INITIAL_FIRST_CONTACT)
            _, force = h.apply_axis(INITIAL_FIRST_CONTACT[0], INITIAL_FIRST_FORCE)
            return anchor, first_edge, force
    raise PlanError("no symmetry fixes the first letter")  # pragma: no cover


def terminal_anchor(last: Letter, state: EntryState) -> LocalEdge:
    """Anchor edge of the final cell for a given final entry state.

    The direction fixers of the last letter act simply transitively on the
    eight entry states, so exactly one of them matches the reference
    terminal picture.
    """
    hits = [
        g
        for g in SYMMETRIES
        if g.apply_axis(last.axis, last.sign) == (1, 1)
        and map_entry_state(g, state) == TERMINAL_ENTRY_STATE
    ]
    if len(hits) != 1:
        raise PlanError(f"terminal state {state} matched {len(hits)} anchor frames")
    return map_local_edge(hits[0].inverse(), TERMINAL_ANCHOR_EDGE)


def face_edges(axis: int, c: int) -> list[LocalEdge]:
    """The four cell edges lying on the face x_axis = c."""
    out = []
    for e_axis in PERP_AXES[axis]:
        jj, ll = PERP_AXES[e_axis]
        for other in (0, 1):
            cs = [0, 0]
            for pos, a in enumerate((jj, ll)):
                cs[pos] = c if a == axis else other
            out.append((e_axis, (cs[0], cs[1])))
    return out


def entrance_states(letter: Letter) -> list[EntryState]:
    """All eight entry states of a cell entered by crossing ``letter``."""
    c = 0 if letter.sign > 0 else 1
    return [(e, f) for e in face_edges(letter.axis, c) for f in (-1, +1)]
