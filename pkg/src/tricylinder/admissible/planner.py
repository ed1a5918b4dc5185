"""Expand a reduced word into the edge itinerary the minimizer works on.

A plan is pure combinatorics: which cell the orbit is in after each letter,
which scatterer edges it must touch there and in what order, the pull
annotations, and the two pinned anchor contacts that close the variational
problem at both ends (released for cyclic plans).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from ..geometry import PERP_AXES, Edge, LatticeLine
from ..words import Letter, ReducedWord, parse_word
from .cases import (
    EntryState,
    LocalEdge,
    PlanError,
    canonicalize_turn,
    initial_anchor,
    realize_case,
    terminal_anchor,
    thread_state,
)

Cell = tuple[int, int, int]
WordLike = Union[str, ReducedWord, Sequence[Letter]]


def _coerce_word(word: WordLike) -> ReducedWord:
    if isinstance(word, ReducedWord):
        return word
    if isinstance(word, str):
        return parse_word(word)
    return ReducedWord.from_letters(word)


def letter_step(letter: Letter) -> Cell:
    step = [0, 0, 0]
    step[letter.axis - 1] = letter.sign
    return tuple(step)


def compartment_edge(cell: Cell, local: LocalEdge) -> Edge:
    """The global lattice edge at a cell-local position."""
    axis, (cj, cl) = local
    j, l = PERP_AXES[axis]
    return Edge(
        LatticeLine(axis, (cell[j - 1] + cj, cell[l - 1] + cl)), cell[axis - 1]
    )


def local_edge_of(edge: Edge, cell: Cell) -> LocalEdge:
    """Inverse of :func:`compartment_edge`; raises if the edge is foreign."""
    axis = edge.line.axis
    if edge.lo != cell[axis - 1]:
        raise PlanError(f"{edge} is not an edge of cell {cell}")
    j, l = PERP_AXES[axis]
    cj = edge.line.trans[0] - cell[j - 1]
    cl = edge.line.trans[1] - cell[l - 1]
    if cj not in (0, 1) or cl not in (0, 1):
        raise PlanError(f"{edge} is not an edge of cell {cell}")
    return (axis, (cj, cl))


@dataclass(frozen=True)
class PlanContact:
    """One required scatterer touch.

    ``force`` is the pull annotation along the edge's free axis (0 at the
    pinned anchors, whose position is fixed rather than balanced).  The
    ``compartment`` index says which cell's traversal the contact belongs
    to, counting cells along the word from 0.
    """

    edge: Edge
    force: int
    cell: Cell
    role: str  # "anchor", "entry", "middle" or "idle"
    compartment: int

    @property
    def pinned(self) -> bool:
        return self.role == "anchor"


def _line_point(line: LatticeLine) -> list[int]:
    p = [0, 0, 0]
    j, l = PERP_AXES[line.axis]
    p[j - 1] = line.trans[0]
    p[l - 1] = line.trans[1]
    return p


def _skew(e1: Edge, e2: Edge) -> bool:
    """Exact integer test that two edge lines are skew."""
    a1, a2 = e1.line.axis, e2.line.axis
    if a1 == a2:
        return False
    p1, p2 = _line_point(e1.line), _line_point(e2.line)
    a3 = 6 - a1 - a2
    return p2[a3 - 1] - p1[a3 - 1] != 0


@dataclass
class EdgePlan:
    """The full itinerary for one word.

    ``compartments`` has one cell per word prefix (length n+1 for an n
    letter word).  ``entry_index`` locates the entry contact of
    compartment t at position entry_index[t-1] in ``contacts``.  Cyclic
    plans have no anchors; their last contact run wraps onto the first
    contact translated by ``shift``.
    """

    word: ReducedWord
    compartments: list[Cell]
    contacts: list[PlanContact]
    case_names: list[str]
    time_bounds: list[float]
    entry_index: list[int]
    cyclic: bool = False
    shift: Optional[Cell] = None

    @property
    def anchors(self) -> tuple[PlanContact, PlanContact]:
        if self.cyclic:
            raise ValueError("cyclic plans have no anchors")
        return self.contacts[0], self.contacts[-1]

    @property
    def letters(self) -> list[Letter]:
        return [Letter.from_code(int(c)) for c in self.word.codes]

    def consecutive_pairs(self):
        """Contact pairs that share a polyline segment, wrap included."""
        pairs = list(zip(self.contacts, self.contacts[1:]))
        if self.cyclic:
            first = self.contacts[0]
            dj, dl = _shift_trans(first.edge.line, self.shift)
            wrapped = Edge(
                LatticeLine(
                    first.edge.line.axis,
                    (first.edge.line.trans[0] + dj, first.edge.line.trans[1] + dl),
                ),
                first.edge.lo + self.shift[first.edge.line.axis - 1],
            )
            pairs.append(
                (
                    self.contacts[-1],
                    PlanContact(
                        wrapped,
                        first.force,
                        tuple(c + s for c, s in zip(first.cell, self.shift)),
                        first.role,
                        len(self.word),
                    ),
                )
            )
        return pairs

    def check(self) -> None:
        """Raise PlanError if any structural invariant fails."""
        letters = self.letters
        n = len(letters)
        if n == 0:
            raise PlanError("empty word")
        if len(self.compartments) != n + 1:
            raise PlanError("compartment count does not match the word")
        for t, lt in enumerate(letters):
            expect = tuple(
                c + s for c, s in zip(self.compartments[t], letter_step(lt))
            )
            if self.compartments[t + 1] != expect:
                raise PlanError(f"compartment step {t} does not match letter {lt}")
        if len(self.entry_index) != n:
            raise PlanError("one entry contact per letter is required")
        if self.cyclic:
            if self.shift is None or self.compartments[n] != tuple(self.shift):
                raise PlanError("cyclic shift must equal the word's net step")
        else:
            if not (self.contacts[0].pinned and self.contacts[-1].pinned):
                raise PlanError("open plans must be pinned at both ends")
            if sum(1 for c in self.contacts if c.pinned) != 2:
                raise PlanError("exactly two pinned anchors expected")

        # Entry contacts sit on the face the matching letter crosses.
        for t in range(1, n + 1):
            pc = self.contacts[self.entry_index[t - 1]]
            lt = letters[t - 1]
            prev_cell, cell = self.compartments[t - 1], self.compartments[t]
            if pc.role != "entry" or pc.cell != cell:
                raise PlanError(f"contact {self.entry_index[t - 1]} is not the entry of cell {t}")
            if pc.edge.line.axis == lt.axis:
                raise PlanError("entry edge is parallel to the crossing direction")
            plane = prev_cell[lt.axis - 1] + (1 if lt.sign > 0 else 0)
            j, l = PERP_AXES[pc.edge.line.axis]
            fixed = {j: pc.edge.line.trans[0], l: pc.edge.line.trans[1]}
            if fixed[lt.axis] != plane:
                raise PlanError(f"entry contact of cell {t} is not on the crossed face")

        # Every contact is an edge of the cell it is attributed to.
        for pc in self.contacts:
            local_edge_of(pc.edge, pc.cell)
            if pc.role not in ("anchor", "entry", "middle", "idle"):
                raise PlanError(f"unknown contact role {pc.role!r}")
            if pc.pinned != (pc.force == 0):
                raise PlanError("pull annotations and pins disagree")

        # Consecutive contact lines must be skew so each pair of scatterers
        # spans the cell (idle excursions bounce between parallel edges of
        # one face and are exempt; their geometry is checked dynamically).
        for a, b in self.consecutive_pairs():
            if a.role == "idle" or b.role == "idle":
                continue
            if a.edge.line == b.edge.line:
                raise PlanError("consecutive contacts on the same scatterer line")
            if not _skew(a.edge, b.edge):
                raise PlanError(
                    f"consecutive contact lines {a.edge.line} and {b.edge.line} are not skew"
                )

        # Contact load: two or three non-idle touches per word compartment.
        bounds = list(self.entry_index)
        if self.cyclic:
            for t in range(n):
                if t + 1 < n:
                    run = self.contacts[bounds[t] : bounds[t + 1] + 1]
                else:
                    # Wrap run: close onto the first entry of the next period.
                    run = self.contacts[bounds[t] :] + [self.contacts[bounds[0]]]
                load = sum(1 for pc in run if pc.role != "idle")
                if not 2 <= load <= 3:
                    raise PlanError(f"compartment run {t} visits {load} edges")
        else:
            runs = [(0, bounds[0])]
            runs += [(bounds[t], bounds[t + 1]) for t in range(n - 1)]
            runs.append((bounds[n - 1], len(self.contacts) - 1))
            for t, (lo, hi) in enumerate(runs):
                load = sum(
                    1 for pc in self.contacts[lo : hi + 1] if pc.role != "idle"
                )
                if not 2 <= load <= 3:
                    raise PlanError(f"compartment run {t} visits {load} edges")

        if len(self.case_names) != len(self.time_bounds):
            raise PlanError("case bookkeeping out of step")


def _shift_trans(line: LatticeLine, shift: Cell) -> tuple[int, int]:
    j, l = PERP_AXES[line.axis]
    return shift[j - 1], shift[l - 1]


def plan_word(word: WordLike) -> EdgePlan:
    """Build the anchored edge itinerary for a reduced word.

    The start cell is the origin.  Raises ValueError for an empty word;
    backtracking letter pairs cannot occur because the input is reduced on
    construction.
    """
    w = _coerce_word(word)
    if len(w) == 0:
        raise ValueError("cannot plan an empty word")
    letters = [Letter.from_code(int(c)) for c in w.codes]
    n = len(letters)

    cells: list[Cell] = [(0, 0, 0)]
    for lt in letters:
        cells.append(tuple(c + s for c, s in zip(cells[-1], letter_step(lt))))

    contacts: list[PlanContact] = []
    entry_index: list[int] = []
    case_names: list[str] = []
    time_bounds: list[float] = []

    anchor0, first_edge, first_force = initial_anchor(letters[0])
    contacts.append(
        PlanContact(compartment_edge(cells[0], anchor0), 0, cells[0], "anchor", 0)
    )
    state: EntryState = thread_state(first_edge, first_force, letters[0])

    for t in range(1, n + 1):
        entry_index.append(len(contacts))
        contacts.append(
            PlanContact(
                compartment_edge(cells[t], state[0]), state[1], cells[t], "entry", t
            )
        )
        if t == n:
            break
        _, case = g_case = canonicalize_turn(letters[t - 1], letters[t], state)
        mids, mid_forces, exit_edge, exit_force = realize_case(*g_case)
        for m, f in zip(mids, mid_forces):
            contacts.append(
                PlanContact(compartment_edge(cells[t], m), f, cells[t], "middle", t)
            )
        case_names.append(case.name)
        time_bounds.append(case.time_bound)
        state = thread_state(exit_edge, exit_force, letters[t])

    anchor_t = terminal_anchor(letters[-1], state)
    contacts.append(
        PlanContact(compartment_edge(cells[n], anchor_t), 0, cells[n], "anchor", n)
    )

    plan = EdgePlan(w, cells, contacts, case_names, time_bounds, entry_index)
    plan.check()
    return plan


def plan_word_cyclic(word: WordLike, state0: EntryState) -> EdgePlan:
    """Build the unanchored one-period itinerary of a cyclic word.

    ``state0`` must be a fixed point of the word's entry-state map (the
    periodic closure search provides it); the plan raises otherwise.
    """
    w = _coerce_word(word)
    if len(w) == 0:
        raise ValueError("cannot plan an empty word")
    letters = [Letter.from_code(int(c)) for c in w.codes]
    n = len(letters)
    if n > 1 and letters[0].code == letters[-1].inverse().code:
        raise ValueError("word is not cyclically reduced")

    cells: list[Cell] = [(0, 0, 0)]
    for lt in letters:
        cells.append(tuple(c + s for c, s in zip(cells[-1], letter_step(lt))))

    contacts: list[PlanContact] = []
    entry_index: list[int] = []
    case_names: list[str] = []
    time_bounds: list[float] = []

    state = state0
    for t in range(1, n + 1):
        entry_index.append(len(contacts))
        contacts.append(
            PlanContact(
                compartment_edge(cells[t], state[0]), state[1], cells[t], "entry", t
            )
        )
        nxt = letters[t % n]
        _, case = g_case = canonicalize_turn(letters[t - 1], nxt, state)
        mids, mid_forces, exit_edge, exit_force = realize_case(*g_case)
        for m, f in zip(mids, mid_forces):
            contacts.append(
                PlanContact(compartment_edge(cells[t], m), f, cells[t], "middle", t)
            )
        case_names.append(case.name)
        time_bounds.append(case.time_bound)
        state = thread_state(exit_edge, exit_force, nxt)

    if state != state0:
        raise PlanError("entry state does not close up over one period")

    plan = EdgePlan(
        w,
        cells,
        contacts,
        case_names,
        time_bounds,
        entry_index,
        cyclic=True,
        shift=cells[n],
    )
    plan.check()
    return plan
