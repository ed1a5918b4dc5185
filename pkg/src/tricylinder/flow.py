"""Event-driven integration of the billiard flow in the universal cover.

The configuration space is R^3 minus open tubes of radius r0 around every
axis-parallel line through the integer lattice.  A trajectory is a unit
speed polygonal path: straight segments, specular reflections on tube
walls.  ``simulate`` runs one trajectory and returns an
:class:`OrbitRecord` holding the crossing letters (the orbit's homotopy
data) and, optionally, the full event list for later reconstruction.

Time reversal, translation by integer vectors, and the 48 cube symmetries
all act on trajectories; the tests pin those equivariances down.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .geometry import LatticeLine, cell_of, edges_of_cell, line_distance
from .words import Letter, ReducedWord

SQRT3 = np.sqrt(3.0)

#: A start point may sit this deep inside a tube wall and still be accepted.
START_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class PhasePoint:
    """Position, unit velocity, and the time they were attained."""

    position: np.ndarray
    velocity: np.ndarray
    time: float = 0.0


@dataclass(frozen=True, eq=False)
class Collision:
    time: float
    line: LatticeLine
    point: np.ndarray
    velocity_out: np.ndarray
    grazing: bool = False


@dataclass(frozen=True, eq=False)
class FaceCrossing:
    """Transversal crossing of a lattice plane; emits one letter."""

    time: float
    letter: Letter
    plane: int
    point: np.ndarray
    velocity: np.ndarray


@dataclass(eq=False)
class OrbitRecord:
    """Everything one simulation run produced.

    ``letters`` are the raw (unreduced) crossing codes in time order; the
    reduced word is built on first use of :attr:`word`.  Event arrays are
    populated only when the run recorded full events.
    """

    r0: float
    duration: float
    initial: PhasePoint
    final: PhasePoint
    letters: np.ndarray
    n_collisions: int
    singular: bool
    truncated: bool
    max_speed_drift: float
    event_times: np.ndarray | None = None
    event_kinds: np.ndarray | None = None
    event_axes: np.ndarray | None = None
    event_a: np.ndarray | None = None
    event_b: np.ndarray | None = None
    event_points: np.ndarray | None = None
    event_velocities: np.ndarray | None = None
    _word: ReducedWord | None = field(default=None, repr=False)

    # -- homotopy data -----------------------------------------------------

    @property
    def crossing_counts(self) -> tuple[int, int, int]:
        """Unsigned plane-crossing counts (n_x, n_y, n_z)."""
        axes = self.letters // 2
        return (
            int(np.count_nonzero(axes == 0)),
            int(np.count_nonzero(axes == 1)),
            int(np.count_nonzero(axes == 2)),
        )

    @property
    def n_x(self) -> int:
        return self.crossing_counts[0]

    @property
    def n_y(self) -> int:
        return self.crossing_counts[1]

    @property
    def n_z(self) -> int:
        return self.crossing_counts[2]

    @property
    def word(self) -> ReducedWord:
        if self._word is None:
            self._word = ReducedWord(self.letters)
        return self._word

    # -- event views -------------------------------------------------------

    @property
    def has_events(self) -> bool:
        return self.event_times is not None

    def events(self):
        """Materialize the event list as Collision / FaceCrossing objects."""
        if not self.has_events:
            raise ValueError("run was recorded in summary mode, no events kept")
        out = []
        for i in range(self.event_times.size):
            kind = int(self.event_kinds[i])
            t = float(self.event_times[i])
            axis = int(self.event_axes[i])
            pt = self.event_points[i].copy()
            vel = self.event_velocities[i].copy()
            if kind == _kernel.KIND_FACE:
                sign = int(self.event_b[i])
                out.append(
                    FaceCrossing(
                        time=t,
                        letter=Letter(axis, sign),
                        plane=int(self.event_a[i]),
                        point=pt,
                        velocity=vel,
                    )
                )
            else:
                line = LatticeLine(axis, (int(self.event_a[i]), int(self.event_b[i])))
                out.append(
                    Collision(
                        time=t,
                        line=line,
                        point=pt,
                        velocity_out=vel,
                        grazing=kind == _kernel.KIND_GRAZE,
                    )
                )
        return out

    def collisions(self):
        return [e for e in self.events() if isinstance(e, Collision)]

    def _knots(self):
        # Piecewise-linear knots: initial state plus outgoing state per event.
        if not self.has_events:
            raise ValueError("run was recorded in summary mode, no events kept")
        kt = np.concatenate([[self.initial.time], self.event_times])
        kq = np.vstack([self.initial.position[None, :], self.event_points])
        kv = np.vstack([self.initial.velocity[None, :], self.event_velocities])
        return kt, kq, kv

    def state_at(self, t):
        """Position and (right-continuous) velocity at time(s) t."""
        kt, kq, kv = self._knots()
        t_arr = np.asarray(t, dtype=float)
        lo, hi = self.initial.time, self.final.time
        if np.any(t_arr < lo - 1e-9) or np.any(t_arr > hi + 1e-9):
            raise ValueError(f"time out of range [{lo}, {hi}]")
        idx = np.searchsorted(kt, t_arr, side="right") - 1
        idx = np.clip(idx, 0, kt.size - 1)
        q = kq[idx] + (t_arr[..., None] - kt[idx][..., None]) * kv[idx]
        return q, kv[idx].copy()

    def position_at(self, t):
        return self.state_at(t)[0]


def _check_start(q, r0):
    cell = cell_of(q)
    for edge in edges_of_cell(cell):
        if line_distance(q, edge.line) < r0 - START_SLACK:
            raise ValueError(
                f"start point {q.tolist()} lies inside the tube around "
                f"{edge.line}"
            )


def simulate(
    position,
    velocity,
    duration: float,
    r0: float,
    *,
    record_events: bool = True,
    max_events: int = 10**7,
    check_start: bool = True,
) -> OrbitRecord:
    """Run one trajectory for the given duration.

    ``velocity`` is normalized to unit length.  The start must lie outside
    every tube (up to 1e-9 of slack); starts on cell boundaries are fine,
    the initial cell is chosen in the direction of motion.
    """
    q = np.array(position, dtype=float)
    v = np.array(velocity, dtype=float)
    if q.shape != (3,) or v.shape != (3,):
        raise ValueError("position and velocity must be 3-vectors")
    speed = float(np.linalg.norm(v))
    if speed <= 0:
        raise ValueError("velocity must be nonzero")
    v /= speed
    if not 0 <= r0 < 0.5:
        raise ValueError("radius must lie in [0, 0.5)")
    if duration < 0:
        raise ValueError("duration must be nonnegative")
    if check_start and r0 > 0:
        _check_start(q, r0)

    initial = PhasePoint(q.copy(), v.copy(), 0.0)
    cap_let = int(SQRT3 * duration) + 8
    cap_ev = 64 + int(24 * (duration + 1)) if record_events else 1

    while True:
        qq = q.copy()
        vv = v.copy()
        cell = np.array(cell_of(q, v), dtype=np.int64)
        ev_time = np.empty(cap_ev, dtype=np.float64)
        ev_kind = np.empty(cap_ev, dtype=np.int8)
        ev_axis = np.empty(cap_ev, dtype=np.int8)
        ev_a = np.empty(cap_ev, dtype=np.int32)
        ev_b = np.empty(cap_ev, dtype=np.int32)
        ev_q = np.empty((cap_ev, 3), dtype=np.float64)
        ev_v = np.empty((cap_ev, 3), dtype=np.float64)
        letters = np.empty(cap_let, dtype=np.int8)
        status, n_ev, n_let, ncoll, t_end, drift = _kernel.advance(
            qq,
            vv,
            cell,
            0.0,
            float(duration),
            float(r0),
            int(max_events),
            ev_time,
            ev_kind,
            ev_axis,
            ev_a,
            ev_b,
            ev_q,
            ev_v,
            letters,
            record_events,
        )
        if status == _kernel.STATUS_OVERFLOW:
            cap_ev *= 4
            cap_let *= 4
            continue
        break

    record = OrbitRecord(
        r0=r0,
        duration=float(duration),
        initial=initial,
        final=PhasePoint(qq, vv, float(t_end)),
        letters=letters[:n_let].copy(),
        n_collisions=int(ncoll),
        singular=status == _kernel.STATUS_SINGULAR,
        truncated=status == _kernel.STATUS_BUDGET,
        max_speed_drift=float(drift),
    )
    if record_events:
        record.event_times = ev_time[:n_ev].copy()
        record.event_kinds = ev_kind[:n_ev].copy()
        record.event_axes = ev_axis[:n_ev].copy()
        record.event_a = ev_a[:n_ev].copy()
        record.event_b = ev_b[:n_ev].copy()
        record.event_points = ev_q[:n_ev].copy()
        record.event_velocities = ev_v[:n_ev].copy()
    return record


def word_of(record: OrbitRecord) -> ReducedWord:
    """Reduced word of a finite orbit segment."""
    return record.word


def random_phase_point(rng: np.random.Generator, r0: float, *, max_tries: int = 1000):
    """Uniform start data: position uniform in the cell and outside the
    tubes (rejection sampling), direction uniform on the sphere."""
    for _ in range(max_tries):
        q = rng.random(3)
        cell = cell_of(q)
        if all(
            line_distance(q, e.line) >= r0 + 1e-9 for e in edges_of_cell(cell)
        ):
            break
    else:
        raise RuntimeError("could not sample a start outside the tubes")
    v = rng.normal(size=3)
    n = np.linalg.norm(v)
    while n < 1e-12:
        v = rng.normal(size=3)
        n = np.linalg.norm(v)
    return q, v / n
