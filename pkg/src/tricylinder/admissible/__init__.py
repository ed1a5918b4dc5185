"""Constructive side of the package: reduced word in, billiard orbit out.

The pipeline is plan -> minimize -> refine -> validate.  ``plan_word``
expands a word into the edge itinerary dictated by the turn-case table,
``minimize_arclength`` finds the shortest polyline threading those edges,
``refine_orbit`` polishes it in multiprecision, and ``validate_orbit``
reproduces it with the flow simulator.  ``insert_idle_runs`` slows a
finished orbit down without touching its word, and ``close_periodic``
produces a periodic orbit whose word per period extends the given one.
"""

from .cases import (
    CORNER_CASES,
    STRAIGHT_CASES,
    EntryState,
    LocalEdge,
    PlanError,
    TurnCase,
    canonicalize_turn,
    entrance_states,
    map_entry_state,
    map_local_edge,
    realize_case,
    thread_state,
    turn_fixers,
)
from .idle import insert_idle_runs
from .minimize import (
    AdmissibleOrbit,
    BalanceViolation,
    NonConvergence,
    minimize_arclength,
)
from .periodic import close_periodic
from .planner import EdgePlan, PlanContact, compartment_edge, plan_word, plan_word_cyclic
from .refine import dispersion_digits, refine_orbit
from .validate import ValidationMismatch, validate_orbit

__all__ = [
    "AdmissibleOrbit",
    "BalanceViolation",
    "CORNER_CASES",
    "EdgePlan",
    "EntryState",
    "LocalEdge",
    "NonConvergence",
    "PlanContact",
    "PlanError",
    "STRAIGHT_CASES",
    "TurnCase",
    "ValidationMismatch",
    "canonicalize_turn",
    "close_periodic",
    "compartment_edge",
    "dispersion_digits",
    "entrance_states",
    "insert_idle_runs",
    "map_entry_state",
    "map_local_edge",
    "minimize_arclength",
    "plan_word",
    "plan_word_cyclic",
    "realize_case",
    "refine_orbit",
    "thread_state",
    "turn_fixers",
    "validate_orbit",
]
