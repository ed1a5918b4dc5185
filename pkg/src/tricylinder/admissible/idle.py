"""Slowing an orbit down without changing its crossing word.

A pair of parallel edge tubes across an entrance face makes a resonator:
the orbit can bounce back and forth between them any number of times
before continuing its itinerary.  Each round trip burns roughly
2*(1 - 2*r0) of flight time and is homotopically invisible, since the
zigzag stays against the face and any face crossings it produces cancel
in pairs.  Splicing such runs into a plan therefore lowers the mean
crossing speed to (almost) any requested value below the current one.

The pair count for a requested speed is calibrated by measurement: build,
minimize, compare, and retarget with the observed per-pair cost.
"""

from __future__ import annotations

from ..geometry import PERP_AXES
from .minimize import AdmissibleOrbit, NonConvergence, minimize_arclength
from .planner import EdgePlan, PlanContact, compartment_edge, local_edge_of

SPEED_TOL = 0.02
MAX_PASSES = 4


def _partner_edge(pc, crossing_axis):
    """The parallel edge across the entrance face from an entry contact."""
    a, (cj, cl) = local_edge_of(pc.edge, pc.cell)
    j, l = PERP_AXES[a]
    if j == crossing_axis:
        local = (a, (cj, 1 - cl))
    else:
        local = (a, (1 - cj, cl))
    return compartment_edge(pc.cell, local)


def _spliced(plan: EdgePlan, n_pairs: int) -> EdgePlan:
    letters = plan.letters
    n = len(letters)
    per = [n_pairs // n] * n
    for i in range(n_pairs % n):
        per[i] += 1
    entry_of = {idx: t for t, idx in enumerate(plan.entry_index)}
    contacts: list[PlanContact] = []
    entry_index = [0] * n
    for i, pc in enumerate(plan.contacts):
        t = entry_of.get(i)
        if t is None:
            contacts.append(pc)
            continue
        entry_index[t] = len(contacts)
        contacts.append(pc)
        if per[t]:
            partner = _partner_edge(pc, letters[t].axis)
            for _ in range(per[t]):
                contacts.append(
                    PlanContact(partner, -pc.force, pc.cell, "idle", pc.compartment)
                )
                contacts.append(
                    PlanContact(pc.edge, pc.force, pc.cell, "idle", pc.compartment)
                )
    out = EdgePlan(
        plan.word,
        list(plan.compartments),
        contacts,
        list(plan.case_names),
        list(plan.time_bounds),
        entry_index,
    )
    out.check()
    return out


def insert_idle_runs(
    orbit: AdmissibleOrbit, target_speed: float
) -> AdmissibleOrbit:
    """Rebuild the orbit with enough idle bouncing to hit a slower speed.

    Returns a freshly minimized orbit whose mean crossing speed lies
    within 2 percent of the target and whose reduced word is unchanged.
    The input orbit is not modified; when the target equals the current
    speed it is returned as is.
    """
    plan = orbit.plan
    if plan.cyclic:
        raise ValueError("idle insertion works on anchored realizations only")
    current = orbit.speed
    if target_speed <= 0:
        raise ValueError("target speed must be positive")
    if target_speed > current:
        raise ValueError(
            f"target speed {target_speed} exceeds the current speed "
            f"{current:.6f}; idling can only slow an orbit down"
        )
    if target_speed == current:
        return orbit
    if abs(current - target_speed) <= SPEED_TOL * target_speed:
        return orbit

    n_letters = len(plan.word)
    goal_time = n_letters / target_speed
    base_time = orbit.length
    tau = 2.0 * (1.0 - 2.0 * orbit.r0)
    n_pairs = max(1, round((goal_time - base_time) / tau))

    last = None
    for _ in range(MAX_PASSES):
        cand = minimize_arclength(_spliced(plan, n_pairs), orbit.r0, budget=500000)
        last = cand
        if abs(cand.speed - target_speed) <= SPEED_TOL * target_speed:
            return cand
        measured = (cand.length - base_time) / n_pairs
        retarget = max(1, round((goal_time - base_time) / measured))
        if retarget == n_pairs:
            # The measurement agrees with the build yet the speed missed:
            # the pair count is quantized too coarsely for this word.
            break
        n_pairs = retarget
    raise NonConvergence(
        f"idle calibration missed the target speed {target_speed} "
        f"(closest attempt {last.speed:.6f} with {n_pairs} pairs)"
    )
