"""Shooting-based certification of a constructed orbit.

The minimizer produces a broken line satisfying the reflection law at
every contact; this module closes the loop by launching an actual
billiard trajectory from the first vertex and checking that the flow
reproduces the planned contact sequence, the planned crossing word, and
the planned endpoint.  The integration runs in mpmath arithmetic at the
orbit's refined precision, since every dispersive bounce multiplies the
launch error by a factor of order flight length over radius.

Per segment the only collision candidates are the twelve edge tubes of
the current unit cell; a double precision preview discards the hopeless
ones and only near candidates are re-evaluated exactly.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from mpmath import mp

from .. import _kernel
from ..flow import OrbitRecord, PhasePoint
from ..geometry import PERP_AXES
from ..words import ReducedWord
from .minimize import AdmissibleOrbit
from .refine import _Chain, dispersion_digits, refine_orbit

#: Largest float preview time excess that still forces exact evaluation.
PREVIEW_MARGIN = 1e-4

POSITION_TOL = 1e-6
SYNC_TOL = 1e-9


class ValidationMismatch(Exception):
    """The shot trajectory diverged from the planned itinerary.

    ``index`` is the first divergent collision (None for word or endpoint
    trouble), ``expected`` and ``observed`` describe the disagreement.
    """

    def __init__(self, index, expected, observed, message):
        self.index = index
        self.expected = expected
        self.observed = observed
        super().__init__(message)


def _mismatch(index, expected, observed, what):
    return ValidationMismatch(
        index,
        expected,
        observed,
        f"{what}; expected {expected}, observed {observed} "
        f"(first divergence at event {index}). The construction may sit "
        f"too close to a tangency; retry with a smaller radius.",
    )


def _shoot(q, v, r0, duration):
    """Integrate the flow in mp arithmetic, returning the event list.

    Events are tuples (t, kind, axis, a, b, point, velocity) mirroring
    the double precision kernel's conventions, with positions kept in the
    universal cover.  The current cell is tracked explicitly and updated
    on each recorded face event, so no crossing can be skipped when a
    reflection point sits exactly on a face (symmetric realizations do
    that); a collision tied with a face within roundoff is taken first,
    after which the face fires at a zero-or-epsilon time.
    """
    events = []
    t = mp.mpf(0)
    r0sq = r0 * r0
    tiny = mp.mpf(10) ** (-mp.dps + 5)
    tie = mp.mpf(10) ** (-(mp.dps // 2))
    cell = [
        math.floor(float(q[c]) + 1e-9 * float(v[c])) for c in range(3)
    ]
    while True:
        remaining = duration - t
        if remaining <= 0:
            break
        qf = [float(q[c]) for c in range(3)]
        vf = [float(v[c]) for c in range(3)]

        tf = None
        fax = fplane = fsign = 0
        for c in range(3):
            if v[c] > 0:
                tt = (cell[c] + 1 - q[c]) / v[c]
                plane, sign = cell[c] + 1, 1
            elif v[c] < 0:
                tt = (cell[c] - q[c]) / v[c]
                plane, sign = cell[c], -1
            else:
                continue
            if tf is None or tt < tf:
                tf, fax, fplane, fsign = tt, c + 1, plane, sign
        if tf is None:
            raise RuntimeError("velocity lost all components")
        tf_f = float(tf)

        best_tc = None
        best = None
        for axis in (1, 2, 3):
            j, l = PERP_AXES[axis]
            for dj in (0, 1):
                for dl in (0, 1):
                    tj, tl = cell[j - 1] + dj, cell[l - 1] + dl
                    # Double precision preview of the quadratic.
                    wj = qf[j - 1] - tj
                    wl = qf[l - 1] - tl
                    bf = wj * vf[j - 1] + wl * vf[l - 1]
                    if bf >= PREVIEW_MARGIN:
                        continue
                    a2f = vf[j - 1] ** 2 + vf[l - 1] ** 2
                    cf = wj * wj + wl * wl - float(r0) ** 2
                    discf = bf * bf - a2f * cf
                    if discf < -PREVIEW_MARGIN:
                        continue
                    if discf > 0:
                        tcf = (-bf - math.sqrt(discf)) / a2f
                        if tcf > tf_f + PREVIEW_MARGIN:
                            continue
                    # Exact evaluation.
                    dqj = q[j - 1] - tj
                    dql = q[l - 1] - tl
                    b = dqj * v[j - 1] + dql * v[l - 1]
                    if b >= 0:
                        continue
                    a2 = v[j - 1] ** 2 + v[l - 1] ** 2
                    cc = dqj * dqj + dql * dql - r0sq
                    disc = b * b - a2 * cc
                    if disc < 0:
                        continue
                    tc = (-b - mp.sqrt(disc)) / a2
                    if tc < tiny:
                        continue
                    if best_tc is None or tc < best_tc:
                        best_tc = tc
                        best = (axis, tj, tl)

        if best_tc is not None and best_tc <= tf + tie and best_tc <= remaining:
            t = t + best_tc
            q = [q[c] + best_tc * v[c] for c in range(3)]
            axis, tj, tl = best
            j, l = PERP_AXES[axis]
            nj = (q[j - 1] - tj) / r0
            nl = (q[l - 1] - tl) / r0
            dot = v[j - 1] * nj + v[l - 1] * nl
            v = list(v)
            v[j - 1] = v[j - 1] - 2 * dot * nj
            v[l - 1] = v[l - 1] - 2 * dot * nl
            norm = mp.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2)
            v = [v[c] / norm for c in range(3)]
            events.append(
                (t, _kernel.KIND_COLLISION, axis, tj, tl, list(q), list(v))
            )
        elif tf <= remaining:
            t = t + tf
            q = [q[c] + tf * v[c] for c in range(3)]
            cell[fax - 1] += fsign
            events.append(
                (t, _kernel.KIND_FACE, fax, fplane, fsign, list(q), list(v))
            )
        else:
            q = [q[c] + remaining * v[c] for c in range(3)]
            t = duration
            break
    return events, q, v


def validate_orbit(
    orbit: AdmissibleOrbit, r0: Optional[float] = None
) -> OrbitRecord:
    """Certify a minimized orbit by re-shooting it through the flow.

    Refines the orbit first when its stored precision falls short of the
    dispersion estimate.  On success marks the orbit validated and
    returns the float event record of the shot trajectory; on divergence
    raises ValidationMismatch at the first disagreeing event.
    """
    if orbit.plan.cyclic:
        raise ValueError(
            "cyclic realizations are certified by their periodic closure"
        )
    if r0 is not None and float(r0) != orbit.r0:
        raise ValueError(
            "validation must run at the radius the orbit was built for; "
            "rebuild the orbit to change the radius"
        )
    if orbit.r0 == 0:
        raise ValueError("a zero radius orbit has no tubes to reflect on")

    if orbit.mp_dps < dispersion_digits(orbit):
        refine_orbit(orbit)

    chain = _Chain(orbit.plan, orbit.r0)
    old_dps = mp.dps
    try:
        mp.dps = orbit.mp_dps
        pts, rho, uhat = chain._geometry(orbit.mp_u, orbit.mp_theta)
        float_view = np.array([[float(c) for c in p] for p in pts])
        sync = np.abs(float_view - orbit.contact_points).max(axis=1)
        if float(sync.max()) > SYNC_TOL:
            k = int(sync.argmax())
            raise _mismatch(
                k,
                orbit.contact_points[k].tolist(),
                float_view[k].tolist(),
                "stored contact points disagree with the refined chain",
            )
        total = sum(rho, mp.mpf(0))
        # Stop the shot halfway through the final segment.  The terminal
        # anchor is a pinned endpoint, not a reflection, so the shot must
        # not reach its tube; a fixed-epsilon cutoff loses that race once
        # the shot's clock has drifted by more than the epsilon.
        duration = total - rho[-1] / 2
        q0 = list(pts[0])
        v0 = list(uhat[0])
        events, q_end, v_end = _shoot(q0, v0, mp.mpf(orbit.r0), duration)

        expected = orbit.plan.contacts[1:-1]
        expected_pts = orbit.contact_points[1:-1]
        coll = [e for e in events if e[1] == _kernel.KIND_COLLISION]
        for k, ev in enumerate(coll):
            if k >= len(expected):
                raise _mismatch(
                    k, None, (ev[2], (ev[3], ev[4])), "surplus reflection"
                )
            pc = expected[k]
            line = pc.edge.line
            if (ev[2], (ev[3], ev[4])) != (line.axis, line.trans):
                raise _mismatch(
                    k,
                    (line.axis, line.trans),
                    (ev[2], (ev[3], ev[4])),
                    "reflection hit the wrong tube",
                )
            obs = np.array([float(c) for c in ev[5]])
            err = float(np.abs(obs - expected_pts[k]).max())
            if err > POSITION_TOL:
                raise _mismatch(
                    k,
                    expected_pts[k].tolist(),
                    obs.tolist(),
                    f"reflection point off by {err:.3e}",
                )
        if len(coll) < len(expected):
            pc = expected[len(coll)]
            raise _mismatch(
                len(coll),
                (pc.edge.line.axis, pc.edge.line.trans),
                None,
                "planned reflection never happened",
            )

        codes = [
            2 * (e[2] - 1) + (0 if e[4] > 0 else 1)
            for e in events
            if e[1] == _kernel.KIND_FACE
        ]
        shot_word = ReducedWord(np.array(codes, dtype=np.int8))
        if shot_word != orbit.plan.word:
            raise _mismatch(
                None,
                str(orbit.plan.word),
                str(shot_word),
                "crossing word disagrees",
            )

        p_last = pts[-1]
        u_in = uhat[-1]
        target = [p_last[c] - (rho[-1] / 2) * u_in[c] for c in range(3)]
        end_err = max(abs(float(q_end[c] - target[c])) for c in range(3))
        if end_err > POSITION_TOL:
            raise _mismatch(
                None,
                [float(c) for c in target],
                [float(c) for c in q_end],
                f"endpoint off by {end_err:.3e}",
            )

        n_ev = len(events)
        times = np.array([float(e[0]) for e in events])
        kinds = np.array([e[1] for e in events], dtype=np.int8)
        axes = np.array([e[2] for e in events], dtype=np.int64)
        ev_a = np.array([e[3] for e in events], dtype=np.int64)
        ev_b = np.array([e[4] for e in events], dtype=np.int64)
        points = np.array(
            [[float(c) for c in e[5]] for e in events]
        ).reshape(n_ev, 3)
        vels = np.array(
            [[float(c) for c in e[6]] for e in events]
        ).reshape(n_ev, 3)
        drift = (
            float(np.abs(np.sqrt((vels * vels).sum(axis=1)) - 1.0).max())
            if n_ev
            else 0.0
        )
        record = OrbitRecord(
            r0=orbit.r0,
            duration=float(duration),
            initial=PhasePoint(
                np.array([float(c) for c in q0]),
                np.array([float(c) for c in v0]),
                0.0,
            ),
            final=PhasePoint(
                np.array([float(c) for c in q_end]),
                np.array([float(c) for c in v_end]),
                float(duration),
            ),
            letters=np.array(codes, dtype=np.int8),
            n_collisions=len(coll),
            singular=False,
            truncated=False,
            max_speed_drift=drift,
            event_times=times,
            event_kinds=kinds,
            event_axes=axes,
            event_a=ev_a,
            event_b=ev_b,
            event_points=points,
            event_velocities=vels,
        )
    finally:
        mp.dps = old_dps
    orbit.validated = True
    return record
