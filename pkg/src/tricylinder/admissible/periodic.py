"""Periodic realizations of cyclic words.

A cyclically reduced word is realized by a closed billiard path in the
torus, equivalently a path in the cover satisfying q(t + T) = q(t) + d
for the word's net displacement d.  The itinerary exists when threading
the entry state once around the word returns to its start; not every
word closes on its own, but appending a short suffix (preferring plain
repetition, then all short suffixes in code order) always did in
practice, so the search is deterministic and bounded.

Verification shoots the refined realization through three full periods
in mp arithmetic and checks every reflection against the translated
plan, the crossing sequence against the repeated word, and the period
map against the displacement.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
from mpmath import mp

from .. import _kernel
from ..geometry import PERP_AXES
from ..words import Letter
from .cases import (
    PlanError,
    canonicalize_turn,
    entrance_states,
    realize_case,
    thread_state,
)
from .minimize import AdmissibleOrbit, minimize_arclength
from .planner import _coerce_word, plan_word_cyclic
from .refine import _Chain, dispersion_digits, refine_orbit
from .validate import POSITION_TOL, _mismatch, _shoot


@lru_cache(maxsize=4096)
def _advance(eps_code: int, delt_code: int, state):
    eps = Letter.from_code(eps_code)
    delt = Letter.from_code(delt_code)
    g_case = canonicalize_turn(eps, delt, state)
    _, _, exit_edge, exit_force = realize_case(*g_case)
    return thread_state(exit_edge, exit_force, delt)


def _thread_once(codes, state):
    """Entry state after following the whole cyclic word once."""
    n = len(codes)
    st = state
    for t in range(n):
        st = _advance(codes[t], codes[(t + 1) % n], st)
    return st


def _fixed_state(codes):
    for s in entrance_states(Letter.from_code(codes[0])):
        if _thread_once(codes, s) == s:
            return s
    return None


def _closed_extension(codes, max_extension: int):
    """The word, possibly extended, together with a closing entry state."""
    codes = tuple(codes)
    s = _fixed_state(codes)
    if s is not None:
        return list(codes), s
    n = len(codes)
    k = 2
    while (k - 1) * n <= max_extension:
        W = codes * k
        s = _fixed_state(W)
        if s is not None:
            return list(W), s
        k += 1
    for length in range(1, max_extension + 1):
        for u in itertools.product(range(6), repeat=length):
            if u[0] == codes[-1] ^ 1:
                continue
            if any(u[i + 1] == u[i] ^ 1 for i in range(length - 1)):
                continue
            if u[-1] == codes[0] ^ 1:
                continue
            W = codes + u
            s = _fixed_state(W)
            if s is not None:
                return list(W), s
    raise PlanError(
        f"no periodic closure of {''.join(map(str, map(Letter.from_code, codes)))} "
        f"within {max_extension} extra letters"
    )


def _verify_periodic(orbit: AdmissibleOrbit) -> None:
    plan = orbit.plan
    m = len(plan.contacts)
    shift = np.array(plan.shift, dtype=float)
    chain = _Chain(plan, orbit.r0)
    old_dps = mp.dps
    try:
        mp.dps = orbit.mp_dps
        pts, rho, uhat = chain._geometry(orbit.mp_u, orbit.mp_theta)
        period = sum(rho, mp.mpf(0))
        delta = mp.mpf(10) ** (-(mp.dps // 3))
        duration = 3 * period - delta
        events, q_end, _ = _shoot(
            list(pts[0]), list(uhat[0]), mp.mpf(orbit.r0), duration
        )

        coll = [e for e in events if e[1] == _kernel.KIND_COLLISION]
        expected_count = 3 * m - 1
        if len(coll) != expected_count:
            raise _mismatch(
                min(len(coll), expected_count),
                expected_count,
                len(coll),
                "reflection count over three periods is off",
            )
        obs_pts = []
        for jj, ev in enumerate(coll):
            idx = jj + 1
            c, p = idx % m, idx // m
            pc = plan.contacts[c]
            line = pc.edge.line
            j, l = PERP_AXES[line.axis]
            etrans = (
                line.trans[0] + p * int(plan.shift[j - 1]),
                line.trans[1] + p * int(plan.shift[l - 1]),
            )
            if (ev[2], (ev[3], ev[4])) != (line.axis, etrans):
                raise _mismatch(
                    jj,
                    (line.axis, etrans),
                    (ev[2], (ev[3], ev[4])),
                    "reflection hit the wrong tube",
                )
            obs = np.array([float(x) for x in ev[5]])
            tgt = orbit.contact_points[c] + p * shift
            err = float(np.abs(obs - tgt).max())
            if err > POSITION_TOL:
                raise _mismatch(
                    jj, tgt.tolist(), obs.tolist(),
                    f"reflection point off by {err:.3e}",
                )
            obs_pts.append(obs)

        codes = [
            2 * (e[2] - 1) + (0 if e[4] > 0 else 1)
            for e in events
            if e[1] == _kernel.KIND_FACE
        ]
        # The crossing tape must be a window of the repeated word.  A
        # contact sitting exactly on a cell face (symmetric orbits do
        # this) merges its crossing with the launch instant or with the
        # truncated final return, so one code fewer is also accepted.
        Wc = [int(c) for c in plan.word.codes]
        n3 = 3 * len(Wc)
        tape = Wc * 4
        ok = len(codes) in (n3, n3 - 1) and any(
            codes == tape[k:k + len(codes)] for k in range(len(Wc))
        )
        if not ok:
            raise _mismatch(
                None,
                Wc * 3,
                codes,
                "crossing sequence does not repeat the word",
            )

        closure = 0.0
        for jj in range(m, len(obs_pts)):
            d = obs_pts[jj] - obs_pts[jj - m] - shift
            closure = max(closure, float(np.abs(d).max()))
        target = [pts[0][c] + 3 * mp.mpf(int(plan.shift[c])) - delta * uhat[-1][c]
                  for c in range(3)]
        end_err = max(abs(float(q_end[c] - target[c])) for c in range(3))
        if max(closure, end_err) > POSITION_TOL:
            raise _mismatch(
                None,
                0.0,
                max(closure, end_err),
                "period map misses the displacement",
            )
        orbit.closure_error = max(closure, end_err)
    finally:
        mp.dps = old_dps
    orbit.validated = True


def close_periodic(word, r0: float = 0.05, *, max_extension: int = 6):
    """Construct and certify a periodic realization of a cyclic word.

    The input must be cyclically reduced.  When its entry states do not
    close up, the word is extended (repetition first, then short
    suffixes); the realized word is ``orbit.plan.word`` and the net
    displacement per period ``orbit.plan.shift``.  The returned orbit is
    validated over three periods with closure error stored on it.
    """
    w = _coerce_word(word)
    if len(w) == 0:
        raise ValueError("cannot close an empty word")
    codes = [int(c) for c in w.codes]
    if len(codes) > 1 and codes[0] == codes[-1] ^ 1:
        raise ValueError(f"{w} is not cyclically reduced")
    if not 0 < r0 <= 0.2:
        raise ValueError("radius must lie in (0, 0.2]")

    W, s0 = _closed_extension(codes, max_extension)
    plan = plan_word_cyclic([Letter.from_code(c) for c in W], s0)
    orbit = minimize_arclength(plan, r0)
    refine_orbit(orbit, dispersion_digits(orbit, periods=3))
    _verify_periodic(orbit)
    return orbit
