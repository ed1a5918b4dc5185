"""Shortest broken line through a planned edge itinerary.

Each contact contributes an edge parameter in [0, 1] and, at positive
scatterer radius, an azimuth around the contact cylinder.  The total
polyline length is minimized by projected gradient descent with
Barzilai-Borwein trial steps inside a monotone backtracking line search.
At the optimum every interior vertex satisfies the reflection law, so the
minimizer is the time-length realization of the itinerary.

The azimuth variable is carried as the arc length r0*theta, which keeps
the gradient components commensurate with the edge parameters and spares
the line search from scaling trouble at small radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..geometry import PERP_AXES
from .planner import EdgePlan

GRAD_TOL = 1e-10
STEP_TOL = 1e-14
ARMIJO = 1e-4
BOUNDARY_TOL = 1e-9


class BalanceViolation(RuntimeError):
    """A free contact slid to the end of its edge segment.

    The pull annotation promised an interior balance point; the itinerary
    cannot be realized with every contact on its assigned edge.
    """


class NonConvergence(RuntimeError):
    """The iteration budget ran out before the gradient tolerance."""


@dataclass(eq=False)
class AdmissibleOrbit:
    """A minimized realization of an edge plan at a given radius.

    ``params`` holds the edge parameter of every contact (pinned anchors
    stay at 0.5), ``angles`` the azimuth around each contact cylinder
    (meaningful only at positive radius).  ``per_cell_times`` gives the
    polyline time attributed to each word compartment.  The mp fields are
    populated by high-precision refinement and start empty.
    """

    plan: EdgePlan
    r0: float
    contact_points: np.ndarray
    params: np.ndarray
    angles: np.ndarray
    length: float
    per_cell_times: list[float]
    interior_margin: float
    iterations: int
    grad_norm: float
    objective_history: list[float] = field(repr=False)
    validated: bool = False
    closure_error: Optional[float] = None
    mp_u: Optional[list] = field(default=None, repr=False)
    mp_theta: Optional[list] = field(default=None, repr=False)
    mp_dps: int = 0

    @property
    def speed(self) -> float:
        """Mean homotopical speed: letters crossed per unit time."""
        return len(self.plan.word) / self.length

    @property
    def n_contacts(self) -> int:
        return len(self.plan.contacts)


class _Problem:
    """Vectorized geometry of one itinerary at one radius."""

    def __init__(self, plan: EdgePlan, r0: float):
        m = len(plan.contacts)
        self.plan = plan
        self.r0 = float(r0)
        self.m = m
        self.cyclic = plan.cyclic
        self.shift = (
            np.asarray(plan.shift, dtype=float) if plan.cyclic else None
        )
        eye = np.eye(3)
        self.P0 = np.empty((m, 3))
        self.D = np.empty((m, 3))
        self.EJ = np.empty((m, 3))
        self.EL = np.empty((m, 3))
        for i, pc in enumerate(plan.contacts):
            self.P0[i] = pc.edge.point(0.0)
            ax = pc.edge.line.axis
            j, l = PERP_AXES[ax]
            self.D[i] = eye[ax - 1]
            self.EJ[i] = eye[j - 1]
            self.EL[i] = eye[l - 1]
        pinned = np.array([pc.pinned for pc in plan.contacts], dtype=bool)
        self.iu = np.nonzero(~pinned)[0]
        self.nu = int(self.iu.size)
        self.ns = m if self.r0 > 0 else 0

    def pack(self, u: np.ndarray, theta: np.ndarray) -> np.ndarray:
        parts = [u[self.iu]]
        if self.ns:
            parts.append(self.r0 * theta)
        return np.concatenate(parts) if parts else np.empty(0)

    def unpack(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u = np.full(self.m, 0.5)
        u[self.iu] = x[: self.nu]
        if self.ns:
            theta = x[self.nu :] / self.r0
        else:
            theta = np.zeros(self.m)
        return u, theta

    def proj(self, x: np.ndarray) -> np.ndarray:
        out = x.copy()
        out[: self.nu] = np.clip(out[: self.nu], 0.0, 1.0)
        return out

    def points(self, u: np.ndarray, theta: np.ndarray) -> np.ndarray:
        P = self.P0 + u[:, None] * self.D
        if self.r0 > 0:
            P = P + self.r0 * (
                np.cos(theta)[:, None] * self.EJ
                + np.sin(theta)[:, None] * self.EL
            )
        return P

    def segments(self, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.cyclic:
            S = np.roll(P, -1, axis=0) - P
            S[-1] += self.shift
        else:
            S = P[1:] - P[:-1]
        lens = np.sqrt((S * S).sum(axis=1))
        lens = np.maximum(lens, 1e-300)
        return S, lens

    def fg(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        u, theta = self.unpack(x)
        P = self.points(u, theta)
        S, lens = self.segments(P)
        U = S / lens[:, None]
        f = float(lens.sum())
        # dF/dp_i = (unit into vertex i) - (unit out of vertex i).
        if self.cyclic:
            G = np.roll(U, 1, axis=0) - U
        else:
            G = np.zeros((self.m, 3))
            G[1:] += U
            G[:-1] -= U
        gu = (self.D * G).sum(axis=1)
        parts = [gu[self.iu]]
        if self.ns:
            T = (
                -np.sin(theta)[:, None] * self.EJ
                + np.cos(theta)[:, None] * self.EL
            )
            parts.append((T * G).sum(axis=1))
        g = np.concatenate(parts) if parts else np.empty(0)
        return f, g


def _pgd(prob: _Problem, x0: np.ndarray, budget: int):
    x = prob.proj(x0)
    f, g = prob.fg(x)
    hist = [f]
    alpha = 1e-2
    x_prev = g_prev = None
    it = 0
    while True:
        pg = x - prob.proj(x - g)
        gn = float(np.abs(pg).max()) if pg.size else 0.0
        if gn < GRAD_TOL:
            break
        if it >= budget:
            raise NonConvergence(
                f"projected gradient {gn:.3e} after {it} iterations "
                f"(budget {budget})"
            )
        if x_prev is not None:
            dx = x - x_prev
            dg = g - g_prev
            denom = float(dx @ dg)
            if denom > 0 and math.isfinite(denom):
                bb = float(dx @ dx) / denom
                if math.isfinite(bb) and bb > 0:
                    alpha = min(max(bb, 1e-12), 10.0)
        a = alpha
        accepted = False
        while a >= 1e-16:
            x_new = prob.proj(x - a * g)
            f_new, g_new = prob.fg(x_new)
            decrease = float(g @ (x - x_new))
            if f_new <= f - ARMIJO * decrease:
                accepted = True
                break
            a *= 0.5
        if not accepted:
            # The line search cannot move below rounding; accept the
            # current point as stationary.
            break
        step = float(np.abs(x_new - x).max())
        x_prev, g_prev = x, g
        x, f, g = x_new, f_new, g_new
        hist.append(f)
        it += 1
        if step < STEP_TOL:
            break
    pg = x - prob.proj(x - g)
    gn = float(np.abs(pg).max()) if pg.size else 0.0
    return x, f, g, gn, hist, it


def _init_theta(prob: _Problem, P: np.ndarray) -> np.ndarray:
    """Outward azimuth guess from the zero-radius polyline."""
    S, lens = prob.segments(P)
    U = S / lens[:, None]
    m = prob.m
    theta = np.zeros(m)
    for i in range(m):
        if prob.cyclic:
            n = U[i] - U[(i - 1) % m]
        elif i == 0:
            n = U[0]
        elif i == m - 1:
            n = -U[m - 2]
        else:
            n = U[i] - U[i - 1]
        a = float(n @ prob.EJ[i])
        b = float(n @ prob.EL[i])
        if a * a + b * b > 1e-24:
            theta[i] = math.atan2(b, a)
    return theta


def _newton_polish(plan, r0, u, theta):
    """A few exact-arithmetic Newton steps on the stationarity system.

    The line search cannot see objective improvements below the float
    resolution of the total length, which for long words leaves the
    gradient orders of magnitude above tolerance.  Stationarity residuals
    do not suffer from that cancellation, so a short Newton run (at a
    modest 30 digits) lands the float view on the optimum to roundoff.
    """
    from mpmath import mp

    from .refine import _Chain, _apply_delta, _maxabs

    chain = _Chain(plan, r0)
    if chain.nvar == 0:
        return u, theta
    old_dps = mp.dps
    try:
        mp.dps = 30
        uu = [mp.mpf(float(x)) for x in u]
        tt = [mp.mpf(float(x)) for x in theta]
        for _ in range(4):
            R, delta = chain.newton_delta(uu, tt)
            base = _maxabs(R)
            if base < mp.mpf(10) ** -25:
                break
            lam = mp.mpf(1)
            while True:
                u2, t2 = _apply_delta(chain, uu, tt, delta, lam)
                if _maxabs(chain.residual(u2, t2)) < base or lam <= mp.mpf(1) / 16:
                    break
                lam = lam / 2
            uu, tt = u2, t2
        return (
            np.array([float(x) for x in uu]),
            np.array([float(x) for x in tt]),
        )
    finally:
        mp.dps = old_dps


def _per_cell_times(plan: EdgePlan, lens: np.ndarray) -> list[float]:
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    ei = plan.entry_index
    if not ei:
        return [float(cum[-1])]
    out = []
    if plan.cyclic:
        total = float(cum[-1])
        for t in range(len(ei)):
            if t + 1 < len(ei):
                out.append(float(cum[ei[t + 1]] - cum[ei[t]]))
            else:
                out.append(total - float(cum[ei[t]]) + float(cum[ei[0]]))
    else:
        idx = [0] + list(ei) + [len(plan.contacts) - 1]
        for a, b in zip(idx, idx[1:]):
            out.append(float(cum[b] - cum[a]))
    return out


def minimize_arclength(
    plan: EdgePlan, r0: float, *, budget: int = 100000
) -> AdmissibleOrbit:
    """Minimize total length over the itinerary's contact variables.

    Solves at radius zero first and, for positive r0, restarts from that
    polyline with outward azimuth guesses.  Raises NonConvergence when the
    projected gradient never reaches tolerance within the budget, and
    BalanceViolation when a free contact converges onto the end of its
    edge segment.
    """
    if not 0.0 <= r0 <= 0.2:
        raise ValueError("radius must lie in [0, 0.2]")

    prob0 = _Problem(plan, 0.0)
    u = np.full(prob0.m, 0.5)
    x0 = prob0.pack(u, np.zeros(prob0.m))
    x, f, g, gn, hist, it = _pgd(prob0, x0, budget)
    u, _ = prob0.unpack(x)

    if r0 > 0:
        theta = _init_theta(prob0, prob0.points(u, np.zeros(prob0.m)))
        prob = _Problem(plan, r0)
        x0 = prob.pack(u, theta)
        x, f, g, gn, hist2, it2 = _pgd(prob, x0, budget)
        hist = hist + hist2
        it = it + it2
        u, theta = prob.unpack(x)
    else:
        prob = prob0
        theta = np.zeros(prob.m)

    # Boundary trouble must be diagnosed before polishing: the polish is
    # an interior method and would walk through an active constraint.
    if prob.nu:
        rough_margin = float(np.minimum(u[prob.iu], 1.0 - u[prob.iu]).min())
        if rough_margin < BOUNDARY_TOL:
            i = prob.iu[
                int(np.argmin(np.minimum(u[prob.iu], 1.0 - u[prob.iu])))
            ]
            pc = plan.contacts[i]
            raise BalanceViolation(
                f"contact {i} ({pc.role} on {pc.edge.line}) reached the "
                f"edge boundary, parameter {u[i]:.3e}"
            )

    u, theta = _newton_polish(plan, r0, u, theta)
    x = prob.pack(u, theta)
    f, g = prob.fg(x)
    pg = x - prob.proj(x - g)
    gn = float(np.abs(pg).max()) if pg.size else 0.0
    hist.append(f)
    if gn > GRAD_TOL:
        raise NonConvergence(
            f"gradient {gn:.3e} after polishing; the itinerary is "
            f"degenerate at radius {r0}"
        )

    if prob.nu:
        margin = float(np.minimum(u[prob.iu], 1.0 - u[prob.iu]).min())
    else:
        margin = math.inf
    if margin < BOUNDARY_TOL:
        i = prob.iu[int(np.argmin(np.minimum(u[prob.iu], 1.0 - u[prob.iu])))]
        pc = plan.contacts[i]
        raise BalanceViolation(
            f"contact {i} ({pc.role} on {pc.edge.line}) reached the edge "
            f"boundary, parameter {u[i]:.3e}"
        )

    P = prob.points(u, theta)
    _, lens = prob.segments(P)
    return AdmissibleOrbit(
        plan=plan,
        r0=float(r0),
        contact_points=P,
        params=u,
        angles=theta,
        length=f,
        per_cell_times=_per_cell_times(plan, lens),
        interior_margin=margin,
        iterations=it,
        grad_norm=gn,
        objective_history=hist,
    )
