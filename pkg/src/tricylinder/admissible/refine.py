"""High precision polishing of a minimized itinerary.

Shooting a trajectory through hundreds of dispersive reflections
amplifies any error in the launch state; the amplification factor per
bounce grows like the flight length over the scatterer radius.  To make
shooting-based validation meaningful the contact variables are therefore
polished far beyond double precision: Newton iteration on the stationarity
conditions of the length functional, in mpmath arithmetic, on a precision
ladder that roughly doubles the working digits per rung.

The Newton system is block tridiagonal along the contact chain with
blocks of size zero to two (pinned contacts lose their edge parameter,
zero radius drops the azimuth).  Open chains are solved by block
elimination in linear time; periodic chains couple first to last and are
solved densely, which is fine at the small sizes periodic words produce.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from mpmath import mp

from ..geometry import PERP_AXES
from .minimize import AdmissibleOrbit, NonConvergence
from .minimize import _per_cell_times


def dispersion_digits(orbit: AdmissibleOrbit, periods: int = 1) -> int:
    """Working digits needed to shoot through the orbit's reflections.

    Estimates the per-bounce expansion 1 + 2*rho/(r0*cos(phi)) from the
    float geometry and stacks the decimal magnitudes on a base margin.
    """
    if orbit.r0 == 0:
        return 60
    P = orbit.contact_points
    m = len(P)
    plan = orbit.plan
    if plan.cyclic:
        S = np.roll(P, -1, axis=0) - P
        S[-1] += np.asarray(plan.shift, dtype=float)
        rho = np.sqrt((S * S).sum(axis=1))
        interior = range(m)
    else:
        S = P[1:] - P[:-1]
        rho = np.sqrt((S * S).sum(axis=1))
        interior = range(1, m - 1)
    total = 0.0
    for i in interior:
        k = i if plan.cyclic else i - 1
        rin = float(rho[k])
        uin = S[k] / max(rin, 1e-300)
        ax = plan.contacts[i].edge.line.axis
        j, l = PERP_AXES[ax]
        nj = math.cos(orbit.angles[i])
        nl = math.sin(orbit.angles[i])
        cosphi = abs(uin[j - 1] * nj + uin[l - 1] * nl)
        lam = 1.0 + 2.0 * rin / (orbit.r0 * max(cosphi, 0.05))
        total += math.log10(lam)
    return 30 + int(math.ceil(periods * total))


def _vdot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


class _Chain:
    """mp-arithmetic residual and Newton step for one itinerary."""

    def __init__(self, plan: EdgePlan, r0: float):
        self.m = len(plan.contacts)
        self.cyclic = plan.cyclic
        self.r0 = mp.mpf(r0)
        self.shift = (
            [mp.mpf(s) for s in plan.shift] if plan.cyclic else None
        )
        self.base = []
        self.ax = []
        self.pj = []
        self.pl = []
        self.kinds = []
        with_s = r0 > 0
        for pc in plan.contacts:
            p0 = pc.edge.point(0.0)
            self.base.append([mp.mpf(p0[0]), mp.mpf(p0[1]), mp.mpf(p0[2])])
            a = pc.edge.line.axis
            j, l = PERP_AXES[a]
            self.ax.append(a - 1)
            self.pj.append(j - 1)
            self.pl.append(l - 1)
            if pc.pinned:
                self.kinds.append(("s",) if with_s else ())
            else:
                self.kinds.append(("u", "s") if with_s else ("u",))
        self.sizes = [len(k) for k in self.kinds]
        self.nvar = sum(self.sizes)

    def points(self, u, th):
        pts = []
        for i in range(self.m):
            p = list(self.base[i])
            p[self.ax[i]] = p[self.ax[i]] + u[i]
            if self.r0 > 0:
                p[self.pj[i]] = p[self.pj[i]] + self.r0 * mp.cos(th[i])
                p[self.pl[i]] = p[self.pl[i]] + self.r0 * mp.sin(th[i])
            pts.append(p)
        return pts

    def _geometry(self, u, th):
        pts = self.points(u, th)
        m = self.m
        nseg = m if self.cyclic else m - 1
        rho, uhat = [], []
        for k in range(nseg):
            a = pts[k]
            b = pts[(k + 1) % m]
            d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
            if self.cyclic and k == nseg - 1:
                d = [d[0] + self.shift[0], d[1] + self.shift[1], d[2] + self.shift[2]]
            r = mp.sqrt(_vdot(d, d))
            rho.append(r)
            uhat.append([d[0] / r, d[1] / r, d[2] / r])
        return pts, rho, uhat

    def _grad_vectors(self, rho, uhat):
        """Length gradient with respect to each contact point."""
        m = self.m
        G = []
        for i in range(m):
            g = [mp.mpf(0)] * 3
            if self.cyclic:
                uin = uhat[(i - 1) % m]
                uout = uhat[i]
                g = [uin[c] - uout[c] for c in range(3)]
            else:
                if i > 0:
                    uin = uhat[i - 1]
                    g = [g[c] + uin[c] for c in range(3)]
                if i < m - 1:
                    uout = uhat[i]
                    g = [g[c] - uout[c] for c in range(3)]
            G.append(g)
        return G

    def _tangents(self, i, th):
        cols = []
        for kind in self.kinds[i]:
            t = [mp.mpf(0)] * 3
            if kind == "u":
                t[self.ax[i]] = mp.mpf(1)
            else:
                t[self.pj[i]] = -mp.sin(th[i])
                t[self.pl[i]] = mp.cos(th[i])
            cols.append(t)
        return cols

    def residual(self, u, th):
        _, rho, uhat = self._geometry(u, th)
        G = self._grad_vectors(rho, uhat)
        R = []
        for i in range(self.m):
            for t in self._tangents(i, th):
                R.append(_vdot(t, G[i]))
        return R

    def _proj_over_rho(self, uh, r):
        """(I - u u^T)/rho as a row-major 3x3 list."""
        A = [[mp.mpf(0)] * 3 for _ in range(3)]
        for a in range(3):
            for b in range(3):
                A[a][b] = ((mp.mpf(1) if a == b else mp.mpf(0)) - uh[a] * uh[b]) / r
        return A

    def system(self, u, th):
        """Residual plus the coupling blocks of the Newton matrix."""
        _, rho, uhat = self._geometry(u, th)
        G = self._grad_vectors(rho, uhat)
        m = self.m
        nseg = len(rho)
        A = [self._proj_over_rho(uhat[k], rho[k]) for k in range(nseg)]

        tangents = [self._tangents(i, th) for i in range(m)]
        R = []
        for i in range(m):
            for t in tangents[i]:
                R.append(_vdot(t, G[i]))

        # blocks[(i, j)] accumulates d(residual block i)/d(variables j).
        blocks: dict[tuple[int, int], list[list]] = {}

        def add(i, j, M, sign):
            bi, bj = self.sizes[i], self.sizes[j]
            if bi == 0 or bj == 0:
                return
            tgt = blocks.setdefault(
                (i, j), [[mp.mpf(0)] * bj for _ in range(bi)]
            )
            for r in range(bi):
                ti = tangents[i][r]
                Mt = [
                    _vdot(ti, [M[0][c], M[1][c], M[2][c]]) for c in range(3)
                ]
                for c in range(bj):
                    tj = tangents[j][c]
                    tgt[r][c] += sign * _vdot(Mt, tj)

        for i in range(m):
            if self.cyclic:
                kin, kout = (i - 1) % m, i
                add(i, (i - 1) % m, A[kin], -1)
                add(i, i, A[kin], +1)
                add(i, i, A[kout], +1)
                add(i, (i + 1) % m, A[kout], -1)
            else:
                if i > 0:
                    add(i, i - 1, A[i - 1], -1)
                    add(i, i, A[i - 1], +1)
                if i < m - 1:
                    add(i, i, A[i], +1)
                    add(i, i + 1, A[i], -1)

        # The azimuth tangent rotates with its own variable: d t/d s is
        # the inward radial over r0, contributing on the (s, s) diagonal.
        if self.r0 > 0:
            for i in range(m):
                if self.sizes[i] == 0:
                    continue
                si = self.sizes[i] - 1  # the azimuth is always the last kind
                if self.kinds[i][si] != "s":
                    continue
                rad = [mp.mpf(0)] * 3
                rad[self.pj[i]] = mp.cos(th[i])
                rad[self.pl[i]] = mp.sin(th[i])
                diag = blocks.setdefault(
                    (i, i),
                    [[mp.mpf(0)] * self.sizes[i] for _ in range(self.sizes[i])],
                )
                diag[si][si] += -_vdot(rad, G[i]) / self.r0
        return R, blocks

    def newton_delta(self, u, th):
        R, blocks = self.system(u, th)
        if self.nvar == 0:
            return R, []
        if self.cyclic:
            delta = self._solve_dense(R, blocks)
        else:
            delta = self._solve_tridiag(R, blocks)
        return R, delta

    def _solve_dense(self, R, blocks):
        n = self.nvar
        offs = []
        o = 0
        for s in self.sizes:
            offs.append(o)
            o += s
        J = mp.matrix(n, n)
        for (i, j), M in blocks.items():
            for r in range(self.sizes[i]):
                for c in range(self.sizes[j]):
                    J[offs[i] + r, offs[j] + c] += M[r][c]
        rhs = mp.matrix(R)
        sol = mp.lu_solve(J, rhs)
        return [sol[k] for k in range(n)]

    def _solve_tridiag(self, R, blocks):
        # Squeeze out empty blocks; the chain coupling never reaches past
        # them, so the reduced system stays block tridiagonal.
        idx = [i for i in range(self.m) if self.sizes[i] > 0]
        K = len(idx)

        def blk(i, j):
            M = blocks.get((i, j))
            if M is None:
                return [[mp.mpf(0)] * self.sizes[j] for _ in range(self.sizes[i])]
            return M

        rhs = []
        pos = 0
        for i in range(self.m):
            rhs.append(R[pos : pos + self.sizes[i]])
            pos += self.sizes[i]

        # Small dense helpers (sizes are 1 or 2).
        def inv_apply(Mat, B):
            """Solve Mat X = B where B is a list of rows."""
            nn = len(Mat)
            if nn == 1:
                piv = Mat[0][0]
                if piv == 0:
                    raise NonConvergence("singular block in refinement")
                return [[b / piv for b in B[0]]]
            a, b = Mat[0][0], Mat[0][1]
            c, d = Mat[1][0], Mat[1][1]
            det = a * d - b * c
            if det == 0:
                raise NonConvergence("singular block in refinement")
            out0 = [(d * B[0][k] - b * B[1][k]) / det for k in range(len(B[0]))]
            out1 = [(a * B[1][k] - c * B[0][k]) / det for k in range(len(B[0]))]
            return [out0, out1]

        def mat_mul(Xa, Xb):
            return [
                [
                    sum(Xa[r][t] * Xb[t][c] for t in range(len(Xb)))
                    for c in range(len(Xb[0]))
                ]
                for r in range(len(Xa))
            ]

        def mat_sub(Xa, Xb):
            return [
                [Xa[r][c] - Xb[r][c] for c in range(len(Xa[0]))]
                for r in range(len(Xa))
            ]

        Cp = [None] * K
        dp = [None] * K
        for k in range(K):
            i = idx[k]
            B = blk(i, i)
            d_rows = [[v] for v in rhs[i]]
            if k > 0:
                prev = idx[k - 1]
                Ak = blk(i, prev) if abs(i - prev) == 1 else None
                if Ak is not None:
                    B = mat_sub(B, mat_mul(Ak, Cp[k - 1]))
                    d_rows = mat_sub(d_rows, mat_mul(Ak, dp[k - 1]))
            if k < K - 1:
                nxt = idx[k + 1]
                Ck = blk(i, nxt) if abs(nxt - i) == 1 else [
                    [mp.mpf(0)] * self.sizes[nxt] for _ in range(self.sizes[i])
                ]
                Cp[k] = inv_apply(B, Ck)
            dp[k] = inv_apply(B, d_rows)
        x = [None] * K
        x[K - 1] = [row[0] for row in dp[K - 1]]
        for k in range(K - 2, -1, -1):
            corr = mat_mul(Cp[k], [[v] for v in x[k + 1]])
            x[k] = [dp[k][r][0] - corr[r][0] for r in range(self.sizes[idx[k]])]
        out = []
        for k in range(K):
            out.extend(x[k])
        return out


def _apply_delta(chain, u, th, delta, lam):
    u2 = list(u)
    th2 = list(th)
    pos = 0
    for i in range(chain.m):
        for kind in chain.kinds[i]:
            step = lam * delta[pos]
            if kind == "u":
                u2[i] = u2[i] - step
            else:
                th2[i] = th2[i] - step / chain.r0
            pos += 1
    return u2, th2


def _maxabs(R):
    if not R:
        return mp.mpf(0)
    return max(abs(r) for r in R)


def refine_orbit(
    orbit: AdmissibleOrbit, digits: Optional[int] = None
) -> AdmissibleOrbit:
    """Polish the contact variables to the requested decimal accuracy.

    Updates the orbit in place: the mp fields hold the refined edge
    parameters and azimuths, and the float views (points, length, cell
    times) are recomputed from them.  Returns the same orbit object.
    """
    if digits is None:
        digits = dispersion_digits(orbit)
    target = int(digits)
    chain = _Chain(orbit.plan, orbit.r0)

    old_dps = mp.dps
    try:
        final = target + 15
        mp.dps = 30
        u = [mp.mpf(float(x)) for x in orbit.params]
        th = [mp.mpf(float(x)) for x in orbit.angles]

        if chain.nvar == 0:
            R = chain.residual(u, th)
        else:
            rung = min(30, final)
            while True:
                mp.dps = rung
                tol = mp.mpf(10) ** (-(rung - 10))
                R, delta = chain.newton_delta(u, th)
                for _ in range(6):
                    if _maxabs(R) < tol:
                        break
                    lam = mp.mpf(1)
                    base = _maxabs(R)
                    while True:
                        u2, th2 = _apply_delta(chain, u, th, delta, lam)
                        R2 = chain.residual(u2, th2)
                        if _maxabs(R2) < base or lam <= mp.mpf(1) / 16:
                            break
                        lam = lam / 2
                    u, th, R = u2, th2, R2
                    if _maxabs(R) < tol:
                        break
                    _, delta = chain.newton_delta(u, th)
                if rung >= final:
                    break
                rung = min(rung * 2, final)
            if _maxabs(R) > mp.mpf(10) ** (-(target + 5)):
                raise NonConvergence(
                    f"refinement stalled at residual {mp.nstr(_maxabs(R), 5)} "
                    f"with target 1e-{target + 5}"
                )

        mp.dps = final
        orbit.mp_u = u
        orbit.mp_theta = th
        orbit.mp_dps = final
        pts = chain.points(u, th)
        _, rho, _ = chain._geometry(u, th)
        orbit.contact_points = np.array(
            [[float(c) for c in p] for p in pts]
        )
        orbit.params = np.array([float(x) for x in u])
        orbit.angles = np.array([float(x) for x in th])
        orbit.length = float(sum(rho, mp.mpf(0)))
        orbit.per_cell_times = _per_cell_times(
            orbit.plan, np.array([float(r) for r in rho])
        )
        orbit.grad_norm = float(_maxabs(chain.residual(u, th)))
        orbit.objective_history = list(orbit.objective_history) + [orbit.length]
    finally:
        mp.dps = old_dps
    return orbit
