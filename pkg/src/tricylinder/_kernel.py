"""Event-stepping core of the billiard flow, written for numba.

One call advances a single trajectory from its current state to time T,
appending events to caller-provided buffers.  The walk is cell-by-cell:
inside a unit cell the only reachable scatterers are the cylinders around
the cell's 12 edges (r0 < 1/2), so each step compares the nearest of those
hits against the nearest face crossing.  Ties inside 1e-12 resolve to the
collision.

Status codes: 0 completed, 1 singular termination (contact simultaneously
on two cylinder surfaces within 1e-9), 2 event budget exhausted, 3 buffer
full (caller re-runs with larger buffers).
"""

import numpy as np

from ._jit import njit

STATUS_OK = 0
STATUS_SINGULAR = 1
STATUS_BUDGET = 2
STATUS_OVERFLOW = 3

KIND_FACE = 0
KIND_COLLISION = 1
KIND_GRAZE = 2

TIE_TOL = 1e-12
GRAZE_TOL = 1e-12
SINGULAR_TOL = 1e-9


@njit(cache=True)
def _perp_axes(axis):
    if axis == 0:
        return 1, 2
    elif axis == 1:
        return 0, 2
    return 0, 1


@njit(cache=True)
def advance(
    q,
    v,
    cell,
    t_start,
    T,
    r0,
    budget,
    ev_time,
    ev_kind,
    ev_axis,
    ev_a,
    ev_b,
    ev_q,
    ev_v,
    letters,
    record_full,
):
    t = t_start
    n_ev = 0
    n_let = 0
    ncoll = 0
    max_drift = 0.0
    cap = ev_time.shape[0]
    lcap = letters.shape[0]
    r0sq_out = (r0 + SINGULAR_TOL) * (r0 + SINGULAR_TOL)
    status = STATUS_OK

    while True:
        if budget <= 0:
            status = STATUS_BUDGET
            break
        budget -= 1

        # nearest face crossing from inside the current cell
        tf = 1.0e300
        fax = -1
        for i in range(3):
            vi = v[i]
            if vi > 1e-300:
                ti = (cell[i] + 1 - q[i]) / vi
            elif vi < -1e-300:
                ti = (cell[i] - q[i]) / vi
            else:
                continue
            if ti < tf:
                tf = ti
                fax = i

        # nearest cylinder hit among the cell's 12 edge lines
        tc = 1.0e300
        hit_axis = -1
        hit_a = 0
        hit_b = 0
        graze = False
        for axis in range(3):
            j, l = _perp_axes(axis)
            vj = v[j]
            vl = v[l]
            a2 = vj * vj + vl * vl
            if a2 <= 1e-30:
                continue
            for da in range(2):
                ca = cell[j] + da
                rj = q[j] - ca
                for db in range(2):
                    cb = cell[l] + db
                    rl = q[l] - cb
                    b = rj * vj + rl * vl
                    if b >= 0.0:
                        continue
                    c = rj * rj + rl * rl - r0 * r0
                    disc = b * b - a2 * c
                    if disc < 0.0:
                        continue
                    if disc < GRAZE_TOL:
                        th = -b / a2
                        g = True
                    else:
                        th = (-b - np.sqrt(disc)) / a2
                        g = False
                    if th < TIE_TOL:
                        continue
                    if th < tc:
                        tc = th
                        hit_axis = axis
                        hit_a = ca
                        hit_b = cb
                        graze = g

        is_coll = hit_axis >= 0 and tc <= tf + TIE_TOL
        te = tc if is_coll else tf

        if t + te > T:
            dt = T - t
            for i in range(3):
                q[i] += dt * v[i]
            t = T
            break

        for i in range(3):
            q[i] += te * v[i]
        t += te

        if is_coll:
            j, l = _perp_axes(hit_axis)
            rj = q[j] - hit_a
            rl = q[l] - hit_b
            rn = np.sqrt(rj * rj + rl * rl)
            nj = rj / rn
            nl = rl / rn
            if not graze:
                dot = v[j] * nj + v[l] * nl
                v[j] -= 2.0 * dot * nj
                v[l] -= 2.0 * dot * nl
                s2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
                drift = abs(s2 - 1.0)
                if drift > max_drift:
                    max_drift = drift
                inv = 1.0 / np.sqrt(s2)
                v[0] *= inv
                v[1] *= inv
                v[2] *= inv
            ncoll += 1

            # does the contact also lie on another cylinder's surface?
            singular = False
            for axis2 in range(3):
                j2, l2 = _perp_axes(axis2)
                for da in range(2):
                    ca2 = cell[j2] + da
                    for db in range(2):
                        cb2 = cell[l2] + db
                        if axis2 == hit_axis and ca2 == hit_a and cb2 == hit_b:
                            continue
                        dj = q[j2] - ca2
                        dl = q[l2] - cb2
                        if dj * dj + dl * dl < r0sq_out:
                            singular = True
            if record_full:
                if n_ev >= cap:
                    status = STATUS_OVERFLOW
                    break
                ev_time[n_ev] = t
                ev_kind[n_ev] = KIND_GRAZE if graze else KIND_COLLISION
                ev_axis[n_ev] = hit_axis + 1
                ev_a[n_ev] = hit_a
                ev_b[n_ev] = hit_b
                for i in range(3):
                    ev_q[n_ev, i] = q[i]
                    ev_v[n_ev, i] = v[i]
                n_ev += 1
            if singular:
                status = STATUS_SINGULAR
                break
        else:
            sign = 1 if v[fax] > 0.0 else -1
            plane = (cell[fax] + 1) if sign > 0 else cell[fax]
            if n_let >= lcap:
                status = STATUS_OVERFLOW
                break
            letters[n_let] = 2 * fax + (0 if sign > 0 else 1)
            n_let += 1
            if record_full:
                if n_ev >= cap:
                    status = STATUS_OVERFLOW
                    break
                ev_time[n_ev] = t
                ev_kind[n_ev] = KIND_FACE
                ev_axis[n_ev] = fax + 1
                ev_a[n_ev] = plane
                ev_b[n_ev] = sign
                for i in range(3):
                    ev_q[n_ev, i] = q[i]
                    ev_v[n_ev, i] = v[i]
                n_ev += 1
            cell[fax] += sign

    return status, n_ev, n_let, ncoll, t, max_drift
