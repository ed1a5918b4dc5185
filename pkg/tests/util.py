"""Shared helpers for the test suite: independent oracles and random data.

Oracles here are deliberately naive (quadratic scans, dense enumeration,
bisection) so they cannot share a bug with the fast implementations they
check.
"""

import numpy as np


def reduce_oracle(codes):
    """Free reduction by repeated full scans until nothing cancels."""
    seq = list(codes)
    changed = True
    while changed:
        changed = False
        i = 0
        while i + 1 < len(seq):
            if (seq[i] ^ 1) == seq[i + 1]:
                del seq[i : i + 2]
                changed = True
                i = max(i - 1, 0)
            else:
                i += 1
    return seq


def enumerate_reduced_words(n):
    """All reduced words of length n as code tuples, by DFS."""
    if n == 0:
        return [()]
    out = []

    def grow(prefix):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for c in range(6):
            if prefix and (prefix[-1] ^ 1) == c:
                continue
            prefix.append(c)
            grow(prefix)
            prefix.pop()

    for c in range(6):
        grow([c])
    return out


def random_codes(rng, max_len=30, reduced=False):
    """Random letter-code list; reduced=True avoids adjacent cancellation."""
    n = int(rng.integers(0, max_len + 1))
    if not reduced:
        return list(rng.integers(0, 6, size=n))
    seq = []
    for _ in range(n):
        c = int(rng.integers(0, 6))
        while seq and (seq[-1] ^ 1) == c:
            c = int(rng.integers(0, 6))
        seq.append(c)
    return seq


def random_reduced_word(rng, length, cyclic=False):
    """Uniform-ish random reduced word of exactly `length` letters."""
    seq = []
    for _ in range(length):
        c = int(rng.integers(0, 6))
        while seq and (seq[-1] ^ 1) == c:
            c = int(rng.integers(0, 6))
        seq.append(c)
    if cyclic and len(seq) > 1 and (seq[-1] ^ 1) == seq[0]:
        # patch the last letter to keep the word cyclically reduced
        choices = [c for c in range(6) if c != (seq[-2] ^ 1) and c != (seq[0] ^ 1)]
        seq[-1] = choices[int(rng.integers(0, len(choices)))]
    return seq


def chain_lengths_batch(plan, U):
    """Straight-chain length of a zero-radius plan for a batch of free
    parameters, evaluated directly from the contact edges.

    U has one column per non-pinned contact; pinned contacts sit at
    their edge midpoint.  Returns one length per row.
    """
    U = np.atleast_2d(np.asarray(U, float))
    m = len(plan.contacts)
    pts = np.empty((U.shape[0], m, 3))
    k = 0
    for idx, pc in enumerate(plan.contacts):
        axis = pc.edge.line.axis
        j, l = [x for x in (1, 2, 3) if x != axis]
        if pc.pinned:
            u = np.full(U.shape[0], 0.5)
        else:
            u = U[:, k]
            k += 1
        pts[:, idx, axis - 1] = pc.edge.lo + u
        pts[:, idx, j - 1] = pc.edge.line.trans[0]
        pts[:, idx, l - 1] = pc.edge.line.trans[1]
    d = np.diff(pts, axis=1)
    return np.sqrt((d**2).sum(-1)).sum(-1)


def grid_minimize_chain(plan):
    """Hierarchical grid minimization of a zero-radius plan.

    Scans the free parameters over [0,1] at step 0.02, then shrinks the
    window by a factor of ten three times, ending at resolution 2e-5.
    Returns (best free parameters, best length).  Oracle use only; cost
    grows as 51**dim so keep dim at three or below.
    """
    dim = sum(1 for pc in plan.contacts if not pc.pinned)
    if dim == 0:
        return np.empty(0), float(chain_lengths_batch(plan, np.empty((1, 0)))[0])
    centers = np.full(dim, 0.5)
    half = 0.5
    best = None
    for step in (0.02, 0.002, 0.0002, 0.00002):
        axes_pts = [
            np.unique(np.clip(np.arange(c - half, c + half + step / 2, step), 0.0, 1.0))
            for c in centers
        ]
        mesh = np.meshgrid(*axes_pts, indexing="ij")
        U = np.stack([g.ravel() for g in mesh], axis=-1)
        vals = chain_lengths_batch(plan, U)
        i = int(vals.argmin())
        centers = U[i]
        best = float(vals[i])
        half = step * 1.5
    return centers, best


def segment_line_distance(p0, p1, base, axis_dir):
    """Min distance between segment [p0,p1] and an infinite line, by fine
    sampling plus local refinement.  Oracle use only."""
    p0 = np.asarray(p0, float)
    p1 = np.asarray(p1, float)
    base = np.asarray(base, float)
    d = np.asarray(axis_dir, float)
    d = d / np.linalg.norm(d)
    ts = np.linspace(0.0, 1.0, 2001)
    pts = p0[None, :] + ts[:, None] * (p1 - p0)[None, :]
    rel = pts - base[None, :]
    perp = rel - (rel @ d)[:, None] * d[None, :]
    return float(np.sqrt((perp**2).sum(axis=1)).min())
