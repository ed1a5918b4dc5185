"""Lifted geometry of the scatterer lattice.

Work happens in the universal cover R^3 of the torus: the three families of
cylindrical scatterers lift to radius-r0 neighborhoods of all axis-parallel
lattice lines (axis k free, the other two coordinates integer).  Because
r0 < 1/2, a cylinder meets a unit cell only if its axis line is one of the
cell's 12 edges; that observation drives the neighbor search.

Conventions: axes are numbered 1..3; the transverse axes of axis k are the
other two in increasing order.  Velocities are unit vectors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

#: transverse axes (ascending) for each cylinder axis
PERP_AXES = {1: (2, 3), 2: (1, 3), 3: (1, 2)}

GRAZE_TOL = 1e-12  # discriminant band treated as tangency (unit-speed scale)
HIT_T_MIN = 1e-12  # ignore roots this close behind/at the start point


@dataclass(frozen=True)
class LatticeLine:
    """Axis-parallel line: coordinate `axis` free, the transverse pair fixed
    at integers (given in ascending axis order)."""

    axis: int
    trans: tuple[int, int]

    def __post_init__(self):
        if self.axis not in (1, 2, 3):
            raise ValueError(f"axis must be 1..3, got {self.axis}")

    def point(self, s: float) -> np.ndarray:
        out = np.empty(3)
        j, l = PERP_AXES[self.axis]
        out[self.axis - 1] = s
        out[j - 1] = self.trans[0]
        out[l - 1] = self.trans[1]
        return out

    def direction(self) -> np.ndarray:
        d = np.zeros(3)
        d[self.axis - 1] = 1.0
        return d


@dataclass(frozen=True)
class Cylinder:
    """Radius-r0 tube around a lattice line."""

    line: LatticeLine
    radius: float

    def __post_init__(self):
        if not (0.0 <= self.radius < 0.5):
            raise ValueError(f"radius must lie in [0, 0.5), got {self.radius}")


@dataclass(frozen=True)
class Edge:
    """Unit segment of a lattice line: axis coordinate in [lo, lo+1]."""

    line: LatticeLine
    lo: int

    def point(self, u: float) -> np.ndarray:
        return self.line.point(self.lo + u)

    def midpoint(self) -> np.ndarray:
        return self.line.point(self.lo + 0.5)


def perp_components(p: np.ndarray, axis: int) -> np.ndarray:
    """The two transverse coordinates of p for a given cylinder axis."""
    j, l = PERP_AXES[axis]
    return np.array([p[j - 1], p[l - 1]])


def line_distance(p, line: LatticeLine) -> float:
    rel = perp_components(np.asarray(p, float), line.axis) - np.array(line.trans, float)
    return float(math.hypot(rel[0], rel[1]))


def ray_cylinder_hit(
    p, v, cyl: Cylinder, t_min: float = HIT_T_MIN
) -> Optional[tuple[float, np.ndarray, bool]]:
    """First forward intersection of the ray p + t*v with the cylinder.

    Returns (t, contact point, grazing) or None.  The quadratic is solved in
    the transverse plane.  A discriminant inside [0, GRAZE_TOL) counts as a
    tangency: the hit time is the closest approach and the caller should
    leave the velocity unchanged.  Rays moving away from the surface
    (junction term >= 0) never hit: that is what makes an immediate re-hit
    after a reflection impossible.
    """
    p = np.asarray(p, float)
    v = np.asarray(v, float)
    rel = perp_components(p, cyl.line.axis) - np.array(cyl.line.trans, float)
    vp = perp_components(v, cyl.line.axis)
    a2 = float(vp @ vp)
    if a2 <= 1e-30:  # ray parallel to the cylinder axis
        return None
    b = float(rel @ vp)
    if b >= 0.0:
        return None
    c = float(rel @ rel) - cyl.radius**2
    disc = b * b - a2 * c
    if disc < 0.0:
        return None
    if disc < GRAZE_TOL:
        t = -b / a2
        if t < t_min:
            return None
        return t, p + t * v, True
    t = (-b - math.sqrt(disc)) / a2
    if t < t_min:
        return None
    return t, p + t * v, False


def cylinder_normal(point, cyl: Cylinder) -> np.ndarray:
    """Outward unit normal at a surface point (radial in the transverse
    plane; no component along the cylinder axis)."""
    point = np.asarray(point, float)
    rel = perp_components(point, cyl.line.axis) - np.array(cyl.line.trans, float)
    r = math.hypot(rel[0], rel[1])
    if r < 1e-14:
        raise ValueError("point lies on the cylinder axis; normal undefined")
    n = np.zeros(3)
    j, l = PERP_AXES[cyl.line.axis]
    n[j - 1] = rel[0] / r
    n[l - 1] = rel[1] / r
    return n


def reflect(v, n) -> np.ndarray:
    """Specular reflection v - 2 (v.n) n for a unit normal n."""
    v = np.asarray(v, float)
    n = np.asarray(n, float)
    nn = float(n @ n)
    if abs(nn - 1.0) > 1e-9:
        raise ValueError("reflection normal must be a unit vector")
    return v - 2.0 * float(v @ n) * n


def cell_of(p, v=None) -> tuple[int, int, int]:
    """Unit cell containing p.  On a face, motion direction breaks the tie
    (a point exactly on an integer plane moving negatively belongs to the
    lower cell)."""
    p = np.asarray(p, float)
    cell = np.floor(p).astype(np.int64)
    if v is not None:
        v = np.asarray(v, float)
        for i in range(3):
            if p[i] == cell[i] and v[i] < 0.0:
                cell[i] -= 1
    return tuple(int(x) for x in cell)


def edges_of_cell(cell) -> list[Edge]:
    """The 12 edges of a unit cell, each carrying its lattice line."""
    m = tuple(int(x) for x in cell)
    out = []
    for axis in (1, 2, 3):
        j, l = PERP_AXES[axis]
        lo = m[axis - 1]
        for dj, dl in itertools.product((0, 1), repeat=2):
            line = LatticeLine(axis, (m[j - 1] + dj, m[l - 1] + dl))
            out.append(Edge(line, lo))
    return out


def candidate_cylinders(p, v, horizon: float, r0: float) -> list[Cylinder]:
    """Every cylinder whose axis line can come within r0 of the segment
    p + [0, horizon] v, found by walking the unit cells the segment crosses
    and collecting their edge lines.  Complete for r0 < 1/2: a line passing
    within 1/2 of any point of a cell is one of that cell's edges.
    """
    p = np.asarray(p, float)
    v = np.asarray(v, float)
    cell = list(cell_of(p, v))
    seen = set()
    out = []
    t = 0.0
    # DDA over crossed cells; include each visited cell's 12 edge lines
    for _ in range(int(3 * horizon * (abs(v).max() + 1)) + 8):
        for edge in edges_of_cell(cell):
            key = (edge.line.axis, edge.line.trans)
            if key not in seen:
                seen.add(key)
                out.append(Cylinder(edge.line, r0))
        # step to the next face crossing
        t_next = math.inf
        axis_next = -1
        for i in range(3):
            if v[i] > 1e-300:
                ti = (cell[i] + 1 - p[i]) / v[i]
            elif v[i] < -1e-300:
                ti = (cell[i] - p[i]) / v[i]
            else:
                continue
            if ti < t_next:
                t_next = ti
                axis_next = i
        if t_next > horizon or axis_next < 0:
            break
        t = t_next
        cell[axis_next] += 1 if v[axis_next] > 0 else -1
    return out


# ---------------------------------------------------------------------------
# Signed coordinate permutations: the 48 lattice symmetries
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CubeSymmetry:
    """Signed permutation of the coordinate axes.

    As a linear map it preserves the integer lattice; composed with the
    affine recentering x -> M (x - c) + c, c = (1/2, 1/2, 1/2), it maps the
    unit cube onto itself.  `perm[i]` is the image axis (0-based) of axis i
    and `signs[i]` the sign it picks up: M e_i = signs[i] * e_perm[i].
    """

    perm: tuple[int, int, int]
    signs: tuple[int, int, int]

    @property
    def matrix(self) -> np.ndarray:
        M = np.zeros((3, 3), dtype=np.int64)
        for i in range(3):
            M[self.perm[i], i] = self.signs[i]
        return M

    def apply_vector(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x)

    def apply_axis(self, axis: int, sign: int) -> tuple[int, int]:
        """Image of the signed axis direction (letters transform this way)."""
        return self.perm[axis - 1] + 1, sign * self.signs[axis - 1]

    def apply_cube_point(self, x) -> np.ndarray:
        c = np.full(3, 0.5)
        return self.matrix @ (np.asarray(x, float) - c) + c

    def compose(self, other: "CubeSymmetry") -> "CubeSymmetry":
        """self after other (matrix product)."""
        M = self.matrix @ other.matrix
        return CubeSymmetry.from_matrix(M)

    def inverse(self) -> "CubeSymmetry":
        return CubeSymmetry.from_matrix(self.matrix.T)

    @classmethod
    def from_matrix(cls, M) -> "CubeSymmetry":
        M = np.asarray(M, dtype=np.int64)
        perm = [0, 0, 0]
        signs = [0, 0, 0]
        for i in range(3):
            col = M[:, i]
            (j,) = np.nonzero(col)[0]
            perm[i] = int(j)
            signs[i] = int(col[j])
        return cls(tuple(perm), tuple(signs))


def all_symmetries() -> list[CubeSymmetry]:
    """The 48 signed permutations in a fixed deterministic order."""
    out = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1, -1), repeat=3):
            out.append(CubeSymmetry(tuple(perm), tuple(signs)))
    return out


SYMMETRIES = all_symmetries()
