"""Bracketing the growth rate of distinguishable orbit behavior.

Configuration space is cut into seven slabs: D0 in the bulk, and for each
coordinate a thin positive slab (fractional part at most eps0) and a thin
negative slab (fractional part at least 1 - eps0).  An itinerary is the
slab label sampled every eps0 time units.  Counting distinct itineraries
across an ensemble gives an empirical lower estimate N_hat(T) of the true
count N(T); combinatorics gives the analytic upper bound 12^f(T, eps0),
and free-group word counting gives the lower bound (ln 5)/3 on the
asymptotic rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from multiprocessing import Pool

import numpy as np

from .flow import random_phase_point, simulate
from .words import count_reduced_words

SQRT3 = math.sqrt(3.0)

#: asymptotic upper rate 2*sqrt(3)*ln 12
UPPER_RATE = 2.0 * SQRT3 * math.log(12.0)
#: asymptotic lower rate (ln 5)/3
LOWER_RATE = math.log(5.0) / 3.0

LABEL_TEXT = ("D0", "D1+", "D1-", "D2+", "D2-", "D3+", "D3-")


class PartitionLabel(IntEnum):
    D0 = 0
    D1_PLUS = 1
    D1_MINUS = 2
    D2_PLUS = 3
    D2_MINUS = 4
    D3_PLUS = 5
    D3_MINUS = 6

    def __str__(self) -> str:
        return LABEL_TEXT[self]

    @classmethod
    def parse(cls, text: str) -> "PartitionLabel":
        return cls(LABEL_TEXT.index(text))


def classify_codes(points: np.ndarray, eps0: float) -> np.ndarray:
    """Vectorized labels for an (n, 3) array of positions.

    Assignment order encodes the overlap rule: writing k = 3..1 and the
    negative slab before the positive one means the final value belongs to
    the smallest k whose slab contains the point, with + beating - there.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    frac = pts - np.floor(pts)
    codes = np.zeros(pts.shape[0], dtype=np.int8)
    for k in (3, 2, 1):
        f = frac[:, k - 1]
        codes[1.0 - f <= eps0] = 2 * k
        codes[f <= eps0] = 2 * k - 1
    return codes


def classify(q, eps0: float) -> PartitionLabel:
    if not 0.0 < eps0 < 0.5:
        raise ValueError("eps0 must lie in (0, 1/2)")
    return PartitionLabel(int(classify_codes(np.asarray(q, float)[None, :], eps0)[0]))


@dataclass(frozen=True, eq=False)
class Itinerary:
    codes: np.ndarray
    eps0: float

    def __len__(self) -> int:
        return int(self.codes.size)

    @property
    def labels(self) -> tuple[PartitionLabel, ...]:
        return tuple(PartitionLabel(int(c)) for c in self.codes)

    def key(self) -> bytes:
        """Exact dedup key (byte image of the label sequence)."""
        return self.codes.tobytes()

    def __str__(self) -> str:
        return " ".join(LABEL_TEXT[c] for c in self.codes)


def itinerary_of(record, eps0: float) -> Itinerary:
    """Labels at times 0, eps0, 2*eps0, ... up to the record's horizon."""
    if not 0.0 < eps0 < 0.5:
        raise ValueError("eps0 must lie in (0, 1/2)")
    T = record.final.time - record.initial.time
    n_steps = int(math.floor((T + 1e-12) / eps0))
    times = record.initial.time + eps0 * np.arange(n_steps + 1)
    positions = record.position_at(times)
    return Itinerary(codes=classify_codes(positions, eps0), eps0=eps0)


def visits(itin: Itinerary) -> int:
    """Number of maximal runs of thin-slab labels in the itinerary."""
    nz = itin.codes != 0
    if not nz.any():
        return 0
    starts = np.flatnonzero(nz & ~np.concatenate([[False], nz[:-1]]))
    return int(starts.size)


def visits_bound(T: float, eps0: float) -> float:
    return 2.0 * SQRT3 * T / (1.0 - eps0) + 6.0


def upper_bound_f(T: float, eps0: float) -> tuple[float, float]:
    """The itinerary-count exponent f and the rate ln(12**f)/T.

    f counts the possible label-run patterns a duration-T orbit can show;
    the itinerary count is at most 12**f.  The rate tends to
    2*sqrt(3)*ln 12 as T grows and eps0 shrinks.
    """
    if T <= 0 or not 0.0 < eps0 < 1.0:
        raise ValueError("need T > 0 and eps0 in (0, 1)")
    f = 2.0 * SQRT3 * T / (1.0 - eps0) + 7.0
    return f, f * math.log(12.0) / T


def lower_bound_words(T: float) -> float:
    """Rate from reduced-word counting: (1/T) ln #(words of length T/3).

    Evaluated in log space; the word count itself overflows a float long
    before T reaches interesting sizes.
    """
    if T <= 0:
        raise ValueError("need T > 0")
    n = int(math.floor(T / 3.0))
    if n == 0:
        return 0.0
    log_count = math.log(6.0) + (n - 1) * math.log(5.0)
    return log_count / T


@dataclass(eq=False)
class EntropyReport:
    T_grid: tuple[float, ...]
    eps0: float
    r0: float
    n_orbits: int
    counts: tuple[int, ...]
    log_rates: tuple[float, ...]
    f_values: tuple[float, ...]
    upper_rates: tuple[float, ...]
    lower_rates: tuple[float, ...]
    n_excluded: int = 0

    def rows(self):
        """One mapping per grid time, in grid order (CSV-ready)."""
        for i, T in enumerate(self.T_grid):
            yield {
                "T": T,
                "eps0": self.eps0,
                "r0": self.r0,
                "n_orbits": self.n_orbits,
                "N_hat": self.counts[i],
                "log_rate": self.log_rates[i],
                "f": self.f_values[i],
                "upper_rate": self.upper_rates[i],
                "lower_rate": self.lower_rates[i],
            }


def _itinerary_worker(args):
    seed, index, T_max, eps0, r0 = args
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    q, v = random_phase_point(rng, r0)
    rec = simulate(q, v, T_max, r0)
    if rec.singular or rec.truncated:
        return None
    return itinerary_of(rec, eps0).codes.tobytes()


def count_itineraries(
    n_orbits: int,
    T_grid,
    eps0: float,
    r0: float,
    seed: int,
    *,
    jobs: int = 1,
) -> EntropyReport:
    """Empirical distinct-itinerary counts over an orbit ensemble.

    Every orbit runs once to the largest grid time; the count at a smaller
    T uses the itinerary prefix for that horizon, so the ensemble is
    nested and the counts are nondecreasing in both T and n_orbits.
    """
    grid = [float(T) for T in T_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("T grid must be strictly increasing and nonempty")
    if n_orbits < 1:
        raise ValueError("need at least one orbit")
    T_max = grid[-1]
    tasks = [(seed, i, T_max, eps0, r0) for i in range(n_orbits)]
    if jobs > 1:
        with Pool(jobs) as pool:
            keys = pool.map(_itinerary_worker, tasks, chunksize=max(1, n_orbits // (4 * jobs)))
    else:
        keys = [_itinerary_worker(t) for t in tasks]

    prefix_lens = [int(math.floor((T + 1e-12) / eps0)) + 1 for T in grid]
    seen = [set() for _ in grid]
    n_excluded = 0
    for key in keys:
        if key is None:
            n_excluded += 1
            continue
        for j, m in enumerate(prefix_lens):
            seen[j].add(key[:m])

    counts = tuple(len(s) for s in seen)
    log_rates = tuple(math.log(c) / T for c, T in zip(counts, grid))
    fs = []
    uppers = []
    lowers = []
    for T in grid:
        f, rate = upper_bound_f(T, eps0)
        fs.append(f)
        uppers.append(rate)
        lowers.append(lower_bound_words(T))
    return EntropyReport(
        T_grid=tuple(grid),
        eps0=eps0,
        r0=r0,
        n_orbits=n_orbits,
        counts=counts,
        log_rates=log_rates,
        f_values=tuple(fs),
        upper_rates=tuple(uppers),
        lower_rates=tuple(lowers),
        n_excluded=n_excluded,
    )
