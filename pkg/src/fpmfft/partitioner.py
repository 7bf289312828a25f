"""Row partitioning from speed functions.

The groups' speed functions are sectioned at ``y = n``. If every sampled row
count has speeds within ``epsilon`` of each other (relative to the slowest),
the groups are treated as identical and share one harmonic-mean speed curve;
otherwise each keeps its own. Either way the distribution minimises the
largest predicted group time, solved exactly by dynamic programming over
(group, rows left). Groups may receive zero rows.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fpm_model import DomainError, ModelNotFoundError, SpeedCurve, SpeedFunction, section_at_y, work_flops

__all__ = [
    "DEFAULT_EPSILON",
    "HomogeneityReport",
    "RowDistribution",
    "brute_force_partition",
    "harmonic_mean_curve",
    "homogeneity_check",
    "partition",
    "predicted_time",
    "predicted_times",
    "solve_heterogeneous",
    "solve_homogeneous",
]

DEFAULT_EPSILON = 0.05
BRUTE_FORCE_LIMIT = 10_000_000
_RDIFF_SLACK = 1e-12


@dataclass(frozen=True)
class RowDistribution:
    counts: tuple
    objective_time_s: float
    path: str | None = None
    n: int | None = None
    report: "HomogeneityReport | None" = None

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))

    @property
    def p(self):
        return len(self.counts)

    def ranges(self):
        """Contiguous ``(start, count)`` row blocks in group order."""
        starts = np.concatenate([[0], np.cumsum(self.counts)[:-1]]).astype(int)
        return list(zip(starts.tolist(), self.counts))

    def as_record(self):
        rec = {"n": self.n, "counts": list(self.counts), "objective_time_s": self.objective_time_s,
               "path": self.path}
        if self.report is not None:
            rec["worst_rdiff"] = self.report.worst_rdiff
        return rec


@dataclass(frozen=True)
class HomogeneityReport:
    is_identical: bool
    worst_rdiff: float
    worst_point_x: int


def _joint_support(curves: Sequence[SpeedCurve]):
    """Speeds of every curve where all of them are sampled.

    The support is the overlap of the curves' x ranges; inside it each curve
    is read at every x any curve sampled, linear in x as the solver reads it.
    Returns an empty support when the ranges do not overlap.
    """
    if not curves:
        raise DomainError("no curves given")
    if any(len(c) == 0 for c in curves):
        raise DomainError("empty curve")
    lo = max(int(c.free[0]) for c in curves)
    hi = min(int(c.free[-1]) for c in curves)
    xs = np.unique(np.concatenate([c.free for c in curves]))
    xs = xs[(xs >= lo) & (xs <= hi)]
    stacked = np.vstack([np.interp(xs, c.free, c.speeds) for c in curves])
    return xs, stacked


def homogeneity_check(curves: Sequence[SpeedCurve], epsilon=DEFAULT_EPSILON) -> HomogeneityReport:
    """Largest relative speed spread across groups where all are sampled.

    A spread of exactly ``epsilon`` still counts as identical; the comparison
    allows for the rounding in ``(max - min) / min``.
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    xs, s = _joint_support(curves)
    if xs.size == 0:
        # nothing to compare on: no evidence the groups are alike
        return HomogeneityReport(is_identical=False, worst_rdiff=math.inf, worst_point_x=-1)
    lo = s.min(axis=0)
    rdiff = (s.max(axis=0) - lo) / lo
    k = int(np.argmax(rdiff))
    worst = float(rdiff[k])
    return HomogeneityReport(is_identical=worst <= epsilon * (1 + _RDIFF_SLACK), worst_rdiff=worst, worst_point_x=int(xs[k]))


def harmonic_mean_curve(curves: Sequence[SpeedCurve]) -> SpeedCurve:
    """``p / sum(1 / s_i(x))`` over the curves' shared x range."""
    xs, s = _joint_support(curves)
    if xs.size == 0:
        raise DomainError("curves share no x range")
    if np.any(s == 0):
        raise DomainError("zero speed in curve")
    p = s.shape[0]
    avg = p / np.sum(1.0 / s, axis=0)
    first = curves[0]
    return SpeedCurve(first.axis, first.value, xs, avg, requested=first.requested)


def predicted_time(sf: SpeedFunction, x, n):
    """Modelled time of ``x`` length-``n`` row FFTs; zero for zero rows."""
    if n < 2:
        raise DomainError(f"row length must be >= 2, got {n}")
    if x == 0:
        return 0.0
    return work_flops(x, n) / float(sf.speeds_at([x], n)[0])


def predicted_times(sf: SpeedFunction, n, x_max=None):
    """Vector of :func:`predicted_time` for every row count ``0..x_max``."""
    x_max = n if x_max is None else x_max
    xs = np.arange(x_max + 1, dtype=np.float64)
    if n < 2:
        # a length-1 transform is the identity: no work to model
        return np.zeros_like(xs)
    speeds = sf.speeds_at(xs, n)
    out = 2.5 * xs * n * math.log2(n) / speeds
    out[0] = 0.0
    return out


def _min_max_dp(tables, n, strict_positive=False):
    """Exact min over compositions of ``n`` of the max per-group time.

    ``tables[i][k]`` is group i's time for ``k`` rows. Returns the optimal
    value and the lexicographically smallest optimal count vector.
    """
    p = len(tables)
    lo = 1 if strict_positive else 0
    if strict_positive and n < p:
        raise DomainError(f"cannot give each of {p} groups a row when n={n}")
    inf = math.inf
    # best[i][r]: optimal max time for groups i..p-1 sharing r rows
    best = np.full((p + 1, n + 1), inf)
    best[p][0] = 0.0
    for i in range(p - 1, -1, -1):
        t = tables[i]
        nxt = best[i + 1]
        for r in range(n + 1):
            ks = np.arange(lo, r + 1)
            if ks.size == 0:
                continue
            cand = np.maximum(t[ks], nxt[r - ks])
            best[i][r] = cand.min()
    opt = best[0][n]
    if not math.isfinite(opt):
        raise DomainError("no feasible distribution")
    counts = []
    r = n
    for i in range(p):
        t = tables[i]
        for k in range(lo, r + 1):
            if t[k] <= opt and best[i + 1][r - k] <= opt:
                counts.append(k)
                r -= k
                break
    return float(opt), counts


def _time_tables(speed_functions, n):
    try:
        return [predicted_times(sf, n) for sf in speed_functions]
    except ModelNotFoundError as exc:
        raise DomainError(f"no model support at y={n}: {exc}") from exc


def solve_heterogeneous(speed_functions: Sequence[SpeedFunction], n, strict_positive=False) -> RowDistribution:
    """Optimal rows per group, each group priced by its own speed function."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not speed_functions:
        raise DomainError("no speed functions given")
    tables = _time_tables(speed_functions, n)
    opt, counts = _min_max_dp(tables, n, strict_positive)
    return RowDistribution(counts, opt, path="heterogeneous", n=n)


def solve_homogeneous(avg, p, n, strict_positive=False) -> RowDistribution:
    """Optimal rows for ``p`` groups sharing a single speed model ``avg``.

    ``avg`` is a :class:`SpeedFunction` or a fixed-y :class:`SpeedCurve`.
    """
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if p < 1:
        raise DomainError(f"p must be >= 1, got {p}")
    sf = SpeedFunction.from_curve(1, avg) if isinstance(avg, SpeedCurve) else avg
    table = _time_tables([sf], n)[0]
    opt, counts = _min_max_dp([table] * p, n, strict_positive)
    return RowDistribution(counts, opt, path="homogeneous", n=n)


def partition(speed_functions: Sequence[SpeedFunction], n, epsilon=DEFAULT_EPSILON,
              strict_positive=False) -> RowDistribution:
    """Section at ``y = n``, test homogeneity, then solve on the matching path."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if not speed_functions:
        raise DomainError("no speed functions given")
    try:
        curves = [section_at_y(sf, n, snap=True) for sf in speed_functions]
    except ModelNotFoundError as exc:
        raise DomainError(f"no model support at y={n}: {exc}") from exc
    report = homogeneity_check(curves, epsilon)
    if not report.is_identical:
        dist = solve_heterogeneous(speed_functions, n, strict_positive)
    else:
        avg = harmonic_mean_curve(curves)
        dist = solve_homogeneous(avg, len(speed_functions), n, strict_positive)
    return dataclasses.replace(dist, report=report)


def brute_force_partition(speed_functions: Sequence[SpeedFunction], n, p=None,
                          strict_positive=False) -> RowDistribution:
    """Enumerate every composition of ``n`` into ``p`` parts (test oracle)."""
    p = len(speed_functions) if p is None else p
    if p != len(speed_functions):
        raise ValueError("p must equal the number of speed functions")
    states = math.comb(n + p - 1, p - 1)
    if states > BRUTE_FORCE_LIMIT:
        raise ValueError(f"{states} compositions exceed the enumeration limit {BRUTE_FORCE_LIMIT}")
    times = [np.array([predicted_time(sf, k, n) if n >= 2 else 0.0 for k in range(n + 1)])
             for sf in speed_functions]
    lo = 1 if strict_positive else 0
    # every head (d_1..d_{p-1}) on a C-ordered grid, so the first minimum
    # found is the lexicographically smallest witness
    axes = np.meshgrid(*[np.arange(lo, n + 1)] * (p - 1), indexing="ij") if p > 1 else []
    heads = [a.ravel() for a in axes]
    last = n - (np.sum(heads, axis=0) if heads else np.zeros(1, dtype=np.int64))
    ok = last >= lo
    if not np.any(ok):
        raise DomainError("no feasible distribution")
    value = times[-1][np.where(ok, last, 0)]
    for i, h in enumerate(heads):
        value = np.maximum(value, times[i][h])
    value = np.where(ok, value, np.inf)
    k = int(np.argmin(value))
    witness = [int(h[k]) for h in heads] + [int(last[k])]
    return RowDistribution(witness, float(value[k]), path="brute-force", n=n)
