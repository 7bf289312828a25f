"""Statistically controlled timing and speed-function construction.

:func:`mean_using_ttest` repeats a workload until the Student-t confidence
half-width of the sample mean falls below a relative precision, a repetition
cap, or a time cap. :func:`build_speed_functions` sweeps a grid of ``(x, y)``
problem sizes with every group timing the same size at once, streaming each
finished point to CSV so an interrupted sweep can resume.
"""

from __future__ import annotations

import csv
import enum
import functools
import logging
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from scipy.special import betainc

from .fpm_model import CSV_HEADER, SpeedFunction, SpeedPoint, format_row, load_speed_functions

__all__ = [
    "BYTES_PER_COMPLEX",
    "GroupConfig",
    "MeasurementError",
    "MeasurementPolicy",
    "MeasurementResult",
    "StopReason",
    "SweepOutcome",
    "SweepSpec",
    "SyntheticClock",
    "build_speed_functions",
    "light_policy",
    "mean_using_ttest",
    "parse_range",
    "policy_for_problem_size",
    "t_critical",
    "t_cdf",
]

log = logging.getLogger(__name__)

BYTES_PER_COMPLEX = 16


# --- Student t ----------------------------------------------------------------


def t_cdf(t, dof):
    """CDF of Student's t distribution via the regularized incomplete beta."""
    tail = 0.5 * betainc(0.5 * dof, 0.5, dof / (dof + t * t))
    return 1.0 - tail if t >= 0 else tail


def t_critical(confidence_level, dof, two_sided=False, tol=1e-10):
    """Student-t quantile at ``confidence_level`` with ``dof`` degrees of freedom.

    By default this is the one-sided quantile, i.e. the value ``q`` with
    ``P(T <= q) = confidence_level``. ``two_sided=True`` returns the quantile
    at ``(1 + confidence_level) / 2`` instead.

    The CDF is inverted by bisection to an absolute tolerance of ``tol``.
    """
    if not 0.0 < confidence_level < 1.0:
        raise ValueError(f"confidence_level must lie in (0, 1), got {confidence_level}")
    if dof < 1:
        raise ValueError(f"dof must be >= 1, got {dof}")
    p = 0.5 * (1.0 + confidence_level) if two_sided else confidence_level
    if p == 0.5:
        return 0.0
    target = max(p, 1.0 - p)
    lo, hi = 0.0, 1.0
    while t_cdf(hi, dof) < target:
        lo, hi = hi, hi * 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, dof) < target:
            lo = mid
        else:
            hi = mid
    q = 0.5 * (lo + hi)
    return q if p > 0.5 else -q


@functools.lru_cache(maxsize=4096)
def _t_cached(confidence_level, dof, two_sided):
    return t_critical(confidence_level, dof, two_sided=two_sided)


# --- the repetition loop ------------------------------------------------------


@dataclass(frozen=True)
class MeasurementPolicy:
    min_reps: int
    max_reps: int
    max_time_s: float = 3600.0
    confidence_level: float = 0.95
    precision: float = 0.025
    two_sided: bool = False

    def __post_init__(self):
        if self.min_reps < 1:
            raise ValueError(f"min_reps must be >= 1, got {self.min_reps}")
        if self.min_reps >= self.max_reps:
            raise ValueError(f"min_reps ({self.min_reps}) must be < max_reps ({self.max_reps})")
        if not 0.0 < self.confidence_level < 1.0:
            raise ValueError(f"confidence_level must lie in (0, 1), got {self.confidence_level}")
        if not self.precision > 0:
            raise ValueError(f"precision must be positive, got {self.precision}")
        if not self.max_time_s > 0:
            raise ValueError(f"max_time_s must be positive, got {self.max_time_s}")


def policy_for_problem_size(n):
    """Repetition bounds by problem size: small, medium and large tiers."""
    if n < 1:
        raise ValueError(f"problem size must be >= 1, got {n}")
    if n <= 1024:
        reps = (10000, 100000)
    elif n <= 5120:
        reps = (100, 1000)
    else:
        reps = (5, 50)
    return MeasurementPolicy(*reps, max_time_s=3600.0, confidence_level=0.95, precision=0.025)


def light_policy():
    """Cheap policy for desk-side comparisons."""
    return MeasurementPolicy(3, 20, max_time_s=3600.0, confidence_level=0.95, precision=0.05)


class StopReason(enum.Enum):
    PRECISION_REACHED = "PrecisionReached"
    MAX_REPS_EXCEEDED = "MaxRepsExceeded"
    MAX_TIME_EXCEEDED = "MaxTimeExceeded"


@dataclass(frozen=True)
class MeasurementResult:
    reps_done: int
    mean_s: float
    precision_achieved: float
    confidence_halfwidth: float
    elapsed_s: float
    stop_reason: StopReason
    samples: tuple = field(default=(), repr=False)


class MeasurementError(RuntimeError):
    """The workload raised; ``reps_done`` counts the repetitions that completed."""

    def __init__(self, message, reps_done):
        super().__init__(message)
        self.reps_done = reps_done


def mean_using_ttest(workload: Callable[[], object], policy: MeasurementPolicy,
                     timer: Callable[[], float] = time.perf_counter,
                     warmup=True, keep_samples=False) -> MeasurementResult:
    """Time ``workload`` until its mean is known to ``policy.precision``.

    After every repetition beyond ``min_reps`` the confidence half-width
    ``t * sd / sqrt(reps)`` is compared to the mean; the loop also stops at
    ``max_reps`` or once the summed workload time exceeds ``max_time_s``.
    One untimed warm-up run precedes the loop unless ``warmup`` is false.
    """
    if warmup:
        try:
            workload()
        except Exception as exc:
            raise MeasurementError(f"workload failed during warm-up: {exc}", 0) from exc

    samples = []
    reps = 0
    total = 0.0
    elapsed = 0.0
    # Welford running moments; exact zero variance for constant samples
    run_mean = 0.0
    m2 = 0.0
    halfwidth = 0.0
    reached = 0.0
    reason = None
    while reps < policy.max_reps and reason is None:
        st = timer()
        try:
            workload()
        except Exception as exc:
            raise MeasurementError(f"workload failed after {reps} repetitions: {exc}", reps) from exc
        et = timer()
        dt = et - st
        reps += 1
        elapsed += dt
        total += dt
        if keep_samples:
            samples.append(dt)
        delta = dt - run_mean
        run_mean += delta / reps
        m2 += delta * (dt - run_mean)
        if reps > policy.min_reps:
            t = abs(_t_cached(policy.confidence_level, reps - 1, policy.two_sided))
            sd = math.sqrt(max(m2, 0.0) / (reps - 1))
            halfwidth = t * sd / math.sqrt(reps)
            reached = halfwidth * reps / total if total > 0 else math.inf
            if reached < policy.precision:
                reason = StopReason.PRECISION_REACHED
            elif elapsed > policy.max_time_s:
                reason = StopReason.MAX_TIME_EXCEEDED
    if reason is None:
        reason = StopReason.MAX_REPS_EXCEEDED
    return MeasurementResult(
        reps_done=reps,
        mean_s=total / reps,
        precision_achieved=reached,
        confidence_halfwidth=halfwidth,
        elapsed_s=elapsed,
        stop_reason=reason,
        samples=tuple(samples),
    )


class SyntheticClock:
    """Deterministic clock for tests and dry runs.

    Each thread sees its own time line, advanced only by :meth:`advance`, so
    concurrent groups sharing one clock do not disturb each other's spans.
    """

    def __init__(self, start=0.0):
        self._start = start
        self._local = threading.local()

    def __call__(self):
        return getattr(self._local, "now", self._start)

    def advance(self, dt):
        self._local.now = self() + dt


# --- speed-function sweep ---------------------------------------------------


def parse_range(text):
    """``"a:b:step"`` (inclusive), ``"a:b"`` (step 1), ``"v"`` or ``"v1,v2,..."``."""
    text = text.strip()
    if "," in text:
        return [int(v) for v in text.split(",")]
    parts = [int(v) for v in text.split(":")]
    if len(parts) == 1:
        return parts
    if len(parts) not in (2, 3):
        raise ValueError(f"bad range {text!r}")
    start, stop = parts[0], parts[1]
    step = parts[2] if len(parts) == 3 else 1
    if step <= 0 or stop < start:
        raise ValueError(f"bad range {text!r}")
    return list(range(start, stop + 1, step))


def _x_le_y(x, y):
    return x <= y


@dataclass(frozen=True)
class SweepSpec:
    x_values: Sequence[int]
    y_values: Sequence[int]
    constraint: Callable[[int, int], bool] = _x_le_y
    memory_budget_bytes: int = 1 << 62

    def __post_init__(self):
        for name in ("x_values", "y_values"):
            vals = list(getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must be non-empty")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"{name} must be strictly increasing")
            if vals[0] < 1:
                raise ValueError(f"{name} must be positive")
            object.__setattr__(self, name, tuple(vals))
        if self.memory_budget_bytes < 1:
            raise ValueError("memory_budget_bytes must be positive")

    def points(self):
        """All ``(x, y)`` satisfying the constraint, ordered by ``y`` then ``x``."""
        return [(x, y) for y in self.y_values for x in self.x_values if self.constraint(x, y)]


@dataclass(frozen=True)
class GroupConfig:
    group_id: int
    workers: int = 1


@dataclass
class SweepOutcome:
    functions: list
    skipped: list = field(default_factory=list)   # (x, y, reason)
    missing: list = field(default_factory=list)   # (x, y, group_id, error)
    results: dict = field(default_factory=dict)   # (group_id, x, y) -> MeasurementResult


class _SweepSink:
    """Appends finished points to per-group CSV files and events to a sidecar log."""

    def __init__(self, csv_paths, log_path):
        self.csv_paths = csv_paths or {}
        self.log_path = log_path

    def existing(self):
        done = {}
        for gid, path in self.csv_paths.items():
            if os.path.exists(path) and os.path.getsize(path) > 0:
                sfs = [sf for sf in load_speed_functions(path) if sf.processor_id == gid]
                done[gid] = {(p.x, p.y): p for sf in sfs for p in sf}
            else:
                done[gid] = {}
        return done

    def append_points(self, rows):
        for gid, pt in rows:
            path = self.csv_paths.get(gid)
            if path is None:
                continue
            fresh = not os.path.exists(path) or os.path.getsize(path) == 0
            with open(path, "a", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                if fresh:
                    writer.writerow(CSV_HEADER)
                writer.writerow(format_row(gid, pt))
                fh.flush()
                os.fsync(fh.fileno())

    def event(self, kind, x, y, group_id="", detail=""):
        if self.log_path is None:
            return
        fresh = not os.path.exists(self.log_path)
        with open(self.log_path, "a", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if fresh:
                writer.writerow(["event", "x", "y", "group_id", "detail"])
            writer.writerow([kind, x, y, group_id, detail])


def build_speed_functions(sweep: SweepSpec, groups: Sequence[GroupConfig],
                          workload_factory: Callable[[GroupConfig, int, int], Callable[[], object]],
                          timer: Callable[[], float] = time.perf_counter,
                          policy: MeasurementPolicy | Callable[[int], MeasurementPolicy] = policy_for_problem_size,
                          csv_paths=None, log_path=None, resume=True) -> SweepOutcome:
    """Build one speed function per group over the sweep grid.

    For every admissible ``(x, y)`` all groups start together (barrier) and
    each times its own workload from ``workload_factory(group, x, y)`` under
    :func:`mean_using_ttest`. Points needing more than the memory budget
    (``p * x * y * 16`` bytes) are skipped. A failing workload marks the point
    missing for that group and the sweep continues.

    ``csv_paths`` maps group ids to CSV files receiving each finished point as
    soon as it is measured; with ``resume`` points already present in every
    group's file are not re-measured. ``log_path`` receives skip, missing and
    stop-reason events.
    """
    groups = list(groups)
    if not groups:
        raise ValueError("at least one group is required")
    p = len(groups)
    sink = _SweepSink(csv_paths, log_path)
    done = sink.existing() if resume else {g.group_id: {} for g in groups}
    collected = {g.group_id: dict(done.get(g.group_id, {})) for g in groups}
    outcome = SweepOutcome(functions=[])

    def measure(group, x, y, barrier, pol):
        try:
            work = workload_factory(group, x, y)
        finally:
            # a group that cannot start must still release the others
            barrier.wait()
        return mean_using_ttest(work, pol, timer=timer)

    with ThreadPoolExecutor(max_workers=p) as pool:
        for x, y in sweep.points():
            need = p * x * y * BYTES_PER_COMPLEX
            if need > sweep.memory_budget_bytes:
                log.info("skip (%d, %d): needs %d bytes > budget %d", x, y, need, sweep.memory_budget_bytes)
                outcome.skipped.append((x, y, f"memory {need} > {sweep.memory_budget_bytes}"))
                sink.event("skipped", x, y, detail=f"memory {need} > {sweep.memory_budget_bytes}")
                continue
            if all((x, y) in collected[g.group_id] for g in groups):
                continue
            pol = policy(max(x, y)) if callable(policy) else policy
            barrier = threading.Barrier(p)
            futures = [pool.submit(measure, g, x, y, barrier, pol) for g in groups]
            rows = []
            for g, fut in zip(groups, futures):
                try:
                    res = fut.result()
                except Exception as exc:
                    log.warning("group %d failed at (%d, %d): %s", g.group_id, x, y, exc)
                    outcome.missing.append((x, y, g.group_id, str(exc)))
                    sink.event("missing", x, y, g.group_id, str(exc))
                    continue
                pt = SpeedPoint(x, y, res.mean_s)
                # a point kept from a partial earlier run is already on disk
                if (x, y) not in collected[g.group_id]:
                    rows.append((g.group_id, pt))
                collected[g.group_id][(x, y)] = pt
                outcome.results[(g.group_id, x, y)] = res
                sink.event("measured", x, y, g.group_id,
                           f"{res.stop_reason.value} reps={res.reps_done} eps={res.precision_achieved:.4g}")
            sink.append_points(rows)

    outcome.functions = [SpeedFunction(g.group_id, collected[g.group_id].values()) for g in groups]
    return outcome
