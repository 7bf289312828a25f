"""Functional performance models of abstract processors.

A speed function maps a problem size ``(x, y)`` -- ``x`` batched 1D FFTs of
length ``y`` -- to a speed in FLOP/s, computed from a measured execution time
as ``2.5 * x * y * log2(y) / t``.

Lookups follow two rules:

* ``y`` is never interpolated. A request for an unsampled length snaps down to
  the nearest sampled length not exceeding it.
* ``x`` is interpolated piecewise-linearly between sampled row counts and
  clamped to the sampled range outside it.

Speed functions persist as CSV with the header ``processor_id,x,y,time_s,speed``.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "CSV_HEADER",
    "DomainError",
    "ModelFormatError",
    "ModelNotFoundError",
    "SpeedCurve",
    "SpeedFunction",
    "SpeedPoint",
    "load_speed_functions",
    "save_speed_functions",
    "section_at_x",
    "section_at_y",
    "speed_at",
    "speed_from_time",
    "time_from_speed",
    "variation_percent",
    "work_flops",
]

CSV_HEADER = ("processor_id", "x", "y", "time_s", "speed")

# relative mismatch between stored and recomputed speed that triggers a warning
_SPEED_MISMATCH_RTOL = 1e-6


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ModelNotFoundError(LookupError):
    """A speed function has no sample for the requested coordinate."""

    def __init__(self, message, nearest=None):
        super().__init__(message)
        self.nearest = nearest


class ModelFormatError(ValueError):
    """A speed-function file is malformed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def variation_percent(s1, s2):
    """Width of a performance variation between two speeds, in percent.

    >>> variation_percent(100, 150)
    50.0
    """
    if not (s1 > 0 and s2 > 0):
        raise DomainError(f"speeds must be positive, got {s1!r} and {s2!r}")
    return abs(s1 - s2) / min(s1, s2) * 100.0


def work_flops(x, y):
    """Nominal floating-point work of ``x`` length-``y`` FFTs."""
    if y < 2:
        raise DomainError(f"FFT length must be >= 2 for the work formula, got {y}")
    return 2.5 * x * y * math.log2(y)


def speed_from_time(x, y, time_s):
    """Speed of ``x`` length-``y`` FFTs executed in ``time_s`` seconds."""
    if not time_s > 0:
        raise DomainError(f"time must be positive, got {time_s!r}")
    return work_flops(x, y) / time_s


def time_from_speed(x, y, speed):
    if not speed > 0:
        raise DomainError(f"speed must be positive, got {speed!r}")
    return work_flops(x, y) / speed


@dataclass(frozen=True)
class SpeedPoint:
    x: int
    y: int
    time_s: float
    speed: float = None

    def __post_init__(self):
        if self.x < 1:
            raise DomainError(f"x must be >= 1, got {self.x}")
        if self.y < 2:
            raise DomainError(f"y must be >= 2, got {self.y}")
        if not self.time_s > 0:
            raise DomainError(f"time_s must be positive, got {self.time_s!r}")
        if self.speed is None:
            object.__setattr__(self, "speed", speed_from_time(self.x, self.y, self.time_s))

    @classmethod
    def from_speed(cls, x, y, speed):
        return cls(x, y, time_from_speed(x, y, speed), speed)


@dataclass(frozen=True)
class GridMeta:
    x_min: int
    x_max: int
    y_min: int
    y_max: int
    x_step: int | None = None
    y_step: int | None = None


def _uniform_step(values):
    if len(values) < 2:
        return None
    steps = set(np.diff(values).tolist())
    return steps.pop() if len(steps) == 1 else None


@dataclass(frozen=True)
class SpeedCurve:
    """A speed function sectioned by a plane of fixed ``y`` (axis "y") or fixed ``x`` (axis "x").

    ``value`` is the coordinate the section was actually taken at and
    ``requested`` the one asked for; they differ only after y-snapping.
    """

    axis: str
    value: int
    free: np.ndarray
    speeds: np.ndarray
    requested: int | None = None

    def __post_init__(self):
        free = np.asarray(self.free, dtype=np.int64)
        speeds = np.asarray(self.speeds, dtype=np.float64)
        if self.axis not in ("x", "y"):
            raise ValueError(f"axis must be 'x' or 'y', got {self.axis!r}")
        if free.shape != speeds.shape or free.ndim != 1:
            raise ValueError("free coordinates and speeds must be 1-D and of equal length")
        if free.size and np.any(np.diff(free) <= 0):
            raise ValueError("free coordinates must be strictly increasing")
        if np.any(speeds <= 0):
            raise DomainError("curve speeds must be positive")
        free.setflags(write=False)
        speeds.setflags(write=False)
        object.__setattr__(self, "free", free)
        object.__setattr__(self, "speeds", speeds)
        if self.requested is None:
            object.__setattr__(self, "requested", self.value)

    @property
    def snapped(self):
        return self.requested != self.value

    def samples(self):
        return list(zip(self.free.tolist(), self.speeds.tolist()))

    def __len__(self):
        return int(self.free.size)


class SpeedFunction:
    """Discrete speed function of one abstract processor.

    Immutable once built; concurrent reads are safe.
    """

    def __init__(self, processor_id, points: Iterable[SpeedPoint] = (), grid_meta=None):
        if processor_id < 1:
            raise DomainError(f"processor_id must be >= 1, got {processor_id}")
        self.processor_id = int(processor_id)
        table = {}
        for pt in points:
            key = (pt.x, pt.y)
            if key in table:
                raise ValueError(f"duplicate point {key} for processor {processor_id}")
            table[key] = pt
        self._points: Mapping[tuple[int, int], SpeedPoint] = table
        by_y, by_x = {}, {}
        for (x, y), pt in sorted(table.items()):
            by_y.setdefault(y, ([], []))
            by_y[y][0].append(x)
            by_y[y][1].append(pt.speed)
            by_x.setdefault(x, ([], []))
            by_x[x][0].append(y)
            by_x[x][1].append(pt.speed)
        self._by_y = {k: (np.array(a, dtype=np.int64), np.array(b)) for k, (a, b) in by_y.items()}
        self._by_x = {k: (np.array(a, dtype=np.int64), np.array(b)) for k, (a, b) in by_x.items()}
        self._ys = sorted(self._by_y)
        self._xs = sorted(self._by_x)
        if grid_meta is None and table:
            grid_meta = GridMeta(
                x_min=self._xs[0], x_max=self._xs[-1],
                y_min=self._ys[0], y_max=self._ys[-1],
                x_step=_uniform_step(self._xs), y_step=_uniform_step(self._ys),
            )
        self.grid_meta = grid_meta

    @classmethod
    def from_speeds(cls, processor_id, speeds: Mapping[tuple[int, int], float], grid_meta=None):
        """Build from a ``{(x, y): speed}`` mapping (handy for synthetic models)."""
        pts = [SpeedPoint.from_speed(x, y, s) for (x, y), s in speeds.items()]
        return cls(processor_id, pts, grid_meta)

    @classmethod
    def from_curve(cls, processor_id, curve: SpeedCurve):
        """Embed a fixed-``y`` curve as a speed function sampled on that single length."""
        if curve.axis != "y":
            raise ValueError("only fixed-y curves describe row-count behaviour")
        return cls.from_speeds(
            processor_id, {(int(x), curve.value): float(s) for x, s in zip(curve.free, curve.speeds)}
        )

    @property
    def points(self):
        return dict(self._points)

    @property
    def sampled_y(self):
        return list(self._ys)

    @property
    def sampled_x(self):
        return list(self._xs)

    def __len__(self):
        return len(self._points)

    def __contains__(self, key):
        return key in self._points

    def __getitem__(self, key) -> SpeedPoint:
        return self._points[key]

    def __iter__(self):
        return iter(sorted(self._points.values(), key=lambda p: (p.y, p.x)))

    def __eq__(self, other):
        if not isinstance(other, SpeedFunction):
            return NotImplemented
        return self.processor_id == other.processor_id and self._points == other._points

    def __repr__(self):
        return f"SpeedFunction(processor_id={self.processor_id}, points={len(self)})"

    def snap_y(self, y):
        """Nearest sampled length not exceeding ``y``."""
        i = bisect.bisect_right(self._ys, y)
        if i == 0:
            raise ModelNotFoundError(
                f"processor {self.processor_id}: no sampled length <= {y}",
                nearest=self._nearest(self._ys, y),
            )
        return self._ys[i - 1]

    @staticmethod
    def _nearest(values, v):
        if not values:
            return None
        return min(values, key=lambda s: (abs(s - v), s))

    def _row(self, y, snap):
        if y in self._by_y:
            return y, self._by_y[y]
        if not snap:
            raise ModelNotFoundError(
                f"processor {self.processor_id}: no points at y={y}"
                + (f" (nearest sampled y={self._nearest(self._ys, y)})" if self._ys else " (empty model)"),
                nearest=self._nearest(self._ys, y),
            )
        ys = self.snap_y(y)
        return ys, self._by_y[ys]

    def speeds_at(self, xs, y, snap=True):
        """Vectorised :func:`speed_at` over an array of row counts."""
        _, (free, speeds) = self._row(y, snap)
        return np.interp(np.asarray(xs, dtype=np.float64), free, speeds)


def section_at_y(sf: SpeedFunction, y, snap=False) -> SpeedCurve:
    """Intersect ``sf`` with the plane of fixed length ``y``.

    Exact by default; ``snap=True`` falls back to the nearest sampled length
    not exceeding ``y`` and records the request on the curve.
    """
    ys, (free, speeds) = sf._row(y, snap)
    return SpeedCurve("y", ys, free, speeds, requested=y)


def section_at_x(sf: SpeedFunction, x) -> SpeedCurve:
    """Intersect ``sf`` with the plane of fixed row count ``x``."""
    if x not in sf._by_x:
        raise ModelNotFoundError(
            f"processor {sf.processor_id}: no points at x={x}"
            + (f" (nearest sampled x={sf._nearest(sf._xs, x)})" if sf._xs else " (empty model)"),
            nearest=sf._nearest(sf._xs, x),
        )
    free, speeds = sf._by_x[x]
    return SpeedCurve("x", x, free, speeds)


def speed_at(sf: SpeedFunction, x, y, snap=True):
    """Modelled speed for ``x`` rows of length ``y``.

    Interpolates linearly in ``x`` and clamps outside the sampled range;
    ``y`` is snapped, never interpolated.
    """
    return float(sf.speeds_at([x], y, snap=snap)[0])


# --- persistence ---------------------------------------------------------


def save_speed_functions(path_or_file, functions: Iterable[SpeedFunction], comments=()):
    """Write one or more speed functions to a single CSV file."""
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
    try:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for sf in functions:
            for pt in sf:
                writer.writerow(format_row(sf.processor_id, pt))
    finally:
        if own:
            fh.close()


def format_row(processor_id, pt: SpeedPoint):
    # repr keeps time_s bit-exact through a round trip
    return [processor_id, pt.x, pt.y, repr(float(pt.time_s)), repr(float(pt.speed))]


def load_speed_functions(path_or_file) -> list[SpeedFunction]:
    """Read speed functions from CSV, one per ``processor_id``, sorted by id.

    ``time_s`` is authoritative: speeds are recomputed from it and a stored
    speed that disagrees by more than 1e-6 relative raises a warning.
    """
    if isinstance(path_or_file, (str, os.PathLike)):
        with open(path_or_file, encoding="utf-8", newline="") as fh:
            text = fh.read()
    else:
        text = path_or_file.read()
    points: dict[int, list[SpeedPoint]] = {}
    header_seen = False
    for lineno, line in enumerate(io.StringIO(text), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if not header_seen:
            if stripped.startswith("#"):
                continue
            cols = tuple(c.strip() for c in next(csv.reader([stripped])))
            if cols != CSV_HEADER:
                raise ModelFormatError(f"expected header {','.join(CSV_HEADER)!r}, got {stripped!r}", lineno)
            header_seen = True
            continue
        fields = next(csv.reader([stripped]))
        if len(fields) != len(CSV_HEADER):
            raise ModelFormatError(f"expected {len(CSV_HEADER)} fields, got {len(fields)}", lineno)
        try:
            pid, x, y = int(fields[0]), int(fields[1]), int(fields[2])
            time_s = float(fields[3])
            stored = float(fields[4]) if fields[4].strip() else None
            pt = SpeedPoint(x, y, time_s)
        except (ValueError, DomainError) as exc:
            raise ModelFormatError(str(exc), lineno) from None
        if stored is not None and abs(stored - pt.speed) > _SPEED_MISMATCH_RTOL * abs(pt.speed):
            warnings.warn(
                f"line {lineno}: stored speed {stored!r} disagrees with time-derived {pt.speed!r}",
                stacklevel=2,
            )
        points.setdefault(pid, []).append(pt)
    if not header_seen:
        raise ModelFormatError("missing header")
    try:
        return [SpeedFunction(pid, pts) for pid, pts in sorted(points.items())]
    except ValueError as exc:
        raise ModelFormatError(str(exc)) from None
