"""Choosing a faster FFT length to pad each group's rows to.

For a group holding ``x`` rows of length ``n`` the candidates are the sampled
lengths ``V > n`` of its speed function. The winner is the candidate with the
smallest modelled time, kept only if it beats the time at ``n``; ties go to
the shorter length.

The time of ``x`` length-``V`` transforms is ``2.5 x V log2(V) / s(x, V)``.
``objective="proxy"`` compares ``x V / s(x, V)`` instead, which drops the
``log2`` factor and can order candidates differently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .fpm_model import ModelNotFoundError, SpeedFunction, speed_at
from .partitioner import RowDistribution

__all__ = ["PadDecision", "determine_pad_length", "modelled_cost", "plan_padding"]

OBJECTIVES = ("time", "proxy")


@dataclass(frozen=True)
class PadDecision:
    group_id: int
    rows_x: int
    base_length_n: int
    padded_length: int
    predicted_gain_s: float
    note: str = ""

    @property
    def padded(self):
        return self.padded_length > self.base_length_n

    def as_record(self):
        rec = {"group_id": self.group_id, "rows": self.rows_x, "n": self.base_length_n,
               "padded_length": self.padded_length, "predicted_gain_s": self.predicted_gain_s}
        if self.note:
            rec["note"] = self.note
        return rec


def modelled_cost(sf: SpeedFunction, x, length, objective="time"):
    """Cost of ``x`` rows at ``length`` under the chosen objective."""
    s = speed_at(sf, x, length)
    if objective == "time":
        return 2.5 * x * length * math.log2(length) / s
    if objective == "proxy":
        return x * length / s
    raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")


def determine_pad_length(sf: SpeedFunction, x, n, objective="time", group_id=None) -> PadDecision:
    """Best padded length for ``x`` rows of length ``n`` on one group.

    ``predicted_gain_s`` is the cost saved at the chosen length, in the units
    of ``objective`` (seconds for ``"time"``).
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    if x < 0:
        raise ValueError(f"row count must be >= 0, got {x}")
    gid = sf.processor_id if group_id is None else group_id
    if x == 0:
        return PadDecision(gid, 0, n, n, 0.0, "no rows")
    candidates = [v for v in sf.sampled_y if v > n]
    if not candidates:
        return PadDecision(gid, x, n, n, 0.0, "no candidates")
    try:
        base = modelled_cost(sf, x, n, objective)
    except ModelNotFoundError:
        return PadDecision(gid, x, n, n, 0.0, "base length not modelled")

    best_v, best_cost = None, math.inf
    for v in candidates:
        cost = modelled_cost(sf, x, v, objective)
        if cost < best_cost:
            best_v, best_cost = v, cost
    if best_cost < base:
        return PadDecision(gid, x, n, best_v, base - best_cost)
    return PadDecision(gid, x, n, n, 0.0)


def plan_padding(speed_functions: Sequence[SpeedFunction], distribution: RowDistribution, n,
                 objective="time") -> list[PadDecision]:
    """Independent pad decision for every group and its share of rows."""
    if len(speed_functions) != len(distribution.counts):
        raise ValueError("one speed function per group is required")
    return [determine_pad_length(sf, d, n, objective) for sf, d in zip(speed_functions, distribution.counts)]
