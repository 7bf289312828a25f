"""Model-driven planning: partition the rows, optionally pick pad lengths."""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import ExecutionPlan, FftBackend, SignalMatrix, execute, fpm_plan
from .padding import PadDecision, plan_padding
from .partitioner import DEFAULT_EPSILON, RowDistribution, partition

__all__ = ["FpmPlan", "plan_fpm", "pfft_fpm"]


@dataclass(frozen=True)
class FpmPlan:
    plan: ExecutionPlan
    distribution: RowDistribution
    pads: list = field(default_factory=list)


def plan_fpm(speed_functions, n, workers=1, epsilon=DEFAULT_EPSILON, pad=False,
             objective="time", strict_positive=False) -> FpmPlan:
    """Execution plan for ``len(speed_functions)`` groups on an ``n x n`` matrix.

    With ``pad`` every group also gets a padded row length from its own model.
    """
    dist = partition(speed_functions, n, epsilon, strict_positive=strict_positive)
    if not pad:
        return FpmPlan(fpm_plan(dist, n, workers), dist)
    pads: list[PadDecision] = plan_padding(speed_functions, dist, n, objective)
    return FpmPlan(fpm_plan(dist, n, workers, [d.padded_length for d in pads]), dist, pads)


def pfft_fpm(m: SignalMatrix, speed_functions, workers=1, epsilon=DEFAULT_EPSILON, pad=False,
             backend: FftBackend = None, objective="time", block_size=64) -> FpmPlan:
    """Partition with the models, then transform ``m`` in place."""
    fp = plan_fpm(speed_functions, m.n, workers, epsilon, pad, objective)
    execute(fp.plan, m, backend, block_size=block_size)
    return fp
