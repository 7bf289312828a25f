"""Timing until the mean is trustworthy, and profiling a grid.

The loop repeats a workload until the confidence interval of the mean is
within a few percent of it. A synthetic clock stands in for wall time so
the run is deterministic and instant.
"""

import tempfile
from pathlib import Path

import numpy as np

from fpmfft import (
    GroupConfig,
    MeasurementPolicy,
    SweepSpec,
    SyntheticClock,
    build_speed_functions,
    mean_using_ttest,
    t_critical,
)
from fpmfft.fpm_model import work_flops

print("one-sided 95% t quantiles:", {d: round(t_critical(0.95, d), 4) for d in (1, 5, 30, 1000)})

rng = np.random.default_rng(3)
clock = SyntheticClock()
policy = MeasurementPolicy(10, 10000, confidence_level=0.95, precision=0.025)
res = mean_using_ttest(lambda: clock.advance(rng.normal(1.0, 0.1)), policy, timer=clock)
print(f"noisy workload: {res.reps_done} reps, mean {res.mean_s:.4f}, "
      f"half-width/mean {res.precision_achieved:.4f}, {res.stop_reason.value}")

# a two-group sweep over a small grid; group 2 is 30% faster
clock = SyntheticClock()


def factory(group, x, y):
    dt = work_flops(x, y) / (1e9 * (1.0 + 0.3 * (group.group_id - 1)))
    return lambda: clock.advance(dt)


with tempfile.TemporaryDirectory() as tmp:
    paths = {g: str(Path(tmp) / f"group_{g}.csv") for g in (1, 2)}
    out = build_speed_functions(SweepSpec([4, 8, 16], [16, 32]), [GroupConfig(1), GroupConfig(2)], factory,
                                timer=clock, policy=MeasurementPolicy(3, 20), csv_paths=paths)
    for sf in out.functions:
        print(f"group {sf.processor_id}: {len(sf)} points,",
              f"speed at (8, 32) = {sf[(8, 32)].speed / 1e9:.2f} GFLOPs")
    print(Path(paths[1]).read_text().splitlines()[:3])
