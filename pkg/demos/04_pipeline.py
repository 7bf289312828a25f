"""Running the 2D FFT pipeline in its variants.

Rows are transformed by concurrent groups, the matrix is transposed,
rows are transformed again and transposed back. All variants give the
same answer; they differ only in who does which rows.
"""

import time

import numpy as np

from fpmfft import SignalMatrix, dft2d_naive, execute, fpm_plan, lb_plan, sequential_plan

n = 256
m = SignalMatrix.random(n, seed=7)
ref = dft2d_naive(m).view

plans = {
    "sequential": sequential_plan(n),
    "load-balanced, 4 groups": lb_plan(n, 4),
    "model-based 100/156": fpm_plan([100, 156], n),
}
for name, plan in plans.items():
    work = m.copy()
    t0 = time.perf_counter()
    execute(plan, work, block_size=32)
    dt = time.perf_counter() - t0
    err = np.sqrt(np.mean(np.abs(work.view - ref) ** 2) / np.mean(np.abs(ref) ** 2))
    print(f"{name:26s} d={plan.counts}  {dt * 1e3:7.2f} ms  rel rms vs direct sum {err:.1e}")
