"""Padding rows to a faster FFT length.

Some lengths are much slower than their neighbours (large prime factors).
If the model says a longer sampled length is fast enough to pay for the
extra work, a group's rows are zero-padded to it. The result is no longer
the n-point DFT, so it is compared with its own direct-sum reference.
"""

import numpy as np

from fpmfft import SignalMatrix, SpeedFunction, dft2d_padded_reference, execute, plan_fpm

n = 13
lengths = {13: 0.4e9, 14: 0.9e9, 16: 1.8e9, 32: 2.0e9}
g1 = SpeedFunction.from_speeds(1, {(x, y): s for x in range(1, n + 1) for y, s in lengths.items()})
g2 = SpeedFunction.from_speeds(2, {(x, 13): 0.5e9 for x in range(1, n + 1)})

fp = plan_fpm([g1, g2], n, pad=True)
for dec in fp.pads:
    print(f"group {dec.group_id}: {dec.rows_x} rows, length {dec.base_length_n} -> {dec.padded_length}"
          f" (saves {dec.predicted_gain_s * 1e9:.1f} ns) {dec.note}")

m = SignalMatrix.random(n, seed=1)
ref = dft2d_padded_reference(m, fp.plan.counts, fp.plan.padded_lengths)
out = m.copy()
execute(fp.plan, out)
err = np.abs(out.view - ref.view).max()
print(f"max deviation from padded reference: {err:.2e}")
print(f"max deviation from the true 2D DFT:  {np.abs(out.view - np.fft.fft2(m.view)).max():.2e} (expected: padding changes the result)")
