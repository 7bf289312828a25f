"""Speed functions: build one, slice it, store it.

A speed function maps (x rows, length y) to the speed of x batched
length-y FFTs. Here one is made from a closed-form surface with a few
deliberate dips, the way a real profile looks on a jagged machine.
"""

import io

import numpy as np

from fpmfft import (
    SpeedFunction,
    load_speed_functions,
    save_speed_functions,
    section_at_x,
    section_at_y,
    speed_at,
    variation_percent,
)

rng = np.random.default_rng(0)
speeds = {}
for y in (64, 96, 128):
    for x in range(8, 129, 8):
        s = 2e9 * (1 - np.exp(-x / 40)) * (1.3 if y == 128 else 1.0)
        if rng.random() < 0.2:
            s *= 0.6  # a dip
        speeds[(x, y)] = s
sf = SpeedFunction.from_speeds(1, speeds)
print(sf, "sampled lengths", sf.sampled_y)

curve = section_at_y(sf, 96)
print("\nspeed along x at y=96 (GFLOPs):")
for x, s in curve.samples():
    print(f"  x={x:4d}  {s / 1e9:6.3f}")

# width of the jumps between neighbouring samples
jumps = [variation_percent(a, b) for a, b in zip(curve.speeds, curve.speeds[1:])]
print(f"\nlargest jump between neighbours: {max(jumps):.1f}%")

# between samples x is interpolated; y snaps down to a sampled length
print("speed at x=12, y=100:", f"{speed_at(sf, 12, 100) / 1e9:.3f} GFLOPs (read at y={sf.snap_y(100)})")
print("speeds over y at x=64:", (section_at_x(sf, 64).speeds / 1e9).round(3))

buf = io.StringIO()
save_speed_functions(buf, [sf], comments=["demo surface"])
print("\nCSV head:\n" + "\n".join(buf.getvalue().splitlines()[:4]))
buf.seek(0)
(back,) = load_speed_functions(buf)
print("reloaded", back, "same times:", all(back[k].time_s == p.time_s for k, p in sf.points.items()))
