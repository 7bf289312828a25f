"""Splitting the rows of an n x n matrix between unequal groups.

Two groups of workers; the second is faster but has a bad spot around 40
rows. Load balancing gives each n/2 rows. The model-based split moves rows
towards the group that finishes them sooner, avoiding the dip.
"""

from fpmfft import SpeedFunction, brute_force_partition, partition, predicted_time

n = 96
slow = SpeedFunction.from_speeds(1, {(x, n): 1.0e9 for x in range(1, n + 1)})
fast = SpeedFunction.from_speeds(2, {(x, n): (0.7e9 if 36 <= x <= 52 else 1.6e9) for x in range(1, n + 1)})

lb = [n // 2, n - n // 2]
lb_time = max(predicted_time(sf, d, n) for sf, d in zip((slow, fast), lb))
dist = partition([slow, fast], n)

print(f"path: {dist.path} (worst spread between groups {dist.report.worst_rdiff:.2f})")
print(f"load-balanced d={lb}: predicted {lb_time * 1e6:.1f} us")
print(f"model-based   d={list(dist.counts)}: predicted {dist.objective_time_s * 1e6:.1f} us")
for (start, count), sf in zip(dist.ranges(), (slow, fast)):
    print(f"  group {sf.processor_id}: rows {start}..{start + count - 1}, {predicted_time(sf, count, n) * 1e6:.1f} us")

check = brute_force_partition([slow, fast], n)
print(f"exhaustive search agrees: {check.counts == dist.counts}")

# groups within 5% of each other collapse to one harmonic-mean model
twin = SpeedFunction.from_speeds(2, {(x, n): 1.03e9 for x in range(1, n + 1)})
print("\nnear-identical groups:", partition([slow, twin], n).path)
