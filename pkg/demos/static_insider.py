"""Static insider: how much information to acquire before trading a capped position.

Compares the closed-form value with the quantile-cell discretization and an
exhaustive search over two-atom partitions.
"""
import numpy as np

from nestprob.static_games import (
    brute_force_static, discretized_value, gaussian_cells, insider_value, optimal_partition, r0,
)

print(f"R0 = E|X| = {r0():.12f}")
print(f"{'R':>6} {'regime':>8} {'V closed':>12} {'V N=1000':>12} {'a_R':>8} {'brute N=12':>11}")
for R in (0.2, 0.5, 0.75, r0(), 1.0, 1.5):
    s = insider_value(R)
    bf = brute_force_static(R, 12, 2)
    a = f"{s.a_R:.5f}" if s.a_R is not None else "-"
    print(f"{R:6.3f} {s.regime:>8} {s.V:12.8f} {discretized_value(R, 1000):12.8f} {a:>8} {bf.value:11.6f}")

# the optimal information set on the cells
cells = gaussian_cells(40)
for R in (1.0, 0.5):
    lab = optimal_partition(cells, R)
    print(f"R={R}: cells in atom 1 ->", np.round(cells.mean[lab == 1], 2))
