"""Ito formula for functions of the law of a conditional law, checked exactly on a tree.

Left side: finite difference of U along the flow. Right side: time, drift,
diffusion and information terms with the projected Brownian motion.
"""
from nestprob.calculus import ITO_CASES, PAIR_BUNDLES, common_noise_case, loglog_slope, run_ito_case

dts = (1 / 8, 1 / 16, 1 / 32)
for name in ITO_CASES:
    res = [run_ito_case(name, dt).max_residual for dt in dts]
    slope = loglog_slope(dts, res) if min(res) > 1e-13 else float("nan")
    print(f"{name:>24}: residuals " + " ".join(f"{r:.3e}" for r in res) + f"  slope {slope:.3f}")

rep = run_ito_case("quadratic-mean", 1 / 16)
print("quadratic-mean terms per step (time, drift, diffusion, information):")
print(rep.terms)

for name in PAIR_BUNDLES:
    rep = common_noise_case(name, 1 / 16)
    print(f"{name:>14}: general residual {rep.max_residual:.3e}, common-noise consistency {rep.consistency_gap:.1e}")
