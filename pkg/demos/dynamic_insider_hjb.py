"""Dynamic insider: solve the reduced HJB equation, extract the bang-bang
information policy and check it by Monte Carlo."""
import numpy as np

from nestprob.hjb_insider import closed_form_error, interpolant_error, simulate_policy, solve_v, tilde_v

sol = solve_v(L=4.0, dx=0.01, T=1.0)
print(f"nodal error on |x|>=1: {closed_form_error(sol):.2e}, interpolant error: {interpolant_error(sol):.2e}")
for x in (0.0, 0.5, 0.9, 1.0, 2.0):
    print(f"v(0, {x:3.1f}) = {float(sol.value(0.0, x)):+.6f}   never observing: {tilde_v(0.0, x, 1.0):+.6f}")

k = sol.layer(0.0)
band = sol.x[sol.sigma_star[k] == 1]
print(f"at t=0 information is acquired on [{band.min():.2f}, {band.max():.2f}]")

for x0 in (0.0, 0.5, 1.5):
    r = simulate_policy(sol, x0, n_paths=50_000, seed=7)
    print(f"x0={x0}: MC {r.mc_value:+.5f} +- {r.stderr:.5f}, PDE {r.pde_value:+.5f}, z={r.z_pde:+.2f}, "
          f"band entry {r.band_entry_fraction:.2f}")
