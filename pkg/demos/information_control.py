"""Dynamic information control on a noise tree.

Exhaustive search over signal sequences against backward induction on laws
of conditional laws, and the effect of convex vs. concave terminal rewards.
"""
from nestprob.dynamic_control import dpp_suite, law_invariance_check, representations, value_dpp, value_exhaustive

for name, p in dpp_suite():
    ex, dp = value_exhaustive(p), value_dpp(p)
    rep = law_invariance_check(p, representations(p.xi_space, p.g0))
    print(f"{name}: menu={[s.name for s in p.menu]} steps={p.steps}")
    print(f"    exhaustive={ex.value:+.12f} dpp={dp.value:+.12f} states={dp.states_visited} "
          f"memo hits={dp.memo_hits} spread over representations={rep.spread:.1e}")
    print(f"    best sequence: {', '.join(ex.argmax_names(p))}")
