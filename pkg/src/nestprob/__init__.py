"""Nested measures, information-controlled stochastic problems and their numerics."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .measures import (  # noqa: F401
    DiscreteMeasure, NestedMeasure, canonical_key, canonicalize, dyadic_project, flatten, measure_from_dict,
    mixture, push_forward, push_forward_nested,
)
from .transport import kantorovich_dual_value, kantorovich_potential, nested_wp, wp, wp_1d  # noqa: F401
from .conditional import (  # noqa: F401
    FiniteProbSpace, Partition, PartitionFiltration, conditional_law, h_check, h_star_check,
    law_of_conditional_law, prop_equiv_check, realize_nested_law,
)
from .static_games import (  # noqa: F401
    braess_cost, brute_force_static, insider_value, invert_I, nash_equilibrium, nash_value, u_of_partition,
)
from .dynamic_control import ControlProblem, law_invariance_check, value_dpp, value_exhaustive  # noqa: F401
from .calculus import ITO_CASES, ito_general_residual, ito_residual, lfd_check, project_bm  # noqa: F401
from .hjb_insider import simulate_policy, solve_v, tilde_v  # noqa: F401
