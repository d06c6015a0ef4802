"""Metrical theory of Renyi-type continued fractions, computed and checked."""

__version__ = "0.1.0"

from .expansion import (
    INFINITY,
    Convergent,
    DigitSequence,
    DomainError,
    Params,
    convergents,
    digit,
    error_bound,
    evaluate,
    expand,
    fixed_point_xstar,
    inverse_branch,
    renyi_map,
)
from .cylinders import (
    Cylinder,
    bbl_conditional,
    cylinder,
    cylinder_measure,
    digit_law,
    s_sequence,
    transition_prob,
)
from .natext import (
    ExtPoint,
    conditional_cdf,
    ext_invariance_check,
    ext_inverse,
    ext_iterate,
    ext_map,
    ext_measure_rect,
    rho_t_cdf,
)
from .grid import GridDensity
from .transfer import RateReport, apply_L, apply_U, iterate_U, rate_estimate, u_infinity
from .rscc import (
    ChainState,
    q_interval,
    regularity_witness,
    sample_digit,
    simulate_chain,
    stationarity_check,
)
from .gauss_kuzmin import GKReport, InitialDensity, gauss_kuzmin_experiment
