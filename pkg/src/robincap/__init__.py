"""Robin p-capacity of compact/domain pairs: exact ball formulas and P1 finite elements."""

from .radial import (
    ProblemParams,
    Regime,
    RegimeReport,
    ball_energy,
    ball_lower_bound,
    critical_radius,
    gradient_ratio,
    lemma5_predicate,
    phi,
    phi_prime,
    regime_classify,
    u_star,
    unit_ball_volume,
)

__version__ = "0.1.0"
