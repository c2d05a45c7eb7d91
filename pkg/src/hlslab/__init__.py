"""Radial shooting and structural diagnostics for Lane-Emden type elliptic systems."""

__version__ = "0.1.0"

from .regimes import (
    NotApplicableError,
    PowerPair,
    Regime,
    RegimeTag,
    SystemSpec,
    check_assumptions,
    classify,
    decoupled,
    lane_emden,
    make_exponents,
    polyharmonic_cascade,
    scalar_power,
    scaling_exponents,
)
from .integrator import (
    IntegrationError,
    OutcomeTag,
    RadialProfile,
    ShotOptions,
    flux_residual,
    integrate_shot,
    oracle_shot,
)
from .shooting import (
    IndeterminateBracket,
    NoSeparation,
    SearchOptions,
    dirichlet_scan,
    simplex_search,
    target_map,
)
from .diagnostics import (
    check_comparison,
    energy_growth,
    fit_decay_slopes,
    pohozaev_residual,
    verify_profile,
)

__all__ = [
    "__version__",
    "NotApplicableError", "PowerPair", "Regime", "RegimeTag", "SystemSpec", "check_assumptions", "classify",
    "decoupled", "lane_emden", "make_exponents", "polyharmonic_cascade", "scalar_power", "scaling_exponents",
    "IntegrationError", "OutcomeTag", "RadialProfile", "ShotOptions", "flux_residual", "integrate_shot",
    "oracle_shot", "IndeterminateBracket", "NoSeparation", "SearchOptions", "dirichlet_scan", "simplex_search",
    "target_map", "check_comparison", "energy_growth", "fit_decay_slopes", "pohozaev_residual", "verify_profile",
]
