"""Finiteness of perpetual integrals of Lévy processes drifting to +infinity.

Simulation, potential-measure estimation, comparison tests, and mechanical
reconstruction of the counterexamples that defeat tail-only criteria.
"""

from .criteria import (
    CriterionReport,
    RegionCoverageError,
    RegionSpec,
    blackwell_equivalence_check,
    classify_ladder,
    dk_test,
    erickson_maller_test,
    full_line,
    half_line,
    khasminskii_J,
    potential_integral,
    transience_probe,
)
from .counterexamples import (
    OvershootTable,
    TrapConstruction,
    TrapConstructionError,
    build_transient_trap,
    estimate_overshoot_cdf,
    lattice_counterexample,
    verify_counterexample,
)
from .functions import (
    TestFunction,
    constant,
    exp_decay,
    from_callable,
    indicator,
    inverse_power,
    lattice_sine,
    step_function,
    triangle_train,
)
from .models import (
    CompoundPoisson,
    LevyModel,
    ModelRejectionError,
    PassageRecord,
    PathSample,
    TruncatedStable,
    build_model,
    describe,
    first_passage,
    mean_of,
    simulate_path,
)
from .perpetual import (
    BattyReport,
    IDistribution,
    LSetApprox,
    MgfReport,
    Verdict,
    batty_inequality_check,
    bootstrap_outcome_consistency,
    estimate_I_distribution,
    estimate_L_set,
    finiteness_diagnosis,
    integral_along_path,
    integral_at_times,
    khasminskii_exponential_check,
)
from .potential import (
    PotentialMeasure,
    analytic_potential,
    estimate_potential,
    hitting_probability,
    hitting_ratio_inf,
    horizon_heuristic,
)
from .rng import derive_rng, map_chunks

__version__ = "0.1.0"

__all__ = [
    "BattyReport",
    "CompoundPoisson",
    "CriterionReport",
    "IDistribution",
    "LSetApprox",
    "LevyModel",
    "MgfReport",
    "ModelRejectionError",
    "OvershootTable",
    "PassageRecord",
    "PathSample",
    "PotentialMeasure",
    "RegionCoverageError",
    "RegionSpec",
    "TestFunction",
    "TrapConstruction",
    "TrapConstructionError",
    "TruncatedStable",
    "Verdict",
    "analytic_potential",
    "batty_inequality_check",
    "blackwell_equivalence_check",
    "bootstrap_outcome_consistency",
    "build_model",
    "build_transient_trap",
    "classify_ladder",
    "constant",
    "derive_rng",
    "describe",
    "dk_test",
    "erickson_maller_test",
    "estimate_I_distribution",
    "estimate_L_set",
    "estimate_overshoot_cdf",
    "estimate_potential",
    "exp_decay",
    "finiteness_diagnosis",
    "first_passage",
    "from_callable",
    "full_line",
    "half_line",
    "hitting_probability",
    "hitting_ratio_inf",
    "horizon_heuristic",
    "indicator",
    "integral_along_path",
    "integral_at_times",
    "inverse_power",
    "khasminskii_J",
    "khasminskii_exponential_check",
    "lattice_counterexample",
    "lattice_sine",
    "map_chunks",
    "mean_of",
    "potential_integral",
    "simulate_path",
    "step_function",
    "transience_probe",
    "triangle_train",
    "verify_counterexample",
]
