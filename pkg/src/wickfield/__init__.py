"""Exact and numerical Wick calculus for Gaussian fields.

Moments and joint cumulants of Wick-ordered observables evaluated as
multigraph sums with enumeration-backed multiplicities; squared-modulus
statistics of circular complex vectors through permanents; fermionic
Gaussian states through Grassmann-Berezin calculus with the cumulant
duality between the families; lattice Green's functions and their
continuum scaling limits.
"""

from .complexboson import (
    bijection_pairing_sum,
    complex_cumulant,
    complex_moment,
    delta_bar_report,
    permanent,
    replicated_matrix,
)
from .covariance import (
    LatticeDomain,
    build_field,
    continuum_green_box,
    dgff_green_submatrix,
    validate_spd,
)
from .errors import CrossCheckError, ValidationError
from .fermion import (
    FermionicState,
    GrassmannPolynomial,
    berezin_integrate,
    duality_check_r1,
    fermionic_cumulant,
    fermionic_expectation,
    gaussian_berezin_det_check,
    grassmann_exp,
    grassmann_mul,
    r_power_minor_condition,
)
from .montecarlo import (
    MonteCarloEstimate,
    SampleConfig,
    estimate_complex_moment,
    estimate_wick_moment,
    sample_gaussian,
)
from .multigraph import (
    Multigraph,
    delta_bar,
    delta_paper,
    enumerate_multigraphs,
    enumerate_pairings,
    enumerate_partitions,
    multiplicity_report,
    pairing_multiplicity,
)
from .scaling import (
    ScalingSchedule,
    continuum_target,
    convergence_report,
    rescaled_kpoint,
    schedule_from_json,
)
from .wick import (
    SeriesValue,
    analytic_cumulant,
    analytic_moment,
    cumulants_to_moments,
    cyclic_cumulant,
    feynman_moment_oracle,
    generic_cumulant_function,
    hermite_wick_value,
    moments_to_cumulants,
    wick_group_moment,
    wick_power_cumulant,
    wick_power_moment,
)

__version__ = "0.1.0"

__all__ = [
    "CrossCheckError",
    "FermionicState",
    "GrassmannPolynomial",
    "LatticeDomain",
    "MonteCarloEstimate",
    "Multigraph",
    "SampleConfig",
    "ScalingSchedule",
    "SeriesValue",
    "ValidationError",
    "analytic_cumulant",
    "analytic_moment",
    "berezin_integrate",
    "bijection_pairing_sum",
    "build_field",
    "complex_cumulant",
    "complex_moment",
    "continuum_green_box",
    "continuum_target",
    "convergence_report",
    "cumulants_to_moments",
    "cyclic_cumulant",
    "delta_bar",
    "delta_bar_report",
    "delta_paper",
    "dgff_green_submatrix",
    "duality_check_r1",
    "enumerate_multigraphs",
    "enumerate_pairings",
    "enumerate_partitions",
    "estimate_complex_moment",
    "estimate_wick_moment",
    "fermionic_cumulant",
    "fermionic_expectation",
    "feynman_moment_oracle",
    "gaussian_berezin_det_check",
    "generic_cumulant_function",
    "grassmann_exp",
    "grassmann_mul",
    "hermite_wick_value",
    "moments_to_cumulants",
    "multiplicity_report",
    "pairing_multiplicity",
    "permanent",
    "r_power_minor_condition",
    "replicated_matrix",
    "rescaled_kpoint",
    "sample_gaussian",
    "schedule_from_json",
    "validate_spd",
    "wick_group_moment",
    "wick_power_cumulant",
    "wick_power_moment",
]
