"""Balanced random walks in random environments.

Simulation and numerical verification tooling for nearest-neighbor
walks whose site weights satisfy w(z, e) = w(z, -e): quenched walks and
rescaled-walk statistics, discrete Dirichlet problems and harmonic
measure, quantitative homogenization against Sigma-harmonic
polynomials, directed-percolation sink structure, and empirical
Harnack/oscillation constants.
"""

from .env import (
    Environment,
    EnvironmentLaw,
    LatticeBox,
    constant_environment,
    load_environment,
    make_law,
    sample_environment,
    save_environment,
    validate_environment,
)
from .walk import (
    CovarianceEstimate,
    RescaledTimes,
    SigmaEstimate,
    T1Statistics,
    Trajectory,
    covariance_estimate,
    estimate_sigma,
    exact_walk_distribution,
    rescaled_times,
    run_walk,
    t1_statistics,
)
from .dirichlet import (
    ExitDistribution,
    ExposedSet,
    HarmonicSolution,
    LatticeDomain,
    apply_generator,
    box_sites,
    check_max_principle,
    discrete_ball,
    domain_from_sites,
    exposed_points,
    harmonic_measure,
    rescaled_generator,
    solve_dirichlet,
    widened_boundary,
)
from .homog import (
    ArcCap,
    CapPartition,
    HemisphereCap,
    SigmaHarmonicFunction,
    SpherePartition,
    bm_exit_distribution,
    bm_exit_probability,
    exit_law_discrepancy,
    homogenization_error,
    sigma_harmonic_polynomial,
    symmetry_exact_sigma,
)
from .perc import (
    DirectedLatticeGraph,
    SinkDecomposition,
    StairStructure,
    Tadpole,
    build_digraph,
    directed_distance,
    distance_tail,
    es_stair,
    find_sinks,
    holes_are_rectangles,
    reach_outside_sink_tail,
    sink_stats,
    tadpole,
)
from .harnack import (
    BasicCouplingResult,
    HarnackMeasurement,
    OscillationMeasurement,
    basic_coupling,
    classical_harnack_constant,
    harnack_ratio,
    oscillation_constant,
)

__version__ = "0.1.0"
