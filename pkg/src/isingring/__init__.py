"""Simulation and exact-verification toolkit for the 1D Ising ring under
Wolff and Glauber dynamics: exact kernels and detailed balance at small N,
log-Sobolev/Poincare certification, ergodic-average bounds, and the
covariance-spectrum contrast between the subcritical regime and the
critical point."""

from .model import (
    INFINITE,
    BRUTE_SITE_LIMIT,
    KERNEL_SITE_LIMIT,
    Configuration,
    CriticalCouplingError,
    DerivedConstants,
    GibbsMeasure,
    ModelParams,
    ResourceLimitError,
    derived_constants,
    gibbs_measure,
    gibbs_probability,
    hamiltonian,
    partition_function,
    partition_function_brute,
    susceptibility_closed_form_bound,
    susceptibility_row_sum,
    two_point_correlation,
)
from .clusters import (
    ClusterDecomposition,
    FlipSet,
    RingGraph,
    decompose,
    edge_boundary,
    is_connected,
    ring_bond,
    vertex_boundary,
)
from .randomness import RngStream
from .dynamics import (
    GLAUBER,
    WOLFF,
    InitialLaw,
    Trajectory,
    decode_states,
    encode_spins,
    ergodic_average,
    glauber_step,
    glauber_step_many,
    hitting_time_aligned,
    iter_chain,
    run_chain,
    sample_stationary,
    sample_stationary_many,
    wolff_step,
    wolff_step_many,
)
from .kernel import (
    EmpiricalCheck,
    SpectralDecomposition,
    TransitionKernel,
    build_glauber_kernel,
    build_wolff_kernel,
    check_detailed_balance,
    empirical_vs_exact,
    export_kernel_binary,
    export_kernel_csv,
    glauber_flip_probability,
    glauber_flip_probability_from_components,
    hypercube_walk_spectrum,
    read_matrix_dump,
    spectral_gap,
    symmetrize_and_decompose,
    wolff_entry,
    wolff_entry_from_boundary,
    wolff_entry_from_components,
    write_matrix_dump,
)
from .functionals import (
    InequalityReport,
    SweepResult,
    certification_sweep,
    certify_lsi,
    certify_poincare,
    character_function,
    dirichlet_form,
    entropy,
    ergodic_l2_bound,
    geometric_sum_helpers,
    indicator_function,
    lsi_constant_bound,
    poincare_constant_bound,
    variance,
)
from .spectra import (
    CellResult,
    CovarianceAccumulator,
    CovarianceRun,
    Ensemble,
    ExperimentCell,
    SpectrumReport,
    build_ensemble,
    condensation_experiment,
    correlation_matrix,
    covariance_matrix,
    eigenvalues_symmetric,
    evaluate_cell,
    exact_limit_covariance,
    gershgorin_norm,
    khat_norm_bound,
    run_condensation_cell,
    run_covariance_chain,
    spectrum_report,
    subcritical_norm_bound,
)

__version__ = "0.1.0"
