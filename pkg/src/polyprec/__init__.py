"""Matrix-free convex optimization with polynomial preconditioning."""

from .operators import (
    DenseOperator,
    GramOperator,
    MatvecOperator,
    PolynomialCoefficients,
    SymmetricOperator,
    apply_polynomial,
    b_norm_sq,
    elementary_symmetric,
    exact_traces,
    jacobi_eigh,
    spectral_decomposition,
    stochastic_trace,
    stochastic_traces,
)
from .preconditioners import (
    ChebyshevPreconditioner,
    IdentityPreconditioner,
    IndefinitePreconditionerError,
    MatrixPreconditioner,
    PolynomialPreconditioner,
    Preconditioner,
    QualityBounds,
    build_from_descriptor,
    build_sympoly,
    chebyshev_T,
    chebyshev_polynomial,
    chebyshev_preconditioner,
    compute_alpha_beta,
    cond_from_gamma,
    cutting_polynomial,
    cutting_preconditioner,
    gamma_of_polynomial,
    gamma_of_preconditioner,
    inverse_preconditioner,
    sympoly_coefficients,
    xi_tau,
)
from .problems import (
    CompositeObjective,
    CompositePart,
    HuberLoss,
    LogisticLoss,
    RegressionData,
    gradient_step,
    huber,
    logistic,
    make_quadratic,
    make_regression,
    validate_bounds,
)
from .solvers import (
    FGMState,
    InitialGuess,
    RunResult,
    SolverConfig,
    fgm_step,
    initial_guess_M,
    quadratic_growth_predicate,
    run_adaptive_fgm,
    run_adaptive_gm,
    run_fgm,
    run_gm,
    solve_coefficient_equation,
)
from .krylov import GramSystem, KrylovStepInfo, build_gram, krylov_step, run_krylov_gm, solve_gram
from .diagnostics import (
    CheckReport,
    EnvelopeCheck,
    fgm_envelopes,
    gm_envelopes,
    krylov_envelope,
    proposition_bounds,
    run_verification_suite,
    verify_adjugate,
    verify_lemma_spec,
    verify_sandwich,
    volume_sampling_expectation,
    xi_table,
)
from .datasets import (
    DatasetMatrix,
    SyntheticSpectrumSpec,
    logistic_from_dataset,
    parse_libsvm,
    standardize_columns,
    synth_classification_dataset,
    synth_regression,
    synthetic_design,
    write_libsvm,
)
from .experiments import (
    ExperimentConfig,
    merge_plotdata,
    parse_config_file,
    reference_optimum,
    run_bench,
    run_experiment,
)

__version__ = "0.1.0"
