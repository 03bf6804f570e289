"""lpgrow: growing sparse power-term networks that recover multivariate
Laurent polynomial equations (structure and coefficients) from data."""

from .bench import (
    SuiteEntry,
    SuiteSpec,
    TrialResult,
    complexity_binning,
    load_suite,
    r_squared,
    run_suite,
    save_suite,
    solution_rate,
    summarize,
    write_results_csv,
    write_summary_json,
)
from .data import (
    Dataset,
    Provenance,
    SamplingSpec,
    add_irrelevant,
    add_noise,
    generate,
    load_csv,
    save_csv,
    split,
)
from .ensemble import (
    EnsembleReport,
    LpVerdict,
    SecondaryAdapter,
    SecondaryResult,
    classify_lp,
    run_ensemble,
    snap_integer_exponents,
)
from .network import (
    NetworkParams,
    OptimizerState,
    PTABlockParams,
    adam_step,
    backward,
    extract_equation,
    forward,
    forward_many,
    grow,
    round_params,
    snap_to_grid,
)
from .poly import (
    ComplexityBreakdown,
    EquationSyntaxError,
    LaurentPolynomial,
    LaurentTerm,
    SearchSpaceResult,
    canonicalize,
    complexity,
    equals_exact,
    evaluate,
    evaluate_many,
    parse_equation,
    print_equation,
    search_space,
)
from .train import (
    EquationCandidate,
    FitReport,
    TrainConfig,
    derive_instance_seed,
    fit,
    regularization_schedule,
    selection_key,
    train_instance,
)

__version__ = "0.1.0"

__all__ = [
    "ComplexityBreakdown",
    "Dataset",
    "EnsembleReport",
    "EquationCandidate",
    "EquationSyntaxError",
    "FitReport",
    "LaurentPolynomial",
    "LaurentTerm",
    "LpVerdict",
    "NetworkParams",
    "OptimizerState",
    "PTABlockParams",
    "Provenance",
    "SamplingSpec",
    "SearchSpaceResult",
    "SecondaryAdapter",
    "SecondaryResult",
    "SuiteEntry",
    "SuiteSpec",
    "TrainConfig",
    "TrialResult",
    "adam_step",
    "add_irrelevant",
    "add_noise",
    "backward",
    "canonicalize",
    "classify_lp",
    "complexity",
    "complexity_binning",
    "derive_instance_seed",
    "equals_exact",
    "evaluate",
    "evaluate_many",
    "extract_equation",
    "fit",
    "forward",
    "forward_many",
    "generate",
    "grow",
    "load_csv",
    "load_suite",
    "parse_equation",
    "print_equation",
    "r_squared",
    "regularization_schedule",
    "round_params",
    "run_ensemble",
    "run_suite",
    "save_csv",
    "save_suite",
    "search_space",
    "selection_key",
    "snap_integer_exponents",
    "snap_to_grid",
    "solution_rate",
    "split",
    "summarize",
    "train_instance",
    "write_results_csv",
    "write_summary_json",
]
