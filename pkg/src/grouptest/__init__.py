"""Threshold and disjunctive decoding for non-adaptive group testing.

Decide whether at most ``s`` of ``t`` elements are defective from ``N``
pooled tests, either by comparing the number of positive tests with a
threshold ``T`` or by counting the codewords covered by the response.
"""
from .bounds import (
    ExponentResult,
    binary_entropy,
    bound_disjunctive,
    bound_threshold,
    critical_rate,
    exponent_A,
    exponent_A_threshold,
    optimal_threshold_exponent,
    solve_root_y,
    table1,
)
from .codes import (
    BinaryCode,
    BinaryColumn,
    covered_count,
    covers,
    is_disjunctive_code,
    is_threshold_code,
    read_code,
    response_vector,
    weight,
    write_code,
)
from .decision import Hypothesis, disjunctive_decide, threshold_decide
from .ensemble import (
    EnsembleConfig,
    SearchReport,
    best_code_search,
    sample_constant_weight_code,
    table2_experiment,
)
from .evaluation import (
    ErrorPair,
    OrWeightProfile,
    Prior,
    binomial_prior,
    disjunctive_errors,
    max_error,
    monte_carlo_errors,
    or_weight_profile,
    threshold_errors,
    uniform_prior,
)
from .exceptions import (
    CodeFormatError,
    DegeneratePriorError,
    EnumerationCapError,
    GroupTestingError,
)

__version__ = "0.1.0"
