"""Execution-matrix rewards, best-of-N selection, and a Monte Carlo lab for
co-evolving code and unit-test generators."""

from .core import (
    CandidateRecord,
    CorrectnessVector,
    ExecutionMatrix,
    KIND_CODE,
    KIND_TEST,
    Task,
    TestCase,
    correctness_vector,
    submatrix,
)
from .gateway import (
    ProviderConfig,
    SamplingConfig,
    generate,
    render_code_prompt,
    render_test_prompt,
)
from .harness import RunOutcome, RunSpec, build_matrix, default_python_spec, judge, run_one
from .parsing import (
    ParseFailure,
    ParseOutcome,
    extract_code,
    extract_test,
    parse_candidate,
    stdio_encode,
)
from .rewards import (
    ObjectiveSample,
    RewardSet,
    assign_group_rewards,
    code_reward,
    grpo_objective,
    length_transform,
    normalize_advantages,
    unit_test_reward,
    unit_test_reward_simple,
)
from .selection import (
    BonResult,
    bon_reward,
    code_accuracy,
    estimated_test_validity,
    grid_eval,
    select_best,
    ut_accuracy,
)
from .theory import (
    CoevolutionTrace,
    EstimatorReport,
    GenerativeProcess,
    PrecisionEstimate,
    coevolve_sim,
    estimator_check,
    expected_margin,
    hoeffding_lower_bound,
    precision_mc,
    sample_execution_matrix,
    sample_pair_rewards,
)

__version__ = "0.1.0"

__all__ = [
    "BonResult",
    "CandidateRecord",
    "CoevolutionTrace",
    "CorrectnessVector",
    "EstimatorReport",
    "ExecutionMatrix",
    "GenerativeProcess",
    "KIND_CODE",
    "KIND_TEST",
    "ObjectiveSample",
    "ParseFailure",
    "ParseOutcome",
    "PrecisionEstimate",
    "ProviderConfig",
    "RewardSet",
    "RunOutcome",
    "RunSpec",
    "SamplingConfig",
    "Task",
    "TestCase",
    "assign_group_rewards",
    "bon_reward",
    "build_matrix",
    "code_accuracy",
    "code_reward",
    "coevolve_sim",
    "correctness_vector",
    "default_python_spec",
    "estimated_test_validity",
    "estimator_check",
    "expected_margin",
    "extract_code",
    "extract_test",
    "generate",
    "grid_eval",
    "grpo_objective",
    "hoeffding_lower_bound",
    "judge",
    "length_transform",
    "normalize_advantages",
    "parse_candidate",
    "precision_mc",
    "render_code_prompt",
    "render_test_prompt",
    "run_one",
    "sample_execution_matrix",
    "sample_pair_rewards",
    "select_best",
    "stdio_encode",
    "submatrix",
    "unit_test_reward",
    "unit_test_reward_simple",
    "ut_accuracy",
]
