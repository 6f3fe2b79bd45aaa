"""Exact and Monte Carlo randomization tests and group invariance tests."""

from .engine import (
    TestReport,
    attainable_alphas,
    group_invariance_test,
    group_invariance_test_unsafe,
    min_pvalue,
    monte_carlo_pvalue,
    randomization_pvalue,
    randomization_test,
)
from .exceptions import (
    DesignViolationError,
    EmptySchemeError,
    EnumerationError,
    GroupStructureError,
    RandTestError,
)
from .groups import (
    GroupCheckReport,
    TransformationGroup,
    balanced_permutations,
    check_group,
    cyclic_group,
    full_permutation_group,
    sign_flip_group,
)
from .ltt import ltt_count_distribution, ltt_run, ltt_run_free_guess
from .powersim import SimConfig, SimTable, resolution_report, simulate
from .schemes import (
    RandomizationScheme,
    bernoulli_scheme,
    covariate_balanced_scheme,
    custom_scheme,
    forced_balance_scheme,
    ltt_scheme,
    sample_pattern,
)
from .statistics import (
    StatisticSpec,
    apply_transformation,
    stat_abs_mean_diff,
    stat_centered_diff,
    stat_diff_sums,
    stat_fisher_match,
)

__version__ = "0.1.0"
