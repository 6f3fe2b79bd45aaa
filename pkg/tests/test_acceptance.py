"""Acceptance suite: one test group per criterion.

A PASS/FAIL line per criterion is printed in the "acceptance criteria"
section of the pytest terminal summary (see ``conftest.py``).
"""

import itertools
import time
from fractions import Fraction
from importlib import resources
from math import comb, floor

import numpy as np
import pytest

from randtest.cli import main
from randtest.engine import (
    attainable_alphas,
    group_invariance_test,
    group_invariance_test_unsafe,
    min_pvalue,
    randomization_pvalue,
    randomization_test,
)
from randtest.groups import (
    balanced_permutations,
    check_group,
    full_permutation_group,
    sign_flip_group,
)
from randtest.ltt import ltt_count_distribution, ltt_level_table, ltt_run
from randtest.powersim import SimConfig, simulate
from randtest.schemes import (
    bernoulli_scheme,
    covariate_balanced_scheme,
    forced_balance_scheme,
    ltt_scheme,
)
from randtest.statistics import StatisticSpec, apply_transformation

CENTERED = StatisticSpec("centered-diff")


# ---------------------------------------------------------------------------
# 1. tea-tasting exactness


@pytest.mark.criterion(1, "LTT exactness")
def test_ltt_exactness():
    start = time.perf_counter()
    assert ltt_count_distribution(4) == [1, 16, 36, 16, 1]
    table = ltt_level_table(4)
    assert table[4] == Fraction(1, 70)
    assert table[3] == Fraction(17, 70)
    report = ltt_run("11110000", "11110000", Fraction(1, 70))
    assert report.p_value == Fraction(1, 70) and report.reject
    assert ltt_run("11110000", "11101000", 0.05).p_value == Fraction(17, 70)
    levels = attainable_alphas(ltt_scheme(4), "fisher-match", "11110000")
    assert levels == [Fraction(1, 70), Fraction(17, 70), Fraction(53, 70), Fraction(69, 70), Fraction(1)]
    assert time.perf_counter() - start < 1.0


# ---------------------------------------------------------------------------
# 2. resolution of each design


@pytest.mark.criterion(2, "resolution counts")
@pytest.mark.parametrize(
    "scheme, r",
    [
        (forced_balance_scheme(8), 70),
        (bernoulli_scheme(8), 256),
        (bernoulli_scheme(8, exclude_constants=True), 254),
        (covariate_balanced_scheme(8, "11110000"), 70),
    ],
    ids=["forced-balance", "bernoulli", "bernoulli-nc", "covariate-uniform"],
)
def test_resolution_counts(scheme, r):
    assert scheme.size == r == len(scheme.patterns)
    assert min_pvalue(scheme) == Fraction(1, r)


@pytest.mark.criterion(2, "resolution counts")
def test_covariate_count_is_vandermonde_sum():
    assert sum(comb(4, l) * comb(4, 4 - l) for l in range(5)) == 70


# ---------------------------------------------------------------------------
# 3. size/power table for n = 8

TABLE_ALPHAS = ["1/254", "0.005", "0.01", "0.02", "0.05"]
REFERENCE = {
    "forced-balance": {"size": [0, 0, 0, None, None], "power": [0, 0, 0, 0.9011, 0.9725]},
    "bernoulli-nc": {"size": [0.0034, 0.0034, 0.0076, 0.0190, 0.0464], "power": [0.5443, 0.5443, 0.7027, 0.8436, 0.9316]},
}


@pytest.fixture(scope="module")
def table_and_runtime():
    path = resources.files("randtest") / "data" / "paper.toml"
    config = SimConfig.from_file(path)
    assert (config.n, config.effect, config.replications) == (8, 2.0, 10_000)
    start = time.perf_counter()
    table = simulate(config, workers=1)
    return table, time.perf_counter() - start


@pytest.mark.criterion(3, "n=8 size and power table")
class TestSizePowerTable:
    def test_runtime(self, table_and_runtime):
        assert table_and_runtime[1] < 60

    def test_bernoulli_nc_size_at_resolution(self, table_and_runtime):
        table, _ = table_and_runtime
        assert abs(table.lookup("bernoulli-nc", "1/254").size - 1 / 254) <= 0.004

    @pytest.mark.parametrize("i", range(5))
    def test_bernoulli_nc(self, table_and_runtime, i):
        table, _ = table_and_runtime
        row = table.lookup("bernoulli-nc", TABLE_ALPHAS[i])
        assert abs(row.size - REFERENCE["bernoulli-nc"]["size"][i]) <= 0.006
        assert abs(row.power - REFERENCE["bernoulli-nc"]["power"][i]) <= 0.03

    @pytest.mark.parametrize("i", range(5))
    def test_forced_balance(self, table_and_runtime, i):
        table, _ = table_and_runtime
        row = table.lookup("forced-balance", TABLE_ALPHAS[i])
        assert abs(row.power - REFERENCE["forced-balance"]["power"][i]) <= 0.03
        if Fraction(TABLE_ALPHAS[i]) < Fraction(1, 70):
            assert row.size == 0 and row.power == 0
        else:
            assert row.size <= float(Fraction(TABLE_ALPHAS[i])) + 3 * (0.05 * 0.95 / 10_000) ** 0.5


# ---------------------------------------------------------------------------
# 4. exact uniformity of p-values over the design


@pytest.mark.criterion(4, "p-value uniformity")
@pytest.mark.parametrize(
    "scheme", [forced_balance_scheme(6), bernoulli_scheme(5, exclude_constants=True)], ids=lambda s: s.label
)
def test_pvalue_uniformity(scheme):
    start = time.perf_counter()
    y = np.random.default_rng(99).standard_normal(scheme.n)
    r = scheme.size
    assert r in (20, 30)
    pvalues = sorted(randomization_pvalue(scheme, w, y, CENTERED) for w in scheme.patterns)
    assert pvalues == [Fraction(j, r) for j in range(1, r + 1)]
    assert time.perf_counter() - start < 1.0


# ---------------------------------------------------------------------------
# 5. threshold rule agrees with the p-value rule


@pytest.mark.criterion(5, "threshold/p-value consistency")
def test_threshold_pvalue_consistency():
    rng = np.random.default_rng(5)
    designs = [forced_balance_scheme(8), bernoulli_scheme(8, exclude_constants=True), forced_balance_scheme(6)]
    checked = 0
    while checked < 100:
        scheme = designs[checked % len(designs)]
        y = rng.standard_normal(scheme.n)
        values = CENTERED(scheme.patterns, y)
        if np.unique(values).size != values.size:
            continue
        w = scheme.patterns[rng.integers(scheme.size)]
        alpha = Fraction(int(rng.integers(1, 1000)), 1000)
        report = randomization_test(scheme, w, y, CENTERED, alpha)
        r = scheme.size
        assert report.reject == (report.p_value * r <= floor(alpha * r))
        checked += 1


# ---------------------------------------------------------------------------
# 6. group validation and exact invariance of the threshold


@pytest.mark.criterion(6, "group validator")
@pytest.mark.parametrize(
    "group",
    [full_permutation_group(n) for n in range(1, 6)] + [sign_flip_group(n) for n in range(1, 11)],
    ids=lambda g: g.label,
)
def test_groups_pass(group):
    assert check_group(group).is_group


@pytest.mark.criterion(6, "group validator")
@pytest.mark.parametrize("sizes", [(2, 2), (4, 4)])
def test_balanced_permutations_fail_with_verified_witnesses(sizes):
    group = balanced_permutations(*sizes)
    report = check_group(group)
    assert not report.is_group and not report.has_identity
    assert report.closure_witnesses
    for g, h in report.closure_witnesses:
        assert g in group and h in group
        assert group.compose(np.array(g), np.array(h)) not in group


@pytest.mark.criterion(6, "group validator")
@pytest.mark.parametrize(
    "group", [full_permutation_group(n) for n in (3, 4, 5, 6)] + [sign_flip_group(n) for n in (3, 4, 5, 6)], ids=lambda g: g.label
)
def test_threshold_invariant_under_group(group):
    # integer data keeps every statistic exactly representable
    rng = np.random.default_rng(group.n)
    x = rng.integers(-9, 10, size=group.n).astype(float)
    base = group_invariance_test(group, x, "diff-sums", 0.1).threshold_value
    for g in group.elements:
        assert group_invariance_test(group, apply_transformation(g, x), "diff-sums", 0.1).threshold_value == base


# ---------------------------------------------------------------------------
# 7. non-group transformation sets are anti-conservative

PATHOLOGY_REPS = 10_000


@pytest.mark.criterion(7, "pathology demonstration")
def test_pathology():
    rng = np.random.default_rng(123)
    unsafe_set = balanced_permutations(4, 4)
    full = full_permutation_group(8)
    unsafe = safe = 0
    for _ in range(PATHOLOGY_REPS):
        x = rng.standard_normal(8)
        unsafe += group_invariance_test_unsafe(unsafe_set, x, "abs-mean-diff", 0.05).reject
        safe += group_invariance_test(full, x, "abs-mean-diff", 0.05).reject
    se = (0.05 * 0.95 / PATHOLOGY_REPS) ** 0.5
    print(f"pathology: unsafe size {unsafe / PATHOLOGY_REPS:.4f}, safe size {safe / PATHOLOGY_REPS:.4f}")
    assert unsafe / PATHOLOGY_REPS > 0.05 + 3 * se
    assert safe / PATHOLOGY_REPS <= 0.05 + 3 * se


# ---------------------------------------------------------------------------
# 8. determinism of the power command


@pytest.mark.criterion(8, "determinism")
def test_power_csv_byte_identical(tmp_path):
    outputs = []
    for i, workers in enumerate(["1", "1", "4"]):
        out = tmp_path / f"run{i}.csv"
        argv = ["power", "--config", "paper.toml", "--seed", "1", "--reps", "3000", "--workers", workers, "--out", str(out)]
        assert main(argv) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
