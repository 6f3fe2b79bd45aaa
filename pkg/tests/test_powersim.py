import json
from fractions import Fraction

import numpy as np
import pytest

from randtest.exceptions import EnumerationError
from randtest.powersim import (
    PAPER_ALPHAS,
    SimConfig,
    SimTable,
    _chunk_counts,
    alpha_label,
    resolution_report,
    simulate,
    with_overrides,
)
from randtest.schemes import bernoulli_scheme, forced_balance_scheme


@pytest.fixture(scope="module")
def small_table():
    return simulate(SimConfig(replications=1500, seed=42))


class TestConfig:
    def test_defaults(self):
        c = SimConfig()
        assert c.n == 8 and c.alpha_grid == ("1/254", "0.005", "0.01", "0.02", "0.05")
        assert c.alphas[0] == Fraction(1, 254)

    def test_alpha_labels(self):
        assert alpha_label(Fraction(1, 20)) == "0.05"
        assert alpha_label(Fraction(1, 254)) == "1/254"
        assert alpha_label(Fraction(1, 200)) == "0.005"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"replications": 0},
            {"null_model": "cauchy"},
            {"alpha_grid": ("0.05", "0.01")},
            {"alpha_grid": ()},
            {"seed": -1},
            {"statistic": "t-stat"},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SimConfig(**kwargs)

    def test_from_dict_table_and_overrides(self):
        c = SimConfig.from_dict({"simulation": {"n": 6, "seed": 3}}, seed=9, n=None)
        assert c.n == 6 and c.seed == 9

    def test_unknown_keys(self):
        with pytest.raises(ValueError, match="unknown"):
            SimConfig.from_dict({"bogus": 1})

    def test_from_files(self, tmp_path):
        toml = tmp_path / "c.toml"
        toml.write_text('[simulation]\nn = 6\nalpha_grid = ["0.05", "0.1"]\n')
        assert SimConfig.from_file(toml).alphas == [Fraction(1, 20), Fraction(1, 10)]
        js = tmp_path / "c.json"
        js.write_text(json.dumps({"n": 4, "replications": 10}))
        assert SimConfig.from_file(js, replications=20).replications == 20

    def test_with_overrides(self):
        assert with_overrides(SimConfig(), seed=5, n=None).seed == 5


class TestSimulate:
    def test_layout(self, small_table):
        assert len(small_table.rows) == 2 * len(PAPER_ALPHAS)
        assert {r.test for r in small_table.rows} == {"forced-balance", "bernoulli-nc"}

    def test_resolution_plateau(self, small_table):
        # floor(alpha R) is 1 for both 1/254 and 0.005 at R = 254, so the rows coincide
        a = small_table.lookup("bernoulli-nc", "1/254")
        b = small_table.lookup("bernoulli-nc", "0.005")
        assert (a.size, a.power) == (b.size, b.power)

    def test_forced_balance_cannot_reject_below_one_over_70(self, small_table):
        for alpha in ("1/254", "0.005", "0.01"):
            row = small_table.lookup("forced-balance", alpha)
            assert row.size == 0 and row.power == 0

    def test_alpha_004_forced_balance(self):
        table = simulate(SimConfig(replications=200, alpha_grid=("0.004", "0.05"), seed=1))
        assert table.lookup("forced-balance", "0.004").power == 0

    def test_power_nondecreasing_in_alpha(self, small_table):
        for test in ("forced-balance", "bernoulli-nc"):
            powers = [small_table.lookup(test, a).power for a in PAPER_ALPHAS]
            assert powers == sorted(powers)

    def test_effect_zero_power_is_size_like(self):
        table = simulate(SimConfig(replications=2000, effect=0.0, seed=7, alpha_grid=("0.05",)))
        for row in table.rows:
            assert row.power <= 0.05 + 3 * (0.05 * 0.95 / 2000) ** 0.5

    def test_standard_errors(self, small_table):
        row = small_table.lookup("bernoulli-nc", "0.05")
        assert row.se_power == pytest.approx((row.power * (1 - row.power) / 1500) ** 0.5)

    def test_deterministic(self):
        c = SimConfig(replications=300, seed=11)
        assert simulate(c).to_csv() == simulate(c).to_csv()

    def test_seed_changes_output(self):
        assert simulate(SimConfig(replications=300, seed=1)).to_csv() != simulate(
            SimConfig(replications=300, seed=2)
        ).to_csv()

    def test_replication_streams_independent_of_chunking(self):
        c = SimConfig(replications=900, seed=5)
        whole = _chunk_counts((c, 1, 1, 0, 900))
        pieces = [_chunk_counts((c, 1, 1, a, b)) for a, b in [(0, 250), (250, 251), (251, 900)]]
        assert np.array_equal(whole, np.concatenate(pieces))

    def test_workers_identical(self):
        c = SimConfig(replications=2200, seed=3)
        assert simulate(c, workers=1).to_csv() == simulate(c, workers=2).to_csv()

    def test_too_large(self):
        with pytest.raises(EnumerationError):
            simulate(SimConfig(n=30, replications=10))

    def test_weighted_refused(self):
        with pytest.raises(ValueError, match="weighted"):
            simulate(SimConfig(n=4, scheme_b="covariate-sequential", replications=10))

    def test_csv_and_json(self, small_table):
        lines = small_table.to_csv().splitlines()
        assert lines[0] == "test,alpha,size,power,se_size,se_power"
        assert len(lines) == 11
        back = SimTable.from_dict(json.loads(small_table.to_json()))
        assert back.rows == small_table.rows


def test_resolution_report():
    r = resolution_report(bernoulli_scheme(8, exclude_constants=True))
    assert r.size == 254 and r.min_pvalue == Fraction(1, 254) and r.spacing == Fraction(1, 254)
    assert resolution_report(forced_balance_scheme(8)).to_dict()["min_pvalue"] == {"num": 1, "den": 70}
    with pytest.raises(EnumerationError):
        resolution_report(forced_balance_scheme(40))
