import json
import math
import random

import pytest
from hypothesis import given, strategies as st

from mamsim.errors import InvalidArgumentError
from mamsim.metrics import (
    COLUMNS,
    RunRecord,
    mean,
    omega,
    summarize,
    total_time_background,
    total_time_blocking,
)
from mamsim.redist.types import Method, Strategy

nonneg = st.floats(0, 1e6, allow_nan=False)


def rec(method, strategy, ns=2, nd=4, t_redis=1.0, n_it=0, t_it_nd=0.5, normal=1.0, during=1.0):
    return RunRecord(
        method=Method(method), strategy=Strategy(strategy), ns=ns, nd=nd, t_redis=t_redis,
        t_it_normal=normal, t_it_during=during, n_it_overlapped=n_it, t_it_nd=t_it_nd,
    )


class TestOmega:
    @pytest.mark.parametrize("during, normal, expected", [(1.0, 1.0, 1.0), (5.0, 1.0, 5.0), (2.5, 0.125, 20.0)])
    def test_ratio(self, during, normal, expected):
        assert omega(during, normal) == expected

    @pytest.mark.parametrize("normal", [0.0, -1.0])
    def test_bad_baseline(self, normal):
        with pytest.raises(InvalidArgumentError):
            omega(1.0, normal)

    @given(x=st.floats(1e-9, 1e9))
    def test_self_ratio(self, x):
        assert omega(x, x) == 1.0


class TestTotals:
    def test_blocking(self):
        assert total_time_blocking(2.0, 0.5, 3) == 3.5
        assert total_time_blocking(7.25, 123.0, 0) == 7.25

    def test_background_identity(self):
        assert total_time_background(3.5) == 3.5
        assert total_time_background(0) == 0

    @pytest.mark.parametrize("args", [(-1.0, 0.5, 3), (2.0, -0.5, 3), (2.0, 0.5, -1)])
    def test_negative_blocking(self, args):
        with pytest.raises(InvalidArgumentError):
            total_time_blocking(*args)

    def test_negative_background(self):
        with pytest.raises(InvalidArgumentError):
            total_time_background(-0.1)

    def test_equal_when_redistribution_spans_min_iterations(self):
        # background redistribution lasting exactly 3 iterations of 0.5 after a 2.0 blocking copy
        assert total_time_background(2.0 + 3 * 0.5) == total_time_blocking(2.0, 0.5, 3)

    @given(a=nonneg, b=nonneg, c=nonneg, d=nonneg)
    def test_monotone(self, a, b, c, d):
        base = total_time_blocking(a, b, c)
        assert total_time_blocking(a + d, b, c) >= base
        assert total_time_blocking(a, b + d, c) >= base
        assert total_time_blocking(a, b, c + d) >= base


class TestRunRecord:
    def test_blocking_cannot_overlap(self):
        with pytest.raises(InvalidArgumentError):
            rec("col", "blocking", n_it=1)

    def test_negative_redistribution_time(self):
        with pytest.raises(InvalidArgumentError):
            rec("col", "nonblocking", t_redis=-1.0)

    def test_omega_property(self):
        assert rec("col", "threading", n_it=2, normal=0.125, during=2.5).omega == 20.0

    def test_mean_keeps_identical_samples(self):
        assert mean([0.1, 0.1, 0.1]) == 0.1
        assert mean([1.0, 2.0]) == 1.5


class TestSummarize:
    def fixture(self):
        return [
            rec("col", "blocking", t_redis=2.0, t_it_nd=0.5),
            rec("col", "nonblocking", t_redis=4.0, n_it=5),
            rec("col", "wait-drains", t_redis=3.0, n_it=3),
            rec("rma-lock", "threading", t_redis=9.0, n_it=1, during=20.0),
            rec("rma-lock", "blocking", t_redis=2.5, t_it_nd=0.5),
        ]

    def test_single_record_groups(self):
        report = summarize([rec("col", "wait-drains", t_redis=1.25, n_it=2, during=1.5)])
        row = report.row(Method.COL, Strategy.WAIT_DRAINS, 2, 4)
        assert row["t_redis"] == 1.25
        assert row["omega"] == 1.5
        assert row["n_it"] == 2
        assert row["t_total_bc"] == 1.25
        assert math.isnan(row["t_total_bl"])

    def test_median(self):
        report = summarize([rec("col", "blocking", t_redis=t) for t in (1.0, 100.0, 2.0)])
        assert report.row("col", "blocking", 2, 4)["t_redis"] == 2.0
        even = summarize([rec("col", "blocking", t_redis=t) for t in (1.0, 2.0, 3.0, 10.0)])
        assert even.row("col", "blocking", 2, 4)["t_redis"] == 2.5

    def test_even_groups_average_the_middle_pair(self):
        records = [rec("rma-lock", "wait-drains", n_it=n, during=d) for n, d in ((1, 1.0), (2, 2.0))]
        row = summarize(records).row("rma-lock", "wait-drains", 2, 4)
        assert row["n_it"] == 1.5
        assert row["omega"] == 1.5
        assert row["t_redis"] == 1.0

    def test_cross_variant_minimum_excludes_rma_threading(self):
        report = summarize(self.fixture())
        assert report.row("col", "blocking", 2, 4)["t_total_bl"] == 2.0 + 0.5 * 3
        assert report.row("rma-lock", "blocking", 2, 4)["t_total_bl"] == 2.5 + 0.5 * 3
        assert report.row("rma-lock", "threading", 2, 4)["t_total_bc"] == 9.0

    def test_including_threading(self):
        report = summarize(self.fixture(), include_threading_in_min=True)
        assert report.row("col", "blocking", 2, 4)["t_total_bl"] == 2.0 + 0.5 * 1

    def test_no_background_variant_is_missing(self):
        report = summarize([rec("col", "blocking", ns=4, nd=2)])
        assert math.isnan(report.row("col", "blocking", 4, 2)["t_total_bl"])

    def test_groups_stay_per_pair(self):
        records = self.fixture() + [rec("col", "nonblocking", ns=4, nd=2, n_it=1)]
        report = summarize(records)
        assert len(report) == 6
        assert report.row("col", "blocking", 2, 4)["t_total_bl"] == 3.5

    def test_permutation_invariant(self):
        records = self.fixture() * 3
        expected = summarize(records).to_csv()
        shuffled = list(records)
        random.Random(5).shuffle(shuffled)
        assert summarize(shuffled).to_csv() == expected

    def test_csv_and_jsonl(self, tmp_path):
        report = summarize(self.fixture())
        csv_path, jsonl_path = tmp_path / "r.csv", tmp_path / "r.jsonl"
        text = report.to_csv(str(csv_path))
        assert text.splitlines()[0] == ",".join(COLUMNS)
        assert len(text.splitlines()) == 6
        assert csv_path.read_text() == text
        lines = report.to_jsonl(str(jsonl_path)).splitlines()
        assert [sorted(json.loads(line)) for line in lines] == [sorted(COLUMNS)] * 5
        assert jsonl_path.read_text().count("\n") == 5

    def test_row_order(self):
        report = summarize(list(reversed(self.fixture())))
        assert list(zip(report.table.method, report.table.strategy)) == [
            ("col", "blocking"), ("col", "nonblocking"), ("col", "wait-drains"),
            ("rma-lock", "blocking"), ("rma-lock", "threading"),
        ]

    def test_empty(self):
        assert len(summarize([])) == 0
