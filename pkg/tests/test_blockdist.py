import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mamsim.blockdist import (
    BlockRange,
    block_range,
    block_ranges,
    compute_read_plan,
    compute_send_plan,
    oracle_plan,
    read_volume_matrix,
    send_volume_matrix,
)
from mamsim.errors import InvalidArgumentError


def R(ini, end):
    return BlockRange(ini, end)


class TestBlockRange:
    @pytest.mark.parametrize(
        "rank, p, n, expected",
        [(0, 4, 10, R(0, 3)), (2, 4, 10, R(6, 8)), (0, 1, 7, R(0, 7)), (3, 4, 2, R(2, 2))],
    )
    def test_remainder_first(self, rank, p, n, expected):
        assert block_range(rank, p, n) == expected

    @pytest.mark.parametrize("rank, p", [(-1, 4), (4, 4), (0, 0)])
    def test_out_of_range(self, rank, p):
        with pytest.raises(InvalidArgumentError):
            block_range(rank, p, 10)

    def test_invalid_range(self):
        with pytest.raises(InvalidArgumentError):
            BlockRange(5, 3)

    @given(p=st.integers(1, 64), n=st.integers(0, 10**6))
    def test_partition(self, p, n):
        ranges = block_ranges(p, n)
        assert ranges[0].ini == 0 and ranges[-1].end == n
        assert all(a.end == b.ini for a, b in zip(ranges, ranges[1:]))
        sizes = [r.size for r in ranges]
        assert max(sizes) - min(sizes) <= 1
        assert sizes == sorted(sizes, reverse=True)


class TestReadPlan:
    def test_partial_first_source(self):
        plan = compute_read_plan(R(2, 4), [R(0, 4), R(4, 8)])
        assert plan.counts == (2, 0)
        assert plan.displs == (0, 2, 2)
        assert (plan.first_source, plan.last_source, plan.first_index) == (0, 1, 2)

    def test_middle_source(self):
        plan = compute_read_plan(R(3, 6), [R(0, 3), R(3, 6), R(6, 9)])
        assert plan.counts == (0, 3, 0)
        assert (plan.first_source, plan.last_source, plan.first_index) == (1, 2, 0)

    def test_identity(self):
        sources = block_ranges(4, 100)
        plan = compute_read_plan(sources[2], sources)
        assert plan.counts == (0, 0, 25, 0)
        assert plan.first_index == 0
        assert plan.epochs == 1

    def test_last_source_defaults_to_source_count(self):
        plan = compute_read_plan(R(6, 9), [R(0, 3), R(3, 6), R(6, 9)])
        assert plan.last_source == 3

    def test_reads_use_first_index_once(self):
        plan = compute_read_plan(R(1, 7), [R(0, 3), R(3, 6), R(6, 9)])
        assert list(plan.reads()) == [(0, 1, 0, 2), (1, 0, 2, 3), (2, 0, 5, 1)]

    def test_empty_range(self):
        plan = compute_read_plan(R(0, 0), block_ranges(3, 9))
        assert plan.counts == (0, 0, 0)
        assert (plan.first_source, plan.last_source, plan.total) == (0, 0, 0)
        assert oracle_plan(R(0, 0), block_ranges(3, 9)) == plan

    def test_non_contiguous_sources(self):
        with pytest.raises(InvalidArgumentError):
            compute_read_plan(R(0, 2), [R(0, 3), R(4, 8)])
        with pytest.raises(InvalidArgumentError):
            compute_read_plan(R(0, 2), [R(1, 3), R(3, 8)])

    def test_range_past_the_end(self):
        with pytest.raises(InvalidArgumentError):
            compute_read_plan(R(4, 10), [R(0, 4), R(4, 8)])

    @pytest.mark.parametrize(
        "mine, sources",
        [(R(2, 4), [R(0, 4), R(4, 8)]), (R(3, 6), [R(0, 3), R(3, 6), R(6, 9)]), (R(0, 8), [R(0, 4), R(4, 8)])],
    )
    def test_matches_oracle_on_examples(self, mine, sources):
        assert compute_read_plan(mine, sources) == oracle_plan(mine, sources)

    @settings(max_examples=1000, deadline=None)
    @given(n=st.integers(0, 10**6), ns=st.integers(1, 64), nd=st.integers(1, 64), data=st.data())
    def test_oracle_equivalence(self, n, ns, nd, data):
        rank = data.draw(st.integers(0, nd - 1))
        mine = block_range(rank, nd, n)
        sources = block_ranges(ns, n)
        plan = compute_read_plan(mine, sources)
        assert plan == oracle_plan(mine, sources)
        assert plan.total == mine.size
        assert all(b - a == c for a, b, c in zip(plan.displs, plan.displs[1:], plan.counts))
        nonzero = [i for i, c in enumerate(plan.counts) if c]
        if nonzero:
            assert nonzero == list(range(plan.first_source, plan.last_source))
            assert plan.first_index < sources[plan.first_source].size


class TestSendPlan:
    def test_example(self):
        plan = compute_send_plan(R(0, 4), [R(0, 2), R(2, 4), R(4, 6)])
        assert plan.counts == (2, 2, 0)
        assert plan.displs == (0, 2, 0)

    def test_single_source_covers_all_drains(self):
        drains = block_ranges(5, 23)
        plan = compute_send_plan(R(0, 23), drains)
        assert plan.counts == tuple(d.size for d in drains)
        assert plan.total == 23

    def test_same_range(self):
        drains = block_ranges(4, 40)
        assert compute_send_plan(drains[1], drains).counts == (0, 10, 0, 0)

    @settings(max_examples=200, deadline=None)
    @given(n=st.integers(0, 5000), ns=st.integers(1, 64), nd=st.integers(1, 64))
    def test_transpose(self, n, ns, nd):
        reads = read_volume_matrix(ns, nd, n)
        sends = send_volume_matrix(ns, nd, n)
        assert reads.shape == (nd, ns)
        np.testing.assert_array_equal(sends, reads.T)
        assert int(reads.sum()) == n
