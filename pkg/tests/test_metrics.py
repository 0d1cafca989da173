"""Ranking metric hand cases, stable tie ranks, and the bucketed report."""

import math

import numpy as np
import pytest

from bridgerec.data import SplitView
from bridgerec.errors import ContractError
from bridgerec.metrics import (
    EvalReport,
    UserResult,
    bucket_report,
    hr_at_k,
    ndcg_at_k,
    popular_items,
    ranks_from_scores,
)

RANKED = [7, 3, 9, 1, 4, 2]


class TestHandCases:
    # target at rank 3 of RANKED
    def test_hr_hit(self):
        assert hr_at_k(RANKED, 9, 3) == 1.0
        assert hr_at_k(RANKED, 9, 5) == 1.0

    def test_hr_miss(self):
        assert hr_at_k(RANKED, 9, 2) == 0.0
        assert hr_at_k(RANKED, 100, 6) == 0.0

    def test_ndcg_rank_three(self):
        assert ndcg_at_k(RANKED, 9, 3) == pytest.approx(1.0 / math.log2(4))

    def test_ndcg_rank_one_is_one(self):
        assert ndcg_at_k(RANKED, 7, 1) == 1.0
        assert ndcg_at_k(RANKED, 7, 10) == 1.0

    def test_ndcg_miss_is_zero(self):
        assert ndcg_at_k(RANKED, 9, 2) == 0.0

    def test_duplicates_rejected(self):
        with pytest.raises(ContractError):
            hr_at_k([1, 2, 2], 1, 2)
        with pytest.raises(ContractError):
            ndcg_at_k([1, 2, 2], 1, 2)


class TestRanksFromScores:
    def test_basic(self):
        scores = np.array([[0.1, 0.9, 0.5], [3.0, 2.0, 1.0]])
        ranks = ranks_from_scores(scores, np.array([1, 2]))
        assert list(ranks) == [1, 3]

    def test_ties_resolve_to_lower_index_first(self):
        # stable descending sort keeps original order among equal scores
        scores = np.array([[1.0, 1.0, 1.0]])
        assert ranks_from_scores(scores, np.array([0]))[0] == 1
        assert ranks_from_scores(scores, np.array([2]))[0] == 3


class TestPopularItems:
    def make_split(self, prefixes):
        return SplitView(train=prefixes, valid=[0] * len(prefixes),
                         test=[0] * len(prefixes))

    def test_top_fraction_with_ceil(self):
        # V=7 -> ceil(1.4)=2 popular items
        sv = self.make_split([[0, 0, 0, 1, 1, 2]])
        pop = popular_items(sv, 7)
        assert pop == {0, 1}

    def test_count_tie_prefers_lower_id(self):
        # both items count 1; V=5 -> 1 slot; the lower id wins it
        sv = self.make_split([[2, 1]])
        assert popular_items(sv, 5) == {1}

    def test_zero_counts_fill_by_id(self):
        sv = self.make_split([[3]])
        # V=10 -> 2 slots: item 3 (count 1) then the lowest unseen id
        assert popular_items(sv, 10) == {3, 0}


class TestBucketReport:
    def test_values_are_percentages(self):
        sv = SplitView(train=[[0], [0]], valid=[1, 1], test=[1, 2])
        results = [UserResult(0, 1, 1, 1), UserResult(1, 20, 2, 1)]
        rep = bucket_report(results, sv, num_items=30, ks=(10,))
        assert rep.get("hr", 10) == pytest.approx(50.0)
        assert rep.get("ndcg", 10) == pytest.approx(50.0)  # one hit at rank 1

    def test_length_buckets(self):
        sv = SplitView(train=[[0] * 3, [0] * 8, [0] * 12],
                       valid=[0, 0, 0], test=[1, 1, 1])
        results = [UserResult(0, 1, 1, 3), UserResult(1, 1, 1, 8),
                   UserResult(2, 2, 1, 12)]
        rep = bucket_report(results, sv, num_items=5, ks=(1,))
        assert rep.bucket_sizes["short"] == 1
        assert rep.bucket_sizes["medium"] == 1
        assert rep.bucket_sizes["long"] == 1
        assert rep.get("hr", 1, "short") == 100.0
        assert rep.get("hr", 1, "long") == 0.0

    def test_popularity_buckets_partition_users(self):
        sv = SplitView(train=[[0, 0, 0, 1]], valid=[0], test=[0])
        # V=10 -> 2 popular slots {0,1}; targets 0 popular, 5 longtail
        results = [UserResult(0, 1, 0, 4), UserResult(1, 1, 5, 4)]
        rep = bucket_report(results, sv, num_items=10, ks=(1,))
        assert rep.bucket_sizes["popular"] == 1
        assert rep.bucket_sizes["longtail"] == 1

    def test_csv_shape(self):
        sv = SplitView(train=[[0, 1, 2]], valid=[1], test=[2])
        rep = bucket_report([UserResult(0, 1, 2, 3)], sv, num_items=4)
        text = rep.to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == "metric,k,bucket,value"
        # ks=(5,10) x buckets {all, popular-or-longtail, short} x {hr,ndcg}
        assert all(len(l.split(",")) == 4 for l in lines[1:])

    def test_csv_writes_file(self, tmp_path):
        rep = EvalReport(values={("hr", 10, "all"): 12.5}, bucket_sizes={"all": 1})
        p = tmp_path / "rep.csv"
        text = rep.to_csv(p)
        assert p.read_text() == text
        assert "hr,10,all,12.5" in text
