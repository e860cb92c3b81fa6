"""Count matrix accumulation, filtering, and top-K selection tests."""

import random
from collections import Counter

import numpy as np

from signalmerge.counts import (
    CountMatrix,
    accumulate,
    filter_min_count,
    read_scores,
    select_top_k,
    write_scores,
)
from signalmerge.measures import make_scorer, pearson
from signalmerge.textnorm import FeatureId, WordForm

from oracles import top_k_oracle

KW = WordForm("keyword", 1)


def fid(token):
    return FeatureId(KW, (token,))


class TestAccumulate:
    def test_additive(self):
        stream = [
            (0, Counter({fid("f"): 2})),
            (0, Counter({fid("f"): 1})),
            (2, Counter({fid("f"): 1})),
        ]
        matrix = accumulate(stream, 3)
        assert matrix.row(fid("f")).tolist() == [3, 0, 1]

    def test_empty_stream(self):
        assert len(accumulate([], 3)) == 0

    def test_permutation_invariance(self):
        rng = random.Random(3)
        stream = []
        for _ in range(40):
            day = rng.randrange(5)
            features = Counter(
                {fid(rng.choice("abc")): rng.randint(1, 3) for _ in range(2)}
            )
            stream.append((day, features))
        reference = accumulate(stream, 5)
        shuffled = stream[:]
        rng.shuffle(shuffled)
        other = accumulate(shuffled, 5)
        assert reference.feature_ids() == other.feature_ids()
        for f in reference.feature_ids():
            assert reference.row(f).tolist() == other.row(f).tolist()

    def test_matches_naive_two_pass_counter(self):
        rng = random.Random(9)
        tweets = []
        for _ in range(20):
            day = rng.randrange(4)
            tokens = [rng.choice("pqr") for _ in range(rng.randint(1, 5))]
            tweets.append((day, tokens))
        stream = ((day, Counter(fid(t) for t in tokens)) for day, tokens in tweets)
        matrix = accumulate(stream, 4)
        # independent oracle: flat scan per (feature, day)
        for token in "pqr":
            for day in range(4):
                expected = sum(
                    toks.count(token) for d, toks in tweets if d == day
                )
                observed = matrix.row(fid(token))[day] if fid(token) in matrix else 0
                assert observed == expected


class TestFilterMinCount:
    def test_below_threshold_dropped(self):
        m = CountMatrix(3)
        m.set_row(fid("a"), [4, 4, 4])
        assert len(filter_min_count(m, 5)) == 0

    def test_single_qualifying_day_kept(self):
        m = CountMatrix(3)
        m.set_row(fid("a"), [0, 5, 0])
        assert fid("a") in filter_min_count(m, 5)

    def test_survivors_match_brute_force(self):
        rng = np.random.default_rng(17)
        m = CountMatrix(12)
        rows = {}
        for i in range(1000):
            f = fid(f"w{i:04d}")
            values = rng.poisson(1.0, size=12)
            m.set_row(f, values)
            rows[f] = values
        survivors = set(filter_min_count(m, 5).feature_ids())
        expected = {f for f, v in rows.items() if max(v) >= 5}
        assert survivors == expected

    def test_idempotent(self):
        rng = np.random.default_rng(23)
        m = CountMatrix(6)
        for i in range(50):
            m.set_row(fid(f"w{i:02d}"), rng.poisson(2.0, size=6))
        once = filter_min_count(m, 4)
        twice = filter_min_count(once, 4)
        assert once.feature_ids() == twice.feature_ids()


class TestSelectTopK:
    def test_exact_match_wins(self):
        gsr = np.array([1, 5, 2, 7])
        m = CountMatrix(4)
        m.set_row(fid("match"), [1, 5, 2, 7])
        m.set_row(fid("noise"), [4, 1, 1, 1])
        m.set_row(fid("anti"), [7, 2, 5, 1])
        selected, ranked = select_top_k(m, gsr, pearson, 1)
        assert ranked[0][0] == fid("match")
        assert ranked[0][1] == 1.0
        assert selected.feature_ids() == [fid("match")]

    def test_constant_row_ranks_last(self):
        gsr = np.array([1, 5, 2, 7])
        m = CountMatrix(4)
        m.set_row(fid("flat"), [3, 3, 3, 3])
        m.set_row(fid("anti"), [7, 2, 5, 1])
        _, ranked = select_top_k(m, gsr, pearson, 2)
        assert ranked[-1] == (fid("flat"), None)

    def test_matches_full_sort_oracle(self):
        rng = np.random.default_rng(31)
        gsr = rng.integers(0, 6, size=10)
        m = CountMatrix(10)
        scored = []
        scorer = make_scorer("spearman")
        for i in range(50):
            f = fid(f"w{i:02d}")
            values = rng.integers(0, 6, size=10)
            m.set_row(f, values)
            try:
                scored.append((f, scorer(values.astype(float), gsr.astype(float))))
            except Exception:
                scored.append((f, None))
        _, ranked = select_top_k(m, gsr, scorer, 10)
        assert [f for f, _ in ranked] == top_k_oracle(scored, 10)

    def test_fewer_than_k_returns_all(self):
        gsr = np.array([1, 2, 3])
        m = CountMatrix(3)
        m.set_row(fid("a"), [1, 2, 3])
        _, ranked = select_top_k(m, gsr, pearson, 10)
        assert len(ranked) == 1

    def test_scores_non_increasing(self):
        rng = np.random.default_rng(37)
        gsr = rng.integers(0, 8, size=14)
        m = CountMatrix(14)
        for i in range(60):
            m.set_row(fid(f"w{i:02d}"), rng.integers(0, 8, size=14))
        _, ranked = select_top_k(m, gsr, pearson, 60)
        defined = [s for _, s in ranked if s is not None]
        assert all(a >= b for a, b in zip(defined, defined[1:]))
        # absent scores, if any, trail the defined ones
        tail = [s for _, s in ranked[len(defined):]]
        assert all(s is None for s in tail)

    def test_absolute_ranking_flag(self):
        gsr = np.array([1, 5, 2, 7])
        m = CountMatrix(4)
        m.set_row(fid("weak"), [2, 3, 2, 3])
        m.set_row(fid("anti"), [7, 2, 5, 1])
        _, signed = select_top_k(m, gsr, pearson, 1)
        _, by_abs = select_top_k(m, gsr, pearson, 1, absolute=True)
        assert signed[0][0] == fid("weak")
        assert by_abs[0][0] == fid("anti")
        assert by_abs[0][1] < 0


class TestCheckpointIo:
    def test_tsv_roundtrip(self, tmp_path):
        rng = np.random.default_rng(41)
        m = CountMatrix(5)
        m.set_row(FeatureId(WordForm("bow", 2), ("go", "melbourn")), [1, 0, 2, 0, 1])
        m.set_row(fid("solo"), rng.integers(0, 9, size=5))
        path = tmp_path / "counts.tsv"
        m.write_tsv(path)
        back = CountMatrix.read_tsv(path)
        assert back.feature_ids() == m.feature_ids()
        for f in m.feature_ids():
            assert back.row(f).tolist() == m.row(f).tolist()

    def test_scores_roundtrip(self, tmp_path):
        scores = [(fid("a"), 0.123456789012345), (fid("b"), None), (fid("c"), -0.5)]
        path = tmp_path / "scores.csv"
        write_scores(scores, path)
        assert read_scores(path) == scores
