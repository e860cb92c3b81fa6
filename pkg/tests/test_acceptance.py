"""Acceptance suite: seven criteria, one test each, every tolerance
pinned here. Each test prints a single pass/fail line (run with -s to
see them live).
"""

import time
from contextlib import contextmanager
from datetime import date

import numpy as np
import pytest

from signalmerge.cli import main as cli_main
from signalmerge.cluster import KMeansConfig, kmeans
from signalmerge.counts import read_scores
from signalmerge.factor import svd
from signalmerge.ingest import RawTweet
from signalmerge.measures import (
    distance_correlation,
    joint_histogram,
    kendall_tau,
    mutual_information,
    pearson,
    spearman,
)
from signalmerge.pipeline import PipelineConfig, run_pipeline
from signalmerge.synth import SyntheticSpec, generate_synthetic
from signalmerge.textnorm import (
    WordForm,
    clean_tweet,
    default_stopwords,
    extract_features,
    normalize_tokens,
    stem_lancaster,
)

from oracles import (
    dcor_oracle,
    kendall_oracle,
    mi_joint_oracle,
    mi_oracle,
    pearson_oracle,
    spearman_oracle,
)


@contextmanager
def announce(number: int, name: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number} {name}: FAIL", flush=True)
        raise
    print(f"ACCEPTANCE {number} {name}: PASS", flush=True)


# Pipeline parameters frozen for the synthetic-corpus criteria. The
# cluster count and latent rank were fixed once from the seed-robustness
# scan; everything downstream of the seed is deterministic.
SYNTH_SPEC = SyntheticSpec()  # 120 days, 4 clusters x 5 synonyms, 10 event days
RUN_PARAMS = dict(
    form=WordForm("keyword", 1),
    metric="pearson",
    top_k=60,
    min_count=5,
    kmeans=KMeansConfig(k=8, runs=50, max_iter=35, seed=0, rank=6, weight_by_sigma=True),
)


@pytest.fixture(scope="module")
def synth_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance-synth")
    return generate_synthetic(SYNTH_SPEC, root / "corpus.jsonl", root / "gsr.csv")


def tie_heavy_pair(rng):
    n = int(rng.integers(4, 65))
    if rng.random() < 0.7:
        x = rng.integers(0, 6, size=n).astype(float)
        y = rng.integers(0, 6, size=n).astype(float)
    else:
        x = rng.normal(size=n)
        y = rng.normal(size=n)
    if x.min() == x.max():
        x[0] += 1.0
    if y.min() == y.max():
        y[0] += 1.0
    return x, y


def test_criterion_1_metric_oracle_equivalence():
    with announce(1, "metric-oracle-equivalence"):
        started = time.monotonic()
        rng = np.random.default_rng(101)
        for _ in range(200):
            x, y = tie_heavy_pair(rng)
            xs, ys = list(x), list(y)
            assert abs(pearson(x, y) - pearson_oracle(xs, ys)) <= 1e-9
            assert abs(spearman(x, y) - spearman_oracle(xs, ys)) <= 1e-9
            assert abs(kendall_tau(x, y) - kendall_oracle(xs, ys)) <= 1e-9
            assert abs(distance_correlation(x, y) - dcor_oracle(xs, ys)) <= 1e-9
            # MI: identical binning, value agreement to float-sum precision
            joint = joint_histogram(x, y, 16)
            expected_joint = mi_joint_oracle(xs, ys, 16)
            for a in range(16):
                for b in range(16):
                    assert joint[a, b] == expected_joint.get((a, b), 0)
            assert abs(mutual_information(x, y, 16) - mi_oracle(xs, ys, 16)) <= 1e-12
        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"criterion 1 took {elapsed:.1f}s"


def test_criterion_2_svd_correctness():
    with announce(2, "svd-correctness"):
        started = time.monotonic()
        rng = np.random.default_rng(202)
        small_cases = 0
        for index in range(100):
            if index % 3 == 0:
                m = int(rng.integers(1, 9))
                n = int(rng.integers(1, 9))
            else:
                m = int(rng.integers(1, 201))
                n = int(rng.integers(1, 51))
            x = rng.normal(size=(m, n))
            f = svd(x)
            r = f.rank
            assert np.abs(f.u.T @ f.u - np.eye(r)).max() <= 1e-8
            assert np.abs(f.vt @ f.vt.T - np.eye(r)).max() <= 1e-8
            assert all(a >= b for a, b in zip(f.sigma, f.sigma[1:]))
            assert (f.sigma >= 0).all()
            residual = np.linalg.norm(x - f.u @ (f.sigma[:, None] * f.vt))
            assert residual <= 1e-8 * np.linalg.norm(x)
            if m <= 8 and n <= 8:
                small_cases += 1
                gram = x.T @ x if m >= n else x @ x.T
                expected = np.sqrt(np.maximum(np.linalg.eigh(gram)[0][::-1], 0.0))
                assert np.abs(f.sigma - expected).max() <= 1e-8
        assert small_cases >= 20
        elapsed = time.monotonic() - started
        assert elapsed < 30.0, f"criterion 2 took {elapsed:.1f}s"


def test_criterion_3_lloyd_monotone_and_recovery():
    with announce(3, "lloyd-monotonicity-and-recovery"):
        started = time.monotonic()
        rng = np.random.default_rng(303)
        for _ in range(20):
            m = int(rng.integers(20, 80))
            d = int(rng.integers(1, 6))
            k = int(rng.integers(2, 7))
            points = rng.normal(size=(m, d)) * rng.uniform(0.5, 3.0)
            cfg = KMeansConfig(
                k=k, runs=5, max_iter=35, seed=int(rng.integers(10_000))
            )
            result = kmeans(points, cfg)
            for history in result.run_histories:
                for earlier, later in zip(history, history[1:]):
                    assert later <= earlier

        blob_rng = np.random.default_rng(42)
        centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
        points = np.vstack(
            [blob_rng.normal(loc=c, scale=0.1, size=(10, 2)) for c in centers]
        )
        truth = np.repeat(np.arange(3), 10)
        result = kmeans(points, KMeansConfig(k=3, runs=50, max_iter=35, seed=0))
        groups = {frozenset(np.flatnonzero(result.assignment == i)) for i in range(3)}
        expected = {frozenset(np.flatnonzero(truth == i)) for i in range(3)}
        assert groups == expected
        elapsed = time.monotonic() - started
        assert elapsed < 20.0, f"criterion 3 took {elapsed:.1f}s"


def test_criterion_4_merge_conservation():
    with announce(4, "merge-conservation"):
        from signalmerge.cluster import ClusterLookup, merge_cluster_vectors, recorrelate
        from signalmerge.counts import CountMatrix
        from signalmerge.textnorm import FeatureId

        rng = np.random.default_rng(404)
        kw = WordForm("keyword", 1)
        for _ in range(10):
            days = int(rng.integers(4, 20))
            features = [FeatureId(kw, (f"w{i:03d}",)) for i in range(int(rng.integers(3, 40)))]
            matrix = CountMatrix(days)
            for fid in features:
                matrix.set_row(fid, rng.integers(0, 9, size=days))
            # random clustering over the features
            medoids = list(rng.choice(len(features), size=max(1, len(features) // 4), replace=False))
            mapping = {}
            for i, fid in enumerate(features):
                target = features[int(medoids[int(rng.integers(len(medoids)))])]
                mapping[fid] = target
            for m in medoids:
                mapping[features[int(m)]] = features[int(m)]
            members_of = {}
            for member, medoid in mapping.items():
                members_of.setdefault(medoid, []).append(member)
            for v in members_of.values():
                v.sort()
            lookup = ClusterLookup(medoid_of=mapping, members_of=members_of)
            result = merge_cluster_vectors(matrix, lookup)
            assert result.merged.total_mass() == matrix.total_mass()

        # all-singleton lookup: before equals after everywhere
        days = 12
        matrix = CountMatrix(days)
        features = [FeatureId(kw, (f"s{i:02d}",)) for i in range(15)]
        for fid in features:
            matrix.set_row(fid, rng.integers(0, 7, size=days))
        lookup = ClusterLookup(
            medoid_of={f: f for f in features},
            members_of={f: [f] for f in features},
        )
        result = merge_cluster_vectors(matrix, lookup)
        gsr = rng.integers(0, 4, size=days)
        for row in recorrelate(result, gsr, pearson):
            assert row.before == row.after


def test_criterion_5_directional_enhancement(synth_corpus, tmp_path):
    with announce(5, "directional-enhancement"):
        started = time.monotonic()
        out = tmp_path / "run"
        cfg = PipelineConfig(
            corpus=synth_corpus.corpus_path,
            gsr=synth_corpus.gsr_path,
            start=synth_corpus.timeframe.start,
            days=synth_corpus.timeframe.days,
            out_dir=out,
            **RUN_PARAMS,
        )
        report = run_pipeline(cfg)
        planted = {t for group in synth_corpus.planted for t in group}
        planted_rows = [r for r in report.rows if r.medoid.tokens[0] in planted]
        # the enhancement must be visible on more than one merged signal
        assert len(planted_rows) >= 2
        for row in planted_rows:
            assert row.before is not None and row.after is not None
            assert row.after - row.before >= 0.1, (
                f"{row.medoid.render()}: {row.before:.3f} -> {row.after:.3f}"
            )
        scores = read_scores(out / "scores.csv")
        max_single_before = max(s for _, s in scores if s is not None)
        assert report.summary.max_after > max_single_before
        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"criterion 5 took {elapsed:.1f}s"


def test_criterion_6_text_pipeline_fidelity():
    with announce(6, "text-pipeline-fidelity"):
        from datetime import datetime, timezone

        raw = RawTweet(
            text='Highlight sign from #KeepSydneyOpen march:"My Friends Have Gone To Melbourne"',
            timestamp=datetime(2021, 3, 1, tzinfo=timezone.utc),
        )
        tokens = clean_tweet(raw, default_stopwords())
        normalized = normalize_tokens(tokens)
        assert " ".join(normalized) == "highlight sign march friend go melbourn"

        from signalmerge.textnorm import default_lemmas, lemmatize

        assert lemmatize("went", default_lemmas()) == "go"
        assert stem_lancaster("australian") == "austral"

        six = ["highlight", "sign", "march", "friend", "go", "melbourn"]
        assert sum(extract_features(six, WordForm("bow", 2)).values()) == 15
        assert sum(extract_features(six, WordForm("skipgram", 2)).values()) == 15
        assert sum(extract_features(six, WordForm("ngram", 2)).values()) == 5


def test_criterion_7_determinism(synth_corpus, tmp_path):
    with announce(7, "determinism"):
        args = [
            "run",
            "--corpus", str(synth_corpus.corpus_path),
            "--gsr", str(synth_corpus.gsr_path),
            "--start", synth_corpus.timeframe.start.isoformat(),
            "--days", str(synth_corpus.timeframe.days),
            "--form", "keyword",
            "--metric", "pearson",
            "--top-k", "60",
            "--min-count", "5",
            "--k", "8",
            "--runs", "50",
            "--max-iter", "35",
            "--seed", "0",
            "--rank", "6",
            "--weight-by-sigma",
        ]
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert cli_main(args + ["--out", str(out_a)]) == 0
        assert cli_main(args + ["--out", str(out_b)]) == 0
        compared = [
            "manifest.json", "report.csv", "report.txt", "summary.csv",
            "scores.csv", "lookup.tsv", "merged.tsv", "counts.tsv",
            "selected.tsv", "factors.txt",
            "figures/signals.png", "figures/scores.png",
        ]
        for name in compared:
            a = (out_a / name).read_bytes()
            b = (out_b / name).read_bytes()
            assert a == b, f"{name} differs between identical runs"
