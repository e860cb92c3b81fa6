"""End-to-end orchestration: ingest -> extract -> correlate -> factorize
-> cluster -> merge -> report, with a checkpoint written after every
stage and a manifest that pins every parameter and seed.

Reruns from an identical manifest are byte-identical; individual stages
can be re-run from the checkpoints via the CLI and compose to the same
result as a single-shot run.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .cluster import (
    BeforeAfterRow,
    ClusterLookup,
    KMeansConfig,
    MergeResult,
    build_lookup,
    kmeans,
    merge_cluster_vectors,
    recorrelate,
)
from .counts import CountMatrix, accumulate, filter_min_count, select_top_k, write_scores
from .errors import PipelineError, SignalMergeError
from .factor import FactoredMatrix, svd, truncate, write_factors
from .ingest import IngestSummary, RawTweet, Timeframe, load_gsr, load_tweets, write_gsr
from .measures import DEFAULT_MI_BINS, make_scorer
from .reporting import (
    ReportSummary,
    emit_report,
    render_score_figure,
    render_signal_figure,
    summarize,
    write_report_csv,
)
from .textnorm import (
    WordForm,
    clean_tweet,
    default_lemmas,
    default_stopwords,
    extract_features,
    load_lemma_file,
    load_token_file,
    normalize_tokens,
)

logger = logging.getLogger(__name__)

CHECKPOINTS = {
    "tweets": "tweets.jsonl",
    "gsr": "gsr.csv",
    "ingest": "ingest.json",
    "counts": "counts.tsv",
    "selected": "selected.tsv",
    "scores": "scores.csv",
    "factors": "factors.txt",
    "lookup": "lookup.tsv",
    "merged": "merged.tsv",
    "report_csv": "report.csv",
    "report_txt": "report.txt",
    "summary": "summary.csv",
    "manifest": "manifest.json",
}


@dataclass
class PipelineConfig:
    corpus: Path
    gsr: Path
    start: date
    days: int
    out_dir: Path
    geo: Optional[frozenset[str]] = None
    form: WordForm = field(default_factory=lambda: WordForm("keyword", 1))
    metric: str = "pearson"
    select_metric: Optional[str] = None
    mi_bins: int = DEFAULT_MI_BINS
    top_k: int = 10000
    min_count: int = 5
    absolute_rank: bool = False
    center_rows: bool = False
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    stopwords_path: Optional[Path] = None
    lemmas_path: Optional[Path] = None

    @property
    def timeframe(self) -> Timeframe:
        return Timeframe(start=self.start, days=self.days)

    def manifest(self) -> dict:
        return {
            "package": "signalmerge",
            "version": __version__,
            "corpus": str(self.corpus),
            "gsr": str(self.gsr),
            "start": self.start.isoformat(),
            "days": self.days,
            "geo": sorted(self.geo) if self.geo else None,
            "form": self.form.kind,
            "n": self.form.n,
            "metric": self.metric,
            "select_metric": self.select_metric,
            "mi_bins": self.mi_bins,
            "top_k": self.top_k,
            "min_count": self.min_count,
            "absolute_rank": self.absolute_rank,
            "center_rows": self.center_rows,
            "kmeans": {
                "k": self.kmeans.k,
                "runs": self.kmeans.runs,
                "max_iter": self.kmeans.max_iter,
                "seed": self.kmeans.seed,
                "rank": self.kmeans.rank,
                "weight_by_sigma": self.kmeans.weight_by_sigma,
                "init": self.kmeans.init,
            },
            "stopwords": str(self.stopwords_path) if self.stopwords_path else None,
            "lemmas": str(self.lemmas_path) if self.lemmas_path else None,
        }

    @classmethod
    def from_manifest(cls, manifest: dict, out_dir: Path) -> "PipelineConfig":
        km = manifest["kmeans"]
        return cls(
            corpus=Path(manifest["corpus"]),
            gsr=Path(manifest["gsr"]),
            start=date.fromisoformat(manifest["start"]),
            days=manifest["days"],
            out_dir=Path(out_dir),
            geo=frozenset(manifest["geo"]) if manifest.get("geo") else None,
            form=WordForm(manifest["form"], manifest["n"]),
            metric=manifest["metric"],
            select_metric=manifest.get("select_metric"),
            mi_bins=manifest.get("mi_bins", DEFAULT_MI_BINS),
            top_k=manifest["top_k"],
            min_count=manifest["min_count"],
            absolute_rank=manifest.get("absolute_rank", False),
            center_rows=manifest.get("center_rows", False),
            kmeans=KMeansConfig(
                k=km["k"],
                runs=km["runs"],
                max_iter=km["max_iter"],
                seed=km["seed"],
                rank=km.get("rank"),
                weight_by_sigma=km.get("weight_by_sigma", False),
                init=km.get("init", "partition"),
            ),
            stopwords_path=Path(manifest["stopwords"]) if manifest.get("stopwords") else None,
            lemmas_path=Path(manifest["lemmas"]) if manifest.get("lemmas") else None,
        )


@dataclass
class RunReport:
    rows: list[BeforeAfterRow]
    summary: ReportSummary
    ingest: IngestSummary
    out_dir: Path
    figures: list[Path]


def _guard(stage: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except (SignalMergeError, ValueError, KeyError, OSError, RuntimeError) as exc:
        raise PipelineError(stage, str(exc)) from exc


def _path(cfg_out: Path, key: str) -> Path:
    return Path(cfg_out) / CHECKPOINTS[key]


def stage_ingest(
    cfg: PipelineConfig, out_dir: Path
) -> tuple[list[tuple[int, RawTweet]], np.ndarray, IngestSummary]:
    """Read corpus and event series, bucket by day, checkpoint both."""
    reader = load_tweets(cfg.corpus, cfg.timeframe, cfg.geo)
    tweets = list(reader)
    gsr = load_gsr(cfg.gsr, cfg.timeframe)
    with open(_path(out_dir, "tweets"), "w", encoding="utf-8", newline="\n") as fh:
        for day, tweet in tweets:
            record = {
                "day": day,
                "text": tweet.text,
                "ts": tweet.timestamp.isoformat(),
            }
            if tweet.location_tag is not None:
                record["loc"] = tweet.location_tag
            if tweet.lang_hint is not None:
                record["lang"] = tweet.lang_hint
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    write_gsr(gsr, cfg.timeframe, _path(out_dir, "gsr"))
    summary = reader.summary
    with open(_path(out_dir, "ingest"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary.as_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    logger.info("ingest: %s", summary.as_dict())
    return tweets, gsr, summary


def read_tweet_checkpoint(path: Path) -> list[tuple[int, RawTweet]]:
    from .ingest import parse_timestamp

    tweets = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        tweets.append(
            (
                record["day"],
                RawTweet(
                    text=record["text"],
                    timestamp=parse_timestamp(record["ts"]),
                    location_tag=record.get("loc"),
                    lang_hint=record.get("lang"),
                ),
            )
        )
    return tweets


def stage_extract(
    cfg: PipelineConfig,
    tweets: list[tuple[int, RawTweet]],
    out_dir: Path,
) -> CountMatrix:
    """Clean, normalize, extract word-form features, accumulate daily
    counts, and apply the min-count filter."""
    stopwords = (
        load_token_file(cfg.stopwords_path) if cfg.stopwords_path else default_stopwords()
    )
    lemmas = load_lemma_file(cfg.lemmas_path) if cfg.lemmas_path else default_lemmas()

    def feature_stream():
        for day, tweet in tweets:
            tokens = clean_tweet(tweet, stopwords)
            if tokens is None:
                continue
            normalized = normalize_tokens(tokens, lemmas)
            yield day, extract_features(normalized, cfg.form)

    matrix = accumulate(feature_stream(), cfg.days)
    if len(matrix) == 0:
        raise PipelineError("accumulate", "no features extracted from the corpus")
    matrix = filter_min_count(matrix, cfg.min_count)
    if len(matrix) == 0:
        raise PipelineError(
            "filter", f"no features reach min-count {cfg.min_count} on any day"
        )
    matrix.write_tsv(_path(out_dir, "counts"))
    logger.info("extract: %d features after min-count filter", len(matrix))
    return matrix


def stage_correlate(
    cfg: PipelineConfig,
    matrix: CountMatrix,
    gsr: np.ndarray,
    out_dir: Path,
) -> CountMatrix:
    """Rank features against the event series and keep the top K."""
    scorer = make_scorer(cfg.select_metric or cfg.metric, cfg.mi_bins)
    selected, ranked = select_top_k(matrix, gsr, scorer, cfg.top_k, cfg.absolute_rank)
    selected.write_tsv(_path(out_dir, "selected"))
    write_scores(ranked, _path(out_dir, "scores"))
    logger.info("correlate: selected %d of %d features", len(selected), len(matrix))
    return selected


def stage_factorize(cfg: PipelineConfig, selected: CountMatrix, out_dir: Path) -> FactoredMatrix:
    """Thin SVD of the selected feature/day matrix."""
    x = selected.to_array()
    if cfg.center_rows:
        x = x - x.mean(axis=1, keepdims=True)
    factors = svd(x, feature_order=selected.feature_ids())
    write_factors(factors, _path(out_dir, "factors"))
    logger.info("factorize: rank %d, leading sigma %.4g", factors.rank, factors.sigma[0])
    return factors


def clustering_points(factors: FactoredMatrix, cfg: KMeansConfig) -> np.ndarray:
    """Rows of U in the configured latent subspace, optionally scaled by
    the singular values."""
    rank = cfg.rank if cfg.rank is not None else factors.rank
    if not 1 <= rank <= factors.rank:
        raise ValueError(f"rank must be in [1, {factors.rank}], got {rank}")
    reduced = truncate(factors, rank) if rank < factors.rank else factors
    points = reduced.u.copy()
    if cfg.weight_by_sigma:
        points *= reduced.sigma[None, :]
    return points


def stage_cluster(cfg: PipelineConfig, factors: FactoredMatrix, out_dir: Path) -> ClusterLookup:
    """Cluster feature representations and build the medoid lookup."""
    if factors.feature_order is None:
        raise ValueError("factors carry no feature order")
    points = clustering_points(factors, cfg.kmeans)
    clustering = kmeans(points, cfg.kmeans)
    lookup = build_lookup(clustering, factors.feature_order, points)
    lookup.write_tsv(_path(out_dir, "lookup"))
    logger.info(
        "cluster: %d clusters, objective %.6g (best run %d)",
        len(lookup.members_of),
        clustering.objective,
        clustering.best_run,
    )
    return lookup


def stage_merge(selected: CountMatrix, lookup: ClusterLookup, out_dir: Path) -> MergeResult:
    """Sum member rows into medoid rows."""
    result = merge_cluster_vectors(selected, lookup)
    result.merged.write_tsv(_path(out_dir, "merged"))
    logger.info("merge: %d medoid rows", len(result.merged))
    return result


def stage_report(
    cfg: PipelineConfig,
    result: MergeResult,
    gsr: np.ndarray,
    out_dir: Path,
) -> tuple[list[BeforeAfterRow], ReportSummary, list[Path]]:
    """Rescore before/after, render CSV + text + summary + figures."""
    scorer = make_scorer(cfg.metric, cfg.mi_bins)
    rows = recorrelate(result, gsr, scorer)
    if not rows:
        raise PipelineError("report", "no medoids to report on")
    summary = summarize(rows)
    label = f"{cfg.form.kind}-{cfg.form.n}"
    write_report_csv(rows, _path(out_dir, "report_csv"))
    emit_report(rows, "text", _path(out_dir, "report_txt"), label, cfg.metric)
    emit_report(rows, "csv", _path(out_dir, "summary"), label, cfg.metric)
    figures = []
    fig_dir = Path(out_dir) / "figures"
    fig_dir.mkdir(exist_ok=True)
    for renderer, name in (
        (lambda p: render_signal_figure(result, gsr, rows, p), "signals.png"),
        (lambda p: render_score_figure(rows, p), "scores.png"),
    ):
        rendered = renderer(fig_dir / name)
        if rendered is not None:
            figures.append(rendered)
    logger.info(
        "report: max %s -> %s",
        f"{summary.max_before:.4f}" if summary.max_before is not None else "NA",
        f"{summary.max_after:.4f}" if summary.max_after is not None else "NA",
    )
    return rows, summary, figures


def run_pipeline(cfg: PipelineConfig) -> RunReport:
    """Execute every stage in order against one output directory."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(_path(out_dir, "manifest"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(cfg.manifest(), fh, sort_keys=True, indent=2)
        fh.write("\n")

    tweets, gsr, ingest_summary = _guard("ingest", stage_ingest, cfg, out_dir)
    matrix = _guard("extract", stage_extract, cfg, tweets, out_dir)
    selected = _guard("correlate", stage_correlate, cfg, matrix, gsr, out_dir)
    factors = _guard("factorize", stage_factorize, cfg, selected, out_dir)
    lookup = _guard("cluster", stage_cluster, cfg, factors, out_dir)
    result = _guard("merge", stage_merge, selected, lookup, out_dir)
    rows, summary, figures = _guard("report", stage_report, cfg, result, gsr, out_dir)
    return RunReport(
        rows=rows,
        summary=summary,
        ingest=ingest_summary,
        out_dir=out_dir,
        figures=figures,
    )
