"""Command line front end.

Subcommands mirror the pipeline stages (`ingest`, `extract`,
`correlate`, `factorize`, `cluster`, `merge`, `report`), plus `run` for
the whole pipeline and `synth` for seeded synthetic corpora. Stage
subcommands read and write the standard checkpoint files under the
output directory, so chaining them equals a single `run`.

Flags can also come from a TOML-style key/value config file (--config);
explicit flags win over the file. SIGNALMERGE_OUT sets the default
output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import date
from pathlib import Path

from .cluster import ClusterLookup, KMeansConfig, MergeResult
from .counts import CountMatrix
from .errors import SignalMergeError
from .factor import read_factors
from .ingest import Timeframe, load_gsr
from .measures import DEFAULT_MI_BINS, METRIC_IDS
from .pipeline import (
    CHECKPOINTS,
    PipelineConfig,
    read_tweet_checkpoint,
    run_pipeline,
    stage_cluster,
    stage_correlate,
    stage_extract,
    stage_factorize,
    stage_ingest,
    stage_merge,
    stage_report,
    _guard,
)
from .synth import SyntheticSpec, generate_synthetic
from .textnorm import FORM_KINDS, WordForm

OUT_ENV = "SIGNALMERGE_OUT"


def load_config_file(path: Path) -> dict:
    """Parse a flat TOML-style `key = value` file.

    Values are typed by shape: quoted -> string, true/false -> bool,
    integer/float literals -> numbers, anything else -> string. Keys use
    the flag spelling with dashes or underscores.
    """
    values: dict = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            values[key] = value[1:-1]
        elif value.lower() in ("true", "false"):
            values[key] = value.lower() == "true"
        else:
            try:
                values[key] = int(value)
            except ValueError:
                try:
                    values[key] = float(value)
                except ValueError:
                    values[key] = value
    return values


def _default_out() -> str:
    return os.environ.get(OUT_ENV, "signalmerge-out")


def _add_out(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--out", type=Path, default=None,
        help=f"output directory (default ${OUT_ENV} or ./signalmerge-out)",
    )
    parser.add_argument("--config", type=Path, default=None, help="key=value config file")


def _add_corpus(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", type=Path, help="tweet JSONL file")
    parser.add_argument("--gsr", type=Path, help="event series CSV (date,count)")
    parser.add_argument("--start", type=date.fromisoformat, help="timeframe start (YYYY-MM-DD)")
    parser.add_argument("--days", type=int, help="timeframe length in days")
    parser.add_argument("--geo", type=str, default=None,
                        help="comma-separated place names (substring match)")


def _add_form(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--form", choices=FORM_KINDS, default="keyword")
    parser.add_argument("--n", type=int, default=None,
                        help="words per feature (1 for keyword, 2-3 otherwise)")
    parser.add_argument("--stopwords", type=Path, default=None, help="stopword file override")
    parser.add_argument("--lemmas", type=Path, default=None, help="lemma TSV override")
    parser.add_argument("--min-count", type=int, default=5,
                        help="keep features reaching this count on some day")


def _add_metric(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--metric", choices=METRIC_IDS, default="pearson")
    parser.add_argument("--mi-bins", type=int, default=DEFAULT_MI_BINS)
    parser.add_argument("--top-k", type=int, default=10000)
    parser.add_argument("--abs-rank", action="store_true",
                        help="rank selection by |score| instead of signed score")
    parser.add_argument("--select-metric", choices=METRIC_IDS, default=None,
                        help="metric for top-K selection (default: same as --metric)")


def _add_kmeans(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=2000, help="cluster count")
    parser.add_argument("--runs", type=int, default=50, help="random restarts")
    parser.add_argument("--max-iter", type=int, default=35)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--rank", type=int, default=None,
                        help="latent dimensions used for clustering (default: full)")
    parser.add_argument("--weight-by-sigma", action="store_true",
                        help="scale latent dimensions by their singular values")
    parser.add_argument("--init", choices=("partition", "plusplus"), default="partition")
    parser.add_argument("--center-rows", action="store_true",
                        help="subtract row means before the SVD")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="signalmerge",
        description="correlate text features with daily events and boost "
                    "weak signals by merging feature clusters",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline")
    for add in (_add_out, _add_corpus, _add_form, _add_metric, _add_kmeans):
        add(p_run)
    p_run.add_argument("--manifest", type=Path, default=None,
                       help="rerun from a previously written manifest.json")

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus + event series")
    _add_out(p_synth)
    p_synth.add_argument("--days", type=int, default=120)
    p_synth.add_argument("--background-features", type=int, default=150)
    p_synth.add_argument("--background-rate", type=float, default=2.0)
    p_synth.add_argument("--clusters", type=int, default=4)
    p_synth.add_argument("--synonyms", type=int, default=5)
    p_synth.add_argument("--event-day-count", type=int, default=10)
    p_synth.add_argument("--event-days", type=str, default=None,
                         help="explicit comma-separated day ordinals")
    p_synth.add_argument("--spike", type=float, default=12.0)
    p_synth.add_argument("--seed", type=int, default=7)
    p_synth.add_argument("--start", type=date.fromisoformat, default=date(2021, 1, 1))

    p_ingest = sub.add_parser("ingest", help="read corpus + events into checkpoints")
    for add in (_add_out, _add_corpus):
        add(p_ingest)

    p_extract = sub.add_parser("extract", help="feature counts from ingested tweets")
    _add_out(p_extract)
    _add_form(p_extract)

    p_corr = sub.add_parser("correlate", help="rank features against the event series")
    _add_out(p_corr)
    _add_metric(p_corr)

    p_fact = sub.add_parser("factorize", help="thin SVD of the selected matrix")
    _add_out(p_fact)
    p_fact.add_argument("--center-rows", action="store_true")

    p_clust = sub.add_parser("cluster", help="k-means + medoid lookup table")
    _add_out(p_clust)
    _add_kmeans(p_clust)

    p_merge = sub.add_parser("merge", help="sum member rows into medoid rows")
    _add_out(p_merge)

    p_report = sub.add_parser("report", help="before/after tables and figures")
    _add_out(p_report)
    _add_metric(p_report)
    p_report.add_argument("--form", choices=FORM_KINDS, default="keyword")
    p_report.add_argument("--n", type=int, default=None)

    commands = {
        "run": p_run, "synth": p_synth, "ingest": p_ingest, "extract": p_extract,
        "correlate": p_corr, "factorize": p_fact, "cluster": p_clust,
        "merge": p_merge, "report": p_report,
    }
    return parser, commands


def _resolve_out(args) -> Path:
    out = Path(args.out) if args.out is not None else Path(_default_out())
    out.mkdir(parents=True, exist_ok=True)
    return out


def _as_date(value) -> date:
    return value if isinstance(value, date) else date.fromisoformat(str(value))


def _form_from_args(args) -> WordForm:
    n = args.n if args.n is not None else (1 if args.form == "keyword" else 2)
    return WordForm(args.form, int(n))


def _config_from_args(args, out: Path) -> PipelineConfig:
    """Build a full PipelineConfig; args absent from the subcommand fall
    back to the PipelineConfig/KMeansConfig defaults."""
    for name in ("corpus", "gsr", "start", "days"):
        if getattr(args, name, None) is None:
            raise SignalMergeError(f"--{name} is required (flag or config file)")
    geo = None
    if getattr(args, "geo", None):
        geo = frozenset(g.strip() for g in str(args.geo).split(",") if g.strip())

    def arg(name, default):
        value = getattr(args, name, None)
        return default if value is None else value

    return PipelineConfig(
        corpus=Path(args.corpus),
        gsr=Path(args.gsr),
        start=_as_date(args.start),
        days=int(args.days),
        out_dir=out,
        geo=geo,
        form=WordForm(arg("form", "keyword"), int(arg("n", 0) or (1 if arg("form", "keyword") == "keyword" else 2))),
        metric=arg("metric", "pearson"),
        select_metric=getattr(args, "select_metric", None),
        mi_bins=int(arg("mi_bins", DEFAULT_MI_BINS)),
        top_k=int(arg("top_k", 10000)),
        min_count=int(arg("min_count", 5)),
        absolute_rank=bool(arg("abs_rank", False)),
        center_rows=bool(arg("center_rows", False)),
        kmeans=KMeansConfig(
            k=int(arg("k", 2000)),
            runs=int(arg("runs", 50)),
            max_iter=int(arg("max_iter", 35)),
            seed=int(arg("seed", 0)),
            rank=getattr(args, "rank", None),
            weight_by_sigma=bool(arg("weight_by_sigma", False)),
            init=arg("init", "partition"),
        ),
        stopwords_path=getattr(args, "stopwords", None),
        lemmas_path=getattr(args, "lemmas", None),
    )


def _checkpoint(out: Path, key: str) -> Path:
    path = out / CHECKPOINTS[key]
    if not path.is_file():
        raise SignalMergeError(
            f"missing checkpoint {path}; run the earlier stages first"
        )
    return path


def _gsr_from_checkpoint(out: Path) -> tuple:
    import csv

    path = _checkpoint(out, "gsr")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    start = date.fromisoformat(rows[0][0])
    timeframe = Timeframe(start=start, days=len(rows))
    return load_gsr(path, timeframe), timeframe


def _minimal_cfg(out: Path, timeframe: Timeframe, **overrides) -> PipelineConfig:
    base = dict(
        corpus=Path("-"), gsr=Path("-"), start=timeframe.start,
        days=timeframe.days, out_dir=out,
    )
    base.update(overrides)
    return PipelineConfig(**base)


def _cmd_run(args) -> int:
    out = _resolve_out(args)
    if args.manifest is not None:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        cfg = PipelineConfig.from_manifest(manifest, out)
    else:
        cfg = _config_from_args(args, out)
    report = run_pipeline(cfg)
    s = report.summary
    print(f"medoids: {s.medoids}")
    print(f"max score:       {_fmt(s.max_before)} -> {_fmt(s.max_after)}")
    print(f"mean of top 100: {_fmt(s.mean_top_before)} -> {_fmt(s.mean_top_after)}")
    print(f"outputs in {report.out_dir}")
    return 0


def _fmt(value) -> str:
    return f"{value:.4f}" if value is not None else "NA"


def _cmd_synth(args) -> int:
    out = _resolve_out(args)
    event_days = None
    if args.event_days:
        event_days = tuple(int(v) for v in args.event_days.split(","))
    spec = SyntheticSpec(
        days=args.days,
        background_features=args.background_features,
        background_rate=args.background_rate,
        clusters=args.clusters,
        synonyms=args.synonyms,
        event_day_count=args.event_day_count,
        event_days=event_days,
        spike=args.spike,
        seed=args.seed,
    )
    result = generate_synthetic(
        spec, out / "corpus.jsonl", out / "gsr.csv", start=_as_date(args.start)
    )
    with open(out / "meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.meta(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"corpus: {result.corpus_path}")
    print(f"events: {result.gsr_path} (event days: {list(result.event_days)})")
    return 0


def _cmd_ingest(args) -> int:
    out = _resolve_out(args)
    cfg = _config_from_args(args, out)
    _, _, summary = _guard("ingest", stage_ingest, cfg, out)
    print(json.dumps(summary.as_dict(), sort_keys=True))
    return 0


def _cmd_extract(args) -> int:
    out = _resolve_out(args)
    gsr, timeframe = _gsr_from_checkpoint(out)
    tweets = read_tweet_checkpoint(_checkpoint(out, "tweets"))
    cfg = _minimal_cfg(
        out, timeframe,
        form=_form_from_args(args),
        min_count=args.min_count,
        stopwords_path=args.stopwords,
        lemmas_path=args.lemmas,
    )
    matrix = _guard("extract", stage_extract, cfg, tweets, out)
    print(f"{len(matrix)} features -> {out / CHECKPOINTS['counts']}")
    return 0


def _cmd_correlate(args) -> int:
    out = _resolve_out(args)
    gsr, timeframe = _gsr_from_checkpoint(out)
    matrix = CountMatrix.read_tsv(_checkpoint(out, "counts"))
    cfg = _minimal_cfg(
        out, timeframe,
        metric=args.metric, select_metric=args.select_metric,
        mi_bins=args.mi_bins, top_k=args.top_k, absolute_rank=args.abs_rank,
    )
    selected = _guard("correlate", stage_correlate, cfg, matrix, gsr, out)
    print(f"{len(selected)} features selected -> {out / CHECKPOINTS['selected']}")
    return 0


def _cmd_factorize(args) -> int:
    out = _resolve_out(args)
    selected = CountMatrix.read_tsv(_checkpoint(out, "selected"))
    timeframe = Timeframe(start=date(1970, 1, 1), days=selected.days)
    cfg = _minimal_cfg(out, timeframe, center_rows=args.center_rows)
    factors = _guard("factorize", stage_factorize, cfg, selected, out)
    print(f"rank {factors.rank} factors -> {out / CHECKPOINTS['factors']}")
    return 0


def _cmd_cluster(args) -> int:
    out = _resolve_out(args)
    factors = read_factors(_checkpoint(out, "factors"))
    timeframe = Timeframe(start=date(1970, 1, 1), days=factors.vt.shape[1])
    cfg = _minimal_cfg(
        out, timeframe,
        kmeans=KMeansConfig(
            k=args.k, runs=args.runs, max_iter=args.max_iter, seed=args.seed,
            rank=args.rank, weight_by_sigma=args.weight_by_sigma, init=args.init,
        ),
    )
    lookup = _guard("cluster", stage_cluster, cfg, factors, out)
    print(f"{len(lookup.members_of)} clusters -> {out / CHECKPOINTS['lookup']}")
    return 0


def _cmd_merge(args) -> int:
    out = _resolve_out(args)
    selected = CountMatrix.read_tsv(_checkpoint(out, "selected"))
    lookup = ClusterLookup.read_tsv(_checkpoint(out, "lookup"))
    result = _guard("merge", stage_merge, selected, lookup, out)
    print(f"{len(result.merged)} medoid rows -> {out / CHECKPOINTS['merged']}")
    return 0


def _cmd_report(args) -> int:
    out = _resolve_out(args)
    gsr, timeframe = _gsr_from_checkpoint(out)
    selected = CountMatrix.read_tsv(_checkpoint(out, "selected"))
    lookup = ClusterLookup.read_tsv(_checkpoint(out, "lookup"))
    merged = CountMatrix.read_tsv(_checkpoint(out, "merged"))
    members = selected.restrict(lookup.medoid_of)
    result = MergeResult(merged=merged, members=members, lookup=lookup)
    cfg = _minimal_cfg(
        out, timeframe,
        form=_form_from_args(args), metric=args.metric, mi_bins=args.mi_bins,
    )
    rows, summary, figures = _guard("report", stage_report, cfg, result, gsr, out)
    print(f"report for {len(rows)} medoids -> {out / CHECKPOINTS['report_csv']}")
    for fig in figures:
        print(f"figure -> {fig}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "extract": _cmd_extract,
    "correlate": _cmd_correlate,
    "factorize": _cmd_factorize,
    "cluster": _cmd_cluster,
    "merge": _cmd_merge,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser, commands = build_parser()
    pre, _ = parser.parse_known_args(argv)
    if getattr(pre, "config", None):
        # config values become subparser defaults, so explicit flags win
        values = load_config_file(Path(pre.config))
        chosen = commands[pre.command]
        known = {action.dest for action in chosen._actions}
        chosen.set_defaults(**{k: v for k, v in values.items() if k in known})
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except SignalMergeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
