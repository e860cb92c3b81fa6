"""signalmerge: strengthen weak text-feature signals against a daily
event series by clustering SVD feature representations and summing each
cluster's raw count vectors into its medoid.
"""

__version__ = "0.1.0"

from .cluster import (
    BeforeAfterRow,
    Clustering,
    ClusterLookup,
    KMeansConfig,
    MergeResult,
    build_lookup,
    kmeans,
    merge_cluster_vectors,
    recorrelate,
)
from .counts import CountMatrix, accumulate, filter_min_count, select_top_k
from .errors import PipelineError, SignalMergeError, UndefinedScoreError
from .factor import FactoredMatrix, jacobi_eigh, svd, truncate
from .ingest import IngestSummary, RawTweet, Timeframe, load_gsr, load_tweets
from .measures import (
    correlate_matrix,
    distance_correlation,
    kendall_tau,
    make_scorer,
    mutual_information,
    pearson,
    spearman,
)
from .pipeline import PipelineConfig, RunReport, run_pipeline
from .reporting import ReportSummary, emit_report, summarize
from .synth import SyntheticSpec, generate_synthetic
from .textnorm import (
    FeatureId,
    WordForm,
    clean_tweet,
    extract_features,
    lemmatize,
    stem_lancaster,
)
