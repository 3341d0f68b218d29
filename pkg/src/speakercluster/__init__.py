"""Speaker clustering for unlabeled utterance embeddings.

Discovers speaker clusters in a corpus of unit-norm voice embeddings
with no prior speaker labels or count: density-based clustering over
memory-bounded partial sets, iterative centroid merging, big-cluster
re-splitting and noise reassignment, evaluated with Cluster Purity and
Cluster Uniqueness.
"""

from .core import (
    Cluster,
    ClusteringResult,
    Corpus,
    PipelineParams,
    StageRecord,
    Utterance,
)
from .estimator import SpeakerClusterer, check_embedding_matrix
from .geometry import (
    DistanceMatrix,
    MemoryBudgetError,
    centroid,
    cluster_similarity,
    cosine_similarity,
    pairwise_distance_matrix,
)
from .hdbscan import CondensedTree, HdbscanLabels, run_hdbscan
from .metrics import (
    EvaluationReport,
    SimilarityReport,
    cluster_purity,
    cluster_uniqueness,
    data_coverage,
    evaluate,
    filter_small_clusters,
    noise_fraction,
    similarity_report,
)
from .pipeline import (
    CapSelection,
    MergeSchedule,
    assign_noise,
    cap_speaker_duration,
    cluster_partition,
    find_big_clusters,
    merge_clusters,
    partition_corpus,
    run_pipeline,
    split_big_cluster,
)
from .synthgen import SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "CapSelection",
    "Cluster",
    "ClusteringResult",
    "CondensedTree",
    "Corpus",
    "DistanceMatrix",
    "EvaluationReport",
    "HdbscanLabels",
    "MemoryBudgetError",
    "MergeSchedule",
    "PipelineParams",
    "SimilarityReport",
    "SpeakerClusterer",
    "StageRecord",
    "SynthSpec",
    "Utterance",
    "assign_noise",
    "cap_speaker_duration",
    "centroid",
    "check_embedding_matrix",
    "cluster_partition",
    "cluster_purity",
    "cluster_similarity",
    "cluster_uniqueness",
    "cosine_similarity",
    "data_coverage",
    "evaluate",
    "filter_small_clusters",
    "find_big_clusters",
    "generate",
    "merge_clusters",
    "noise_fraction",
    "pairwise_distance_matrix",
    "partition_corpus",
    "run_hdbscan",
    "run_pipeline",
    "similarity_report",
    "split_big_cluster",
]
