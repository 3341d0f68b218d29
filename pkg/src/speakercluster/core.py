"""Domain types shared by every stage of the clustering engine.

An embedding is a plain 1-D float array of fixed dimension with unit L2
norm; utterances, corpora, clusters and results are thin containers around
numpy storage. All containers are treated as immutable snapshots between
pipeline stages.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_DIMENSION = 256

UNIT_NORM_TOLERANCE = 1e-5
# Looser bound applied to file input, which may have been through a
# lossy text round-trip.
LOAD_NORM_TOLERANCE = 1e-3


def check_embedding(values, dimension: int | None = None) -> np.ndarray:
    """Validate a single embedding vector and return it as float64.

    Raises ValueError on non-finite values, zero norm, or a dimension
    mismatch when `dimension` is given.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"embedding must be 1-D, got shape {v.shape}")
    if dimension is not None and v.shape[0] != dimension:
        raise ValueError(
            f"embedding has dimension {v.shape[0]}, expected {dimension}"
        )
    if not np.all(np.isfinite(v)):
        raise ValueError("embedding contains non-finite values")
    if np.linalg.norm(v) == 0.0:
        raise ValueError("embedding has zero norm")
    return v


def unit_normalize(v: np.ndarray) -> np.ndarray:
    """Scale a vector to unit L2 norm."""
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / norm


@dataclass(frozen=True)
class Utterance:
    """One audio utterance: an opaque id plus its voice embedding.

    duration_seconds and true_speaker are optional; the ground-truth
    speaker label is only ever consulted by evaluation code.
    """

    id: str
    embedding: np.ndarray
    duration_seconds: float | None = None
    true_speaker: str | None = None

    def __post_init__(self):
        check_embedding(self.embedding)
        if self.duration_seconds is not None and self.duration_seconds <= 0:
            raise ValueError(
                f"utterance {self.id!r}: duration must be > 0, "
                f"got {self.duration_seconds}"
            )


class Corpus:
    """Ordered, immutable collection of utterances with uniform dimension.

    Insertion order is significant: partial-set chunking slices the corpus
    in input order. The stacked embedding matrix is built once at
    construction and shared read-only by all stages.
    """

    def __init__(self, utterances: list[Utterance]):
        if not utterances:
            raise ValueError("corpus must contain at least one utterance")
        dim = utterances[0].embedding.shape[0]
        seen: set[str] = set()
        for i, utt in enumerate(utterances):
            if utt.embedding.shape[0] != dim:
                raise ValueError(
                    f"utterance {i} ({utt.id!r}) has dimension "
                    f"{utt.embedding.shape[0]}, expected {dim}"
                )
            if utt.id in seen:
                raise ValueError(f"duplicate utterance id {utt.id!r}")
            seen.add(utt.id)
        self._utterances = list(utterances)
        self._matrix = np.ascontiguousarray(
            np.stack([u.embedding for u in utterances]), dtype=np.float64
        )
        self._matrix.setflags(write=False)

    @property
    def utterances(self) -> list[Utterance]:
        return self._utterances

    @property
    def dimension(self) -> int:
        return self._matrix.shape[1]

    @property
    def embedding_matrix(self) -> np.ndarray:
        """(n, D) read-only view of all embeddings in corpus order."""
        return self._matrix

    @property
    def true_speakers(self) -> list[str | None]:
        return [u.true_speaker for u in self._utterances]

    def has_labels(self) -> bool:
        return all(u.true_speaker is not None for u in self._utterances)

    def __len__(self) -> int:
        return len(self._utterances)

    def __getitem__(self, index: int) -> Utterance:
        return self._utterances[index]


def renormalized_mean(matrix: np.ndarray, indices) -> np.ndarray:
    """Mean of the selected rows, L2-renormalized.

    Rows are accumulated in ascending index order in double precision so
    the result is bitwise reproducible for a given member set.
    """
    idx = np.sort(np.asarray(list(indices), dtype=np.intp))
    if idx.size == 0:
        raise ValueError("cannot compute a centroid of zero members")
    total = np.add.reduce(matrix[idx].astype(np.float64, copy=False), axis=0)
    mean = total / idx.size
    norm = np.linalg.norm(mean)
    if norm == 0.0:
        raise ValueError("degenerate cluster: member mean has zero norm")
    return mean / norm


@dataclass(frozen=True)
class Cluster:
    """A set of corpus indices plus the cached centroid of their embeddings.

    origin records provenance ("partition:3", "merge", "split", ...).
    """

    id: int
    members: frozenset[int]
    centroid: np.ndarray
    origin: str = ""

    def __post_init__(self):
        if self.id < 0:
            raise ValueError("cluster id must be >= 0")
        if not self.members:
            raise ValueError("cluster must have at least one member")

    @classmethod
    def from_members(cls, cluster_id: int, members, matrix: np.ndarray,
                     origin: str = "") -> "Cluster":
        member_set = frozenset(int(i) for i in members)
        centroid = renormalized_mean(matrix, member_set)
        return cls(cluster_id, member_set, centroid, origin)

    @property
    def size(self) -> int:
        return len(self.members)

    def sorted_members(self) -> list[int]:
        return sorted(self.members)


@dataclass(frozen=True)
class StageRecord:
    """One entry of the pipeline provenance log."""

    stage: str
    clusters_before: int
    clusters_after: int
    noise_count: int


@dataclass
class ClusteringResult:
    """Flat clustering of a corpus: clusters, leftover noise, stage log."""

    clusters: list[Cluster]
    noise: frozenset[int]
    stage_log: list[StageRecord] = field(default_factory=list)

    def validate(self, corpus_size: int) -> None:
        """Assert the partition invariant: clusters + noise tile the corpus."""
        covered: set[int] = set()
        ids: set[int] = set()
        for cluster in self.clusters:
            if cluster.id in ids:
                raise AssertionError(f"duplicate cluster id {cluster.id}")
            ids.add(cluster.id)
            overlap = covered & cluster.members
            if overlap:
                raise AssertionError(
                    f"cluster {cluster.id} overlaps earlier clusters: "
                    f"{sorted(overlap)[:5]}"
                )
            covered |= cluster.members
        if covered & self.noise:
            raise AssertionError("noise set overlaps clustered points")
        if covered | self.noise != set(range(corpus_size)):
            raise AssertionError(
                "clusters and noise do not cover the corpus exactly"
            )

    def labels(self, corpus_size: int) -> np.ndarray:
        """Per-utterance cluster id, -1 for noise."""
        out = np.full(corpus_size, -1, dtype=np.int64)
        for cluster in self.clusters:
            out[cluster.sorted_members()] = cluster.id
        return out

    @property
    def cluster_sizes(self) -> list[int]:
        return [c.size for c in self.clusters]


@dataclass(frozen=True)
class PipelineParams:
    """Knobs of the clustering pipeline, with the documented defaults.

    partial_set_size bounds the number of utterances clustered at once
    (memory for the pairwise matrix grows quadratically). The merge
    thresholds run from merge_start down to merge_end in merge_step
    decrements. fit_noise_on_similarity is the floor a noise point must
    beat to be adopted by its closest cluster.
    """

    partial_set_size: int = 10_000
    min_cluster_size: int = 4
    min_samples: int = 1
    metric: str = "precomputed"
    fit_noise_on_similarity: float = 0.8
    merge_start: float = 0.96
    merge_end: float = 0.90
    merge_step: float = 0.01
    big_cluster_std_factor: float = 2.0
    report_min_cluster_utterances: int = 30
    speaker_duration_cap_seconds: float | None = 5400.0

    def __post_init__(self):
        if self.partial_set_size < 1:
            raise ValueError("partial_set_size must be positive")
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        if not 1 <= self.min_samples <= self.min_cluster_size:
            raise ValueError(
                "min_samples must satisfy 1 <= min_samples <= min_cluster_size"
            )
        if self.metric != "precomputed":
            raise ValueError("only the 'precomputed' metric is supported")
        if not -1.0 <= self.fit_noise_on_similarity <= 1.0:
            raise ValueError("fit_noise_on_similarity must be in [-1, 1]")
        if self.merge_end > self.merge_start:
            raise ValueError("merge_end must be <= merge_start")
        if self.merge_step <= 0:
            raise ValueError("merge_step must be > 0")
        if self.big_cluster_std_factor <= 0:
            raise ValueError("big_cluster_std_factor must be > 0")
        if self.report_min_cluster_utterances < 0:
            raise ValueError("report_min_cluster_utterances must be >= 0")
        if (self.speaker_duration_cap_seconds is not None
                and self.speaker_duration_cap_seconds <= 0):
            raise ValueError("speaker_duration_cap_seconds must be > 0")
