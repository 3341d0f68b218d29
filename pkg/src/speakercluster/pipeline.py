"""Five-stage clustering pipeline over a corpus of utterance embeddings.

    1. chunk the corpus into partial sets and cluster each independently
    2. merge clusters whose centroids agree, over a decaying similarity
       schedule
    3. re-split unusually big clusters with leaf selection
    4. merge again so the new small clusters regroup
    5. offer leftover noise points to their closest cluster

Every stage consumes and produces immutable snapshots; the partition
invariant (clusters + noise tile the corpus) is asserted after each one.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    Cluster,
    ClusteringResult,
    Corpus,
    PipelineParams,
    StageRecord,
)
from .geometry import pairwise_distance_matrix
from .hdbscan import run_hdbscan


@dataclass(frozen=True)
class MergeSchedule:
    """Strictly descending similarity thresholds for centroid merging."""

    thresholds: tuple[float, ...]

    def __post_init__(self):
        if not self.thresholds:
            raise ValueError("merge schedule must not be empty")
        for t in self.thresholds:
            if not -1.0 < t <= 1.0:
                raise ValueError(f"threshold {t} outside (-1, 1]")
        if any(b >= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be strictly descending")

    @classmethod
    def from_range(cls, start: float, end: float, step: float
                   ) -> "MergeSchedule":
        if step <= 0:
            raise ValueError("merge_step must be > 0")
        if end > start:
            raise ValueError("merge_end must be <= merge_start")
        count = int(np.floor((start - end) / step + 1e-9)) + 1
        thresholds = tuple(round(start - k * step, 12) for k in range(count))
        return cls(thresholds)

    @classmethod
    def from_params(cls, params: PipelineParams) -> "MergeSchedule":
        return cls.from_range(params.merge_start, params.merge_end,
                              params.merge_step)


def partition_corpus(n: int, partial_set_size: int, min_cluster_size: int
                     ) -> list[range]:
    """Contiguous index ranges of at most partial_set_size utterances.

    A trailing range shorter than min_cluster_size is appended to the
    previous one, so no partition is too small to cluster.
    """
    if n < 1:
        raise ValueError("cannot partition an empty corpus")
    if partial_set_size < min_cluster_size:
        raise ValueError("partial_set_size must be >= min_cluster_size")
    ranges = [range(start, min(start + partial_set_size, n))
              for start in range(0, n, partial_set_size)]
    if len(ranges) > 1 and len(ranges[-1]) < min_cluster_size:
        last = ranges.pop()
        prev = ranges.pop()
        ranges.append(range(prev.start, last.stop))
    return ranges


def cluster_partition(corpus: Corpus, span: range, params: PipelineParams,
                      id_start: int = 0, partition_index: int = 0
                      ) -> ClusteringResult:
    """Cluster one partial set; cluster ids start at id_start."""
    if len(span) < 2:
        raise ValueError(
            f"partition {span} has fewer than 2 utterances"
        )
    matrix = corpus.embedding_matrix
    dm = pairwise_distance_matrix(matrix[span.start:span.stop])
    labels = run_hdbscan(dm, params.min_cluster_size, params.min_samples,
                         method="eom")
    clusters = []
    for local_label in range(labels.n_clusters):
        members = (np.nonzero(labels.labels == local_label)[0]
                   + span.start)
        clusters.append(Cluster.from_members(
            id_start + local_label, members, matrix,
            origin=f"partition:{partition_index}",
        ))
    noise = frozenset(
        int(i) + span.start for i in labels.noise_indices()
    )
    return ClusteringResult(clusters=clusters, noise=noise)


def merge_clusters(clusters: list[Cluster], schedule: MergeSchedule,
                   matrix: np.ndarray, origin: str = "merge"
                   ) -> list[Cluster]:
    """Greedy centroid merging over the decaying threshold schedule.

    At each threshold the highest-similarity pair at or above it is
    merged and centroids recomputed, repeatedly, before decaying to the
    next level. The merged cluster keeps the smaller id; similarity ties
    go to the lowest id pair.
    """
    work = sorted(clusters, key=lambda c: c.id)
    if len(work) < 2:
        return work
    centroids = np.stack([c.centroid for c in work])
    for threshold in schedule.thresholds:
        while len(work) >= 2:
            sims = np.clip(centroids @ centroids.T, -1.0, 1.0)
            sims[np.tril_indices(len(work))] = -2.0
            flat = int(np.argmax(sims))
            i, j = divmod(flat, len(work))
            if sims[i, j] < threshold:
                break
            merged = Cluster.from_members(
                work[i].id, work[i].members | work[j].members, matrix,
                origin=origin,
            )
            work[i] = merged
            del work[j]
            centroids = np.delete(centroids, j, axis=0)
            centroids[i] = merged.centroid
    return work


def find_big_clusters(clusters: list[Cluster], std_factor: float
                      ) -> set[int]:
    """Ids of clusters bigger than mean size + std_factor * population std."""
    if not clusters:
        return set()
    sizes = np.array([c.size for c in clusters], dtype=np.float64)
    cutoff = sizes.mean() + std_factor * sizes.std()
    return {c.id for c, size in zip(clusters, sizes) if size > cutoff}


def split_big_cluster(corpus: Corpus, cluster: Cluster,
                      params: PipelineParams, id_source=None
                      ) -> tuple[list[Cluster], frozenset[int]]:
    """Recluster one big cluster with leaf selection.

    Returns (clusters, new_noise). A genuine multi-speaker cluster comes
    back as two or more leaf clusters plus the points the sub-run could
    not place; a homogeneous one is returned unchanged.
    """
    if cluster.size < 2 * params.min_cluster_size:
        return [cluster], frozenset()
    members = np.array(cluster.sorted_members(), dtype=np.intp)
    matrix = corpus.embedding_matrix
    dm = pairwise_distance_matrix(matrix[members])
    labels = run_hdbscan(dm, params.min_cluster_size, params.min_samples,
                         method="leaf")
    if labels.n_clusters < 2:
        return [cluster], frozenset()
    if id_source is None:
        id_source = itertools.count(cluster.id)
    pieces = []
    for local_label in range(labels.n_clusters):
        piece_members = members[labels.labels == local_label]
        pieces.append(Cluster.from_members(
            next(id_source), piece_members, matrix, origin="split",
        ))
    new_noise = frozenset(int(members[i]) for i in labels.noise_indices())
    return pieces, new_noise


def assign_noise(corpus: Corpus, clusters: list[Cluster],
                 noise: frozenset[int], fit_noise_on_similarity: float
                 ) -> tuple[list[Cluster], frozenset[int]]:
    """Attach each noise point to its most similar cluster centroid,
    if that similarity is strictly above the threshold.

    All assignments are decided against the incoming centroids; centroids
    are recomputed once afterwards, so the outcome does not depend on the
    order noise points are visited. Ties go to the lower cluster id.
    """
    if not clusters or not noise:
        return list(clusters), noise
    ordered = sorted(clusters, key=lambda c: c.id)
    centroids = np.stack([c.centroid for c in ordered])
    matrix = corpus.embedding_matrix
    noise_idx = np.array(sorted(noise), dtype=np.intp)
    sims = np.clip(centroids @ matrix[noise_idx].T, -1.0, 1.0)
    best = sims.argmax(axis=0)
    best_sim = sims[best, np.arange(len(noise_idx))]

    adopted: dict[int, list[int]] = {}
    remaining = []
    for point, cluster_pos, sim in zip(noise_idx, best, best_sim):
        if sim > fit_noise_on_similarity:
            adopted.setdefault(int(cluster_pos), []).append(int(point))
        else:
            remaining.append(int(point))

    out = []
    for pos, cluster in enumerate(ordered):
        if pos in adopted:
            out.append(Cluster.from_members(
                cluster.id, cluster.members | set(adopted[pos]),
                matrix, origin=cluster.origin,
            ))
        else:
            out.append(cluster)
    return out, frozenset(remaining)


def run_pipeline(corpus: Corpus, params: PipelineParams | None = None,
                 threads: int = 1) -> ClusteringResult:
    """All five stages in order, with a provenance log entry per stage."""
    if params is None:
        params = PipelineParams()
    n = len(corpus)
    matrix = corpus.embedding_matrix
    schedule = MergeSchedule.from_params(params)
    log: list[StageRecord] = []

    spans = partition_corpus(n, params.partial_set_size,
                             params.min_cluster_size)

    def one_partition(item):
        index, span = item
        # ids never collide: a partition cannot produce more clusters
        # than it has utterances
        return cluster_partition(corpus, span, params,
                                 id_start=span.start,
                                 partition_index=index)
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(one_partition, enumerate(spans)))
    else:
        partials = [one_partition(item) for item in enumerate(spans)]

    clusters: list[Cluster] = []
    noise: set[int] = set()
    for partial in partials:
        clusters.extend(partial.clusters)
        noise.update(partial.noise)
    noise = frozenset(noise)
    log.append(StageRecord("partition_clustering", 0, len(clusters),
                           len(noise)))
    _check(clusters, noise, n)

    before = len(clusters)
    clusters = merge_clusters(clusters, schedule, matrix, origin="merge:1")
    log.append(StageRecord("merge_pass_1", before, len(clusters),
                           len(noise)))
    _check(clusters, noise, n)

    before = len(clusters)
    big_ids = find_big_clusters(clusters, params.big_cluster_std_factor)
    id_source = itertools.count(n)
    next_clusters: list[Cluster] = []
    extra_noise: set[int] = set()
    for cluster in clusters:
        if cluster.id in big_ids:
            pieces, new_noise = split_big_cluster(corpus, cluster, params,
                                                  id_source)
            next_clusters.extend(pieces)
            extra_noise.update(new_noise)
        else:
            next_clusters.append(cluster)
    clusters = next_clusters
    noise = frozenset(noise | extra_noise)
    log.append(StageRecord("split_big_clusters", before, len(clusters),
                           len(noise)))
    _check(clusters, noise, n)

    before = len(clusters)
    clusters = merge_clusters(clusters, schedule, matrix, origin="merge:2")
    log.append(StageRecord("merge_pass_2", before, len(clusters),
                           len(noise)))
    _check(clusters, noise, n)

    before = len(clusters)
    clusters, noise = assign_noise(corpus, clusters, noise,
                                   params.fit_noise_on_similarity)
    log.append(StageRecord("assign_noise", before, len(clusters),
                           len(noise)))
    result = ClusteringResult(clusters=clusters, noise=noise, stage_log=log)
    result.validate(n)
    return result


def _check(clusters: list[Cluster], noise: frozenset[int], n: int) -> None:
    ClusteringResult(clusters=list(clusters), noise=noise).validate(n)


@dataclass(frozen=True)
class CapSelection:
    """Utterances of one cluster kept under the duration cap, in corpus
    order, plus the overflow."""

    selected: tuple[int, ...]
    excess: tuple[int, ...]


def cap_speaker_duration(result: ClusteringResult, corpus: Corpus,
                         cap_seconds: float) -> dict[int, CapSelection]:
    """Per cluster: keep utterances in input order until the cumulative
    duration would pass the cap; the rest are flagged excess, not dropped.

    An utterance landing exactly on the cap is still included.
    """
    if cap_seconds <= 0:
        raise ValueError("cap_seconds must be > 0")
    missing = [corpus[i].id
               for cluster in result.clusters
               for i in cluster.sorted_members()
               if corpus[i].duration_seconds is None]
    if missing:
        shown = ", ".join(missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        raise ValueError(
            f"utterances without duration cannot be capped: {shown}{more}"
        )
    out = {}
    for cluster in result.clusters:
        selected: list[int] = []
        excess: list[int] = []
        cumulative = 0.0
        over = False
        for i in cluster.sorted_members():
            duration = corpus[i].duration_seconds
            if not over and cumulative + duration <= cap_seconds:
                cumulative += duration
                selected.append(i)
            else:
                over = True
                excess.append(i)
        out[cluster.id] = CapSelection(tuple(selected), tuple(excess))
    return out
