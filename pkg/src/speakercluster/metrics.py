"""Evaluation of a clustering against ground-truth speaker labels.

Cluster Purity: share of a cluster's utterances owned by its dominant
speaker. Cluster Uniqueness: speakers dominating exactly one cluster,
divided by the number of clusters. Noise and coverage statistics round
out the report.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import Cluster, ClusteringResult, Corpus, StageRecord


def _labels_for(cluster: Cluster, labels) -> list[str]:
    got = []
    for i in cluster.sorted_members():
        label = labels[i]
        if label is None:
            raise ValueError(
                f"utterance index {i} has no ground-truth speaker label"
            )
        got.append(label)
    return got


def dominant_speaker(cluster: Cluster, labels) -> str:
    """Speaker with the most utterances in the cluster; ties go to the
    lexicographically smallest label."""
    counts = Counter(_labels_for(cluster, labels))
    top = max(counts.values())
    return min(label for label, c in counts.items() if c == top)


def cluster_purity(cluster: Cluster, labels) -> float:
    """Dominant-speaker utterance count over cluster size."""
    counts = Counter(_labels_for(cluster, labels))
    return max(counts.values()) / cluster.size


def cluster_uniqueness(clusters: list[Cluster], labels
                       ) -> tuple[int, float]:
    """(speakers dominating exactly one cluster, that count / #clusters)."""
    if not clusters:
        raise ValueError("uniqueness undefined for zero clusters")
    dominants = Counter(dominant_speaker(c, labels) for c in clusters)
    speakers_one_cluster = sum(1 for n in dominants.values() if n == 1)
    return speakers_one_cluster, speakers_one_cluster / len(clusters)


def filter_small_clusters(result: ClusteringResult, min_utterances: int
                          ) -> ClusteringResult:
    """Drop clusters with fewer than min_utterances members (strict <);
    their members move to the noise set."""
    if min_utterances < 0:
        raise ValueError("min_utterances must be >= 0")
    kept, dropped = [], set()
    for cluster in result.clusters:
        if cluster.size < min_utterances:
            dropped |= cluster.members
        else:
            kept.append(cluster)
    log = list(result.stage_log)
    log.append(StageRecord(
        f"filter_small_clusters({min_utterances})",
        len(result.clusters), len(kept),
        len(result.noise) + len(dropped),
    ))
    return ClusteringResult(clusters=kept,
                            noise=frozenset(result.noise | dropped),
                            stage_log=log)


def noise_fraction(result: ClusteringResult, corpus_size: int) -> float:
    return len(result.noise) / corpus_size


def data_coverage(result: ClusteringResult, top_fraction: float,
                  min_utterances: int) -> float:
    """Fraction of clustered utterances captured by the biggest
    ceil(top_fraction * k) clusters, after small-cluster filtering."""
    if not 0.0 < top_fraction <= 1.0:
        raise ValueError("top_fraction must be in (0, 1]")
    filtered = filter_small_clusters(result, min_utterances)
    if not filtered.clusters:
        raise ValueError(
            "no clusters remain after filtering; coverage undefined"
        )
    sizes = sorted((c.size for c in filtered.clusters), reverse=True)
    take = math.ceil(top_fraction * len(sizes))
    return sum(sizes[:take]) / sum(sizes)


@dataclass(frozen=True)
class SimilarityReport:
    """Pairwise cosine similarities split by same vs different speaker."""

    same_speaker: np.ndarray
    different_speaker: np.ndarray
    bin_edges: np.ndarray
    same_counts: np.ndarray
    different_counts: np.ndarray

    @property
    def same_mean(self) -> float:
        return float(self.same_speaker.mean())

    @property
    def same_std(self) -> float:
        return float(self.same_speaker.std())

    @property
    def different_mean(self) -> float:
        return float(self.different_speaker.mean())

    @property
    def different_std(self) -> float:
        return float(self.different_speaker.std())

    @property
    def overlap_fraction(self) -> float:
        """Shared probability mass of the two binned distributions."""
        p_same = self.same_counts / max(self.same_counts.sum(), 1)
        p_diff = self.different_counts / max(self.different_counts.sum(), 1)
        return float(np.minimum(p_same, p_diff).sum())


def similarity_report(corpus: Corpus, num_bins: int = 80,
                      max_pairs: int | None = None) -> SimilarityReport:
    """All-pairs similarities grouped by whether the two utterances share
    a ground-truth speaker.

    max_pairs caps the work on large corpora by seeded subsampling of
    pairs (deterministic). Requires at least two labeled speakers.
    """
    labels = corpus.true_speakers
    if any(label is None for label in labels):
        raise ValueError("similarity report needs speaker labels on "
                         "every utterance")
    if len(set(labels)) < 2:
        raise ValueError("similarity report needs at least 2 speakers")
    n = len(corpus)
    matrix = corpus.embedding_matrix
    unit = matrix / np.linalg.norm(matrix, axis=1, keepdims=True)
    iu, ju = np.triu_indices(n, k=1)
    if max_pairs is not None and iu.size > max_pairs:
        picked = np.random.default_rng(0).choice(iu.size, size=max_pairs,
                                                 replace=False)
        picked.sort()
        iu, ju = iu[picked], ju[picked]
    sims = np.clip(np.einsum("ij,ij->i", unit[iu], unit[ju]), -1.0, 1.0)
    arr = np.asarray(labels, dtype=object)
    same_mask = arr[iu] == arr[ju]
    same = sims[same_mask]
    diff = sims[~same_mask]
    if same.size == 0 or diff.size == 0:
        raise ValueError("need at least one same-speaker and one "
                         "different-speaker pair")
    edges = np.linspace(-1.0, 1.0, num_bins + 1)
    same_counts, _ = np.histogram(same, bins=edges)
    diff_counts, _ = np.histogram(diff, bins=edges)
    return SimilarityReport(
        same_speaker=same,
        different_speaker=diff,
        bin_edges=edges,
        same_counts=same_counts,
        different_counts=diff_counts,
    )


@dataclass(frozen=True)
class EvaluationReport:
    """Everything the results table reports, plus the coverage statistic.

    Purity, uniqueness and coverage are computed on the filtered
    clustering (small clusters removed); the noise fraction reflects the
    clusterer's own noise, before filtering.
    """

    num_clusters_total: int
    num_clusters_after_filter: int
    per_cluster_purity: dict[int, float]
    average_purity: float
    average_purity_weighted: float
    speakers_with_one_dominant_cluster: int
    cluster_uniqueness: float
    noise_fraction: float
    coverage: float
    min_utterances: int = 30
    top_fraction: float = 0.8


def evaluate(result: ClusteringResult, corpus: Corpus,
             min_utterances: int = 30, top_fraction: float = 0.8,
             weighted: bool = False) -> EvaluationReport:
    """Build the full report against the corpus ground-truth labels.

    `weighted` swaps the headline purity for the utterance-weighted
    variant; both are always present on the report.
    """
    if not corpus.has_labels():
        raise ValueError("evaluation requires ground-truth speaker labels")
    labels = corpus.true_speakers
    filtered = filter_small_clusters(result, min_utterances)
    if not filtered.clusters:
        raise ValueError("no clusters remain after filtering; "
                         "nothing to evaluate")
    purities = {c.id: cluster_purity(c, labels) for c in filtered.clusters}
    unweighted = sum(purities.values()) / len(purities)
    total_members = sum(c.size for c in filtered.clusters)
    weighted_avg = sum(purities[c.id] * c.size
                       for c in filtered.clusters) / total_members
    ones, uniqueness = cluster_uniqueness(filtered.clusters, labels)
    return EvaluationReport(
        num_clusters_total=len(result.clusters),
        num_clusters_after_filter=len(filtered.clusters),
        per_cluster_purity=purities,
        average_purity=weighted_avg if weighted else unweighted,
        average_purity_weighted=weighted_avg,
        speakers_with_one_dominant_cluster=ones,
        cluster_uniqueness=uniqueness,
        noise_fraction=noise_fraction(result, len(corpus)),
        coverage=data_coverage(result, top_fraction, min_utterances),
        min_utterances=min_utterances,
        top_fraction=top_fraction,
    )
