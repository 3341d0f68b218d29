"""Scikit-learn style front door: fit unit-norm embeddings, read labels_.

Wraps the chunk/cluster/merge/split/reassign pipeline behind the familiar
estimator API so it drops into sklearn pipelines and model-selection
tooling (get_params/set_params/clone all work).
"""

from __future__ import annotations

import os

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .core import Corpus, PipelineParams, UNIT_NORM_TOLERANCE, Utterance
from .pipeline import run_pipeline


def check_embedding_matrix(X, renormalize: bool = False) -> np.ndarray:
    """Validate an (n, D) embedding matrix for clustering.

    Checks finiteness and nonzero rows; rows are scaled to unit norm when
    `renormalize` is set, otherwise off-sphere rows are rejected.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"matrix must be nonempty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("embedding matrix contains non-finite values")
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        rows = np.nonzero(norms == 0.0)[0][:5].tolist()
        raise ValueError(f"zero-norm embedding rows: {rows}")
    if renormalize:
        return X / norms[:, None]
    off = np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE
    if np.any(off):
        rows = np.nonzero(off)[0][:5].tolist()
        raise ValueError(
            f"rows {rows} are not unit norm; pass renormalize=True "
            "or normalize the input"
        )
    return X


class SpeakerClusterer(ClusterMixin, BaseEstimator):
    """Cluster speaker embeddings without knowing the speaker count.

    Parameters
    ----------
    partial_set_size : int, default=10000
        Maximum utterances clustered in one chunk; bounds the pairwise
        matrix memory.
    min_cluster_size : int, default=4
        Smallest grouping considered a cluster.
    min_samples : int, default=1
        Neighborhood size for core points; smaller values classify
        fewer points as noise.
    fit_noise_on_similarity : float, default=0.8
        Noise points join their closest cluster when the centroid
        similarity is strictly above this.
    merge_start, merge_end, merge_step : float
        Decaying centroid-similarity schedule for cluster merging
        (defaults 0.96 down to 0.90 in steps of 0.01).
    big_cluster_std_factor : float, default=2.0
        Clusters larger than mean + factor * std of sizes get re-split
        with leaf selection.
    renormalize : bool, default=True
        Scale input rows to unit norm instead of rejecting them.
    n_jobs : int or None, default=None
        Chunks clustered in parallel; -1 uses all cores. Results are
        identical for any value.

    Attributes
    ----------
    labels_ : ndarray of shape (n_samples,)
        Cluster label per row, -1 for noise. Labels are contiguous
        0..k-1.
    cluster_centers_ : ndarray of shape (n_clusters, n_features)
        Unit-norm centroid per cluster, aligned with the labels.
    n_clusters_ : int
    result_ : ClusteringResult
        Full result including the per-stage provenance log.
    """

    def __init__(self, partial_set_size=10_000, min_cluster_size=4,
                 min_samples=1, fit_noise_on_similarity=0.8,
                 merge_start=0.96, merge_end=0.90, merge_step=0.01,
                 big_cluster_std_factor=2.0, renormalize=True,
                 n_jobs=None):
        self.partial_set_size = partial_set_size
        self.min_cluster_size = min_cluster_size
        self.min_samples = min_samples
        self.fit_noise_on_similarity = fit_noise_on_similarity
        self.merge_start = merge_start
        self.merge_end = merge_end
        self.merge_step = merge_step
        self.big_cluster_std_factor = big_cluster_std_factor
        self.renormalize = renormalize
        self.n_jobs = n_jobs

    def _params(self) -> PipelineParams:
        return PipelineParams(
            partial_set_size=self.partial_set_size,
            min_cluster_size=self.min_cluster_size,
            min_samples=self.min_samples,
            fit_noise_on_similarity=self.fit_noise_on_similarity,
            merge_start=self.merge_start,
            merge_end=self.merge_end,
            merge_step=self.merge_step,
            big_cluster_std_factor=self.big_cluster_std_factor,
        )

    def _threads(self) -> int:
        if self.n_jobs is None:
            return 1
        if self.n_jobs == -1:
            return os.cpu_count() or 1
        if self.n_jobs < 1:
            raise ValueError(f"n_jobs must be -1, None or >= 1, "
                             f"got {self.n_jobs}")
        return self.n_jobs

    def fit(self, X, y=None):
        """Cluster the rows of X; sets labels_ and cluster_centers_."""
        params = self._params()
        X = check_embedding_matrix(X, renormalize=self.renormalize)
        corpus = Corpus([
            Utterance(id=str(i), embedding=row) for i, row in enumerate(X)
        ])
        result = run_pipeline(corpus, params, threads=self._threads())

        ordered = sorted(result.clusters, key=lambda c: c.id)
        labels = np.full(len(corpus), -1, dtype=np.int64)
        for dense_label, cluster in enumerate(ordered):
            labels[cluster.sorted_members()] = dense_label
        self.labels_ = labels
        self.cluster_centers_ = (
            np.stack([c.centroid for c in ordered])
            if ordered else np.empty((0, X.shape[1]))
        )
        self.n_clusters_ = len(ordered)
        self.result_ = result
        return self
