"""Cosine similarity kernels and condensed pairwise distance matrices.

Distances are cosine distances (1 - similarity), stored condensed: only
the upper triangle, n*(n-1)/2 entries, which halves memory relative to a
square matrix. Row and square views are reconstructed on demand.
"""

from __future__ import annotations

import numpy as np
import psutil

from .core import Cluster, renormalized_mean

# Fraction of available memory a single pairwise matrix may claim before
# pairwise_distance_matrix refuses and tells the caller to chunk.
_MEMORY_SAFETY_FRACTION = 0.5


class MemoryBudgetError(MemoryError):
    """Pairwise matrix would not fit; carries required vs available bytes."""

    def __init__(self, n: int, required_bytes: int, available_bytes: int):
        self.n = n
        self.required_bytes = required_bytes
        self.available_bytes = available_bytes
        super().__init__(
            f"condensed distance matrix for n={n} needs "
            f"{required_bytes / 1e9:.2f} GB but only "
            f"{available_bytes / 1e9:.2f} GB is budgeted; "
            f"cluster in smaller partial sets"
        )


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1].

    For unit vectors this is the plain dot product. Raises on dimension
    mismatch or zero-norm input.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite values in input vectors")
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValueError("cosine similarity undefined for zero-norm vectors")
    sim = float(np.dot(a, b) / (norm_a * norm_b))
    return min(1.0, max(-1.0, sim))


class DistanceMatrix:
    """Symmetric pairwise cosine-distance matrix in condensed storage.

    Entry (i, j) with i < j lives at condensed position
    n*i - i*(i+1)/2 + (j - i - 1); the diagonal is zero and not stored.
    """

    def __init__(self, n: int, condensed: np.ndarray):
        expected = n * (n - 1) // 2
        condensed = np.asarray(condensed, dtype=np.float64)
        if condensed.shape != (expected,):
            raise ValueError(
                f"condensed data for n={n} must have {expected} entries, "
                f"got shape {condensed.shape}"
            )
        if expected and not np.all(np.isfinite(condensed)):
            raise ValueError("distance matrix contains non-finite entries")
        if expected and (condensed.min() < -1e-9 or condensed.max() > 2.0 + 1e-9):
            raise ValueError("cosine distances must lie in [0, 2]")
        self.n = n
        self.data = np.clip(condensed, 0.0, 2.0)
        self.data.setflags(write=False)

    def condensed_index(self, i: int, j: int) -> int:
        if i == j:
            raise ValueError("diagonal entries are not stored")
        if i > j:
            i, j = j, i
        return self.n * i - i * (i + 1) // 2 + (j - i - 1)

    def entry(self, i: int, j: int) -> float:
        if i == j:
            return 0.0
        return float(self.data[self.condensed_index(i, j)])

    def row(self, i: int) -> np.ndarray:
        """Full row i as a dense length-n vector (diagonal entry 0)."""
        n = self.n
        out = np.zeros(n, dtype=np.float64)
        if i + 1 < n:
            start = n * i - i * (i + 1) // 2
            out[i + 1:] = self.data[start:start + (n - i - 1)]
        if i > 0:
            js = np.arange(i, dtype=np.intp)
            pos = n * js - js * (js + 1) // 2 + (i - js - 1)
            out[:i] = self.data[pos]
        return out

    def as_square(self) -> np.ndarray:
        """Materialize the full symmetric square matrix."""
        n = self.n
        out = np.zeros((n, n), dtype=np.float64)
        iu = np.triu_indices(n, k=1)
        out[iu] = self.data
        out[(iu[1], iu[0])] = self.data
        return out

    @classmethod
    def from_square(cls, square) -> "DistanceMatrix":
        square = np.asarray(square, dtype=np.float64)
        if square.ndim != 2 or square.shape[0] != square.shape[1]:
            raise ValueError(f"expected a square matrix, got {square.shape}")
        n = square.shape[0]
        return cls(n, square[np.triu_indices(n, k=1)])


def pairwise_distance_matrix(points, max_bytes: int | None = None
                             ) -> DistanceMatrix:
    """All-pairs cosine distances for a stack of embeddings.

    Accepts a list of vectors or an (n, D) matrix; rows are normalized
    before the dot products so the result matches 1 - cosine_similarity
    entry by entry. Similarities are computed blockwise so peak memory
    stays near the condensed result itself.

    Raises MemoryBudgetError when the condensed result would exceed
    max_bytes (default: half of currently available memory).
    """
    matrix = np.asarray(points, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix.reshape(1, -1)
    n = matrix.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points for a distance matrix")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("non-finite values in input points")
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm vector in input points")

    required = n * (n - 1) // 2 * 8
    if max_bytes is None:
        max_bytes = int(psutil.virtual_memory().available
                        * _MEMORY_SAFETY_FRACTION)
    if required > max_bytes:
        raise MemoryBudgetError(n, required, max_bytes)

    unit = matrix / norms[:, None]
    condensed = np.empty(n * (n - 1) // 2, dtype=np.float64)
    block = max(1, min(n, 8_000_000 // max(n, 1)))
    pos = 0
    for start in range(0, n - 1, block):
        stop = min(start + block, n - 1)
        sims = unit[start:stop] @ unit.T
        for i in range(start, stop):
            seg = 1.0 - sims[i - start, i + 1:]
            condensed[pos:pos + (n - i - 1)] = seg
            pos += n - i - 1
    np.clip(condensed, 0.0, 2.0, out=condensed)
    return DistanceMatrix(n, condensed)


def centroid(members) -> np.ndarray:
    """L2-renormalized arithmetic mean of the given embeddings.

    Raises on an empty list and on the degenerate case where the mean is
    the zero vector (e.g. antipodal pairs).
    """
    vectors = [np.asarray(v, dtype=np.float64) for v in members]
    if not vectors:
        raise ValueError("cannot compute a centroid of zero members")
    stacked = np.stack(vectors)
    return renormalized_mean(stacked, range(len(vectors)))


def cluster_similarity(a: Cluster, b: Cluster) -> float:
    """Cosine similarity between two cluster centroids."""
    return cosine_similarity(a.centroid, b.centroid)
