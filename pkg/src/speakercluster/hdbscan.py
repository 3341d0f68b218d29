"""Density-based hierarchical clustering over a precomputed distance matrix.

The stages, each exposed for independent testing:

    core_distances -> mutual_reachability -> minimum_spanning_tree
        -> build_hierarchy -> condense_tree -> select_clusters

Flat clusters are selected either by Excess of Mass ("eom": the antichain
of tree nodes maximizing total stability) or by taking all leaves of the
condensed tree ("leaf", which favors many small homogeneous clusters).
Everything is deterministic: ties in nearest neighbors, MST edges and
stabilities are broken toward the lower point or cluster index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import DistanceMatrix

# 1/distance blows up on duplicate points; cap the density scale there.
LAMBDA_CAP = 1e12


def _lambda_of(distance: float) -> float:
    if distance <= 0.0:
        return LAMBDA_CAP
    return min(1.0 / distance, LAMBDA_CAP)


def core_distances(dm: DistanceMatrix, min_samples: int) -> np.ndarray:
    """Distance from each point to its min_samples-th nearest neighbor.

    The point itself is excluded, so min_samples=1 gives the plain
    nearest-neighbor distance.
    """
    n = dm.n
    if n < 2:
        raise ValueError("core distances need at least 2 points")
    if not 1 <= min_samples <= n - 1:
        raise ValueError(
            f"min_samples must be in [1, {n - 1}], got {min_samples}"
        )
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        row = np.delete(dm.row(i), i)
        out[i] = np.partition(row, min_samples - 1)[min_samples - 1]
    return out


def mutual_reachability(dm: DistanceMatrix, core: np.ndarray
                        ) -> DistanceMatrix:
    """max(core(i), core(j), d(i, j)) for all pairs, condensed."""
    n = dm.n
    core = np.asarray(core, dtype=np.float64)
    if core.shape != (n,):
        raise ValueError(f"core distances must have shape ({n},)")
    out = np.empty_like(dm.data)
    pos = 0
    for i in range(n - 1):
        length = n - i - 1
        seg = np.maximum(dm.data[pos:pos + length], core[i + 1:])
        np.maximum(seg, core[i], out=seg)
        out[pos:pos + length] = seg
        pos += length
    # Mutual reachability can exceed the [0, 2] cosine bound only if core
    # distances do, which they cannot; construct directly.
    result = DistanceMatrix.__new__(DistanceMatrix)
    result.n = n
    result.data = out
    result.data.setflags(write=False)
    return result


def minimum_spanning_tree(mreach: DistanceMatrix) -> np.ndarray:
    """Prim's algorithm over the dense matrix; (n-1, 3) rows (i, j, weight).

    The next vertex on equal candidate weights is the lowest index
    (argmin first occurrence), and a vertex's attachment edge is only
    replaced on strict improvement, so the tree is deterministic.
    """
    n = mreach.n
    if n < 2:
        raise ValueError("spanning tree needs at least 2 points")
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf, dtype=np.float64)
    attach = np.full(n, -1, dtype=np.intp)
    edges = np.empty((n - 1, 3), dtype=np.float64)
    current = 0
    in_tree[0] = True
    for step in range(n - 1):
        row = mreach.row(current)
        improve = ~in_tree & (row < best)
        best[improve] = row[improve]
        attach[improve] = current
        candidates = np.where(in_tree, np.inf, best)
        nxt = int(np.argmin(candidates))
        edges[step] = (attach[nxt], nxt, best[nxt])
        in_tree[nxt] = True
        current = nxt
    return edges


def build_hierarchy(mst_edges: np.ndarray) -> np.ndarray:
    """Single linkage over the MST edges, sorted ascending by weight.

    Returns an (n-1, 4) merge table: (node_a, node_b, distance, size),
    points numbered 0..n-1 and merged components n..2n-2 in merge order.
    Equal-weight edges are processed in (weight, low index, high index)
    order.
    """
    mst_edges = np.asarray(mst_edges, dtype=np.float64)
    n = mst_edges.shape[0] + 1
    lo = np.minimum(mst_edges[:, 0], mst_edges[:, 1])
    hi = np.maximum(mst_edges[:, 0], mst_edges[:, 1])
    order = np.lexsort((hi, lo, mst_edges[:, 2]))

    parent = np.full(2 * n - 1, -1, dtype=np.intp)
    size = np.ones(2 * n - 1, dtype=np.intp)

    def find(x: int) -> int:
        root = x
        while parent[root] != -1:
            root = parent[root]
        while parent[x] != -1:
            parent[x], x = root, parent[x]
        return root

    merges = np.empty((n - 1, 4), dtype=np.float64)
    for k, e in enumerate(order):
        a = find(int(lo[e]))
        b = find(int(hi[e]))
        new = n + k
        parent[a] = new
        parent[b] = new
        size[new] = size[a] + size[b]
        merges[k] = (min(a, b), max(a, b), mst_edges[e, 2], size[new])
    return merges


@dataclass(frozen=True)
class CondensedTree:
    """Cluster hierarchy pruned by min_cluster_size.

    Each row says: `child` separated from cluster `parent` at density
    level `lambda_val` (= 1/distance) carrying `child_size` points.
    Children below n are single points falling out; children at or above
    n are sub-clusters. The root cluster has id n and covers all points.
    """

    n: int
    min_cluster_size: int
    parent: np.ndarray
    child: np.ndarray
    lambda_val: np.ndarray
    child_size: np.ndarray

    @property
    def root(self) -> int:
        return self.n

    def cluster_ids(self) -> list[int]:
        ids = {self.root}
        ids.update(int(c) for c in self.child if c >= self.n)
        return sorted(ids)

    def cluster_children(self, cluster: int) -> list[int]:
        mask = (self.parent == cluster) & (self.child >= self.n)
        return [int(c) for c in self.child[mask]]

    def cluster_size(self, cluster: int) -> int:
        if cluster == self.root:
            return self.n
        rows = np.nonzero(self.child == cluster)[0]
        return int(self.child_size[rows[0]])

    def birth_lambda(self, cluster: int) -> float:
        if cluster == self.root:
            return 0.0
        rows = np.nonzero(self.child == cluster)[0]
        return float(self.lambda_val[rows[0]])

    def point_rows(self) -> np.ndarray:
        """Indices of rows whose child is a single point."""
        return np.nonzero(self.child < self.n)[0]

    def validate(self) -> None:
        if np.any(self.lambda_val < 0):
            raise AssertionError("negative lambda in condensed tree")
        points = np.sort(self.child[self.child < self.n])
        if not np.array_equal(points, np.arange(self.n)):
            raise AssertionError("points do not fall out exactly once")
        for cluster in self.cluster_ids():
            birth = self.birth_lambda(cluster)
            mask = self.parent == cluster
            if np.any(self.lambda_val[mask] < birth - 1e-12):
                raise AssertionError(
                    "lambda decreases below a cluster's birth level"
                )


def condense_tree(merges: np.ndarray, min_cluster_size: int) -> CondensedTree:
    """Prune the single-linkage tree: splits with a side smaller than
    min_cluster_size become points falling out of the surviving cluster.
    """
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be >= 2")
    merges = np.asarray(merges, dtype=np.float64)
    n = merges.shape[0] + 1
    root = 2 * n - 2

    def node_children(node: int) -> tuple[int, int, float]:
        row = merges[node - n]
        return int(row[0]), int(row[1]), float(row[2])

    def node_size(node: int) -> int:
        return 1 if node < n else int(merges[node - n, 3])

    def subtree_points(node: int) -> list[int]:
        points, stack = [], [node]
        while stack:
            cur = stack.pop()
            if cur < n:
                points.append(cur)
            else:
                left, right, _ = node_children(cur)
                stack.extend((left, right))
        return points

    relabel = np.full(root + 1, -1, dtype=np.intp)
    relabel[root] = n
    next_label = n + 1
    visited = np.zeros(root + 1, dtype=bool)

    parents: list[int] = []
    children: list[int] = []
    lambdas: list[float] = []
    sizes: list[int] = []

    def emit_points(node: int, under: int, lam: float) -> None:
        for p in sorted(subtree_points(node)):
            parents.append(under)
            children.append(p)
            lambdas.append(lam)
            sizes.append(1)

    # BFS guarantees a node's condensed label is fixed before its subtree
    # is examined.
    queue = [root] if n > 1 else []
    while queue:
        node = queue.pop(0)
        if visited[node] or node < n:
            continue
        visited[node] = True
        label = int(relabel[node])
        left, right, dist = node_children(node)
        lam = _lambda_of(dist)
        left_size, right_size = node_size(left), node_size(right)

        if left_size >= min_cluster_size and right_size >= min_cluster_size:
            for side, side_size in ((left, left_size), (right, right_size)):
                relabel[side] = next_label
                parents.append(label)
                children.append(next_label)
                lambdas.append(lam)
                sizes.append(side_size)
                next_label += 1
                queue.append(side)
        elif left_size < min_cluster_size and right_size < min_cluster_size:
            emit_points(left, label, lam)
            emit_points(right, label, lam)
        elif left_size < min_cluster_size:
            emit_points(left, label, lam)
            relabel[right] = label
            queue.append(right)
        else:
            emit_points(right, label, lam)
            relabel[left] = label
            queue.append(left)

    return CondensedTree(
        n=n,
        min_cluster_size=min_cluster_size,
        parent=np.asarray(parents, dtype=np.intp),
        child=np.asarray(children, dtype=np.intp),
        lambda_val=np.asarray(lambdas, dtype=np.float64),
        child_size=np.asarray(sizes, dtype=np.intp),
    )


def compute_stability(tree: CondensedTree) -> dict[int, float]:
    """Stability per cluster: sum over departures of size * (lambda - birth)."""
    stability: dict[int, float] = {c: 0.0 for c in tree.cluster_ids()}
    births = {c: tree.birth_lambda(c) for c in stability}
    for parent, lam, size in zip(tree.parent, tree.lambda_val,
                                 tree.child_size):
        stability[int(parent)] += int(size) * (float(lam) - births[int(parent)])
    return stability


@dataclass(frozen=True)
class HdbscanLabels:
    """Flat clustering: per-point label (-1 = noise) and membership strength."""

    labels: np.ndarray
    probabilities: np.ndarray

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def noise_indices(self) -> np.ndarray:
        return np.nonzero(self.labels == -1)[0]


def _selectable(tree: CondensedTree, cluster: int) -> bool:
    # Non-root clusters are >= min_cluster_size by construction; the root
    # is only a legitimate flat cluster when the whole point set is.
    return tree.cluster_size(cluster) >= tree.min_cluster_size


def _select_eom(tree: CondensedTree) -> list[int]:
    stability = compute_stability(tree)
    clusters = tree.cluster_ids()
    best: dict[int, float] = {}
    take_here: dict[int, bool] = {}
    # Children always carry higher ids than their parent, so descending id
    # order processes leaves first.
    for cluster in sorted(clusters, reverse=True):
        kids = tree.cluster_children(cluster)
        kid_total = sum(best[k] for k in kids)
        if _selectable(tree, cluster) and stability[cluster] >= kid_total:
            best[cluster] = stability[cluster]
            take_here[cluster] = True
        else:
            best[cluster] = kid_total
            take_here[cluster] = False

    selected: list[int] = []
    stack = [tree.root]
    while stack:
        cluster = stack.pop()
        if take_here[cluster]:
            selected.append(cluster)
        else:
            stack.extend(tree.cluster_children(cluster))
    return sorted(selected)


def _select_leaf(tree: CondensedTree) -> list[int]:
    leaves = [c for c in tree.cluster_ids() if not tree.cluster_children(c)]
    return sorted(c for c in leaves if _selectable(tree, c))


def select_clusters(tree: CondensedTree, method: str = "eom"
                    ) -> HdbscanLabels:
    """Flatten the condensed tree into per-point labels.

    "eom" maximizes total stability over antichains of the tree; "leaf"
    takes every leaf cluster. Points whose departure row sits above every
    selected cluster are noise.
    """
    if method == "eom":
        selected = _select_eom(tree)
    elif method == "leaf":
        selected = _select_leaf(tree)
    else:
        raise ValueError(f"unknown cluster selection method {method!r}")

    label_of = {cluster: i for i, cluster in enumerate(selected)}
    selected_set = set(selected)
    parent_of: dict[int, int] = {}
    for p, c in zip(tree.parent, tree.child):
        if c >= tree.n:
            parent_of[int(c)] = int(p)

    labels = np.full(tree.n, -1, dtype=np.int64)
    point_lambda = np.zeros(tree.n, dtype=np.float64)
    for row in tree.point_rows():
        point = int(tree.child[row])
        lam = float(tree.lambda_val[row])
        point_lambda[point] = lam
        cluster = int(tree.parent[row])
        while cluster not in selected_set and cluster in parent_of:
            cluster = parent_of[cluster]
        if cluster in selected_set and lam >= tree.birth_lambda(cluster):
            labels[point] = label_of[cluster]

    probabilities = np.zeros(tree.n, dtype=np.float64)
    for cluster_label in range(len(selected)):
        members = np.nonzero(labels == cluster_label)[0]
        if members.size == 0:
            continue
        lam_max = point_lambda[members].max()
        if lam_max <= 0.0:
            probabilities[members] = 1.0
        else:
            probabilities[members] = np.minimum(
                point_lambda[members] / lam_max, 1.0
            )
    return HdbscanLabels(labels=labels, probabilities=probabilities)


def run_hdbscan(dm: DistanceMatrix, min_cluster_size: int = 4,
                min_samples: int = 1, method: str = "eom") -> HdbscanLabels:
    """Full pass: distance matrix in, flat labels out."""
    if dm.n < 2:
        raise ValueError("clustering needs at least 2 points")
    core = core_distances(dm, min_samples)
    mreach = mutual_reachability(dm, core)
    mst = minimum_spanning_tree(mreach)
    merges = build_hierarchy(mst)
    tree = condense_tree(merges, min_cluster_size)
    return select_clusters(tree, method)
