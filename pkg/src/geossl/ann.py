"""Approximate nearest neighbors via randomized projection trees.

Each tree recursively splits the point set by the hyperplane equidistant
to two randomly chosen points. Queries descend every tree with a shared
priority queue ordered by margin distance, so cells near the query on
the far side of a split are still visited; candidates from visited
leaves are re-ranked exactly. Fully deterministic given the seed.
"""

import heapq
from dataclasses import dataclass, field

import numpy as np


@dataclass
class _Node:
    # leaf: indices is set; internal: normal/offset/children are set
    indices: np.ndarray = None
    normal: np.ndarray = None
    offset: float = 0.0
    left: "_Node" = None
    right: "_Node" = None


@dataclass
class RpForestIndex:
    points: np.ndarray
    n_trees: int = 16
    leaf_size: int = 32
    seed: int = 0
    _roots: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        rng = np.random.default_rng(self.seed)
        all_idx = np.arange(self.points.shape[0])
        self._roots = [self._build(all_idx, rng, depth=0) for _ in range(self.n_trees)]

    def _build(self, idx, rng, depth):
        if idx.size <= self.leaf_size or depth > 60:
            return _Node(indices=idx)
        a, b = rng.choice(idx, size=2, replace=False)
        diff = self.points[a] - self.points[b]
        nrm = np.linalg.norm(diff)
        if nrm < 1e-12:
            # duplicate pivots: split arbitrarily but deterministically
            half = idx.size // 2
            perm = rng.permutation(idx)
            return _Node(normal=np.zeros_like(diff), offset=0.0,
                         left=self._build(perm[:half], rng, depth + 1),
                         right=self._build(perm[half:], rng, depth + 1))
        normal = diff / nrm
        offset = float(normal @ (self.points[a] + self.points[b]) / 2.0)
        side = self.points[idx] @ normal - offset
        left, right = idx[side <= 0.0], idx[side > 0.0]
        if left.size == 0 or right.size == 0:
            half = idx.size // 2
            perm = rng.permutation(idx)
            left, right = perm[:half], perm[half:]
        return _Node(normal=normal, offset=offset,
                     left=self._build(left, rng, depth + 1),
                     right=self._build(right, rng, depth + 1))

    def query(self, q, k, search_k=None, exclude=None):
        """Indices of approximately the k nearest points to q.

        ``search_k`` bounds how many candidates are gathered before the
        exact re-rank (default: max(32 * n_trees, 20 * k)). ``exclude``
        drops one index (typically the query point itself).
        """
        q = np.asarray(q, dtype=np.float64)
        if search_k is None:
            search_k = max(32 * self.n_trees, 20 * k)
        heap = []  # (margin, tiebreak, node)
        tie = 0
        for root in self._roots:
            heapq.heappush(heap, (0.0, tie, root))
            tie += 1
        seen = []
        n_cand = 0
        while heap and n_cand < search_k:
            _, _, node = heapq.heappop(heap)
            while node.indices is None:
                margin = float(q @ node.normal - node.offset) if node.normal is not None else 0.0
                near, far = (node.left, node.right) if margin <= 0 else (node.right, node.left)
                heapq.heappush(heap, (abs(margin), tie, far))
                tie += 1
                node = near
            seen.append(node.indices)
            n_cand += node.indices.size
        cand = np.unique(np.concatenate(seen)) if seen else np.empty(0, dtype=np.int64)
        if exclude is not None:
            cand = cand[cand != exclude]
        if cand.size == 0:
            return cand
        d2 = np.sum((self.points[cand] - q) ** 2, axis=1)
        order = np.argsort(d2, kind="stable")[:k]
        return cand[order]
