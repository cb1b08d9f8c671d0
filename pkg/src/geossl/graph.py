"""Gaussian geometric graphs, their Laplacians, and the kernel extension operator.

Nodes are rows of an embedding matrix; edge weights decay with squared
Euclidean distance through a Gaussian kernel of width sigma. Graphs can
be built dense, with exact k-nearest neighbors, or with the randomized
projection-tree ANN backend. The combinatorial Laplacian
L = diag(A 1) - A is the only Laplacian used here.

Weights for a selected edge are always recomputed from one canonical
expression (same reduction order for both orientations), so adjacency
matrices are exactly symmetric and the dense and full-budget kNN paths
agree bitwise.
"""

import csv
import struct
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ann import RpForestIndex

CONSTRUCTION_MODES = ("dense", "knn_exact", "knn_ann")

# dense-mode memory guard: weights below this are dropped; pass
# weight_floor=0.0 to keep every pair (oracle comparisons do)
DENSE_WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class GeometricGraph:
    """Symmetric Gaussian-weighted graph over n embedded points."""

    n: int
    adjacency: sp.csr_matrix       # zero diagonal, exactly symmetric
    sigma: float
    k: int                         # neighbor budget; 0 means dense
    construction_mode: str
    neighbor_lists: np.ndarray = None   # (n, k) pre-symmetrization picks, kNN modes only


@dataclass(frozen=True)
class LaplacianOperator:
    matrix: sp.csr_matrix
    degree: np.ndarray


def gaussian_weight(xi, xj, sigma):
    """Edge weight exp(-||xi - xj||^2 / (2 sigma^2)) for distinct nodes."""
    if sigma <= 0:
        raise ValueError(f"kernel width sigma must be positive, got {sigma}")
    xi = np.asarray(xi, dtype=np.float64)
    xj = np.asarray(xj, dtype=np.float64)
    if xi.shape != xj.shape:
        raise ValueError(f"embedding shape mismatch: {xi.shape} vs {xj.shape}")
    return float(np.exp(-np.sum((xi - xj) ** 2) / (2.0 * sigma * sigma)))


def _as_points(embeddings):
    """Accept an EmbeddingSet-like object (has .data) or a plain matrix."""
    data = getattr(embeddings, "data", embeddings)
    pts = np.ascontiguousarray(data, dtype=np.float64)
    if pts.ndim != 2:
        raise ValueError(f"expected an (n, F) matrix, got shape {pts.shape}")
    return pts


def _edge_weights(points, rows, cols, sigma):
    # canonical per-edge weight; used by every construction path so that
    # both orientations of an edge see the same rounding
    out = np.empty(rows.shape[0])
    chunk = max(1, int(4e7) // max(points.shape[1], 1))
    for start in range(0, rows.shape[0], chunk):
        stop = min(start + chunk, rows.shape[0])
        d2 = np.sum((points[rows[start:stop]] - points[cols[start:stop]]) ** 2, axis=1)
        out[start:stop] = np.exp(-d2 / (2.0 * sigma * sigma))
    return out


def _knn_select_exact(points, k, chunk=512):
    """(n, k) nearest-neighbor indices per node, self excluded, brute force."""
    n = points.shape[0]
    sq = np.einsum("ij,ij->i", points, points)
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = sq[start:stop, None] - 2.0 * (points[start:stop] @ points.T) + sq[None, :]
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        for r in range(stop - start):
            cand = part[r]
            vals = d2[r, cand]
            order = np.lexsort((cand, vals))
            out[start + r] = cand[order]
    return out


def _knn_select_ann(points, k, seed, n_trees, leaf_size, search_k):
    index = RpForestIndex(points, n_trees=n_trees, leaf_size=leaf_size, seed=seed)
    n = points.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    for i in range(n):
        nb = index.query(points[i], k, search_k=search_k, exclude=i)
        if nb.size < k:
            # fill from a brute-force pass over everything; rare, tiny sets only
            d2 = np.sum((points - points[i]) ** 2, axis=1)
            d2[i] = np.inf
            order = np.lexsort((np.arange(n), d2))
            nb = order[:k]
        out[i] = nb
    return out


def build_graph(embeddings, sigma, k=0, mode="dense", seed=0,
                weight_floor=DENSE_WEIGHT_FLOOR,
                n_trees=24, leaf_size=48, search_k=None):
    """Construct a Gaussian geometric graph from embeddings.

    Parameters
    ----------
    embeddings : EmbeddingSet or (n, F) array
    sigma : float
        Gaussian kernel width, > 0.
    k : int
        Neighbor budget for the kNN modes; 0 together with mode="dense"
        weighs every pair. Must satisfy k < n.
    mode : str
        "dense", "knn_exact", or "knn_ann". kNN selections are
        symmetrized by union: an edge survives if either endpoint picked
        it. "knn_ann" is deterministic given ``seed``.
    weight_floor : float
        Dense mode drops weights below this floor to bound memory; set
        to 0.0 to keep everything.

    Returns
    -------
    GeometricGraph
    """
    if sigma <= 0:
        raise ValueError(f"kernel width sigma must be positive, got {sigma}")
    if mode not in CONSTRUCTION_MODES:
        raise ValueError(f"unknown construction mode {mode!r}")
    points = _as_points(embeddings)
    n = points.shape[0]
    if n < 2:
        raise ValueError(f"a graph needs at least 2 nodes, got n={n}")

    neighbor_lists = None
    if mode == "dense":
        if k != 0:
            raise ValueError("dense mode takes k=0")
        iu, ju = np.triu_indices(n, k=1)
        w = _edge_weights(points, iu, ju, sigma)
        if weight_floor > 0.0:
            keep = w >= weight_floor
            iu, ju, w = iu[keep], ju[keep], w[keep]
        rows = np.concatenate([iu, ju])
        cols = np.concatenate([ju, iu])
        data = np.concatenate([w, w])
    else:
        if not 1 <= k < n:
            raise ValueError(f"neighbor budget k={k} must satisfy 1 <= k < n={n}")
        if mode == "knn_exact":
            neighbor_lists = _knn_select_exact(points, k)
        else:
            neighbor_lists = _knn_select_ann(points, k, seed, n_trees, leaf_size, search_k)
        src = np.repeat(np.arange(n, dtype=np.int64), k)
        dst = neighbor_lists.reshape(-1)
        # union symmetrization: dedupe unordered pairs, weigh each once
        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
        iu, ju = pairs[:, 0], pairs[:, 1]
        w = _edge_weights(points, iu, ju, sigma)
        rows = np.concatenate([iu, ju])
        cols = np.concatenate([ju, iu])
        data = np.concatenate([w, w])

    adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    adj.sort_indices()
    return GeometricGraph(n=n, adjacency=adj, sigma=float(sigma), k=int(k),
                          construction_mode=mode, neighbor_lists=neighbor_lists)


def laplacian(graph):
    """Combinatorial Laplacian L = diag(A 1) - A of a geometric graph."""
    adj = graph.adjacency
    degree = np.asarray(adj.sum(axis=1)).ravel()
    lap = (sp.diags(degree) - adj).tocsr()
    lap.sort_indices()
    return LaplacianOperator(matrix=lap, degree=degree)


def scaled_laplacian(graph, intrinsic_dim):
    """Size-stable Laplacian L / (n * sigma^(d+2)).

    Dividing by the node count and the kernel volume factor keeps the
    operator comparable across graphs of different sizes sampled from
    the same d-dimensional manifold, which is what lets one set of GNN
    weights transfer between them.
    """
    scale = graph.n * graph.sigma ** (intrinsic_dim + 2)
    return (laplacian(graph).matrix / scale).tocsr()


def apply_extension_operator(points, f, u, f_u, sigma_n):
    """Kernel extension of the graph Laplacian, evaluated at query points.

    For a query u with signal value f_u and samples u_i with values f_i:

        f_u * mean_i exp(-||u - u_i||^2 / (2 sigma_n^2))
            - mean_i f_i * exp(-||u - u_i||^2 / (2 sigma_n^2))

    Accepts a single query (D,) returning a float, or a stack (m, D)
    returning an (m,) array. After rescaling by the kernel volume factor
    this converges to a constant times the Laplace-Beltrami operator as
    the sample count grows.
    """
    if sigma_n <= 0:
        raise ValueError(f"kernel width sigma_n must be positive, got {sigma_n}")
    points = np.asarray(points, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("need a nonempty (n, D) sample set")
    if f.shape[0] != points.shape[0]:
        raise ValueError(f"signal has {f.shape[0]} values for {points.shape[0]} samples")
    u = np.asarray(u, dtype=np.float64)
    single = u.ndim == 1
    uq = u[None, :] if single else u
    fq = np.broadcast_to(np.asarray(f_u, dtype=np.float64), (uq.shape[0],))
    out = np.empty(uq.shape[0])
    chunk = max(1, int(2e7) // max(points.shape[0], 1))
    for start in range(0, uq.shape[0], chunk):
        stop = min(start + chunk, uq.shape[0])
        d2 = np.sum((uq[start:stop, None, :] - points[None, :, :]) ** 2, axis=2)
        kern = np.exp(-d2 / (2.0 * sigma_n * sigma_n))
        out[start:stop] = fq[start:stop] * kern.mean(axis=1) - (kern * f[None, :]).mean(axis=1)
    return float(out[0]) if single else out


def knn_recall(approx, exact):
    """Mean per-node overlap between ANN and exact neighbor selections."""
    if approx.n != exact.n:
        raise ValueError(f"node count mismatch: {approx.n} vs {exact.n}")
    if approx.k != exact.k or approx.neighbor_lists is None or exact.neighbor_lists is None:
        raise ValueError("recall needs two kNN graphs with the same budget k")
    k = approx.k
    hits = 0
    for a, e in zip(approx.neighbor_lists, exact.neighbor_lists):
        hits += np.intersect1d(a, e, assume_unique=False).size
    return hits / (approx.n * k)


def sigma_schedule(c, intrinsic_dim):
    """Kernel width schedule sigma(n) = c * n^(-1/(d+4))."""
    if c <= 0:
        raise ValueError("schedule constant must be positive")
    expo = -1.0 / (intrinsic_dim + 4.0)
    return lambda n: c * float(n) ** expo


# ---------------------------------------------------------------------------
# export formats

GRAPH_MAGIC = b"MGRF"
GRAPH_VERSION = 1


def save_edge_list_csv(graph, path):
    """Write `i,j,w` rows, one per undirected edge with i < j."""
    adj = graph.adjacency.tocoo()
    mask = adj.row < adj.col
    order = np.lexsort((adj.col[mask], adj.row[mask]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "w"])
        for i, j, w in zip(adj.row[mask][order], adj.col[mask][order], adj.data[mask][order]):
            writer.writerow([int(i), int(j), repr(float(w))])


def save_graph_binary(graph, path):
    """Binary adjacency dump: MGRF | version u32 | n u64 | nnz u64 | CSR arrays.

    CSR arrays are indptr u64[n+1], indices u64[nnz], data f64[nnz],
    all little-endian.
    """
    adj = graph.adjacency.tocsr()
    adj.sort_indices()
    with open(path, "wb") as fh:
        fh.write(GRAPH_MAGIC)
        fh.write(struct.pack("<IQQ", GRAPH_VERSION, adj.shape[0], adj.nnz))
        fh.write(adj.indptr.astype("<u8").tobytes())
        fh.write(adj.indices.astype("<u8").tobytes())
        fh.write(adj.data.astype("<f8").tobytes())


def load_graph_binary(path):
    """Read an MGRF dump back into a sparse adjacency matrix."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != GRAPH_MAGIC:
        raise ValueError(f"bad graph magic {blob[:4]!r}")
    version, n, nnz = struct.unpack_from("<IQQ", blob, 4)
    if version != GRAPH_VERSION:
        raise ValueError(f"unsupported graph format version {version}")
    off = 4 + 4 + 16
    need = off + 8 * (n + 1) + 8 * nnz + 8 * nnz
    if len(blob) != need:
        raise ValueError(f"graph payload is {len(blob)} bytes, expected {need}")
    indptr = np.frombuffer(blob, dtype="<u8", count=n + 1, offset=off).astype(np.int64)
    off += 8 * (n + 1)
    indices = np.frombuffer(blob, dtype="<u8", count=nnz, offset=off).astype(np.int64)
    off += 8 * nnz
    data = np.frombuffer(blob, dtype="<f8", count=nnz, offset=off).copy()
    return sp.csr_matrix((data, indices, indptr), shape=(n, n))
