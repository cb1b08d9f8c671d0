"""Polynomial-filter graph neural network with hand-derived backpropagation.

A layer computes rho(sum_k S^k X W_k) for a sparse graph operator S
(normally the Laplacian), applying S iteratively so powers are never
materialized. The final layer emits raw logits. With K=1 every layer
collapses to a per-node linear map, which is exactly the MLP baseline.

Also hosts the masked semi-supervised losses, the argmax decision rule,
the kNN classifier baseline, the mean-aggregation operator used by the
experimental-protocol architecture, and the MGNN checkpoint format.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

ACTIVATIONS = ("relu", "sigmoid", "identity")
LOSS_KINDS = ("mean_l2_onehot", "softmax_cross_entropy")


@dataclass
class GnnModel:
    """Per-layer filter tensors; weights[l][k] has shape (F_{l-1}, F_l)."""

    weights: list
    taps: int
    activation: str
    widths: list

    @property
    def n_layers(self):
        return len(self.weights)

    def copy(self):
        return GnnModel(weights=[w.copy() for w in self.weights], taps=self.taps,
                        activation=self.activation, widths=list(self.widths))

    def flat(self):
        return np.concatenate([w.ravel() for w in self.weights])


@dataclass
class ForwardCache:
    taps: int
    activation: str
    # per layer: list of K propagated inputs S^k X_{l-1}, plus pre-activations
    propagated: list = field(default_factory=list)
    pre_activations: list = field(default_factory=list)
    operator: sp.spmatrix = None
    n: int = 0


def init_model(widths, taps, activation="relu", seed=0):
    """Uniform init in [-a, a] with a = 1/sqrt(K * fan_in), per tap."""
    if taps < 1:
        raise ValueError(f"need at least one filter tap, got K={taps}")
    if len(widths) < 2:
        raise ValueError(f"widths must name input and output, got {widths}")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    weights = []
    for f_in, f_out in zip(widths[:-1], widths[1:]):
        a = 1.0 / np.sqrt(taps * f_in)
        weights.append(rng.uniform(-a, a, size=(taps, f_in, f_out)))
    return GnnModel(weights=weights, taps=taps, activation=activation, widths=list(widths))


def zero_like(model):
    return [np.zeros_like(w) for w in model.weights]


def _act(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        return expit(z)
    return z


def _act_grad(z, kind):
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "sigmoid":
        s = expit(z)
        return s * (1.0 - s)
    return np.ones_like(z)


def gnn_forward(model, operator, x):
    """Run the network over node features x given a sparse graph operator.

    Accepts a LaplacianOperator, a sparse matrix, or None (single-node /
    operator-free case where only the k=0 tap survives). Returns the
    (n, F_out) logits and the cache needed by :func:`gnn_backward`.
    """
    s = getattr(operator, "matrix", operator)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.widths[0]:
        raise ValueError(f"input of shape {x.shape} does not match F0={model.widths[0]}")
    if s is not None and s.shape[0] != x.shape[0]:
        raise ValueError(f"operator is {s.shape[0]}x{s.shape[0]} but x has {x.shape[0]} rows")
    cache = ForwardCache(taps=model.taps, activation=model.activation,
                         operator=s, n=x.shape[0])
    h = x
    last = model.n_layers - 1
    for layer, w in enumerate(model.weights):
        powers = [h]
        for _ in range(1, model.taps):
            powers.append(s @ powers[-1] if s is not None else np.zeros_like(h))
        z = powers[0] @ w[0]
        for k in range(1, model.taps):
            z += powers[k] @ w[k]
        if not np.all(np.isfinite(z)):
            raise FloatingPointError(f"non-finite pre-activation at layer {layer}")
        cache.propagated.append(powers)
        cache.pre_activations.append(z)
        h = z if layer == last else _act(z, model.activation)
    return h, cache


def gnn_backward(model, cache, d_out, with_input_grad=False):
    """Analytic gradients of a scalar loss through the cached forward pass.

    d_out is the loss gradient w.r.t. the network output. Returns
    gradients shaped like model.weights (and optionally d_input).
    dW_{lk} = (S^k X_{l-1})^T dZ_l; the input gradient applies S^T,
    reusing the forward kernels when S is symmetric.
    """
    if len(cache.propagated) != model.n_layers or cache.pre_activations[-1].shape != d_out.shape:
        raise ValueError("cache does not match this model and output gradient")
    st = None
    if cache.operator is not None:
        st = cache.operator.T.tocsr()
    grads = [np.empty_like(w) for w in model.weights]
    dz = np.asarray(d_out, dtype=np.float64)
    for layer in range(model.n_layers - 1, -1, -1):
        if layer < model.n_layers - 1:
            dz = dz * _act_grad(cache.pre_activations[layer], model.activation)
        w = model.weights[layer]
        powers = cache.propagated[layer]
        for k in range(model.taps):
            grads[layer][k] = powers[k].T @ dz
        if layer > 0 or with_input_grad:
            # Horner: sum_k (S^T)^k dz W_k^T without materializing powers
            acc = dz @ w[model.taps - 1].T
            for k in range(model.taps - 2, -1, -1):
                acc = (st @ acc if st is not None else np.zeros_like(acc)) + dz @ w[k].T
            dz = acc
    return (grads, dz) if with_input_grad else grads


def loss_masked(labels, logits, mask, kind):
    """Masked semi-supervised loss and its gradient w.r.t. the logits.

    mean_l2_onehot is ||M_T (onehot(y) - Y)||_2 / |T| (one 2-norm over
    all masked entries, not a per-row mean). softmax_cross_entropy is
    the mean negative log-likelihood over the mask. Gradient rows
    outside the mask are exactly zero.
    """
    mask = np.asarray(mask)
    if mask.dtype == bool:
        mask = np.flatnonzero(mask)
    if mask.size == 0:
        raise ValueError("training mask is empty")
    logits = np.asarray(logits, dtype=np.float64)
    n, n_classes = logits.shape
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 1 or labels.max() > n_classes:
        raise ValueError(f"labels must lie in 1..{n_classes}")
    grad = np.zeros_like(logits)
    sel = logits[mask]
    y = labels[mask] - 1
    if kind == "mean_l2_onehot":
        resid = sel.copy()
        resid[np.arange(mask.size), y] -= 1.0
        with np.errstate(over="ignore"):  # divergence is caught by callers
            norm = np.sqrt(np.sum(resid * resid))
        value = norm / mask.size
        if norm > 0.0:
            grad[mask] = resid / (norm * mask.size)
        return value, grad
    if kind == "softmax_cross_entropy":
        shifted = sel - sel.max(axis=1, keepdims=True)
        expv = np.exp(shifted)
        probs = expv / expv.sum(axis=1, keepdims=True)
        nll = -(shifted[np.arange(mask.size), y] - np.log(expv.sum(axis=1)))
        probs[np.arange(mask.size), y] -= 1.0
        grad[mask] = probs / mask.size
        return float(nll.mean()), grad
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def predict(logits):
    """Per-row argmax as 1-based labels; ties go to the lowest class."""
    logits = np.asarray(logits)
    if logits.ndim != 2 or logits.shape[1] < 1:
        raise ValueError("logits must be (n, C) with C >= 1")
    return np.argmax(logits, axis=1).astype(np.int64) + 1


def accuracy(labels, predicted):
    labels = np.asarray(labels)
    return float(np.mean(labels == np.asarray(predicted))) if labels.size else 0.0


def knn_classify(emb, k, chunk=256):
    """Majority vote over the k nearest train-split embeddings.

    Returns predicted labels for the test-split rows, in test-row order.
    Distance ties are broken by train-row index, vote ties toward the
    lowest class index.
    """
    train_idx = emb.train_indices()
    test_idx = emb.test_indices()
    if k < 1 or k > train_idx.size:
        raise ValueError(f"k={k} must lie in 1..{train_idx.size} (train split size)")
    xtr = emb.data[train_idx].astype(np.float64)
    ytr = emb.labels[train_idx]
    xte = emb.data[test_idx].astype(np.float64)
    sq_tr = np.einsum("ij,ij->i", xtr, xtr)
    preds = np.empty(test_idx.size, dtype=np.int64)
    for start in range(0, test_idx.size, chunk):
        stop = min(start + chunk, test_idx.size)
        block = xte[start:stop]
        d2 = np.einsum("ij,ij->i", block, block)[:, None] - 2.0 * (block @ xtr.T) + sq_tr[None, :]
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        for r in range(stop - start):
            cand = part[r]
            order = np.lexsort((cand, d2[r, cand]))
            votes = np.bincount(ytr[cand[order][:k]], minlength=emb.n_classes + 1)
            preds[start + r] = int(np.argmax(votes))
    return preds


def knn_classify_loo(emb, k, chunk=256):
    """Leave-one-out kNN over the train split: predictions for train rows.

    Each train row is voted on by its k nearest other train rows; this is
    the train-accuracy counterpart of :func:`knn_classify`.
    """
    train_idx = emb.train_indices()
    if k < 1 or k > train_idx.size - 1:
        raise ValueError(f"k={k} must lie in 1..{train_idx.size - 1} for leave-one-out")
    xtr = emb.data[train_idx].astype(np.float64)
    ytr = emb.labels[train_idx]
    sq = np.einsum("ij,ij->i", xtr, xtr)
    preds = np.empty(train_idx.size, dtype=np.int64)
    for start in range(0, train_idx.size, chunk):
        stop = min(start + chunk, train_idx.size)
        block = xtr[start:stop]
        d2 = sq[start:stop, None] - 2.0 * (block @ xtr.T) + sq[None, :]
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        for r in range(stop - start):
            cand = part[r]
            order = np.lexsort((cand, d2[r, cand]))
            votes = np.bincount(ytr[cand[order][:k]], minlength=emb.n_classes + 1)
            preds[start + r] = int(np.argmax(votes))
    return preds


def mean_adjacency(graph):
    """Row-normalized adjacency D^{-1} A, the mean-aggregation operator.

    Feeding this as the graph operator with K=2 gives the
    one-hop-mean-plus-self architecture used by the experimental
    protocol (flag ``--arch sage-mean``). Isolated nodes keep a zero row.
    """
    adj = graph.adjacency
    degree = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.divide(1.0, degree, out=np.zeros_like(degree), where=degree > 0)
    return (sp.diags(inv) @ adj).tocsr()


# ---------------------------------------------------------------------------
# checkpoint format

MODEL_MAGIC = b"MGNN"
MODEL_VERSION = 1
_ACT_IDS = {name: i for i, name in enumerate(ACTIVATIONS)}


def save_model(model, path):
    """MGNN | version u32 | n_widths u32 | widths u32[] | K u32 | act u8 | f32 params.

    Parameters are laid out layer-major, tap-major, each tensor row-major,
    little-endian.
    """
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", MODEL_VERSION, len(model.widths)))
        fh.write(np.asarray(model.widths, dtype="<u4").tobytes())
        fh.write(struct.pack("<IB", model.taps, _ACT_IDS[model.activation]))
        for w in model.weights:
            fh.write(w.astype("<f4").tobytes())


def load_model(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MODEL_MAGIC:
        raise ValueError(f"bad model magic {blob[:4]!r}")
    version, n_widths = struct.unpack_from("<II", blob, 4)
    if version != MODEL_VERSION:
        raise ValueError(f"unsupported model version {version}")
    off = 12
    widths = np.frombuffer(blob, dtype="<u4", count=n_widths, offset=off).astype(int).tolist()
    off += 4 * n_widths
    taps, act_id = struct.unpack_from("<IB", blob, off)
    off += 5
    weights = []
    for f_in, f_out in zip(widths[:-1], widths[1:]):
        count = taps * f_in * f_out
        w = np.frombuffer(blob, dtype="<f4", count=count, offset=off)
        if w.size != count:
            raise ValueError("model payload shorter than the declared shapes")
        weights.append(w.astype(np.float64).reshape(taps, f_in, f_out))
        off += 4 * count
    if off != len(blob):
        raise ValueError(f"{len(blob) - off} trailing bytes after parameters")
    return GnnModel(weights=weights, taps=taps, activation=ACTIVATIONS[act_id], widths=widths)
