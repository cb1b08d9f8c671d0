"""Semi-supervised training on fixed and growing geometric graphs.

The fixed trainer runs full-graph gradient steps with the loss masked to
the train split. The growing trainer starts from an n0-node graph and,
every delta_t steps (or adaptively, driven by the gradient-deviation
condition), resamples or extends the graph by delta_n nodes, so the
iterates track the risk on the underlying manifold rather than on one
finite graph. Generalization is reported as the absolute difference of
the masked train and test risks.
"""

import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import graph as graph_mod
from . import nn as nn_mod
from .embeddings import TRAIN, TEST, assign_split
from .manifold import (PointCloud, fourier_features, intrinsic_dim,
                       sample_manifold, synthetic_labels)

OPTIMIZERS = ("sgd", "adam")
GROWTH_STYLES = ("fresh_resample", "nested")
OPERATOR_KINDS = ("laplacian", "scaled_laplacian", "mean_adjacency")


class NumericError(RuntimeError):
    """Training diverged (non-finite loss or activations)."""


@dataclass
class TrainSchedule:
    mode: str = "fixed"
    total_steps: int = 500
    lr: float = 0.01
    optimizer: str = "adam"
    loss_kind: str = "softmax_cross_entropy"
    seed: int = 0
    n0: int = 0
    delta_n: int = 0
    delta_t: int = 1
    growth_style: str = "fresh_resample"
    eval_every: int = 50
    adaptive: bool = False
    epsilon: float = 0.0   # adaptive slack; 0 means 10% of the initial proxy gradient norm

    def validate(self):
        if self.mode not in ("fixed", "growing"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "fixed" and self.delta_n != 0:
            raise ValueError("fixed schedules take delta_n=0")
        if self.mode == "growing":
            if self.delta_n < 0:
                raise ValueError("growth increment delta_n must be >= 0")
            if self.delta_t < 1:
                raise ValueError("steps per graph delta_t must be >= 1")
            if self.n0 < 2:
                raise ValueError("growing schedules need an initial size n0 >= 2")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.growth_style not in GROWTH_STYLES:
            raise ValueError(f"unknown growth style {self.growth_style!r}")
        if self.loss_kind not in nn_mod.LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        return self


@dataclass
class GapReport:
    train_risk: float
    test_risk: float
    gap: float
    train_accuracy: float
    test_accuracy: float
    n: int
    p: int
    q: int
    seed: int = 0
    wall_time: float = 0.0

    def __post_init__(self):
        if self.gap != abs(self.test_risk - self.train_risk):
            raise ValueError("gap must equal |test_risk - train_risk| exactly")
        if self.p + self.q != self.n:
            raise ValueError(f"split sizes p={self.p} + q={self.q} != n={self.n}")

    def to_dict(self):
        return asdict(self)


@dataclass
class GraphBundle:
    """Everything one training step needs about the active graph."""

    x: np.ndarray
    y: np.ndarray
    split: np.ndarray
    graph: graph_mod.GeometricGraph
    operator: object
    points: np.ndarray = None   # raw manifold coordinates when x is a feature map

    @property
    def n(self):
        return self.x.shape[0]

    def train_mask(self):
        return np.flatnonzero(self.split == TRAIN)

    def test_mask(self):
        return np.flatnonzero(self.split == TEST)


def build_operator(graph, kind, intrinsic_dim=None):
    if kind == "laplacian":
        return graph_mod.laplacian(graph).matrix
    if kind == "scaled_laplacian":
        if intrinsic_dim is None:
            raise ValueError("scaled_laplacian needs the intrinsic dimension")
        return graph_mod.scaled_laplacian(graph, intrinsic_dim)
    if kind == "mean_adjacency":
        return nn_mod.mean_adjacency(graph)
    raise ValueError(f"unknown operator kind {kind!r}; expected one of {OPERATOR_KINDS}")


class _Optimizer:
    def __init__(self, kind, model, lr):
        self.kind = kind
        self.lr = lr
        self.t = 0
        if kind == "adam":
            self.m = nn_mod.zero_like(model)
            self.v = nn_mod.zero_like(model)

    def step(self, model, grads):
        self.t += 1
        if self.kind == "sgd":
            for w, g in zip(model.weights, grads):
                w -= self.lr * g
            return
        b1, b2, eps = 0.9, 0.999, 1e-8
        for w, g, m, v in zip(model.weights, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            w -= self.lr * mhat / (np.sqrt(vhat) + eps)


def evaluate(model, bundle, loss_kind):
    """GapReport for a model on a bundle; both splits must be nonempty."""
    tr, te = bundle.train_mask(), bundle.test_mask()
    if tr.size == 0 or te.size == 0:
        raise ValueError(f"both splits must be nonempty, got p={tr.size}, q={te.size}")
    logits, _ = nn_mod.gnn_forward(model, bundle.operator, bundle.x)
    train_risk, _ = nn_mod.loss_masked(bundle.y, logits, tr, loss_kind)
    test_risk, _ = nn_mod.loss_masked(bundle.y, logits, te, loss_kind)
    pred = nn_mod.predict(logits)
    return GapReport(
        train_risk=float(train_risk), test_risk=float(test_risk),
        gap=abs(float(test_risk) - float(train_risk)),
        train_accuracy=nn_mod.accuracy(bundle.y[tr], pred[tr]),
        test_accuracy=nn_mod.accuracy(bundle.y[te], pred[te]),
        n=bundle.n, p=int(tr.size), q=int(te.size))


def generalization_gap(model, graph, x, y, split, loss_kind,
                       operator_kind="laplacian", intrinsic_dim=None):
    """Masked train/test risks, their absolute gap, and accuracies."""
    op = build_operator(graph, operator_kind, intrinsic_dim)
    return evaluate(model, GraphBundle(x=x, y=y, split=split, graph=graph, operator=op),
                    loss_kind)


@dataclass
class TraceRow:
    step: int
    n_active: int
    loss: float
    train_risk: float
    test_risk: float
    gap: float
    train_acc: float
    test_acc: float
    wall_ms: float


@dataclass
class GrowingResult:
    model: "GnnModel"
    trace: list
    growth_log: list
    final_bundle: GraphBundle

    def __iter__(self):
        # unpack like (model, trace, growth_log)
        return iter((self.model, self.trace, self.growth_log))


def write_trace_csv(trace, path):
    with open(path, "w") as fh:
        fh.write("step,n_active,loss,train_risk,test_risk,gap,train_acc,test_acc,wall_ms\n")
        for r in trace:
            fh.write(f"{r.step},{r.n_active},{r.loss!r},{r.train_risk!r},{r.test_risk!r},"
                     f"{r.gap!r},{r.train_acc!r},{r.test_acc!r},{r.wall_ms!r}\n")


def _grad_step(model, bundle, loss_kind, opt, step_index):
    mask = bundle.train_mask()
    try:
        logits, cache = nn_mod.gnn_forward(model, bundle.operator, bundle.x)
    except FloatingPointError as exc:
        raise NumericError(f"diverged at step {step_index}: {exc}") from exc
    value, d_logits = nn_mod.loss_masked(bundle.y, logits, mask, loss_kind)
    if not np.isfinite(value):
        raise NumericError(f"non-finite loss at step {step_index}")
    grads = nn_mod.gnn_backward(model, cache, d_logits)
    opt.step(model, grads)
    return value


def _train_on_schedule(model, schedule, bundle_at, n_of_step):
    """Shared loop: bundle_at(n, event_index) supplies graphs, n_of_step drives growth."""
    opt = _Optimizer(schedule.optimizer, model, schedule.lr)
    trace = []
    t0 = time.perf_counter()
    bundle = bundle_at(n_of_step(0), 0)
    events = 0
    for k in range(schedule.total_steps):
        want = n_of_step(k)
        if want != bundle.n:
            events += 1
            bundle = bundle_at(want, events)
        loss = _grad_step(model, bundle, schedule.loss_kind, opt, k)
        if schedule.eval_every and (k % schedule.eval_every == 0 or k == schedule.total_steps - 1):
            rep = evaluate(model, bundle, schedule.loss_kind)
            trace.append(TraceRow(step=k, n_active=bundle.n, loss=float(loss),
                                  train_risk=rep.train_risk, test_risk=rep.test_risk,
                                  gap=rep.gap, train_acc=rep.train_accuracy,
                                  test_acc=rep.test_accuracy,
                                  wall_ms=(time.perf_counter() - t0) * 1e3))
    return model, trace, bundle


def train_fixed(model, graph, x, y, split, schedule,
                operator_kind="laplacian", intrinsic_dim=None):
    """Full-graph gradient descent on one fixed graph.

    Returns the trained model (updated in place on a copy) and the
    metric trace. Deterministic given the schedule seed and a pinned
    thread count.
    """
    schedule.validate()
    if schedule.mode != "fixed":
        raise ValueError("train_fixed needs a fixed-mode schedule")
    op = build_operator(graph, operator_kind, intrinsic_dim)
    bundle = GraphBundle(x=np.asarray(x, dtype=np.float64), y=np.asarray(y),
                         split=np.asarray(split), graph=graph, operator=op)
    if bundle.train_mask().size == 0 or bundle.test_mask().size == 0:
        raise ValueError("both train and test splits must be nonempty")
    trained = model.copy()
    trained, trace, _ = _train_on_schedule(trained, schedule, lambda n, e: bundle,
                                           lambda k: bundle.n)
    return trained, trace


def train_growing(source, schedule, model_init):
    """Gradient descent over a growing graph sequence.

    At step k the active graph has n0 + floor(k/delta_t)*delta_n nodes;
    each growth event redraws the graph from ``source`` (fresh resample)
    or extends the previous one (nested). With ``schedule.adaptive`` the
    graph instead grows by delta_n whenever the measured gradient
    deviation against a larger proxy stops satisfying the descent
    condition deviation < proxy_norm - epsilon.
    """
    schedule.validate()
    if schedule.mode != "growing":
        raise ValueError("train_growing needs a growing-mode schedule")
    rng = np.random.default_rng(schedule.seed)
    state = {"bundle": None}

    def bundle_at(n, event_index):
        prev = state["bundle"] if schedule.growth_style == "nested" else None
        state["bundle"] = source.draw(n, rng, prev=prev)
        return state["bundle"]

    model = model_init.copy()
    if not schedule.adaptive:
        n_of_step = lambda k: schedule.n0 + (k // schedule.delta_t) * schedule.delta_n
        model, trace, bundle = _train_on_schedule(model, schedule, bundle_at, n_of_step)
        return GrowingResult(model, trace, [], bundle)

    # adaptive: consult the deviation condition every delta_t steps
    opt = _Optimizer(schedule.optimizer, model, schedule.lr)
    trace, growth_log = [], []
    t0 = time.perf_counter()
    n_active = schedule.n0
    bundle = bundle_at(n_active, 0)
    eps = schedule.epsilon
    for k in range(schedule.total_steps):
        if k and k % schedule.delta_t == 0:
            proxy = source.draw_proxy(n_active, rng)
            deviation, proxy_norm = estimate_gradient_deviation(
                model, bundle, proxy, schedule.loss_kind)
            if eps == 0.0:
                eps = 0.1 * proxy_norm
            grew = deviation >= proxy_norm - eps
            growth_log.append({"step": k, "n_active": n_active,
                               "deviation": deviation, "proxy_norm": proxy_norm,
                               "epsilon": eps, "grew": bool(grew)})
            if grew and schedule.delta_n > 0:
                n_active += schedule.delta_n
                bundle = bundle_at(n_active, len(growth_log))
        loss = _grad_step(model, bundle, schedule.loss_kind, opt, k)
        if schedule.eval_every and (k % schedule.eval_every == 0 or k == schedule.total_steps - 1):
            rep = evaluate(model, bundle, schedule.loss_kind)
            trace.append(TraceRow(step=k, n_active=bundle.n, loss=float(loss),
                                  train_risk=rep.train_risk, test_risk=rep.test_risk,
                                  gap=rep.gap, train_acc=rep.train_accuracy,
                                  test_acc=rep.test_accuracy,
                                  wall_ms=(time.perf_counter() - t0) * 1e3))
    return GrowingResult(model, trace, growth_log, bundle)


def flat_loss_gradient(model, bundle, loss_kind):
    """Loss value and the full parameter gradient as one flat vector."""
    logits, cache = nn_mod.gnn_forward(model, bundle.operator, bundle.x)
    value, d_logits = nn_mod.loss_masked(bundle.y, logits, bundle.train_mask(), loss_kind)
    grads = nn_mod.gnn_backward(model, cache, d_logits)
    return value, np.concatenate([g.ravel() for g in grads])


def estimate_gradient_deviation(model, active, proxy, loss_kind, allow_equal=False):
    """Distance between the active-graph gradient and a larger proxy's.

    The proxy graph stands in for the manifold, whose gradient is not
    computable. Returns (||g_proxy - g_active||, ||g_proxy||); growth is
    warranted whenever the first is >= the second minus epsilon.
    """
    if proxy.n <= active.n and not (allow_equal and proxy.n == active.n):
        raise ValueError(f"proxy (n={proxy.n}) must be strictly larger than active (n={active.n})")
    _, g_active = flat_loss_gradient(model, active, loss_kind)
    _, g_proxy = flat_loss_gradient(model, proxy, loss_kind)
    return float(np.linalg.norm(g_proxy - g_active)), float(np.linalg.norm(g_proxy))


def transferability_test(model, manifold_kind, n_list, sigma_rule, seed,
                         proxy_factor=10, proxy_dtype=np.float32):
    """Output discrepancy of one fixed model across graph sizes.

    For each n, samples n points, runs the model on their geometric
    graph, and compares node-by-node against the same model run on a
    proxy graph holding the same n points plus ``proxy_factor`` * n
    extra ones (all with scale-normalized Laplacians). Returns the list
    of node-averaged output distances, one per n. The proxy reference is
    evaluated matrix-free, by default in single precision (discrepancies
    of interest sit far above the ~1e-6 rounding level).
    """
    if not n_list:
        raise ValueError("n_list must name at least one graph size")
    if any(b < a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be ascending")
    d = intrinsic_dim(manifold_kind)
    out = []
    for j, n in enumerate(n_list):
        sub = np.random.SeedSequence([seed, j]).generate_state(2)
        cloud = sample_manifold(manifold_kind, n, int(sub[0]))
        x_n = cloud.points
        g_n = graph_mod.build_graph(x_n, sigma_rule(n), mode="dense", weight_floor=0.0)
        y_n, _ = nn_mod.gnn_forward(model, graph_mod.scaled_laplacian(g_n, d), x_n)
        n_proxy = n + proxy_factor * n
        if proxy_factor > 0:
            extra = sample_manifold(manifold_kind, proxy_factor * n, int(sub[1]))
            x_proxy = np.concatenate([x_n, extra.points])
        else:
            x_proxy = x_n
        op_proxy = KernelLaplacianOperator(x_proxy, sigma_rule(n_proxy), d,
                                           dtype=proxy_dtype)
        y_proxy, _ = nn_mod.gnn_forward(model, op_proxy, x_proxy)
        out.append(float(np.mean(np.linalg.norm(y_n - y_proxy[:n], axis=1))))
    return out


class KernelLaplacianOperator:
    """Matrix-free scale-normalized Laplacian of the dense Gaussian kernel.

    Behaves like the csr matrix scaled_laplacian(dense graph) would,
    without materializing the n x n kernel: rows are generated in chunks
    per matmul. Symmetric, so .T is itself. Kernel row sums are fused
    into the first application; dtype=float32 roughly halves the cost of
    large proxy graphs at ~1e-6 relative error.
    """

    def __init__(self, points, sigma, intrinsic_dim, chunk=512, dtype=np.float64):
        if sigma <= 0:
            raise ValueError("kernel width must be positive")
        self.dtype = np.dtype(dtype)
        self.points = np.ascontiguousarray(points, dtype=self.dtype)
        self.sigma = float(sigma)
        self.scale = self.points.shape[0] * sigma ** (intrinsic_dim + 2)
        self.chunk = chunk
        self.shape = (points.shape[0], points.shape[0])
        self._sq = np.einsum("ij,ij->i", self.points, self.points)
        self._row_sums = None

    def _kernel_matmul(self, x):
        n = self.shape[0]
        out = np.empty((n, x.shape[1]), dtype=self.dtype)
        inv = self.dtype.type(-0.5 / (self.sigma * self.sigma))
        for start in range(0, n, self.chunk):
            stop = min(start + self.chunk, n)
            d2 = (self._sq[start:stop, None]
                  - 2.0 * (self.points[start:stop] @ self.points.T)
                  + self._sq[None, :])
            np.maximum(d2, 0.0, out=d2)
            d2 *= inv
            np.exp(d2, out=d2)
            out[start:stop] = d2 @ x
        return out

    def __matmul__(self, x):
        x = np.asarray(x)
        vec = x.ndim == 1
        xm = (x[:, None] if vec else x).astype(self.dtype, copy=False)
        if self._row_sums is None:
            with_ones = np.concatenate([xm, np.ones((self.shape[0], 1), dtype=self.dtype)],
                                       axis=1)
            prod = self._kernel_matmul(with_ones)
            self._row_sums = prod[:, -1].astype(np.float64)
            kx = prod[:, :-1]
        else:
            kx = self._kernel_matmul(xm)
        # diagonal terms of the full kernel cancel between the two sums
        res = (self._row_sums[:, None] * xm - kx) / self.scale
        return res[:, 0] if vec else res

    @property
    def T(self):
        return self


# ---------------------------------------------------------------------------
# graph sources for growing-graph training

class ManifoldTaskSource:
    """Draws labeled geometric-graph bundles from a synthetic manifold.

    Feature rows are the ambient coordinates. ``nested`` draws keep the
    previous points and append new ones; fresh draws resample everything.
    """

    def __init__(self, kind, label_rule="hemisphere", sectors=None,
                 sigma_rule=None, sigma=None, k=0, graph_mode="dense",
                 operator_kind="scaled_laplacian", train_fraction=0.8,
                 proxy_factor=10, feature_dim=None, feature_seed=0):
        if (sigma_rule is None) == (sigma is None):
            raise ValueError("give exactly one of sigma_rule or sigma")
        self.kind = kind
        self.label_rule = label_rule
        self.sectors = sectors
        self.sigma_rule = sigma_rule if sigma_rule is not None else (lambda n: sigma)
        self.k = k
        self.graph_mode = graph_mode
        self.operator_kind = operator_kind
        self.train_fraction = train_fraction
        self.proxy_factor = proxy_factor
        self.feature_dim = feature_dim
        self.feature_seed = feature_seed
        self.d = intrinsic_dim(kind)

    def _bundle_from_points(self, points, rng):
        cloud = PointCloud(points=points, manifold_kind=self.kind,
                           intrinsic_dim=self.d, seed=-1)
        y = synthetic_labels(cloud, self.label_rule, self.sectors)
        split = assign_split(points.shape[0], self.train_fraction,
                             int(rng.integers(2 ** 63)))
        x = points
        if self.feature_dim is not None:
            # one fixed embedding map for the whole source, so resampled
            # points land in the same feature space
            x = fourier_features(points, self.feature_dim, self.feature_seed)
        g = graph_mod.build_graph(x, self.sigma_rule(points.shape[0]),
                                  k=self.k, mode=self.graph_mode,
                                  seed=int(rng.integers(2 ** 63)))
        op = build_operator(g, self.operator_kind, self.d)
        return GraphBundle(x=x, y=y, split=split, graph=g, operator=op, points=points)

    def draw(self, n, rng, prev=None):
        if prev is not None and prev.n < n:
            extra = sample_manifold(self.kind, n - prev.n, int(rng.integers(2 ** 63)))
            points = np.concatenate([prev.points, extra.points])
        else:
            points = sample_manifold(self.kind, n, int(rng.integers(2 ** 63))).points
        return self._bundle_from_points(points, rng)

    def draw_proxy(self, n_active, rng):
        return self.draw(self.proxy_factor * n_active, rng)


class DatasetSource:
    """Uniform node subsampling of one finite embedding set.

    Split membership is inherited from the full dataset's tags; nested
    draws extend the previous index set with fresh rows.
    """

    def __init__(self, emb, sigma, k=0, graph_mode="dense",
                 operator_kind="mean_adjacency", intrinsic_dim=None):
        if emb.split is None:
            raise ValueError("growing-graph training needs split tags on the dataset")
        self.emb = emb
        self.sigma = sigma
        self.k = k
        self.graph_mode = graph_mode
        self.operator_kind = operator_kind
        self.d = intrinsic_dim
        self._prev_indices = None

    def draw(self, n, rng, prev=None):
        total = self.emb.n
        if n > total:
            raise ValueError(f"source exhausted: need n={n} nodes, dataset has {total}")
        if prev is not None and self._prev_indices is not None and n > self._prev_indices.size:
            old = self._prev_indices
            remaining = np.setdiff1d(np.arange(total), old, assume_unique=False)
            add = rng.choice(remaining, size=n - old.size, replace=False)
            idx = np.concatenate([old, add])
        else:
            idx = rng.choice(total, size=n, replace=False)
        self._prev_indices = idx
        x = self.emb.data[idx].astype(np.float64)
        g = graph_mod.build_graph(x, self.sigma, k=self.k, mode=self.graph_mode,
                                  seed=int(rng.integers(2 ** 63)))
        op = build_operator(g, self.operator_kind, self.d)
        return GraphBundle(x=x, y=self.emb.labels[idx], split=self.emb.split[idx],
                           graph=g, operator=op)

    def draw_proxy(self, n_active, rng):
        n = min(10 * n_active, self.emb.n)
        return self.draw(n, rng)
