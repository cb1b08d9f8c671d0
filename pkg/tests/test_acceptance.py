"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as
they complete. Criterion 8 needs the raw MNIST IDX files under
data/mnist/ (override the root with $GEOSSL_DATA) and is skipped with an
explicit message when they are absent.
"""

import os
import time

import numpy as np
import pytest

from geossl.embeddings import (EmbeddingSet, assign_split, load_embeddings,
                               load_idx_images, merge_raw, pca_embed,
                               save_embeddings)
from geossl.graph import (apply_extension_operator, build_graph, knn_recall,
                          laplacian, sigma_schedule)
from geossl.manifold import analytic_eigenpair, circle_cosine_index, sample_manifold
from geossl.nn import (gnn_backward, gnn_forward, init_model, loss_masked,
                       predict)
from geossl.train import (ManifoldTaskSource, TrainSchedule,
                          estimate_gradient_deviation, evaluate, train_fixed,
                          train_growing, transferability_test)

SEEDS = (0, 1, 2, 3)


def report(criterion, ok, detail, elapsed, budget):
    status = "PASS" if ok else "FAIL"
    print(f"\n[{status}] criterion {criterion}: {detail} ({elapsed:.1f}s, budget {budget:.0f}s)")
    assert ok, f"criterion {criterion}: {detail}"
    assert elapsed < budget, f"criterion {criterion} took {elapsed:.1f}s, budget {budget}s"


def test_criterion_1_laplacian_lb_convergence():
    # circle, f = cos(2 theta), sigma_n = c * n^(-1/5); correlation with the
    # analytic 4 cos(2 theta) rises to >= 0.99; c tuned once, frozen here
    t0 = time.perf_counter()
    c = 1.1
    rule = sigma_schedule(c, intrinsic_dim=1)
    pair = analytic_eigenpair("circle", circle_cosine_index(2))
    medians = []
    for n in (400, 1600, 6400):
        corrs = []
        for seed in SEEDS:
            cloud = sample_manifold("circle", n, seed)
            f = pair.eigenfunction(cloud.points)
            est = apply_extension_operator(cloud.points, f, cloud.points, f, rule(n))
            corrs.append(float(np.corrcoef(est, 4.0 * f)[0, 1]))
        medians.append(float(np.median(corrs)))
    ok = medians[0] < medians[1] < medians[2] and medians[2] >= 0.99
    report(1, ok, f"median correlations {[round(m, 5) for m in medians]} "
                  f"rising to >= 0.99", time.perf_counter() - t0, 60)


def test_criterion_2_transferability():
    # fixed random 2-layer GNN on sphere; proxy-referenced discrepancy at
    # n=2000 under half the n=250 value (constant kernel width: the
    # empirical error is variance-dominated, ~ n^(-1/2))
    t0 = time.perf_counter()
    ratios = []
    for seed in SEEDS:
        model = init_model([3, 16, 8], 2, "relu", seed)
        d250, d2000 = transferability_test(model, "sphere", [250, 2000],
                                           lambda n: 0.6, seed)
        ratios.append(d2000 / d250)
    med = float(np.median(ratios))
    report(2, med < 0.5, f"median discrepancy ratio d(2000)/d(250) = {med:.3f} < 0.5",
           time.perf_counter() - t0, 120)


def _sphere_source():
    return ManifoldTaskSource("sphere", sigma=0.5, k=16, graph_mode="knn_exact",
                              operator_kind="mean_adjacency", train_fraction=0.8,
                              feature_dim=64, feature_seed=99)


def _fixed_gap(n, seed, steps, hidden):
    src = _sphere_source()
    bundle = src.draw(n, np.random.default_rng([seed, 1]))
    model = init_model([64, hidden, 2], 2, "relu", seed)
    sched = TrainSchedule(mode="fixed", total_steps=steps, lr=0.01,
                          loss_kind="mean_l2_onehot", eval_every=0)
    trained, _ = train_fixed(model, bundle.graph, bundle.x, bundle.y, bundle.split,
                             sched, operator_kind="mean_adjacency")
    return evaluate(trained, bundle, "mean_l2_onehot")


def test_criterion_3_gap_vs_n():
    t0 = time.perf_counter()
    grid = (250, 500, 1000, 2000)
    means = []
    for n in grid:
        reps = [_fixed_gap(n, seed, steps=480, hidden=32) for seed in SEEDS]
        means.append(float(np.mean([r.gap for r in reps])))
    biggest = max(means)
    inversions = [max(0.0, means[i + 1] - means[i]) for i in range(len(grid) - 1)]
    n_inv = sum(1 for v in inversions if v > 0)
    ok = (n_inv <= 1 and all(v <= 0.1 * biggest for v in inversions)
          and means[-1] < means[0])
    report(3, ok, f"mean gaps over n {dict(zip(grid, [round(m, 5) for m in means]))}, "
                  f"{n_inv} inversion(s)", time.perf_counter() - t0, 600)


def test_criterion_4_growing_graph_advantage():
    t0 = time.perf_counter()
    steps, hidden = 1800, 64
    fixed_gaps, growing_gaps = [], []
    for seed in SEEDS:
        fixed_gaps.append(_fixed_gap(2000, seed, steps, hidden).gap)
        src = _sphere_source()
        sched = TrainSchedule(mode="growing", n0=250, delta_n=50, delta_t=50,
                              total_steps=steps, lr=0.01,
                              loss_kind="mean_l2_onehot", eval_every=0, seed=seed)
        model = init_model([64, hidden, 2], 2, "relu", seed)
        result = train_growing(src, sched, model)
        assert result.final_bundle.n == 2000
        growing_gaps.append(evaluate(result.model, result.final_bundle,
                                     "mean_l2_onehot").gap)
    mf, mg = float(np.mean(fixed_gaps)), float(np.mean(growing_gaps))
    report(4, mg <= mf, f"mean final gap growing {mg:.5f} <= fixed {mf:.5f} "
                        f"at matched n=2000", time.perf_counter() - t0, 600)


def test_criterion_5_gradient_deviation_trend():
    t0 = time.perf_counter()
    src = ManifoldTaskSource("sphere", sigma=0.5, k=0, graph_mode="dense",
                             operator_kind="scaled_laplacian", train_fraction=0.8)
    per_n = {n: [] for n in (100, 200, 400)}
    for seed in SEEDS:
        rng = np.random.default_rng([seed, 5])
        model = init_model([3, 16, 2], 2, "relu", seed)
        proxy = src.draw(4000, rng)
        for n in per_n:
            active = src.draw(n, rng)
            dev, _ = estimate_gradient_deviation(model, active, proxy,
                                                 "mean_l2_onehot")
            per_n[n].append(dev)
    meds = [float(np.median(per_n[n])) for n in (100, 200, 400)]
    ok = meds[0] > meds[1] > meds[2]
    report(5, ok, f"median deviation vs 4000-node proxy {[round(m, 5) for m in meds]} "
                  f"strictly decreasing", time.perf_counter() - t0, 300)


def test_criterion_6_gradient_oracle():
    # 30 random small instances; analytic vs central finite differences.
    # relu instances are reseeded when a pre-activation sits within h of a
    # kink, where the finite-difference quotient itself is invalid.
    t0 = time.perf_counter()
    worst = 0.0
    rng_top = np.random.default_rng(2024)
    checked = 0
    attempt = 0
    while checked < 30:
        attempt += 1
        seed = int(rng_top.integers(2 ** 31)) + attempt
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 16))
        taps = int(rng.integers(1, 4))
        f_in, f_hidden, f_out = (int(v) for v in rng.integers(2, 6, size=3))
        activation = ("relu", "sigmoid")[checked % 2]
        kind = ("mean_l2_onehot", "softmax_cross_entropy")[checked % 2 == 0]
        pts = rng.standard_normal((n, 3))
        g = build_graph(pts, 1.0, mode="dense", weight_floor=0.0)
        lap = laplacian(g)
        model = init_model([f_in, f_hidden, f_out], taps, activation, seed)
        x = rng.standard_normal((n, f_in))
        y = rng.integers(1, f_out + 1, size=n)
        mask = np.sort(rng.choice(n, size=max(2, n // 2), replace=False))

        out, cache = gnn_forward(model, lap, x)
        if activation == "relu":
            closest = min(np.min(np.abs(z)) for z in cache.pre_activations[:-1])
            if closest < 1e-3:
                continue
        _, d_out = loss_masked(y, out, mask, kind)
        grads = gnn_backward(model, cache, d_out)

        h = 1e-5
        for li, w in enumerate(model.weights):
            flat = w.reshape(-1)
            fd = np.zeros(flat.size)
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                up = loss_masked(y, gnn_forward(model, lap, x)[0], mask, kind)[0]
                flat[j] = orig - h
                dn = loss_masked(y, gnn_forward(model, lap, x)[0], mask, kind)[0]
                flat[j] = orig
                fd[j] = (up - dn) / (2 * h)
            rel = np.linalg.norm(grads[li].reshape(-1) - fd) / max(np.linalg.norm(fd), 1e-12)
            worst = max(worst, rel)
        checked += 1
    report(6, worst < 1e-4, f"30 instances, worst per-tensor relative gradient "
                            f"error {worst:.2e} < 1e-4", time.perf_counter() - t0, 30)


def test_criterion_7_exactness_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    notes = []

    # Laplacian row sums and exact weight symmetry
    pts = rng.standard_normal((400, 8))
    for mode, k in (("dense", 0), ("knn_exact", 12)):
        g = build_graph(pts, 1.0, k=k, mode=mode)
        assert (g.adjacency != g.adjacency.T).nnz == 0, "asymmetry"
        row = float(np.max(np.abs(laplacian(g).matrix @ np.ones(g.n))))
        assert row < 1e-12, f"row sum {row}"
    notes.append("rowsum<1e-12")

    # permutation equivariance within 1e-9
    g = build_graph(rng.standard_normal((40, 4)), 1.0, mode="dense", weight_floor=0.0)
    lap = laplacian(g).matrix
    model = init_model([4, 6, 3], 3, "relu", 0)
    x = rng.standard_normal((40, 4))
    perm = rng.permutation(40)
    import scipy.sparse as sp
    p = sp.csr_matrix((np.ones(40), (np.arange(40), perm)), shape=(40, 40))
    y, _ = gnn_forward(model, lap, x)
    yp, _ = gnn_forward(model, (p @ lap @ p.T).tocsr(), p @ x)
    dev = float(np.max(np.abs(yp - p @ y)))
    assert dev < 1e-9, f"equivariance {dev}"
    notes.append(f"equivariance {dev:.1e}")

    # K=1 GNN is the MLP, exactly
    m1 = init_model([4, 6, 3], 1, "relu", 1)
    y1, _ = gnn_forward(m1, lap, x)
    h = np.maximum(x @ m1.weights[0][0], 0.0)
    assert np.array_equal(y1, h @ m1.weights[1][0]), "K=1 != MLP"
    notes.append("K=1==MLP")

    # embedding save/load round-trip, exact
    emb = EmbeddingSet(data=rng.standard_normal((25, 5)).astype(np.float32),
                       labels=rng.integers(1, 4, size=25), n_classes=3,
                       split=assign_split(25, 0.6, 0))
    path = "/tmp/geossl_acceptance.memb"
    save_embeddings(emb, path)
    back = load_embeddings(path)
    assert (np.array_equal(back.data, emb.data)
            and np.array_equal(back.labels, emb.labels)
            and np.array_equal(back.split, emb.split)), "round trip"
    os.unlink(path)
    notes.append("round-trip exact")

    # ANN recall against brute force on 10k points, k=10
    big = np.random.default_rng(8).standard_normal((10000, 8))
    exact = build_graph(big, 1.0, k=10, mode="knn_exact")
    approx = build_graph(big, 1.0, k=10, mode="knn_ann", seed=0)
    recall = knn_recall(approx, exact)
    assert recall >= 0.95, f"recall {recall}"
    notes.append(f"ann recall {recall:.3f}")

    report(7, True, "; ".join(notes), time.perf_counter() - t0, 120)


def _mnist_dir():
    root = os.environ.get("GEOSSL_DATA", os.path.join(os.path.dirname(__file__), "..", "data"))
    return os.path.join(root, "mnist")


MNIST_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
               "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


def test_criterion_8_pca_mnist_pipeline():
    # raw MNIST -> PCA(128) -> k=100 Gaussian graph (sigma 4.0) -> 1-layer
    # network; test accuracy within [45, 65] percent
    folder = _mnist_dir()
    paths = [os.path.join(folder, name) for name in MNIST_FILES]
    if not all(os.path.exists(p) for p in paths):
        pytest.skip(
            f"MNIST IDX files not present under {folder} and not obtainable in "
            "this sandbox (no dataset network access; see decisions ledger). "
            "Place the four standard files there to run this criterion.")
    t0 = time.perf_counter()
    raw = merge_raw(load_idx_images(paths[0], paths[1]),
                    load_idx_images(paths[2], paths[3]))
    emb = pca_embed(raw, 128)
    g = build_graph(emb.data, sigma=4.0, k=100, mode="knn_exact")
    from geossl.train import GraphBundle, build_operator
    bundle = GraphBundle(x=emb.data.astype(np.float64), y=emb.labels,
                         split=emb.split, graph=g,
                         operator=build_operator(g, "mean_adjacency"))
    model = init_model([128, 128, 10], 2, "relu", 0)
    sched = TrainSchedule(mode="fixed", total_steps=100, lr=0.01,
                          loss_kind="softmax_cross_entropy", eval_every=0)
    trained, _ = train_fixed(model, g, bundle.x, bundle.y, bundle.split, sched,
                             operator_kind="mean_adjacency")
    rep = evaluate(trained, bundle, "softmax_cross_entropy")
    acc = rep.test_accuracy * 100
    report(8, 45.0 <= acc <= 65.0, f"PCA-GNN MNIST test accuracy {acc:.2f}% in [45, 65]",
           time.perf_counter() - t0, 1800)
