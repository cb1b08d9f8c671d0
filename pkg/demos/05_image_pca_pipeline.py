#!/usr/bin/env python3
"""The full image pipeline: raw IDX files -> PCA embeddings -> graph -> baselines.

With the real MNIST IDX files under data/mnist/ this reproduces the
PCA-embedding protocol (128 components, kernel width 4.0, 100-NN graph).
Without them it falls back to a small synthetic image set so the whole
path is still demonstrated end to end.
"""

import os
import struct

import numpy as np

from geossl import (TrainSchedule, build_graph, build_operator, evaluate,
                    init_model, knn_classify, load_idx_images, merge_raw,
                    pca_embed, train_fixed)
from geossl.nn import accuracy
from geossl.train import GraphBundle

DATA = os.path.join(os.path.dirname(__file__), "..", "data", "mnist")
NAMES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte",
         "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")


def synthetic_idx(tmpdir):
    # three blob classes rendered as 12x12 grayscale images
    rng = np.random.default_rng(0)
    n = 900
    labels = rng.integers(0, 3, size=n).astype(np.uint8)
    yy, xx = np.mgrid[0:12, 0:12]
    centers = [(3, 3), (8, 4), (5, 9)]
    images = np.empty((n, 12, 12), dtype=np.uint8)
    for i, lab in enumerate(labels):
        cy, cx = centers[lab]
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / 6.0)
        noisy = blob + 0.35 * rng.standard_normal((12, 12))
        images[i] = np.clip(noisy * 255, 0, 255).astype(np.uint8)
    ip = os.path.join(tmpdir, "imgs.idx")
    lp = os.path.join(tmpdir, "lbls.idx")
    with open(ip, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x803, n, 12, 12))
        fh.write(images.tobytes())
    with open(lp, "wb") as fh:
        fh.write(struct.pack(">II", 0x801, n))
        fh.write(labels.tobytes())
    return ip, lp


paths = [os.path.join(DATA, name) for name in NAMES]
if all(os.path.exists(p) for p in paths):
    print("using real MNIST from data/mnist/")
    raw = merge_raw(load_idx_images(paths[0], paths[1]),
                    load_idx_images(paths[2], paths[3]))
    pca_dim, sigma, k, steps = 128, 4.0, 100, 100
else:
    print("MNIST not found; generating a synthetic 3-class image set")
    import tempfile
    with tempfile.TemporaryDirectory() as tmp:
        ip, lp = synthetic_idx(tmp)
        raw = load_idx_images(ip, lp)
    from geossl import assign_split
    raw.split = assign_split(raw.n, 0.8, seed=0)
    pca_dim, sigma, k, steps = 16, 1.2, 20, 150

emb = pca_embed(raw, pca_dim)
print(f"PCA embeddings: n={emb.n}, F={emb.dim}, classes={emb.n_classes}")

graph = build_graph(emb.data, sigma=sigma, k=k, mode="knn_exact")
print(f"graph: nnz={graph.adjacency.nnz}")

preds = knn_classify(emb, k=5)
knn_acc = accuracy(emb.labels[emb.test_indices()], preds)
print(f"kNN baseline test accuracy: {knn_acc:.4f}")

bundle = GraphBundle(x=emb.data.astype(np.float64), y=emb.labels, split=emb.split,
                     graph=graph, operator=build_operator(graph, "mean_adjacency"))
for name, taps in (("gnn", 2), ("mlp", 1)):
    model = init_model([emb.dim, 64, emb.n_classes], taps, "relu", 0)
    sched = TrainSchedule(mode="fixed", total_steps=steps, lr=0.01,
                          loss_kind="softmax_cross_entropy", eval_every=0)
    trained, _ = train_fixed(model, graph, bundle.x, bundle.y, bundle.split, sched,
                             operator_kind="mean_adjacency")
    rep = evaluate(trained, bundle, "softmax_cross_entropy")
    print(f"{name} test accuracy: {rep.test_accuracy:.4f} "
          f"(train {rep.train_accuracy:.4f}, gap {rep.gap:.5f})")
