import numpy as np
import pytest
import scipy.sparse as sp

from geossl.graph import (GeometricGraph, apply_extension_operator, build_graph,
                          gaussian_weight, knn_recall, laplacian,
                          load_graph_binary, save_edge_list_csv,
                          save_graph_binary, scaled_laplacian, sigma_schedule)


def random_points(n, dim, seed):
    return np.random.default_rng(seed).standard_normal((n, dim))


class TestGaussianWeight:
    def test_zero_distance(self):
        assert gaussian_weight([1.0, 2.0], [1.0, 2.0], 0.7) == 1.0

    def test_exponent_minus_one(self):
        # squared distance 2 sigma^2 forces exp(-1)
        sigma = 1.3
        xi = np.zeros(3)
        xj = np.array([np.sqrt(2.0) * sigma, 0.0, 0.0])
        assert abs(gaussian_weight(xi, xj, sigma) - np.exp(-1.0)) < 1e-12

    def test_mnist_width_value(self):
        # width 4.0 at distance 4 gives exp(-16/32)
        w = gaussian_weight([0.0, 0.0], [4.0, 0.0], 4.0)
        assert abs(w - 0.6065306597126334) < 1e-12

    def test_errors(self):
        with pytest.raises(ValueError):
            gaussian_weight([0.0], [1.0], 0.0)
        with pytest.raises(ValueError):
            gaussian_weight([0.0], [1.0], -2.0)
        with pytest.raises(ValueError):
            gaussian_weight([0.0, 1.0], [1.0], 1.0)


class TestBuildGraph:
    def test_collinear_dense_weights(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        g = build_graph(pts, sigma=1.0, mode="dense", weight_floor=0.0)
        a = g.adjacency.toarray()
        assert abs(a[0, 1] - np.exp(-0.5)) < 1e-15
        assert abs(a[1, 2] - np.exp(-0.5)) < 1e-15
        assert abs(a[0, 2] - np.exp(-2.0)) < 1e-15
        assert np.all(a.diagonal() == 0.0)

    def test_symmetry_and_diagonal_exact(self):
        for mode, k in (("dense", 0), ("knn_exact", 5), ("knn_ann", 5)):
            g = build_graph(random_points(60, 4, 1), sigma=1.0, k=k, mode=mode, seed=2)
            assert (g.adjacency != g.adjacency.T).nnz == 0
            assert np.all(g.adjacency.diagonal() == 0.0)
            assert g.adjacency.data.max() <= 1.0
            assert g.adjacency.data.min() >= 0.0

    def test_full_budget_knn_equals_dense(self):
        pts = random_points(40, 3, seed=3)
        dense = build_graph(pts, sigma=0.9, mode="dense", weight_floor=0.0)
        knn = build_graph(pts, sigma=0.9, k=39, mode="knn_exact")
        assert (dense.adjacency != knn.adjacency).nnz == 0

    def test_scale_covariance(self):
        pts = random_points(30, 5, seed=4)
        s = 3.7
        g1 = build_graph(pts, sigma=0.8, mode="dense", weight_floor=0.0)
        g2 = build_graph(pts * s, sigma=0.8 * s, mode="dense", weight_floor=0.0)
        assert np.max(np.abs(g1.adjacency.toarray() - g2.adjacency.toarray())) < 1e-12

    def test_weight_one_only_at_zero_distance(self):
        pts = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]])
        g = build_graph(pts, sigma=1.0, mode="dense", weight_floor=0.0)
        a = g.adjacency.toarray()
        assert a[0, 1] == 1.0
        assert 0.0 < a[0, 2] < 1.0

    def test_degenerate_inputs(self):
        with pytest.raises(ValueError):
            build_graph(random_points(1, 2, 0), sigma=1.0)
        with pytest.raises(ValueError):
            build_graph(random_points(5, 2, 0), sigma=1.0, k=5, mode="knn_exact")
        with pytest.raises(ValueError):
            build_graph(random_points(5, 2, 0), sigma=0.0)
        with pytest.raises(ValueError):
            build_graph(random_points(5, 2, 0), sigma=1.0, k=1, mode="balltree")

    def test_ann_deterministic_per_seed(self):
        pts = random_points(200, 6, seed=5)
        g1 = build_graph(pts, sigma=1.0, k=8, mode="knn_ann", seed=9)
        g2 = build_graph(pts, sigma=1.0, k=8, mode="knn_ann", seed=9)
        assert (g1.adjacency != g2.adjacency).nnz == 0
        assert np.array_equal(g1.neighbor_lists, g2.neighbor_lists)


class TestLaplacian:
    def test_small_exact(self):
        a = sp.csr_matrix(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 2.0], [0.0, 2.0, 0.0]]))
        g = GeometricGraph(n=3, adjacency=a, sigma=1.0, k=0, construction_mode="dense")
        lap = laplacian(g)
        # diag(A1) = diag(1, 3, 2); rows of L sum to zero
        expected = np.array([[1.0, -1.0, 0.0], [-1.0, 3.0, -2.0], [0.0, -2.0, 2.0]])
        assert np.array_equal(lap.matrix.toarray(), expected)
        assert np.array_equal(lap.degree, np.array([1.0, 3.0, 2.0]))
        assert np.array_equal(lap.matrix @ np.ones(3), np.zeros(3))

    def test_two_node_edge(self):
        a = sp.csr_matrix(np.array([[0.0, 0.5], [0.5, 0.0]]))
        g = GeometricGraph(n=2, adjacency=a, sigma=1.0, k=0, construction_mode="dense")
        out = laplacian(g).matrix.toarray()
        assert np.array_equal(out, np.array([[0.5, -0.5], [-0.5, 0.5]]))

    def test_row_sums_vanish(self):
        g = build_graph(random_points(80, 3, seed=6), sigma=1.2, mode="dense",
                        weight_floor=0.0)
        lap = laplacian(g)
        assert np.max(np.abs(lap.matrix @ np.ones(g.n))) < 1e-12

    def test_positive_semidefinite(self):
        for seed in range(3):
            g = build_graph(random_points(50, 4, seed=seed), sigma=1.0, mode="dense",
                            weight_floor=0.0)
            eigs = np.linalg.eigvalsh(laplacian(g).matrix.toarray())
            assert eigs.min() >= -1e-8

    def test_scaled_laplacian_scale(self):
        g = build_graph(random_points(20, 2, seed=7), sigma=0.5, mode="dense",
                        weight_floor=0.0)
        raw = laplacian(g).matrix.toarray()
        scaled = scaled_laplacian(g, intrinsic_dim=1).toarray()
        assert np.allclose(scaled, raw / (20 * 0.5 ** 3), atol=0, rtol=1e-15)


class TestExtensionOperator:
    def test_constant_signal_cancels(self):
        pts = random_points(37, 2, seed=8)
        f = np.full(37, 2.5)
        for sigma in (0.3, 1.0, 4.0):
            val = apply_extension_operator(pts, f, np.array([0.2, -0.1]), 2.5, sigma)
            assert abs(val) < 1e-12

    def test_single_sample_closed_form(self):
        u1 = np.array([1.0, 0.0])
        u = np.array([0.0, 1.0])
        sigma = 0.9
        got = apply_extension_operator(u1[None, :], np.array([0.7]), u, -0.3, sigma)
        kern = np.exp(-2.0 / (2 * sigma**2))
        assert abs(got - (-0.3 - 0.7) * kern) < 1e-15

    def test_matches_dense_kernel_laplacian_rows(self):
        # at a sample point the operator equals row j of (diag(K1)-K) f / n,
        # K the full kernel matrix (diagonal terms cancel)
        rng = np.random.default_rng(9)
        pts = rng.standard_normal((50, 3))
        f = rng.standard_normal(50)
        sigma = 0.8
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
        kern = np.exp(-d2 / (2 * sigma**2))
        oracle = (np.diag(kern.sum(axis=1)) - kern) @ f / 50.0
        got = apply_extension_operator(pts, f, pts, f, sigma)
        assert np.max(np.abs(got - oracle)) < 1e-12

    def test_errors(self):
        with pytest.raises(ValueError):
            apply_extension_operator(np.empty((0, 2)), np.empty(0), np.zeros(2), 0.0, 1.0)
        with pytest.raises(ValueError):
            apply_extension_operator(np.zeros((3, 2)), np.zeros(2), np.zeros(2), 0.0, 1.0)
        with pytest.raises(ValueError):
            apply_extension_operator(np.zeros((3, 2)), np.zeros(3), np.zeros(2), 0.0, -1.0)


class TestKnnRecall:
    def test_identical_graphs(self):
        pts = random_points(300, 5, seed=10)
        exact = build_graph(pts, sigma=1.0, k=10, mode="knn_exact")
        assert knn_recall(exact, exact) == 1.0

    def test_disjoint_neighbor_sets(self):
        lists_a = np.array([[1, 2], [2, 3], [3, 4], [4, 0], [0, 1]])
        lists_b = np.array([[3, 4], [4, 0], [0, 1], [1, 2], [2, 3]])
        adj = sp.csr_matrix((5, 5))
        a = GeometricGraph(5, adj, 1.0, 2, "knn_ann", neighbor_lists=lists_a)
        b = GeometricGraph(5, adj, 1.0, 2, "knn_exact", neighbor_lists=lists_b)
        assert knn_recall(a, b) == 0.0

    def test_recall_high_on_gaussian_cloud(self):
        pts = random_points(2000, 8, seed=11)
        exact = build_graph(pts, sigma=1.0, k=10, mode="knn_exact")
        approx = build_graph(pts, sigma=1.0, k=10, mode="knn_ann", seed=1)
        assert knn_recall(approx, exact) >= 0.95

    def test_mismatch_errors(self):
        pts = random_points(50, 3, seed=12)
        g1 = build_graph(pts, sigma=1.0, k=5, mode="knn_exact")
        g2 = build_graph(pts, sigma=1.0, k=6, mode="knn_exact")
        with pytest.raises(ValueError):
            knn_recall(g1, g2)
        g3 = build_graph(pts[:40], sigma=1.0, k=5, mode="knn_exact")
        with pytest.raises(ValueError):
            knn_recall(g1, g3)


class TestExports:
    def test_binary_round_trip(self, tmp_path):
        g = build_graph(random_points(64, 4, seed=13), sigma=1.1, k=6, mode="knn_exact")
        path = tmp_path / "graph.mgrf"
        save_graph_binary(g, path)
        adj = load_graph_binary(path)
        assert (adj != g.adjacency).nnz == 0

    def test_binary_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.mgrf"
        path.write_bytes(b"XXXX" + b"\0" * 40)
        with pytest.raises(ValueError):
            load_graph_binary(path)
        g = build_graph(random_points(10, 2, seed=14), sigma=1.0, mode="dense")
        save_graph_binary(g, tmp_path / "ok.mgrf")
        blob = (tmp_path / "ok.mgrf").read_bytes()
        (tmp_path / "short.mgrf").write_bytes(blob[:-4])
        with pytest.raises(ValueError):
            load_graph_binary(tmp_path / "short.mgrf")

    def test_edge_list_csv(self, tmp_path):
        g = build_graph(random_points(12, 3, seed=15), sigma=1.0, mode="dense",
                        weight_floor=0.0)
        path = tmp_path / "edges.csv"
        save_edge_list_csv(g, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "i,j,w"
        assert len(lines) - 1 == 12 * 11 // 2
        for line in lines[1:]:
            i, j, w = line.split(",")
            assert int(i) < int(j)
            assert 0.0 <= float(w) <= 1.0


def test_sigma_schedule():
    rule = sigma_schedule(2.0, intrinsic_dim=1)
    assert abs(rule(32) - 2.0 * 32 ** (-0.2)) < 1e-15
    with pytest.raises(ValueError):
        sigma_schedule(0.0, 1)
