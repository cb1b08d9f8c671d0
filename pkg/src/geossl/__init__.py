"""Geometric graphs from embeddings and semi-supervised GNN training on them.

The pipeline: sample or load embeddings, connect them with Gaussian
kernel weights into a geometric graph, take the combinatorial Laplacian,
and train a polynomial-filter GNN with the loss masked to a labeled
node subset - on one fixed graph or on a sequence of growing ones.
Synthetic circle/sphere samplers with analytic Laplace-Beltrami spectra
provide ground truth for the convergence and generalization-gap
experiments.
"""

from .manifold import (AnalyticEigenpair, PointCloud, analytic_eigenpair,
                       circle_cosine_index, fourier_features, intrinsic_dim,
                       sample_manifold, synthetic_labels)
from .graph import (GeometricGraph, LaplacianOperator, apply_extension_operator,
                    build_graph, gaussian_weight, knn_recall, laplacian,
                    load_graph_binary, save_edge_list_csv, save_graph_binary,
                    scaled_laplacian, sigma_schedule)
from .embeddings import (EmbeddingSet, RawDataset, assign_split, load_embeddings,
                         load_embeddings_csv, load_idx_images, merge_raw,
                         pca_embed, save_embeddings, save_embeddings_csv)
from .nn import (GnnModel, accuracy, gnn_backward, gnn_forward, init_model,
                 knn_classify, knn_classify_loo, load_model, loss_masked,
                 mean_adjacency, predict, save_model)
from .train import (DatasetSource, GapReport, GraphBundle, KernelLaplacianOperator,
                    ManifoldTaskSource, NumericError, TrainSchedule, build_operator,
                    estimate_gradient_deviation, evaluate, generalization_gap,
                    train_fixed, train_growing, transferability_test,
                    write_trace_csv)

__version__ = "0.1.0"
