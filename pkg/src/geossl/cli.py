"""Experiment runner: config files, protocol subcommands, CSV/JSON emission.

Configs are flat `key = value` text files; any key can be overridden on
the command line with `--set key=value`. Unknown keys are rejected
before any compute starts. Outputs are deterministic given config and
seed except for wall-clock duration columns; timestamps only ever go to
the sidecar run.log.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 I/O failure.
``GEOSSL_THREADS`` pins internal (BLAS) parallelism and caps --jobs.
"""

import argparse
import json
import os
import subprocess
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields


class ConfigError(ValueError):
    pass


def _parse_bool(s):
    if s in ("true", "1", "yes"):
        return True
    if s in ("false", "0", "no"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _parse_int_list(s):
    return [int(v) for v in s.split(",") if v.strip() != ""]


# key -> (caster, default-as-string or None)
SCHEMA = {
    "dataset": (str, "sphere"),            # circle | sphere | mnist | fmnist | custom
    "embeddings": (str, ""),               # MEMB path for dataset=custom/mnist/fmnist
    "images": (str, ""),                   # IDX paths for pca-embed
    "labels": (str, ""),
    "test_images": (str, ""),
    "test_labels": (str, ""),
    "n": (int, "500"),                     # node count for synthetic/subgraph runs
    "n_grid": (_parse_int_list, "250,500,1000,2000"),
    "sigma": (float, "0.5"),
    "sigma_c": (float, "0"),               # >0: sigma = sigma_c * n^(-1/(d+4))
    "k": (int, "0"),
    "graph_mode": (str, "dense"),          # dense | knn_exact | knn_ann
    "arch": (str, "gnn"),                  # gnn | sage-mean
    "operator": (str, "auto"),             # auto | laplacian | scaled_laplacian | mean_adjacency
    "hidden": (int, "16"),
    "layers": (int, "1"),
    "taps": (int, "2"),
    "activation": (str, "relu"),
    "loss_kind": (str, "softmax_cross_entropy"),
    "lr": (float, "0.01"),
    "optimizer": (str, "adam"),
    "total_steps": (int, "300"),
    "eval_every": (int, "50"),
    "mode": (str, "fixed"),                # fixed | growing
    "n0": (int, "0"),
    "delta_n": (int, "0"),
    "delta_t": (int, "1"),
    "growth_style": (str, "fresh_resample"),
    "adaptive": (_parse_bool, "false"),
    "epsilon": (float, "0"),
    "train_fraction": (float, "0.8"),
    "label_rule": (str, "hemisphere"),
    "sectors": (int, "4"),
    "seed": (int, "0"),
    "seeds": (_parse_int_list, "0,1,2,3"),
    "pca_dim": (int, "128"),
    "knn_k": (int, "5"),
    "proxy_factor": (int, "10"),
    "weight_floor": (float, "1e-12"),
    "ann_trees": (int, "24"),
    "ann_leaf": (int, "48"),
    "ann_search_k": (int, "0"),   # 0 picks the default heuristic
    "out_dir": (str, ""),
    "jobs": (int, "1"),
}

_SYNTHETIC = ("circle", "sphere")


@dataclass
class ExperimentConfig:
    values: dict

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise AttributeError(key)

    def echo(self):
        """String form of every key; re-parsing it rebuilds this config."""
        out = {}
        for key, value in self.values.items():
            if isinstance(value, list):
                out[key] = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                out[key] = "true" if value else "false"
            else:
                out[key] = str(value)
        return out


def parse_kv_text(text, origin="<config>"):
    kv = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in body.split("=", 1))
        if key in kv:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        kv[key] = value
    return kv


def make_config(kv):
    """Validate raw key-value strings into an ExperimentConfig."""
    unknown = sorted(set(kv) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    values = {}
    for key, (caster, default) in SCHEMA.items():
        raw = kv.get(key, default)
        try:
            values[key] = caster(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
    cfg = ExperimentConfig(values)
    _validate(cfg)
    return cfg


def _validate(cfg):
    from . import graph as graph_mod
    from . import nn as nn_mod
    from . import train as train_mod
    if cfg.dataset not in _SYNTHETIC + ("mnist", "fmnist", "custom"):
        raise ConfigError(f"unknown dataset {cfg.dataset!r}")
    if cfg.dataset not in _SYNTHETIC and not cfg.embeddings and not cfg.images:
        raise ConfigError(f"dataset {cfg.dataset!r} needs an embeddings= path "
                          "(or images=/labels= for pca-embed)")
    if cfg.graph_mode not in graph_mod.CONSTRUCTION_MODES:
        raise ConfigError(f"unknown graph_mode {cfg.graph_mode!r}")
    if cfg.arch not in ("gnn", "sage-mean"):
        raise ConfigError(f"unknown arch {cfg.arch!r}")
    if cfg.operator not in ("auto",) + train_mod.OPERATOR_KINDS:
        raise ConfigError(f"unknown operator {cfg.operator!r}")
    if cfg.activation not in nn_mod.ACTIVATIONS:
        raise ConfigError(f"unknown activation {cfg.activation!r}")
    if cfg.loss_kind not in nn_mod.LOSS_KINDS:
        raise ConfigError(f"unknown loss_kind {cfg.loss_kind!r}")
    if cfg.optimizer not in train_mod.OPTIMIZERS:
        raise ConfigError(f"unknown optimizer {cfg.optimizer!r}")
    if not cfg.seeds:
        raise ConfigError("seeds list must not be empty")
    if cfg.sigma <= 0 and cfg.sigma_c <= 0:
        raise ConfigError("one of sigma or sigma_c must be positive")
    if not 0.0 < cfg.train_fraction < 1.0:
        raise ConfigError("train_fraction must lie in (0, 1)")
    if cfg.mode not in ("fixed", "growing"):
        raise ConfigError(f"unknown schedule mode {cfg.mode!r}")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")


def load_config(path, overrides=()):
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            kv = parse_kv_text(fh.read(), origin=path)
    else:
        kv = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        kv[key.strip()] = value.strip()
    return make_config(kv)


# ---------------------------------------------------------------------------
# shared task assembly

def _git_describe():
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"],
                             capture_output=True, text=True, timeout=10,
                             cwd=os.path.dirname(os.path.abspath(__file__)))
        return out.stdout.strip() or "unknown"
    except Exception:
        return "unknown"


def _sigma_for(cfg, n, dim):
    if cfg.sigma_c > 0:
        from .graph import sigma_schedule
        return sigma_schedule(cfg.sigma_c, dim)(n)
    return cfg.sigma


def _operator_kind(cfg, synthetic):
    if cfg.operator != "auto":
        return cfg.operator
    if cfg.arch == "sage-mean":
        return "mean_adjacency"
    return "scaled_laplacian" if synthetic else "laplacian"


def _taps(cfg):
    # the mean-aggregation protocol architecture is a 2-tap filter:
    # self term plus one-hop mean
    return 2 if cfg.arch == "sage-mean" else cfg.taps


def _load_dataset_embeddings(cfg):
    from .embeddings import assign_split, load_embeddings
    if not cfg.embeddings:
        raise ConfigError(f"dataset {cfg.dataset!r} needs an embeddings= path")
    if not os.path.exists(cfg.embeddings):
        raise ConfigError(f"embeddings file not found: {cfg.embeddings}")
    emb = load_embeddings(cfg.embeddings)
    if emb.split is None:
        # split-less files get one deterministic split per (config, seed) so
        # every subcommand sees the same train/test partition
        emb.split = assign_split(emb.n, cfg.train_fraction, cfg.seed)
    return emb


def _make_bundle(cfg, seed, n=None):
    """One labeled graph bundle per the config's dataset block."""
    import numpy as np
    from . import train as train_mod
    from .embeddings import assign_split
    from .graph import build_graph
    from .manifold import intrinsic_dim, sample_manifold, synthetic_labels
    rng = np.random.default_rng([seed, 0xB0D1])
    if cfg.dataset in _SYNTHETIC:
        size = n or cfg.n
        dim = intrinsic_dim(cfg.dataset)
        cloud = sample_manifold(cfg.dataset, size, int(rng.integers(2 ** 63)))
        y = synthetic_labels(cloud, cfg.label_rule,
                             cfg.sectors if cfg.label_rule == "angular_sector" else None)
        split = assign_split(size, cfg.train_fraction, int(rng.integers(2 ** 63)))
        x = cloud.points
    else:
        emb = _load_dataset_embeddings(cfg)
        dim = None
        if n is not None and n < emb.n:
            idx = rng.choice(emb.n, size=n, replace=False)
        else:
            idx = np.arange(emb.n)
        x = emb.data[idx].astype(np.float64)
        y = emb.labels[idx]
        split = emb.split[idx]
    sigma = _sigma_for(cfg, x.shape[0], dim if dim is not None else 2)
    g = build_graph(x, sigma, k=cfg.k, mode=cfg.graph_mode,
                    seed=int(rng.integers(2 ** 63)), weight_floor=cfg.weight_floor,
                    n_trees=cfg.ann_trees, leaf_size=cfg.ann_leaf,
                    search_k=cfg.ann_search_k or None)
    kind = _operator_kind(cfg, cfg.dataset in _SYNTHETIC)
    op = train_mod.build_operator(g, kind, dim)
    return train_mod.GraphBundle(x=x, y=y, split=split, graph=g, operator=op), dim


def _model_for(cfg, f_in, n_classes, seed):
    from .nn import init_model
    widths = [f_in] + [cfg.hidden] * cfg.layers + [n_classes]
    return init_model(widths, _taps(cfg), cfg.activation, seed)


def _schedule_for(cfg, seed, mode=None):
    from .train import TrainSchedule
    return TrainSchedule(mode=mode or cfg.mode, total_steps=cfg.total_steps,
                         lr=cfg.lr, optimizer=cfg.optimizer, loss_kind=cfg.loss_kind,
                         seed=seed, n0=cfg.n0, delta_n=cfg.delta_n, delta_t=cfg.delta_t,
                         growth_style=cfg.growth_style, eval_every=cfg.eval_every,
                         adaptive=cfg.adaptive, epsilon=cfg.epsilon).validate()


def _out_dir(cfg, command):
    path = cfg.out_dir or os.path.join("runs", command)
    os.makedirs(path, exist_ok=True)
    return path


def _log_timestamps(out, phase):
    import datetime
    with open(os.path.join(out, "run.log"), "a") as fh:
        fh.write(f"{phase} {datetime.datetime.now().isoformat()}\n")


def _write_report(path, report, cfg, extra=None):
    doc = {"report": report.to_dict(), "config": cfg.echo(),
           "git_describe": _git_describe()}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands

def cmd_build_graph(cfg):
    import numpy as np
    from .graph import save_edge_list_csv, save_graph_binary
    out = _out_dir(cfg, "build-graph")
    _log_timestamps(out, "started")
    bundle, _ = _make_bundle(cfg, cfg.seed)
    g = bundle.graph
    save_edge_list_csv(g, os.path.join(out, "graph_edges.csv"))
    save_graph_binary(g, os.path.join(out, "graph.mgrf"))
    degree = np.asarray(g.adjacency.sum(axis=1)).ravel()
    summary = {
        "n": g.n, "nnz": int(g.adjacency.nnz), "sigma": g.sigma, "k": g.k,
        "mode": g.construction_mode,
        "degree_quantiles": {f"q{q}": float(np.percentile(degree, q))
                             for q in (0, 25, 50, 75, 100)},
    }
    with open(os.path.join(out, "graph_summary.json"), "w") as fh:
        json.dump({"summary": summary, "config": cfg.echo()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _log_timestamps(out, "finished")
    print(f"graph: n={g.n} nnz={g.adjacency.nnz} -> {out}")
    return 0


def cmd_train(cfg):
    import time
    from .train import evaluate, train_fixed, write_trace_csv
    out = _out_dir(cfg, "train")
    _log_timestamps(out, "started")
    t0 = time.perf_counter()
    bundle, dim = _make_bundle(cfg, cfg.seed)
    model = _model_for(cfg, bundle.x.shape[1], int(bundle.y.max()), cfg.seed)
    schedule = _schedule_for(cfg, cfg.seed, mode="fixed")
    kind = _operator_kind(cfg, cfg.dataset in _SYNTHETIC)
    trained, trace = train_fixed(model, bundle.graph, bundle.x, bundle.y, bundle.split,
                                 schedule, operator_kind=kind, intrinsic_dim=dim)
    report = evaluate(trained, bundle, cfg.loss_kind)
    report.seed = cfg.seed
    report.wall_time = time.perf_counter() - t0
    write_trace_csv(trace, os.path.join(out, "trace.csv"))
    _write_report(os.path.join(out, "report.json"), report, cfg)
    _log_timestamps(out, "finished")
    print(f"train: n={report.n} train_acc={report.train_accuracy:.4f} "
          f"test_acc={report.test_accuracy:.4f} gap={report.gap:.6f}")
    return 0


def _make_source(cfg):
    from .graph import sigma_schedule
    from .manifold import intrinsic_dim
    from .train import DatasetSource, ManifoldTaskSource
    kind = _operator_kind(cfg, cfg.dataset in _SYNTHETIC)
    if cfg.dataset in _SYNTHETIC:
        dim = intrinsic_dim(cfg.dataset)
        rule = sigma_schedule(cfg.sigma_c, dim) if cfg.sigma_c > 0 else None
        return ManifoldTaskSource(cfg.dataset, label_rule=cfg.label_rule,
                                  sectors=cfg.sectors if cfg.label_rule == "angular_sector" else None,
                                  sigma_rule=rule, sigma=None if rule else cfg.sigma,
                                  k=cfg.k, graph_mode=cfg.graph_mode, operator_kind=kind,
                                  train_fraction=cfg.train_fraction,
                                  proxy_factor=cfg.proxy_factor)
    emb = _load_dataset_embeddings(cfg)
    return DatasetSource(emb, cfg.sigma, k=cfg.k, graph_mode=cfg.graph_mode,
                         operator_kind=kind)


def cmd_train_growing(cfg):
    import time
    from .train import evaluate, train_growing, write_trace_csv
    out = _out_dir(cfg, "train-growing")
    _log_timestamps(out, "started")
    t0 = time.perf_counter()
    source = _make_source(cfg)
    if cfg.n0 < 2:
        raise ConfigError("train-growing needs n0 >= 2")
    probe = _make_bundle(cfg, cfg.seed, n=max(cfg.n0, 2))[0]
    model = _model_for(cfg, probe.x.shape[1], int(probe.y.max()), cfg.seed)
    schedule = _schedule_for(cfg, cfg.seed, mode="growing")
    result = train_growing(source, schedule, model)
    trained, trace, growth_log = result.model, result.trace, result.growth_log
    report = evaluate(trained, result.final_bundle, cfg.loss_kind)
    report.seed = cfg.seed
    report.wall_time = time.perf_counter() - t0
    write_trace_csv(trace, os.path.join(out, "trace.csv"))
    _write_report(os.path.join(out, "report.json"), report, cfg,
                  extra={"growth_log": growth_log})
    _log_timestamps(out, "finished")
    grown = sum(1 for e in growth_log if e.get("grew"))
    print(f"train-growing: final_n={report.n} test_acc={report.test_accuracy:.4f} "
          f"gap={report.gap:.6f} growth_checks={len(growth_log)} grown={grown}")
    return 0


def _gap_sweep_one(args):
    cfg_kv, n, seed = args
    cfg = make_config(cfg_kv)
    from .train import evaluate, train_fixed
    bundle, dim = _make_bundle(cfg, seed, n=n)
    model = _model_for(cfg, bundle.x.shape[1], int(bundle.y.max()), seed)
    schedule = _schedule_for(cfg, seed, mode="fixed")
    kind = _operator_kind(cfg, cfg.dataset in _SYNTHETIC)
    trained, _ = train_fixed(model, bundle.graph, bundle.x, bundle.y, bundle.split,
                             schedule, operator_kind=kind, intrinsic_dim=dim)
    report = evaluate(trained, bundle, cfg.loss_kind)
    report.seed = seed
    return n, seed, report


def cmd_gap_sweep(cfg):
    out = _out_dir(cfg, "gap-sweep")
    _log_timestamps(out, "started")
    tasks = [(dict(cfg.echo()), n, seed) for n in cfg.n_grid for seed in cfg.seeds]
    jobs = _job_count(cfg)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_gap_sweep_one, tasks))
    else:
        results = [_gap_sweep_one(t) for t in tasks]
    rows_path = os.path.join(out, "gap_sweep.csv")
    with open(rows_path, "w") as fh:
        fh.write("n,seed,train_risk,test_risk,gap,ga_over_train_acc,train_acc,test_acc\n")
        for n, seed, rep in results:
            ratio = rep.gap / rep.train_accuracy if rep.train_accuracy > 0 else float("nan")
            fh.write(f"{n},{seed},{rep.train_risk!r},{rep.test_risk!r},{rep.gap!r},"
                     f"{ratio!r},{rep.train_accuracy!r},{rep.test_accuracy!r}\n")
    agg_path = os.path.join(out, "gap_sweep_agg.csv")
    with open(agg_path, "w") as fh:
        fh.write("n,mean_gap,mean_ga_over_train_acc\n")
        for n in cfg.n_grid:
            reps = [r for nn, _, r in results if nn == n]
            mean_gap = sum(r.gap for r in reps) / len(reps)
            mean_ratio = sum(r.gap / r.train_accuracy for r in reps if r.train_accuracy > 0)
            mean_ratio = mean_ratio / len(reps)
            fh.write(f"{n},{mean_gap!r},{mean_ratio!r}\n")
            print(f"gap-sweep: n={n} mean_gap={mean_gap:.6f}")
    _log_timestamps(out, "finished")
    return 0


def cmd_convergence(cfg):
    import numpy as np
    from .graph import apply_extension_operator, sigma_schedule
    from .manifold import analytic_eigenpair, circle_cosine_index, intrinsic_dim, sample_manifold
    if cfg.dataset not in _SYNTHETIC:
        raise ConfigError("convergence runs on a synthetic manifold (circle or sphere)")
    out = _out_dir(cfg, "convergence")
    _log_timestamps(out, "started")
    dim = intrinsic_dim(cfg.dataset)
    c = cfg.sigma_c if cfg.sigma_c > 0 else 1.5
    rule = sigma_schedule(c, dim)
    if cfg.dataset == "circle":
        pair = analytic_eigenpair("circle", circle_cosine_index(2))
    else:
        pair = analytic_eigenpair("sphere", 4)  # first degree-2 harmonic
    rows = []
    for n in cfg.n_grid:
        for seed in cfg.seeds:
            cloud = sample_manifold(cfg.dataset, n, seed)
            f = pair.eigenfunction(cloud.points)
            sigma_n = rule(n)
            est = apply_extension_operator(cloud.points, f, cloud.points, f, sigma_n)
            target = pair.eigenvalue * f
            corr = float(np.corrcoef(est, target)[0, 1])
            scale = float(np.dot(est, target) / np.dot(target, target))
            rows.append((n, seed, sigma_n, corr, scale))
    path = os.path.join(out, "convergence.csv")
    with open(path, "w") as fh:
        fh.write("n,seed,sigma_n,correlation,fitted_scale\n")
        for n, seed, sig, corr, scale in rows:
            fh.write(f"{n},{seed},{sig!r},{corr!r},{scale!r}\n")
    for n in cfg.n_grid:
        med = sorted(c for nn, _, _, c, _ in rows if nn == n)[len(cfg.seeds) // 2]
        print(f"convergence: n={n} median_correlation={med:.5f}")
    _log_timestamps(out, "finished")
    return 0


def cmd_transferability(cfg):
    from .graph import sigma_schedule
    from .manifold import intrinsic_dim
    from .train import transferability_test
    if cfg.dataset not in _SYNTHETIC:
        raise ConfigError("transferability runs on a synthetic manifold")
    out = _out_dir(cfg, "transferability")
    _log_timestamps(out, "started")
    dim = intrinsic_dim(cfg.dataset)
    rule = sigma_schedule(cfg.sigma_c, dim) if cfg.sigma_c > 0 else (lambda n: cfg.sigma)
    rows = []
    for seed in cfg.seeds:
        model = _model_for(cfg, dim + 1, max(cfg.hidden // 4, 2), seed)
        disc = transferability_test(model, cfg.dataset, cfg.n_grid, rule, seed,
                                    proxy_factor=cfg.proxy_factor)
        rows.extend((n, seed, d) for n, d in zip(cfg.n_grid, disc))
    path = os.path.join(out, "transferability.csv")
    with open(path, "w") as fh:
        fh.write("n,seed,discrepancy\n")
        for n, seed, d in rows:
            fh.write(f"{n},{seed},{d!r}\n")
    for n in cfg.n_grid:
        med = sorted(d for nn, _, d in rows if nn == n)[len(cfg.seeds) // 2]
        print(f"transferability: n={n} median_discrepancy={med:.6f}")
    _log_timestamps(out, "finished")
    return 0


def cmd_pca_embed(cfg):
    from .embeddings import load_idx_images, merge_raw, pca_embed, save_embeddings
    if not cfg.images or not cfg.labels:
        raise ConfigError("pca-embed needs images= and labels= IDX paths")
    for path in (cfg.images, cfg.labels, cfg.test_images, cfg.test_labels):
        if path and not os.path.exists(path):
            raise ConfigError(f"input file not found: {path}")
    out = _out_dir(cfg, "pca-embed")
    _log_timestamps(out, "started")
    raw = load_idx_images(cfg.images, cfg.labels)
    if cfg.test_images:
        if not cfg.test_labels:
            raise ConfigError("test_images needs test_labels")
        raw = merge_raw(raw, load_idx_images(cfg.test_images, cfg.test_labels))
    emb = pca_embed(raw, cfg.pca_dim)
    path = os.path.join(out, "embeddings_pca.memb")
    save_embeddings(emb, path)
    with open(os.path.join(out, "pca_sidecar.json"), "w") as fh:
        json.dump({"n": emb.n, "dim": emb.dim, "n_classes": emb.n_classes,
                   "config": cfg.echo(), "git_describe": _git_describe()},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    _log_timestamps(out, "finished")
    print(f"pca-embed: n={emb.n} F={emb.dim} -> {path}")
    return 0


def cmd_baselines(cfg):
    import time
    import numpy as np
    from .nn import accuracy, knn_classify, predict, gnn_forward
    from .train import evaluate, train_fixed
    out = _out_dir(cfg, "baselines")
    _log_timestamps(out, "started")
    emb = _load_dataset_embeddings(cfg)
    rows = []

    def add_row(name, train_acc, test_acc):
        rows.append((name, train_acc, test_acc))
        print(f"baselines: {name:10s} train={train_acc:.4f} test={test_acc:.4f}")

    # kNN on the raw embeddings; train column is leave-one-out
    from .nn import knn_classify_loo
    preds = knn_classify(emb, cfg.knn_k)
    test_idx = emb.test_indices()
    train_idx = emb.train_indices()
    loo = knn_classify_loo(emb, cfg.knn_k)
    add_row("knn", accuracy(emb.labels[train_idx], loo),
            accuracy(emb.labels[test_idx], preds))

    # GNN on the geometric graph, and the K=1 MLP on the same graph
    bundle, dim = _make_bundle(cfg, cfg.seed)
    for name, taps in (("gnn", _taps(cfg)), ("mlp", 1)):
        from .nn import init_model
        widths = [bundle.x.shape[1]] + [cfg.hidden] * cfg.layers + [int(bundle.y.max())]
        model = init_model(widths, taps, cfg.activation, cfg.seed)
        schedule = _schedule_for(cfg, cfg.seed, mode="fixed")
        kind = _operator_kind(cfg, cfg.dataset in _SYNTHETIC)
        trained, _ = train_fixed(model, bundle.graph, bundle.x, bundle.y, bundle.split,
                                 schedule, operator_kind=kind, intrinsic_dim=dim)
        rep = evaluate(trained, bundle, cfg.loss_kind)
        add_row(name, rep.train_accuracy, rep.test_accuracy)

    with open(os.path.join(out, "baselines.csv"), "w") as fh:
        fh.write("model,train_acc,test_acc\n")
        for name, tr, te in rows:
            fh.write(f"{name},{tr!r},{te!r}\n")
    _log_timestamps(out, "finished")
    return 0


# ---------------------------------------------------------------------------

def _job_count(cfg):
    cap = os.environ.get("GEOSSL_THREADS")
    jobs = cfg.jobs
    if cap:
        jobs = min(jobs, max(1, int(cap)))
    return jobs


COMMANDS = {
    "build-graph": cmd_build_graph,
    "train": cmd_train,
    "train-growing": cmd_train_growing,
    "gap-sweep": cmd_gap_sweep,
    "convergence": cmd_convergence,
    "transferability": cmd_transferability,
    "pca-embed": cmd_pca_embed,
    "baselines": cmd_baselines,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="geossl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default="", help="key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    threads = os.environ.get("GEOSSL_THREADS")
    limiter = None
    if threads:
        try:
            from threadpoolctl import threadpool_limits
            limiter = threadpool_limits(limits=max(1, int(threads)))
        except ImportError:
            pass
    try:
        cfg = load_config(args.config, args.set)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        from .train import NumericError
        if isinstance(exc, (NumericError, FloatingPointError)):
            print(f"numeric failure: {exc}", file=sys.stderr)
            return 3
        if isinstance(exc, OSError) or isinstance(exc, ValueError):
            kind = "i/o failure" if isinstance(exc, OSError) else "input failure"
            print(f"{kind}: {exc}", file=sys.stderr)
            return 4
        raise
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
