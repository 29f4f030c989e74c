"""Command-line surface: build datasets, train and evaluate models, and emit
spectral, stability, and symmetry reports.

Every command reads one flat key-value config (dotted keys, ``--set`` flags
override file entries), fills in its defaults, and writes the fully resolved
config next to its results.  Artifacts embed the sha256 hash of that resolved
config and all numerics are printed at 17 significant digits, so rerunning a
command from its own ``config.txt`` reproduces every output byte for byte.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import itertools
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tasks
from .complexes import (
    Cochain,
    SimplicialComplex,
    build_complex,
    permute_complex,
    reorient_complex,
)
from .errors import NumericalError, ValidationError
from .filters import ScFilter
from .models import (
    VARIANTS,
    ModelSpec,
    TrainOptions,
    auc_score,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
    simplex_scores,
    train,
    trajectory_accuracy,
)
from .perturb import (
    PerturbationSpec,
    measure_constants,
    normalize_filters,
    output_distance,
    perturb_complex,
    stability_bound,
)
from .spectra import eigenbasis

__all__ = ["RunConfig", "load_config", "main"]

TASKS = ("simplex", "trajectory", "spectra", "perturb", "equivariance")
_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def _fmt(value) -> str:
    return "%.17g" % float(value)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    """One resolved run configuration: sorted (dotted key, value) pairs.

    The canonical text form (one ``key = value`` line per pair, sorted)
    round-trips losslessly through `from_text` and is what `hash` digests.
    Typed accessors build the ModelSpec / TrainOptions views.
    """

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        keys = [k for k, _ in self.pairs]
        if len(set(keys)) != len(keys):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise ValidationError(f"duplicate config keys: {', '.join(dupes)}")
        object.__setattr__(self, "pairs", tuple(sorted(self.pairs)))
        task = self.get("task")
        if task is not None and task not in TASKS:
            raise ValidationError(f"unknown task {task!r}; expected one of {TASKS}")

    # -- raw access

    def get(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.pairs:
            if k == key:
                return v
        return default

    def require(self, key: str) -> str:
        value = self.get(key)
        if value is None:
            raise ValidationError(f"config key {key!r} is required")
        return value

    def get_int(self, key: str, default: int | None = None) -> int | None:
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ValidationError(f"config key {key!r} must be an integer, got {raw!r}")

    def get_float(self, key: str, default: float | None = None) -> float | None:
        raw = self.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ValidationError(f"config key {key!r} must be a number, got {raw!r}")

    def get_bool(self, key: str, default: bool | None = None) -> bool | None:
        raw = self.get(key)
        if raw is None:
            return default
        if raw.lower() in _TRUE:
            return True
        if raw.lower() in _FALSE:
            return False
        raise ValidationError(f"config key {key!r} must be a boolean, got {raw!r}")

    def get_list(self, key: str, cast, default=()) -> tuple:
        raw = self.get(key)
        if raw is None:
            return tuple(default)
        try:
            return tuple(cast(part.strip()) for part in raw.split(",") if part.strip())
        except ValueError:
            raise ValidationError(f"config key {key!r} holds a malformed list: {raw!r}")

    # -- common fields

    @property
    def task(self) -> str:
        return self.require("task")

    @property
    def seed(self) -> int:
        return self.get_int("seed", 0)

    @property
    def out(self) -> Path:
        return Path(self.require("out"))

    # -- typed views

    def model_spec(
        self,
        *,
        dim: int,
        input_width: int,
        readout: str | None = None,
        readout_order: int | None = None,
        variant: str | None = None,
    ) -> ModelSpec:
        layers = self.get_int("model.layers", 2)
        widths = self.get_list("model.features", int, ("16",))
        if len(widths) == 1:
            features = (input_width,) + widths * layers
        elif len(widths) == layers + 1:
            features = widths
        else:
            raise ValidationError(
                f"model.features must list 1 or {layers + 1} widths, got {len(widths)}"
            )
        return ModelSpec(
            variant=variant or self.get("model.variant", "sccnn"),
            dim=dim,
            layers=layers,
            features=features,
            t_down=self.get_int("model.t_down", 1),
            t_up=self.get_int("model.t_up", 1),
            t_proj_down=self.get_int("model.t_proj_down"),
            t_proj_up=self.get_int("model.t_proj_up"),
            nonlinearity=self.get("model.nonlinearity", "tanh"),
            scheme=self.get("model.scheme", "random_walk"),
            order=self.get_int("model.order"),
            readout=readout,
            readout_order=readout_order,
            seed=self.seed,
        )

    def train_options(self) -> TrainOptions:
        return TrainOptions(
            epochs=self.get_int("train.epochs", 100),
            lr=self.get_float("train.lr", 0.001),
            batch=self.get_int("train.batch", 100),
            weight_decay=self.get_float("train.weight_decay", 0.0),
            il_weight=self.get_float("train.il_weight", 0.0),
            patience=self.get_int("train.patience", 100),
            dtype=self.get("train.dtype", "float64"),
        )

    # -- serialization

    def text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.pairs)

    def hash(self) -> str:
        return hashlib.sha256(self.text().encode("utf-8")).hexdigest()

    def with_values(self, **updates: str) -> "RunConfig":
        merged = {k: v for k, v in self.pairs}
        merged.update({k: str(v) for k, v in updates.items()})
        return RunConfig(tuple(merged.items()))

    @classmethod
    def from_mapping(cls, mapping) -> "RunConfig":
        return cls(tuple((str(k), str(v)) for k, v in dict(mapping).items()))

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        pairs = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValidationError(f"config line {lineno} is not 'key = value': {line!r}")
            key, _, value = stripped.partition("=")
            pairs.append((key.strip(), value.strip()))
        return cls(tuple(pairs))


def load_config(path: str | None, overrides=()) -> RunConfig:
    """Read a config file (optional) and apply KEY=VALUE override flags."""
    cfg = RunConfig(())
    if path is not None:
        file = Path(path)
        if not file.exists():
            raise ValidationError(f"config file {path!r} does not exist")
        cfg = RunConfig.from_text(file.read_text(encoding="utf-8"))
    updates = {}
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        updates[key.strip()] = value.strip()
    return cfg.with_values(**updates) if updates else cfg


def _resolve(cfg: RunConfig, command: str) -> RunConfig:
    """Fill in every default the command consults, so the written config
    reproduces the run exactly."""
    forced_task = {"spectra": "spectra", "perturb": "perturb", "equivariance": "equivariance"}
    task = forced_task.get(command) or cfg.get("task", "trajectory")
    defaults: dict[str, str] = {
        "task": task,
        "seed": "0",
        "out": f"runs/{command}",
        "data.kind": "synthetic",
        "data.points": "400",
        "data.holes": "2",
    }
    defaults["data.seed"] = cfg.get("seed", "0")
    if task == "trajectory":
        defaults.update({"data.count": "1000", "data.splits": "800,100,100"})
    if task == "simplex":
        defaults.update(
            {
                "data.noise_sd": "0.25",
                "data.ratios": "0.8,0.1,0.1",
                "data.shuffle_labels": "false",
            }
        )
    if command in ("train", "eval", "sweep", "perturb", "equivariance"):
        defaults.update(
            {
                "model.variant": "sccnn",
                "model.layers": "2",
                "model.features": "16",
                "model.t_down": "1",
                "model.t_up": "1",
                "model.nonlinearity": "tanh",
                "model.scheme": "random_walk",
            }
        )
        if task == "simplex":
            defaults["model.readout"] = "simplex_nodes"
    if command in ("train", "sweep"):
        defaults.update(
            {
                "train.epochs": "100",
                "train.lr": "0.001",
                "train.batch": "100",
                "train.weight_decay": "0",
                "train.il_weight": "0",
                "train.patience": "100",
                "train.dtype": "float64",
            }
        )
    if command == "spectra":
        defaults.update({"spectra.order": "1", "spectra.scheme": "raw"})
    if command == "perturb":
        defaults.update(
            {
                "perturb.eps": "0,0.1,0.2,0.4,0.7,1",
                "perturb.seeds": "3",
                "perturb.orders": "all",
                "perturb.normalize": "true",
            }
        )
    if command == "equivariance":
        defaults.update(
            {
                "equivariance.variants": ",".join(VARIANTS),
                "equivariance.trials": "3",
            }
        )
    merged = dict(defaults)
    merged.update({k: v for k, v in cfg.pairs})
    if command == "sweep":
        merged.setdefault("sweep.layers", merged["model.layers"])
        merged.setdefault("sweep.t", merged["model.t_down"])
        merged.setdefault("sweep.features", merged["model.features"])
        merged.setdefault("sweep.seeds", "1")
    return RunConfig.from_mapping(merged)


# ---------------------------------------------------------------------------
# artifact writers


def _write_config(outdir: Path, cfg: RunConfig) -> str:
    outdir.mkdir(parents=True, exist_ok=True)
    digest = cfg.hash()
    (outdir / "config.txt").write_text(
        f"# config_hash = {digest}\n{cfg.text()}", encoding="utf-8"
    )
    return digest


def _write_json(path: Path, payload: dict, digest: str) -> None:
    body = {"config_hash": digest, **payload}
    path.write_text(json.dumps(body, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, columns, rows, digest: str) -> None:
    lines = [f"# config_hash = {digest}", ",".join(columns)]
    for row in rows:
        cells = [cell if isinstance(cell, str) else _fmt(cell) for cell in row]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_checkpoint(path: Path, spec, params, digest: str) -> None:
    save_checkpoint(path, spec, params)
    payload = json.loads(path.read_text(encoding="utf-8"))
    payload["config_hash"] = digest
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _write_complex_json(path: Path, sc: SimplicialComplex, digest: str) -> None:
    payload = {
        "node_labels": [int(v) for v in sc.node_labels],
        "cells": [[list(map(int, s)) for s in sc.simplices[k]] for k in range(sc.dim + 1)],
        "positions": None
        if sc.vertex_positions is None
        else [[float(x) for x in p] for p in sc.vertex_positions],
    }
    _write_json(path, payload, digest)


def _read_complex_json(path: str) -> SimplicialComplex:
    file = Path(path)
    if not file.exists():
        raise ValidationError(f"complex file {path!r} does not exist")
    payload = json.loads(file.read_text(encoding="utf-8"))
    labels = payload["node_labels"]
    maximal = [
        [labels[v] for v in cell] for cells in payload["cells"] for cell in cells
    ]
    positions = payload.get("positions")
    return build_complex(
        maximal, vertex_positions=None if positions is None else np.asarray(positions)
    )


# ---------------------------------------------------------------------------
# dataset assembly


def _load_complex(cfg: RunConfig) -> SimplicialComplex:
    kind = cfg.get("data.kind", "synthetic")
    if kind == "synthetic":
        return tasks.gen_synthetic_sc(
            cfg.get_int("data.points", 400),
            cfg.get_int("data.holes", 2),
            seed=cfg.get_int("data.seed", cfg.seed),
        )
    if kind == "file":
        return _read_complex_json(cfg.require("data.path"))
    raise ValidationError(f"unknown data.kind {kind!r}; expected synthetic or file")


def _trajectory_corpus(cfg: RunConfig, sc: SimplicialComplex) -> tasks.TrajectoryDataset:
    path = cfg.get("data.trajectories")
    splits = cfg.get_list("data.splits", int, (800, 100, 100))
    if path is not None:
        file = Path(path)
        if not file.exists():
            raise ValidationError(f"trajectory file {path!r} does not exist")
        payload = json.loads(file.read_text(encoding="utf-8"))
        if isinstance(payload, dict):  # hashed CLI artifact
            sequences = tuple(tuple(int(v) for v in s) for s in payload["sequences"])
            n = len(sequences)
            if sum(splits) != n:
                raise ValidationError(f"splits {splits} do not sum to {n} sequences")
            bounds = np.cumsum((0,) + tuple(splits))
            idx = {
                name: np.arange(bounds[i], bounds[i + 1])
                for i, name in enumerate(("train", "val", "test"))
            }
            return tasks.TrajectoryDataset(complex=sc, sequences=sequences, splits=idx)
        return tasks.read_trajectories_json(path, sc, splits=splits)
    return tasks.gen_trajectories(
        sc,
        count=cfg.get_int("data.count", 1000),
        seed=cfg.get_int("data.seed", cfg.seed),
        splits=splits,
    )


def _simplex_data(cfg: RunConfig, sc: SimplicialComplex):
    data_seed = cfg.get_int("data.seed", cfg.seed)
    inputs, citations, planted = tasks.gen_planted_citations(
        sc, noise_sd=cfg.get_float("data.noise_sd", 0.25), seed=data_seed
    )
    threshold = cfg.get_float("data.threshold", planted)
    dataset = tasks.build_simplex_dataset(
        sc,
        citations,
        threshold=threshold,
        ratios=cfg.get_list("data.ratios", float, (0.8, 0.1, 0.1)),
        seed=data_seed,
        inputs=inputs,
    )
    if cfg.get_bool("data.shuffle_labels", False):
        rng = np.random.default_rng(data_seed)
        shuffled = rng.permutation(dataset.labels)
        for name, rows in dataset.splits.items():
            if shuffled[rows].min() == shuffled[rows].max():
                raise ValidationError(f"label shuffle left split {name!r} single-class")
        dataset = dataclasses.replace(dataset, labels=shuffled)
    return dataset


# ---------------------------------------------------------------------------
# metric evaluation shared by train / eval


def _trajectory_metrics(spec, params, corpus) -> dict:
    sc = corpus.complex
    view = corpus.training_view()
    reversed_test = corpus.training_view(reverse_test=True).test
    return {
        "accuracy_train": trajectory_accuracy(spec, params, sc, view.train),
        "accuracy_val": trajectory_accuracy(spec, params, sc, view.val),
        "accuracy_test": trajectory_accuracy(spec, params, sc, view.test),
        "accuracy_test_reversed": trajectory_accuracy(spec, params, sc, reversed_test),
    }


def _simplex_metrics(spec, params, dataset) -> dict:
    scores = simplex_scores(spec, params, dataset.complex, dataset)
    out = {}
    for name, rows in dataset.splits.items():
        out[f"auc_{name}"] = auc_score(dataset.labels[rows], scores[rows])
    return out


def _assemble(cfg: RunConfig):
    """(spec, dataset, host complex, corpus-or-None) for train/eval tasks."""
    sc = _load_complex(cfg)
    if cfg.task == "trajectory":
        corpus = _trajectory_corpus(cfg, sc)
        spec = cfg.model_spec(dim=sc.dim, input_width=1, readout="trajectory")
        return spec, corpus.training_view(), sc, corpus
    if cfg.task == "simplex":
        dataset = _simplex_data(cfg, sc)
        readout = cfg.get("model.readout", "simplex_nodes")
        spec = cfg.model_spec(
            dim=dataset.complex.dim,
            input_width=1,
            readout=readout,
            readout_order=dataset.complex.dim,
        )
        return spec, dataset, dataset.complex, None
    raise ValidationError(f"task {cfg.task!r} is not trainable; use trajectory or simplex")


# ---------------------------------------------------------------------------
# commands


def cmd_build(cfg: RunConfig, jobs: int = 1) -> int:
    outdir = cfg.out
    digest = _write_config(outdir, cfg)
    sc = _load_complex(cfg)
    _write_complex_json(outdir / "complex.json", sc, digest)
    counts = " ".join(str(sc.num(k)) for k in range(sc.dim + 1))
    print(f"complex.json: dim {sc.dim}, sizes {counts}")
    if cfg.task == "trajectory":
        corpus = _trajectory_corpus(cfg, sc)
        _write_json(
            outdir / "trajectories.json",
            {"sequences": [list(map(int, s)) for s in corpus.sequences]},
            digest,
        )
        print(f"trajectories.json: {len(corpus.sequences)} sequences")
    if cfg.task == "simplex":
        dataset = _simplex_data(cfg, sc)
        _write_json(
            outdir / "labels.json",
            {
                "labels": [float(x) for x in dataset.labels],
                "splits": {k: [int(i) for i in v] for k, v in dataset.splits.items()},
            },
            digest,
        )
        print(f"labels.json: {int(dataset.labels.sum())} positives of {dataset.labels.size}")
    return 0


def cmd_train(cfg: RunConfig, jobs: int = 1) -> int:
    outdir = cfg.out
    digest = _write_config(outdir, cfg)
    spec, dataset, host, corpus = _assemble(cfg)
    opts = cfg.train_options()
    params, history = train(spec, host, dataset, opts)
    params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    _write_checkpoint(outdir / "checkpoint.json", spec, params, digest)
    _write_csv(
        outdir / "history.csv",
        ("epoch", "train_loss", "val_loss", "val_metric"),
        [(str(h["epoch"]), h["train_loss"], h["val_loss"], h["val_metric"]) for h in history],
        digest,
    )
    if cfg.task == "trajectory":
        metrics = _trajectory_metrics(spec, params, corpus)
    else:
        metrics = _simplex_metrics(spec, params, dataset)
    best = min(history, key=lambda h: h["val_loss"]) if history else None
    metrics["epochs_run"] = len(history)
    metrics["best_epoch"] = 0 if best is None else best["epoch"]
    _write_json(outdir / "metrics.json", metrics, digest)
    for key in sorted(metrics):
        print(f"{key} = {metrics[key]}")
    return 0


def cmd_eval(cfg: RunConfig, jobs: int = 1) -> int:
    outdir = cfg.out
    digest = _write_config(outdir, cfg)
    ckpt = Path(cfg.require("eval.checkpoint"))
    if not ckpt.exists():
        raise ValidationError(f"checkpoint {str(ckpt)!r} does not exist")
    spec, params, _, _ = load_checkpoint(ckpt)
    if cfg.task == "trajectory":
        sc = _load_complex(cfg)
        corpus = _trajectory_corpus(cfg, sc)
        if sc.dim != spec.dim:
            raise ValidationError(f"checkpoint is dim {spec.dim}, complex is dim {sc.dim}")
        metrics = _trajectory_metrics(spec, params, corpus)
    elif cfg.task == "simplex":
        dataset = _simplex_data(cfg, _load_complex(cfg))
        metrics = _simplex_metrics(spec, params, dataset)
    else:
        raise ValidationError(f"task {cfg.task!r} has no evaluation; use trajectory or simplex")
    _write_json(outdir / "metrics.json", metrics, digest)
    for key in sorted(metrics):
        print(f"{key} = {metrics[key]}")
    return 0


def cmd_spectra(cfg: RunConfig, jobs: int = 1) -> int:
    outdir = cfg.out
    digest = _write_config(outdir, cfg)
    sc = _load_complex(cfg)
    order = cfg.get_int("spectra.order", 1)
    basis = eigenbasis(sc, order, scheme=cfg.get("spectra.scheme", "raw"))
    w_down = cfg.get_list("spectra.w_down", float)
    w_up = cfg.get_list("spectra.w_up", float)
    columns = ["class", "eigenvalue"]
    rows = []
    if w_down or w_up:
        filt = ScFilter(order, np.asarray(w_down or (0.0,)), np.asarray(w_up or (0.0,)))
        columns += ["response_gradient", "response_curl"]
        wd0 = filt.w_d[0]
        wu0 = filt.w_u[0]
        for lam, label in zip(basis.values, basis.classes):
            at = 0.0 if label == "harmonic" else lam  # harmonic sits at frequency zero
            grad = wu0 + float(np.polyval(filt.w_d[::-1], at))
            curl = wd0 + float(np.polyval(filt.w_u[::-1], at))
            rows.append((label, lam, grad, curl))
    else:
        rows = list(zip(basis.classes, basis.values))
    _write_csv(outdir / "spectra.csv", columns, rows, digest)
    print(f"spectra.csv: {len(rows)} eigenvalues of L_{order}")
    return 0


def cmd_perturb(cfg: RunConfig, jobs: int = 1) -> int:
    outdir = cfg.out
    digest = _write_config(outdir, cfg)
    sc = _load_complex(cfg)
    spec = cfg.model_spec(dim=sc.dim, input_width=1)
    params = init_params(spec)
    if cfg.get_bool("perturb.normalize", True):
        params = normalize_filters(spec, params, sc)
    rng = np.random.default_rng(cfg.seed)
    inputs = {}
    for k in spec.orders:
        vec = rng.standard_normal((sc.num(k), spec.features[0]))
        inputs[k] = Cochain(k, vec / np.linalg.norm(vec))
    base = forward(spec, params, sc, inputs)
    base_norms = {k: float(np.linalg.norm(base[k].values)) for k in spec.orders}
    if any(n == 0.0 for n in base_norms.values()):
        raise NumericalError("baseline output vanished; cannot report relative distances")

    raw_orders = cfg.get("perturb.orders", "all")
    noise_orders = (
        tuple(range(sc.dim + 1))
        if raw_orders == "all"
        else cfg.get_list("perturb.orders", int)
    )
    eps_grid = cfg.get_list("perturb.eps", float, (0.0, 0.1, 0.2, 0.4, 0.7, 1.0))
    n_seeds = cfg.get_int("perturb.seeds", 3)
    rows = []
    for eps in eps_grid:
        for offset in range(n_seeds):
            seed = cfg.seed + offset
            pspec = PerturbationSpec({k: eps for k in noise_orders}, seed=seed)
            pert_ops, realized = perturb_complex(sc, pspec, scheme=spec.scheme)
            empirical = output_distance(spec, params, sc, pert_ops, inputs)
            constants = measure_constants(spec, params, sc, realized, inputs)
            bound = stability_bound(constants, spec.layers)
            for k in spec.orders:
                rows.append(
                    (
                        eps,
                        str(seed),
                        str(k),
                        empirical[k],
                        float(bound[k]) / base_norms[k],
                    )
                )
    _write_csv(
        outdir / "perturb.csv",
        ("epsilon", "seed", "order", "empirical_distance", "bound"),
        rows,
        digest,
    )
    print(f"perturb.csv: {len(rows)} rows")
    return 0


def _equivariance_spec(cfg: RunConfig, variant: str, dim: int) -> ModelSpec:
    single = {"scnn", "snn", "psnn", "linear_scf"}
    nonlinearity = cfg.get("model.nonlinearity", "tanh")
    if variant.startswith("linear"):
        nonlinearity = "identity"
    t = cfg.get_int("model.t_down", 1)
    if variant in {"psnn", "bunch"}:
        t = 1
    return ModelSpec(
        variant=variant,
        dim=dim,
        layers=cfg.get_int("model.layers", 2),
        features=(1,) + (cfg.get_list("model.features", int, ("16",))[0],)
        * cfg.get_int("model.layers", 2),
        t_down=t,
        t_up=t,
        nonlinearity=nonlinearity,
        scheme=cfg.get("model.scheme", "random_walk"),
        order=min(1, dim) if variant in single else None,
        seed=cfg.seed,
    )


def cmd_equivariance(cfg: RunConfig, jobs: int = 1) -> int:
    outdir = cfg.out
    digest = _write_config(outdir, cfg)
    sc = _load_complex(cfg)
    trials = cfg.get_int("equivariance.trials", 3)
    variants = cfg.get_list("equivariance.variants", str, VARIANTS)
    results: dict[str, dict[str, float]] = {}
    for variant in variants:
        spec = _equivariance_spec(cfg, variant, sc.dim)
        params = init_params(spec)
        perm_dev = 0.0
        orient_dev = 0.0
        for trial in range(trials):
            rng = np.random.default_rng((cfg.seed, trial))
            inputs = {
                k: Cochain(k, rng.standard_normal((sc.num(k), 1))) for k in spec.orders
            }
            out = forward(spec, params, sc, inputs)

            perms = [rng.permutation(sc.num(k)) for k in range(sc.dim + 1)]
            permuted, pmats = permute_complex(sc, perms)
            pout = forward(
                spec, params, permuted,
                {k: Cochain(k, pmats[k] @ inputs[k].values) for k in inputs},
            )
            perm_dev = max(
                perm_dev,
                max(
                    float(np.abs(pout[k].values - pmats[k] @ out[k].values).max())
                    for k in spec.orders
                ),
            )

            signs = [np.ones(sc.num(0))] + [
                rng.choice([-1.0, 1.0], size=sc.num(k)) for k in range(1, sc.dim + 1)
            ]
            flipped, dmats = reorient_complex(sc, signs)
            fout = forward(
                spec, params, flipped,
                {k: Cochain(k, dmats[k] @ inputs[k].values) for k in inputs},
            )
            orient_dev = max(
                orient_dev,
                max(
                    float(np.abs(fout[k].values - dmats[k] @ out[k].values).max())
                    for k in spec.orders
                ),
            )
        results[variant] = {"permutation": perm_dev, "orientation": orient_dev}
        print(
            f"{variant}: permutation {perm_dev:.3e}, orientation {orient_dev:.3e}"
        )
    _write_json(outdir / "equivariance.json", {"results": results}, digest)
    return 0


def _sweep_run(cfg_text: str) -> str:
    """Worker for one sweep cell: train, then return the metrics payload."""
    cfg = RunConfig.from_text(cfg_text)
    cmd_train(cfg)
    return (cfg.out / "metrics.json").read_text(encoding="utf-8")


def cmd_sweep(cfg: RunConfig, jobs: int = 1) -> int:
    outdir = cfg.out
    digest = _write_config(outdir, cfg)
    grid_layers = cfg.get_list("sweep.layers", int, (cfg.get_int("model.layers", 2),))
    grid_t = cfg.get_list("sweep.t", int, (cfg.get_int("model.t_down", 1),))
    grid_features = cfg.get_list(
        "sweep.features", int, (cfg.get_list("model.features", int, ("16",))[0],)
    )
    n_seeds = cfg.get_int("sweep.seeds", 1)
    cells = []
    for layers, t, width in itertools.product(grid_layers, grid_t, grid_features):
        for offset in range(n_seeds):
            seed = cfg.seed + offset
            run_dir = outdir / f"run_l{layers}_t{t}_f{width}_s{seed}"
            sub = cfg.with_values(**{
                "model.layers": str(layers),
                "model.t_down": str(t),
                "model.t_up": str(t),
                "model.features": str(width),
                "seed": str(seed),
                "data.seed": cfg.get("data.seed", str(cfg.seed)),
                "out": str(run_dir),
            })
            drop = [k for k, _ in sub.pairs if k.startswith("sweep.")]
            text = "".join(f"{k} = {v}\n" for k, v in sub.pairs if k not in drop)
            cells.append(((layers, t, width, seed), text))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            payloads = list(pool.map(_sweep_run, [text for _, text in cells]))
    else:
        payloads = [_sweep_run(text) for _, text in cells]
    metric_keys: list[str] = []
    rows = []
    for (layers, t, width, seed), payload in zip((c[0] for c in cells), payloads):
        metrics = json.loads(payload)
        if not metric_keys:
            metric_keys = sorted(
                k for k, v in metrics.items() if isinstance(v, (int, float)) and k != "config_hash"
            )
        rows.append(
            (str(layers), str(t), str(width), str(seed))
            + tuple(float(metrics[k]) for k in metric_keys)
        )
    _write_csv(
        outdir / "sweep.csv",
        ("layers", "t", "features", "seed", *metric_keys),
        rows,
        digest,
    )
    print(f"sweep.csv: {len(rows)} runs")
    return 0


# ---------------------------------------------------------------------------
# entry point


_COMMANDS = {
    "build": cmd_build,
    "train": cmd_train,
    "eval": cmd_eval,
    "spectra": cmd_spectra,
    "perturb": cmd_perturb,
    "equivariance": cmd_equivariance,
    "sweep": cmd_sweep,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sccnn",
        description="Simplicial-complex convolutional networks: datasets, training, reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", help="key = value config file (dotted keys)")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override one config entry (repeatable)",
        )
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument(
            "--jobs",
            type=int,
            default=1,
            help="parallel workers across independent seeds (sweep only)",
        )
    return parser


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage; that is a user error
        return 0 if exc.code in (0, None) else 1
    try:
        cfg = load_config(args.config, args.overrides)
        if args.out is not None:
            cfg = cfg.with_values(out=args.out)
        cfg = _resolve(cfg, args.command)
        return _COMMANDS[args.command](cfg, jobs=max(1, args.jobs))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
