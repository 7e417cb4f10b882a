"""Repeated-split experiment protocols behind the command-line tool.

Each ``run_*`` function returns ``(header, rows)``; the caller writes CSV.
Run ``r`` of an experiment uses the split and ensemble seeds derived from
``(seed, r)``, so every method/metric cell is evaluated on the same splits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .classify import METRICS, KnnConfig
from .dataset import read_manifest, stratified_split
from .ensemble import VOTING, EnsembleConfig, fit_predict
from .errors import ConfigError, UnsupportedScheme
from .subspace import MethodSpec, fit_basis, project, reconstruct

ALL_METHODS = ("B2DLDA", "L2DLDA", "R2DLDA", "B2DPCA", "L2DPCA", "R2DPCA")


def _split_list(value):
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return tuple(v.strip() for v in str(value).split(",") if v.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Optional[str] = None
    methods: tuple = ALL_METHODS
    metrics: tuple = ("frobenius", "cosine")
    votings: tuple = ("weighted", "unweighted", "original")
    per_class_train: int = 5
    per_class_test: int = 5
    t: int = 50
    d: int = 5
    d_original: int = 10
    k: int = 1
    b: float = 2.0
    repeats: int = 30
    seed: int = 0
    out: str = "."
    equalize: bool = False

    def __post_init__(self):
        for name in ("methods", "metrics", "votings"):
            object.__setattr__(self, name, _split_list(getattr(self, name)))
        for name in self.methods:
            MethodSpec.from_name(name)
        bad = [m for m in self.metrics if m not in METRICS] + [v for v in self.votings if v not in VOTING]
        if bad:
            raise ConfigError(f"unknown metric/voting values: {bad}")
        if not self.methods or not self.metrics or not self.votings:
            raise ConfigError("method, metric and voting grids must be non-empty")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if min(self.t, self.d, self.d_original, self.k) < 1:
            raise ConfigError("t, d, d_original and k must be >= 1")
        if self.b < 0 or self.per_class_train < 1 or self.per_class_test < 0:
            raise ConfigError("need b >= 0, per_class_train >= 1, per_class_test >= 0")

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        kinds = {f.name: f.type for f in fields(cls)}
        parsed = {}
        for key, raw in values.items():
            if raw is None:
                continue
            if key not in kinds:
                raise ConfigError(f"unknown config key {key!r}")
            parsed[key] = _coerce(kinds[key], raw, key)
        return cls(**parsed)


def _coerce(kind, raw, key):
    if not isinstance(raw, str):
        return raw
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def run_seeds(master: int, run: int):
    """(split seed, ensemble seed) for one repeat."""
    state = np.random.SeedSequence([master, run]).generate_state(2)
    return int(state[0]), int(state[1])


def load_dataset(cfg: ExperimentConfig):
    if not cfg.dataset:
        raise ConfigError("no dataset manifest given")
    return read_manifest(cfg.dataset, equalize=cfg.equalize)


def summarize(accuracies):
    acc = np.asarray(accuracies, dtype=np.float64)
    mean = float(acc.mean())
    sd = float(acc.std(ddof=1)) if len(acc) > 1 else 0.0
    return mean, sd, sd / math.sqrt(len(acc))


def _ensemble_cfg(cfg, method, metric, seed, voting="weighted", t=None, d=None, b=None):
    return EnsembleConfig(
        method=MethodSpec.from_name(method),
        t=cfg.t if t is None else t,
        d=(cfg.d_original if voting == "original" else cfg.d) if d is None else d,
        knn=KnnConfig(cfg.k, metric),
        b=cfg.b if b is None else b,
        seed=seed,
        voting=voting,
    )


TABLE_HEADER = ["method", "metric", "voting", "t", "d", "k", "b", "repeats",
                "mean", "sd", "se", "runs"]


def table_accuracies(ds, cfg: ExperimentConfig, threads=None) -> dict:
    """Per-run accuracies keyed by ``(method, metric, voting)``."""
    acc = {(m, mt, v): [] for m in cfg.methods for mt in cfg.metrics for v in cfg.votings}
    for run in range(cfg.repeats):
        split_seed, ens_seed = run_seeds(cfg.seed, run)
        split = stratified_split(ds, cfg.per_class_train, cfg.per_class_test, split_seed)
        for method in cfg.methods:
            basis = fit_basis(ds, split.train_indices, MethodSpec.from_name(method))
            for metric in cfg.metrics:
                if {"weighted", "unweighted"} & set(cfg.votings):
                    res = fit_predict(ds, split, _ensemble_cfg(cfg, method, metric, ens_seed),
                                      threads=threads, basis=basis)
                    if "weighted" in cfg.votings:
                        acc[method, metric, "weighted"].append(res.accuracy)
                    if "unweighted" in cfg.votings:
                        acc[method, metric, "unweighted"].append(res.accuracy_for(cfg.b, "unweighted"))
                if "original" in cfg.votings:
                    res = fit_predict(ds, split, _ensemble_cfg(cfg, method, metric, ens_seed, "original"),
                                      threads=threads, basis=basis)
                    acc[method, metric, "original"].append(res.accuracy)
    return acc


def run_table(cfg: ExperimentConfig, ds=None, threads=None):
    ds = load_dataset(cfg) if ds is None else ds
    acc = table_accuracies(ds, cfg, threads)
    rows = []
    for (method, metric, voting), runs in acc.items():
        mean, sd, se = summarize(runs)
        original = voting == "original"
        rows.append([method, metric, voting, 1 if original else cfg.t,
                     cfg.d_original if original else cfg.d, cfg.k, cfg.b, cfg.repeats,
                     mean, sd, se, ";".join(repr(a) for a in runs)])
    return TABLE_HEADER, rows


ENTROPY_HEADER = ["method", "metric", "sweep", "value", "t", "d", "entropy", "accuracy"]


def run_entropy_sweep(cfg: ExperimentConfig, over: str, values, ds=None, threads=None):
    """Mean ensemble entropy over repeats for each swept ``d`` or ``t``."""
    if over not in ("d", "t"):
        raise ConfigError("entropy sweep runs over 'd' or 't'")
    values = [int(v) for v in values]
    if not values or min(values) < 1:
        raise ConfigError("sweep values must be positive integers")
    if over == "t" and min(values) < 2:
        raise ConfigError("entropy needs t >= 2")
    if over == "d" and cfg.t < 2:
        raise ConfigError("entropy needs t >= 2")
    ds = load_dataset(cfg) if ds is None else ds
    rows = []
    for method in cfg.methods:
        for metric in cfg.metrics:
            for value in values:
                t = value if over == "t" else cfg.t
                d = value if over == "d" else cfg.d
                ent, acc = [], []
                for run in range(cfg.repeats):
                    split_seed, ens_seed = run_seeds(cfg.seed, run)
                    split = stratified_split(ds, cfg.per_class_train, cfg.per_class_test, split_seed)
                    res = fit_predict(ds, split, _ensemble_cfg(cfg, method, metric, ens_seed, t=t, d=d),
                                      threads=threads)
                    ent.append(res.diversity.entropy)
                    acc.append(res.accuracy)
                rows.append([method, metric, over, value, t, d, float(np.mean(ent)), float(np.mean(acc))])
    return ENTROPY_HEADER, rows


ARI_HEADER = ["method", "metric", "classifier", "left_indices", "right_indices", "ari", "weight"]


def run_ari_report(cfg: ExperimentConfig, ds=None, threads=None):
    """Per-classifier ARI for the first method, on the run-0 split."""
    ds = load_dataset(cfg) if ds is None else ds
    method = cfg.methods[0]
    split_seed, ens_seed = run_seeds(cfg.seed, 0)
    split = stratified_split(ds, cfg.per_class_train, cfg.per_class_test, split_seed)
    basis = fit_basis(ds, split.train_indices, MethodSpec.from_name(method))
    rows = []
    for metric in cfg.metrics:
        res = fit_predict(ds, split, _ensemble_cfg(cfg, method, metric, ens_seed), threads=threads, basis=basis)
        for i, c in enumerate(res.classifiers):
            rows.append([method, metric, i,
                         "-" if c.left_indices is None else " ".join(map(str, c.left_indices)),
                         "-" if c.right_indices is None else " ".join(map(str, c.right_indices)),
                         c.ari, c.weight])
    return ARI_HEADER, rows


B_HEADER = ["method", "metric", "b", "repeats", "mean", "sd", "se"]


def run_b_sweep(cfg: ExperimentConfig, b_values, ds=None, threads=None):
    """Accuracy per exponent ``b`` with the classifiers of each run held fixed."""
    b_values = [float(b) for b in b_values]
    if not b_values or min(b_values) < 0:
        raise ConfigError("b values must be a non-empty list of non-negative numbers")
    ds = load_dataset(cfg) if ds is None else ds
    acc = {(m, mt, b): [] for m in cfg.methods for mt in cfg.metrics for b in b_values}
    for run in range(cfg.repeats):
        split_seed, ens_seed = run_seeds(cfg.seed, run)
        split = stratified_split(ds, cfg.per_class_train, cfg.per_class_test, split_seed)
        for method in cfg.methods:
            basis = fit_basis(ds, split.train_indices, MethodSpec.from_name(method))
            for metric in cfg.metrics:
                res = fit_predict(ds, split, _ensemble_cfg(cfg, method, metric, ens_seed),
                                  threads=threads, basis=basis)
                for b in b_values:
                    acc[method, metric, b].append(res.accuracy_for(b))
    rows = [[m, mt, b, cfg.repeats, *summarize(runs)] for (m, mt, b), runs in acc.items()]
    return B_HEADER, rows


RECON_HEADER = ["method", "image", "d", "frobenius_error"]


def run_reconstruction(ds, index: int, d_values, method: str = "R2DPCA"):
    """Reconstructions of one image at each ``d`` plus the error table.

    The basis is fitted on the whole dataset.  Returns ``(header, rows,
    mosaic)`` where the mosaic strip starts with the original image and
    every panel is clipped and rounded to ``[0, 255]``.
    """
    spec = MethodSpec.from_name(method)
    if spec.family != "pca" or spec.scheme == "bilateral":
        raise UnsupportedScheme(f"reconstruction needs R2DPCA or L2DPCA, not {method}")
    if not 0 <= index < len(ds):
        raise ConfigError(f"image index {index} out of range")
    d_values = [int(d) for d in d_values]
    full = ds.shape[1] if spec.scheme == "right" else ds.shape[0]
    if not d_values or min(d_values) < 1 or max(d_values) > full:
        raise ConfigError(f"d values must lie in 1..{full}")
    basis = fit_basis(ds, None, spec)
    img = ds.images[index]
    panels, rows = [img], []
    for d in d_values:
        idx = list(range(d))
        feat = project(img, basis, left=idx if spec.scheme == "left" else None,
                       right=idx if spec.scheme == "right" else None)
        approx = reconstruct(feat, basis)
        rows.append([method, index, d, float(np.linalg.norm(img - approx))])
        panels.append(approx)
    mosaic = np.concatenate([np.rint(np.clip(p, 0, 255)) for p in panels], axis=1)
    return RECON_HEADER, rows, mosaic

