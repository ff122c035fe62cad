"""Experiment grids: (encoder, granularity, training ratio, model) cells run
through split -> bin -> encode -> train -> test AUC.

A run directory holds ``config.json`` (the exact config), ``results.csv``,
``results.txt`` and one ``cells/<cell_id>/`` directory per cell containing a
single-cell ``config.json``, ``encoder.json``, ``model.npz`` and
``result.json``.  Re-running a cell's ``config.json`` reproduces its AUC
bit-identically.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from featdisc import datasets, encoding, mgd
from featdisc.models import DnnArch, TrainConfig, auc, train_dnn, train_lr
from featdisc.datasets import NumericDataset, SplitSpec, SyntheticSpec
from featdisc.errors import ConfigurationError, FeatDiscError

log = logging.getLogger(__name__)

DATA_DIR_ENV = "FEATDISC_DATA_DIR"
CONFIG_VERSION = 1


@dataclass(frozen=True)
class DatasetConfig:
    path: str | None = None
    synthetic: SyntheticSpec | None = None
    max_rows: int | None = None
    name: str | None = None

    def __post_init__(self):
        if (self.path is None) == (self.synthetic is None):
            raise ConfigurationError("dataset needs exactly one of 'path' or 'synthetic'")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.path:
            return Path(self.path).name.split(".")[0]
        return self.synthetic.name or f"synthetic-{self.synthetic.generator_id}"


@dataclass(frozen=True)
class EncoderChoice:
    kind: str
    granularity: int | None = None
    granularities: tuple[int, ...] = mgd.DEFAULT_GRANULARITIES
    strategy: str = "equal_frequency"

    def __post_init__(self):
        object.__setattr__(self, "granularities", tuple(self.granularities))
        if self.kind not in encoding.KINDS:
            raise ConfigurationError(f"unknown encoder kind {self.kind!r}")
        if self.kind != "MGD" and not self.granularity:
            raise ConfigurationError(f"{self.kind} needs a granularity")

    @property
    def label(self) -> str:
        return "MGD" if self.kind == "MGD" else f"{self.kind}({self.granularity})"


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    encoders: tuple[EncoderChoice, ...]
    ratios: tuple[float, ...] = (1.0,)
    models: tuple[str, ...] = ("lr",)
    split: SplitSpec = SplitSpec()
    train: TrainConfig = TrainConfig()
    dnn: DnnArch = DnnArch()
    probe: TrainConfig = mgd.PROBE_CONFIG
    embedding_dim: int = 1
    seed: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "encoders", tuple(self.encoders))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        object.__setattr__(self, "models", tuple(self.models))
        for m in self.models:
            if m not in ("lr", "dnn"):
                raise ConfigurationError(f"unknown model {m!r}")
        for r in self.ratios:
            replace(self.split, sample_ratio=r)  # validates the ratio

    # serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        out = asdict(self)
        out["version"] = CONFIG_VERSION
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        version = data.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigurationError(f"unsupported config version {version!r}")
        ds = dict(data.pop("dataset"))
        if ds.get("synthetic") is not None:
            ds["synthetic"] = SyntheticSpec(**ds["synthetic"])
        kwargs = {
            "dataset": DatasetConfig(**ds),
            "encoders": tuple(EncoderChoice(**e) for e in data.pop("encoders")),
        }
        if "split" in data:
            kwargs["split"] = SplitSpec(**data.pop("split"))
        for key, typ in (("train", TrainConfig), ("probe", TrainConfig), ("dnn", DnnArch)):
            if key in data:
                kwargs[key] = typ(**data.pop(key))
        try:
            return cls(**kwargs, **data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (KeyError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"{path}: {exc}") from None

    @property
    def hash(self) -> str:
        data = self.to_dict()
        data.pop("output_dir")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:12]

    def cells(self):
        for enc in self.encoders:
            for ratio in self.ratios:
                for model in self.models:
                    yield Cell(enc, ratio, model)

    def for_cell(self, cell: "Cell") -> "ExperimentConfig":
        return replace(self, encoders=(cell.encoder,), ratios=(cell.ratio,), models=(cell.model,), output_dir=None)


@dataclass(frozen=True)
class Cell:
    encoder: EncoderChoice
    ratio: float
    model: str

    @property
    def cell_id(self) -> str:
        enc = self.encoder.label.replace("(", "").replace(")", "")
        return f"{enc}_{self.model}_r{self.ratio:g}"


@dataclass
class CellResult:
    dataset: str
    encoder: str
    ratio: float
    model: str
    config_hash: str
    seed: int
    auc100: float | None = None
    valid_auc100: float | None = None
    train_rows: int = 0
    embedding_params: int = 0
    total_params: int = 0
    mgd_params_before: int | None = None
    error: str | None = None

    COLUMNS = ("dataset", "encoder", "ratio", "model", "auc100", "valid_auc100", "train_rows",
               "embedding_params", "total_params", "mgd_params_before", "config_hash", "seed", "error")


def resolve_path(path: str) -> Path:
    p = Path(path)
    if not p.is_absolute() and not p.exists() and os.environ.get(DATA_DIR_ENV):
        p = Path(os.environ[DATA_DIR_ENV]) / p
    return p


def load_dataset(cfg: DatasetConfig) -> NumericDataset:
    if cfg.synthetic is not None:
        ds, _ = datasets.generate_synthetic(cfg.synthetic)
        return datasets.with_name(ds, cfg.label)
    return datasets.load_csv(resolve_path(cfg.path), max_rows=cfg.max_rows, name=cfg.label)


@dataclass
class CellData:
    train: NumericDataset
    valid: NumericDataset
    test: NumericDataset


def partitions(dataset: NumericDataset, split: SplitSpec, ratio: float) -> CellData:
    train, valid, test = datasets.split(dataset, replace(split, sample_ratio=ratio))
    # row-id audit: nothing from valid/test may reach training
    if np.intersect1d(train.row_ids, np.concatenate([valid.row_ids, test.row_ids])).size:
        raise ConfigurationError("train partition overlaps valid/test rows")
    return CellData(train, valid, test)


def fit_cell_encoder(cfg: ExperimentConfig, enc: EncoderChoice, data: CellData):
    """Returns (EncoderSpec, MgdSelection or None); bins are fit on train only."""
    if enc.kind == "MGD":
        sel = mgd.mgd_select(data.train, data.valid, enc.granularities, enc.strategy, cfg.probe)
        return sel.encoder, sel
    return encoding.fit_encoder(data.train.features, enc.kind, enc.granularity, enc.strategy), None


def run_cell(cfg: ExperimentConfig, cell: Cell, dataset: NumericDataset | None = None, out_dir: Path | None = None):
    dataset = dataset if dataset is not None else load_dataset(cfg.dataset)
    # rows carry the single-cell config hash so a re-run from cells/<id>/config.json reproduces the row
    result = CellResult(cfg.dataset.label, cell.encoder.label, cell.ratio, cell.model, cfg.for_cell(cell).hash, cfg.seed)
    data = partitions(dataset, replace(cfg.split, seed=cfg.seed), cell.ratio)
    spec, sel = fit_cell_encoder(cfg, cell.encoder, data)
    tr, va, te = (encoding.encode(spec, d) for d in (data.train, data.valid, data.test))
    if cell.model == "lr":
        model = train_lr(tr, va, cfg.train)
    else:
        model = train_dnn(tr, va, cfg.train, cfg.dnn)
    result.train_rows = len(tr)
    result.auc100 = 100.0 * auc(model.predict(te), te.labels)
    if model.info.valid_auc is not None:
        result.valid_auc100 = 100.0 * model.info.valid_auc
    dim = 1 if cell.model == "lr" else cfg.dnn.embedding_dim
    counts = model.parameter_count()
    result.embedding_params = encoding.count_parameters(spec, dim)
    result.total_params = counts["total"]
    if sel is not None:
        result.mgd_params_before = sel.parameters_before(dim)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "config.json").write_text(cfg.for_cell(cell).to_json())
        (out_dir / "encoder.json").write_text(spec.to_json())
        model.save(out_dir / "model.npz")
        (out_dir / "result.json").write_text(json.dumps(asdict(result), indent=2))
    return result


def run_experiment(cfg: ExperimentConfig) -> list[CellResult]:
    """Run every cell; a failing cell is recorded and the rest still run."""
    out = Path(cfg.output_dir) if cfg.output_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(cfg.to_json())
    dataset = load_dataset(cfg.dataset)
    results = []
    for cell in cfg.cells():
        log.info("cell %s", cell.cell_id)
        try:
            res = run_cell(cfg, cell, dataset, out / "cells" / cell.cell_id if out else None)
        except FeatDiscError as exc:
            res = CellResult(cfg.dataset.label, cell.encoder.label, cell.ratio, cell.model, cfg.for_cell(cell).hash, cfg.seed,
                             error=f"{cell.cell_id}: {type(exc).__name__}: {exc}")
        results.append(res)
    if out is not None:
        (out / "results.csv").write_text(results_csv(results))
        (out / "results.txt").write_text(results_table(results))
    return results


def results_csv(results: list[CellResult]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CellResult.COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in results:
        row = asdict(r)
        writer.writerow({k: row[k] for k in CellResult.COLUMNS})
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.2f}"
    return str(v)


def results_table(results: list[CellResult]) -> str:
    cols = ("dataset", "encoder", "ratio", "model", "auc100", "train_rows", "embedding_params",
            "total_params", "mgd_params_before", "config_hash", "seed")
    rows = [[_fmt(getattr(r, c)) if c != "ratio" else f"{r.ratio:g}" for c in cols] for r in results]
    widths = [max(len(c), *(len(row[i]) for row in rows)) for i, c in enumerate(cols)] if rows else [len(c) for c in cols]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in rows]
    lines += [f"ERROR {r.error}" for r in results if r.error]
    return "\n".join(lines) + "\n"


def desk_scale_config(kind: str = "higgs", rows: int = 200_000, seed: int = 0, **overrides) -> ExperimentConfig:
    """Synthetic stand-in for HIGGS (28 fields) / SUSY (18 fields)."""
    fields = {"higgs": 28, "susy": 18}[kind]
    spec = SyntheticSpec("smooth-nonlinear", fields, rows, noise_sigma=DESK_NOISE[kind], seed=seed,
                         name=f"{kind}-like")
    base = dict(
        dataset=DatasetConfig(synthetic=spec),
        encoders=(EncoderChoice("CD", 10), EncoderChoice("LLE", 10), EncoderChoice("CD", 100)),
        ratios=(0.1, 0.01),
        models=("lr",),
        seed=seed,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


DESK_NOISE = {"higgs": 2.0, "susy": 1.5}
