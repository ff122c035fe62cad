"""Sparse encodings of numeric rows: common discretization (CD), local linear
encoding (LLE) and the combined multi-granularity encoder (MGD).

Index layout.  An encoder is a sequence of *slots*; each slot encodes one
source field at one granularity.  Slot blocks are laid out contiguously in
slot order (CD/MGD: one index per bin, LLE: one index per bin boundary, with
interior boundaries shared by the two adjacent bins).  Missing-value indices,
when allocated, follow after all blocks, one per slot.

Encoded datasets are held densely as ``indices``/``weights`` arrays of shape
``(rows, slots, width)`` where ``width`` is 1 for CD/MGD and 2 for LLE.  When
a slot emits a single entry under LLE (constant field or missing value) the
second column repeats the first index with weight 0.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from featdisc import binning
from featdisc.binning import BinSpec
from featdisc.errors import DataError, StructureError

KINDS = ("CD", "LLE", "MGD")
FORMAT_VERSION = 1


@dataclass(frozen=True)
class SparseVector:
    entries: tuple[tuple[int, float], ...]

    @property
    def indices(self) -> list[int]:
        return [i for i, _ in self.entries]

    @property
    def weights(self) -> list[float]:
        return [w for _, w in self.entries]

    def __len__(self):
        return len(self.entries)

    def to_text(self) -> str:
        return " ".join(f"{i}:{w!r}" for i, w in self.entries)


@dataclass(frozen=True)
class Slot:
    field: int
    bins: BinSpec
    offset: int
    missing_index: int | None = None


@dataclass(frozen=True)
class EncoderSpec:
    kind: str
    slots: tuple[Slot, ...]
    field_count: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown encoder kind {self.kind!r}")

    @property
    def width(self) -> int:
        return 2 if self.kind == "LLE" else 1

    def block_size(self, slot: Slot) -> int:
        return slot.bins.granularity + (1 if self.kind == "LLE" else 0)

    @property
    def total_indices(self) -> int:
        blocks = sum(self.block_size(s) for s in self.slots)
        return blocks + sum(s.missing_index is not None for s in self.slots)

    def index_map(self) -> dict[tuple, int]:
        """(slot, bin-or-boundary) and (slot, "missing") -> global index."""
        out = {}
        for s_i, slot in enumerate(self.slots):
            for j in range(self.block_size(slot)):
                out[(s_i, j)] = slot.offset + j
            if slot.missing_index is not None:
                out[(s_i, "missing")] = slot.missing_index
        return out

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "field_count": self.field_count,
            "slots": [
                {"field": s.field, "offset": s.offset, "missing_index": s.missing_index, "bins": s.bins.to_dict()}
                for s in self.slots
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderSpec":
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported EncoderSpec version {data.get('version')!r}")
        slots = tuple(
            Slot(s["field"], BinSpec.from_dict(s["bins"]), s["offset"], s["missing_index"]) for s in data["slots"]
        )
        return cls(data["kind"], slots, data["field_count"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def _layout(kind: str, pairs: list[tuple[int, BinSpec]], field_count: int, missing_fields: set[int]) -> EncoderSpec:
    slots = []
    offset = 0
    extra = 1 if kind == "LLE" else 0
    for field, bins in pairs:
        slots.append(Slot(field, bins, offset))
        offset += bins.granularity + extra
    final = []
    for slot in slots:
        if slot.field in missing_fields:
            final.append(Slot(slot.field, slot.bins, slot.offset, offset))
            offset += 1
        else:
            final.append(slot)
    return EncoderSpec(kind, tuple(final), field_count)


def _missing_fields(features: np.ndarray, fields: Iterable[int], missing: str) -> set[int]:
    if missing == "always":
        return set(fields)
    if missing == "never":
        return set()
    if missing == "auto":
        return {f for f in fields if np.isnan(features[:, f]).any()}
    raise ValueError(f"missing must be 'auto', 'always' or 'never', got {missing!r}")


def fit_encoder(
    features: np.ndarray,
    kind: str,
    granularity: int,
    strategy: str = "equal_frequency",
    missing: str = "auto",
) -> EncoderSpec:
    """Fit one BinSpec per field and lay out a CD or LLE index space.

    ``missing="auto"`` allocates a missing-value index only for fields whose
    fitting data contains NaN; "always" allocates one per field.
    """
    if kind not in ("CD", "LLE"):
        raise ValueError("fit_encoder builds CD or LLE encoders; use mgd.mgd_select for MGD")
    features = np.asarray(features, dtype=np.float64)
    F = features.shape[1]
    pairs = [(f, binning.fit(features[:, f], granularity, strategy, field_id=f)) for f in range(F)]
    return _layout(kind, pairs, F, _missing_fields(features, range(F), missing))


def encoder_from_bins(kind: str, specs: list[BinSpec], features: np.ndarray, missing: str = "auto") -> EncoderSpec:
    """CD or LLE encoder over previously fitted BinSpecs (one per field, in order)."""
    features = np.asarray(features, dtype=np.float64)
    fields = [s.field_id for s in specs]
    if fields != list(range(features.shape[1])):
        raise StructureError(f"expected one BinSpec per field 0..{features.shape[1] - 1}, got field ids {fields}")
    return _layout(kind, list(zip(fields, specs)), features.shape[1], _missing_fields(features, fields, missing))


def combine_cd(features: np.ndarray, bin_specs: list[tuple[int, BinSpec]], missing: str = "auto") -> EncoderSpec:
    """MGD encoder: one CD slot per surviving (field, BinSpec) pair."""
    features = np.asarray(features, dtype=np.float64)
    pairs = sorted(bin_specs, key=lambda p: (p[0], p[1].granularity))
    fields = {f for f, _ in pairs}
    return _layout("MGD", pairs, features.shape[1], _missing_fields(features, fields, missing))


def lle_weights(bins: BinSpec, values: np.ndarray):
    """Bin ids and interpolation weights for non-missing ``values``.

    ``beta`` is evaluated as (v_c - v_a) / (v_b - v_a) with ``v_c`` clamped into
    the bin, and ``alpha = 1 - beta`` so that ``alpha + beta == 1`` holds in
    floating point.
    """
    values = np.asarray(values, dtype=np.float64)
    b = binning.locate_many(bins, values)
    if bins.degenerate:
        return b, np.ones_like(values), np.zeros_like(values)
    bnd = bins.boundaries
    va, vb = bnd[b], bnd[b + 1]
    vc = np.clip(values, va, vb)
    beta = (vc - va) / (vb - va)
    return b, 1.0 - beta, beta


@dataclass(frozen=True, eq=False)
class EncodedData:
    indices: np.ndarray
    weights: np.ndarray
    labels: np.ndarray
    row_ids: np.ndarray
    total_indices: int
    encoder_hash: str
    kind: str

    def __len__(self):
        return self.indices.shape[0]

    @property
    def slot_count(self) -> int:
        return self.indices.shape[1]

    def take(self, idx) -> "EncodedData":
        return EncodedData(
            self.indices[idx], self.weights[idx], self.labels[idx], self.row_ids[idx],
            self.total_indices, self.encoder_hash, self.kind,
        )

    def row(self, i: int) -> SparseVector:
        acc: dict[int, float] = {}
        for j, w in zip(self.indices[i].ravel().tolist(), self.weights[i].ravel().tolist()):
            acc[j] = acc.get(j, 0.0) + w
        return SparseVector(tuple(sorted(acc.items())))

    def dump(self, fh) -> None:
        """Sparse text format: ``label index:weight index:weight ...`` per row."""
        for i in range(len(self)):
            fh.write(f"{int(self.labels[i])} {self.row(i).to_text()}\n")


def _encode_matrix(spec: EncoderSpec, features: np.ndarray):
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != spec.field_count:
        raise StructureError(f"expected rows with {spec.field_count} fields, got shape {features.shape}")
    n, S, W = features.shape[0], len(spec.slots), spec.width
    idx = np.empty((n, S, W), dtype=np.int64)
    wts = np.empty((n, S, W), dtype=np.float64)
    for s, slot in enumerate(spec.slots):
        col = features[:, slot.field]
        nan = np.isnan(col)
        if nan.any() and slot.missing_index is None:
            raise DataError(f"field {slot.field} has missing values but the encoder has no missing index for it")
        if spec.kind == "LLE":
            b, alpha, beta = lle_weights(slot.bins, np.where(nan, slot.bins.lo, col))
            lower = slot.offset + b
            upper = np.where(slot.bins.degenerate, lower, lower + 1)
            idx[:, s, 0], idx[:, s, 1] = lower, upper
            wts[:, s, 0], wts[:, s, 1] = alpha, beta
            if nan.any():
                idx[nan, s, :] = slot.missing_index
                wts[nan, s, 0], wts[nan, s, 1] = 1.0, 0.0
        else:
            b = binning.locate_many(slot.bins, col)
            idx[:, s, 0] = np.where(nan, slot.missing_index if slot.missing_index is not None else 0, slot.offset + b)
            wts[:, s, 0] = 1.0
    return idx, wts


def encode(spec: EncoderSpec, dataset) -> EncodedData:
    """Encode every row of a NumericDataset."""
    idx, wts = _encode_matrix(spec, dataset.features)
    for arr in (idx, wts):
        arr.setflags(write=False)
    return EncodedData(idx, wts, dataset.labels, dataset.row_ids, spec.total_indices, spec.hash, spec.kind)


def _encode_row(spec: EncoderSpec, row) -> SparseVector:
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1 or row.shape[0] != spec.field_count:
        raise StructureError(f"row has {row.size} values, encoder expects {spec.field_count}")
    idx, wts = _encode_matrix(spec, row[None, :])
    acc: dict[int, float] = {}
    for j, w in zip(idx.ravel().tolist(), wts.ravel().tolist()):
        acc[j] = acc.get(j, 0.0) + w
    return SparseVector(tuple(sorted(acc.items())))


def encode_cd(spec: EncoderSpec, row) -> SparseVector:
    if spec.kind not in ("CD", "MGD"):
        raise ValueError(f"encode_cd needs a CD or MGD encoder, got {spec.kind}")
    return _encode_row(spec, row)


def encode_lle(spec: EncoderSpec, row) -> SparseVector:
    if spec.kind != "LLE":
        raise ValueError(f"encode_lle needs an LLE encoder, got {spec.kind}")
    return _encode_row(spec, row)


def count_parameters(spec: EncoderSpec, embedding_dim: int = 1) -> int:
    """Embedding-side parameter count: one ``embedding_dim`` vector per index."""
    return spec.total_indices * embedding_dim
