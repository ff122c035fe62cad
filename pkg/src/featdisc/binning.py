"""Bin boundaries for one numeric field.

Conventions (the LLE weights depend on them):

* quantile rule: linear interpolation between order statistics
  (``numpy.quantile(method="linear")``, Hyndman-Fan type 7);
* duplicate cuts, and cuts equal to the observed min/max, are merged away;
* bin ``i`` covers ``[boundary_i, boundary_{i+1})``, the last bin is closed
  above, and a value exactly on a cut belongs to the upper bin;
* values outside ``[lo, hi]`` clamp to the first/last bin.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

FORMAT_VERSION = 1
STRATEGIES = ("equal_frequency", "equal_width")
MISSING = -1


@dataclass(frozen=True)
class BinSpec:
    field_id: int
    strategy: str
    cuts: tuple[float, ...]
    lo: float
    hi: float

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cuts)
        object.__setattr__(self, "cuts", cuts)
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.lo > self.hi:
            raise ValueError("lo must not exceed hi")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError("cuts must be strictly increasing")
        if cuts and not (self.lo < cuts[0] and cuts[-1] < self.hi):
            raise ValueError("cuts must lie strictly inside (lo, hi)")

    @property
    def granularity(self) -> int:
        return len(self.cuts) + 1

    @property
    def boundaries(self) -> np.ndarray:
        return np.array((self.lo, *self.cuts, self.hi))

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "field_id": self.field_id,
            "strategy": self.strategy,
            "lo": self.lo,
            "hi": self.hi,
            "cuts": list(self.cuts),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BinSpec":
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported BinSpec version {data.get('version')!r}")
        return cls(data["field_id"], data["strategy"], tuple(data["cuts"]), data["lo"], data["hi"])


def dumps(specs: list[BinSpec]) -> str:
    """One JSON object per line; floats round-trip exactly."""
    return "\n".join(json.dumps(s.to_dict()) for s in specs) + "\n"


def loads(text: str) -> list[BinSpec]:
    return [BinSpec.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


def _finite(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).ravel()
    arr = arr[~np.isnan(arr)]
    if arr.size == 0:
        raise ValueError("cannot fit bins on an empty (or all-missing) field")
    return arr


def _build(field_id, strategy, cuts, lo, hi) -> BinSpec:
    cuts = np.unique(np.asarray(cuts, dtype=np.float64))
    cuts = cuts[(cuts > lo) & (cuts < hi)]
    return BinSpec(field_id, strategy, tuple(cuts.tolist()), lo, hi)


def fit_equal_frequency(values, k: int, field_id: int = 0) -> BinSpec:
    if k < 1:
        raise ValueError("k must be >= 1")
    arr = _finite(values)
    lo, hi = float(arr.min()), float(arr.max())
    cuts = np.quantile(arr, np.arange(1, k) / k, method="linear") if k > 1 else []
    return _build(field_id, "equal_frequency", cuts, lo, hi)


def fit_equal_width(values, k: int, field_id: int = 0) -> BinSpec:
    if k < 1:
        raise ValueError("k must be >= 1")
    arr = _finite(values)
    lo, hi = float(arr.min()), float(arr.max())
    cuts = [lo + i * (hi - lo) / k for i in range(1, k)]
    return _build(field_id, "equal_width", cuts, lo, hi)


def fit(values, k: int, strategy: str = "equal_frequency", field_id: int = 0) -> BinSpec:
    if strategy == "equal_frequency":
        return fit_equal_frequency(values, k, field_id)
    if strategy == "equal_width":
        return fit_equal_width(values, k, field_id)
    raise ValueError(f"unknown strategy {strategy!r}")


def locate(spec: BinSpec, v: float) -> int:
    """Bin index of ``v``; NaN returns ``MISSING`` for the encoder to handle."""
    if np.isnan(v):
        return MISSING
    return int(np.searchsorted(spec.cuts, v, side="right"))


def locate_many(spec: BinSpec, values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    out = np.searchsorted(np.asarray(spec.cuts), values, side="right").astype(np.int64)
    out[np.isnan(values)] = MISSING
    return out
