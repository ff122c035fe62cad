"""Multi-granularity discretization: expand every field at several
granularities, score each candidate with a one-field LR probe on the
validation set, and keep the best half globally (across all fields).
"""

from __future__ import annotations

from dataclasses import dataclass

from featdisc import binning, encoding, models
from featdisc.datasets import NumericDataset
from featdisc.errors import ConfigurationError, DegenerateAUCError

DEFAULT_GRANULARITIES = (10, 100, 1000, 10000)

# Fixed probe budget: a few AdaGrad epochs, no early stopping.
PROBE_CONFIG = models.TrainConfig(optimizer="adagrad", learning_rate=0.1, epochs=3, batch_size=256, patience=0)


@dataclass(frozen=True)
class Candidate:
    field: int
    granularity: int
    bins: binning.BinSpec
    valid_auc: float


@dataclass(frozen=True)
class MgdSelection:
    candidates: tuple[Candidate, ...]  # ranked best first
    survivors: tuple[Candidate, ...]
    encoder: encoding.EncoderSpec

    def parameters_before(self, embedding_dim: int = 1) -> int:
        return sum(c.bins.granularity for c in self.candidates) * embedding_dim

    def parameters_after(self, embedding_dim: int = 1) -> int:
        return encoding.count_parameters(self.encoder, embedding_dim)


def _probe(train: NumericDataset, valid: NumericDataset, field: int, bins, cfg) -> float:
    spec = encoding.EncoderSpec("CD", (encoding.Slot(field, bins, 0),), train.field_count)
    tr, va = encoding.encode(spec, train), encoding.encode(spec, valid)
    model = models.train_lr(tr, va, cfg)
    try:
        return models.auc(model.logits(va.indices, va.weights), va.labels)
    except DegenerateAUCError:
        return 0.5


def mgd_select(
    train: NumericDataset,
    valid: NumericDataset,
    granularities=DEFAULT_GRANULARITIES,
    strategy: str = "equal_frequency",
    probe: models.TrainConfig = PROBE_CONFIG,
    missing: str = "auto",
) -> MgdSelection:
    """Rank every (field, granularity) by validation AUC and keep the top half.

    Ties are broken by smaller granularity, then lower field id.  Every probe
    uses the same seed, so identical fields score identically.
    """
    if len(valid) == 0:
        raise ConfigurationError("MGD selection needs a non-empty validation set")
    if not 0 < valid.prevalence < 1:
        raise ConfigurationError("MGD selection needs both classes in the validation set")
    cands = []
    for f in range(train.field_count):
        col = train.features[:, f]
        for g in sorted(set(granularities)):
            bins = binning.fit(col, g, strategy, field_id=f)
            cands.append(Candidate(f, g, bins, _probe(train, valid, f, bins, probe)))
    ranked = tuple(sorted(cands, key=lambda c: (-c.valid_auc, c.granularity, c.field)))
    keep = ranked[: max(1, len(ranked) // 2)]
    spec = encoding.combine_cd(train.features, [(c.field, c.bins) for c in keep], missing=missing)
    return MgdSelection(ranked, keep, spec)
