import numpy as np
import pytest

from featdisc import mgd
from featdisc.datasets import NumericDataset, SplitSpec, split
from featdisc.errors import ConfigurationError


def make(n=4000, seed=0, duplicate=False):
    rng = np.random.default_rng(seed)
    informative = rng.normal(size=n)
    noise = rng.normal(size=n)
    y = (informative + 0.5 * rng.normal(size=n) > 0).astype(int)
    X = np.c_[informative, informative] if duplicate else np.c_[informative, noise]
    return split(NumericDataset(X, y), SplitSpec(seed=seed))


def test_best_half_cardinality():
    tr, va, _ = make()
    sel = mgd.mgd_select(tr, va, (5, 10, 20, 40))
    assert len(sel.candidates) == 8 and len(sel.survivors) == 4


def test_constant_signal_field_dropped():
    tr, va, _ = make()
    sel = mgd.mgd_select(tr, va, (5, 10, 20, 40))
    assert {c.field for c in sel.survivors} == {0}
    noise_aucs = [c.valid_auc for c in sel.candidates if c.field == 1]
    assert all(abs(a - 0.5) < 0.1 for a in noise_aucs)


def test_duplicate_fields_tie_broken_by_field_id():
    tr, va, _ = make(duplicate=True)
    sel = mgd.mgd_select(tr, va, (5, 10))
    ranked = sel.candidates
    for a, b in zip(ranked, ranked[1:]):
        if a.valid_auc == b.valid_auc and a.granularity == b.granularity:
            assert a.field < b.field
    assert ranked[0].valid_auc == ranked[1].valid_auc


def test_encoder_and_counts():
    tr, va, _ = make()
    sel = mgd.mgd_select(tr, va, (5, 10, 20, 40))
    assert sel.encoder.kind == "MGD"
    assert sel.parameters_after(1) == sum(c.bins.granularity for c in sel.survivors)
    assert sel.parameters_before(1) == sum(c.bins.granularity for c in sel.candidates)


def test_empty_validation_rejected():
    tr, va, _ = make()
    with pytest.raises(ConfigurationError):
        mgd.mgd_select(tr, va.take(np.flatnonzero(va.labels == 1)), (5,))


def test_deterministic():
    tr, va, _ = make()
    a = mgd.mgd_select(tr, va, (5, 10))
    b = mgd.mgd_select(tr, va, (5, 10))
    assert a.candidates == b.candidates
