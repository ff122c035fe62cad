import math

import numpy as np
import pytest

from featdisc.datasets import NumericDataset, SplitSpec, SyntheticSpec, generate_synthetic, load_csv, split
from featdisc.errors import ConfigurationError, EmptyInputError, ParseError, StructureError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_three_rows(tmp_path):
    ds = load_csv(write(tmp_path, "1,0.5,2.0\n0,1.5,3.0\n1,2.5,1.0\n"))
    assert len(ds) == 3 and ds.field_count == 2
    assert ds.labels.tolist() == [1, 0, 1]
    assert ds.features[:, 0].tolist() == [0.5, 1.5, 2.5]


def test_float_labels_accepted(tmp_path):
    ds = load_csv(write(tmp_path, "1.0,0.5\n0.0,1.5\n"))
    assert ds.labels.tolist() == [1, 0]


def test_higgs_layout_has_28_fields(tmp_path):
    rng = np.random.default_rng(0)
    rows = ["%.1f," % rng.integers(2) + ",".join(f"{x:.6e}" for x in rng.normal(size=28)) for _ in range(20)]
    ds = load_csv(write(tmp_path, "\n".join(rows) + "\n", "HIGGS.csv"))
    assert ds.field_count == 28


def test_gzip(tmp_path):
    import gzip

    p = tmp_path / "d.csv.gz"
    with gzip.open(p, "wt") as fh:
        fh.write("1,0.5\n0,1.5\n")
    assert len(load_csv(p)) == 2


def test_parse_error_names_line(tmp_path):
    with pytest.raises(ParseError) as err:
        load_csv(write(tmp_path, "1,abc\n"))
    assert err.value.line == 1


def test_parse_error_later_line(tmp_path):
    with pytest.raises(ParseError) as err:
        load_csv(write(tmp_path, "1,0.5\n0,1.0\n2,3.0\n"))
    assert err.value.line == 3


def test_inconsistent_columns(tmp_path):
    with pytest.raises(StructureError, match="line 2"):
        load_csv(write(tmp_path, "1,0.5,1\n0,1.0\n"))


def test_empty_file(tmp_path):
    with pytest.raises(EmptyInputError):
        load_csv(write(tmp_path, ""))


def _dataset(n=1000, prevalence=0.3, seed=0):
    rng = np.random.default_rng(seed)
    labels = (rng.random(n) < prevalence).astype(int)
    return NumericDataset(rng.normal(size=(n, 3)), labels)


def test_split_sizes():
    tr, va, te = split(_dataset(), SplitSpec(0.8, 0.1, 0.1, 1.0, seed=1))
    assert (len(tr), len(va), len(te)) == (800, 100, 100)


def test_split_ratio_subsamples_train_only():
    ds = _dataset()
    tr, va, te = split(ds, SplitSpec(sample_ratio=0.01, seed=1))
    assert len(tr) == math.ceil(0.01 * 800) == 8
    _, va_full, te_full = split(ds, SplitSpec(sample_ratio=1.0, seed=1))
    np.testing.assert_array_equal(va.row_ids, va_full.row_ids)
    np.testing.assert_array_equal(te.row_ids, te_full.row_ids)


def test_split_disjoint_and_covering():
    ds = _dataset()
    tr, va, te = split(ds, SplitSpec(seed=5))
    ids = np.concatenate([tr.row_ids, va.row_ids, te.row_ids])
    assert len(np.unique(ids)) == len(ds)


def test_split_nested_ratios():
    ds = _dataset(5000)
    small = split(ds, SplitSpec(sample_ratio=0.1, seed=2))[0]
    big = split(ds, SplitSpec(sample_ratio=0.5, seed=2))[0]
    assert set(small.row_ids) <= set(big.row_ids)


def test_split_deterministic():
    ds = _dataset()
    a = split(ds, SplitSpec(seed=9))
    b = split(ds, SplitSpec(seed=9))
    for x, y in zip(a, b):
        assert x.row_ids.tobytes() == y.row_ids.tobytes()
        assert x.features.tobytes() == y.features.tobytes()


@pytest.mark.parametrize("seed", range(5))
def test_split_stratified(seed):
    ds = _dataset(10_000, prevalence=0.37, seed=seed)
    for part in split(ds, SplitSpec(seed=seed)):
        assert abs(part.prevalence - ds.prevalence) < 0.02


def test_split_bad_fractions():
    with pytest.raises(ConfigurationError):
        SplitSpec(0.8, 0.1, 0.2)
    with pytest.raises(ConfigurationError):
        SplitSpec(sample_ratio=0.0)


def test_split_empty_partition():
    ds = _dataset(5)
    with pytest.raises(ConfigurationError):
        split(ds, SplitSpec(0.8, 0.1, 0.1))


@pytest.mark.parametrize("gen", ["linear", "piecewise", "smooth-nonlinear"])
def test_zero_noise_observations_equal_truth(gen):
    ds, truth = generate_synthetic(SyntheticSpec(gen, 3, 500, noise_sigma=0.0, seed=1))
    np.testing.assert_array_equal(ds.observations, truth)
    np.testing.assert_array_equal(ds.labels, truth > np.median(truth))


def test_noise_variance():
    ds, truth = generate_synthetic(SyntheticSpec("linear", 2, 100_000, noise_sigma=1.0, seed=4))
    assert 0.98 <= np.var(ds.observations - truth, ddof=1) <= 1.02


def test_synthetic_deterministic():
    a, ta = generate_synthetic(SyntheticSpec("piecewise", 3, 300, 0.5, seed=8))
    b, tb = generate_synthetic(SyntheticSpec("piecewise", 3, 300, 0.5, seed=8))
    assert a.features.tobytes() == b.features.tobytes()
    assert ta.tobytes() == tb.tobytes()
    assert a.labels.tobytes() == b.labels.tobytes()


def test_dataset_is_immutable():
    ds = _dataset(10)
    with pytest.raises(ValueError):
        ds.features[0, 0] = 1.0


def test_dataset_rejects_bad_labels():
    with pytest.raises(StructureError):
        NumericDataset(np.zeros((2, 1)), [0, 2])
