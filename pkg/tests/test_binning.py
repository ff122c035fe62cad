import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featdisc import binning
from featdisc.binning import BinSpec, fit_equal_frequency, fit_equal_width, locate


def quantile_oracle(values, q):
    """Sort-and-index linear interpolation between order statistics."""
    xs = sorted(values)
    h = (len(xs) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


def test_equal_frequency_one_to_ten():
    spec = fit_equal_frequency(list(range(1, 11)), 5)
    assert spec.cuts == pytest.approx((2.8, 4.6, 6.4, 8.2), abs=1e-12)
    assert spec.granularity == 5


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=200, unique=True),
       st.integers(1, 20))
def test_equal_frequency_matches_oracle(values, k):
    spec = fit_equal_frequency(values, k)
    expected = sorted({quantile_oracle(values, i / k) for i in range(1, k)})
    expected = [c for c in expected if min(values) < c < max(values)]
    np.testing.assert_allclose(spec.cuts, expected, rtol=1e-12, atol=1e-9)


def test_constant_field():
    spec = fit_equal_frequency([7.0] * 20, 10)
    assert spec.granularity == 1 and spec.degenerate


def test_k_one():
    spec = fit_equal_frequency(list(range(1, 11)), 1)
    assert spec.cuts == () and (spec.lo, spec.hi) == (1, 10)


def test_heavy_ties_merge():
    values = [0.0] * 80 + list(np.linspace(1, 2, 20))
    spec = fit_equal_frequency(values, 10)
    assert spec.granularity < 10
    assert all(b > a for a, b in zip(spec.cuts, spec.cuts[1:]))


def test_equal_width():
    assert fit_equal_width([0, 3, 10], 5).cuts == (2.0, 4.0, 6.0, 8.0)
    assert fit_equal_width([-1, 1], 2).cuts == (0.0,)
    assert fit_equal_width([3, 3, 3], 4).granularity == 1


def test_locate_conventions():
    spec = BinSpec(0, "equal_width", (2.0, 4.0), 0.0, 6.0)
    assert locate(spec, 3) == 1
    assert locate(spec, -5) == 0
    assert locate(spec, 4) == 2
    assert locate(spec, 6) == 2
    assert locate(spec, math.inf) == 2
    assert locate(spec, -math.inf) == 0
    assert locate(spec, math.nan) == binning.MISSING


@settings(max_examples=50)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=100), st.integers(1, 12),
       st.floats(-1e3, 1e3))
def test_locate_consistent(values, k, v):
    spec = fit_equal_frequency(values, k)
    i = locate(spec, v)
    bnd = spec.boundaries
    assert 0 <= i < spec.granularity
    if spec.lo <= v <= spec.hi:
        assert bnd[i] <= v
        assert v < bnd[i + 1] or (i == spec.granularity - 1 and v <= bnd[i + 1])


@pytest.mark.parametrize("n,k", [(100, 10), (103, 10), (50, 7)])
def test_equal_frequency_occupancy(n, k):
    values = np.random.default_rng(n).permutation(n).astype(float)
    spec = fit_equal_frequency(values, k)
    counts = np.bincount(binning.locate_many(spec, values), minlength=spec.granularity)
    bound = 1 if n % k == 0 else math.ceil(n / k)
    assert counts.max() - counts.min() <= bound


def test_serialization_roundtrip():
    specs = [fit_equal_frequency(np.random.default_rng(1).normal(size=100), 7, field_id=3),
             fit_equal_width([0.1, 0.7, 1 / 3], 3, field_id=4)]
    again = binning.loads(binning.dumps(specs))
    assert again == specs


def test_bad_version():
    with pytest.raises(ValueError):
        BinSpec.from_dict({"version": 99})


def test_refit_deterministic():
    v = np.random.default_rng(2).normal(size=500)
    assert fit_equal_frequency(v, 10) == fit_equal_frequency(v, 10)
