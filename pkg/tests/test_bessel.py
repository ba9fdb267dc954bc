import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import ive

from geosink.bessel import scaled_bessel_i
from geosink.errors import ValidationError


@given(st.floats(1e-10, 2000.0), st.integers(0, 80))
def test_matches_scipy(x, kmax):
    got = scaled_bessel_i(x, kmax)
    ref = ive(np.arange(kmax + 1), x)
    mask = ref > 1e-290
    np.testing.assert_allclose(got[mask], ref[mask], rtol=1e-12)
    assert np.all(got[~mask] < 1e-280)


@pytest.mark.parametrize("x", [1e-12, 0.5, 1.0, 7.3, 40.0, 500.0])
def test_generating_identity(x):
    # exp(-x) (I_0 + 2 sum I_k) = 1; kmax large enough that the tail is negligible
    v = scaled_bessel_i(x, int(x + 60 + 10 * np.sqrt(x)))
    assert v[0] + 2 * v[1:].sum() == pytest.approx(1.0, rel=1e-13)


def test_zero_argument():
    np.testing.assert_array_equal(scaled_bessel_i(0.0, 3), [1.0, 0.0, 0.0, 0.0])


def test_small_argument_series():
    # I_k(x) ~ (x/2)^k / k! for tiny x
    x = 1e-3
    v = scaled_bessel_i(x, 4)
    for k in range(5):
        series = np.exp(-x) * sum((x / 2) ** (2 * m + k) / (math.factorial(m) * math.factorial(m + k))
                                  for m in range(6))
        assert v[k] == pytest.approx(series, rel=1e-14)


def test_rejects_negative():
    with pytest.raises(ValidationError):
        scaled_bessel_i(-1.0, 3)
    with pytest.raises(ValidationError):
        scaled_bessel_i(1.0, -1)
