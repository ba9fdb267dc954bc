"""Exponentially scaled modified Bessel functions of the first kind."""

from __future__ import annotations

import math

import numpy as np

from .errors import ValidationError

_BIG = 1e250


def scaled_bessel_i(x: float, kmax: int) -> np.ndarray:
    """``exp(-x) * I_k(x)`` for ``k = 0..kmax`` and ``x >= 0``.

    Miller's backward recurrence ``I_{k-1} = (2k/x) I_k + I_{k+1}`` started
    well above both ``kmax`` and ``x``, normalised with
    ``exp(x) = I_0 + 2 * sum_k I_k``.
    """
    if x < 0:
        raise ValidationError("x must be >= 0")
    if kmax < 0:
        raise ValidationError("kmax must be >= 0")
    out = np.zeros(kmax + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    m = max(kmax, int(math.ceil(x)))
    start = m + 40 + int(math.ceil(math.sqrt(40.0 * m)))
    vals = np.zeros(start + 2)
    vals[start] = 1e-30
    total = 0.0
    for k in range(start, 0, -1):
        vals[k - 1] = (2.0 * k / x) * vals[k] + vals[k + 1]
        total += vals[k]
        if vals[k - 1] > _BIG:
            vals[k - 1 :] /= _BIG
            total /= _BIG
    norm = vals[0] + 2.0 * total
    out[:] = vals[: kmax + 1] / norm
    return out
