"""Standard normal cdf/pdf, usable on scalars and arrays."""

import math

import numpy as np
from scipy import special as _sp

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def normal_cdf(t):
    """Standard normal c.d.f. via the complementary error function.

    ``0.5 * erfc(-t / sqrt(2))`` keeps full relative precision in the lower
    tail, so the absolute error stays at double-precision roundoff.
    """
    if np.ndim(t) == 0:
        return 0.5 * math.erfc(-float(t) / _SQRT2)
    return 0.5 * _sp.erfc(-np.asarray(t, dtype=float) / _SQRT2)


def normal_pdf(t):
    if np.ndim(t) == 0:
        t = float(t)
        return _INV_SQRT_2PI * math.exp(-0.5 * t * t)
    t = np.asarray(t, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * t * t)
