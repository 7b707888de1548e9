"""Digamma by upward recurrence and the asymptotic series."""
import numpy as np

# Bernoulli-number coefficients B_2k / (2k) of the asymptotic expansion
_ASYMPTOTIC = (1 / 12, -1 / 120, 1 / 252, -1 / 240, 1 / 132, -691 / 32760, 1 / 12)
_SHIFT_TO = 10.0


def digamma(x):
    """Digamma for ``x > 0``.

    Absolute error is below 1e-12 for ``x >= 1e-3``; closer to zero the value
    grows like ``-1/x`` and the error is a few ulp relative.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("digamma is only implemented for x > 0")
    acc = np.zeros_like(x)
    x = x.copy()
    small = x < _SHIFT_TO
    while np.any(small):
        acc[small] -= 1.0 / x[small]
        x[small] += 1.0
        small = x < _SHIFT_TO
    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    for c in reversed(_ASYMPTOTIC):
        series = (series + c) * inv2
    out = np.log(x) - 0.5 / x - series + acc
    return out[()] if out.ndim == 0 else out
