"""Self-contained error function, accurate to ~1e-12 absolute.

Two Abramowitz & Stegun style branches:

* |z| < 4: the confluent (all-positive-term) power series
      erf(z) = (2/sqrt(pi)) * z * exp(-z^2) * sum_n (2 z^2)^n / (2n+1)!!
  which avoids the catastrophic cancellation of the alternating Taylor
  series at moderate z.
* |z| >= 4: the asymptotic expansion of the complement
      erfc(z) ~ exp(-z^2) / (z sqrt(pi)) * sum_n (-1)^n (2n-1)!! / (2 z^2)^n
  truncated at its smallest term.  At z = 4 the optimal truncation error is
  ~1e-15 absolute, well below the target.
"""

from __future__ import annotations

import math

import numpy as np

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
_SERIES_CUTOFF = 4.0


def _erf_series(z: float) -> float:
    # confluent series; all terms positive, converges for any z but is used
    # below the asymptotic cutoff only
    t = 2.0 * z * z
    term = 1.0
    total = 1.0
    denom = 1.0
    for n in range(1, 400):
        denom = 2 * n + 1
        term *= t / denom
        total += term
        if term < total * 1e-18:
            break
    return _TWO_OVER_SQRT_PI * z * math.exp(-z * z) * total


def _erfc_asymptotic(z: float) -> float:
    # alternating asymptotic series, stopped before the terms start growing
    inv = 1.0 / (2.0 * z * z)
    term = 1.0
    total = 1.0
    for n in range(1, 60):
        ratio = (2 * n - 1) * inv
        if ratio >= 1.0:
            break
        term *= -ratio
        total += term
        if abs(term) < 1e-18:
            break
    return math.exp(-z * z) / (z * math.sqrt(math.pi)) * total


def _erf_scalar(x: float) -> float:
    if math.isnan(x):
        return math.nan
    if x == 0.0:
        return 0.0
    z = abs(x)
    if z < _SERIES_CUTOFF:
        val = _erf_series(z)
    elif z < 27.0:
        val = 1.0 - _erfc_asymptotic(z)
    else:
        val = 1.0  # erfc underflows below 1e-300
    return math.copysign(val, x)


def erf(x):
    """Error function of a float or array, elementwise."""
    if np.isscalar(x) or np.ndim(x) == 0:
        return _erf_scalar(float(x))
    arr = np.asarray(x, dtype=float)
    out = np.empty_like(arr)
    flat_in = arr.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        flat_out[i] = _erf_scalar(flat_in[i])
    return out


def erfc(x):
    """Complementary error function, 1 - erf(x)."""
    if np.isscalar(x) or np.ndim(x) == 0:
        return 1.0 - _erf_scalar(float(x))
    return 1.0 - erf(x)
