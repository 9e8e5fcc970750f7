"""Arithmetic-exact noise mechanisms.

All calibrated noise is sampled over a granularity grid (integer multiples of
a power of two) using only integer/rational arithmetic and exact
Bernoulli(exp(-x)) coin flips.  No binary floating-point operation influences
the output distribution, which closes the precision-based attack surface:
inputs are rounded half-to-even onto the grid before noise is added, so the
released value carries no input-dependent float structure.

The discrete Gaussian is drawn by exact rejection from a discrete Laplace
proposal; the discrete Laplace itself comes from exact geometric sampling.
Hot paths work on plain ints (no Fraction) because the calibration suite
draws millions of samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import testing
from .errors import InvalidArgument

# Grid resolution: discretization error stays below 2^-30 of the noise scale.
_GRAN_SHIFT = 30
_GRAN_FLOOR_EXP = -1040


def _floor_log2(x: Fraction) -> int:
    p, q = x.numerator, x.denominator
    if p <= 0:
        raise InvalidArgument("argument must be positive")
    e = p.bit_length() - q.bit_length()
    if e >= 0:
        if p < q << e:
            e -= 1
    else:
        if p << (-e) < q:
            e -= 1
    return e


def granularity_exponent(scale: Fraction) -> int:
    """Exponent e of the grid step 2^e for a mechanism of the given scale."""
    return max(_floor_log2(scale) - _GRAN_SHIFT, _GRAN_FLOOR_EXP)


def _pow2(e: int) -> Fraction:
    return Fraction(1 << e) if e >= 0 else Fraction(1, 1 << -e)


@dataclass(frozen=True)
class NoiseScale:
    """Gaussian scale sigma (exact rational) with its granularity grid."""

    sigma: Fraction
    granularity: Fraction

    def __post_init__(self):
        if self.sigma <= 0:
            raise InvalidArgument("sigma must be positive")
        g = self.granularity
        if g <= 0 or not (
            (g.numerator == 1 and _is_pow2(g.denominator))
            or (g.denominator == 1 and _is_pow2(g.numerator))
        ):
            raise InvalidArgument("granularity must be a positive power of two")

    @classmethod
    def from_sigma(cls, sigma) -> "NoiseScale":
        sig = Fraction(sigma)
        if sig <= 0:
            raise InvalidArgument("sigma must be positive")
        return cls(sigma=sig, granularity=_pow2(granularity_exponent(sig)))


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


# ---------------------------------------------------------------------------
# Exact integer samplers.  `grb` is a bound rng.getrandbits.
# ---------------------------------------------------------------------------


def _randbelow(n: int, grb) -> int:
    k = n.bit_length()
    r = grb(k)
    while r >= n:
        r = grb(k)
    return r


def _bern_exp_one(grb) -> int:
    # Bernoulli(exp(-1)); the k=1 flip (probability 1) is skipped.
    k = 2
    while _randbelow(k, grb) == 0:
        k += 1
    return k & 1


def _bern_exp_frac(num: int, den: int, grb) -> int:
    # Bernoulli(exp(-num/den)) for 0 <= num <= den.
    if num == 0:
        return 1
    k = 1
    while True:
        if _randbelow(den * k, grb) >= num:
            return k & 1
        k += 1


def _bern_exp(num: int, den: int, grb) -> int:
    # Bernoulli(exp(-num/den)) for any num/den >= 0.
    while num > den:
        if not _bern_exp_one(grb):
            return 0
        num -= den
    return _bern_exp_frac(num, den, grb)


def _geometric_exp(num: int, den: int, grb) -> int:
    # Geometric with success rate 1 - exp(-num/den), i.e. P(k) ~ exp(-k num/den).
    while True:
        u = _randbelow(den, grb)
        if u == 0 or _bern_exp_frac(u, den, grb):
            break
    v = 0
    while _bern_exp_one(grb):
        v += 1
    return (v * den + u) // num


def _dlaplace(tn: int, td: int, grb) -> int:
    # Discrete Laplace with scale t = tn/td: P(x) ~ exp(-|x| td / tn).
    while True:
        sign = grb(1)
        magnitude = _geometric_exp(td, tn, grb)
        if sign and magnitude == 0:
            continue
        return -magnitude if sign else magnitude


def _dgauss(sn: int, sd: int, grb) -> int:
    # Discrete Gaussian with scale sigma = sn/sd: P(x) ~ exp(-x^2 sd^2 / (2 sn^2)).
    t = sn // sd + 1
    a = sn * sn
    b = sd * sd
    bt = b * t
    bias_den = 2 * a * bt * t
    while True:
        y = _dlaplace(t, 1, grb)
        num = (y if y >= 0 else -y) * bt - a
        if _bern_exp(num * num, bias_den, grb):
            return y


def sample_discrete_gaussian(scale, rng) -> int:
    """One exact draw from the discrete Gaussian with the given scale.

    `scale` must be expressible exactly as a ratio of integers; the draw is a
    pure function of (scale, rng state).
    """
    sig = Fraction(scale)
    if sig <= 0:
        raise InvalidArgument("scale must be positive")
    if testing.noise_is_disabled():
        return 0
    return _dgauss(sig.numerator, sig.denominator, rng.getrandbits)


def sample_discrete_laplace(scale, rng) -> int:
    """One exact draw from the discrete Laplace with the given scale."""
    t = Fraction(scale)
    if t <= 0:
        raise InvalidArgument("scale must be positive")
    if testing.noise_is_disabled():
        return 0
    return _dlaplace(t.numerator, t.denominator, rng.getrandbits)


# ---------------------------------------------------------------------------
# Grid rounding and the vector mechanisms.
# ---------------------------------------------------------------------------


def _grid_round(value: float, e: int) -> int:
    # round-half-even of value / 2^e, computed exactly
    fr = Fraction(value) * _pow2(-e)
    q, r = divmod(fr.numerator, fr.denominator)
    r2 = 2 * r
    if r2 > fr.denominator or (r2 == fr.denominator and q & 1):
        q += 1
    return q


def _grid_value(k: int, e: int) -> float:
    return math.ldexp(k, e) if abs(k) < (1 << 63) else float(Fraction(k) * _pow2(e))


def gaussian_mechanism(
    values: Sequence[float], sensitivity: float, sigma: NoiseScale, rng
) -> np.ndarray:
    """Gaussian mechanism on the granularity grid.

    Each coordinate is rounded half-to-even onto the grid, then shifted by
    granularity times an exact discrete-Gaussian draw of scale
    sigma/granularity.  The caller accounts sensitivity^2/(2 sigma^2) zCDP.
    """
    if sensitivity <= 0:
        raise InvalidArgument("sensitivity must be positive")
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("values must all be finite")
    e = _exponent_of(sigma.granularity)
    ratio = sigma.sigma / sigma.granularity
    sn, sd = ratio.numerator, ratio.denominator
    grb = rng.getrandbits
    disabled = testing.noise_is_disabled()
    out = np.empty(arr.shape, dtype=float)
    flat = arr.ravel()
    out_flat = out.ravel()
    for i in range(flat.size):
        k = _grid_round(float(flat[i]), e)
        if not disabled:
            k += _dgauss(sn, sd, grb)
        out_flat[i] = _grid_value(k, e)
    return out


def laplace_mechanism(value: float, sensitivity: float, epsilon: float, rng) -> float:
    """Discrete-Laplace mechanism on the granularity grid for pure epsilon-DP."""
    if epsilon <= 0:
        raise InvalidArgument("epsilon must be positive")
    if sensitivity <= 0:
        raise InvalidArgument("sensitivity must be positive")
    if not math.isfinite(value):
        raise InvalidArgument("value must be finite")
    b = Fraction(sensitivity) / Fraction(epsilon)
    e = granularity_exponent(b)
    t = b * _pow2(-e)
    k = _grid_round(value, e)
    if not testing.noise_is_disabled():
        k += _dlaplace(t.numerator, t.denominator, rng.getrandbits)
    return _grid_value(k, e)


def _exponent_of(g: Fraction) -> int:
    if g.denominator == 1:
        return g.numerator.bit_length() - 1
    return -(g.denominator.bit_length() - 1)


def exponential_mechanism(
    scores: Sequence[float], epsilon: float, sensitivity: float, rng
) -> int:
    """Pick index i with probability proportional to exp(eps * s_i / (2 sens)).

    Costs epsilon^2/8 zCDP when routed through the ledger.  With the noise
    hook disabled this is the argmax (lowest index on ties).
    """
    s = np.asarray(scores, dtype=float)
    if s.size == 0:
        raise InvalidArgument("scores must be non-empty")
    if not np.all(np.isfinite(s)):
        raise InvalidArgument("scores must all be finite")
    if epsilon <= 0 or sensitivity <= 0:
        raise InvalidArgument("epsilon and sensitivity must be positive")
    if testing.noise_is_disabled():
        return int(np.argmax(s))
    logits = (epsilon / (2.0 * sensitivity)) * s
    logits -= logits.max()
    weights = np.exp(logits)
    cdf = np.cumsum(weights)
    u = rng.random() * cdf[-1]
    return int(np.searchsorted(cdf, u, side="right").clip(0, s.size - 1))
