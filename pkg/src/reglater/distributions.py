"""Feature laws the sieve basis can be built on.

Three laws are supported: uniform, normal truncated to a compact interval,
and the empirical law of a pilot sample.  The first two are *analytic*: bin
masses and partial central moments come from closed forms, so the basis
normalization constants carry no quadrature error.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import ConfigurationError

_SQRT2PI = np.sqrt(2.0 * np.pi)


def _phi(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT2PI


def _gaussian_power_integrals(alpha: float, beta: float, jmax: int) -> list[float]:
    """I_j = int_alpha^beta z^j phi(z) dz for j = 0..jmax (stable recursion)."""
    pa, pb = float(_phi(alpha)), float(_phi(beta))
    out = [float(ndtr(beta) - ndtr(alpha))]
    if jmax >= 1:
        out.append(pa - pb)
    for j in range(2, jmax + 1):
        out.append((j - 1) * out[j - 2] + alpha ** (j - 1) * pa - beta ** (j - 1) * pb)
    return out


@dataclass(frozen=True)
class Uniform:
    """Uniform law on [a, b]."""

    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b) and self.a < self.b):
            raise ConfigurationError("uniform law requires finite a < b")

    @property
    def support(self) -> tuple[float, float]:
        return (self.a, self.b)

    @property
    def analytic(self) -> bool:
        return True

    def quantile(self, p: float) -> float:
        return self.a + (self.b - self.a) * p

    def density(self, u):
        u = np.asarray(u, dtype=np.float64)
        inside = (u >= self.a) & (u <= self.b)
        return np.where(inside, 1.0 / (self.b - self.a), 0.0)

    def partial_central_moments(self, lo: float, hi: float, center: float, jmax: int) -> list[float]:
        """E[1_{[lo,hi)}(U) (U - center)^j] for j = 0..jmax."""
        lo = max(lo, self.a)
        hi = min(hi, self.b)
        if hi <= lo:
            return [0.0] * (jmax + 1)
        scale = self.b - self.a
        return [
            ((hi - center) ** (j + 1) - (lo - center) ** (j + 1)) / ((j + 1) * scale)
            for j in range(jmax + 1)
        ]


@dataclass(frozen=True)
class TruncatedNormal:
    """N(mean, var) conditioned on [lower, upper] (the truncated law itself)."""

    mean: float
    var: float
    lower: float
    upper: float

    def __post_init__(self):
        if not (self.var > 0 and np.isfinite(self.var)):
            raise ConfigurationError("truncated normal requires var > 0")
        if not (np.isfinite(self.lower) and np.isfinite(self.upper) and self.lower < self.upper):
            raise ConfigurationError("truncated normal requires finite lower < upper")
        mass = self._f2 - self._f1
        if mass <= 0:
            raise ConfigurationError("truncation interval carries no probability mass")

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.var))

    @property
    def _f1(self) -> float:
        return float(ndtr((self.lower - self.mean) / self.sigma))

    @property
    def _f2(self) -> float:
        return float(ndtr((self.upper - self.mean) / self.sigma))

    @property
    def truncation_mass(self) -> float:
        """Mass of [lower, upper] under the untruncated normal."""
        return self._f2 - self._f1

    @property
    def support(self) -> tuple[float, float]:
        return (self.lower, self.upper)

    @property
    def analytic(self) -> bool:
        return True

    def quantile(self, p: float) -> float:
        level = self._f1 + p * (self._f2 - self._f1)
        return self.mean + self.sigma * float(ndtri(level))

    def density(self, u):
        u = np.asarray(u, dtype=np.float64)
        inside = (u >= self.lower) & (u <= self.upper)
        vals = _phi((u - self.mean) / self.sigma) / (self.sigma * self.truncation_mass)
        return np.where(inside, vals, 0.0)

    def partial_central_moments(self, lo: float, hi: float, center: float, jmax: int) -> list[float]:
        lo = max(lo, self.lower)
        hi = min(hi, self.upper)
        if hi <= lo:
            return [0.0] * (jmax + 1)
        s = self.sigma
        alpha = (lo - self.mean) / s
        beta = (hi - self.mean) / s
        shift = self.mean - center
        ints = _gaussian_power_integrals(alpha, beta, jmax)
        out = []
        for j in range(jmax + 1):
            # (U - center)^j = (s Z + shift)^j expanded in standardized Z
            total = sum(comb(j, i) * s**i * shift ** (j - i) * ints[i] for i in range(j + 1))
            out.append(total / self.truncation_mass)
        return out


@dataclass(frozen=True)
class Empirical:
    """Empirical law of a pilot sample; moments are pilot averages."""

    sample: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.sort(np.asarray(self.sample, dtype=np.float64))
        if arr.ndim != 1 or arr.size < 2:
            raise ConfigurationError("empirical law needs a 1-d pilot of size >= 2")
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("pilot sample contains non-finite values")
        object.__setattr__(self, "sample", arr)
        self.sample.setflags(write=False)

    @property
    def support(self) -> tuple[float, float]:
        return (float(self.sample[0]), float(self.sample[-1]))

    @property
    def analytic(self) -> bool:
        return False

    def quantile(self, p: float) -> float:
        n = self.sample.size
        if p <= 0.0:
            return float(self.sample[0])
        if p >= 1.0:
            return float(self.sample[-1])
        return float(self.sample[min(int(np.ceil(p * n)) - 1, n - 1)])

    def density(self, u):
        raise ConfigurationError("empirical law has no density; use an analytic law")

    def partial_central_moments(self, lo: float, hi: float, center: float, jmax: int) -> list[float]:
        hi_edge = self.support[1]
        if hi >= hi_edge:
            mask = (self.sample >= lo) & (self.sample <= hi)  # close the top bin
        else:
            mask = (self.sample >= lo) & (self.sample < hi)
        d = self.sample[mask] - center
        n = self.sample.size
        return [float(np.sum(d**j)) / n for j in range(jmax + 1)]


DistSpec = Uniform | TruncatedNormal | Empirical
