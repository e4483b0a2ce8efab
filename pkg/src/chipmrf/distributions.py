"""Count distributions used for the background and signal components.

Four families are supported: Poisson, negative binomial (mean/dispersion
form), and their zero-inflated versions. ``pi`` is always the weight of the
count component, so ``1 - pi`` is the structural-zero mass.

All log-pmfs accept a scalar or an integer array for ``y`` and return a float
or a float array of the same shape.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import stats
from scipy.special import gammaln, xlogy


class InvalidParameterError(ValueError):
    """Raised when a distribution parameter lies outside its domain."""


def _check_positive(name: str, value: float) -> None:
    if not (np.isfinite(value) and value > 0):
        raise InvalidParameterError(f"{name} must be positive and finite, got {value!r}")


def _check_weight(value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise InvalidParameterError(f"pi must lie in [0, 1], got {value!r}")


def _check_counts(y) -> np.ndarray:
    arr = np.asarray(y)
    if np.any(arr < 0):
        raise InvalidParameterError("counts must be non-negative")
    return arr


@dataclass(frozen=True)
class PoissonParams:
    lam: float

    def __post_init__(self):
        _check_positive("lambda", self.lam)

    @property
    def mean(self) -> float:
        return self.lam


@dataclass(frozen=True)
class NbParams:
    """Negative binomial with mean ``mu`` and dispersion ``phi`` (variance mu + mu**2/phi)."""

    mu: float
    phi: float

    def __post_init__(self):
        _check_positive("mu", self.mu)
        _check_positive("phi", self.phi)

    @property
    def mean(self) -> float:
        return self.mu


@dataclass(frozen=True)
class ZeroInflation:
    pi: float

    def __post_init__(self):
        _check_weight(self.pi)


CountParams = Union[PoissonParams, NbParams]


def _squeeze(out):
    return float(out) if np.ndim(out) == 0 else out


def pois_logpmf(y, p: PoissonParams):
    y = _check_counts(y)
    out = xlogy(y, p.lam) - p.lam - gammaln(y + 1.0)
    return _squeeze(out)


def nb_logpmf(y, p: NbParams):
    y = _check_counts(y)
    mu, phi = p.mu, p.phi
    log_denom = np.log(mu + phi)
    out = (
        gammaln(y + phi)
        - gammaln(phi)
        - gammaln(y + 1.0)
        + xlogy(y, mu)
        - y * log_denom
        + phi * (np.log(phi) - log_denom)
    )
    return _squeeze(out)


def count_logpmf(y, p: CountParams):
    """Log-pmf of the non-inflated count kernel (Poisson or NB)."""
    if isinstance(p, PoissonParams):
        return pois_logpmf(y, p)
    if isinstance(p, NbParams):
        return nb_logpmf(y, p)
    raise TypeError(f"unsupported count parameters {type(p).__name__}")


def _zi_logpmf(y, z: ZeroInflation, p: CountParams):
    y = _check_counts(y)
    kernel = np.asarray(count_logpmf(y, p), dtype=float)
    with np.errstate(divide="ignore"):
        log_pi = np.log(z.pi)
        log_struct = np.log1p(-z.pi)
    out = np.where(y == 0, np.logaddexp(log_struct, log_pi + kernel), log_pi + kernel)
    return _squeeze(out)


def zip_logpmf(y, z: ZeroInflation, p: PoissonParams):
    if not isinstance(p, PoissonParams):
        raise TypeError("zip_logpmf expects PoissonParams")
    return _zi_logpmf(y, z, p)


def zinb_logpmf(y, z: ZeroInflation, p: NbParams):
    if not isinstance(p, NbParams):
        raise TypeError("zinb_logpmf expects NbParams")
    return _zi_logpmf(y, z, p)


@dataclass(frozen=True)
class CountDist:
    """A (possibly zero-inflated) count distribution.

    ``zero`` is ``None`` for a plain Poisson/NB distribution.
    """

    kernel: CountParams
    zero: ZeroInflation | None = None

    @property
    def pi(self) -> float:
        return 1.0 if self.zero is None else self.zero.pi

    @property
    def mean(self) -> float:
        return self.pi * self.kernel.mean

    def logpmf(self, y):
        if self.zero is None:
            return count_logpmf(y, self.kernel)
        return _zi_logpmf(y, self.zero, self.kernel)

    def table(self, ymax: int) -> np.ndarray:
        """Log-pmf evaluated at 0..ymax, used for lookup in hot loops."""
        return np.asarray(self.logpmf(np.arange(ymax + 1)), dtype=float)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return sample(self, count, rng)


def poisson(lam: float) -> CountDist:
    return CountDist(PoissonParams(lam))


def negbin(mu: float, phi: float) -> CountDist:
    return CountDist(NbParams(mu, phi))


def zip_dist(pi: float, lam: float) -> CountDist:
    return CountDist(PoissonParams(lam), ZeroInflation(pi))


def zinb_dist(pi: float, mu: float, phi: float) -> CountDist:
    return CountDist(NbParams(mu, phi), ZeroInflation(pi))


def sample(dist: CountDist, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` i.i.d. values.

    Zero inflation is a Bernoulli(pi) gate; NB draws go through the
    Gamma-Poisson mixture.
    """
    if count < 0:
        raise InvalidParameterError("count must be non-negative")
    k = dist.kernel
    if isinstance(k, PoissonParams):
        rates = np.full(count, k.lam)
    else:
        rates = rng.gamma(shape=k.phi, scale=k.mu / k.phi, size=count)
    draws = rng.poisson(rates).astype(np.int64)
    if dist.zero is not None:
        gate = rng.random(count) < dist.zero.pi
        draws = np.where(gate, draws, 0)
    return draws


def tail_bound_ymax(dist: CountDist, eps: float = 1e-10) -> int:
    """Smallest count ``y`` with P(Y > y) < ``eps``."""
    k = dist.kernel
    if isinstance(k, PoissonParams):
        frozen = stats.poisson(k.lam)
    else:
        frozen = stats.nbinom(k.phi, k.phi / (k.mu + k.phi))
    y = int(frozen.isf(eps))
    while frozen.sf(y) >= eps:
        y += 1
    return y
