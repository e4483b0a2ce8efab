"""Parameter containers, prior and sampler settings for the joint MRF model."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from enum import Enum

import numpy as np

from ..chain import ChainParams
from ..distributions import CountDist, InvalidParameterError, NbParams, PoissonParams, ZeroInflation


class SamplerError(RuntimeError):
    """The sampler hit a non-finite likelihood or an impossible state."""


class Family(str, Enum):
    """Emission family: background / signal kernels."""

    ZIP = "zip"  # zero-inflated Poisson background, Poisson signal
    ZINB = "zinb"  # zero-inflated NB background, NB signal
    NB = "nb"  # NB / NB without zero inflation (mixture baseline only)

    @property
    def is_nb(self) -> bool:
        return self is not Family.ZIP

    @property
    def zero_inflated(self) -> bool:
        return self is not Family.NB


@dataclass
class ReplicateParams:
    """Background and signal parameters of one replicate column.

    ``bg_phi``/``sig_phi`` are ``None`` for the Poisson family.
    """

    pi: float
    bg_mean: float
    sig_mean: float
    bg_phi: float | None = None
    sig_phi: float | None = None

    def __post_init__(self):
        ZeroInflation(self.pi)
        if (self.bg_phi is None) != (self.sig_phi is None):
            raise InvalidParameterError("background and signal must both be NB or both Poisson")
        if not self.sig_mean > self.bg_mean:
            raise InvalidParameterError(
                f"signal mean {self.sig_mean} must exceed background mean {self.bg_mean}"
            )
        self.background
        self.signal

    @property
    def is_nb(self) -> bool:
        return self.bg_phi is not None

    def _kernel(self, mean, phi):
        return PoissonParams(mean) if phi is None else NbParams(mean, phi)

    @property
    def background(self) -> CountDist:
        """Background with the inner zero indicator integrated out."""
        return CountDist(self._kernel(self.bg_mean, self.bg_phi), ZeroInflation(self.pi))

    @property
    def background_kernel(self) -> CountDist:
        return CountDist(self._kernel(self.bg_mean, self.bg_phi))

    @property
    def signal(self) -> CountDist:
        return CountDist(self._kernel(self.sig_mean, self.sig_phi))

    def values(self) -> dict[str, float]:
        out = {"pi": self.pi, "bg_mean": self.bg_mean}
        if self.is_nb:
            out["bg_phi"] = self.bg_phi
        out["sig_mean"] = self.sig_mean
        if self.is_nb:
            out["sig_phi"] = self.sig_phi
        return out

    @classmethod
    def zip(cls, pi, lam0, lam1) -> "ReplicateParams":
        return cls(pi, lam0, lam1)

    @classmethod
    def zinb(cls, pi, mu0, phi0, mu1, phi1) -> "ReplicateParams":
        return cls(pi, mu0, mu1, phi0, phi1)


@dataclass
class EmissionParams:
    """Per condition, per replicate emission parameters."""

    family: Family
    replicates: list[list[ReplicateParams]]

    def __post_init__(self):
        self.family = Family(self.family)
        for cond in self.replicates:
            for rep in cond:
                if rep.is_nb != self.family.is_nb:
                    raise InvalidParameterError("replicate parameter kind does not match family")


@dataclass
class ConstrainedChainParams:
    """Shared ``s = (1 - q1c) / q0c`` plus each condition's ``q0c``."""

    s: float
    q0: list[float]

    def __post_init__(self):
        if not (np.isfinite(self.s) and self.s > 0):
            raise InvalidParameterError("s must be positive")
        for q in self.q0:
            if not (0.0 < q < 1.0):
                raise InvalidParameterError("q0 must lie in (0, 1)")
            if not self.s * q < 1.0:
                raise InvalidParameterError("s * q0 must be < 1")

    def chain(self, c: int) -> ChainParams:
        return ChainParams(self.q0[c], 1.0 - self.s * self.q0[c])

    @property
    def stationary(self) -> float:
        return 1.0 / (1.0 + self.s)


@dataclass
class PriorConfig:
    """Hyperparameters and Metropolis step settings.

    Beta(a, b) priors on pi, q0, q1; Gamma(shape, rate) priors on Poisson
    rates and on the NB mean and dispersion.
    """

    pi_a: float = 1.0
    pi_b: float = 1.0
    q0_a: float = 1.0
    q0_b: float = 1.0
    q1_a: float = 1.0
    q1_b: float = 1.0
    rate_shape: float = 0.01
    rate_rate: float = 0.01
    mu_shape: float = 0.01
    mu_rate: float = 0.01
    phi_shape: float = 0.01
    phi_rate: float = 0.01
    step: float = 0.2
    target_low: float = 0.2
    target_high: float = 0.5

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise InvalidParameterError(f"prior setting {f.name} must be positive")
        if not self.target_low < self.target_high < 1:
            raise InvalidParameterError("acceptance targets must satisfy low < high < 1")

    @classmethod
    def from_file(cls, path) -> "PriorConfig":
        """Read ``[priors]`` key = value pairs from an INI-style file."""
        cp = configparser.ConfigParser()
        with open(path) as fh:
            cp.read_file(fh)
        if "priors" not in cp:
            raise ValueError(f"{path}: missing [priors] section")
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, val in cp["priors"].items():
            if key not in known:
                raise ValueError(f"{path}: unknown prior setting {key!r}")
            kwargs[key] = float(val)
        return cls(**kwargs)


@dataclass
class SamplerConfig:
    iterations: int = 10000
    burn_in: int = 5000
    thinning: int = 1
    seed: int = 0
    constrained: bool = False
    fix_params: bool = False
    keep_states: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")

    @property
    def n_retained(self) -> int:
        return len(range(self.burn_in, self.iterations, self.thinning))


@dataclass
class PosteriorSummary:
    """Output of a sampler run.

    ``prob_enriched[m, c]`` is the fraction of retained draws with
    ``X[m, c] = 1``. ``draws`` has one row per retained iteration and one
    column per entry of ``param_names``.
    """

    prob_enriched: np.ndarray
    conditions: list[str]
    param_names: list[str]
    draws: np.ndarray
    iterations: np.ndarray
    acceptance: dict[str, float] = field(default_factory=dict)
    final: EmissionParams | None = None
    states: np.ndarray | None = None

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.param_names.index(name)]

    def mean(self, name: str) -> float:
        return float(self.column(name).mean())

    def means(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.param_names, self.draws.mean(axis=0))}

    def quantiles(self, qs=(0.025, 0.5, 0.975)) -> dict[str, tuple[float, ...]]:
        qv = np.quantile(self.draws, qs, axis=0)
        return {n: tuple(float(x) for x in qv[:, j]) for j, n in enumerate(self.param_names)}
