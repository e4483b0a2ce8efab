"""Single-block updates of the Metropolis-within-Gibbs sampler."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammainc, gammaincc, gammaincinv, gammainccinv, gammaln

from ..chain import ChainParams, TransitionCounts, initial_loglik
from .model import ConstrainedChainParams, PriorConfig, ReplicateParams

_TINY = 1e-12


class RandomWalk:
    """Gaussian random-walk step with acceptance-rate adaptation.

    The step is tuned every ``window`` proposals while ``adapting`` is True
    and left alone afterwards.
    """

    def __init__(self, step: float = 0.2, low: float = 0.2, high: float = 0.5, window: int = 50):
        self.step = step
        self.low, self.high = low, high
        self.window = window
        self.adapting = True
        self.tries = self.accepts = 0
        self._wtries = self._waccepts = 0

    def record(self, accepted: bool) -> None:
        self.tries += 1
        self.accepts += accepted
        if not self.adapting:
            return
        self._wtries += 1
        self._waccepts += accepted
        if self._wtries >= self.window:
            rate = self._waccepts / self._wtries
            if rate < self.low:
                self.step *= 0.7
            elif rate > self.high:
                self.step *= 1.4
            self._wtries = self._waccepts = 0

    def freeze(self) -> None:
        self.adapting = False
        self.tries = self.accepts = 0

    @property
    def rate(self) -> float:
        return self.accepts / self.tries if self.tries else float("nan")


def x_full_conditional(m: int, x, y, reps: list[ReplicateParams], q: ChainParams, segments=None) -> float:
    """P(X[m] = 1 | neighbours, data) for one condition.

    ``y`` has shape ``(M, R)``. The background term integrates the inner zero
    indicator out, i.e. uses the zero-inflated pmf directly. This is the
    plain-python reference for the compiled sweep.
    """
    x = np.asarray(x)
    y = np.asarray(y).reshape(len(x), -1)
    segments = segments or [(0, len(x))]
    start = any(m == a for a, _ in segments)
    end = any(m == b - 1 for _, b in segments)
    trans = q.transition_matrix()
    p1 = q.q0 / (q.q0 + 1.0 - q.q1)
    logw = np.zeros(2)
    for i in (0, 1):
        if start:
            logw[i] += np.log(p1 if i == 1 else 1.0 - p1)
        else:
            logw[i] += np.log(trans[x[m - 1], i])
        if not end:
            logw[i] += np.log(trans[i, x[m + 1]])
        for r, rep in enumerate(reps):
            dist = rep.signal if i == 1 else rep.background
            logw[i] += dist.logpmf(int(y[m, r]))
    return float(1.0 / (1.0 + np.exp(logw[0] - logw[1])))


def z_full_conditional(y: int, rep: ReplicateParams, x_state: int = 0) -> float:
    """P(Z = 1 | X = 0, y): probability a background bin came from the count kernel."""
    if x_state != 0:
        raise ValueError("the inner indicator is only defined where X = 0")
    if y > 0:
        return 1.0
    return zero_count_weight(rep)


def zero_count_weight(rep: ReplicateParams) -> float:
    f0 = float(np.exp(rep.background_kernel.logpmf(0)))
    num = rep.pi * f0
    return num / ((1.0 - rep.pi) + num)


def update_transition_params(
    counts: TransitionCounts, priors: PriorConfig, rng: np.random.Generator, current: ChainParams
) -> tuple[ChainParams, bool]:
    """Independence Metropolis-Hastings step for ``(q0, q1)``.

    The proposal is the Beta posterior of the pair-count factor alone, so the
    acceptance ratio only involves the stationary initial-state terms.
    """
    q1 = rng.beta(priors.q1_a + counts.n11, priors.q1_b + counts.n10)
    q0 = rng.beta(priors.q0_a + counts.n01, priors.q0_b + counts.n00)
    u = rng.random()
    if not (0.0 < q0 < 1.0 and 0.0 < q1 < 1.0):
        return current, False
    prop = ChainParams(q0, q1)
    log_ratio = initial_loglik(prop, counts.first1, counts.first0) - initial_loglik(
        current, counts.first1, counts.first0
    )
    if np.log(u) < log_ratio:
        return prop, True
    return current, False


def truncated_gamma(shape: float, rate: float, lo: float, hi: float, rng: np.random.Generator) -> float:
    """Gamma(shape, rate) draw restricted to ``(lo, hi)``."""
    x = rng.gamma(shape, 1.0 / rate)
    u = rng.random()
    if lo < x < hi:
        return max(x, _TINY)
    a, b = rate * lo, rate * hi
    plo = gammainc(shape, a)
    if plo < 0.5:
        phi = gammainc(shape, b) if np.isfinite(b) else 1.0
        x = gammaincinv(shape, plo + u * (phi - plo)) / rate
    else:
        qlo = gammaincc(shape, a)
        qhi = gammaincc(shape, b) if np.isfinite(b) else 0.0
        x = gammainccinv(shape, qlo - u * (qlo - qhi)) / rate
    return float(min(max(x, lo, _TINY), hi))


@dataclass
class ReplicateStats:
    """Sufficient statistics of one replicate given the current X and Z."""

    hist_bg: np.ndarray  # counts of y over bins with X=0, Z=1
    hist_sig: np.ndarray  # counts of y over bins with X=1
    n_struct: int  # bins with X=0, Z=0

    @classmethod
    def from_assignments(cls, y, x, z) -> "ReplicateStats":
        y = np.asarray(y, dtype=np.int64)
        x = np.asarray(x)
        z = np.asarray(z)
        ymax = int(y.max()) if len(y) else 0
        bg = (x == 0) & ((z == 1) | (y > 0))
        return cls(
            np.bincount(y[bg], minlength=ymax + 1),
            np.bincount(y[x == 1], minlength=ymax + 1),
            int(((x == 0) & ~bg).sum()),
        )


def nb_hist_loglik(hist: np.ndarray, mu: float, phi: float) -> float:
    """NB log-likelihood of a sample summarised by its count histogram."""
    vals = np.flatnonzero(hist)
    if len(vals) == 0:
        return 0.0
    h = hist[vals]
    n = h.sum()
    s = float(h @ vals)
    log_mp = np.log(mu + phi)
    return float(
        h @ (gammaln(vals + phi) - gammaln(vals + 1.0))
        - n * gammaln(phi)
        + s * (np.log(mu) - log_mp)
        + n * phi * (np.log(phi) - log_mp)
    )


def _log_gamma_prior(v: float, shape: float, rate: float) -> float:
    return (shape - 1.0) * np.log(v) - rate * v


class ReplicateUpdater:
    """Updates ``pi`` and the background/signal parameters of one replicate."""

    def __init__(self, priors: PriorConfig, nb: bool):
        self.priors = priors
        self.nb = nb
        mk = lambda: RandomWalk(priors.step, priors.target_low, priors.target_high)  # noqa: E731
        self.steps = {k: mk() for k in ("bg_mean", "bg_phi", "sig_mean", "sig_phi")} if nb else {}

    def freeze(self) -> None:
        for s in self.steps.values():
            s.freeze()

    def __call__(self, stats: ReplicateStats, rep: ReplicateParams, rng: np.random.Generator) -> ReplicateParams:
        pr = self.priors
        n_bg = int(stats.hist_bg.sum())
        pi = rng.beta(pr.pi_a + n_bg, pr.pi_b + stats.n_struct)
        pi = min(max(pi, _TINY), 1.0)
        if not self.nb:
            vals = np.arange(len(stats.hist_bg))
            s0 = float(stats.hist_bg @ vals)
            s1 = float(stats.hist_sig @ np.arange(len(stats.hist_sig)))
            n1 = int(stats.hist_sig.sum())
            lam0 = truncated_gamma(pr.rate_shape + s0, pr.rate_rate + n_bg, 0.0, rep.sig_mean, rng)
            lam1 = truncated_gamma(pr.rate_shape + s1, pr.rate_rate + n1, lam0, np.inf, rng)
            return ReplicateParams(pi, lam0, lam1)
        mu0, phi0, mu1, phi1 = rep.bg_mean, rep.bg_phi, rep.sig_mean, rep.sig_phi
        mu0 = self._mh("bg_mean", mu0, lambda v: self._target(stats.hist_bg, v, phi0, pr.mu_shape, pr.mu_rate, v), rng, hi=mu1)
        phi0 = self._mh("bg_phi", phi0, lambda v: self._target(stats.hist_bg, mu0, v, pr.phi_shape, pr.phi_rate, v), rng)
        mu1 = self._mh("sig_mean", mu1, lambda v: self._target(stats.hist_sig, v, phi1, pr.mu_shape, pr.mu_rate, v), rng, lo=mu0)
        phi1 = self._mh("sig_phi", phi1, lambda v: self._target(stats.hist_sig, mu1, v, pr.phi_shape, pr.phi_rate, v), rng)
        return ReplicateParams(pi, mu0, mu1, phi0, phi1)

    @staticmethod
    def _target(hist, mu, phi, shape, rate, v):
        # log-scale walk: the Jacobian contributes log(v)
        return nb_hist_loglik(hist, mu, phi) + _log_gamma_prior(v, shape, rate) + np.log(v)

    def _mh(self, key, cur, target, rng, lo=0.0, hi=np.inf):
        walk = self.steps[key]
        prop = cur * np.exp(walk.step * rng.standard_normal())
        u = rng.random()
        if not (lo < prop < hi) or not np.isfinite(prop):
            walk.record(False)
            return cur
        accept = np.log(u) < target(prop) - target(cur)
        walk.record(bool(accept))
        return prop if accept else cur


def update_emission_params(y, x, z, rep: ReplicateParams, priors: PriorConfig, rng, updater=None) -> ReplicateParams:
    """One emission update for a single replicate column from raw assignments."""
    updater = updater or ReplicateUpdater(priors, rep.is_nb)
    return updater(ReplicateStats.from_assignments(y, x, z), rep, rng)


def _constrained_logpost(s: float, q0: np.ndarray, counts: list[TransitionCounts], priors: PriorConfig) -> float:
    if s <= 0 or np.any(q0 <= 0) or np.any(q0 >= 1) or np.any(s * q0 >= 1):
        return -np.inf
    lp = np.log(q0.max())  # s | q0 is uniform on (0, 1 / max q0)
    log_init1 = -np.log1p(s)
    log_init0 = np.log(s) - np.log1p(s)
    for q, n in zip(q0, counts):
        lp += (
            n.first1 * log_init1
            + n.first0 * log_init0
            + n.n11 * np.log1p(-s * q)
            + n.n10 * np.log(s * q)
            + n.n01 * np.log(q)
            + n.n00 * np.log1p(-q)
            + (priors.q0_a - 1) * np.log(q)
            + (priors.q0_b - 1) * np.log1p(-q)
            - betaln(priors.q0_a, priors.q0_b)
        )
    return float(lp)


class ConstrainedUpdater:
    """Metropolis updates of the shared ratio ``s`` and each condition's ``q0``.

    ``s`` moves on the log scale, each ``q0c`` on the logit scale; proposals
    leaving ``s * q0c < 1`` are rejected.
    """

    def __init__(self, priors: PriorConfig, n_conditions: int):
        self.priors = priors
        mk = lambda: RandomWalk(priors.step, priors.target_low, priors.target_high)  # noqa: E731
        self.s_step = mk()
        self.q_steps = [mk() for _ in range(n_conditions)]

    def freeze(self) -> None:
        self.s_step.freeze()
        for w in self.q_steps:
            w.freeze()

    def __call__(self, counts: list[TransitionCounts], cur: ConstrainedChainParams, rng) -> ConstrainedChainParams:
        s = cur.s
        q0 = np.array(cur.q0, dtype=float)
        lp = _constrained_logpost(s, q0, counts, self.priors)
        s_prop = s * np.exp(self.s_step.step * rng.standard_normal())
        u = rng.random()
        lp_prop = _constrained_logpost(s_prop, q0, counts, self.priors)
        accept = np.log(u) < lp_prop - lp + np.log(s_prop) - np.log(s)
        self.s_step.record(bool(accept))
        if accept:
            s, lp = s_prop, lp_prop
        for c, walk in enumerate(self.q_steps):
            q = q0[c]
            logit = np.log(q) - np.log1p(-q)
            qp = 1.0 / (1.0 + np.exp(-(logit + walk.step * rng.standard_normal())))
            u = rng.random()
            trial = q0.copy()
            trial[c] = qp
            lp_prop = _constrained_logpost(s, trial, counts, self.priors)
            jac = np.log(qp) + np.log1p(-qp) - np.log(q) - np.log1p(-q)
            accept = np.log(u) < lp_prop - lp + jac
            walk.record(bool(accept))
            if accept:
                q0, lp = trial, lp_prop
        return ConstrainedChainParams(float(s), [float(v) for v in q0])


def update_constrained_params(counts, priors: PriorConfig, rng, current: ConstrainedChainParams, updater=None):
    """One constrained-chain update (see :class:`ConstrainedUpdater`)."""
    updater = updater or ConstrainedUpdater(priors, len(counts))
    return updater(counts, current, rng)
