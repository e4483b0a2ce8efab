"""Independent-state mixture baseline fitted by EM, and BIC model comparison.

Each condition has its own signal proportion ``p_c``; its replicates share
the latent state of a bin, so E-step responsibilities multiply the replicate
likelihoods. Zero-inflated backgrounds carry a second latent layer (the
structural-zero indicator) that the E-step also resolves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import digamma, gammaln

from .data import CountMatrix, ExperimentDesign
from .inference.model import EmissionParams, Family, ReplicateParams
from .inference.sampler import initial_params, initial_states
from .inference.updates import nb_hist_loglik

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
LOG_PHI_BOUNDS = (math.log(1e-3), math.log(1e4))


class FitError(RuntimeError):
    """EM ended in a degenerate solution (e.g. the signal component vanished)."""


@dataclass
class MixtureParams:
    p: list[float]
    emissions: EmissionParams

    def __post_init__(self):
        for v in self.p:
            if not 0.0 < v < 1.0:
                raise ValueError("mixture proportions must lie in (0, 1)")


@dataclass
class MixtureFit:
    params: MixtureParams
    loglik: float
    responsibilities: np.ndarray  # (M, C) posterior P(X=1 | y)
    n_params: int
    n_obs: int
    trace: list[float] = field(default_factory=list)
    converged: bool = True

    @property
    def bic(self) -> float:
        return bic(self.loglik, self.n_params, self.n_obs)


def bic(loglik: float, n_params: int, n_obs: float) -> float:
    if n_obs < 1:
        raise ValueError("n_obs must be >= 1")
    return -2.0 * loglik + n_params * math.log(n_obs)


def params_per_replicate(family: Family) -> int:
    return {Family.ZIP: 3, Family.ZINB: 5, Family.NB: 4}[Family(family)]


def golden_max(f, lo: float, hi: float, tol: float = 1e-8) -> float:
    """Maximise a unimodal ``f`` on ``[lo, hi]`` by golden-section search."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def _weighted_kernel(hist: np.ndarray, rep_mean: float, cur_phi: float | None):
    """Weighted MLE of the count kernel from a weighted histogram.

    The NB mean is the weighted mean whatever the dispersion, so only the
    dispersion needs a numeric search. The previous dispersion is kept when
    the search does not improve on it.
    """
    total = hist.sum()
    if total <= 0:
        return rep_mean, cur_phi
    mean = float(hist @ np.arange(len(hist))) / total
    mean = max(mean, 1e-8)
    if cur_phi is None:
        return mean, None
    obj = lambda lp: nb_hist_loglik(hist, mean, math.exp(lp))  # noqa: E731
    cand = golden_max(obj, *LOG_PHI_BOUNDS)
    if obj(cand) >= obj(math.log(cur_phi)):
        return mean, math.exp(cand)
    return mean, cur_phi


def _zi_negll_grad(v, vals, w, nb: bool):
    """Negative weighted zero-inflated log-likelihood and its gradient.

    ``v`` = (logit pi, log mean[, log phi]); ``vals``/``w`` are the distinct
    counts and their weights.
    """
    pi = 1.0 / (1.0 + math.exp(-v[0]))
    mu = math.exp(v[1])
    if nb:
        phi = math.exp(v[2])
        lmp = math.log(mu + phi)
        logk = gammaln(vals + phi) - gammaln(phi) - gammaln(vals + 1.0) + vals * v[1] + phi * (v[2] - lmp) - vals * lmp
        db = vals - mu * (vals + phi) / (mu + phi)
        dc = phi * (digamma(vals + phi) - digamma(phi) + v[2] + 1.0 - lmp - (vals + phi) / (mu + phi))
    else:
        logk = vals * v[1] - mu - gammaln(vals + 1.0)
        db = vals - mu
        dc = np.zeros_like(db)
    ll = math.log(pi) + logk
    ga = np.full_like(logk, 1.0 - pi)
    gb = db.copy()
    gc = dc.copy()
    zero = vals == 0
    if zero.any():
        lf0 = logk[zero]
        log_d = np.logaddexp(math.log1p(-pi) if pi < 1.0 else -np.inf, math.log(pi) + lf0)
        wz = np.exp(math.log(pi) + lf0 - log_d)  # P(count component | y = 0)
        ll[zero] = log_d
        ga[zero] = (1.0 - pi) * (np.exp(math.log(pi) + lf0 - log_d) - np.exp(math.log(pi) - log_d))
        gb[zero] = wz * db[zero]
        gc[zero] = wz * dc[zero]
    grad = np.array([w @ ga, w @ gb] + ([w @ gc] if nb else []))
    return -float(w @ ll), -grad


def _fit_zi_background(hist: np.ndarray, rep: ReplicateParams):
    """Weighted MLE of a zero-inflated background, with the zero indicator integrated out.

    Optimises on (logit pi, log mean[, log phi]) starting from the current
    values; the current values are kept unless the objective improves.
    """
    nb = rep.bg_phi is not None
    vals = np.flatnonzero(hist).astype(float)
    w = hist[np.flatnonzero(hist)]
    if len(vals) == 0:
        return rep.pi, rep.bg_mean, rep.bg_phi
    pi0 = min(max(rep.pi, 1e-8), 1.0 - 1e-8)
    start = np.array([math.log(pi0) - math.log1p(-pi0), math.log(rep.bg_mean)] + ([math.log(rep.bg_phi)] if nb else []))
    bounds = [(-20.0, 20.0), (math.log(1e-8), math.log(1e6))] + ([LOG_PHI_BOUNDS] if nb else [])
    res = minimize(_zi_negll_grad, start, args=(vals, w, nb), jac=True, method="L-BFGS-B", bounds=bounds, options={"ftol": 1e-15, "gtol": 1e-9})
    if np.isfinite(res.fun) and res.fun <= _zi_negll_grad(start, vals, w, nb)[0]:
        x = res.x
        return 1.0 / (1.0 + math.exp(-x[0])), math.exp(x[1]), (math.exp(x[2]) if nb else None)
    return rep.pi, rep.bg_mean, rep.bg_phi


def _condition_loglik(pats, mult, reps, p, power):
    l0 = np.zeros(pats.shape[0])
    l1 = np.zeros(pats.shape[0])
    for r, rep in enumerate(reps):
        l0 += rep.background.logpmf(pats[:, r])
        l1 += rep.signal.logpmf(pats[:, r])
    a = math.log(p) + power * l1
    b = math.log1p(-p) + power * l0
    tot = np.logaddexp(a, b)
    return float(mult @ tot), np.exp(a - tot)


def fit_condition(y, family, tol: float = 1e-6, max_iter: int = 1000, power: float = 1.0, init=None):
    """EM for one condition; ``y`` is ``(M, R)``.

    Bins are compressed to their distinct count patterns first. ``power``
    raises every bin's emission likelihood to a power (used to compare one
    replicate against ``power`` identical copies).
    Returns ``(p, reps, loglik, responsibilities, trace, converged)``.
    """
    family = Family(family)
    y = np.asarray(y, dtype=np.int64)
    if y.ndim == 1:
        y = y[:, None]
    if y.size == 0 or np.all(y == y[0]):
        raise FitError("count patterns are all identical; the mixture is not identifiable")
    if init is None:
        x0 = initial_states(y)
        reps = initial_params(y, x0, family)
        p = float(np.clip(x0.mean(), 1e-3, 0.5))
    else:
        p, reps = init
        reps = list(reps)
    pats, inv, mult = np.unique(y, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)
    mult = mult.astype(float)
    ymax = int(y.max()) if y.size else 0
    ll, tau = _condition_loglik(pats, mult, reps, p, power)
    trace = [ll]
    converged = False
    for _ in range(max_iter):
        p = float(mult @ tau / mult.sum())
        if not 1e-8 < p < 1.0 - 1e-8:
            raise FitError(f"signal proportion collapsed to {p:.3g}")
        new_reps = []
        for r, rep in enumerate(reps):
            h0 = np.bincount(pats[:, r], weights=mult * (1.0 - tau), minlength=ymax + 1)
            h1 = np.bincount(pats[:, r], weights=mult * tau, minlength=ymax + 1)
            if family.zero_inflated:
                pi, mu0, phi0 = _fit_zi_background(h0, rep)
            else:
                pi = 1.0
                mu0, phi0 = _weighted_kernel(h0, rep.bg_mean, rep.bg_phi)
            mu1, phi1 = _weighted_kernel(h1, rep.sig_mean, rep.sig_phi)
            if not mu1 > mu0 * (1.0 + 1e-9) + 1e-12:
                raise FitError(f"signal mean {mu1:.4g} fell to the background mean {mu0:.4g}")
            new_reps.append(ReplicateParams(pi, mu0, mu1, phi0, phi1))
        reps = new_reps
        new_ll, tau = _condition_loglik(pats, mult, reps, p, power)
        trace.append(new_ll)
        gain = new_ll - ll
        ll = new_ll
        if gain < tol:
            converged = True
            break
    return p, reps, ll, tau[inv], trace, converged


def fit_em(
    data: CountMatrix,
    design: ExperimentDesign | None = None,
    family: Family | str = Family.ZINB,
    tol: float = 1e-6,
    max_iter: int = 1000,
) -> MixtureFit:
    """Fit the mixture baseline to every condition of ``design``.

    ``n_params`` counts one proportion per condition plus the per-replicate
    emission parameters; ``n_obs`` is the number of bins.
    """
    family = Family(family)
    design = design or ExperimentDesign.single(data)
    cols = design.column_indices(data)
    ps, reps_all, taus, traces = [], [], [], []
    ll_total = 0.0
    converged = True
    for idx in cols:
        p, reps, ll, tau, trace, ok = fit_condition(data.counts[:, idx], family, tol, max_iter)
        ps.append(p)
        reps_all.append(reps)
        taus.append(tau)
        traces.append(trace)
        ll_total += ll
        converged &= ok
    n_params = sum(1 + params_per_replicate(family) * len(idx) for idx in cols)
    total_trace = list(np.sum([np.pad(t, (0, max(map(len, traces)) - len(t)), mode="edge") for t in traces], axis=0))
    return MixtureFit(
        MixtureParams(ps, EmissionParams(family, reps_all)),
        ll_total,
        np.column_stack(taus),
        n_params,
        data.n_bins,
        total_trace,
        converged,
    )


def bic_table(data: CountMatrix, families=(Family.NB, Family.ZINB), tol: float = 1e-6) -> list[dict]:
    """One row per count column: BIC of each family fitted to that column alone."""
    rows = []
    for j, label in enumerate(data.labels):
        row = {"experiment": label, "n_obs": data.n_bins}
        for fam in families:
            fam = Family(fam)
            try:
                p, reps, ll, *_ = fit_condition(data.counts[:, j], fam, tol)
                k = 1 + params_per_replicate(fam)
                row[f"loglik_{fam.value}"] = ll
                row[f"k_{fam.value}"] = k
                row[f"bic_{fam.value}"] = bic(ll, k, data.n_bins)
            except FitError:
                row[f"loglik_{fam.value}"] = float("nan")
                row[f"k_{fam.value}"] = 1 + params_per_replicate(fam)
                row[f"bic_{fam.value}"] = float("nan")
        fams = [Family(f).value for f in families]
        best = min(fams, key=lambda f: row[f"bic_{f}"] if np.isfinite(row[f"bic_{f}"]) else np.inf)
        row["preferred"] = best
        rows.append(row)
    return rows
