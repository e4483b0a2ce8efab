"""Metropolis-within-Gibbs driver for the joint replicate MRF model.

One sweep updates, per condition: the latent states (systematic scan), the
inner zero indicators, each replicate's emission parameters and the chain
parameters. With ``constrained=True`` the chain parameters of all conditions
are tied through a shared ``s`` and updated jointly after the per-condition
blocks.

Random streams are derived from the master seed by fixed spawn keys. Within
a condition, replicates are first put into a canonical order (by content
digest) so that permuting replicate columns cannot change any draw.
"""

from __future__ import annotations

import hashlib
import logging

import numpy as np

from ..chain import ChainParams, TransitionCounts
from ..data import CountMatrix, DimensionError, ExperimentDesign
from . import kernels
from .model import (
    ConstrainedChainParams,
    EmissionParams,
    Family,
    PosteriorSummary,
    PriorConfig,
    ReplicateParams,
    SamplerConfig,
    SamplerError,
)
from .updates import ConstrainedUpdater, ReplicateStats, ReplicateUpdater, update_transition_params, zero_count_weight

logger = logging.getLogger(__name__)

# spawn-key blocks
_X_STREAM, _Z_STREAM, _EMIT_STREAM, _CHAIN_STREAM, _SHARED_STREAM = range(5)


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def canonical_order(y: np.ndarray) -> np.ndarray:
    """Permutation sorting replicate columns by a digest of their contents."""
    digests = [hashlib.sha256(np.ascontiguousarray(y[:, r], dtype=np.int64).tobytes()).hexdigest() for r in range(y.shape[1])]
    return np.array(sorted(range(y.shape[1]), key=lambda r: digests[r]), dtype=np.int64)


def segment_flags(segments, m: int) -> tuple[np.ndarray, np.ndarray]:
    is_start = np.zeros(m, dtype=np.bool_)
    is_end = np.zeros(m, dtype=np.bool_)
    for a, b in segments:
        is_start[a] = True
        is_end[b - 1] = True
    return is_start, is_end


def chain_logs(q: ChainParams):
    lq = np.log(q.transition_matrix())
    p1 = q.stationary
    return lq, float(np.log(p1)), float(np.log1p(-p1))


def _mom_nb(vals: np.ndarray, fallback_mean: float) -> tuple[float, float]:
    if len(vals) == 0:
        return fallback_mean, 1.0
    mean = max(float(vals.mean()), 1e-3)
    var = float(vals.var())
    phi = mean**2 / (var - mean) if var > mean * 1.01 else 100.0
    return mean, float(np.clip(phi, 0.05, 100.0))


def initial_states(y: np.ndarray) -> np.ndarray:
    """Threshold replicate-summed counts at their 95th percentile."""
    total = y.sum(axis=1)
    return (total > np.quantile(total, 0.95)).astype(np.int8)


def initial_params(y: np.ndarray, x: np.ndarray, family: Family) -> list[ReplicateParams]:
    """Method-of-moments warm start on the two groups defined by ``x``."""
    family = Family(family)
    reps = []
    for r in range(y.shape[1]):
        bg = y[x == 0, r].astype(float)
        sig = y[x == 1, r].astype(float)
        if len(bg) == 0:
            bg = y[:, r].astype(float)
        bg_mean = max(float(bg.mean()), 1e-2)
        if family is Family.NB:
            pi = 1.0
            lam = bg_mean
        else:
            m1, m2 = bg_mean, float((bg**2).mean())
            lam = max(m2 / m1 - 1.0, 1e-2) if m1 > 0 else 1e-2
            pi = float(np.clip(m1 / lam, 0.05, 0.99))
            lam = m1 / pi
        if family is Family.ZIP:
            sig_mean = float(sig.mean()) if len(sig) else 2.0 * lam + 1.0
            if sig_mean <= lam:
                sig_mean = lam + max(1.0, lam)
            reps.append(ReplicateParams(pi, lam, sig_mean))
            continue
        _, phi0 = _mom_nb(bg[bg > 0] if family is Family.ZINB else bg, lam)
        sig_mean, phi1 = _mom_nb(sig, 2.0 * lam + 1.0)
        if sig_mean <= lam:
            sig_mean = lam + max(1.0, lam)
        reps.append(ReplicateParams(pi, lam, sig_mean, phi0, phi1))
    return reps


def initial_chain(x: np.ndarray, is_start: np.ndarray) -> ChainParams:
    n = np.zeros(6, dtype=np.int64)
    kernels.chain_counts(x, is_start, n)
    return ChainParams((n[2] + 1.0) / (n[2] + n[3] + 2.0), (n[0] + 1.0) / (n[0] + n[1] + 2.0))


def _counts(arr) -> TransitionCounts:
    return TransitionCounts(*(int(v) for v in arr))


class _Condition:
    """Mutable sampler state of one condition (canonical replicate order)."""

    def __init__(self, y, family, is_start, is_end, seed, index, priors, init_reps, init_chain, x0):
        self.y = np.ascontiguousarray(y, dtype=np.int64)
        m, n_rep = self.y.shape
        self.family = family
        self.is_start, self.is_end = is_start, is_end
        self.ymax = int(self.y.max()) if self.y.size else 0
        self.x = x0.copy() if x0 is not None else initial_states(self.y)
        self.z = np.ones((m, n_rep), dtype=np.int8)
        self.reps = init_reps or initial_params(self.y, self.x, family)
        self.q = init_chain or initial_chain(self.x, is_start)
        self.llr = np.empty(m)
        self.ux = np.empty(m)
        self.uz = np.empty((n_rep, m))
        self.hist0 = np.zeros((n_rep, self.ymax + 1), dtype=np.int64)
        self.hist1 = np.zeros((n_rep, self.ymax + 1), dtype=np.int64)
        self.nstruct = np.zeros(n_rep, dtype=np.int64)
        self.ncounts = np.zeros(6, dtype=np.int64)
        self.acc = np.zeros(m, dtype=np.int64)
        self.rng_x = _stream(seed, _X_STREAM, index)
        self.rng_z = [_stream(seed, _Z_STREAM, index, r) for r in range(n_rep)]
        self.rng_e = [_stream(seed, _EMIT_STREAM, index, r) for r in range(n_rep)]
        self.rng_q = _stream(seed, _CHAIN_STREAM, index)
        self.updaters = [ReplicateUpdater(priors, family.is_nb) for _ in range(n_rep)]
        self.q_accepts = 0

    def llr_table(self) -> np.ndarray:
        tab = np.empty((len(self.reps), self.ymax + 1))
        for r, rep in enumerate(self.reps):
            tab[r] = rep.signal.table(self.ymax) - rep.background.table(self.ymax)
        if not np.all(np.isfinite(tab)):
            raise SamplerError(f"non-finite emission log-likelihood with parameters {[p.values() for p in self.reps]}")
        return tab

    def sweep_states(self) -> None:
        kernels.bin_llr(self.y, self.llr_table(), self.llr)
        lq, lpi1, lpi0 = chain_logs(self.q)
        self.rng_x.random(out=self.ux)
        kernels.sweep_x(self.x, self.llr, self.is_start, self.is_end, lq, lpi1, lpi0, self.ux)

    def sweep_inner(self) -> None:
        p0 = np.array([zero_count_weight(rep) for rep in self.reps])
        for r, rng in enumerate(self.rng_z):
            rng.random(out=self.uz[r])
        kernels.z_and_stats(self.x, self.y, self.uz, p0, self.z, self.hist0, self.hist1, self.nstruct)

    def update_emissions(self) -> None:
        for r, upd in enumerate(self.updaters):
            stats = ReplicateStats(self.hist0[r], self.hist1[r], int(self.nstruct[r]))
            self.reps[r] = upd(stats, self.reps[r], self.rng_e[r])

    def transition_counts(self) -> TransitionCounts:
        kernels.chain_counts(self.x, self.is_start, self.ncounts)
        return _counts(self.ncounts)

    def update_chain(self, priors) -> None:
        self.q, ok = update_transition_params(self.transition_counts(), priors, self.rng_q, self.q)
        self.q_accepts += ok


def _param_names(labels, rep_labels, family: Family, constrained: bool) -> list[str]:
    names = []
    for c, lab in enumerate(labels):
        names += [f"{lab}.q0", f"{lab}.q1", f"{lab}.p1"]
        for rl in rep_labels[c]:
            keys = ["pi", "bg_mean", "bg_phi", "sig_mean", "sig_phi"] if family.is_nb else ["pi", "bg_mean", "sig_mean"]
            names += [f"{lab}.{rl}.{k}" for k in keys]
    if constrained:
        names.append("s")
    return names


def run_sampler(
    data: CountMatrix,
    design: ExperimentDesign | None = None,
    family: Family | str = Family.ZINB,
    priors: PriorConfig | None = None,
    cfg: SamplerConfig | None = None,
    init: EmissionParams | None = None,
    init_chain: list[ChainParams] | None = None,
) -> PosteriorSummary:
    """Fit the joint MRF model and return per-bin posterior enrichment probabilities.

    ``init``/``init_chain`` override the data-driven warm start; with
    ``cfg.fix_params`` they are held fixed and only the states are sampled.
    """
    family = Family(family)
    if family is Family.NB:
        raise ValueError("the MRF sampler supports the zip and zinb families")
    priors = priors or PriorConfig()
    cfg = cfg or SamplerConfig()
    design = design or ExperimentDesign.single(data)
    cols = design.column_indices(data)
    if cfg.fix_params and (init is None or init_chain is None):
        raise ValueError("fix_params requires both init and init_chain")
    if init is not None and [len(c) for c in init.replicates] != [len(c) for c in cols]:
        raise DimensionError("initial emission parameters do not match the design")
    m = data.n_bins
    if m == 0:
        raise DimensionError("no bins to fit")
    is_start, is_end = segment_flags(data.segments, m)

    conds, perms = [], []
    for c, idx in enumerate(cols):
        y = data.counts[:, idx]
        perm = canonical_order(y)
        perms.append(perm)
        reps = [init.replicates[c][p] for p in perm] if init is not None else None
        q = init_chain[c] if init_chain is not None else None
        conds.append(_Condition(y[:, perm], family, is_start, is_end, cfg.seed, c, priors, reps, q, None))

    shared = None
    if cfg.constrained:
        shared_rng = _stream(cfg.seed, _SHARED_STREAM)
        ratios = [(1.0 - cd.q.q1) / cd.q.q0 for cd in conds]
        s = float(np.exp(np.mean(np.log(ratios))))
        q0 = [min(cd.q.q0, 0.99 / s) for cd in conds]
        shared = ConstrainedChainParams(s, q0)
        shared_updater = ConstrainedUpdater(priors, len(conds))
        for c, cd in enumerate(conds):
            cd.q = shared.chain(c)

    rep_labels = [[design.conditions[c].columns[p] for p in perms[c]] for c in range(len(conds))]
    names = _param_names(design.labels, rep_labels, family, cfg.constrained)
    out_names = _param_names(design.labels, [c.columns for c in design.conditions], family, cfg.constrained)
    draws = np.empty((cfg.n_retained, len(names)))
    kept_iters = np.empty(cfg.n_retained, dtype=np.int64)
    states = np.empty((cfg.n_retained, m, len(conds)), dtype=np.int8) if cfg.keep_states else None
    k = 0
    for it in range(cfg.iterations):
        if it == cfg.burn_in:
            for cd in conds:
                for upd in cd.updaters:
                    upd.freeze()
            if shared is not None:
                shared_updater.freeze()
        for cd in conds:
            cd.sweep_states()
            if cfg.fix_params:
                continue
            cd.sweep_inner()
            cd.update_emissions()
            if shared is None:
                cd.update_chain(priors)
        if shared is not None and not cfg.fix_params:
            shared = shared_updater([cd.transition_counts() for cd in conds], shared, shared_rng)
            for c, cd in enumerate(conds):
                cd.q = shared.chain(c)
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thinning == 0:
            row = []
            for c, cd in enumerate(conds):
                kernels.accumulate(cd.acc, cd.x)
                if states is not None:
                    states[k, :, c] = cd.x
                row += [cd.q.q0, cd.q.q1, cd.q.stationary]
                for rep in cd.reps:
                    row += list(rep.values().values())
            if shared is not None:
                row.append(shared.s)
            draws[k] = row
            kept_iters[k] = it
            k += 1
            if not np.all(np.isfinite(row)):
                raise SamplerError(f"non-finite parameter draw at iteration {it}")

    # back to the caller's replicate order
    order = [names.index(n) for n in out_names]
    prob = np.column_stack([cd.acc / cfg.n_retained for cd in conds])
    final = EmissionParams(
        family,
        [[cd.reps[int(np.flatnonzero(perms[c] == r)[0])] for r in range(len(perms[c]))] for c, cd in enumerate(conds)],
    )
    acceptance = {}
    for c, cd in enumerate(conds):
        lab = design.labels[c]
        if shared is None and not cfg.fix_params:
            acceptance[f"{lab}.chain"] = cd.q_accepts / cfg.iterations
        for r, upd in enumerate(cd.updaters):
            for key, walk in upd.steps.items():
                if walk.tries:
                    acceptance[f"{lab}.{rep_labels[c][r]}.{key}"] = walk.rate
    if shared is not None and shared_updater.s_step.tries:
        acceptance["s"] = shared_updater.s_step.rate
    return PosteriorSummary(
        prob_enriched=prob,
        conditions=design.labels,
        param_names=out_names,
        draws=draws[:, order],
        iterations=kept_iters,
        acceptance=acceptance,
        final=final,
        states=states,
    )


def gibbs_marginals(
    y,
    reps: list[ReplicateParams],
    q: ChainParams,
    sweeps: int,
    rng: np.random.Generator,
    burn: int = 0,
    segments=None,
    track_patterns: bool = False,
):
    """Fixed-parameter Gibbs estimate of P(X[m]=1 | y) using the compiled sweep.

    Returns the marginals and, if requested, the joint pattern frequencies
    (index = binary code of the state vector, first bin most significant).
    """
    y = np.asarray(y, dtype=np.int64)
    if y.ndim == 1:
        y = y[:, None]
    m = y.shape[0]
    ymax = int(y.max())
    tab = np.stack([rep.signal.table(ymax) - rep.background.table(ymax) for rep in reps])
    llr = np.empty(m)
    kernels.bin_llr(y, tab, llr)
    is_start, is_end = segment_flags(segments or [(0, m)], m)
    lq, lpi1, lpi0 = chain_logs(q)
    x = (rng.random(m) < q.stationary).astype(np.int8)
    u = rng.random((sweeps, m))
    acc = np.zeros(m, dtype=np.int64)
    patterns = np.zeros(1 << m if track_patterns else 0, dtype=np.int64)
    kernels.gibbs_sweeps(x, llr, is_start, is_end, lq, lpi1, lpi0, u, burn, acc, patterns)
    marg = acc / (sweeps - burn)
    if track_patterns:
        return marg, patterns / (sweeps - burn)
    return marg
