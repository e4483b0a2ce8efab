"""Exact posterior marginals for small problems, used to validate the sampler."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from ..chain import ChainParams
from .model import ReplicateParams

MAX_ENUM_BINS = 14


def _emission_logliks(y, reps: list[ReplicateParams]) -> np.ndarray:
    """``(M, 2)`` array of summed replicate log-likelihoods under X=0 and X=1."""
    y = np.asarray(y, dtype=np.int64)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[1] != len(reps):
        raise ValueError("one parameter set per replicate column is required")
    out = np.zeros((y.shape[0], 2))
    for r, rep in enumerate(reps):
        out[:, 0] += rep.background.logpmf(y[:, r])
        out[:, 1] += rep.signal.logpmf(y[:, r])
    return out


def exact_posterior(y, reps: list[ReplicateParams], q: ChainParams) -> np.ndarray:
    """P(X[m]=1 | y) by summing the joint over all ``2**M`` state vectors."""
    em = _emission_logliks(y, reps)
    m = em.shape[0]
    if m > MAX_ENUM_BINS:
        raise ValueError(f"exact enumeration limited to M <= {MAX_ENUM_BINS}, got {m}")
    codes = np.arange(1 << m)
    states = (codes[:, None] >> np.arange(m - 1, -1, -1)) & 1
    p1 = q.stationary
    logj = np.where(states[:, 0] == 1, np.log(p1), np.log1p(-p1))
    lq = np.log(q.transition_matrix())
    if m > 1:
        logj = logj + lq[states[:, :-1], states[:, 1:]].sum(axis=1)
    logj = logj + em[np.arange(m), states].sum(axis=1)
    w = np.exp(logj - logsumexp(logj))
    return w @ states


def forward_backward(y, reps: list[ReplicateParams], q: ChainParams) -> np.ndarray:
    """P(X[m]=1 | y) by scaled forward-backward recursions."""
    em = _emission_logliks(y, reps)
    m = em.shape[0]
    shift = em.max(axis=1, keepdims=True)
    lik = np.exp(em - shift)
    trans = q.transition_matrix()
    p1 = q.stationary
    alpha = np.empty((m, 2))
    beta = np.ones((m, 2))
    a = np.array([1.0 - p1, p1]) * lik[0]
    alpha[0] = a / a.sum()
    for t in range(1, m):
        a = (alpha[t - 1] @ trans) * lik[t]
        alpha[t] = a / a.sum()
    for t in range(m - 2, -1, -1):
        b = trans @ (lik[t + 1] * beta[t + 1])
        beta[t] = b / b.sum()
    post = alpha * beta
    return post[:, 1] / post.sum(axis=1)
