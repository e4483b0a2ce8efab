"""Compiled inner loops of the sampler.

All randomness enters as pre-drawn uniforms so the kernels stay
deterministic and the numpy ``Generator`` streams remain the single source
of randomness.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def bin_llr(y, tab, out):
    """``out[m] = sum_r tab[r, y[m, r]]`` with replicates summed in column order."""
    m_bins, n_rep = y.shape
    for m in range(m_bins):
        acc = 0.0
        for r in range(n_rep):
            acc += tab[r, y[m, r]]
        out[m] = acc


@njit(cache=True)
def _log_odds(m, x, llr, is_start, is_end, lq, lpi1, lpi0):
    t = llr[m]
    if is_start[m]:
        t += lpi1 - lpi0
    else:
        xl = x[m - 1]
        t += lq[xl, 1] - lq[xl, 0]
    if not is_end[m]:
        xr = x[m + 1]
        t += lq[1, xr] - lq[0, xr]
    return t


@njit(cache=True)
def sweep_x(x, llr, is_start, is_end, lq, lpi1, lpi0, u):
    """One left-to-right systematic scan of single-site Gibbs updates.

    ``lq[i, j]`` is ``log P(X[m+1]=j | X[m]=i)``; ``lpi1``/``lpi0`` are the
    log stationary probabilities used at a segment start.
    """
    for m in range(x.shape[0]):
        t = _log_odds(m, x, llr, is_start, is_end, lq, lpi1, lpi0)
        if t >= 0:
            p = 1.0 / (1.0 + np.exp(-t))
        else:
            e = np.exp(t)
            p = e / (1.0 + e)
        x[m] = 1 if u[m] < p else 0


@njit(cache=True)
def gibbs_sweeps(x, llr, is_start, is_end, lq, lpi1, lpi0, u, burn, acc, patterns):
    """Run ``u.shape[0]`` sweeps with fixed parameters.

    Accumulates per-bin enrichment counts after ``burn`` sweeps into ``acc``;
    when ``patterns`` has length ``2**M`` the joint state pattern is tallied
    too (only meaningful for tiny M).
    """
    n_sweeps = u.shape[0]
    m_bins = x.shape[0]
    track = patterns.shape[0] == (1 << m_bins)
    for k in range(n_sweeps):
        sweep_x(x, llr, is_start, is_end, lq, lpi1, lpi0, u[k])
        if k >= burn:
            code = 0
            for m in range(m_bins):
                acc[m] += x[m]
                code = 2 * code + x[m]
            if track:
                patterns[code] += 1


@njit(cache=True)
def z_and_stats(x, y, uz, p0, z, hist0, hist1, nstruct):
    """Draw the inner zero indicators and collect emission sufficient statistics.

    ``hist0[r, v]`` counts bins with X=0, Z=1, y=v; ``hist1[r, v]`` bins with
    X=1, y=v; ``nstruct[r]`` bins with X=0, Z=0. Z is set to 1 where X=1.
    """
    m_bins, n_rep = y.shape
    hist0[:, :] = 0
    hist1[:, :] = 0
    nstruct[:] = 0
    for m in range(m_bins):
        if x[m] == 1:
            for r in range(n_rep):
                z[m, r] = 1
                hist1[r, y[m, r]] += 1
        else:
            for r in range(n_rep):
                v = y[m, r]
                if v > 0 or uz[r, m] < p0[r]:
                    z[m, r] = 1
                    hist0[r, v] += 1
                else:
                    z[m, r] = 0
                    nstruct[r] += 1


@njit(cache=True)
def chain_counts(x, is_start, out):
    """``out = [n11, n10, n01, n00, first1, first0]`` respecting segment starts."""
    out[:] = 0
    for m in range(x.shape[0]):
        if is_start[m]:
            if x[m] == 1:
                out[4] += 1
            else:
                out[5] += 1
        else:
            a = x[m - 1]
            b = x[m]
            if a == 1:
                if b == 1:
                    out[0] += 1
                else:
                    out[1] += 1
            else:
                if b == 1:
                    out[2] += 1
                else:
                    out[3] += 1


@njit(cache=True)
def accumulate(acc, x):
    for m in range(x.shape[0]):
        acc[m] += x[m]
