import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize, stats

from chipmrf.chain import ChainParams, TransitionCounts, sample_chain
from chipmrf.data import Condition, CountMatrix, DimensionError, ExperimentDesign
from chipmrf.distributions import InvalidParameterError
from chipmrf.inference import (
    ConstrainedChainParams,
    EmissionParams,
    PriorConfig,
    ReplicateParams,
    ReplicateStats,
    ReplicateUpdater,
    SamplerConfig,
    exact_posterior,
    forward_backward,
    gibbs_marginals,
    run_sampler,
    update_constrained_params,
    update_emission_params,
    update_transition_params,
    x_full_conditional,
    z_full_conditional,
)
from chipmrf.inference.updates import truncated_gamma


def equal_pmf_reps(count=2):
    """Poisson background/signal pair with identical pmf at ``count``."""
    lam1 = optimize.brentq(lambda l: count * math.log(l) - l - (count * math.log(1.0) - 1.0), 2.0, 20.0)
    return [ReplicateParams.zip(1.0, 1.0, lam1)]


# -- full conditionals ---------------------------------------------------------


def test_x_conditional_emissions_cancel():
    reps = equal_pmf_reps()
    y = np.full((5, 1), 2)
    q = ChainParams(0.1, 0.9)
    x = np.array([1, 1, 0, 1, 1])
    assert x_full_conditional(2, x, y, reps, q) == pytest.approx(0.81 / (0.81 + 0.01), rel=1e-10)
    x = np.array([0, 0, 0, 1, 0])
    # left neighbour 0, right neighbour 1: q01 q11 / (q01 q11 + q00 q01)
    expected = 0.1 * 0.9 / (0.1 * 0.9 + 0.9 * 0.1)
    assert x_full_conditional(2, x, y, reps, q) == pytest.approx(expected, rel=1e-10)


def test_x_conditional_value(oracle):
    reps = equal_pmf_reps()
    y = np.full((3, 1), 2)
    got = x_full_conditional(1, np.array([1, 0, 1]), y, reps, ChainParams(0.1, 0.9))
    assert got == pytest.approx(oracle["x_cond_both_enriched_q1_0.9_q0_0.1"], rel=1e-12)


def test_x_conditional_segment_edge_uses_initial_term():
    reps = equal_pmf_reps()
    y = np.full((4, 1), 2)
    q = ChainParams(0.1, 0.9)
    # bin 2 starts a new segment: left factor is the stationary probability
    p1 = q.stationary
    got = x_full_conditional(2, np.array([1, 1, 0, 1]), y, reps, q, segments=[(0, 2), (2, 4)])
    expected = p1 * 0.9 / (p1 * 0.9 + (1 - p1) * 0.1)
    assert got == pytest.approx(expected, rel=1e-10)


def test_z_conditional(oracle):
    rep = ReplicateParams.zip(0.5, 0.5, 3.0)
    assert z_full_conditional(5, rep) == 1.0
    assert z_full_conditional(0, rep) == pytest.approx(oracle["z_cond_pi0.5_lam0.5"], rel=1e-12)
    assert z_full_conditional(0, ReplicateParams.zip(1.0, 0.5, 3.0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        z_full_conditional(0, rep, x_state=1)


# -- parameter updates ---------------------------------------------------------


def test_transition_update_mean(oracle):
    rng = np.random.default_rng(0)
    counts = TransitionCounts(94, 6, 20, 5000, 0, 1)
    q = ChainParams(0.01, 0.9)
    draws, acc = [], 0
    for _ in range(20000):
        q, ok = update_transition_params(counts, PriorConfig(), rng, q)
        draws.append(q.q1)
        acc += ok
    assert acc / 20000 > 0.95  # O(1) correction against O(M) likelihood
    sd = math.sqrt(95 * 7 / (102**2 * 103))
    assert np.mean(draws) == pytest.approx(oracle["beta_mean_95_102"], abs=4 * sd / math.sqrt(20000) + 2e-3)


def test_transition_update_without_zero_state_bins():
    rng = np.random.default_rng(1)
    counts = TransitionCounts(50, 0, 0, 0, 1, 0)
    q = ChainParams(0.5, 0.9)
    q0s = []
    for _ in range(5000):
        q, _ = update_transition_params(counts, PriorConfig(), rng, q)
        q0s.append(q.q0)
    q0s = np.array(q0s)
    assert 0 < q0s.min() and q0s.max() < 1
    assert q0s.std() > 0.2  # spread like its prior, not pinned by data


def test_poisson_signal_conjugate_mean(oracle):
    pr = PriorConfig(rate_shape=1.0, rate_rate=0.01)
    upd = ReplicateUpdater(pr, nb=False)
    hist_sig = np.zeros(4)
    hist_sig[3] = 100  # 100 bins summing to 300
    hist_bg = np.zeros(4)
    hist_bg[0] = 1000
    st_ = ReplicateStats(hist_bg, hist_sig, 0)
    rng = np.random.default_rng(2)
    rep = ReplicateParams.zip(0.9, 0.01, 3.0)
    draws = np.array([upd(st_, rep, rng).sig_mean for _ in range(20000)])
    se = math.sqrt(301) / 100.01 / math.sqrt(20000)
    assert draws.mean() == pytest.approx(oracle["gamma_post_mean_301_100.01"], abs=4 * se)


def test_pi_conjugate_mean():
    upd = ReplicateUpdater(PriorConfig(), nb=False)
    hist_bg = np.zeros(3)
    hist_bg[1] = 60
    st_ = ReplicateStats(hist_bg, np.array([0.0, 0.0, 0.0, 10.0]), 40)
    rng = np.random.default_rng(3)
    draws = np.array([upd(st_, ReplicateParams.zip(0.5, 1.0, 3.0), rng).pi for _ in range(20000)])
    sd = math.sqrt(61 * 41 / (102**2 * 103))
    assert draws.mean() == pytest.approx(61 / 102, abs=4 * sd / math.sqrt(20000))


def test_nb_update_with_empty_signal():
    y = np.array([0, 1, 0, 2, 0, 1])
    x = np.zeros(6, dtype=np.int8)
    z = np.ones(6, dtype=np.int8)
    rep = ReplicateParams.zinb(0.7, 0.6, 1.0, 4.0, 1.0)
    rng = np.random.default_rng(4)
    for _ in range(200):
        rep = update_emission_params(y, x, z, rep, PriorConfig(), rng)
        assert rep.sig_mean > rep.bg_mean and 0 < rep.pi <= 1


@given(st.floats(0.5, 50), st.floats(0.1, 10), st.floats(0.0, 5.0), st.floats(0.1, 5.0))
def test_truncated_gamma_in_range(shape, rate, lo, width):
    rng = np.random.default_rng(0)
    hi = lo + width
    for _ in range(5):
        x = truncated_gamma(shape, rate, lo, hi, rng)
        assert lo <= x <= hi


def test_truncated_gamma_distribution():
    rng = np.random.default_rng(5)
    lo, hi = 2.0, 3.0
    draws = np.array([truncated_gamma(3.0, 1.0, lo, hi, rng) for _ in range(20000)])
    g = stats.gamma(3.0)
    cdf = lambda v: (g.cdf(v) - g.cdf(lo)) / (g.cdf(hi) - g.cdf(lo))  # noqa: E731
    assert stats.kstest(draws, cdf).pvalue > 1e-3


def test_constrained_symmetric_point():
    c = ConstrainedChainParams(1.0, [0.5])
    assert c.chain(0).q1 == pytest.approx(0.5)
    assert c.stationary == pytest.approx(0.5)
    with pytest.raises(InvalidParameterError):
        ConstrainedChainParams(3.0, [0.5])


def test_constrained_update_respects_feasibility():
    rng = np.random.default_rng(6)
    counts = [TransitionCounts(80, 20, 20, 900, 0, 1), TransitionCounts(90, 10, 10, 900, 0, 1)]
    cur = ConstrainedChainParams(5.0, [0.02, 0.01])
    for _ in range(500):
        cur = update_constrained_params(counts, PriorConfig(), rng, cur)
        assert all(cur.s * q < 1 for q in cur.q0)


# -- exact oracles -------------------------------------------------------------


def test_exact_single_bin_is_bayes_rule():
    rep = ReplicateParams.zinb(0.6, 0.4, 1.5, 3.0, 1.0)
    q = ChainParams(0.05, 0.8)
    y = np.array([[2]])
    p1 = q.stationary
    l1 = math.exp(rep.signal.logpmf(2))
    l0 = math.exp(rep.background.logpmf(2))
    assert exact_posterior(y, [rep], q)[0] == pytest.approx(p1 * l1 / (p1 * l1 + (1 - p1) * l0), rel=1e-12)


def test_exact_symmetric_emissions_give_stationary():
    q = ChainParams(0.05, 0.8)
    post = exact_posterior(np.full((7, 1), 2), equal_pmf_reps(), q)
    np.testing.assert_allclose(post, q.stationary, atol=1e-12)


def test_exact_rejects_large_m():
    with pytest.raises(ValueError):
        exact_posterior(np.zeros((15, 1), dtype=int), equal_pmf_reps(), ChainParams(0.1, 0.5))


def random_instance(rng, m, family, reps=1):
    q = ChainParams(*rng.uniform(0.05, 0.95, 2))
    out = []
    for _ in range(reps):
        pi = rng.uniform(0.3, 1.0)
        bg = rng.uniform(0.2, 1.5)
        sig = bg + rng.uniform(0.5, 5.0)
        if family == "zip":
            out.append(ReplicateParams.zip(pi, bg, sig))
        else:
            out.append(ReplicateParams.zinb(pi, bg, rng.uniform(0.3, 5), sig, rng.uniform(0.3, 5)))
    x = sample_chain(m, q, rng).states
    y = np.column_stack([np.where(x == 1, r.signal.sample(m, rng), r.background.sample(m, rng)) for r in out])
    return y, out, q


@pytest.mark.parametrize("family", ["zip", "zinb"])
def test_exact_matches_forward_backward(family):
    rng = np.random.default_rng(7)
    for _ in range(10):
        y, reps, q = random_instance(rng, 10, family, reps=2)
        assert np.max(np.abs(exact_posterior(y, reps, q) - forward_backward(y, reps, q))) < 1e-10


def test_gibbs_matches_exact_m8():
    rng = np.random.default_rng(8)
    y, reps, q = random_instance(rng, 8, "zinb")
    marg = gibbs_marginals(y, reps, q, 100_000, rng, burn=1000)
    assert np.max(np.abs(marg - exact_posterior(y, reps, q))) < 0.02


def test_gibbs_leaves_joint_posterior_invariant():
    rng = np.random.default_rng(9)
    y, reps, q = random_instance(rng, 4, "zip")
    _, freq = gibbs_marginals(y, reps, q, 200_000, rng, burn=1000, track_patterns=True)
    # exact joint over the 16 patterns, first bin most significant
    codes = np.arange(16)
    states = (codes[:, None] >> np.arange(3, -1, -1)) & 1
    logj = np.array([
        math.log(q.stationary if s[0] else 1 - q.stationary)
        + sum(math.log(q.transition_matrix()[s[k], s[k + 1]]) for k in range(3))
        + sum((reps[0].signal if s[k] else reps[0].background).logpmf(int(y[k, 0])) for k in range(4))
        for s in states
    ])
    p = np.exp(logj - logj.max())
    p /= p.sum()
    n = 199_000
    keep = p * n >= 5
    obs = np.append(freq[keep] * n, freq[~keep].sum() * n)
    exp = np.append(p[keep] * n, p[~keep].sum() * n)
    # successive sweeps are correlated, so deflate the statistic by a generous factor
    stat = ((obs - exp) ** 2 / exp).sum() / 10
    assert stats.chi2.sf(stat, len(obs) - 1) > 1e-3


# -- full sampler --------------------------------------------------------------


def test_sampler_fixed_params_matches_exact():
    rng = np.random.default_rng(10)
    y, reps, q = random_instance(rng, 8, "zip")
    cfg = SamplerConfig(50_000, 1000, seed=3, fix_params=True)
    post = run_sampler(CountMatrix.from_array(y), family="zip", cfg=cfg, init=EmissionParams("zip", [reps]), init_chain=[q])
    assert np.max(np.abs(post.prob_enriched[:, 0] - exact_posterior(y, reps, q))) < 0.02


def test_sampler_no_information_gives_stationary():
    q = ChainParams(0.1, 0.8)
    cfg = SamplerConfig(20_000, 1000, seed=4, fix_params=True)
    post = run_sampler(CountMatrix.from_array(np.full((50, 1), 2)), family="zip", cfg=cfg,
                       init=EmissionParams("zip", [equal_pmf_reps()]), init_chain=[q])
    assert np.max(np.abs(post.prob_enriched[:, 0] - q.stationary)) < 0.05
    assert abs(post.prob_enriched.mean() - q.stationary) < 0.01


def test_sampler_recovers_poisson_scenario():
    rng = np.random.default_rng(11)
    q = ChainParams(0.02, 0.98)
    x = sample_chain(10_000, q, rng).states
    y = np.where(x == 1, rng.poisson(1.5, 10_000), rng.poisson(0.5, 10_000))
    post = run_sampler(CountMatrix.from_array(y), family="zip", cfg=SamplerConfig(3000, 1000, seed=1))
    # truth sits on the pi = 1 boundary, so pi and the kernel mean trade off;
    # the background mean pi * lambda0 is what the data identify
    bg = post.column("c1.y0.pi") * post.column("c1.y0.bg_mean")
    assert bg.mean() == pytest.approx(0.5, rel=0.05)
    assert post.mean("c1.y0.sig_mean") == pytest.approx(1.5, rel=0.05)
    assert post.mean("c1.q1") == pytest.approx(0.98, rel=0.05)


def _two_rep_data(seed=12, m=3000):
    rng = np.random.default_rng(seed)
    x = sample_chain(m, ChainParams(0.01, 0.9), rng).states
    cols = [np.where(x == 1, rng.poisson(mu1, m), rng.poisson(mu0, m) * (rng.random(m) < 0.7)) for mu0, mu1 in ((0.4, 3.0), (0.6, 5.0))]
    return np.column_stack(cols)


def test_replicate_permutation_invariance():
    y = _two_rep_data()
    cfg = SamplerConfig(400, 100, seed=5)
    a = run_sampler(CountMatrix.from_array(y, ["a", "b"]), cfg=cfg)
    b = run_sampler(CountMatrix.from_array(y[:, ::-1], ["b", "a"]), cfg=cfg)
    assert np.array_equal(a.prob_enriched, b.prob_enriched)
    np.testing.assert_array_equal(a.column("c1.a.sig_mean"), b.column("c1.a.sig_mean"))


def test_sampler_deterministic_given_seed():
    y = _two_rep_data(13, 1000)
    cfg = SamplerConfig(300, 100, seed=9)
    a = run_sampler(CountMatrix.from_array(y), cfg=cfg)
    b = run_sampler(CountMatrix.from_array(y), cfg=cfg)
    assert np.array_equal(a.prob_enriched, b.prob_enriched)
    assert np.array_equal(a.draws, b.draws)


@pytest.mark.parametrize("family", ["zip", "zinb"])
def test_every_draw_satisfies_invariants(family):
    y = _two_rep_data(14, 2000)
    post = run_sampler(CountMatrix.from_array(y), family=family, cfg=SamplerConfig(600, 100, seed=2))
    assert np.all((post.prob_enriched >= 0) & (post.prob_enriched <= 1))
    for r in ("y0", "y1"):
        assert np.all(post.column(f"c1.{r}.sig_mean") > post.column(f"c1.{r}.bg_mean"))
        pi = post.column(f"c1.{r}.pi")
        assert np.all((pi > 0) & (pi <= 1))
    for name in ("c1.q0", "c1.q1", "c1.p1"):
        v = post.column(name)
        assert np.all((v > 0) & (v < 1))


def test_sampler_design_mismatch():
    data = CountMatrix.from_array(np.zeros((10, 2), dtype=int), ["a", "b"])
    design = ExperimentDesign([Condition("c1", ["a", "zz"])])
    with pytest.raises(DimensionError):
        run_sampler(data, design, cfg=SamplerConfig(10, 5))


def test_sampler_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(10, 10)
    with pytest.raises(ValueError):
        SamplerConfig(10, 5, thinning=0)
    with pytest.raises(InvalidParameterError):
        PriorConfig(pi_a=0.0)


def test_prior_file(tmp_path):
    path = tmp_path / "priors.ini"
    path.write_text("[priors]\npi_a = 2\nstep = 0.3\n")
    pr = PriorConfig.from_file(path)
    assert pr.pi_a == 2.0 and pr.step == 0.3 and pr.q0_a == 1.0
    path.write_text("[priors]\nbogus = 1\n")
    with pytest.raises(ValueError):
        PriorConfig.from_file(path)


def test_constrained_sampler_shares_stationary():
    rng = np.random.default_rng(15)
    m = 4000
    cols = []
    for q1 in (0.8, 0.9):
        q = ChainParams(0.03 * (1 - q1) / 0.97, q1)
        x = sample_chain(m, q, rng).states
        cols.append(np.where(x == 1, rng.poisson(4.0, m), rng.poisson(0.4, m)))
    data = CountMatrix.from_array(np.column_stack(cols), ["a", "b"])
    design = ExperimentDesign([Condition("A", ["a"]), Condition("B", ["b"])])
    post = run_sampler(data, design, family="zip", cfg=SamplerConfig(1500, 500, seed=1, constrained=True))
    np.testing.assert_allclose(post.column("A.p1"), post.column("B.p1"), rtol=1e-12)
    assert "s" in post.param_names
