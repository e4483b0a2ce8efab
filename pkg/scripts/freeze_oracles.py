"""Evaluate reference values at 50-digit precision and freeze them for the tests.

Run from the repository root; rewrites tests/data/oracles.json.
Nothing here imports the package, so the values are independent of it.
"""

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50


def nb_pmf(y, mu, phi):
    return mp.exp(mp.loggamma(y + phi) - mp.loggamma(phi) - mp.loggamma(y + 1)) * (mu / (mu + phi)) ** y * (phi / (mu + phi)) ** phi


def pois_pmf(y, lam):
    return lam**y * mp.exp(-lam) / mp.factorial(y)


def welch_less(a, b):
    """One-sided Welch p-value P(T < t) with Welch-Satterthwaite df."""
    a = [mp.mpf(x) for x in a]
    b = [mp.mpf(x) for x in b]
    ma, mb = mp.fsum(a) / len(a), mp.fsum(b) / len(b)
    va = mp.fsum((x - ma) ** 2 for x in a) / (len(a) - 1)
    vb = mp.fsum((x - mb) ** 2 for x in b) / (len(b) - 1)
    sa, sb = va / len(a), vb / len(b)
    t = (ma - mb) / mp.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa**2 / (len(a) - 1) + sb**2 / (len(b) - 1))
    # Student-t CDF via the regularized incomplete beta function
    x = df / (df + t**2)
    tail = mp.betainc(df / 2, mp.mpf(1) / 2, 0, x, regularized=True) / 2
    return tail if t < 0 else 1 - tail, t, df


def main():
    half = mp.mpf(1) / 2
    p, t, df = welch_less([1, 2, 3], [2, 3, 4])
    out = {
        "pois_pmf_y3_lam3": pois_pmf(3, 3),
        "nb_logpmf_y2_mu6.95_phi0.89": mp.log(nb_pmf(2, mp.mpf("6.95"), mp.mpf("0.89"))),
        "zip_zero_pi0.5_lam1": half + half * mp.exp(-1),
        "zinb_zero_pi0.5_mu0.5_phi0.5": half + half * mp.sqrt(half),
        "z_cond_pi0.5_lam0.5": half * mp.exp(-half) / (half + half * mp.exp(-half)),
        "stationary_0.002_0.940": mp.mpf("0.002") / (mp.mpf("0.002") + 1 - mp.mpf("0.940")),
        "stationary_0.003_0.866": mp.mpf("0.003") / (mp.mpf("0.003") + 1 - mp.mpf("0.866")),
        "x_cond_both_enriched_q1_0.9_q0_0.1": mp.mpf("0.81") / (mp.mpf("0.81") + mp.mpf("0.01")),
        "beta_mean_95_102": mp.mpf(95) / 102,
        "gamma_post_mean_301_100.01": mp.mpf(301) / mp.mpf("100.01"),
        "welch_p_123_vs_234": p,
        "welch_t_123_vs_234": t,
        "welch_df_123_vs_234": df,
        "fdr_example_0.99_0.96_0.80": (mp.mpf("0.01") + mp.mpf("0.04")) / 2,
        # exact log-difference between NB(mu=3, phi=1e6) and Poisson(3) at y = 0 and y = 20
        "nb_pois_logdiff_phi1e6_mu3_y0": mp.log(nb_pmf(0, 3, mp.mpf(10) ** 6) / pois_pmf(0, 3)),
        "nb_pois_logdiff_phi1e6_mu3_y20": mp.log(nb_pmf(20, 3, mp.mpf(10) ** 6) / pois_pmf(20, 3)),
        "diff_prob_0.9_0.2": mp.mpf("0.9") * mp.mpf("0.8") + mp.mpf("0.1") * mp.mpf("0.2"),
    }
    path = Path(__file__).resolve().parents[1] / "tests" / "data" / "oracles.json"
    path.write_text(json.dumps({k: mp.nstr(v, 30) for k, v in out.items()}, indent=2) + "\n")
    print(path.read_text())


if __name__ == "__main__":
    main()
