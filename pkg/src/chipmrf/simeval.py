"""Simulation scenarios, scoring and the MRF-versus-mixture benchmark harness."""

from __future__ import annotations

import configparser
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .calling import call_differential, fdr_call
from .chain import ChainParams, LatentChain, sample_chain
from .data import Condition, CountMatrix, ExperimentDesign
from .inference.model import Family, ReplicateParams, SamplerConfig
from .inference.sampler import run_sampler
from .mixture import FitError, fit_em

METHODS = ("mrf", "mixture")


class DegenerateTestError(ValueError):
    """Both samples have zero variance, so the t statistic is undefined."""


@dataclass
class Scenario:
    """A simulation setting: latent process, emissions and size.

    ``latent`` is ``"markov"`` (uses ``q0``/``q1``) or ``"bernoulli"`` (uses
    ``p``). All replicates share one latent profile. ``fit_family`` is the
    family both methods fit.
    """

    name: str
    latent: str
    replicates: list[ReplicateParams]
    q0: float | None = None
    q1: float | None = None
    p: float | None = None
    n_bins: int = 10000
    fit_family: Family = Family.ZINB

    def __post_init__(self):
        self.fit_family = Family(self.fit_family)
        if self.n_bins < 1:
            raise ValueError("M must be >= 1")
        if not self.replicates:
            raise ValueError("a scenario needs at least one replicate")
        if self.latent == "markov":
            ChainParams(self.q0, self.q1)
        elif self.latent == "bernoulli":
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError("bernoulli latent kind needs p in [0, 1]")
        else:
            raise ValueError(f"unknown latent kind {self.latent!r}")

    @property
    def chain(self) -> ChainParams:
        return ChainParams(self.q0, self.q1)

    @property
    def enriched_fraction(self) -> float:
        return self.chain.stationary if self.latent == "markov" else float(self.p)

    @property
    def labels(self) -> list[str]:
        return [f"rep{r + 1}" for r in range(len(self.replicates))]


def _zinb(bg, sig) -> ReplicateParams:
    # bg = (pi, mu, phi), sig = (mu, phi)
    return ReplicateParams(bg[0], bg[1], sig[0], bg[2], sig[1])


def _pois(lam0, lam1) -> ReplicateParams:
    return ReplicateParams(1.0, lam0, lam1)


_S5_LESS = [_zinb((0.634, 0.430, 2.322), (2.738, 1.548)), _zinb((0.481, 0.477, 1.246), (5.991, 0.957))]
_S5_MORE = [_zinb((0.656, 0.393, 3.014), (3.797, 1.139)), _zinb((0.486, 0.395, 1.061), (7.392, 0.955))]


def presets() -> dict[str, Scenario]:
    """The benchmark simulation settings, keyed ``scenario<k>-less`` / ``-more``."""
    z, pf = Family.ZINB, Family.ZIP
    out = [
        Scenario("scenario1-less", "markov", [_zinb((0.66, 0.33, 2.01), (1.38, 2.07))], 0.002, 0.940, fit_family=z),
        Scenario("scenario1-more", "markov", [_zinb((0.53, 0.36, 0.88), (6.95, 0.89))], 0.003, 0.866, fit_family=z),
        Scenario("scenario2-less", "markov", [_pois(0.5, 1.5)], 0.02, 0.98, fit_family=pf),
        Scenario("scenario2-more", "markov", [_pois(0.5, 9.0)], 0.02, 0.98, fit_family=pf),
        Scenario("scenario3-less", "markov", [_pois(0.5, 3.0)], 0.02, 0.5, fit_family=pf),
        Scenario("scenario3-more", "markov", [_pois(0.2, 6.0)], 0.02, 0.5, fit_family=pf),
        Scenario("scenario4-less", "markov", [_zinb((0.5, 0.5, 0.5), (3.0, 1.0))], 0.02, 0.98, fit_family=z),
        Scenario("scenario4-more", "markov", [_zinb((0.5, 0.5, 0.5), (6.0, 1.0))], 0.02, 0.98, fit_family=z),
        Scenario("scenario5-less", "markov", list(_S5_LESS), 0.003, 0.839, fit_family=z),
        Scenario("scenario5-more", "markov", list(_S5_MORE), 0.003, 0.830, fit_family=z),
        Scenario("scenario6-less", "bernoulli", list(_S5_LESS), p=0.017, fit_family=z),
        Scenario("scenario6-more", "bernoulli", list(_S5_MORE), p=0.020, fit_family=z),
    ]
    return {s.name: s for s in out}


def get_scenario(name: str) -> Scenario:
    try:
        return presets()[name]
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; choose from {', '.join(presets())}") from None


# -- generation ---------------------------------------------------------------


def sample_truth(scn: Scenario, rng: np.random.Generator) -> LatentChain:
    if scn.latent == "markov":
        return sample_chain(scn.n_bins, scn.chain, rng)
    return LatentChain((rng.random(scn.n_bins) < scn.p).astype(np.int8))


def emit(states: np.ndarray, reps: list[ReplicateParams], rng: np.random.Generator) -> np.ndarray:
    """Counts ``(M, R)`` for a shared latent profile."""
    m = len(states)
    cols = []
    for rep in reps:
        bg = rep.background.sample(m, rng)
        sig = rep.signal.sample(m, rng)
        cols.append(np.where(states == 1, sig, bg))
    return np.column_stack(cols).astype(np.int64)


def generate(scn: Scenario, rng: np.random.Generator) -> tuple[LatentChain, CountMatrix]:
    truth = sample_truth(scn, rng)
    y = emit(truth.states, scn.replicates, rng)
    return truth, CountMatrix.from_array(y, scn.labels)


@dataclass
class DifferentialData:
    truth: tuple[np.ndarray, np.ndarray]
    data: CountMatrix
    design: ExperimentDesign

    @property
    def differential(self) -> np.ndarray:
        return self.truth[0] != self.truth[1]


def differential_chain(scn: Scenario, n_diff: float) -> ChainParams:
    """Chain with the scenario's ``q1`` whose stationary probability ``p`` gives
    ``2 p (1 - p) M = n_diff`` expected differing bins between two independent conditions."""
    disc = 1.0 - 2.0 * n_diff / scn.n_bins
    if not 0.0 <= disc < 1.0:
        raise ValueError("n_diff must lie in (0, M/2]")
    p = (1.0 - math.sqrt(disc)) / 2.0
    return ChainParams(p * (1.0 - scn.q1) / (1.0 - p), scn.q1)


def generate_differential(scn: Scenario, rng: np.random.Generator, n_diff: float = 100) -> DifferentialData:
    """Two conditions with independent latent chains and the scenario's emissions.

    The chain keeps the scenario's ``q1`` and sets ``q0`` so that about
    ``n_diff`` bins differ between conditions in expectation; the data are
    thus drawn from the fitted model itself.
    """
    if scn.latent != "markov":
        raise ValueError("differential data needs a Markov scenario")
    q = differential_chain(scn, n_diff)
    x1 = sample_chain(scn.n_bins, q, rng).states
    x2 = sample_chain(scn.n_bins, q, rng).states
    y = np.hstack([emit(x1, scn.replicates, rng), emit(x2, scn.replicates, rng)])
    labels = [f"c1.{l}" for l in scn.labels] + [f"c2.{l}" for l in scn.labels]
    data = CountMatrix.from_array(y, labels)
    r = len(scn.replicates)
    design = ExperimentDesign([Condition("c1", labels[:r]), Condition("c2", labels[r:])])
    return DifferentialData((x1, x2), data, design)


# -- scoring ------------------------------------------------------------------


@dataclass(frozen=True)
class EvalResult:
    fndr: float
    realized_fdr: float
    called: int

    def __post_init__(self):
        for v in (self.fndr, self.realized_fdr):
            if not 0.0 <= v <= 1.0:
                raise ValueError("rates must lie in [0, 1]")


def score(truth, called) -> EvalResult:
    """FNDR over uncalled bins and realized FDR over called bins."""
    truth = np.asarray(getattr(truth, "states", truth)).astype(bool)
    called = np.asarray(called)
    if called.dtype != bool:
        mask = np.zeros(len(truth), dtype=bool)
        mask[called.astype(np.int64)] = True
        called = mask
    if len(called) != len(truth):
        raise ValueError("truth and call mask differ in length")
    n_called = int(called.sum())
    n_rest = len(truth) - n_called
    fndr = float((truth & ~called).sum()) / max(n_rest, 1)
    fdr = float((~truth & called).sum()) / max(n_called, 1)
    return EvalResult(fndr, fdr, n_called)


def t_test_one_sided(a, b) -> float:
    """Welch two-sample p-value for the alternative ``mean(a) < mean(b)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("each sample needs at least two values")
    if np.ptp(a) == 0 and np.ptp(b) == 0:
        raise DegenerateTestError("both samples have zero variance")
    return float(stats.ttest_ind(a, b, equal_var=False, alternative="less").pvalue)


# -- benchmark ----------------------------------------------------------------


@dataclass(frozen=True)
class BenchSettings:
    alpha: float = 0.05
    iterations: int = 3000
    burn_in: int = 1000
    em_tol: float = 1e-6
    em_max_iter: int = 1000


def rep_seeds(seed: int, rep: int) -> tuple[np.random.Generator, int]:
    """Data generator and sampler seed of one repetition, both derived from ``seed``."""
    ss = np.random.SeedSequence(seed, spawn_key=(rep,))
    data_ss, fit_ss = ss.spawn(2)
    return np.random.default_rng(data_ss), int(fit_ss.generate_state(1)[0])


def fit_posterior(method: str, data: CountMatrix, family: Family, settings: BenchSettings, seed: int,
                  design: ExperimentDesign | None = None) -> np.ndarray:
    """``(M, C)`` posterior enrichment probabilities from one method."""
    if method == "mrf":
        cfg = SamplerConfig(iterations=settings.iterations, burn_in=settings.burn_in, seed=seed)
        return run_sampler(data, design, family=family, cfg=cfg).prob_enriched
    if method == "mixture":
        return fit_em(data, design, family, settings.em_tol, settings.em_max_iter).responsibilities
    raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def _one_rep(args):
    scn, rep, methods, settings, seed = args
    rng, fit_seed = rep_seeds(seed, rep)
    truth, data = generate(scn, rng)
    out = {}
    for method in methods:
        try:
            post = fit_posterior(method, data, scn.fit_family, settings, fit_seed)[:, 0]
            out[method] = score(truth, fdr_call(post, settings.alpha).called)
        except (FitError, ValueError, FloatingPointError) as exc:
            out[method] = f"{type(exc).__name__}: {exc}"
    return out


def _one_diff_rep(args):
    scn, rep, n_diff, settings, seed = args
    rng, fit_seed = rep_seeds(seed, rep)
    sim = generate_differential(scn, rng, n_diff)
    post = fit_posterior("mrf", sim.data, scn.fit_family, settings, fit_seed, sim.design)
    return score(sim.differential, call_differential(post[:, 0], post[:, 1], settings.alpha).called)


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, jobs))  # ordered, so aggregation is deterministic


@dataclass
class BenchmarkResult:
    scenario: str
    methods: list[str]
    reps: int
    alpha: float
    fndr: dict[str, np.ndarray]
    fdr: dict[str, np.ndarray]
    called: dict[str, np.ndarray]
    failures: dict[str, list[tuple[int, str]]] = field(default_factory=dict)

    def mean_fndr(self, method: str) -> float:
        return float(np.nanmean(self.fndr[method])) if np.isfinite(self.fndr[method]).any() else math.nan

    def p_value(self, method: str, reference: str | None = None) -> float:
        """One-sided p-value that ``reference`` (default: the first method) has lower FNDR."""
        reference = reference or self.methods[0]
        a = self.fndr[reference][np.isfinite(self.fndr[reference])]
        b = self.fndr[method][np.isfinite(self.fndr[method])]
        try:
            return t_test_one_sided(a, b)
        except (DegenerateTestError, ValueError):
            return math.nan

    def rows(self) -> list[dict]:
        rows = []
        for k, m in enumerate(self.methods):
            ok = np.isfinite(self.fndr[m])
            rows.append({
                "scenario": self.scenario,
                "method": m,
                "reps": int(ok.sum()),
                "failed": len(self.failures.get(m, [])),
                "mean_fndr": self.mean_fndr(m),
                "sd_fndr": float(np.std(self.fndr[m][ok], ddof=1)) if ok.sum() > 1 else math.nan,
                "mean_fdr": float(np.mean(self.fdr[m][ok])) if ok.any() else math.nan,
                "mean_called": float(np.mean(self.called[m][ok])) if ok.any() else math.nan,
                "p_value": math.nan if k == 0 else self.p_value(m),
            })
        return rows

    def to_tsv(self) -> str:
        return format_tsv(self.rows())

    def to_text(self) -> str:
        return format_text(self.rows())


def run_benchmark(
    scn: Scenario,
    reps: int = 20,
    methods=METHODS,
    alpha: float = 0.05,
    seed: int = 0,
    settings: BenchSettings | None = None,
    workers: int = 1,
) -> BenchmarkResult:
    """Repeat generate / fit / call / score for each method.

    Failed fits are recorded per repetition and leave a NaN in the vectors.
    """
    if reps < 2:
        raise ValueError("reps must be >= 2")
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    settings = replace(settings or BenchSettings(), alpha=alpha)
    results = _map(_one_rep, [(scn, r, methods, settings, seed) for r in range(reps)], workers)
    fndr = {m: np.full(reps, np.nan) for m in methods}
    fdr = {m: np.full(reps, np.nan) for m in methods}
    called = {m: np.full(reps, np.nan) for m in methods}
    failures: dict[str, list[tuple[int, str]]] = {m: [] for m in methods}
    for r, res in enumerate(results):
        for m in methods:
            ev = res[m]
            if isinstance(ev, str):
                failures[m].append((r, ev))
                continue
            fndr[m][r], fdr[m][r], called[m][r] = ev.fndr, ev.realized_fdr, ev.called
    return BenchmarkResult(scn.name, methods, reps, alpha, fndr, fdr, called, failures)


def run_differential_benchmark(scn: Scenario, reps: int = 50, alpha: float = 0.05, seed: int = 0,
                               n_diff: int = 100, settings: BenchSettings | None = None,
                               workers: int = 1) -> list[EvalResult]:
    """Realized FDR/FNDR of differential calls from the MRF over repeated two-condition simulations."""
    settings = replace(settings or BenchSettings(), alpha=alpha)
    return _map(_one_diff_rep, [(scn, r, n_diff, settings, seed) for r in range(reps)], workers)


# -- tables and configs -------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.6g}"
    return str(v)


def format_tsv(rows: list[dict]) -> str:
    if not rows:
        return ""
    keys = list(rows[0])
    lines = ["\t".join(keys)] + ["\t".join(_fmt(r[k]) for k in keys) for r in rows]
    return "\n".join(lines) + "\n"


def format_text(rows: list[dict]) -> str:
    if not rows:
        return ""
    keys = list(rows[0])
    cells = [keys] + [[_fmt(r[k]) for k in keys] for r in rows]
    widths = [max(len(row[j]) for row in cells) for j in range(len(keys))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)).rstrip() for row in cells) + "\n"


def scenario_to_config(scn: Scenario) -> str:
    cp = configparser.ConfigParser()
    head = {"name": scn.name, "latent": scn.latent, "n_bins": str(scn.n_bins), "fit_family": scn.fit_family.value}
    for key in ("q0", "q1", "p"):
        if getattr(scn, key) is not None:
            head[key] = repr(float(getattr(scn, key)))
    cp["scenario"] = head
    for r, rep in enumerate(scn.replicates):
        cp[f"rep{r + 1}"] = {k: repr(float(v)) for k, v in rep.values().items() if v is not None}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def scenario_from_config(text: str) -> Scenario:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    if "scenario" not in cp:
        raise ValueError("scenario config needs a [scenario] section")
    head = cp["scenario"]
    reps = []
    for sec in sorted((s for s in cp.sections() if s.startswith("rep")), key=lambda s: int(s[3:])):
        d = cp[sec]
        phi = lambda k: d.getfloat(k) if k in d else None  # noqa: E731
        reps.append(ReplicateParams(d.getfloat("pi", 1.0), d.getfloat("bg_mean"), d.getfloat("sig_mean"),
                                    phi("bg_phi"), phi("sig_phi")))
    opt = lambda k: head.getfloat(k) if k in head else None  # noqa: E731
    return Scenario(
        head.get("name", "custom"),
        head.get("latent", "markov"),
        reps,
        opt("q0"),
        opt("q1"),
        opt("p"),
        head.getint("n_bins", 10000),
        Family(head.get("fit_family", "zinb")),
    )


def load_scenario(source: str) -> Scenario:
    """A preset name or the path of a scenario config file."""
    if source in presets():
        return presets()[source]
    with open(source, encoding="utf-8") as fh:
        return scenario_from_config(fh.read())
