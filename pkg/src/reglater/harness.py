"""Convergence-rate experiments: growing-K sweeps, fixed-K sample-size
sweeps, and the paired comparison of the two estimators.

Every repetition draws its sample from a substream keyed by
``(seed, K, N, rep)``, so points are independently reproducible and a report
is a pure function of (config, seed).  Repetitions may run on any number of
worker threads; aggregation sorts by repetition index and sums with
``math.fsum``, so the emitted CSV is byte-identical for any worker count.
"""
from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import _kernels, rng
from .basis import SieveBasis, approx_error_moments, build_basis, h_tilde, projection_coefficients
from .condexp import BrownianTransition, TransferSpec, condexp_estimate
from .distributions import TruncatedNormal
from .errors import (BasisConstructionError, ConfigurationError, DegenerateDesignError,
                     SamplingError)
from .model import (Domain, FeatureSpec, ProcessSpec, SampleSet, simulate_conditional,
                    truncated_feature_law)
from .payoff import OracleSpec, PayoffSpec, eval_payoff, oracle_conditional
from .regress import coefficient_error, predict, regress_later_fit, regress_now_fit

CSV_HEADER = "K,N,reps,mse_mean,mse_stderr,approx_l2,h_tilde"
_POINT_ERRORS = (DegenerateDesignError, BasisConstructionError, SamplingError,
                 FloatingPointError)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs; validated on construction."""

    name: str
    process: ProcessSpec
    payoff: PayoffSpec
    feature: FeatureSpec
    sweep: str  # growing_K | fixed_K
    K_list: tuple[int, ...]
    repetitions: int
    seed: int
    N_rule: tuple[float, float] | None = None  # N = ceil(c * K**b)
    N_list: tuple[int, ...] | None = None
    eval_method: str = "quadrature"  # quadrature | fresh_sample
    eval_multiplier: int = 10
    domain_epsilon: float = 1e-4

    def __post_init__(self):
        if self.sweep not in ("growing_K", "fixed_K"):
            raise ConfigurationError(f"sweep: unknown kind {self.sweep!r}")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions: must be >= 1")
        if not self.K_list or any(k < 1 for k in self.K_list):
            raise ConfigurationError("K_list: needs at least one K >= 1")
        if self.sweep == "growing_K":
            if self.N_rule is None and (self.N_list is None or len(self.N_list) != len(self.K_list)):
                raise ConfigurationError(
                    "growing_K: needs N_rule or an N_list matching K_list")
        else:
            if len(self.K_list) != 1:
                raise ConfigurationError("fixed_K: exactly one K")
            if not self.N_list:
                raise ConfigurationError("fixed_K: needs an explicit N_list")
        if self.eval_method not in ("quadrature", "fresh_sample"):
            raise ConfigurationError(f"eval.method: unknown kind {self.eval_method!r}")
        if self.eval_multiplier < 1:
            raise ConfigurationError("eval.multiplier: must be >= 1")
        if not (0 < self.domain_epsilon < 1):
            raise ConfigurationError("domain_epsilon: must lie in (0, 1)")
        for K, N in self.points():
            if N < 2 * K + 1:
                raise ConfigurationError(f"point (K={K}, N={N}): needs N >= 2K+1")

    def points(self) -> list[tuple[int, int]]:
        """(K, N) per sweep point, in report order."""
        if self.sweep == "fixed_K":
            return [(self.K_list[0], int(n)) for n in self.N_list]
        if self.N_list is not None:
            return list(zip(self.K_list, (int(n) for n in self.N_list)))
        c, b = self.N_rule
        return [(K, int(math.ceil(c * K**b))) for K in self.K_list]


@dataclass(frozen=True)
class ReportRow:
    K: int
    N: int
    reps: int
    mse_mean: float
    mse_stderr: float
    approx_l2: float  # squared L2 approximation error (the MSE floor)
    h_tilde: float
    flagged: bool = False

    def to_json_dict(self) -> dict:
        return {"K": self.K, "N": self.N, "reps": self.reps, "mse_mean": self.mse_mean,
                "mse_stderr": self.mse_stderr, "approx_l2": self.approx_l2,
                "h_tilde": self.h_tilde, "flagged": self.flagged}


class SlopeFit(NamedTuple):
    slope: float
    intercept: float
    ci_low: float
    ci_high: float


@dataclass
class ConvergenceReport:
    rows: list[ReportRow]
    slope: float
    slope_ci: tuple[float, float]
    sweep_variable: str  # K | N
    config_echo: dict
    wall_time: float
    failures: list[str] = field(default_factory=list)
    plateau_statistic: float | None = None

    def to_csv_text(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(f"{r.K},{r.N},{r.reps},{r.mse_mean!r},{r.mse_stderr!r},"
                         f"{r.approx_l2!r},{r.h_tilde!r}")
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "rows": [r.to_json_dict() for r in self.rows],
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "sweep_variable": self.sweep_variable,
            "config": self.config_echo,
            "wall_time": self.wall_time,
            "failures": self.failures,
            "plateau_statistic": self.plateau_statistic,
            "kernel_backend": _kernels.BACKEND,
        }


def fit_loglog_slope(xs, ys) -> SlopeFit:
    """Unweighted least squares of log y on log x; CI from the slope's
    standard error (plus/minus 1.96 se)."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ok = np.isfinite(ys) & (ys > 0) & np.isfinite(xs) & (xs > 0)
    if np.any(~ok):
        warnings.warn(f"excluding {int(np.sum(~ok))} nonpositive/undefined points "
                      "from the slope fit", RuntimeWarning, stacklevel=2)
    xs, ys = xs[ok], ys[ok]
    if xs.size < 3:
        raise ConfigurationError("slope fit needs at least 3 usable points")
    lx, ly = np.log(xs), np.log(ys)
    vx = lx - lx.mean()
    sxx = float(vx @ vx)
    slope = float(vx @ (ly - ly.mean()) / sxx)
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    dof = max(xs.size - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / sxx)
    return SlopeFit(slope, intercept, slope - 1.96 * se, slope + 1.96 * se)


# ---------------------------------------------------------------------------
# shared machinery
# ---------------------------------------------------------------------------

def _mean_stderr(values: list[float]) -> tuple[float, float]:
    m = len(values)
    mean = math.fsum(values) / m
    if m < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (m - 1)
    return mean, math.sqrt(var / m)


@dataclass(frozen=True)
class _PointSetup:
    K: int
    N: int
    basis: SieveBasis
    alpha: np.ndarray
    approx_ms: float
    h: float


def _later_point_setup(config: ExperimentConfig, dist, cache: dict) -> Callable:
    def setup(K: int, N: int) -> _PointSetup:
        if K not in cache:
            basis = build_basis(dist, K)
            alpha = projection_coefficients(config.payoff, basis, dist)
            approx = approx_error_moments(config.payoff, basis, dist, coefficients=alpha)
            cache[K] = (basis, alpha, approx.mean_square)
        basis, alpha, approx_ms = cache[K]
        return _PointSetup(K, N, basis, alpha, approx_ms, h_tilde(basis, dist, N))
    return setup


def _run_points(config: ExperimentConfig, dist, dom: Domain, workers: int,
                sweep_variable: str) -> ConvergenceReport:
    start = time.perf_counter()
    setup = _later_point_setup(config, dist, {})
    setups = [setup(K, N) for K, N in config.points()]

    def one_rep(pt: _PointSetup, rep: int) -> float:
        sample_seed = rng.derive_seed(config.seed, pt.K, pt.N, rep)
        sample = simulate_conditional(config.process, config.feature, dom, pt.N, sample_seed)
        u = sample.feature_column()
        fit = regress_later_fit(sample.with_payoffs(eval_payoff(config.payoff, u)), pt.basis)
        if config.eval_method == "quadrature":
            return pt.approx_ms + coefficient_error(fit, pt.basis, config.payoff, dist,
                                                    true_coefficients=pt.alpha)
        eval_seed = rng.derive_seed(config.seed, pt.K, pt.N, rep, "eval")
        fresh = simulate_conditional(config.process, config.feature, dom,
                                     config.eval_multiplier * pt.N, eval_seed)
        v = fresh.feature_column()
        err = eval_payoff(config.payoff, v) - predict(pt.basis, fit.coefficients, v)
        return float(np.mean(err * err))

    tasks = [(i, rep) for i, _ in enumerate(setups) for rep in range(config.repetitions)]
    results: dict[tuple[int, int], float] = {}
    failures: list[str] = []

    def run_task(key):
        i, rep = key
        try:
            return key, one_rep(setups[i], rep), None
        except _POINT_ERRORS as exc:
            pt = setups[i]
            return key, None, f"point (K={pt.K}, N={pt.N}) rep {rep}: {exc}"

    if workers <= 1:
        outcomes = map(run_task, tasks)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_task, tasks))
    for key, value, failure in outcomes:
        if failure is None:
            results[key] = value
        else:
            failures.append(failure)

    rows = []
    for i, pt in enumerate(setups):
        vals = [results[(i, rep)] for rep in range(config.repetitions) if (i, rep) in results]
        if vals:
            mean, stderr = _mean_stderr(vals)
            rows.append(ReportRow(pt.K, pt.N, len(vals), mean, stderr, pt.approx_ms, pt.h))
        else:
            rows.append(ReportRow(pt.K, pt.N, 0, float("nan"), float("nan"),
                                  pt.approx_ms, pt.h, flagged=True))

    xs = [r.K if sweep_variable == "K" else r.N for r in rows]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            sf = fit_loglog_slope(xs, [r.mse_mean for r in rows])
            slope, ci = sf.slope, (sf.ci_low, sf.ci_high)
        except ConfigurationError:
            slope, ci = float("nan"), (float("nan"), float("nan"))

    plateau = None
    if config.sweep == "fixed_K":
        last = rows[-1]
        plateau = last.mse_mean / last.approx_l2 if last.approx_l2 > 0 else float("inf")
    return ConvergenceReport(rows, slope, ci, sweep_variable, _config_echo(config),
                             time.perf_counter() - start, failures, plateau)


def _config_echo(config: ExperimentConfig) -> dict:
    return {
        "name": config.name,
        "process": {"kind": config.process.kind, "horizon": config.process.horizon,
                    "volatility": config.process.volatility},
        "payoff": {"kind": config.payoff.kind, "strike": config.payoff.strike},
        "feature": {"kind": config.feature.kind, "eval_time": config.feature.eval_time,
                    "intermediate_time": config.feature.intermediate_time},
        "sweep": config.sweep,
        "K_list": list(config.K_list),
        "N_rule": list(config.N_rule) if config.N_rule else None,
        "N_list": list(config.N_list) if config.N_list else None,
        "repetitions": config.repetitions,
        "seed": config.seed,
        "eval_method": config.eval_method,
        "eval_multiplier": config.eval_multiplier,
        "domain_epsilon": config.domain_epsilon,
    }


def _later_law(config: ExperimentConfig) -> tuple[TruncatedNormal, Domain]:
    feat = config.feature
    if feat.kind == "pair_u_T":
        feat = FeatureSpec("terminal", feat.eval_time)
    return truncated_feature_law(config.process, feat, config.domain_epsilon)


def run_growing_K(config: ExperimentConfig, workers: int = 1) -> ConvergenceReport:
    """Sweep K with N(K) samples per repetition; MSE of the fitted payoff
    representation against the truth, floor and net attached per row."""
    if config.sweep != "growing_K":
        raise ConfigurationError("run_growing_K needs a growing_K config")
    dist, dom = _later_law(config)
    return _run_points(config, dist, dom, workers, "K")


def run_fixed_K(config: ExperimentConfig, workers: int = 1) -> ConvergenceReport:
    """Sweep N at constant K; the report carries the plateau statistic
    mse(N_max) / approx_l2."""
    if config.sweep != "fixed_K":
        raise ConfigurationError("run_fixed_K needs a fixed_K config")
    dist, dom = _later_law(config)
    return _run_points(config, dist, dom, workers, "N")


# ---------------------------------------------------------------------------
# paired Regress-Later vs Regress-Now comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairedRow:
    K: int
    N: int
    reps: int
    mse_later_mean: float
    mse_later_stderr: float
    mse_now_mean: float
    mse_now_stderr: float

    def to_json_dict(self) -> dict:
        return {"K": self.K, "N": self.N, "reps": self.reps,
                "mse_later_mean": self.mse_later_mean,
                "mse_later_stderr": self.mse_later_stderr,
                "mse_now_mean": self.mse_now_mean,
                "mse_now_stderr": self.mse_now_stderr}


@dataclass
class PairedReport:
    rows: list[PairedRow]
    slope_later: SlopeFit
    slope_now: SlopeFit
    config_echo: dict
    wall_time: float

    @property
    def rate_gap(self) -> float:
        """How much steeper (more negative) the Regress-Later N-slope is."""
        return self.slope_now.slope - self.slope_later.slope

    def to_json_dict(self) -> dict:
        return {
            "rows": [r.to_json_dict() for r in self.rows],
            "slope_later": list(self.slope_later),
            "slope_now": list(self.slope_now),
            "rate_gap": self.rate_gap,
            "config": self.config_echo,
            "wall_time": self.wall_time,
            "kernel_backend": _kernels.BACKEND,
        }


def now_vs_later_compare(config: ExperimentConfig, workers: int = 1) -> PairedReport:
    """Both estimators of the time-t conditional expectation on matched
    (K, N) points; MSEs against the closed-form truth, slopes versus N.

    Needs a payoff with a known conditional expectation under Brownian
    motion (square or identity) and a pair_u_T feature fixing t and T.
    """
    start = time.perf_counter()
    if config.process.kind != "brownian":
        raise ConfigurationError("paired comparison runs on brownian features")
    if config.payoff.kind not in ("square", "identity"):
        raise ConfigurationError("paired comparison needs a closed-form oracle payoff")
    if config.feature.kind != "pair_u_T":
        raise ConfigurationError("paired comparison needs a pair_u_T feature (fixes t and T)")
    t = config.feature.intermediate_time
    T = config.feature.eval_time
    eps = config.domain_epsilon
    proc = config.process

    feat_T = FeatureSpec("terminal", T)
    feat_t = FeatureSpec("terminal", t)
    dist_T, dom_T = truncated_feature_law(proc, feat_T, eps)
    dist_t, dom_t = truncated_feature_law(proc, feat_t, eps)
    truth_oracle = OracleSpec("closed_form")

    later_cache: dict[int, tuple] = {}
    now_cache: dict[int, tuple] = {}

    def later_setup(K):
        if K not in later_cache:
            later_cache[K] = (build_basis(dist_T, K),)
        return later_cache[K]

    def now_setup(K):
        if K not in now_cache:
            basis_t = build_basis(dist_t, K)
            xg, wg = leggauss(24)
            edges = basis_t.partition.edges
            mid = 0.5 * (edges[1:] + edges[:-1])
            half = 0.5 * (edges[1:] - edges[:-1])
            grid = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
            wq = (half[:, None] * wg[None, :]).ravel() * dist_t.density(grid)
            truth = oracle_conditional(config.payoff, proc, t, grid, truth_oracle)
            now_cache[K] = (basis_t, grid, wq, truth)
        return now_cache[K]

    points = config.points()
    for K, _ in points:  # build caches up front, workers only read them
        later_setup(K)
        now_setup(K)

    def one_rep(K: int, N: int, rep: int) -> tuple[float, float]:
        (basis_T,) = later_setup(K)
        basis_t, grid, wq, truth = now_setup(K)
        # Regress-Later: fit the payoff at T, transfer exactly to time t
        s_lat = rng.derive_seed(config.seed, "later", K, N, rep)
        samp = simulate_conditional(proc, feat_T, dom_T, N, s_lat)
        u = samp.feature_column()
        fit_lat = regress_later_fit(samp.with_payoffs(eval_payoff(config.payoff, u)), basis_T)
        spec = TransferSpec(BrownianTransition(t, T), basis_T, fit_lat.coefficients)
        mse_lat = float(np.sum(wq * (truth - condexp_estimate(spec, grid)) ** 2))
        # Regress-Now: states at t, fresh continuations to T, direct regression
        s_now = rng.derive_seed(config.seed, "now", K, N, rep)
        states = simulate_conditional(proc, feat_t, dom_t, N, s_now).feature_column()
        xi = rng.block_standard_normal(N, rng.derive_seed(config.seed, "cont", K, N, rep))
        x_now = eval_payoff(config.payoff, states + math.sqrt(T - t) * xi)
        fit_now, _ = regress_now_fit(
            _states_sample(states, x_now, s_now, dom_t), basis_t)
        mse_now = float(np.sum(wq * (truth - predict(basis_t, fit_now.coefficients, grid)) ** 2))
        return mse_lat, mse_now

    tasks = [(i, rep) for i in range(len(points)) for rep in range(config.repetitions)]

    def run_task(key):
        i, rep = key
        K, N = points[i]
        return key, one_rep(K, N, rep)

    if workers <= 1:
        outcomes = map(run_task, tasks)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_task, tasks))
    results = dict(outcomes)

    rows = []
    for i, (K, N) in enumerate(points):
        lat = [results[(i, rep)][0] for rep in range(config.repetitions)]
        now = [results[(i, rep)][1] for rep in range(config.repetitions)]
        ml, sl = _mean_stderr(lat)
        mn, sn = _mean_stderr(now)
        rows.append(PairedRow(K, N, config.repetitions, ml, sl, mn, sn))

    ns = [r.N for r in rows]
    slope_later = fit_loglog_slope(ns, [r.mse_later_mean for r in rows])
    slope_now = fit_loglog_slope(ns, [r.mse_now_mean for r in rows])
    return PairedReport(rows, slope_later, slope_now, _config_echo(config),
                        time.perf_counter() - start)


def _states_sample(states: np.ndarray, payoffs: np.ndarray, seed: int, dom: Domain) -> SampleSet:
    return SampleSet(states.reshape(-1, 1), payoffs, seed, states.size, domain_tag=dom)
