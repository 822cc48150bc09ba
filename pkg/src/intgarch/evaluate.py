"""Forecast evaluation, a scalar GARCH(1,1) baseline, and study harnesses.

Loss functions take the realized proxy v_t and forecast sigma2_t and are
computed with v squared in the numerators,

    QLIKE = mean(log sigma2 + v^2 / sigma2)
    HMSE  = mean(v^2 / sigma2 - 1)        (no outer square),

with keyword flags for the conventional variants. mz_r2 is the R^2 of the
regression of v on an intercept and sigma2.

compare() aligns per-model forecast series on dates, computes the three
metrics, and marks the winner per metric. run_backtest() is the
train/test orchestration used by the CLI: walk-forward interval-model
forecasts against a GARCH(1,1) baseline fit on scalar returns.
simulation_study() runs the estimator over the four benchmark designs and
tabulates recovery statistics.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .estimate import FitOptions, fit_mle
from .exceptions import DataError, IntGarchError, ModelError
from .forecast import rolling_forecast
from .intervals import IntervalSeries
from .process import ModelOrders, ModelParams, volatility
from .simulate import SimConfig, simulate

__all__ = [
    "EvalReport",
    "Garch11Params",
    "Garch11Fit",
    "mz_r2",
    "qlike",
    "hmse",
    "fit_garch11",
    "garch11_path",
    "garch11_forecast",
    "compare",
    "rv_proxy",
    "run_backtest",
    "BENCHMARK_DESIGNS",
    "StudyCell",
    "simulation_study",
    "render_reports",
    "reports_to_csv",
    "render_study",
    "study_to_csv",
]

_GARCH_CAP = 0.999  # persistence ceiling during optimization
_GARCH_PENALTY = 1e8
METRICS = ("r2", "qlike", "hmse")


@dataclass(frozen=True)
class EvalReport:
    """Metrics for one model at one horizon (0 = in-sample).

    wins lists the metrics on which this model beat every other model in
    its comparison group; ties win nothing.
    """

    asset: str
    model: str
    horizon: int
    r2: float
    qlike: float
    hmse: float
    n: int
    wins: tuple = ()


@dataclass(frozen=True)
class Garch11Params:
    """GARCH(1,1) baseline: sigma2_t = omega + a r_{t-1}^2 + b sigma2_{t-1}."""

    omega: float
    a: float
    b: float

    def __post_init__(self) -> None:
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise ModelError("omega must be positive")
        if self.a < 0 or self.b < 0:
            raise ModelError("a and b must be nonnegative")
        if self.a + self.b >= 1:
            raise ModelError(f"a + b = {self.a + self.b:.6g} >= 1: baseline not stationary")

    @property
    def persistence(self) -> float:
        return self.a + self.b

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.a - self.b)


@dataclass(frozen=True)
class Garch11Fit:
    """Quasi-MLE result for the baseline."""

    params: Garch11Params
    loglik: float
    converged: bool
    iterations: int
    n_obs: int
    sigma2_path: np.ndarray = field(repr=False)


# ---------------------------------------------------------------------------
# Loss functions


def _check_pair(rv, sigma2) -> tuple:
    v = np.asarray(rv, dtype=float)
    s2 = np.asarray(sigma2, dtype=float)
    if v.ndim != 1 or s2.ndim != 1 or v.shape != s2.shape:
        raise DataError(f"rv and sigma2 must be equal-length 1-d sequences, got {v.shape} and {s2.shape}")
    if v.size < 1:
        raise DataError("empty input")
    if not np.all(np.isfinite(v)) or not np.all(np.isfinite(s2)):
        raise DataError("rv and sigma2 must be finite")
    if np.any(s2 <= 0):
        raise DataError("sigma2 must be strictly positive")
    return v, s2


def mz_r2(rv, sigma2) -> float:
    """R^2 of the regression of the realized proxy on an intercept and
    the forecast. In [0, 1]; affine changes of the forecast leave it
    unchanged."""
    v, s2 = _check_pair(rv, sigma2)
    if v.size < 3:
        raise DataError("insufficient data: the regression needs at least 3 observations")
    if np.ptp(s2) == 0:
        raise DataError("R² undefined: constant forecasts")
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    if ss_tot == 0:
        raise DataError("R² undefined: constant realized values")
    x = np.column_stack((np.ones_like(s2), s2))
    coef, _, _, _ = np.linalg.lstsq(x, v, rcond=None)
    resid = v - x @ coef
    r2 = 1.0 - (resid @ resid) / ss_tot
    return float(min(1.0, max(0.0, r2)))  # guard rounding at the edges


def qlike(rv, sigma2, *, squared_proxy: bool = True) -> float:
    """mean(log sigma2 + v^2/sigma2); lower is better.

    squared_proxy=False uses v itself in the numerator (the conventional
    form when v is already a variance proxy).
    """
    v, s2 = _check_pair(rv, sigma2)
    num = v * v if squared_proxy else v
    return float(np.mean(np.log(s2) + num / s2))


def hmse(rv, sigma2, *, squared_proxy: bool = True, squared: bool = False) -> float:
    """mean(v^2/sigma2 - 1), a signed relative-bias measure; 0 is ideal.

    squared=True applies the conventional outer square; squared_proxy as
    in qlike.
    """
    v, s2 = _check_pair(rv, sigma2)
    num = v * v if squared_proxy else v
    base = num / s2 - 1.0
    if squared:
        base = base * base
    return float(np.mean(base))


# ---------------------------------------------------------------------------
# GARCH(1,1) baseline


def _garch_pieces(theta: np.ndarray, r2: np.ndarray, s2_init: float, want_hess: bool):
    """Negative log likelihood (up to the 2*pi constant), gradient, and
    optionally the Hessian, with the variance path."""
    w, a, b = theta
    t_len = r2.size
    src = np.empty(t_len)
    src[0] = s2_init
    src[1:] = w + a * r2[:-1]
    s2 = lfilter([1.0], [1.0, -b], src)
    if np.any(s2 <= 0) or not np.all(np.isfinite(s2)):
        return np.inf, np.zeros(3), None, s2

    # near-degenerate trial points overflow the 1/s2 powers; the inf
    # objective that results is rejected by step control, so the
    # warnings carry no information
    with np.errstate(over="ignore", invalid="ignore"):
        # dsigma2/dtheta via the same AR(1) filter; the path is fixed at t=1
        src_d = np.zeros((t_len, 3))
        src_d[1:, 0] = 1.0
        src_d[1:, 1] = r2[:-1]
        src_d[1:, 2] = s2[:-1]
        d = lfilter([1.0], [1.0, -b], src_d, axis=0)

        g = 0.5 * (1.0 / s2 - r2 / s2**2)
        nll = 0.5 * float(np.sum(np.log(s2) + r2 / s2))
        grad = d.T @ g

        pen = a + b - _GARCH_CAP
        if pen > 0:
            nll += _GARCH_PENALTY * pen * pen
            grad = grad + 2.0 * _GARCH_PENALTY * pen * np.array([0.0, 1.0, 1.0])

        if not want_hess:
            return nll, grad, None, s2

        src_m = np.zeros((t_len, 9))
        e_b = np.array([0.0, 0.0, 1.0])
        outer = d[:-1, :, None] * e_b[None, None, :]  # D_{t-1} e_b^T
        sym = outer + outer.transpose(0, 2, 1)
        src_m[1:] = sym.reshape(t_len - 1, 9)
        m = lfilter([1.0], [1.0, -b], src_m, axis=0).reshape(t_len, 3, 3)

        q = 0.5 * (-1.0 / s2**2 + 2.0 * r2 / s2**3)
        hess = np.einsum("t,ti,tj->ij", q, d, d) + np.tensordot(g, m, axes=1)
        if pen > 0:
            u = np.array([0.0, 1.0, 1.0])
            hess = hess + 2.0 * _GARCH_PENALTY * np.outer(u, u)
        return nll, grad, hess, s2


def garch11_path(params: Garch11Params, returns, s2_init: float | None = None) -> np.ndarray:
    """Conditional variance path under the baseline recursion, started at
    the sample variance unless s2_init is given."""
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise DataError("insufficient data: need at least 2 returns")
    if s2_init is None:
        s2_init = float(np.var(r))
    if s2_init <= 0:
        raise DataError("degenerate returns: zero variance")
    src = np.empty(r.size)
    src[0] = s2_init
    src[1:] = params.omega + params.a * r[:-1] ** 2
    return lfilter([1.0], [1.0, -params.b], src)


def garch11_forecast(
    params: Garch11Params, returns, horizon: int, sigma2_path: np.ndarray | None = None
) -> np.ndarray:
    """1..horizon-step variance forecasts past the last observation:
    sigma2(1) = omega + a r_T^2 + b sigma2_T, then
    sigma2(l) = omega + (a+b) sigma2(l-1)."""
    if horizon < 1:
        raise DataError("horizon must be >= 1")
    r = np.asarray(returns, dtype=float)
    if sigma2_path is None:
        sigma2_path = garch11_path(params, r)
    out = np.empty(horizon)
    out[0] = params.omega + params.a * r[-1] ** 2 + params.b * sigma2_path[-1]
    for j in range(1, horizon):
        out[j] = params.omega + (params.a + params.b) * out[j - 1]
    return out


def _garch_kkt(theta: np.ndarray, grad: np.ndarray) -> float:
    """Max-norm of the gradient with outward components at a=0 / b=0 clamped."""
    kkt = grad.copy()
    at_zero = (theta[1:] <= 1e-12) & (grad[1:] > 0)
    kkt[1:][at_zero] = 0.0
    return float(np.max(np.abs(kkt)))


def _garch_solve(r2: np.ndarray, v: float, x0: np.ndarray, omega_floor: float) -> tuple:
    """L-BFGS-B from one start, then a Newton polish with the analytic
    Hessian until the KKT gradient is tiny. Returns
    (theta, nll, grad, s2, iterations)."""

    def nll_grad(theta):
        nll, grad, _, _ = _garch_pieces(theta, r2, v, want_hess=False)
        return nll, grad

    bounds = [(omega_floor, None), (0.0, 1.0), (0.0, 1.0)]
    res = minimize(
        nll_grad,
        x0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": 500, "ftol": 1e-14, "gtol": 1e-9},
    )
    theta = np.maximum(res.x, [omega_floor, 0.0, 0.0])
    iterations = int(res.nit)

    nll, grad, hess, s2 = _garch_pieces(theta, r2, v, want_hess=True)
    for _ in range(60):
        if _garch_kkt(theta, grad) < 1e-8:
            break
        ridge = 0.0
        scale = max(float(np.max(np.abs(hess))), 1.0)
        for _try in range(40):
            try:
                step = np.linalg.solve(hess + ridge * np.eye(3), -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.isfinite(step).all():
                break
            ridge = max(2.0 * ridge, 1e-10 * scale)
        else:  # pragma: no cover - defensive
            break
        improved = False
        for _half in range(40):
            cand = theta + step
            cand[0] = max(cand[0], omega_floor)
            cand[1] = max(cand[1], 0.0)
            cand[2] = max(cand[2], 0.0)
            nll_c, grad_c, hess_c, s2_c = _garch_pieces(cand, r2, v, want_hess=True)
            if np.isfinite(nll_c) and nll_c <= nll:
                changed = not np.array_equal(cand, theta)
                theta, nll, grad, hess, s2 = cand, nll_c, grad_c, hess_c, s2_c
                improved = changed
                break
            step *= 0.5
        iterations += 1
        if not improved:
            break
    return theta, nll, grad, s2, iterations


def fit_garch11(returns) -> Garch11Fit:
    """Gaussian quasi-MLE of the baseline on scalar returns.

    The variance path starts at the sample variance. Two starting points
    are tried (a GARCH-shaped one and a near-white-noise one, whose basin
    wins on serially independent data where the likelihood is flat along
    the b ridge); each runs L-BFGS-B with the analytic gradient and then a
    Newton polish with the analytic Hessian. A fit that ends with a large
    projected gradient or at the persistence ceiling is returned with
    converged=False rather than raised.
    """
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1:
        raise DataError("returns must be a 1-d sequence")
    if r.size < 50:
        raise DataError(f"insufficient data: need at least 50 observations, got {r.size}")
    if not np.all(np.isfinite(r)):
        raise DataError("returns must be finite")
    v = float(np.var(r))
    if v <= 0:
        raise DataError("degenerate returns: zero variance")
    r2 = r * r
    omega_floor = 1e-12 * max(v, 1e-12)

    starts = (np.array([0.05 * v, 0.08, 0.88]), np.array([0.95 * v, 0.05, 0.0]))
    best = None
    iterations = 0
    for x0 in starts:
        sol = _garch_solve(r2, v, x0, omega_floor)
        iterations += sol[4]
        if best is None:
            best = sol
            continue
        # keep the clearly better optimum; on a tie prefer low persistence
        if sol[1] < best[1] - 1e-9 * (1.0 + abs(best[1])):
            best = sol
        elif sol[1] <= best[1] + 1e-9 * (1.0 + abs(best[1])):
            if sol[0][1] + sol[0][2] < best[0][1] + best[0][2]:
                best = sol
    theta, nll, grad, s2, _ = best

    at_cap = theta[1] + theta[2] >= _GARCH_CAP
    converged = _garch_kkt(theta, grad) < 1e-6 and not at_cap

    w, a, b = theta
    if a + b >= 1.0 - 1e-9:  # keep the params type constructible
        shrink = (1.0 - 1e-9) / (a + b)
        a, b = a * shrink, b * shrink
        converged = False
    params = Garch11Params(omega=float(max(w, 1e-300)), a=float(a), b=float(b))
    loglik = -(nll + 0.5 * r.size * math.log(2.0 * math.pi))
    return Garch11Fit(
        params=params,
        loglik=float(loglik),
        converged=converged,
        iterations=iterations,
        n_obs=int(r.size),
        sigma2_path=s2,
    )


# ---------------------------------------------------------------------------
# Comparison harness


def compare(forecasts: Mapping, rv, asset: str = "", *, hmse_squared: bool = False) -> list:
    """Score per-model forecast series against a realized proxy.

    Parameters
    ----------
    forecasts : mapping
        model name -> {horizon -> (dates, sigma2 sequence)}. Horizon 0
        denotes the in-sample fitted path. Dates may be any hashable
        labels (calendar dates, integer indexes) but must agree across
        models at each horizon.
    rv : (dates, values) pair
        Master realized series the forecast dates are looked up in.
    asset : str
        Label copied into the reports.

    Returns one EvalReport per model x horizon, winners marked per metric
    (higher R2 wins; lower QLIKE wins; HMSE closest to zero wins); ties
    win nothing.
    """
    rv_dates, rv_values = rv
    rv_values = np.asarray(rv_values, dtype=float)
    if len(rv_dates) != rv_values.size:
        raise DataError("rv dates and values differ in length")
    rv_map = {}
    for d_key, val in zip(rv_dates, rv_values):
        if d_key in rv_map:
            raise DataError(f"duplicate realized-variance date {d_key}")
        rv_map[d_key] = val

    horizons = sorted({h for per_model in forecasts.values() for h in per_model})
    reports: list = []
    for h in horizons:
        names = sorted(m for m, per_model in forecasts.items() if h in per_model)
        ref_name = names[0]
        ref_dates = tuple(forecasts[ref_name][h][0])
        per_metric: dict = {m: [] for m in METRICS}
        rows: list = []
        for name in names:
            dates, s2 = forecasts[name][h]
            dates = tuple(dates)
            if dates != ref_dates:
                for d_a, d_b in zip(dates, ref_dates):
                    if d_a != d_b:
                        raise DataError(
                            f"horizon {h}: forecast dates differ between "
                            f"{ref_name} and {name} at {d_b} vs {d_a}"
                        )
                raise DataError(
                    f"horizon {h}: {name} has {len(dates)} forecasts, "
                    f"{ref_name} has {len(ref_dates)}"
                )
            missing = [d_key for d_key in dates if d_key not in rv_map]
            if missing:
                raise DataError(f"no realized variance for {missing[0]}")
            v = np.array([rv_map[d_key] for d_key in dates])
            s2 = np.asarray(s2, dtype=float)
            row = {
                "model": name,
                "n": int(v.size),
                "r2": mz_r2(v, s2),
                "qlike": qlike(v, s2),
                "hmse": hmse(v, s2, squared=hmse_squared),
            }
            rows.append(row)
            per_metric["r2"].append(-row["r2"])  # negate: min wins below
            per_metric["qlike"].append(row["qlike"])
            per_metric["hmse"].append(abs(row["hmse"]))
        winners: dict = {}
        for metric, scores in per_metric.items():
            order = np.argsort(scores)
            if len(scores) > 1 and scores[order[0]] < scores[order[1]]:
                winners[metric] = rows[order[0]]["model"]
        for row in rows:
            wins = tuple(m for m in METRICS if winners.get(m) == row["model"])
            reports.append(
                EvalReport(
                    asset=asset,
                    model=row["model"],
                    horizon=h,
                    r2=row["r2"],
                    qlike=row["qlike"],
                    hmse=row["hmse"],
                    n=row["n"],
                    wins=wins,
                )
            )
    return reports


def rv_proxy(h, k: float, noise_sd: float = 0.2, seed=None) -> np.ndarray:
    """Noisy realized-variance proxy for simulated worlds.

    True volatility (1 + k/3) h^2 times mean-one lognormal noise with the
    given relative standard deviation. noise_sd=0 returns the truth.
    """
    h = np.asarray(h, dtype=float)
    if noise_sd < 0:
        raise DataError("noise_sd must be >= 0")
    sigma2 = (1.0 + k / 3.0) * h * h
    if noise_sd == 0:
        return sigma2
    s = math.sqrt(math.log1p(noise_sd * noise_sd))
    rng = np.random.default_rng(seed)
    noise = rng.lognormal(mean=-0.5 * s * s, sigma=s, size=h.shape)
    return sigma2 * noise


def run_backtest(
    series: IntervalSeries,
    rv,
    orders: ModelOrders | None = None,
    train_size: int | None = None,
    horizons: Sequence[int] = (1, 2, 5),
    refit_every: int = 1,
    options: FitOptions | None = None,
    scalar_returns=None,
    include_insample: bool = False,
    hmse_squared: bool = False,
    asset: str = "",
) -> tuple:
    """Walk-forward comparison of the interval model against GARCH(1,1).

    rv must align 1:1 with series (entry t is the realized proxy for
    period t). scalar_returns feeds the baseline; interval centers are the
    fallback when no closing returns exist. Both models forecast from the
    same origins: the interval model refits on the schedule, and the
    baseline refits at the same origins on the same growing sample.

    Returns (reports, info) where info records skipped refits and the
    baseline's convergence flags.
    """
    orders = orders or ModelOrders(1, 1, 1)
    n = len(series)
    rv_arr = np.asarray(rv, dtype=float)
    if rv_arr.shape != (n,):
        raise DataError(f"rv must have one entry per observation ({n}), got {rv_arr.shape}")
    if train_size is None or not 0 < train_size < n:
        raise DataError("train_size must split the series: 0 < train_size < length")
    horizons = sorted(set(int(h) for h in horizons))
    if not horizons or horizons[0] < 1:
        raise DataError("horizons must be integers >= 1")
    for h in horizons:
        if n - train_size - h + 1 < 3:
            raise DataError(
                f"horizon {h}: only {max(0, n - train_size - h + 1)} evaluable "
                "forecasts; need at least 3"
            )
    returns = np.asarray(
        series.centers if scalar_returns is None else scalar_returns, dtype=float
    )
    if returns.shape != (n,):
        raise DataError(f"scalar_returns must have length {n}, got {returns.shape}")
    labels = list(series.dates) if series.dates is not None else list(range(n))

    results, skipped = rolling_forecast(
        series, orders, horizons, train_size, refit_every=refit_every, options=options
    )
    if not results:
        raise DataError("all refits failed; nothing to evaluate")

    garch_failures: list = []
    garch_fit: Garch11Fit | None = None
    garch_fc: dict = {}
    for res in results:
        t = res.origin_index
        scheduled = (t - (train_size - 1)) % refit_every == 0
        if scheduled or garch_fit is None:
            try:
                garch_fit = fit_garch11(returns[: t + 1])
            except IntGarchError as exc:
                if garch_fit is None:
                    raise DataError(f"baseline fit failed on the training window: {exc}") from exc
                garch_failures.append((t, str(exc)))
        path = garch11_path(garch_fit.params, returns[: t + 1])
        garch_fc[t] = garch11_forecast(garch_fit.params, returns[: t + 1], horizons[-1], path)

    forecasts: dict = {"intgarch": {}, "garch11": {}}
    for h in horizons:
        dates_h, int_s2, g_s2 = [], [], []
        for res in results:
            t = res.origin_index
            if t + h >= n:
                continue
            dates_h.append(labels[t + h])
            int_s2.append(res.sigma2[h - 1])
            g_s2.append(garch_fc[t][h - 1])
        forecasts["intgarch"][h] = (dates_h, int_s2)
        forecasts["garch11"][h] = (dates_h, g_s2)

    info: dict = {
        "skipped_refits": skipped,
        "garch_failed_refits": garch_failures,
        "garch_converged": None if garch_fit is None else garch_fit.converged,
    }
    if include_insample:
        full = fit_mle(series, orders, options)
        g_full = fit_garch11(returns)
        forecasts["intgarch"][0] = (labels, volatility(full.params, full.h_path))
        forecasts["garch11"][0] = (labels, g_full.sigma2_path)
        info["insample_converged"] = (full.converged, g_full.converged)

    reports = compare(forecasts, (labels, rv_arr), asset=asset, hmse_squared=hmse_squared)
    return reports, info


# ---------------------------------------------------------------------------
# Benchmark simulation study

BENCHMARK_DESIGNS: dict = {
    "I": ModelParams.first_order(k=1.8147, mu=0.0906, alpha1=0.0318, beta1=0.374, gamma1=0.1265),
    "II": ModelParams.first_order(k=1.2134, mu=0.071, alpha1=0.1833, beta1=0.2334, gamma1=0.1732),
    "III": ModelParams.first_order(k=1.5139, mu=0.074, alpha1=0.037, beta1=0.3436),
    "IV": ModelParams.first_order(k=1.3632, mu=0.0584, alpha1=0.1927, beta1=0.322),
}


@dataclass(frozen=True)
class StudyCell:
    """Recovery statistics for one parameter of one design."""

    design: str
    param: str
    true: float
    mean_est: float
    mae: float
    empirical_se: float
    mean_model_se: float | None
    n_fits: int
    n_converged: int


def _study_rep(args) -> tuple:
    """One replication: simulate, fit, return estimates and model SEs."""
    name, params_dict, length, seq = args
    params = ModelParams.from_dict(params_dict)
    series, _ = simulate(SimConfig(params=params, length=length, seed=seq))
    fitted = fit_mle(series, params.orders)
    est = np.concatenate(([fitted.params.k], fitted.params.theta))
    names = fitted.params.param_names()
    ses = np.full(1 + len(names), np.nan)
    for i, pname in enumerate(names):
        if pname in fitted.std_errors:
            ses[1 + i] = fitted.std_errors[pname]
    return name, est, ses, fitted.converged


def simulation_study(
    designs: Mapping | None = None,
    replications: int = 100,
    length: int = 1000,
    seed: int = 0,
    jobs: int = 1,
) -> list:
    """Estimator recovery study over the benchmark designs.

    Each replication simulates a fresh path (its own spawned substream)
    and refits the generating orders. Cells aggregate every replication
    whose fit completed, converged or not; the moment estimator of k has
    no model-based SE, so its mean_model_se is None.
    """
    designs = dict(designs) if designs is not None else dict(BENCHMARK_DESIGNS)
    if replications < 2:
        raise DataError("replications must be >= 2")
    if length < 100:
        raise DataError("length must be >= 100")
    root = np.random.SeedSequence(seed)
    tasks: list = []
    for dseq, (name, params) in zip(root.spawn(len(designs)), designs.items()):
        if not isinstance(params, ModelParams):
            raise DataError(f"design {name!r} is not a ModelParams")
        for child in dseq.spawn(replications):
            tasks.append((name, params.to_dict(), length, child))

    if jobs > 1:
        chunk = max(1, len(tasks) // (4 * jobs))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_study_rep, tasks, chunksize=chunk))
    else:
        outcomes = [_study_rep(t) for t in tasks]

    cells: list = []
    for name, params in designs.items():
        ests = np.array([est for nm, est, _, _ in outcomes if nm == name])
        ses = np.array([se for nm, _, se, _ in outcomes if nm == name])
        n_conv = sum(1 for nm, _, _, conv in outcomes if nm == name and conv)
        truth = np.concatenate(([params.k], params.theta))
        pnames = ["k"] + params.param_names()
        for i, pname in enumerate(pnames):
            col_se = ses[:, i]
            has_se = np.isfinite(col_se)
            cells.append(
                StudyCell(
                    design=name,
                    param=pname,
                    true=float(truth[i]),
                    mean_est=float(ests[:, i].mean()),
                    mae=float(np.mean(np.abs(ests[:, i] - truth[i]))),
                    empirical_se=float(ests[:, i].std(ddof=1)),
                    mean_model_se=float(col_se[has_se].mean()) if has_se.any() else None,
                    n_fits=int(ests.shape[0]),
                    n_converged=int(n_conv),
                )
            )
    return cells


# ---------------------------------------------------------------------------
# Rendering


def render_reports(reports: Sequence[EvalReport]) -> str:
    """Aligned text table, winning metrics starred."""
    header = ("asset", "model", "horizon", "n", "r2", "qlike", "hmse")
    rows = [header]
    for r in sorted(reports, key=lambda r: (r.asset, r.horizon, r.model)):
        rows.append(
            (
                r.asset or "-",
                r.model,
                str(r.horizon),
                str(r.n),
                f"{r.r2:.4f}" + ("*" if "r2" in r.wins else ""),
                f"{r.qlike:.4f}" + ("*" if "qlike" in r.wins else ""),
                f"{r.hmse:.4f}" + ("*" if "hmse" in r.wins else ""),
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in rows)


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    """Long-format CSV: one row per asset x model x horizon x metric."""
    lines = ["asset,model,horizon,metric,value,n,winner"]
    for r in sorted(reports, key=lambda r: (r.asset, r.horizon, r.model)):
        for metric in METRICS:
            value = getattr(r, metric)
            win = 1 if metric in r.wins else 0
            lines.append(f"{r.asset},{r.model},{r.horizon},{metric},{value!r},{r.n},{win}")
    return "\n".join(lines) + "\n"


def render_study(cells: Sequence[StudyCell]) -> str:
    """Aligned text table of the simulation study."""
    header = ("design", "param", "true", "mean_est", "mae", "emp_se", "model_se", "conv")
    rows = [header]
    for c in cells:
        rows.append(
            (
                c.design,
                c.param,
                f"{c.true:.4f}",
                f"{c.mean_est:.4f}",
                f"{c.mae:.4f}",
                f"{c.empirical_se:.4f}",
                "-" if c.mean_model_se is None else f"{c.mean_model_se:.4f}",
                f"{c.n_converged}/{c.n_fits}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    return "\n".join("  ".join(x.ljust(w) for x, w in zip(row, widths)).rstrip() for row in rows)


def study_to_csv(cells: Sequence[StudyCell]) -> str:
    lines = ["design,param,true,mean_est,mae,empirical_se,mean_model_se,n_fits,n_converged"]
    for c in cells:
        se = "" if c.mean_model_se is None else repr(c.mean_model_se)
        lines.append(
            f"{c.design},{c.param},{c.true!r},{c.mean_est!r},{c.mae!r},"
            f"{c.empirical_se!r},{se},{c.n_fits},{c.n_converged}"
        )
    return "\n".join(lines) + "\n"
