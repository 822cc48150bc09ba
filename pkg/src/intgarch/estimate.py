"""Two-stage estimation: moment estimator for k, scoring MLE for the scale
parameters.

Stage one sets k-hat = sqrt(2/pi) * mean(radius) / mean(|center|), from the
stationary identity E(delta)/E|lambda| = k / sqrt(2/pi).

Stage two maximizes the conditional log-likelihood

    l(theta) = sum_t [ -(k+1) log h_t - lam_t^2 / (2 h_t^2) - del_t / h_t ]

by Newton scoring with analytic score and Hessian. Pre-sample lags are set
to their stationary expectations (centers 0, radii k*E(h;theta), h either
E(h;theta) or 0), and because E(h;theta) moves with theta, its first and
second derivatives are carried through the recursions; the resulting score
and Hessian match finite differences of the likelihood to near machine
precision. A direct-derivative variant (no recursion through the h lags,
no pre-sample dependence) is available via recursive=False.

The recursion h_t = base_t + sum_j gamma_j h_{t-j} and the identical
recursions for dh/dtheta and d2h/dtheta2 are linear AR filters in gamma,
evaluated with scipy.signal.lfilter after folding the initial conditions
into the first w rows of the driving term.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .exceptions import ConvergenceError, DataError, ModelError, NumericalError
from .intervals import IntervalSeries
from .process import ABS_NORMAL_MEAN, InitMode, ModelOrders, ModelParams

__all__ = [
    "FitOptions",
    "FittedModel",
    "estimate_k",
    "init_theta",
    "loglik_eval",
    "score_and_hessian",
    "fit_mle",
    "asymptotic_covariance",
]

# snap-to-zero threshold for coefficients pinned at the boundary
_BOUNDARY_EPS = 1e-8
# keep the weight sum strictly inside the mean-stationary region during fitting
_STATIONARITY_MARGIN = 1e-10

MIN_OBS_PER_PARAM = 10


@dataclass(frozen=True)
class FitOptions:
    """Scoring-iteration settings.

    init_fraction and coef_budget control the starting point: mu starts at
    init_fraction times the implied mean scale, and each coefficient group
    starts with its stationarity-weight budget equal to coef_budget.
    """

    max_iterations: int = 200
    gradient_tolerance: float = 1e-6
    step_halving_limit: int = 30
    init_fraction: float = 0.4
    coef_budget: float = 0.2
    init_mode: InitMode = InitMode.MEAN_H
    recursive_gradient: bool = True

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ModelError("max_iterations must be >= 1")
        if not 0 < self.init_fraction < 1:
            raise ModelError("init_fraction must be in (0, 1)")
        if not 0 < self.coef_budget < 1:
            raise ModelError("coef_budget must be in (0, 1)")


@dataclass(frozen=True)
class FittedModel:
    """Result of a two-stage fit.

    std_errors holds asymptotic standard errors keyed by parameter name;
    names in `boundary` were snapped to exactly 0 and carry no standard
    error. covariance (and hessian) are over the free scale parameters in
    `free_names` order. k comes from the moment stage and has no
    likelihood-based standard error.
    """

    params: ModelParams
    loglik: float
    converged: bool
    iterations: int
    gradient_max: float
    boundary: tuple
    free_names: tuple
    std_errors: dict
    n_obs: int
    init_mode: InitMode
    h_path: np.ndarray | None = field(default=None, repr=False)
    covariance: np.ndarray | None = field(default=None, repr=False)
    hessian: np.ndarray | None = field(default=None, repr=False)
    loglik_trace: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "model": self.params.to_dict(),
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "gradient_max": self.gradient_max,
            "boundary": list(self.boundary),
            "std_errors": dict(self.std_errors),
            "n_obs": self.n_obs,
            "init_mode": self.init_mode.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        try:
            params = ModelParams.from_dict(d["model"])
            return cls(
                params=params,
                loglik=float(d["loglik"]),
                converged=bool(d["converged"]),
                iterations=int(d["iterations"]),
                gradient_max=float(d["gradient_max"]),
                boundary=tuple(d["boundary"]),
                free_names=tuple(
                    n for n in params.param_names() if n not in set(d["boundary"])
                ),
                std_errors={k: float(v) for k, v in d["std_errors"].items()},
                n_obs=int(d["n_obs"]),
                init_mode=InitMode(d["init_mode"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed fit document: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "FittedModel":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid fit JSON: {exc}") from exc
        return cls.from_dict(doc)


def estimate_k(series: IntervalSeries) -> float:
    """Moment estimator of the Gamma shape k.

    k-hat = sqrt(2/pi) * mean(radii) / mean(|centers|). Raises when either
    component mean is zero, which leaves k unidentified.
    """
    if len(series) == 0:
        raise DataError("empty input")
    mean_abs_center = float(np.abs(series.centers).mean())
    mean_radius = float(series.radii.mean())
    if mean_abs_center == 0.0:
        raise DataError("degenerate centers: k not identified")
    if mean_radius == 0.0:
        raise DataError("degenerate radii: k not identified")
    return ABS_NORMAL_MEAN * mean_radius / mean_abs_center


def init_theta(
    series: IntervalSeries,
    k: float,
    orders: ModelOrders,
    options: FitOptions | None = None,
) -> ModelParams:
    """Starting parameters for the scoring iteration.

    The implied mean scale h-bar is mean(radii)/k. mu starts at
    init_fraction * h-bar; each coefficient group gets an equal split of
    its budget: sqrt(pi/2)*sum(alpha0) = coef_budget, k*sum(beta0) =
    coef_budget, sum(gamma0) = coef_budget. At the defaults the lag
    weights sum to (2/pi)*0.2 + 0.4 < 1, so the start point is always
    mean-stationary.
    """
    options = options or FitOptions()
    if len(series) == 0:
        raise DataError("empty input")
    if not k > 0:
        raise ModelError(f"k must be positive, got {k}")
    hbar = float(series.radii.mean()) / k
    if hbar <= 0:
        raise DataError("degenerate radii: cannot scale starting point")
    b = options.coef_budget
    alpha0 = (b * ABS_NORMAL_MEAN / orders.p,) * orders.p
    beta0 = (b / k / orders.q,) * orders.q
    gamma0 = (b / orders.w,) * orders.w if orders.w else ()
    return ModelParams(orders, k, options.init_fraction * hbar, alpha0, beta0, gamma0)


# ---------------------------------------------------------------------------
# likelihood internals on raw arrays


def _split_theta(theta: np.ndarray, o: ModelOrders) -> tuple:
    return (
        theta[0],
        theta[1 : 1 + o.p],
        theta[1 + o.p : 1 + o.p + o.q],
        theta[1 + o.p + o.q :],
    )


def _weight_sum_direction(k: float, o: ModelOrders) -> np.ndarray:
    """Gradient of the stationarity weight sum S(theta) in theta."""
    s = np.zeros(o.n_params)
    s[1 : 1 + o.p] = ABS_NORMAL_MEAN
    s[1 + o.p : 1 + o.p + o.q] = k
    s[1 + o.p + o.q :] = 1.0
    return s


def _weight_sum(k: float, theta: np.ndarray, o: ModelOrders) -> float:
    return float(_weight_sum_direction(k, o)[1:] @ theta[1:])


def _level_grad_hess(k: float, theta: np.ndarray, o: ModelOrders) -> tuple:
    """Stationary mean E(h) = mu/(1-S) with gradient and Hessian in theta."""
    S = _weight_sum(k, theta, o)
    if S >= 1.0:
        raise ModelError(
            f"nonstationary parameters (weight sum {S:.6g} >= 1): pre-sample "
            "expectation undefined"
        )
    mu = theta[0]
    s = _weight_sum_direction(k, o)
    e0 = np.zeros(o.n_params)
    e0[0] = 1.0
    r = 1.0 / (1.0 - S)
    level = mu * r
    grad = e0 * r + mu * s * r * r
    hess = (np.outer(e0, s) + np.outer(s, e0)) * r * r + 2.0 * mu * np.outer(s, s) * r**3
    return level, grad, hess


def _ar_recurse(source: np.ndarray, gamma: np.ndarray, init: np.ndarray) -> np.ndarray:
    """Solve y_t = source_t + sum_j gamma_j y_{t-j} for t = 1..T.

    source: (T,) or (T, d); init: pre-sample values [y_0, y_{-1}, ...],
    shaped (w,) or (w, d). Initial conditions are folded into the first w
    source rows, then the zero-state filter runs at C speed.
    """
    w = len(gamma)
    if w == 0:
        return np.array(source, dtype=float, copy=True)
    src = np.array(source, dtype=float, copy=True)
    T = src.shape[0]
    for t in range(min(w, T)):
        for lag in range(t + 1, w + 1):
            src[t] += gamma[lag - 1] * init[lag - t - 1]
    a = np.concatenate(([1.0], -gamma))
    return lfilter([1.0], a, src, axis=0)


def _h_recursion(
    k: float,
    theta: np.ndarray,
    lam: np.ndarray,
    dlt: np.ndarray,
    o: ModelOrders,
    init_mode: InitMode,
) -> tuple:
    """h path plus the extended lag arrays and pre-sample levels."""
    T = lam.shape[0]
    m = o.max_lag
    mu, alpha, beta, gamma = _split_theta(theta, o)
    level, _, _ = _level_grad_hess(k, theta, o)  # validates S < 1
    h0 = level if init_mode is InitMode.MEAN_H else 0.0

    abs_lam_ext = np.concatenate((np.zeros(m), np.abs(lam)))
    dlt_ext = np.concatenate((np.full(m, k * level), dlt))
    base = np.full(T, mu)
    for i in range(1, o.p + 1):
        base += alpha[i - 1] * abs_lam_ext[m - i : m - i + T]
    for i in range(1, o.q + 1):
        base += beta[i - 1] * dlt_ext[m - i : m - i + T]
    h = _ar_recurse(base, gamma, np.full(max(o.w, 1), h0))
    return h, abs_lam_ext, dlt_ext, h0, level


def _loglik_raw(
    k: float,
    theta: np.ndarray,
    lam: np.ndarray,
    dlt: np.ndarray,
    o: ModelOrders,
    init_mode: InitMode,
) -> tuple:
    h, *_ = _h_recursion(k, theta, lam, dlt, o, init_mode)
    if not np.all(np.isfinite(h)) or np.any(h <= 0):
        raise NumericalError("numerical overflow in h recursion")
    ll = float(np.sum(-(k + 1.0) * np.log(h) - lam**2 / (2.0 * h * h) - dlt / h))
    return ll, h


def _score_hessian_raw(
    k: float,
    theta: np.ndarray,
    lam: np.ndarray,
    dlt: np.ndarray,
    o: ModelOrders,
    init_mode: InitMode,
    recursive: bool = True,
) -> tuple:
    """Analytic score and Hessian of the conditional log-likelihood."""
    T = lam.shape[0]
    d = o.n_params
    m = o.max_lag
    _, alpha, beta, gamma = _split_theta(theta, o)
    h, abs_lam_ext, dlt_ext, h0, level = _h_recursion(k, theta, lam, dlt, o, init_mode)
    if not np.all(np.isfinite(h)) or np.any(h <= 0):
        raise NumericalError("numerical overflow in h recursion")

    # direct derivative of h_t in theta: [1, |lam| lags, del lags, h lags]
    h_ext = np.concatenate((np.full(m, h0), h))
    direct = np.zeros((T, d))
    direct[:, 0] = 1.0
    for i in range(1, o.p + 1):
        direct[:, i] = abs_lam_ext[m - i : m - i + T]
    for i in range(1, o.q + 1):
        direct[:, o.p + i] = dlt_ext[m - i : m - i + T]
    for i in range(1, o.w + 1):
        direct[:, o.p + o.q + i] = h_ext[m - i : m - i + T]

    u = -(k + 1.0) / h + lam**2 / h**3 + dlt / h**2
    v = (k + 1.0) / h**2 - 3.0 * lam**2 / h**4 - 2.0 * dlt / h**3

    if not recursive:
        grad = direct.T @ u
        hess = np.einsum("t,ti,tj->ij", v, direct, direct)
        return grad, hess

    _, level_grad, level_hess = _level_grad_hess(k, theta, o)

    # first-derivative source: direct terms plus pre-sample radius dependence
    src = direct.copy()
    for i in range(1, o.q + 1):
        rows = min(i, T)  # rows whose del_{t-i} is pre-sample
        src[:rows, :] += beta[i - 1] * k * level_grad[None, :]
    dh0 = level_grad if init_mode is InitMode.MEAN_H else np.zeros(d)
    D = _ar_recurse(src, gamma, np.tile(dh0, (max(o.w, 1), 1)))

    # second-derivative source
    D_ext = np.concatenate((np.tile(dh0, (m, 1)), D), axis=0)
    Q = np.zeros((T, d, d))
    for i in range(1, o.w + 1):
        gi = o.p + o.q + i
        Q[:, gi, :] += D_ext[m - i : m - i + T, :]
        Q[:, :, gi] += D_ext[m - i : m - i + T, :]
    k_level_grad = k * level_grad
    k_level_hess = k * level_hess
    for i in range(1, o.q + 1):
        bi = o.p + i
        rows = min(i, T)
        Q[:rows, bi, :] += k_level_grad[None, :]
        Q[:rows, :, bi] += k_level_grad[None, :]
        Q[:rows, :, :] += beta[i - 1] * k_level_hess[None, :, :]
    d2h0 = level_hess if init_mode is InitMode.MEAN_H else np.zeros((d, d))
    M = _ar_recurse(
        Q.reshape(T, d * d), gamma, np.tile(d2h0.reshape(1, d * d), (max(o.w, 1), 1))
    ).reshape(T, d, d)

    grad = D.T @ u
    hess = np.einsum("t,ti,tj->ij", v, D, D) + np.tensordot(u, M, axes=1)
    return grad, hess


# ---------------------------------------------------------------------------
# public likelihood surface


def loglik_eval(
    params: ModelParams,
    series: IntervalSeries,
    init_mode: InitMode = InitMode.MEAN_H,
) -> tuple:
    """Conditional log-likelihood and the h path it induces.

    The additive constant free of the parameters is dropped. Pre-sample
    lags use the stationary expectations, which requires the weight sum
    below 1.
    """
    if len(series) == 0:
        raise DataError("empty input")
    return _loglik_raw(
        params.k, params.theta, series.centers, series.radii, params.orders, init_mode
    )


def score_and_hessian(
    params: ModelParams,
    series: IntervalSeries,
    init_mode: InitMode = InitMode.MEAN_H,
    recursive: bool = True,
) -> tuple:
    """Score vector and Hessian matrix of the log-likelihood at params.

    With recursive=True (default) the derivatives account for the h-lag
    recursion and the theta-dependent pre-sample expectations, matching
    finite differences of loglik_eval. recursive=False keeps only the
    direct derivative terms and the outer-product Hessian.
    """
    if len(series) == 0:
        raise DataError("empty input")
    return _score_hessian_raw(
        params.k,
        params.theta,
        series.centers,
        series.radii,
        params.orders,
        init_mode,
        recursive,
    )


# ---------------------------------------------------------------------------
# scoring optimizer


def _feasible(k: float, theta: np.ndarray, o: ModelOrders) -> bool:
    if theta[0] <= 0 or np.any(theta[1:] < 0):
        return False
    return _weight_sum(k, theta, o) < 1.0 - _STATIONARITY_MARGIN


def _scoring(
    k: float,
    theta0: np.ndarray,
    lam: np.ndarray,
    dlt: np.ndarray,
    o: ModelOrders,
    free: np.ndarray,
    options: FitOptions,
) -> tuple:
    """Maximize over theta[free] from theta0. Returns
    (theta, loglik, converged, iterations, trace, grad)."""
    theta = theta0.copy()
    ll, _ = _loglik_raw(k, theta, lam, dlt, o, options.init_mode)
    trace = [ll]
    converged = False
    grad = np.full(o.n_params, np.nan)
    iterations = 0
    for iterations in range(1, options.max_iterations + 1):
        grad, hess = _score_hessian_raw(
            k, theta, lam, dlt, o, options.init_mode, options.recursive_gradient
        )
        if not np.all(np.isfinite(grad)) or not np.all(np.isfinite(hess)):
            raise NumericalError("numerical overflow in h recursion")
        gf = grad[free]
        hf = hess[np.ix_(free, free)]
        # KKT test: a coefficient at 0 with an outward-pointing score is optimal
        active = free & (theta <= _BOUNDARY_EPS)
        active[0] = False
        kkt = grad.copy()
        kkt[active & (grad < 0)] = 0.0
        if np.max(np.abs(kkt[free])) < options.gradient_tolerance:
            converged = True
            break
        # Newton direction; escalate a ridge until it points uphill
        ridge = 0.0
        direction = None
        scale = max(1.0, float(np.max(np.abs(np.diag(hf)))))
        for _ in range(60):
            try:
                direction = np.linalg.solve(
                    hf - ridge * np.eye(hf.shape[0]), -gf
                )
            except np.linalg.LinAlgError:
                direction = None
            if direction is not None and gf @ direction > 0:
                break
            ridge = max(2.0 * ridge, 1e-8 * scale)
        else:
            raise NumericalError("Hessian singular: model over-parameterized for data")
        step = np.zeros(o.n_params)
        step[free] = direction
        improved = False
        for halving in range(options.step_halving_limit + 1):
            cand = theta + step / (2.0**halving)
            # project coefficients that overshot the boundary onto it
            neg = free.copy()
            neg[0] = False
            neg &= cand < 0
            cand[neg] = 0.0
            if not _feasible(k, cand, o):
                continue
            ll_cand, _ = _loglik_raw(k, cand, lam, dlt, o, options.init_mode)
            if ll_cand >= ll and np.isfinite(ll_cand):
                accept = ll_cand > ll or not np.array_equal(cand, theta)
                if accept:
                    theta, ll = cand, ll_cand
                    trace.append(ll)
                    improved = True
                break
        if not improved:
            break  # no representable uphill step; report the gradient as is
    return theta, ll, converged, iterations, trace, grad


def fit_mle(
    series: IntervalSeries,
    orders: ModelOrders,
    options: FitOptions | None = None,
) -> FittedModel:
    """Two-stage fit: moment k, then scoring MLE for the scale parameters.

    Coefficients driven to the boundary (within 1e-8 of 0 at convergence)
    are snapped to exactly 0 and the reduced model is refit with them
    frozen. Standard errors come from the inverse negative Hessian over
    the free parameters; boundary parameters carry none.
    """
    options = options or FitOptions()
    min_len = MIN_OBS_PER_PARAM * orders.n_params
    if len(series) < min_len:
        raise DataError(
            f"insufficient data: need at least {min_len} observations "
            f"for orders ({orders.p},{orders.q},{orders.w}), got {len(series)}"
        )
    k = estimate_k(series)
    theta = init_theta(series, k, orders, options).theta
    lam = series.centers
    dlt = series.radii
    names = np.array(
        ModelParams(orders, k, 1.0, (0.0,) * orders.p, (0.0,) * orders.q, (0.0,) * orders.w)
        .param_names()
    )

    free = np.ones(orders.n_params, dtype=bool)
    total_iter = 0
    trace_all: list = []
    while True:
        theta, ll, converged, iters, trace, grad = _scoring(
            k, theta, lam, dlt, orders, free, options
        )
        total_iter += iters
        trace_all.extend(trace)
        hit = free & (theta <= _BOUNDARY_EPS)
        hit[0] = False
        if not hit.any():
            break
        theta = theta.copy()
        theta[hit] = 0.0
        free &= ~hit

    params = ModelParams(orders, k, 1.0, (0.0,) * orders.p, (0.0,) * orders.q,
                         (0.0,) * orders.w).with_theta(theta)
    _, h_path = _loglik_raw(k, theta, lam, dlt, orders, options.init_mode)

    _, hess = _score_hessian_raw(
        k, theta, lam, dlt, orders, options.init_mode, options.recursive_gradient
    )
    hess_free = hess[np.ix_(free, free)]
    covariance = None
    std_errors: dict = {}
    neg = -hess_free
    try:
        eigvals = np.linalg.eigvalsh(neg)
    except np.linalg.LinAlgError:
        eigvals = np.array([np.nan])
    if not np.all(np.isfinite(eigvals)):
        raise NumericalError("numerical overflow in h recursion")
    eig_scale = float(np.max(np.abs(eigvals)))
    if eig_scale == 0.0 or abs(eigvals.min()) <= eig_scale * 1e-14:
        raise NumericalError("Hessian singular: model over-parameterized for data")
    if eigvals.min() > 0:
        covariance = np.linalg.inv(neg)
        se = np.sqrt(np.diag(covariance))
        std_errors = {str(n): float(s) for n, s in zip(names[free], se)}

    kkt = grad.copy()
    active = free & (theta <= _BOUNDARY_EPS)
    active[0] = False
    kkt[active & (grad < 0)] = 0.0
    gradient_max = float(np.max(np.abs(kkt[free])))

    return FittedModel(
        params=params,
        loglik=ll,
        converged=converged,
        iterations=total_iter,
        gradient_max=gradient_max,
        boundary=tuple(str(n) for n in names[~free]),
        free_names=tuple(str(n) for n in names[free]),
        std_errors=std_errors,
        n_obs=len(series),
        init_mode=options.init_mode,
        h_path=h_path,
        covariance=covariance,
        hessian=hess_free,
        loglik_trace=tuple(trace_all),
    )


def asymptotic_covariance(fitted: FittedModel) -> np.ndarray:
    """Asymptotic covariance -[Hessian]^{-1} over the free parameters.

    Requires a converged fit whose Hessian is negative definite at the
    optimum; raises otherwise.
    """
    if not fitted.converged:
        raise ConvergenceError("fit did not converge; covariance unavailable")
    if fitted.hessian is None:
        raise DataError("fit document carries no Hessian; refit on data first")
    neg = -fitted.hessian
    eigvals = np.linalg.eigvalsh(neg)
    if eigvals.min() <= 0:
        raise NumericalError("not at an interior maximum")
    return np.linalg.inv(neg)
