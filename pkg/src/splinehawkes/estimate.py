"""Model fitting and scoring.

Two estimation routes coexist.  Constant and piecewise-linear background
models are fitted by direct maximum likelihood with a derivative-free
search over log-parameters.  The log-spline background model is fitted in
an empirical-Bayes fashion: for fixed hyperparameters (kernel parameters,
smoothness weight, baseline rate) the spline coefficients are obtained as
a posterior mode under a Gaussian smoothness prior via damped Newton
iterations on the banded Hessian, the evidence of the hyperparameters is
approximated by Laplace's method around that mode, and the hyperparameters
are then optimized by a simplex search on the approximate evidence.

Scores are comparable across models: maximized log-likelihood minus the
parameter count for the ML models, and maximized log-evidence minus the
hyperparameter count for the spline model.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from . import _banded
from .basis import NaturalTimeBasis, build_basis
from .core import (
    BackgroundModel,
    ConfigurationError,
    ConstantBackground,
    ConvergenceError,
    DomainError,
    EventSequence,
    ExponentialKernel,
    NumericalError,
    ObservationWindow,
    PiecewiseLinearBackground,
    SplineBackground,
    branching_ratio,
)
from .likelihood import event_excitation, _kernel_tail, log_likelihood

__all__ = [
    "DEFAULT_BASELINE_WEIGHT",
    "HyperParams",
    "SmoothnessPrior",
    "FitResult",
    "HyperOptResult",
    "log_prior",
    "map_estimate",
    "log_marginal_likelihood",
    "optimize_hyperparams",
    "fit_mle",
    "fit_bcb",
    "score",
    "default_hyperparams",
    "regular_knots",
    "fit_to_dict",
    "fit_from_dict",
]

#: Anchoring weight for the mean log-rate; large so the baseline is pinned.
DEFAULT_BASELINE_WEIGHT = 1.0e4


def _log_bound_parts(seq: EventSequence) -> dict:
    """Per-parameter boxes for the log-space searches, scaled to the data.

    Rates get twelve natural-log units of latitude around the mean event
    rate.  Triggering weights may reach e^3, far beyond any plausible
    branching ratio, so criticality can be traversed during a search.
    Decay rates are floored at 10 / window-length: slower triggering is
    not identifiable from a single window (it degenerates into a
    likelihood ridge alpha -> inf, beta -> 0 that mimics a background
    trend, which is the job of the background models instead).
    """
    length = seq.window.length
    rate0 = max(seq.n, 1) / length
    return {
        "mu": (np.log(rate0) - 12.0, np.log(rate0) + 12.0),
        "alpha": (-30.0, 3.0),
        "beta": (np.log(10.0 / length), np.log(1.0e6 * max(rate0, 10.0 / length))),
        "v": (-30.0, 30.0),
    }


def _within(x: np.ndarray, bounds) -> bool:
    lo = np.asarray([b[0] for b in bounds])
    hi = np.asarray([b[1] for b in bounds])
    return bool(np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12))


# ---------------------------------------------------------------------------
# Hyperparameters and the smoothness prior
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HyperParams:
    """Kernel parameters plus smoothness and baseline weights of the spline model."""

    kernel: ExponentialKernel
    V: float
    mu_c: float
    W: float = DEFAULT_BASELINE_WEIGHT

    def __post_init__(self):
        if not self.V > 0:
            raise DomainError("smoothness weight V must be positive")
        if not self.W > 0:
            raise DomainError("baseline weight W must be positive")
        if not self.mu_c > 0:
            raise DomainError("baseline rate mu_c must be positive")


@dataclass(frozen=True)
class SmoothnessPrior:
    """Proper Gaussian prior over spline coefficients.

    The precision is V * G^T G + (W / m^2) ones ones^T where G holds the
    natural-time derivatives of the basis functions at the event
    positions.  The derivative term alone is invariant under a constant
    shift of the coefficients, which would make the prior improper; the
    rank-one anchoring term removes that null direction and centers the
    mean coefficient on log(mu_c).  The normalizer is kept explicitly
    because evidences with different V values are compared against each
    other.
    """

    precision: np.ndarray
    mean: np.ndarray
    log_normalizer: float
    gram_banded: np.ndarray  # (4, m) banded G^T G, before scaling by V
    smoothness: float
    anchor: float  # rho = W / m^2

    @classmethod
    def build(cls, basis: NaturalTimeBasis, V: float, W: float, mu_c: float) -> "SmoothnessPrior":
        m = basis.m
        n = basis.n
        ones_w = np.ones(n)
        gram_banded = _banded.accumulate_outer(
            basis.offsets[1 : n + 1], basis.compact_derivs, ones_w, m
        )
        rho = W / m**2
        Q = V * _banded.to_dense(gram_banded) + rho
        try:
            cho = cho_factor(Q, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ConfigurationError(f"prior precision is not positive definite: {exc}") from exc
        logdet_q = 2.0 * float(np.sum(np.log(np.diag(cho[0]))))
        rhs = np.full(m, W * np.log(mu_c) / m)
        mean = cho_solve(cho, rhs)
        log_normalizer = 0.5 * m * np.log(2.0 * np.pi) - 0.5 * logdet_q
        Q.setflags(write=False)
        mean.setflags(write=False)
        return cls(
            precision=Q,
            mean=mean,
            log_normalizer=float(log_normalizer),
            gram_banded=gram_banded,
            smoothness=V,
            anchor=rho,
        )

    @classmethod
    def from_hyper(cls, basis: NaturalTimeBasis, hyper: HyperParams) -> "SmoothnessPrior":
        return cls.build(basis, hyper.V, hyper.W, hyper.mu_c)


def log_prior(coeffs: np.ndarray, prior: SmoothnessPrior) -> float:
    """Gaussian log-density of a coefficient vector under the smoothness prior."""
    d = np.asarray(coeffs, dtype=float) - prior.mean
    if d.size != prior.mean.size:
        raise DomainError("coefficient vector length does not match the prior")
    quad = float(d @ prior.precision @ d)
    return -0.5 * quad - prior.log_normalizer


# ---------------------------------------------------------------------------
# Posterior problem: log-likelihood + log-prior in the spline coefficients
# ---------------------------------------------------------------------------


class _PosteriorProblem:
    """Caches everything that is fixed while the coefficients vary."""

    def __init__(self, seq: EventSequence, hyper: HyperParams, basis: NaturalTimeBasis,
                 prior: SmoothnessPrior | None = None):
        if basis.n != seq.n:
            raise DomainError("basis was built for a different number of events")
        self.seq = seq
        self.basis = basis
        self.prior = prior if prior is not None else SmoothnessPrior.from_hyper(basis, hyper)
        self.excitation = event_excitation(seq, hyper.kernel)
        self.tail = _kernel_tail(seq, hyper.kernel)
        self.gaps = seq.gaps()
        rows = seq.n + 1
        self.offsets = basis.offsets[:rows]
        self.vals = basis.compact_values[:rows]
        self.idx = self.offsets[:, None] + np.arange(4)[None, :]
        self.m = basis.m

    def _mu(self, a: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(np.sum(self.vals * a[self.idx], axis=1))

    def loglik(self, a: np.ndarray) -> float:
        """Log-likelihood alone; -inf when the rates overflow."""
        mu = self._mu(a)
        if not np.all(np.isfinite(mu)):
            return -np.inf
        lam = mu[1:] + self.excitation
        if np.any(lam <= 0.0):
            return -np.inf
        return float(np.sum(np.log(lam)) - np.dot(mu, self.gaps) - self.tail)

    def value(self, a: np.ndarray) -> float:
        lp = self.loglik(a)
        if not np.isfinite(lp):
            return -np.inf
        return lp + log_prior(a, self.prior)

    def value_grad(self, a: np.ndarray):
        mu = self._mu(a)
        if not np.all(np.isfinite(mu)):
            return -np.inf, None
        lam = mu[1:] + self.excitation
        if np.any(lam <= 0.0):
            return -np.inf, None
        ratio = mu[1:] / lam
        value = float(np.sum(np.log(lam)) - np.dot(mu, self.gaps) - self.tail)
        d = a - self.prior.mean
        qd = self.prior.precision @ d
        value += -0.5 * float(d @ qd) - self.prior.log_normalizer
        row_w = -mu * self.gaps
        row_w[1:] += ratio
        grad = _banded.accumulate_vector(self.offsets, self.vals, row_w, self.m) - qd
        return value, grad

    def neg_hessian_banded(self, a: np.ndarray) -> np.ndarray:
        """Banded part of -(loglik + logprior) Hessian; the rank-one anchor is separate."""
        mu = self._mu(a)
        lam = mu[1:] + self.excitation
        ratio = mu[1:] / lam
        row_w = mu * self.gaps
        row_w[1:] -= ratio - ratio**2
        ab = _banded.accumulate_outer(self.offsets, self.vals, row_w, self.m)
        return ab + self.prior.smoothness * self.prior.gram_banded


def _newton_direction(problem: _PosteriorProblem, ab: np.ndarray, grad: np.ndarray):
    """Ascent direction solving (B + rho ones ones^T) s = grad, with damping fallback."""
    rho = problem.prior.anchor
    try:
        factor = _banded.factor_rank_one(ab, rho)
        return factor.solve(grad)
    except np.linalg.LinAlgError:
        pass
    # dense attempt on the full matrix (B may be indefinite while H is fine)
    dense = _banded.to_dense(ab) + rho
    try:
        cho = cho_factor(dense, lower=True)
        return cho_solve(cho, grad)
    except np.linalg.LinAlgError:
        pass
    # escalating Levenberg damping
    scale = float(np.max(np.abs(ab[3]))) or 1.0
    tau = 1.0e-6 * scale
    for _ in range(40):
        try:
            factor = _banded.factor_rank_one(_banded.add_diagonal(ab, tau), rho)
            return factor.solve(grad)
        except np.linalg.LinAlgError:
            tau *= 10.0
    return None


def _map_iterate(problem: _PosteriorProblem, start: np.ndarray, max_iter: int, gtol: float):
    a = np.asarray(start, dtype=float).copy()
    value, grad = problem.value_grad(a)
    if not np.isfinite(value):
        a = problem.prior.mean.copy()
        value, grad = problem.value_grad(a)
        if not np.isfinite(value):
            raise NumericalError("posterior is not finite at the prior mean")
    for iteration in range(max_iter):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= gtol:
            return a, value, gnorm, iteration, True
        ab = problem.neg_hessian_banded(a)
        step = _newton_direction(problem, ab, grad)
        if step is None:
            step = grad / max(gnorm, 1.0)
        # backtracking line search with an Armijo condition
        slope = float(grad @ step)
        if slope <= 0:  # damped solve failed to give an ascent direction
            step = grad / max(gnorm, 1.0)
            slope = float(grad @ step)
        scale = 1.0
        accepted = False
        for _ in range(50):
            cand = a + scale * step
            cand_value = problem.value(cand)
            if np.isfinite(cand_value) and cand_value >= value + 1.0e-4 * scale * slope:
                a = cand
                value, grad = problem.value_grad(a)
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            gnorm = float(np.linalg.norm(grad))
            return a, value, gnorm, iteration + 1, gnorm <= gtol
    return a, value, float(np.linalg.norm(grad)), max_iter, False


def map_estimate(seq: EventSequence, hyper: HyperParams, basis: NaturalTimeBasis,
                 warm_start: np.ndarray | None = None, *, max_iter: int = 200,
                 grad_tol_scale: float = 1.0e-6) -> np.ndarray:
    """Posterior mode of the spline coefficients for fixed hyperparameters.

    Damped Newton iterations on the analytic banded Hessian, warm-started
    from ``warm_start`` when given; converged when the gradient norm falls
    below ``grad_tol_scale * m``.  Deterministic for identical inputs.
    """
    problem = _PosteriorProblem(seq, hyper, basis)
    start = problem.prior.mean if warm_start is None else np.asarray(warm_start, dtype=float)
    gtol = grad_tol_scale * basis.m
    a, value, gnorm, iters, converged = _map_iterate(problem, start, max_iter, gtol)
    if not converged:
        raise ConvergenceError(
            f"posterior mode search stalled after {iters} iterations "
            f"(gradient norm {gnorm:.3e}, tolerance {gtol:.3e})",
            best=a,
            grad_norm=gnorm,
        )
    return a


def _laplace_logml(problem: _PosteriorProblem, a_star: np.ndarray) -> float:
    ab = problem.neg_hessian_banded(a_star)
    rho = problem.prior.anchor
    try:
        logdet_h = _banded.factor_rank_one(ab, rho).logdet()
    except np.linalg.LinAlgError:
        eigvals = np.linalg.eigvalsh(_banded.to_dense(ab) + rho)
        if np.any(eigvals <= 0):
            raise NumericalError(
                "posterior Hessian is not positive definite at the mode (saddle point)"
            ) from None
        logdet_h = float(np.sum(np.log(eigvals)))
    m = problem.m
    return (
        0.5 * m * np.log(2.0 * np.pi)
        - 0.5 * logdet_h
        + problem.loglik(a_star)
        + log_prior(a_star, problem.prior)
    )


def log_marginal_likelihood(seq: EventSequence, hyper: HyperParams, basis: NaturalTimeBasis,
                            *, map_coeffs: np.ndarray | None = None,
                            warm_start: np.ndarray | None = None) -> float:
    """Laplace approximation of the log-evidence of the hyperparameters.

    Expands the log of likelihood times prior to second order around the
    posterior mode; the Hessian there must be positive definite.
    """
    if map_coeffs is None:
        map_coeffs = map_estimate(seq, hyper, basis, warm_start=warm_start)
    problem = _PosteriorProblem(seq, hyper, basis)
    return float(_laplace_logml(problem, np.asarray(map_coeffs, dtype=float)))


# ---------------------------------------------------------------------------
# Hyperparameter search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HyperOptResult:
    """Outcome of the evidence maximization over hyperparameters."""

    hyper: HyperParams
    coeffs: np.ndarray
    log_marginal_likelihood: float
    fevals: int
    converged: bool
    trace: tuple  # running best evidence after each evaluation (nondecreasing)


def _default_betas(rate: float, M: int) -> np.ndarray:
    # decay rates log-spaced between 1x and 100x the mean event rate, so the
    # starting point is invariant under a change of time units
    return np.array([10.0 * rate]) if M == 1 else np.geomspace(rate, 100.0 * rate, M)


def default_hyperparams(seq: EventSequence, M: int, *, V: float = 1.0,
                        W: float = DEFAULT_BASELINE_WEIGHT) -> HyperParams:
    """Scale-aware starting point: baseline rate from the event count,
    triggering weights 0.5/M, decay rates spread around the event rate."""
    if seq.n < 1:
        raise DomainError("cannot initialize hyperparameters without events")
    mu0 = seq.n / seq.window.length
    alphas = np.full(M, 0.5 / M)
    return HyperParams(kernel=ExponentialKernel(alphas, _default_betas(mu0, M)), V=V, mu_c=mu0, W=W)


def _pack_hyper(hyper: HyperParams, hold_v: bool) -> np.ndarray:
    parts = [np.log(hyper.kernel.alphas), np.log(hyper.kernel.betas)]
    if not hold_v:
        parts.append([np.log(hyper.V)])
    parts.append([np.log(hyper.mu_c)])
    return np.concatenate([np.atleast_1d(p) for p in parts])


def _unpack_hyper(x: np.ndarray, M: int, hold_v: bool, fixed_v: float, W: float) -> HyperParams:
    alphas = np.exp(x[:M])
    betas = np.exp(x[M : 2 * M])
    pos = 2 * M
    if hold_v:
        V = fixed_v
    else:
        V = float(np.exp(x[pos]))
        pos += 1
    mu_c = float(np.exp(x[pos]))
    return HyperParams(kernel=ExponentialKernel(alphas, betas), V=V, mu_c=mu_c, W=W)


def optimize_hyperparams(seq: EventSequence, basis: NaturalTimeBasis, init: HyperParams,
                         *, hold_v: bool = False, xatol: float = 1.0e-2,
                         fatol: float = 1.0e-3, max_fevals: int | None = None,
                         restarts: int = 2) -> HyperOptResult:
    """Maximize the Laplace evidence over log-hyperparameters.

    Nelder-Mead simplex search over (log alpha_j, log beta_j, log V,
    log mu_c); W stays fixed throughout, and V too when ``hold_v`` is set.
    The inner posterior-mode search is warm-started from the previous
    evaluation.  The returned evidence never falls below the value at
    ``init``; the trace records the running best after every evaluation.
    """
    M = init.kernel.order
    x0 = _pack_hyper(init, hold_v)
    dim = x0.size
    if max_fevals is None:
        max_fevals = 600 * dim
    parts = _log_bound_parts(seq)
    bounds = [parts["alpha"]] * M + [parts["beta"]] * M
    if not hold_v:
        bounds.append(parts["v"])
    bounds.append(parts["mu"])
    x0 = np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds])

    state = {"warm": None, "best_value": -np.inf, "best_x": x0, "best_coeffs": None,
             "fevals": 0, "trace": []}

    def objective(x: np.ndarray) -> float:
        state["fevals"] += 1
        if not _within(x, bounds):
            state["trace"].append(state["best_value"])
            return np.inf
        hyper = _unpack_hyper(x, M, hold_v, init.V, init.W)
        try:
            coeffs = map_estimate(seq, hyper, basis, warm_start=state["warm"])
            value = log_marginal_likelihood(seq, hyper, basis, map_coeffs=coeffs)
        except (ConvergenceError, NumericalError, ConfigurationError):
            state["trace"].append(state["best_value"])
            return np.inf
        state["warm"] = coeffs
        if value > state["best_value"]:
            state["best_value"] = value
            state["best_x"] = x.copy()
            state["best_coeffs"] = coeffs
        state["trace"].append(state["best_value"])
        return -value

    spreads = [0.6, 0.2, 0.05]
    success = False
    x_start = x0
    previous_best = -np.inf
    for round_idx in range(max(1, restarts + 1)):
        spread = spreads[min(round_idx, len(spreads) - 1)]
        simplex = np.vstack([x_start, x_start + spread * np.eye(dim)])
        budget = max_fevals - state["fevals"]
        if budget <= dim + 2:
            break
        res = minimize(
            objective,
            x_start,
            method="Nelder-Mead",
            bounds=bounds,
            options={
                "initial_simplex": simplex,
                "xatol": xatol,
                "fatol": fatol,
                "maxfev": budget,
                "adaptive": True,
            },
        )
        success = bool(res.success)
        x_start = state["best_x"]
        if state["best_value"] - previous_best < fatol and round_idx > 0:
            break
        previous_best = state["best_value"]

    if not np.isfinite(state["best_value"]):
        raise ConvergenceError("no hyperparameter evaluation produced a finite evidence")
    hyper = _unpack_hyper(state["best_x"], M, hold_v, init.V, init.W)
    converged = success and state["fevals"] < max_fevals
    if not converged:
        warnings.warn("hyperparameter search hit its evaluation cap; returning best so far")
    return HyperOptResult(
        hyper=hyper,
        coeffs=state["best_coeffs"],
        log_marginal_likelihood=float(state["best_value"]),
        fevals=state["fevals"],
        converged=converged,
        trace=tuple(state["trace"]),
    )


# ---------------------------------------------------------------------------
# Fit results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    """Fitted model with its comparable score and diagnostics."""

    model: str
    window: ObservationWindow
    n_events: int
    kernel: ExponentialKernel
    background: BackgroundModel
    log_likelihood: float
    log_marginal_likelihood: float | None
    n_parameters: int
    score: float
    branching_ratio: float
    background_curve: np.ndarray
    converged: bool
    diagnostics: dict = field(default_factory=dict)
    hyper: HyperParams | None = None
    basis_k: int | None = None


def score(fit: FitResult) -> float:
    """Comparable fitting score: penalized log-(marginal-)likelihood."""
    base = fit.log_marginal_likelihood if fit.model == "bcb" else fit.log_likelihood
    return float(base - fit.n_parameters)


def regular_knots(window: ObservationWindow, spacing: float) -> np.ndarray:
    """Equally spaced knots from the window start, final knot at the window end.

    The last interval absorbs the remainder, so it is at least as long as
    ``spacing`` and shorter than twice that.
    """
    if spacing <= 0 or spacing >= window.length:
        raise ConfigurationError("knot spacing must be positive and shorter than the window")
    count = int(np.floor(window.length / spacing))
    inner = window.start + spacing * np.arange(count)
    return np.concatenate([inner, [window.end]])


# ---------------------------------------------------------------------------
# Maximum-likelihood fitting (constant and piecewise-linear backgrounds)
# ---------------------------------------------------------------------------


def _mle_background(model: str, knots: np.ndarray | None, mu_params: np.ndarray):
    if model == "const":
        return ConstantBackground(float(mu_params[0]))
    return PiecewiseLinearBackground(knots, mu_params)


def _mle_objective(x: np.ndarray, seq, model, knots, M, bounds):
    if not _within(x, bounds):
        return np.inf
    params = np.exp(x)
    n_mu = 1 if model == "const" else knots.size
    try:
        bg = _mle_background(model, knots, params[:n_mu])
        kernel = ExponentialKernel(params[n_mu : n_mu + M], params[n_mu + M :])
        return -log_likelihood(seq, kernel, bg)
    except (NumericalError, DomainError):
        return np.inf


def fit_mle(seq: EventSequence, model: str = "const", M: int = 1,
            knots: np.ndarray | None = None, *, xtol: float = 1.0e-6,
            ftol: float = 1.0e-8, max_fevals: int | None = None) -> FitResult:
    """Maximum-likelihood fit of a constant or piecewise-linear background model.

    The search runs derivative-free (Powell) over the logs of all
    parameters.  A piecewise-linear fit is warm-started from the constant
    fit with the same kernel order, which guarantees its likelihood can
    only improve on the nested model.
    """
    if model not in ("const", "pl"):
        raise ConfigurationError(f"unknown model {model!r}; expected 'const' or 'pl'")
    if seq.n < 1:
        raise DomainError("cannot fit a model to an empty sequence")
    if M < 1:
        raise ConfigurationError("kernel order must be at least 1")
    if model == "pl":
        if knots is None:
            raise ConfigurationError("piecewise-linear model needs a knot list")
        knots = np.asarray(knots, dtype=float)
        if knots[0] != seq.window.start or knots[-1] != seq.window.end:
            raise ConfigurationError("knot list must span the observation window")

    mu0 = seq.n / seq.window.length
    betas0 = _default_betas(mu0, M)
    if model == "const":
        x0 = np.log(np.concatenate([[mu0], np.full(M, 0.5 / M), betas0]))
        pre_fevals = 0
    else:
        pre = fit_mle(seq, "const", M, xtol=xtol, ftol=ftol)
        mu_hat = pre.background.mu_c
        x0 = np.log(
            np.concatenate([np.full(knots.size, mu_hat), pre.kernel.alphas, pre.kernel.betas])
        )
        pre_fevals = pre.diagnostics["fevals"]

    dim = x0.size
    if max_fevals is None:
        max_fevals = 4000 * dim
    parts = _log_bound_parts(seq)
    n_mu = 1 if model == "const" else knots.size
    bounds = [parts["mu"]] * n_mu + [parts["alpha"]] * M + [parts["beta"]] * M
    x0 = np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds])

    fevals = 0
    best_x, best_val = x0, _mle_objective(x0, seq, model, knots, M, bounds)
    success = False
    for _ in range(2):
        res = minimize(
            _mle_objective,
            best_x,
            args=(seq, model, knots, M, bounds),
            method="Powell",
            bounds=bounds,
            options={"xtol": xtol, "ftol": ftol, "maxfev": max_fevals - fevals},
        )
        fevals += res.nfev
        improved = res.fun < best_val - 1.0e-12
        if res.fun < best_val:
            best_val, best_x = float(res.fun), res.x.copy()
        success = bool(res.success)
        if not improved:
            break

    params = np.exp(best_x)
    n_mu = 1 if model == "const" else knots.size
    bg = _mle_background(model, knots, params[:n_mu])
    kernel = ExponentialKernel(params[n_mu : n_mu + M], params[n_mu + M :])
    logl = -best_val
    n_parameters = n_mu + 2 * M
    if model == "const":
        curve = np.array(
            [[seq.window.start, bg.mu_c], [seq.window.end, bg.mu_c]]
        )
    else:
        curve = np.column_stack([bg.knot_times, bg.knot_values])
    return FitResult(
        model=model,
        window=seq.window,
        n_events=seq.n,
        kernel=kernel,
        background=bg,
        log_likelihood=float(logl),
        log_marginal_likelihood=None,
        n_parameters=n_parameters,
        score=float(logl - n_parameters),
        branching_ratio=branching_ratio(kernel),
        background_curve=curve,
        converged=success,
        diagnostics={"method": "powell", "fevals": fevals + pre_fevals},
    )


# ---------------------------------------------------------------------------
# Empirical-Bayes fitting of the spline background model
# ---------------------------------------------------------------------------


def fit_bcb(seq: EventSequence, M: int = 1, k: int = 50, *, V_init: float = 1.0,
            hold_v: bool = False, init: HyperParams | None = None,
            xatol: float = 1.0e-2, fatol: float = 1.0e-3,
            max_fevals: int | None = None, restarts: int = 2) -> FitResult:
    """Fit the Bayesian log-spline background model end to end.

    Builds the variable-width basis with one function per ``k`` events,
    optimizes the hyperparameters by evidence maximization (V can be held
    fixed at ``V_init`` with ``hold_v``), and returns the posterior-mode
    background under the optimal hyperparameters.  The score penalizes the
    evidence by the hyperparameter count 2M + 2; the anchoring weight W is
    fixed, not counted.
    """
    if seq.n < 4:
        raise DomainError("need at least four events to fit the spline model")
    if M < 1:
        raise ConfigurationError("kernel order must be at least 1")
    basis = build_basis(seq.n, k)
    if init is None:
        init = default_hyperparams(seq, M, V=V_init)
    opt = optimize_hyperparams(
        seq, basis, init, hold_v=hold_v, xatol=xatol, fatol=fatol,
        max_fevals=max_fevals, restarts=restarts,
    )
    bg = SplineBackground(opt.coeffs, basis, seq)
    rates = bg.segment_rates()
    bounds = seq.segment_bounds()
    curve = np.column_stack(
        [np.concatenate([bounds[:-1], [bounds[-1]]]), np.concatenate([rates, [rates[-1]]])]
    )
    n_parameters = 2 * M + 2
    logl = log_likelihood(seq, opt.hyper.kernel, bg)
    return FitResult(
        model="bcb",
        window=seq.window,
        n_events=seq.n,
        kernel=opt.hyper.kernel,
        background=bg,
        log_likelihood=float(logl),
        log_marginal_likelihood=float(opt.log_marginal_likelihood),
        n_parameters=n_parameters,
        score=float(opt.log_marginal_likelihood - n_parameters),
        branching_ratio=branching_ratio(opt.hyper.kernel),
        background_curve=curve,
        converged=opt.converged,
        diagnostics={
            "method": "nelder-mead",
            "fevals": opt.fevals,
            "basis_m": basis.m,
            "hold_v": bool(hold_v),
        },
        hyper=opt.hyper,
        basis_k=k,
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _background_to_dict(fit: FitResult) -> dict:
    bg = fit.background
    if isinstance(bg, ConstantBackground):
        return {"type": "constant", "mu_c": bg.mu_c}
    if isinstance(bg, PiecewiseLinearBackground):
        return {
            "type": "piecewise_linear",
            "knot_times": bg.knot_times.tolist(),
            "knot_values": bg.knot_values.tolist(),
        }
    return {
        "type": "spline",
        "coeffs": bg.coeffs.tolist(),
        "basis_m": bg.basis.m,
        "basis_k": fit.basis_k,
    }


def fit_to_dict(fit: FitResult) -> dict:
    """Stable JSON-ready representation of a fit (field names are frozen API)."""
    out = {
        "model": fit.model,
        "window": {"start": fit.window.start, "end": fit.window.end},
        "n_events": fit.n_events,
        "kernel": {"alphas": fit.kernel.alphas.tolist(), "betas": fit.kernel.betas.tolist()},
        "background": _background_to_dict(fit),
        "log_likelihood": fit.log_likelihood,
        "log_marginal_likelihood": fit.log_marginal_likelihood,
        "n_parameters": fit.n_parameters,
        "score": fit.score,
        "branching_ratio": fit.branching_ratio,
        "background_curve": [[float(t), float(v)] for t, v in fit.background_curve],
        "converged": fit.converged,
        "diagnostics": fit.diagnostics,
    }
    if fit.hyper is not None:
        out["hyperparams"] = {"V": fit.hyper.V, "W": fit.hyper.W, "mu_c": fit.hyper.mu_c}
    return out


def fit_from_dict(data: dict, events: EventSequence | None = None) -> FitResult:
    """Rebuild a fit from its JSON form.

    A spline background stores only its coefficients, so the event
    sequence it was fitted to must be supplied and is validated against
    the stored window and event count.
    """
    window = ObservationWindow(data["window"]["start"], data["window"]["end"])
    kernel = ExponentialKernel(data["kernel"]["alphas"], data["kernel"]["betas"])
    bg_data = data["background"]
    hyper = None
    basis_k = None
    if bg_data["type"] == "constant":
        background = ConstantBackground(bg_data["mu_c"])
    elif bg_data["type"] == "piecewise_linear":
        background = PiecewiseLinearBackground(bg_data["knot_times"], bg_data["knot_values"])
    elif bg_data["type"] == "spline":
        if events is None:
            raise DomainError("rebuilding a spline background requires the event sequence")
        if events.n != data["n_events"]:
            raise DomainError(
                f"event count mismatch: fit has {data['n_events']}, sequence has {events.n}"
            )
        if (events.window.start, events.window.end) != (window.start, window.end):
            raise DomainError("window mismatch between fit and event sequence")
        basis_k = bg_data.get("basis_k") or 50
        basis = build_basis(events.n, basis_k)
        if basis.m != bg_data["basis_m"]:
            raise DomainError("basis size mismatch when rebuilding the spline background")
        background = SplineBackground(np.asarray(bg_data["coeffs"]), basis, events)
        hp = data.get("hyperparams")
        if hp:
            hyper = HyperParams(kernel=kernel, V=hp["V"], mu_c=hp["mu_c"], W=hp["W"])
    else:
        raise DomainError(f"unknown background type {bg_data['type']!r}")
    if events is not None and bg_data["type"] != "spline":
        if (events.window.start, events.window.end) != (window.start, window.end):
            raise DomainError("window mismatch between fit and event sequence")
    return FitResult(
        model=data["model"],
        window=window,
        n_events=data["n_events"],
        kernel=kernel,
        background=background,
        log_likelihood=data["log_likelihood"],
        log_marginal_likelihood=data["log_marginal_likelihood"],
        n_parameters=data["n_parameters"],
        score=data["score"],
        branching_ratio=data["branching_ratio"],
        background_curve=np.asarray(data["background_curve"], dtype=float),
        converged=data["converged"],
        diagnostics=data.get("diagnostics", {}),
        hyper=hyper,
        basis_k=basis_k,
    )


def write_fit_json(fit: FitResult, path) -> None:
    Path(path).write_text(json.dumps(fit_to_dict(fit), indent=2) + "\n")


def read_fit_json(path, events: EventSequence | None = None) -> FitResult:
    return fit_from_dict(json.loads(Path(path).read_text()), events)
