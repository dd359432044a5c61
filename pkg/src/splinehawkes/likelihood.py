"""Conditional intensity and exact log-likelihood for Hawkes models.

The excitation felt by event i from all earlier events is accumulated
with the standard per-exponential recursion

    R_j(1) = 0,   R_j(i) = exp(-beta_j (t_i - t_{i-1})) (R_j(i-1) + 1),

which brings the likelihood down to O(n M).  The recursion is evaluated
through a running log-sum-exp so arbitrarily large beta * t products stay
finite.  A direct O(n^2 M) double-sum implementation is kept permanently
as the correctness oracle for the recursion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._banded import accumulate_outer, accumulate_vector, to_dense
from .core import (
    BackgroundModel,
    ConstantBackground,
    DomainError,
    EventSequence,
    ExponentialKernel,
    NumericalError,
    PiecewiseLinearBackground,
    SplineBackground,
    background_eval,
    background_integral,
    background_integral_between,
    background_rate_at,
    kernel_integral,
)

__all__ = [
    "LikelihoodWorkspace",
    "decay_states",
    "event_excitation",
    "intensity_at",
    "log_likelihood",
    "log_likelihood_direct",
    "loglik_grad_coeffs",
    "loglik_hessian_coeffs",
    "compensator",
    "interval_compensators",
]


# ---------------------------------------------------------------------------
# Excitation recursion
# ---------------------------------------------------------------------------


def decay_states(seq: EventSequence, kernel: ExponentialKernel) -> np.ndarray:
    """Running excitation sums R_j(i), one row per event, one column per exponential."""
    n, M = seq.n, kernel.order
    R = np.zeros((n, M))
    if n <= 1:
        return R
    t = seq.times
    for j in range(M):
        # log of cumulative sum of exp(beta t_k); stable for any beta * t
        log_cum = np.logaddexp.accumulate(kernel.betas[j] * t)
        R[1:, j] = np.exp(log_cum[:-1] - kernel.betas[j] * t[1:])
    return R


def event_excitation(seq: EventSequence, kernel: ExponentialKernel) -> np.ndarray:
    """Triggering part of the intensity at each event time, sum_j a_j b_j R_j(i)."""
    return decay_states(seq, kernel) @ (kernel.alphas * kernel.betas)


def _kernel_tail(seq: EventSequence, kernel: ExponentialKernel) -> float:
    """Total triggering mass spent inside the window, summed over events."""
    if seq.n == 0:
        return 0.0
    remaining = seq.window.end - seq.times
    return float(
        np.sum(kernel.alphas * (1.0 - np.exp(-np.outer(remaining, kernel.betas))))
    )


def _mu_at_events(seq: EventSequence, bg) -> np.ndarray:
    """Background rate at every event time."""
    if seq.n == 0:
        return np.zeros(0)
    if isinstance(bg, SplineBackground):
        if not np.array_equal(bg.events.times, seq.times):
            raise DomainError("spline background was fitted to a different sequence")
        return bg.segment_rates()[1:]
    if isinstance(bg, (ConstantBackground, PiecewiseLinearBackground)):
        return np.atleast_1d(background_eval(bg, seq.times))
    return np.asarray([bg(t) for t in seq.times], dtype=float)


@dataclass(frozen=True)
class LikelihoodWorkspace:
    """Per-sequence cache of the quantities the likelihood is assembled from."""

    decay_states: np.ndarray  # (n, M) recursion values R_j(i)
    mu_values: np.ndarray     # (n,) background rate at each event
    gaps: np.ndarray          # (n + 1,) segment lengths incl. window boundaries
    excitation: np.ndarray    # (n,) triggering intensity at each event

    @classmethod
    def build(cls, seq: EventSequence, kernel: ExponentialKernel, bg) -> "LikelihoodWorkspace":
        R = decay_states(seq, kernel)
        return cls(
            decay_states=R,
            mu_values=_mu_at_events(seq, bg),
            gaps=seq.gaps(),
            excitation=R @ (kernel.alphas * kernel.betas),
        )


# ---------------------------------------------------------------------------
# Intensity and log-likelihood
# ---------------------------------------------------------------------------


def intensity_at(t: float, seq: EventSequence, kernel: ExponentialKernel, bg) -> float:
    """Conditional intensity at time t given the events strictly before t."""
    if not (seq.window.start <= t <= seq.window.end):
        raise DomainError("time outside the observation window")
    earlier = seq.times[seq.times < t]
    trig = float(
        np.sum(kernel.alphas * kernel.betas * np.exp(-np.outer(t - earlier, kernel.betas)))
    )
    return float(background_rate_at(bg, t)) + trig


def _checked_log_lambda(lam: np.ndarray) -> np.ndarray:
    bad = np.flatnonzero(~np.isfinite(lam) | (lam <= 0.0))
    if bad.size:
        raise NumericalError(
            f"intensity not finite and positive at event index {bad[0]} (value {lam[bad[0]]})"
        )
    return np.log(lam)


def log_likelihood(seq: EventSequence, kernel: ExponentialKernel, bg: BackgroundModel) -> float:
    """Exact log-likelihood of (kernel, bg) for the observed sequence, O(n M)."""
    if seq.n == 0:
        return -background_integral(bg, seq)
    ws = LikelihoodWorkspace.build(seq, kernel, bg)
    lam = ws.mu_values + ws.excitation
    value = (
        float(np.sum(_checked_log_lambda(lam)))
        - background_integral(bg, seq)
        - _kernel_tail(seq, kernel)
    )
    if not np.isfinite(value):
        raise NumericalError("log-likelihood overflowed in the integral terms")
    return value


def log_likelihood_direct(seq: EventSequence, kernel: ExponentialKernel, bg: BackgroundModel) -> float:
    """Reference log-likelihood via the explicit O(n^2 M) double sum."""
    if seq.n == 0:
        return -background_integral(bg, seq)
    t = seq.times
    lags = t[:, None] - t[None, :]
    before = lags > 0
    trig = np.zeros(seq.n)
    for a, b in zip(kernel.alphas, kernel.betas):
        trig += np.sum(np.where(before, a * b * np.exp(-b * np.where(before, lags, 0.0)), 0.0), axis=1)
    lam = _mu_at_events(seq, bg) + trig
    tail = float(np.sum(kernel_integral(kernel, seq.window.end - t)))
    return float(np.sum(_checked_log_lambda(lam))) - background_integral(bg, seq) - tail


# ---------------------------------------------------------------------------
# Derivatives with respect to spline coefficients
# ---------------------------------------------------------------------------


def _compact_mu(basis, coeffs: np.ndarray, rows: int) -> np.ndarray:
    """Segment rates exp(f_i . a) for rows 0..rows-1 using the compact basis."""
    idx = basis.offsets[:rows, None] + np.arange(4)[None, :]
    return np.exp(np.sum(basis.compact_values[:rows] * coeffs[idx], axis=1))


def _spline_row_weights(seq, kernel, basis, coeffs):
    """Shared pieces of the coefficient gradient and Hessian.

    Returns (mu, ratio, gaps) where mu holds the segment rates on rows
    0..n, and ratio = mu_i / lambda_i on the event rows 1..n.
    """
    n = seq.n
    if basis.n != n:
        raise DomainError("basis was built for a different number of events")
    mu = _compact_mu(basis, np.asarray(coeffs, dtype=float), n + 1)
    exc = event_excitation(seq, kernel)
    lam = mu[1:] + exc
    bad = np.flatnonzero(~np.isfinite(lam) | (lam <= 0.0))
    if bad.size:
        raise NumericalError(f"intensity not finite and positive at event index {bad[0]}")
    return mu, mu[1:] / lam, seq.gaps()


def loglik_grad_coeffs(seq, kernel, basis, coeffs) -> np.ndarray:
    """Gradient of the log-likelihood with respect to the spline coefficients."""
    mu, ratio, gaps = _spline_row_weights(seq, kernel, basis, coeffs)
    row_w = -mu * gaps
    row_w[1:] += ratio
    rows = seq.n + 1
    return accumulate_vector(basis.offsets[:rows], basis.compact_values[:rows], row_w, basis.m)


def _hessian_row_weights(mu, ratio, gaps):
    row_w = -mu * gaps
    row_w[1:] += ratio - ratio**2
    return row_w


def loglik_hessian_coeffs(seq, kernel, basis, coeffs) -> np.ndarray:
    """Hessian of the log-likelihood w.r.t. spline coefficients, dense m x m.

    The matrix is symmetric and banded with half-bandwidth 3 because each
    basis row has at most four consecutive nonzero entries.
    """
    mu, ratio, gaps = _spline_row_weights(seq, kernel, basis, coeffs)
    row_w = _hessian_row_weights(mu, ratio, gaps)
    rows = seq.n + 1
    return to_dense(
        accumulate_outer(basis.offsets[:rows], basis.compact_values[:rows], row_w, basis.m)
    )


# ---------------------------------------------------------------------------
# Compensator
# ---------------------------------------------------------------------------


def compensator(seq: EventSequence, kernel: ExponentialKernel, bg, t_a: float, t_b: float) -> float:
    """Integrated intensity over [t_a, t_b] inside the observation window."""
    if t_a > t_b:
        raise DomainError("reversed integration range")
    if not (seq.window.start <= t_a and t_b <= seq.window.end):
        raise DomainError("integration range outside the observation window")
    if t_a == t_b:
        return 0.0
    t = seq.times[seq.times < t_b]
    trig = 0.0
    if t.size:
        upper = kernel_integral(kernel, t_b - t)
        lower = kernel_integral(kernel, np.clip(t_a - t, 0.0, None))
        trig = float(np.sum(upper) - np.sum(lower))
    return background_integral_between(bg, t_a, t_b) + trig


def interval_compensators(seq: EventSequence, kernel: ExponentialKernel, bg) -> np.ndarray:
    """Compensator of every inter-event segment, boundary segments included.

    Entry i is the integrated intensity over [t_i, t_{i+1}] with t_0 = S
    and t_{n+1} = T, so the n+1 entries sum to the compensator of the
    whole window.
    """
    n = seq.n
    gaps = seq.gaps()
    out = np.zeros(n + 1)

    # background part
    if isinstance(bg, ConstantBackground):
        out += bg.mu_c * gaps
    elif isinstance(bg, SplineBackground):
        if not np.array_equal(bg.events.times, seq.times):
            raise DomainError("spline background was fitted to a different sequence")
        out += bg.segment_rates() * gaps
    else:
        bounds = seq.segment_bounds()
        out += np.asarray(
            [background_integral_between(bg, a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        )

    # triggering part: events k <= i feed segment [t_i, t_{i+1}]
    if n:
        R = decay_states(seq, kernel)
        active = R + 1.0  # sum_{k <= i} exp(-beta_j (t_i - t_k))
        decay = 1.0 - np.exp(-np.outer(gaps[1:], kernel.betas))
        out[1:] += (active * decay) @ kernel.alphas
    return out
