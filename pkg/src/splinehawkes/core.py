"""Domain types for event data, triggering kernels, and background rates.

The types here are immutable value objects; every operation on them is a
pure function, so they can be shared freely across threads.  Three
background-rate families are supported as a closed union: a constant rate,
a piecewise-linear rate on explicit knots, and a log-linear spline rate
that is piecewise constant on the inter-event segments of the sequence it
was fitted to.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Union

import numpy as np

__all__ = [
    "DomainError",
    "ConfigurationError",
    "NumericalError",
    "ConvergenceError",
    "ObservationWindow",
    "EventSequence",
    "ExponentialKernel",
    "ConstantBackground",
    "PiecewiseLinearBackground",
    "SplineBackground",
    "BackgroundModel",
    "kernel_eval",
    "kernel_integral",
    "branching_ratio",
    "background_eval",
    "background_integral",
]


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ConfigurationError(ValueError):
    """A requested configuration is inconsistent or unusable."""


class NumericalError(ArithmeticError):
    """A computation left the range of finite floating-point numbers."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its cap; carries the best iterate found."""

    def __init__(self, message, best=None, grad_norm=None):
        super().__init__(message)
        self.best = best
        self.grad_norm = grad_norm


# ---------------------------------------------------------------------------
# Event data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObservationWindow:
    """Half-line interval [start, end] in seconds over which events are observed."""

    start: float
    end: float

    def __post_init__(self):
        object.__setattr__(self, "start", float(self.start))
        object.__setattr__(self, "end", float(self.end))
        if not self.start < self.end:
            raise DomainError(f"window start {self.start} must precede end {self.end}")

    @property
    def length(self) -> float:
        return self.end - self.start

    def contains(self, t) -> np.ndarray:
        return (np.asarray(t) >= self.start) & (np.asarray(t) <= self.end)


@dataclass(frozen=True)
class EventSequence:
    """Strictly increasing event times inside an observation window.

    Events exactly at the window boundaries are admitted; an empty
    sequence is valid and represents a window with no events.
    """

    times: np.ndarray
    window: ObservationWindow

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1:
            raise DomainError("event times must be one-dimensional")
        if times.size and not np.all(np.diff(times) > 0):
            raise DomainError("event times must be strictly increasing")
        if times.size and (times[0] < self.window.start or times[-1] > self.window.end):
            raise DomainError("event times must lie inside the observation window")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @property
    def n(self) -> int:
        return int(self.times.size)

    def segment_bounds(self) -> np.ndarray:
        """Boundaries S, t_1, ..., t_n, T of the n+1 inter-event segments."""
        return np.concatenate(([self.window.start], self.times, [self.window.end]))

    def gaps(self) -> np.ndarray:
        """Lengths of the n+1 segments, boundary segments included."""
        return np.diff(self.segment_bounds())

    # -- serialization ------------------------------------------------------

    def to_csv(self, path) -> None:
        """Write a single-column CSV preceded by a two-line window header.

        Floats are written with ``repr`` so the file round-trips to the
        exact same binary values.
        """
        lines = [f"window_start,{self.window.start!r}", f"window_end,{self.window.end!r}"]
        lines.extend(repr(float(t)) for t in self.times)
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "EventSequence":
        raw = Path(path).read_text().splitlines()
        if len(raw) < 2:
            raise DomainError(f"{path}: expected a two-line window header")
        header = {}
        for lineno, line in enumerate(raw[:2], start=1):
            try:
                key, value = line.split(",", 1)
                header[key.strip()] = float(value)
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: bad header line {line!r}") from exc
        if "window_start" not in header or "window_end" not in header:
            raise DomainError(f"{path}: header must carry window_start and window_end")
        times = []
        for lineno, line in enumerate(raw[2:], start=3):
            if not line.strip():
                continue
            try:
                times.append(float(line))
            except ValueError as exc:
                raise DomainError(f"{path}:{lineno}: bad event time {line!r}") from exc
        window = ObservationWindow(header["window_start"], header["window_end"])
        return cls(np.asarray(times), window)


# ---------------------------------------------------------------------------
# Triggering kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentialKernel:
    """Triggering kernel g(s) = sum_j alphas[j] * betas[j] * exp(-betas[j] s).

    Each alpha is the expected number of direct children contributed by
    that component, so the component sum is the branching ratio.  The sum
    may reach or exceed one here; stability is only enforced where it
    matters, at simulation time.
    """

    alphas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        alphas = np.atleast_1d(np.asarray(self.alphas, dtype=float))
        betas = np.atleast_1d(np.asarray(self.betas, dtype=float))
        if alphas.shape != betas.shape or alphas.ndim != 1:
            raise DomainError("alphas and betas must be equal-length vectors")
        if np.any(alphas < 0):
            raise DomainError("kernel weights must be nonnegative")
        if np.any(betas <= 0):
            raise DomainError("kernel decay rates must be positive")
        alphas.setflags(write=False)
        betas.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)

    @property
    def order(self) -> int:
        return int(self.alphas.size)


def kernel_eval(kernel: ExponentialKernel, s):
    """Evaluate the triggering kernel at lag s >= 0 (scalar or array)."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise DomainError("kernel lag must be nonnegative")
    out = np.sum(
        kernel.alphas * kernel.betas * np.exp(-kernel.betas * s_arr[..., None]), axis=-1
    )
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def kernel_integral(kernel: ExponentialKernel, s):
    """Integral of the kernel over [0, s]; tends to the branching ratio as s grows."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise DomainError("kernel lag must be nonnegative")
    out = np.sum(kernel.alphas * (1.0 - np.exp(-kernel.betas * s_arr[..., None])), axis=-1)
    return float(out) if np.isscalar(s) or s_arr.ndim == 0 else out


def branching_ratio(kernel: ExponentialKernel) -> float:
    """Expected number of events directly triggered by one event."""
    return float(np.sum(kernel.alphas))


# ---------------------------------------------------------------------------
# Background-rate families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantBackground:
    """Time-invariant background rate."""

    mu_c: float

    def __post_init__(self):
        object.__setattr__(self, "mu_c", float(self.mu_c))
        if not self.mu_c > 0:
            raise DomainError("constant background rate must be positive")


@dataclass(frozen=True)
class PiecewiseLinearBackground:
    """Background rate interpolated linearly between explicit knots."""

    knot_times: np.ndarray
    knot_values: np.ndarray

    def __post_init__(self):
        kt = np.asarray(self.knot_times, dtype=float)
        kv = np.asarray(self.knot_values, dtype=float)
        if kt.ndim != 1 or kt.shape != kv.shape or kt.size < 2:
            raise DomainError("need at least two knots with one value each")
        if not np.all(np.diff(kt) > 0):
            raise DomainError("knot times must be strictly increasing")
        if np.any(kv <= 0):
            raise DomainError("knot values must be positive")
        kt.setflags(write=False)
        kv.setflags(write=False)
        object.__setattr__(self, "knot_times", kt)
        object.__setattr__(self, "knot_values", kv)


@dataclass(frozen=True)
class SplineBackground:
    """Log-linear spline background, piecewise constant on inter-event segments.

    The rate on segment i is exp(sum_j coeffs[j] * basis.values[i, j]);
    segment i runs from the i-th segment boundary of ``events`` to the
    next one, and the closed right endpoint of the window belongs to the
    last segment.
    """

    coeffs: np.ndarray
    basis: "NaturalTimeBasis"  # noqa: F821 - defined in splinehawkes.basis
    events: EventSequence

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        if coeffs.ndim != 1 or coeffs.size != self.basis.m:
            raise DomainError("coefficient vector length must equal the basis size")
        if self.basis.n != self.events.n:
            raise DomainError("basis was built for a different number of events")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @cached_property
    def _rates(self) -> np.ndarray:
        log_mu = self.basis.values[: self.events.n + 1] @ self.coeffs
        with np.errstate(over="ignore"):  # callers check finiteness
            rates = np.exp(log_mu)
        rates.setflags(write=False)
        return rates

    def segment_rates(self) -> np.ndarray:
        """Rates mu_i on the n+1 segments (rows 0..n of the basis matrix)."""
        return self._rates


BackgroundModel = Union[ConstantBackground, PiecewiseLinearBackground, SplineBackground]


def _pl_integral(bg: PiecewiseLinearBackground, a: float, b: float) -> float:
    """Exact integral of the piecewise-linear rate over [a, b] within its knots."""
    kt, kv = bg.knot_times, bg.knot_values
    if a < kt[0] or b > kt[-1]:
        raise DomainError("integration range extends beyond the knot span")
    if a == b:
        return 0.0
    pts = np.concatenate(([a], kt[(kt > a) & (kt < b)], [b]))
    vals = np.interp(pts, kt, kv)
    return float(np.trapezoid(vals, pts))


def _spline_segment_index(bg: SplineBackground, t) -> np.ndarray:
    """Segment index for times in the window; the right endpoint maps to segment n."""
    bounds = bg.events.segment_bounds()
    idx = np.searchsorted(bounds, np.asarray(t, dtype=float), side="right") - 1
    return np.clip(idx, 0, bg.events.n)


def background_eval(bg: BackgroundModel, t):
    """Background rate at time t (scalar or array); t must lie in the window."""
    t_arr = np.asarray(t, dtype=float)
    scalar = np.isscalar(t) or t_arr.ndim == 0
    if isinstance(bg, ConstantBackground):
        out = np.full_like(t_arr, bg.mu_c, dtype=float)
    elif isinstance(bg, PiecewiseLinearBackground):
        if np.any(t_arr < bg.knot_times[0]) or np.any(t_arr > bg.knot_times[-1]):
            raise DomainError("time outside the knot span")
        out = np.interp(t_arr, bg.knot_times, bg.knot_values)
    elif isinstance(bg, SplineBackground):
        if np.any(~bg.events.window.contains(t_arr)):
            raise DomainError("time outside the observation window")
        out = bg.segment_rates()[_spline_segment_index(bg, t_arr)]
    else:
        raise TypeError(f"unsupported background model {type(bg).__name__}")
    return float(out) if scalar else out


def background_integral(bg: BackgroundModel, seq: EventSequence) -> float:
    """Integral of the background rate over the observation window of seq."""
    window = seq.window
    if isinstance(bg, ConstantBackground):
        return bg.mu_c * window.length
    if isinstance(bg, PiecewiseLinearBackground):
        return _pl_integral(bg, window.start, window.end)
    if isinstance(bg, SplineBackground):
        if not np.array_equal(bg.events.times, seq.times):
            raise DomainError("spline background was fitted to a different sequence")
        return float(np.dot(bg.segment_rates(), seq.gaps()))
    raise TypeError(f"unsupported background model {type(bg).__name__}")


def background_integral_between(bg, a: float, b: float) -> float:
    """Integral of the background rate over [a, b].

    Accepts the three model families, any object exposing an
    ``integral(a, b)`` method (such as the simulation scenario rates), or
    a plain callable, which is integrated by adaptive quadrature.
    """
    if a > b:
        raise DomainError("reversed integration range")
    if isinstance(bg, ConstantBackground):
        return bg.mu_c * (b - a)
    if isinstance(bg, PiecewiseLinearBackground):
        return _pl_integral(bg, a, b)
    if isinstance(bg, SplineBackground):
        bounds = bg.events.segment_bounds()
        rates = bg.segment_rates()
        lo = np.maximum(bounds[:-1], a)
        hi = np.minimum(bounds[1:], b)
        return float(np.dot(rates, np.clip(hi - lo, 0.0, None)))
    if hasattr(bg, "integral"):
        return float(bg.integral(a, b))
    if callable(bg):
        from scipy.integrate import quad

        val, _ = quad(bg, a, b, limit=200)
        return float(val)
    raise TypeError(f"unsupported background model {type(bg).__name__}")


def background_rate_at(bg, t):
    """Background rate at t for model families or plain callables."""
    if isinstance(bg, (ConstantBackground, PiecewiseLinearBackground, SplineBackground)):
        return background_eval(bg, t)
    if callable(bg):
        return bg(t)
    raise TypeError(f"unsupported background model {type(bg).__name__}")
