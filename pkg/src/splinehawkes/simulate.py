"""Exact simulation of Hawkes processes by thinning, plus study scenarios.

Candidates are proposed at a piecewise dominating rate and accepted with
probability intensity / dominating rate.  Between events the triggering
part of the intensity only decays, so its current value bounds it over any
lookahead; the background part is bounded exactly for the model families
and the built-in scenario rates, and by dense sampling with a safety
factor for arbitrary callables.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    ConstantBackground,
    DomainError,
    EventSequence,
    ExponentialKernel,
    ObservationWindow,
    PiecewiseLinearBackground,
    SplineBackground,
    background_rate_at,
    branching_ratio,
)

__all__ = [
    "simulate",
    "scenario_ushape",
    "scenario_news_shock",
    "UShapeRate",
    "NewsShockRate",
    "write_batch",
]


# ---------------------------------------------------------------------------
# Scenario background rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UShapeRate:
    """Convex quadratic rate, high at both window ends, lowest mid-window.

    The rate is floor_rate * (1 + (edge_ratio - 1) x^2) with x the time
    rescaled to [-1, 1] over the window, so the endpoint-to-minimum ratio
    equals edge_ratio exactly.
    """

    window: ObservationWindow
    floor_rate: float = 1.0
    edge_ratio: float = 5.0

    def _x(self, t):
        mid = 0.5 * (self.window.start + self.window.end)
        return (np.asarray(t, dtype=float) - mid) / (0.5 * self.window.length)

    def __call__(self, t):
        out = self.floor_rate * (1.0 + (self.edge_ratio - 1.0) * self._x(t) ** 2)
        return float(out) if np.ndim(out) == 0 else out

    def integral(self, a: float, b: float) -> float:
        """Closed-form integral over [a, b]."""
        xa, xb = self._x(a), self._x(b)
        half = 0.5 * self.window.length
        core = (b - a) + (self.edge_ratio - 1.0) * half * (xb**3 - xa**3) / 3.0
        return self.floor_rate * core

    def sup(self, a: float, b: float) -> float:
        return max(self(a), self(b))  # convex, so the sup sits at an endpoint


@dataclass(frozen=True)
class NewsShockRate:
    """Flat rate with an instantaneous jump and exponential relaxation.

    Before t_news the rate is base_rate; at t_news it jumps to
    jump_factor * base_rate and relaxes back with time constant
    relax_time.  The value at t_news itself is the post-jump one.
    """

    window: ObservationWindow
    t_news: float
    base_rate: float = 1.0
    jump_factor: float = 10.0
    relax_time: float = 0.0

    def __post_init__(self):
        if not (self.window.start < self.t_news < self.window.end):
            raise DomainError("news time must lie inside the window")
        if self.relax_time <= 0:
            raise DomainError("relaxation time must be positive")

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        bump = np.where(
            t_arr >= self.t_news,
            (self.jump_factor - 1.0) * np.exp(-np.clip(t_arr - self.t_news, 0, None) / self.relax_time),
            0.0,
        )
        out = self.base_rate * (1.0 + bump)
        return float(out) if np.ndim(out) == 0 else out

    def integral(self, a: float, b: float) -> float:
        flat = self.base_rate * (b - a)
        lo, hi = max(a, self.t_news), b
        if hi <= lo:
            return flat
        tau = self.relax_time
        decay_mass = tau * (
            np.exp(-(lo - self.t_news) / tau) - np.exp(-(hi - self.t_news) / tau)
        )
        return flat + self.base_rate * (self.jump_factor - 1.0) * decay_mass

    def sup(self, a: float, b: float) -> float:
        if b < self.t_news:
            return self.base_rate
        return self(max(a, self.t_news))  # decaying after the jump


def scenario_ushape(window: ObservationWindow, floor_rate: float = 1.0,
                    edge_ratio: float = 5.0) -> UShapeRate:
    """Intraday-seasonality-style rate: busy open and close, quiet middle."""
    return UShapeRate(window=window, floor_rate=floor_rate, edge_ratio=edge_ratio)


def scenario_news_shock(window: ObservationWindow, t_news: float, base_rate: float = 1.0,
                        jump_factor: float = 10.0,
                        relax_fraction: float = 0.05) -> NewsShockRate:
    """Announcement-style rate: discontinuous rise at t_news, then decay."""
    return NewsShockRate(
        window=window,
        t_news=t_news,
        base_rate=base_rate,
        jump_factor=jump_factor,
        relax_time=relax_fraction * window.length,
    )


# ---------------------------------------------------------------------------
# Dominating-rate bookkeeping for the background part
# ---------------------------------------------------------------------------

_SAMPLED_SUP_SAFETY = 1.05
_SAMPLED_SUP_POINTS = 64


def _bg_segment_sup(bg, t: float, window: ObservationWindow, step: float):
    """(horizon, upper bound of bg on [t, horizon]); the bound is exact except
    for plain callables, which are sampled densely and padded."""
    if isinstance(bg, ConstantBackground):
        return window.end, bg.mu_c
    if isinstance(bg, PiecewiseLinearBackground):
        kt = bg.knot_times
        nxt = np.searchsorted(kt, t, side="right")
        horizon = float(kt[nxt]) if nxt < kt.size else window.end
        horizon = min(horizon, window.end)
        vals = np.interp([t, horizon], kt, bg.knot_values)
        return horizon, float(np.max(vals))
    if isinstance(bg, SplineBackground):
        bounds = bg.events.segment_bounds()
        idx = min(int(np.searchsorted(bounds, t, side="right")), bounds.size - 1)
        horizon = min(float(bounds[idx]) if bounds[idx] > t else window.end, window.end)
        return horizon, float(bg.segment_rates()[min(idx - 1, bg.events.n)])
    horizon = min(t + step, window.end)
    if hasattr(bg, "sup"):
        return horizon, float(bg.sup(t, horizon))
    samples = np.asarray([bg(s) for s in np.linspace(t, horizon, _SAMPLED_SUP_POINTS)])
    if not np.all(np.isfinite(samples)):
        raise DomainError("background rate is unbounded on the window")
    return horizon, float(np.max(samples)) * _SAMPLED_SUP_SAFETY


# ---------------------------------------------------------------------------
# Thinning simulation
# ---------------------------------------------------------------------------


def simulate(window: ObservationWindow, bg, kernel: ExponentialKernel, seed,
             *, lookahead: float | None = None, max_events: int = 2_000_000) -> EventSequence:
    """Draw one Hawkes realization on the window, reproducible per seed.

    The kernel must be subcritical (branching ratio below one) and the
    background bounded.  ``seed`` is anything ``numpy.random.default_rng``
    accepts, e.g. an integer or a (seed, replicate) pair.
    """
    eta = branching_ratio(kernel)
    if eta >= 1.0:
        raise DomainError(f"unstable kernel: branching ratio {eta:.3f} >= 1")
    rng = np.random.default_rng(seed)
    step = lookahead if lookahead is not None else window.length / 200.0

    ab = kernel.alphas * kernel.betas
    decayed = np.zeros(kernel.order)  # sum_k exp(-beta_j (t - t_k)) per component
    t = window.start
    times: list[float] = []
    while t < window.end:
        horizon, bg_bound = _bg_segment_sup(bg, t, window, step)
        if not np.isfinite(bg_bound):
            raise DomainError("background rate is unbounded on the window")
        lam_bar = bg_bound + float(ab @ decayed)
        if lam_bar <= 0.0 or horizon <= t:
            decayed *= np.exp(-kernel.betas * (max(horizon, t) - t))
            t = max(horizon, t) if horizon > t else window.end
            continue
        wait = rng.exponential(1.0 / lam_bar)
        if t + wait > horizon:
            decayed *= np.exp(-kernel.betas * (horizon - t))
            t = horizon
            continue
        decayed *= np.exp(-kernel.betas * wait)
        t = t + wait
        if t >= window.end:
            break
        lam_t = float(background_rate_at(bg, t)) + float(ab @ decayed)
        if rng.uniform() * lam_bar <= lam_t:
            times.append(t)
            decayed += 1.0
            if len(times) > max_events:
                raise DomainError("simulation exceeded the event cap; rates too high")
    return EventSequence(np.asarray(times), window)


# ---------------------------------------------------------------------------
# Batch simulation with manifest
# ---------------------------------------------------------------------------


def _replicate_file(index: int) -> str:
    return f"rep_{index:04d}.csv"


def _simulate_one(args):
    outdir, window_se, bg_spec, kernel_params, seed, index = args
    window = ObservationWindow(*window_se)
    bg = _bg_from_spec(bg_spec, window)
    kernel = ExponentialKernel(*kernel_params)
    seq = simulate(window, bg, kernel, seed=[seed, index])
    seq.to_csv(Path(outdir) / _replicate_file(index))
    return index, seq.n


def _bg_from_spec(spec: dict, window: ObservationWindow):
    kind = spec["scenario"]
    if kind == "constant":
        return ConstantBackground(spec["mu"])
    if kind == "ushape":
        return UShapeRate(window, spec["floor_rate"], spec["edge_ratio"])
    if kind == "news":
        return NewsShockRate(
            window, spec["t_news"], spec["base_rate"], spec["jump_factor"], spec["relax_time"]
        )
    raise DomainError(f"unknown scenario {kind!r}")


def write_batch(outdir, window: ObservationWindow, bg_spec: dict,
                kernel: ExponentialKernel, replicates: int, seed: int,
                workers: int = 1) -> dict:
    """Simulate a batch of replicates, one CSV each, plus a manifest JSON.

    Replicate i uses the RNG stream (seed, i), so results do not depend on
    the worker count or scheduling order.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = [
        (str(outdir), (window.start, window.end), bg_spec,
         (kernel.alphas.tolist(), kernel.betas.tolist()), seed, i)
        for i in range(replicates)
    ]
    counts = {}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, count in pool.map(_simulate_one, jobs):
                counts[index] = count
    else:
        for job in jobs:
            index, count = _simulate_one(job)
            counts[index] = count
    manifest = {
        "scenario": bg_spec,
        "window": {"start": window.start, "end": window.end},
        "kernel": {"alphas": kernel.alphas.tolist(), "betas": kernel.betas.tolist()},
        "replicates": replicates,
        "seed": seed,
        "files": [_replicate_file(i) for i in range(replicates)],
        "event_counts": [counts[i] for i in range(replicates)],
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
