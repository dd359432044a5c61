import numpy as np
import pytest

from splinehawkes import (
    ConstantBackground,
    EventSequence,
    ExponentialKernel,
    ObservationWindow,
    PiecewiseLinearBackground,
    SplineBackground,
    build_basis,
)


def random_kernel(rng, M=None, stable=False):
    """Random multi-exponential kernel; subcritical when stable is set."""
    if M is None:
        M = int(rng.integers(1, 5))
    total = rng.uniform(0.2, 0.9) if stable else rng.uniform(0.2, 1.4)
    raw = rng.uniform(0.2, 1.0, size=M)
    alphas = total * raw / raw.sum()
    betas = 10.0 ** rng.uniform(-1.3, 0.8, size=M)
    return ExponentialKernel(alphas, betas)


def random_sequence(rng, n=None, length=None):
    """Events drawn uniformly on a random window (not a Hawkes draw; any
    strictly increasing sequence is a valid likelihood input)."""
    if n is None:
        n = int(rng.integers(5, 300))
    if length is None:
        length = float(rng.uniform(20.0, 200.0))
    start = float(rng.uniform(-50.0, 50.0))
    times = np.sort(rng.uniform(start, start + length, size=n))
    times = np.unique(times)
    return EventSequence(times, ObservationWindow(start, start + length))


def random_background(rng, seq, family):
    """One of the three background families over the window of seq."""
    window = seq.window
    if family == "const":
        return ConstantBackground(rng.uniform(0.05, 3.0))
    if family == "pl":
        inner = np.sort(rng.uniform(window.start, window.end, size=int(rng.integers(1, 5))))
        knots = np.unique(np.concatenate([[window.start], inner, [window.end]]))
        values = rng.uniform(0.1, 3.0, size=knots.size)
        return PiecewiseLinearBackground(knots, values)
    if family == "spline":
        basis = build_basis(seq.n, k=max(1, seq.n // int(rng.integers(2, 8))))
        coeffs = rng.normal(0.0, 0.5, size=basis.m)
        return SplineBackground(coeffs, basis, seq)
    raise ValueError(family)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
