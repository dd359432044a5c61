"""Variable-width cubic B-spline bases over the natural-time coordinate.

Natural time places the i-th of n events at integer position i, with the
window endpoints at 0 and n+1.  A family of m uniform cubic B-spline bumps
is laid out on equidistant knots in that coordinate, and mapped back to
actual time by freezing each basis function to its natural-time value on
every inter-event segment.  Dense bursts of events therefore get narrow
bases in actual time and quiet stretches get wide ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, DomainError

__all__ = [
    "bspline_base",
    "bspline_base_deriv",
    "basis_count",
    "build_basis",
    "NaturalTimeBasis",
]

#: Width of the support of the unit-spaced cubic B-spline bump.
SUPPORT = 4.0


def bspline_base(x):
    """Uniform cubic B-spline bump on [0, 4], C2 and symmetric about x=2.

    Integer shifts of this bump sum to one, which is what makes the
    basis rows a partition of unity.
    """
    x_arr = np.asarray(x, dtype=float)
    y0 = x_arr          # local coordinate on [0, 1)
    y1 = x_arr - 1.0    # on [1, 2)
    y2 = x_arr - 2.0    # on [2, 3)
    y3 = x_arr - 3.0    # on [3, 4)
    out = np.select(
        [
            (x_arr >= 0.0) & (x_arr < 1.0),
            (x_arr >= 1.0) & (x_arr < 2.0),
            (x_arr >= 2.0) & (x_arr < 3.0),
            (x_arr >= 3.0) & (x_arr < 4.0),
        ],
        [
            y0 ** 3 / 6.0,
            (1.0 + 3.0 * y1 + 3.0 * y1 ** 2 - 3.0 * y1 ** 3) / 6.0,
            (4.0 - 6.0 * y2 ** 2 + 3.0 * y2 ** 3) / 6.0,
            (1.0 - y3) ** 3 / 6.0,
        ],
        default=0.0,
    )
    return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out


def bspline_base_deriv(x):
    """First derivative of :func:`bspline_base`; antisymmetric about x=2."""
    x_arr = np.asarray(x, dtype=float)
    y0 = x_arr
    y1 = x_arr - 1.0
    y2 = x_arr - 2.0
    y3 = x_arr - 3.0
    out = np.select(
        [
            (x_arr >= 0.0) & (x_arr < 1.0),
            (x_arr >= 1.0) & (x_arr < 2.0),
            (x_arr >= 2.0) & (x_arr < 3.0),
            (x_arr >= 3.0) & (x_arr < 4.0),
        ],
        [
            y0 ** 2 / 2.0,
            (1.0 + 2.0 * y1 - 3.0 * y1 ** 2) / 2.0,
            y2 * (3.0 * y2 - 4.0) / 2.0,
            -((1.0 - y3) ** 2) / 2.0,
        ],
        default=0.0,
    )
    return float(out) if np.isscalar(x) or x_arr.ndim == 0 else out


def _nearest_int(x: float) -> int:
    """Nearest integer with halves rounded away from zero."""
    return int(np.floor(x + 0.5)) if x >= 0 else -int(np.floor(-x + 0.5))


def basis_count(n: int, k: int) -> int:
    """Number of basis functions for n events at k events per basis.

    The count is 3 + round(n/k), floored at the minimum of 4 required
    for at least one knot interval.
    """
    return max(4, 3 + _nearest_int(n / k))


@dataclass(frozen=True)
class NaturalTimeBasis:
    """Cubic B-spline basis matrix sampled at the natural-time grid points.

    ``values[i, j]`` is basis function j evaluated at natural time i for
    i = 0..n+1; every row sums to one and has at most four consecutive
    nonzero entries.  ``derivs[i - 1, j]`` is the natural-time derivative
    of basis function j at the i-th event position, i = 1..n.

    ``offsets`` gives the first active column of each row, and
    ``compact_values`` / ``compact_derivs`` hold the four active entries
    per row, which is what the fitting code iterates over.
    """

    n: int
    m: int
    w: float
    values: np.ndarray          # (n + 2, m)
    derivs: np.ndarray          # (n, m)
    offsets: np.ndarray         # (n + 2,) first active column per row
    compact_values: np.ndarray  # (n + 2, 4)
    compact_derivs: np.ndarray  # (n, 4)

    def to_csv(self, path) -> None:
        """Dump the dense basis matrix, one row per natural-time point."""
        header = ",".join(f"f{j + 1}" for j in range(self.m))
        np.savetxt(path, self.values, delimiter=",", header=header, comments="")

    def gram_deriv(self) -> np.ndarray:
        """Gram matrix of the derivative rows, derivs.T @ derivs (m x m)."""
        return self.derivs.T @ self.derivs


def build_basis(n: int, k: int = 50, m: int | None = None) -> NaturalTimeBasis:
    """Build the natural-time basis for n events with divisor k.

    ``m`` may be given explicitly to override the count rule, which is
    occasionally useful in diagnostics; it must be at least 4.
    """
    if n < 1:
        raise DomainError("need at least one event to build a basis")
    if k < 1:
        raise DomainError("events-per-basis divisor must be at least 1")
    if m is None:
        m = basis_count(n, k)
    if m < 4:
        raise ConfigurationError(f"basis needs m >= 4 functions, got {m}")

    w = (n + 1) / (m - 3)
    grid = np.arange(n + 2, dtype=float)
    u = grid / w
    offsets = np.clip(np.floor(u).astype(int), 0, m - 4)
    # local coordinates of the four active bumps: row i, column offsets[i] + a
    local = u[:, None] - offsets[:, None] - np.arange(4)[None, :] + 3.0
    compact_values = bspline_base(local)
    compact_derivs = bspline_base_deriv(local[1 : n + 1]) / w

    values = np.zeros((n + 2, m))
    derivs = np.zeros((n, m))
    rows = np.arange(n + 2)[:, None]
    cols = offsets[:, None] + np.arange(4)[None, :]
    values[rows, cols] = compact_values
    derivs[rows[1 : n + 1] - 1, cols[1 : n + 1]] = compact_derivs

    values.setflags(write=False)
    derivs.setflags(write=False)
    offsets.setflags(write=False)
    compact_values.setflags(write=False)
    compact_derivs.setflags(write=False)
    return NaturalTimeBasis(
        n=n,
        m=m,
        w=w,
        values=values,
        derivs=derivs,
        offsets=offsets,
        compact_values=compact_values,
        compact_derivs=compact_derivs,
    )
