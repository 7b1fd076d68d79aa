"""Waypoint smoothing: cubic splines, Gaussian filtering, Hermite curves.

The sampling-based waypoint planner emits an unevenly timed, non-smooth
knot sequence. Smoothing proceeds in three stages: natural cubic-spline
interpolation of each coordinate onto a dense uniform grid, discrete
Gaussian convolution with boundary-renormalized weights, and encoding
as a piecewise cubic Hermite curve with central-difference knot
velocities. The result is C1 and cheap to evaluate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SmoothingError(Exception):
    pass


@dataclass(frozen=True)
class DenseSamples:
    """Uniform time grid with one R^3 sample per grid point."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(-1, 3)
        if len(t) != len(v) or len(t) < 2:
            raise SmoothingError("dense samples need matching times/values, length >= 2")
        dt = np.diff(t)
        if np.any(dt <= 0) or np.max(np.abs(dt - dt[0])) > 1e-9 * max(1.0, dt[0]):
            raise SmoothingError("dense sample grid must be uniform and increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class HermiteTrajectory:
    """Piecewise cubic Hermite curve: knot times, positions, velocities."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        p = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        v = np.asarray(self.velocities, dtype=float).reshape(-1, 3)
        if not (len(t) == len(p) == len(v)) or len(t) < 2:
            raise SmoothingError("hermite trajectory needs >= 2 consistent knots")
        if np.any(np.diff(t) <= 0):
            raise SmoothingError("hermite knot times must increase")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)
        object.__setattr__(self, "velocities", v)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def __call__(self, t: float):
        return eval_hermite(self, t)


def _natural_spline_second_derivatives(t, y):
    """Second derivatives of the natural cubic spline through (t, y)."""
    n = len(t)
    h = np.diff(t)
    # Thomas algorithm on the interior tridiagonal system
    m = np.zeros(n)
    if n == 2:
        return m
    lower = h[:-1] / 6.0
    diag = (h[:-1] + h[1:]) / 3.0
    upper = h[1:] / 6.0
    rhs = (y[2:] - y[1:-1]) / h[1:] - (y[1:-1] - y[:-2]) / h[:-1]
    k = n - 2
    cp = np.zeros(k)
    dp = np.zeros(k)
    cp[0] = upper[0] / diag[0]
    dp[0] = rhs[0] / diag[0]
    for i in range(1, k):
        denom = diag[i] - lower[i] * cp[i - 1]
        cp[i] = upper[i] / denom
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom
    x = np.zeros(k)
    x[-1] = dp[-1]
    for i in range(k - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    m[1:-1] = x
    return m


def _spline_eval(t_knots, y, m, tq):
    """Evaluate the cubic spline with second derivatives m at times tq.

    Pivot form y_i + b (y_{i+1} - y_i) + cubic terms: constants pass
    through bit-exactly.
    """
    idx = np.clip(np.searchsorted(t_knots, tq, side="right") - 1, 0, len(t_knots) - 2)
    h = t_knots[idx + 1] - t_knots[idx]
    a = (t_knots[idx + 1] - tq) / h
    b = (tq - t_knots[idx]) / h
    return (
        y[idx]
        + b * (y[idx + 1] - y[idx])
        + ((a ** 3 - a) * m[idx] + (b ** 3 - b) * m[idx + 1]) * h ** 2 / 6.0
    )


def cubic_spline_interpolate(waypoints, grid_step: float) -> DenseSamples:
    """Natural cubic spline through timed waypoints, sampled uniformly.

    `waypoints` is any object with `times` (K,) and `positions` (K, 3)
    attributes, or a (K, 4) array of [t, x, y, z] rows. The returned
    grid spans exactly [t_min, t_max] with spacing as close to
    grid_step as an integer subdivision allows.
    """
    if hasattr(waypoints, "times"):
        t = np.asarray(waypoints.times, dtype=float)
        p = np.asarray(waypoints.positions, dtype=float)
    else:
        arr = np.asarray(waypoints, dtype=float)
        t, p = arr[:, 0], arr[:, 1:4]
    if len(t) < 4:
        raise SmoothingError("cubic spline interpolation needs at least 4 knots")
    if len(np.unique(t)) != len(t):
        raise SmoothingError("duplicate knot times")
    if np.any(np.diff(t) <= 0):
        raise SmoothingError("knot times must be strictly increasing")
    if grid_step <= 0:
        raise SmoothingError("grid_step must be > 0")
    span = t[-1] - t[0]
    n = max(2, int(round(span / grid_step)))
    grid = np.linspace(t[0], t[-1], n + 1)
    out = np.empty((n + 1, 3))
    for c in range(3):
        m = _natural_spline_second_derivatives(t, p[:, c])
        out[:, c] = _spline_eval(t, p[:, c], m, grid)
    # interpolation property: knots on the grid reproduce exactly
    return DenseSamples(grid, out)


def gaussian_kernel(sigma: float, radius: int | None = None) -> np.ndarray:
    """Unnormalized Gaussian taps exp(-n^2 / (2 sigma^2)), |n| <= radius."""
    if sigma <= 0:
        raise SmoothingError("sigma must be > 0")
    if radius is None:
        radius = max(1, int(np.ceil(4.0 * sigma)))
    n = np.arange(-radius, radius + 1, dtype=float)
    return np.exp(-(n ** 2) / (2.0 * sigma ** 2))


def gaussian_smooth(dense: DenseSamples, sigma: float) -> DenseSamples:
    """Discrete Gaussian convolution with per-index renormalization.

    The kernel is truncated at +-4 sigma; near the boundaries the
    surviving taps are renormalized so they sum to 1 at every output
    index. Sigma is measured in grid-index units; sigma far below one
    grid step degenerates to the identity (single surviving tap).
    """
    w = gaussian_kernel(sigma)
    radius = (len(w) - 1) // 2
    x = dense.values
    n = len(x)
    out = np.empty_like(x)
    for j in range(n):
        lo = max(0, j - radius)
        hi = min(n, j + radius + 1)
        taps = w[lo - j + radius : hi - j + radius]
        taps = taps / np.sum(taps)
        # pivot form keeps constants bit-exact: x_j + sum w (x_l - x_j)
        out[j] = x[j] + taps @ (x[lo:hi] - x[j])
    return DenseSamples(dense.times, out)


def normalized_kernel_weights(dense_len: int, sigma: float, index: int) -> np.ndarray:
    """Renormalized kernel taps applied at one output index (for audits)."""
    w = gaussian_kernel(sigma)
    radius = (len(w) - 1) // 2
    lo = max(0, index - radius)
    hi = min(dense_len, index + radius + 1)
    taps = w[lo - index + radius : hi - index + radius]
    return taps / np.sum(taps)


def build_hermite(dense: DenseSamples) -> HermiteTrajectory:
    """Hermite encoding with central-difference interior velocities."""
    t, x = dense.times, dense.values
    if len(t) < 3:
        raise SmoothingError("hermite encoding needs at least 3 samples")
    v = np.empty_like(x)
    v[1:-1] = (x[2:] - x[:-2]) / (t[2:] - t[:-2])[:, None]
    v[0] = (x[1] - x[0]) / (t[1] - t[0])
    v[-1] = (x[-1] - x[-2]) / (t[-1] - t[-2])
    return HermiteTrajectory(t, x, v)


def eval_hermite(h: HermiteTrajectory, t: float):
    """Position and velocity of the Hermite curve at time t.

    No extrapolation: t outside [t_start, t_end] raises.
    """
    if t < h.t_start - 1e-9 or t > h.t_end + 1e-9:
        raise SmoothingError(
            f"time {t} outside hermite range [{h.t_start}, {h.t_end}]"
        )
    t = min(max(t, h.t_start), h.t_end)
    j = int(np.searchsorted(h.times, t, side="right")) - 1
    j = min(max(j, 0), len(h.times) - 2)
    dt = h.times[j + 1] - h.times[j]
    s = (t - h.times[j]) / dt
    h00 = 2 * s ** 3 - 3 * s ** 2 + 1
    h10 = -2 * s ** 3 + 3 * s ** 2
    h01 = s ** 3 - 2 * s ** 2 + s
    h11 = s ** 3 - s ** 2
    p = (
        h00 * h.positions[j]
        + h10 * h.positions[j + 1]
        + h01 * dt * h.velocities[j]
        + h11 * dt * h.velocities[j + 1]
    )
    d00 = 6 * s ** 2 - 6 * s
    d10 = -6 * s ** 2 + 6 * s
    d01 = 3 * s ** 2 - 4 * s + 1
    d11 = 3 * s ** 2 - 2 * s
    v = (
        (d00 * h.positions[j] + d10 * h.positions[j + 1]) / dt
        + d01 * h.velocities[j]
        + d11 * h.velocities[j + 1]
    )
    return p, v


def sample_hermite(h: HermiteTrajectory, times) -> np.ndarray:
    """Positions at many query times (for monitoring and export)."""
    return np.array([eval_hermite(h, float(t))[0] for t in np.asarray(times)])


def smooth_waypoints(waypoints, grid_step: float, sigma: float) -> HermiteTrajectory:
    """Full pipeline: spline resample, Gaussian filter, Hermite encode."""
    dense = cubic_spline_interpolate(waypoints, grid_step)
    smoothed = gaussian_smooth(dense, sigma)
    return build_hermite(smoothed)


def hermite_to_table(h: HermiteTrajectory) -> dict:
    """JSON-ready knot/velocity table."""
    return {
        "times": h.times.tolist(),
        "positions": h.positions.tolist(),
        "velocities": h.velocities.tolist(),
    }
