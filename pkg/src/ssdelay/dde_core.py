"""Fixed-step method-of-steps integration for constant-delay and neutral systems.

The step is snapped to ``h = tau / m`` so that every delayed lookup of a
classical RK4 step falls on an already completed interval: stage times
``t, t + h/2, t + h`` look back to a node, a midpoint and the next node of
the interval exactly ``m`` steps behind.  Midpoints are read from the cubic
Hermite interpolant of that interval, which is also the dense output.

A trajectory is stored as one contiguous buffer of nodes.  The first
``m + 1`` nodes are the initial history, node ``m`` is the initial time.
Each node carries a right derivative (used as the start slope of the
interval it opens) and a left derivative (end slope of the interval it
closes), so derivative jumps at breakpoints are represented exactly.
That matters for neutral equations, where jumps never smooth out.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .errors import ConfigurationError, DivergenceError

DIVERGENCE_GUARD = 1.0e6
DEFAULT_STEP = 1.0e-3


# --------------------------------------------------------------------------
# Hermite helpers
# --------------------------------------------------------------------------

def _hermite(x0, x1, f0, f1, h, s):
    """Cubic Hermite value on an interval of length ``h`` at fraction ``s``."""
    s2 = s * s
    s3 = s2 * s
    h00 = 2.0 * s3 - 3.0 * s2 + 1.0
    h10 = s3 - 2.0 * s2 + s
    h01 = -2.0 * s3 + 3.0 * s2
    h11 = s3 - s2
    return h00 * x0 + h * h10 * f0 + h01 * x1 + h * h11 * f1


def _hermite_slope(x0, x1, f0, f1, h, s):
    s2 = s * s
    d00 = (6.0 * s2 - 6.0 * s) / h
    d10 = 3.0 * s2 - 4.0 * s + 1.0
    d01 = (-6.0 * s2 + 6.0 * s) / h
    d11 = 3.0 * s2 - 2.0 * s
    return d00 * x0 + d10 * f0 + d01 * x1 + d11 * f1


_SNAP = 1.0e-9


def _dense(X, FR, FL, h, u, with_slope=False):
    """Evaluate node buffers at fractional node coordinates ``u`` (1-D array).

    Coordinates within ``_SNAP`` of an integer return the stored node exactly.
    """
    u = np.asarray(u, dtype=float)
    n_int = X.shape[0] - 1
    k = np.rint(u)
    on_node = np.abs(u - k) < _SNAP
    j = np.clip(np.floor(u).astype(np.int64), 0, n_int - 1)
    s = (u - j)[:, None]
    vals = _hermite(X[j], X[j + 1], FR[j], FL[j + 1], h, s)
    kk = np.clip(k.astype(np.int64), 0, n_int)
    vals[on_node] = X[kk[on_node]]
    if not with_slope:
        return vals
    slopes = _hermite_slope(X[j], X[j + 1], FR[j], FL[j + 1], h, s)
    slopes[on_node] = FR[kk[on_node]]
    last = on_node & (kk == n_int)
    slopes[last] = FL[n_int]
    return vals, slopes


# --------------------------------------------------------------------------
# History segments
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HistorySegment:
    """State of a delay equation: samples of a function on ``[-delay, 0]``.

    ``values`` and ``derivatives`` have shape ``(m + 1, dim)`` on the uniform
    grid ``-delay + k * delay / m``.  ``left_derivatives`` only differs from
    ``derivatives`` at nodes where the represented function has a kink.
    """

    delay: float
    values: np.ndarray
    derivatives: np.ndarray
    left_derivatives: np.ndarray | None = None

    def __post_init__(self):
        if not (self.delay > 0 and math.isfinite(self.delay)):
            raise ConfigurationError(f"delay must be positive and finite, got {self.delay}")
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        ders = np.array(self.derivatives, dtype=float).reshape(vals.shape)
        if vals.shape[0] < 2:
            raise ConfigurationError("a history segment needs at least 2 grid nodes")
        left = ders if self.left_derivatives is None else np.array(
            self.left_derivatives, dtype=float).reshape(vals.shape)
        for arr in (vals, ders, left):
            arr.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "derivatives", ders)
        object.__setattr__(self, "left_derivatives", left)

    @property
    def m(self) -> int:
        return self.values.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def step(self) -> float:
        return self.delay / self.m

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(-self.delay, 0.0, self.m + 1)

    def __call__(self, theta):
        """Dense evaluation at ``theta`` in ``[-delay, 0]``; returns ``(n, dim)``."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if np.any(theta < -self.delay - 1e-12) or np.any(theta > 1e-12):
            raise ConfigurationError("history evaluated outside [-delay, 0]")
        u = (theta + self.delay) / self.step
        return _dense(self.values, self.derivatives, self.left_derivatives, self.step, u)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def resample(self, m: int) -> "HistorySegment":
        """Return the same function sampled on an ``m + 1`` node grid."""
        if m == self.m:
            return self
        theta = np.linspace(-self.delay, 0.0, m + 1)
        u = (theta + self.delay) / self.step
        vals, slopes = _dense(self.values, self.derivatives, self.left_derivatives,
                              self.step, u, with_slope=True)
        return HistorySegment(self.delay, vals, slopes)

    def scaled(self, factor: float) -> "HistorySegment":
        return HistorySegment(self.delay, factor * self.values, factor * self.derivatives,
                              factor * self.left_derivatives)

    @classmethod
    def from_function(cls, func: Callable, delay: float, m: int,
                      derivative: Callable | None = None) -> "HistorySegment":
        """Sample ``func(theta)`` (vectorised over a theta array) on ``m + 1`` nodes.

        Without ``derivative`` the slopes come from second-order finite
        differences of the samples.
        """
        m = int(m)
        if m < 1:
            raise ConfigurationError("m must be >= 1")
        theta = np.linspace(-delay, 0.0, m + 1)
        vals = np.asarray(func(theta), dtype=float)
        vals = vals.reshape(m + 1, -1) if vals.ndim > 1 else vals[:, None]
        if derivative is not None:
            ders = np.asarray(derivative(theta), dtype=float).reshape(vals.shape)
        else:
            ders = np.gradient(vals, theta, axis=0, edge_order=2 if m >= 2 else 1)
        return cls(delay, vals, ders)

    @classmethod
    def constant(cls, value, delay: float, m: int) -> "HistorySegment":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        vals = np.tile(value, (m + 1, 1))
        return cls(delay, vals, np.zeros_like(vals))

    @classmethod
    def linear(cls, at_minus_tau: float, at_zero: float, delay: float, m: int) -> "HistorySegment":
        slope = (at_zero - at_minus_tau) / delay
        return cls.from_function(lambda th: at_zero + slope * th, delay, m,
                                 lambda th: np.full_like(th, slope))

    @classmethod
    def stack(cls, segments: Sequence["HistorySegment"]) -> "HistorySegment":
        """Combine scalar segments sharing delay and grid into one vector segment."""
        first = segments[0]
        for seg in segments[1:]:
            if seg.m != first.m or seg.delay != first.delay:
                raise ConfigurationError("stacked segments must share delay and grid")
        return cls(first.delay,
                   np.hstack([s.values for s in segments]),
                   np.hstack([s.derivatives for s in segments]),
                   np.hstack([s.left_derivatives for s in segments]))

    def component(self, k: int) -> "HistorySegment":
        return HistorySegment(self.delay, self.values[:, k:k + 1], self.derivatives[:, k:k + 1],
                              self.left_derivatives[:, k:k + 1])


# --------------------------------------------------------------------------
# Right-hand sides and configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DelayRhs:
    """Right-hand side ``func(t, x, x_delayed, params) -> dx/dt``.

    ``x`` and ``x_delayed`` are 1-D float arrays of length ``dimension``,
    ``params`` a 1-D float array.  Passing a ``numba.njit`` compiled function
    selects the compiled stepping loop; any other callable runs the same loop
    in plain Python.
    """

    dimension: int
    func: Callable
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))
    forced: bool = False

    def __post_init__(self):
        p = np.ascontiguousarray(np.atleast_1d(np.asarray(self.params, dtype=float)))
        object.__setattr__(self, "params", p)
        if self.dimension < 1:
            raise ConfigurationError("dimension must be positive")

    @property
    def compiled(self) -> bool:
        return hasattr(self.func, "py_func")


@dataclass(frozen=True)
class StepperConfig:
    step_size: float = DEFAULT_STEP
    max_time: float = 1.0e7
    guard: float = DIVERGENCE_GUARD

    def snapped_m(self, delay: float) -> int:
        """Smallest even ``m >= ceil(delay / step_size)``; the step used is ``delay / m``."""
        h = self.step_size
        if not (h > 0 and math.isfinite(h)):
            raise ConfigurationError(f"step size must be positive and finite, got {h}")
        if h > delay:
            raise ConfigurationError(
                f"step size {h} exceeds the delay {delay}; delayed lookups would overlap the current step")
        m = max(2, math.ceil(delay / h - 1e-9))
        return m + (m % 2)


# --------------------------------------------------------------------------
# Stepping kernel
# --------------------------------------------------------------------------

def _steps_py(rhs, params, X, FR, FL, Z, m, h, t0, n_start, n_end, q, guard):
    """Advance nodes ``m + n_start`` .. ``m + n_end``.  Returns the first failed step or -1.

    ``Z[n]`` holds ``x(t_n) - q x(t_n - tau)``; with ``q = 0`` this is the
    plain RK4 method of steps for ``x' = rhs``.
    """
    half = 0.5 * h
    k1 = rhs(t0 + n_start * h, X[m + n_start], X[n_start], params)
    for n in range(n_start, n_end):
        i = m + n
        t = t0 + n * h
        t_next = t0 + (n + 1) * h
        xd2 = X[n + 1]
        xd1 = 0.5 * (X[n] + xd2) + 0.125 * h * (FR[n] - FL[n + 1])
        z = Z[n]
        k2 = rhs(t + half, z + half * k1 + q * xd1, xd1, params)
        k3 = rhs(t + half, z + half * k2 + q * xd1, xd1, params)
        k4 = rhs(t_next, z + h * k3 + q * xd2, xd2, params)
        znew = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        xnew = znew + q * xd2
        bad = False
        for c in range(xnew.shape[0]):
            v = xnew[c]
            if not (abs(v) <= guard):
                bad = True
        if bad:
            return n
        Z[n + 1] = znew
        X[i + 1] = xnew
        k1 = rhs(t_next, xnew, xd2, params)
        FR[i + 1] = k1 + q * FR[n + 1]
        FL[i + 1] = k1 + q * FL[n + 1]
    return -1


_steps_jit = njit(cache=True, nogil=True)(_steps_py)


def _start_slope(rhs: DelayRhs, X, FR, m, t0, q):
    return np.asarray(rhs.func(t0, X[m].copy(), X[0].copy(), rhs.params), dtype=float) + q * FR[0]


# --------------------------------------------------------------------------
# Trajectories
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    """Dense record of a solution on ``[t_start - delay, t_end]``.

    Node ``k`` of the buffers sits at ``t_start + (k - m) * step``.  ``Z``
    holds the integrated neutral variable ``x(t) - q x(t - delay)`` on the
    nodes from ``t_start`` on (equal to ``x`` when ``q = 0``).
    """

    t_start: float
    step: float
    m: int
    X: np.ndarray
    FR: np.ndarray
    FL: np.ndarray
    Z: np.ndarray
    q: float = 0.0

    def __post_init__(self):
        for arr in (self.X, self.FR, self.FL, self.Z):
            arr.setflags(write=False)

    @property
    def delay(self) -> float:
        return self.m * self.step

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    @property
    def n_steps(self) -> int:
        return self.X.shape[0] - 1 - self.m

    @property
    def t_end(self) -> float:
        return self.t_start + self.n_steps * self.step

    @property
    def times(self) -> np.ndarray:
        """Node times from ``t_start`` to ``t_end``."""
        return self.t_start + self.step * np.arange(self.n_steps + 1)

    @property
    def states(self) -> np.ndarray:
        """Node states from ``t_start`` on, shape ``(n_steps + 1, dim)``."""
        return self.X[self.m:]

    def _coords(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo = self.t_start - self.delay
        tol = 1e-9 * max(1.0, abs(self.t_end))
        if np.any(t < lo - tol) or np.any(t > self.t_end + tol):
            raise ConfigurationError(
                f"time outside trajectory domain [{lo}, {self.t_end}]")
        return (t - lo) / self.step

    def evaluate(self, t):
        """State at ``t`` (scalar -> ``(dim,)``, array -> ``(n, dim)``)."""
        scalar = np.ndim(t) == 0
        vals = _dense(self.X, self.FR, self.FL, self.step, self._coords(t))
        return vals[0] if scalar else vals

    def segment_at(self, t: float) -> HistorySegment:
        """The state ``x_t`` as a history segment on the integration grid."""
        if t < self.t_start - 1e-9 or t > self.t_end + 1e-9:
            raise ConfigurationError(f"segment_at({t}) outside [{self.t_start}, {self.t_end}]")
        u0 = self._coords(t)[0] - self.m
        k0 = int(round(u0))
        if abs(u0 - k0) < _SNAP:
            sl = slice(k0, k0 + self.m + 1)
            return HistorySegment(self.delay, self.X[sl], self.FR[sl], self.FL[sl])
        u = u0 + np.arange(self.m + 1)
        vals, slopes = _dense(self.X, self.FR, self.FL, self.step, u, with_slope=True)
        return HistorySegment(self.delay, vals, slopes)

    def final_segment(self) -> HistorySegment:
        return self.segment_at(self.t_end)

    def sample(self, stride: int = 1):
        """Node times and states from ``t_start`` every ``stride`` steps."""
        return self.times[::stride], self.states[::stride]

    def to_csv(self, path, stride: int = 1) -> Path:
        return write_trajectory_csv(path, *self.sample(stride))


def write_trajectory_csv(path, times, states) -> Path:
    path = Path(path)
    states = np.asarray(states).reshape(len(times), -1)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{k + 1}" for k in range(states.shape[1])])
        for t, row in zip(times, states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    return path


def _run(rhs: DelayRhs, history: HistorySegment, t_span, config: StepperConfig, q: float):
    t0, t1 = (float(v) for v in t_span)
    if not t1 >= t0:
        raise ConfigurationError("t_span must satisfy end >= start (no backward integration)")
    if t1 - t0 > config.max_time:
        raise ConfigurationError(f"requested horizon {t1 - t0} exceeds max_time {config.max_time}")
    if history.dim != rhs.dimension:
        raise ConfigurationError(
            f"history dimension {history.dim} does not match rhs dimension {rhs.dimension}")
    m = config.snapped_m(history.delay)
    history = history.resample(m)
    h = history.delay / m
    n_steps = max(0, math.ceil((t1 - t0) / h - 1e-9))
    d = rhs.dimension
    size = m + n_steps + 1
    X = np.empty((size, d))
    FR = np.empty((size, d))
    FL = np.empty((size, d))
    Z = np.empty((n_steps + 1, d))
    X[:m + 1] = history.values
    FR[:m + 1] = history.derivatives
    FL[:m + 1] = history.left_derivatives
    FR[m] = _start_slope(rhs, X, FR, m, t0, q)
    Z[0] = X[m] - q * X[0]
    if not np.all(np.isfinite(X[:m + 1])) or np.any(np.abs(X[:m + 1]) > config.guard):
        raise DivergenceError("initial history is outside the divergence guard", t0)
    kernel = _steps_jit if rhs.compiled else _steps_py
    fail = kernel(rhs.func, rhs.params, X, FR, FL, Z, m, h, t0, 0, n_steps, q, config.guard)
    if fail >= 0:
        raise DivergenceError(
            f"state exceeded {config.guard:g} or became non-finite near t = {t0 + (fail + 1) * h:.6g}",
            t0 + (fail + 1) * h)
    return Trajectory(t0, h, m, X, FR, FL, Z, q)


def integrate(rhs: DelayRhs, history: HistorySegment, t_span, config: StepperConfig | None = None
              ) -> Trajectory:
    """Integrate ``x'(t) = rhs(t, x(t), x(t - delay))`` from ``history`` over ``t_span``.

    The history is resampled to the snapped grid if needed.  The returned
    trajectory ends at the first grid time not before ``t_span[1]``.

    Raises
    ------
    ConfigurationError
        Bad step size, dimension mismatch or an inverted span.
    DivergenceError
        A component exceeded the divergence guard; ``err.t`` is the blow-up time.
    """
    return _run(rhs, history, t_span, config or StepperConfig(), 0.0)


def integrate_neutral(rhs: DelayRhs, q: float, history: HistorySegment, t_span,
                      config: StepperConfig | None = None) -> Trajectory:
    """Integrate ``d/dt [x(t) - q x(t - delay)] = rhs(t, x(t), x(t - delay))``.

    The substituted variable ``z = x - q x(t - delay)`` is stepped with RK4
    and ``x`` is recovered node by node from ``x(t) = z(t) + q x(t - delay)``.
    """
    if not (0.0 < q < 1.0):
        raise ConfigurationError(f"neutral coefficient q must lie in (0, 1), got {q}")
    return _run(rhs, history, t_span, config or StepperConfig(), float(q))


def continue_from(rhs: DelayRhs, traj: Trajectory, t_end: float,
                  config: StepperConfig | None = None) -> Trajectory:
    """Restart from the final segment of ``traj``; same grid, same neutral coefficient."""
    config = config or StepperConfig(step_size=traj.step)
    seg = traj.final_segment()
    if config.snapped_m(seg.delay) != traj.m:
        config = StepperConfig(step_size=traj.step, max_time=config.max_time, guard=config.guard)
    return _run(rhs, seg, (traj.t_end, t_end), config, traj.q)


def evaluate(trajectory: Trajectory, t):
    return trajectory.evaluate(t)


def segment_at(trajectory: Trajectory, t: float) -> HistorySegment:
    return trajectory.segment_at(t)
