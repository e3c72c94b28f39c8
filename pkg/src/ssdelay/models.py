"""Model right-hand sides and parameter bundles.

Every model is exposed twice: as a plain scalar function for direct use and
as a :class:`~ssdelay.dde_core.DelayRhs` wrapping a compiled kernel for the
integrator.  Both call the same compiled scalar helpers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .dde_core import DelayRhs, HistorySegment
from .errors import ConfigurationError


# --------------------------------------------------------------------------
# Parameter bundles
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SuarezSchopfParams:
    alpha: float
    tau: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not (self.tau > 0.0 and math.isfinite(self.tau)):
            raise ConfigurationError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class ForcingSpec:
    """Additive forcing ``amplitude * sin(omega * t)``."""

    amplitude: float = 0.0
    omega: float = 1.0

    def __post_init__(self):
        if not self.amplitude >= 0.0:
            raise ConfigurationError(f"forcing amplitude must be >= 0, got {self.amplitude}")
        if not self.omega > 0.0:
            raise ConfigurationError(f"forcing angular frequency must be positive, got {self.omega}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega


@dataclass(frozen=True)
class TruncationSpec:
    R: float

    def __post_init__(self):
        if not self.R > 0.0:
            raise ConfigurationError(f"truncation radius must be positive, got {self.R}")

    @property
    def lipschitz(self) -> float:
        return 3.0 * self.R ** 2


@dataclass(frozen=True)
class GainFamilyParams:
    base: SuarezSchopfParams
    mu: float
    mu_inf: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.mu_inf < self.mu):
            raise ConfigurationError(
                f"gain slopes must satisfy 0 < mu_inf < mu, got mu={self.mu}, mu_inf={self.mu_inf}")
        if not (0.0 <= self.epsilon <= 1.0):
            raise ConfigurationError(f"epsilon must lie in [0, 1], got {self.epsilon}")

    def with_epsilon(self, epsilon: float) -> "GainFamilyParams":
        return GainFamilyParams(self.base, self.mu, self.mu_inf, float(epsilon))


@dataclass(frozen=True)
class RingParams:
    N: int
    a: float
    b: float
    d: float
    tau: float
    q: float

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ConfigurationError(f"ring size N must be an integer >= 2, got {self.N}")
        if not (0.0 < self.q < 1.0):
            raise ConfigurationError(f"q must lie in (0, 1), got {self.q}")
        for name in ("b", "d", "tau"):
            if not getattr(self, name) > 0.0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def alpha(self) -> float:
        """Delayed gain ``b * q`` of the nearly uncoupled Suarez-Schopf limit."""
        return self.b * self.q


# --------------------------------------------------------------------------
# Compiled scalar building blocks
# --------------------------------------------------------------------------

@njit(cache=True)
def _g_trunc(y, R):
    if y > R:
        return R ** 3 + 3.0 * R * R * (y - R)
    if y < -R:
        return -R ** 3 + 3.0 * R * R * (y + R)
    return y ** 3


@njit(cache=True)
def _gain(y, mu, mu_inf):
    if y > 1.0:
        return mu_inf * (y - 1.0) + mu
    if y < -1.0:
        return mu_inf * (y + 1.0) - mu
    return mu * y


@njit(cache=True)
def _family_scalar(x, xd, alpha, mu, mu_inf, eps):
    f = -x ** 3 + 3.0 * (1.0 - alpha) * x
    return (3.0 * alpha - 2.0) * x - alpha * xd + eps * f + (1.0 - eps) * _gain(x, mu, mu_inf)


@njit(cache=True)
def _ss_kernel(t, x, xd, p):
    # p = (alpha, amplitude, omega)
    out = np.empty(1)
    out[0] = x[0] - p[0] * xd[0] - x[0] ** 3 + p[1] * math.sin(p[2] * t)
    return out


@njit(cache=True)
def _ss_pair_kernel(t, x, xd, p):
    # independent copies of the forced model, one per component
    out = np.empty(x.shape[0])
    forcing = p[1] * math.sin(p[2] * t)
    for k in range(x.shape[0]):
        out[k] = x[k] - p[0] * xd[k] - x[k] ** 3 + forcing
    return out


@njit(cache=True)
def _truncated_kernel(t, x, xd, p):
    # p = (alpha, amplitude, omega, R)
    out = np.empty(1)
    out[0] = x[0] - p[0] * xd[0] - _g_trunc(x[0], p[3]) + p[1] * math.sin(p[2] * t)
    return out


@njit(cache=True)
def _family_kernel(t, x, xd, p):
    # p = (alpha, mu, mu_inf, epsilon)
    out = np.empty(1)
    out[0] = _family_scalar(x[0], xd[0], p[0], p[1], p[2], p[3])
    return out


@njit(cache=True)
def _variational_kernel(t, x, xd, p):
    # x = (base, v_1, ..., v_k); p = (alpha, amplitude, omega)
    out = np.empty(x.shape[0])
    y = x[0]
    out[0] = y - p[0] * xd[0] - y ** 3 + p[1] * math.sin(p[2] * t)
    slope = 1.0 - 3.0 * y * y
    for k in range(1, x.shape[0]):
        out[k] = slope * x[k] - p[0] * xd[k]
    return out


@njit(cache=True)
def _ring_kernel(t, x, xd, p):
    # p = (a, b, d, q); returns d/dt of z_k = x_k(t) - q x_k(t - tau)
    a, b, d, q = p[0], p[1], p[2], p[3]
    n = x.shape[0]
    out = np.empty(n)
    for k in range(n):
        kp = (k + 1) % n
        km = (k - 1) % n
        lap = x[kp] - 2.0 * x[k] + x[km]
        lap_d = xd[kp] - 2.0 * xd[k] + xd[km]
        out[k] = (-a * x[k] - b * q * xd[k] - x[k] ** 3 + q * xd[k] ** 3
                  + d * (lap - q * lap_d))
    return out


# --------------------------------------------------------------------------
# Scalar right-hand sides
# --------------------------------------------------------------------------

def ss_rhs(x: float, x_delayed: float, p: SuarezSchopfParams) -> float:
    """Suarez-Schopf oscillator ``x - alpha x(t - tau) - x^3``."""
    return x - p.alpha * x_delayed - x ** 3


def forced_rhs(t: float, x: float, x_delayed: float, p: SuarezSchopfParams,
               f: ForcingSpec) -> float:
    return ss_rhs(x, x_delayed, p) + f.amplitude * math.sin(f.omega * t)


def g_truncated(y: float, trunc: TruncationSpec) -> float:
    """``y^3`` on ``[-R, R]``, continued linearly with slope ``3 R^2`` outside (C^1)."""
    return float(_g_trunc(float(y), float(trunc.R)))


def truncated_rhs(t: float, x: float, x_delayed: float, p: SuarezSchopfParams,
                  trunc: TruncationSpec, f: ForcingSpec) -> float:
    return (x - p.alpha * x_delayed - g_truncated(x, trunc)
            + f.amplitude * math.sin(f.omega * t))


def equilibria(p: SuarezSchopfParams) -> list[float]:
    """Zero and the symmetric pair ``+-sqrt(1 - alpha)``."""
    r = math.sqrt(1.0 - p.alpha)
    return [0.0, r, -r]


def dissipativity_radius(p: SuarezSchopfParams) -> float:
    return math.sqrt(1.0 + p.alpha)


def in_S(phi: HistorySegment, p: SuarezSchopfParams, R_margin: float = 0.0) -> bool:
    """Whether ``phi`` lies in the absorbing ball of sup-norm radius ``sqrt(1 + alpha) + R``."""
    if R_margin < 0:
        raise ConfigurationError("R_margin must be >= 0")
    return phi.sup_norm() <= dissipativity_radius(p) + R_margin


def gain_g(y: float, mu: float, mu_inf: float) -> float:
    """Saturated linear feedback: slope ``mu`` on ``[-1, 1]``, ``mu_inf`` outside."""
    if not (0.0 < mu_inf < mu):
        raise ConfigurationError("gain slopes must satisfy 0 < mu_inf < mu")
    return float(_gain(float(y), float(mu), float(mu_inf)))


def cubic_part(y: float, alpha: float) -> float:
    """``f(y) = -y^3 + 3 (1 - alpha) y``, the nonlinearity left after moving the
    symmetric-equilibrium linear part ``(3 alpha - 2, -alpha)`` out."""
    return -y ** 3 + 3.0 * (1.0 - alpha) * y


def family_nonlinearity(y: float, g: GainFamilyParams) -> float:
    """``F_eps = eps * f + (1 - eps) * gain``."""
    return g.epsilon * cubic_part(y, g.base.alpha) + (1.0 - g.epsilon) * gain_g(y, g.mu, g.mu_inf)


def family_rhs(x: float, x_delayed: float, g: GainFamilyParams) -> float:
    a = g.base.alpha
    return (3.0 * a - 2.0) * x - a * x_delayed + family_nonlinearity(x, g)


def ring_rhs(states, delayed_states, rp: RingParams) -> np.ndarray:
    """Derivative of ``z_k = x_k(t) - q x_k(t - tau)`` for every ring node."""
    x = np.asarray(states, dtype=float)
    xd = np.asarray(delayed_states, dtype=float)
    if x.shape != (rp.N,) or xd.shape != (rp.N,):
        raise ConfigurationError(
            f"ring state vectors must have length N={rp.N}, got {x.shape} and {xd.shape}")
    return _ring_kernel(0.0, x, xd, np.array([rp.a, rp.b, rp.d, rp.q]))


# --------------------------------------------------------------------------
# Integrator-facing systems
# --------------------------------------------------------------------------

def ss_system(p: SuarezSchopfParams, forcing: ForcingSpec | None = None) -> DelayRhs:
    f = forcing or ForcingSpec()
    return DelayRhs(1, _ss_kernel, np.array([p.alpha, f.amplitude, f.omega]),
                    forced=f.amplitude > 0)


def ss_copies_system(p: SuarezSchopfParams, n: int, forcing: ForcingSpec | None = None) -> DelayRhs:
    """``n`` uncoupled copies of the (forced) model integrated side by side."""
    f = forcing or ForcingSpec()
    return DelayRhs(n, _ss_pair_kernel, np.array([p.alpha, f.amplitude, f.omega]),
                    forced=f.amplitude > 0)


def truncated_system(p: SuarezSchopfParams, trunc: TruncationSpec,
                     forcing: ForcingSpec | None = None) -> DelayRhs:
    f = forcing or ForcingSpec()
    return DelayRhs(1, _truncated_kernel, np.array([p.alpha, f.amplitude, f.omega, trunc.R]),
                    forced=f.amplitude > 0)


def family_system(g: GainFamilyParams) -> DelayRhs:
    return DelayRhs(1, _family_kernel, np.array([g.base.alpha, g.mu, g.mu_inf, g.epsilon]))


def variational_system(p: SuarezSchopfParams, k: int, forcing: ForcingSpec | None = None) -> DelayRhs:
    """Base equation plus ``k`` copies of its linearisation along the base solution."""
    f = forcing or ForcingSpec()
    return DelayRhs(1 + k, _variational_kernel, np.array([p.alpha, f.amplitude, f.omega]),
                    forced=f.amplitude > 0)


def ring_system(rp: RingParams) -> DelayRhs:
    return DelayRhs(rp.N, _ring_kernel, np.array([rp.a, rp.b, rp.d, rp.q]))


# --------------------------------------------------------------------------
# Key-value configuration files
# --------------------------------------------------------------------------

CONFIG_KEYS = ("alpha", "tau", "amplitude", "omega", "R", "mu", "mu_inf", "epsilon",
               "N", "a", "b", "d", "q")


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment).  Unknown keys are errors."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigurationError(f"line {lineno}: unknown configuration key {key!r}")
        try:
            out[key] = int(value) if key == "N" else float(value)
        except ValueError:
            raise ConfigurationError(f"line {lineno}: value for {key!r} is not a number: {value!r}")
    return out


def read_config(path) -> dict:
    return parse_config(Path(path).read_text())


def format_config(values: dict) -> str:
    lines = []
    for key in CONFIG_KEYS:
        if key in values and values[key] is not None:
            lines.append(f"{key} = {values[key]!r}")
    unknown = set(values) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
    return "\n".join(lines) + "\n"


def write_config(path, values: dict) -> Path:
    path = Path(path)
    path.write_text(format_config(values))
    return path


def bundle_to_config(*bundles) -> dict:
    """Flatten parameter bundles into configuration keys."""
    out: dict = {}
    for b in bundles:
        if b is None:
            continue
        if isinstance(b, SuarezSchopfParams):
            out.update(alpha=b.alpha, tau=b.tau)
        elif isinstance(b, ForcingSpec):
            out.update(amplitude=b.amplitude, omega=b.omega)
        elif isinstance(b, TruncationSpec):
            out.update(R=b.R)
        elif isinstance(b, GainFamilyParams):
            out.update(alpha=b.base.alpha, tau=b.base.tau, mu=b.mu, mu_inf=b.mu_inf,
                       epsilon=b.epsilon)
        elif isinstance(b, RingParams):
            out.update(N=b.N, a=b.a, b=b.b, d=b.d, tau=b.tau, q=b.q)
        else:
            raise ConfigurationError(f"cannot serialise {type(b).__name__}")
    return out


def ss_params_from(cfg: dict) -> SuarezSchopfParams:
    try:
        return SuarezSchopfParams(cfg["alpha"], cfg["tau"])
    except KeyError as exc:
        raise ConfigurationError(f"missing configuration key {exc.args[0]!r}")


def forcing_from(cfg: dict) -> ForcingSpec:
    return ForcingSpec(cfg.get("amplitude", 0.0), cfg.get("omega", 1.0))


def gain_params_from(cfg: dict) -> GainFamilyParams:
    try:
        return GainFamilyParams(ss_params_from(cfg), cfg["mu"], cfg["mu_inf"], cfg.get("epsilon", 0.0))
    except KeyError as exc:
        raise ConfigurationError(f"missing configuration key {exc.args[0]!r}")


def ring_params_from(cfg: dict) -> RingParams:
    try:
        return RingParams(int(cfg["N"]), cfg["a"], cfg["b"], cfg["d"], cfg["tau"], cfg["q"])
    except KeyError as exc:
        raise ConfigurationError(f"missing configuration key {exc.args[0]!r}")


REFERENCE_RING = dict(N=2, a=-1.0, b=60.0, d=0.01, tau=2.4, q=0.01)
