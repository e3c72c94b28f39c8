"""Characteristic roots, transfer functions, frequency inequalities and the
two-dimensional spectral projector of the scalar delayed oscillator.

All linearisations met here share the form

    h(p) = c - alpha * exp(-tau * p) - p,

with ``c = 1`` at the zero equilibrium, ``c = 3 alpha - 2`` at the symmetric
equilibria and ``c = 3 alpha - 2 + mu`` for the gained system at zero.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq, minimize_scalar
from scipy.special import lambertw

from .dde_core import HistorySegment
from .errors import ConfigurationError, GapViolationError, NumericalError, PoleError

MULTIPLE_ROOT_GAP = 1.0e-4
ROOT_RESIDUAL = 1.0e-10
LINE_TOL = 1.0e-9


class IncompleteRootListWarning(UserWarning):
    def __init__(self, message: str, verified: int):
        super().__init__(message)
        self.verified = verified


@dataclass(frozen=True)
class CharacteristicFunction:
    c: float
    alpha: float
    tau: float

    def __call__(self, p):
        p = np.asarray(p, dtype=complex)
        return self.c - self.alpha * np.exp(-self.tau * p) - p

    def derivative(self, p):
        p = np.asarray(p, dtype=complex)
        return self.alpha * self.tau * np.exp(-self.tau * p) - 1.0

    def root_bound(self, nu0: float) -> float:
        """Bound on ``|p|`` (plus ``nu0``) for roots with ``Re p >= -nu0``."""
        return abs(self.c) + self.alpha * math.exp(self.tau * nu0) + nu0


def zero_linearization(alpha: float, tau: float) -> CharacteristicFunction:
    return CharacteristicFunction(1.0, alpha, tau)


def symmetric_linearization(alpha: float, tau: float) -> CharacteristicFunction:
    return CharacteristicFunction(3.0 * alpha - 2.0, alpha, tau)


def gained_linearization(alpha: float, tau: float, mu: float) -> CharacteristicFunction:
    return CharacteristicFunction(3.0 * alpha - 2.0 + mu, alpha, tau)


def _check_alpha_tau(alpha, tau):
    if not (0.0 < alpha < 1.0):
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha}")
    if not tau > 0.0:
        raise ConfigurationError(f"tau must be positive, got {tau}")


# --------------------------------------------------------------------------
# Roots
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CharRoot:
    value: complex
    residual: float
    multiplicity: str = "simple"  # or "suspected_multiple"

    @property
    def real(self) -> float:
        return self.value.real

    @property
    def imag(self) -> float:
        return self.value.imag


def _newton(cf: CharacteristicFunction, p0: complex, tol=1e-14, maxiter=60):
    p = complex(p0)
    for _ in range(maxiter):
        fp = complex(cf(p))
        dp = complex(cf.derivative(p))
        if dp == 0 or not np.isfinite(fp):
            return None
        step = fp / dp
        p -= step
        if abs(step) <= tol * max(1.0, abs(p)):
            break
    if not np.isfinite(p):
        return None
    return p


def leading_real_roots(alpha: float, tau: float) -> tuple[CharRoot, CharRoot]:
    """Real roots ``lambda1 > 0 > lambda2`` of ``1 - alpha exp(-tau p) - p``.

    Bracketed with Brent's method, then polished by Newton.  When the two
    roots are closer than 1e-4 (near ``alpha = tau = 1``) both are flagged as
    suspected multiple.
    """
    _check_alpha_tau(alpha, tau)
    cf = zero_linearization(alpha, tau)

    def f(p):
        return 1.0 - alpha * math.exp(-tau * p) - p

    # f(0) = 1 - alpha > 0 and f(1) = -alpha exp(-tau) < 0
    lam1 = brentq(f, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    left = -1.0
    while f(left) >= 0.0:
        left *= 2.0
        if left < -1e6:
            raise NumericalError(f"no negative root bracket found for alpha={alpha}, tau={tau}")
    lam2 = brentq(f, left, 0.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    out = []
    for lam, lo, hi in ((lam1, 0.0, 1.0), (lam2, left, 0.0)):
        pol = _newton(cf, lam)
        if pol is not None and abs(pol.imag) < 1e-12 and lo <= pol.real <= hi:
            if abs(f(pol.real)) <= abs(f(lam)):
                lam = pol.real
        out.append(lam)
    lam1, lam2 = out
    flag = "suspected_multiple" if abs(lam1 - lam2) < MULTIPLE_ROOT_GAP else "simple"
    roots = tuple(CharRoot(complex(lam, 0.0), abs(f(lam)), flag) for lam in (lam1, lam2))
    if flag == "simple":
        for r in roots:
            if r.residual > 1e-12:
                raise NumericalError(f"real root residual {r.residual:.3g} above 1e-12 "
                                     f"(alpha={alpha}, tau={tau}, root={r.value.real})")
    return roots


def _lambert_seeds(cf: CharacteristicFunction, n_branches: int):
    # p = c + W_k(-alpha tau exp(-c tau)) / tau enumerates every root
    z = -cf.alpha * cf.tau * math.exp(-cf.c * cf.tau)
    for k in range(-n_branches, n_branches + 1):
        yield cf.c + complex(lambertw(z, k)) / cf.tau


def _asymptotic_seeds(cf: CharacteristicFunction, n_branches: int):
    # large roots follow Re p ~ (ln alpha - ln |p|) / tau, Im p ~ (2k + 1) pi / tau
    for k in range(n_branches + 1):
        im = (2 * k + 1) * math.pi / cf.tau
        re = (math.log(cf.alpha) - math.log(max(im, 1.0))) / cf.tau
        yield complex(re, im)


def characteristic_roots(cf: CharacteristicFunction, n_max: int) -> list[CharRoot]:
    """The ``n_max`` roots with largest real part, one per conjugate pair.

    Roots are reported with non-negative imaginary part, sorted by decreasing
    real part, each Newton-polished to residual <= 1e-10.
    """
    if n_max < 1:
        return []
    n_br = n_max + 3
    seeds = list(_lambert_seeds(cf, n_br)) + list(_asymptotic_seeds(cf, n_br))
    found: list[complex] = []
    for s in seeds:
        p = _newton(cf, s)
        if p is None:
            continue
        if abs(complex(cf(p))) > ROOT_RESIDUAL:
            continue
        if p.imag < 0:
            p = p.conjugate()
        if abs(p.imag) < 1e-12:
            p = complex(p.real, 0.0)
        if any(abs(p - q) < 1e-8 for q in found):
            continue
        found.append(p)
    found.sort(key=lambda p: (-p.real, p.imag))
    # the branch enumeration covers every root up to the largest branch used, so
    # anything further right than the last seeded band is accounted for
    if len(found) < n_max:
        warnings.warn(IncompleteRootListWarning(
            f"only {len(found)} of {n_max} roots verified", len(found)))
    out = []
    for p in found[:n_max]:
        out.append(CharRoot(p, float(abs(complex(cf(p))))))
    return out


def symmetric_complex_roots(alpha: float, tau: float, n_max: int = 4) -> list[CharRoot]:
    """Leading roots of the linearisation at ``+-sqrt(1 - alpha)``."""
    _check_alpha_tau(alpha, tau)
    return characteristic_roots(symmetric_linearization(alpha, tau), n_max)


# --------------------------------------------------------------------------
# Root counting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralGap:
    nu0: float
    count_right: int
    margin_to_nearest_root: float
    line_min_modulus: float


def _winding(cf: CharacteristicFunction, corners, n0=256, max_points=2_000_000):
    total = 0.0
    for a, b in zip(corners, corners[1:] + corners[:1]):
        n = n0
        while True:
            s = np.linspace(0.0, 1.0, n + 1)
            vals = cf(a + (b - a) * s)
            if np.any(np.abs(vals) < 1e-13):
                raise GapViolationError("characteristic function vanishes on the counting contour")
            dphi = np.angle(vals[1:] / vals[:-1])
            if np.max(np.abs(dphi)) < 0.5 or n > max_points:
                break
            n *= 4
        total += float(np.sum(dphi))
    return total / (2.0 * math.pi)


def _line_scan(cf: CharacteristicFunction, nu0: float, omega_max: float, n=20001):
    omega = np.linspace(0.0, omega_max, n)
    mod = np.abs(cf(-nu0 + 1j * omega))
    return omega, mod


def count_roots_right_of(cf: CharacteristicFunction, nu0: float) -> SpectralGap:
    """Number of roots with ``Re p > -nu0`` (argument principle on a rectangle).

    The rectangle reaches past the a-priori bound on such roots.  The line
    ``Re p = -nu0`` itself is scanned for near-zeros; a root within 1e-9 of it
    raises :class:`GapViolationError`.
    """
    if not nu0 > 0:
        raise ConfigurationError(f"nu0 must be positive, got {nu0}")
    bound = cf.root_bound(nu0) + 1.0
    omega, mod = _line_scan(cf, nu0, bound)
    scale = abs(cf.c) + cf.alpha * math.exp(cf.tau * nu0) + 1.0
    margin = math.inf
    idx = np.where((mod[1:-1] <= mod[:-2]) & (mod[1:-1] <= mod[2:]))[0] + 1
    idx = list(idx) + [0, len(omega) - 1]
    for i in idx:
        if mod[i] > 0.5 * scale:
            continue
        p = _newton(cf, complex(-nu0, omega[i]))
        if p is None or abs(complex(cf(p))) > ROOT_RESIDUAL:
            continue
        dist = abs(p.real + nu0)
        margin = min(margin, dist)
        if dist < LINE_TOL:
            raise GapViolationError(
                f"characteristic root {p:.6g} lies on the line Re p = -{nu0} "
                f"(distance {dist:.2e}); choose a different nu0")
    # margin from the enumerated leading roots as well
    for r in characteristic_roots(cf, 2 + int(bound * cf.tau / math.pi) + 2):
        margin = min(margin, abs(r.real + nu0))
    if margin < LINE_TOL:
        raise GapViolationError(f"a characteristic root lies on Re p = -{nu0}")
    corners = [complex(-nu0, -bound), complex(bound, -bound), complex(bound, bound),
               complex(-nu0, bound)]
    w = _winding(cf, corners)
    count = int(round(w))
    if abs(w - count) > 1e-6:
        raise NumericalError(f"winding number {w} is not an integer")
    return SpectralGap(nu0, count, margin, float(mod.min()))


# --------------------------------------------------------------------------
# Transfer functions and frequency inequalities
# --------------------------------------------------------------------------

class Variant(str, enum.Enum):
    ZERO_LINEARIZATION = "zero"
    GAINED_SYMMETRIC = "gained_symmetric"


@dataclass(frozen=True)
class TransferFunction:
    """``W(p) = -1 / (1 - alpha e^{-tau p} - p)`` (zero linearisation, input -1)
    or ``W(p) = 1 / (3 alpha - 2 - alpha e^{-tau p} - p)`` (symmetric linear part)."""

    variant: Variant
    alpha: float
    tau: float

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        _check_alpha_tau(self.alpha, self.tau)

    @property
    def characteristic(self) -> CharacteristicFunction:
        if self.variant is Variant.ZERO_LINEARIZATION:
            return zero_linearization(self.alpha, self.tau)
        return symmetric_linearization(self.alpha, self.tau)

    @property
    def sign(self) -> float:
        return -1.0 if self.variant is Variant.ZERO_LINEARIZATION else 1.0

    def __call__(self, p):
        return self.sign / self.characteristic(p)


def transfer_eval(tf: TransferFunction, p: complex) -> complex:
    den = complex(tf.characteristic(p))
    if abs(den) < 1e-14:
        raise PoleError(f"transfer function pole at p = {p}")
    return tf.sign / den


class Form(str, enum.Enum):
    REAL_PART = "real_part"
    MODULUS = "modulus"


@dataclass(frozen=True)
class CertificationReport:
    variant: str
    nu0: float
    Lambda: float
    form: str
    extremum: float
    arg_omega: float
    holds: bool
    tail_bound_omega: float
    tail_bound: float
    margin: float

    def to_json(self) -> str:
        d = dict(variant=self.variant, nu0=self.nu0, Lambda=self.Lambda, form=self.form,
                 extremum=self.extremum, argOmega=self.arg_omega, holds=self.holds,
                 tailBoundOmega=self.tail_bound_omega, tailBound=self.tail_bound,
                 margin=self.margin)
        return json.dumps(d, separators=(",", ":"))


def frequency_check(tf: TransferFunction, nu0: float, Lambda: float, form: Form | str,
                    expected_roots: int | None = 2, n_grid: int = 20000,
                    tail_factor: float = 10.0, side: int = 1) -> CertificationReport:
    """Check ``Re W(-nu0 + i w) + 1/Lambda > 0`` or ``sup |W(-nu0 + i w)| < 1/Lambda``.

    The extremum over ``w >= 0`` is located on a uniform grid up to
    ``tail_factor * B`` (``B`` the root bound) and refined by bounded scalar
    minimisation around the best grid points.  Beyond the grid
    ``|W| <= 1 / (|w| - B)`` bounds what is left; the verdict uses the worse
    of the grid extremum and that bound.  ``side=-1`` scans ``w <= 0`` instead.

    ``expected_roots`` (default 2) is the required number of characteristic
    roots right of the line; pass ``None`` to skip that requirement.
    """
    form = Form(form)
    if not Lambda > 0:
        raise ConfigurationError(f"Lambda must be positive, got {Lambda}")
    cf = tf.characteristic
    gap = count_roots_right_of(cf, nu0)
    if expected_roots is not None and gap.count_right != expected_roots:
        raise GapViolationError(
            f"nu0={nu0} leaves {gap.count_right} roots to the right of the line, "
            f"expected {expected_roots} (margin to nearest root {gap.margin_to_nearest_root:.3g})")
    B = cf.root_bound(nu0)
    sgn = 1.0 if side >= 0 else -1.0

    def objective(w):
        val = tf(-nu0 + 1j * sgn * w)
        # minimise: -|W| for the modulus form, Re W for the real-part form
        return -abs(val) if form is Form.MODULUS else val.real

    omega_tail = tail_factor * B
    omega = np.linspace(0.0, omega_tail, n_grid)
    vals = tf(-nu0 + 1j * sgn * omega)
    obj = -np.abs(vals) if form is Form.MODULUS else vals.real
    best_w, best = float(omega[np.argmin(obj)]), float(np.min(obj))
    interior = np.where((obj[1:-1] <= obj[:-2]) & (obj[1:-1] <= obj[2:]))[0] + 1
    candidates = sorted(interior, key=lambda i: obj[i])[:8]
    dw = omega[1] - omega[0]
    for i in candidates:
        res = minimize_scalar(objective, bounds=(omega[i] - dw, omega[i] + dw), method="bounded",
                              options={"xatol": 1e-12})
        if res.fun < best:
            best, best_w = float(res.fun), float(res.x)
    tail = 1.0 / (omega_tail - B)
    inv = 1.0 / Lambda
    if form is Form.MODULUS:
        extremum = -best
        worst = max(extremum, tail)
        margin = inv - worst
    else:
        extremum = best
        worst = min(extremum, -tail)
        margin = worst + inv
    return CertificationReport(tf.variant.value, float(nu0), float(Lambda), form.value,
                               extremum, sgn * best_w, bool(margin > 0), omega_tail, tail, margin)


def find_admissible_nu0(tf: TransferFunction, Lambda: float, form: Form | str,
                        n_candidates: int = 40) -> CertificationReport | None:
    """Scan ``nu0`` between the second and third root real parts; return the
    report with the largest margin, or ``None`` if the band is empty."""
    roots = characteristic_roots(tf.characteristic, 3)
    if tf.variant is Variant.ZERO_LINEARIZATION:
        lam1, lam2 = leading_real_roots(tf.alpha, tf.tau)
        second = lam2.real
        third = max(r.real for r in roots if abs(r.value - lam1.value) > 1e-8
                    and abs(r.value - lam2.value) > 1e-8)
    else:
        second, third = roots[0].real, roots[1].real
    lo, hi = -second, -third
    if not hi > lo:
        return None
    best = None
    for nu0 in np.linspace(lo, hi, n_candidates + 2)[1:-1]:
        try:
            rep = frequency_check(tf, float(nu0), Lambda, form, n_grid=4000)
        except GapViolationError:
            continue
        if best is None or rep.margin > best.margin:
            best = rep
    return best


# --------------------------------------------------------------------------
# Spectral projector
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectionCoords:
    c1: float
    c2: float

    def as_tuple(self):
        return (self.c1, self.c2)


class SpectralProjector:
    """Coordinates of a history segment along ``e^{lambda1 theta}``, ``e^{lambda2 theta}``.

    The default uses the adjoint bilinear form of ``x' = x(t) - alpha x(t - tau)``,

        c_i = (phi(0) - alpha * int e^{-lambda_i (tau + theta)} phi(theta) dtheta)
              / (1 - alpha tau e^{-tau lambda_i}),

    which maps each eigenfunction to its unit coordinate and annihilates the
    other one.  ``raw=True`` returns the variant with ``+`` in front of the
    integral and denominator ``alpha tau e^{-tau lambda_i} - 1``, without
    normalisation, for comparing with plots made that way.
    """

    def __init__(self, alpha: float, tau: float, m: int, raw: bool = False):
        if m + 1 < 8:
            raise ConfigurationError(f"projection needs at least 8 grid nodes, got {m + 1}")
        lam1, lam2 = leading_real_roots(alpha, tau)
        self.alpha, self.tau, self.m, self.raw = alpha, tau, m, raw
        self.lambdas = (lam1.real, lam2.real)
        self.theta = np.linspace(-tau, 0.0, m + 1)
        self._kernels = [np.exp(-lam * (tau + self.theta)) for lam in self.lambdas]
        if raw:
            self._coef = 1.0
            self._den = [alpha * tau * math.exp(-tau * lam) - 1.0 for lam in self.lambdas]
        else:
            self._coef = -alpha
            self._den = [1.0 - alpha * tau * math.exp(-tau * lam) for lam in self.lambdas]

    def coords_of_values(self, values) -> tuple[float, float]:
        values = np.asarray(values, dtype=float).reshape(-1)
        out = []
        for kern, den in zip(self._kernels, self._den):
            integral = simpson(kern * values, x=self.theta)
            out.append((values[-1] + self._coef * integral) / den)
        return out[0], out[1]

    def __call__(self, phi: HistorySegment) -> ProjectionCoords:
        if phi.dim != 1:
            raise ConfigurationError("the projector acts on scalar history segments")
        if phi.m != self.m or abs(phi.delay - self.tau) > 1e-12 * self.tau:
            phi = phi.resample(self.m) if abs(phi.delay - self.tau) <= 1e-12 * self.tau else None
            if phi is None:
                raise ConfigurationError("segment delay does not match the projector's tau")
        return ProjectionCoords(*self.coords_of_values(phi.values[:, 0]))

    def eigenfunction(self, i: int) -> np.ndarray:
        return np.exp(self.lambdas[i] * self.theta)


def spectral_projector(phi: HistorySegment, alpha: float, tau: float,
                       raw: bool = False) -> ProjectionCoords:
    return SpectralProjector(alpha, tau, phi.m, raw=raw)(phi)
