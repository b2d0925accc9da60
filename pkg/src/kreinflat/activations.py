"""Entire activation functions as Taylor series with exact coefficient streams.

Every activation used by the network/kernel machinery is an entire (or
radius-limited analytic) function sigma(xi) = sum_i a_i xi^i with a_0 >= 0 and
a_1 > 0.  Each one also has an *associated* function with coefficients |a_i|,
which drives the positive-definite companion kernel and all capacity bounds.

Coefficients for tanh/tan/logistic come from exact rational ODE recurrences
(tanh' = 1 - tanh^2, tan' = 1 + tan^2, s' = s - s^2) rather than printed
tables; everything is validated against closed forms in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import erf as _sp_erf, erfi as _sp_erfi

from .errors import DomainError

_SQRT_PI = math.sqrt(math.pi)

#: kinds constructible from config files
BASE_KINDS = ("linear", "erf", "tanh", "logistic", "polynomial", "exp", "relu_surrogate")
#: kinds reachable only through associated()
DERIVED_KINDS = ("tan", "erfi", "logistic_assoc", "relu_surrogate_assoc")

# kinds whose closed form is only trusted inside the convergence radius
_POLE_LIMITED = {"tan", "logistic_assoc"}

_DEFAULT_SHARPNESS = 0.01


@dataclass(frozen=True)
class ActivationSpec:
    """One activation function.

    kind          -- one of BASE_KINDS or DERIVED_KINDS
    coefficients  -- polynomial kind only: (a_0, a_1, ..., a_p)
    sharpness     -- relu_surrogate kinds only: the smoothing scale c > 0
    max_terms     -- series-evaluation term budget (closed forms ignore it)
    """

    kind: str
    coefficients: tuple = None
    sharpness: float = None
    max_terms: int = 30

    def __post_init__(self):
        if self.kind not in BASE_KINDS and self.kind not in DERIVED_KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "polynomial":
            if not self.coefficients:
                raise ValueError("polynomial kind needs a coefficient tuple")
            object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
            a = self.coefficients
            if a[0] < 0:
                raise ValueError("constant coefficient a_0 must be nonnegative")
            if len(a) < 2 or a[1] <= 0:
                raise ValueError("linear coefficient a_1 must be positive")
        elif self.coefficients is not None:
            raise ValueError(f"{self.kind} takes no coefficient tuple")
        if self.kind in ("relu_surrogate", "relu_surrogate_assoc"):
            c = _DEFAULT_SHARPNESS if self.sharpness is None else float(self.sharpness)
            if c <= 0:
                raise ValueError("sharpness must be positive")
            object.__setattr__(self, "sharpness", c)
        elif self.sharpness is not None:
            raise ValueError(f"{self.kind} takes no sharpness")
        if self.max_terms < 2:
            raise ValueError("max_terms must be at least 2")


def linear():
    return ActivationSpec("linear")


def erf():
    return ActivationSpec("erf")


def tanh():
    return ActivationSpec("tanh")


def logistic():
    return ActivationSpec("logistic")


def exp():
    return ActivationSpec("exp")


def polynomial(coefficients):
    return ActivationSpec("polynomial", coefficients=tuple(coefficients))


def relu_surrogate(sharpness=_DEFAULT_SHARPNESS):
    return ActivationSpec("relu_surrogate", sharpness=sharpness)


# ---------------------------------------------------------------------------
# coefficient streams
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _ode_fractions(kind, n):
    """a_0..a_n as exact Fractions for the self-referential series.

    tanh:     a' = 1 - a*a, a_0 = 0
    tan:      a' = 1 + a*a, a_0 = 0
    logistic: a' = a - a*a, a_0 = 1/2
    """
    a = [Fraction(1, 2) if kind == "logistic" else Fraction(0)]
    for m in range(n):
        conv = sum(a[j] * a[m - j] for j in range(m + 1))
        if kind == "tanh":
            nxt = (Fraction(1 if m == 0 else 0) - conv) / (m + 1)
        elif kind == "tan":
            nxt = (Fraction(1 if m == 0 else 0) + conv) / (m + 1)
        else:
            nxt = (a[m] - conv) / (m + 1)
        a.append(nxt)
    return tuple(a)


def _erf_coefficient(i):
    # erf(xi) = (2/sqrt(pi)) sum_k (-1)^k xi^(2k+1) / (k! (2k+1))
    if i % 2 == 0:
        return 0.0
    k = (i - 1) // 2
    return (2.0 / _SQRT_PI) * (-1.0) ** k / (math.factorial(k) * i)


def taylor_coefficient(spec, i):
    """a_i of the activation's Taylor expansion at 0."""
    if i < 0:
        raise ValueError("coefficient index must be nonnegative")
    kind = spec.kind
    if kind == "linear":
        return 1.0 if i == 1 else 0.0
    if kind == "polynomial":
        return spec.coefficients[i] if i < len(spec.coefficients) else 0.0
    if kind == "erf":
        return _erf_coefficient(i)
    if kind == "erfi":
        return abs(_erf_coefficient(i))
    if kind == "tanh":
        return float(_ode_fractions("tanh", i)[i])
    if kind == "tan":
        return float(_ode_fractions("tan", i)[i])
    if kind == "logistic":
        return float(_ode_fractions("logistic", i)[i])
    if kind == "logistic_assoc":
        return abs(float(_ode_fractions("logistic", i)[i]))
    if kind == "exp":
        return 1.0 / math.factorial(i)
    if kind in ("relu_surrogate", "relu_surrogate_assoc"):
        # xi/2 + (xi/2) * erf(xi/c): odd erf terms shift to even degrees >= 2
        if i == 1:
            return 0.5
        if i >= 2 and i % 2 == 0:
            a = 0.5 * _erf_coefficient(i - 1) / spec.sharpness ** (i - 1)
            return abs(a) if kind == "relu_surrogate_assoc" else a
        return 0.0
    raise AssertionError(kind)


def support_degrees(spec, up_to):
    """Degrees i <= up_to with a_i != 0, ascending."""
    return [i for i in range(up_to + 1) if taylor_coefficient(spec, i) != 0.0]


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def convergence_radius(spec):
    if spec.kind in ("tanh", "tan", "logistic", "logistic_assoc"):
        return math.pi / 2
    return math.inf


def _check_radius(spec, xi):
    if spec.kind in _POLE_LIMITED and abs(xi) >= convergence_radius(spec):
        raise DomainError(
            f"{spec.kind} evaluated at {xi!r}, outside radius {convergence_radius(spec)!r}"
        )


def evaluate(spec, xi):
    """sigma(xi) by closed form (series only for generic polynomials)."""
    xi = float(xi)
    _check_radius(spec, xi)
    kind = spec.kind
    if kind == "linear":
        return xi
    if kind == "polynomial":
        acc = 0.0
        for c in reversed(spec.coefficients):
            acc = acc * xi + c
        return acc
    if kind == "erf":
        return math.erf(xi)
    if kind == "erfi":
        return float(_sp_erfi(xi))
    if kind == "tanh":
        return math.tanh(xi)
    if kind == "tan":
        return math.tan(xi)
    if kind == "logistic":
        if xi >= 0:
            return 1.0 / (1.0 + math.exp(-xi))
        t = math.exp(xi)
        return t / (1.0 + t)
    if kind == "logistic_assoc":
        return 0.5 * (1.0 + math.tan(xi / 2.0))
    if kind == "exp":
        return math.exp(xi)
    if kind == "relu_surrogate":
        return 0.5 * xi * (1.0 + math.erf(xi / spec.sharpness))
    if kind == "relu_surrogate_assoc":
        return 0.5 * xi * (1.0 + float(_sp_erfi(xi / spec.sharpness)))
    raise AssertionError(kind)


def evaluate_array(spec, xi):
    """Vectorized evaluate over a float array (same domain policy)."""
    xi = np.asarray(xi, dtype=float)
    if spec.kind in _POLE_LIMITED and xi.size and np.max(np.abs(xi)) >= convergence_radius(spec):
        bad = float(xi.flat[int(np.argmax(np.abs(xi)))])
        raise DomainError(
            f"{spec.kind} evaluated at {bad!r}, outside radius {convergence_radius(spec)!r}"
        )
    kind = spec.kind
    if kind == "linear":
        return xi.copy()
    if kind == "polynomial":
        acc = np.zeros_like(xi)
        for c in reversed(spec.coefficients):
            acc = acc * xi + c
        return acc
    if kind == "erf":
        return np.asarray(_sp_erf(xi), dtype=float)
    if kind == "erfi":
        return np.asarray(_sp_erfi(xi), dtype=float)
    if kind == "tanh":
        return np.tanh(xi)
    if kind == "tan":
        return np.tan(xi)
    if kind == "logistic":
        out = np.empty_like(xi)
        pos = xi >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-xi[pos]))
        t = np.exp(xi[~pos])
        out[~pos] = t / (1.0 + t)
        return out
    if kind == "logistic_assoc":
        return 0.5 * (1.0 + np.tan(xi / 2.0))
    if kind == "exp":
        return np.exp(xi)
    if kind == "relu_surrogate":
        return 0.5 * xi * (1.0 + np.asarray(_sp_erf(xi / spec.sharpness), dtype=float))
    if kind == "relu_surrogate_assoc":
        return 0.5 * xi * (1.0 + np.asarray(_sp_erfi(xi / spec.sharpness), dtype=float))
    raise AssertionError(kind)


def evaluate_series(spec, xi, terms=None):
    """Partial sum sum_{i<=terms} a_i xi^i (defaults to spec.max_terms)."""
    xi = float(xi)
    _check_radius(spec, xi)
    n = spec.max_terms if terms is None else int(terms)
    acc = 0.0
    power = 1.0
    for i in range(n + 1):
        a = taylor_coefficient(spec, i)
        if a != 0.0:
            acc += a * power
        power *= xi
    return acc


def derivative(spec, xi):
    """sigma'(xi), closed form."""
    xi = float(xi)
    _check_radius(spec, xi)
    kind = spec.kind
    if kind == "linear":
        return 1.0
    if kind == "polynomial":
        acc = 0.0
        for i in range(len(spec.coefficients) - 1, 0, -1):
            acc = acc * xi + i * spec.coefficients[i]
        return acc
    if kind == "erf":
        return (2.0 / _SQRT_PI) * math.exp(-xi * xi)
    if kind == "erfi":
        return (2.0 / _SQRT_PI) * math.exp(xi * xi)
    if kind == "tanh":
        t = math.tanh(xi)
        return 1.0 - t * t
    if kind == "tan":
        t = math.tan(xi)
        return 1.0 + t * t
    if kind == "logistic":
        s = evaluate(spec, xi)
        return s * (1.0 - s)
    if kind == "logistic_assoc":
        t = math.tan(xi / 2.0)
        return 0.25 * (1.0 + t * t)
    if kind == "exp":
        return math.exp(xi)
    if kind in ("relu_surrogate", "relu_surrogate_assoc"):
        c = spec.sharpness
        u = xi / c
        if kind == "relu_surrogate":
            return 0.5 * (1.0 + math.erf(u)) + (xi / (c * _SQRT_PI)) * math.exp(-u * u)
        return 0.5 * (1.0 + float(_sp_erfi(u))) + (xi / (c * _SQRT_PI)) * math.exp(u * u)
    raise AssertionError(kind)


def derivative_array(spec, xi):
    """Vectorized derivative over a float array."""
    xi = np.asarray(xi, dtype=float)
    kind = spec.kind
    if kind == "linear":
        return np.ones_like(xi)
    if kind == "tanh":
        t = np.tanh(xi)
        return 1.0 - t * t
    if kind == "erf":
        return (2.0 / _SQRT_PI) * np.exp(-xi * xi)
    if kind == "logistic":
        s = evaluate_array(spec, xi)
        return s * (1.0 - s)
    if kind == "exp":
        return np.exp(xi)
    if kind == "polynomial":
        acc = np.zeros_like(xi)
        for i in range(len(spec.coefficients) - 1, 0, -1):
            acc = acc * xi + i * spec.coefficients[i]
        return acc
    return np.array([derivative(spec, v) for v in np.atleast_1d(xi).ravel()]).reshape(xi.shape)


# ---------------------------------------------------------------------------
# associated function, Lipschitz constants, shape predicates
# ---------------------------------------------------------------------------

_ASSOCIATED = {
    "linear": "linear",
    "erf": "erfi",
    "tanh": "tan",
    "logistic": "logistic_assoc",
    "exp": "exp",
    "relu_surrogate": "relu_surrogate_assoc",
    # already-absolute kinds map to themselves
    "erfi": "erfi",
    "tan": "tan",
    "logistic_assoc": "logistic_assoc",
    "relu_surrogate_assoc": "relu_surrogate_assoc",
}


def associated(spec):
    """The activation with coefficients |a_i| (idempotent)."""
    if spec.kind == "polynomial":
        return ActivationSpec(
            "polynomial",
            coefficients=tuple(abs(c) for c in spec.coefficients),
            max_terms=spec.max_terms,
        )
    return ActivationSpec(
        _ASSOCIATED[spec.kind], sharpness=spec.sharpness, max_terms=spec.max_terms
    )


# exact sup|sigma'| over [0, inf) where one exists
def _global_lipschitz(spec):
    kind = spec.kind
    if kind == "linear":
        return 1.0
    if kind == "erf":
        return 2.0 / _SQRT_PI
    if kind == "tanh":
        return 1.0
    if kind == "logistic":
        return 0.25
    if kind == "relu_surrogate":
        # sup of 0.5(1+erf(u)) + u e^{-u^2}/sqrt(pi) sits at u = 1, any sharpness
        return 0.5 * (1.0 + math.erf(1.0)) + math.exp(-1.0) / _SQRT_PI
    if kind == "polynomial" and all(c == 0.0 for c in spec.coefficients[2:]):
        return spec.coefficients[1]
    return None


_GRID_POINTS = 10_001
_GRID_INFLATION = 1.01


def lipschitz_on(spec, interval_sup):
    """sup |sigma'| over [0, m].

    m = inf returns the exact global constant for globally Lipschitz kinds and
    raises otherwise.  Finite m uses a 10001-point grid inflated by 1% (an
    upper proxy; suprema of the monotone derivative envelopes here are bracketed
    far tighter than 1%).
    """
    m = float(interval_sup)
    if m <= 0:
        raise ValueError("interval endpoint must be positive")
    if math.isinf(m):
        g = _global_lipschitz(spec)
        if g is None:
            raise ValueError(f"{spec.kind} has no global Lipschitz constant")
        return g
    if m >= convergence_radius(spec):
        raise DomainError(
            f"interval [0, {m}] exceeds the convergence radius of {spec.kind}"
        )
    grid = np.linspace(0.0, m, _GRID_POINTS)
    return _GRID_INFLATION * float(np.max(np.abs(derivative_array(spec, grid))))


def is_odd_concave(spec):
    """True when sigma is odd with sigma concave on [0, inf) and sigma(0) = 0.

    These are the admission conditions for the growth-envelope bounds; they
    hold for linear/erf/tanh and for odd polynomials with nonpositive
    higher-order coefficients.
    """
    kind = spec.kind
    if kind in ("linear", "erf", "tanh"):
        return True
    if kind == "polynomial":
        a = spec.coefficients
        odd = all(c == 0.0 for i, c in enumerate(a) if i % 2 == 0)
        return odd and all(c <= 0.0 for c in a[2:])
    return False


def is_bounded_by_one(spec):
    """True when 0 <= sigma(xi) <= 1 for all xi >= 0."""
    return spec.kind in ("erf", "tanh", "logistic")
