"""Fractional-order LTI numerics.

Pseudo-polynomials sum(c_k * s**a_k) with real orders a_k >= 0, their ratios
(fractional transfer functions), exact frequency evaluation on the jw axis,
Grunwald-Letnikov (GL) fixed-step propagation of fractional states, and the
band-limited Oustaloup rational approximation of s**alpha.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import gl_weights as _gl_weights_kernel

__all__ = [
    "FractionalPolynomial",
    "FractionalTransferFunction",
    "GlKernel",
    "gl_weights",
    "gl_step",
    "freq_response",
    "oustaloup_approx",
    "oustaloup_differintegral",
]

_ORDER_TOL = 1e-12


def _merge_terms(terms):
    """Merge terms sharing an order, drop exact-zero coefficients, sort descending."""
    merged: dict[float, float] = {}
    for c, a in terms:
        a = float(a)
        c = float(c)
        if not np.isfinite(a) or not np.isfinite(c):
            raise ValueError("non-finite coefficient or order")
        if a < -_ORDER_TOL:
            raise ValueError(f"negative order {a} not allowed")
        a = max(a, 0.0)
        for known in merged:
            if abs(known - a) <= _ORDER_TOL:
                a = known
                break
        merged[a] = merged.get(a, 0.0) + c
    merged = {a: c for a, c in merged.items() if c != 0.0}
    orders = sorted(merged, reverse=True)
    return tuple(merged[a] for a in orders), tuple(orders)


@dataclass(frozen=True)
class FractionalPolynomial:
    """Pseudo-polynomial sum(coeffs[k] * s**orders[k]), orders descending."""

    coeffs: tuple[float, ...]
    orders: tuple[float, ...]

    def __init__(self, terms):
        coeffs, orders = _merge_terms(terms)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "orders", orders)

    @classmethod
    def from_integer_coeffs(cls, coeffs) -> "FractionalPolynomial":
        """Build from ordinary polynomial coefficients, highest power first."""
        n = len(coeffs) - 1
        return cls([(c, float(n - i)) for i, c in enumerate(coeffs)])

    @property
    def terms(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.coeffs, self.orders))

    @property
    def degree(self) -> float:
        return self.orders[0] if self.orders else 0.0

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_integer_order(self) -> bool:
        return all(abs(a - round(a)) <= _ORDER_TOL for a in self.orders)

    def to_integer_coeffs(self) -> np.ndarray:
        """Round-trip to ordinary polynomial coefficients, highest power first."""
        if not self.is_integer_order():
            raise ValueError("polynomial has non-integer orders")
        n = int(round(self.degree)) if self.orders else 0
        out = np.zeros(n + 1)
        for c, a in self.terms:
            out[n - int(round(a))] = c
        return out

    def __mul__(self, other):
        if isinstance(other, FractionalPolynomial):
            return FractionalPolynomial(
                [(c1 * c2, a1 + a2) for c1, a1 in self.terms for c2, a2 in other.terms]
            )
        return FractionalPolynomial([(c * float(other), a) for c, a in self.terms])

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, FractionalPolynomial):
            return FractionalPolynomial(list(self.terms) + list(other.terms))
        return FractionalPolynomial(list(self.terms) + [(float(other), 0.0)])

    __radd__ = __add__

    def __neg__(self):
        return FractionalPolynomial([(-c, a) for c, a in self.terms])

    def __sub__(self, other):
        return self + (-other)

    def evaluate(self, omega):
        """Evaluate at s = j*omega using (jw)**a = w**a * exp(j*a*pi/2).

        omega may be a scalar or array, all entries >= 0.  omega == 0 is only
        valid when every order is an integer (branch point at the origin).
        """
        w = np.asarray(omega, dtype=float)
        if np.any(w < 0):
            raise ValueError("omega must be >= 0")
        if np.any(w == 0.0) and not self.is_integer_order():
            raise ValueError("omega = 0 invalid for non-integer orders (branch at origin)")
        out = np.zeros(w.shape, dtype=complex)
        for c, a in self.terms:
            out = out + c * w**a * np.exp(1j * a * np.pi / 2.0)
        if np.ndim(omega) == 0:
            return complex(out)
        return out

    def _evaluate_with_scale(self, w):
        """Value plus the sum of term magnitudes (cancellation reference)."""
        out = np.zeros(np.shape(w), dtype=complex)
        scale = np.zeros(np.shape(w))
        for c, a in self.terms:
            term = c * w**a * np.exp(1j * a * np.pi / 2.0)
            out = out + term
            scale = scale + np.abs(term)
        return out, scale

    def __str__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(f"{c:g}*s^{a:g}" for c, a in self.terms)


@dataclass(frozen=True)
class FractionalTransferFunction:
    """Ratio of two fractional polynomials num/den.

    Properness is not required; PD/PID-style numerators of higher order than
    the denominator are legal and evaluated as-is in the frequency domain.
    """

    num: FractionalPolynomial
    den: FractionalPolynomial

    def __post_init__(self):
        if self.den.is_zero():
            raise ValueError("denominator has no nonzero coefficient")

    @classmethod
    def from_terms(cls, num_terms, den_terms) -> "FractionalTransferFunction":
        return cls(FractionalPolynomial(num_terms), FractionalPolynomial(den_terms))

    @classmethod
    def from_integer_coeffs(cls, num, den) -> "FractionalTransferFunction":
        return cls(
            FractionalPolynomial.from_integer_coeffs(num),
            FractionalPolynomial.from_integer_coeffs(den),
        )

    @classmethod
    def constant(cls, value: float) -> "FractionalTransferFunction":
        return cls.from_terms([(value, 0.0)], [(1.0, 0.0)])

    @property
    def relative_order(self) -> float:
        return self.den.degree - self.num.degree

    def is_integer_order(self) -> bool:
        return self.num.is_integer_order() and self.den.is_integer_order()

    def evaluate(self, omega):
        num = self.num.evaluate(omega)
        w = np.asarray(omega, dtype=float)
        den, scale = self.den._evaluate_with_scale(w)
        # a denominator that cancels to < 1e-12 of its term magnitudes is a pole
        bad = np.abs(den) <= 1e-12 * scale
        if np.ndim(omega) == 0:
            if bad:
                raise ZeroDivisionError(f"denominator vanishes at omega = {float(omega)!r}")
            return num / complex(den)
        if np.any(bad):
            w_bad = w[bad][0]
            raise ZeroDivisionError(f"denominator vanishes at omega = {w_bad!r}")
        return num / den

    def __mul__(self, other):
        if isinstance(other, FractionalTransferFunction):
            return FractionalTransferFunction(self.num * other.num, self.den * other.den)
        return FractionalTransferFunction(self.num * other, self.den)

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, FractionalTransferFunction):
            other = FractionalTransferFunction.constant(float(other))
        return FractionalTransferFunction(
            self.num * other.den + other.num * self.den, self.den * other.den
        )

    __radd__ = __add__

    def __truediv__(self, other):
        if isinstance(other, FractionalTransferFunction):
            return FractionalTransferFunction(self.num * other.den, self.den * other.num)
        return FractionalTransferFunction(self.num * (1.0 / float(other)), self.den)

    def __str__(self):
        return f"({self.num}) / ({self.den})"


def freq_response(tf: FractionalTransferFunction, grid) -> np.ndarray:
    """Frequency response of tf over a strictly increasing grid of omega > 0."""
    w = np.asarray(grid, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("grid must be a non-empty 1-D array")
    if np.any(w <= 0):
        raise ValueError("grid entries must be > 0")
    if np.any(np.diff(w) <= 0):
        raise ValueError("grid must be strictly increasing")
    return tf.evaluate(w)


def gl_weights(alpha: float, n: int) -> np.ndarray:
    """GL binomial weights w_0..w_n for order alpha.

    w_0 = 1, w_k = w_{k-1} * (1 - (alpha + 1)/k); equals (-1)^k * C(alpha, k).
    """
    if not 0.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (0, 2]")
    if n < 1:
        raise ValueError("n must be >= 1")
    return _gl_weights_kernel(float(alpha), int(n))


@dataclass
class GlKernel:
    """Fixed-step GL discretization of D^alpha for one scalar state.

    Holds the weight table; the caller owns the state history.  memory_length
    limits the history window (short-memory principle); None keeps it all.
    """

    alpha: float
    h: float
    weights: np.ndarray = field(repr=False)
    memory_length: int | None = None

    def __init__(self, alpha: float, h: float, n_steps: int, memory_length: int | None = None):
        if h <= 0:
            raise ValueError("step h must be > 0")
        if memory_length is not None and memory_length < 1:
            raise ValueError("memory_length must be >= 1")
        self.alpha = float(alpha)
        self.h = float(h)
        n_w = n_steps if memory_length is None else min(n_steps, memory_length)
        self.weights = gl_weights(alpha, max(1, n_w))
        self.memory_length = memory_length

    def step(self, history, rhs: float) -> float:
        """Advance one step: x_k = h^alpha * rhs - sum_j w_j * x_{k-j}.

        history holds past samples newest-first.  With alpha = 1 this reduces
        exactly to the explicit Euler update x_k = x_{k-1} + h * rhs.
        """
        hist = np.ascontiguousarray(history, dtype=float)
        m = hist.shape[0]
        if self.memory_length is not None:
            m = min(m, self.memory_length)
        m = min(m, self.weights.shape[0] - 1)
        acc = float(np.dot(self.weights[1 : m + 1], hist[:m])) if m > 0 else 0.0
        return self.h**self.alpha * rhs - acc


def gl_step(kernel: GlKernel, history, rhs: float) -> float:
    """Functional form of GlKernel.step."""
    return kernel.step(history, rhs)


def oustaloup_approx(
    alpha: float, omega_low: float, omega_high: float, cells: int
) -> FractionalTransferFunction:
    """Band-limited integer-order rational approximation of s**alpha.

    cells sets the pole/zero density (2*cells + 1 pairs across the requested
    band); the ladder itself is synthesized on an internally widened band so
    the ladder's edge roll-off stays outside [omega_low, omega_high] and the
    response tracks s**alpha within 2 dB / 5 deg over [2*omega_low,
    omega_high/2] for cells >= 4.  Gain is matched exactly at the geometric
    center of the requested band.  alpha must lie in (0, 1); integer alpha is
    returned exactly.  Use oustaloup_differintegral for other exponents.
    """
    if not (0 < omega_low < omega_high):
        raise ValueError("band must satisfy 0 < omega_low < omega_high")
    if cells < 1:
        raise ValueError("cells must be >= 1")
    if abs(alpha - round(alpha)) <= _ORDER_TOL:
        n = int(round(alpha))
        if n >= 0:
            return FractionalTransferFunction.from_terms([(1.0, float(n))], [(1.0, 0.0)])
        return FractionalTransferFunction.from_terms([(1.0, 0.0)], [(1.0, float(-n))])
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1); decompose other exponents")
    ext_decades = 1.5
    user_decades = np.log10(omega_high / omega_low)
    density = (2 * int(cells) + 1) / user_decades
    total_decades = user_decades + 2 * ext_decades
    n_pairs = int(np.ceil(density * total_decades))
    wb = omega_low * 10.0**-ext_decades
    wh = omega_high * 10.0**ext_decades
    k = np.arange(1, n_pairs + 1, dtype=float)
    ratio = wh / wb
    w_zero = wb * ratio ** ((k - 0.5 - 0.5 * alpha) / n_pairs)
    w_pole = wb * ratio ** ((k - 0.5 + 0.5 * alpha) / n_pairs)
    w_center = np.sqrt(omega_low * omega_high)
    h_center = np.prod((1j * w_center + w_zero) / (1j * w_center + w_pole))
    gain = w_center**alpha / abs(h_center)
    num = np.poly(-w_zero) * gain
    den = np.poly(-w_pole)
    return FractionalTransferFunction.from_integer_coeffs(num, den)


def oustaloup_differintegral(
    alpha: float, omega_low: float, omega_high: float, cells: int
) -> FractionalTransferFunction:
    """Rational approximation of s**alpha for any real alpha.

    Decomposes s**alpha = s**n * s**frac with n integer and frac in (0, 1),
    approximating only the fractional factor.
    """
    n = int(np.floor(alpha))
    frac = alpha - n
    if frac <= _ORDER_TOL or frac >= 1.0 - _ORDER_TOL:
        n = int(round(alpha))
        frac = 0.0
    if frac == 0.0:
        core = FractionalTransferFunction.from_terms([(1.0, 0.0)], [(1.0, 0.0)])
    else:
        core = oustaloup_approx(frac, omega_low, omega_high, cells)
    if n > 0:
        integer_part = FractionalTransferFunction.from_terms([(1.0, float(n))], [(1.0, 0.0)])
    elif n < 0:
        integer_part = FractionalTransferFunction.from_terms([(1.0, 0.0)], [(1.0, float(-n))])
    else:
        return core
    return core * integer_part
