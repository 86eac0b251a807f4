"""Frequency-domain design specifications for switched plants.

Controller template families, phase-margin / gain-crossover / sensitivity
specification checks, closed-loop characteristic pseudo-polynomials, and the
pairwise phase-difference test that certifies quadratic stability of the
switched closed loop (all pairs below 90 degrees).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frlin import FractionalPolynomial, FractionalTransferFunction

__all__ = [
    "ControllerTemplate",
    "SwitchedPlant",
    "PhaseMarginSpec",
    "GainCrossoverSpec",
    "SensitivityBoundSpec",
    "StabilityReport",
    "default_grid",
    "to_transfer_function",
    "phase_margin_at",
    "gain_at",
    "gain_crossover_frequency",
    "sensitivity_margin",
    "characteristic_polynomial",
    "max_phase_difference",
    "quadratic_stability_check",
    "template_parameter_names",
]

# required parameter names per template kind; order fixes the tuner vector
_TEMPLATE_PARAMS = {
    "PID": ("Kp", "Ki", "Kd"),
    "FPI": ("Kp", "Ki", "lam"),
    "FPD": ("Kp", "Kd", "mu"),
    "NPID": ("Kp", "Ki", "Kd", "NN"),
    "FPID": ("Kp", "Ki", "Kd", "lam", "mu"),
    "PI": ("Kp", "Ki"),
    "PCI": ("Kp", "Ki"),
    "PCID": ("Kp", "Ki", "Kd"),
    "FPCI": ("Kp", "Ki", "alpha"),
    "PI+CI": ("kp", "tau_i", "p_reset"),
    "PIa+CIa": ("kp", "tau_i", "p_reset", "alpha"),
}

_ORDER_PARAMS = ("lam", "mu", "alpha")
_OPTIONAL_PARAMS = {"NN": ("PID", "PCID", "FPD", "FPID")}


def template_parameter_names(kind: str) -> tuple[str, ...]:
    if kind not in _TEMPLATE_PARAMS:
        raise ValueError(f"unknown controller kind {kind!r}")
    return _TEMPLATE_PARAMS[kind]


@dataclass(frozen=True)
class ControllerTemplate:
    """A named controller family with its parameter values.

    Linear families follow the switched-design table (PID, FPI, FPD, NPID,
    FPID); the remaining kinds are reset-controller bases whose transfer
    function here is the underlying linear (non-resetting) controller.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        names = template_parameter_names(self.kind)
        missing = [p for p in names if p not in self.params]
        if missing:
            raise ValueError(f"{self.kind} missing parameter(s) {missing}")
        extra = [
            p
            for p in self.params
            if p not in names and not (p == "NN" and self.kind in _OPTIONAL_PARAMS["NN"])
        ]
        if extra:
            raise ValueError(f"{self.kind} got unexpected parameter(s) {extra}")
        for p in _ORDER_PARAMS:
            if p in self.params and not 0.0 < float(self.params[p]) < 2.0:
                raise ValueError(f"order parameter {p} must lie in (0, 2)")
        if "p_reset" in self.params and not 0.0 <= float(self.params["p_reset"]) <= 1.0:
            raise ValueError("p_reset must lie in [0, 1]")
        if "NN" in self.params and float(self.params["NN"]) <= 0:
            raise ValueError("NN must be > 0")
        if "tau_i" in self.params and float(self.params["tau_i"]) <= 0:
            raise ValueError("tau_i must be > 0")

    def values(self) -> tuple[float, ...]:
        return tuple(float(self.params[p]) for p in template_parameter_names(self.kind))

    @classmethod
    def from_vector(cls, kind: str, vector) -> "ControllerTemplate":
        names = template_parameter_names(kind)
        if len(vector) != len(names):
            raise ValueError(f"{kind} needs {len(names)} parameters, got {len(vector)}")
        return cls(kind, dict(zip(names, map(float, vector))))


def to_transfer_function(template: ControllerTemplate) -> FractionalTransferFunction:
    """Transfer function of a template (base linear controller for reset kinds)."""
    p = {k: float(v) for k, v in template.params.items()}
    kind = template.kind
    if kind == "PID":
        return FractionalTransferFunction.from_terms(
            [(p["Kd"], 2.0), (p["Kp"], 1.0), (p["Ki"], 0.0)], [(1.0, 1.0)]
        )
    if kind in ("PI", "PCI"):
        return FractionalTransferFunction.from_terms(
            [(p["Kp"], 1.0), (p["Ki"], 0.0)], [(1.0, 1.0)]
        )
    if kind == "PCID":
        return FractionalTransferFunction.from_terms(
            [(p["Kd"], 2.0), (p["Kp"], 1.0), (p["Ki"], 0.0)], [(1.0, 1.0)]
        )
    if kind == "FPI":
        lam = p["lam"]
        return FractionalTransferFunction.from_terms(
            [(p["Kp"], lam), (p["Ki"], 0.0)], [(1.0, lam)]
        )
    if kind == "FPCI":
        a = p["alpha"]
        return FractionalTransferFunction.from_terms([(p["Kp"], a), (p["Ki"], 0.0)], [(1.0, a)])
    if kind == "FPD":
        return FractionalTransferFunction.from_terms(
            [(p["Kd"], p["mu"]), (p["Kp"], 0.0)], [(1.0, 0.0)]
        )
    if kind == "NPID":
        nn = p["NN"]
        num = [(p["Kp"] / nn + p["Kd"], 2.0), (p["Kp"] + p["Ki"] / nn, 1.0), (p["Ki"], 0.0)]
        den = [(1.0 / nn, 2.0), (1.0, 1.0)]
        return FractionalTransferFunction.from_terms(num, den)
    if kind == "FPID":
        lam, mu = p["lam"], p["mu"]
        return FractionalTransferFunction.from_terms(
            [(p["Kd"], lam + mu), (p["Kp"], lam), (p["Ki"], 0.0)], [(1.0, lam)]
        )
    if kind in ("PI+CI", "PIa+CIa"):
        a = p.get("alpha", 1.0)
        ki = p["kp"] / p["tau_i"]
        return FractionalTransferFunction.from_terms([(p["kp"], a), (ki, 0.0)], [(1.0, a)])
    raise ValueError(f"unknown controller kind {kind!r}")


@dataclass(frozen=True)
class SwitchedPlant:
    """Subsystems G_1..G_L plus the designer-chosen worst-case index (1-based)."""

    subsystems: tuple[FractionalTransferFunction, ...]
    worst_index: int = 1

    def __init__(self, subsystems, worst_index: int = 1):
        subsystems = tuple(subsystems)
        if len(subsystems) < 1:
            raise ValueError("at least one subsystem required")
        if not 1 <= worst_index <= len(subsystems):
            raise ValueError("worst_index out of range")
        object.__setattr__(self, "subsystems", subsystems)
        object.__setattr__(self, "worst_index", int(worst_index))

    @property
    def n_subsystems(self) -> int:
        return len(self.subsystems)

    @property
    def worst(self) -> FractionalTransferFunction:
        return self.subsystems[self.worst_index - 1]


@dataclass(frozen=True)
class PhaseMarginSpec:
    phi_deg: float
    omega: float

    def __post_init__(self):
        if not 0.0 < self.phi_deg < 180.0:
            raise ValueError("phase margin must lie in (0, 180) degrees")
        if self.omega <= 0:
            raise ValueError("omega must be > 0")


@dataclass(frozen=True)
class GainCrossoverSpec:
    omega: float

    def __post_init__(self):
        if self.omega <= 0:
            raise ValueError("omega must be > 0")


@dataclass(frozen=True)
class SensitivityBoundSpec:
    max_db: float
    omega: float

    def __post_init__(self):
        if self.max_db >= 0:
            raise ValueError("sensitivity bound must be < 0 dB")
        if self.omega <= 0:
            raise ValueError("omega must be > 0")


def default_grid(lo: float = 1e-3, hi: float = 1e3, points: int = 2000) -> np.ndarray:
    """Default logarithmic frequency grid standing in for 'all omega >= 0'."""
    return np.logspace(np.log10(lo), np.log10(hi), points)


def _unwrapped_phase(tf_or_poly, grid) -> np.ndarray:
    vals = tf_or_poly.evaluate(grid)
    return np.unwrap(np.angle(vals))


def phase_margin_at(
    K: FractionalTransferFunction,
    G: FractionalTransferFunction,
    omega: float,
    unwrap_from: float | None = None,
    points: int = 256,
) -> float:
    """Phase margin arg(K(jw)G(jw)) + 180 degrees at w = omega.

    The loop phase is unwrapped along a log grid walked up from a low anchor
    frequency so results land in (-180, 540) even past a +/-180 wrap.
    """
    if omega <= 0:
        raise ValueError("omega must be > 0")
    lo = unwrap_from if unwrap_from is not None else min(1e-3, omega / 100.0)
    grid = np.logspace(np.log10(lo), np.log10(omega), points)
    grid[-1] = omega
    loop = K * G
    phase = _unwrapped_phase(loop, grid)
    return float(np.degrees(phase[-1]) + 180.0)


def gain_at(K: FractionalTransferFunction, G: FractionalTransferFunction, omega: float) -> float:
    """Open-loop gain 20*log10|K(jw)G(jw)| in dB at w = omega."""
    val = (K * G).evaluate(float(omega))
    if val == 0:
        raise ZeroDivisionError(f"open loop vanishes at omega = {omega}")
    return float(20.0 * np.log10(abs(val)))


def gain_crossover_frequency(
    K: FractionalTransferFunction,
    G: FractionalTransferFunction,
    grid=None,
    bisections: int = 60,
) -> float:
    """First frequency where |K(jw)G(jw)| crosses unity, from the grid low end."""
    w = default_grid() if grid is None else np.asarray(grid, dtype=float)
    mag = np.abs((K * G).evaluate(w))
    sign = np.sign(mag - 1.0)
    idx = np.nonzero(sign[:-1] * sign[1:] <= 0)[0]
    if idx.size == 0:
        raise ValueError("loop gain does not cross 0 dB on the grid")
    lo, hi = w[idx[0]], w[idx[0] + 1]
    f_lo = abs((K * G).evaluate(lo)) - 1.0
    for _ in range(bisections):
        mid = np.sqrt(lo * hi)
        f_mid = abs((K * G).evaluate(mid)) - 1.0
        if f_lo * f_mid <= 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
    return float(np.sqrt(lo * hi))


def sensitivity_margin(
    K: FractionalTransferFunction, G: FractionalTransferFunction, grid
) -> float:
    """Max over the grid of |S(jw)| in dB, S = 1/(1 + G K)."""
    w = np.asarray(grid, dtype=float)
    loop = (K * G).evaluate(w)
    s = 1.0 + loop
    if np.any(s == 0):
        w_bad = w[s == 0][0]
        raise ZeroDivisionError(f"1 + GK vanishes at omega = {w_bad!r}")
    return float(np.max(-20.0 * np.log10(np.abs(s))))


def characteristic_polynomial(
    K: FractionalTransferFunction, G: FractionalTransferFunction
) -> FractionalPolynomial:
    """Closed-loop characteristic pseudo-polynomial num_K*num_G + den_K*den_G."""
    return K.num * G.num + K.den * G.den


def _phase_difference_curve(ca, cb, grid):
    va = ca.evaluate(grid)
    vb = cb.evaluate(grid)
    if np.any(va == 0) or np.any(vb == 0):
        w_bad = grid[(va == 0) | (vb == 0)][0]
        raise ZeroDivisionError(f"characteristic polynomial vanishes at omega = {w_bad!r}")
    da = np.unwrap(np.angle(va))
    db = np.unwrap(np.angle(vb))
    return np.abs(da - db)


def max_phase_difference(
    ca: FractionalPolynomial,
    cb: FractionalPolynomial,
    grid,
    refine_levels: int = 3,
) -> float:
    """Max |arg ca(jw) - arg cb(jw)| in degrees over the grid.

    The grid maximum is sharpened by refine_levels rounds of local bisection
    around the winning point; near the peak the difference is evaluated as
    the principal argument of the ratio, which is wrap-free below 180 deg.
    """
    w = np.asarray(grid, dtype=float)
    if w.ndim != 1 or w.size < 2:
        raise ValueError("grid must have at least two points")
    diff = _phase_difference_curve(ca, cb, w)
    i = int(np.argmax(diff))
    best = diff[i]
    lo = w[max(i - 1, 0)]
    hi = w[min(i + 1, w.size - 1)]
    for _ in range(refine_levels):
        local = np.logspace(np.log10(lo), np.log10(hi), 21)
        da = np.angle(ca.evaluate(local))
        db = np.angle(cb.evaluate(local))
        # fold the principal-value difference back below 180 deg; exactly
        # symmetric in (ca, cb), valid because the true difference is < 180
        # anywhere near the maximum this refinement sharpens
        folded = np.abs(da - db) % (2 * np.pi)
        local_diff = np.minimum(folded, 2 * np.pi - folded)
        j = int(np.argmax(local_diff))
        if local_diff[j] > best:
            best = local_diff[j]
        lo = local[max(j - 1, 0)]
        hi = local[min(j + 1, local.size - 1)]
    return float(np.degrees(best))


@dataclass(frozen=True)
class StabilityReport:
    passed: bool
    margin_deg: float
    worst_pair: tuple[int, int]
    worst_difference_deg: float
    pair_differences: dict

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (
            f"quadratic stability {verdict}: worst pair {self.worst_pair} "
            f"differs {self.worst_difference_deg:.2f} deg (margin {self.margin_deg:.2f} deg)"
        )


def quadratic_stability_check(
    K: FractionalTransferFunction, plant: SwitchedPlant, grid=None
) -> StabilityReport:
    """All-pairs phase-difference test: pass iff every pair stays below 90 deg.

    The source criterion lists only consecutive subsystem pairs; checking all
    pairs is stronger and order-independent, which is what a common-Lyapunov
    argument needs.  With a single subsystem the check passes vacuously.
    """
    w = default_grid() if grid is None else np.asarray(grid, dtype=float)
    polys = [characteristic_polynomial(K, G) for G in plant.subsystems]
    pair_diffs: dict[tuple[int, int], float] = {}
    worst_pair = (1, 1)
    worst = 0.0
    for a in range(len(polys)):
        for b in range(a + 1, len(polys)):
            d = max_phase_difference(polys[a], polys[b], w)
            pair_diffs[(a + 1, b + 1)] = d
            if d > worst:
                worst = d
                worst_pair = (a + 1, b + 1)
    return StabilityReport(
        passed=worst < 90.0,
        margin_deg=90.0 - worst,
        worst_pair=worst_pair,
        worst_difference_deg=worst,
        pair_differences=pair_diffs,
    )
