"""Event-driven closed-loop simulation.

Fixed-step integration of switched plants and reset controllers.  Fractional
states propagate by Grunwald-Letnikov history sums (order 1 collapses to
explicit Euler bit-for-bit).  Reset controllers jump selected states at error
zero-crossings or at fixed instants, to zero, to a feedforward-scaled value,
or to the plant-state-dependent value of the periodic comparison controller.

Clegg-type fractional integrators use a cascade realization by default: the
resettable state is an ordinary integrator fed by the differintegral
D^(1-alpha) of the error history, so the fractional memory lives in the loop
error and survives resets.  A "direct" realization with per-state fractional
histories (and a clear/retain memory policy at jumps) is also available.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .frlin import FractionalPolynomial, FractionalTransferFunction
from .freqdesign import ControllerTemplate, SwitchedPlant

__all__ = [
    "ConfigError",
    "NumericalError",
    "ZeroCrossing",
    "FixedInstants",
    "ZeroTarget",
    "FeedforwardTarget",
    "GeneralNonZeroTarget",
    "VariableNonZeroTarget",
    "PlantStateTarget",
    "ResetControllerSpec",
    "PlantModel",
    "StepReference",
    "PiecewiseReference",
    "ExplicitSwitching",
    "RandomSwitching",
    "ClosedLoopConfig",
    "ResetEvent",
    "SimulationTrace",
    "simulate",
    "make_pci",
    "make_pcid",
    "make_pci_feedforward",
    "make_general_reset",
    "make_pi_alpha_ci_alpha",
    "make_zheng_reset",
    "closed_loop_tf",
    "feedforward_gain",
]

DEFAULT_DERIVATIVE_FILTER = 100.0


class ConfigError(ValueError):
    """Invalid simulation or scenario configuration."""


class NumericalError(RuntimeError):
    """Simulation aborted on a non-finite state."""


# ---------------------------------------------------------------------------
# reset triggers / targets


@dataclass(frozen=True)
class ZeroCrossing:
    """Reset whenever the error changes sign (or touches the dead band)."""


@dataclass(frozen=True)
class FixedInstants:
    """Reset periodically at t = k * period."""

    period: float

    def __post_init__(self):
        if self.period <= 0:
            raise ConfigError("reset period must be > 0")


@dataclass(frozen=True)
class ZeroTarget:
    """Reset states jump to zero (Clegg behaviour)."""


@dataclass(frozen=True)
class FeedforwardTarget:
    """Zero-reset plus an additive feedforward gain*r term on the output.

    from_start=True keeps the feedforward active from t = 0, which is the
    variant whose flow dynamics are (gain + R_base)P/(1 + R_base P); with
    from_start=False the term activates at the first reset instead (that
    variant coincides with the general non-zero reset law).
    """

    gain: float
    from_start: bool = True


@dataclass(frozen=True)
class GeneralNonZeroTarget:
    """Jump x+ = A_R x + (gain/(n_R c_r)) B_R r at error zero-crossings."""

    gain: float


@dataclass(frozen=True)
class VariableNonZeroTarget:
    """Jump x+ = A_R x + B_R (gain*r - D_r e)/(n_R c_r) at fixed instants."""

    gain: float


@dataclass(frozen=True)
class PlantStateTarget:
    """Jump the reset state to E1*x_p1 + E2*x_p2 + G*r (full-state reset law)."""

    E1: float
    E2: float
    G: float


_TRIGGER_CODE = {type(None): _kernels.TRIG_NONE, ZeroCrossing: _kernels.TRIG_ZERO_CROSSING,
                 FixedInstants: _kernels.TRIG_FIXED_INSTANTS}
_TARGET_CODE = {ZeroTarget: _kernels.TGT_ZERO, FeedforwardTarget: _kernels.TGT_FEEDFORWARD,
                GeneralNonZeroTarget: _kernels.TGT_GENERAL,
                VariableNonZeroTarget: _kernels.TGT_VARIABLE,
                PlantStateTarget: _kernels.TGT_PLANT_STATE}


# ---------------------------------------------------------------------------
# controller state-space specs


@dataclass(frozen=True)
class ResetControllerSpec:
    """State-space reset controller.

    Flow: D^alpha x = A x + B e, u = C x + D e.  The last n_reset states jump
    at trigger events (the implied reset matrix is diag(I, 0)); B_R injects
    the non-zero reset value and c_r scales the reset-state output.
    """

    alpha: float
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float
    c_r: float
    n_reset: int
    B_R: np.ndarray
    trigger: object = None
    target: object = ZeroTarget()
    realization: str = "cascade"

    def __init__(self, alpha, A, B, C, D, c_r, n_reset, B_R, trigger=None,
                 target=ZeroTarget(), realization="cascade"):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.asarray(B, dtype=float).ravel()
        C = np.asarray(C, dtype=float).ravel()
        B_R = np.asarray(B_R, dtype=float).ravel()
        n = B.shape[0]
        if A.shape != (n, n) or C.shape != (n,) or B_R.shape != (n,):
            raise ConfigError("inconsistent controller matrix dimensions")
        if not 0.0 < float(alpha) <= 2.0:
            raise ConfigError("controller order alpha must lie in (0, 2]")
        if not 0 <= int(n_reset) <= n:
            raise ConfigError("n_reset out of range")
        if not isinstance(target, ZeroTarget) and int(n_reset) < 1:
            raise ConfigError("non-trivial reset law requires n_reset >= 1")
        if not isinstance(target, ZeroTarget) and c_r == 0.0:
            raise ConfigError("c_r must be nonzero for a non-zero reset target")
        if np.any(B_R[: n - int(n_reset)] != 0.0):
            raise ConfigError("B_R must vanish on the non-reset states")
        if type(trigger) not in _TRIGGER_CODE:
            raise ConfigError(f"unknown trigger {trigger!r}")
        if type(target) not in _TARGET_CODE:
            raise ConfigError(f"unknown target {target!r}")
        if realization not in ("cascade", "direct"):
            raise ConfigError("realization must be 'cascade' or 'direct'")
        if realization == "cascade" and abs(alpha - 1.0) > 1e-12 and np.any(A != 0.0):
            raise ConfigError(
                "cascade realization needs pure-integrator flow (A = 0) for fractional alpha; "
                "use realization='direct'"
            )
        object.__setattr__(self, "alpha", float(alpha))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", float(D))
        object.__setattr__(self, "c_r", float(c_r))
        object.__setattr__(self, "n_reset", int(n_reset))
        object.__setattr__(self, "B_R", B_R)
        object.__setattr__(self, "trigger", trigger)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "realization", realization)

    @property
    def n_states(self) -> int:
        return self.B.shape[0]

    def reset_matrix(self) -> np.ndarray:
        """The implied block-diagonal reset selection matrix diag(I, 0)."""
        a = np.eye(self.n_states)
        for i in range(self.n_states - self.n_reset, self.n_states):
            a[i, i] = 0.0
        return a


def make_pci(kp: float, ki: float, alpha: float = 1.0) -> ResetControllerSpec:
    """Proportional + (fractional) Clegg integrator: u = kp e + ki CI^alpha(e)."""
    return ResetControllerSpec(
        alpha=alpha, A=[[0.0]], B=[1.0], C=[ki], D=kp, c_r=ki, n_reset=1, B_R=[1.0],
        trigger=ZeroCrossing(), target=ZeroTarget(),
    )


def make_pcid(kp: float, ki: float, kd: float,
              nn: float = DEFAULT_DERIVATIVE_FILTER) -> ResetControllerSpec:
    """PCID: PID whose integrator is a Clegg integrator (banded derivative)."""
    a = [[-nn, 0.0], [0.0, 0.0]]
    b = [1.0, 1.0]
    c = [-kd * nn * nn, ki]
    d = kp + kd * nn
    return ResetControllerSpec(
        alpha=1.0, A=a, B=b, C=c, D=d, c_r=ki, n_reset=1, B_R=[0.0, 1.0],
        trigger=ZeroCrossing(), target=ZeroTarget(),
    )


def make_pci_feedforward(kp: float, ki: float, gain: float,
                         from_start: bool = True) -> ResetControllerSpec:
    """PCI plus a constant feedforward gain*r added to the control signal."""
    return ResetControllerSpec(
        alpha=1.0, A=[[0.0]], B=[1.0], C=[ki], D=kp, c_r=ki, n_reset=1, B_R=[1.0],
        trigger=ZeroCrossing(), target=FeedforwardTarget(gain, from_start),
    )


def make_general_reset(kp: float, tau_i: float, gain: float, alpha: float = 1.0,
                       t_k: float | None = None) -> ResetControllerSpec:
    """General reset controller over a PI^alpha base.

    With t_k=None the state resets at error zero-crossings to the value that
    re-creates gain*r on the output; with a period t_k it resets at fixed
    instants to the error-corrected variable value.
    """
    c_r = kp / tau_i
    if t_k is None:
        trigger: object = ZeroCrossing()
        target: object = GeneralNonZeroTarget(gain)
    else:
        trigger = FixedInstants(t_k)
        target = VariableNonZeroTarget(gain)
    return ResetControllerSpec(
        alpha=alpha, A=[[0.0]], B=[1.0], C=[c_r], D=kp, c_r=c_r, n_reset=1, B_R=[1.0],
        trigger=trigger, target=target,
    )


def make_pi_alpha_ci_alpha(kp: float, tau_i: float, p_reset: float,
                           alpha: float) -> ResetControllerSpec:
    """PI^alpha + CI^alpha controller.

    Two order-alpha integrator channels driven by the error: the first is the
    linear channel weighted (1 - p_reset), the second the Clegg channel
    weighted p_reset; only the Clegg channel resets.  At p_reset = 1 the
    matrices coincide with the printed state-space form (C = [0, kp/tau_i]).
    """
    if tau_i <= 0:
        raise ConfigError("tau_i must be > 0")
    if not 0.0 <= p_reset <= 1.0:
        raise ConfigError("p_reset must lie in [0, 1]")
    if not 0.0 < alpha < 2.0:
        raise ConfigError("alpha must lie in (0, 2)")
    c = [kp * (1.0 - p_reset) / tau_i, kp * p_reset / tau_i]
    c_r = c[1] if p_reset > 0 else kp / tau_i
    return ResetControllerSpec(
        alpha=alpha, A=np.zeros((2, 2)), B=[1.0, 1.0], C=c, D=kp, c_r=c_r,
        n_reset=1, B_R=[0.0, 1.0], trigger=ZeroCrossing(), target=ZeroTarget(),
    )


def make_zheng_reset(E1: float = -2.8e-4, E2: float = -6.8e-7, G: float = 1.4e-3,
                     kp: float = 0.08, tau_i: float = (8.0 / 3.0) * 1e-4,
                     t_k: float = 1e-3) -> ResetControllerSpec:
    """Comparison controller: PI base reset to E1*x_p1 + E2*x_p2 + G*r at t_k.

    Requires a plant exposing at least two states (position, velocity).
    """
    c_r = kp / tau_i
    return ResetControllerSpec(
        alpha=1.0, A=[[0.0]], B=[1.0], C=[c_r], D=kp, c_r=c_r, n_reset=1, B_R=[1.0],
        trigger=FixedInstants(t_k), target=PlantStateTarget(E1, E2, G),
    )


def feedforward_gain(plant: "PlantModel | FractionalTransferFunction") -> float:
    """Feedforward constant K = 1/P(0), the inverse plant DC gain."""
    if isinstance(plant, PlantModel):
        dc = plant.dc_gain()
    else:
        dc = plant.num.evaluate(0.0).real / plant.den.evaluate(0.0).real
    if dc == 0:
        raise ConfigError("plant DC gain is zero; feedforward gain undefined")
    return 1.0 / dc


# ---------------------------------------------------------------------------
# plants


def _float_gcd(values, tol=1e-9):
    g = 0.0
    for v in values:
        v = abs(float(v))
        if v < tol:
            continue
        if g == 0.0:
            g = v
            continue
        while v > tol:
            g, v = v, g % v
    return g


@dataclass(frozen=True)
class PlantModel:
    """Plant in (possibly fractional) state-space form.

    D^q_i x_i follows row i of A x + B u with per-state orders; y = C x.
    Built from a strictly proper transfer function (observer canonical form,
    so y = x_1 and states carry over at subsystem switches) or from explicit
    matrices.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    alphas: np.ndarray
    x0: np.ndarray

    def __init__(self, A, B, C, alphas=None, x0=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.asarray(B, dtype=float).ravel()
        C = np.asarray(C, dtype=float).ravel()
        n = B.shape[0]
        if A.shape != (n, n) or C.shape != (n,):
            raise ConfigError("inconsistent plant matrix dimensions")
        alphas = np.ones(n) if alphas is None else np.asarray(alphas, dtype=float).ravel()
        if alphas.shape != (n,) or np.any(alphas <= 0) or np.any(alphas > 2):
            raise ConfigError("plant state orders must lie in (0, 2]")
        x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel()
        if x0.shape != (n,):
            raise ConfigError("initial state dimension mismatch")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "x0", x0)

    @property
    def n_states(self) -> int:
        return self.B.shape[0]

    def dc_gain(self) -> float:
        a = np.asarray(self.A)
        try:
            return float(self.C @ np.linalg.solve(-a, self.B))
        except np.linalg.LinAlgError as exc:
            raise ConfigError("plant has a pole at the origin; DC gain undefined") from exc

    def fastest_rate(self) -> float:
        """Largest |eigenvalue| of A, used for the step-size sanity check."""
        if self.n_states == 0:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvals(self.A))))

    @classmethod
    def from_tf(cls, tf: FractionalTransferFunction, x0=None) -> "PlantModel":
        """Observer-canonical realization of a strictly proper transfer function.

        Fractional transfer functions must be commensurate: all orders are
        multiples of a common base order q, and every state carries order q.
        """
        den_orders = tf.den.orders
        num_orders = tf.num.orders if tf.num.orders else (0.0,)
        all_orders = [a for a in den_orders + num_orders if a > 1e-12]
        q = _float_gcd(all_orders) if all_orders else 1.0
        if q <= 1e-6:
            raise ConfigError("transfer function is not commensurate (base order too small)")
        deg = int(round(tf.den.degree / q))
        if deg < 1:
            raise ConfigError("denominator must have positive degree")
        if deg > 400:
            raise ConfigError("commensurate realization would need too many states")
        if not tf.num.is_zero() and tf.num.degree > tf.den.degree - q + 1e-9:
            raise ConfigError("plant must be strictly proper for time-domain simulation")

        def aligned(poly, size):
            out = np.zeros(size)
            for cv, av in poly.terms:
                idx = av / q
                if abs(idx - round(idx)) > 1e-6:
                    raise ConfigError("transfer function orders are not commensurate")
                out[int(round(idx))] = cv
            return out

        den = aligned(tf.den, deg + 1)
        num = aligned(tf.num, deg + 1)
        lead = den[deg]
        den = den / lead
        num = num / lead
        a = np.zeros((deg, deg))
        for i in range(deg):
            a[i, 0] = -den[deg - 1 - i]
        for i in range(deg - 1):
            a[i, i + 1] = 1.0
        b = np.array([num[deg - 1 - i] for i in range(deg)])
        c = np.zeros(deg)
        c[0] = 1.0
        return cls(a, b, c, alphas=np.full(deg, q), x0=x0)

    @classmethod
    def second_order(cls, a1: float, a2: float, b: float, x0=None) -> "PlantModel":
        """x1' = x2, x2' = -a1 x1 - a2 x2 + b u, y = x1 (position/velocity form)."""
        return cls([[0.0, 1.0], [-a1, -a2]], [0.0, b], [1.0, 0.0], x0=x0)


# ---------------------------------------------------------------------------
# reference and switching signals


@dataclass(frozen=True)
class StepReference:
    amplitude: float = 1.0
    start: float = 0.0

    def sample(self, n: int, h: float) -> np.ndarray:
        t = np.arange(n + 1) * h
        return np.where(t >= self.start, self.amplitude, 0.0)


@dataclass(frozen=True)
class PiecewiseReference:
    """Piecewise-constant reference: value[i] holds on [times[i], times[i+1])."""

    times: tuple
    values: tuple

    def __init__(self, times, values):
        times = tuple(float(t) for t in times)
        values = tuple(float(v) for v in values)
        if len(times) != len(values) or not times:
            raise ConfigError("times and values must have equal nonzero length")
        if times[0] != 0.0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("times must start at 0 and strictly increase")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def sample(self, n: int, h: float) -> np.ndarray:
        t = np.arange(n + 1) * h
        idx = np.searchsorted(self.times, t, side="right") - 1
        return np.asarray(self.values, dtype=float)[idx]


@dataclass(frozen=True)
class ExplicitSwitching:
    """Explicit subsystem schedule: indices[i] active on [times[i], times[i+1])."""

    times: tuple
    indices: tuple

    def __init__(self, times, indices):
        times = tuple(float(t) for t in times)
        indices = tuple(int(i) for i in indices)
        if len(times) != len(indices) or not times:
            raise ConfigError("times and indices must have equal nonzero length")
        if times[0] != 0.0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("switching times must start at 0 and strictly increase")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "indices", indices)

    def sample(self, n: int, h: float):
        t = np.arange(n + 1) * h
        pos = np.searchsorted(self.times, t, side="right") - 1
        idx = np.asarray(self.indices, dtype=np.int64)[pos]
        return idx, list(zip(self.times, self.indices))


@dataclass(frozen=True)
class RandomSwitching:
    """Seeded uniform dwell-time switching, alternating through the subsystems."""

    seed: int = 0
    dwell_min: float = 2.0
    dwell_max: float = 10.0
    n_subsystems: int = 2
    first_index: int = 0

    def schedule(self, horizon: float):
        if not 0 < self.dwell_min < self.dwell_max:
            raise ConfigError("dwell range must satisfy 0 < dwell_min < dwell_max")
        rng = np.random.default_rng(self.seed)
        t = 0.0
        idx = self.first_index
        times = []
        indices = []
        while t < horizon:
            times.append(t)
            indices.append(idx)
            t += float(rng.uniform(self.dwell_min, self.dwell_max))
            idx = (idx + 1) % self.n_subsystems
        return ExplicitSwitching(times, indices)

    def sample(self, n: int, h: float):
        return self.schedule(n * h).sample(n, h)


# ---------------------------------------------------------------------------
# closed-loop configuration and trace


@dataclass(frozen=True)
class ResetEvent:
    time: float
    step: int
    pre_state: np.ndarray
    post_state: np.ndarray


@dataclass
class SimulationTrace:
    """Uniformly sampled closed-loop trajectory plus the reset-event log."""

    t: np.ndarray
    y: np.ndarray
    u: np.ndarray
    e: np.ndarray
    r: np.ndarray
    controller_states: np.ndarray
    plant_states: np.ndarray
    active_subsystem: np.ndarray
    events: list
    h: float
    switching_schedule: list | None = None

    @property
    def n_samples(self) -> int:
        return self.t.shape[0]


def _linear_template_realization(template: ControllerTemplate, nn_default=DEFAULT_DERIVATIVE_FILTER):
    """State matrices, output row, feedthrough, and per-state orders for the
    linear template families.  Derivative action is banded through s/(1+s/NN)."""
    p = {k: float(v) for k, v in template.params.items()}
    kind = template.kind
    nn = p.get("NN", nn_default)

    def deriv_block(kd, mu):
        # filter state xf' = -NN xf + e produces v = NN e - NN^2 xf ~ de/dt,
        # then I^(1-mu) turns it into D^mu e; mu = 1 needs no extra state
        if abs(mu - 1.0) <= 1e-12:
            return ([[-nn]], [1.0], [-kd * nn * nn], kd * nn, [1.0])
        a = [[-nn, 0.0], [-nn * nn, 0.0]]
        b = [1.0, nn]
        c = [0.0, kd]
        return (a, b, c, 0.0, [1.0, 1.0 - mu])

    if kind in ("PI", "PCI"):
        return np.zeros((1, 1)), np.array([1.0]), np.array([p["Ki"]]), p["Kp"], np.array([1.0])
    if kind in ("FPI", "FPCI"):
        lam = p.get("lam", p.get("alpha"))
        return np.zeros((1, 1)), np.array([1.0]), np.array([p["Ki"]]), p["Kp"], np.array([lam])
    if kind in ("PID", "NPID", "PCID"):
        a = np.array([[0.0, 0.0], [0.0, -nn]])
        b = np.array([1.0, 1.0])
        c = np.array([p["Ki"], -p["Kd"] * nn * nn])
        d = p["Kp"] + p["Kd"] * nn
        return a, b, c, d, np.array([1.0, 1.0])
    if kind == "FPD":
        a, b, c, d, orders = deriv_block(p["Kd"], p["mu"])
        return np.atleast_2d(np.array(a)), np.array(b), np.array(c), p["Kp"] + d, np.array(orders)
    if kind == "FPID":
        da, db, dc, dd, dorders = deriv_block(p["Kd"], p["mu"])
        m = len(db)
        a = np.zeros((m + 1, m + 1))
        a[1:, 1:] = np.array(da)
        b = np.concatenate(([1.0], db))
        c = np.concatenate(([p["Ki"]], dc))
        orders = np.concatenate(([p["lam"]], dorders))
        return a, b, c, p["Kp"] + dd, orders
    raise ConfigError(f"no time-domain realization for template kind {kind!r}")


def _template_to_controller(template: ControllerTemplate):
    kind = template.kind
    p = {k: float(v) for k, v in template.params.items()}
    if kind == "PCI":
        return make_pci(p["Kp"], p["Ki"])
    if kind == "FPCI":
        return make_pci(p["Kp"], p["Ki"], alpha=p["alpha"])
    if kind == "PCID":
        return make_pcid(p["Kp"], p["Ki"], p["Kd"], p.get("NN", DEFAULT_DERIVATIVE_FILTER))
    if kind in ("PI+CI", "PIa+CIa"):
        return make_pi_alpha_ci_alpha(p["kp"], p["tau_i"], p["p_reset"], p.get("alpha", 1.0))
    return None  # stays a linear template


@dataclass(frozen=True)
class ClosedLoopConfig:
    """Everything one closed-loop run needs.

    plant accepts a PlantModel, a FractionalTransferFunction, a SwitchedPlant,
    or a list of PlantModel subsystems (then switching must be given).
    controller accepts a ResetControllerSpec or a linear ControllerTemplate.
    """

    plant: object
    controller: object
    reference: object = StepReference(1.0)
    switching: object = None
    h: float = 1e-3
    horizon: float = 10.0
    memory_policy: str = "clear"
    gl_memory: int | None = None
    deadband: float = 1e-9
    check_step_size: bool = True

    def __post_init__(self):
        if self.h <= 0:
            raise ConfigError("step h must be > 0")
        if self.horizon <= self.h:
            raise ConfigError("horizon must exceed the step h")
        if self.memory_policy not in ("clear", "retain"):
            raise ConfigError("memory_policy must be 'clear' or 'retain'")
        if self.gl_memory is not None and self.gl_memory < 1:
            raise ConfigError("gl_memory must be >= 1")


def _resolve_plants(config: ClosedLoopConfig):
    plant = config.plant
    if isinstance(plant, PlantModel):
        models = [plant]
    elif isinstance(plant, FractionalTransferFunction):
        models = [PlantModel.from_tf(plant)]
    elif isinstance(plant, SwitchedPlant):
        models = [PlantModel.from_tf(g) for g in plant.subsystems]
    elif isinstance(plant, (list, tuple)):
        models = [m if isinstance(m, PlantModel) else PlantModel.from_tf(m) for m in plant]
    else:
        raise ConfigError(f"unsupported plant specification {type(plant).__name__}")
    n = models[0].n_states
    for m in models[1:]:
        if m.n_states != n or not np.allclose(m.alphas, models[0].alphas):
            raise ConfigError("switched subsystems must share state dimension and orders")
    if len(models) > 1 and config.switching is None:
        raise ConfigError("switching signal required for a switched plant")
    return models


def simulate(config: ClosedLoopConfig) -> SimulationTrace:
    """Run the closed loop and return its trace.

    Rejects steps h >= (fastest plant time constant)/10 and aborts with a
    diagnostic if the state leaves the finite range.
    """
    models = _resolve_plants(config)
    h = float(config.h)
    n = int(round(config.horizon / h))
    if n < 2:
        raise ConfigError("horizon must cover at least two steps")

    rate = max(m.fastest_rate() for m in models)
    if config.check_step_size and rate > 0 and h >= (1.0 / rate) / 10.0:
        raise ConfigError(
            f"step h = {h} too large for plant time constant {1.0 / rate:.3g} s "
            "(need h < time constant / 10)"
        )

    npl = models[0].n_states
    L = len(models)
    Ap = np.stack([m.A for m in models])
    Bp = np.stack([m.B for m in models])
    Cp = np.stack([m.C for m in models])
    p_alphas = models[0].alphas
    p_ha = h**p_alphas
    p_wrev, p_wlen = _kernels.build_weight_rows(p_alphas, n, config.gl_memory)

    controller = config.controller
    if isinstance(controller, ControllerTemplate):
        converted = _template_to_controller(controller)
        controller = converted if converted is not None else controller

    ones1 = np.ones((1, 1))
    if isinstance(controller, ControllerTemplate):
        Ac, Bc, Cc, Dc, c_alphas = _linear_template_realization(controller)
        direct = True
        trigger = None
        target = ZeroTarget()
        n_reset = 0
        BR = np.zeros(Bc.shape[0])
        cr = 1.0
        c_ha = h**c_alphas
        c_wrev, c_wlen = _kernels.build_weight_rows(c_alphas, n, config.gl_memory)
        mu_hinv, mu_wrev, mu_wlen = 1.0, np.ones(1), 0
    elif isinstance(controller, ResetControllerSpec):
        spec = controller
        Ac, Bc, Cc, Dc = spec.A, spec.B, spec.C, spec.D
        trigger, target = spec.trigger, spec.target
        n_reset, BR, cr = spec.n_reset, spec.B_R, spec.c_r
        direct = spec.realization == "direct"
        if direct:
            c_alphas = np.full(spec.n_states, spec.alpha)
            c_ha = h**c_alphas
            c_wrev, c_wlen = _kernels.build_weight_rows(c_alphas, n, config.gl_memory)
            mu_hinv, mu_wrev, mu_wlen = 1.0, np.ones(1), 0
        else:
            mu = 1.0 - spec.alpha
            mu_hinv = h ** (-mu)
            cap = n if config.gl_memory is None else min(n, config.gl_memory)
            w = _kernels.gl_weights_any_order(mu, cap)
            nz = np.nonzero(w)[0]
            last = int(nz[-1]) if nz.size else 0
            mu_wrev = w[: last + 1][::-1].copy()
            mu_wlen = last
            c_ha = np.ones(spec.n_states)
            c_wrev, c_wlen = ones1.copy(), np.zeros(spec.n_states, dtype=np.int64)
    else:
        raise ConfigError(f"unsupported controller specification {type(controller).__name__}")

    if isinstance(target, PlantStateTarget) and npl < 2:
        raise ConfigError("plant-state reset law needs a plant exposing two states")

    nc = Bc.shape[0]
    r = np.ascontiguousarray(config.reference.sample(n, h), dtype=float)
    schedule = None
    if config.switching is not None:
        sub_idx, schedule = config.switching.sample(n, h)
        sub_idx = np.ascontiguousarray(sub_idx, dtype=np.int64)
        if np.any(sub_idx < 0) or np.any(sub_idx >= L):
            raise ConfigError("switching signal indexes a missing subsystem")
    else:
        sub_idx = np.zeros(n + 1, dtype=np.int64)

    trig_code = _TRIGGER_CODE[type(trigger)]
    tgt_code = _TARGET_CODE[type(target)]
    tk_steps = 0
    if isinstance(trigger, FixedInstants):
        tk_steps = int(round(trigger.period / h))
        if tk_steps < 1:
            raise ConfigError("reset period shorter than the step h")
    t_gain, e1, e2, gz, ff_start = 0.0, 0.0, 0.0, 0.0, False
    if isinstance(target, FeedforwardTarget):
        t_gain, ff_start = target.gain, target.from_start
    elif isinstance(target, (GeneralNonZeroTarget, VariableNonZeroTarget)):
        t_gain = target.gain
    elif isinstance(target, PlantStateTarget):
        e1, e2, gz = target.E1, target.E2, target.G

    y = np.empty(n + 1)
    u = np.empty(n + 1)
    e = np.empty(n + 1)
    xc = np.zeros((nc, n + 1))
    xp = np.zeros((npl, n + 1))
    xp[:, 0] = models[0].x0
    max_ev = n + 2
    ev_step = np.zeros(max_ev, dtype=np.int64)
    ev_time = np.zeros(max_ev)
    ev_pre = np.zeros((max_ev, nc))
    ev_post = np.zeros((max_ev, nc))

    status, n_done, n_events = _kernels.run_closed_loop(
        h, r, sub_idx,
        Ap, Bp, Cp, p_ha, p_wrev, p_wlen,
        np.ascontiguousarray(Ac, dtype=float), np.ascontiguousarray(Bc, dtype=float),
        np.ascontiguousarray(Cc, dtype=float), float(Dc),
        bool(direct), np.ascontiguousarray(c_ha, dtype=float), c_wrev,
        np.ascontiguousarray(c_wlen, dtype=np.int64),
        float(mu_hinv), mu_wrev, int(mu_wlen),
        int(trig_code), int(tk_steps), int(tgt_code), int(n_reset),
        np.ascontiguousarray(BR, dtype=float),
        float(cr), float(t_gain), float(e1), float(e2), float(gz),
        bool(ff_start), config.memory_policy == "retain", float(config.deadband),
        y, u, e, xc, xp, ev_step, ev_time, ev_pre, ev_post,
    )
    if status == _kernels.STATUS_NONFINITE:
        raise NumericalError(
            f"state became non-finite at step {n_done} (t = {n_done * h:.6g} s); "
            "reduce the step size or check the loop gains"
        )

    events = [
        ResetEvent(
            time=float(ev_time[i]),
            step=int(ev_step[i]),
            pre_state=ev_pre[i].copy(),
            post_state=ev_post[i].copy(),
        )
        for i in range(n_events)
    ]
    return SimulationTrace(
        t=np.arange(n + 1) * h,
        y=y, u=u, e=e, r=r,
        controller_states=xc,
        plant_states=xp,
        active_subsystem=sub_idx,
        events=events,
        h=h,
        switching_schedule=schedule,
    )


def closed_loop_tf(
    base: FractionalTransferFunction,
    plant: FractionalTransferFunction,
    with_feedforward: bool = False,
    gain: float | None = None,
) -> FractionalTransferFunction:
    """Flow-phase closed-loop transfer function of the reset loop.

    Without feedforward: R P / (1 + R P); with it: (gain + R) P / (1 + R P).
    Between resets the general reset controller follows the first form, the
    feedforward variant the second, which is why only the former keeps the
    base controller's rise time.
    """
    num_l = base.num * plant.num
    den_l = base.den * plant.den
    den_cl = den_l + num_l
    if with_feedforward:
        if gain is None:
            raise ValueError("feedforward gain required")
        num_cl = (base.num + gain * base.den) * plant.num
    else:
        num_cl = num_l
    return FractionalTransferFunction(num_cl, den_cl)
