"""Response metrics, limit-cycle detection, and describing functions.

ISE / overshoot / rise time / peak control effort from simulation traces,
an autocorrelation-based sustained-oscillation detector, and the describing
function of the PI^alpha + CI^alpha controller with its fractional Clegg
integrator term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hybridsim import SimulationTrace

__all__ = [
    "LimitCycleResult",
    "ResponseMetrics",
    "compute_metrics",
    "detect_limit_cycle",
    "steady_control_value",
    "describing_function",
    "clegg_df",
]


@dataclass(frozen=True)
class LimitCycleResult:
    """detected is True/False, or None when the window is too short to judge."""

    detected: bool | None
    amplitude: float = 0.0
    period: float = 0.0

    @property
    def indeterminate(self) -> bool:
        return self.detected is None


@dataclass(frozen=True)
class ResponseMetrics:
    ise: float
    max_u: float
    overshoot_pct: float
    rise_time: float
    settling_time: float
    limit_cycle: LimitCycleResult

    def as_dict(self) -> dict:
        return {
            "ise": self.ise,
            "max_u": self.max_u,
            "overshoot_pct": self.overshoot_pct,
            "rise_time_s": self.rise_time,
            "settling_time_s": self.settling_time,
            "limit_cycle_detected": self.limit_cycle.detected,
            "limit_cycle_amplitude": self.limit_cycle.amplitude,
            "limit_cycle_period_s": self.limit_cycle.period,
        }


def compute_metrics(
    trace: SimulationTrace,
    final_value: float,
    settle_fraction: float = 0.5,
) -> ResponseMetrics:
    """Summary metrics of a step-type response.

    ise integrates e^2 over the whole horizon; overshoot is relative to
    final_value and clamped at zero; rise time is the first instant y reaches
    0.9*final_value (t_s in the comparison tables is this 0-to-90% time);
    settling time is the last exit from the 2% band around final_value.
    """
    if trace.n_samples == 0:
        raise ValueError("empty trace")
    if final_value == 0:
        raise ValueError("final_value must be nonzero for percentage metrics")
    y, u, e, h = trace.y, trace.u, trace.e, trace.h
    ise = float(np.sum(e * e) * h)
    max_u = float(np.max(np.abs(u)))
    peak = float(np.max(y)) if final_value > 0 else float(np.min(y))
    overshoot = max(0.0, (peak - final_value) / final_value * 100.0)
    target = 0.9 * final_value
    reached = np.nonzero(y >= target if final_value > 0 else y <= target)[0]
    rise = float(trace.t[reached[0]]) if reached.size else float("nan")
    off_band = np.nonzero(np.abs(y - final_value) > 0.02 * abs(final_value))[0]
    settling = float(trace.t[off_band[-1] + 1]) if off_band.size and off_band[-1] + 1 < y.size \
        else (float("nan") if off_band.size else 0.0)
    lc = detect_limit_cycle(trace, settle_fraction)
    return ResponseMetrics(
        ise=ise,
        max_u=max_u,
        overshoot_pct=overshoot,
        rise_time=rise,
        settling_time=settling,
        limit_cycle=lc,
    )


def detect_limit_cycle(
    trace: SimulationTrace,
    settle_fraction: float = 0.5,
    amplitude_fraction: float = 0.005,
    min_periods: int = 3,
    max_decay_per_period: float = 0.10,
) -> LimitCycleResult:
    """Detect a sustained oscillation in the trailing part of the error.

    The analysis window is the trailing (1 - settle_fraction) of the horizon.
    Detected requires the window peak-to-peak to exceed amplitude_fraction of
    the reference amplitude AND a dominant autocorrelation period repeated at
    least min_periods times whose per-period peak-to-peak decays less than
    max_decay_per_period.  A window shorter than min_periods candidate
    periods is reported as indeterminate (detected=None).
    """
    if not 0.0 < settle_fraction < 1.0:
        raise ValueError("settle_fraction must lie in (0, 1)")
    e = np.asarray(trace.e, dtype=float)
    h = trace.h
    ref_amp = float(np.max(np.abs(trace.r))) or 1.0
    w = e[int(settle_fraction * e.size):]
    if w.size < 8:
        return LimitCycleResult(detected=None)
    pp = float(np.max(w) - np.min(w))
    if pp <= amplitude_fraction * ref_amp:
        return LimitCycleResult(detected=False)
    x = w - np.mean(w)
    ac = np.correlate(x, x, mode="full")[x.size - 1:]
    if ac[0] <= 0:
        return LimitCycleResult(detected=False)
    ac = ac / ac[0]
    # dominant period: first interior autocorrelation peak of meaningful height
    lag = 0
    for i in range(1, ac.size - 1):
        if ac[i] >= ac[i - 1] and ac[i] > ac[i + 1] and ac[i] > 0.2:
            lag = i
            break
    if lag == 0:
        # no repetition found: a monotone drift is no cycle; a window holding
        # only a fraction of one oscillation cannot be judged either way
        sign = np.sign(x)
        crossings = int(np.count_nonzero(np.diff(sign[sign != 0]) != 0))
        if crossings <= 1:
            return LimitCycleResult(detected=False)
        if crossings <= 5:
            return LimitCycleResult(detected=None)
        return LimitCycleResult(detected=False)
    if w.size < min_periods * lag:
        return LimitCycleResult(detected=None)
    n_seg = w.size // lag
    peaks = [float(np.max(w[i * lag:(i + 1) * lag]) - np.min(w[i * lag:(i + 1) * lag]))
             for i in range(n_seg)]
    peaks = [p for p in peaks if p > 0]
    if len(peaks) < min_periods:
        return LimitCycleResult(detected=None)
    decays = [1.0 - peaks[i + 1] / peaks[i] for i in range(len(peaks) - 1) if peaks[i] > 0]
    sustained = max(decays) < max_decay_per_period if decays else False
    amp = float(np.max(w[-lag:]) - np.min(w[-lag:])) / 2.0
    return LimitCycleResult(detected=bool(sustained), amplitude=amp, period=lag * h)


def steady_control_value(trace: SimulationTrace, window_fraction: float = 0.02) -> float:
    """Mean control signal over the trailing window of the horizon."""
    if not 0.0 < window_fraction <= 1.0:
        raise ValueError("window_fraction must lie in (0, 1]")
    n = max(1, int(round(window_fraction * trace.u.size)))
    return float(np.mean(trace.u[-n:]))


def clegg_df(omega):
    """Describing function of the classical Clegg integrator, (1 + j4/pi)/(j w)."""
    w = np.asarray(omega, dtype=float)
    val = (1.0 + 1j * 4.0 / np.pi) / (1j * w)
    return complex(val) if np.ndim(omega) == 0 else val


def _ci_alpha_df(alpha: float, omega):
    """Fractional Clegg term (4/(pi w^a)) * (sin(a pi/2) + (pi/4) e^{-j a pi/2})."""
    w = np.asarray(omega, dtype=float)
    half = alpha * np.pi / 2.0
    return (4.0 / (np.pi * w**alpha)) * (np.sin(half) + (np.pi / 4.0) * np.exp(-1j * half))


def describing_function(
    kp: float,
    tau_i: float,
    p_reset: float,
    alpha: float,
    omega,
    strict: bool = False,
):
    """Describing function of the PI^alpha + CI^alpha controller.

    Default form:
        N(jw) = kp (1 + (1-P)/(tau_i (jw)^a) + (P/tau_i) N_CI^a(w))
    with N_CI^a the fractional Clegg term, which reduces to the classical
    Clegg describing function at alpha = 1.  strict=True instead evaluates
    the printed source expression, which divides by the Clegg term; at
    alpha = 1 that form contradicts the classical Clegg result (its phase
    comes out +38 deg instead of -38 deg), so it is kept only for comparison.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("omega must be > 0")
    if tau_i <= 0:
        raise ValueError("tau_i must be > 0")
    if not 0.0 <= p_reset <= 1.0:
        raise ValueError("p_reset must lie in [0, 1]")
    jw_alpha = w**alpha * np.exp(1j * alpha * np.pi / 2.0)
    linear = (1.0 - p_reset) / (tau_i * jw_alpha)
    ci = _ci_alpha_df(alpha, w)
    if strict:
        reset_term = p_reset / (tau_i * ci)
    else:
        reset_term = (p_reset / tau_i) * ci
    val = kp * (1.0 + linear + reset_term)
    return complex(val) if np.ndim(omega) == 0 else val
