"""Metrics, limit-cycle detection, and describing-function tests."""

import cmath

import numpy as np
import pytest

from fohc.hybridsim import SimulationTrace
from fohc.metrics import (
    LimitCycleResult,
    clegg_df,
    compute_metrics,
    describing_function,
    detect_limit_cycle,
    steady_control_value,
)


def make_trace(y, h=0.1, r=None, u=None):
    y = np.asarray(y, dtype=float)
    n = y.size
    r = np.ones(n) if r is None else np.asarray(r, dtype=float)
    u = np.zeros(n) if u is None else np.asarray(u, dtype=float)
    e = r - y
    return SimulationTrace(
        t=np.arange(n) * h, y=y, u=u, e=e, r=r,
        controller_states=np.zeros((1, n)), plant_states=np.zeros((1, n)),
        active_subsystem=np.zeros(n, dtype=np.int64), events=[], h=h,
    )


class TestComputeMetrics:
    def test_hand_computed_values(self):
        tr = make_trace([0.0, 0.5, 0.95, 1.2, 1.0, 1.0], h=0.1,
                        u=[0.3, -0.8, 0.1, 0.0, 0.0, 0.0])
        m = compute_metrics(tr, 1.0)
        e = np.array([1.0, 0.5, 0.05, -0.2, 0.0, 0.0])
        assert m.ise == pytest.approx(float(np.sum(e**2) * 0.1), rel=1e-14)
        assert m.max_u == pytest.approx(0.8)
        assert m.overshoot_pct == pytest.approx(20.0)
        assert m.rise_time == pytest.approx(0.2)  # first sample with y >= 0.9

    def test_constant_trace(self):
        tr = make_trace([1.0, 1.0, 1.0, 1.0])
        m = compute_metrics(tr, 1.0)
        assert m.overshoot_pct == 0.0
        assert m.rise_time == 0.0
        assert m.settling_time == 0.0

    def test_overshoot_clamped_at_zero(self):
        tr = make_trace([0.0, 0.5, 0.9, 0.95, 0.98])
        assert compute_metrics(tr, 1.0).overshoot_pct == 0.0

    def test_empty_and_zero_final_rejected(self):
        tr = make_trace([0.0, 1.0])
        with pytest.raises(ValueError):
            compute_metrics(tr, 0.0)

    def test_ise_additive_over_concatenation(self):
        rng = np.random.default_rng(2)
        ya = rng.normal(size=50)
        yb = rng.normal(size=70)
        ta = make_trace(ya, h=0.01)
        tb = make_trace(yb, h=0.01)
        tc = make_trace(np.concatenate([ya, yb]), h=0.01)
        ma = compute_metrics(ta, 1.0).ise
        mb = compute_metrics(tb, 1.0).ise
        mc = compute_metrics(tc, 1.0).ise
        assert mc == pytest.approx(ma + mb, rel=1e-12)


class TestLimitCycleDetection:
    def test_sustained_sine_detected(self):
        h = 0.01
        t = np.arange(4000) * h
        y = 1.0 + 0.05 * np.sin(2 * np.pi * t / 1.5)
        res = detect_limit_cycle(make_trace(y, h=h), 0.5)
        assert res.detected is True
        assert res.period == pytest.approx(1.5, rel=0.05)
        assert res.amplitude == pytest.approx(0.05, rel=0.15)

    def test_decaying_exponential_not_detected(self):
        h = 0.01
        t = np.arange(4000) * h
        y = 1.0 - np.exp(-t / 3.0)
        res = detect_limit_cycle(make_trace(y, h=h), 0.5)
        assert res.detected is False

    def test_decaying_oscillation_not_detected(self):
        # 20% amplitude loss per period fails the sustained-cycle criterion
        h = 0.01
        t = np.arange(6000) * h
        period = 1.2
        y = 1.0 + 0.2 * 0.8 ** (t / period) * np.sin(2 * np.pi * t / period)
        res = detect_limit_cycle(make_trace(y, h=h), 0.5)
        assert res.detected is False

    def test_short_window_indeterminate(self):
        h = 0.01
        t = np.arange(400) * h
        y = 1.0 + 0.05 * np.sin(2 * np.pi * t / 1.9)  # ~1 period in the window
        res = detect_limit_cycle(make_trace(y, h=h), 0.5)
        assert res.detected is None
        assert res.indeterminate

    def test_tiny_amplitude_not_detected(self):
        h = 0.01
        t = np.arange(4000) * h
        y = 1.0 + 0.001 * np.sin(2 * np.pi * t)  # 0.2% of reference, below gate
        res = detect_limit_cycle(make_trace(y, h=h), 0.5)
        assert res.detected is False

    def test_random_stable_linear_loops_never_flag(self):
        # first-order plant + PI is stable for any positive gains; none of
        # twenty random loops may report a limit cycle
        from fohc import ClosedLoopConfig, ControllerTemplate, PlantModel, StepReference, simulate

        rng = np.random.default_rng(42)
        for _ in range(20):
            k0 = float(rng.uniform(0.5, 3.0))
            a = float(rng.uniform(0.3, 3.0))
            kp = float(rng.uniform(0.1, 2.0))
            ki = float(rng.uniform(0.1, 2.0))
            plant = PlantModel([[-a]], [k0], [1.0])
            cfg = ClosedLoopConfig(
                plant=plant,
                controller=ControllerTemplate("PI", {"Kp": kp, "Ki": ki}),
                reference=StepReference(1.0),
                h=0.002, horizon=40.0,
            )
            res = detect_limit_cycle(simulate(cfg), 0.5)
            assert res.detected is False


class TestDescribingFunction:
    def test_clegg_limit_matches_classical(self):
        # the alpha = 1 fractional Clegg term equals (1 + j4/pi)/(jw)
        for w in (0.1, 1.0, 10.0):
            n_ci = describing_function(1.0, 1.0, 1.0, 1.0, w) / 1.0 - 1.0
            oracle = clegg_df(w)
            assert abs(n_ci - oracle) <= 1e-4 * abs(oracle)
            assert abs(oracle) == pytest.approx(1.618993 / w, rel=1e-4)
            assert np.degrees(cmath.phase(oracle)) == pytest.approx(-38.146, abs=0.01)

    def test_zero_reset_fraction_equals_linear(self):
        rng = np.random.default_rng(9)
        for _ in range(100):
            alpha = float(rng.uniform(0.1, 1.9))
            w = float(10 ** rng.uniform(-2, 2))
            kp = float(rng.uniform(0.1, 5.0))
            tau = float(rng.uniform(0.01, 10.0))
            got = describing_function(kp, tau, 0.0, alpha, w)
            jw_a = w**alpha * cmath.exp(1j * alpha * cmath.pi / 2)
            linear = kp * (1.0 + 1.0 / (tau * jw_a))
            assert abs(got - linear) <= 1e-12 * max(1.0, abs(linear))

    def test_corrected_form_hand_value(self):
        # kp = tau_i = 1, P = 1, alpha = 1, w = 1 -> 1 + 4/pi - j
        v = describing_function(1.0, 1.0, 1.0, 1.0, 1.0)
        assert v == pytest.approx(1.0 + 4.0 / np.pi - 1.0j, rel=1e-14)
        assert v == pytest.approx(2.2732395447351628 - 1.0j, rel=1e-12)

    def test_strict_form_differs_and_misplaces_phase(self):
        strict = describing_function(1.0, 1.0, 1.0, 1.0, 1.0, strict=True)
        corrected = describing_function(1.0, 1.0, 1.0, 1.0, 1.0)
        assert strict != corrected
        # the printed form puts the Clegg term in a denominator: positive phase
        assert np.angle(strict - 1.0) > 0 > np.angle(corrected - 1.0)

    def test_phase_lead_over_linear_integrator(self):
        # CI^alpha phase is strictly less negative than -alpha*90 degrees
        for alpha in np.linspace(0.1, 1.0, 10):
            for w in (0.1, 1.0, 10.0):
                term = describing_function(1.0, 1.0, 1.0, alpha, w) - 1.0
                assert np.degrees(np.angle(term)) > -90.0 * alpha

    def test_continuity_in_reset_fraction(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            alpha = float(rng.uniform(0.2, 1.5))
            w = float(10 ** rng.uniform(-1, 1))
            p = float(rng.uniform(0.0, 0.99))
            a = describing_function(1.0, 1.0, p, alpha, w)
            b = describing_function(1.0, 1.0, p + 0.01, alpha, w)
            assert abs(a - b) < 0.05 * max(1.0, abs(a))

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            describing_function(1.0, 1.0, 0.5, 1.0, 0.0)
        with pytest.raises(ValueError):
            describing_function(1.0, 1.0, 1.5, 1.0, 1.0)
        with pytest.raises(ValueError):
            describing_function(1.0, -1.0, 0.5, 1.0, 1.0)


def test_steady_control_value():
    tr = make_trace(np.ones(100), u=np.concatenate([np.zeros(90), np.full(10, 0.25)]))
    assert steady_control_value(tr, 0.1) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        steady_control_value(tr, 0.0)
