"""The three shipped study cases.

example1: velocity control of a vehicle switching between throttle and brake
dynamics; quadratic-stability analysis of the published FPI/PID controllers
plus a random-switching time response.

example2: micro-actuator reset control; the six-controller comparison
(PI, PCI, PCI+feedforward, general zero-crossing reset, periodic full-state
reset, general fixed-instant reset), steady control values, and the order
sweep of the general reset controller.

example3: velocity servomotor; base-controller margins and the reset
variants (PCI, PCID, FPCI) with limit-cycle classification.
"""

from __future__ import annotations

import numpy as np

from .freqdesign import (
    ControllerTemplate,
    SwitchedPlant,
    characteristic_polynomial,
    default_grid,
    gain_at,
    gain_crossover_frequency,
    max_phase_difference,
    phase_margin_at,
    to_transfer_function,
)
from .frlin import FractionalTransferFunction
from .hybridsim import (
    ClosedLoopConfig,
    PiecewiseReference,
    PlantModel,
    RandomSwitching,
    StepReference,
    feedforward_gain,
    make_general_reset,
    make_pci,
    make_pci_feedforward,
    make_pcid,
    make_zheng_reset,
    simulate,
)
from .metrics import compute_metrics, steady_control_value

__all__ = [
    "vehicle_plants",
    "micro_actuator_plant",
    "servomotor_plant",
    "EXAMPLE1_FPI",
    "EXAMPLE1_PID",
    "run_example1",
    "run_example2",
    "run_example3",
    "run_example",
]

# Example 1: throttle / brake subsystem models and the published controllers
G1 = FractionalTransferFunction.from_terms([(4.39, 0.0)], [(1.0, 1.0), (0.1746, 0.0)])
G2 = FractionalTransferFunction.from_terms([(4.45, 0.0)], [(1.0, 1.0), (0.445, 0.0)])
EXAMPLE1_FPI = ControllerTemplate("FPI", {"Kp": 0.15, "Ki": 0.07, "lam": 0.71})
EXAMPLE1_PID = ControllerTemplate("PID", {"Kp": 0.1, "Ki": 0.11, "Kd": 0.223})

# Example 2: micro-actuator model and base PI gains
EX2_A1, EX2_A2, EX2_B = 1e6, 1810.0, 3e6
EX2_KP, EX2_TAU_I = 0.08, (8.0 / 3.0) * 1e-4

# Example 3: servomotor model and the designed base controllers
SERVO = FractionalTransferFunction.from_terms([(0.93, 0.0)], [(0.61, 1.0), (1.0, 0.0)])
EX3_BASES = {
    "PI": ControllerTemplate("PI", {"Kp": 1.6, "Ki": 18.5}),
    "PID": ControllerTemplate("PID", {"Kp": 1.528, "Ki": 23.16, "Kd": 0.152}),
    "FPI": ControllerTemplate("FPI", {"Kp": 0.067, "Ki": 13.4, "lam": 0.75}),
}


def vehicle_plants() -> SwitchedPlant:
    return SwitchedPlant([G1, G2], worst_index=1)


def micro_actuator_plant() -> PlantModel:
    return PlantModel.second_order(EX2_A1, EX2_A2, EX2_B)


def servomotor_plant() -> FractionalTransferFunction:
    return SERVO


def _segment_overshoots(trace) -> float:
    """Worst overshoot past the target across the reference steps.

    For each constant-reference segment the excursion beyond the new target
    in the direction of travel is taken relative to the step size.
    """
    r = trace.r
    y = trace.y
    worst = 0.0
    starts = [0] + list(np.nonzero(np.diff(r) != 0)[0] + 1)
    edges = starts[1:] + [r.size]
    prev_target = 0.0
    for s, t in zip(starts, edges):
        target = r[s]
        step = target - prev_target
        prev_target = target
        if step == 0:
            continue
        travel = np.sign(step)
        peak = np.max(travel * (y[s:t] - target))
        worst = max(worst, peak / abs(step) * 100.0)
    return float(worst)


def run_example1(seed: int = 1, h: float = 1e-3, horizon: float = 200.0,
                 grid=None, simulate_time_response: bool = True) -> dict:
    """Quadratic-stability figures and the random-switching manoeuvre."""
    grid = default_grid() if grid is None else grid
    plant = vehicle_plants()
    stability = {}
    for name, tmpl in (("FPI", EXAMPLE1_FPI), ("PID", EXAMPLE1_PID)):
        K = to_transfer_function(tmpl)
        c1 = characteristic_polynomial(K, G1)
        c2 = characteristic_polynomial(K, G2)
        diff = max_phase_difference(c1, c2, grid)
        stability[name] = {
            "max_phase_difference_deg": diff,
            "stability_margin_deg": 90.0 - diff,
            "quadratically_stable": diff < 90.0,
            "phase_margin_deg_at_0.8": phase_margin_at(K, G1, 0.8),
            "gain_db_at_0.8": gain_at(K, G1, 0.8),
        }

    step_rows = {}
    if simulate_time_response:
        for name, tmpl in (("FPI", EXAMPLE1_FPI), ("PID", EXAMPLE1_PID)):
            row = {}
            for pname, g in (("G1", G1), ("G2", G2)):
                cfg = ClosedLoopConfig(plant=g, controller=tmpl,
                                       reference=StepReference(1.0), h=h, horizon=60.0)
                m = compute_metrics(simulate(cfg), 1.0)
                row[pname] = {"overshoot_pct": m.overshoot_pct, "rise_time_s": m.rise_time}
            step_rows[name] = row

    summary = {
        "example": "example1",
        "specs": {"phase_margin_deg": 80.0, "gain_crossover_rad_s": 0.8, "worst_subsystem": 1},
        "stability": stability,
        "step_responses": step_rows,
    }
    traces = {}
    if simulate_time_response:
        reference = PiecewiseReference(
            (0.0, 0.2 * horizon, 0.4 * horizon, 0.6 * horizon, 0.8 * horizon),
            (30.0, 70.0, 40.0, 60.0, 0.0),
        )
        switching = RandomSwitching(seed=seed, dwell_min=2.0, dwell_max=10.0, n_subsystems=2)
        sim_summary = {}
        for name, tmpl in (("FPI", EXAMPLE1_FPI), ("PID", EXAMPLE1_PID)):
            cfg = ClosedLoopConfig(
                plant=plant, controller=tmpl, reference=reference,
                switching=switching, h=h, horizon=horizon,
            )
            tr = simulate(cfg)
            traces[name] = tr
            sim_summary[name] = {
                "worst_segment_overshoot_pct": _segment_overshoots(tr),
                "n_switches": len(tr.switching_schedule) - 1,
            }
        summary["simulation"] = sim_summary
        summary["switching_schedule"] = traces["FPI"].switching_schedule
        summary["reference_profile"] = list(zip(reference.times, reference.values))
        summary["settings"] = {"h": h, "horizon": horizon, "seed": seed}
    return {"summary": summary, "traces": traces}


def example2_controllers(k_ff: float) -> dict:
    return {
        "pi": ControllerTemplate("PI", {"Kp": EX2_KP, "Ki": EX2_KP / EX2_TAU_I}),
        "pci": make_pci(EX2_KP, EX2_KP / EX2_TAU_I),
        "pci_feedforward": make_pci_feedforward(EX2_KP, EX2_KP / EX2_TAU_I, k_ff),
        "general_zero_crossing": make_general_reset(EX2_KP, EX2_TAU_I, k_ff),
        "zheng_fixed_instant": make_zheng_reset(kp=EX2_KP, tau_i=EX2_TAU_I, t_k=1e-3),
        "general_fixed_instant": make_general_reset(EX2_KP, EX2_TAU_I, k_ff, t_k=1e-3),
    }


def run_example2(h: float = 1e-6, horizon: float = 50e-3,
                 sweep_horizon: float = 10e-3) -> dict:
    """Six-controller comparison plus the general-reset order sweep.

    The comparison horizon is 50 ms (ten times the quoted default) so the
    PCI limit cycle completes enough periods to classify and the fixed-
    instant controllers reach their steady cycle.
    """
    plant = micro_actuator_plant()
    k_ff = feedforward_gain(plant)
    controllers = example2_controllers(k_ff)
    traces = {}
    table = {}
    for name, ctrl in controllers.items():
        cfg = ClosedLoopConfig(plant=plant, controller=ctrl,
                               reference=StepReference(1.0), h=h, horizon=horizon)
        tr = simulate(cfg)
        traces[name] = tr
        m = compute_metrics(tr, 1.0)
        row = m.as_dict()
        row["steady_u"] = steady_control_value(tr)
        row["n_resets"] = len(tr.events)
        table[name] = row

    sweep = {}
    for alpha in (1.0, 1.1, 1.2):
        cfg = ClosedLoopConfig(
            plant=plant,
            controller=make_general_reset(EX2_KP, EX2_TAU_I, k_ff, alpha=alpha),
            reference=StepReference(1.0), h=h, horizon=sweep_horizon,
        )
        m = compute_metrics(simulate(cfg), 1.0)
        sweep[f"{alpha:.1f}"] = {
            "overshoot_pct": m.overshoot_pct,
            "rise_time_s": m.rise_time,
        }

    ise = {k: v["ise"] for k, v in table.items()}
    summary = {
        "example": "example2",
        "feedforward_gain": k_ff,
        "controllers": table,
        "ise_ordering_ok": (
            ise["general_fixed_instant"] < ise["general_zero_crossing"]
            < ise["pci_feedforward"] < ise["pi"] < ise["pci"]
        ),
        "alpha_sweep": sweep,
        "settings": {"h": h, "horizon": horizon, "sweep_horizon": sweep_horizon},
    }
    return {"summary": summary, "traces": traces}


def example3_reset_controllers() -> dict:
    return {
        "PCI": make_pci(1.6, 18.5),
        "PCID": make_pcid(1.528, 23.16, 0.152),
        "FPCI": make_pci(0.067, 13.4, alpha=0.75),
    }


def run_example3(h: float = 1e-3, horizon: float = 10.0) -> dict:
    """Servomotor margins, base responses, and reset-controller comparison."""
    margins = {}
    for name, tmpl in EX3_BASES.items():
        K = to_transfer_function(tmpl)
        wc = gain_crossover_frequency(K, SERVO)
        margins[name] = {
            "gain_crossover_rad_s": wc,
            "phase_margin_deg": phase_margin_at(K, SERVO, wc),
            "phase_margin_deg_at_5.5": phase_margin_at(K, SERVO, 5.5),
            "gain_db_at_5.5": gain_at(K, SERVO, 5.5),
        }

    traces = {}
    base_rows = {}
    for name, tmpl in EX3_BASES.items():
        cfg = ClosedLoopConfig(plant=SERVO, controller=tmpl,
                               reference=StepReference(1.0), h=h, horizon=horizon)
        tr = simulate(cfg)
        traces[f"base_{name}"] = tr
        base_rows[name] = compute_metrics(tr, 1.0).as_dict()

    reset_rows = {}
    for name, ctrl in example3_reset_controllers().items():
        cfg = ClosedLoopConfig(plant=SERVO, controller=ctrl,
                               reference=StepReference(1.0), h=h, horizon=horizon)
        tr = simulate(cfg)
        traces[f"reset_{name}"] = tr
        row = compute_metrics(tr, 1.0).as_dict()
        row["n_resets"] = len(tr.events)
        reset_rows[name] = row

    summary = {
        "example": "example3",
        "specs": {"phase_margin_deg": 45.0, "gain_crossover_rad_s": 5.5},
        "base_margins": margins,
        "base_responses": base_rows,
        "reset_responses": reset_rows,
        "settings": {"h": h, "horizon": horizon},
    }
    return {"summary": summary, "traces": traces}


def run_example(name: str, **kwargs) -> dict:
    runners = {"example1": run_example1, "example2": run_example2, "example3": run_example3}
    if name not in runners:
        raise ValueError(f"unknown example {name!r}; choose from {sorted(runners)}")
    return runners[name](**kwargs)
