"""Batch command-line front end.

Subcommands: design, simulate, stability, df, and reproduce.  Scenario
configs are JSON documents validated against a fail-closed schema (unknown
keys rejected).  Artifacts: trace.csv / events.csv with 17-significant-digit
decimals, a structured summary.json (metrics, residuals, config echo,
version, seed), and a self-contained matplotlib plot script.  Exit status:
0 success, 2 infeasible design, 3 config error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

try:
    import jsonschema
except ImportError:  # pragma: no cover - declared dependency
    jsonschema = None

from . import __version__
from .freqdesign import (
    ControllerTemplate,
    GainCrossoverSpec,
    PhaseMarginSpec,
    SensitivityBoundSpec,
    SwitchedPlant,
    default_grid,
    quadratic_stability_check,
    template_parameter_names,
    to_transfer_function,
)
from .frlin import FractionalTransferFunction
from .hybridsim import (
    ClosedLoopConfig,
    ConfigError,
    ExplicitSwitching,
    FeedforwardTarget,
    FixedInstants,
    GeneralNonZeroTarget,
    NumericalError,
    PiecewiseReference,
    PlantModel,
    PlantStateTarget,
    RandomSwitching,
    ResetControllerSpec,
    StepReference,
    VariableNonZeroTarget,
    ZeroCrossing,
    ZeroTarget,
    make_general_reset,
    make_pci,
    make_pci_feedforward,
    make_pcid,
    make_pi_alpha_ci_alpha,
    make_zheng_reset,
    simulate,
)
from .metrics import compute_metrics, describing_function, steady_control_value
from .reproduce import run_example
from .tuner import DesignProblem, NoFeasiblePoint, solve, verify

__all__ = ["main", "export_plot_script", "CONFIG_SCHEMA"]

_NUMBER_ARRAY = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_FPOLY = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
}
_TF = {
    "type": "object",
    "additionalProperties": False,
    "required": ["num", "den"],
    "properties": {"num": _FPOLY, "den": _FPOLY},
}
_SINGLE_PLANT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "tf": _TF,
        "second_order": {
            "type": "object",
            "additionalProperties": False,
            "required": ["a1", "a2", "b"],
            "properties": {
                "a1": {"type": "number"},
                "a2": {"type": "number"},
                "b": {"type": "number"},
            },
        },
        "ss": {
            "type": "object",
            "additionalProperties": False,
            "required": ["A", "B", "C"],
            "properties": {
                "A": {"type": "array", "items": _NUMBER_ARRAY, "minItems": 1},
                "B": _NUMBER_ARRAY,
                "C": _NUMBER_ARRAY,
                "alphas": _NUMBER_ARRAY,
                "x0": _NUMBER_ARRAY,
            },
        },
    },
    "minProperties": 1,
    "maxProperties": 1,
}
_PLANT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "tf": _TF,
        "second_order": _SINGLE_PLANT["properties"]["second_order"],
        "ss": _SINGLE_PLANT["properties"]["ss"],
        "subsystems": {"type": "array", "items": _SINGLE_PLANT, "minItems": 1},
        "worst_index": {"type": "integer", "minimum": 1},
    },
}
_TEMPLATE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "params"],
    "properties": {
        "kind": {"type": "string"},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
    },
}
_RESET = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {
            "enum": ["pci", "pcid", "pci_feedforward", "general", "zheng", "pi_ci"]
        },
        "kp": {"type": "number"},
        "ki": {"type": "number"},
        "kd": {"type": "number"},
        "nn": {"type": "number"},
        "tau_i": {"type": "number"},
        "p_reset": {"type": "number"},
        "alpha": {"type": "number"},
        "gain": {"type": "number"},
        "from_start": {"type": "boolean"},
        "t_k": {"type": "number"},
        "E1": {"type": "number"},
        "E2": {"type": "number"},
        "G": {"type": "number"},
    },
}
_RESET_SS = {
    "type": "object",
    "additionalProperties": False,
    "required": ["alpha", "A", "B", "C", "D", "c_r", "n_reset", "B_R", "trigger", "target"],
    "properties": {
        "alpha": {"type": "number"},
        "A": {"type": "array", "items": _NUMBER_ARRAY, "minItems": 1},
        "B": _NUMBER_ARRAY,
        "C": _NUMBER_ARRAY,
        "D": {"type": "number"},
        "c_r": {"type": "number"},
        "n_reset": {"type": "integer", "minimum": 0},
        "B_R": _NUMBER_ARRAY,
        "realization": {"enum": ["cascade", "direct"]},
        "trigger": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["none", "zero_crossing", "fixed_instants"]},
                "period": {"type": "number"},
            },
        },
        "target": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {
                    "enum": ["zero", "feedforward", "general", "variable", "plant_state"]
                },
                "gain": {"type": "number"},
                "from_start": {"type": "boolean"},
                "E1": {"type": "number"},
                "E2": {"type": "number"},
                "G": {"type": "number"},
            },
        },
    },
}
_CONTROLLER = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"template": _TEMPLATE, "reset": _RESET, "reset_ss": _RESET_SS},
    "minProperties": 1,
    "maxProperties": 1,
}
_REFERENCE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {"enum": ["step", "piecewise"]},
        "amplitude": {"type": "number"},
        "start": {"type": "number"},
        "times": _NUMBER_ARRAY,
        "values": _NUMBER_ARRAY,
    },
}
_SWITCHING = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {"enum": ["random", "schedule"]},
        "seed": {"type": "integer"},
        "dwell_min": {"type": "number"},
        "dwell_max": {"type": "number"},
        "n_subsystems": {"type": "integer", "minimum": 1},
        "times": _NUMBER_ARRAY,
        "indices": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
    },
}
_SPEC = {
    "type": "object",
    "additionalProperties": False,
    "required": ["type"],
    "properties": {
        "type": {"enum": ["phase_margin", "gain_crossover", "sensitivity"]},
        "phi_deg": {"type": "number"},
        "omega": {"type": "number"},
        "max_db": {"type": "number"},
    },
}
_GRID = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "lo": {"type": "number", "exclusiveMinimum": 0},
        "hi": {"type": "number", "exclusiveMinimum": 0},
        "points": {"type": "integer", "minimum": 2},
    },
}

CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["design", "simulate", "stability", "df"]},
        "plant": _PLANT,
        "controller": _CONTROLLER,
        "reference": _REFERENCE,
        "switching": _SWITCHING,
        "h": {"type": "number", "exclusiveMinimum": 0},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "memory_policy": {"enum": ["clear", "retain"]},
        "gl_memory": {"type": "integer", "minimum": 1},
        "final_value": {"type": "number"},
        "template": {"type": "string"},
        "specs": {"type": "array", "items": _SPEC, "minItems": 1},
        "bounds": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        },
        "initial_guesses": {"type": "array", "items": _NUMBER_ARRAY},
        "n_starts": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "grid": _GRID,
        "kp": {"type": "number"},
        "tau_i": {"type": "number"},
        "p_reset": {"type": "number"},
        "alpha": {"type": "number"},
        "omega": {
            "anyOf": [_NUMBER_ARRAY, _GRID],
        },
        "strict": {"type": "boolean"},
    },
}

_KIND_REQUIRED = {
    "simulate": ("plant", "controller", "reference", "h", "horizon"),
    "stability": ("plant", "controller"),
    "design": ("plant", "template", "specs"),
    "df": ("kp", "tau_i", "p_reset", "alpha", "omega"),
}


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if jsonschema is None:
        raise ConfigError("jsonschema is required to validate configs")
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config invalid at {exc.json_path}: {exc.message}") from exc
    kind = cfg["kind"]
    missing = [k for k in _KIND_REQUIRED[kind] if k not in cfg]
    if missing:
        raise ConfigError(f"config for kind {kind!r} missing key(s) {missing}")


# ---------------------------------------------------------------------------
# config -> objects


def _tf_from_cfg(d) -> FractionalTransferFunction:
    return FractionalTransferFunction.from_terms(d["num"], d["den"])


def _single_plant_from_cfg(d) -> PlantModel:
    if "tf" in d:
        return PlantModel.from_tf(_tf_from_cfg(d["tf"]))
    if "second_order" in d:
        s = d["second_order"]
        return PlantModel.second_order(s["a1"], s["a2"], s["b"])
    s = d["ss"]
    return PlantModel(s["A"], s["B"], s["C"], alphas=s.get("alphas"), x0=s.get("x0"))


def _plants_from_cfg(d):
    if "subsystems" in d:
        return [_single_plant_from_cfg(p) for p in d["subsystems"]]
    return [_single_plant_from_cfg(d)]


def _switched_tf_plant_from_cfg(d) -> SwitchedPlant:
    if "subsystems" in d:
        tfs = []
        for p in d["subsystems"]:
            if "tf" not in p:
                raise ConfigError("stability/design plants must be given as transfer functions")
            tfs.append(_tf_from_cfg(p["tf"]))
        return SwitchedPlant(tfs, worst_index=d.get("worst_index", 1))
    if "tf" not in d:
        raise ConfigError("stability/design plants must be given as transfer functions")
    return SwitchedPlant([_tf_from_cfg(d["tf"])], worst_index=1)


def _controller_from_cfg(d):
    if "template" in d:
        return ControllerTemplate(d["template"]["kind"], d["template"]["params"])
    if "reset" in d:
        r = dict(d["reset"])
        kind = r.pop("type")
        if kind == "pci":
            return make_pci(r["kp"], r["ki"], alpha=r.get("alpha", 1.0))
        if kind == "pcid":
            return make_pcid(r["kp"], r["ki"], r["kd"], r.get("nn", 100.0))
        if kind == "pci_feedforward":
            return make_pci_feedforward(r["kp"], r["ki"], r["gain"], r.get("from_start", True))
        if kind == "general":
            return make_general_reset(
                r["kp"], r["tau_i"], r["gain"], alpha=r.get("alpha", 1.0), t_k=r.get("t_k")
            )
        if kind == "zheng":
            return make_zheng_reset(
                E1=r.get("E1", -2.8e-4), E2=r.get("E2", -6.8e-7), G=r.get("G", 1.4e-3),
                kp=r["kp"], tau_i=r["tau_i"], t_k=r.get("t_k", 1e-3),
            )
        return make_pi_alpha_ci_alpha(r["kp"], r["tau_i"], r["p_reset"], r.get("alpha", 1.0))
    s = dict(d["reset_ss"])
    trig_cfg = s.pop("trigger")
    tgt_cfg = s.pop("target")
    trig_map = {
        "none": lambda c: None,
        "zero_crossing": lambda c: ZeroCrossing(),
        "fixed_instants": lambda c: FixedInstants(c["period"]),
    }
    tgt_map = {
        "zero": lambda c: ZeroTarget(),
        "feedforward": lambda c: FeedforwardTarget(c["gain"], c.get("from_start", True)),
        "general": lambda c: GeneralNonZeroTarget(c["gain"]),
        "variable": lambda c: VariableNonZeroTarget(c["gain"]),
        "plant_state": lambda c: PlantStateTarget(c["E1"], c["E2"], c["G"]),
    }
    try:
        trigger = trig_map[trig_cfg["type"]](trig_cfg)
        target = tgt_map[tgt_cfg["type"]](tgt_cfg)
    except KeyError as exc:
        raise ConfigError(f"reset_ss trigger/target missing field {exc}") from exc
    return ResetControllerSpec(trigger=trigger, target=target, **s)


def _reference_from_cfg(d):
    if d["type"] == "step":
        return StepReference(d.get("amplitude", 1.0), d.get("start", 0.0))
    if "times" not in d or "values" not in d:
        raise ConfigError("piecewise reference needs 'times' and 'values'")
    return PiecewiseReference(d["times"], d["values"])


def _switching_from_cfg(d, seed_override=None):
    if d is None:
        return None
    if d["type"] == "random":
        return RandomSwitching(
            seed=seed_override if seed_override is not None else d.get("seed", 0),
            dwell_min=d.get("dwell_min", 2.0),
            dwell_max=d.get("dwell_max", 10.0),
            n_subsystems=d.get("n_subsystems", 2),
        )
    if "times" not in d or "indices" not in d:
        raise ConfigError("schedule switching needs 'times' and 'indices'")
    return ExplicitSwitching(d["times"], d["indices"])


def _grid_from_cfg(d, points_override=None):
    d = d or {}
    points = points_override if points_override is not None else d.get("points", 2000)
    return default_grid(d.get("lo", 1e-3), d.get("hi", 1e3), points)


def _specs_from_cfg(items):
    out = []
    for s in items:
        if s["type"] == "phase_margin":
            out.append(PhaseMarginSpec(s["phi_deg"], s["omega"]))
        elif s["type"] == "gain_crossover":
            out.append(GainCrossoverSpec(s["omega"]))
        else:
            out.append(SensitivityBoundSpec(s["max_db"], s["omega"]))
    return out


# ---------------------------------------------------------------------------
# artifact writers


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trace_to_csv(trace) -> str:
    nc = trace.controller_states.shape[0]
    npl = trace.plant_states.shape[0]
    cols = ["t", "r", "y", "u", "e"]
    cols += [f"xc{i}" for i in range(nc)]
    cols += [f"xp{i}" for i in range(npl)]
    cols += ["active_subsystem"]
    lines = [",".join(cols)]
    for k in range(trace.n_samples):
        row = [_fmt(trace.t[k]), _fmt(trace.r[k]), _fmt(trace.y[k]), _fmt(trace.u[k]),
               _fmt(trace.e[k])]
        row += [_fmt(trace.controller_states[i, k]) for i in range(nc)]
        row += [_fmt(trace.plant_states[i, k]) for i in range(npl)]
        row.append(str(int(trace.active_subsystem[k])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def events_to_csv(trace) -> str:
    nc = trace.controller_states.shape[0]
    cols = ["time", "step"] + [f"pre{i}" for i in range(nc)] + [f"post{i}" for i in range(nc)]
    lines = [",".join(cols)]
    for ev in trace.events:
        row = [_fmt(ev.time), str(ev.step)]
        row += [_fmt(v) for v in ev.pre_state]
        row += [_fmt(v) for v in ev.post_state]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def export_plot_script(csv_files, labels=None, style: str = "overlay",
                       title: str = "closed-loop response") -> str:
    """Self-contained matplotlib script reading the exported trace CSVs.

    Byte-deterministic for fixed inputs.  style 'overlay' draws every trace's
    y(t) on one axis with u(t) below; style 'grid' puts one trace per panel.
    """
    if not csv_files:
        raise ValueError("at least one trace CSV required")
    labels = list(labels) if labels else [os.path.splitext(os.path.basename(f))[0]
                                          for f in csv_files]
    files_lit = ", ".join(repr(f) for f in csv_files)
    labels_lit = ", ".join(repr(x) for x in labels)
    if style not in ("overlay", "grid"):
        style = "overlay"
    head = (
        "#!/usr/bin/env python3\n"
        f"# plot script generated by fohc {__version__}; reads sibling trace CSVs\n"
        "import csv\n"
        "import matplotlib.pyplot as plt\n"
        "\n"
        f"FILES = [{files_lit}]\n"
        f"LABELS = [{labels_lit}]\n"
        "\n"
        "def load(path):\n"
        "    with open(path, newline='') as fh:\n"
        "        rows = list(csv.DictReader(fh))\n"
        "    take = lambda col: [float(r[col]) for r in rows]\n"
        "    return take('t'), take('r'), take('y'), take('u')\n"
        "\n"
    )
    if style == "overlay":
        body = (
            "fig, (ax_y, ax_u) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))\n"
            "for path, label in zip(FILES, LABELS):\n"
            "    t, r, y, u = load(path)\n"
            "    ax_y.plot(t, y, label=label)\n"
            "    ax_u.plot(t, u, label=label)\n"
            "t, r, _, _ = load(FILES[0])\n"
            "ax_y.plot(t, r, 'k--', linewidth=0.8, label='reference')\n"
            f"ax_y.set_ylabel('y'); ax_y.legend(); ax_y.set_title({title!r})\n"
            "ax_u.set_ylabel('u'); ax_u.set_xlabel('t [s]'); ax_u.legend()\n"
            "fig.tight_layout()\n"
            "fig.savefig('response.png', dpi=150)\n"
            "print('wrote response.png')\n"
        )
    else:
        body = (
            "n = len(FILES)\n"
            "fig, axes = plt.subplots(n, 1, sharex=True, figsize=(8, 3 * n), squeeze=False)\n"
            "for ax, path, label in zip(axes[:, 0], FILES, LABELS):\n"
            "    t, r, y, u = load(path)\n"
            "    ax.plot(t, y, label=label)\n"
            "    ax.plot(t, r, 'k--', linewidth=0.8)\n"
            "    ax.set_ylabel('y'); ax.legend()\n"
            "axes[-1, 0].set_xlabel('t [s]')\n"
            f"fig.suptitle({title!r})\n"
            "fig.savefig('response.png', dpi=150)\n"
            "print('wrote response.png')\n"
        )
    return head + body


def _json_default(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def write_summary(out_dir: str, payload: dict) -> None:
    payload = dict(payload)
    payload["toolkit_version"] = __version__
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
    _atomic_write(os.path.join(out_dir, "summary.json"), text + "\n")


def _write_trace_artifacts(out_dir, trace, name=None):
    suffix = f"_{name}" if name else ""
    trace_name = f"trace{suffix}.csv"
    _atomic_write(os.path.join(out_dir, trace_name), trace_to_csv(trace))
    _atomic_write(os.path.join(out_dir, f"events{suffix}.csv"), events_to_csv(trace))
    return trace_name


# ---------------------------------------------------------------------------
# commands


def _cmd_simulate(cfg: dict, out_dir: str, args) -> int:
    plants = _plants_from_cfg(cfg["plant"])
    controller = _controller_from_cfg(cfg["controller"])
    reference = _reference_from_cfg(cfg["reference"])
    switching = _switching_from_cfg(cfg.get("switching"), seed_override=args.seed)
    sim_cfg = ClosedLoopConfig(
        plant=plants if len(plants) > 1 else plants[0],
        controller=controller,
        reference=reference,
        switching=switching,
        h=args.h if args.h is not None else cfg["h"],
        horizon=args.horizon if args.horizon is not None else cfg["horizon"],
        memory_policy=args.memory_policy or cfg.get("memory_policy", "clear"),
        gl_memory=cfg.get("gl_memory"),
    )
    trace = simulate(sim_cfg)
    trace_name = _write_trace_artifacts(out_dir, trace)
    final = cfg.get("final_value", float(trace.r[-1]) or 1.0)
    m = compute_metrics(trace, final)
    summary = {
        "kind": "simulate",
        "config": cfg,
        "seed": args.seed,
        "settings": {"h": sim_cfg.h, "horizon": sim_cfg.horizon,
                     "memory_policy": sim_cfg.memory_policy},
        "metrics": m.as_dict(),
        "steady_u": steady_control_value(trace),
        "n_resets": len(trace.events),
        "switching_schedule": trace.switching_schedule,
    }
    write_summary(out_dir, summary)
    _atomic_write(os.path.join(out_dir, "plots.py"),
                  export_plot_script([trace_name], ["response"]))
    return 0


def _cmd_stability(cfg: dict, out_dir: str, args) -> int:
    plant = _switched_tf_plant_from_cfg(cfg["plant"])
    ctrl_cfg = cfg["controller"]
    if "template" not in ctrl_cfg:
        raise ConfigError("stability analysis needs a controller template")
    K = to_transfer_function(_controller_from_cfg(ctrl_cfg))
    grid = _grid_from_cfg(cfg.get("grid"), args.grid_points)
    report = quadratic_stability_check(K, plant, grid)
    summary = {
        "kind": "stability",
        "config": cfg,
        "passed": report.passed,
        "stability_margin_deg": report.margin_deg,
        "worst_pair": list(report.worst_pair),
        "worst_difference_deg": report.worst_difference_deg,
        "pair_differences_deg": {f"{a}-{b}": v for (a, b), v in report.pair_differences.items()},
    }
    write_summary(out_dir, summary)
    return 0


def _cmd_design(cfg: dict, out_dir: str, args) -> int:
    plant = _switched_tf_plant_from_cfg(cfg["plant"])
    specs = _specs_from_cfg(cfg["specs"])
    grid = _grid_from_cfg(cfg.get("grid"), args.grid_points)
    problem = DesignProblem(
        plant=plant,
        template_kind=cfg["template"],
        specs=specs,
        bounds=cfg.get("bounds"),
        initial_guesses=cfg.get("initial_guesses", ()),
        grid=grid,
    )
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    n_starts = cfg.get("n_starts", 16)
    try:
        result = solve(problem, n_starts=n_starts, seed=seed)
    except NoFeasiblePoint as exc:
        write_summary(out_dir, {
            "kind": "design",
            "config": cfg,
            "seed": seed,
            "feasible": False,
            "message": str(exc),
            "best_params": exc.best_params,
            "best_residuals": exc.best_residuals,
        })
        print(f"design infeasible: {exc}", file=sys.stderr)
        return 2
    report = verify(result.params, problem)
    summary = {
        "kind": "design",
        "config": cfg,
        "seed": seed,
        "feasible": True,
        "template": cfg["template"],
        "parameter_names": list(template_parameter_names(cfg["template"])),
        "params": list(result.params),
        "objective_deg": result.objective,
        "stability_margin_deg": result.stability_margin_deg,
        "spec_residuals": result.spec_residuals,
        "iterations": result.iterations,
        "start_index": result.start_index,
        "verification": {
            "feasible": report.feasible,
            "phase_margin_deg": report.phase_margin_deg,
            "gain_residuals_db": list(report.gain_residuals_db),
            "stability_margin_deg": report.stability_margin_deg,
        },
    }
    write_summary(out_dir, summary)
    return 0


def _cmd_df(cfg: dict, out_dir: str, args) -> int:
    om = cfg["omega"]
    if isinstance(om, dict):
        grid = _grid_from_cfg(om, args.grid_points)
    else:
        grid = np.asarray(om, dtype=float)
    strict = bool(args.strict_df or cfg.get("strict", False))
    vals = describing_function(cfg["kp"], cfg["tau_i"], cfg["p_reset"], cfg["alpha"],
                               grid, strict=strict)
    vals = np.atleast_1d(vals)
    lines = ["omega,real,imag,magnitude,phase_deg"]
    for w, v in zip(grid, vals):
        lines.append(",".join([_fmt(w), _fmt(v.real), _fmt(v.imag), _fmt(abs(v)),
                               _fmt(np.degrees(np.angle(v)))]))
    _atomic_write(os.path.join(out_dir, "df.csv"), "\n".join(lines) + "\n")
    write_summary(out_dir, {
        "kind": "df",
        "config": cfg,
        "strict": strict,
        "n_points": int(grid.size),
        "first_point": {"omega": float(grid[0]), "magnitude": float(abs(vals[0])),
                        "phase_deg": float(np.degrees(np.angle(vals[0])))},
    })
    return 0


_EXAMPLE_STYLES = {
    "example1": [("overlay", ["FPI", "PID"], "switched vehicle velocity control")],
    "example2": [
        ("overlay",
         ["pi", "pci", "pci_feedforward", "general_zero_crossing"],
         "zero-crossing reset comparison"),
        ("overlay",
         ["zheng_fixed_instant", "general_fixed_instant"],
         "fixed-instant reset comparison"),
    ],
    "example3": [
        ("overlay", ["base_PI", "base_PID", "base_FPI"], "servomotor base controllers"),
        ("overlay", ["reset_PCI", "reset_PCID", "reset_FPCI"], "servomotor reset controllers"),
    ],
}


def _cmd_reproduce(example: str, out_dir: str, args) -> int:
    kwargs = {}
    if args.h is not None:
        kwargs["h"] = args.h
    if args.horizon is not None:
        kwargs["horizon"] = args.horizon
    if example == "example1" and args.seed is not None:
        kwargs["seed"] = args.seed
    result = run_example(example, **kwargs)
    trace_files = {}
    for name, trace in result["traces"].items():
        trace_files[name] = _write_trace_artifacts(out_dir, trace, name=name)
    summary = dict(result["summary"])
    summary["kind"] = "reproduce"
    summary["seed"] = args.seed
    write_summary(out_dir, summary)
    for i, (style, names, title) in enumerate(_EXAMPLE_STYLES[example]):
        files = [trace_files[n] for n in names if n in trace_files]
        if not files:
            continue
        script = export_plot_script(files, [n for n in names if n in trace_files],
                                    style=style, title=title)
        fname = "plots.py" if i == 0 else f"plots_{i}.py"
        _atomic_write(os.path.join(out_dir, fname), script)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fohc",
        description="fractional-order hybrid control: design, simulate, analyze",
    )
    parser.add_argument("--version", action="version", version=f"fohc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default="fohc_out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--grid-points", type=int, default=None, dest="grid_points")
        p.add_argument("--h", type=float, default=None, help="step override [s]")
        p.add_argument("--horizon", type=float, default=None, help="horizon override [s]")
        p.add_argument("--memory-policy", choices=["clear", "retain"], default=None,
                       dest="memory_policy")
        p.add_argument("--strict-df", action="store_true", dest="strict_df",
                       help="evaluate the printed describing-function form verbatim")

    for name in ("design", "simulate", "stability", "df"):
        p = sub.add_parser(name, help=f"run a {name} config")
        p.add_argument("config", help="JSON scenario config")
        common(p)
    p = sub.add_parser("reproduce", help="run a shipped study case end to end")
    p.add_argument("example", choices=["example1", "example2", "example3"])
    common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        os.makedirs(args.out, exist_ok=True)
        if args.command == "reproduce":
            return _cmd_reproduce(args.example, args.out, args)
        cfg = load_config(args.config)
        if cfg["kind"] != args.command:
            raise ConfigError(
                f"config kind {cfg['kind']!r} does not match command {args.command!r}"
            )
        handler = {
            "simulate": _cmd_simulate,
            "stability": _cmd_stability,
            "design": _cmd_design,
            "df": _cmd_df,
        }[args.command]
        return handler(cfg, args.out, args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
