"""Constrained controller tuning.

Reproduces the source design procedure: the phase-margin residual is the
objective, gain-crossover equalities and sensitivity / quadratic-stability
inequalities are constraints, solved derivative-free by Nelder-Mead inside
an adaptive quadratic-penalty loop with seeded Latin-hypercube multi-starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .freqdesign import (
    ControllerTemplate,
    GainCrossoverSpec,
    PhaseMarginSpec,
    SensitivityBoundSpec,
    SwitchedPlant,
    characteristic_polynomial,
    default_grid,
    gain_at,
    max_phase_difference,
    phase_margin_at,
    sensitivity_margin,
    template_parameter_names,
    to_transfer_function,
)

__all__ = [
    "DesignProblem",
    "AssembledProblem",
    "OptimizationResult",
    "FeasibilityReport",
    "NoFeasiblePoint",
    "assemble",
    "solve",
    "verify",
    "default_bounds",
]

# feasibility thresholds: the reported gain equality is considered met within
# 0.2 dB; the optimizer itself converges to the tighter constraint tolerance
GAIN_EQUALITY_DB = 0.2
CONSTRAINT_TOL = 1e-3
PARAM_TOL = 1e-6

_GAIN_BOUNDS = (1e-4, 1e3)
_ORDER_BOUNDS = (0.1, 1.9)
_FILTER_BOUNDS = (1.0, 1e4)


class NoFeasiblePoint(RuntimeError):
    """Every multi-start ended infeasible; carries the best attempt."""

    def __init__(self, message, best_params=None, best_residuals=None):
        super().__init__(message)
        self.best_params = best_params
        self.best_residuals = best_residuals


def default_bounds(kind: str) -> list[tuple[float, float]]:
    names = template_parameter_names(kind)
    out = []
    for name in names:
        if name in ("lam", "mu", "alpha"):
            out.append(_ORDER_BOUNDS)
        elif name == "NN":
            out.append(_FILTER_BOUNDS)
        elif name == "p_reset":
            out.append((0.0, 1.0))
        else:
            out.append(_GAIN_BOUNDS)
    return out


@dataclass(frozen=True)
class DesignProblem:
    """Plant, controller family, specifications, bounds, and initial guesses.

    A template with P parameters can meet N specifications plus L-1 switching
    stability conditions only when P >= N + L - 1; violating that is a
    construction error.
    """

    plant: SwitchedPlant
    template_kind: str
    specs: tuple
    bounds: tuple = None
    initial_guesses: tuple = ()
    grid: np.ndarray = None

    def __init__(self, plant, template_kind, specs, bounds=None, initial_guesses=(), grid=None):
        specs = tuple(specs)
        names = template_parameter_names(template_kind)
        n_params = len(names)
        need = len(specs) + plant.n_subsystems - 1
        if n_params < need:
            raise ValueError(
                f"{template_kind} has {n_params} parameters but the problem needs at least "
                f"{need} (N specs = {len(specs)}, L subsystems = {plant.n_subsystems})"
            )
        if bounds is None:
            bounds = default_bounds(template_kind)
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if len(bounds) != n_params:
            raise ValueError("one (lo, hi) bound pair per parameter required")
        if any(lo >= hi for lo, hi in bounds):
            raise ValueError("bounds must satisfy lo < hi componentwise")
        guesses = tuple(tuple(map(float, g)) for g in initial_guesses)
        for g in guesses:
            if len(g) != n_params:
                raise ValueError("initial guess dimension mismatch")
        grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
        object.__setattr__(self, "plant", plant)
        object.__setattr__(self, "template_kind", template_kind)
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "initial_guesses", guesses)
        object.__setattr__(self, "grid", grid)

    @property
    def n_params(self) -> int:
        return len(template_parameter_names(self.template_kind))


@dataclass(frozen=True)
class AssembledProblem:
    """Callable pieces of the constrained program.

    objective(x) is the phase-margin residual in degrees; equalities are
    gain-crossover residuals in dB (target 0); inequalities are <= 0 when
    satisfied (sensitivity excess in dB and pairwise phase difference minus
    90 degrees).
    """

    objective: object
    equalities: tuple
    inequalities: tuple
    names: tuple


def _controller(problem: DesignProblem, x):
    return to_transfer_function(ControllerTemplate.from_vector(problem.template_kind, x))


def assemble(
    problem: DesignProblem,
    stability_refine_levels: int = 3,
    pm_unwrap_points: int = 256,
) -> AssembledProblem:
    """Build the callable program pieces.

    The two precision knobs trade accuracy for speed inside the search loop
    (the solver uses coarse settings; verify() uses the defaults).
    """
    worst = problem.plant.worst
    grid = problem.grid
    pm_specs = [s for s in problem.specs if isinstance(s, PhaseMarginSpec)]
    gc_specs = [s for s in problem.specs if isinstance(s, GainCrossoverSpec)]
    sb_specs = [s for s in problem.specs if isinstance(s, SensitivityBoundSpec)]
    if len(pm_specs) + len(gc_specs) + len(sb_specs) != len(problem.specs):
        raise ValueError("unknown specification type in problem")

    def objective(x):
        if not pm_specs:
            return 0.0
        K = _controller(problem, x)
        pm = phase_margin_at(K, worst, pm_specs[0].omega, points=pm_unwrap_points)
        return abs(pm - pm_specs[0].phi_deg)

    equalities = []
    for s in gc_specs:
        def eq(x, _s=s):
            return gain_at(_controller(problem, x), worst, _s.omega)
        equalities.append(eq)

    inequalities = []
    for s in sb_specs:
        def ineq(x, _s=s):
            sub = problem.grid[problem.grid <= _s.omega]
            if sub.size == 0:
                sub = np.array([_s.omega])
            return sensitivity_margin(_controller(problem, x), worst, sub) - _s.max_db
        inequalities.append(ineq)

    subs = problem.plant.subsystems
    for a in range(len(subs)):
        for b in range(a + 1, len(subs)):
            def stab(x, _a=a, _b=b):
                K = _controller(problem, x)
                ca = characteristic_polynomial(K, subs[_a])
                cb = characteristic_polynomial(K, subs[_b])
                return max_phase_difference(
                    ca, cb, grid, refine_levels=stability_refine_levels
                ) - 90.0
            inequalities.append(stab)

    return AssembledProblem(
        objective=objective,
        equalities=tuple(equalities),
        inequalities=tuple(inequalities),
        names=template_parameter_names(problem.template_kind),
    )


@dataclass(frozen=True)
class OptimizationResult:
    params: tuple
    objective: float
    spec_residuals: dict
    stability_margin_deg: float
    converged: bool
    iterations: int
    start_index: int

    def template(self, kind: str) -> ControllerTemplate:
        return ControllerTemplate.from_vector(kind, self.params)


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    objective: float
    phase_margin_deg: float | None
    gain_residuals_db: tuple
    sensitivity_excess_db: tuple
    stability_margin_deg: float
    details: dict = field(default_factory=dict)


def verify(params, problem: DesignProblem) -> FeasibilityReport:
    """Evaluate every assembled constraint at params; pure, no search.

    Feasible means every gain-crossover equality within GAIN_EQUALITY_DB,
    every sensitivity bound met, and positive quadratic-stability margin.
    """
    asm = assemble(problem)
    x = np.asarray(params, dtype=float)
    obj = asm.objective(x)
    eqs = tuple(f(x) for f in asm.equalities)
    n_sens = sum(isinstance(s, SensitivityBoundSpec) for s in problem.specs)
    ineqs = tuple(f(x) for f in asm.inequalities)
    sens = ineqs[:n_sens]
    stab = ineqs[n_sens:]
    margin = 90.0 - (max(s + 90.0 for s in stab) if stab else 0.0)
    pm = None
    for s in problem.specs:
        if isinstance(s, PhaseMarginSpec):
            pm = phase_margin_at(_controller(problem, x), problem.plant.worst, s.omega)
            break
    feasible = (
        all(abs(v) <= GAIN_EQUALITY_DB for v in eqs)
        and all(v <= CONSTRAINT_TOL for v in sens)
        and margin > 0.0
    )
    return FeasibilityReport(
        feasible=feasible,
        objective=float(obj),
        phase_margin_deg=pm,
        gain_residuals_db=eqs,
        sensitivity_excess_db=sens,
        stability_margin_deg=float(margin),
        details={"params": tuple(map(float, x))},
    )


def _latin_hypercube_starts(problem: DesignProblem, n_starts: int, seed: int) -> np.ndarray:
    """Seeded LHS over the bounds; gain-like parameters sample in log scale."""
    names = template_parameter_names(problem.template_kind)
    d = len(names)
    sampler = qmc.LatinHypercube(d=d, seed=seed)
    unit = sampler.random(n_starts)
    out = np.empty((n_starts, d))
    for j, (name, (lo, hi)) in enumerate(zip(names, problem.bounds)):
        log_scaled = name not in ("lam", "mu", "alpha", "p_reset") and lo > 0 and hi / lo > 100
        if log_scaled:
            out[:, j] = 10 ** (np.log10(lo) + unit[:, j] * (np.log10(hi) - np.log10(lo)))
        else:
            out[:, j] = lo + unit[:, j] * (hi - lo)
    return out


def solve(
    problem: DesignProblem,
    n_starts: int = 16,
    seed: int = 0,
    penalty_rounds: int = 8,
    penalty0: float = 10.0,
    penalty_growth: float = 10.0,
    nm_maxiter: int = 300,
) -> OptimizationResult:
    """Best feasible result across all multi-starts.

    Deterministic given the seed and guess list.  Ties between feasible
    starts break on objective, then parameter 2-norm, then start index.
    Raises NoFeasiblePoint when every start ends infeasible.
    """
    asm = assemble(problem, stability_refine_levels=0, pm_unwrap_points=64)
    lb = np.array([b[0] for b in problem.bounds])
    ub = np.array([b[1] for b in problem.bounds])
    guesses = [np.asarray(g, dtype=float) for g in problem.initial_guesses]
    n_random = max(0, n_starts - len(guesses))
    starts = guesses + (
        list(_latin_hypercube_starts(problem, n_random, seed)) if n_random else []
    )
    if not starts:
        raise ValueError("at least one start required")

    def penalized(x, weight):
        outside = np.sum(np.maximum(0.0, lb - x) ** 2 + np.maximum(0.0, x - ub) ** 2)
        z = np.clip(x, lb, ub)
        val = asm.objective(z)
        for f in asm.equalities:
            val += weight * f(z) ** 2
        for f in asm.inequalities:
            val += weight * max(0.0, f(z)) ** 2
        return val + 1e9 * outside

    best = None
    total_iters = 0
    for si, x0 in enumerate(starts):
        x = np.clip(np.asarray(x0, dtype=float), lb, ub)
        weight = penalty0
        prev_val = np.inf
        for rnd in range(penalty_rounds):
            # early rounds are re-optimized under a stiffer penalty anyway, so
            # they only need coarse convergence; precision tightens with rnd
            xatol = max(PARAM_TOL * 1e-2, 1e-4 * 10.0 ** (-rnd))
            res = minimize(
                penalized,
                x,
                args=(weight,),
                method="Nelder-Mead",
                options={
                    "maxiter": nm_maxiter,
                    "xatol": xatol,
                    "fatol": 1e-12,
                    "adaptive": True,
                },
            )
            x = res.x
            total_iters += res.nit
            weight *= penalty_growth
            # stop early once the constraints are met well inside tolerance
            # and the penalized value has stopped moving (rounds are a cap)
            if rnd >= 2 and abs(res.fun - prev_val) <= 1e-10 * max(1.0, abs(prev_val)):
                z = np.clip(x, lb, ub)
                eq_ok = all(abs(f(z)) <= 0.1 * CONSTRAINT_TOL for f in asm.equalities)
                in_ok = all(f(z) <= 0.1 * CONSTRAINT_TOL for f in asm.inequalities)
                if eq_ok and in_ok:
                    break
            prev_val = res.fun
        x = np.clip(x, lb, ub)
        obj = asm.objective(x)
        eq_res = [f(x) for f in asm.equalities]
        ineq_res = [f(x) for f in asm.inequalities]
        feasible = all(abs(v) <= CONSTRAINT_TOL for v in eq_res) and all(
            v <= CONSTRAINT_TOL for v in ineq_res
        )
        key = (not feasible, obj, float(np.linalg.norm(x)), si)
        if best is None or key < best[0]:
            best = (key, x, obj, eq_res, ineq_res, feasible, si)

    key, x, obj, eq_res, ineq_res, feasible, si = best
    n_sens = sum(isinstance(s, SensitivityBoundSpec) for s in problem.specs)
    stab = ineq_res[n_sens:]
    margin = 90.0 - (max(v + 90.0 for v in stab) if stab else 0.0)
    residuals = {
        "phase_margin_deg": obj,
        "gain_crossover_db": tuple(eq_res),
        "sensitivity_db": tuple(ineq_res[:n_sens]),
    }
    if not feasible:
        raise NoFeasiblePoint(
            f"no feasible point found across {len(starts)} starts; best residuals {residuals}",
            best_params=tuple(map(float, x)),
            best_residuals=residuals,
        )
    return OptimizationResult(
        params=tuple(map(float, x)),
        objective=float(obj),
        spec_residuals=residuals,
        stability_margin_deg=float(margin),
        converged=True,
        iterations=int(total_iters),
        start_index=int(si),
    )
