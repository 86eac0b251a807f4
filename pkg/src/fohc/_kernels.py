"""Hot numerical kernels with a numba backend and a pure-numpy fallback.

The closed-loop stepping kernel dominates runtime: every step evaluates a
Grunwald-Letnikov history convolution per fractional state, so long horizons
cost O(n^2).  The same source function is executed either JIT-compiled
(default) or as plain Python; set FOHC_NO_NUMBA=1 to force the fallback, or
call set_backend().  History dot products go through np.dot (BLAS) in both
backends, so the two paths produce identical traces.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "HAS_NUMBA",
    "backend_name",
    "set_backend",
    "gl_weights",
    "gl_weights_any_order",
    "build_weight_rows",
    "run_closed_loop",
    "STATUS_OK",
    "STATUS_NONFINITE",
]

STATUS_OK = 0
STATUS_NONFINITE = 1

# trigger kinds
TRIG_NONE = 0
TRIG_ZERO_CROSSING = 1
TRIG_FIXED_INSTANTS = 2

# jump target kinds
TGT_ZERO = 0
TGT_FEEDFORWARD = 1
TGT_GENERAL = 2
TGT_VARIABLE = 3
TGT_PLANT_STATE = 4

_env_disable = os.environ.get("FOHC_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _env_disable:
        raise ImportError("numba disabled via FOHC_NO_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    njit = None


def gl_weights_any_order(mu: float, n: int) -> np.ndarray:
    """GL binomial weights (-1)^k C(mu, k) for k = 0..n, any real mu."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return np.ones(1)
    factors = 1.0 - (mu + 1.0) / np.arange(1.0, n + 1.0)
    return np.concatenate(([1.0], np.cumprod(factors)))


def gl_weights(alpha: float, n: int) -> np.ndarray:
    """GL weights for a differentiation order alpha in (0, 2]."""
    return gl_weights_any_order(alpha, n)


def build_weight_rows(alphas, n_steps: int, memory_length: int | None = None):
    """Per-state reversed GL weight rows for the stepping kernel.

    Returns (ha, wrev, wlen): ha[i] = h-exponent placeholder is NOT included
    here (caller scales); wrev is a (n_states, max_len + 1) matrix whose row i
    holds w[wlen_i], ..., w[1], w[0] in positions 0..wlen_i, and wlen[i] is
    the number of usable memory terms.  Rows are truncated at trailing
    exact-zero weights (integer orders) and at memory_length.
    """
    alphas = np.asarray(alphas, dtype=float)
    cap = n_steps if memory_length is None else min(n_steps, int(memory_length))
    rows = []
    wlens = []
    for a in alphas:
        w = gl_weights_any_order(a, cap)
        nz = np.nonzero(w)[0]
        last = int(nz[-1]) if nz.size else 0
        rows.append(w[: last + 1][::-1].copy())
        wlens.append(last)
    max_len = max(len(rw) for rw in rows)
    wrev = np.zeros((len(rows), max_len))
    for i, rw in enumerate(rows):
        wrev[i, : len(rw)] = rw
    return wrev, np.asarray(wlens, dtype=np.int64)


def _closed_loop_source(
    h,
    r,
    sub_idx,
    Ap,
    Bp,
    Cp,
    p_ha,
    p_wrev,
    p_wlen,
    Ac,
    Bc,
    Cc,
    Dc,
    c_direct,
    c_ha,
    c_wrev,
    c_wlen,
    mu_hinv,
    mu_wrev,
    mu_wlen,
    trigger_kind,
    tk_steps,
    target_kind,
    n_reset,
    BR,
    cr,
    t_gain,
    E1,
    E2,
    Gz,
    ff_from_start,
    retain_memory,
    deadband,
    y,
    u,
    e,
    xc,
    xp,
    ev_step,
    ev_time,
    ev_pre,
    ev_post,
):
    n = y.shape[0] - 1
    nc = xc.shape[0]
    npl = xp.shape[0]

    ff_on = ff_from_start and target_kind == TGT_FEEDFORWARD

    # initial outputs from the provided initial states
    idx0 = sub_idx[0]
    acc = 0.0
    for i in range(npl):
        acc += Cp[idx0, i] * xp[i, 0]
    y[0] = acc
    e[0] = r[0] - y[0]
    acc = Dc * e[0]
    for i in range(nc):
        acc += Cc[i] * xc[i, 0]
    if ff_on:
        acc += t_gain * r[0]
    u[0] = acc

    eps0 = deadband * max(1.0, abs(r[0]))
    prev_sign = 0.0
    if e[0] > eps0:
        prev_sign = 1.0
    elif e[0] < -eps0:
        prev_sign = -1.0
    armed = prev_sign != 0.0
    last_ev = -10
    n_events = 0
    starts_c = np.zeros(nc, dtype=np.int64)

    for k in range(1, n + 1):
        idx = sub_idx[k - 1]
        ek1 = e[k - 1]
        uk = Dc * ek1
        for i in range(nc):
            uk += Cc[i] * xc[i, k - 1]
        if ff_on:
            uk += t_gain * r[k - 1]

        # plant states (per-state GL; alpha = 1 rows reduce to explicit Euler)
        for i in range(npl):
            rhs = Bp[idx, i] * uk
            for j in range(npl):
                rhs += Ap[idx, i, j] * xp[j, k - 1]
            wl = p_wlen[i]
            m = k if k < wl else wl
            s = 0.0
            if m > 0:
                s = np.dot(p_wrev[i, wl - m : wl], xp[i, k - m : k])
            xp[i, k] = p_ha[i] * rhs - s

        # controller states
        if c_direct:
            for i in range(nc):
                rhs = Bc[i] * ek1
                for j in range(nc):
                    rhs += Ac[i, j] * xc[j, k - 1]
                wl = c_wlen[i]
                avail = k - starts_c[i]
                m = avail if avail < wl else wl
                s = 0.0
                if m > 0:
                    s = np.dot(c_wrev[i, wl - m : wl], xc[i, k - m : k])
                xc[i, k] = c_ha[i] * rhs - s
        else:
            # cascade: v = D^mu e from the error history, states integrate v
            wl = mu_wlen
            m = (k - 1) if (k - 1) < wl else wl
            v = mu_hinv * np.dot(mu_wrev[wl - m : wl + 1], e[k - 1 - m : k])
            for i in range(nc):
                rhs = Bc[i] * v
                for j in range(nc):
                    rhs += Ac[i, j] * xc[j, k - 1]
                xc[i, k] = xc[i, k - 1] + h * rhs

        acc = 0.0
        for i in range(npl):
            acc += Cp[idx, i] * xp[i, k]
        y[k] = acc
        if not np.isfinite(y[k]):
            return STATUS_NONFINITE, k, n_events
        e[k] = r[k] - y[k]
        acc = Dc * e[k]
        for i in range(nc):
            acc += Cc[i] * xc[i, k]
        if ff_on:
            acc += t_gain * r[k]
        u[k] = acc

        # event detection
        fire = False
        t_event = k * h
        if trigger_kind == TRIG_ZERO_CROSSING:
            eps = deadband * max(1.0, abs(r[k]))
            sk = 0.0
            if e[k] > eps:
                sk = 1.0
            elif e[k] < -eps:
                sk = -1.0
            if armed and (k - last_ev) >= 2:
                if sk != 0.0 and prev_sign != 0.0 and sk != prev_sign:
                    fire = True
                    # interpolated crossing instant inside the last step
                    denom = e[k - 1] - e[k]
                    if denom != 0.0:
                        t_event = (k - 1) * h + h * e[k - 1] / denom
                elif sk == 0.0 and prev_sign != 0.0:
                    fire = True
            if sk != 0.0:
                prev_sign = sk
                armed = True
        elif trigger_kind == TRIG_FIXED_INSTANTS:
            if tk_steps > 0 and k % tk_steps == 0:
                fire = True

        if fire:
            last_ev = k
            if trigger_kind == TRIG_ZERO_CROSSING:
                armed = False
            for i in range(nc):
                ev_pre[n_events, i] = xc[i, k]
            inj = 0.0
            if target_kind == TGT_GENERAL:
                inj = t_gain * r[k] / (n_reset * cr)
            elif target_kind == TGT_VARIABLE:
                inj = (t_gain * r[k] - Dc * e[k]) / (n_reset * cr)
            elif target_kind == TGT_PLANT_STATE:
                inj = E1 * xp[0, k] + E2 * xp[1, k] + Gz * r[k]
            for i in range(nc - n_reset, nc):
                xc[i, k] = BR[i] * inj
            if target_kind == TGT_FEEDFORWARD:
                ff_on = True
            if c_direct and not retain_memory:
                for i in range(nc - n_reset, nc):
                    starts_c[i] = k
            for i in range(nc):
                ev_post[n_events, i] = xc[i, k]
            ev_step[n_events] = k
            ev_time[n_events] = t_event
            n_events += 1
            acc = Dc * e[k]
            for i in range(nc):
                acc += Cc[i] * xc[i, k]
            if ff_on:
                acc += t_gain * r[k]
            u[k] = acc

    return STATUS_OK, n, n_events


_loop_py = _closed_loop_source
if HAS_NUMBA:
    _loop_jit = njit(cache=True, fastmath=False)(_closed_loop_source)
else:
    _loop_jit = None

_active = _loop_jit if HAS_NUMBA else _loop_py


def backend_name() -> str:
    return "numba" if _active is _loop_jit and _loop_jit is not None else "numpy"


def set_backend(name: str) -> str:
    """Select the stepping backend: 'numba' or 'numpy'. Returns the active name."""
    global _active
    if name == "numba":
        if _loop_jit is None:
            raise RuntimeError("numba backend unavailable (not installed or disabled)")
        _active = _loop_jit
    elif name == "numpy":
        _active = _loop_py
    else:
        raise ValueError(f"unknown backend {name!r}")
    return backend_name()


def run_closed_loop(*args):
    """Dispatch the closed-loop stepping kernel on the active backend."""
    return _active(*args)
