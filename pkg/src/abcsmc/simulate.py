"""Simulation backends behind one "simulate at these time points" contract.

Three engines: fixed-step classical RK4 for ODEs, an adaptive embedded
Runge-Kutta (Cash-Karp 4/5) integrator with cubic-Hermite dense output for
delay systems, and the exact stochastic simulation algorithm for reaction
networks.  Every engine has a batch path that advances many parameter
vectors at once on shared numpy arrays; samplers rely on it for throughput.

Right-hand sides are written broadcast-friendly: state has shape (..., m),
theta (..., k), and the returned derivative (..., m), so the same callable
serves single runs and batches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np


class SimulationFailure(RuntimeError):
    """Simulation could not produce a finite trajectory (blowup, underflow,
    runaway event count).  Samplers treat this as distance = infinity."""


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray  # (n,)
    states: np.ndarray  # (n, m)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.states, dtype=float)
        if s.ndim != 2 or s.shape[0] != t.shape[0]:
            raise ValueError(f"states shape {s.shape} does not match {t.shape[0]} times")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)


@dataclass(frozen=True)
class OdeSystem:
    dim: int
    rhs: Callable  # f(t, state, theta) -> dstate/dt, broadcasting over leading axes


@dataclass(frozen=True)
class DdeSystem:
    """Delay system: rhs(t, state, lagged, theta) with `lagged` a tuple of
    state arrays, one per lag, evaluated at t - lag.

    Lag entries are either fixed floats or integer indices into theta.
    Negative resolved lags are clamped to zero (zero lag means "use the
    current state", i.e. plain ODE semantics for that term).
    """

    dim: int
    lags: tuple[Union[float, int], ...]
    rhs: Callable


@dataclass(frozen=True)
class ReactionNetwork:
    """List of (stoichiometry change vector, hazard(state, theta)) pairs."""

    dim: int
    reactions: tuple[tuple[np.ndarray, Callable], ...]

    def change_matrix(self) -> np.ndarray:
        return np.array([np.asarray(c, dtype=float) for c, _ in self.reactions])

    def hazards(self, state: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return np.array([h(state, theta) for _, h in self.reactions], dtype=float)


@dataclass(frozen=True)
class DirectSampler:
    """Model that samples its dataset directly: sample(thetas, times, rng)
    returns states of shape (n_thetas, len(times), dim)."""

    dim: int
    sample: Callable


@dataclass(frozen=True)
class SimOptions:
    """Per-model engine settings."""

    rk4_steps: int = 1000  # internal steps across [t0, t_end]
    dde_tol: float = 1e-6
    dde_max_step_frac: float = 0.05  # max step as fraction of span
    lag_floor_frac: float = 1e-3  # lags below this fraction of span count as zero
    ssa_max_events: int = 100_000_000


# ---------------------------------------------------------------------------
# Fixed-step RK4
# ---------------------------------------------------------------------------

def _rk4_march(rhs, theta, y, ok, t_a, t_b, h_max):
    """Advance y from t_a to t_b with uniform substeps of size <= h_max.

    Blown-up rows are zeroed and flagged in `ok` so inf/nan never propagates.
    """
    span = t_b - t_a
    n = max(1, int(math.ceil(span / h_max - 1e-9)))
    h = span / n
    for i in range(n):
        t = t_a + i * h
        k1 = rhs(t, y, theta)
        k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1, theta)
        k3 = rhs(t + 0.5 * h, y + (0.5 * h) * k2, theta)
        k4 = rhs(t + h, y + h * k3, theta)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        bad = ~np.isfinite(y).all(axis=-1)
        bad |= np.abs(y).max(axis=-1) > 1e100
        if bad.any():
            ok &= ~bad
            y = np.where(bad[..., None], 0.0, y)
    return y


def rk4_solve_batch(
    system: OdeSystem,
    thetas: np.ndarray,
    x0s: np.ndarray,
    times: Sequence[float],
    step: float,
    t0: Optional[float] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate a (B, k) batch; returns (states (B, n, m), ok (B,))."""
    thetas = np.asarray(thetas, dtype=float)
    times = np.asarray(times, dtype=float)
    if step <= 0:
        raise ValueError("step must be > 0")
    if np.any(np.diff(times) <= 0):
        raise ValueError("record times must be strictly increasing")
    B = thetas.shape[0]
    y = np.broadcast_to(np.asarray(x0s, dtype=float), (B, system.dim)).copy()
    ok = np.ones(B, dtype=bool)
    start = times[0] if t0 is None else float(t0)
    if times[0] < start:
        raise ValueError("record times must not precede t0")
    out = np.empty((B, len(times), system.dim))
    t = start
    with np.errstate(all="ignore"):
        for i, r in enumerate(times):
            if r > t:
                y = _rk4_march(system.rhs, thetas, y, ok, t, r, step)
                t = r
            out[:, i, :] = y
    return out, ok


def rk4_solve(
    system: OdeSystem,
    theta: np.ndarray,
    x0: np.ndarray,
    times: Sequence[float],
    step: float,
    t0: Optional[float] = None,
) -> Trajectory:
    """Classical fixed-step RK4, sampled at the requested times.

    Record times are landed on exactly (the last substep of each segment is
    shortened as needed).  Non-finite states raise SimulationFailure.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    states, ok = rk4_solve_batch(system, theta[None, :], np.asarray(x0, dtype=float), times, step, t0)
    if not ok[0]:
        raise SimulationFailure("ODE state became non-finite")
    return Trajectory(np.asarray(times, dtype=float), states[0])


# ---------------------------------------------------------------------------
# Adaptive DDE integration (Cash-Karp 4/5 with cubic Hermite dense output)
# ---------------------------------------------------------------------------

_CK_C = np.array([0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8])
_CK_A = [
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (3 / 10, -9 / 10, 6 / 5),
    (-11 / 54, 5 / 2, -70 / 27, 35 / 27),
    (1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096),
]
_CK_B5 = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])
_CK_B4 = np.array([2825 / 27648, 0.0, 18575 / 48384, 13525 / 55296, 277 / 14336, 1 / 4])


def resolve_lags(system: DdeSystem, thetas: np.ndarray) -> np.ndarray:
    """Concrete lag values, shape (B, n_lags).

    Negative lags make the row an invalid (anti-causal) model instance;
    the solvers fail those rows rather than clamping them."""
    thetas = np.asarray(thetas, dtype=float)
    B = thetas.shape[0]
    out = np.empty((B, len(system.lags)))
    for j, lag in enumerate(system.lags):
        if isinstance(lag, int) and not isinstance(lag, bool):
            out[:, j] = thetas[:, lag]
        else:
            out[:, j] = float(lag)
    return out


class _DenseHistory:
    """Accepted integration nodes (t, y, f) with cubic Hermite lookup."""

    def __init__(self, B, m, t0, y0, f0, capacity=256, max_nodes=8192):
        self.ts = np.empty(capacity)
        self.ys = np.empty((capacity, B, m))
        self.fs = np.empty((capacity, B, m))
        self.n = 1
        self.max_nodes = max_nodes
        self.ts[0] = t0
        self.ys[0] = y0
        self.fs[0] = f0

    def append(self, t, y, f) -> bool:
        if self.n == self.ts.shape[0]:
            if self.n >= self.max_nodes:
                return False
            grow = min(self.ts.shape[0] * 2, self.max_nodes)
            self.ts = np.concatenate([self.ts, np.empty(grow - self.n)])
            for name in ("ys", "fs"):
                old = getattr(self, name)
                new = np.empty((grow,) + old.shape[1:])
                new[: self.n] = old[: self.n]
                setattr(self, name, new)
        self.ts[self.n] = t
        self.ys[self.n] = y
        self.fs[self.n] = f
        self.n += 1
        return True

    def interpolate(self, tq: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Hermite value at per-row times tq (n,), for the given row indices."""
        ts = self.ts[: self.n]
        idx = np.clip(np.searchsorted(ts, tq, side="right") - 1, 0, self.n - 2)
        ta, tb = ts[idx], ts[idx + 1]
        ya = self.ys[idx, rows]
        yb = self.ys[idx + 1, rows]
        fa = self.fs[idx, rows]
        fb = self.fs[idx + 1, rows]
        dt = (tb - ta)[:, None]
        s = ((tq - ta) / (tb - ta))[:, None]
        s2 = s * s
        s3 = s2 * s
        return (
            (2 * s3 - 3 * s2 + 1) * ya
            + (s3 - 2 * s2 + s) * dt * fa
            + (-2 * s3 + 3 * s2) * yb
            + (s3 - s2) * dt * fb
        )


def dde_solve_batch(
    system: DdeSystem,
    thetas: np.ndarray,
    history_batch: Callable,
    times: Sequence[float],
    tol: float = 1e-6,
    t0: Optional[float] = None,
    max_step: Optional[float] = None,
    options: Optional[SimOptions] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Adaptive batch integration; returns (states (B, n, m), ok (B,)).

    `history_batch(tq, rows)` supplies pre-t0 states for the given rows at
    times tq (tq <= t0).  All rows share one adaptive grid; the step is
    capped by the smallest positive lag so lagged lookups always land in
    completed history.  Rows whose state blows up, or that would force the
    shared step below the underflow floor, are invalidated and frozen
    rather than aborting the whole batch.  `tol` is a trajectory-accuracy
    target; the internal per-step tolerance is 100x stricter.
    """
    opts = options or SimOptions()
    if tol <= 0:
        raise ValueError("tol must be > 0")
    thetas = np.asarray(thetas, dtype=float)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("record times must be strictly increasing")
    B = thetas.shape[0]
    m = system.dim
    start = times[0] if t0 is None else float(t0)
    t_end = float(times[-1])
    span = max(t_end - start, 1e-300)
    h_floor = 1e-12 * span
    h_max = max_step if max_step is not None else opts.dde_max_step_frac * span
    loc_tol = tol / 100.0

    lags = resolve_lags(system, thetas)  # (B, L)
    ok = (lags >= 0.0).all(axis=1)  # anti-causal rows are invalid
    lag_floor = opts.lag_floor_frac * span
    lags = np.where(np.abs(lags) < lag_floor, 0.0, lags)
    lags[~ok] = 0.0

    y = history_batch(np.full(B, start), np.arange(B)).astype(float).copy()
    y[~ok] = 0.0

    def lagged_states(t_stage, y_stage, hist):
        out = []
        for j in range(lags.shape[1]):
            lag_j = lags[:, j]
            vals = y_stage.copy()  # zero-lag rows use the current stage state
            sel = lag_j > 0
            if sel.any():
                rows = np.nonzero(sel)[0]
                tq = t_stage - lag_j[rows]
                past = tq <= start + 1e-15
                if past.any():
                    r = rows[past]
                    vals[r] = history_batch(tq[past], r)
                if (~past).any():
                    r = rows[~past]
                    vals[r] = hist.interpolate(tq[~past], r)
            out.append(vals)
        return tuple(out)

    def freeze(rows_mask):
        nonlocal y
        ok[rows_mask] = False
        y = np.where(ok[:, None], y, 0.0)

    with np.errstate(all="ignore"):
        f0 = system.rhs(start, y, lagged_states(start, y, None), thetas)
        hist = _DenseHistory(B, m, start, y, np.asarray(f0, dtype=float))

        out = np.empty((B, len(times), m))
        i_rec = 0
        if times[0] <= start + 1e-15:
            out[:, 0, :] = y
            i_rec = 1

        t = start
        h = min(h_max, span / 50.0)
        f_left = np.asarray(f0, dtype=float)
        attempts = 0
        max_attempts = 200_000
        while i_rec < len(times):
            if not ok.any():
                out[:, i_rec:, :] = y[:, None, :]
                break
            pos = lags[ok]
            pos = pos[pos > 0]
            if pos.size:
                h = min(h, pos.min())
            h = min(h, h_max, times[i_rec] - t)
            # attempt/shrink loop: one accepted step per pass of the outer loop
            while True:
                attempts += 1
                ks = [f_left]
                for s in range(1, 6):
                    t_s = t + _CK_C[s] * h
                    y_s = y + h * sum(a * k for a, k in zip(_CK_A[s], ks))
                    ks.append(system.rhs(t_s, y_s, lagged_states(t_s, y_s, hist), thetas))
                y5 = y + h * sum(b * k for b, k in zip(_CK_B5, ks))
                y4 = y + h * sum(b * k for b, k in zip(_CK_B4, ks))
                scale = loc_tol + loc_tol * np.maximum(np.abs(y), np.abs(np.where(np.isfinite(y5), y5, 0.0)))
                err_rows = np.abs(y5 - y4) / scale
                err_rows = np.where(np.isfinite(err_rows), err_rows, np.inf).max(axis=-1)
                err_rows = np.where(np.isfinite(y5).all(axis=-1), err_rows, np.inf)
                err_rows[~ok] = 0.0
                err = err_rows.max()
                if err <= 1.0:
                    break
                if attempts > max_attempts:
                    freeze(ok & (err_rows > 1.0))
                    break
                shrink = 0.9 * err ** -0.2 if np.isfinite(err) else 0.1
                h_new = h * max(min(shrink, 0.9), 0.1)
                if h_new < h_floor:
                    # shed the rows that demand an impossible step, keep h
                    freeze(ok & (err_rows > 1.0))
                    if not ok.any():
                        break
                else:
                    h = h_new
            if not ok.any():
                out[:, i_rec:, :] = y[:, None, :]
                break
            y = np.where(ok[:, None], y5, 0.0)
            blown = ok & (np.abs(y).max(axis=-1) > 1e100)
            if blown.any():
                freeze(blown)
            t = t + h
            f_left = np.asarray(
                system.rhs(t, y, lagged_states(t, y, hist), thetas), dtype=float
            )
            f_left = np.where(ok[:, None], f_left, 0.0)
            if not hist.append(t, y, f_left):
                freeze(ok)
                out[:, i_rec:, :] = y[:, None, :]
                break
            if t >= times[i_rec] - 1e-12 * max(1.0, abs(times[i_rec])):
                out[:, i_rec, :] = y
                i_rec += 1
            grow = 0.9 * err ** -0.2 if err > 0 else 5.0
            h = min(h * min(max(grow, 1.0), 5.0), h_max)
    return out, ok


def dde_solve(
    system: DdeSystem,
    theta: np.ndarray,
    history: Callable,
    times: Sequence[float],
    tol: float = 1e-6,
    t0: Optional[float] = None,
    max_step: Optional[float] = None,
    options: Optional[SimOptions] = None,
) -> Trajectory:
    """Adaptive delay-equation solve with continuous history lookup.

    `history(t)` returns the state for t <= t0 (scalar or array t).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))

    def history_batch(tq, rows):
        vals = np.asarray(history(tq), dtype=float)
        if vals.ndim == 1:
            vals = np.broadcast_to(vals, (len(tq), system.dim))
        return vals

    states, ok = dde_solve_batch(
        system, theta[None, :], history_batch, times, tol, t0, max_step, options
    )
    if not ok[0]:
        raise SimulationFailure("DDE state became non-finite or step size underflowed")
    return Trajectory(np.asarray(times, dtype=float), states[0])


def constant_history(x0: np.ndarray) -> Callable:
    x0 = np.asarray(x0, dtype=float)

    def history(t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return x0
        return np.broadcast_to(x0, (t.shape[0], x0.shape[0]))

    return history


# ---------------------------------------------------------------------------
# Gillespie stochastic simulation
# ---------------------------------------------------------------------------

def gillespie(
    network: ReactionNetwork,
    theta: np.ndarray,
    x0: Sequence[int],
    record_times: Sequence[float],
    rng: np.random.Generator,
    t0: float = 0.0,
    max_events: Optional[int] = None,
) -> Trajectory:
    """Exact stochastic simulation (direct method).

    State is recorded last-event-carried-forward at each record time.  When
    the total hazard reaches zero the state is held constant (absorption).
    """
    x = np.asarray(x0, dtype=float)
    if np.any(x < 0) or np.any(x != np.round(x)):
        raise ValueError("SSA initial state must be nonnegative integers")
    record_times = np.asarray(record_times, dtype=float)
    if np.any(np.diff(record_times) <= 0):
        raise ValueError("record times must be strictly increasing")
    cap = max_events if max_events is not None else SimOptions().ssa_max_events
    changes = network.change_matrix()
    hazard_fns = [h for _, h in network.reactions]
    theta = np.asarray(theta, dtype=float)

    n_rec = len(record_times)
    out = np.empty((n_rec, network.dim))
    x = x.copy()
    t = float(t0)
    i_rec = 0
    events = 0
    while i_rec < n_rec:
        a = np.array([h(x, theta) for h in hazard_fns], dtype=float)
        np.clip(a, 0.0, None, out=a)
        a0 = a.sum()
        if a0 <= 0.0 or not np.isfinite(a0):
            break  # absorbed; hold state for all remaining record times
        t_next = t + rng.exponential(1.0 / a0)
        while i_rec < n_rec and record_times[i_rec] < t_next:
            out[i_rec] = x
            i_rec += 1
        if i_rec >= n_rec:
            break
        j = int(np.searchsorted(np.cumsum(a), rng.uniform(0.0, a0), side="left"))
        x += changes[min(j, len(changes) - 1)]
        t = t_next
        events += 1
        if events > cap:
            raise SimulationFailure(f"SSA exceeded {cap} events")
    out[i_rec:] = x
    return Trajectory(record_times, out)


# ---------------------------------------------------------------------------
# Uniform model-level contract
# ---------------------------------------------------------------------------

def _resolve_x0(model, thetas: np.ndarray) -> np.ndarray:
    if model.initial_state is not None:
        return np.asarray(model.initial_state(thetas), dtype=float)
    return np.broadcast_to(np.asarray(model.x0, dtype=float), (thetas.shape[0], model.system.dim))


def simulate_model_batch(
    model,
    thetas: np.ndarray,
    times: Sequence[float],
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate a (B, k) batch of parameter vectors at shared record times.

    Returns (states (B, n, m), ok (B,)).  Stochastic kinds consume `rng`
    sequentially in row order, so results are reproducible for a given
    generator state.
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 2:
        raise ValueError("thetas must be a (B, k) array")
    kind = model.kind
    if kind == "ode":
        x0s = _resolve_x0(model, thetas)
        span = float(times[-1]) - model.t0
        step = span / model.sim.rk4_steps
        return rk4_solve_batch(model.system, thetas, x0s, times, step, t0=model.t0)
    if kind == "dde":
        x0s = _resolve_x0(model, thetas)
        B = thetas.shape[0]
        # the shared adaptive grid is capped by the smallest positive lag in
        # the batch, so group rows of similar lag to keep large-lag rows fast
        lag_min = resolve_lags(model.system, thetas).min(axis=1)
        order = np.argsort(lag_min, kind="stable")
        chunk = 512
        out = np.empty((B, len(times), model.system.dim))
        ok = np.ones(B, dtype=bool)
        for lo in range(0, B, chunk):
            rows = order[lo : lo + chunk]

            def history_batch(tq, sub_rows, rows=rows):
                return x0s[rows[sub_rows]]

            states_c, ok_c = dde_solve_batch(
                model.system, thetas[rows], history_batch, times,
                tol=model.sim.dde_tol, t0=model.t0, options=model.sim,
            )
            out[rows] = states_c
            ok[rows] = ok_c
        return out, ok
    if kind == "ssa":
        if rng is None:
            raise ValueError("stochastic simulation requires an rng")
        x0s = np.round(_resolve_x0(model, thetas))
        B = thetas.shape[0]
        out = np.empty((B, len(times), model.system.dim))
        ok = np.ones(B, dtype=bool)
        for b in range(B):
            try:
                traj = gillespie(
                    model.system, thetas[b], x0s[b], times, rng,
                    t0=model.t0, max_events=model.sim.ssa_max_events,
                )
                out[b] = traj.states
            except SimulationFailure:
                out[b] = 0.0
                ok[b] = False
        return out, ok
    if kind == "direct":
        if rng is None:
            raise ValueError("direct samplers require an rng")
        states = np.asarray(model.system.sample(thetas, np.asarray(times, dtype=float), rng), dtype=float)
        return states, np.isfinite(states).all(axis=(1, 2))
    raise ValueError(f"unknown model kind '{kind}'")


def simulate_model(
    model,
    theta: np.ndarray,
    times: Sequence[float],
    rng: Optional[np.random.Generator] = None,
) -> Trajectory:
    """Single-run version of the uniform contract; raises on failure."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    states, ok = simulate_model_batch(model, theta[None, :], times, rng)
    if not ok[0]:
        raise SimulationFailure(f"simulation of '{model.name}' failed")
    return Trajectory(np.asarray(times, dtype=float), states[0])


def simulate_replicates(
    model,
    theta: np.ndarray,
    times: Sequence[float],
    replicates: int,
    rng: Optional[np.random.Generator] = None,
) -> Trajectory:
    """Pointwise mean of independent replicate trajectories."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    thetas = np.repeat(theta[None, :], replicates, axis=0)
    states, ok = simulate_model_batch(model, thetas, times, rng)
    if not ok.all():
        raise SimulationFailure(f"a replicate simulation of '{model.name}' failed")
    return Trajectory(np.asarray(times, dtype=float), states.mean(axis=0))
