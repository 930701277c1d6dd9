"""Neural DDEs with trainable delays.

A fixed two-hidden-layer tanh network maps stacked current/delayed
state channels (plus an optional exogenous input) to the state
derivative.  Both the derivative loss (direct prediction, weighted by
1/t) and the simulation loss (an H-step explicit-Euler rollout) come
with hand-rolled reverse-mode gradients for every weight, bias, and
delay; delays enter through the piecewise-linear interpolation of the
uniformly sampled data, so their gradients use the local cell slope.
"""

from __future__ import annotations

import copy
import json
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .data import Trajectory, rmse
from .errors import (DivergenceError, DomainError, NumericalError,
                     ParameterError)
from .models import DdeSystem, HistorySpec
from .solver import DenseSolution, SolveConfig, solve_dde, solve_ode

__all__ = ["InputLayout", "NddeModel", "TrainConfig", "TrainRecord", "AdamState",
           "make_model", "forward", "assemble_input", "derivative_loss",
           "simulation_loss", "adam_step", "train", "simulate_ndde",
           "evaluate_ndde", "save_checkpoint", "load_checkpoint"]

_ZERO_DELAY = 1e-9


@dataclass(frozen=True)
class InputLayout:
    """Which delayed copies of which state channels feed the network.

    Each entry is (delay index, channel tuple or None for all states);
    entries appear in the input vector in order, the exogenous input
    (when present) last.
    """

    entries: Tuple[Tuple[int, Optional[Tuple[int, ...]]], ...]
    exogenous: bool = False

    @staticmethod
    def full(n_delays: int, exogenous: bool = False) -> "InputLayout":
        """Current state plus every delayed copy of the full state."""
        return InputLayout(entries=tuple((r, None) for r in range(n_delays + 1)),
                           exogenous=exogenous)

    def channels(self, n_state: int):
        return [np.arange(n_state) if ch is None else np.asarray(ch, dtype=np.intp)
                for _, ch in self.entries]

    def width(self, n_state: int) -> int:
        return sum(len(c) for c in self.channels(n_state)) + (1 if self.exogenous else 0)

    def n_delay_slots(self) -> int:
        return 1 + max(r for r, _ in self.entries)


@dataclass
class NddeModel:
    """Two-hidden-layer tanh network with a trainable delay vector."""

    n_state: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    delays: np.ndarray
    trainable: np.ndarray
    layout: InputLayout
    tau_max: float

    @property
    def hidden_sizes(self):
        return (self.w1.shape[0], self.w2.shape[0])

    @property
    def in_dim(self):
        return self.w1.shape[1]

    def copy(self) -> "NddeModel":
        return NddeModel(n_state=self.n_state, w1=self.w1.copy(), b1=self.b1.copy(),
                         w2=self.w2.copy(), b2=self.b2.copy(), w3=self.w3.copy(),
                         delays=self.delays.copy(), trainable=self.trainable.copy(),
                         layout=self.layout, tau_max=self.tau_max)

    def params(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2,
                "w3": self.w3, "delays": self.delays}


def _glorot(rng, rows, cols):
    bound = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def make_model(n_state, hidden, layout: InputLayout, tau_max,
               delay_init="random", frozen=(), seed=0) -> NddeModel:
    """Glorot-initialized network; delays explicit or uniform in [0, tau_max]."""
    l1, l2 = hidden
    rng = np.random.default_rng(seed)
    in_dim = layout.width(n_state)
    w1 = _glorot(rng, l1, in_dim)
    w2 = _glorot(rng, l2, l1)
    w3 = _glorot(rng, n_state, l2)
    n_delays = layout.n_delay_slots()
    if isinstance(delay_init, str) and delay_init == "random":
        delays = rng.uniform(0.0, tau_max, size=n_delays)
        for r in frozen:
            delays[r] = 0.0
    else:
        delays = np.asarray(delay_init, dtype=float).copy()
        if delays.size != n_delays:
            raise ParameterError(f"layout expects {n_delays} delay entries")
    trainable = np.ones(n_delays, dtype=bool)
    trainable[list(frozen)] = False
    if np.any(delays < 0) or np.any(delays > tau_max + 1e-12):
        raise ParameterError("initial delays must lie in [0, tau_max]")
    return NddeModel(n_state=n_state, w1=w1, b1=np.zeros(l1), w2=w2,
                     b2=np.zeros(l2), w3=w3, delays=delays, trainable=trainable,
                     layout=layout, tau_max=float(tau_max))


def forward(model: NddeModel, z0):
    """Network output for input rows (B, in_dim); caches activations."""
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    if z0.shape[1] != model.in_dim:
        raise ParameterError(f"expected input width {model.in_dim}, got {z0.shape[1]}")
    z1 = np.tanh(z0 @ model.w1.T + model.b1)
    z2 = np.tanh(z1 @ model.w2.T + model.b2)
    out = z2 @ model.w3.T
    return out, (z0, z1, z2)


def _backprop(model: NddeModel, cache, d_out):
    z0, z1, z2 = cache
    g_w3 = d_out.T @ z2
    d_z2 = d_out @ model.w3
    d_a2 = d_z2 * (1.0 - z2 * z2)
    g_w2 = d_a2.T @ z1
    g_b2 = d_a2.sum(axis=0)
    d_z1 = d_a2 @ model.w2
    d_a1 = d_z1 * (1.0 - z1 * z1)
    g_w1 = d_a1.T @ z0
    g_b1 = d_a1.sum(axis=0)
    d_z0 = d_a1 @ model.w1
    grads = {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2, "w3": g_w3}
    return grads, d_z0


class _GridData:
    """Uniform-grid view of one or more trajectories for training.

    Concatenates each trajectory's history grid and samples; rows from
    different trajectories never mix in lookups thanks to per-member
    eligibility windows.
    """

    def __init__(self, trajs: Sequence[Trajectory]):
        times, states, derivs, inputs = [], [], [], []
        self.member_bounds = []
        self.sample_start = []
        dt = None
        for traj in trajs:
            g_t, g_x = traj.grid()
            step = np.diff(g_t)
            if step.size == 0:
                raise ParameterError("trajectory too short for training")
            if np.max(np.abs(step - step[0])) > 1e-9 * step[0]:
                raise ParameterError("training requires a uniform sample grid")
            if dt is None:
                dt = step[0]
            elif abs(step[0] - dt) > 1e-9 * dt:
                raise ParameterError("all trajectories must share the sampling time")
            n_hist = g_t.size - traj.times.size
            start = sum(len(t) for t in times)
            times.append(g_t)
            states.append(g_x)
            dv = np.full((g_t.size, traj.dim), np.nan)
            if traj.derivs is not None:
                dv[n_hist:] = traj.derivs
            derivs.append(dv)
            uu = np.full(g_t.size, np.nan)
            if traj.input is not None:
                uu[n_hist:] = traj.input
            inputs.append(uu)
            self.member_bounds.append((start, start + g_t.size))
            self.sample_start.append(start + n_hist)
        self.dt = float(dt)
        self.times = np.concatenate(times)
        self.states = np.vstack(states)
        self.derivs = np.vstack(derivs)
        self.input = np.concatenate(inputs)
        self.n_state = self.states.shape[1]

    def eligible(self, tau_max, horizon=0, need_derivs=True, positive_time=True):
        j_max = int(math.floor(tau_max / self.dt)) + 1
        idx = []
        for (start, end), s0 in zip(self.member_bounds, self.sample_start):
            for i in range(max(s0, start + j_max), end - horizon):
                if positive_time and not self.times[i] > 0:
                    continue
                if need_derivs and not np.all(np.isfinite(self.derivs[i])):
                    continue
                idx.append(i)
        if not idx:
            raise ParameterError("no eligible samples: trajectory too short "
                                 "for tau_max and the loss horizon")
        return np.asarray(idx, dtype=np.intp)


def _cells(model: NddeModel, dt: float):
    """(j, alpha) decomposition tau = (j + alpha) dt per delay slot."""
    out = []
    for tau in model.delays:
        jf = float(tau) / dt
        j = int(math.floor(jf + 1e-12))
        out.append((j, jf - j))
    return out


def _assemble_batch(model: NddeModel, data: _GridData, idx):
    """Input rows for sample indices; returns (z0, per-entry slope info)."""
    cells = _cells(model, data.dt)
    chans = model.layout.channels(model.n_state)
    cols, info = [], []
    col = 0
    for (r, _), ch in zip(model.layout.entries, chans):
        j, a = cells[r]
        hi = data.states[idx - j][:, ch]
        lo = data.states[idx - j - 1][:, ch]
        cols.append((1.0 - a) * hi + a * lo)
        info.append((r, col, len(ch), (hi - lo) / data.dt))
        col += len(ch)
    if model.layout.exogenous:
        cols.append(data.input[idx][:, None])
    return np.hstack(cols), info


def assemble_input(model: NddeModel, traj: Trajectory, t: float):
    """Network input at one sample time of a uniform-grid trajectory."""
    data = _GridData([traj])
    hits = np.flatnonzero(np.abs(data.times - t) <= 1e-9 * max(1.0, abs(t)))
    if hits.size == 0:
        raise DomainError(f"t = {t:.6g} is not a sample time of the trajectory")
    i = int(hits[0])
    j_max = int(math.floor(max(model.delays) / data.dt)) + 1
    if i - j_max < 0:
        raise DomainError("delayed lookup leaves the recorded grid")
    z0, _ = _assemble_batch(model, data, np.array([i], dtype=np.intp))
    return z0[0]


def derivative_loss(model: NddeModel, data, batch):
    """Weighted squared error of direct derivative prediction, with gradients.

    Weights are 1/t per sample; batch entries at t = 0 are rejected.
    """
    data = _as_grid(data)
    batch = np.asarray(batch, dtype=np.intp)
    t = data.times[batch]
    if np.any(t <= 0):
        raise ParameterError("derivative loss needs samples at t > 0 (weights 1/t)")
    z0, info = _assemble_batch(model, data, batch)
    out, cache = forward(model, z0)
    target = data.derivs[batch]
    err = out - target
    w = 1.0 / t
    n, b = model.n_state, batch.size
    loss = float(np.sum(w[:, None] * err * err) / (n * b))
    d_out = 2.0 * w[:, None] * err / (n * b)
    grads, d_z0 = _backprop(model, cache, d_out)
    g_tau = np.zeros(model.delays.size)
    for r, col, width, slope in info:
        g_tau[r] += -float(np.sum(d_z0[:, col:col + width] * slope))
    grads["delays"] = g_tau * model.trainable
    return loss, grads


def simulation_loss(model: NddeModel, data, batch, horizon):
    """Squared rollout mismatch over an H-step explicit-Euler unroll.

    Delayed states interpolate the concatenation of recorded data
    (before each batch start) and the simulated states (after it);
    gradients flow through the entire unrolled computation, including
    the interpolation weights' dependence on the delays.
    """
    data = _as_grid(data)
    batch = np.asarray(batch, dtype=np.intp)
    h = int(horizon)
    if h < 1:
        raise ParameterError("simulation horizon must be at least 1")
    b, n = batch.size, model.n_state
    dt = data.dt
    cells = _cells(model, dt)
    chans = model.layout.channels(model.n_state)

    sim = np.empty((b, h + 1, n))
    sim[:, 0] = data.states[batch]
    caches, infos = [], []
    for ii in range(1, h + 1):
        cols, info = [], []
        col = 0
        for (r, _), ch in zip(model.layout.entries, chans):
            j, a = cells[r]
            off_hi = ii - 1 - j
            off_lo = off_hi - 1
            hi = sim[:, off_hi][:, ch] if off_hi >= 1 else data.states[batch + off_hi][:, ch]
            lo = sim[:, off_lo][:, ch] if off_lo >= 1 else data.states[batch + off_lo][:, ch]
            cols.append((1.0 - a) * hi + a * lo)
            info.append((r, col, ch, off_hi, off_lo, a, hi, lo))
            col += len(ch)
        if model.layout.exogenous:
            cols.append(data.input[batch + ii - 1][:, None])
        z0 = np.hstack(cols)
        out, cache = forward(model, z0)
        sim[:, ii] = sim[:, ii - 1] + dt * out
        caches.append(cache)
        infos.append(info)
    targets = data.states[batch[:, None] + np.arange(1, h + 1)[None, :]]
    diff = sim[:, 1:] - targets
    loss = float(np.sum(diff * diff) / (n * h * b))

    grads = {k: np.zeros_like(v) for k, v in model.params().items() if k != "delays"}
    g_tau = np.zeros(model.delays.size)
    a_sim = np.zeros_like(sim)
    a_sim[:, 1:] = 2.0 * diff / (n * h * b)
    for ii in range(h, 0, -1):
        a_out = dt * a_sim[:, ii]
        a_sim[:, ii - 1] += a_sim[:, ii]
        step_grads, d_z0 = _backprop(model, caches[ii - 1], a_out)
        for k, v in step_grads.items():
            grads[k] += v
        for r, col, ch, off_hi, off_lo, a, hi, lo in infos[ii - 1]:
            dv = d_z0[:, col:col + len(ch)]
            g_tau[r] += float(np.sum(dv * (lo - hi))) / dt
            if off_hi >= 1:
                a_sim[:, off_hi, ch] += (1.0 - a) * dv
            if off_lo >= 1:
                a_sim[:, off_lo, ch] += a * dv
    grads["delays"] = g_tau * model.trainable
    return loss, grads


def _as_grid(data):
    if isinstance(data, _GridData):
        return data
    if isinstance(data, Trajectory):
        return _GridData([data])
    return _GridData(list(data))


@dataclass(frozen=True)
class TrainConfig:
    loss: str = "derivative"      # derivative | simulation
    horizon: int = 10
    batch: int = 32
    iters: int = 2000
    lr: float = 1e-2
    lr_delay: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.loss not in ("derivative", "simulation"):
            raise ParameterError(f"unknown loss {self.loss!r}")
        if self.loss == "simulation" and self.horizon < 1:
            raise ParameterError("simulation loss needs horizon >= 1")
        if self.lr <= 0 or self.lr_delay <= 0:
            raise ParameterError("learning rates must be positive")


@dataclass
class TrainRecord:
    losses: np.ndarray
    delay_trace: np.ndarray
    best_iter: int
    wall_time: float

    @property
    def best_loss(self):
        return float(self.losses[self.best_iter])


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0

    @staticmethod
    def zeros_like(params):
        return AdamState(m={k: np.zeros_like(v) for k, v in params.items()},
                         v={k: np.zeros_like(v) for k, v in params.items()})


def adam_step(params, grads, state: AdamState, cfg: TrainConfig, tau_max=None):
    """One ADAM update in place; delays use their own rate and get clamped."""
    state.step += 1
    c1 = 1.0 - cfg.beta1**state.step
    c2 = 1.0 - cfg.beta2**state.step
    for key, p in params.items():
        g = grads[key]
        state.m[key] = cfg.beta1 * state.m[key] + (1.0 - cfg.beta1) * g
        state.v[key] = cfg.beta2 * state.v[key] + (1.0 - cfg.beta2) * g * g
        m_hat = state.m[key] / c1
        v_hat = state.v[key] / c2
        lr = cfg.lr_delay if key == "delays" else cfg.lr
        p -= lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        if key == "delays" and tau_max is not None:
            np.clip(p, 0.0, tau_max, out=p)
    return params, state


def train(model: NddeModel, trajs, cfg: TrainConfig):
    """Mini-batch ADAM training; returns the best-loss snapshot and the record."""
    data = _as_grid(trajs)
    if data.n_state != model.n_state:
        raise ParameterError("trajectory dimension does not match the model")
    horizon = cfg.horizon if cfg.loss == "simulation" else 0
    eligible = data.eligible(model.tau_max, horizon=horizon,
                             need_derivs=cfg.loss == "derivative",
                             positive_time=cfg.loss == "derivative")
    rng = np.random.default_rng(cfg.seed)
    work = model.copy()
    params = work.params()
    state = AdamState.zeros_like(params)
    losses = np.empty(cfg.iters)
    delay_trace = np.empty((cfg.iters, work.delays.size))
    best_loss = math.inf
    best_iter = -1
    best_params = None
    started = time.perf_counter()
    for q in range(cfg.iters):
        take = min(cfg.batch, eligible.size)
        batch = rng.choice(eligible, size=take, replace=eligible.size < cfg.batch)
        if cfg.loss == "derivative":
            loss, grads = derivative_loss(work, data, batch)
        else:
            loss, grads = simulation_loss(work, data, batch, cfg.horizon)
        if not math.isfinite(loss):
            norms = {k: float(np.linalg.norm(v)) for k, v in params.items()}
            raise NumericalError(f"non-finite loss at iteration {q}; norms: {norms}")
        if loss < best_loss:
            best_loss = loss
            best_iter = q
            best_params = {k: v.copy() for k, v in params.items()}
        adam_step(params, grads, state, cfg, tau_max=work.tau_max)
        losses[q] = loss
        delay_trace[q] = work.delays
    wall = time.perf_counter() - started
    if best_params is not None:
        for key, value in best_params.items():
            params[key][...] = value  # params alias the work model's arrays
    record = TrainRecord(losses=losses, delay_trace=delay_trace,
                         best_iter=best_iter, wall_time=wall)
    return work, record


def simulate_ndde(model: NddeModel, history: HistorySpec, t_end,
                  input_fn=None, step=None, t_start=0.0) -> DenseSolution:
    """Integrate the trained network as a DDE from the given history.

    Delay entries at (numerically) zero feed the current state; the
    exogenous input, when the layout has one, is read from input_fn.
    """
    if model.layout.exogenous and input_fn is None:
        raise ParameterError("layout has an exogenous channel; provide input_fn")
    chans = model.layout.channels(model.n_state)
    positive = [(r, float(tau)) for r, tau in enumerate(model.delays)
                if tau > _ZERO_DELAY]
    order = np.argsort([tau for _, tau in positive], kind="stable")
    sys_delays = np.array([positive[i][1] for i in order])
    slot = {positive[i][0]: int(np.flatnonzero(order == i)[0])
            for i in range(len(positive))}

    def rhs(t, x, delayed, u=None):
        parts = []
        for (r, _), ch in zip(model.layout.entries, chans):
            src = x if r not in slot else delayed[slot[r]]
            parts.append(np.asarray(src)[ch])
        if model.layout.exogenous:
            parts.append(np.array([u]))
        out, _ = forward(model, np.concatenate(parts)[None, :])
        return out[0]

    if sys_delays.size == 0:
        cfg = SolveConfig(step=step or 0.01, t_end=t_end, t_start=t_start)
        u_of = (lambda t: input_fn(t)) if model.layout.exogenous else (lambda t: None)
        return solve_ode(lambda t, x: rhs(t, x, (), u_of(t)), history.eval(0.0), cfg)
    sys = DdeSystem(dim=model.n_state, delays=sys_delays, rhs=rhs,
                    input=input_fn, label="ndde")
    h = step or min(float(sys_delays.min()) / 10.0, 0.01)
    return solve_dde(sys, history, SolveConfig(step=h, t_end=t_end, t_start=t_start))


def predict_derivatives(model: NddeModel, trajs, at_times=None):
    """Direct network prediction on recorded samples (no integration).

    Returns (times, predictions) over the eligible sample rows, or over
    the requested subset of times.
    """
    data = _as_grid(trajs)
    idx = data.eligible(model.tau_max, need_derivs=False, positive_time=False)
    if at_times is not None:
        wanted = np.isin(np.round(data.times[idx] / data.dt).astype(int),
                         np.round(np.asarray(at_times) / data.dt).astype(int))
        idx = idx[wanted]
    z0, _ = _assemble_batch(model, data, idx)
    out, _ = forward(model, z0)
    return data.times[idx], out


def evaluate_ndde(model: NddeModel, train_traj, test: Trajectory, step=None):
    """Test-window report: direct derivative RMSE and replay RMSE.

    The replay starts at the last training sample with the recorded data
    as history, exactly the information available at the boundary.
    """
    trajs = [train_traj] if isinstance(train_traj, Trajectory) else list(train_traj)
    main = trajs[0]
    merged = _merge(main, test)
    data = _GridData([merged])
    t_pred, pred = predict_derivatives(model, data, at_times=test.times)
    err_deriv = rmse(pred, test.derivs[np.isin(test.times, t_pred)]) \
        if test.derivs is not None else math.nan

    anchor = float(main.times[-1])
    g_t, g_x = merged.grid()
    pre = g_t <= anchor + 1e-12
    span = max(float(np.max(model.delays)), data.dt) + data.dt
    keep = g_t[pre] >= anchor - span - 1e-12
    hist = HistorySpec.sampled(g_t[pre][keep] - anchor, g_x[pre][keep])
    input_fn = None
    if model.layout.exogenous:
        u_grid = np.concatenate([_input_grid(main), _input_grid(test)])
        t_grid = np.concatenate([main.times, test.times])
        input_fn = lambda t: float(np.interp(t, t_grid, u_grid))
    try:
        sol = simulate_ndde(model, hist, t_end=float(test.times[-1]),
                            input_fn=input_fn, step=step, t_start=anchor)
        err_traj = rmse(test.states, sol.eval(test.times))
    except DivergenceError:
        err_traj = math.inf
    return err_deriv, err_traj


def _input_grid(traj):
    if traj.input is None:
        raise ParameterError("trajectory has no recorded input channel")
    return traj.input


def _merge(a: Trajectory, b: Trajectory) -> Trajectory:
    """Concatenate a training trajectory with its contiguous test window."""
    derivs = None
    if a.derivs is not None and b.derivs is not None:
        derivs = np.vstack([a.derivs, b.derivs])
    inputs = None
    if a.input is not None and b.input is not None:
        inputs = np.concatenate([a.input, b.input])
    return Trajectory(times=np.concatenate([a.times, b.times]),
                      states=np.vstack([a.states, b.states]),
                      derivs=derivs, input=inputs,
                      history_times=a.history_times, history_states=a.history_states,
                      source=a.source, meta=dict(a.meta))


def save_checkpoint(model: NddeModel, path):
    """Versioned, self-describing JSON checkpoint."""
    payload = {
        "format": "ndde-checkpoint",
        "version": 1,
        "n_state": model.n_state,
        "hidden_sizes": list(model.hidden_sizes),
        "tau_max": model.tau_max,
        "layout": {"entries": [[r, list(ch) if ch is not None else None]
                               for r, ch in model.layout.entries],
                   "exogenous": model.layout.exogenous},
        "delays": model.delays.tolist(),
        "trainable": model.trainable.astype(int).tolist(),
        "w1": model.w1.tolist(), "b1": model.b1.tolist(),
        "w2": model.w2.tolist(), "b2": model.b2.tolist(),
        "w3": model.w3.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)


def load_checkpoint(path) -> NddeModel:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != "ndde-checkpoint" or payload.get("version") != 1:
        raise ParameterError("unrecognized checkpoint format")
    layout = InputLayout(entries=tuple((int(r), tuple(ch) if ch is not None else None)
                                       for r, ch in payload["layout"]["entries"]),
                         exogenous=bool(payload["layout"]["exogenous"]))
    return NddeModel(n_state=int(payload["n_state"]),
                     w1=np.array(payload["w1"]), b1=np.array(payload["b1"]),
                     w2=np.array(payload["w2"]), b2=np.array(payload["b2"]),
                     w3=np.array(payload["w3"]),
                     delays=np.array(payload["delays"], dtype=float),
                     trainable=np.array(payload["trainable"], dtype=bool),
                     layout=layout, tau_max=float(payload["tau_max"]))
