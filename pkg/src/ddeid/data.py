"""Sampled datasets: train/test sampling, delayed-state reconstruction, RMSE.

A :class:`Trajectory` is the measurement model shared by the sparse
regression and neural pipelines: sample times, states, optional
derivatives and exogenous input, plus a pre-window history grid.  When a
trajectory keeps a handle to the dense solution it was sampled from,
delayed and collocated lookups evaluate that solution directly;
otherwise they fall back to piecewise-linear interpolation over the
recorded grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, ParameterError, UnsupportedError
from .models import DdeSystem, HistorySpec
from .solver import DenseSolution

__all__ = ["Trajectory", "SplitSpec", "sample_trajectory", "delayed_states",
           "collocated_states", "rmse", "write_trajectory_csv", "read_trajectory_csv"]


@dataclass
class Trajectory:
    """Time series of states with optional derivatives and input channel."""

    times: np.ndarray
    states: np.ndarray
    derivs: Optional[np.ndarray] = None
    input: Optional[np.ndarray] = None
    history_times: Optional[np.ndarray] = None
    history_states: Optional[np.ndarray] = None
    source: Optional[DenseSolution] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if np.any(np.diff(self.times) <= 0):
            raise ParameterError("sample times must be strictly ascending")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.states))):
            raise ParameterError("samples must be finite")
        if self.derivs is not None:
            self.derivs = np.asarray(self.derivs, dtype=float)
            if self.derivs.ndim == 1:
                self.derivs = self.derivs[:, None]
            if self.derivs.shape != self.states.shape:
                raise ParameterError("derivs shape must match states")
        if self.input is not None:
            self.input = np.asarray(self.input, dtype=float)
            if self.input.shape != (self.times.size,):
                raise ParameterError("input must hold one value per sample")
        if self.history_times is not None:
            self.history_times = np.asarray(self.history_times, dtype=float)
            self.history_states = np.asarray(self.history_states, dtype=float)
            if self.history_states.ndim == 1:
                self.history_states = self.history_states[:, None]
            if np.any(self.history_times >= self.times[0]):
                raise ParameterError("history grid must precede the first sample")

    @property
    def dim(self):
        return self.states.shape[1]

    @property
    def n_samples(self):
        return self.times.size

    def grid(self):
        """Recorded grid (history + samples) as (times, states)."""
        if self.history_times is None:
            return self.times, self.states
        return (np.concatenate([self.history_times, self.times]),
                np.vstack([self.history_states, self.states]))


@dataclass(frozen=True)
class SplitSpec:
    """How to draw samples from a dense solution and split train/test.

    With ``boundary`` set, ``m`` training samples cover [t0, boundary]
    and ``m_test`` test samples cover (boundary, t_end]; otherwise a
    single grid of ``m`` samples spans the window and the first
    ``train_fraction`` of them (by index) form the training set.
    """

    m: int
    sampling: str = "uniform"           # uniform | random
    seed: int = 0
    train_fraction: float = 0.6
    m_train: Optional[int] = None       # overrides train_fraction (index split)
    boundary: Optional[float] = None
    m_test: Optional[int] = None

    def __post_init__(self):
        if self.m < 2:
            raise ParameterError("need at least two samples")
        if self.sampling not in ("uniform", "random"):
            raise ParameterError(f"unknown sampling mode {self.sampling!r}")
        if self.boundary is None and self.m_train is None \
                and not 0.0 < self.train_fraction < 1.0:
            raise ParameterError("train_fraction must lie in (0, 1)")


def _exact_derivs(system: DdeSystem, sol: DenseSolution, times):
    rows = []
    for t in times:
        x = sol.eval(t)
        delayed = tuple(sol.eval(t - tau) for tau in system.delays)
        u = system.input(t) if system.input is not None else None
        rows.append(np.asarray(system.rhs(t, x, delayed, u), dtype=float))
    return np.vstack(rows)


def _central_diff(times, states):
    dt = np.diff(times)
    if dt.size >= 2 and np.max(np.abs(dt - dt[0])) > 1e-9 * dt[0]:
        raise UnsupportedError("central differences require a uniform sample grid")
    h = dt[0]
    out = np.empty_like(states)
    out[1:-1] = (states[2:] - states[:-2]) / (2.0 * h)
    # second-order one-sided stencils at the ends
    out[0] = (-3.0 * states[0] + 4.0 * states[1] - states[2]) / (2.0 * h)
    out[-1] = (3.0 * states[-1] - 4.0 * states[-2] + states[-3]) / (2.0 * h)
    return out


def sample_trajectory(sol: DenseSolution, spec: SplitSpec, deriv_mode="exact_rhs",
                      system: Optional[DdeSystem] = None, label=""):
    """Sample a dense solution into (train, test) trajectories.

    deriv_mode: ``exact_rhs`` evaluates the generating system's rhs at the
    sample points, ``central_difference`` differences the sampled states
    on a uniform grid, ``none`` leaves derivatives out.
    """
    if deriv_mode not in ("exact_rhs", "central_difference", "none"):
        raise ParameterError(f"unknown deriv_mode {deriv_mode!r}")
    if deriv_mode == "exact_rhs" and system is None:
        raise ParameterError("exact_rhs derivatives need the generating system")
    t0, t_end = sol.t0, sol.t_end

    if spec.boundary is not None:
        b = float(spec.boundary)
        if not t0 < b < t_end:
            raise ParameterError("split boundary must lie inside the solution span")
        t_train = _draw_times(t0, b, spec.m, spec)
        m_test = spec.m_test or max(2, int(round(spec.m * (t_end - b) / (b - t0))))
        t_test = np.linspace(b, t_end, m_test)
        if deriv_mode == "central_difference":
            raise UnsupportedError(
                "central differences need one contiguous grid; use a fraction split")
        full = None
    else:
        full = _draw_times(t0, t_end, spec.m, spec)
        n_train = spec.m_train if spec.m_train is not None \
            else int(np.ceil(spec.train_fraction * spec.m))
        if not 1 < n_train < spec.m:
            raise ParameterError("train split leaves an empty window")
        t_train, t_test = full[:n_train], full[n_train:]

    def build(times, prev_times=None, prev_states=None):
        states = sol.eval(times)
        derivs = None
        if deriv_mode == "exact_rhs":
            derivs = _exact_derivs(system, sol, times)
        u = None
        if system is not None and system.input is not None:
            u = np.array([system.input(t) for t in times])
        return Trajectory(times=times, states=states, derivs=derivs, input=u,
                          history_times=prev_times, history_states=prev_states,
                          source=sol, meta={"label": label, "seed": spec.seed,
                                            "deriv_mode": deriv_mode})

    span = sol.history.span if sol.history is not None else 0.0
    hist_t, hist_x = _history_grid(sol, t_train, span)
    train = build(t_train, hist_t, hist_x)
    if deriv_mode == "central_difference":
        derivs_full = _central_diff(full, sol.eval(full))
        train.derivs = derivs_full[:t_train.size]
    # the test trajectory's pre-window grid is everything recorded before it
    pre_t = np.concatenate([hist_t, t_train]) if hist_t is not None else t_train
    pre_x = np.vstack([hist_x, train.states]) if hist_t is not None else train.states
    keep = pre_t < t_test[0]
    test = build(t_test, pre_t[keep], pre_x[keep])
    if deriv_mode == "central_difference":
        test.derivs = derivs_full[t_train.size:]
    return train, test


def _draw_times(lo, hi, m, spec):
    if spec.sampling == "uniform":
        return np.linspace(lo, hi, m)
    rng = np.random.default_rng(spec.seed)
    inner = np.sort(rng.uniform(lo, hi, size=m - 2))
    return np.concatenate([[lo], inner, [hi]])


def _history_grid(sol, t_train, span):
    if span <= 0.0:
        return None, None
    t0 = sol.t0
    dt = np.diff(t_train)
    uniform = dt.size and np.max(np.abs(dt - dt[0])) <= 1e-9 * dt[0]
    step = dt[0] if uniform else span / 64.0
    n_back = int(np.ceil(span / step - 1e-9))
    times = t0 - step * np.arange(n_back, 0, -1)
    times = times[times >= t0 - span - 1e-12]
    states = sol.eval(times) if times.size else np.zeros((0, sol.dim))
    return times, states


def delayed_states(traj: Trajectory, tau: float) -> np.ndarray:
    """Matrix of delayed samples x(t_i - tau), one row per sample time."""
    if tau < 0:
        raise DomainError("delay must be non-negative")
    if tau == 0.0:
        return traj.states.copy()
    query = traj.times - tau
    if traj.source is not None:
        lo = traj.source.t0 - (traj.source.history.span if traj.source.history else 0.0)
        if query[0] < lo - 1e-9:
            raise DomainError(
                f"delay {tau:.6g} reaches before the recorded history (t = {query[0]:.6g})")
        return traj.source.eval(query)
    grid_t, grid_x = traj.grid()
    if query[0] < grid_t[0] - 1e-9 or query[-1] > grid_t[-1] + 1e-9:
        raise DomainError(f"delay {tau:.6g} leaves the recorded grid")
    out = np.empty((query.size, traj.dim))
    for j in range(traj.dim):
        out[:, j] = np.interp(query, grid_t, grid_x[:, j])
    return out


def collocated_states(traj: Trajectory, scheme) -> list:
    """Shifted sample blocks x(t_i + s_j) for every collocation node s_j."""
    return [delayed_states(traj, -float(s)) for s in scheme.nodes]


def rmse(a, b) -> float:
    """Entrywise root-mean-square difference of two equal-shape arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ParameterError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def write_trajectory_csv(traj: Trajectory, path):
    """Write a trajectory as CSV: t,x1..xn[,dx1..dxn][,u]; history rows have t < t0."""
    n = traj.dim
    cols = ["t"] + [f"x{i+1}" for i in range(n)]
    if traj.derivs is not None:
        cols += [f"dx{i+1}" for i in range(n)]
    if traj.input is not None:
        cols += ["u"]
    lines = [f"# t0={traj.times[0]!r}", ",".join(cols)]
    if traj.history_times is not None:
        for t, x in zip(traj.history_times, traj.history_states):
            row = [repr(float(t))] + [repr(float(v)) for v in x]
            if traj.derivs is not None:
                row += [""] * n
            if traj.input is not None:
                row += [""]
            lines.append(",".join(row))
    for i, t in enumerate(traj.times):
        row = [repr(float(t))] + [repr(float(v)) for v in traj.states[i]]
        if traj.derivs is not None:
            row += [repr(float(v)) for v in traj.derivs[i]]
        if traj.input is not None:
            row += [repr(float(traj.input[i]))]
        lines.append(",".join(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trajectory_csv(path) -> Trajectory:
    """Read a trajectory written by :func:`write_trajectory_csv`."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    t0 = None
    if lines and lines[0].startswith("#"):
        head = lines.pop(0)
        if "t0=" in head:
            t0 = float(head.split("t0=", 1)[1])
    header = lines.pop(0).split(",")
    n = sum(1 for c in header if c.startswith("x"))
    has_d = any(c.startswith("dx") for c in header)
    has_u = header[-1] == "u"
    rows = [ln.split(",") for ln in lines]
    t = np.array([float(r[0]) for r in rows])
    if t0 is None:
        t0 = t[0] if np.all(t >= 0) else 0.0
    main = t >= t0 - 1e-12
    x = np.array([[float(v) for v in r[1:1 + n]] for r in rows])
    derivs = None
    if has_d:
        derivs = np.array([[float(v) if v else np.nan for v in r[1 + n:1 + 2 * n]]
                           for r in rows])[main]
    u = None
    if has_u:
        u = np.array([float(r[-1]) if r[-1] else np.nan for r in rows])[main]
    hist = ~main
    return Trajectory(times=t[main], states=x[main], derivs=derivs, input=u,
                      history_times=t[hist] if hist.any() else None,
                      history_states=x[hist] if hist.any() else None)
