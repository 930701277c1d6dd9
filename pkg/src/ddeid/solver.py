"""Fixed-step integrators with dense output.

DDEs are integrated by the method of steps: classical RK4 where every
delayed state is read from the already-computed part of the solution
(cubic Hermite inside segments, the history function before t0).  The
step is required to stay below one tenth of the smallest delay so that
stage lookups never touch the step in progress.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, DomainError, ParameterError
from .models import DdeSystem, HistorySpec

__all__ = ["SolveConfig", "DenseSolution", "solve_dde", "solve_ode",
           "eval_solution", "eval_derivative"]


@dataclass(frozen=True)
class SolveConfig:
    """Fixed-step solve settings; the only method is classical RK4."""

    step: float
    t_end: float
    t_start: float = 0.0
    method: str = "rk4"

    def __post_init__(self):
        if not self.step > 0:
            raise ParameterError("step must be positive")
        if self.method != "rk4":
            raise ParameterError(f"unknown method {self.method!r}")
        if not self.t_end > self.t_start:
            raise ParameterError("t_end must exceed t_start")


class DenseSolution:
    """Contiguous grid of (state, derivative) pairs with Hermite evaluation.

    Evaluable on ``[t0 - history.span, times[-1]]``; queries before t0
    defer to the attached history.
    """

    def __init__(self, times, states, derivs, history: Optional[HistorySpec] = None):
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=float)
        self.derivs = np.asarray(derivs, dtype=float)
        self.history = history
        if self.states.ndim == 1:
            self.states = self.states[:, None]
            self.derivs = self.derivs[:, None]

    @property
    def t0(self):
        return float(self.times[0])

    @property
    def t_end(self):
        return float(self.times[-1])

    @property
    def dim(self):
        return self.states.shape[1]

    def _check_range(self, t):
        lo = self.t0 - (self.history.span if self.history is not None else 0.0)
        tol = 1e-9 * max(1.0, abs(self.t_end))
        if t < lo - tol or t > self.t_end + tol:
            raise DomainError(f"t = {t:.6g} outside solution range [{lo:.6g}, {self.t_end:.6g}]")

    def _segment(self, t):
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return min(max(i, 0), self.times.size - 2)

    def eval(self, t):
        """State vector at time t (array-valued t allowed)."""
        if np.ndim(t) > 0:
            return np.stack([self.eval(ti) for ti in np.asarray(t, dtype=float)])
        t = float(t)
        self._check_range(t)
        if t < self.t0:
            return self.history.eval(t - self.t0)
        i = self._segment(t)
        if t == self.times[i]:
            return self.states[i].copy()
        if t == self.times[i + 1]:
            return self.states[i + 1].copy()
        return _hermite(self.times[i], self.times[i + 1],
                        self.states[i], self.states[i + 1],
                        self.derivs[i], self.derivs[i + 1], t, derivative=False)

    def eval_derivative(self, t):
        """Time derivative at t (Hermite derivative inside segments)."""
        if np.ndim(t) > 0:
            return np.stack([self.eval_derivative(ti) for ti in np.asarray(t, dtype=float)])
        t = float(t)
        self._check_range(t)
        if t < self.t0:
            return self.history.deriv(t - self.t0)
        i = self._segment(t)
        if t == self.times[i]:
            return self.derivs[i].copy()
        if t == self.times[i + 1]:
            return self.derivs[i + 1].copy()
        return _hermite(self.times[i], self.times[i + 1],
                        self.states[i], self.states[i + 1],
                        self.derivs[i], self.derivs[i + 1], t, derivative=True)


def _hermite(ta, tb, ya, yb, da, db, t, derivative):
    h = tb - ta
    th = (t - ta) / h
    if derivative:
        c00 = (6 * th * th - 6 * th) / h
        c10 = 3 * th * th - 4 * th + 1
        c01 = (-6 * th * th + 6 * th) / h
        c11 = 3 * th * th - 2 * th
        return c00 * ya + c10 * da + c01 * yb + c11 * db
    c00 = 2 * th**3 - 3 * th**2 + 1
    c10 = (th**3 - 2 * th**2 + th) * h
    c01 = -2 * th**3 + 3 * th**2
    c11 = (th**3 - th**2) * h
    return c00 * ya + c10 * da + c01 * yb + c11 * db


def eval_solution(sol: DenseSolution, t):
    return sol.eval(t)


def eval_derivative(sol: DenseSolution, t):
    return sol.eval_derivative(t)


def _grid(cfg: SolveConfig):
    n_steps = int(np.ceil((cfg.t_end - cfg.t_start) / cfg.step - 1e-9))
    times = cfg.t_start + cfg.step * np.arange(n_steps + 1)
    times[-1] = cfg.t_end
    return times


def solve_dde(sys: DdeSystem, history: HistorySpec, cfg: SolveConfig) -> DenseSolution:
    """Integrate a DDE by the method of steps with RK4 and dense output."""
    delays = sys.delays
    if delays.size == 0:
        raise ParameterError("solve_dde requires at least one delay; use solve_ode")
    tau_min = float(delays.min())
    if cfg.step > tau_min / 10.0 * (1.0 + 1e-12):
        raise ParameterError(
            f"step {cfg.step:.6g} exceeds tau_min/10 = {tau_min / 10.0:.6g}")
    if history.span < sys.tau_max - 1e-12:
        raise DomainError(
            f"history span {history.span:.6g} shorter than max delay {sys.tau_max:.6g}")
    if history.dim != sys.dim:
        raise ParameterError("history dimension does not match the system")

    times = _grid(cfg)
    n = sys.dim
    states = np.empty((times.size, n))
    derivs = np.empty((times.size, n))
    t0 = cfg.t_start

    def lookup(t, k_done):
        # k_done = number of completed grid points; lookups never enter the step in progress
        if t < t0:
            return history.eval(t - t0)
        i = int(np.searchsorted(times[:k_done], t, side="right")) - 1
        i = min(max(i, 0), k_done - 2)
        if t == times[i]:
            return states[i]
        return _hermite(times[i], times[i + 1], states[i], states[i + 1],
                        derivs[i], derivs[i + 1], t, derivative=False)

    def full_rhs(t, x, k_done):
        delayed = tuple(lookup(t - tau, k_done) for tau in delays)
        u = sys.input(t) if sys.input is not None else None
        return np.asarray(sys.rhs(t, x, delayed, u), dtype=float)

    states[0] = history.eval(0.0)
    derivs[0] = full_rhs(times[0], states[0], 1)
    for k in range(times.size - 1):
        t, x = times[k], states[k]
        h = times[k + 1] - t
        k1 = derivs[k]
        k2 = full_rhs(t + h / 2, x + (h / 2) * k1, k + 1)
        k3 = full_rhs(t + h / 2, x + (h / 2) * k2, k + 1)
        k4 = full_rhs(t + h, x + h * k3, k + 1)
        x_new = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(times[k + 1])
        states[k + 1] = x_new
        derivs[k + 1] = full_rhs(times[k + 1], x_new, k + 2)
        if not np.all(np.isfinite(derivs[k + 1])):
            raise DivergenceError(times[k + 1])
    return DenseSolution(times, states, derivs, history=history)


def solve_ode(rhs: Callable, x0, cfg: SolveConfig) -> DenseSolution:
    """Integrate x' = rhs(t, x) with fixed-step RK4 and dense output."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not np.all(np.isfinite(x0)):
        raise ParameterError("initial state must be finite")
    times = _grid(cfg)
    states = np.empty((times.size, x0.size))
    derivs = np.empty_like(states)
    states[0] = x0
    derivs[0] = np.asarray(rhs(times[0], x0), dtype=float)
    for k in range(times.size - 1):
        t, x = times[k], states[k]
        h = times[k + 1] - t
        k1 = derivs[k]
        k2 = np.asarray(rhs(t + h / 2, x + (h / 2) * k1), dtype=float)
        k3 = np.asarray(rhs(t + h / 2, x + (h / 2) * k2), dtype=float)
        k4 = np.asarray(rhs(t + h, x + h * k3), dtype=float)
        x_new = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(times[k + 1])
        states[k + 1] = x_new
        derivs[k + 1] = np.asarray(rhs(times[k + 1], x_new), dtype=float)
        if not np.all(np.isfinite(derivs[k + 1])):
            raise DivergenceError(times[k + 1])
    return DenseSolution(times, states, derivs, history=None)
