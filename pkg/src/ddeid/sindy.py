"""The two identification pipelines and their replay-based evaluation.

The delay-augmented route regresses sampled derivatives onto a library
over current and delayed states and yields an executable DDE; the
collocation route regresses the same derivatives onto a library over
collocated node states and yields the first block of an executable ODE
system.  Both expose the reconstruction error as a function of the
candidate delays, which external optimizers minimize.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import library as lib
from .collocation import CollocationScheme, make_scheme, restrict, stable_step
from .data import Trajectory, collocated_states, delayed_states, rmse
from .errors import DivergenceError, DomainError, ParameterError
from .models import DdeSystem, HistorySpec
from .regression import RegressionConfig, SparseCoefficients, solve
from .solver import DenseSolution, SolveConfig, solve_dde, solve_ode

__all__ = ["SparseModel", "FitReport", "esindy_fit", "psindy_fit",
           "simulate_esindy", "simulate_psindy", "evaluate",
           "history_from_solution"]


@dataclass
class SparseModel:
    """Sparse coefficients plus the library/delay metadata to execute them."""

    kind: str                       # esindy | psindy
    coeffs: SparseCoefficients
    spec: lib.LibrarySpec
    n_state: int
    delays: Optional[np.ndarray] = None
    scheme: Optional[CollocationScheme] = None
    hill_alpha: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("esindy", "psindy"):
            raise ParameterError(f"unknown model kind {self.kind!r}")
        if self.kind == "esindy":
            if self.delays is None:
                raise ParameterError("delay-augmented model needs its delay vector")
            self.delays = np.asarray(self.delays, dtype=float)
            if self.spec.n_blocks != 1 + self.delays.size:
                raise ParameterError("library blocks must be 1 + number of delays")
        else:
            if self.scheme is None:
                raise ParameterError("collocated model needs its scheme")
            if self.spec.n_blocks != self.scheme.n_nodes:
                raise ParameterError("library blocks must match the node count")

    def coefficient(self, label: str, state: int = 0) -> float:
        labels = list(lib.column_labels(self.spec))
        if label not in labels:
            raise ParameterError(f"no library column labeled {label!r}")
        return float(self.coeffs.values[labels.index(label), state])

    def nonzero_terms(self):
        labels = lib.column_labels(self.spec)
        out = {}
        for j, lab in enumerate(labels):
            row = self.coeffs.values[j]
            if np.any(row != 0.0):
                out[lab] = row.copy()
        return out


@dataclass
class FitReport:
    """Error summary for one fitted model (one row of a benchmark table)."""

    rmse_deriv_train: float
    rmse_deriv_test: float
    rmse_traj_test: float
    recovered: dict
    calls: int = 0
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)


def _require_derivs(traj: Trajectory):
    if traj.derivs is None:
        raise ParameterError("trajectory has no derivative channel")


def esindy_fit(train: Trajectory, delays, spec: lib.LibrarySpec,
               reg: RegressionConfig):
    """Fit a delay-augmented sparse model; returns (model, reconstruction error)."""
    _require_derivs(train)
    delays = np.asarray(delays, dtype=float)
    blocks = [train.states] + [delayed_states(train, tau) for tau in delays]
    theta = lib.build(spec, blocks)
    coeffs = solve(theta, train.derivs, reg)
    err = rmse(train.derivs, theta.values @ coeffs.values)
    model = SparseModel(kind="esindy", coeffs=coeffs, spec=spec,
                        n_state=train.dim, delays=delays,
                        hill_alpha=spec.hill.alpha if spec.hill else None)
    return model, err


def psindy_fit(train: Trajectory, tau_max: float, order: int,
               spec: lib.LibrarySpec, reg: RegressionConfig):
    """Fit the first block of the collocated system; returns (model, error)."""
    _require_derivs(train)
    scheme = make_scheme(order, tau_max)
    theta = lib.build(spec, collocated_states(train, scheme))
    coeffs = solve(theta, train.derivs, reg)
    err = rmse(train.derivs, theta.values @ coeffs.values)
    model = SparseModel(kind="psindy", coeffs=coeffs, spec=spec,
                        n_state=train.dim, scheme=scheme,
                        hill_alpha=spec.hill.alpha if spec.hill else None)
    return model, err


def residual_rmse(model: SparseModel, traj: Trajectory) -> float:
    """Reconstruction error of a fitted model on (another) trajectory."""
    _require_derivs(traj)
    if model.kind == "esindy":
        blocks = [traj.states] + [delayed_states(traj, tau) for tau in model.delays]
    else:
        blocks = collocated_states(traj, model.scheme)
    theta = lib.build(model.spec, blocks)
    return rmse(traj.derivs, theta.values @ model.coeffs.values)


def as_dde_system(model: SparseModel) -> DdeSystem:
    """Wrap a delay-augmented model as an executable DDE."""
    if model.kind != "esindy":
        raise ParameterError("only delay-augmented models execute as DDEs")
    delays = model.delays
    order = np.argsort(delays, kind="stable")
    inverse = np.argsort(order)
    xi = model.coeffs.values
    spec = model.spec

    def rhs(t, x, delayed, u=None):
        parts = [x] + [delayed[inverse[r]] for r in range(delays.size)]
        return lib.eval_model_rhs(xi, spec, np.concatenate(parts))

    return DdeSystem(dim=model.n_state, delays=delays[order], rhs=rhs,
                     label="sparse-dde")


def simulate_esindy(model: SparseModel, history: HistorySpec, t_end: float,
                    step: Optional[float] = None, t_start: float = 0.0) -> DenseSolution:
    """Integrate the fitted DDE forward from the given history."""
    sys = as_dde_system(model)
    h = step or min(float(np.min(sys.delays)) / 10.0, 0.01)
    return solve_dde(sys, history, SolveConfig(step=h, t_end=t_end, t_start=t_start))


def simulate_psindy(model: SparseModel, history: HistorySpec, t_end: float,
                    step: Optional[float] = None, t_start: float = 0.0) -> DenseSolution:
    """Integrate the collocated system; returns the physical (block 0) component."""
    if model.kind != "psindy":
        raise ParameterError("not a collocated model")
    scheme = model.scheme
    n = model.n_state
    u0 = restrict(scheme, history).ravel()
    xi = model.coeffs.values
    spec = model.spec
    dmat = scheme.diff

    def rhs(t, u):
        mat = u.reshape(scheme.n_nodes, n)
        first = lib.eval_columns(spec, u.reshape(1, -1))[0] @ xi
        return np.concatenate([first, (dmat @ mat).ravel()])

    h = step or min(0.005, stable_step(scheme))
    sol = solve_ode(rhs, u0, SolveConfig(step=h, t_end=t_end, t_start=t_start))
    return DenseSolution(sol.times, sol.states[:, :n], sol.derivs[:, :n],
                         history=history)


def simulate(model: SparseModel, history: HistorySpec, t_end: float,
             step: Optional[float] = None, t_start: float = 0.0) -> DenseSolution:
    if model.kind == "esindy":
        return simulate_esindy(model, history, t_end, step=step, t_start=t_start)
    return simulate_psindy(model, history, t_end, step=step, t_start=t_start)


def history_from_solution(sol: DenseSolution, anchor: float, span: float) -> HistorySpec:
    """Sampled history over [anchor - span, anchor] carrying Hermite data."""
    lo = anchor - span
    inner = sol.times[(sol.times > lo + 1e-12) & (sol.times < anchor - 1e-12)]
    times = np.concatenate([[lo], inner, [anchor]])
    values = sol.eval(times)
    derivs = sol.eval_derivative(times)
    return HistorySpec.sampled(times - anchor, values, derivs)


def replay_history(model_span: float, test: Trajectory) -> HistorySpec:
    """History for restarting a model at the test-window boundary."""
    anchor = float(test.times[0])
    if test.source is not None:
        return history_from_solution(test.source, anchor, model_span)
    if test.history_times is None:
        raise DomainError("test trajectory carries no pre-window data")
    keep = test.history_times >= anchor - model_span - 1e-9
    times = np.concatenate([test.history_times[keep], [anchor]])
    values = np.vstack([test.history_states[keep], test.states[:1]])
    return HistorySpec.sampled(times - anchor, values)


def evaluate(model: SparseModel, train: Trajectory, test: Trajectory,
             step: Optional[float] = None) -> FitReport:
    """Error report: derivative residuals plus the test-window replay error.

    The replay restarts at the first test sample using the data before
    it as history and compares simulated states at the test times.
    """
    span = float(np.max(model.delays)) if model.kind == "esindy" \
        else model.scheme.tau_max
    err_train = residual_rmse(model, train)
    err_test = residual_rmse(model, test)
    anchor = float(test.times[0])
    try:
        history = replay_history(span, test)
        sol = simulate(model, history, t_end=float(test.times[-1]),
                       step=step, t_start=anchor)
        err_traj = rmse(test.states, sol.eval(test.times))
    except DivergenceError:
        err_traj = math.inf
    recovered = {"coefficients": model.nonzero_terms()}
    if model.kind == "esindy":
        recovered["delays"] = list(map(float, model.delays))
    else:
        recovered["tau_max"] = model.scheme.tau_max
    if model.hill_alpha is not None:
        recovered["alpha"] = float(model.hill_alpha)
    return FitReport(rmse_deriv_train=err_train, rmse_deriv_test=err_test,
                     rmse_traj_test=err_traj, recovered=recovered)
