"""Benchmark delay systems and history functions.

Five systems are provided: the delay logistic (Hutchinson) equation, the
Mackey-Glass equation, a two-neuron network with three delays, a delayed
climate (thermocline) model with seasonal forcing, and a double-delayed
Rossler system.  Each factory returns an immutable :class:`DdeSystem`
whose right-hand side receives one delayed state per distinct delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, ParameterError

__all__ = [
    "HistorySpec",
    "DdeSystem",
    "make_logistic",
    "make_mackey_glass",
    "make_two_neuron",
    "make_climate",
    "make_rossler",
    "climate_saturation",
    "eval_history",
    "MODEL_IDS",
    "nominal_params",
]


@dataclass(frozen=True)
class HistorySpec:
    """Initial history on ``[-span, 0]``.

    kind is one of ``constant`` (fixed vector), ``cosine`` (componentwise
    cos(s)) or ``sampled`` (piecewise-linear through the given samples;
    cubic Hermite when derivative samples are attached).
    """

    kind: str
    span: float
    dim: int = 1
    values: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None
    derivs: Optional[np.ndarray] = None

    @staticmethod
    def constant(values, span):
        values = np.atleast_1d(np.asarray(values, dtype=float))
        return HistorySpec(kind="constant", span=float(span), dim=values.size, values=values)

    @staticmethod
    def cosine(span, dim=1):
        return HistorySpec(kind="cosine", span=float(span), dim=int(dim))

    @staticmethod
    def sampled(times, samples, derivs=None):
        times = np.asarray(times, dtype=float)
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        if samples.shape[0] != times.size:
            samples = samples.T
        if times.size < 2 or np.any(np.diff(times) <= 0):
            raise ParameterError("sampled history needs >= 2 strictly ascending times")
        if times[-1] < 0.0:
            raise ParameterError("sampled history must reach s = 0")
        if derivs is not None:
            derivs = np.atleast_2d(np.asarray(derivs, dtype=float))
            if derivs.shape != samples.shape:
                raise ParameterError("derivative samples must match the state samples")
        return HistorySpec(
            kind="sampled",
            span=float(-times[0]),
            dim=samples.shape[1],
            times=times,
            samples=samples,
            derivs=derivs,
        )

    def eval(self, s):
        """State at ``s`` in ``[-span, 0]``."""
        s = float(s)
        tol = 1e-9 * max(self.span, 1.0)
        if s > tol or s < -self.span - tol:
            raise DomainError(f"history evaluated at s = {s:.6g} outside [-{self.span:.6g}, 0]")
        s = min(0.0, max(-self.span, s))
        if self.kind == "constant":
            return self.values.copy()
        if self.kind == "cosine":
            return np.full(self.dim, math.cos(s))
        return _sampled_eval(self, s, derivative=False)

    def deriv(self, s):
        """Time derivative of the history at ``s``."""
        s = float(s)
        tol = 1e-9 * max(self.span, 1.0)
        if s > tol or s < -self.span - tol:
            raise DomainError(f"history derivative at s = {s:.6g} outside [-{self.span:.6g}, 0]")
        s = min(0.0, max(-self.span, s))
        if self.kind == "constant":
            return np.zeros(self.dim)
        if self.kind == "cosine":
            return np.full(self.dim, -math.sin(s))
        return _sampled_eval(self, s, derivative=True)


def _sampled_eval(h, s, derivative):
    t = h.times
    i = int(np.searchsorted(t, s, side="right")) - 1
    i = min(max(i, 0), t.size - 2)
    dt = t[i + 1] - t[i]
    th = (s - t[i]) / dt
    if h.derivs is None:
        if derivative:
            return (h.samples[i + 1] - h.samples[i]) / dt
        return (1.0 - th) * h.samples[i] + th * h.samples[i + 1]
    y0, y1 = h.samples[i], h.samples[i + 1]
    d0, d1 = h.derivs[i], h.derivs[i + 1]
    if derivative:
        h00 = (6 * th * th - 6 * th) / dt
        h10 = 3 * th * th - 4 * th + 1
        h01 = (-6 * th * th + 6 * th) / dt
        h11 = 3 * th * th - 2 * th
        return h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1
    h00 = 2 * th**3 - 3 * th**2 + 1
    h10 = (th**3 - 2 * th**2 + th) * dt
    h01 = -2 * th**3 + 3 * th**2
    h11 = (th**3 - th**2) * dt
    return h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1


def eval_history(history, s):
    """Functional form of :meth:`HistorySpec.eval`."""
    return history.eval(s)


@dataclass(frozen=True)
class DdeSystem:
    """A DDE with discrete delays, executable as a right-hand side.

    ``rhs(t, x, delayed, u)`` receives the current state, one delayed
    state per entry of ``delays`` (ascending, strictly positive), and the
    exogenous input value (None when the system has no input).
    """

    dim: int
    delays: np.ndarray
    rhs: Callable[..., np.ndarray]
    input: Optional[Callable[[float], float]] = None
    label: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        delays = np.asarray(self.delays, dtype=float)
        object.__setattr__(self, "delays", delays)
        if delays.size and (np.any(delays <= 0) or np.any(np.diff(delays) < 0)):
            raise ParameterError("delays must be strictly positive and sorted ascending")

    @property
    def tau_max(self):
        return float(self.delays[-1]) if self.delays.size else 0.0

    def __call__(self, t, x, delayed, u=None):
        return self.rhs(t, x, delayed, u)


def _require_positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0:
            raise ParameterError(f"parameter {name} must be positive, got {value}")


def make_logistic(r, K, tau):
    """Delay logistic equation x' = r x (1 - x(t-tau)/K)."""
    _require_positive(r=r, K=K, tau=tau)

    def rhs(t, x, delayed, u=None):
        return r * x * (1.0 - delayed[0] / K)

    return DdeSystem(dim=1, delays=np.array([tau]), rhs=rhs, label="logistic",
                     params={"r": r, "K": K, "tau": tau})


def make_mackey_glass(beta, gamma, alpha, tau):
    """Mackey-Glass equation x' = beta x_tau / (1 + x_tau^alpha) - gamma x."""
    _require_positive(beta=beta, gamma=gamma, alpha=alpha, tau=tau)

    def rhs(t, x, delayed, u=None):
        xd = delayed[0]
        return beta * xd / (1.0 + xd**alpha) - gamma * x

    return DdeSystem(dim=1, delays=np.array([tau]), rhs=rhs, label="mackey_glass",
                     params={"beta": beta, "gamma": gamma, "alpha": alpha, "tau": tau})


def make_two_neuron(kappa, beta, a12, a21, tau_s, tau1, tau2):
    """Two coupled neurons with self-feedback delay tau_s and cross delays tau1, tau2.

    The stored delay list is the sorted deduplicated set of the three
    delays; the rhs maps each role back to its distinct entry.
    """
    _require_positive(kappa=kappa, tau_s=tau_s, tau1=tau1, tau2=tau2)
    distinct = sorted(set((float(tau_s), float(tau1), float(tau2))))
    idx_s = distinct.index(float(tau_s))
    idx_1 = distinct.index(float(tau1))
    idx_2 = distinct.index(float(tau2))

    def rhs(t, x, delayed, u=None):
        xs = delayed[idx_s]
        x1d = delayed[idx_1]
        x2d = delayed[idx_2]
        return np.array([
            -kappa * x[0] + beta * np.tanh(xs[0]) + a12 * np.tanh(x2d[1]),
            -kappa * x[1] + beta * np.tanh(xs[1]) + a21 * np.tanh(x1d[0]),
        ])

    return DdeSystem(dim=2, delays=np.array(distinct), rhs=rhs, label="two_neuron",
                     params={"kappa": kappa, "beta": beta, "a12": a12, "a21": a21,
                             "tau_s": tau_s, "tau1": tau1, "tau2": tau2})


def climate_saturation(kappa, x, d_u, d_l):
    """Piecewise tanh saturation with upper/lower limits d_u and d_l.

    Continuous at 0 with slope kappa on both branches.
    """
    x = np.asarray(x, dtype=float)
    up = d_u * np.tanh((kappa / d_u) * x)
    lo = d_l * np.tanh((kappa / d_l) * x)
    return np.where(x >= 0, up, lo)


def make_climate(a, b, c, kappa, d_u, d_l, tau1, tau2):
    """Thermocline-depth model with delayed feedbacks and seasonal forcing.

    x' = a A(kappa, x(t-tau1)) - b A(kappa, x(t-tau2)) + c u(t) with
    u(t) = cos(2 pi t) attached as the exogenous input.
    """
    _require_positive(a=a, b=b, c=c, kappa=kappa, tau1=tau1, tau2=tau2)
    if not (d_u > 0 and d_l < 0):
        raise ParameterError("saturation limits require d_u > 0 and d_l < 0")
    if not tau1 < tau2:
        raise ParameterError("climate model expects tau1 < tau2")

    def forcing(t):
        return math.cos(2.0 * math.pi * t)

    def rhs(t, x, delayed, u=None):
        if u is None:
            u = forcing(t)
        fb1 = climate_saturation(kappa, delayed[0], d_u, d_l)
        fb2 = climate_saturation(kappa, delayed[1], d_u, d_l)
        return a * fb1 - b * fb2 + c * u

    return DdeSystem(dim=1, delays=np.array([tau1, tau2]), rhs=rhs, input=forcing,
                     label="climate",
                     params={"a": a, "b": b, "c": c, "kappa": kappa, "d_u": d_u,
                             "d_l": d_l, "tau1": tau1, "tau2": tau2})


def make_rossler(alpha1, alpha2, beta1, beta2, gamma, tau1, tau2):
    """Double-delayed Rossler system; the delays enter only the first state."""
    _require_positive(gamma=gamma, tau1=tau1, tau2=tau2)
    if not tau1 < tau2:
        raise ParameterError("rossler model expects tau1 < tau2")

    def rhs(t, x, delayed, u=None):
        x1_t1 = delayed[0][0]
        x1_t2 = delayed[1][0]
        return np.array([
            -x[1] - x[2] + alpha1 * x1_t1 + alpha2 * x1_t2,
            x[0] + beta1 * x[1],
            beta2 + x[2] * x[0] - gamma * x[2],
        ])

    return DdeSystem(dim=3, delays=np.array([tau1, tau2]), rhs=rhs, label="rossler",
                     params={"alpha1": alpha1, "alpha2": alpha2, "beta1": beta1,
                             "beta2": beta2, "gamma": gamma, "tau1": tau1, "tau2": tau2})


# Nominal benchmark parameter sets used throughout the bundled experiments.
_NOMINAL = {
    "logistic": {"r": 1.8, "K": 1.0, "tau": 1.0},
    "mackey_glass": {"beta": 4.0, "gamma": 2.0, "alpha": 9.6, "tau": 1.0},
    "two_neuron": {"kappa": 0.5, "beta": -1.0, "a12": 1.0, "a21": 2.0,
                   "tau_s": 1.5, "tau1": 2.0, "tau2": 2.0},
    "climate": {"a": 2.02, "b": 3.03, "c": 2.6377, "kappa": 11.0,
                "d_u": 2.0, "d_l": -0.4, "tau1": 0.0958, "tau2": 0.4792},
    "rossler": {"alpha1": 0.2, "alpha2": 1.0, "beta1": 0.2, "beta2": 0.2,
                "gamma": 1.2, "tau1": 1.0, "tau2": 2.0},
}

_FACTORIES = {
    "logistic": make_logistic,
    "mackey_glass": make_mackey_glass,
    "two_neuron": make_two_neuron,
    "climate": make_climate,
    "rossler": make_rossler,
}

MODEL_IDS = tuple(_FACTORIES)


def nominal_params(model_id):
    """Nominal parameter set for a benchmark model id."""
    if model_id not in _NOMINAL:
        raise ParameterError(f"unknown model id {model_id!r}; known: {sorted(_NOMINAL)}")
    return dict(_NOMINAL[model_id])


def make_system(model_id, **params):
    """Build a benchmark system by id, filling unspecified parameters with nominal values."""
    if model_id not in _FACTORIES:
        raise ParameterError(f"unknown model id {model_id!r}; known: {sorted(_FACTORIES)}")
    full = nominal_params(model_id)
    for key, value in params.items():
        if key not in full:
            raise ParameterError(f"model {model_id!r} has no parameter {key!r}")
        full[key] = value
    return _FACTORIES[model_id](**full)
