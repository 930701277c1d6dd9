"""Chebyshev pseudospectral machinery on [-tau_max, 0].

Extremal nodes, barycentric interpolation, the differentiation matrix of
the Lagrange basis, and assembly of the collocated ODE approximating a
DDE: block 0 carries the right-hand side evaluated on interpolated node
values, the remaining blocks carry the differentiation action.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .models import HistorySpec

__all__ = ["CollocationScheme", "make_scheme", "interpolate", "interp_weights",
           "restrict", "collocated_rhs", "stable_step"]


@dataclass(frozen=True)
class CollocationScheme:
    """Chebyshev extremal nodes with differentiation and interpolation data.

    nodes run from 0 down to -tau_max; diff holds the derivative of the
    interpolating polynomial at nodes 1..order (rows) from values at all
    nodes (columns).
    """

    order: int
    tau_max: float
    nodes: np.ndarray
    diff: np.ndarray
    bary_weights: np.ndarray

    @property
    def n_nodes(self):
        return self.order + 1


def make_scheme(order: int, tau_max: float) -> CollocationScheme:
    """Nodes s_i = (tau_max/2)(cos(i pi / order) - 1) and the differentiation matrix."""
    if order < 1:
        raise ParameterError("collocation order must be at least 1")
    if not tau_max > 0:
        raise ParameterError("tau_max must be positive")
    m = order
    i = np.arange(m + 1)
    nodes = 0.5 * tau_max * (np.cos(i * np.pi / m) - 1.0)
    nodes[0] = 0.0
    nodes[-1] = -tau_max
    weights = np.where(i % 2 == 0, 1.0, -1.0)
    weights[0] *= 0.5
    weights[-1] *= 0.5
    # barycentric differentiation: D_ij = (w_j/w_i)/(s_i-s_j), rows sum to zero
    diff_full = np.zeros((m + 1, m + 1))
    for r in range(m + 1):
        for c in range(m + 1):
            if r != c:
                diff_full[r, c] = (weights[c] / weights[r]) / (nodes[r] - nodes[c])
        diff_full[r, r] = -np.sum(diff_full[r])
    return CollocationScheme(order=m, tau_max=float(tau_max), nodes=nodes,
                             diff=diff_full[1:], bary_weights=weights)


def interp_weights(scheme: CollocationScheme, s: float) -> np.ndarray:
    """Row vector w with w @ U = value of the interpolant at s."""
    s = float(s)
    tol = 1e-12 * max(1.0, scheme.tau_max)
    if s > tol or s < -scheme.tau_max - tol:
        raise DomainError(f"interpolation point {s:.6g} outside [-{scheme.tau_max:.6g}, 0]")
    diffs = s - scheme.nodes
    hit = np.abs(diffs) < 1e-14 * max(1.0, scheme.tau_max)
    out = np.zeros(scheme.n_nodes)
    if hit.any():
        out[np.argmax(hit)] = 1.0
        return out
    terms = scheme.bary_weights / diffs
    return terms / terms.sum()


def interpolate(scheme: CollocationScheme, values, s: float) -> np.ndarray:
    """Barycentric Lagrange evaluation of node values at s in [-tau_max, 0]."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != scheme.n_nodes:
        raise ParameterError("need one value row per node")
    return interp_weights(scheme, s) @ values


def restrict(scheme: CollocationScheme, history: HistorySpec) -> np.ndarray:
    """Node-wise evaluation of a history function, shape (order+1, n)."""
    if history.span < scheme.tau_max - 1e-12:
        raise DomainError("history span does not cover the collocation interval")
    return np.vstack([history.eval(s) for s in scheme.nodes])


def collocated_rhs(scheme: CollocationScheme, f_block, delays, values) -> np.ndarray:
    """Time derivative of the collocated state.

    f_block(current, delayed_list) supplies the first block; the rest is
    the differentiation matrix applied to the node values.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    for tau in delays:
        if tau > scheme.tau_max + 1e-12:
            raise DomainError(f"delay {tau:.6g} exceeds the collocation span")
    current = values[0]
    delayed = [interpolate(scheme, values, -float(tau)) for tau in delays]
    out = np.empty_like(values)
    out[0] = f_block(current, delayed)
    out[1:] = scheme.diff @ values
    return out


def stable_step(scheme: CollocationScheme, safety: float = 1.5) -> float:
    """Step bound for explicit RK4 on the collocated system.

    Dominated by the differentiation blocks; uses the spectral radius of
    the square differentiation sub-operator.
    """
    m1 = scheme.n_nodes
    lin = np.zeros((m1, m1))
    lin[1:] = scheme.diff
    rho = float(np.max(np.abs(np.linalg.eigvals(lin))))
    return safety / rho if rho > 0 else 0.01
