"""Column-wise sparse regression: STLS and LASSO over a shared LS core.

The least-squares core equilibrates columns to unit RMS and solves via
rank-revealing pivoted QR, which yields basic solutions (at most rank
many nonzeros) on underdetermined or rank-deficient systems.  That
behavior matters: hard thresholding needs concentrated coefficients to
keep the reconstruction-error landscape informative when the library
has more columns than samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np
import scipy.linalg

from .errors import ParameterError

__all__ = ["RegressionConfig", "SparseCoefficients", "least_squares", "stls",
           "lasso", "solve"]


@dataclass(frozen=True)
class RegressionConfig:
    method: str = "stls"          # stls | lasso
    lam: float = 0.05
    max_iters: int = 0            # 0 = method default
    tol: float = 1e-8

    def __post_init__(self):
        if self.method not in ("stls", "lasso"):
            raise ParameterError(f"unknown regression method {self.method!r}")
        if self.lam < 0:
            raise ParameterError("lambda must be non-negative")

    @property
    def iters(self):
        if self.max_iters:
            return self.max_iters
        return 10 if self.method == "stls" else 10000


@dataclass
class SparseCoefficients:
    """Coefficient matrix (columns = state components) with explicit support."""

    values: np.ndarray
    lam: float
    flags: List[str] = field(default_factory=list)

    @property
    def support(self):
        return [np.flatnonzero(self.values[:, i]) for i in range(self.values.shape[1])]

    @property
    def n_nonzero(self):
        return int(np.count_nonzero(self.values))


def _equilibrate(a):
    scale = np.sqrt(np.mean(a * a, axis=0))
    scale[scale == 0.0] = 1.0
    return a / scale, scale


def least_squares(a, b):
    """Minimize ||a x - b||_2 columnwise via pivoted QR with equilibration.

    Returns a vector for vector b, a matrix for matrix b.  Underdetermined
    and rank-deficient systems get a basic solution: zero entries outside
    the pivoted column set.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    single = b.ndim == 1
    rhs = b[:, None] if single else b
    if a.shape[0] != rhs.shape[0]:
        raise ParameterError("row counts of A and b must match")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(rhs))):
        raise ParameterError("least squares inputs must be finite")
    aeq, scale = _equilibrate(a)
    q, r, piv = scipy.linalg.qr(aeq, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(diag > diag[0] * max(a.shape) * np.finfo(float).eps))
    x = np.zeros((a.shape[1], rhs.shape[1]))
    if rank > 0:
        c = q.T @ rhs
        z = scipy.linalg.solve_triangular(r[:rank, :rank], c[:rank], lower=False)
        x[piv[:rank]] = z
    x /= scale[:, None]
    return x[:, 0] if single else x


def stls(theta, targets, cfg: RegressionConfig) -> SparseCoefficients:
    """Sequential thresholded least squares, one problem per target column.

    Repeats least squares on the active columns and zeros every
    coefficient with magnitude below lambda, until the active set is a
    fixed point or the iteration cap is reached.
    """
    values_mat = _as_matrix(theta)
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    if values_mat.shape[0] != targets.shape[0]:
        raise ParameterError("library and target row counts must match")
    n_cols, n_out = values_mat.shape[1], targets.shape[1]
    flags: List[str] = []
    out = np.zeros((n_cols, n_out))
    # first pass is shared: one factorization solves the full library for every target
    first = least_squares(values_mat, targets)
    for i in range(n_out):
        xi = first[:, i].copy()
        active = np.abs(xi) >= cfg.lam
        if active.all():
            out[:, i] = xi  # fixed point: re-solving on all columns changes nothing
            continue
        fixed = False
        for _ in range(max(1, cfg.iters - 1)):
            if not active.any():
                break
            xi = np.zeros(n_cols)
            xi[active] = least_squares(values_mat[:, active], targets[:, i])
            keep = np.abs(xi) >= cfg.lam
            if np.array_equal(keep, active):
                fixed = True
                break
            active = keep
        if not active.any():
            flags.append(f"column {i}: empty active set")
            continue
        if not fixed:
            flags.append(f"column {i}: iteration cap reached before a fixed point")
            xi[~active] = 0.0
        out[:, i] = xi
    return SparseCoefficients(values=out, lam=cfg.lam, flags=flags)


def lasso(theta, targets, cfg: RegressionConfig) -> SparseCoefficients:
    """L1-penalized regression by cyclic coordinate descent.

    Works on columns scaled to unit RMS; the objective per target is
    (1/2m)||y - theta beta||^2 + lambda ||beta||_1 and coefficients are
    de-scaled on return.
    """
    values_mat = _as_matrix(theta)
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    m, n_cols = values_mat.shape
    n_out = targets.shape[1]
    aeq, scale = _equilibrate(values_mat)
    gram_diag = np.mean(aeq * aeq, axis=0)  # = 1 except exactly-zero columns
    out = np.zeros((n_cols, n_out))
    flags: List[str] = []
    for i in range(n_out):
        y = targets[:, i]
        beta = np.zeros(n_cols)
        resid = y.copy()
        converged = False
        for _ in range(cfg.iters):
            max_step = 0.0
            for j in range(n_cols):
                if gram_diag[j] == 0.0:
                    continue
                rho = beta[j] + (aeq[:, j] @ resid) / m
                new = _soft(rho, cfg.lam)
                step = new - beta[j]
                if step != 0.0:
                    resid -= step * aeq[:, j]
                    beta[j] = new
                    max_step = max(max_step, abs(step))
            if max_step < cfg.tol:
                converged = True
                break
        if not converged:
            flags.append(f"column {i}: coordinate descent hit the sweep cap")
        out[:, i] = beta / scale
    return SparseCoefficients(values=out, lam=cfg.lam, flags=flags)


def _soft(value, lam):
    if value > lam:
        return value - lam
    if value < -lam:
        return value + lam
    return 0.0


def _as_matrix(theta):
    values = getattr(theta, "values", theta)
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ParameterError("library matrix must be 2-D")
    return values


def solve(theta, targets, cfg: RegressionConfig) -> SparseCoefficients:
    """Dispatch on the configured regression method."""
    if cfg.method == "stls":
        return stls(theta, targets, cfg)
    return lasso(theta, targets, cfg)
