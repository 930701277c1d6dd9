"""External optimizers for unknown delays and library parameters.

Each optimizer minimizes a black-box objective (one call = one sparse
fit) over a box, records the full evaluation trace, and reports the best
point with the number of calls.  Provided: exhaustive grid search,
global-best particle swarm, and a small Gaussian-process optimizer with
expected-improvement acquisition.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.special import erf

from .errors import ParameterError

__all__ = ["SearchSpace", "OptResult", "PsoConfig", "BoConfig",
           "brute_force", "particle_swarm", "bayes_opt"]


@dataclass
class SearchSpace:
    """Named box bounds plus the objective to minimize."""

    dims: Sequence[Tuple[str, float, float]]
    objective: Callable[[np.ndarray], float]

    def __post_init__(self):
        for name, lo, hi in self.dims:
            if not lo < hi:
                raise ParameterError(f"dimension {name!r} needs lower < upper")

    @property
    def n_dims(self):
        return len(self.dims)

    @property
    def lower(self):
        return np.array([d[1] for d in self.dims])

    @property
    def upper(self):
        return np.array([d[2] for d in self.dims])

    @property
    def names(self):
        return [d[0] for d in self.dims]


@dataclass
class OptResult:
    best_point: np.ndarray
    best_value: float
    trace: List[Tuple[np.ndarray, float]]
    calls: int
    flags: List[str] = field(default_factory=list)


class _Recorder:
    def __init__(self, space):
        self.space = space
        self.trace = []
        self.best_point = None
        self.best_value = math.inf

    def __call__(self, point):
        point = np.asarray(point, dtype=float)
        value = float(self.space.objective(point))
        if math.isnan(value):
            value = math.inf
        self.trace.append((point.copy(), value))
        if value < self.best_value:
            self.best_value = value
            self.best_point = point.copy()
        return value

    def result(self, flags=None):
        return OptResult(best_point=self.best_point, best_value=self.best_value,
                         trace=self.trace, calls=len(self.trace),
                         flags=list(flags or []))


def brute_force(space: SearchSpace, grid_counts) -> OptResult:
    """Evaluate the full uniform tensor grid (endpoints inclusive).

    Ties are broken by first occurrence in row-major order.
    """
    if np.isscalar(grid_counts):
        grid_counts = [int(grid_counts)] * space.n_dims
    if len(grid_counts) != space.n_dims:
        raise ParameterError("need one grid count per dimension")
    axes = [np.linspace(lo, hi, int(c)) for (_, lo, hi), c
            in zip(space.dims, grid_counts)]
    rec = _Recorder(space)
    for point in itertools.product(*axes):
        rec(np.array(point))
    return rec.result()


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 20
    inertia: float = 0.7298
    cognitive: float = 1.49618
    social: float = 1.49618
    stall_tol: float = 1e-3
    stall_window: int = 25
    max_iters: int = 200
    seed: int = 0


def particle_swarm(space: SearchSpace, cfg: PsoConfig = PsoConfig()) -> OptResult:
    """Global-best PSO with position clamping and velocity limiting.

    Stops when the best value improved by less than stall_tol over the
    last stall_window iterations, or at max_iters.
    """
    rng = np.random.default_rng(cfg.seed)
    lo, hi = space.lower, space.upper
    span = hi - lo
    n, d = cfg.swarm_size, space.n_dims
    rec = _Recorder(space)

    pos = lo + rng.uniform(size=(n, d)) * span
    vel = np.zeros((n, d))
    pvals = np.array([rec(p) for p in pos])
    pbest = pos.copy()
    gbest_idx = int(np.argmin(pvals))
    gbest = pbest[gbest_idx].copy()
    gval = float(pvals[gbest_idx])
    history = [gval]

    vmax = 0.5 * span
    for _ in range(cfg.max_iters):
        r1 = rng.uniform(size=(n, d))
        r2 = rng.uniform(size=(n, d))
        vel = (cfg.inertia * vel
               + cfg.cognitive * r1 * (pbest - pos)
               + cfg.social * r2 * (gbest - pos))
        vel = np.clip(vel, -vmax, vmax)
        pos = np.clip(pos + vel, lo, hi)
        vals = np.array([rec(p) for p in pos])
        improved = vals < pvals
        pbest[improved] = pos[improved]
        pvals[improved] = vals[improved]
        idx = int(np.argmin(pvals))
        if pvals[idx] < gval:
            gval = float(pvals[idx])
            gbest = pbest[idx].copy()
        history.append(gval)
        if len(history) > cfg.stall_window:
            if history[-cfg.stall_window - 1] - gval < cfg.stall_tol:
                break
    return rec.result()


@dataclass(frozen=True)
class BoConfig:
    n_init: int = 10
    budget: int = 300
    seed: int = 0
    n_candidates: int = 1024
    lengthscales: Tuple[float, ...] = (0.05, 0.1, 0.2, 0.5, 1.0)
    jitter: float = 1e-8


def _latin_hypercube(rng, n, d):
    u = (rng.permuted(np.tile(np.arange(n), (d, 1)), axis=1).T
         + rng.uniform(size=(n, d))) / n
    return u


def _gp_fit(xn, y, lengthscale, jitter):
    sq = np.sum((xn[:, None, :] - xn[None, :, :]) ** 2, axis=2)
    kmat = np.exp(-0.5 * sq / lengthscale**2) + jitter * np.eye(len(xn))
    chol = scipy.linalg.cholesky(kmat, lower=True)
    alpha = scipy.linalg.cho_solve((chol, True), y)
    log_ml = (-0.5 * float(y @ alpha)
              - float(np.sum(np.log(np.diag(chol))))
              - 0.5 * len(y) * math.log(2 * math.pi))
    return chol, alpha, log_ml


def _gp_predict(xn, chol, alpha, lengthscale, cand):
    sq = np.sum((cand[:, None, :] - xn[None, :, :]) ** 2, axis=2)
    ks = np.exp(-0.5 * sq / lengthscale**2)
    mean = ks @ alpha
    v = scipy.linalg.solve_triangular(chol, ks.T, lower=True)
    var = np.maximum(1.0 - np.sum(v * v, axis=0), 1e-12)
    return mean, np.sqrt(var)


def bayes_opt(space: SearchSpace, cfg: BoConfig = BoConfig()) -> OptResult:
    """GP optimizer with expected improvement over seeded random candidates.

    Latin-hypercube initialization; squared-exponential kernel on inputs
    normalized to the unit box; kernel lengthscale picked per iteration
    from a fixed ladder by marginal likelihood.  Observations are
    log-transformed and standardized before fitting (error objectives
    span many orders of magnitude).  Stops exactly at the call budget.
    """
    if cfg.budget < cfg.n_init:
        raise ParameterError("budget must cover the initial design")
    rng = np.random.default_rng(cfg.seed)
    lo, hi = space.lower, space.upper
    span = hi - lo
    rec = _Recorder(space)
    flags: List[str] = []

    xs = []
    for u in _latin_hypercube(rng, cfg.n_init, space.n_dims):
        point = lo + u * span
        rec(point)
        xs.append(u)
    xn = np.array(xs)

    while rec.calls < cfg.budget:
        ys = np.array([v for _, v in rec.trace])
        finite = np.isfinite(ys)
        cap = (np.max(ys[finite]) * 10 + 1.0) if finite.any() else 1.0
        safe = np.where(np.isfinite(ys), ys, cap)
        yt = np.log10(np.maximum(safe, 1e-300))
        sd = np.std(yt)
        cand = rng.uniform(size=(cfg.n_candidates, space.n_dims))
        if sd < 1e-12:
            point = lo + cand[0] * span   # degenerate surrogate: explore
            flags.append(f"call {rec.calls}: flat observations, random point")
            rec(point)
            xn = np.vstack([xn, cand[:1]])
            continue
        yn = (yt - np.mean(yt)) / sd
        try:
            fits = [_gp_fit(xn, yn, ls, cfg.jitter) for ls in cfg.lengthscales]
            best = int(np.argmax([f[2] for f in fits]))
            chol, alpha, _ = fits[best]
            ls = cfg.lengthscales[best]
            mean, std = _gp_predict(xn, chol, alpha, ls, cand)
        except scipy.linalg.LinAlgError:
            flags.append(f"call {rec.calls}: GP solve failed, random point")
            rec(lo + cand[0] * span)
            xn = np.vstack([xn, cand[:1]])
            continue
        fstar = float(np.min(yn))
        z = (fstar - mean) / std
        ei = (fstar - mean) * _norm_cdf(z) + std * _norm_pdf(z)
        if np.max(ei) <= 0.0:
            pick = int(rng.integers(cfg.n_candidates))
            flags.append(f"call {rec.calls}: zero improvement, random point")
        else:
            pick = int(np.argmax(ei))
        rec(lo + cand[pick] * span)
        xn = np.vstack([xn, cand[pick:pick + 1]])
    return rec.result(flags)


def _norm_pdf(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)


def _norm_cdf(z):
    return 0.5 * (1.0 + erf(z / math.sqrt(2.0)))
