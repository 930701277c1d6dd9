"""Recovering delay differential equations from trajectory data.

Three identification routes over shared numerics: sparse regression on
delay-augmented libraries, sparse regression on a pseudospectrally
collocated ODE system, and neural DDEs with trainable delays.
"""

from . import (collocation, data, errors, library, metrics, models, ndde,
               optimize, regression, sindy, solver)
from .data import SplitSpec, Trajectory, delayed_states, rmse, sample_trajectory
from .models import DdeSystem, HistorySpec, make_system, nominal_params
from .optimize import SearchSpace, bayes_opt, brute_force, particle_swarm
from .regression import RegressionConfig
from .sindy import FitReport, SparseModel, esindy_fit, evaluate, psindy_fit
from .solver import DenseSolution, SolveConfig, solve_dde, solve_ode

__version__ = "0.1.0"
