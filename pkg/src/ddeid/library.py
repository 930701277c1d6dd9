"""Candidate-function library over current, delayed, or collocated states.

Columns are ordered deterministically: the constant, then all monomials
of total degree 1..d over the concatenated block columns in graded
lexicographic order, then sines and cosines of every input column when
requested.  A rational saturating transform ("Hill" term) of one
designated column can be added; it participates in the monomial
enumeration as an extra variable with exponent at most one, plus its
pure square, which reproduces the standard 10-column single-delay
layout at degree 2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, ParameterError

__all__ = ["HillSpec", "LibrarySpec", "LibraryMatrix", "build", "column_count",
           "column_labels", "eval_columns", "eval_model_rhs"]


@dataclass(frozen=True)
class HillSpec:
    """Saturating transform h(z) = 1 / (1 + z^alpha) applied to one input column."""

    alpha: float
    column: int

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError("Hill exponent must be positive")


@dataclass(frozen=True)
class LibrarySpec:
    """Declarative description of the candidate-function matrix.

    blocks are ordered state groups of width n_state each (current
    state first, then one block per delay or collocation node);
    block_names feed the generated column labels.
    """

    degree: int
    n_state: int
    block_names: Tuple[str, ...]
    trig: bool = False
    hill: Optional[HillSpec] = None

    def __post_init__(self):
        if self.degree < 1:
            raise ParameterError("degree must be at least 1")
        if self.n_state < 1:
            raise ParameterError("state dimension must be at least 1")
        if len(self.block_names) < 1:
            raise ParameterError("need at least one input block")
        if self.hill is not None and not 0 <= self.hill.column < self.n_inputs:
            raise ParameterError("Hill column index outside the input columns")

    @property
    def n_blocks(self):
        return len(self.block_names)

    @property
    def n_inputs(self):
        return self.n_blocks * self.n_state

    def var_names(self):
        if self.n_state == 1:
            return list(self.block_names)
        return [f"{b}{i+1}" for b in self.block_names for i in range(self.n_state)]


def make_spec(degree, n_state, n_delay_blocks=0, colloc_nodes=0, trig=False,
              hill_alpha=None, hill_column=None):
    """Convenience constructor naming blocks for the common layouts."""
    if n_delay_blocks and colloc_nodes:
        raise ParameterError("choose delayed or collocated blocks, not both")
    names = ["x"]
    names += [f"xd{j+1}" for j in range(n_delay_blocks)]
    names += [f"xs{j+1}" for j in range(colloc_nodes)]
    hill = None
    if hill_alpha is not None:
        if hill_column is None:
            hill_column = len(names) * n_state - n_state  # first column of last block
        hill = HillSpec(alpha=float(hill_alpha), column=int(hill_column))
    return LibrarySpec(degree=degree, n_state=n_state, block_names=tuple(names),
                       trig=trig, hill=hill)


def _structure(spec: LibrarySpec):
    # the column structure is independent of the hill exponent value
    return _structure_cached(spec.degree, spec.n_state, spec.block_names,
                             spec.trig, spec.hill is not None)


@lru_cache(maxsize=256)
def _structure_cached(degree, n_state, block_names, trig, has_hill):
    """Monomial index matrix (padded with a ones-column slot) and labels."""
    n_inputs = len(block_names) * n_state
    n_vars = n_inputs + (1 if has_hill else 0)
    hill_var = n_inputs if has_hill else -1
    pad = n_vars  # index of the constant-one padding column
    combos = []
    for deg in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(n_vars), deg):
            if has_hill:
                h_count = sum(1 for c in combo if c == hill_var)
                if h_count > 1 and combo != (hill_var, hill_var):
                    continue
            combos.append(combo)
    index = np.full((len(combos), degree), pad, dtype=np.intp)
    for row, combo in enumerate(combos):
        index[row, :len(combo)] = combo
    if n_state == 1:
        var_names = list(block_names)
    else:
        var_names = [f"{b}{i+1}" for b in block_names for i in range(n_state)]
    names = var_names + (["h"] if has_hill else [])
    labels = ["1"]
    for combo in combos:
        parts = []
        for var, grp in itertools.groupby(combo):
            k = len(list(grp))
            parts.append(names[var] if k == 1 else f"{names[var]}^{k}")
        labels.append("*".join(parts))
    if trig:
        labels += [f"sin({v})" for v in var_names]
        labels += [f"cos({v})" for v in var_names]
    return index, tuple(labels)


def column_count(spec: LibrarySpec) -> int:
    """Exact number of library columns including trig/Hill extensions."""
    index, labels = _structure(spec)
    return len(labels)


def column_labels(spec: LibrarySpec):
    return list(_structure(spec)[1])


@dataclass(frozen=True)
class LibraryMatrix:
    """Evaluated candidate functions (one row per sample)."""

    values: np.ndarray
    spec: LibrarySpec
    labels: Tuple[str, ...]

    @property
    def n_columns(self):
        return self.values.shape[1]


def _augment(spec: LibrarySpec, inputs: np.ndarray) -> np.ndarray:
    """Stack the Hill column and the constant-one pad onto the raw inputs."""
    cols = [inputs]
    if spec.hill is not None:
        z = inputs[:, spec.hill.column]
        alpha = spec.hill.alpha
        if alpha != round(alpha) and np.any(z < 0):
            raise DomainError("Hill transform of negative values with non-integer exponent")
        cols.append((1.0 / (1.0 + z**alpha))[:, None])
    cols.append(np.ones((inputs.shape[0], 1)))
    return np.hstack(cols)


def eval_columns(spec: LibrarySpec, inputs) -> np.ndarray:
    """Evaluate all library columns on raw input rows (m, n_inputs)."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[1] != spec.n_inputs:
        raise ParameterError(
            f"expected {spec.n_inputs} input columns, got {inputs.shape[1]}")
    index, labels = _structure(spec)
    aug = _augment(spec, inputs)
    m = inputs.shape[0]
    parts = [np.ones((m, 1))]
    if index.shape[0]:
        parts.append(np.prod(aug[:, index], axis=2))
    if spec.trig:
        parts.append(np.sin(inputs))
        parts.append(np.cos(inputs))
    return np.hstack(parts)


def build(spec: LibrarySpec, blocks: Sequence[np.ndarray]) -> LibraryMatrix:
    """Assemble the library matrix from per-block sample matrices."""
    if len(blocks) != spec.n_blocks:
        raise ParameterError(f"expected {spec.n_blocks} blocks, got {len(blocks)}")
    mats = []
    m = None
    for blk in blocks:
        blk = np.asarray(blk, dtype=float)
        if blk.ndim == 1:
            blk = blk[:, None]
        if blk.shape[1] != spec.n_state:
            raise ParameterError("block width must equal the state dimension")
        if m is None:
            m = blk.shape[0]
        elif blk.shape[0] != m:
            raise ParameterError("all blocks must have the same row count")
        if not np.all(np.isfinite(blk)):
            raise ParameterError("library inputs must be finite")
        mats.append(blk)
    inputs = np.hstack(mats)
    values = eval_columns(spec, inputs)
    return LibraryMatrix(values=values, spec=spec, labels=_structure(spec)[1])


def eval_model_rhs(coeff_values: np.ndarray, spec: LibrarySpec, inputs) -> np.ndarray:
    """Derivative vector Theta(inputs) @ Xi for a single time point."""
    coeff_values = np.asarray(coeff_values, dtype=float)
    if coeff_values.shape[0] != column_count(spec):
        raise ParameterError("coefficient rows must match the library column count")
    row = eval_columns(spec, np.asarray(inputs, dtype=float).reshape(1, -1))[0]
    return row @ coeff_values
