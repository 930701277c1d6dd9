"""Error accounting and benchmark table emission.

Tables are plain CSV with a fixed column order per layout id and
locale-independent formatting: errors in 2-significant-digit scientific
notation, counts as integers, times with two decimals.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .errors import ParameterError

__all__ = ["BenchmarkRow", "param_error", "emit_table", "parse_table", "LAYOUTS"]

METHOD_LABELS = ("E", "P5", "P10", "P15", "NDDE")
OPTIMIZER_LABELS = ("BF", "BO", "PS", "-")


@dataclass
class BenchmarkRow:
    """One table row: labels plus named numeric cells."""

    method: str
    optimizer: str = "-"
    cells: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        base = self.method.split("(")[0].strip()
        if base not in METHOD_LABELS:
            raise ParameterError(f"method label {self.method!r} not in {METHOD_LABELS}")
        if self.optimizer not in OPTIMIZER_LABELS:
            raise ParameterError(
                f"optimizer label {self.optimizer!r} not in {OPTIMIZER_LABELS}")


def param_error(truth: dict, recovered: dict) -> dict:
    """Entrywise absolute differences over the truth's keys.

    Keys missing from the recovered map are omitted from the result
    (absent, not zero); callers can detect them by key set difference.
    """
    out = {}
    for key, value in truth.items():
        if key in recovered and recovered[key] is not None:
            out[key] = abs(float(value) - float(recovered[key]))
    return out


# column lists per table layout; the two leading label columns are implicit
LAYOUTS = {
    "table1": ["regressor", "samples", "rmse_deriv_train", "rmse_deriv_test",
               "rmse_traj_test"],
    "table2": ["sindy", "optimizer", "err_r", "err_tau", "rmse_deriv", "rmse_traj"],
    "table3": ["sindy", "optimizer", "err_xi2", "err_xi9", "err_tau", "err_alpha",
               "rmse_deriv", "rmse_traj"],
    "table4": ["model", "sindy", "bf_calls", "bf_time", "bo_calls", "bo_time",
               "ps_calls", "ps_time"],
    "comparison3": ["sindy", "optimizer", "err_tau_s", "err_tau_1", "err_tau_2",
                    "rmse_deriv", "rmse_traj"],
    "table5": ["loss", "size", "rmse_deriv", "rmse_traj", "err_tau"],
    "table6": ["loss", "size", "rmse_deriv", "rmse_traj", "err_tau", "iters",
               "time_s"],
    "table7": ["loss", "size", "rmse_deriv", "rmse_traj", "err_tau_1", "err_tau_2"],
    "table8": ["sindy", "degree", "err_tau_1", "err_tau_2", "rmse_deriv_train",
               "rmse_deriv_test", "rmse_traj", "calls", "time_s"],
    "table9": ["input", "size", "err_tau_1", "err_tau_2", "train_loss",
               "rmse_deriv_test", "rmse_traj", "iters", "time_s"],
    "grid": ["dim_values", "objective"],
}

_INT_COLUMNS = {"bf_calls", "bo_calls", "ps_calls", "calls", "iters", "size",
                "degree"}
_TIME_COLUMNS = {"bf_time", "bo_time", "ps_time", "time_s"}


def _format_cell(column: str, value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if isinstance(value, str):
        return value
    if column in _INT_COLUMNS:
        return str(int(value))
    if column in _TIME_COLUMNS:
        return f"{float(value):.2f}"
    value = float(value)
    if math.isinf(value):
        return "inf"
    return f"{value:.1e}"


def emit_table(rows: List[dict], layout: str) -> str:
    """Render rows (dicts keyed by the layout's columns) as CSV text."""
    if layout not in LAYOUTS:
        raise ParameterError(f"unknown table layout {layout!r}")
    columns = LAYOUTS[layout]
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        cells = [_format_cell(col, row.get(col)) for col in columns]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def parse_table(text: str, layout: str) -> List[dict]:
    """Parse CSV emitted by :func:`emit_table` back into row dicts."""
    if layout not in LAYOUTS:
        raise ParameterError(f"unknown table layout {layout!r}")
    columns = LAYOUTS[layout]
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    if header != columns:
        raise ParameterError(f"header does not match layout {layout!r}")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        row = {}
        for col, cell in zip(columns, parts):
            if cell == "":
                row[col] = None
            elif col in _INT_COLUMNS:
                row[col] = int(cell)
            else:
                try:
                    row[col] = float(cell)
                except ValueError:
                    row[col] = cell
        rows.append(row)
    return rows
