"""
Table utilities shared by the dqpt-lab commands.
"""
import logging
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger("dqpt_lab.data")

COLUMNS: Dict[str, List[str]] = {
    "phase-diagram": ["x", "y", "phase", "min_gap"],
    "rate-function": ["t", "F"],
    "critical-times": ["n", "t_star", "phi_star", "residual"],
    "dqpt-scan": ["x", "y", "dqpt", "n_tstar", "first_tstar"],
    "entanglement-dynamics": ["t", "logneg_eo", "ggm"],
    "ggm-scan": ["x", "y", "sigma_ggm"],
    "oracle-check": ["check", "value", "tolerance", "passed"],
}


def axis_values(lo: float, hi: float, n: int) -> np.ndarray:
    """
    Evenly spaced axis including both ends.

    Args:
        lo: First value
        hi: Last value
        n: Number of points; a single point sits at ``lo``

    Returns:
        Array of length n
    """
    if n < 1:
        raise ValueError("an axis needs at least one point")
    if n == 1:
        return np.array([float(lo)])
    return np.linspace(lo, hi, n)


def time_grid(t_max: float, dt: float) -> np.ndarray:
    """Times 0, dt, 2dt, ... up to and including t_max when it lies on the raster."""
    steps = int(np.floor(t_max / dt + 1e-9))
    return np.arange(steps + 1) * dt


def split_errors(df: pd.DataFrame) -> Tuple[pd.DataFrame, List[Dict]]:
    """
    Separate rows flagged by a worker from the clean ones.

    Args:
        df: Table that may carry an ``error`` column

    Returns:
        The table without the column and a list of ``{x, y, error}`` records
    """
    if "error" not in df.columns:
        return df, []
    flagged = df[df["error"].notna()]
    errors = [
        {"x": float(row["x"]), "y": float(row["y"]), "error": str(row["error"])}
        for _, row in flagged.iterrows()
    ]
    if errors:
        logger.warning(f"{len(errors)} of {len(df)} grid points failed")
    return df.drop(columns=["error"]), errors


def normalize_table(df: pd.DataFrame, command: str) -> pd.DataFrame:
    """
    Put a result table into the fixed column order of ``command``.

    Booleans become 0/1 integers. Columns outside the schema are dropped.

    Args:
        df: Raw result table
        command: CLI command name

    Returns:
        New DataFrame
    """
    columns = COLUMNS[command]
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise KeyError(f"{command} table lacks columns {missing}")
    out = df[columns].copy()
    for column in columns:
        if out[column].dtype == bool:
            out[column] = out[column].astype(int)
    return out.reset_index(drop=True)


def scan_summary(df: pd.DataFrame, flag: str) -> Dict[str, float]:
    """
    Counts of a boolean flag over a scan grid.

    Args:
        df: Scan table
        flag: Boolean column, e.g. "dqpt"

    Returns:
        Dictionary with points, flagged and fraction
    """
    total = len(df)
    flagged = int(df[flag].astype(bool).sum()) if total else 0
    return {
        "points": total,
        "flagged": flagged,
        "fraction": flagged / total if total else 0.0,
    }
