"""
Result envelopes and writers for CSV and JSON output.

CSV payloads carry their metadata in a sidecar ``<out>.meta.json``; JSON
output is a single object ``{"metadata": ..., "payload": [...]}``.
"""
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src import __version__

logger = logging.getLogger("dqpt_lab.output")

FLOAT_FORMAT = "%.17g"

CAVEATS = {
    "entanglement-dynamics": (
        "The effective GGM uses only single sites and nearest-neighbour pairs; "
        "for large N it is an upper bound on the full GGM."
    ),
    "ggm-scan": (
        "Fluctuations of the effective GGM; the detector is calibrated for paramagnetic initial states."
    ),
}


@dataclass
class ResultEnvelope:
    """
    A command's result table plus everything needed to reproduce it.

    Attributes:
        command: CLI command that produced the table
        payload: Result rows
        metadata: Configuration echo, timings and warnings
    """

    command: str
    payload: pd.DataFrame
    metadata: Dict[str, Any] = field(default_factory=dict)


def build_metadata(
    command: str,
    config: Dict[str, Any],
    wall_time: float,
    extra: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """
    Standard metadata block.

    Args:
        command: CLI command
        config: Validated configuration as a dict
        wall_time: Seconds spent computing
        extra: Command-specific entries (grid sizes, spacing stats, ...)

    Returns:
        Dictionary ready to serialize
    """
    metadata = {
        "version": __version__,
        "command": command,
        "config": dict(config),
        "wall_time_s": round(float(wall_time), 6),
        "n_modes": config.get("n_modes"),
        "t_max": config.get("t_max"),
        "caveat": CAVEATS.get(command),
        "violations": [],
    }
    if extra:
        metadata.update(extra)
    return metadata


def _clean(value: Any) -> Any:
    """Convert numpy scalars and non-finite floats for strict JSON."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return int(bool(value))
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if value is pd.NA or value is pd.NaT:
        return None
    return value


def payload_records(df: pd.DataFrame) -> List[Dict[str, Any]]:
    return [_clean(row) for row in df.to_dict(orient="records")]


def to_json_text(envelope: ResultEnvelope) -> str:
    document = {
        "metadata": _clean(envelope.metadata),
        "payload": payload_records(envelope.payload),
    }
    return json.dumps(document, indent=2, allow_nan=False)


def write_csv(envelope: ResultEnvelope, out: Optional[str]) -> None:
    """
    Write the payload as CSV, metadata to ``<out>.meta.json``.

    Args:
        envelope: Result
        out: Destination path; stdout (without metadata) when None
    """
    df = envelope.payload.copy()
    for column in df.columns:
        if df[column].dtype == bool:
            df[column] = df[column].astype(int)
    if out is None:
        df.to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return
    df.to_csv(out, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    with open(f"{out}.meta.json", "w", newline="\n") as f:
        json.dump(_clean(envelope.metadata), f, indent=2, allow_nan=False)
    logger.info(f"Wrote {len(df)} rows to {out}")


def write_json(envelope: ResultEnvelope, out: Optional[str]) -> None:
    """
    Write ``{"metadata", "payload"}`` with NaN as null.

    Args:
        envelope: Result
        out: Destination path; stdout when None
    """
    text = to_json_text(envelope)
    if out is None:
        sys.stdout.write(text + "\n")
        return
    with open(out, "w", newline="\n") as f:
        f.write(text + "\n")
    logger.info(f"Wrote {len(envelope.payload)} records to {out}")


def write_result(envelope: ResultEnvelope, out: Optional[str], fmt: str = "csv") -> None:
    if fmt == "json":
        write_json(envelope, out)
    elif fmt == "csv":
        write_csv(envelope, out)
    else:
        raise ValueError(f"unknown output format {fmt!r}")
