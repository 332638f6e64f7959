"""
Equilibrium phase classification of the DATXY chain.

The phase boundaries are the zero sets of four functions of (λ₁, λ₂, d, γ).
For |d| < γ the active pair is (B₁, B₂), for |d| > γ it is (B₃, B₄). Region
orientation is pinned by one anchor point per phase at γ = 0.8:

    PM_I  (1.5, 0, 0)     AFM (0, 0.2, 0)
    PM_II (−0.5, 1.5, 0)  CH  (0.4, 0.2, 1)
"""
import logging
from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np
import pandas as pd

from src.physics.bdg import mode_spectrum
from src.physics.model import (
    CouplingSet,
    MomentumGrid,
    PhaseLabel,
    QuenchSpec,
    point_on_plane,
)
from src.utils.errors import AmbiguousRegion

logger = logging.getLogger("dqpt_lab.phase")

BOUNDARY_TOL = 1e-9

# (sign of first active B, sign of second active B) -> phase
_WEAK_DM = {(1, -1): PhaseLabel.PM_I, (-1, -1): PhaseLabel.AFM, (-1, 1): PhaseLabel.PM_II}
_STRONG_DM = {(1, 1): PhaseLabel.PM_I, (-1, 1): PhaseLabel.CH, (-1, -1): PhaseLabel.PM_II}


class BoundaryCrossing(NamedTuple):
    """Result of ``segment_crosses_boundary``."""

    crosses: bool
    parameters: List[float]


def boundary_values(g: CouplingSet) -> Tuple[float, float, float, float]:
    """
    The four boundary functions; each vanishes on one phase boundary.

    Args:
        g: Couplings

    Returns:
        (B₁, B₂, B₃, B₄)
    """
    l1, l2, d, gamma = g.lambda1 ** 2, g.lambda2 ** 2, g.dm ** 2, g.gamma ** 2
    return (
        l1 - 1.0 - l2,
        l2 - l1 - gamma + d,
        l1 - 1.0 - l2 - d + gamma,
        l1 - l2,
    )


def _active(g: CouplingSet, tol: float) -> Tuple[str, Tuple[float, float]]:
    b1, b2, b3, b4 = boundary_values(g)
    gap = abs(g.dm) - abs(g.gamma)
    if abs(gap) < tol:
        return "edge", (0.0, 0.0)
    if gap < 0:
        return "weak", (b1, b2)
    return "strong", (b3, b4)


def classify_phase(g: CouplingSet, tol: float = BOUNDARY_TOL) -> PhaseLabel:
    """
    Phase of a coupling point.

    Args:
        g: Couplings
        tol: Distance from zero under which a boundary function counts as zero

    Returns:
        PhaseLabel; BOUNDARY on any active boundary and at |d| = γ

    Raises:
        AmbiguousRegion: if the sign pattern matches no anchored region
    """
    regime, values = _active(g, tol)
    if regime == "edge" or any(abs(v) < tol for v in values):
        return PhaseLabel.BOUNDARY
    pattern = tuple(1 if v > 0 else -1 for v in values)
    table = _WEAK_DM if regime == "weak" else _STRONG_DM
    if pattern not in table:
        raise AmbiguousRegion(f"sign pattern {pattern} in the {regime}-DM regime at {g!r}")
    return table[pattern]


def min_quasiparticle_gap(g: CouplingSet, grid: MomentumGrid) -> float:
    """
    Smallest single-quasiparticle excitation energy over a momentum grid.

    A mode is gapped when exactly two of its four levels are negative; the
    gap is then min(ω², −ω⁴). Modes with any other filling count as zero.

    With the levels ascending, e₁ < 0 < e₂ are the adjacent pair across zero
    and min(e₂, −e₁) is the distance from zero to the nearer of them. It
    vanishes exactly when one of them reaches zero, and for d = 0
    (e₂ = −e₁) it is half the spacing e₂ − e₁.

    Args:
        g: Couplings
        grid: Momentum grid

    Returns:
        Non-negative gap
    """
    energies = mode_spectrum(g, grid.phis)
    per_mode = np.minimum(energies[:, 2], -energies[:, 1])
    return float(max(0.0, np.min(per_mode)))


def gapless_fraction(g: CouplingSet, grid: MomentumGrid, threshold: float = 1e-3) -> float:
    """Weighted share of the grid whose mode gap is below ``threshold``."""
    energies = mode_spectrum(g, grid.phis)
    per_mode = np.maximum(0.0, np.minimum(energies[:, 2], -energies[:, 1]))
    return float(np.sum(grid.weights[per_mode < threshold]) / np.sum(grid.weights))


def segment_crosses_boundary(q: QuenchSpec, samples: int = 401) -> BoundaryCrossing:
    """
    Walk the straight segment g₀ → g₁ and report boundary crossings.

    A crossing is recorded between consecutive samples when an active boundary
    function changes sign within one regime, or when the segment passes
    |d| = γ.

    Args:
        q: Quench
        samples: Number of points along the segment, at least 2

    Returns:
        BoundaryCrossing with the segment parameters s ∈ [0, 1] of each crossing
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    start = np.array(q.initial.fields())
    stop = np.array(q.final.fields())
    if np.array_equal(start, stop):
        return BoundaryCrossing(False, [])

    params = np.linspace(0.0, 1.0, samples)
    states = []
    for s in params:
        point = q.initial.with_fields(*(start + s * (stop - start)))
        states.append(_active(point, 0.0))

    crossings: List[float] = []
    for k in range(1, samples):
        (regime_a, vals_a), (regime_b, vals_b) = states[k - 1], states[k]
        if regime_a != regime_b:
            crossings.append(0.5 * (params[k - 1] + params[k]))
            continue
        for a, b in zip(vals_a, vals_b):
            if a * b < 0 or (b == 0.0 and a != 0.0):
                # linear interpolation of the zero
                crossings.append(params[k - 1] + (params[k] - params[k - 1]) * a / (a - b))
                break
    return BoundaryCrossing(bool(crossings), crossings)


def phase_diagram(
    plane: str,
    xs: Sequence[float],
    ys: Sequence[float],
    gamma: float,
    fixed: float = 0.0,
    n_modes: int = 512,
) -> pd.DataFrame:
    """
    Classify a 2-D slice of parameter space.

    Args:
        plane: Axis pair, e.g. "lambda1-lambda2"
        xs: Values along the first axis
        ys: Values along the second axis
        gamma: Anisotropy
        fixed: Value of the third coordinate
        n_modes: Midpoint modes used for the gap

    Returns:
        DataFrame with columns x, y, phase, min_gap (x varies slowest)
    """
    grid = MomentumGrid.midpoint(n_modes)
    rows: List[Dict] = []
    for x in xs:
        for y in ys:
            g = point_on_plane(gamma, plane, float(x), float(y), fixed)
            try:
                label = classify_phase(g).value
            except AmbiguousRegion as e:
                logger.error(f"Unclassifiable point ({x}, {y}): {e}")
                label = "AMBIGUOUS"
            rows.append({
                "x": float(x),
                "y": float(y),
                "phase": label,
                "min_gap": min_quasiparticle_gap(g, grid),
            })
    logger.info(f"Classified {len(rows)} points on the {plane} plane")
    return pd.DataFrame(rows, columns=["x", "y", "phase", "min_gap"])
