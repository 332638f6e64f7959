"""
Shared domain types for the DATXY chain: couplings, quenches, phase labels and
momentum grids.

Units: J = ħ = 1. Energies are in units of J and times in units of ħ/J.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator


class PhaseLabel(str, Enum):
    """Equilibrium phases of the DATXY chain."""

    PM_I = "PM_I"
    PM_II = "PM_II"
    AFM = "AFM"
    CH = "CH"
    BOUNDARY = "BOUNDARY"


class CouplingSet(BaseModel):
    """
    One point (γ, λ₁, λ₂, d) of the model, in units of J.
    """

    model_config = ConfigDict(frozen=True)

    gamma: float
    lambda1: float = 0.0
    lambda2: float = 0.0
    dm: float = 0.0

    @field_validator("gamma", "lambda1", "lambda2", "dm")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("must be a finite real number")
        return float(value)

    @field_validator("gamma")
    @classmethod
    def _anisotropy_nonzero(cls, value: float) -> float:
        if value == 0.0:
            raise ValueError("anisotropy gamma must be non-zero")
        return value

    @classmethod
    def point(cls, gamma: float, lambda1: float, lambda2: float, dm: float) -> "CouplingSet":
        """Positional constructor: ``CouplingSet.point(0.8, 1.5, 0, 0)``."""
        return cls(gamma=gamma, lambda1=lambda1, lambda2=lambda2, dm=dm)

    def fields(self) -> Tuple[float, float, float]:
        """The quench coordinates (λ₁, λ₂, d)."""
        return (self.lambda1, self.lambda2, self.dm)

    def with_fields(self, lambda1: float, lambda2: float, dm: float) -> "CouplingSet":
        """Same anisotropy, new (λ₁, λ₂, d)."""
        return CouplingSet(gamma=self.gamma, lambda1=lambda1, lambda2=lambda2, dm=dm)

    def family(self) -> str:
        """
        Name of the sub-model this point belongs to.

        Returns:
            One of "TFI", "UXY", "ATXY", "DUXY", "DATXY"
        """
        if self.lambda2 == 0.0 and self.dm == 0.0:
            return "TFI" if self.gamma == 1.0 else "UXY"
        if self.dm == 0.0:
            return "ATXY"
        if self.lambda2 == 0.0:
            return "DUXY"
        return "DATXY"


class QuenchSpec(BaseModel):
    """
    A sudden quench g₀ → g₁ at fixed anisotropy.

    The initial point may not lie in the gapless chiral phase or on a phase
    boundary, since the vacuum of g₀ must be unique.
    """

    model_config = ConfigDict(frozen=True)

    initial: CouplingSet
    final: CouplingSet

    @model_validator(mode="after")
    def _check_quench(self) -> "QuenchSpec":
        # Local import: phase.py depends on this module
        from src.physics.phase import classify_phase

        if self.initial.gamma != self.final.gamma:
            raise ValueError("gamma must be the same before and after the quench")
        label = classify_phase(self.initial)
        if label in (PhaseLabel.CH, PhaseLabel.BOUNDARY):
            raise ValueError(f"initial point lies in {label.value}; its ground state is not unique")
        return self

    @classmethod
    def between(
        cls,
        gamma: float,
        initial: Tuple[float, float, float],
        final: Tuple[float, float, float],
    ) -> "QuenchSpec":
        """
        Build a quench from two (λ₁, λ₂, d) triples.

        Args:
            gamma: Shared anisotropy
            initial: (λ₁, λ₂, d) before the quench
            final: (λ₁, λ₂, d) after the quench

        Returns:
            Validated QuenchSpec
        """
        return cls(
            initial=CouplingSet.point(gamma, *initial),
            final=CouplingSet.point(gamma, *final),
        )

    @property
    def is_trivial(self) -> bool:
        return self.initial == self.final


@dataclass(frozen=True)
class MomentumGrid:
    """
    Quadrature nodes and weights on the open interval (0, π/2).

    Attributes:
        phis: Strictly increasing angles
        weights: Positive weights summing to π/2
    """

    phis: np.ndarray
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        phis = np.asarray(self.phis, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if phis.ndim != 1 or phis.size == 0 or phis.shape != weights.shape:
            raise ValueError("phis and weights must be non-empty 1-D arrays of equal length")
        if phis[0] <= 0.0 or phis[-1] >= math.pi / 2 or np.any(np.diff(phis) <= 0.0):
            raise ValueError("phis must be strictly increasing inside (0, pi/2)")
        if np.any(weights <= 0.0) or not math.isclose(weights.sum(), math.pi / 2, rel_tol=1e-12):
            raise ValueError("weights must be positive and sum to pi/2")
        object.__setattr__(self, "phis", phis)
        object.__setattr__(self, "weights", weights)

    @property
    def n_modes(self) -> int:
        return int(self.phis.size)

    @classmethod
    def midpoint(cls, n_modes: int) -> "MomentumGrid":
        """
        Midpoint rule with ``n_modes`` cells; never touches 0 or π/2.

        Args:
            n_modes: Number of cells

        Returns:
            MomentumGrid
        """
        if n_modes < 1:
            raise ValueError("n_modes must be positive")
        width = (math.pi / 2) / n_modes
        phis = (np.arange(n_modes) + 0.5) * width
        return cls(phis=phis, weights=np.full(n_modes, width))

    @classmethod
    def for_chain(cls, size: int) -> "MomentumGrid":
        """
        The N/4 momenta of an N-site ring in the even-parity sector.

        The antiperiodic fermion boundary gives φ_p = (2p − 1)π/N, p = 1..N/4,
        which is the midpoint rule with N/4 cells.

        Args:
            size: Chain length N, a multiple of 4

        Returns:
            MomentumGrid
        """
        if size < 4 or size % 4:
            raise ValueError("chain size must be a positive multiple of 4")
        return cls.midpoint(size // 4)


PLANES = ("lambda1-lambda2", "lambda1-d", "lambda2-d")


def point_on_plane(gamma: float, plane: str, x: float, y: float, fixed: float) -> CouplingSet:
    """
    Place (x, y) on a 2-D slice of (λ₁, λ₂, d) space.

    Args:
        gamma: Anisotropy of the slice
        plane: One of PLANES; the missing axis is held at ``fixed``
        x: First named coordinate
        y: Second named coordinate
        fixed: Value of the third coordinate

    Returns:
        CouplingSet at that point
    """
    if plane == "lambda1-lambda2":
        return CouplingSet.point(gamma, x, y, fixed)
    if plane == "lambda1-d":
        return CouplingSet.point(gamma, x, fixed, y)
    if plane == "lambda2-d":
        return CouplingSet.point(gamma, fixed, x, y)
    raise ValueError(f"unknown plane '{plane}', expected one of {PLANES}")
