"""
Momentum-space Bogoliubov engine.

Each pair of momenta (p, −p) of the two-site unit cell gives a 4×4 mode matrix
H̃_p in the basis (a_p, b_p, a†_{−p}, b†_{−p}). The four Nambu components are
independent canonical fermions, so any unitary eigenframe W of H̃_p defines four
quasiparticles with energies ω¹..ω⁴. The vacuum of the mode fills the two
lowest levels (ω³, ω⁴); ω¹ ≥ ω² are the two highest.

Quench overlaps are read from Y = W₀†W₁. Its upper row block gives 𝒰 and 𝒱,
and the 2×2 minors of that row block give the six Loschmidt weights directly,
which stays finite when 𝒰 is singular.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from src.physics.model import CouplingSet
from src.utils.errors import DegenerateModeError, SingularOverlapError

logger = logging.getLogger("dqpt_lab.bdg")

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_PH_SWAP = np.block([[np.zeros((2, 2)), -np.eye(2)], [np.eye(2), np.zeros((2, 2))]])

# ascending eigh index -> (ω¹, ω², ω³, ω⁴)
_FRAME_ORDER = [3, 2, 0, 1]

# Columns of Y's upper row block that stay when the filled set S is removed,
# listed for S = {3,4}, {1,3}, {1,4}, {2,3}, {2,4}, {1,2} (0-based below).
_FILLED_SETS = [(2, 3), (0, 2), (0, 3), (1, 2), (1, 3), (0, 1)]

DEGENERACY_TOL = 1e-12
SINGULAR_TOL = 1e-12
PHI_NUDGE = 1e-10


@dataclass(frozen=True)
class ModeMatrix:
    """
    The 4×4 Hermitian matrix of one momentum pair.

    Attributes:
        phi: Momentum angle in (0, π/2)
        h_tilde: Matrix in the basis (a_p, b_p, a†_{−p}, b†_{−p})
        couplings: Point it was built at
    """

    phi: float
    h_tilde: np.ndarray
    couplings: CouplingSet


@dataclass(frozen=True)
class BogoliubovDecomp:
    """
    Unitary eigenframe of one mode matrix.

    Attributes:
        phi: Momentum angle the frame belongs to
        frame: 4×4 unitary whose columns are the quasiparticle modes
        omegas: (ω¹, ω², ω³, ω⁴), with ω¹ ≥ ω² and ω³ ≤ ω⁴ the filled pair
    """

    phi: float
    frame: np.ndarray
    omegas: np.ndarray

    @property
    def u_block(self) -> np.ndarray:
        return self.frame[:2, :2]

    @property
    def v_block(self) -> np.ndarray:
        return 1j * self.frame[:2, 2:]

    @property
    def ground_energy(self) -> float:
        return float(self.omegas[2] + self.omegas[3])

    @property
    def gap(self) -> float:
        """Smallest energy needed to add or remove a quasiparticle from the vacuum."""
        return float(max(0.0, min(self.omegas[1], -self.omegas[3])))

    @property
    def has_particle_hole_shape(self) -> bool:
        """True when the frame has the block form [[U, −iV], [−iV*, U*]]."""
        return _has_particle_hole_shape(self.frame)


@dataclass(frozen=True)
class QuenchOverlap:
    """
    Overlap of the pre- and post-quench frames at one momentum.

    Attributes:
        phi: Momentum angle
        u_overlap: 𝒰 = (W₀†W₁)₁₁
        v_overlap: 𝒱 = i(W₀†W₁)₁₂
        t_matrix: 𝒰⁻¹𝒱, or None when 𝒰 is singular
        omegas_final: Quasi-energies of the post-quench mode
        weights: Loschmidt weights of the six two-particle fillings, summing to 1
        phase_energies: Total energy of each filling, in the same order as weights
        overlap_matrix: The 4×4 unitary W₀†W₁
    """

    phi: float
    u_overlap: np.ndarray
    v_overlap: np.ndarray
    t_matrix: Optional[np.ndarray]
    omegas_final: np.ndarray
    weights: np.ndarray
    phase_energies: np.ndarray
    overlap_matrix: np.ndarray


def build_mode_matrix(g: CouplingSet, phi: float) -> ModeMatrix:
    """
    Assemble H̃_p for one momentum angle.

    Args:
        g: Couplings
        phi: Momentum angle

    Returns:
        ModeMatrix with diagonal blocks ±[(cos φ ± d sin φ)σˣ + Λ] and
        off-diagonal blocks ∓iγ sin φ σˣ
    """
    c, s = math.cos(phi), math.sin(phi)
    lam = np.diag([g.lambda1 - g.lambda2, g.lambda1 + g.lambda2]).astype(complex)
    pairing = g.gamma * s * SIGMA_X
    h_tilde = np.block([
        [(c + g.dm * s) * SIGMA_X + lam, -1j * pairing],
        [1j * pairing, -(c - g.dm * s) * SIGMA_X - lam],
    ])
    return ModeMatrix(phi=float(phi), h_tilde=h_tilde, couplings=g)


def build_mode_stack(g: CouplingSet, phis: Sequence[float]) -> np.ndarray:
    """Vectorized ``build_mode_matrix`` returning an (n, 4, 4) array."""
    phis = np.asarray(phis, dtype=float)
    c, s = np.cos(phis), np.sin(phis)
    n = phis.size
    stack = np.zeros((n, 4, 4), dtype=complex)
    l_minus, l_plus = g.lambda1 - g.lambda2, g.lambda1 + g.lambda2
    stack[:, 0, 0], stack[:, 1, 1] = l_minus, l_plus
    stack[:, 2, 2], stack[:, 3, 3] = -l_minus, -l_plus
    stack[:, 0, 1] = stack[:, 1, 0] = c + g.dm * s
    stack[:, 2, 3] = stack[:, 3, 2] = -(c - g.dm * s)
    stack[:, 0, 3] = stack[:, 1, 2] = -1j * g.gamma * s
    stack[:, 2, 1] = stack[:, 3, 0] = 1j * g.gamma * s
    return stack


def mode_spectrum(g: CouplingSet, phis: Sequence[float]) -> np.ndarray:
    """Ascending eigenvalues of H̃_p on each angle, shape (n, 4)."""
    return np.linalg.eigvalsh(build_mode_stack(g, phis))


def particle_hole_residual(h_tilde: np.ndarray) -> float:
    """‖S H̃* Sᵀ + H̃‖ with S = [[0, −1], [1, 0]]; zero iff d sin φ = 0."""
    return float(np.max(np.abs(_PH_SWAP @ h_tilde.conj() @ _PH_SWAP.T + h_tilde)))


def _has_particle_hole_shape(frame: np.ndarray, tol: float = 1e-10) -> bool:
    lower_right = np.max(np.abs(frame[2:, 2:] - frame[:2, :2].conj()))
    lower_left = np.max(np.abs(frame[2:, :2] + frame[:2, 2:].conj()))
    return bool(max(lower_right, lower_left) < tol)


def _fix_gauge(frames: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of every column real and positive."""
    idx = np.argmax(np.abs(frames), axis=-2)
    pivots = np.take_along_axis(frames, idx[..., None, :], axis=-2)
    return frames * (pivots.conj() / np.abs(pivots))


def _partner_columns(frames: np.ndarray) -> np.ndarray:
    """Particle-hole partners C(x; y) = (−y*; x*) of the first two columns."""
    top, bottom = frames[..., :2, :2], frames[..., 2:, :2]
    return np.concatenate([-bottom.conj(), top.conj()], axis=-2)


def _order_frames(
    stack: np.ndarray, energies: np.ndarray, vectors: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    omegas = energies[..., _FRAME_ORDER]
    frames = _fix_gauge(vectors[..., :, _FRAME_ORDER])
    residual = np.max(np.abs(_PH_SWAP @ stack.conj() @ _PH_SWAP.T + stack), axis=(-2, -1))
    symmetric = residual < 1e-13
    if np.any(symmetric):
        partners = _partner_columns(frames[symmetric])
        frames[symmetric, :, 2:] = partners
    return omegas, frames


def _degenerate(energies: np.ndarray) -> np.ndarray:
    scale = np.maximum(1.0, np.max(np.abs(energies), axis=-1))
    return (energies[..., 2] - energies[..., 1]) < DEGENERACY_TOL * scale


def diagonalize_mode(m: ModeMatrix, require_gap: bool = True) -> BogoliubovDecomp:
    """
    Bogoliubov frame of one mode matrix.

    If the filled and empty pairs touch, the angle is nudged by 1e-10 and the
    mode rebuilt, at most three attempts in total.

    Args:
        m: Mode matrix
        require_gap: Raise when the vacuum pair cannot be separated. Only the
            pre-quench frame needs this, since the evolution phases are
            basis-independent inside a degenerate level.

    Returns:
        BogoliubovDecomp

    Raises:
        DegenerateModeError: if every attempt is degenerate
    """
    retrying = Retrying(
        stop=stop_after_attempt(3),
        retry=retry_if_exception_type(DegenerateModeError),
        reraise=True,
    )
    for attempt in retrying:
        with attempt:
            tries = attempt.retry_state.attempt_number - 1
            current = m if tries == 0 else build_mode_matrix(m.couplings, m.phi + tries * PHI_NUDGE)
            if tries:
                logger.debug(f"Retrying degenerate mode at phi={m.phi!r}, shift {tries * PHI_NUDGE:g}")
            energies, vectors = np.linalg.eigh(current.h_tilde)
            if require_gap and _degenerate(energies):
                raise DegenerateModeError(
                    f"filled and empty levels touch at phi={current.phi!r}: {energies}"
                )
            omegas, frame = _order_frames(current.h_tilde[None], energies[None], vectors[None])
    return BogoliubovDecomp(phi=m.phi, frame=frame[0], omegas=omegas[0])


def diagonalize_grid(
    g: CouplingSet, phis: Sequence[float], require_gap: bool = True
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Frames and quasi-energies for a whole grid at once.

    Degenerate angles are redone one by one through ``diagonalize_mode``.

    Args:
        g: Couplings
        phis: Momentum angles
        require_gap: As in ``diagonalize_mode``

    Returns:
        (omegas of shape (n, 4), frames of shape (n, 4, 4))
    """
    phis = np.asarray(phis, dtype=float)
    stack = build_mode_stack(g, phis)
    energies, vectors = np.linalg.eigh(stack)
    omegas, frames = _order_frames(stack, energies, vectors)
    if require_gap:
        for k in np.flatnonzero(_degenerate(energies)):
            decomp = diagonalize_mode(build_mode_matrix(g, phis[k]))
            omegas[k], frames[k] = decomp.omegas, decomp.frame
    return omegas, frames


def filling_weights(
    frames0: np.ndarray, frames1: np.ndarray, omegas1: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Loschmidt weights and energies of the six two-particle fillings.

    A filling S of two post-quench levels has weight |det Y[{1,2}, Sᶜ]|² where
    Y = W₀†W₁; the weights sum to one because the row block is orthonormal.

    Args:
        frames0: Pre-quench frames, (..., 4, 4)
        frames1: Post-quench frames, (..., 4, 4)
        omegas1: Post-quench quasi-energies, (..., 4)

    Returns:
        (weights, energies), both of shape (..., 6)
    """
    y = np.swapaxes(frames0.conj(), -1, -2) @ frames1
    upper = y[..., :2, :]
    weights, energies = [], []
    for filled in _FILLED_SETS:
        kept = [k for k in range(4) if k not in filled]
        weights.append(np.abs(np.linalg.det(upper[..., :, kept])) ** 2)
        energies.append(omegas1[..., filled[0]] + omegas1[..., filled[1]])
    return np.stack(weights, axis=-1), np.stack(energies, axis=-1)


def quench_overlap(
    d0: BogoliubovDecomp, d1: BogoliubovDecomp, strict: bool = False
) -> QuenchOverlap:
    """
    Overlap matrices of two frames at the same angle.

    Args:
        d0: Pre-quench frame
        d1: Post-quench frame
        strict: Raise instead of falling back to the minor weights when 𝒰 is singular

    Returns:
        QuenchOverlap

    Raises:
        SingularOverlapError: if ``strict`` and |det 𝒰| < 1e-12
        ValueError: if the angles differ
    """
    if not math.isclose(d0.phi, d1.phi, abs_tol=1e-9):
        raise ValueError(f"frames belong to different angles: {d0.phi} and {d1.phi}")
    y = d0.frame.conj().T @ d1.frame
    u_overlap = y[:2, :2]
    v_overlap = 1j * y[:2, 2:]
    t_matrix = None
    if abs(np.linalg.det(u_overlap)) < SINGULAR_TOL:
        if strict:
            raise SingularOverlapError(
                f"|det U| = {abs(np.linalg.det(u_overlap)):.3e} at phi={d0.phi!r}"
            )
        logger.debug(f"Singular overlap at phi={d0.phi!r}, using minor weights")
    else:
        t_matrix = np.linalg.solve(u_overlap, v_overlap)
    weights, energies = filling_weights(d0.frame, d1.frame, d1.omegas)
    return QuenchOverlap(
        phi=d0.phi,
        u_overlap=u_overlap,
        v_overlap=v_overlap,
        t_matrix=t_matrix,
        omegas_final=d1.omegas,
        weights=weights,
        phase_energies=energies,
        overlap_matrix=y,
    )


def overlap_at(g0: CouplingSet, g1: CouplingSet, phi: float, strict: bool = False) -> QuenchOverlap:
    """Shortcut: build, diagonalize and overlap both sides at one angle."""
    d0 = diagonalize_mode(build_mode_matrix(g0, phi))
    d1 = diagonalize_mode(build_mode_matrix(g1, phi), require_gap=False)
    return quench_overlap(d0, d1, strict=strict)


def vacuum_energy(g: CouplingSet, phis: Sequence[float]) -> float:
    """
    Ground energy Σ_p (ω³_p + ω⁴_p) of the modes on ``phis``.

    For ``MomentumGrid.for_chain(N).phis`` this is the even-parity ground
    energy of the N-site ring.
    """
    energies = mode_spectrum(g, phis)
    return float(np.sum(energies[:, 0] + energies[:, 1]))


def t_entry_moduli(g0: CouplingSet, g1: CouplingSet, phis: Sequence[float]) -> np.ndarray:
    """|𝒯_ij| on each angle, shape (n, 2, 2); NaN where 𝒰 is singular."""
    _, frames0 = diagonalize_grid(g0, phis)
    _, frames1 = diagonalize_grid(g1, phis, require_gap=False)
    y = np.swapaxes(frames0.conj(), -1, -2) @ frames1
    u, v = y[:, :2, :2], 1j * y[:, :2, 2:]
    out = np.full(u.shape, np.nan)
    ok = np.abs(np.linalg.det(u)) >= SINGULAR_TOL
    if np.any(ok):
        out[ok] = np.abs(np.linalg.solve(u[ok], v[ok]))
    return out


__all__ = [
    "ModeMatrix",
    "BogoliubovDecomp",
    "QuenchOverlap",
    "build_mode_matrix",
    "build_mode_stack",
    "mode_spectrum",
    "particle_hole_residual",
    "diagonalize_mode",
    "diagonalize_grid",
    "filling_weights",
    "quench_overlap",
    "overlap_at",
    "vacuum_energy",
    "t_entry_moduli",
]
