"""
Real-space free-fermion engine for finite rings.

After Jordan–Wigner the chain is quadratic in the Majorana operators
γ_{2i} = Sᵢ Xᵢ and γ_{2i+1} = Sᵢ Yᵢ (Sᵢ the string of Z on sites < i):

    H = (i/4) Σ_ab A_ab γ_a γ_b,   A real antisymmetric.

States are fermionic Gaussian and stored as Γ_ab = (i/2)⟨[γ_a, γ_b]⟩.
Quench evolution is Γ(t) = O Γ Oᵀ with O = exp(A t). Spin correlators of
single sites and nearest-neighbour pairs follow from Wick's theorem.

The ring is kept in the even-parity sector, where the fermions see an
antiperiodic boundary: the bond (N−1, 0) enters A with the opposite sign.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
from pfapack.pfaffian import pfaffian

from src.physics.model import CouplingSet
from src.utils.errors import GaplessGroundState

logger = logging.getLogger("dqpt_lab.correlators")

GAPLESS_TOL = 1e-10

_PAULI = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class BdGRealSpace:
    """
    Quadratic form of the ring.

    Attributes:
        size: Number of sites N, a multiple of 4
        majorana: 2N×2N real antisymmetric A
        couplings: Point it was built at
    """

    size: int
    majorana: np.ndarray
    couplings: CouplingSet

    @property
    def matrix(self) -> np.ndarray:
        """BdG matrix H_BdG in the basis (c₁..c_N, c₁†..c_N†), H = ½ ψ† H_BdG ψ."""
        omega = majorana_transform(self.size)
        return 0.5j * omega.conj().T @ self.majorana @ omega

    def single_particle_energies(self) -> np.ndarray:
        """Eigenvalues of iA, symmetric around zero."""
        return np.linalg.eigvalsh(1j * self.majorana)


@dataclass(frozen=True)
class CovarianceState:
    size: int
    majorana_cov: np.ndarray
    time: float = 0.0


@dataclass(frozen=True)
class PairRDM:
    """
    Two-site reduced density matrix, site ``sites[0]`` as the first factor.

    ``site_parity`` is "odd-even" when the first site is odd on the 1-based
    lattice, i.e. the pair (0, 1).
    """

    rho: np.ndarray
    sites: tuple
    site_parity: str


def majorana_transform(size: int) -> np.ndarray:
    """Ω with γ = Ωψ: γ_{2i} = cᵢ + cᵢ†, γ_{2i+1} = −i(cᵢ − cᵢ†)."""
    omega = np.zeros((2 * size, 2 * size), dtype=complex)
    for i in range(size):
        omega[2 * i, i] = 1.0
        omega[2 * i, size + i] = 1.0
        omega[2 * i + 1, i] = -1j
        omega[2 * i + 1, size + i] = 1j
    return omega


def build_bdg_realspace(g: CouplingSet, size: int) -> BdGRealSpace:
    """
    Majorana form of the ring in the even-parity sector.

    Args:
        g: Couplings
        size: Ring length, a multiple of 4

    Returns:
        BdGRealSpace
    """
    if size < 4 or size % 4:
        raise ValueError("ring size must be a positive multiple of 4")
    a = np.zeros((2 * size, 2 * size))

    def put(p: int, q: int, value: float) -> None:
        a[p, q] += value
        a[q, p] -= value

    for i in range(size):
        k = (i + 1) % size
        sign = -1.0 if k == 0 else 1.0
        a_i, b_i, a_k, b_k = 2 * i, 2 * i + 1, 2 * k, 2 * k + 1
        put(b_i, a_k, -sign * (1 + g.gamma) / 2)
        put(a_i, b_k, sign * (1 - g.gamma) / 2)
        put(b_i, b_k, -sign * g.dm / 2)
        put(a_i, a_k, -sign * g.dm / 2)
        mu = g.lambda1 + (-1) ** (i + 1) * g.lambda2
        put(a_i, b_i, -mu)
    return BdGRealSpace(size=size, majorana=a, couplings=g)


def ground_covariance(h: BdGRealSpace) -> CovarianceState:
    """
    Covariance of the ground state: Γ = i·sign(iA).

    Raises:
        GaplessGroundState: if a single-particle level lies within 1e-10 of zero
    """
    energies, vectors = np.linalg.eigh(1j * h.majorana)
    if np.min(np.abs(energies)) < GAPLESS_TOL:
        raise GaplessGroundState(
            f"zero-energy level {np.min(np.abs(energies)):.3e} at N={h.size}, {h.couplings!r}"
        )
    gamma = np.real(1j * (vectors * np.sign(energies)) @ vectors.conj().T)
    return CovarianceState(size=h.size, majorana_cov=gamma, time=0.0)


def ground_energy(h: BdGRealSpace) -> float:
    """E₀ = −¼ Σ |eig(iA)|."""
    return float(-0.25 * np.sum(np.abs(h.single_particle_energies())))


def energy(state: CovarianceState, h: BdGRealSpace) -> float:
    """⟨H⟩ = ¼ Σ A_ab Γ_ab."""
    return float(0.25 * np.sum(h.majorana * state.majorana_cov))


def purity_defect(state: CovarianceState) -> float:
    """‖ΓΓᵀ − 1‖ in max-norm; zero for pure Gaussian states."""
    gamma = state.majorana_cov
    return float(np.max(np.abs(gamma @ gamma.T - np.eye(2 * state.size))))


class CovarianceEvolver:
    """
    Spectral decomposition of the post-quench generator, reused across times.

    Args:
        h1: Post-quench quadratic form
    """

    def __init__(self, h1: BdGRealSpace):
        self.size = h1.size
        self._energies, self._vectors = np.linalg.eigh(1j * h1.majorana)

    def orthogonal(self, t: float) -> np.ndarray:
        """O(t) = exp(A t) = V exp(−i e t) V†."""
        phases = np.exp(-1j * self._energies * t)
        return np.real((self._vectors * phases) @ self._vectors.conj().T)

    def evolve(self, state: CovarianceState, t: float) -> CovarianceState:
        o = self.orthogonal(t)
        return CovarianceState(size=state.size, majorana_cov=o @ state.majorana_cov @ o.T, time=state.time + t)

    def local_block(self, state: CovarianceState, t: float, rows: Sequence[int]) -> np.ndarray:
        """Rows/columns ``rows`` of Γ(t) without forming the full matrix."""
        phases = np.exp(-1j * self._energies * t)
        o_rows = np.real((self._vectors[list(rows)] * phases) @ self._vectors.conj().T)
        return o_rows @ state.majorana_cov @ o_rows.T


def evolve_covariance(state: CovarianceState, h1: BdGRealSpace, t: float) -> CovarianceState:
    """
    Γ(t) = O Γ Oᵀ after a sudden switch to ``h1``.

    Args:
        state: State at the quench
        h1: Post-quench quadratic form
        t: Time, t ≥ 0

    Returns:
        CovarianceState at time t
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    return CovarianceEvolver(h1).evolve(state, t)


def _pair_rows(size: int, j: int) -> list:
    k = (j + 1) % size
    return [2 * j, 2 * j + 1, 2 * k, 2 * k + 1]


def pair_coefficients(block: np.ndarray, wrap: bool = False) -> Dict[str, float]:
    """
    Pauli coefficients ⟨σ^α_j σ^β_k⟩ of an adjacent pair from its 4×4 Γ block.

    The block is ordered (A_j, B_j, A_k, B_k). Parity-odd coefficients are zero.

    Args:
        block: Covariance block
        wrap: The pair closes the ring, so bond correlators change sign

    Returns:
        Mapping "αβ" -> value for the non-zero coefficients
    """
    sign = -1.0 if wrap else 1.0
    return {
        "00": 1.0,
        "z0": -block[0, 1],
        "0z": -block[2, 3],
        "xx": -sign * block[1, 2],
        "yy": sign * block[0, 3],
        "xy": -sign * block[1, 3],
        "yx": sign * block[0, 2],
        "zz": float(np.real(pfaffian(np.ascontiguousarray(0.5 * (block - block.T), dtype=float)))),
    }


def _rho_from_coefficients(coefficients: Dict[str, float]) -> np.ndarray:
    rho = np.zeros((4, 4), dtype=complex)
    for key, value in coefficients.items():
        rho += value * np.kron(_PAULI[key[0]], _PAULI[key[1]])
    return rho / 4.0


def site_magnetization(state: CovarianceState, j: int) -> float:
    """⟨Zⱼ⟩ = −Γ[A_j, B_j]."""
    return float(-state.majorana_cov[2 * j, 2 * j + 1])


def single_site_rdm(state: CovarianceState, j: int) -> np.ndarray:
    """
    ρⱼ = (1 + ⟨Zⱼ⟩Z)/2. ⟨Xⱼ⟩ and ⟨Yⱼ⟩ carry an odd number of Majoranas and vanish.
    """
    mz = site_magnetization(state, j)
    return 0.5 * (_PAULI["0"] + mz * _PAULI["z"])


def pair_rdm(state: CovarianceState, j: int) -> PairRDM:
    """
    Reduced density matrix of sites (j, j+1 mod N).

    The pairs starting on even and on odd j share their spectrum when d = 0
    on both sides of the quench. A DM term breaks the reflection relating
    them and the spectra separate for t > 0.

    Args:
        state: Gaussian state
        j: First site, 0-based

    Returns:
        PairRDM
    """
    rows = _pair_rows(state.size, j)
    block = state.majorana_cov[np.ix_(rows, rows)]
    return _pair_from_block(block, j, state.size)


def local_pair_rdm(evolver: CovarianceEvolver, state: CovarianceState, t: float, j: int) -> PairRDM:
    """``pair_rdm`` of the evolved state using only the four needed rows of O(t)."""
    block = evolver.local_block(state, t, _pair_rows(state.size, j))
    return _pair_from_block(block, j, state.size)


def local_site_rdm(evolver: CovarianceEvolver, state: CovarianceState, t: float, j: int) -> np.ndarray:
    block = evolver.local_block(state, t, [2 * j, 2 * j + 1])
    return 0.5 * (_PAULI["0"] - block[0, 1] * _PAULI["z"])


def _pair_from_block(block: np.ndarray, j: int, size: int) -> PairRDM:
    k = (j + 1) % size
    rho = _rho_from_coefficients(pair_coefficients(block, wrap=k == 0))
    return PairRDM(rho=rho, sites=(j, k), site_parity="odd-even" if j % 2 == 0 else "even-odd")
