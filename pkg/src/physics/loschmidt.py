"""
Loschmidt amplitude, rate function and dynamical critical times.

Per momentum mode the amplitude is a sum of six phases weighted by the
two-particle overlaps of ``bdg.filling_weights``,

    G_φ(t) = Σ_S w_S(φ) exp(−i t E_S(φ)),

which equals the ratio-of-𝒯 closed form times exp(−it(ω³+ω⁴)) whenever 𝒰 is
invertible. The rate function is F(t) = −(1/π) Σ_φ w_φ log|G_φ(t)|.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import bisect, root

from src.physics.bdg import (
    QuenchOverlap,
    diagonalize_grid,
    filling_weights,
    overlap_at,
    t_entry_moduli,
)
from src.physics.model import CouplingSet, MomentumGrid, QuenchSpec, point_on_plane
from src.physics.phase import segment_crosses_boundary
from src.utils.errors import NoSolution, numerical_error_handler
from src.utils.parallel import parallel_map

logger = logging.getLogger("dqpt_lab.loschmidt")

MODULUS_FLOOR = 1e-30
CANDIDATE_LEVEL = 0.25
DEDUP_WINDOW = 1e-3
MAX_SWEEPS = 8
_TIME_CHUNK = 64

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2


@dataclass(frozen=True)
class ModeAmplitude:
    phi: float
    value: complex


@dataclass(frozen=True)
class RateSeries:
    """
    Rate function sampled on a time grid.

    Attributes:
        times: Increasing times (units ħ/J)
        values: F(t)
        grid: Momentum grid used for the quadrature
        quench: The quench
    """

    times: np.ndarray
    values: np.ndarray
    grid: MomentumGrid = field(repr=False)
    quench: QuenchSpec

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "F": self.values})


class CriticalTime(NamedTuple):
    t_star: float
    phi_star: float
    residual: float


@dataclass(frozen=True)
class CriticalTimes:
    """Refined zeros of the mode amplitude, sorted by time."""

    entries: List[CriticalTime]
    spacing_stats: Dict[str, float]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def times(self) -> np.ndarray:
        return np.array([e.t_star for e in self.entries])

    def to_frame(self) -> pd.DataFrame:
        rows = [
            {"n": n, "t_star": e.t_star, "phi_star": e.phi_star, "residual": e.residual}
            for n, e in enumerate(self.entries)
        ]
        return pd.DataFrame(rows, columns=["n", "t_star", "phi_star", "residual"])


@dataclass(frozen=True)
class _PreparedModes:
    """Filling weights and energies of a quench on a grid of angles."""

    phis: np.ndarray
    weights: np.ndarray
    energies: np.ndarray

    def amplitudes(self, times: np.ndarray) -> np.ndarray:
        """G_φ(t) for every (t, φ), shape (len(times), len(phis))."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.empty((times.size, self.phis.size), dtype=complex)
        for start in range(0, times.size, _TIME_CHUNK):
            chunk = times[start:start + _TIME_CHUNK]
            phases = np.exp(-1j * chunk[:, None, None] * self.energies[None])
            out[start:start + _TIME_CHUNK] = np.sum(phases * self.weights[None], axis=-1)
        return out


def _prepare(q: QuenchSpec, phis: np.ndarray) -> _PreparedModes:
    _, frames0 = diagonalize_grid(q.initial, phis)
    omegas1, frames1 = diagonalize_grid(q.final, phis, require_gap=False)
    weights, energies = filling_weights(frames0, frames1, omegas1)
    return _PreparedModes(phis=np.asarray(phis, dtype=float), weights=weights, energies=energies)


def mode_amplitude(ov: QuenchOverlap, t: float) -> complex:
    """
    Loschmidt amplitude of one momentum mode.

    Args:
        ov: Overlap of the pre- and post-quench frames
        t: Time, t ≥ 0

    Returns:
        G_φ(t); exactly 1 at t = 0
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    return complex(np.sum(ov.weights * np.exp(-1j * t * ov.phase_energies)))


def amplitude_profile(q: QuenchSpec, grid: MomentumGrid, t: float) -> List[ModeAmplitude]:
    """G_φ(t) on every angle of ``grid`` at one time."""
    values = _prepare(q, grid.phis).amplitudes([t])[0]
    return [ModeAmplitude(float(p), complex(v)) for p, v in zip(grid.phis, values)]


def _point_amplitude(q: QuenchSpec, phi: float, t: float) -> complex:
    return mode_amplitude(overlap_at(q.initial, q.final, phi), t)


def rate_function(q: QuenchSpec, grid: MomentumGrid, times: Sequence[float]) -> RateSeries:
    """
    F(t) by midpoint quadrature over (0, π/2).

    For ``MomentumGrid.for_chain(N)`` this is the finite-ring rate −(1/N) log L(t).

    Args:
        q: Quench
        grid: Momentum grid
        times: Sorted, non-negative times

    Returns:
        RateSeries
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or np.any(np.diff(times) < 0) or (times.size and times[0] < 0):
        raise ValueError("times must be a sorted 1-D array of non-negative values")
    modes = _prepare(q, grid.phis)
    moduli = np.maximum(np.abs(modes.amplitudes(times)), MODULUS_FLOOR)
    # reduction order must not depend on the BLAS build
    values = -np.sum(np.log(moduli) * grid.weights, axis=-1) / math.pi
    logger.debug(f"Rate function on {times.size} times, {grid.n_modes} modes")
    return RateSeries(times=times, values=values, grid=grid, quench=q)


def golden_section(
    f: Callable[[float], float], a: float, b: float, tol: float = 1e-12
) -> Tuple[float, float]:
    """
    Golden-section search for the minimum of a unimodal ``f`` on [a, b].

    Returns:
        (x_min, f(x_min))
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        return x, f(x)

    n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc, yd = f(c), f(d)
    for _ in range(n - 1):
        if yc < yd:
            b, d, yd = d, c, yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)
    return (c, yc) if yc < yd else (d, yd)


def _phi_bracket(phis: np.ndarray, k: int) -> Tuple[float, float]:
    lo = phis[k - 1] if k > 0 else 0.5 * phis[0]
    hi = phis[k + 1] if k + 1 < phis.size else 0.5 * (phis[-1] + math.pi / 2)
    return float(lo), float(hi)


def min_mode_modulus(q: QuenchSpec, grid_fine: MomentumGrid, t: float) -> Tuple[float, float]:
    """
    Smallest |G_φ(t)| over the angle, refined around the grid minimum.

    Args:
        q: Quench
        grid_fine: Angles to scan
        t: Time

    Returns:
        (m(t), φ at the minimum)
    """
    moduli = np.abs(_prepare(q, grid_fine.phis).amplitudes([t])[0])
    k = int(np.argmin(moduli))
    lo, hi = _phi_bracket(grid_fine.phis, k)
    phi, value = golden_section(lambda p: abs(_point_amplitude(q, p, t)), lo, hi)
    if value > moduli[k]:
        return float(moduli[k]), float(grid_fine.phis[k])
    return float(value), float(phi)


def _refine(
    q: QuenchSpec, phi0: float, t0: float, phi_bracket: Tuple[float, float], dt: float
) -> Tuple[float, float, float]:
    """Alternating line searches in φ and t, then a Newton polish of G = 0."""
    phi, t = phi0, t0
    best = abs(_point_amplitude(q, phi, t))
    for _ in range(MAX_SWEEPS):
        if best < 1e-9:
            break
        phi, _ = golden_section(lambda p: abs(_point_amplitude(q, p, t)), *phi_bracket)
        t, value = golden_section(lambda s: abs(_point_amplitude(q, phi, s)), t - dt, t + dt)
        stalled = value > 0.999 * best
        best = min(best, value)
        if stalled:
            break

    if best >= 1e-9:

        def residual(x):
            g = _point_amplitude(q, float(x[0]), float(x[1]))
            return [g.real, g.imag]

        try:
            sol = root(residual, [phi, t], method="hybr")
            cand_phi, cand_t = float(sol.x[0]), float(sol.x[1])
            if 0.0 < cand_phi < math.pi / 2 and cand_t > 0.0:
                value = abs(_point_amplitude(q, cand_phi, cand_t))
                if value < best:
                    phi, t, best = cand_phi, cand_t, value
        except (ValueError, ArithmeticError) as e:
            logger.debug(f"Root polish failed near t={t0:.4f}: {e}")
    return phi, t, best


def _spacing_stats(times: np.ndarray) -> Dict[str, float]:
    if times.size < 2:
        return {"min": float("nan"), "max": float("nan"), "mean": float("nan")}
    gaps = np.diff(times)
    return {"min": float(gaps.min()), "max": float(gaps.max()), "mean": float(gaps.mean())}


def find_critical_times(
    q: QuenchSpec,
    grid_fine: MomentumGrid,
    t_max: float = 20.0,
    eps_crit: float = 1e-6,
    dt: float = 0.01,
) -> CriticalTimes:
    """
    Zeros (φ*, t*) of the mode amplitude in (0, t_max].

    A (φ, t) raster with step ``dt`` gives candidate dips of m(t) below 0.25;
    each is refined and kept only if |G| < ``eps_crit`` within 5·dt of the dip.

    Args:
        q: Quench
        grid_fine: Angles of the raster
        t_max: Length of the window
        eps_crit: Acceptance threshold on |G|
        dt: Raster time step

    Returns:
        CriticalTimes, empty when no DQPT occurs
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    if q.is_trivial:
        return CriticalTimes(entries=[], spacing_stats=_spacing_stats(np.array([])))

    times = np.arange(0.0, t_max + 0.5 * dt, dt)
    moduli = np.abs(_prepare(q, grid_fine.phis).amplitudes(times))
    m = moduli.min(axis=1)
    arg = moduli.argmin(axis=1)

    accepted: List[CriticalTime] = []
    for k in range(1, times.size):
        left = m[k - 1]
        right = m[k + 1] if k + 1 < times.size else np.inf
        if not (m[k] < CANDIDATE_LEVEL and m[k] <= left and m[k] < right):
            continue
        bracket = _phi_bracket(grid_fine.phis, int(arg[k]))
        phi, t, value = _refine(q, float(grid_fine.phis[arg[k]]), float(times[k]), bracket, dt)
        if value < eps_crit and abs(t - times[k]) <= 5 * dt and 0.0 < phi < math.pi / 2 and 0 < t <= t_max:
            accepted.append(CriticalTime(t, phi, value))
        else:
            logger.debug(f"Rejected dip at t={times[k]:.3f}: |G|={value:.3e}")

    accepted.sort(key=lambda e: e.t_star)
    entries: List[CriticalTime] = []
    for entry in accepted:
        if entries and entry.t_star - entries[-1].t_star < DEDUP_WINDOW:
            if entry.residual < entries[-1].residual:
                entries[-1] = entry
            continue
        entries.append(entry)

    logger.info(f"Found {len(entries)} critical times in (0, {t_max}]")
    return CriticalTimes(entries=entries, spacing_stats=_spacing_stats(np.array([e.t_star for e in entries])))


def detect_dqpt(
    q: QuenchSpec,
    grid_fine: MomentumGrid,
    t_max: float = 20.0,
    eps_crit: float = 1e-6,
    dt: float = 0.01,
) -> bool:
    """True iff the quench has at least one critical time in (0, t_max]."""
    return len(find_critical_times(q, grid_fine, t_max, eps_crit, dt)) > 0


def _scan_point_row(g0, plane, x, y, fixed, n_modes, t_max, eps_crit, dt) -> Dict:
    return {"x": x, "y": y, "dqpt": False, "n_tstar": 0, "first_tstar": float("nan"), "crosses": False}


@numerical_error_handler(flag_row=_scan_point_row)
def _scan_point(
    g0: CouplingSet, plane: str, x: float, y: float, fixed: float,
    n_modes: int, t_max: float, eps_crit: float, dt: float,
) -> Dict:
    g1 = point_on_plane(g0.gamma, plane, x, y, fixed)
    q = QuenchSpec(initial=g0, final=g1)
    found = find_critical_times(q, MomentumGrid.midpoint(n_modes), t_max, eps_crit, dt)
    return {
        "x": x,
        "y": y,
        "dqpt": len(found) > 0,
        "n_tstar": len(found),
        "first_tstar": found.entries[0].t_star if len(found) else float("nan"),
        "crosses": segment_crosses_boundary(q).crosses,
    }


def scan_region(
    g0: CouplingSet,
    plane: str,
    xs: Sequence[float],
    ys: Sequence[float],
    fixed: float = 0.0,
    t_max: float = 20.0,
    n_modes: int = 512,
    eps_crit: float = 1e-6,
    dt: float = 0.01,
    threads: int = 1,
) -> pd.DataFrame:
    """
    DQPT map of quenches from ``g0`` to every point of a 2-D slice.

    Args:
        g0: Initial couplings, not in the CH phase
        plane: Axis pair of the slice
        xs: Values along the first axis
        ys: Values along the second axis
        fixed: Value of the third coordinate
        t_max: Length of the window
        n_modes: Midpoint modes per quench
        eps_crit: Acceptance threshold on |G|
        dt: Raster step
        threads: Worker count, 0 for all cores

    Returns:
        DataFrame with columns x, y, dqpt, n_tstar, first_tstar, crosses, error.
        Failed points carry their message in ``error`` and dqpt False.
    """
    items = [
        (g0, plane, float(x), float(y), fixed, n_modes, t_max, eps_crit, dt)
        for x in xs for y in ys
    ]
    rows = parallel_map(_scan_point, items, threads=threads, desc="dqpt-scan")
    table = pd.DataFrame(rows)
    if "error" not in table:
        table["error"] = None
    table = table[["x", "y", "dqpt", "n_tstar", "first_tstar", "crosses", "error"]]

    violations = table[table["dqpt"] & ~table["crosses"]]
    for row in violations.itertuples():
        logger.warning(f"DQPT without a boundary crossing at ({row.x}, {row.y})")
    logger.info(f"Scanned {len(table)} quenches, {int(table['dqpt'].sum())} with DQPT")
    return table


def _entry_modulus(g0: CouplingSet, g1: CouplingSet, phi: float, i: int, j: int) -> float:
    t_matrix = overlap_at(g0, g1, phi).t_matrix
    return float("inf") if t_matrix is None else float(abs(t_matrix[i, j]))


def tfi_reference_times(q_uxy: QuenchSpec, n_max: int = 5, n_phi: int = 2048) -> List[float]:
    """
    Closed-form critical times of a field quench with λ₂ = d = 0.

    Finds φ* where some |𝒯_ij| = 1 and returns t*_n = (2n + 1)π / (ωⁱ − ω^{j+2})
    for n = 0, 1, ..., sorted and cut to ``n_max`` values.

    Args:
        q_uxy: Quench with λ₂ = d = 0 on both sides
        n_max: Number of times to return
        n_phi: Angles used to bracket φ*

    Returns:
        List of critical times

    Raises:
        ValueError: if λ₂ or d is non-zero
        NoSolution: if no |𝒯_ij| reaches 1
    """
    for g in (q_uxy.initial, q_uxy.final):
        if g.family() not in ("TFI", "UXY"):
            raise ValueError(f"reference times need lambda2 = d = 0, got family {g.family()}")

    phis = MomentumGrid.midpoint(n_phi).phis
    g0, g1 = q_uxy.initial, q_uxy.final
    moduli = t_entry_moduli(g0, g1, phis)
    times: List[float] = []
    for i in range(2):
        for j in range(2):
            excess = moduli[:, i, j] - 1.0
            for k in np.flatnonzero(np.sign(excess[:-1]) * np.sign(excess[1:]) < 0):
                phi_star = bisect(
                    lambda p: _entry_modulus(g0, g1, p, i, j) - 1.0,
                    phis[k], phis[k + 1], xtol=1e-14,
                )
                if abs(_entry_modulus(g0, g1, phi_star, i, j) - 1.0) > 1e-6:
                    # jump from a level crossing, not a genuine root
                    continue
                omegas = overlap_at(g0, g1, phi_star).omegas_final
                split = abs(omegas[i] - omegas[j + 2])
                times.extend((2 * n + 1) * math.pi / split for n in range(n_max))
                logger.debug(f"|T[{i},{j}]| = 1 at phi*={phi_star:.10f}, splitting {split:.10f}")
    if not times:
        raise NoSolution("no entry of the T matrix reaches modulus 1; the quench crosses no critical line")
    # entries related by symmetry can report the same series
    distinct: List[float] = []
    for t in sorted(times):
        if not distinct or t - distinct[-1] > DEDUP_WINDOW:
            distinct.append(t)
    return distinct[:n_max]


def cusp_times(series: RateSeries, factor: float = 50.0) -> List[float]:
    """
    Times where F has a kink: local maxima of |F[k+1] − 2F[k] + F[k−1]|
    above ``factor`` times its median.
    """
    values = series.values
    if values.size < 3:
        return []
    second = np.abs(values[2:] - 2 * values[1:-1] + values[:-2])
    threshold = max(factor * float(np.median(second)), 1e-12)
    out = []
    for k in range(second.size):
        left = second[k - 1] if k > 0 else -np.inf
        right = second[k + 1] if k + 1 < second.size else -np.inf
        if second[k] > threshold and second[k] >= left and second[k] > right:
            out.append(float(series.times[k + 1]))
    return out


def compare_detectors(
    series: RateSeries, critical: CriticalTimes, window: Optional[float] = None
) -> Dict[str, List[float]]:
    """
    Cross-check kinks of F against the refined critical times.

    Args:
        series: Rate function
        critical: Critical times over the same window
        window: Matching distance; three time steps by default

    Returns:
        {"unmatched_cusps": [...], "unmatched_critical": [...]}
    """
    if window is None:
        step = float(np.median(np.diff(series.times))) if series.times.size > 1 else 0.01
        window = 3 * step
    cusps = cusp_times(series)
    t_end = series.times[-1] if series.times.size else 0.0
    crit = [t for t in critical.times if t <= t_end]
    unmatched_cusps = [c for c in cusps if not any(abs(c - t) <= window for t in crit)]
    unmatched_critical = [t for t in crit if not any(abs(c - t) <= window for c in cusps)]
    if unmatched_cusps or unmatched_critical:
        logger.warning(
            f"Detectors disagree: {len(unmatched_cusps)} cusps without a zero, "
            f"{len(unmatched_critical)} zeros without a cusp"
        )
    return {"unmatched_cusps": unmatched_cusps, "unmatched_critical": unmatched_critical}
