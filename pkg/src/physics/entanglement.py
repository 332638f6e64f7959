"""
Entanglement measures and their post-quench dynamics.

Bipartite entanglement of neighbouring sites is measured by the (logarithmic)
negativity of the two-site RDM. Multipartite entanglement is measured by the
generalized geometric measure

    𝒢 = 1 − max over bipartitions of the largest RDM eigenvalue,

computed exactly for small rings and, for large rings, through the effective
form that only looks at ρ_e, ρ_o and ρ_eo. The fluctuation of 𝒢 over the
transient window [0, τ] serves as an order-parameter-free DQPT detector.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from src.physics import correlators, exact
from src.physics.model import CouplingSet, PhaseLabel, QuenchSpec, point_on_plane
from src.physics.phase import classify_phase
from src.utils.errors import InvalidState, SizeLimit, WindowTooShort, numerical_error_handler
from src.utils.parallel import parallel_map

logger = logging.getLogger("dqpt_lab.entanglement")

STATE_TOL = 1e-10
ENGINES = ("covariance", "ed")


@dataclass(frozen=True)
class EntanglementSeries:
    """
    Entanglement along one quench trajectory.

    Attributes:
        times: Sample times
        logneg: Log-negativity of ρ_eo
        ggm: Generalized geometric measure (effective form unless ``source`` says otherwise)
        source: "covariance" or "ed"
        table: Every tracked quantity as a DataFrame, one row per time
    """

    times: np.ndarray
    logneg: np.ndarray
    ggm: np.ndarray
    source: str
    table: pd.DataFrame

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "logneg_eo": self.logneg, "ggm": self.ggm})


@dataclass(frozen=True)
class FluctuationStat:
    tau: float
    value: float
    n_samples: int


def _check_density(rho: np.ndarray) -> None:
    if np.max(np.abs(rho - rho.conj().T)) > STATE_TOL:
        raise InvalidState("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > STATE_TOL:
        raise InvalidState(f"density matrix has trace {np.trace(rho).real!r}")
    if np.min(np.linalg.eigvalsh(rho)) < -STATE_TOL:
        raise InvalidState("density matrix has a negative eigenvalue")


def partial_transpose(rho: np.ndarray) -> np.ndarray:
    """Transpose the second qubit of a 4×4 two-qubit matrix."""
    return rho.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)


def negativity(rho: np.ndarray) -> float:
    """
    𝒩 = (‖ρ^{T_B}‖₁ − 1)/2 of a two-qubit state.

    Args:
        rho: 4×4 density matrix

    Returns:
        Non-negative negativity

    Raises:
        InvalidState: if rho is not Hermitian, trace-one and positive
    """
    _check_density(rho)
    eigenvalues = np.linalg.eigvalsh(partial_transpose(rho))
    value = 0.5 * (np.sum(np.abs(eigenvalues)) - 1.0)
    return float(max(value, 0.0))


def log_negativity(rho: np.ndarray) -> float:
    """L = log₂(2𝒩 + 1)."""
    return float(np.log2(2.0 * negativity(rho) + 1.0))


def max_eigenvalue(rho: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(rho)[-1])


def ggm_effective(mu_e: float, mu_o: float, mu_eo: float) -> float:
    """1 − max{μ_e, μ_o, μ_eo} from the largest eigenvalues of ρ_e, ρ_o, ρ_eo."""
    return float(1.0 - max(mu_e, mu_o, mu_eo))


def ggm_full(state_vector, size: Optional[int] = None) -> float:
    """
    Exact GGM: every site subset with at most N/2 sites, contiguous or not.

    Args:
        state_vector: Normalized 2^N amplitudes or an ``exact.DenseState``
        size: N, inferred from the vector when omitted

    Returns:
        𝒢 in [0, 1/2]

    Raises:
        SizeLimit: for N > 12
    """
    amplitudes = state_vector.amplitudes if isinstance(state_vector, exact.DenseState) else np.asarray(state_vector)
    n = size if size is not None else int(round(np.log2(amplitudes.size)))
    if n > exact.MAX_SITES:
        raise SizeLimit(f"full GGM is limited to N <= {exact.MAX_SITES}, got {n}")
    if abs(np.linalg.norm(amplitudes) - 1.0) > STATE_TOL:
        raise InvalidState("state vector is not normalized")
    best = max(exact.max_subset_eigenvalue(amplitudes, subset) for subset in exact.all_subsets(n, n // 2))
    return float(1.0 - best)


def ggm_fluctuation(series: EntanglementSeries, tau: float = 20.0) -> FluctuationStat:
    """
    Windowed standard deviation of 𝒢 over [t₀, τ].

    Averages use the trapezoid rule; the variance is taken in centred form,
    ⟨(𝒢 − ⟨𝒢⟩)²⟩, which equals ⟨𝒢²⟩ − ⟨𝒢⟩² for this rule.

    Args:
        series: Trajectory starting at the quench
        tau: Window end

    Returns:
        FluctuationStat

    Raises:
        WindowTooShort: if the series ends before ``tau``
    """
    times, values = series.times, series.ggm
    if times.size < 2 or times[-1] < tau - 1e-12:
        raise WindowTooShort(f"series ends at t={times[-1] if times.size else 0.0}, before tau={tau}")
    inside = times <= tau
    t, g = times[inside], values[inside]
    if t[-1] < tau:
        t = np.append(t, tau)
        g = np.append(g, np.interp(tau, times, values))
    span = t[-1] - t[0]
    mean = trapezoid(g, t) / span
    variance = trapezoid((g - mean) ** 2, t) / span
    return FluctuationStat(tau=tau, value=float(np.sqrt(max(variance, 0.0))), n_samples=int(t.size))


def _covariance_rows(q: QuenchSpec, size: int, times: np.ndarray) -> List[Dict]:
    h0 = correlators.build_bdg_realspace(q.initial, size)
    h1 = correlators.build_bdg_realspace(q.final, size)
    state = correlators.ground_covariance(h0)
    evolver = correlators.CovarianceEvolver(h1)
    rows = []
    for t in times:
        rho_o = correlators.local_site_rdm(evolver, state, t, 0)
        rho_e = correlators.local_site_rdm(evolver, state, t, 1)
        rho_oe = correlators.local_pair_rdm(evolver, state, t, 0).rho
        rho_eo = correlators.local_pair_rdm(evolver, state, t, 1).rho
        rows.append(_row(t, rho_o, rho_e, rho_oe, rho_eo))
    return rows


def _ed_rows(q: QuenchSpec, size: int, times: np.ndarray, with_full: bool) -> List[Dict]:
    psi0 = exact.ground_state(exact.build_spin_hamiltonian(q.initial, size)).state
    spectrum = exact.diagonalize_sector(exact.build_spin_hamiltonian(q.final, size), 1)
    rows = []
    for t, amplitudes in zip(times, exact.trajectory(psi0, spectrum, times)):
        row = _row(
            t,
            exact.rdm_partial_trace(amplitudes, [0]),
            exact.rdm_partial_trace(amplitudes, [1]),
            exact.rdm_partial_trace(amplitudes, [0, 1]),
            exact.rdm_partial_trace(amplitudes, [1, 2]),
        )
        if with_full:
            row["ggm_full"] = ggm_full(amplitudes, size)
        rows.append(row)
    return rows


def _row(t, rho_o, rho_e, rho_oe, rho_eo) -> Dict:
    return {
        "t": float(t),
        "logneg_eo": log_negativity(rho_eo),
        "logneg_oe": log_negativity(rho_oe),
        "ggm": ggm_effective(max_eigenvalue(rho_e), max_eigenvalue(rho_o), max_eigenvalue(rho_eo)),
        "mz_o": float(np.real(rho_o[0, 0] - rho_o[1, 1])),
        "mz_e": float(np.real(rho_e[0, 0] - rho_e[1, 1])),
    }


def entanglement_dynamics(
    q: QuenchSpec,
    size: int,
    times: Sequence[float],
    engine: str = "covariance",
    with_full: bool = False,
) -> EntanglementSeries:
    """
    Log-negativity and GGM after a quench.

    Args:
        q: Quench
        size: Ring length (multiple of 4 for the covariance engine, ≤ 12 for ED)
        times: Sample times
        engine: "covariance" or "ed"
        with_full: With ED, also record the exact GGM in column ``ggm_full``

    Returns:
        EntanglementSeries
    """
    if engine not in ENGINES:
        raise ValueError(f"unknown engine '{engine}', expected one of {ENGINES}")
    times = np.asarray(times, dtype=float)
    if engine == "covariance":
        rows = _covariance_rows(q, size, times)
    else:
        rows = _ed_rows(q, size, times, with_full)
    table = pd.DataFrame(rows)
    logger.debug(f"Entanglement dynamics: {engine}, N={size}, {times.size} times")
    return EntanglementSeries(
        times=times,
        logneg=table["logneg_eo"].to_numpy(),
        ggm=table["ggm"].to_numpy(),
        source=engine,
        table=table,
    )


def collapse_windows(
    times: Sequence[float], values: Sequence[float], threshold: float = 1e-3, min_duration: float = 1.0
) -> List[Tuple[float, float]]:
    """
    Maximal intervals where ``values`` stays below ``threshold`` for at least
    ``min_duration``.
    """
    times = np.asarray(times, dtype=float)
    quiet = np.asarray(values, dtype=float) < threshold
    windows = []
    start = None
    for k, flag in enumerate(quiet):
        if flag and start is None:
            start = k
        if start is not None and (not flag or k == quiet.size - 1):
            stop = k if flag else k - 1
            if times[stop] - times[start] >= min_duration:
                windows.append((float(times[start]), float(times[stop])))
            start = None
    return windows


def ggm_agreement_fraction(
    times: Sequence[float],
    full: Sequence[float],
    effective: Sequence[float],
    t_min: float = 2.0,
    tol: float = 1e-6,
) -> float:
    """Share of samples after ``t_min`` where full and effective GGM agree to ``tol``."""
    times = np.asarray(times, dtype=float)
    late = times > t_min
    if not np.any(late):
        return float("nan")
    diff = np.abs(np.asarray(full)[late] - np.asarray(effective)[late])
    return float(np.mean(diff <= tol))


def _fluctuation_row(g0, plane, x, y, fixed, size, tau, dt, engine) -> Dict:
    return {"x": x, "y": y, "sigma_ggm": float("nan")}


@numerical_error_handler(flag_row=_fluctuation_row)
def _fluctuation_point(
    g0: CouplingSet, plane: str, x: float, y: float, fixed: float,
    size: int, tau: float, dt: float, engine: str,
) -> Dict:
    q = QuenchSpec(initial=g0, final=point_on_plane(g0.gamma, plane, x, y, fixed))
    times = np.arange(0.0, tau + 0.5 * dt, dt)
    series = entanglement_dynamics(q, size, times, engine=engine)
    return {"x": x, "y": y, "sigma_ggm": ggm_fluctuation(series, tau).value}


def fluctuation_scan(
    g0: CouplingSet,
    plane: str,
    xs: Sequence[float],
    ys: Sequence[float],
    fixed: float = 0.0,
    tau: float = 20.0,
    engine: str = "covariance",
    size: int = 96,
    dt: float = 0.01,
    threads: int = 1,
) -> pd.DataFrame:
    """
    ⟨σ_𝒢⟩ for quenches from ``g0`` to every point of a 2-D slice.

    Only meaningful from a disordered initial phase; an ordered start is
    logged as a warning and the scan still runs.

    Returns:
        DataFrame with columns x, y, sigma_ggm, error
    """
    if classify_phase(g0) not in (PhaseLabel.PM_I, PhaseLabel.PM_II):
        logger.warning(f"Initial point {g0.fields()} is not paramagnetic; the fluctuation detector is unreliable there")
    items = [
        (g0, plane, float(x), float(y), fixed, size, tau, dt, engine)
        for x in xs for y in ys
    ]
    rows = parallel_map(_fluctuation_point, items, threads=threads, desc="ggm-scan")
    table = pd.DataFrame(rows)
    if "error" not in table:
        table["error"] = None
    logger.info(f"Fluctuation scan: {len(table)} points, engine={engine}, N={size}")
    return table[["x", "y", "sigma_ggm", "error"]]
