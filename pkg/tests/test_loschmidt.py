import math

import numpy as np
import pytest

from src.physics.loschmidt import (
    CriticalTimes,
    RateSeries,
    amplitude_profile,
    compare_detectors,
    cusp_times,
    detect_dqpt,
    find_critical_times,
    golden_section,
    min_mode_modulus,
    rate_function,
    scan_region,
    tfi_reference_times,
)
from src.physics.model import CouplingSet, MomentumGrid, QuenchSpec
from src.utils.data_processing import axis_values
from src.utils.errors import NoSolution

GAMMA = 0.8
G0 = (1.5, 0.0, 0.0)


def test_golden_section_finds_parabola_minimum():
    x, fx = golden_section(lambda v: (v - 0.3) ** 2 + 1.0, 0.0, 1.0)
    assert abs(x - 0.3) < 1e-6
    assert abs(fx - 1.0) < 1e-10


def test_rate_vanishes_at_zero_and_modulus_bounded():
    q = QuenchSpec.between(GAMMA, G0, (0.4, 0.2, 1.0))
    grid = MomentumGrid.midpoint(256)
    series = rate_function(q, grid, np.linspace(0.0, 10.0, 101))
    assert abs(series.values[0]) < 1e-8
    assert np.all(series.values >= -1e-9)
    for t in (0.0, 1.3, 4.7, 9.9):
        moduli = [abs(a.value) for a in amplitude_profile(q, grid, t)]
        assert max(moduli) <= 1.0 + 1e-9


def test_rate_series_frame():
    q = QuenchSpec.between(GAMMA, G0, (0.0, 0.2, 0.0))
    series = rate_function(q, MomentumGrid.midpoint(64), [0.0, 0.5, 1.0])
    frame = series.to_frame()
    assert list(frame.columns) == ["t", "F"]
    assert len(frame) == 3


def test_rate_rejects_unsorted_times():
    q = QuenchSpec.between(GAMMA, G0, (0.0, 0.2, 0.0))
    with pytest.raises(ValueError):
        rate_function(q, MomentumGrid.midpoint(16), [1.0, 0.5])


def test_commuting_quench_has_flat_rate():
    q = QuenchSpec.between(GAMMA, (0.5, 0.0, 0.2), (0.5, 0.0, 1.5))
    series = rate_function(q, MomentumGrid.midpoint(256), np.arange(0.0, 20.0 + 1e-9, 0.1))
    assert np.max(np.abs(series.values)) <= 1e-8


def test_trivial_quench_has_no_critical_times():
    q = QuenchSpec.between(GAMMA, G0, G0)
    found = find_critical_times(q, MomentumGrid.midpoint(64), t_max=5.0)
    assert len(found) == 0
    assert math.isnan(found.spacing_stats["min"])
    assert list(found.to_frame().columns) == ["n", "t_star", "phi_star", "residual"]


def test_critical_times_are_zeros_of_the_amplitude():
    q = QuenchSpec.between(GAMMA, G0, (0.0, 0.2, 0.0))
    grid = MomentumGrid.midpoint(256)
    found = find_critical_times(q, grid, t_max=10.0, dt=0.02)
    assert len(found) > 0
    assert np.all(np.diff(found.times) > 0)
    for entry in found.entries:
        assert entry.residual < 1e-6
        assert 0.0 < entry.phi_star < math.pi / 2
        m, _ = min_mode_modulus(q, grid, entry.t_star)
        assert m < 0.05


@pytest.mark.slow
@pytest.mark.parametrize(
    "final, expected",
    [
        ((0.0, 0.2, 0.0), True),
        ((-0.5, 1.5, 0.0), True),
        ((0.4, 0.2, 1.0), True),
        ((1.8, 0.1, 0.0), False),
        (G0, False),
    ],
)
def test_dqpt_anchor_quenches(final, expected):
    q = QuenchSpec.between(GAMMA, G0, final)
    assert detect_dqpt(q, MomentumGrid.midpoint(512), t_max=20.0, dt=0.02) is expected


@pytest.mark.slow
def test_tfi_critical_times_match_closed_form():
    q = QuenchSpec.between(1.0, (0.5, 0.0, 0.0), (1.5, 0.0, 0.0))
    reference = tfi_reference_times(q, n_max=5)
    found = find_critical_times(q, MomentumGrid.midpoint(512), t_max=reference[-1] + 1.0, dt=0.02)
    assert len(reference) == 5
    assert len(found) >= 5
    assert np.allclose(found.times[:5], reference, rtol=1e-4, atol=0.0)
    gaps = np.diff(found.times[:5])
    assert gaps.max() / gaps.min() < 1 + 1e-3


@pytest.mark.slow
def test_chiral_quench_times_are_not_uniform():
    q = QuenchSpec.between(GAMMA, G0, (0.4, 0.2, 1.0))
    found = find_critical_times(q, MomentumGrid.midpoint(512), t_max=20.0, dt=0.02)
    assert len(found) >= 3
    stats = found.spacing_stats
    assert stats["max"] / stats["min"] > 1.01


def test_reference_times_need_uniform_field_family():
    q = QuenchSpec.between(GAMMA, G0, (0.0, 0.2, 0.0))
    with pytest.raises(ValueError):
        tfi_reference_times(q)


def _kink_series(times, values):
    q = QuenchSpec.between(GAMMA, G0, G0)
    return RateSeries(times=np.asarray(times), values=np.asarray(values), grid=MomentumGrid.midpoint(4), quench=q)


def test_cusp_detector_finds_kink():
    times = np.linspace(0.0, 2.0, 201)
    series = _kink_series(times, np.abs(times - 1.0))
    cusps = cusp_times(series)
    assert len(cusps) == 1
    assert abs(cusps[0] - 1.0) < 1e-12


def test_compare_detectors_reports_unmatched():
    times = np.linspace(0.0, 2.0, 201)
    series = _kink_series(times, np.abs(times - 1.0))
    empty = CriticalTimes(entries=[], spacing_stats={})
    result = compare_detectors(series, empty)
    assert result["unmatched_cusps"] == [pytest.approx(1.0)]
    assert result["unmatched_critical"] == []


def test_scan_region_table():
    g0 = CouplingSet.point(GAMMA, *G0)
    xs = [0.0, 1.8]
    ys = [0.1, 0.2]
    table = scan_region(g0, "lambda1-lambda2", xs, ys, fixed=0.0, t_max=8.0, n_modes=128, dt=0.02, threads=1)
    assert list(table.columns) == ["x", "y", "dqpt", "n_tstar", "first_tstar", "crosses", "error"]
    assert table[["x", "y"]].values.tolist() == [[0.0, 0.1], [0.0, 0.2], [1.8, 0.1], [1.8, 0.2]]
    assert not (table["dqpt"] & ~table["crosses"]).any()
    assert not table.loc[table["x"] == 1.8, "crosses"].any()


def test_reference_times_need_a_crossing():
    # 0.5 -> 0.8 stays on one side of lambda1 = 1
    q = QuenchSpec.between(1.0, (0.5, 0.0, 0.0), (0.8, 0.0, 0.0))
    with pytest.raises(NoSolution):
        tfi_reference_times(q)


@pytest.mark.slow
def test_rate_function_converges_in_modes():
    q = QuenchSpec.between(GAMMA, G0, (0.0, 0.2, 0.0))
    critical = find_critical_times(q, MomentumGrid.midpoint(512), t_max=20.0, dt=0.02).times
    assert critical.size > 0
    candidates = np.linspace(0.3, 19.7, 60)
    times = np.array([t for t in candidates if np.min(np.abs(critical - t)) > 0.5][:10])
    assert times.size == 10
    coarse = rate_function(q, MomentumGrid.midpoint(2048), times).values
    fine = rate_function(q, MomentumGrid.midpoint(4096), times).values
    assert np.max(np.abs(coarse - fine)) <= 1e-6


@pytest.mark.slow
def test_dqpt_implies_boundary_crossing_on_full_plane():
    g0 = CouplingSet.point(GAMMA, *G0)
    axis = axis_values(-2.0, 2.0, 21)
    table = scan_region(g0, "lambda1-lambda2", axis, axis, fixed=0.0, t_max=20.0, n_modes=64, dt=0.05, threads=0)
    assert len(table) == 441
    clean = table[table["error"].isna()]
    violations = clean[clean["dqpt"] & ~clean["crosses"]]
    assert violations.empty, violations[["x", "y", "first_tstar"]].to_string()
    assert clean["dqpt"].any()
