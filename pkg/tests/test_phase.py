import math

import numpy as np
import pytest
from pydantic import ValidationError

from src.physics.bdg import mode_spectrum
from src.physics.model import CouplingSet, MomentumGrid, PhaseLabel, QuenchSpec, point_on_plane
from src.physics.phase import (
    boundary_values,
    classify_phase,
    gapless_fraction,
    min_quasiparticle_gap,
    phase_diagram,
    segment_crosses_boundary,
)

GAMMA = 0.8


@pytest.mark.parametrize(
    "fields, expected",
    [
        ((1.5, 0.0, 0.0), PhaseLabel.PM_I),
        ((0.0, 0.2, 0.0), PhaseLabel.AFM),
        ((-0.5, 1.5, 0.0), PhaseLabel.PM_II),
        ((0.4, 0.2, 1.0), PhaseLabel.CH),
        ((1.8, 0.1, 0.0), PhaseLabel.PM_I),
    ],
)
def test_anchor_points(fields, expected):
    assert classify_phase(CouplingSet.point(GAMMA, *fields)) == expected


@pytest.mark.parametrize(
    "fields",
    [
        (1.0, 0.0, 0.0),   # first boundary function vanishes
        (0.5, 0.0, 0.8),   # |d| = gamma
        (0.3, 0.3, 1.0),   # fourth boundary function vanishes
    ],
)
def test_boundary_points(fields):
    assert classify_phase(CouplingSet.point(GAMMA, *fields)) == PhaseLabel.BOUNDARY


def test_boundary_values_at_pm_anchor():
    b1, b2, b3, b4 = boundary_values(CouplingSet.point(GAMMA, 1.5, 0.0, 0.0))
    assert np.isclose(b1, 1.25)
    assert np.isclose(b2, -2.25 - 0.64)
    assert np.isclose(b4, 2.25)


def test_gap_open_in_paramagnet_and_small_at_boundary():
    grid = MomentumGrid.midpoint(512)
    assert min_quasiparticle_gap(CouplingSet.point(GAMMA, 1.5, 0.0, 0.0), grid) > 0.1
    assert min_quasiparticle_gap(CouplingSet.point(GAMMA, 1.0, 0.0, 0.0), grid) < 0.05


@pytest.mark.parametrize("fields", [(1.5, 0.0, 0.0), (0.0, 0.2, 0.0), (-0.5, 1.5, 0.0)])
def test_gap_is_half_the_spacing_across_zero_without_dm(fields):
    g = CouplingSet.point(GAMMA, *fields)
    grid = MomentumGrid.midpoint(64)
    energies = mode_spectrum(g, grid.phis)
    spacing = np.min(energies[:, 2] - energies[:, 1])
    assert np.isclose(min_quasiparticle_gap(g, grid), 0.5 * spacing, atol=1e-12)


def test_gapless_fraction_is_a_share():
    grid = MomentumGrid.midpoint(256)
    value = gapless_fraction(CouplingSet.point(GAMMA, 1.5, 0.0, 0.0), grid)
    assert value == 0.0


def test_segment_crossing_detected():
    q = QuenchSpec.between(GAMMA, (1.5, 0.0, 0.0), (0.0, 0.2, 0.0))
    result = segment_crosses_boundary(q)
    assert result.crosses
    assert all(0.0 < s < 1.0 for s in result.parameters)


def test_segment_inside_one_phase():
    q = QuenchSpec.between(GAMMA, (1.5, 0.0, 0.0), (1.8, 0.1, 0.0))
    assert not segment_crosses_boundary(q).crosses


def test_trivial_segment():
    q = QuenchSpec.between(GAMMA, (1.5, 0.0, 0.0), (1.5, 0.0, 0.0))
    assert segment_crosses_boundary(q).crosses is False


def test_phase_diagram_table():
    xs = np.array([-0.5, 1.5])
    ys = np.array([0.0, 1.5])
    table = phase_diagram("lambda1-lambda2", xs, ys, GAMMA, fixed=0.0, n_modes=64)
    assert list(table.columns) == ["x", "y", "phase", "min_gap"]
    assert len(table) == 4
    assert table.iloc[0][["x", "y"]].tolist() == [-0.5, 0.0]
    assert set(table["phase"]) <= {label.value for label in PhaseLabel} | {"AMBIGUOUS"}
    pm = table[(table["x"] == 1.5) & (table["y"] == 0.0)]
    assert pm["phase"].item() == "PM_I"
    assert (table["min_gap"] >= 0).all()


@pytest.mark.parametrize(
    "fields, family",
    [
        ((1.0, 1.5, 0.0, 0.0), "TFI"),
        ((0.8, 1.5, 0.0, 0.0), "UXY"),
        ((0.8, 1.5, 0.2, 0.0), "ATXY"),
        ((0.8, 1.5, 0.0, 0.3), "DUXY"),
        ((0.8, 1.5, 0.2, 0.3), "DATXY"),
    ],
)
def test_family(fields, family):
    assert CouplingSet.point(*fields).family() == family


def test_coupling_validation():
    with pytest.raises(ValidationError):
        CouplingSet.point(0.0, 1.0, 0.0, 0.0)
    with pytest.raises(ValidationError):
        CouplingSet.point(0.8, math.inf, 0.0, 0.0)


def test_quench_rejects_chiral_start():
    with pytest.raises(ValidationError):
        QuenchSpec.between(GAMMA, (0.4, 0.2, 1.0), (1.5, 0.0, 0.0))


def test_quench_rejects_changed_anisotropy():
    with pytest.raises(ValidationError):
        QuenchSpec(initial=CouplingSet.point(0.8, 1.5, 0, 0), final=CouplingSet.point(1.0, 0, 0.2, 0))


def test_chain_momenta():
    grid = MomentumGrid.for_chain(8)
    assert np.allclose(grid.phis, [math.pi / 8, 3 * math.pi / 8])
    assert np.allclose(grid.phis, MomentumGrid.midpoint(2).phis)
    assert np.isclose(grid.weights.sum(), math.pi / 2)
    with pytest.raises(ValueError):
        MomentumGrid.for_chain(6)


@pytest.mark.parametrize(
    "plane, expected",
    [
        ("lambda1-lambda2", (0.3, -0.2, 0.7)),
        ("lambda1-d", (0.3, 0.7, -0.2)),
        ("lambda2-d", (0.7, 0.3, -0.2)),
    ],
)
def test_point_on_plane(plane, expected):
    assert point_on_plane(GAMMA, plane, 0.3, -0.2, 0.7).fields() == expected
