import itertools

import numpy as np
import pytest

from src.physics.bdg import vacuum_energy
from src.physics.exact import (
    DenseState,
    build_spin_hamiltonian,
    check_sector_match,
    diagonalize_sector,
    evolve,
    expectation,
    finite_size_rates,
    ground_state,
    loschmidt_echo_ed,
    max_subset_eigenvalue,
    oracle_suite,
    parity_operator,
    rdm_partial_trace,
    sector_indices,
    trajectory,
)
from src.physics.loschmidt import rate_function
from src.physics.model import CouplingSet, MomentumGrid, QuenchSpec
from src.utils.errors import InvalidState, SizeLimit

GAMMA = 0.8
G0 = (1.5, 0.0, 0.0)


@pytest.mark.parametrize("size", [3, 14, 2])
def test_size_limit(size):
    with pytest.raises(SizeLimit):
        build_spin_hamiltonian(CouplingSet.point(GAMMA, *G0), size)


def test_hamiltonian_is_hermitian_and_conserves_parity():
    h = build_spin_hamiltonian(CouplingSet.point(GAMMA, 0.4, 0.2, 1.0), 6).matrix
    assert abs(h - h.conj().T).max() < 1e-14
    p = parity_operator(6)
    assert abs(h @ p - p @ h).max() < 1e-14


def test_sector_sizes():
    assert sector_indices(8, 1).size == 128
    assert sector_indices(8, -1).size == 128
    assert sector_indices(8, 1)[0] == 0


@pytest.mark.parametrize("size", [8, 12])
@pytest.mark.parametrize("fields", [(1.5, 0.0, 0.0), (0.0, 0.2, 0.0), (-0.5, 1.5, 0.0), (1.5, 0.0, 0.3)])
def test_sector_gate(size, fields):
    g = CouplingSet.point(GAMMA, *fields)
    assert check_sector_match(g, size) < 1e-8
    ed = ground_state(build_spin_hamiltonian(g, size)).energy
    assert abs(ed - vacuum_energy(g, MomentumGrid.for_chain(size).phis)) < 1e-10


@pytest.mark.parametrize("final", [(0.0, 0.2, 0.0), (0.4, 0.2, 1.0)])
@pytest.mark.parametrize("size", [8, 12])
def test_mode_product_matches_exact_echo(size, final):
    q = QuenchSpec.between(GAMMA, G0, final)
    times = np.linspace(0.0, 10.0, 200)
    modes = np.exp(-0.5 * size * rate_function(q, MomentumGrid.for_chain(size), times).values)
    exact = np.abs(loschmidt_echo_ed(q, size, times)["G"].to_numpy())
    assert np.max(np.abs(modes - exact)) < 1e-8


def test_echo_table():
    q = QuenchSpec.between(GAMMA, G0, (0.0, 0.2, 0.0))
    table = loschmidt_echo_ed(q, 8, [0.0, 1.0])
    assert list(table.columns) == ["t", "G", "echo", "rate"]
    assert np.isclose(table["echo"].iloc[0], 1.0)
    assert abs(table["rate"].iloc[0]) < 1e-12


def test_dense_state_checks_norm():
    with pytest.raises(InvalidState):
        DenseState(size=2, amplitudes=np.array([1.0, 1.0, 0.0, 0.0]))
    with pytest.raises(InvalidState):
        DenseState(size=2, amplitudes=np.array([1.0, 0.0]))


def test_evolution_conserves_norm_and_energy():
    g0 = CouplingSet.point(GAMMA, *G0)
    g1 = CouplingSet.point(GAMMA, 0.4, 0.2, 1.0)
    psi0 = ground_state(build_spin_hamiltonian(g0, 8)).state
    h1 = build_spin_hamiltonian(g1, 8)
    e0 = expectation(psi0, h1)
    for t in (0.5, 3.0, 12.0):
        psi_t = evolve(psi0, h1, t)
        assert abs(np.linalg.norm(psi_t.amplitudes) - 1.0) < 1e-10
        assert abs(expectation(psi_t, h1) - e0) < 1e-9


def test_trajectory_matches_single_steps():
    g0 = CouplingSet.point(GAMMA, *G0)
    psi0 = ground_state(build_spin_hamiltonian(g0, 8)).state
    spectrum = diagonalize_sector(build_spin_hamiltonian(CouplingSet.point(GAMMA, 0.0, 0.2, 0.0), 8), 1)
    times = [0.0, 0.7, 2.5]
    rows = trajectory(psi0, spectrum, times)
    for t, row in zip(times, rows):
        assert np.allclose(row, evolve(psi0, spectrum, t).amplitudes, atol=1e-12)


def test_partial_trace_of_product_state():
    psi = np.zeros(2 ** 4, dtype=complex)
    psi[0b0100] = 1.0  # site 1 flipped
    assert np.allclose(rdm_partial_trace(psi, [0]), np.diag([1.0, 0.0]))
    assert np.allclose(rdm_partial_trace(psi, [1]), np.diag([0.0, 1.0]))
    pair = rdm_partial_trace(psi, [1, 0])
    assert np.isclose(pair[2, 2], 1.0)
    with pytest.raises(ValueError):
        rdm_partial_trace(psi, [0, 0])


def test_max_subset_eigenvalue_of_bell_pair():
    psi = np.zeros(4, dtype=complex)
    psi[0] = psi[3] = 1 / np.sqrt(2)
    assert np.isclose(max_subset_eigenvalue(psi, [0]), 0.5)
    assert np.isclose(max_subset_eigenvalue(psi, [0, 1]), 1.0)


def test_finite_size_rates_columns():
    q = QuenchSpec.between(GAMMA, G0, (0.0, 0.2, 0.0))
    table = finite_size_rates(q, [4, 8], [0.0, 0.5, 1.0], n_modes=256)
    assert list(table.columns) == ["t", "F", "F_4", "F_8", "monotone"]
    assert table["monotone"].dtype == bool


def test_oracle_suite_passes():
    table = oracle_suite(8)
    assert list(table.columns) == ["check", "value", "tolerance", "passed"]
    assert set(table["check"]) >= {"sector_gate_1", "loschmidt_modulus_1", "loschmidt_modulus_2",
                                   "ground_energy", "site_rdm", "pair_rdm"}
    assert table["passed"].all(), table.to_string()


@pytest.mark.parametrize("field", [0.5, 1.5])
def test_uniform_field_spectrum_matches_free_fermions(field):
    size = 8
    g = CouplingSet.point(1.0, field, 0.0, 0.0)
    energies = diagonalize_sector(build_spin_hamiltonian(g, size), 1).energies
    # even sector: antiperiodic momenta, even number of quasiparticles
    ks = (2 * np.arange(size) + 1) * np.pi / size
    eps = np.sqrt(1.0 + field ** 2 - 2.0 * field * np.cos(ks))
    vacuum = -0.5 * np.sum(eps)
    levels = sorted(
        vacuum + float(np.dot(occupation, eps))
        for occupation in itertools.product((0, 1), repeat=size)
        if sum(occupation) % 2 == 0
    )
    assert energies.size == len(levels) == 2 ** (size - 1)
    assert np.max(np.abs(np.sort(energies) - np.array(levels))) < 1e-10
