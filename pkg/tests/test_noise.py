import warnings

import numpy as np
import pytest

from dfsaqc.dfs_code import dfs_basis
from dfsaqc.noise import (
    SpinBath,
    StochasticBath,
    SymmetryWarning,
    constant_protocol,
    factorization_error,
    joint_evolve,
    joint_trajectory,
    protection_report,
    purity,
    search_protocol,
    sector_channel_deviation,
)
from dfsaqc.spinlab import Operator, QuantumState, Space, pauli, xxx_pairs


def _bell_across_sectors():
    v = np.zeros(4, dtype=complex)
    v[0b00] = v[0b11] = 1 / np.sqrt(2)
    return QuantumState(v, Space.full(2))


def test_sector_state_is_untouched_by_the_bath():
    H = xxx_pairs(4, 1.0)
    psi = QuantumState.basis(int(dfs_basis(4).dfs_indices[2]), Space.full(4))
    for bath in (SpinBath(1), SpinBath(2, g=0.7)):
        rho = joint_evolve(constant_protocol(H, 2.5), bath, psi)
        closed = joint_evolve(constant_protocol(H, 2.5), None, psi)
        assert abs(purity(rho) - 1) < 1e-10
        assert abs(np.real(np.trace(rho @ closed)) - 1) < 1e-10


def test_superposition_across_sectors_dephases():
    zero = Operator(np.zeros((4, 4)), Space.full(2))
    ts = np.linspace(0.1, 3.0, 30)
    purities = [purity(joint_evolve(constant_protocol(zero, t), SpinBath(1), _bell_across_sectors())) for t in ts]
    assert min(purities) < 0.9


def test_decoupled_bath_is_closed_evolution():
    H = xxx_pairs(2, 1.0) + 0.4 * pauli("X", 0, 2)
    psi = _bell_across_sectors()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SymmetryWarning)
        rho = joint_evolve(constant_protocol(H, 1.7), SpinBath(1, g=0.0), psi)
        closed = joint_evolve(constant_protocol(H, 1.7), None, psi)
    assert np.max(np.abs(rho - closed)) < 1e-12


def test_reduced_states_are_physical():
    zero = Operator(np.zeros((16, 16)), Space.full(4))
    rng = np.random.default_rng(2)
    v = rng.standard_normal(16) + 1j * rng.standard_normal(16)
    psi = QuantumState.normalized(v, Space.full(4))
    for rho in joint_trajectory(constant_protocol(zero, 2.0), SpinBath(2), psi, samples=6):
        assert abs(np.trace(rho) - 1) < 1e-12
        assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_factorization():
    protocol, _, _ = search_protocol("grover_cont", 4)
    H, t = protocol[0]
    assert factorization_error(H, SpinBath(1), t) < 1e-9
    broken = H + 0.2 * pauli("X", 1, 4)
    assert factorization_error(broken, SpinBath(1), t) > 1e-3


def test_sector_channel_is_identity():
    assert sector_channel_deviation(SpinBath(1), 4, 3.0) < 1e-10
    assert sector_channel_deviation(SpinBath(2, g=1.3, h=0.5), 4, 1.1) < 1e-10


def test_protected_grover_search():
    rep = protection_report("grover_cont", SpinBath(1, g=1.0), 4)
    assert rep.difference < 1e-8
    assert rep.fidelity_closed == pytest.approx(1.0, abs=1e-9)
    assert rep.max_leakage < 1e-10


def test_broken_symmetry_exposes_the_search():
    rep = protection_report("grover_cont", SpinBath(1, g=1.0), 4, stray_field=0.1)
    assert rep.difference > 1e-3
    assert rep.max_leakage > 1e-3


def test_symmetry_warning():
    protocol, psi, _ = search_protocol("grover_cont", 4, stray_field=0.1)
    with pytest.warns(SymmetryWarning):
        joint_evolve(protocol, SpinBath(1), psi)


def test_protected_trotterised_search():
    rep = protection_report("trotter_aqc", SpinBath(1), 4, w=2)
    assert rep.difference < 1e-8
    assert rep.fidelity_closed > 0.9


def test_stochastic_bath_leaves_sector_state_alone():
    bath = StochasticBath(ensemble=100, seed=3)
    rep = protection_report("grover_cont", bath, 4)
    assert abs(rep.fidelity_bath - 1) < 3 / np.sqrt(bath.ensemble)
    assert rep.difference < 1e-8


def test_stochastic_bath_dephases_cross_sector_states():
    zero = Operator(np.zeros((4, 4)), Space.full(2))
    bath = StochasticBath(amplitude=1.0, ensemble=100, seed=1)
    rho = joint_evolve(constant_protocol(zero, 3.0), bath, _bell_across_sectors())
    assert purity(rho) < 0.9


def test_bath_validation():
    with pytest.raises(ValueError):
        StochasticBath(ensemble=10)
    with pytest.raises(ValueError):
        protection_report("grover_cont", SpinBath(1), 8)
    with pytest.raises(ValueError):
        search_protocol("annealing", 4)
