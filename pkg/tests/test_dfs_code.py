from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfsaqc import dfs_code
from dfsaqc.dfs_code import (
    LeakageError,
    bit_string,
    check_symmetry,
    cnot_check,
    cnot_circuit,
    dfs_basis,
    embed,
    lift,
    logical_op,
    logical_zz,
    project,
    restrict,
)
from dfsaqc.spinlab import Operator, QuantumState, Space, SpaceKind, evolve, pauli, total_z, xxx_pairs


def _logical_state(n_l, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(2**n_l) + 1j * rng.standard_normal(2**n_l)
    return QuantumState.normalized(v, Space.logical(n_l))


@pytest.mark.parametrize("n", range(2, 15, 2))
def test_sector_dimension(n):
    assert len(dfs_basis(n).dfs_indices) == comb(n, n // 2)
    assert len(dfs_basis(n).logical_indices) == 2 ** (n // 2)


def test_four_spin_sector_listing():
    listed = [bit_string(i, 4) for i in dfs_basis(4).dfs_indices]
    assert set(listed) == {"dduu", "dudu", "duud", "uddu", "udud", "uudd"}
    # ascending integer order with up = 0
    assert listed == ["uudd", "udud", "uddu", "duud", "dudu", "dduu"]


def test_two_spins_sector_equals_logical():
    smap = dfs_basis(2)
    assert list(smap.dfs_indices) == list(smap.logical_indices) == [0b01, 0b10]


def test_six_spin_sizes():
    smap = dfs_basis(6)
    assert (len(smap.dfs_indices), len(smap.logical_indices)) == (20, 8)
    assert [bit_string(i, 6) for i in smap.logical_indices[:2]] == ["ududud", "ududdu"]


def test_tz_and_tx_on_one_pair():
    zero = np.zeros(4, dtype=complex)
    zero[0b01] = 1
    one = np.zeros(4, dtype=complex)
    one[0b10] = 1
    tz = logical_op("Tz", 1, 2).toarray()
    tx = logical_op("Tx", 1, 2).toarray()
    assert np.allclose(tz @ zero, zero)
    assert np.allclose(tz @ one, -one)
    assert np.allclose(tx @ zero, one)


@pytest.mark.parametrize("pair", [1, 2, 3])
def test_logical_pauli_table(pair):
    n = 6
    pos = dfs_basis(n).logical_indices
    T = {k: restrict(logical_op(k, pair, n), SpaceKind.LOGICAL).toarray() for k in ("Tx", "Ty", "Tz")}
    I = np.eye(len(pos))
    for k in T:
        assert np.max(np.abs(T[k] @ T[k] - I)) < 1e-12
    assert np.max(np.abs(T["Tx"] @ T["Ty"] - 1j * T["Tz"])) < 1e-12
    assert np.max(np.abs(T["Ty"] @ T["Tz"] - 1j * T["Tx"])) < 1e-12
    assert np.max(np.abs(T["Tz"] @ T["Tx"] - 1j * T["Ty"])) < 1e-12
    comm = T["Tx"] @ T["Ty"] - T["Ty"] @ T["Tx"]
    assert np.max(np.abs(comm - 2j * T["Tz"])) < 1e-12


def test_logical_zz_examples():
    zz = logical_zz(1, 2, 4)
    pos = dfs_basis(4).logical_indices
    assert zz.toarray()[pos[0], pos[0]] == pytest.approx(1.0)
    assert np.max(np.abs((zz @ total_z(4) - total_z(4) @ zz).toarray())) == 0
    prod = (logical_op("Tz", 1, 4) @ logical_op("Tz", 2, 4)).toarray()
    block = np.ix_(pos, pos)
    assert np.allclose(zz.toarray()[block], prod[block], atol=1e-12)


def test_logical_zz_differs_from_tz_product_off_the_code():
    zz = logical_zz(1, 2, 4).toarray()
    prod = (logical_op("Tz", 1, 4) @ logical_op("Tz", 2, 4)).toarray()
    assert not np.allclose(zz, prod)


def test_check_symmetry_examples():
    assert check_symmetry(xxx_pairs(6, 1.0))[0]
    assert not check_symmetry(pauli("X", 0, 4))[0]
    w = np.zeros(64)
    w[dfs_basis(6).logical_indices[3]] = 1
    assert check_symmetry(Operator.outer(w, Space.full(6), -1.0))[0]


@settings(max_examples=20, deadline=None)
@given(n_l=st.integers(1, 4), seed=st.integers(0, 2**31))
def test_embed_project_round_trip(n_l, seed):
    psi = _logical_state(n_l, seed)
    full = embed(psi, SpaceKind.FULL)
    back = project(full, SpaceKind.LOGICAL)
    assert back.leakage < 1e-14
    assert np.allclose(back.state.amplitudes, psi.amplitudes)


def test_project_sector_state_out_of_code():
    psi = QuantumState.basis(0b0011, Space.full(4))
    proj = project(psi, SpaceKind.LOGICAL)
    assert proj.leakage == pytest.approx(1.0)
    assert proj.flagged
    with pytest.raises(LeakageError):
        embed(psi, SpaceKind.LOGICAL)


def test_embedded_uniform_state_has_zero_magnetization():
    s = QuantumState(np.full(8, 1 / np.sqrt(8)), Space.logical(3))
    full = embed(s, SpaceKind.FULL).amplitudes
    tz = total_z(6).apply(full)
    assert np.max(np.abs(tz)) < 1e-15


def test_restrict_lift_round_trip():
    H = xxx_pairs(6, 1.0)
    small = restrict(H, SpaceKind.DFS)
    big = lift(small, SpaceKind.FULL).toarray()
    pos = dfs_basis(6).dfs_indices
    assert np.allclose(big[np.ix_(pos, pos)], H.toarray()[np.ix_(pos, pos)])


@settings(max_examples=15, deadline=None)
@given(
    n=st.sampled_from([4, 6, 8]),
    a=st.floats(-2, 2),
    b=st.floats(-2, 2),
    t=st.floats(0.1, 5),
    seed=st.integers(0, 2**31),
)
def test_symmetric_evolution_stays_in_sector(n, a, b, t, seed):
    zz = pauli("Z", 0, n) @ pauli("Z", n - 1, n)
    H = xxx_pairs(n, 1.0) + a * total_z(n) + b * Operator(zz.matrix, zz.space)
    assert check_symmetry(H)[0]
    rng = np.random.default_rng(seed)
    pos = dfs_basis(n).dfs_indices
    v = np.zeros(2**n, dtype=complex)
    v[pos] = rng.standard_normal(len(pos)) + 1j * rng.standard_normal(len(pos))
    out = evolve(H, QuantumState.normalized(v, Space.full(n)), t)
    assert dfs_code.leakage(np.array(out.amplitudes), n, SpaceKind.DFS) < 1e-10


def test_cnot_truth_table_and_unitarity():
    U, leak = cnot_circuit(4)
    phase = U[0, 0] / abs(U[0, 0])
    e = np.eye(4)
    assert np.allclose(U @ e[2] / phase, e[3], atol=1e-12)
    assert np.allclose(U @ e[0] / phase, e[0], atol=1e-12)
    assert np.max(np.abs(U.conj().T @ U - np.eye(4))) < 1e-10
    assert leak < 1e-12
    assert cnot_check(4) < 1e-8
