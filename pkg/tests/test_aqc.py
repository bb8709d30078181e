import numpy as np
import pytest

from dfsaqc.aqc import (
    GapProfile,
    Schedule,
    ScheduleError,
    ScheduleKind,
    adiabatic_evolve,
    continuous_reference,
    default_M,
    default_T,
    gap_profile,
    gap_schedule,
    h_interp,
    logical_initial_h,
    oracle,
    projected_initial_h,
    schedule_map,
    sign_flip_unitary,
    xxx_ground_state,
)
from dfsaqc.grover import uniform_state
from dfsaqc.spinlab import Operator, QuantumState, Space


def _search(n_l, w=0):
    H_i = logical_initial_h(n_l)
    return H_i, oracle(H_i.space, w)


def test_h_interp_endpoints():
    H_i, H_f = _search(2)
    assert np.allclose(h_interp(0.0, H_i, H_f).toarray(), H_i.toarray())
    assert np.allclose(h_interp(1.0, H_i, H_f).toarray(), H_f.toarray())
    with pytest.raises(ValueError):
        h_interp(1.5, H_i, H_f)


def test_h_interp_midpoint_one_qubit():
    H_i, H_f = _search(1)
    # 0.5 [[-1, 2], [2, -1]] + 0.5 [[-1, 0], [0, 0]] = [[-1, 1], [1, -0.5]]
    tr, det = -1.5, 0.5 - 1
    expected = tr / 2 + np.array([-1, 1]) * np.sqrt(tr**2 / 4 - det)
    assert np.allclose(np.linalg.eigvalsh(h_interp(0.5, H_i, H_f).toarray()), expected)


def test_logical_initial_h_spectrum():
    assert np.allclose(np.linalg.eigvalsh(logical_initial_h(1).toarray()), [-3, 1])
    assert np.linalg.eigvalsh(logical_initial_h(3).toarray())[0] == pytest.approx(-9)


@pytest.mark.parametrize("J", [0.5, 1.0, 2.0])
def test_logical_initial_h_is_projected_pair_coupling(J):
    diff = logical_initial_h(3, J).toarray() - projected_initial_h(3, J).toarray()
    assert np.max(np.abs(diff)) < 1e-12


def test_ground_state():
    assert np.allclose(xxx_ground_state(1).amplitudes, np.array([1, -1]) / np.sqrt(2))
    for n_l in (1, 3, 5):
        psi = xxx_ground_state(n_l)
        H = logical_initial_h(n_l, 1.5)
        assert psi.norm() == pytest.approx(1.0)
        assert np.vdot(psi.amplitudes, H.apply(np.array(psi.amplitudes))).real == pytest.approx(-4.5 * n_l)


def test_sign_flip_unitary():
    U = sign_flip_unitary(2).toarray()
    assert np.allclose(np.diag(U), [1, -1, -1, 1])
    assert np.allclose(U, U.conj().T)
    assert np.allclose(U @ U, np.eye(4))
    mapped = sign_flip_unitary(3).apply(np.array(xxx_ground_state(3).amplitudes))
    assert np.max(np.abs(mapped - uniform_state(Space.logical(3)).amplitudes)) < 1e-12


def test_sign_flip_commutes_with_oracle():
    U = sign_flip_unitary(3)
    H_f = oracle(U.space, 6)
    assert np.allclose((U @ H_f @ U).toarray(), H_f.toarray())


def test_gap_profile_endpoint():
    H_i, H_f = _search(3)
    prof = gap_profile(H_i, H_f, 128)
    assert (prof.e0[-1], prof.e1[-1]) == pytest.approx((-1.0, 0.0))
    assert prof.gap[0] == pytest.approx(4.0)


def test_min_gap_shrinks_with_size():
    small = gap_profile(*_search(3), 256)
    large = gap_profile(*_search(5), 256)
    assert large.min_gap < small.min_gap


def test_min_gap_location_seven_qubits():
    prof = gap_profile(*_search(7), 512)
    assert 0.85 < prof.argmin_s < 0.95
    assert prof.min_gap == pytest.approx(0.142, abs=5e-3)


def test_gap_profile_threads_match_serial():
    H_i, H_f = _search(4)
    a = gap_profile(H_i, H_f, 128, workers=1)
    b = gap_profile(H_i, H_f, 128, workers=4)
    assert np.array_equal(a.gap, b.gap)


def test_gap_profile_grid_floor():
    with pytest.raises(ValueError):
        gap_profile(*_search(2), 32)


def test_constant_gap_gives_linear_schedule():
    sched = gap_schedule(GapProfile.constant(0.3), 12.0, 40)
    assert np.max(np.abs(sched.values - np.arange(1, 41) / 40)) < 1e-6
    assert sched.kind is ScheduleKind.GAP_OPTIMIZED


def test_gap_schedule_endpoints_and_inverse():
    prof = gap_profile(*_search(5))
    sched = gap_schedule(prof, 100.0, 200)
    assert sched.values[-1] == 1.0
    assert sched.values[0] > 0
    forward = schedule_map(prof)
    assert np.max(np.abs(forward(sched.values) - sched.tau)) < 1e-6


def test_gap_schedule_shape_seven_qubits():
    prof = gap_profile(*_search(7))
    T = 225.0
    sched = gap_schedule(prof, T, default_M(T))
    slope = np.diff(np.concatenate([[0.0], sched.values]))
    assert np.all(slope >= 0)
    assert np.argmax(slope) in (0, len(slope) - 1)
    flat = sched.values[np.argmin(slope)]
    assert abs(flat - prof.argmin_s) < 0.02


def test_degenerate_gap_rejected():
    grid = np.linspace(0, 1, 65)
    prof = GapProfile(grid, np.zeros(65), np.abs(grid - 0.5))
    with pytest.raises(ScheduleError):
        gap_schedule(prof, 10.0, 10)


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule(1.0, [0.2, 1.3])
    with pytest.raises(ValueError):
        Schedule(1.0, [0.5, 0.9], ScheduleKind.LINEAR)
    with pytest.raises(ValueError):
        Schedule(1.0, [0.6, 0.5, 1.0], ScheduleKind.GAP_OPTIMIZED)
    lin = Schedule.linear(10.0, 5)
    assert lin.dt == 2.0
    assert np.allclose(lin.values, [0.2, 0.4, 0.6, 0.8, 1.0])


def test_default_time_chain():
    assert default_T(7) == pytest.approx(225.0)
    for n_l in range(2, 7):
        assert default_T(n_l + 1) / default_T(n_l) == pytest.approx(np.sqrt(2))
    assert default_M(225.0) == 450


def test_zero_duration_is_identity():
    H_i, H_f = _search(2)
    psi = xxx_ground_state(2)
    out = adiabatic_evolve(H_i, H_f, Schedule(0.0, [1.0], ScheduleKind.LINEAR), psi)
    assert abs(abs(out.overlap(psi)) - 1) < 1e-14


def test_slow_evolution_finds_marked_state():
    H_i, H_f = _search(3, 4)
    out = adiabatic_evolve(H_i, H_f, Schedule.linear(400.0, 400), xxx_ground_state(3), substeps=4)
    assert out.probability(4) > 0.99


def test_fidelity_grows_with_time():
    H_i, H_f = _search(3)
    target = QuantumState.basis(0, H_i.space)
    fids = [
        continuous_reference(H_i, H_f, Schedule.linear(T, int(T)), xxx_ground_state(3), target)[0]
        for T in (20.0, 30.0, 40.0, 60.0)
    ]
    assert np.all(np.diff(fids) > 0)
    assert fids[0] == pytest.approx(0.7234, abs=1e-3)


def test_continuous_reference_converges():
    H_i, H_f = _search(2)
    target = QuantumState.basis(0, H_i.space)
    fid, substeps = continuous_reference(H_i, H_f, Schedule.linear(10.0, 10), xxx_ground_state(2), target)
    finer = adiabatic_evolve(H_i, H_f, Schedule.linear(10.0, 10), xxx_ground_state(2), 2 * substeps)
    assert abs(finer.probability(0) - fid) < 1e-8


def test_commuting_hamiltonians_exact():
    space = Space.logical(2)
    H_i = Operator(np.diag([0.3, -1.0, 0.5, 2.0]), space)
    H_f = oracle(space, 1)
    psi = QuantumState(np.full(4, 0.5), space)
    out = adiabatic_evolve(H_i, H_f, Schedule.linear(5.0, 5), psi, substeps=1)
    # s(t) = t / T, so the phase is the integral of (1 - s) H_i + s H_f
    phases = np.exp(-1j * 5.0 * 0.5 * (np.diag(H_i.toarray()) + np.diag(H_f.toarray())))
    assert np.allclose(out.amplitudes, 0.5 * phases)


def test_oracle_index_check():
    with pytest.raises(ValueError):
        oracle(Space.logical(2), 4)
    with pytest.raises(ValueError):
        logical_initial_h(2, 0.0)
