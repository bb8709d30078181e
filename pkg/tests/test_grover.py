import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfsaqc import grover
from dfsaqc.dfs_code import dfs_basis, embed, leakage, lift
from dfsaqc.grover import (
    GroverInstance,
    analytic_amplitudes,
    driver_string_check,
    driver_strings,
    grover_h,
    optimal_time,
    quoted_time,
    success_probability,
    uniform_state,
)
from dfsaqc.spinlab import Space, SpaceKind, evolve, total_z


def test_uniform_state():
    s = uniform_state(Space.logical(3))
    assert np.allclose(s.amplitudes, 1 / np.sqrt(8))
    assert s.norm() == pytest.approx(1.0)
    for w in range(8):
        assert s.amplitudes[w] == pytest.approx(1 / np.sqrt(8))


def test_grover_h_spectrum():
    inst = GroverInstance.logical(3, 5)
    ev = np.linalg.eigvalsh(grover_h(inst).toarray())
    x = inst.x
    # rank two: the span of s and w carries -1 +- x, the rest is zero
    assert np.allclose(np.sort(ev)[:2], [-1 - x, -1 + x])
    assert np.allclose(ev[2:], 0, atol=1e-12)


def test_grover_h_two_level():
    inst = GroverInstance.logical(1, 0)
    assert np.linalg.eigvalsh(grover_h(inst).toarray())[0] == pytest.approx(-(1 + 1 / np.sqrt(2)))


def test_expectation_in_uniform_state():
    inst = GroverInstance.logical(4, 3)
    s = uniform_state(inst.space).amplitudes
    val = np.vdot(s, grover_h(inst).apply(np.array(s))).real
    assert val == pytest.approx(-1 - 1 / inst.N)


def test_r_state_is_orthogonal_to_w():
    inst = GroverInstance.logical(3, 2)
    r = inst.r_state()
    assert abs(r.amplitudes[2]) < 1e-15
    assert r.norm() == pytest.approx(1.0)


def test_analytic_amplitudes_at_zero():
    a_w, a_r = analytic_amplitudes(0.0, 16)
    assert a_w == pytest.approx(0.25)
    assert a_r == pytest.approx(np.sqrt(1 - 1 / 16))


@pytest.mark.parametrize("N", [4, 16, 64, 256])
def test_peak_at_optimal_time(N):
    assert success_probability(optimal_time(N), N) == pytest.approx(1.0, abs=1e-12)
    assert success_probability(optimal_time(N), N) >= 1 - 1 / N
    assert quoted_time(N) == pytest.approx(2 * optimal_time(N))


def test_success_probability_at_zero():
    assert success_probability(0.0, 32) == pytest.approx(1 / 32)


def test_period():
    N = 64
    t = np.linspace(0, 3 * np.pi * np.sqrt(N), 4001)
    p = success_probability(t, N)
    peaks = t[1:-1][(p[1:-1] > p[:-2]) & (p[1:-1] > p[2:])]
    assert np.diff(peaks) == pytest.approx(np.pi * np.sqrt(N), rel=1e-3)


def test_amplitudes_match_numerics_n8():
    inst = GroverInstance.logical(3, 6)
    out = evolve(grover_h(inst), uniform_state(inst.space), 2.0)
    a_w, a_r = analytic_amplitudes(2.0, 8)
    assert abs(out.amplitudes[6] - a_w) < 1e-9
    assert abs(np.vdot(inst.r_state().amplitudes, out.amplitudes) - a_r) < 1e-9


@settings(max_examples=30, deadline=None)
@given(n_l=st.integers(2, 5), w=st.integers(0, 31), t=st.floats(0, 40))
def test_closed_form_matches_propagation(n_l, w, t):
    inst = GroverInstance.logical(n_l, w % 2**n_l)
    p = evolve(grover_h(inst), uniform_state(inst.space), t).probability(inst.w_index)
    assert abs(p - success_probability(t, inst.N)) < 1e-9


def test_success_independent_of_marked_state():
    t = 1.7
    probs = []
    for w in range(16):
        inst = GroverInstance.logical(4, w)
        probs.append(evolve(grover_h(inst), uniform_state(inst.space), t).probability(w))
    assert np.ptp(probs) < 1e-10


def test_sector_search_stays_in_sector():
    n = 6
    inst = GroverInstance(Space.dfs(n), 7)
    H = lift(grover_h(inst), SpaceKind.FULL)
    psi0 = embed(uniform_state(inst.space), SpaceKind.FULL)
    for t in np.linspace(0, optimal_time(inst.N), 7):
        out = evolve(H, psi0, t)
        assert leakage(np.array(out.amplitudes), n, SpaceKind.DFS) < 1e-10


def test_driver_strings_two_spins():
    total = sum(t.toarray() for t in driver_strings(2))
    expected = np.zeros((4, 4))
    expected[0b01, 0b10] = expected[0b10, 0b01] = 1
    assert np.allclose(total, expected)
    pos = dfs_basis(2).dfs_indices
    s = np.full(2, 1 / np.sqrt(2))
    assert np.allclose(total[np.ix_(pos, pos)], 2 * np.outer(s, s) - np.eye(2))


@pytest.mark.parametrize("n", [2, 4, 6])
def test_driver_string_check(n):
    assert driver_string_check(n) < 1e-12


def test_driver_strings_conserve_magnetization():
    tz = total_z(4).matrix
    for term in driver_strings(4):
        assert abs(term @ tz - tz @ term).max() < 1e-12


def test_instance_validation():
    with pytest.raises(ValueError):
        GroverInstance.logical(2, 4)
    with pytest.raises(ValueError):
        GroverInstance(Space.full(4), 0)
    with pytest.raises(ValueError):
        grover.analytic_amplitudes(1.0, 1)
