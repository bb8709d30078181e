"""Collective dephasing testbench.

System and bath evolve under H = H_s x 1 + 1 x H_B + Z_t x B.  When H_s
commutes with Z_t and the system stays inside one Z_t sector, the coupling
only contributes a bath-side unitary and the system keeps its purity.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from . import aqc, grover
from .dfs_code import check_symmetry, dfs_basis, embed, lift
from .spinlab import Operator, QuantumState, Space, SpaceKind, pauli, total_z
from .trotter import TrotterPlan, schedule_coeffs

MAX_JOINT_SPINS = 12
MAX_BATH_SPINS = 4
MIN_ENSEMBLE = 100

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class SymmetryWarning(UserWarning):
    """The system Hamiltonian does not commute with total Z."""


def _site_sum(single: np.ndarray, m: int) -> np.ndarray:
    total = np.zeros((2**m, 2**m), dtype=complex)
    for k in range(m):
        total += np.kron(np.kron(np.eye(2**k), single), np.eye(2 ** (m - k - 1)))
    return total


@dataclass(frozen=True)
class SpinBath:
    """m bath spins, H_B = h sum X, coupling operator B = g sum Z."""

    m: int = 1
    g: float = 1.0
    h: float = 0.3

    def __post_init__(self):
        if not 1 <= self.m <= MAX_BATH_SPINS:
            raise ValueError(f"bath size {self.m} outside 1..{MAX_BATH_SPINS}")

    def hamiltonian(self) -> np.ndarray:
        return self.h * _site_sum(_X, self.m)

    def coupling(self) -> np.ndarray:
        return self.g * _site_sum(_Z, self.m)

    def ground_state(self) -> np.ndarray:
        _, vecs = la.eigh(self.hamiltonian())
        return vecs[:, 0].astype(complex)


@dataclass(frozen=True)
class StochasticBath:
    """Classical collective field eta(t) Z_t with eta an Ornstein-Uhlenbeck process."""

    amplitude: float = 0.5
    correlation_time: float = 1.0
    ensemble: int = 200
    seed: int = 0
    dt: float = 0.05

    def __post_init__(self):
        if self.ensemble < MIN_ENSEMBLE:
            raise ValueError(f"ensemble of {self.ensemble} is below {MIN_ENSEMBLE}")
        if self.correlation_time <= 0 or self.dt <= 0:
            raise ValueError("correlation time and dt must be positive")


# A protocol is a list of (H_s on FULL(n), duration) segments applied in order.
Protocol = list


def _checked(protocol: Protocol) -> int:
    if not protocol:
        raise ValueError("empty protocol")
    n = protocol[0][0].space.n
    seen = set()
    for H, _ in protocol:
        if H.space != Space.full(n):
            raise TypeError(f"protocol segments must act on FULL({n}), got {H.space}")
        if id(H) in seen:
            continue
        seen.add(id(H))
        ok, norm = check_symmetry(H)
        if not ok:
            warnings.warn(
                f"system Hamiltonian breaks the collective symmetry (|[H, Z_t]| = {norm:.3g})",
                SymmetryWarning,
                stacklevel=3,
            )
    return n


def _reduced(joint: np.ndarray, dim_sys: int) -> np.ndarray:
    psi = joint.reshape(dim_sys, -1)
    return psi @ psi.conj().T


def _spin_bath_run(protocol, bath: SpinBath, psi: np.ndarray, n: int, samples: int):
    if n + bath.m > MAX_JOINT_SPINS:
        raise ValueError(f"joint dimension 2^{n + bath.m} exceeds 2^{MAX_JOINT_SPINS}")
    ds, db = 2**n, 2**bath.m
    dephasing = np.kron(np.eye(ds), bath.hamiltonian()) + np.kron(
        total_z(n).toarray(), bath.coupling()
    )
    cache = {}
    state = np.kron(psi, bath.ground_state())
    rhos = [_reduced(state, ds)]
    for H, duration in protocol:
        key = id(H)
        if key not in cache:
            cache[key] = la.eigh(np.kron(H.toarray(), np.eye(db)) + dephasing)
        vals, vecs = cache[key]
        for _ in range(samples):
            state = vecs @ (np.exp(-1j * vals * duration / samples) * (vecs.conj().T @ state))
            rhos.append(_reduced(state, ds))
    return rhos


def _ou_path(bath: StochasticBath, steps: int, rng: np.random.Generator) -> np.ndarray:
    decay = np.exp(-bath.dt / bath.correlation_time)
    kick = bath.amplitude * np.sqrt(1 - decay**2)
    eta = np.empty(steps)
    eta[0] = bath.amplitude * rng.standard_normal()
    for k in range(1, steps):
        eta[k] = decay * eta[k - 1] + kick * rng.standard_normal()
    return eta


def _stochastic_run(protocol, bath: StochasticBath, psi: np.ndarray, n: int, samples: int):
    zt = np.real(total_z(n).toarray().diagonal())
    mats = {id(H): H.toarray() for H, _ in protocol}
    symmetric = {id(H): check_symmetry(H)[0] for H, _ in protocol}
    eig = {k: la.eigh(m) for k, m in mats.items() if symmetric[k]}
    # sample points: every segment split into `samples` equal slices
    slices = []
    for H, duration in protocol:
        for _ in range(samples):
            steps = max(1, int(np.ceil(duration / samples / bath.dt)))
            slices.append((id(H), duration / samples, steps))
    total_steps = sum(s[2] for s in slices)
    seeds = np.random.SeedSequence(bath.seed).spawn(bath.ensemble)
    acc = np.zeros((len(slices) + 1, 2**n, 2**n), dtype=complex)
    for seq in seeds:
        eta = _ou_path(bath, total_steps, np.random.default_rng(seq))
        state = psi.copy()
        acc[0] += np.outer(state, state.conj())
        k = 0
        for j, (key, length, steps) in enumerate(slices):
            h = length / steps
            for _ in range(steps):
                if key in eig:
                    vals, vecs = eig[key]
                    state = np.exp(-1j * eta[k] * zt * h) * state
                    state = vecs @ (np.exp(-1j * vals * h) * (vecs.conj().T @ state))
                else:
                    state = la.expm(-1j * h * (mats[key] + eta[k] * np.diag(zt))) @ state
                k += 1
            acc[j + 1] += np.outer(state, state.conj())
    return list(acc / bath.ensemble)


def joint_trajectory(protocol: Protocol, bath, psi_sys: QuantumState, samples: int = 1):
    """Reduced system density operators at the start and after each sample slice."""
    n = _checked(protocol)
    if psi_sys.space != Space.full(n):
        raise TypeError(f"system state must live on FULL({n}), got {psi_sys.space}")
    psi = np.array(psi_sys.amplitudes)
    if bath is None:
        return _closed_run(protocol, psi, samples)
    if isinstance(bath, SpinBath):
        return _spin_bath_run(protocol, bath, psi, n, samples)
    if isinstance(bath, StochasticBath):
        return _stochastic_run(protocol, bath, psi, n, samples)
    raise TypeError(f"unknown bath model {bath!r}")


def _closed_run(protocol, psi, samples):
    cache = {}
    rhos = [np.outer(psi, psi.conj())]
    for H, duration in protocol:
        if id(H) not in cache:
            cache[id(H)] = la.eigh(H.toarray())
        vals, vecs = cache[id(H)]
        for _ in range(samples):
            psi = vecs @ (np.exp(-1j * vals * duration / samples) * (vecs.conj().T @ psi))
            rhos.append(np.outer(psi, psi.conj()))
    return rhos


def joint_evolve(protocol: Protocol, bath, psi_sys: QuantumState) -> np.ndarray:
    """Reduced system density operator after the whole protocol (bath=None: closed system)."""
    return joint_trajectory(protocol, bath, psi_sys)[-1]


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.trace(rho @ rho)))


def constant_protocol(H: Operator, t: float) -> Protocol:
    return [(H, float(t))]


def trotter_protocol(H_i: Operator, H_f: Operator, plan: TrotterPlan) -> Protocol:
    """The trotterised product written out as piecewise-constant segments."""
    segs = []
    for f, g in plan.coeffs:
        for _ in range(plan.K):
            segs += [(H_f, g / (2 * plan.K)), (H_i, f / plan.K), (H_f, g / (2 * plan.K))]
    return [(H, d) for H, d in segs if d > 0]


def factorization_error(H_s: Operator, bath: SpinBath, t: float) -> float:
    """Spectral-norm distance between the joint propagator and dephasing x system product."""
    n = H_s.space.n
    ds, db = 2**n, 2**bath.m
    dephasing = np.kron(np.eye(ds), bath.hamiltonian()) + np.kron(
        total_z(n).toarray(), bath.coupling()
    )
    joint = la.expm(-1j * t * (np.kron(H_s.toarray(), np.eye(db)) + dephasing))
    product = la.expm(-1j * t * dephasing) @ np.kron(la.expm(-1j * t * H_s.toarray()), np.eye(db))
    return float(np.linalg.norm(joint - product, 2))


def sector_channel_deviation(bath, n: int, t: float, states: int = 8, seed: int = 0) -> float:
    """Max |rho_out - rho_in| for random sector states under pure dephasing."""
    rng = np.random.default_rng(seed)
    smap = dfs_basis(n)
    zero = Operator(np.zeros((2**n, 2**n)), Space.full(n))
    worst = 0.0
    for _ in range(states):
        v = np.zeros(2**n, dtype=complex)
        k = len(smap.dfs_indices)
        v[smap.dfs_indices] = rng.standard_normal(k) + 1j * rng.standard_normal(k)
        psi = QuantumState.normalized(v, Space.full(n))
        rho = joint_evolve(constant_protocol(zero, t), bath, psi)
        worst = max(worst, float(np.max(np.abs(rho - np.outer(v, v.conj()) / np.vdot(v, v)))))
    return worst


@dataclass(frozen=True)
class ProtectionReport:
    protocol: str
    n: int
    fidelity_bath: float
    fidelity_closed: float
    max_purity_loss: float
    max_leakage: float

    @property
    def difference(self) -> float:
        return abs(self.fidelity_bath - self.fidelity_closed)


def search_protocol(kind: str, n: int, w: int = 0, stray_field: float = 0.0, J: float = aqc.DEFAULT_J):
    """FULL-space protocol, initial state and marked FULL index for a search run.

    ``grover_cont`` searches the whole zero-magnetisation sector for ``t*``;
    ``trotter_aqc`` runs the gap-optimised trotterised search on n/2 logical
    qubits with the default T and M.  ``stray_field`` adds eps * X on spin 0
    to every segment, breaking the collective symmetry.
    """
    stray = stray_field * pauli("X", 0, n) if stray_field else None

    def dressed(H):
        return H if stray is None else H + stray

    if kind == "grover_cont":
        inst = grover.GroverInstance(Space.dfs(n), w)
        H = dressed(lift(grover.grover_h(inst), SpaceKind.FULL))
        psi0 = embed(grover.uniform_state(inst.space), SpaceKind.FULL)
        w_full = int(dfs_basis(n).dfs_indices[w])
        return constant_protocol(H, grover.optimal_time(inst.N)), psi0, w_full
    if kind == "trotter_aqc":
        n_l = n // 2
        T = aqc.default_T(n_l)
        H_log = aqc.logical_initial_h(n_l, J)
        profile = aqc.gap_profile(H_log, aqc.oracle(H_log.space, w))
        plan = schedule_coeffs(aqc.gap_schedule(profile, T, aqc.default_M(T)))
        w_full = int(dfs_basis(n).logical_indices[w])
        H_i = dressed(aqc.full_initial_h(n_l, J))
        H_f = dressed(aqc.oracle(Space.full(n), w_full))
        psi0 = embed(aqc.xxx_ground_state(n_l), SpaceKind.FULL)
        return trotter_protocol(H_i, H_f, plan), psi0, w_full
    raise ValueError(f"unknown protocol {kind!r}")


def protection_report(
    kind: str, bath, n: int = 4, w: int = 0, stray_field: float = 0.0, samples: int = 20
) -> ProtectionReport:
    """Search fidelity with and without the bath, plus purity and sector leakage."""
    if n not in (4, 6):
        raise ValueError("the protection bench runs at n = 4 or 6")
    protocol, psi0, w_full = search_protocol(kind, n, w, stray_field)
    samples = samples if len(protocol) == 1 else 1
    with warnings.catch_warnings():
        if stray_field:
            warnings.simplefilter("ignore", SymmetryWarning)
        noisy = joint_trajectory(protocol, bath, psi0, samples)
        closed = joint_trajectory(protocol, None, psi0, samples)
    sector = dfs_basis(n).dfs_indices
    loss = max(0.0, max(1.0 - purity(r) for r in noisy))
    leak = max(1.0 - float(np.real(np.trace(r[np.ix_(sector, sector)]))) for r in noisy)
    return ProtectionReport(
        kind,
        n,
        float(np.real(noisy[-1][w_full, w_full])),
        float(np.real(closed[-1][w_full, w_full])),
        loss,
        leak,
    )
