"""Trotterised adiabatic search.

Each of the M steps applies (e^{-i H_f g/2K} e^{-i H_i f/K} e^{-i H_f g/2K})^K,
steps ordered right to left in l.
"""
from __future__ import annotations

import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import aqc
from .aqc import Schedule, ScheduleKind
from .dfs_code import dfs_basis, embed, leakage
from .spinlab import Operator, QuantumState, SpaceKind

SUM_TOL = 1e-9


class TrotterValidityWarning(UserWarning):
    """dt * |H_i - H_f| is not small; the splitting may be inaccurate."""


@dataclass(frozen=True, eq=False)
class TrotterPlan:
    T: float
    coeffs: np.ndarray = field(repr=False)  # (M, 2): f_l, g_l
    K: int = 1

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float).reshape(-1, 2)
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"Trotter repetition K must be a positive integer, got {self.K}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def M(self) -> int:
        return len(self.coeffs)

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def f(self) -> np.ndarray:
        return self.coeffs[:, 0]

    @property
    def g(self) -> np.ndarray:
        return self.coeffs[:, 1]


def linear_coeffs(T: float, M: int, K: int = 1) -> TrotterPlan:
    """f_l = (1 - l dt/T) dt, g_l = l dt^2 / T."""
    if M < 1:
        raise ValueError("need at least one step")
    dt = T / M
    l = np.arange(1, M + 1)
    f = (1 - dt * l / T) * dt if T else np.zeros(M)
    g = dt**2 * l / T if T else np.zeros(M)
    return TrotterPlan(T, np.column_stack([f, g]), K)


def schedule_coeffs(schedule: Schedule, K: int = 1) -> TrotterPlan:
    """f_l = (1 - s_l) dt, g_l = s_l dt."""
    s, dt = schedule.values, schedule.dt
    plan = TrotterPlan(schedule.T, np.column_stack([(1 - s) * dt, s * dt]), K)
    if abs(plan.coeffs.sum() - schedule.T) > SUM_TOL * max(1.0, schedule.T):
        raise AssertionError("schedule coefficients do not add up to T")
    return plan


class SplitStepper:
    """Applies the symmetric split step and its derivative to raw vectors.

    e^{-i H_i tau} goes through the cached eigendecomposition of H_i; a rank-one
    H_f uses the closed form, anything else its eigendecomposition.
    """

    def __init__(self, H_i: Operator, H_f: Operator):
        if H_i.space != H_f.space:
            raise TypeError(f"space mismatch: {H_i.space} vs {H_f.space}")
        self.space = H_i.space
        self.H_i, self.H_f = H_i, H_f
        self._ei_vals, self._ei_vecs = H_i.eigh
        self._ei_vecs_h = self._ei_vecs.conj().T
        self._hi_mat = H_i.toarray()
        self._rank_one = H_f.rank_one
        if self._rank_one is not None:
            coeff, v = self._rank_one
            self._f_vec = v / np.linalg.norm(v)
            self._f_coeff = coeff * np.vdot(v, v).real
        else:
            self._ef_vals, self._ef_vecs = H_f.eigh
            self._ef_vecs_h = self._ef_vecs.conj().T
            self._hf_mat = H_f.toarray()
        self._phase_cache: dict[tuple[str, float], np.ndarray] = {}

    def _phases(self, which: str, tau: float, vals: np.ndarray) -> np.ndarray:
        key = (which, tau)
        ph = self._phase_cache.get(key)
        if ph is None:
            if len(self._phase_cache) > 4096:
                self._phase_cache.clear()
            ph = np.exp(-1j * vals * tau)
            self._phase_cache[key] = ph
        return ph

    def exp_i(self, vec: np.ndarray, tau: float) -> np.ndarray:
        if tau == 0:
            return vec
        return self._ei_vecs @ (self._phases("i", tau, self._ei_vals) * (self._ei_vecs_h @ vec))

    def exp_f(self, vec: np.ndarray, tau: float) -> np.ndarray:
        if tau == 0:
            return vec
        if self._rank_one is not None:
            u = self._f_vec
            return vec + (np.exp(-1j * self._f_coeff * tau) - 1.0) * u * np.vdot(u, vec)
        return self._ef_vecs @ (self._phases("f", tau, self._ef_vals) * (self._ef_vecs_h @ vec))

    def apply_h_i(self, vec: np.ndarray) -> np.ndarray:
        return self._hi_mat @ vec

    def apply_h_f(self, vec: np.ndarray) -> np.ndarray:
        if self._rank_one is not None:
            u = self._f_vec
            return self._f_coeff * u * np.vdot(u, vec)
        return self._hf_mat @ vec

    def _single(self, vec: np.ndarray, half: float, mid: float) -> np.ndarray:
        return self.exp_f(self.exp_i(self.exp_f(vec, half), mid), half)

    def step(self, vec: np.ndarray, f: float, g: float, K: int = 1, adjoint: bool = False):
        sign = -1.0 if adjoint else 1.0
        half, mid = sign * g / (2 * K), sign * f / K
        for _ in range(K):
            vec = self._single(vec, half, mid)
        return vec

    def step_derivative(self, vec: np.ndarray, s: float, dt: float, K: int = 1) -> np.ndarray:
        """d/ds of the step with f = (1 - s) dt, g = s dt, applied to ``vec``."""
        half, mid = s * dt / (2 * K), (1 - s) * dt / K
        dhalf, dmid = dt / (2 * K), -dt / K
        reps = [vec]
        for _ in range(K - 1):
            reps.append(self._single(reps[-1], half, mid))
        total = np.zeros_like(vec)
        for k, a in enumerate(reps):
            b1 = self.exp_f(a, half)
            b2 = self.exp_i(b1, mid)
            b3 = self.exp_f(b2, half)
            d = -1j * dhalf * self.apply_h_f(b3)
            d = d + self.exp_f(-1j * dmid * self.apply_h_i(b2), half)
            d = d + self.exp_f(self.exp_i(-1j * dhalf * self.apply_h_f(b1), mid), half)
            for _ in range(K - 1 - k):
                d = self._single(d, half, mid)
            total += d
        return total

    def run(self, plan: TrotterPlan, vec: np.ndarray, on_step=None) -> np.ndarray:
        for l, (f, g) in enumerate(plan.coeffs):
            vec = self.step(vec, f, g, plan.K)
            if on_step is not None:
                on_step(l, vec)
        return vec


def _validity(H_i: Operator, H_f: Operator, plan: TrotterPlan) -> float:
    if H_i.dim <= 512:
        diff = H_i.toarray() - H_f.toarray()
        norm = float(np.max(np.abs(np.linalg.eigvalsh(diff))))
    else:
        norm = float(np.max(np.abs(H_i.eigh[0]))) + float(np.max(np.abs(H_f.eigh[0])))
    return plan.dt * norm


def trotter_evolve(
    H_i: Operator, H_f: Operator, plan: TrotterPlan, psi0: QuantumState, on_step=None
) -> QuantumState:
    """Apply the trotterised product to psi0.

    ``on_step(l, vec)`` is called with the raw vector after each step.
    """
    if H_i.space != psi0.space or H_f.space != psi0.space:
        raise TypeError("Hamiltonians and state must share a space")
    ratio = _validity(H_i, H_f, plan)
    if ratio >= 1.0:
        warnings.warn(
            f"dt*|H_i - H_f| = {ratio:.3g} is not small; splitting error may be large",
            TrotterValidityWarning,
            stacklevel=2,
        )
    out = SplitStepper(H_i, H_f).run(plan, np.array(psi0.amplitudes), on_step)
    return QuantumState(out, psi0.space)


@dataclass(frozen=True)
class FidelityRecord:
    experiment: str
    n_L: int
    T: float
    M: int
    K: int
    schedule: str
    w: int
    fidelity: float
    leakage: float | None
    wall_ms: float

    COLUMNS = ("experiment", "n_L", "T", "M", "K", "schedule", "w", "fidelity", "leakage", "wall_ms")

    def row(self) -> list[str]:
        leak = "" if self.leakage is None else f"{self.leakage:.6e}"
        return [
            self.experiment,
            str(self.n_L),
            f"{self.T:.10g}",
            str(self.M),
            str(self.K),
            self.schedule,
            str(self.w),
            f"{self.fidelity:.12f}",
            leak,
            f"{self.wall_ms:.3f}",
        ]


def resolve_k(rule, n_logical: int) -> int:
    """K rule: an integer, or 'nL' for K equal to the number of logical qubits."""
    if isinstance(rule, str) and rule.lower() in ("nl", "n_l", "equal_nl"):
        return n_logical
    k = int(rule)
    if k < 1:
        raise ValueError(f"K must be >= 1, got {rule}")
    return k


def resolve_w(selector, n_logical: int, seed: int = 0) -> list[int]:
    """Marked-state selector: an index, 'all', or None for a seeded random choice."""
    N = 2**n_logical
    if selector is None or selector == "random":
        return [int(np.random.default_rng(seed).integers(N))]
    if selector == "all":
        return list(range(N))
    w = int(selector)
    if not 0 <= w < N:
        raise ValueError(f"marked index {w} outside 0..{N - 1}")
    return [w]


def build_schedule(kind: str, T: float, M: int, profile=None) -> Schedule:
    if kind == ScheduleKind.LINEAR.value:
        return Schedule.linear(T, M)
    if kind == ScheduleKind.GAP_OPTIMIZED.value:
        return aqc.gap_schedule(profile, T, M)
    raise ValueError(f"unknown schedule kind {kind!r}")


def search_fidelity(
    n_logical: int,
    schedule: Schedule,
    K: int = 1,
    w: int = 0,
    J: float = aqc.DEFAULT_J,
    space: str = "logical",
    use_linear_coeffs: bool = False,
) -> tuple[float, float | None]:
    """|<w|U(T)|psi0>|^2 for one run; also the max leakage for FULL runs.

    The FULL-space run uses the pair Heisenberg Hamiltonian on 2 n_L spins
    and the embedded oracle; leakage is the largest weight outside the
    logical subspace seen after any step.
    """
    plan = linear_coeffs(schedule.T, schedule.M, K) if use_linear_coeffs else schedule_coeffs(schedule, K)
    psi0 = aqc.xxx_ground_state(n_logical)
    if space == "logical":
        H_i = aqc.logical_initial_h(n_logical, J)
        H_f = aqc.oracle(H_i.space, w)
        out = SplitStepper(H_i, H_f).run(plan, np.array(psi0.amplitudes))
        return float(abs(out[w]) ** 2), None
    if space != "full":
        raise ValueError(f"unknown space {space!r}")
    n = 2 * n_logical
    H_i = aqc.full_initial_h(n_logical, J)
    w_full = int(dfs_basis(n).logical_indices[w])
    H_f = aqc.oracle(H_i.space, w_full)
    worst = [0.0]

    def watch(_, vec):
        worst[0] = max(worst[0], leakage(vec, n, SpaceKind.LOGICAL))

    start = np.array(embed(psi0, SpaceKind.FULL).amplitudes)
    out = SplitStepper(H_i, H_f).run(plan, start, watch)
    return float(abs(out[w_full]) ** 2), worst[0]


def _sweep_point(job):
    (n_l, T, M, K, kind, w, J, space, profile, experiment) = job
    t0 = time.perf_counter()
    schedule = build_schedule(kind, T, M, profile)
    fid, leak = search_fidelity(
        n_l, schedule, K, w, J, space, use_linear_coeffs=kind == ScheduleKind.LINEAR.value
    )
    wall = (time.perf_counter() - t0) * 1e3
    return FidelityRecord(experiment, n_l, float(T), int(M), K, kind, w, fid, leak, wall)


def default_workers() -> int:
    env = os.environ.get("DFSAQC_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def fidelity_sweep(
    n_logical: int,
    T_list,
    M_list,
    K_rule=1,
    schedule_kind: str = "linear",
    w=0,
    J: float = aqc.DEFAULT_J,
    space: str = "logical",
    seed: int = 0,
    grid_size: int = aqc.DEFAULT_GRID,
    workers: int | None = 1,
    experiment: str = "trotter-sweep",
) -> list[FidelityRecord]:
    """One record per (T, M, w), ordered by parameter order regardless of workers."""
    T_list, M_list = list(T_list), list(M_list)
    if not T_list or not M_list:
        raise ValueError("T_list and M_list must be non-empty")
    K = resolve_k(K_rule, n_logical)
    ws = resolve_w(w, n_logical, seed)
    profile = None
    if schedule_kind == ScheduleKind.GAP_OPTIMIZED.value:
        H_i = aqc.logical_initial_h(n_logical, J)
        profile = aqc.gap_profile(H_i, aqc.oracle(H_i.space, ws[0]), grid_size)
    jobs = [
        (n_logical, T, M, K, schedule_kind, wi, J, space, profile, experiment)
        for T in T_list
        for M in M_list
        for wi in ws
    ]
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(jobs) == 1:
        return [_sweep_point(j) for j in jobs]
    with ProcessPoolExecutor(min(workers, len(jobs))) as pool:
        return list(pool.map(_sweep_point, jobs))
