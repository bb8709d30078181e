"""Adiabatic Grover search in the pair-encoded subspace.

H(s) = (1 - s) H_i + s H_f with H_i the intra-pair Heisenberg coupling and
H_f = -|w><w|.  Schedules are discretised as s_1..s_M at t_l = l T / M with
s_0 = 0 implied.
"""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .dfs_code import restrict
from .spinlab import Operator, QuantumState, Space, SpaceKind, eig_lowest, xxx_pairs

DEFAULT_J = 1.0
DEFAULT_GRID = 1024
GAP_TOL = 1e-12
REFERENCE_TOL = 1e-8


class ScheduleKind(enum.Enum):
    LINEAR = "linear"
    GAP_OPTIMIZED = "gap"
    KROTOV = "krotov"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class Schedule:
    T: float
    values: np.ndarray = field(repr=False)
    kind: ScheduleKind = ScheduleKind.CUSTOM

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or len(values) < 1:
            raise ValueError("schedule needs at least one step")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError("schedule values must lie in [0, 1]")
        if self.kind in (ScheduleKind.LINEAR, ScheduleKind.GAP_OPTIMIZED):
            if abs(values[-1] - 1.0) > 1e-12:
                raise ValueError(f"{self.kind.value} schedule must end at s=1")
        if self.kind is ScheduleKind.GAP_OPTIMIZED and np.any(np.diff(values) < 0):
            raise ValueError("gap-optimised schedule must be non-decreasing")
        if self.T < 0:
            raise ValueError("total time must be non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def M(self) -> int:
        return len(self.values)

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def tau(self) -> np.ndarray:
        """Scaled times l/M of the step ends."""
        return np.arange(1, self.M + 1) / self.M

    @classmethod
    def linear(cls, T: float, M: int) -> "Schedule":
        return cls(T, np.arange(1, M + 1) / M, ScheduleKind.LINEAR)

    @classmethod
    def constant(cls, T: float, M: int, s: float) -> "Schedule":
        return cls(T, np.full(M, float(s)), ScheduleKind.CUSTOM)


@dataclass(frozen=True, eq=False)
class GapProfile:
    grid: np.ndarray = field(repr=False)
    e0: np.ndarray = field(repr=False)
    e1: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.grid[0] != 0.0 or self.grid[-1] != 1.0 or np.any(np.diff(self.grid) <= 0):
            raise ValueError("gap grid must increase strictly from 0 to 1")

    @property
    def gap(self) -> np.ndarray:
        return self.e1 - self.e0

    @property
    def degenerate(self) -> bool:
        return bool(np.any(self.gap <= GAP_TOL))

    @property
    def min_gap(self) -> float:
        return float(self.gap.min())

    @property
    def argmin_s(self) -> float:
        return float(self.grid[np.argmin(self.gap)])

    @classmethod
    def constant(cls, gap: float, grid_size: int = DEFAULT_GRID) -> "GapProfile":
        grid = np.linspace(0.0, 1.0, grid_size)
        return cls(grid, np.zeros(grid_size), np.full(grid_size, float(gap)))


def h_interp(s: float, H_i: Operator, H_f: Operator) -> Operator:
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"mixing parameter {s} outside [0, 1]")
    if H_i.space != H_f.space:
        raise TypeError(f"space mismatch: {H_i.space} vs {H_f.space}")
    return (1.0 - s) * H_i + s * H_f


def logical_initial_h(n_logical: int, J: float = DEFAULT_J) -> Operator:
    """Sum over logical qubits of (-J + 2J X_L)."""
    if n_logical < 1:
        raise ValueError("need at least one logical qubit")
    if J <= 0:
        raise ValueError(f"coupling J must be positive, got {J}")
    dim = 2**n_logical
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    total = -J * n_logical * np.eye(dim)
    for l in range(n_logical):
        total += 2 * J * np.kron(np.kron(np.eye(2**l), x), np.eye(2 ** (n_logical - l - 1)))
    return Operator(total, Space.logical(n_logical))


def full_initial_h(n_logical: int, J: float = DEFAULT_J) -> Operator:
    return xxx_pairs(2 * n_logical, J)


def projected_initial_h(n_logical: int, J: float = DEFAULT_J) -> Operator:
    """Pair Heisenberg Hamiltonian compressed onto the logical subspace."""
    return restrict(xxx_pairs(2 * n_logical, J), SpaceKind.LOGICAL)


def parity(n_logical: int) -> np.ndarray:
    """Number of |1>_L factors in each logical basis state, mod 2."""
    idx = np.arange(2**n_logical)
    ones = np.zeros_like(idx)
    for b in range(n_logical):
        ones += (idx >> b) & 1
    return ones % 2


def xxx_ground_state(n_logical: int) -> QuantumState:
    """Product of (|0>_L - |1>_L)/sqrt(2) over all logical qubits."""
    if n_logical < 1:
        raise ValueError("need at least one logical qubit")
    signs = 1.0 - 2.0 * parity(n_logical)
    return QuantumState(signs / np.sqrt(2**n_logical), Space.logical(n_logical))


def sign_flip_unitary(n_logical: int) -> Operator:
    """Diagonal +-1 by parity; maps the pair ground state onto |s>."""
    return Operator(np.diag(1.0 - 2.0 * parity(n_logical)), Space.logical(n_logical))


def oracle(space: Space, w_index: int) -> Operator:
    """-|w><w| on a logical, sector or full space (w indexes that space)."""
    if not 0 <= w_index < space.dim:
        raise ValueError(f"marked index {w_index} outside 0..{space.dim - 1}")
    v = np.zeros(space.dim, dtype=complex)
    v[w_index] = 1.0
    return Operator.outer(v, space, -1.0)


def gap_profile(
    H_i: Operator, H_f: Operator, grid_size: int = DEFAULT_GRID, workers: int | None = 1
) -> GapProfile:
    """E_0 and E_1 of H(s) on a uniform grid of s in [0, 1]."""
    if grid_size < 64:
        raise ValueError(f"gap grid needs at least 64 points, got {grid_size}")
    grid = np.linspace(0.0, 1.0, grid_size)

    def lowest(s):
        pairs = eig_lowest(h_interp(s, H_i, H_f), 2)
        return pairs[0][0], pairs[1][0]

    if workers == 1:
        levels = [lowest(s) for s in grid]
    else:
        with ThreadPoolExecutor(workers) as pool:
            levels = list(pool.map(lowest, grid))
    e = np.array(levels)
    return GapProfile(grid, e[:, 0], e[:, 1])


class ScheduleError(RuntimeError):
    """The gap integral cannot be inverted."""


def schedule_map(profile: GapProfile):
    """Normalised forward map F(s)/F(1), F(s) = int_0^s ds'/gap^2, as an interpolant."""
    if profile.degenerate:
        raise ScheduleError(f"gap closes (min {profile.min_gap:.3e}); schedule integral diverges")
    cumulative = cumulative_trapezoid(profile.gap**-2.0, profile.grid, initial=0.0)
    if np.any(np.diff(cumulative) <= 0):
        raise ScheduleError("cumulative gap integral is not strictly increasing")
    return PchipInterpolator(profile.grid, cumulative / cumulative[-1])


def gap_schedule(profile: GapProfile, T: float, M: int) -> Schedule:
    """Local-adiabatic schedule: s_l solves F(s_l)/F(1) = l/M."""
    if M < 1:
        raise ValueError("need at least one step")
    forward = schedule_map(profile)
    values = np.empty(M)
    for l in range(1, M):
        target = l / M
        values[l - 1] = brentq(lambda s: forward(s) - target, 0.0, 1.0, xtol=1e-15, rtol=1e-15)
    values[-1] = 1.0
    return Schedule(T, np.maximum.accumulate(values), ScheduleKind.GAP_OPTIMIZED)


def default_T(n_logical: int) -> float:
    """225 at seven logical qubits, shrinking by sqrt(2) per qubit removed."""
    return 225.0 / np.sqrt(2.0) ** (7 - n_logical)


def default_M(T: float) -> int:
    return max(1, int(round(2 * T)))


def adiabatic_evolve(
    H_i: Operator,
    H_f: Operator,
    schedule: Schedule,
    psi0: QuantumState,
    substeps: int = 8,
    interpolation: str = "linear",
) -> QuantumState:
    """Continuous-evolution reference for a discretised schedule.

    With ``interpolation="linear"`` s(t) is piecewise linear through
    (0, 0), (t_1, s_1), ..., (T, s_M); every interval is split into
    ``substeps`` pieces, each propagated exactly with H at the piece midpoint.
    ``"step"`` holds s_l over the whole of interval l, which is the evolution
    the split-step product approximates.
    """
    if H_i.space != psi0.space or H_f.space != psi0.space:
        raise TypeError("Hamiltonians and state must share a space")
    if interpolation not in ("linear", "step"):
        raise ValueError(f"unknown interpolation {interpolation!r}")
    if schedule.T == 0:
        return psi0
    a, b = H_i.toarray(), H_f.toarray()
    knots = np.concatenate([[0.0], schedule.values])
    h = schedule.dt / substeps
    frac = (np.arange(substeps) + 0.5) / substeps
    psi = np.array(psi0.amplitudes)
    for l in range(schedule.M):
        lo = knots[l + 1] if interpolation == "step" else knots[l]
        for s in lo + frac * (knots[l + 1] - lo):
            evals, evecs = la.eigh((1.0 - s) * a + s * b)
            psi = evecs @ (np.exp(-1j * evals * h) * (evecs.conj().T @ psi))
    return QuantumState(psi, psi0.space)


def continuous_reference(
    H_i: Operator,
    H_f: Operator,
    schedule: Schedule,
    psi0: QuantumState,
    target: QuantumState,
    tol: float = REFERENCE_TOL,
    substeps: int = 4,
    max_substeps: int = 4096,
) -> tuple[float, int]:
    """Fidelity of adiabatic_evolve, doubling substeps until it changes by < tol."""
    prev = abs(target.overlap(adiabatic_evolve(H_i, H_f, schedule, psi0, substeps))) ** 2
    while substeps < max_substeps:
        substeps *= 2
        cur = abs(target.overlap(adiabatic_evolve(H_i, H_f, schedule, psi0, substeps))) ** 2
        if abs(cur - prev) < tol:
            return cur, substeps
        prev = cur
    raise RuntimeError(f"continuous reference not converged at {substeps} substeps")
