"""Krotov-type optimisation of the discretised switching function.

The objective is the search fidelity of the trotterised product that is
actually run, so gradients are taken through the discrete split steps
rather than through the continuous dynamics.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import aqc
from .aqc import Schedule, ScheduleKind
from .trotter import SplitStepper

log = logging.getLogger(__name__)


class KrotovDivergenceError(RuntimeError):
    """The objective kept decreasing after every allowed step-weight increase."""


@dataclass(frozen=True)
class KrotovConfig:
    step_weight: float | None = None  # None: 50 M / T
    max_iters: int = 500
    convergence_eps: float = 1e-7
    clamp: bool = True
    max_backoffs: int = 6

    def __post_init__(self):
        if self.step_weight is not None and self.step_weight <= 0:
            raise ValueError("step_weight must be positive")
        if self.convergence_eps <= 0:
            raise ValueError("convergence_eps must be positive")

    def initial_weight(self, schedule: Schedule) -> float:
        if self.step_weight is not None:
            return self.step_weight
        return 50.0 * schedule.M / schedule.T


@dataclass(frozen=True)
class SearchProblem:
    """Logical-space search instance: pair ground state -> marked state w."""

    n_logical: int
    K: int = 1
    w: int = 0
    J: float = aqc.DEFAULT_J

    @cached_property
    def stepper(self) -> SplitStepper:
        H_i = aqc.logical_initial_h(self.n_logical, self.J)
        return SplitStepper(H_i, aqc.oracle(H_i.space, self.w))

    @cached_property
    def psi0(self) -> np.ndarray:
        return np.array(aqc.xxx_ground_state(self.n_logical).amplitudes)

    def target(self) -> np.ndarray:
        t = np.zeros(2**self.n_logical, dtype=complex)
        t[self.w] = 1.0
        return t


def _forward(problem: SearchProblem, s: np.ndarray, dt: float, keep: bool = False):
    st, K = problem.stepper, problem.K
    psi = problem.psi0
    states = [psi] if keep else None
    for sl in s:
        psi = st.step(psi, (1 - sl) * dt, sl * dt, K)
        if keep:
            states.append(psi)
    return psi, states


def objective(schedule: Schedule, problem: SearchProblem) -> float:
    """|<w| U(T) |psi0>|^2 with psi0 the product of pair singlets."""
    psi, _ = _forward(problem, schedule.values, schedule.dt)
    return float(abs(psi[problem.w]) ** 2)


def fidelity_curve(schedule: Schedule, problem: SearchProblem) -> tuple[np.ndarray, np.ndarray]:
    """Fidelity with |w> after each step, against scaled time l/M."""
    _, states = _forward(problem, schedule.values, schedule.dt, keep=True)
    f = np.array([abs(v[problem.w]) ** 2 for v in states[1:]])
    return schedule.tau, f


def _costates(problem: SearchProblem, s: np.ndarray, dt: float, amplitude: complex):
    """chi_l = U_{l+1}^dag ... U_M^dag |w> <w|psi_T>, for l = 1..M."""
    st, K = problem.stepper, problem.K
    chi = problem.target() * amplitude
    out = [None] * len(s)
    for l in range(len(s) - 1, -1, -1):
        out[l] = chi
        chi = st.step(chi, (1 - s[l]) * dt, s[l] * dt, K, adjoint=True)
    return out


def gradient(schedule: Schedule, problem: SearchProblem) -> np.ndarray:
    """Adjoint-method d fidelity / d s_l for every step."""
    s, dt = schedule.values, schedule.dt
    psi_T, states = _forward(problem, s, dt, keep=True)
    chis = _costates(problem, s, dt, psi_T[problem.w])
    st, K = problem.stepper, problem.K
    return np.array(
        [
            2.0 * np.real(np.vdot(chis[l], st.step_derivative(states[l], s[l], dt, K)))
            for l in range(len(s))
        ]
    )


def _with_value(schedule: Schedule, l: int, value: float) -> Schedule:
    v = np.array(schedule.values)
    v[l] = value
    return Schedule(schedule.T, v, ScheduleKind.CUSTOM)


def _perturbed_objective(schedule: Schedule, problem: SearchProblem, l: int, value: float) -> float:
    # the split-step map is analytic in s, so probes may step outside [0, 1]
    s = np.array(schedule.values)
    s[l] = value
    psi, _ = _forward(problem, s, schedule.dt)
    return float(abs(psi[problem.w]) ** 2)


def finite_difference(schedule: Schedule, problem: SearchProblem, l: int, h: float) -> float:
    """Second-order difference quotient; one-sided at the s = 0 / s = 1 boundaries."""
    s = schedule.values[l]
    F = lambda v: _perturbed_objective(schedule, problem, l, v)  # noqa: E731
    if s + h > 1.0:
        return (3 * F(s) - 4 * F(s - h) + F(s - 2 * h)) / (2 * h)
    if s - h < 0.0:
        return (-3 * F(s) + 4 * F(s + h) - F(s + 2 * h)) / (2 * h)
    return (F(s + h) - F(s - h)) / (2 * h)


def gradient_check(schedule: Schedule, problem: SearchProblem, l: int, h: float = 1e-5) -> float:
    """Relative error between the adjoint gradient and finite differences at step l."""
    if not 1e-7 <= h <= 1e-3:
        raise ValueError(f"finite-difference step {h} outside [1e-7, 1e-3]")
    adj = gradient(schedule, problem)[l]
    fd = finite_difference(schedule, problem, l, h)
    return abs(adj - fd) / max(abs(fd), abs(adj), 1e-12)


@dataclass
class OptimizationTrace:
    seed: Schedule
    schedule: Schedule
    objectives: list[float] = field(default_factory=list)
    step_weights: list[float] = field(default_factory=list)
    converged: bool = False
    tau: np.ndarray | None = field(default=None, repr=False)
    curve: np.ndarray | None = field(default=None, repr=False)

    @property
    def seed_fidelity(self) -> float:
        return self.objectives[0]

    @property
    def final_fidelity(self) -> float:
        return self.objectives[-1]

    @property
    def iterations(self) -> int:
        return len(self.objectives) - 1


def _sweep(problem: SearchProblem, s: np.ndarray, dt: float, weight: float, clamp: bool):
    """One Krotov pass: costates from the old controls, states from the new."""
    st, K, w = problem.stepper, problem.K, problem.w
    psi_T, _ = _forward(problem, s, dt)
    chis = _costates(problem, s, dt, psi_T[w])
    new = np.array(s)
    psi = problem.psi0
    for l in range(len(s)):
        grad = 2.0 * np.real(np.vdot(chis[l], st.step_derivative(psi, new[l], dt, K)))
        new[l] += grad / weight
        if clamp:
            new[l] = min(max(new[l], 0.0), 1.0)
        psi = st.step(psi, (1 - new[l]) * dt, new[l] * dt, K)
    return new, float(abs(psi[w]) ** 2)


def krotov_optimize(
    seed: Schedule, problem: SearchProblem, cfg: KrotovConfig = KrotovConfig()
) -> OptimizationTrace:
    """Sequential first-order updates s_l += (1/weight) dF/ds_l, seeded by ``seed``.

    A pass that lowers the fidelity by more than 10 * convergence_eps is
    rejected and the step weight doubled, at most ``max_backoffs`` times.
    """
    s, dt = np.array(seed.values), seed.dt
    weight = cfg.initial_weight(seed)
    trace = OptimizationTrace(seed, seed)
    fid = objective(seed, problem)
    trace.objectives.append(fid)
    trace.step_weights.append(weight)
    backoffs = 0
    iters = 0
    while iters < cfg.max_iters:
        new, new_fid = _sweep(problem, s, dt, weight, cfg.clamp)
        iters += 1
        if new_fid < fid - 10 * cfg.convergence_eps:
            backoffs += 1
            if backoffs > cfg.max_backoffs:
                raise KrotovDivergenceError(
                    f"fidelity fell from {fid:.8f} to {new_fid:.8f} with step weight {weight:g}"
                    f" after {cfg.max_backoffs} increases; the time grid is too coarse for it"
                )
            weight *= 2.0
            log.info("pass lowered fidelity (%.3e); step weight -> %g", fid - new_fid, weight)
            continue
        s = new
        change = new_fid - fid
        fid = new_fid
        trace.objectives.append(fid)
        trace.step_weights.append(weight)
        if abs(change) < cfg.convergence_eps:
            trace.converged = True
            break
    trace.schedule = Schedule(seed.T, s, ScheduleKind.KROTOV)
    trace.tau, trace.curve = fidelity_curve(trace.schedule, problem)
    return trace


def seed_schedule(problem: SearchProblem, T: float, M: int, grid_size: int = aqc.DEFAULT_GRID):
    """Gap-optimised schedule for the problem, the optimiser's initial guess."""
    st = problem.stepper
    profile = aqc.gap_profile(st.H_i, st.H_f, grid_size)
    return aqc.gap_schedule(profile, T, M)
