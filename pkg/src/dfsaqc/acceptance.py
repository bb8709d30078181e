"""Acceptance criteria, shared by the test suite and ``dfsaqc verify``.

Every check returns a :class:`CriterionResult` holding the measured values
next to the tolerance they were judged against.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from math import factorial

import numpy as np

from . import aqc, control, dfs_code, grover, noise, trotter
from .spinlab import QuantumState, eig_lowest, evolve, xx_pairs, xxx_pairs

# reference listing of the n=4 sector, down-first order
REFERENCE_N4_SECTOR = ["dduu", "dudu", "duud", "uddu", "udud", "uudd"]

SATURATION_TIMES = (20.0, 30.0, 40.0, 60.0)
SATURATION_STEPS = (10, 20, 50, 100, 200, 400, 1000)
K_EFFECT_FRACTIONS = (1 / 8, 1 / 4, 1 / 2, 1, 2, 4)


@dataclass
class CriterionResult:
    number: str
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] criterion {self.number}: {self.name} ({self.seconds:.1f}s) {vals}"

    def json(self) -> str:
        return json.dumps(asdict(self), default=_jsonable, sort_keys=True)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def dfs_dimension() -> CriterionResult:
    sizes = {}
    ok = True
    for n in range(2, 15, 2):
        size = len(dfs_code.dfs_basis(n).dfs_indices)
        sizes[n] = size
        ok &= size == factorial(n) // factorial(n // 2) ** 2
    listed = [dfs_code.bit_string(i, 4) for i in dfs_code.dfs_basis(4).dfs_indices]
    same = sorted(listed) == sorted(REFERENCE_N4_SECTOR) and listed == REFERENCE_N4_SECTOR[::-1]
    return CriterionResult("1", "DFS dimension", ok and same, {"sizes": list(sizes.values()), "n4_list": same})


@_timed
def pair_spectra() -> CriterionResult:
    xx = np.sort([e for e, _ in eig_lowest(xx_pairs(2), 4)])
    worst = float(np.max(np.abs(xx - [-2, 0, 0, 2])))
    overlap_gap = 0.0
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    for J in (0.5, 1.0, 2.0):
        pairs = eig_lowest(xxx_pairs(2, J), 4)
        ev = np.array([e for e, _ in pairs])
        worst = max(worst, float(np.max(np.abs(ev - np.array([-3, 1, 1, 1]) * J))))
        overlap_gap = max(overlap_gap, 1.0 - abs(np.vdot(singlet, pairs[0][1])) ** 2)
    ok = worst < 1e-9 and overlap_gap < 1e-12
    return CriterionResult("2", "pair spectra", ok, {"max_eig_error": worst, "singlet_infidelity": overlap_gap})


@_timed
def closed_form_grover(seed: int = 7) -> CriterionResult:
    rng = np.random.default_rng(seed)
    worst, worst_peak = 0.0, 0.0
    for n_l in (2, 3, 4, 5):
        inst = grover.GroverInstance.logical(n_l, int(rng.integers(2**n_l)))
        H = grover.grover_h(inst)
        s = grover.uniform_state(inst.space)
        times = rng.uniform(0, 2 * np.pi * np.sqrt(inst.N), 50)
        for t in times:
            p = evolve(H, s, t).probability(inst.w_index)
            worst = max(worst, abs(p - float(grover.success_probability(t, inst.N))))
        peak = evolve(H, s, grover.optimal_time(inst.N)).probability(inst.w_index)
        worst_peak = max(worst_peak, 1.0 - peak)
    ok = worst < 1e-9 and worst_peak <= 1e-9
    return CriterionResult("3", "closed-form Grover", ok, {"max_abs_error": worst, "max_peak_deficit": worst_peak})


def saturation_data(n_logical: int = 3, J: float = 1.0):
    """Trotter fidelities (linear coefficients) and continuous references per T."""
    out = {}
    for T in SATURATION_TIMES:
        curve = [
            trotter.search_fidelity(n_logical, aqc.Schedule.linear(T, M), 1, 0, J, use_linear_coeffs=True)[0]
            for M in SATURATION_STEPS
        ]
        H_i = aqc.logical_initial_h(n_logical, J)
        ref, _ = aqc.continuous_reference(
            H_i,
            aqc.oracle(H_i.space, 0),
            aqc.Schedule.linear(T, int(np.ceil(T))),
            aqc.xxx_ground_state(n_logical),
            QuantumState.basis(0, H_i.space),
        )
        out[T] = (curve, ref)
    return out


@_timed
def trotter_saturation() -> CriterionResult:
    data = saturation_data()
    sat = [data[T][0][-1] for T in SATURATION_TIMES]
    refs = [data[T][1] for T in SATURATION_TIMES]
    settle = max(abs(data[T][0][-1] - data[T][0][-2]) for T in SATURATION_TIMES)
    mismatch = max(abs(a - b) for a, b in zip(sat, refs))
    ordered = all(b >= a for a, b in zip(sat, sat[1:]))
    ok = mismatch < 1e-3 and settle < 1e-3 and ordered
    return CriterionResult(
        "4",
        "Trotter saturation",
        ok,
        {"saturated": sat, "continuous": refs, "max_mismatch": mismatch, "last_step_change": settle},
    )


@_timed
def gap_schedule_shape() -> CriterionResult:
    const = aqc.gap_schedule(aqc.GapProfile.constant(0.7), 10.0, 50)
    lin_err = float(np.max(np.abs(const.values - np.arange(1, 51) / 50)))
    n_l = 7
    T = aqc.default_T(n_l)
    M = aqc.default_M(T)
    H_i = aqc.logical_initial_h(n_l)
    profile = aqc.gap_profile(H_i, aqc.oracle(H_i.space, 0))
    sched = aqc.gap_schedule(profile, T, M)
    s = np.concatenate([[0.0], sched.values])
    slope = np.diff(s)
    monotone = bool(np.all(slope >= 0))
    max_at_end = int(np.argmax(slope)) in (0, len(slope) - 1)
    k = int(np.argmin(slope))
    s_flat = 0.5 * (s[k] + s[k + 1])
    flat_offset = abs(s_flat - profile.argmin_s)
    ok = lin_err < 1e-6 and monotone and max_at_end and flat_offset < 0.02
    return CriterionResult(
        "5",
        "gap schedule",
        ok,
        {
            "constant_gap_error": lin_err,
            "monotone": monotone,
            "max_slope_at_endpoint": max_at_end,
            "min_gap_s": profile.argmin_s,
            "flattest_s": s_flat,
        },
    )


def k_effect_grid(n_logical: int = 4):
    T = aqc.default_T(n_logical)
    return T, sorted({max(1, int(round(c * T))) for c in K_EFFECT_FRACTIONS})


@_timed
def trotter_k_effect(n_logical: int = 4) -> CriterionResult:
    """Default (T, M) over every marked state; an M scan is reported alongside."""
    T = aqc.default_T(n_logical)
    M = aqc.default_M(T)
    one = trotter.fidelity_sweep(n_logical, [T], [M], 1, "gap", w="all")
    many = trotter.fidelity_sweep(n_logical, [T], [M], "nL", "gap", w="all")
    worst = max(a.fidelity - b.fidelity for a, b in zip(one, many))
    _, Ms = k_effect_grid(n_logical)
    scan_one = trotter.fidelity_sweep(n_logical, [T], Ms, 1, "gap")
    scan_many = trotter.fidelity_sweep(n_logical, [T], Ms, "nL", "gap")
    return CriterionResult(
        "6",
        "Trotter K effect",
        worst <= 1e-6,
        {
            "T": T,
            "M": M,
            "F_K1": one[0].fidelity,
            "F_KnL": many[0].fidelity,
            "max_deficit": worst,
            "scan_M": Ms,
            "scan_deficit": [a.fidelity - b.fidelity for a, b in zip(scan_one, scan_many)],
        },
    )


@_timed
def krotov_reaches_target(levels=(5, 6, 7)) -> CriterionResult:
    cfg = control.KrotovConfig()
    measured = {}
    ok = True
    for n_l in levels:
        T = aqc.default_T(n_l)
        M = aqc.default_M(T)
        problem = control.SearchProblem(n_l)
        tr = control.krotov_optimize(control.seed_schedule(problem, T, M), problem, cfg)
        steps = np.diff(tr.objectives)
        monotone = bool(np.all(steps >= -10 * cfg.convergence_eps))
        level_ok = tr.final_fidelity >= 0.999 and monotone and tr.seed_fidelity < tr.final_fidelity
        ok &= level_ok
        measured[f"nL{n_l}"] = (round(tr.seed_fidelity, 6), round(tr.final_fidelity, 6), tr.iterations)
    return CriterionResult("7", "Krotov optimisation", ok, measured)


@_timed
def adjoint_gradient(seed: int = 11) -> CriterionResult:
    rng = np.random.default_rng(seed)
    problem = control.SearchProblem(2)
    errors = []
    for _ in range(2):
        sched = aqc.Schedule(8.0, rng.uniform(0.05, 0.95, 16))
        for l in rng.choice(16, 5, replace=False):
            errors.append(control.gradient_check(sched, problem, int(l), 1e-5))
    worst = max(errors)
    return CriterionResult("8", "adjoint gradient", worst < 1e-4, {"coordinates": len(errors), "max_rel_error": worst})


@_timed
def self_protection() -> CriterionResult:
    bath = noise.SpinBath(m=1, g=1.0)
    clean = noise.protection_report("grover_cont", bath, 4)
    broken = noise.protection_report("grover_cont", bath, 4, stray_field=0.1)
    protocol, _, _ = noise.search_protocol("grover_cont", 4)
    H_s, t = protocol[0]
    fact = noise.factorization_error(H_s, bath, t)
    ok = clean.difference < 1e-8 and broken.difference > 1e-3 and fact < 1e-9
    return CriterionResult(
        "9",
        "self-protection",
        ok,
        {"protected_diff": clean.difference, "broken_diff": broken.difference, "factorization": fact},
    )


@_timed
def logical_full_equivalence() -> CriterionResult:
    n_l = 3
    T = aqc.default_T(n_l)
    H_i = aqc.logical_initial_h(n_l)
    sched = aqc.gap_schedule(aqc.gap_profile(H_i, aqc.oracle(H_i.space, 5)), T, aqc.default_M(T))
    f_log, _ = trotter.search_fidelity(n_l, sched, 1, 5, space="logical")
    f_full, leak = trotter.search_fidelity(n_l, sched, 1, 5, space="full")
    diff = abs(f_log - f_full)
    return CriterionResult(
        "10", "logical/full equivalence", diff < 1e-8 and leak < 1e-10, {"fidelity_diff": diff, "max_leakage": leak}
    )


@_timed
def cnot_construction() -> CriterionResult:
    dev = dfs_code.cnot_check(4)
    return CriterionResult("11", "CNOT construction", dev < 1e-8, {"max_deviation": dev})


@_timed
def sign_flip_correspondence(unitary=aqc.sign_flip_unitary, n_logical: int = 3) -> CriterionResult:
    """U maps the pair ground state onto |s> and conjugation preserves search fidelity."""
    U = unitary(n_logical)
    psi0 = aqc.xxx_ground_state(n_logical)
    s = grover.uniform_state(psi0.space)
    mapped = np.abs(U @ psi0.amplitudes - s.amplitudes).max()
    H_i = aqc.logical_initial_h(n_logical)
    H_i_conj = U @ H_i @ U
    H_i_conj = type(H_i)(H_i_conj.matrix, H_i.space)
    w = 3
    H_f = aqc.oracle(H_i.space, w)
    sched = aqc.Schedule.linear(20.0, 40)
    plan = trotter.schedule_coeffs(sched)
    a = trotter.SplitStepper(H_i, H_f).run(plan, np.array(psi0.amplitudes))
    b = trotter.SplitStepper(H_i_conj, H_f).run(plan, np.array(s.amplitudes))
    diff = abs(abs(a[w]) ** 2 - abs(b[w]) ** 2)
    return CriterionResult(
        "S", "sign-flip correspondence", mapped < 1e-12 and diff < 1e-12, {"map_error": mapped, "fidelity_diff": diff}
    )


FAST = [
    dfs_dimension,
    pair_spectra,
    closed_form_grover,
    trotter_saturation,
    gap_schedule_shape,
    trotter_k_effect,
    lambda: krotov_reaches_target((5,)),
    adjoint_gradient,
    self_protection,
    logical_full_equivalence,
    cnot_construction,
    sign_flip_correspondence,
]

FULL = FAST[:6] + [krotov_reaches_target] + FAST[7:]


def run_suite(suite: str = "fast"):
    """Yield results one by one so callers can stream them."""
    checks = {"fast": FAST, "full": FULL}.get(suite)
    if checks is None:
        raise ValueError(f"unknown suite {suite!r}")
    for check in checks:
        yield check()
