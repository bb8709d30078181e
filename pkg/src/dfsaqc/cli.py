"""Command-line runner: named experiments to CSV, and the acceptance gate.

    dfsaqc run --experiment NAME [--config FILE] [--set key=value ...] --out FILE
    dfsaqc verify --suite fast|full [--jsonl FILE]

Config files are INI: keys in ``[run]`` apply to every experiment, keys in a
section named after the experiment override them, and ``--set`` overrides
both.  Exit codes: 0 success, 1 failed criteria, 2 invalid config,
3 dimension guard.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import datetime as _dt
import hashlib
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__, acceptance, aqc, control, dfs_code, grover, noise, trotter
from .spinlab import MAX_SPINS, DimensionError, QuantumState, eig_lowest, evolve, xx_pairs, xxx_pairs

CSV_VERSION = 1
MAX_LOGICAL_QUBITS = 10
EXIT_FAILED, EXIT_CONFIG, EXIT_DIMENSION = 1, 2, 3

COMMON = {"J": "1.0", "seed": "0", "workers": "auto", "timing": "true"}

# defaults per experiment; "default" T / M mean the 225 / sqrt(2)^(7 - n_L) chain and M = 2T
DEFAULTS = {
    "basis": {"n": "4"},
    "spectrum": {"n": "4", "operator": "xxx"},
    "grover-cont": {"n_L": "3", "w": "0", "points": "101"},
    "aqc-run": {"n_L": "3", "T": "default", "M": "default", "schedule": "linear", "w": "0", "grid": "1024"},
    "trotter-sweep": {
        "n_L": "3",
        "T_list": "20,30,40,60",
        "M_list": "10,20,50,100,200,400,1000",
        "K": "1",
        "schedule": "linear",
        "w": "0",
        "space": "logical",
        "grid": "1024",
    },
    "schedule": {"n_L": "7", "T": "default", "M": "default", "grid": "1024"},
    "krotov": {
        "n_L": "5",
        "T": "default",
        "M": "default",
        "K": "1",
        "w": "0",
        "step_weight": "auto",
        "max_iters": "500",
        "eps": "1e-7",
        "grid": "1024",
    },
    "noise-bench": {
        "protocol": "grover_cont",
        "n": "4",
        "w": "0",
        "bath": "spin",
        "m": "1",
        "g": "1.0",
        "h": "0.3",
        "stray_field": "0.0",
        "samples": "20",
        "amplitude": "0.5",
        "correlation_time": "1.0",
        "ensemble": "200",
    },
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


def load_config(experiment: str, path: str | None = None, overrides=()) -> dict[str, str]:
    """Effective flat config: defaults < [run] < [experiment] < --set."""
    if experiment not in DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(DEFAULTS)}")
    cfg = {**COMMON, **DEFAULTS[experiment]}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {' '.join(str(exc).split())}") from exc
        for section in ("run", experiment):
            if parser.has_section(section):
                cfg.update(_known(parser.items(section), cfg, section))
    pairs = []
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        pairs.append((key.strip(), value.strip()))
    cfg.update(_known(pairs, cfg, "--set"))
    return cfg


def _known(pairs, cfg, where):
    out = {}
    for key, value in pairs:
        if key not in cfg:
            raise ConfigError(f"unknown key {key!r} in {where}")
        out[key] = value
    return out


def config_text(experiment: str, cfg: dict[str, str]) -> str:
    lines = [f"experiment={experiment}"] + [f"{k}={cfg[k]}" for k in sorted(cfg)]
    return "\n".join(lines) + "\n"


def git_blob_hash(text: str) -> str:
    data = text.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _get(cfg, key, conv, check=None, what=""):
    raw = cfg[key]
    try:
        val = conv(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}={raw!r} is not a valid {conv.__name__}") from None
    if check is not None and not check(val):
        raise ConfigError(f"{key}={raw!r} {what}")
    return val


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _float_list(raw: str) -> list[float]:
    return [float(x) for x in raw.split(",") if x.strip()]


def _int_list(raw: str) -> list[int]:
    return [int(x) for x in raw.split(",") if x.strip()]


def _choice(cfg, key, options):
    val = cfg[key]
    if val not in options:
        raise ConfigError(f"{key}={val!r} must be one of {', '.join(options)}")
    return val


def _positive(x):
    return x > 0


def _n_logical(cfg):
    n_l = _get(cfg, "n_L", int, lambda v: v >= 1, "must be at least 1")
    if n_l > MAX_LOGICAL_QUBITS:
        raise DimensionError(f"n_L={n_l} exceeds the logical-space cap of {MAX_LOGICAL_QUBITS}")
    return n_l


def _n_spins(cfg, allowed=None):
    n = _get(cfg, "n", int, lambda v: v >= 2 and v % 2 == 0, "must be an even number >= 2")
    if n > MAX_SPINS:
        raise DimensionError(f"n={n} exceeds the full-space cap of {MAX_SPINS}")
    if allowed is not None and n not in allowed:
        raise ConfigError(f"n={n} must be one of {allowed}")
    return n


def _T_and_M(cfg, n_l):
    T = aqc.default_T(n_l) if cfg["T"] == "default" else _get(cfg, "T", float, _positive, "must be positive")
    M = aqc.default_M(T) if cfg["M"] == "default" else _get(cfg, "M", int, _positive, "must be positive")
    return T, M


def _workers(cfg):
    if cfg["workers"] == "auto":
        return trotter.default_workers()
    return _get(cfg, "workers", int, _positive, "must be positive")


def _w_selector(cfg):
    w = cfg["w"]
    return None if w == "random" else w


# ---------------------------------------------------------------- experiments


class Result:
    """Rows for the main CSV, extra header notes and sidecar tables."""

    def __init__(self, columns, rows, notes=None, sidecars=None):
        self.columns = columns
        self.rows = rows
        self.notes = notes or {}
        self.sidecars = sidecars or {}


def _record_rows(records, timing):
    rows = []
    for r in records:
        row = r.row()
        if not timing:
            row[-1] = ""
        rows.append(row)
    return rows


def exp_basis(cfg):
    n = _n_spins(cfg)
    smap = dfs_code.dfs_basis(n)
    rows = [["dfs", str(k), str(i), dfs_code.bit_string(i, n), ""] for k, i in enumerate(smap.dfs_indices)]
    n_l = n // 2
    for k, i in enumerate(smap.logical_indices):
        rows.append(["logical", str(k), str(i), dfs_code.bit_string(i, n), format(k, f"0{n_l}b")])
    return Result(["space", "position", "index", "spins", "logical"], rows)


def exp_spectrum(cfg):
    n = _n_spins(cfg)
    J = _get(cfg, "J", float, _positive, "must be positive")
    op = _choice(cfg, "operator", ("xx", "xxx", "logical"))
    if op == "xx":
        H = xx_pairs(n)
    elif op == "xxx":
        H = xxx_pairs(n, J)
    else:
        H = aqc.logical_initial_h(n // 2, J)
    pairs = eig_lowest(H, H.dim)
    rows = [[op, str(n), str(k), f"{e:.12f}"] for k, (e, _) in enumerate(pairs)]
    return Result(["operator", "n", "level", "energy"], rows)


def exp_grover_cont(cfg):
    n_l = _n_logical(cfg)
    w = trotter.resolve_w(_w_selector(cfg), n_l, _get(cfg, "seed", int))[0]
    points = _get(cfg, "points", int, lambda v: v >= 2, "must be at least 2")
    inst = grover.GroverInstance.logical(n_l, w)
    H = grover.grover_h(inst)
    s = grover.uniform_state(inst.space)
    t_star, t_quoted = grover.optimal_time(inst.N), grover.quoted_time(inst.N)
    rows = []
    for t in np.linspace(0.0, t_quoted, points):
        p = evolve(H, s, t).probability(w)
        rows.append([f"{t:.10g}", f"{p:.12f}", f"{float(grover.success_probability(t, inst.N)):.12f}"])
    notes = {"t_star": f"{t_star:.10g}", "t_quoted": f"{t_quoted:.10g}", "N": str(inst.N), "w": str(w)}
    return Result(["t", "success_numeric", "success_analytic"], rows, notes)


def exp_aqc_run(cfg):
    n_l = _n_logical(cfg)
    J = _get(cfg, "J", float, _positive, "must be positive")
    w = trotter.resolve_w(_w_selector(cfg), n_l, _get(cfg, "seed", int))[0]
    T, M = _T_and_M(cfg, n_l)
    kind = _choice(cfg, "schedule", ("linear", "gap"))
    H_i = aqc.logical_initial_h(n_l, J)
    H_f = aqc.oracle(H_i.space, w)
    t0 = time.perf_counter()
    profile = aqc.gap_profile(H_i, H_f, _get(cfg, "grid", int)) if kind == "gap" else None
    sched = trotter.build_schedule(kind, T, M, profile)
    fid, substeps = aqc.continuous_reference(
        H_i, H_f, sched, aqc.xxx_ground_state(n_l), QuantumState.basis(w, H_i.space)
    )
    wall = (time.perf_counter() - t0) * 1e3
    # K = 0 marks an untrotterised run
    rec = trotter.FidelityRecord("aqc-run", n_l, T, M, 0, kind, w, fid, None, wall)
    return Result(list(rec.COLUMNS), _record_rows([rec], _get(cfg, "timing", _bool)), {"substeps": str(substeps)})


def exp_trotter_sweep(cfg):
    n_l = _n_logical(cfg)
    space = _choice(cfg, "space", ("logical", "full"))
    if space == "full" and 2 * n_l > MAX_SPINS:
        raise DimensionError(f"full-space run needs {2 * n_l} spins, cap is {MAX_SPINS}")
    T_list = _get(cfg, "T_list", _float_list, lambda v: v and min(v) > 0, "needs positive times")
    M_list = _get(cfg, "M_list", _int_list, lambda v: v and min(v) > 0, "needs positive step counts")
    K = cfg["K"]
    try:
        trotter.resolve_k(K, n_l)
    except ValueError:
        raise ConfigError(f"K={K!r} must be a positive integer or nL") from None
    w = _w_selector(cfg)
    seed = _get(cfg, "seed", int)
    try:
        trotter.resolve_w(w, n_l, seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    records = trotter.fidelity_sweep(
        n_l,
        T_list,
        M_list,
        K,
        _choice(cfg, "schedule", ("linear", "gap")),
        w,
        _get(cfg, "J", float, _positive, "must be positive"),
        space,
        seed,
        _get(cfg, "grid", int),
        _workers(cfg),
    )
    return Result(list(trotter.FidelityRecord.COLUMNS), _record_rows(records, _get(cfg, "timing", _bool)))


def exp_schedule(cfg):
    n_l = _n_logical(cfg)
    T, M = _T_and_M(cfg, n_l)
    H_i = aqc.logical_initial_h(n_l, _get(cfg, "J", float, _positive, "must be positive"))
    profile = aqc.gap_profile(H_i, aqc.oracle(H_i.space, 0), _get(cfg, "grid", int))
    gap_s = aqc.gap_schedule(profile, T, M)
    lin = aqc.Schedule.linear(T, M)
    gaps = np.interp(gap_s.values, profile.grid, profile.gap)
    rows = [
        [str(l + 1), f"{tau:.10g}", f"{a:.12f}", f"{b:.12f}", f"{g:.12f}"]
        for l, (tau, a, b, g) in enumerate(zip(gap_s.tau, lin.values, gap_s.values, gaps))
    ]
    notes = {"min_gap": f"{profile.min_gap:.10g}", "min_gap_s": f"{profile.argmin_s:.10g}"}
    prof_rows = [[f"{s:.10g}", f"{e0:.12f}", f"{e1:.12f}"] for s, e0, e1 in zip(profile.grid, profile.e0, profile.e1)]
    return Result(
        ["l", "tau", "s_linear", "s_gap", "gap"],
        rows,
        notes,
        {"profile": (["s", "e0", "e1"], prof_rows)},
    )


def exp_krotov(cfg):
    n_l = _n_logical(cfg)
    T, M = _T_and_M(cfg, n_l)
    K = trotter.resolve_k(cfg["K"], n_l)
    w = trotter.resolve_w(_w_selector(cfg), n_l, _get(cfg, "seed", int))[0]
    weight = None if cfg["step_weight"] == "auto" else _get(cfg, "step_weight", float, _positive, "must be positive")
    kcfg = control.KrotovConfig(
        step_weight=weight,
        max_iters=_get(cfg, "max_iters", int, _positive, "must be positive"),
        convergence_eps=_get(cfg, "eps", float, _positive, "must be positive"),
    )
    problem = control.SearchProblem(n_l, K, w, _get(cfg, "J", float, _positive, "must be positive"))
    t0 = time.perf_counter()
    seed = control.seed_schedule(problem, T, M, _get(cfg, "grid", int))
    seed_ms = (time.perf_counter() - t0) * 1e3
    t0 = time.perf_counter()
    trace = control.krotov_optimize(seed, problem, kcfg)
    opt_ms = (time.perf_counter() - t0) * 1e3
    records = [
        trotter.FidelityRecord("krotov", n_l, T, M, K, "gap", w, trace.seed_fidelity, None, seed_ms),
        trotter.FidelityRecord("krotov", n_l, T, M, K, "krotov", w, trace.final_fidelity, None, opt_ms),
    ]
    _, seed_curve = control.fidelity_curve(seed, problem)
    trace_rows = [
        [str(i), f"{f:.12f}", f"{wt:.10g}"] for i, (f, wt) in enumerate(zip(trace.objectives, trace.step_weights))
    ]
    sched_rows = [
        [str(l + 1), f"{tau:.10g}", f"{a:.12f}", f"{b:.12f}", f"{fa:.12f}", f"{fb:.12f}"]
        for l, (tau, a, b, fa, fb) in enumerate(
            zip(trace.tau, seed.values, trace.schedule.values, seed_curve, trace.curve)
        )
    ]
    notes = {"iterations": str(trace.iterations), "converged": str(trace.converged).lower()}
    return Result(
        list(trotter.FidelityRecord.COLUMNS),
        _record_rows(records, _get(cfg, "timing", _bool)),
        notes,
        {
            "trace": (["iteration", "objective", "step_weight"], trace_rows),
            "schedule": (["l", "tau", "s_seed", "s_krotov", "fidelity_seed", "fidelity_krotov"], sched_rows),
        },
    )


def exp_noise_bench(cfg):
    n = _n_spins(cfg, (4, 6))
    protocol = _choice(cfg, "protocol", ("grover_cont", "trotter_aqc"))
    kind = _choice(cfg, "bath", ("spin", "stochastic"))
    try:
        if kind == "spin":
            bath = noise.SpinBath(_get(cfg, "m", int), _get(cfg, "g", float), _get(cfg, "h", float))
        else:
            bath = noise.StochasticBath(
                _get(cfg, "amplitude", float),
                _get(cfg, "correlation_time", float),
                _get(cfg, "ensemble", int),
                _get(cfg, "seed", int),
            )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    stray = _get(cfg, "stray_field", float)
    rep = noise.protection_report(
        protocol, bath, n, _get(cfg, "w", int), stray, _get(cfg, "samples", int, _positive, "must be positive")
    )
    row = [
        protocol,
        str(n),
        kind,
        f"{stray:.10g}",
        f"{rep.fidelity_bath:.12f}",
        f"{rep.fidelity_closed:.12f}",
        f"{rep.difference:.6e}",
        f"{rep.max_purity_loss:.6e}",
        f"{rep.max_leakage:.6e}",
    ]
    cols = [
        "protocol",
        "n",
        "bath",
        "stray_field",
        "fidelity_bath",
        "fidelity_closed",
        "difference",
        "max_purity_loss",
        "max_leakage",
    ]
    return Result(cols, [row])


EXPERIMENTS = {
    "basis": exp_basis,
    "spectrum": exp_spectrum,
    "grover-cont": exp_grover_cont,
    "aqc-run": exp_aqc_run,
    "trotter-sweep": exp_trotter_sweep,
    "schedule": exp_schedule,
    "krotov": exp_krotov,
    "noise-bench": exp_noise_bench,
}


# ---------------------------------------------------------------- output


def _write_csv(path: Path, header: list[str], columns, rows):
    with open(path, "w", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def sidecar_path(out: Path, name: str) -> Path:
    return out.with_name(f"{out.stem}.{name}{out.suffix or '.csv'}")


def run_experiment(experiment: str, cfg: dict[str, str], out: Path) -> Result:
    text = config_text(experiment, cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", trotter.TrotterValidityWarning)
        result = EXPERIMENTS[experiment](cfg)
    header = [
        f"dfsaqc {__version__}",
        f"csv_version={CSV_VERSION}",
        f"generated={_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}",
        f"config_sha1={git_blob_hash(text)}",
    ]
    header += [f"config: {line}" for line in text.splitlines()]
    header += [f"{k}={v}" for k, v in result.notes.items()]
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, header, result.columns, result.rows)
    for name, (cols, rows) in result.sidecars.items():
        _write_csv(sidecar_path(out, name), header, cols, rows)
    return result


def verify(suite: str, jsonl: str | None = None, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    failed = 0
    sink = open(jsonl, "w") if jsonl else None
    try:
        for res in acceptance.run_suite(suite):
            print(res.line(), file=stream, flush=True)
            if sink is not None:
                sink.write(res.json() + "\n")
                sink.flush()
            failed += not res.passed
    finally:
        if sink is not None:
            sink.close()
    print(f"{'FAILED' if failed else 'PASSED'}: {failed} criterion failure(s)", file=stream)
    return EXIT_FAILED if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dfsaqc", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"dfsaqc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment and write a CSV")
    r.add_argument("--experiment", required=True, choices=sorted(EXPERIMENTS))
    r.add_argument("--config", help="INI file with [run] and per-experiment sections")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
    r.add_argument("--out", required=True, help="output CSV path")
    v = sub.add_parser("verify", help="run the acceptance suite")
    v.add_argument("--suite", choices=("fast", "full"), default="fast")
    v.add_argument("--jsonl", help="also write one JSON object per criterion here")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return verify(args.suite, args.jsonl)
        cfg = load_config(args.experiment, args.config, args.set)
        result = run_experiment(args.experiment, cfg, Path(args.out))
        print(f"wrote {len(result.rows)} rows to {args.out}")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except (ValueError, aqc.ScheduleError) as exc:
        print(f"error: {' '.join(str(exc).split())}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
