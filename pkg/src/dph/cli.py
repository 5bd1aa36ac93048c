"""``dph`` command line: JSON config in, CSV (or a validation report) out.

Exit codes: 0 success, 1 validation failure, 2 config error, 3 domain error,
4 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import closed_form as cf
from . import mixed_state as ms
from . import validation
from .config import COMMANDS, ConfigError, RunConfig, load_config
from .errors import ConvergenceError, DphError
from .model import BathMode, OhmicSpectrum, SystemParams

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_DOMAIN, EXIT_CONVERGENCE = 0, 1, 2, 3, 4
WORKERS_ENV = "DPH_WORKERS"

PURE_COLUMNS = ("total", "berry_part", "env_dynamical_part", "env_arg_part")
MIXED_COLUMNS = ("phase", "abs_F", "eigenvalue_plus", "eigenvalue_minus", "bridged_samples")


@dataclass(frozen=True)
class Job:
    """One grid point; plain data so it can cross a process boundary."""

    quantity: str
    params: SystemParams
    modes: tuple[BathMode, ...]
    spectrum: Optional[OhmicSpectrum]
    branch: str
    T: float
    c_plus: complex = 1.0
    c_minus: complex = 0.0
    steps: int = 2048
    tol: Optional[float] = None
    weak: bool = False


def evaluate(job: Job) -> tuple:
    if job.quantity == "pure-phase":
        if job.weak:
            res = cf.pure_phase_weak(job.params, job.modes, job.T)
        elif job.spectrum is not None:
            res = cf.pure_phase_ohmic(job.params, job.spectrum, job.branch, job.T)
        else:
            res = cf.pure_phase_discrete(job.params, job.modes, job.branch, job.T)
        return (res.total, res.berry_part, res.env_dynamical_part, res.env_arg_part)
    out = ms.mixed_geometric_phase((job.c_plus, job.c_minus), job.params, job.modes, job.T,
                                   steps=job.steps, tol=job.tol, full_output=True)
    F = complex(cf.decoherence_series(job.params, job.modes, [job.T])[0][0])
    e_plus, e_minus = ms.printed_eigenvalues(job.c_plus, job.c_minus, F)
    return (out.phase, abs(F), e_plus, e_minus, out.bridged)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if count < 1:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return count


def ordered_map(func, jobs: Sequence, workers: int | None = None) -> list:
    """Map in parallel; results come back in input order whatever the completion order."""
    workers = worker_count() if workers is None else workers
    if all(j.quantity == "pure-phase" for j in jobs):
        workers = 1  # closed form, cheaper than starting a pool
    if workers <= 1 or len(jobs) <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(func, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def unwrap(phases) -> tuple[np.ndarray, int]:
    """Remove adjacent jumps larger than pi by multiples of 2 pi; returns (phases, corrections)."""
    phases = np.asarray(phases, dtype=float)
    if phases.size < 2:
        return phases.copy(), 0
    steps = np.diff(phases)
    corrections = int(np.count_nonzero(np.abs(steps) > math.pi))
    return np.unwrap(phases), corrections


def format_csv(header: Sequence[str], rows, precision: int = 15) -> str:
    def fmt(v) -> str:
        if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
            return str(int(v))
        v = float(v)
        if v == 0.0:
            v = 0.0  # drop the sign of -0.0
        return f"{v:.{precision}g}"

    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# configuration -> jobs


def _require_durations(cfg: RunConfig) -> np.ndarray:
    durations = cfg.task.durations()
    if durations is None:
        raise ConfigError("field 'task.T': this command needs 'T' or 'T_range'")
    return durations


def _base_job(cfg: RunConfig, quantity: str, T: float) -> Job:
    task = cfg.task
    continuum = quantity == "pure-phase" and cfg.bath.ohmic is not None and not task.weak
    return Job(
        quantity=quantity,
        params=cfg.system_params(),
        modes=() if continuum else tuple(cfg.bath_modes()),
        spectrum=cfg.ohmic_spectrum() if continuum else None,
        branch=task.branch,
        T=float(T),
        c_plus=task.c_plus,
        c_minus=task.c_minus,
        steps=task.steps,
        tol=task.tol,
        weak=task.weak,
    )


def _scaled(job: Job, scale: float) -> Job:
    if job.spectrum is not None:
        spec = OhmicSpectrum(job.spectrum.epsilon * scale**2, job.spectrum.omega_c)
        return replace(job, spectrum=spec)
    return replace(job, modes=tuple(BathMode(m.frequency, m.coupling * scale) for m in job.modes))


def sweep_jobs(cfg: RunConfig) -> tuple[str, np.ndarray, list[Job]]:
    sweep = cfg.task.sweep
    if sweep is None:
        raise ConfigError("field 'task.sweep': the sweep command needs a sweep block")
    grid = sweep.grid()
    name = sweep.parameter
    if name == "T":
        if cfg.task.durations() is not None:
            raise ConfigError("field 'task.T': a sweep over T must not also set 'T' or 'T_range'")
        return name, grid, [_base_job(cfg, sweep.quantity, T) for T in grid]
    durations = _require_durations(cfg)
    if durations.size != 1:
        raise ConfigError("field 'task.T_range': a sweep over another parameter needs a single 'T'")
    T = float(durations[0])
    if name in ("epsilon", "omega_c") and cfg.bath.ohmic is None:
        raise ConfigError(f"field 'task.sweep.parameter': '{name}' needs an ohmic bath")

    jobs = []
    for value in grid:
        if name in ("g", "omega", "n"):
            if name == "n" and (value != int(value) or value < 0):
                raise ConfigError(f"field 'task.sweep.values': n must be a non-negative integer, got {value}")
            system = cfg.system.model_copy(update={name: int(value) if name == "n" else float(value)})
            point = cfg.model_copy(update={"system": system})
        elif name in ("epsilon", "omega_c"):
            ohmic = cfg.bath.ohmic.model_copy(update={name: float(value)})
            point = cfg.model_copy(update={"bath": cfg.bath.model_copy(update={"ohmic": ohmic})})
        else:
            point = cfg
        job = _base_job(point, sweep.quantity, T)
        jobs.append(_scaled(job, float(value)) if name == "coupling_scale" else job)
    return name, grid, jobs


# commands


def _mixed_rows(values, results) -> tuple[list[tuple], int]:
    phases, corrections = unwrap([r[0] for r in results])
    return [(v, p) + tuple(r[1:]) for v, p, r in zip(values, phases, results)], corrections


def cmd_pure_phase(cfg: RunConfig) -> tuple[str, str]:
    durations = _require_durations(cfg)
    results = ordered_map(evaluate, [_base_job(cfg, "pure-phase", T) for T in durations])
    rows = [(T,) + r for T, r in zip(durations, results)]
    return format_csv(("T",) + PURE_COLUMNS, rows, cfg.output.precision), ""


def cmd_mixed_phase(cfg: RunConfig) -> tuple[str, str]:
    durations = _require_durations(cfg)
    results = ordered_map(evaluate, [_base_job(cfg, "mixed-phase", T) for T in durations])
    rows, corrections = _mixed_rows(durations, results)
    note = f"unwrap: {corrections} correction(s) of 2*pi applied\n"
    return format_csv(("T",) + MIXED_COLUMNS, rows, cfg.output.precision), note


def cmd_decoherence(cfg: RunConfig) -> tuple[str, str]:
    times = cfg.task.time_grid()
    if times is None:
        raise ConfigError("field 'task.times': the decoherence command needs 'times' or 't_range'")
    if times.size == 0 or np.any(times < 0) or np.any(np.diff(times) <= 0):
        raise ConfigError("field 'task.times': time grid must be non-empty, non-negative and strictly increasing")
    params = cfg.system_params()
    bath = cfg.bath_modes()
    F, eta = cf.decoherence_series(params, bath, times)
    arg = -params.splitting * times  # bath factor is real and positive
    rows = list(zip(times, np.abs(F), arg, eta))
    return format_csv(("t", "abs_F", "arg_F", "eta_sum"), rows, cfg.output.precision), ""


def cmd_sweep(cfg: RunConfig) -> tuple[str, str]:
    name, grid, jobs = sweep_jobs(cfg)
    results = ordered_map(evaluate, jobs)
    if cfg.task.sweep.quantity == "pure-phase":
        rows = [(v,) + r for v, r in zip(grid, results)]
        return format_csv((name,) + PURE_COLUMNS, rows, cfg.output.precision), ""
    rows, corrections = _mixed_rows(grid, results)
    note = f"unwrap: {corrections} correction(s) of 2*pi applied\n"
    return format_csv((name,) + MIXED_COLUMNS, rows, cfg.output.precision), note


def cmd_validate(cfg: RunConfig) -> tuple[str, bool]:
    task = cfg.task
    results = [
        validation.run_check(name, tol=task.check_tol, coupling_scale=task.coupling_scale,
                             fock_levels=task.fock_levels)
        for name in task.checks
    ]
    failed = [r.name for r in results if not r.passed]
    lines = [r.line() for r in results]
    lines.append("validate: PASS" if not failed else f"validate: FAIL ({', '.join(failed)})")
    return "\n".join(lines) + "\n", not failed


# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dph", description="Geometric phases of a dephased dressed qubit.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", help="output path (default: output.path, else stdout)")
    parser.add_argument("--steps", type=int, help="override task.steps")
    parser.add_argument("--tol", type=float, help="override task.tol (validate: every check tolerance)")
    parser.add_argument("--effective-config", metavar="PATH",
                        help="write the defaults-applied config (with overrides) to PATH")
    return parser


def effective_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    if cfg.task.command is not None and cfg.task.command != args.command:
        raise ConfigError(f"field 'task.command': config is for '{cfg.task.command}', invoked '{args.command}'")
    update: dict = {"command": args.command}
    if args.steps is not None:
        if args.steps < 2:
            raise ConfigError(f"--steps must be >= 2, got {args.steps}")
        update["steps"] = args.steps
    if args.tol is not None:
        if not args.tol > 0:
            raise ConfigError(f"--tol must be positive, got {args.tol}")
        update["check_tol" if args.command == "validate" else "tol"] = args.tol
    task = cfg.task.model_copy(update=update)
    return cfg.model_copy(update={"task": task})


def _write(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = effective_config(args)
        if args.effective_config:
            _write(cfg.dump(), args.effective_config)
        out_path = args.out or cfg.output.path
        if args.command == "validate":
            report, ok = cmd_validate(cfg)
            sys.stdout.write(report)
            if args.out:
                _write(report, args.out)
            return EXIT_OK if ok else EXIT_VALIDATION
        handler = {
            "pure-phase": cmd_pure_phase,
            "mixed-phase": cmd_mixed_phase,
            "decoherence": cmd_decoherence,
            "sweep": cmd_sweep,
        }[args.command]
        text, note = handler(cfg)
    except ConfigError as exc:
        print(f"dph: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"dph: not converged: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except DphError as exc:
        print(f"dph: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if note:
        sys.stderr.write(note)
    _write(text, out_path)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
