"""``picmv`` command line: solve, sweep, synth, validate.

Configs are JSON objects; every section maps onto a dataclass and unknown
keys are rejected.  Complex arrays are written as ``{"real": ..., "imag": ...}``.

Exit codes: 0 success, 1 config error, 2 non-convergence, 3 validation failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import experiments as ex
from .admm import SolverDivergedError, solve
from .linalg import HermitianMatrix, SingularCovarianceError
from .problem import adaptive_problem, feasibility_bound

EXIT_OK, EXIT_CONFIG, EXIT_NOCONV, EXIT_VALIDATION = 0, 1, 2, 3

log = logging.getLogger("picmv")


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config io

def _check_type(value, default, path):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, (int, float)):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        if ok and isinstance(default, int) and not isinstance(value, int):
            ok = float(value).is_integer()
            value = int(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, tuple):
        ok = isinstance(value, list)
        if ok:
            value = tuple(value)
    else:
        ok = True
    if not ok:
        raise ConfigError(f"{path}: expected {type(default).__name__}, got {json.dumps(value)}")
    return value


def build(cls, data, path: str):
    """Instantiate dataclass ``cls`` from a JSON object, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for k, v in data.items():
        f = fields[k]
        if f.default is not dataclasses.MISSING:
            default = f.default
        elif f.default_factory is not dataclasses.MISSING:
            default = f.default_factory()
        else:
            default = None
        if dataclasses.is_dataclass(default):
            kwargs[k] = build(type(default), v, f"{path}.{k}")
        else:
            kwargs[k] = _check_type(v, default, f"{path}.{k}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{path}: {err}") from None


def load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"{path}: cannot read config ({err.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return data


def _take(data: dict, allowed: set, path: str):
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")


def complex_array(obj, path: str) -> np.ndarray:
    if not isinstance(obj, dict) or set(obj) != {"real", "imag"}:
        raise ConfigError(f"{path}: complex arrays are objects with exactly 'real' and 'imag'")
    try:
        re_, im_ = np.asarray(obj["real"], float), np.asarray(obj["imag"], float)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}: real/imag must be numeric arrays") from None
    if re_.shape != im_.shape:
        raise ConfigError(f"{path}: real and imag shapes differ")
    return re_ + 1j * im_


def encode_complex(z) -> dict:
    z = np.asarray(z, dtype=complex)
    return {"real": z.real.tolist(), "imag": z.imag.tolist()}


def _seed(data: dict, override, path: str) -> int:
    s = data.get("seed", 0) if override is None else override
    if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2**64:
        raise ConfigError(f"{path}.seed: expected an unsigned 64-bit integer")
    return s


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------------- commands

SOLVE_KEYS = {"scenario", "covariance", "mu", "rho", "seed"}


def cmd_solve(args) -> int:
    data = load_json(args.config)
    _take(data, SOLVE_KEYS, "config")
    sc = build(ex.AdaptiveScenario, data.get("scenario", {}), "config.scenario")
    seed = _seed(data, args.seed, "config")
    rng = np.random.default_rng(seed)
    geo = ex.ArrayGeometry.ula(sc.elements, sc.spacing)
    if "covariance" in data:
        r = complex_array(data["covariance"], "config.covariance")
        if r.shape != (geo.size, geo.size):
            raise ConfigError(f"config.covariance: expected {geo.size}x{geo.size}, got {r.shape}")
        try:
            r = HermitianMatrix(r)
        except ValueError as err:
            raise ConfigError(f"config.covariance: {err}") from None
        th0, thk = sc.target_angle, list(sc.interferer_angles)
    else:
        _, th0, thk, r = ex.draw_adaptive(sc, rng)
    mu = data.get("mu", sc.mu_factor * float(r.eigenvalues[-1]))
    if isinstance(mu, bool) or not isinstance(mu, (int, float)) or mu < 0:
        raise ConfigError("config.mu: expected a number >= 0")
    rho = data.get("rho", sc.rho_factor * mu if mu > 0 else None)
    if rho is not None and (isinstance(rho, bool) or not isinstance(rho, (int, float)) or rho <= 0):
        raise ConfigError("config.rho: expected a number > 0")
    if not sc.interference_offsets:
        thk = []
    try:
        p = adaptive_problem(
            r, geo, th0, thk, float(mu), sc.delta, sc.target_offsets, sc.target_c,
            sc.interference_offsets, sc.auto_tune,
        )
    except (ValueError, SingularCovarianceError) as err:
        raise ConfigError(f"config: {err}") from None
    dmax = feasibility_bound(p.targets)
    if sc.delta > dmax:
        print(f"warning: delta={sc.delta:g} exceeds the sufficient feasibility bound {dmax:.6g}", file=sys.stderr)
    bf = solve(p, rho=rho, tol=sc.tol, max_iter=sc.max_iter)
    record = {
        "w": encode_complex(bf.w),
        "eps": bf.eps.tolist(),
        "eps_lower": bf.eps_lower.tolist(),
        "objective": bf.objective,
        "iterations": bf.iterations,
        "primal_residual": bf.primal_residual,
        "dual_residual": bf.dual_residual,
        "converged": bf.converged,
        "mu": float(mu),
        "rho": float(rho) if rho is not None else None,
        "delta": sc.delta,
        "seed": seed,
    }
    out = _out(args) / "solution.json"
    out.write_text(json.dumps(record, indent=1) + "\n")
    print(f"objective={ex.fmt(bf.objective)} iterations={bf.iterations} converged={bf.converged} -> {out}")
    return EXIT_OK if bf.converged else EXIT_NOCONV


SWEEP_KEYS = {"scenario", "param", "values", "runs", "seed", "beamformers"}


def cmd_sweep(args) -> int:
    data = load_json(args.config)
    _take(data, SWEEP_KEYS, "config")
    data = dict(data)
    data["seed"] = _seed(data, args.seed, "config")
    if args.fast:
        data["runs"] = 20
    cfg = build(ex.SweepConfig, data, "config")
    rows = ex.run_adaptive_sweep(cfg, workers=args.threads)
    out = _out(args) / "sweep.csv"
    out.write_text(ex.sweep_csv(rows))
    for r in rows:
        print(f"{r.beamformer:8s} {r.param}={ex.fmt(r.value):>8s} mean={ex.fmt(r.mean_sinr_db)} dB (failures {r.failures})")
    return EXIT_OK


SYNTH_KEYS = {"synthesis", "kappas", "perturbed_runs", "seed"}


def cmd_synth(args) -> int:
    data = load_json(args.config) if args.config else {}
    _take(data, SYNTH_KEYS, "config")
    cfg = build(ex.SynthesisConfig, data.get("synthesis", {}), "config.synthesis")
    try:
        ex.sidelobe_grid(cfg)
    except ValueError as err:
        raise ConfigError(f"config.synthesis: {err}") from None
    seed = _seed(data, args.seed, "config")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = ex.run_synthesis(cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = _out(args)
    (out / "pattern.csv").write_text(ex.pattern_csv(res))
    print(f"MSL={ex.fmt(res.msl)} dB ASL={ex.fmt(res.asl)} dB |w|={ex.fmt(res.w_norm)} "
          f"iterations={res.iterations} converged={res.converged}")
    kappas = data.get("kappas", [])
    if kappas:
        runs = data.get("perturbed_runs", 100)
        if args.fast:
            runs = min(runs, 20)
        rows = ex.run_perturbed_sidelobes(res.w, cfg.geometry, ex.sidelobe_grid(cfg), kappas, runs, seed)
        lines = ["kappa,msl_db,asl_db,runs"]
        lines += [f"{ex.fmt(r.kappa)},{ex.fmt(r.msl)},{ex.fmt(r.asl)},{r.runs}" for r in rows]
        (out / "perturbed.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK if res.converged else EXIT_NOCONV


def cmd_validate(args) -> int:
    from .validation import run_all

    results = run_all(fast=args.fast)
    for r in results:
        print(r.line())
    total_fail = sum(r.failed for r in results)
    print(f"{sum(r.passed for r in results)} passed, {total_fail} failed")
    return EXIT_OK if total_fail == 0 else EXIT_VALIDATION


# ----------------------------------------------------------------------- main

def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="picmv", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON config file")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--fast", action="store_true", help="reduced run counts for CI")
        p.add_argument("--threads", type=int, default=1, help="worker processes for Monte Carlo runs")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("solve", help="solve one P-ICMV instance -> solution.json"))
    common(sub.add_parser("sweep", help="Monte Carlo output-SINR sweep -> sweep.csv"))
    common(sub.add_parser("synth", help="planar pattern synthesis -> pattern.csv"), config_required=False)
    common(sub.add_parser("validate", help="oracle equivalence suites"), config_required=False)
    return ap


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "synth": cmd_synth, "validate": cmd_validate}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverDivergedError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
