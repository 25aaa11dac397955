"""Command-line interface: ``robustfilter <command> CONFIG [flags]``.

Every run reads one YAML config, writes a JSON result document (stdout or
``--output``) and, with ``--csv DIR``, CSV series.  Exit codes: 0 success,
1 config or validation error, 2 solver non-convergence or inconsistency,
3 minimality violation.  Failures print one JSON error record to stderr.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import (
    ConsistencyError,
    ConvergenceError,
    MinimalityError,
    RobustFilterError,
    ValidationError,
)
from .factorization import FACTOR_TOL
from .filtering import (
    CAUSALITY_TOL,
    error_functional,
    estimate_point,
    factors_for,
    smoothing,
    solve_filter,
    solve_filter_factorized,
    solve_filter_finite,
    time_weights,
)
from .minimax import (
    MAX_ITER,
    TOL,
    BandContamination,
    JointMinimal,
    PowerPair,
    solve_minimax,
    verify_saddle_point,
)
from .oracle import empirical_mse, grid_maximize_delta, toeplitz_projection
from .spectral import SpectralDensity, evaluate_density, frequency_grid, trig_series

CONFIG_DIR_ENV = "ROBUSTFILTER_CONFIG_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_MINIMALITY = 0, 1, 2, 3
DENSITY_KEYS = ("ma", "white", "samples")
TOP_KEYS = {"signal", "noise", "functional", "truncation", "grid", "factor_length", "tolerances", "minimax", "simulation"}


class ConfigError(ValidationError):
    pass


@dataclass(frozen=True)
class DensitySpec:
    kind: str
    value: object

    def density(self, G: int) -> SpectralDensity:
        if self.kind == "ma":
            return SpectralDensity.moving_average(self.value)
        if self.kind == "white":
            return SpectralDensity.white(float(self.value))
        return SpectralDensity.from_samples(self.value)

    def ma_coeffs(self) -> np.ndarray:
        if self.kind == "ma":
            return np.asarray(self.value)
        if self.kind == "white":
            return np.array([math.sqrt(float(self.value))])
        raise ConfigError("simulation needs moving-average or white densities")


@dataclass(frozen=True)
class RunConfig:
    signal: DensitySpec
    noise: DensitySpec
    functional: np.ndarray
    truncation: int = 64
    grid: int = 4096
    factor_length: int | None = None
    tolerances: dict = field(default_factory=dict)
    minimax: dict = field(default_factory=dict)
    simulation: dict = field(default_factory=dict)
    digest: str = ""
    base_dir: Path = Path(".")

    @property
    def f(self) -> SpectralDensity:
        return self.signal.density(self.grid)

    @property
    def g(self) -> SpectralDensity:
        return self.noise.density(self.grid)


def _coeffs(raw, name: str) -> np.ndarray:
    """Real numbers or [re, im] pairs."""
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ConfigError(f"{name} must be a non-empty list")
    out = []
    for x in raw:
        if isinstance(x, (list, tuple)):
            if len(x) != 2:
                raise ConfigError(f"complex entries of {name} must be [re, im] pairs")
            out.append(complex(float(x[0]), float(x[1])))
        elif isinstance(x, (int, float)) and not isinstance(x, bool):
            out.append(float(x))
        else:
            raise ConfigError(f"{name} entries must be numbers or [re, im] pairs")
    arr = np.array(out)
    return arr.real.copy() if np.all(arr.imag == 0) else arr


def _density_spec(raw, name: str, base: Path) -> DensitySpec:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        raw = {"white": raw}
    if not isinstance(raw, dict):
        raise ConfigError(f"{name} must be a mapping with one of {DENSITY_KEYS}")
    keys = [k for k in DENSITY_KEYS if k in raw]
    if len(keys) != 1 or set(raw) - set(keys):
        raise ConfigError(f"{name} needs exactly one of {DENSITY_KEYS}, got {sorted(raw)}")
    kind = keys[0]
    if kind == "ma":
        return DensitySpec("ma", _coeffs(raw["ma"], f"{name}.ma"))
    if kind == "white":
        v = float(raw["white"])
        if not v >= 0:
            raise ConfigError(f"{name}.white must be a nonnegative variance")
        return DensitySpec("white", v)
    path = Path(str(raw["samples"]))
    path = path if path.is_absolute() else base / path
    if not path.is_file():
        raise ConfigError(f"{name}.samples: file {path} does not exist")
    data = np.load(path) if path.suffix == ".npy" else np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None)
    return DensitySpec("samples", np.asarray(data, dtype=float).ravel())


def _int(raw, name: str, lo: int, hi: int | None = None) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(f"{name} must be an integer")
    if raw < lo or (hi is not None and raw > hi):
        raise ConfigError(f"{name}={raw} outside [{lo}, {hi if hi is not None else 'inf'}]")
    return raw


def resolve_config_path(path: str) -> Path:
    p = Path(path)
    if p.is_file() or p.is_absolute():
        return p
    base = os.environ.get(CONFIG_DIR_ENV)
    if base and (Path(base) / p).is_file():
        return Path(base) / p
    return p


def config_digest(mapping: dict) -> str:
    canonical = json.dumps(mapping, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def load_config(path: str) -> RunConfig:
    p = resolve_config_path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} not found (also looked in ${CONFIG_DIR_ENV})")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {p}: {exc}".replace("\n", " ")) from None
    return parse_config(raw, p.parent)


def parse_config(raw, base: Path = Path(".")) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    for key in ("signal", "noise"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    grid = _int(raw.get("grid", 4096), "grid", 16)
    if grid & (grid - 1):
        raise ConfigError("grid must be a power of two")
    L = _int(raw.get("truncation", 64), "truncation", 1)
    if 4 * L >= grid:
        raise ConfigError(f"truncation {L} needs a grid larger than {4 * L}")
    fl = raw.get("factor_length")
    if fl is not None:
        fl = _int(fl, "factor_length", 1, grid // 2)
    for key in ("tolerances", "minimax", "simulation"):
        if not isinstance(raw.get(key, {}), dict):
            raise ConfigError(f"{key} must be a mapping")
    return RunConfig(
        signal=_density_spec(raw["signal"], "signal", base),
        noise=_density_spec(raw["noise"], "noise", base),
        functional=_coeffs(raw.get("functional", [1.0]), "functional"),
        truncation=L,
        grid=grid,
        factor_length=fl,
        tolerances=dict(raw.get("tolerances", {})),
        minimax=dict(raw.get("minimax", {})),
        simulation=dict(raw.get("simulation", {})),
        digest=config_digest(raw),
        base_dir=base,
    )


# --- serialization ---------------------------------------------------------


def jsonable(x):
    """Plain JSON types: complex as [re, im], arrays as lists, non-finite floats as null."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [jsonable(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [jsonable(float(x.real)), jsonable(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if x is None or isinstance(x, str):
        return x
    return str(x)


def _scalars(d: dict) -> dict:
    return {k: v for k, v in d.items() if not isinstance(v, (np.ndarray, list, dict))}


def write_csv(path: Path, columns: dict) -> None:
    """One column per key, in insertion order; complex columns split into _re/_im."""
    header, cols = [], []
    for name, col in columns.items():
        col = np.asarray(col)
        if np.iscomplexobj(col) or name.endswith("~c"):
            base = name.removesuffix("~c")
            header += [f"{base}_re", f"{base}_im"]
            cols += [col.real, col.imag]
        else:
            header.append(name)
            cols.append(col)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) if not isinstance(v, (int, np.integer)) else int(v) for v in row])


def _filter_series(cfg: RunConfig, sol) -> dict:
    G = sol.h.size
    return {
        "weights.csv": {"k": np.arange(sol.weights.size), "w~c": sol.weights},
        "spectral.csv": {
            "lambda": frequency_grid(G),
            "f": evaluate_density(cfg.f, G),
            "g": evaluate_density(cfg.g, G),
            "h~c": sol.h,
        },
    }


def _filter_result(sol) -> dict:
    d = dict(sol.diagnostics)
    return {
        "delta": sol.mse,
        "method": sol.method,
        "weights": sol.weights,
        "w0": sol.weights[0] if sol.weights.size else None,
        "diagnostics": d,
    }


# --- commands --------------------------------------------------------------


def cmd_filter(cfg: RunConfig, args):
    solver = {"direct": solve_filter, "finite": solve_filter_finite}
    if args.method == "factorized":
        sol = solve_filter_factorized(
            cfg.f, cfg.g, a=cfg.functional, L=cfg.truncation, G=cfg.grid, factor_length=cfg.factor_length
        )
    else:
        sol = solver[args.method](cfg.f, cfg.g, a=cfg.functional, L=cfg.truncation, G=cfg.grid)
    return _filter_result(sol), _filter_series(cfg, sol)


def cmd_smooth(cfg: RunConfig, args):
    sol = smoothing(cfg.f, cfg.g, L=cfg.truncation, G=cfg.grid)
    return _filter_result(sol), _filter_series(cfg, sol)


def cmd_point(cfg: RunConfig, args):
    sol = estimate_point(cfg.f, cfg.g, p=args.p, L=cfg.truncation, G=cfg.grid)
    out = _filter_result(sol)
    out["p"] = args.p
    return out, _filter_series(cfg, sol)


def cmd_factorize(cfg: RunConfig, args):
    L = cfg.factor_length or min(256, cfg.grid // 2)
    fac = factors_for(cfg.f, cfg.g, L=L, G=cfg.grid)
    result = {
        name: {"target": fc.target, "coeffs": fc.coeffs, "residual": fc.residual, "tail_mass": fc.tail_mass, "min_modulus": fc.min_modulus}
        for name, fc in fac.items()
    }
    n = min(len(fc) for fc in fac.values())
    cols = {"k": np.arange(n)}
    for name, fc in fac.items():
        cols[f"{name}~c"] = fc.coeffs[:n]
    return {"factor_length": L, "factors": result}, {"factors.csv": cols}


def cmd_mse(cfg: RunConfig, args):
    sol = solve_filter(cfg.f, cfg.g, a=cfg.functional, L=cfg.truncation, G=cfg.grid)
    G = cfg.grid
    f, g = evaluate_density(cfg.f, G), evaluate_density(cfg.g, G)
    A = sol.functional.transfer(G)
    out = {
        "delta": sol.mse,
        "delta_integral": error_functional(sol.h, f, g, A),
        "diagnostics": sol.diagnostics,
    }
    if args.weights is not None:
        w = _coeffs(args.weights, "--weights")
        h = trig_series(w, G)
        out["weights"] = w
        out["delta_of_weights"] = error_functional(h, f, g, A)
        out["excess"] = out["delta_of_weights"] - sol.mse
    return out, {}


def _class_from_config(cfg: RunConfig, name: str, G: int):
    mm = cfg.minimax
    try:
        if name == "power":
            return PowerPair(float(mm["P1"]), float(mm["P2"]))
        if name == "joint":
            return JointMinimal(float(mm["P0"]))
        if name == "band":
            f = evaluate_density(cfg.f, G)
            lower = _density_spec(mm["lower"], "minimax.lower", cfg.base_dir) if "lower" in mm else None
            upper = _density_spec(mm["upper"], "minimax.upper", cfg.base_dir) if "upper" in mm else None
            v = evaluate_density(lower.density(G), G) if lower else float(mm.get("lower_scale", 1.0)) * f
            u = evaluate_density(upper.density(G), G) if upper else float(mm.get("upper_scale", 1.0)) * f
            g1 = (
                evaluate_density(_density_spec(mm["g1"], "minimax.g1", cfg.base_dir).density(G), G)
                if "g1" in mm
                else evaluate_density(cfg.g, G)
            )
            P1 = float(mm.get("P1", np.mean(f)))
            P2 = float(mm.get("P2", np.mean(g1)))
            return BandContamination(v, u, P1, g1, float(mm["eps"]), P2)
    except KeyError as exc:
        raise ConfigError(f"minimax class {name!r} needs parameter {exc.args[0]!r}") from None
    raise ConfigError(f"unknown minimax class {name!r}")


def cmd_minimax(cfg: RunConfig, args):
    name = args.klass or cfg.minimax.get("class")
    if name is None:
        raise ConfigError("no minimax class given (--class or minimax.class)")
    G = _int(cfg.minimax.get("grid", 512), "minimax.grid", 16)
    L = _int(cfg.minimax.get("truncation", cfg.truncation), "minimax.truncation", 1)
    if 4 * L >= G:
        raise ConfigError(f"minimax truncation {L} needs a grid larger than {4 * L}")
    klass = _class_from_config(cfg, name, G)
    kwargs = {"L": L}
    for key in ("tol", "max_iter"):
        if key in cfg.tolerances:
            kwargs[key] = cfg.tolerances[key]
    if name != "band":
        kwargs["G"] = G
    if name == "power":
        kwargs.pop("tol", None)
        kwargs.pop("max_iter", None)
    sol = solve_minimax(klass, cfg.functional, **kwargs)
    out = {
        "class": name,
        "delta0": sol.delta0,
        "iterations": sol.iterations,
        "multipliers": _scalars(sol.multipliers),
        "residuals": {k: v for k, v in sol.residuals.items()},
        "power_f0": float(np.mean(sol.f0)),
        "power_g0": float(np.mean(sol.g0)),
    }
    try:
        w, tail = time_weights(sol.h0, min(cfg.truncation, G // 2 - 1), tol=np.inf)
        out["robust_weights"] = w
        out["robust_weight_tail"] = tail
    except ConsistencyError:
        pass
    if args.verify:
        rep = verify_saddle_point(sol, n_trials=args.verify, seed=args.seed)
        out["saddle"] = {
            "passes": rep.passes,
            "left_violation": rep.left_violation,
            "right_violation": rep.right_violation,
            "n_trials": rep.n_trials,
            "tolerance": rep.tolerance,
        }
    cols = {"lambda": frequency_grid(G), "f0": sol.f0, "g0": sol.g0, "h0~c": sol.h0}
    for k, v in sol.multipliers.items():
        if isinstance(v, np.ndarray):
            cols[k] = v
    return out, {"densities.csv": cols}


def cmd_simulate(cfg: RunConfig, args):
    sim = cfg.simulation
    paths = _int(sim.get("paths", 100_000), "simulation.paths", 2)
    seed = _int(sim.get("seed", 0), "simulation.seed", 0)
    n = sim.get("n")
    n = None if n is None else _int(n, "simulation.n", 1)
    sol = solve_filter(cfg.f, cfg.g, a=cfg.functional, L=cfg.truncation, G=cfg.grid)
    w, _ = time_weights(sol)
    mc = empirical_mse(w, cfg.signal.ma_coeffs(), cfg.noise.ma_coeffs(), cfg.functional, n=n, paths=paths, seed=seed)
    return {
        "delta": sol.mse,
        "empirical_mean": mc.mean,
        "stderr": mc.stderr,
        "z": (mc.mean - sol.mse) / mc.stderr if mc.stderr > 0 else None,
        "paths": mc.paths,
        "window": mc.window,
        "bias_bound": mc.bias_bound,
        "seed": seed,
    }, {}


def cmd_oracle(cfg: RunConfig, args):
    if args.which == "toeplitz":
        res = toeplitz_projection(cfg.f, cfg.g, cfg.functional, M=args.M, G=cfg.grid)
        lib = solve_filter(cfg.f, cfg.g, a=cfg.functional, L=cfg.truncation, G=cfg.grid)
        return {
            "M": res.window,
            "mse": res.mse,
            "library_delta": lib.mse,
            "gap": res.mse - lib.mse,
            "weights": res.weights,
        }, {"weights.csv": {"k": np.arange(res.weights.size), "w~c": res.weights}}
    name = args.klass or cfg.minimax.get("class")
    if name is None:
        raise ConfigError("gridmax needs a minimax class (--class or minimax.class)")
    G = args.grid
    klass = _class_from_config(cfg, name, G)
    res = grid_maximize_delta(
        klass, cfg.functional, n_nodes=args.nodes, G=G, L=args.L, restarts=args.restarts, seed=args.seed
    )
    return {
        "class": name,
        "delta": res.delta,
        "restart_deltas": res.restart_deltas,
        "spread": res.spread,
        "evaluations": res.evaluations,
        "nodes": args.nodes,
        "grid": G,
        "truncation": args.L,
        "seed": args.seed,
    }, {"densities.csv": {"lambda": frequency_grid(G), "f": res.f, "g": res.g}}


COMMANDS = {
    "filter": cmd_filter,
    "smooth": cmd_smooth,
    "point": cmd_point,
    "factorize": cmd_factorize,
    "mse": cmd_mse,
    "minimax": cmd_minimax,
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robustfilter", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_, first=None):
        p = sub.add_parser(name, help=help_)
        if first is not None:
            p.add_argument(first[0], choices=first[1])
        p.add_argument("config", help=f"YAML config (relative paths also searched in ${CONFIG_DIR_ENV})")
        p.add_argument("--output", "-o", help="write the JSON result here instead of stdout")
        p.add_argument("--csv", metavar="DIR", help="write CSV series into DIR")
        return p

    p = add("filter", "optimal filter for the configured functional")
    p.add_argument("--method", choices=("direct", "factorized", "finite"), default="direct")
    add("smooth", "estimate of xi(0) from the observed past")
    p = add("point", "estimate of xi(p) for p <= 0")
    p.add_argument("--p", type=int, required=True)
    add("factorize", "canonical factors of 1/(f+g), f+g and f")
    p = add("mse", "error of the optimal filter, or of given weights")
    p.add_argument("--weights", type=float, nargs="+", help="real weights w(0), w(1), ... to evaluate")
    p = add("minimax", "least favorable densities and robust characteristic")
    p.add_argument("--class", dest="klass", choices=("power", "joint", "band"))
    p.add_argument("--verify", type=int, default=0, metavar="N", help="run a saddle-point check with N trials")
    p.add_argument("--seed", type=int, default=0)
    add("simulate", "Monte-Carlo error of the optimal weights")
    p = add("oracle", "independent oracles", first=("which", ("toeplitz", "gridmax")))
    p.add_argument("--M", type=int, default=512, help="window for the Toeplitz oracle")
    p.add_argument("--class", dest="klass", choices=("power", "joint", "band"))
    p.add_argument("--nodes", type=int, default=64)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--L", type=int, default=32)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    return parser


def resolved_tolerances(cfg: RunConfig) -> dict:
    out = {"tol": TOL, "max_iter": MAX_ITER, "causality": CAUSALITY_TOL, "factorization": FACTOR_TOL}
    out.update(cfg.tolerances)
    return out


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, MinimalityError):
        return EXIT_MINIMALITY
    if isinstance(exc, (ConvergenceError, ConsistencyError)):
        return EXIT_SOLVER
    return EXIT_CONFIG


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        result, series = COMMANDS[args.command](cfg, args)
    except (RobustFilterError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        code = _exit_code(exc)
        record = {"error": type(exc).__name__, "exit_code": code, "message": str(exc).replace("\n", " ")}
        if isinstance(exc, MinimalityError) and exc.frequency is not None:
            record["frequency"] = exc.frequency
        if isinstance(exc, ConvergenceError):
            record["residual"] = exc.residual
        stderr.write(json.dumps(jsonable(record), sort_keys=True) + "\n")
        return code
    doc = {
        "command": args.command,
        "config_hash": cfg.digest,
        "settings": {
            "truncation": cfg.truncation,
            "grid": cfg.grid,
            "functional": cfg.functional,
            "tolerances": resolved_tolerances(cfg),
        },
        "result": result,
        "metadata": {"version": __version__, "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat()},
    }
    text = json.dumps(jsonable(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        stdout.write(text)
    if args.csv:
        out_dir = Path(args.csv)
        out_dir.mkdir(parents=True, exist_ok=True)
        for fname, cols in series.items():
            write_csv(out_dir / fname, cols)
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
