"""
Command-line interface.

    hypoflow <command> [--config run.toml] [options]

Values are resolved as defaults < config file < explicit flags. Reports go to
stdout (or ``--output``) as JSON or CSV; failures print a JSON error object on
stderr and exit with 2 (invalid input) or 3 (numerical failure).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import traceback

import numpy as np
from scipy import linalg

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from threadpoolctl import threadpool_limits

from . import catalog
from .catalog import ModelParams, load_model, model_kind, potential_for, resolve_name
from .flow import default_flow_grid, fit_constants
from .hilbert import NumericalError, singular_value_gap, spectral_gap
from .lifting import (
    check_lift_conditions,
    check_rate_bounds,
    default_gamma_grid,
    model_rate_formulas,
    overdamped_limit,
    rate_scan,
)
from .sde import SimConfig, estimate_decay_rate, simulate_langevin, simulate_overdamped

COMMANDS = ("spectrum", "rate-scan", "lift-check", "overdamped-limit", "flow-poincare",
            "simulate", "formulas", "models")
TABULAR = {"rate-scan", "flow-poincare", "simulate", "models"}

# key -> (type, default); None defaults are filled per command
SCHEMA = {
    "command": (str, None),
    "model": (str, "quadratic"),
    "gamma": (float, 1.0),
    "m": (float, 1.0),
    "amplitude": (float, 1.0),
    "coefficients": (list, None),
    "nx": (int, None),
    "nv": (int, catalog.DEFAULT_NV),
    "tol": (float, 1e-9),
    "gamma_min": (float, None),
    "gamma_max": (float, None),
    "n_gamma": (int, None),
    "prefactor": (bool, True),
    "horizon": (float, None),
    "quad_n": (int, 32),
    "seed": (int, 0),
    "dynamics": (str, "langevin"),
    "dt": (float, 0.01),
    "n_steps": (int, 1000),
    "n_paths": (int, 10000),
    "integrator": (str, "baoab"),
    "initial": (str, "point"),
    "x0": (float, 1.0),
    "v0": (float, 0.0),
    "record_every": (int, 10),
    "fit_observable": (str, None),
    "kind": (str, "langevin"),
    "c": (float, 1.0),
    "lambda_s": (float, 1.0),
    "c1": (float, 1.0),
    "c2": (float, 1.0),
    "output": (str, None),
    "format": (str, None),
    "pretty": (bool, False),
}
POSITIVE = {"gamma", "m", "tol", "gamma_min", "gamma_max", "horizon", "dt", "c", "lambda_s", "c1", "c2"}
CHOICES = {
    "format": ("json", "csv"),
    "dynamics": ("langevin", "overdamped"),
    "integrator": ("baoab", "euler_maruyama"),
    "initial": ("point", "stationary"),
    "kind": ("langevin", "quantum"),
}


class CliError(Exception):
    def __init__(self, message: str, code: int = 2, module: str = "hypoflow.cli"):
        super().__init__(message)
        self.code = code
        self.module = module


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hypoflow", description="Spectral and Monte Carlo analysis of lifted generators.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML file with option values")
    for key, (typ, _) in SCHEMA.items():
        if key == "command":
            continue
        flag = "--" + key.replace("_", "-")
        if typ is bool:
            p.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction, default=None)
        elif typ is list:
            p.add_argument(flag, dest=key, default=None,
                           help="JSON list, e.g. '[0.5, 0, 0.5]' or '[[0.5, 0], [0, 0], [0.5, 0]]'")
        else:
            p.add_argument(flag, dest=key, type=typ, default=None,
                           choices=CHOICES.get(key))
    return p


def read_config(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path!r}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"malformed config {path!r}: {exc}") from exc
    return validate_config(data)


def validate_config(data: dict) -> dict:
    """Strict schema: unknown keys, wrong types and nonpositive tolerances are rejected."""
    out = {}
    for key, val in data.items():
        k = key.replace("-", "_")
        if k not in SCHEMA:
            raise CliError(f"unknown config key {key!r}")
        typ = SCHEMA[k][0]
        if typ is float and isinstance(val, int) and not isinstance(val, bool):
            val = float(val)
        if not isinstance(val, typ) or (typ is not bool and isinstance(val, bool)):
            raise CliError(f"config key {key!r} must be {typ.__name__}")
        if k in CHOICES and val not in CHOICES[k]:
            raise CliError(f"config key {key!r} must be one of {CHOICES[k]}")
        out[k] = val
    return out


def resolve(args: argparse.Namespace) -> dict:
    cfg = read_config(args.config) if args.config else {}
    if "command" in cfg and cfg["command"] != args.command:
        raise CliError(f"config is for command {cfg['command']!r}, not {args.command!r}")
    opts = {}
    for key, (typ, default) in SCHEMA.items():
        if key == "command":
            continue
        val = getattr(args, key)
        if val is None:
            val = cfg.get(key, default)
        opts[key] = val
    if isinstance(opts["coefficients"], str):
        try:
            opts["coefficients"] = json.loads(opts["coefficients"])
        except json.JSONDecodeError as exc:
            raise CliError(f"coefficients must be a JSON list: {exc}") from exc
    for key in POSITIVE:
        if opts[key] is not None and not opts[key] > 0:
            raise CliError(f"{key} must be positive")
    if opts["format"] is None:
        opts["format"] = "csv" if args.command in TABULAR else "json"
    return opts


def _coefficients(raw):
    if raw is None:
        return None
    if not isinstance(raw, list):
        raise CliError("coefficients must be a list")
    return tuple(complex(*c) if isinstance(c, list) else complex(c) for c in raw)


def model_params(o: dict) -> ModelParams:
    return ModelParams(gamma=o["gamma"], m=o["m"], amplitude=o["amplitude"],
                       coefficients=_coefficients(o["coefficients"]), nx=o["nx"], nv=o["nv"])


def _grid(decomp, o, flow=False):
    if o["gamma_min"] is None and o["gamma_max"] is None and o["n_gamma"] is None:
        return None
    base = default_flow_grid(decomp) if flow else default_gamma_grid(decomp)
    lo = o["gamma_min"] if o["gamma_min"] is not None else base[0]
    hi = o["gamma_max"] if o["gamma_max"] is not None else base[-1]
    n = o["n_gamma"] if o["n_gamma"] is not None else base.size
    if n < 1 or hi < lo:
        raise CliError("invalid gamma grid")
    return np.geomspace(lo, hi, n)


def _complex_list(w):
    return [[float(z.real), float(z.imag)] for z in np.asarray(w, dtype=complex)]


# ---- commands: each returns (summary dict, list of row dicts or None) ----

def cmd_spectrum(o):
    d = load_model(o["model"], model_params(o))
    op = d.generator()
    rep = spectral_gap(op, o["tol"])
    s = singular_value_gap(op, o["tol"])
    return {
        "model": o["model"], "gamma": d.gamma, "dim": d.dim, "gap": rep.gap,
        "kernel_dim": rep.kernel_dim, "singular_gap": s, "t_rel_lower_bound": 1 / (2 * s),
        "tolerance_used": rep.tolerance_used, "eigenvalues": _complex_list(rep.eigenvalues),
    }, None


def cmd_rate_scan(o):
    d = load_model(o["model"], model_params(o))
    rep = rate_scan(d, _grid(d, o), with_prefactor=o["prefactor"], tol=o["tol"])
    rows = rep.rows()
    k = int(np.argmax(rep.spectral_gaps))
    for i, r in enumerate(rows):
        r["is_argmax"] = i == k
    summary = rep.to_dict()
    summary["model"] = o["model"]
    if o["prefactor"]:
        chk = check_rate_bounds(rep)
        summary["gap_bound_holds"] = bool(np.all(chk.gap_bound_ok))
        summary["upper_bound_holds"] = None if chk.upper_bound_ok is None else bool(np.all(chk.upper_bound_ok))
    return summary, rows


def cmd_lift_check(o):
    d = load_model(o["model"], model_params(o))
    rep = check_lift_conditions(d, gamma=o["gamma"], tol=o["tol"])
    out = rep.to_dict()
    out["kernel_dims"] = {"ker_ls": rep.ker_ls_dim, "ker_l": rep.ker_l_dim}
    out["model"] = o["model"]
    return out, None


def cmd_overdamped_limit(o):
    d = load_model(o["model"], model_params(o))
    l_o = overdamped_limit(d)
    w = np.sort(linalg.eigvalsh(l_o.euclidean))[::-1]
    gap = spectral_gap(l_o, o["tol"]).gap if np.any(np.abs(w) > o["tol"] * max(abs(w).max(), 1)) else None
    m = l_o.matrix
    mat = _complex_list(m.ravel()) if np.iscomplexobj(m) else m.tolist()
    return {"model": o["model"], "dim": l_o.dim, "gap": gap, "eigenvalues": w.tolist(),
            "matrix": mat, "matrix_shape": list(m.shape)}, None


def cmd_flow_poincare(o):
    d = load_model(o["model"], model_params(o))
    ff = fit_constants(d, _grid(d, o, flow=True), o["horizon"], quad_n=o["quad_n"], seed=o["seed"])
    rows = [s.to_dict() for s in ff.samples]
    summary = ff.to_dict()
    summary["model"] = o["model"]
    return summary, rows


def cmd_simulate(o):
    name, params = resolve_name(o["model"], model_params(o))
    if model_kind(name) != "classical":
        raise CliError("simulate needs a classical model")
    pot = potential_for(name, params)
    langevin = o["dynamics"] == "langevin"
    obs = ("x", "v", "x2", "v2") if pot.kind == "quadratic" else ("cosx", "sinx", "v", "v2")
    cfg = SimConfig(pot, o["dt"], o["n_steps"], o["n_paths"], o["gamma"] if langevin else None,
                    o["seed"], o["integrator"], o["initial"], o["x0"], o["v0"], o["record_every"],
                    obs if langevin else tuple(k for k in obs if not k.startswith("v")))
    ens = simulate_langevin(cfg) if langevin else simulate_overdamped(cfg)
    summary = ens.to_dict()
    summary["dynamics"] = o["dynamics"]
    if o["fit_observable"]:
        summary["decay_fit"] = estimate_decay_rate(ens, o["fit_observable"]).to_dict()
    return summary, ens


def cmd_formulas(o):
    if o["kind"] == "langevin":
        nu = model_rate_formulas("langevin", m=o["m"], gamma=o["gamma"], c=o["c"])
        params = {"m": o["m"], "gamma": o["gamma"], "c": o["c"]}
    else:
        nu = model_rate_formulas("quantum", lambda_s=o["lambda_s"], c1=o["c1"], c2=o["c2"], gamma=o["gamma"])
        params = {"lambda_s": o["lambda_s"], "c1": o["c1"], "c2": o["c2"], "gamma": o["gamma"]}
    return {"kind": o["kind"], "params": params, "nu": nu}, None


def cmd_models(o):
    rows = catalog.list_models()
    return {"models": rows}, rows


HANDLERS = {
    "spectrum": cmd_spectrum, "rate-scan": cmd_rate_scan, "lift-check": cmd_lift_check,
    "overdamped-limit": cmd_overdamped_limit, "flow-poincare": cmd_flow_poincare,
    "simulate": cmd_simulate, "formulas": cmd_formulas, "models": cmd_models,
}


# ---- output ----

def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (dict, list)):
        return json.dumps(v, sort_keys=True)
    return str(v)


def to_csv(rows: list[dict]) -> str:
    out = io.StringIO()
    if not rows:
        return ""
    cols = list(rows[0])
    w = csv.writer(out, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in cols])
    return out.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else None
    return x


def to_pretty(summary: dict, rows) -> str:
    lines = []
    if rows:
        cols = [c for c in rows[0] if not isinstance(rows[0][c], (list, dict))]
        fmt = lambda v: f"{v:.6g}" if isinstance(v, float) else _cell(v)
        table = [cols] + [[fmt(r[c]) for c in cols] for r in rows]
        width = [max(len(t[i]) for t in table) for i in range(len(cols))]
        lines += ["  ".join(t[i].rjust(width[i]) for i in range(len(cols))) for t in table]
    else:
        for k, v in summary.items():
            if isinstance(v, float):
                lines.append(f"{k}: {v:.6g}")
            elif not isinstance(v, (list, dict)) or len(json.dumps(_jsonable(v))) < 80:
                lines.append(f"{k}: {json.dumps(_jsonable(v))}")
    return "\n".join(lines) + "\n"


def render(command: str, summary: dict, rows, fmt: str, pretty: bool) -> str:
    if command == "simulate":
        ens = rows
        if pretty:
            return to_pretty(summary, [{"time": t, **{f"{k}_mean": ens.means[k][i] for k in ens.means}}
                                       for i, t in enumerate(ens.times)])
        return ens.to_csv() if fmt == "csv" else json.dumps(_jsonable(summary), sort_keys=True) + "\n"
    if pretty:
        return to_pretty(summary, rows)
    if fmt == "csv":
        return to_csv(rows if rows is not None else [
            {k: v for k, v in summary.items() if not isinstance(v, (list,))}
        ])
    return json.dumps(_jsonable(summary), sort_keys=True) + "\n"


def _threads() -> int | None:
    env = os.environ.get("HYPOFLOW_THREADS")
    if env is None or env == "":
        return None
    try:
        n = int(env)
    except ValueError:
        raise CliError(f"HYPOFLOW_THREADS must be a positive integer, got {env!r}") from None
    if n < 1:
        raise CliError("HYPOFLOW_THREADS must be a positive integer")
    return n


def _origin(exc: BaseException) -> str:
    mod = "hypoflow"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("hypoflow"):
            mod = name
    return mod


def _fail(code: int, kind: str, module: str, message: str, stderr) -> int:
    err = {"error": {"code": code, "type": kind, "module": module, "message": message}}
    stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    try:
        args = build_parser().parse_args(argv)
        opts = resolve(args)
        n = _threads()
        with threadpool_limits(limits=n):
            summary, rows = HANDLERS[args.command](opts)
        text = render(args.command, summary, rows, opts["format"], opts["pretty"])
        if opts["output"]:
            with open(opts["output"], "w") as fh:
                fh.write(text)
        else:
            stdout.write(text)
        return 0
    except CliError as exc:
        return _fail(exc.code, "validation", exc.module, str(exc), stderr)
    except (NumericalError, FloatingPointError, linalg.LinAlgError) as exc:
        mod = _origin(exc)
        return _fail(3, "numerical", mod, f"{mod}: {exc}", stderr)
    except (ValueError, KeyError, TypeError, OSError) as exc:
        mod = _origin(exc)
        return _fail(2, "validation", mod, f"{mod}: {exc}", stderr)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
