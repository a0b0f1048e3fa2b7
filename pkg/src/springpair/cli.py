"""Command line front end.

Subcommands ``run``, ``landscape``, ``mep`` and ``compare`` share one
configuration layout: built-in defaults, overlaid by an optional preset,
overlaid by an optional INI file, overlaid by ``--seed``/``--out``.

Exit codes: 0 on success, 2 when the search did not converge (or the
landscape budget ran out), 1 for configuration or output errors.
"""
from __future__ import annotations

import argparse
import ast
import configparser
import csv
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import spm
from .baselines import BaselineParams, DimerState, GadState, dimer_run, gad_run, path_max_energy
from .core import SpringPair, SpringPairError, unit
from .landscape import (
    DescentParams,
    EnumerationParams,
    FrontierBudgetExceeded,
    Minimum,
    build_graph,
    gradient_descent,
    reconstruct_mep,
)
from .potentials import (
    LJCluster,
    LPSurface,
    V1Surface,
    V2Surface,
    pentagonal_bipyramid,
    read_lp_field,
    read_xyz,
    write_lp_field,
    write_xyz,
    write_xyz_frames,
)

logger = logging.getLogger("springpair")

SCHEMA = 1
EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED = 0, 1, 2

DEFAULTS = {
    "problem": {
        "name": "v1", "particles": "7", "domain_length": "60pi", "grid_size": "256",
        "epsilon": "-0.01", "alpha": "1.0", "q1": "1.0", "q2": "2cos(pi/12)", "known_saddle": "1, 0",
        "phasons": "false",
    },
    "method": {"name": "spm"},
    "spm": {
        "alpha1": "5e-2", "alpha2": "2.5e-1", "alpha3": "5e-2", "eps1": "1e-2", "eps2": "1e-7",
        "max_drift_steps": "200", "max_cycles": "100000", "natural_length": "1e-2", "climb_steps": "1",
        "min_drift_steps": "1", "precondition": "false", "align_pair": "true", "curvature_step": "",
        "trace_positions": "true",
    },
    "baseline": {
        "step": "5e-2", "tolerance": "1e-7", "max_iters": "20000", "rotation_steps": "10",
        "rotation_tol": "1e-3", "mode_step": "2e-1", "fd_step": "1e-4", "max_move": "0.1",
        "half_length": "1e-3",
    },
    "initial": {
        "start": "0, -1", "relax": "false", "direction": "0.4, 1", "size": "0.3",
        "width": "6", "band": "0.05", "disc_radius": "20",
    },
    "landscape": {"n_trials": "60", "perturbation": "0.3", "max_minima": "50"},
    "descent": {
        "step": "1e-2", "tol": "1e-8", "max_iters": "200000", "record_every": "1",
        "precondition": "false", "delta": "0.1",
    },
    "run": {"seed": "0", "out": "out"},
}

PRESETS = {
    "v1": {},
    "v2": {
        "problem": {"name": "v2", "known_saddle": "0, 0"},
        "initial": {"start": "-3, 0", "relax": "true", "direction": "1, 1", "size": "0.5"},
        "descent": {"delta": "0.05"},
    },
    "lj7": {
        "problem": {"name": "lj", "particles": "7", "known_saddle": ""},
        "spm": {"alpha1": "5e-3", "alpha3": "5e-3", "eps2": "1e-6", "max_cycles": "3000",
                "max_drift_steps": "50"},
        "initial": {"start": "bipyramid", "relax": "true", "direction": "random", "size": "0.3"},
        "landscape": {"n_trials": "60", "perturbation": "0.3"},
        "descent": {"step": "4e-3", "tol": "1e-7", "delta": "0.1"},
    },
    "lp-dis-ddqc": {
        "problem": {"name": "lp", "domain_length": "60pi", "grid_size": "256", "epsilon": "-0.01",
                    "alpha": "1.0", "known_saddle": ""},
        "spm": {"alpha1": "1.0", "alpha2": "2.0", "alpha3": "5.0", "eps1": "1e-2", "eps2": "1e-9",
                "natural_length": "2e-2", "max_cycles": "20000", "precondition": "true",
                "trace_positions": "false"},
        "initial": {"start": "zero", "direction": "localized", "size": "0.1", "width": "6",
                    "band": "0.05"},
        "descent": {"step": "0.5", "tol": "1e-10", "max_iters": "100000", "record_every": "100",
                    "precondition": "true", "delta": "0.5"},
    },
    "lp-ddqc-lq": {
        "problem": {"name": "lp", "domain_length": "60pi", "grid_size": "256", "epsilon": "0.05",
                    "alpha": "1.0", "known_saddle": "", "phasons": "true"},
        "spm": {"alpha1": "1.0", "alpha2": "2.0", "alpha3": "5.0", "eps1": "1e-2", "eps2": "1e-8",
                "natural_length": "2e-2", "max_cycles": "20000", "precondition": "true",
                "trace_positions": "false"},
        "initial": {"start": "ddqc", "relax": "true", "direction": "disc", "size": "0.1",
                    "disc_radius": "20"},
        "descent": {"step": "0.5", "tol": "1e-10", "max_iters": "100000", "record_every": "100",
                    "precondition": "true", "delta": "0.5"},
    },
}

PROBLEMS = ("v1", "v2", "lj", "lp")
METHODS = ("spm", "dimer", "gad")


class ConfigError(Exception):
    """Invalid configuration, reported with its source location."""


class OutputError(Exception):
    pass


# --- value parsing --------------------------------------------------------------

_CONSTANTS = {"pi": math.pi}
_FUNCTIONS = {"cos": math.cos, "sin": math.sin, "sqrt": math.sqrt}
_BINOPS = {ast.Add: lambda a, b: a + b, ast.Sub: lambda a, b: a - b,
           ast.Mult: lambda a, b: a * b, ast.Div: lambda a, b: a / b}


def _evaluate(node):
    if isinstance(node, ast.Expression):
        return _evaluate(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _CONSTANTS:
        return _CONSTANTS[node.id]
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _evaluate(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_evaluate(node.left), _evaluate(node.right))
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCTIONS
            and len(node.args) == 1 and not node.keywords):
        return _FUNCTIONS[node.func.id](_evaluate(node.args[0]))
    raise ValueError("unsupported expression")


def parse_real(text: str) -> float:
    """A float, optionally written with pi and cos/sin/sqrt, e.g. ``60pi`` or ``2cos(pi/12)``."""
    s = text.strip().replace(" ", "")
    try:
        return float(s)
    except ValueError:
        pass
    # implicit products such as 60pi or 2cos(...)
    s = re.sub(r"(?<=[0-9.)])(?=[a-z(])", "*", s)
    try:
        return _evaluate(ast.parse(s, mode="eval"))
    except (SyntaxError, ValueError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def parse_vector(text: str) -> np.ndarray:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if not parts:
        raise ValueError("empty vector")
    return np.array([parse_real(p) for p in parts])


def parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# --- configuration ----------------------------------------------------------------


@dataclass
class RunConfig:
    problem: str
    method: str
    spm: spm.SpmConfig
    baseline: BaselineParams
    enumeration: EnumerationParams
    descent: DescentParams
    delta: float
    initial: dict
    problem_params: dict
    known_saddle: np.ndarray | None
    half_length: float
    seed: int
    out: Path


class _Source:
    """Where each setting came from, for error messages."""

    def __init__(self):
        self.where: dict[tuple[str, str], str] = {}

    def note(self, section, key, where):
        self.where[(section, key)] = where

    def __call__(self, section, key) -> str:
        return self.where.get((section, key), "built-in default")


def _file_lines(path: Path) -> dict[tuple[str, str], int]:
    lines = {}
    section = None
    for no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
        elif section and line and line[0] not in "#;" and ("=" in line or ":" in line):
            key = line.split("=", 1)[0].split(":", 1)[0].strip().lower()
            lines[(section, key)] = no
    return lines


def load_settings(config_path=None, preset=None) -> tuple[dict, _Source]:
    settings = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    source = _Source()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        for sec, vals in PRESETS[preset].items():
            for key, value in vals.items():
                settings[sec][key] = value
                source.note(sec, key, f"preset {preset}")
    if config_path is not None:
        path = Path(config_path)
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        lines = _file_lines(path)
        for sec in parser.sections():
            if sec not in settings:
                raise ConfigError(f"{path}: unknown section [{sec}]")
            for key, value in parser.items(sec):
                where = f"{path}:{lines.get((sec, key), '?')}"
                if key not in settings[sec]:
                    raise ConfigError(f"{where}: unknown key {key!r} in [{sec}]")
                settings[sec][key] = value
                source.note(sec, key, where)
    return settings, source


def _get(settings, source, section, key, kind):
    text = settings[section][key]
    try:
        return kind(text)
    except (ValueError, TypeError, SyntaxError, ZeroDivisionError) as exc:
        raise ConfigError(f"{source(section, key)}: [{section}] {key} = {text!r}: {exc}") from exc


def _optional(kind):
    return lambda text: None if not text.strip() else kind(text)


def build_config(settings: dict, source: _Source, seed=None, out=None) -> RunConfig:
    g = lambda sec, key, kind: _get(settings, source, sec, key, kind)  # noqa: E731
    problem = settings["problem"]["name"].strip().lower()
    if problem not in PROBLEMS:
        raise ConfigError(f"{source('problem', 'name')}: problem must be one of {PROBLEMS}, got {problem!r}")
    method = settings["method"]["name"].strip().lower()
    if method not in METHODS:
        raise ConfigError(f"{source('method', 'name')}: method must be one of {METHODS}, got {method!r}")

    spm_kinds = {f.name: f.type for f in fields(spm.SpmConfig)}
    spm_kw = {}
    for key in settings["spm"]:
        kind = spm_kinds[key]
        if "bool" in str(kind):
            spm_kw[key] = g("spm", key, parse_bool)
        elif "int" in str(kind):
            spm_kw[key] = g("spm", key, int)
        elif key == "curvature_step":
            spm_kw[key] = g("spm", key, _optional(parse_real))
        else:
            spm_kw[key] = g("spm", key, parse_real)
    run_seed = g("run", "seed", int) if seed is None else int(seed)
    if run_seed < 0:
        raise ConfigError(f"{source('run', 'seed')}: seed must be non-negative")
    try:
        spm_cfg = spm.SpmConfig(seed=run_seed, **spm_kw)
    except ValueError as exc:
        raise ConfigError(f"[spm]: {exc}") from exc

    base_kw = {}
    for f in fields(BaselineParams):
        base_kw[f.name] = g("baseline", f.name, int if "int" in str(f.type) else parse_real)
    baseline = BaselineParams(**base_kw)
    half_length = g("baseline", "half_length", parse_real)
    for name, value in list(base_kw.items()) + [("half_length", half_length)]:
        if not value > 0:
            raise ConfigError(f"{source('baseline', name)}: [baseline] {name} must be positive")

    descent = DescentParams(
        step=g("descent", "step", parse_real),
        tol=g("descent", "tol", parse_real),
        max_iters=g("descent", "max_iters", int),
        record_every=g("descent", "record_every", int),
        precondition=g("descent", "precondition", parse_bool),
    )
    delta = g("descent", "delta", parse_real)
    if not (descent.step > 0 and descent.tol > 0 and delta > 0 and descent.record_every >= 1):
        raise ConfigError("[descent]: step, tol and delta must be positive and record_every >= 1")
    enumeration = EnumerationParams(
        n_trials=g("landscape", "n_trials", int),
        perturbation=g("landscape", "perturbation", parse_real),
        seed=run_seed,
        max_minima=g("landscape", "max_minima", int),
        descent=descent,
        delta=delta,
    )
    if enumeration.n_trials < 1 or enumeration.max_minima < 1 or not enumeration.perturbation > 0:
        raise ConfigError("[landscape]: n_trials and max_minima must be >= 1, perturbation > 0")

    params = {}
    if problem == "lj":
        params["particles"] = g("problem", "particles", int)
        if params["particles"] < 2:
            raise ConfigError(f"{source('problem', 'particles')}: need at least two particles")
    if problem == "lp":
        for key in ("domain_length", "epsilon", "alpha", "q1", "q2"):
            params[key] = g("problem", key, parse_real)
        params["grid_size"] = g("problem", "grid_size", int)
        params["phasons"] = g("problem", "phasons", parse_bool)
        n = params["grid_size"]
        if n < 2 or n & (n - 1):
            raise ConfigError(f"{source('problem', 'grid_size')}: grid_size must be a power of two")
        if not (params["domain_length"] > 0 and params["q1"] > 0 and params["q2"] > 0):
            raise ConfigError("[problem]: domain_length, q1 and q2 must be positive")
    known = g("problem", "known_saddle", _optional(parse_vector))

    initial = {
        "start": settings["initial"]["start"].strip(),
        "relax": g("initial", "relax", parse_bool),
        "direction": settings["initial"]["direction"].strip(),
        "size": g("initial", "size", parse_real),
        "width": g("initial", "width", parse_real),
        "band": g("initial", "band", parse_real),
        "disc_radius": g("initial", "disc_radius", parse_real),
    }
    if not initial["size"] > 0:
        raise ConfigError(f"{source('initial', 'size')}: [initial] size must be positive")
    out_dir = Path(out) if out is not None else Path(settings["run"]["out"])
    return RunConfig(problem, method, spm_cfg, baseline, enumeration, descent, delta, initial,
                     params, known, half_length, run_seed, out_dir)


def load_config(config_path=None, preset=None, seed=None, out=None) -> RunConfig:
    if config_path is None and preset is None:
        raise ConfigError("give --config, --preset or both")
    settings, source = load_settings(config_path, preset)
    return build_config(settings, source, seed, out)


# --- problem setup ----------------------------------------------------------------


def make_surface(cfg: RunConfig):
    pes = _surface(cfg)
    if cfg.known_saddle is not None and cfg.known_saddle.size != pes.dimension:
        raise ConfigError(f"[problem] known_saddle has {cfg.known_saddle.size} components, "
                          f"problem needs {pes.dimension}")
    return pes


def _surface(cfg: RunConfig):
    if cfg.problem == "v1":
        return V1Surface()
    if cfg.problem == "v2":
        return V2Surface()
    if cfg.problem == "lj":
        return LJCluster(cfg.problem_params["particles"])
    p = cfg.problem_params
    return LPSurface(p["domain_length"], p["grid_size"], p["epsilon"], p["alpha"], p["q1"], p["q2"],
                     phasons=p["phasons"])


def dodecagonal_field(pes: LPSurface, amplitude: float = 0.1) -> np.ndarray:
    """Sum of twelve plane waves on each of the two wave-number shells."""
    x, y = pes.coordinates()
    phi = np.zeros_like(x)
    for q, offset in ((pes.q1, 0.0), (pes.q2, np.pi / 12)):
        for j in range(6):
            th = offset + j * np.pi / 6
            phi += np.cos(q * (np.cos(th) * x + np.sin(th) * y))
    phi *= amplitude
    return phi - phi.mean()


def localized_direction(pes: LPSurface, rng, width: float, band: float) -> np.ndarray:
    """Seeded noise filtered onto both wave-number shells under a Gaussian envelope at the box centre."""
    n = pes.grid_size
    noise_hat = np.fft.rfft2(rng.standard_normal((n, n)))
    k = np.sqrt(pes.ksq)
    shells = np.exp(-(((k - pes.q1) / band) ** 2)) + np.exp(-(((k - pes.q2) / band) ** 2))
    v = np.fft.irfft2(noise_hat * shells, s=(n, n))
    x, y = pes.coordinates()
    c = pes.domain_length / 2
    v *= np.exp(-((x - c) ** 2 + (y - c) ** 2) / (2 * width**2))
    return v - v.mean()


def _disc_direction(pes: LPSurface, rng, radius: float) -> np.ndarray:
    n = pes.grid_size
    x, y = pes.coordinates()
    c = pes.domain_length / 2
    r = np.hypot(x - c, y - c)
    v = rng.standard_normal((n, n)) * 0.5 * (1 - np.tanh((r - radius) / 2.0))
    return v - v.mean()


def _relax(pes, x, cfg: RunConfig):
    m = gradient_descent(pes, x, cfg.descent.step, cfg.descent.tol, cfg.descent.max_iters,
                         precondition=cfg.descent.precondition)
    return m.position


def initial_state(cfg: RunConfig, pes) -> tuple[np.ndarray, np.ndarray]:
    """Start point and unit perturbation direction."""
    init = cfg.initial
    rng = np.random.default_rng(cfg.seed)
    start_text = init["start"].lower()
    if cfg.problem == "lj":
        if start_text == "bipyramid":
            x = pentagonal_bipyramid()
            if pes.dimension != x.size:
                raise ConfigError("[initial] start = bipyramid needs 7 particles")
        else:
            x = _load_xyz(init["start"], pes.dimension)
    elif cfg.problem == "lp":
        if start_text == "zero":
            x = np.zeros(pes.dimension)
        elif start_text == "ddqc":
            x = dodecagonal_field(pes).ravel()
        else:
            x = _load_field(init["start"], pes)
    else:
        try:
            x = parse_vector(init["start"])
        except ValueError as exc:
            raise ConfigError(f"[initial] start: {exc}") from exc
        if x.size != pes.dimension:
            raise ConfigError(f"[initial] start has {x.size} components, problem needs {pes.dimension}")
    if init["relax"]:
        x = _relax(pes, x, cfg)

    d_text = init["direction"].lower()
    if d_text == "random":
        d = rng.standard_normal(pes.dimension)
        if hasattr(pes, "project_out_rigid"):
            d = pes.project_out_rigid(x, d)
        elif cfg.problem == "lp":
            d -= d.mean()
    elif d_text == "localized" and cfg.problem == "lp":
        d = localized_direction(pes, rng, init["width"], init["band"]).ravel()
    elif d_text == "disc" and cfg.problem == "lp":
        d = _disc_direction(pes, rng, init["disc_radius"]).ravel()
    else:
        try:
            d = parse_vector(init["direction"])
        except ValueError as exc:
            raise ConfigError(f"[initial] direction: {exc}") from exc
        if d.size != pes.dimension:
            raise ConfigError(f"[initial] direction has {d.size} components, problem needs {pes.dimension}")
    if not np.linalg.norm(d) > 0:
        raise ConfigError("[initial] direction must be non-zero")
    return x, unit(d)


def _load_xyz(path, dimension):
    try:
        frames = read_xyz(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read XYZ start {path}: {exc}") from exc
    if frames.shape[1] != dimension:
        raise ConfigError(f"{path}: {frames.shape[1] // 3} particles, expected {dimension // 3}")
    return frames[0]


def _load_field(path, pes):
    try:
        field, params = read_lp_field(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read field start {path}: {exc}") from exc
    if field.ndim != 2 or field.shape[0] != pes.grid_size:
        raise ConfigError(f"{path}: field grid does not match the configured grid_size")
    return field.ravel() - field.mean()


# --- output -----------------------------------------------------------------------


def _prepare_out(out: Path) -> Path:
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutputError(f"output directory {out} is not writable: {exc.strerror or exc}") from exc
    return out


def _lp_params(pes: LPSurface) -> dict:
    return {"L": pes.domain_length, "N": pes.grid_size, "epsilon": pes.epsilon, "alpha": pes.alpha,
            "q1": pes.q1, "q2": pes.q2}


def write_state(out: Path, stem: str, x, cfg: RunConfig, pes, comment: str = "") -> str:
    """Dump one state vector; returns the file name relative to ``out``."""
    x = np.asarray(x, dtype=np.float64)
    if cfg.problem == "lj":
        name = f"{stem}.xyz"
        write_xyz(out / name, x, comment)
    elif cfg.problem == "lp":
        name = f"{stem}.bin"
        write_lp_field(out / name, x.reshape(pes.grid_size, pes.grid_size), _lp_params(pes))
    else:
        name = f"{stem}.txt"
        (out / name).write_text("".join(f"{float(v)!r}\n" for v in x))
    return name


def read_state(path: Path, cfg: RunConfig, pes) -> np.ndarray:
    if cfg.problem == "lj":
        return read_xyz(path)[0]
    if cfg.problem == "lp":
        return read_lp_field(path)[0].ravel()
    return np.array([float(v) for v in Path(path).read_text().split()])


def write_path(out: Path, stem: str, path, cfg: RunConfig, pes) -> str:
    frames = np.asarray(path, dtype=np.float64)
    if cfg.problem == "lj":
        name = f"{stem}.xyz"
        write_xyz_frames(out / name, frames)
    elif cfg.problem == "lp":
        name = f"{stem}.bin"
        write_lp_field(out / name, frames.reshape(-1, pes.grid_size, pes.grid_size), _lp_params(pes))
    else:
        name = f"{stem}.csv"
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(frames.shape[1])])
            w.writerows([[repr(float(v)) for v in row] for row in frames])
    return name


def result_record(cfg: RunConfig, result: spm.SaddleResult, position_file: str, mode_file: str) -> dict:
    last = result.trace[-1] if result.trace else None
    return {
        "schema": SCHEMA,
        "problem": cfg.problem,
        "method": cfg.method,
        "status": result.status.value,
        "position_file": position_file,
        "mode_file": mode_file,
        "energy": float(result.energy),
        "e1": float(result.residual_e1),
        "e2": None if last is None or last.e2 is None else float(last.e2),
        "cycles": int(result.cycles_used),
        "verified_index1": bool(result.verified_index1),
        "curvature": None if result.curvature is None else float(result.curvature),
        "eps2": cfg.spm.eps2 if cfg.method == "spm" else cfg.baseline.tolerance,
        "seed": cfg.seed,
    }


def write_json(path: Path, record: dict) -> None:
    # json writes floats with repr, which round-trips 64-bit values exactly
    path.write_text(json.dumps(record, indent=2, allow_nan=True) + "\n")


# --- commands ---------------------------------------------------------------------


def _walk(cfg: RunConfig, pes, x0, d, method=None, record_path=False) -> spm.SaddleResult:
    method = method or cfg.method
    if method == "spm":
        pair = SpringPair.from_perturbation(x0, d, cfg.initial["size"], cfg.spm.natural_length)
        return spm.run(pes, pair, cfg.spm, known_saddle=cfg.known_saddle, record_path=record_path)
    start = x0 + cfg.initial["size"] * d
    if method == "dimer":
        return dimer_run(pes, DimerState.create(start, d, cfg.half_length), cfg.baseline, cfg.known_saddle)
    return gad_run(pes, GadState.create(start, d), cfg.baseline, cfg.known_saddle)


def cmd_run(cfg: RunConfig) -> int:
    out = _prepare_out(cfg.out)
    pes = make_surface(cfg)
    x0, d = initial_state(cfg, pes)
    logger.info("%s on %s, dimension %d", cfg.method, cfg.problem, pes.dimension)
    result = _walk(cfg, pes, x0, d)
    spm.write_trace_csv(out / "trace.csv", result.trace)
    pos = write_state(out, "position", result.position, cfg, pes, f"E = {result.energy!r}")
    mode = write_state(out, "mode", result.unstable_mode, cfg, pes, "unstable mode")
    write_json(out / "result.json", result_record(cfg, result, pos, mode))
    print(f"{result.status.value}: energy {result.energy:.10g}, e1 {result.residual_e1:.3e}, "
          f"{result.cycles_used} cycles, index-1 verified: {result.verified_index1}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _edge_row(graph, e):
    return f"{e.saddle.energy:12.4f}  {e.minimum_a:>4}-{e.minimum_b:<4} {e.barrier_from_a:9.4f} {e.barrier_from_b:9.4f}"


def graph_record(graph, out: Path, cfg: RunConfig, pes) -> dict:
    (out / "minima").mkdir(exist_ok=True)
    (out / "saddles").mkdir(exist_ok=True)
    minima = []
    for m in graph.minima:
        name = write_state(out / "minima", m.label, m.position, cfg, pes, f"{m.label} E = {m.energy!r}")
        minima.append({"label": m.label, "energy": float(m.energy), "xyz_file": f"minima/{name}"})
    edges = []
    for k, e in enumerate(graph.edges, 1):
        name = write_state(out / "saddles", f"S{k}", e.saddle.position, cfg, pes,
                           f"S{k} E = {e.saddle.energy!r}")
        edges.append({
            "saddle_energy": float(e.saddle.energy),
            "barrier_a": float(e.barrier_from_a),
            "barrier_b": float(e.barrier_from_b),
            "min_a": e.minimum_a,
            "min_b": e.minimum_b,
            "xyz_file": f"saddles/{name}",
        })
    return {"schema": SCHEMA, "problem": cfg.problem, "minima": minima, "edges": edges}


def print_graph(graph) -> None:
    print("minima")
    for m in graph.minima:
        print(f"  {m.label:>4}  {m.energy:12.4f}")
    print("saddles (energy, minima, barrier from each)")
    for e in graph.edges:
        print("  " + _edge_row(graph, e))


def cmd_landscape(cfg: RunConfig) -> int:
    if cfg.problem == "lp":
        raise ConfigError("[problem] landscape enumeration supports v1, v2 and lj")
    out = _prepare_out(cfg.out)
    pes = make_surface(cfg)
    x0, _ = initial_state(cfg, pes)
    seed = gradient_descent(pes, x0, cfg.descent.step, cfg.descent.tol, cfg.descent.max_iters)
    try:
        graph = build_graph(pes, seed, cfg.spm, cfg.enumeration)
        code = EXIT_OK
    except FrontierBudgetExceeded as exc:
        print(f"FrontierBudgetExceeded: {exc}")
        graph = exc.graph
        code = EXIT_NOT_CONVERGED
    write_json(out / "graph.json", graph_record(graph, out, cfg, pes))
    print_graph(graph)
    return code


def cmd_mep(cfg: RunConfig, saddle_file) -> int:
    saddle_file = Path(saddle_file)
    try:
        record = json.loads(saddle_file.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read saddle result {saddle_file}: {exc}") from exc
    if record.get("schema") != SCHEMA:
        raise ConfigError(f"{saddle_file}: unsupported schema {record.get('schema')!r}")
    if not record.get("verified_index1"):
        raise ConfigError(f"{saddle_file}: saddle is not verified index-1; refusing to build a path")
    pes = make_surface(cfg)
    base = saddle_file.parent
    try:
        x = read_state(base / record["position_file"], cfg, pes)
        mode = read_state(base / record["mode_file"], cfg, pes)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"{saddle_file}: cannot load saddle state: {exc}") from exc
    if x.size != pes.dimension:
        raise ConfigError(f"{saddle_file}: saddle dimension {x.size} does not match the configured problem")
    out = _prepare_out(cfg.out)
    saddle = spm.SaddleResult(x, pes.energy(x), unit(mode), record["e1"], record["cycles"], True)
    path, lo, hi = reconstruct_mep(pes, saddle, cfg.delta, cfg.descent)
    write_path(out, "path", path, cfg, pes)
    energies = pes.energies(np.asarray(path)) if hasattr(pes, "energies") else [pes.energy(p) for p in path]
    steps = np.linalg.norm(np.diff(np.asarray(path), axis=0), axis=1)
    arclength = np.concatenate([[0.0], np.cumsum(steps)])
    with open(out / "profile.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["arclength", "energy"])
        w.writerows([[repr(float(s)), repr(float(e))] for s, e in zip(arclength, energies)])
    print(f"path of {len(path)} points: E {lo.energy:.6g} -> saddle {saddle.energy:.6g} -> E {hi.energy:.6g}")
    return EXIT_OK


COMPARE_HEADER = ["method", "status", "energy", "e1", "e2", "iterations", "verified_index1",
                  "path_max_energy", "saddle_gap"]


def cmd_compare(cfg: RunConfig) -> int:
    out = _prepare_out(cfg.out)
    pes = make_surface(cfg)
    x0, d = initial_state(cfg, pes)
    rows = []
    results = {}
    for method in METHODS:
        res = _walk(cfg, pes, x0, d, method, record_path=True)
        results[method] = res
        spm.write_trace_csv(out / f"trace_{method}.csv", res.trace)
        write_path(out, f"path_{method}", res.path, cfg, pes)
    reference = results["spm"]
    for method, res in results.items():
        _, top = path_max_energy(res.path, pes)
        e2 = res.trace[-1].e2 if res.trace else None
        gap = top - reference.energy if reference.converged else float("nan")
        rows.append([method, res.status.value, repr(float(res.energy)), repr(res.residual_e1),
                     "" if e2 is None else repr(e2), res.cycles_used, res.verified_index1,
                     repr(top), repr(float(gap))])
        print(f"{method:>6}: {res.status.value:<18} E = {res.energy:.8g}  path max {top:.8g}")
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COMPARE_HEADER)
        w.writerows(rows)
    return EXIT_OK if reference.converged else EXIT_NOT_CONVERGED


# --- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [problem], [method], [spm], ... sections")
    common.add_argument("--preset", choices=sorted(PRESETS), help="built-in parameter set")
    common.add_argument("--out", help="output directory (overrides [run] out)")
    common.add_argument("--seed", type=int, help="random seed (overrides [run] seed)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser = argparse.ArgumentParser(prog="springpair", description="Spring pair saddle search.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="one walker run")
    sub.add_parser("landscape", parents=[common], help="enumerate minima and saddles")
    mep = sub.add_parser("mep", parents=[common], help="minimum energy path through a saddle")
    mep.add_argument("--saddle", required=True, help="result.json written by the run command")
    sub.add_parser("compare", parents=[common], help="spm, dimer and GAD from one start")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.preset, args.seed, args.out)
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "landscape":
            return cmd_landscape(cfg)
        if args.command == "mep":
            return cmd_mep(cfg, args.saddle)
        return cmd_compare(cfg)
    except (ConfigError, OutputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SpringPairError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED


if __name__ == "__main__":
    sys.exit(main())
