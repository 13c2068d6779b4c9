"""Command-line shell: JSON run configuration with dotted overrides, the
``solve``, ``verify``, and ``sweep`` subcommands, and artifact emission
(field/shock CSVs, report JSON, optional SVG plots and matrix-market dumps).

Exit codes: 0 success, 1 configuration error, 2 solver failure/divergence.
"""

from __future__ import annotations

import argparse
import difflib
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .driver import (
    SolverConfig,
    build_potential_problem,
    build_swirl_problem,
    sigma_scaling_study,
    solve_transonic_shock,
)
from .elliptic import assemble_system, linearized_coefficients
from .errors import ConfigError, CylShockError, DivergenceError
from .gasdyn import background_downstream
from .upstream import (
    ENTROPY_PROFILES,
    SWIRL_PROFILES,
    InflowSpec,
    build_parallel_swirl_inflow,
    helmholtz_decompose_upstream,
)
from .verification import BATTERIES, run_batteries

__all__ = ["RunConfig", "RunArtifacts", "parse_config", "run", "verify", "main"]

OUT_ROOT_ENV = "CYLSHOCK_OUT_ROOT"

DEFAULTS = {
    "inflow": {
        "eps_swirl": 0.0,
        "eps_entropy": 0.0,
        "swirl_profile": "quartic",
        "entropy_profile": "cosine",
    },
    "gas": {
        "gamma": 1.4,
        "u0_minus": 2.0,
        "rho0_minus": 1.0,
        "p0_minus": 1.0 / 1.4,
    },
    "solver": {
        "n_y": 129,
        "n_t": 65,
        "tol_phi": 1e-9,
        "tol_f": 1e-9,
        "tol_sl": 1e-9,
        "tol_psi": 1e-9,
        "max_sweeps": 200,
        "relax_f": 0.7,
        "relax_field": 1.0,
        "mode": "nested",
        "linear_rtol": 1e-11,
        "linear_maxiter": 0,
    },
    "output": {
        "dir": "runs/out",
        "emit_fields": True,
        "emit_plots": False,
        "emit_matrix": False,
        "threads": 1,
    },
}

_NUMBER = (int, float)
# key -> (expected types, constraint description, constraint check)
_SCHEMA = {
    "inflow": {
        "eps_swirl": (_NUMBER, ">= 0", lambda v: v >= 0),
        "eps_entropy": (_NUMBER, ">= 0", lambda v: v >= 0),
        "swirl_profile": (str, f"one of {SWIRL_PROFILES}", lambda v: v in SWIRL_PROFILES),
        "entropy_profile": (
            str,
            f"one of {ENTROPY_PROFILES}",
            lambda v: v in ENTROPY_PROFILES,
        ),
    },
    "gas": {
        "gamma": (_NUMBER, "> 1", lambda v: v > 1),
        "u0_minus": (_NUMBER, "> 0", lambda v: v > 0),
        "rho0_minus": (_NUMBER, "> 0", lambda v: v > 0),
        "p0_minus": (_NUMBER, "> 0", lambda v: v > 0),
    },
    "solver": {
        "n_y": (int, ">= 9", lambda v: v >= 9),
        "n_t": (int, ">= 9", lambda v: v >= 9),
        "tol_phi": (_NUMBER, "> 0", lambda v: v > 0),
        "tol_f": (_NUMBER, "> 0", lambda v: v > 0),
        "tol_sl": (_NUMBER, "> 0", lambda v: v > 0),
        "tol_psi": (_NUMBER, "> 0", lambda v: v > 0),
        "max_sweeps": (int, ">= 1", lambda v: v >= 1),
        "relax_f": (_NUMBER, "in (0, 1]", lambda v: 0 < v <= 1),
        "relax_field": (_NUMBER, "in (0, 1]", lambda v: 0 < v <= 1),
        "mode": (
            str,
            "nested | flattened-picard",
            lambda v: v in ("nested", "flattened-picard"),
        ),
        "linear_rtol": (_NUMBER, "> 0", lambda v: v > 0),
        "linear_maxiter": (int, ">= 0", lambda v: v >= 0),
    },
    "output": {
        "dir": (str, "path", lambda v: True),
        "emit_fields": (bool, "bool", lambda v: True),
        "emit_plots": (bool, "bool", lambda v: True),
        "emit_matrix": (bool, "bool", lambda v: True),
        "threads": (int, ">= 1", lambda v: v >= 1),
    },
}


@dataclass
class RunConfig:
    """Validated run configuration with defaults applied."""

    raw: dict
    inflow: InflowSpec
    background: object
    solver: SolverConfig
    output: dict
    config_hash: str

    def serialize(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True)


@dataclass
class RunArtifacts:
    """Paths, checksums, and metadata of the files a run emitted."""

    paths: dict
    checksums: dict
    metadata: dict
    status: str


def _suggest(key, known):
    close = difflib.get_close_matches(key, known, n=1)
    return f" (did you mean {close[0]!r}?)" if close else ""


def _validate(raw: dict) -> list:
    errors = []
    if not isinstance(raw, dict):
        return ["configuration must be a JSON object"]
    for section, content in raw.items():
        if section not in _SCHEMA:
            errors.append(f"unknown section {section!r}{_suggest(section, _SCHEMA)}")
            continue
        if not isinstance(content, dict):
            errors.append(f"section {section!r} must be an object")
            continue
        for key, value in content.items():
            if key not in _SCHEMA[section]:
                errors.append(
                    f"unknown key {section}.{key}{_suggest(key, _SCHEMA[section])}"
                )
                continue
            types, constraint, check = _SCHEMA[section][key]
            if isinstance(value, bool) and types is not bool:
                errors.append(f"{section}.{key}: expected a number, got a bool")
            elif not isinstance(value, types):
                errors.append(
                    f"{section}.{key}: expected {getattr(types, '__name__', types)}, "
                    f"got {type(value).__name__}"
                )
            elif not check(value):
                errors.append(f"{section}.{key}: must be {constraint}, got {value!r}")
    return errors


def config_hash(raw: dict) -> str:
    """Hash over the semantically meaningful sections (inflow, gas, solver);
    output paths, emit flags, and thread counts do not change results."""
    payload = {k: raw[k] for k in ("inflow", "gas", "solver")}
    text = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def apply_overrides(raw: dict, assignments) -> list:
    """Apply dotted --set overrides in place; returns error strings."""
    errors = []
    for item in assignments or []:
        if "=" not in item:
            errors.append(f"override {item!r} is not of the form key=value")
            continue
        key, _, text = item.partition("=")
        parts = key.strip().split(".")
        if len(parts) != 2:
            errors.append(f"override key {key!r} must be section.field")
            continue
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        raw.setdefault(parts[0], {})[parts[1]] = value
    return errors


def parse_config(source=None, overrides=None) -> RunConfig:
    """Build a validated RunConfig from a JSON file path, JSON text, or dict,
    with defaults filled in.  Raises ConfigError listing every violation."""
    if source is None:
        user = {}
    elif isinstance(source, dict):
        user = json.loads(json.dumps(source))
    else:
        text = str(source)
        if os.path.exists(text):
            with open(text) as handle:
                text = handle.read()
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"malformed JSON: {exc}"]) from exc

    errors = apply_overrides(user, overrides)
    raw = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    if isinstance(user, dict):
        for section, content in user.items():
            if section in raw and isinstance(content, dict):
                raw[section].update(content)
            else:
                raw.setdefault(section, content)
    errors += _validate(raw)
    if errors:
        raise ConfigError(errors)

    gas = raw["gas"]
    try:
        background = background_downstream(
            gas["u0_minus"], gas["rho0_minus"], gas["p0_minus"], gas["gamma"]
        )
        inflow = InflowSpec(
            eps_swirl=raw["inflow"]["eps_swirl"],
            eps_entropy=raw["inflow"]["eps_entropy"],
            swirl_profile=raw["inflow"]["swirl_profile"],
            entropy_profile=raw["inflow"]["entropy_profile"],
            n_r=raw["solver"]["n_t"],
        )
        solver = SolverConfig(**raw["solver"], threads=raw["output"]["threads"])
    except CylShockError as exc:
        raise ConfigError([str(exc)]) from exc
    return RunConfig(
        raw=raw,
        inflow=inflow,
        background=background,
        solver=solver,
        output=dict(raw["output"]),
        config_hash=config_hash(raw),
    )


# ---------------------------------------------------------------------------
# artifact emission


def _atomic_write(path: str, text: str):
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as handle:
        handle.write(text)
    os.replace(tmp, path)


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _fields_csv(solution) -> str:
    grid, shock = solution.grid, solution.shock
    yy, tt = grid.mesh()
    xx = grid.x_physical(shock)
    prim, flds = solution.primitive, solution.fields
    columns = [
        ("y", yy),
        ("t", tt),
        ("x", xx),
        ("r", tt),
        ("u_x", prim["u_x"]),
        ("u_r", prim["u_r"]),
        ("u_theta", prim["u_theta"]),
        ("rho", prim["rho"]),
        ("p", prim["p"]),
        ("S", flds.entropy),
        ("Lambda", flds.lam),
        ("phi", flds.phi),
        ("psi", flds.psi),
        ("Mach", prim["mach"]),
    ]
    header = ",".join(name for name, _ in columns)
    data = np.column_stack([arr.ravel() for _, arr in columns])
    rows = "\n".join(",".join(f"{v:.17g}" for v in row) for row in data)
    return f"{header}\n{rows}\n"


def _shock_csv(solution) -> str:
    shock = solution.shock
    rows = "\n".join(
        f"{r:.17g},{f:.17g},{fp:.17g}"
        for r, f, fp in zip(shock.r, shock.f, shock.fprime_nodes)
    )
    return f"r,f,fprime\n{rows}\n"


def _emit_plots(solution, out_dir: str, paths: dict):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    shock = solution.shock
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(shock.r, shock.f)
    ax.set_xlabel("r")
    ax.set_ylabel("shock position f(r)")
    ax.set_title("Shock shape")
    fig.tight_layout()
    path = os.path.join(out_dir, "shock.svg")
    fig.savefig(path)
    plt.close(fig)
    paths["plot_shock"] = path

    grid = solution.grid
    xx = grid.x_physical(shock)
    _, tt = grid.mesh()
    fig, ax = plt.subplots(figsize=(6, 4))
    cs = ax.contourf(xx, tt, solution.primitive["mach"], levels=12)
    ax.plot(shock.f, shock.r, "k-", lw=1.5)
    fig.colorbar(cs, ax=ax, label="Mach")
    ax.set_xlabel("x")
    ax.set_ylabel("r")
    ax.set_title("Downstream Mach number")
    fig.tight_layout()
    path = os.path.join(out_dir, "mach.svg")
    fig.savefig(path)
    plt.close(fig)
    paths["plot_mach"] = path

    fig, ax = plt.subplots(figsize=(5, 4))
    changes = [
        sum(rec.get(k, 0.0) for k in ("change_phi", "change_f", "change_sl", "change_psi"))
        for rec in solution.report.sweeps
    ]
    ax.semilogy(range(1, len(changes) + 1), np.maximum(changes, 1e-17))
    ax.set_xlabel("sweep")
    ax.set_ylabel("relative change")
    ax.set_title("Convergence history")
    fig.tight_layout()
    path = os.path.join(out_dir, "convergence.svg")
    fig.savefig(path)
    plt.close(fig)
    paths["plot_convergence"] = path


def _emit_matrices(solution, out_dir: str, paths: dict):
    from scipy.io import mmwrite

    coeffs = linearized_coefficients(
        solution.upstream.background, solution.upstream.background.constants()
    )
    problems = {
        "potential": (
            build_potential_problem(
                solution.fields, solution.grid, solution.shock, solution.upstream, coeffs
            ),
            coeffs,
        ),
        "swirl": (
            build_swirl_problem(
                solution.fields, solution.grid, solution.shock, solution.upstream
            ),
            None,
        ),
    }
    for name, (problem, cf) in problems.items():
        mat, rhs = assemble_system(problem, solution.grid, solution.shock, cf)
        mat_path = os.path.join(out_dir, f"system_{name}.mtx")
        rhs_path = os.path.join(out_dir, f"system_{name}_rhs.mtx")
        mmwrite(mat_path, mat, symmetry="symmetric")
        mmwrite(rhs_path, rhs.reshape(-1, 1))
        paths[f"matrix_{name}"] = mat_path
        paths[f"matrix_{name}_rhs"] = rhs_path


def run(config: RunConfig) -> RunArtifacts:
    """Execute a solve and persist its artifacts.  Solver failures still
    produce a report.json describing the failure; the status field (and the
    CLI exit code) distinguishes them."""
    out_dir = config.output["dir"]
    root = os.environ.get(OUT_ROOT_ENV)
    if root and not os.path.isabs(out_dir):
        out_dir = os.path.join(root, out_dir)
    os.makedirs(out_dir, exist_ok=True)

    started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    solution = None
    failure = None
    report_content = None
    try:
        upstream = helmholtz_decompose_upstream(
            build_parallel_swirl_inflow(config.inflow, config.background)
        )
        solution = solve_transonic_shock(upstream, config.solver)
        report_content = solution.report.numeric_content()
        timings = solution.report.timings
        status = "converged"
    except DivergenceError as exc:
        failure = str(exc)
        report_content = exc.report.numeric_content() if exc.report else {}
        timings = exc.report.timings if exc.report else {}
        status = "diverged"
    except CylShockError as exc:
        failure = f"{type(exc).__name__}: {exc}"
        report_content = {"failure": failure}
        timings = {}
        status = "diverged"

    metadata = {
        "version": __version__,
        "timestamp": started,
        "config_hash": config.config_hash,
        "status": status,
    }
    paths = {}
    if solution is not None and config.output["emit_fields"]:
        paths["fields"] = os.path.join(out_dir, "fields.csv")
        _atomic_write(paths["fields"], _fields_csv(solution))
        paths["shock"] = os.path.join(out_dir, "shock.csv")
        _atomic_write(paths["shock"], _shock_csv(solution))
    if solution is not None and config.output["emit_plots"]:
        _emit_plots(solution, out_dir, paths)
    if solution is not None and config.output["emit_matrix"]:
        _emit_matrices(solution, out_dir, paths)

    report = {
        **metadata,
        "failure": failure,
        "config": config.raw,
        "report": report_content,
        "timings": timings,
    }
    paths["report"] = os.path.join(out_dir, "report.json")
    _atomic_write(paths["report"], json.dumps(report, indent=2, sort_keys=True))

    checksums = {name: _sha256(path) for name, path in paths.items()}
    return RunArtifacts(paths=paths, checksums=checksums, metadata=metadata, status=status)


def verify(batteries=None, factors=None):
    """Run the oracle batteries and return (rows, all_passed)."""
    rows = run_batteries(batteries, scaling_factors=factors)
    return rows, all(ok for _, ok, _ in rows)


# ---------------------------------------------------------------------------
# command-line front end


def _add_common(parser):
    parser.add_argument("--config", help="path to a JSON run configuration")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        metavar="KEY=VALUE",
        help="dotted override, e.g. --set inflow.eps_swirl=0.02",
    )
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--grid", help="grid as NYxNT, e.g. 129x65")
    parser.add_argument("--emit-plots", action="store_true", help="write SVG plots")
    parser.add_argument("--threads", type=int, help="worker threads for the shock update")


def _config_from_args(args) -> RunConfig:
    overrides = list(args.overrides or [])
    if args.out:
        overrides.append(f"output.dir={args.out}")
    if args.grid:
        try:
            n_y, n_t = (int(part) for part in args.grid.lower().split("x"))
        except ValueError as exc:
            raise ConfigError([f"--grid must look like 129x65, got {args.grid!r}"]) from exc
        overrides += [f"solver.n_y={n_y}", f"solver.n_t={n_t}"]
    if args.emit_plots:
        overrides.append("output.emit_plots=true")
    if args.threads:
        overrides.append(f"output.threads={args.threads}")
    return parse_config(args.config, overrides)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cylshock",
        description="Shock-fitting solver for steady axisymmetric transonic flow "
        "with swirl in a cylinder.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run the solver and write artifacts")
    _add_common(p_solve)

    p_verify = sub.add_parser("verify", help="run the built-in oracle batteries")
    p_verify.add_argument(
        "--battery",
        action="append",
        choices=sorted(BATTERIES),
        help="run only the named battery (repeatable)",
    )
    p_verify.add_argument("--factors", help="comma list of scaling factors, e.g. 1,0.5,0.25")

    p_sweep = sub.add_parser("sweep", help="amplitude-scaling linear-response study")
    _add_common(p_sweep)
    p_sweep.add_argument("--factors", default="1,0.5,0.25", help="comma list of factors")

    args = parser.parse_args(argv)

    try:
        if args.command == "solve":
            config = _config_from_args(args)
            artifacts = run(config)
            print(f"status: {artifacts.status}")
            for name, path in sorted(artifacts.paths.items()):
                print(f"  {name}: {path}")
            return 0 if artifacts.status == "converged" else 2

        if args.command == "verify":
            factors = None
            if args.factors:
                factors = [float(v) for v in args.factors.split(",")]
            rows, passed = verify(args.battery, factors)
            width = max(len(name) for name, _, _ in rows)
            for name, ok, detail in rows:
                print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
            print(f"{'all batteries passed' if passed else 'FAILURES present'}")
            return 0 if passed else 2

        if args.command == "sweep":
            config = _config_from_args(args)
            factors = tuple(float(v) for v in args.factors.split(","))
            study = sigma_scaling_study(config.inflow, factors, config.solver)
            out_dir = config.output["dir"]
            os.makedirs(out_dir, exist_ok=True)
            path = os.path.join(out_dir, "sweep.json")
            _atomic_write(path, json.dumps(study, indent=2, sort_keys=True))
            for row in study["rows"]:
                print(row)
            print(
                f"ratio spreads: f {study['f_ratio_spread']:.3f}, "
                f"deviation {study['dev_ratio_spread']:.3f}  -> {path}"
            )
            return 0
    except ConfigError as exc:
        for line in exc.errors:
            print(f"config error: {line}", file=sys.stderr)
        return 1
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 2
    except CylShockError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
