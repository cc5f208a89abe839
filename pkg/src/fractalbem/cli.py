"""Command-line front end.

Every subcommand builds a :class:`RunConfig` from flags, then overlays the
JSON file given by ``--config`` (file values win).  Failures exit with a
nonzero code and a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .experiments import (
    ConfigError,
    RunConfig,
    build_mesh,
    export_outputs,
    run_alpha_sweep,
    run_k_sweep,
    run_level_sweep,
    run_snowflake_comparison,
)
from .geometry import generate_prefractal

EXIT_CONFIG = 2
EXIT_FAILURE = 1


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",") if v.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration (overrides flags)")
    p.add_argument("--family")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--side", choices=["inner", "outer"])
    p.add_argument("--k", type=float)
    p.add_argument("--direction", type=_floats, help="comma-separated unit vector")
    p.add_argument("--levels", type=_ints, help="first,last")
    p.add_argument("--mesh-policy", choices=["per_component", "grouped", "lattice", "wavelength"])
    p.add_argument("--n0", type=int)
    p.add_argument("--ancestor-level", type=int)
    p.add_argument("--h", help="lattice mesh size, e.g. 1/27")
    p.add_argument("--dofs-per-wavelength", type=float)
    p.add_argument("--method", choices=["collocation", "galerkin"])
    p.add_argument("--outputs", type=lambda s: [v for v in s.split(",") if v])
    p.add_argument("--field-resolution", type=int)
    p.add_argument("--alphas", type=_floats)
    p.add_argument("--wavenumbers", type=_floats)
    p.add_argument("--fit-fraction", type=float)
    p.add_argument("--dof-limit", type=int)
    p.add_argument("--output-dir")
    p.add_argument("--name", default=None, help="output file stem")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fractalbem", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("generate", "export prefractal geometry and mesh as JSON"),
        ("solve", "solve on a single level"),
        ("sweep-levels", "norms (and errors) over a range of levels"),
        ("sweep-alpha", "level sweeps over Cantor parameters"),
        ("sweep-k", "energy norms over wavenumbers with growth exponent"),
        ("compare-snowflake", "inner/outer Koch snowflake comparison"),
    ]:
        _common(sub.add_parser(name, help=help_text))
    sub.add_parser("validate", help="run the oracle checks")
    return parser


def config_from_args(args) -> RunConfig:
    data: dict = {}
    params: dict = {}
    for key in ("alpha", "beta", "delta", "side"):
        if getattr(args, key, None) is not None:
            params[key] = getattr(args, key)
    if params:
        data["params"] = params
    for key in ("family", "k", "direction", "levels", "method", "outputs", "field_resolution",
                "alphas", "wavenumbers", "fit_fraction", "dof_limit", "output_dir"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    mesh = {}
    for flag, key in (("mesh_policy", "kind"), ("n0", "n0"), ("ancestor_level", "ancestor_level"),
                      ("h", "h"), ("dofs_per_wavelength", "dofs_per_wavelength")):
        if getattr(args, flag, None) is not None:
            mesh[key] = getattr(args, flag)
    if mesh:
        data["mesh"] = mesh
    if args.config:
        with open(args.config) as fh:
            overlay = json.load(fh)
        if not isinstance(overlay, dict):
            raise ConfigError("configuration file must hold a JSON object")
        if "params" in overlay and "params" in data:
            overlay = {**overlay, "params": {**data["params"], **overlay["params"]}}
        if "mesh" in overlay and "mesh" in data:
            overlay = {**overlay, "mesh": {**data["mesh"], **overlay["mesh"]}}
        data.update(overlay)
    for key in ("family", "k", "direction"):
        if key not in data:
            raise ConfigError(f"missing required setting {key!r}")
    return RunConfig.from_dict(data)


def _cmd_generate(cfg: RunConfig, name: str) -> dict:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    j = cfg.levels[1]
    p = generate_prefractal(cfg.family, cfg.params, j)
    mesh = build_mesh(cfg, p)
    with open(out / f"{name}_geometry.json", "w") as fh:
        json.dump(p.to_json_dict(), fh)
    with open(out / f"{name}_mesh.json", "w") as fh:
        fh.write(mesh.to_json())
    return {"level": j, "N": mesh.N, "h": mesh.h,
            "files": [f"{name}_geometry.json", f"{name}_mesh.json"]}


def _write_density(d, path) -> None:
    centers = d.mesh.centers
    cols = ["x", "y"][: centers.shape[1]]
    with open(path, "w") as fh:
        fh.write(",".join(cols + ["re", "im"]) + "\n")
        for c, v in zip(centers, np.asarray(d.coefficients)):
            fh.write(",".join([f"{x:.17g}" for x in c] + [f"{v.real:.17g}", f"{v.imag:.17g}"]) + "\n")


def run_command(command: str, cfg: RunConfig, name: str | None) -> dict:
    name = name or command.replace("-", "_")
    if command == "generate":
        return _cmd_generate(cfg, name)
    if command == "solve":
        cfg = cfg.replace(levels=[cfg.levels[1], cfg.levels[1]])
        result = run_level_sweep(cfg, errors=False)
        manifest = export_outputs(result, cfg, name=name)
        for j, d in result.densities.items():
            _write_density(d, Path(cfg.output_dir) / f"{name}_density_j{j}.csv")
        return {"files": manifest["files"], "records": len(result.records)}
    runner = {
        "sweep-levels": run_level_sweep,
        "sweep-alpha": run_alpha_sweep,
        "sweep-k": run_k_sweep,
        "compare-snowflake": run_snowflake_comparison,
    }[command]
    result = runner(cfg)
    manifest = export_outputs(result, cfg, name=name)
    return {"files": manifest["files"], "records": len(result.records), "summary": result.summary}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            from .validation import run_validation

            report = run_validation()
            print(json.dumps(report, indent=2))
            return 0 if all(item["passed"] for item in report) else EXIT_FAILURE
        cfg = config_from_args(args)
        summary = run_command(args.command, cfg, args.name)
        print(json.dumps(summary, default=str))
        return 0
    except (ConfigError, json.JSONDecodeError, OSError) as exc:
        _report(exc)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - every failure must reach stderr as JSON
        _report(exc)
        return EXIT_FAILURE


def _report(exc: BaseException) -> None:
    msg = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(msg), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
