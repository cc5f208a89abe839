"""Configuration-driven experiment drivers and deterministic exports."""

from __future__ import annotations

import csv
import dataclasses
import datetime
import json
import logging
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .bem import Density, IncidentWave, assemble_collocation, assemble_galerkin_2d, solve
from .fields import (
    FarFieldPattern,
    FieldGrid,
    box_grid,
    far_field,
    far_field_grid,
    near_field,
    write_far_field_csv,
    write_field_csv,
    write_field_pgm,
)
from .geometry import FAMILIES, generate_prefractal
from .meshing import Mesh, mesh_grouped, mesh_per_component, uniform_lattice_mesh
from .norms import EnergyForm, density_difference, farfield_norm, near_field_norm

log = logging.getLogger(__name__)

CSV_COLUMNS = ("family", "params", "j", "N", "h", "norm_energy", "norm_near", "norm_far",
               "err_near", "err_far", "seconds")
OUTPUT_KINDS = ("norms", "near_field", "far_field", "errors", "field_files")
MESH_KINDS = ("per_component", "grouped", "lattice", "wavelength")


class ConfigError(ValueError):
    pass


@dataclass
class MeshPolicy:
    """How each prefractal is meshed.

    ``per_component``: every component split into ``n0`` elements.
    ``grouped``: one element per level-``ancestor_level`` ancestor.
    ``lattice``: uniform lattice of side ``h``; for Sierpinski screens the side
    is ``min(h, 2^-j)`` so deep levels get one element per component.
    ``wavelength``: per-component meshes refined to ``dofs_per_wavelength``.
    """

    kind: str = "per_component"
    n0: int = 1
    ancestor_level: int = 0
    h: str | float | None = None
    dofs_per_wavelength: float = 6.0

    def validate(self) -> None:
        if self.kind not in MESH_KINDS:
            raise ConfigError(f"unknown mesh policy {self.kind!r}")
        if self.n0 < 1:
            raise ConfigError("n0 must be positive")
        if self.kind == "lattice" and self.h is None:
            raise ConfigError("lattice policy needs h")
        if self.ancestor_level < 0:
            raise ConfigError("ancestor_level must be non-negative")
        if not self.dofs_per_wavelength > 0:
            raise ConfigError("dofs_per_wavelength must be positive")


@dataclass
class RunConfig:
    family: str
    k: float
    direction: list
    params: dict = field(default_factory=dict)
    levels: list = field(default_factory=lambda: [0, 0])
    mesh: MeshPolicy = field(default_factory=MeshPolicy)
    method: str = "collocation"
    outputs: list = field(default_factory=lambda: ["norms"])
    field_resolution: int = 300
    far_field_samples: list = field(default_factory=lambda: [64, 128, 256])
    alphas: list = field(default_factory=list)
    wavenumbers: list = field(default_factory=list)
    fit_fraction: float = 0.5
    dof_limit: int = 12000
    output_dir: str = "runs"

    def __post_init__(self):
        if isinstance(self.mesh, dict):
            try:
                self.mesh = MeshPolicy(**self.mesh)
            except TypeError as exc:
                raise ConfigError(f"bad mesh policy: {exc}") from None
        self.validate()

    @property
    def wave(self) -> IncidentWave:
        return IncidentWave(float(self.k), tuple(float(v) for v in self.direction))

    @property
    def ambient_dimension(self) -> int:
        return 2 if self.family == "cantor_set" else 3

    def validate(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if not float(self.k) > 0:
            raise ConfigError("k must be positive")
        if len(self.direction) != self.ambient_dimension:
            raise ConfigError(f"direction must have {self.ambient_dimension} components")
        if abs(math.fsum(float(v) ** 2 for v in self.direction) - 1.0) > 1e-12:
            raise ConfigError("direction must be a unit vector")
        if len(self.levels) != 2 or not 0 <= self.levels[0] <= self.levels[1]:
            raise ConfigError("levels must be [first, last] with 0 <= first <= last")
        if self.method not in ("collocation", "galerkin"):
            raise ConfigError("method must be 'collocation' or 'galerkin'")
        if self.method == "galerkin" and self.ambient_dimension != 2:
            raise ConfigError("galerkin solves are implemented for 1D screens only")
        bad = [o for o in self.outputs if o not in OUTPUT_KINDS]
        if bad:
            raise ConfigError(f"unknown outputs {bad}")
        if self.field_resolution < 1:
            raise ConfigError("field_resolution must be positive")
        if not 0 < self.fit_fraction <= 1:
            raise ConfigError("fit_fraction must lie in (0, 1]")
        if any(not float(a) > 0 for a in self.wavenumbers):
            raise ConfigError("wavenumbers must be positive")
        self.mesh.validate()

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown configuration keys {unknown}")
        mesh = data.get("mesh", {})
        if isinstance(mesh, dict):
            mesh_names = {f.name for f in dataclasses.fields(MeshPolicy)}
            bad = sorted(set(mesh) - mesh_names)
            if bad:
                raise ConfigError(f"unknown mesh keys {bad}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        data = self.to_dict()
        data.update(changes)
        return RunConfig.from_dict(data)


@dataclass
class RunRecord:
    family: str
    params: str
    j: int
    N: int
    h: float
    norm_energy: float = math.nan
    norm_near: float = math.nan
    norm_far: float = math.nan
    err_near: float = math.nan
    err_far: float = math.nan
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def row(self, extra_keys) -> list:
        vals = [self.family, self.params, self.j, self.N, self.h, self.norm_energy,
                self.norm_near, self.norm_far, self.err_near, self.err_far, self.seconds]
        vals += [self.extra.get(key, "") for key in extra_keys]
        return [_fmt(v) for v in vals]


@dataclass
class SweepResult:
    records: list
    summary: dict = field(default_factory=dict)
    densities: dict = field(default_factory=dict, repr=False)
    near: dict = field(default_factory=dict, repr=False)
    far: dict = field(default_factory=dict, repr=False)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _params_text(params: dict, **more) -> str:
    items = {**params, **more}
    return ";".join(f"{key}={_fmt(float(v)) if isinstance(v, (int, float)) else v}"
                    for key, v in sorted(items.items()))


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def _component_side(cells: np.ndarray) -> float:
    return float(np.linalg.norm(cells[0, 1] - cells[0, 0]))


def build_mesh(cfg: RunConfig, p, k: float | None = None) -> Mesh:
    policy = cfg.mesh
    if policy.kind == "per_component":
        return mesh_per_component(p, policy.n0)
    if policy.kind == "grouped":
        return mesh_grouped(p, min(policy.ancestor_level, p.level))
    if policy.kind == "wavelength":
        wavelength = 2.0 * math.pi / float(k if k is not None else cfg.k)
        m = max(1, math.ceil(policy.dofs_per_wavelength * _component_side(p.cells) / wavelength - 1e-9))
        return mesh_per_component(p, m if p.cell_kind == "segment" else m * m)
    h = policy.h
    if p.family == "sierpinski":
        side = 2.0 ** -p.level
        return uniform_lattice_mesh(p, side if float(_as_number(h)) >= side else _as_number(h))
    return uniform_lattice_mesh(p, h)


def _as_number(h):
    from fractions import Fraction

    return Fraction(h) if isinstance(h, str) else h


def solve_density(cfg: RunConfig, mesh: Mesh, k: float | None = None) -> Density:
    k = float(cfg.k if k is None else k)
    wave = IncidentWave(k, tuple(float(v) for v in cfg.direction))
    if cfg.method == "galerkin":
        system = assemble_galerkin_2d(mesh, wave)
    else:
        system = assemble_collocation(mesh, wave)
    return Density(mesh, solve(system, dense_limit=cfg.dof_limit), k)


def _far_pattern(cfg: RunConfig) -> FarFieldPattern:
    n_theta, n_phi, n_circle = cfg.far_field_samples
    return far_field_grid(cfg.ambient_dimension, n_theta, n_phi, n_circle)


def _relative(diff: float, ref: float) -> float:
    return diff / ref if ref > 0 else (0.0 if diff == 0 else math.inf)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------

def run_level_sweep(cfg: RunConfig, errors: bool | None = None) -> SweepResult:
    """Solve on every configured level; norms and (optionally) errors versus the last level."""
    if errors is None:
        errors = "errors" in cfg.outputs
    want_near = errors or "near_field" in cfg.outputs or "norms" in cfg.outputs
    want_far = errors or "far_field" in cfg.outputs or "norms" in cfg.outputs
    want_energy = "norms" in cfg.outputs
    grid = box_grid(cfg.ambient_dimension, cfg.field_resolution) if want_near else None
    pattern = _far_pattern(cfg) if want_far else None
    result = SweepResult([])
    for j in range(cfg.levels[0], cfg.levels[1] + 1):
        start = time.perf_counter()
        p = generate_prefractal(cfg.family, cfg.params, j)
        mesh = build_mesh(cfg, p)
        rec = RunRecord(cfg.family, _params_text(cfg.params, k=cfg.k), j, mesh.N, mesh.h)
        if mesh.N > cfg.dof_limit:
            log.warning("level %d needs %d DOFs (limit %d); sweep truncated", j, mesh.N, cfg.dof_limit)
            rec.extra["note"] = "dof_limit"
            result.records.append(rec)
            break
        d = solve_density(cfg, mesh)
        result.densities[j] = d
        if want_energy:
            rec.norm_energy = EnergyForm(mesh, 1.0).norm(d.coefficients)
        if grid is not None:
            g = near_field(d, grid)
            result.near[j] = g
            rec.norm_near = near_field_norm(g)
        if pattern is not None:
            ff = far_field(d, pattern)
            result.far[j] = ff
            rec.norm_far = farfield_norm(ff)
        rec.seconds = time.perf_counter() - start
        result.records.append(rec)
    if errors and result.densities:
        ref = max(result.densities)
        result.summary["reference_level"] = ref
        for rec in result.records:
            if rec.j not in result.densities:
                continue
            if grid is not None:
                diff = near_field_norm(FieldGrid(grid.points, grid.weights, grid.shapes,
                                                 result.near[rec.j].samples - result.near[ref].samples))
                rec.err_near = _relative(diff, near_field_norm(result.near[ref]))
            if pattern is not None:
                a, b = result.far[rec.j], result.far[ref]
                diff = farfield_norm(FarFieldPattern(a.directions, a.weights, a.angles,
                                                     a.values - b.values))
                rec.err_far = _relative(diff, farfield_norm(b))
    return result


def run_error_sweep(cfg: RunConfig) -> SweepResult:
    return run_level_sweep(cfg, errors=True)


def run_alpha_sweep(cfg: RunConfig) -> SweepResult:
    """Level sweeps for each Cantor parameter in ``cfg.alphas``."""
    out = SweepResult([])
    for alpha in cfg.alphas:
        sub = cfg.replace(params={**cfg.params, "alpha": float(alpha)}, alphas=[])
        res = run_level_sweep(sub)
        for rec in res.records:
            rec.extra["alpha"] = float(alpha)
        out.records.extend(res.records)
        out.far.update({(float(alpha), j): v for j, v in res.far.items()})
    return out


def growth_exponent(ks, norms, fit_fraction: float = 0.5):
    """Least-squares slope of ``log norm`` against ``log k`` over the largest ``k`` values."""
    ks = np.asarray(ks, dtype=float)
    norms = np.asarray(norms, dtype=float)
    order = np.argsort(ks)
    ks, norms = ks[order], norms[order]
    count = max(2, int(math.ceil(fit_fraction * len(ks))))
    if len(ks) < 2:
        return None
    slope, _ = np.polyfit(np.log(ks[-count:]), np.log(norms[-count:]), 1)
    return float(slope)


def run_k_sweep(cfg: RunConfig) -> SweepResult:
    """At the last configured level, solve for each ``k`` and record both energy norms."""
    out = SweepResult([])
    j = cfg.levels[1]
    p = generate_prefractal(cfg.family, cfg.params, j)
    for k in cfg.wavenumbers:
        k = float(k)
        start = time.perf_counter()
        mesh = build_mesh(cfg, p, k)
        rec = RunRecord(cfg.family, _params_text(cfg.params, k=k), j, mesh.N, mesh.h)
        rec.extra["k"] = k
        if mesh.N > cfg.dof_limit:
            log.warning("k = %g needs %d DOFs (limit %d); skipped", k, mesh.N, cfg.dof_limit)
            rec.extra["note"] = "dof_limit"
            out.records.append(rec)
            continue
        d = solve_density(cfg, mesh, k)
        rec.norm_energy = EnergyForm(mesh, 1.0).norm(d.coefficients)
        rec.extra["norm_energy_k"] = EnergyForm(mesh, k).norm(d.coefficients)
        rec.seconds = time.perf_counter() - start
        out.records.append(rec)
    solved = [r for r in out.records if "norm_energy_k" in r.extra]
    exponent = growth_exponent([r.extra["k"] for r in solved],
                               [r.extra["norm_energy_k"] for r in solved], cfg.fit_fraction)
    if exponent is not None:
        out.summary["growth_exponent"] = exponent
    return out


def snowflake_sequence(last_inner: int):
    """``[(inner, 0), (outer, 0), (inner, 1), ..., (inner, last_inner)]``."""
    seq = []
    for j in range(last_inner + 1):
        seq.append(("inner", j))
        if j < last_inner:
            seq.append(("outer", j))
    return seq


def run_snowflake_comparison(cfg: RunConfig) -> SweepResult:
    """Alternate inner/outer Koch prefractals and compare consecutive densities.

    ``cfg.mesh.h`` is the inner lattice spacing; outer meshes use triangles
    ``sqrt(3)`` times larger on the rotated sub-lattice, so both share one
    inner lattice.  Differences are normalized by the inner density's norm.
    """
    if cfg.family != "koch_snowflake" or cfg.mesh.kind != "lattice":
        raise ConfigError("snowflake comparison needs family koch_snowflake and a lattice mesh")
    h_inner = _as_number(cfg.mesh.h)
    h_outer = math.sqrt(3.0) * float(h_inner)
    out = SweepResult([])
    prev = None
    rel_diffs = []
    for side, j in snowflake_sequence(cfg.levels[1]):
        start = time.perf_counter()
        p = generate_prefractal("koch_snowflake", {**cfg.params, "side": side}, j)
        mesh = uniform_lattice_mesh(p, h_inner if side == "inner" else h_outer)
        rec = RunRecord(cfg.family, _params_text({"side": side}, k=cfg.k), j, mesh.N, mesh.h)
        rec.extra["side"] = side
        if mesh.N > cfg.dof_limit:
            rec.extra["note"] = "dof_limit"
            out.records.append(rec)
            break
        d = solve_density(cfg, mesh)
        rec.norm_energy = EnergyForm(mesh, 1.0).norm(d.coefficients)
        if prev is not None:
            inner, outer = (d, prev) if side == "inner" else (prev, d)
            diff = density_difference(inner, outer)
            rec.extra["rel_diff"] = diff.relative
            rel_diffs.append(diff.relative)
        out.densities[(side, j)] = d
        prev = d
        rec.seconds = time.perf_counter() - start
        out.records.append(rec)
    out.summary["relative_differences"] = rel_diffs
    out.summary["monotone_decrease"] = bool(all(b < a for a, b in zip(rel_diffs, rel_diffs[1:])))
    return out


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def _versions() -> dict:
    from . import __version__

    return {"fractalbem": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def write_records_csv(records, path) -> None:
    extra_keys = sorted({key for rec in records for key in rec.extra})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(CSV_COLUMNS) + extra_keys)
        for rec in records:
            writer.writerow(rec.row(extra_keys))


def export_outputs(result: SweepResult, cfg: RunConfig, out_dir=None, name: str = "runs") -> dict:
    """Write ``<name>.csv``, ``<name>_manifest.json`` and any requested field files."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{name}.csv"
    write_records_csv(result.records, csv_path)
    ks = [float(k) for k in cfg.wavenumbers] or [float(cfg.k)]
    manifest = {
        "config": cfg.to_dict(),
        "wavelength": [2.0 * math.pi / k for k in ks] if cfg.wavenumbers else 2.0 * math.pi / cfg.k,
        "summary": result.summary,
        "versions": _versions(),
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "files": [csv_path.name],
    }
    if "field_files" in cfg.outputs:
        for j, g in sorted(result.near.items()):
            write_field_csv(g, out / f"{name}_near_j{j}.csv")
            write_field_pgm(g, out / f"{name}_near_j{j}.pgm")
            manifest["files"] += [f"{name}_near_j{j}.csv", f"{name}_near_j{j}.pgm"]
        for j, ff in sorted(result.far.items()):
            write_far_field_csv(ff, out / f"{name}_far_j{j}.csv")
            manifest["files"].append(f"{name}_far_j{j}.csv")
    with open(out / f"{name}_manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
    return manifest
