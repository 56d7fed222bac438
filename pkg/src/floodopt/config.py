"""Run configuration: TOML ingestion, validation, normalized echo, scene assembly.

A config file fully describes a run; load_config applies every default
and records absolute paths, and normalized_toml dumps the result so a
run is reproducible from the dump alone.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .core import Hydrograph, PhysicsParams, SimGrid, SourceField
from .errors import ConfigError
from .fileio import fmt, load_hydrograph_csv
from .solver import SolverConfig
from .terrain import (
    Centerline,
    ChannelBranchParams,
    SearchRegion,
    read_dem,
    synth_channel_with_branch,
)

__all__ = ["RunConfig", "Scene", "load_config", "normalized_toml", "build_scene"]

_SYNTH_GENERATORS = ("channel_with_branch",)


@dataclass(frozen=True)
class TerrainSection:
    dem: str | None = None
    synthetic: str | None = None
    params: tuple = ()  # sorted (key, value) pairs for synthetic generators
    manning: float = 0.03
    nodata_elevation: float | None = None
    centerline: tuple | None = None


@dataclass(frozen=True)
class HydrographSection:
    path: str
    t_qs: float
    t_qe: float


@dataclass(frozen=True)
class SourceSection:
    polygon: tuple
    velocity: tuple = (0.0, 0.0)


@dataclass(frozen=True)
class GaugeSection:
    a: tuple
    b: tuple
    positive: tuple


@dataclass(frozen=True)
class DamSection:
    center: tuple
    length: float
    crest: float = 10.0
    orientation: tuple | None = None


@dataclass(frozen=True)
class OptimizerSection:
    starts: tuple
    probe: tuple | None = None
    grad_tol: float | None = None
    k_max: int = 50
    map_spacing: float | None = None
    region: tuple | None = None


@dataclass(frozen=True)
class RunConfig:
    t_end: float
    out_dir: str
    terrain: TerrainSection
    physics: PhysicsParams
    solver: SolverConfig
    snapshot_interval: float | None = None
    initial_surface: float | None = None
    hydrograph: HydrographSection | None = None
    source: SourceSection | None = None
    gauge: GaugeSection | None = None
    dam: DamSection | None = None
    optimizer: OptimizerSection | None = None


def _pairs(value) -> tuple:
    return tuple((float(p[0]), float(p[1])) for p in value)


class _Reader:
    """Pulls typed values out of the parsed TOML, collecting all violations."""

    def __init__(self):
        self.errors: list[str] = []

    def fail(self, msg: str):
        self.errors.append(msg)

    def section(self, data, name, allowed):
        sect = data.get(name)
        if sect is None:
            return None
        if not isinstance(sect, dict):
            self.fail(f"[{name}] must be a table")
            return None
        for key in sect:
            if key not in allowed:
                self.fail(f"[{name}] unknown key {key!r}")
        return sect

    def value(self, sect, section, key, kind, default=None, required=False, positive=False):
        if sect is None or key not in sect:
            if required:
                self.fail(f"[{section}] missing required key {key!r}")
            return default
        v = sect[key]
        if kind is float and isinstance(v, int):
            v = float(v)
        if not isinstance(v, kind):
            self.fail(f"[{section}] {key} must be {kind.__name__}, got {v!r}")
            return default
        if positive and not v > 0:
            self.fail(f"[{section}] {key} must be positive, got {v}")
            return default
        return v

    def point(self, sect, section, key, required=False):
        if sect is None or key not in sect:
            if required:
                self.fail(f"[{section}] missing required key {key!r}")
            return None
        v = sect[key]
        if (
            not isinstance(v, list) or len(v) != 2
            or not all(isinstance(c, (int, float)) for c in v)
        ):
            self.fail(f"[{section}] {key} must be a [x, y] pair")
            return None
        return (float(v[0]), float(v[1]))

    def point_list(self, sect, section, key, min_len=1, required=False):
        if sect is None or key not in sect:
            if required:
                self.fail(f"[{section}] missing required key {key!r}")
            return None
        v = sect[key]
        ok = isinstance(v, list) and len(v) >= min_len and all(
            isinstance(p, list) and len(p) == 2
            and all(isinstance(c, (int, float)) for c in p)
            for p in v
        )
        if not ok:
            self.fail(f"[{section}] {key} must be a list of >= {min_len} [x, y] pairs")
            return None
        return _pairs(v)


def load_config(path) -> RunConfig:
    """Parse and fully validate a TOML run configuration.

    Parse errors raise immediately; validation problems are collected and
    reported all at once. Relative paths resolve against the config file's
    directory.
    """
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such config file") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML parse error: {exc}") from None

    r = _Reader()
    for key in data:
        if key not in (
            "run", "terrain", "hydrograph", "source", "gauge",
            "physics", "solver", "dam", "optimizer",
        ):
            r.fail(f"unknown section [{key}]")

    run_s = r.section(data, "run", {"t_end", "out_dir", "snapshot_interval", "initial_surface"})
    if run_s is None:
        r.fail("missing required section [run]")
    t_end = r.value(run_s, "run", "t_end", float, required=True, positive=True)
    out_dir = r.value(run_s, "run", "out_dir", str, default="out")
    snapshot_interval = r.value(run_s, "run", "snapshot_interval", float, positive=True)
    initial_surface = r.value(run_s, "run", "initial_surface", float)

    terr_s = r.section(
        data, "terrain",
        {"dem", "synthetic", "params", "manning", "nodata_elevation", "centerline"},
    )
    if terr_s is None:
        r.fail("missing required section [terrain]")
    dem = r.value(terr_s, "terrain", "dem", str)
    synthetic = r.value(terr_s, "terrain", "synthetic", str)
    if (dem is None) == (synthetic is None):
        r.fail("[terrain] needs exactly one of 'dem' or 'synthetic'")
    if synthetic is not None and synthetic not in _SYNTH_GENERATORS:
        r.fail(
            f"[terrain] unknown synthetic generator {synthetic!r}; "
            f"available: {', '.join(_SYNTH_GENERATORS)}"
        )
    if dem is not None:
        dem = os.path.join(base, dem) if not os.path.isabs(dem) else dem
        if not os.path.exists(dem):
            r.fail(f"[terrain] dem file does not exist: {dem}")
    params_raw = (terr_s or {}).get("params", {})
    params: tuple = ()
    if synthetic is not None:
        try:
            normalized = ChannelBranchParams(**params_raw)
            params = tuple(sorted(vars(normalized).items()))
        except (TypeError, ValueError) as exc:
            r.fail(f"[terrain.params] {exc}")
    elif params_raw:
        r.fail("[terrain] params only apply to synthetic terrain")
    terrain = TerrainSection(
        dem=dem,
        synthetic=synthetic,
        params=params,
        manning=r.value(terr_s, "terrain", "manning", float, default=0.03, positive=True),
        nodata_elevation=r.value(terr_s, "terrain", "nodata_elevation", float),
        centerline=r.point_list(terr_s, "terrain", "centerline", min_len=2),
    )

    hydro_s = r.section(data, "hydrograph", {"path", "t_qs", "t_qe"})
    hydrograph = None
    if hydro_s is not None:
        hpath = r.value(hydro_s, "hydrograph", "path", str, required=True)
        t_qs = r.value(hydro_s, "hydrograph", "t_qs", float, required=True)
        t_qe = r.value(hydro_s, "hydrograph", "t_qe", float, required=True)
        if hpath is not None:
            hpath = os.path.join(base, hpath) if not os.path.isabs(hpath) else hpath
            if not os.path.exists(hpath):
                r.fail(f"[hydrograph] file does not exist: {hpath}")
        if t_qs is not None and t_qe is not None and not t_qs < t_qe:
            r.fail(f"[hydrograph] flood window empty: t_qs={t_qs} >= t_qe={t_qe}")
        if hpath is not None and t_qs is not None and t_qe is not None:
            hydrograph = HydrographSection(path=hpath, t_qs=t_qs, t_qe=t_qe)

    source_s = r.section(data, "source", {"polygon", "velocity"})
    source = None
    if source_s is not None:
        poly = r.point_list(source_s, "source", "polygon", min_len=3, required=True)
        vel = r.point(source_s, "source", "velocity") or (0.0, 0.0)
        if poly is not None:
            try:
                SearchRegion(np.array(poly))
            except ValueError as exc:
                r.fail(f"[source] polygon: {exc}")
            source = SourceSection(polygon=poly, velocity=vel)
    if hydrograph is not None and source is None and terrain.synthetic is None:
        r.fail("[hydrograph] requires a [source] region on DEM terrain")

    gauge_s = r.section(data, "gauge", {"a", "b", "positive"})
    gauge = None
    if gauge_s is not None:
        a = r.point(gauge_s, "gauge", "a", required=True)
        b = r.point(gauge_s, "gauge", "b", required=True)
        pos = r.point(gauge_s, "gauge", "positive", required=True)
        if None not in (a, b, pos):
            gauge = GaugeSection(a=a, b=b, positive=pos)

    phys_s = r.section(
        data, "physics", {"g", "omega_e", "latitude_deg", "cfl", "h_dry"}
    )
    phys_kwargs = {}
    for key in ("g", "omega_e", "latitude_deg", "cfl", "h_dry"):
        v = r.value(phys_s, "physics", key, float)
        if v is not None:
            phys_kwargs[key] = v
    try:
        physics = PhysicsParams(**phys_kwargs)
    except ValueError as exc:
        r.fail(f"[physics] {exc}")
        physics = PhysicsParams()

    solver_s = r.section(data, "solver", {"max_dt", "order", "limiter", "boundary"})
    solver_kwargs = {}
    v = r.value(solver_s, "solver", "max_dt", float, positive=True)
    if v is not None:
        solver_kwargs["max_dt"] = v
    v = r.value(solver_s, "solver", "order", int)
    if v is not None:
        solver_kwargs["order"] = v
    for key in ("limiter", "boundary"):
        v = r.value(solver_s, "solver", key, str)
        if v is not None:
            solver_kwargs[key] = v
    try:
        solver = SolverConfig(physics=physics, **solver_kwargs)
    except ValueError as exc:
        r.fail(f"[solver] {exc}")
        solver = SolverConfig(physics=physics)

    dam_s = r.section(data, "dam", {"center", "length", "crest", "orientation"})
    dam = None
    if dam_s is not None:
        center = r.point(dam_s, "dam", "center", required=True)
        length = r.value(dam_s, "dam", "length", float, required=True, positive=True)
        crest = r.value(dam_s, "dam", "crest", float, default=10.0, positive=True)
        orientation = r.point(dam_s, "dam", "orientation")
        if center is not None and length is not None:
            dam = DamSection(center=center, length=length, crest=crest,
                             orientation=orientation)

    opt_s = r.section(
        data, "optimizer",
        {"start", "starts", "probe", "grad_tol", "k_max", "map_spacing", "region"},
    )
    optimizer = None
    if opt_s is not None:
        starts = None
        if "start" in opt_s and "starts" in opt_s:
            r.fail("[optimizer] give either 'start' or 'starts', not both")
        elif "starts" in opt_s:
            starts = r.point_list(opt_s, "optimizer", "starts", min_len=1)
        else:
            single = r.point(opt_s, "optimizer", "start", required=True)
            starts = (single,) if single is not None else None
        region = r.point_list(opt_s, "optimizer", "region", min_len=3)
        if region is not None:
            try:
                SearchRegion(np.array(region))
            except ValueError as exc:
                r.fail(f"[optimizer] region: {exc}")
        if starts is not None:
            optimizer = OptimizerSection(
                starts=starts,
                probe=r.point(opt_s, "optimizer", "probe"),
                grad_tol=r.value(opt_s, "optimizer", "grad_tol", float, positive=True),
                k_max=r.value(opt_s, "optimizer", "k_max", int, default=50, positive=True),
                map_spacing=r.value(opt_s, "optimizer", "map_spacing", float, positive=True),
                region=region,
            )

    if r.errors:
        raise ConfigError(f"{path}:\n  " + "\n  ".join(r.errors))
    out_dir = os.path.join(base, out_dir) if not os.path.isabs(out_dir) else out_dir
    return RunConfig(
        t_end=t_end,
        out_dir=out_dir,
        snapshot_interval=snapshot_interval,
        initial_surface=initial_surface,
        terrain=terrain,
        hydrograph=hydrograph,
        source=source,
        gauge=gauge,
        physics=physics,
        solver=solver,
        dam=dam,
        optimizer=optimizer,
    )


def _toml_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return fmt(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {v!r}")


def normalized_toml(cfg: RunConfig) -> str:
    """Config echo with every default applied; loading it reproduces the run."""
    lines: list[str] = []

    def sect(name: str, items: dict):
        pairs = [(k, v) for k, v in items.items() if v is not None]
        if not pairs:
            return
        lines.append(f"[{name}]")
        for k, v in pairs:
            lines.append(f"{k} = {_toml_scalar(v)}")
        lines.append("")

    sect("run", {
        "t_end": cfg.t_end,
        "out_dir": cfg.out_dir,
        "snapshot_interval": cfg.snapshot_interval,
        "initial_surface": cfg.initial_surface,
    })
    terr = {
        "dem": cfg.terrain.dem,
        "synthetic": cfg.terrain.synthetic,
        "manning": cfg.terrain.manning,
        "nodata_elevation": cfg.terrain.nodata_elevation,
        "centerline": cfg.terrain.centerline,
    }
    sect("terrain", terr)
    if cfg.terrain.synthetic is not None:
        sect("terrain.params", dict(cfg.terrain.params))
    if cfg.hydrograph is not None:
        sect("hydrograph", vars(cfg.hydrograph).copy())
    if cfg.source is not None:
        sect("source", {"polygon": cfg.source.polygon, "velocity": cfg.source.velocity})
    if cfg.gauge is not None:
        sect("gauge", vars(cfg.gauge).copy())
    sect("physics", {
        "g": cfg.physics.g,
        "omega_e": cfg.physics.omega_e,
        "latitude_deg": cfg.physics.latitude_deg,
        "cfl": cfg.physics.cfl,
        "h_dry": cfg.physics.h_dry,
    })
    sect("solver", {
        "max_dt": cfg.solver.max_dt,
        "order": cfg.solver.order,
        "limiter": cfg.solver.limiter,
        "boundary": cfg.solver.boundary,
    })
    if cfg.dam is not None:
        sect("dam", vars(cfg.dam).copy())
    if cfg.optimizer is not None:
        sect("optimizer", {
            "starts": cfg.optimizer.starts,
            "probe": cfg.optimizer.probe,
            "grad_tol": cfg.optimizer.grad_tol,
            "k_max": cfg.optimizer.k_max,
            "map_spacing": cfg.optimizer.map_spacing,
            "region": cfg.optimizer.region,
        })
    return "\n".join(lines)


@dataclass
class Scene:
    """Everything a simulation or optimization needs, assembled from config."""

    grid: SimGrid
    centerline: Centerline | None
    region: SearchRegion | None
    source: SourceField | None
    hydrograph: Hydrograph | None
    gauge_a: tuple | None
    gauge_b: tuple | None
    gauge_positive: tuple | None
    dam_length_default: float | None
    nodata_mask: np.ndarray | None = None


def cells_in_polygon(grid: SimGrid, polygon) -> list[tuple[int, int]]:
    """(j, i) cells whose centers lie inside the polygon."""
    region = SearchRegion(np.array(polygon, dtype=float))
    x0, y0, x1, y1 = region.bounds
    xs = grid.x_centers()
    ys = grid.y_centers()
    cells = []
    for j in np.where((ys >= y0) & (ys <= y1))[0]:
        for i in np.where((xs >= x0) & (xs <= x1))[0]:
            if region.contains(xs[i], ys[j]):
                cells.append((int(j), int(i)))
    return cells


def build_scene(cfg: RunConfig) -> Scene:
    """Materialize terrain, hydrograph, source, gauge and region from config."""
    nodata_mask = None
    if cfg.terrain.synthetic is not None:
        bundle = synth_channel_with_branch(ChannelBranchParams(**dict(cfg.terrain.params)))
        grid = bundle.grid
        centerline = bundle.centerline
        region = bundle.region
        source = bundle.source
        gauge_a, gauge_b, gauge_pos = bundle.gauge_a, bundle.gauge_b, bundle.gauge_positive
        dam_length_default = bundle.dam_length
    else:
        grid, nodata_mask = read_dem(
            cfg.terrain.dem,
            manning=cfg.terrain.manning,
            nodata_elevation=cfg.terrain.nodata_elevation,
        )
        centerline = None
        region = None
        source = None
        gauge_a = gauge_b = gauge_pos = None
        dam_length_default = None

    if cfg.terrain.centerline is not None:
        centerline = Centerline(np.array(cfg.terrain.centerline))
    if cfg.source is not None:
        cells = cells_in_polygon(grid, cfg.source.polygon)
        if not cells:
            raise ConfigError("[source] polygon contains no cell centers")
        source = SourceField.from_cells(
            cells, u_inject=cfg.source.velocity[0], v_inject=cfg.source.velocity[1]
        )
    if cfg.gauge is not None:
        gauge_a, gauge_b, gauge_pos = cfg.gauge.a, cfg.gauge.b, cfg.gauge.positive
    if cfg.optimizer is not None and cfg.optimizer.region is not None:
        region = SearchRegion(np.array(cfg.optimizer.region))

    hydrograph = None
    if cfg.hydrograph is not None:
        hydrograph = load_hydrograph_csv(
            cfg.hydrograph.path, t_qs=cfg.hydrograph.t_qs, t_qe=cfg.hydrograph.t_qe
        )

    return Scene(
        grid=grid,
        centerline=centerline,
        region=region,
        source=source,
        hydrograph=hydrograph,
        gauge_a=gauge_a,
        gauge_b=gauge_b,
        gauge_positive=gauge_pos,
        dam_length_default=dam_length_default,
        nodata_mask=nodata_mask,
    )
