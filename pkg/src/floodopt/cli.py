"""Command-line surface: simulate, optimize, map, validate.

Exit codes: 0 success, 2 configuration/usage, 3 file or format, 4 numeric
failure, 5 domain/geometry.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import RunConfig, Scene, build_scene, load_config, normalized_toml
from .core import FlowState
from .errors import ConfigError, DomainError, FormatError, NumericError
from .fileio import (
    write_gauge_csv,
    write_mass_report,
    write_snapshot,
    write_surface_csv,
    write_trace_csv,
)
from .gauge import GaugeObserver, rasterize_gauge
from .optimize import (
    DamPlacementObjective,
    ProbeRule,
    StoppingRule,
    ascend,
    map_objective,
)
from .solver import run
from .terrain import DamSpec, rasterize_dam

__all__ = ["main"]


class _MassTally:
    def __init__(self):
        self.injected = 0.0
        self.outflow = 0.0

    def __call__(self, state, report):
        self.injected += report.injected_volume
        self.outflow += report.outflow_volume


class _SnapshotWriter:
    """Writes a snapshot each time simulation time crosses the cadence."""

    def __init__(self, grid, interval, out_dir):
        self.grid = grid
        self.interval = interval
        self.out_dir = out_dir
        self.next_t = interval
        self.count = 0

    def __call__(self, state, report):
        while state.t >= self.next_t:
            path = os.path.join(self.out_dir, f"snapshot_{self.count:04d}.bin")
            write_snapshot(state, self.grid, path)
            self.count += 1
            self.next_t += self.interval


def _initial_state(cfg: RunConfig, grid) -> FlowState:
    if cfg.initial_surface is None:
        return FlowState.zeros(grid)
    return FlowState.at_rest(grid, cfg.initial_surface)


def _dam_grid(cfg: RunConfig, scene: Scene):
    """Scene grid with the configured dam stamped in, if any."""
    if cfg.dam is None:
        return scene.grid
    dam = DamSpec(
        x_d=cfg.dam.center[0], y_d=cfg.dam.center[1],
        length=cfg.dam.length, crest=cfg.dam.crest,
        orientation=cfg.dam.orientation,
    )
    return rasterize_dam(scene.grid, dam, scene.centerline)


def _write_normalized(cfg: RunConfig):
    path = os.path.join(cfg.out_dir, "config_normalized.toml")
    with open(path, "w") as fh:
        fh.write(normalized_toml(cfg))
    return path


def _say(args, *parts):
    if not args.quiet:
        print(*parts)


def cmd_simulate(cfg: RunConfig, args) -> int:
    scene = build_scene(cfg)
    grid = _dam_grid(cfg, scene)
    state = _initial_state(cfg, grid)
    initial_volume = state.volume(grid)

    observers = []
    tally = _MassTally()
    observers.append(tally)
    gauge_obs = None
    if scene.gauge_a is not None:
        gl = rasterize_gauge(grid, scene.gauge_a, scene.gauge_b, scene.gauge_positive)
        if scene.hydrograph is not None:
            window = (scene.hydrograph.t_qs, scene.hydrograph.t_qe)
        else:
            window = (state.t, cfg.t_end)
        gauge_obs = GaugeObserver(gl, window)
        observers.append(gauge_obs)
    if cfg.snapshot_interval is not None:
        observers.append(_SnapshotWriter(grid, cfg.snapshot_interval, cfg.out_dir))

    final = run(grid, state, scene.source, scene.hydrograph, cfg.solver,
                cfg.t_end, observers=observers)

    final_volume = final.volume(grid)
    write_snapshot(final, grid, os.path.join(cfg.out_dir, "final.bin"))
    write_mass_report(
        os.path.join(cfg.out_dir, "mass_balance.csv"),
        initial_volume, final_volume, tally.injected, tally.outflow,
    )
    if gauge_obs is not None:
        write_gauge_csv(gauge_obs.record, os.path.join(cfg.out_dir, "gauge.csv"))
        _say(args, f"gauge volume over window: {gauge_obs.record.volume:.6g} m^3")
    residual = (final_volume - initial_volume) - (tally.injected - tally.outflow)
    scale = max(initial_volume, final_volume, tally.injected, tally.outflow, 1e-30)
    _say(args, f"simulated to t={final.t:.6g} s; volume {final_volume:.6g} m^3; "
               f"mass error {abs(residual) / scale:.3e} (relative)")
    _write_normalized(cfg)
    return 0


def _objective(cfg: RunConfig, scene: Scene) -> DamPlacementObjective:
    missing = []
    if scene.region is None:
        missing.append("a search region ([optimizer] region or synthetic terrain)")
    if scene.gauge_a is None:
        missing.append("a gauge section")
    if scene.source is None or scene.hydrograph is None:
        missing.append("a hydrograph and source")
    if scene.centerline is None:
        missing.append("a centerline")
    if missing:
        raise ConfigError("optimization needs " + "; ".join(missing))
    dam_length = cfg.dam.length if cfg.dam is not None else scene.dam_length_default
    dam_crest = cfg.dam.crest if cfg.dam is not None else 10.0
    if dam_length is None:
        raise ConfigError("optimization needs a [dam] template (length, crest)")
    return DamPlacementObjective(
        grid=scene.grid,
        centerline=scene.centerline,
        region=scene.region,
        source=scene.source,
        hydrograph=scene.hydrograph,
        gauge_a=scene.gauge_a,
        gauge_b=scene.gauge_b,
        gauge_positive=scene.gauge_positive,
        dam_length=dam_length,
        dam_crest=dam_crest,
        config=cfg.solver,
        t_end=cfg.t_end,
        initial_surface=cfg.initial_surface,
    )


def _probe_and_stop(cfg: RunConfig, obj: DamPlacementObjective):
    opt = cfg.optimizer
    probe = ProbeRule(*opt.probe) if opt.probe is not None else obj.default_probe
    if opt.grad_tol is not None:
        stop = StoppingRule(grad_tol=opt.grad_tol, k_max=opt.k_max)
    else:
        stop = StoppingRule.for_grid(obj.grid, k_max=opt.k_max)
    return probe, stop


def cmd_optimize(cfg: RunConfig, args) -> int:
    if cfg.optimizer is None:
        raise ConfigError("optimize requires an [optimizer] section")
    scene = build_scene(cfg)
    obj = _objective(cfg, scene)
    probe, stop = _probe_and_stop(cfg, obj)

    baseline = obj.baseline()
    results = []
    for idx, start in enumerate(cfg.optimizer.starts):
        result = ascend(obj, start, probe, stop)
        results.append(result)
        _say(args, f"start {idx} at {start}: {result.status} after {result.k} steps, "
                   f"V_A={result.value:.6g} m^3")
        if len(cfg.optimizer.starts) > 1:
            write_trace_csv(result.history,
                            os.path.join(cfg.out_dir, f"trace_start{idx}.csv"))
    best = max(results, key=lambda r: r.value)
    write_trace_csv(best.history, os.path.join(cfg.out_dir, "trace.csv"))

    ratio = best.value / baseline if baseline != 0 else float("inf")
    summary = [
        f"best_center_x = {best.center[0]!r}",
        f"best_center_y = {best.center[1]!r}",
        f"best_V_A = {best.value!r}",
        f"baseline_V_A = {baseline!r}",
        f"ratio = {ratio!r}",
        f"status = \"{best.status}\"",
        f"evaluations = {obj.evaluations}",
    ]
    with open(os.path.join(cfg.out_dir, "summary.txt"), "w") as fh:
        fh.write("\n".join(summary) + "\n")
    _say(args, f"best dam center {best.center}, V_A={best.value:.6g} m^3, "
               f"baseline {baseline:.6g} m^3, ratio {ratio:.3f}")
    _write_normalized(cfg)
    return 0


def cmd_map(cfg: RunConfig, args) -> int:
    if cfg.optimizer is None or cfg.optimizer.map_spacing is None:
        raise ConfigError("map requires [optimizer] with map_spacing")
    scene = build_scene(cfg)
    obj = _objective(cfg, scene)
    samples = map_objective(obj, obj.region, cfg.optimizer.map_spacing,
                            threads=args.threads)
    write_surface_csv(samples, os.path.join(cfg.out_dir, "surface.csv"))
    ok = [s for s in samples if s.status == "ok"]
    _say(args, f"mapped {len(ok)} / {len(samples)} lattice points "
               f"({obj.evaluations} simulations)")
    _write_normalized(cfg)
    return 0


def cmd_validate(cfg: RunConfig, args) -> int:
    scene = build_scene(cfg)
    _say(args, f"grid {scene.grid.nx} x {scene.grid.ny} cells, "
               f"cell {scene.grid.dx} x {scene.grid.dy} m: valid")
    print(normalized_toml(cfg))
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "map": cmd_map,
    "validate": cmd_validate,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floodopt",
        description="Shallow-water flood simulation and dam placement search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "run one flood simulation and emit gauge/snapshot artifacts"),
        ("optimize", "gradient-ascent search for the best dam center"),
        ("map", "sample the objective surface on a lattice"),
        ("validate", "check a config and echo its normalized form"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default=None, help="override output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="parallel objective evaluations (map)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.out is not None:
            cfg = RunConfig(**{**vars(cfg), "out_dir": args.out})
        os.makedirs(cfg.out_dir, exist_ok=True)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (FormatError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
