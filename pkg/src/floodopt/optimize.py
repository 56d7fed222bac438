"""Gradient-ascent search for the dam center maximizing branch inflow.

The objective V_A(x_d, y_d) is evaluated by a full flood simulation per
candidate center; gradients are forward finite differences with probe
spacing 2*dx by default, and the step length comes from a backtracking
line search that only accepts strict improvements.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import FlowState, Hydrograph, SimGrid, SourceField
from .errors import DomainError, EvaluationError, FloodOptError
from .gauge import GaugeObserver, rasterize_gauge
from .solver import SolverConfig, run
from .terrain import Centerline, DamSpec, SearchRegion, rasterize_dam

__all__ = [
    "ProbeRule",
    "StoppingRule",
    "HistoryEntry",
    "OptimizerState",
    "FunctionObjective",
    "DamPlacementObjective",
    "MapSample",
    "gradient",
    "ascend",
    "map_objective",
]


@dataclass(frozen=True)
class ProbeRule:
    """Finite-difference probe offsets; default is twice the cell size."""

    delta_x: float
    delta_y: float

    def __post_init__(self):
        if not (self.delta_x > 0 and self.delta_y > 0):
            raise ValueError("probe offsets must be positive")

    @classmethod
    def for_grid(cls, grid: SimGrid) -> "ProbeRule":
        return cls(2.0 * grid.dx, 2.0 * grid.dy)


@dataclass(frozen=True)
class StoppingRule:
    """Termination controls for ascend."""

    grad_tol: float
    k_max: int = 50
    max_backtracks: int = 10

    def __post_init__(self):
        if self.grad_tol < 0:
            raise ValueError("grad_tol must be nonnegative")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")

    @classmethod
    def for_grid(cls, grid: SimGrid, k_max: int = 50) -> "StoppingRule":
        # 1 m^3 of objective change per cell size of movement.
        return cls(grad_tol=1.0 / max(grid.dx, grid.dy), k_max=k_max)


@dataclass(frozen=True)
class HistoryEntry:
    """One accepted iterate: its value, and the step that left it.

    grad_* and step_scale are NaN for the terminal iterate when no
    further step was taken from it (or its gradient was never computed).
    """

    k: int
    x: float
    y: float
    value: float
    grad_x: float = math.nan
    grad_y: float = math.nan
    step_scale: float = math.nan


@dataclass
class OptimizerState:
    """Result of an ascent: final iterate plus the accepted history."""

    k: int
    center: tuple[float, float]
    value: float
    gradient: tuple[float, float] | None
    step_scale: float
    history: list[HistoryEntry]
    status: str  # "converged" | "line_search_failed" | "max_iterations"


class FunctionObjective:
    """Closed-form objective for tests and experiments: V = fn(x, y)."""

    def __init__(self, fn, region: SearchRegion):
        self._fn = fn
        self.region = region

    def evaluate(self, center) -> float:
        x, y = float(center[0]), float(center[1])
        if not self.region.contains(x, y):
            raise DomainError(f"center ({x}, {y}) outside search region")
        return float(self._fn(x, y))


@dataclass
class DamPlacementObjective:
    """V_A(x_d, y_d): branch inflow volume for a dam rasterized at the center.

    Each evaluation stamps the dam template into the base terrain, runs
    the flood simulation over [0, t_end] and returns the gauge volume
    accumulated over the flood window. Centers are snapped to a half-cell
    lattice (finer moves cannot change the rasterization) and results are
    cached on the snapped center, so repeated evaluations are free and
    deterministic.
    """

    grid: SimGrid
    centerline: Centerline
    region: SearchRegion
    source: SourceField
    hydrograph: Hydrograph
    gauge_a: tuple[float, float]
    gauge_b: tuple[float, float]
    gauge_positive: tuple[float, float]
    dam_length: float
    config: SolverConfig
    t_end: float
    dam_crest: float = 10.0
    initial_surface: float | None = None
    gauge_mode: str = "sampled"

    evaluations: int = 0
    cache_hits: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def default_probe(self) -> ProbeRule:
        return ProbeRule.for_grid(self.grid)

    def quantize(self, center) -> tuple[float, float]:
        """Snap a center onto the half-cell lattice used for caching."""
        gx, gy = self.grid.origin_x, self.grid.origin_y
        hx, hy = self.grid.dx / 2.0, self.grid.dy / 2.0
        return (
            gx + round((float(center[0]) - gx) / hx) * hx,
            gy + round((float(center[1]) - gy) / hy) * hy,
        )

    def _simulate(self, dam: DamSpec | None) -> float:
        grid = self.grid if dam is None else rasterize_dam(self.grid, dam, self.centerline)
        gl = rasterize_gauge(grid, self.gauge_a, self.gauge_b, self.gauge_positive)
        if self.initial_surface is None:
            state = FlowState.zeros(grid)
        else:
            state = FlowState.at_rest(grid, self.initial_surface)
        window = (self.hydrograph.t_qs, self.hydrograph.t_qe)
        observer = GaugeObserver(gl, window, mode=self.gauge_mode)
        run(grid, state, self.source, self.hydrograph, self.config, self.t_end,
            observers=[observer])
        return observer.record.volume

    def evaluate(self, center) -> float:
        x, y = float(center[0]), float(center[1])
        if not self.region.contains(x, y):
            raise DomainError(f"center ({x}, {y}) outside search region")
        key = self.quantize((x, y))
        if key in self._cache:
            self.cache_hits += 1
            return self._cache[key]
        dam = DamSpec(x_d=key[0], y_d=key[1], length=self.dam_length, crest=self.dam_crest)
        try:
            value = self._simulate(dam)
        except FloodOptError as exc:
            raise EvaluationError((x, y), exc) from exc
        self.evaluations += 1
        self._cache[key] = value
        return value

    def baseline(self) -> float:
        """V_A with no dam at all."""
        if None not in self._cache:
            self._cache[None] = self._simulate(None)
        return self._cache[None]


def gradient(obj, center, probe: ProbeRule) -> tuple[float, float]:
    """Forward-difference gradient of the objective at center.

    {[V(x+dx, y) - V(x, y)]/dx, [V(x, y+dy) - V(x, y)]/dy}; an axis whose
    forward probe leaves the search region switches to the backward
    difference on that axis.
    """
    x, y = float(center[0]), float(center[1])
    v0 = obj.evaluate((x, y))
    out = []
    for dx_, dy_ in ((probe.delta_x, 0.0), (0.0, probe.delta_y)):
        delta = dx_ or dy_
        fwd = (x + dx_, y + dy_)
        bwd = (x - dx_, y - dy_)
        if obj.region.contains(*fwd):
            out.append((obj.evaluate(fwd) - v0) / delta)
        elif obj.region.contains(*bwd):
            out.append((v0 - obj.evaluate(bwd)) / delta)
        else:
            raise DomainError(
                f"both probes at distance {delta} from ({x}, {y}) leave the search region"
            )
    return (out[0], out[1])


def ascend(obj, start, probe: ProbeRule, stop: StoppingRule) -> OptimizerState:
    """Gradient ascent r <- r + lambda * grad with backtracking line search.

    The first trial step moves about twice the probe spacing; lambda
    halves until the objective strictly increases, and candidates outside
    the search region are rejected the same way. The accepted-iterate
    values are therefore strictly increasing. Terminates on small
    gradient, failed line search, or k_max iterations.
    """
    x, y = float(start[0]), float(start[1])
    if not obj.region.contains(x, y):
        raise DomainError(f"start ({x}, {y}) outside search region")
    value = obj.evaluate((x, y))
    history: list[HistoryEntry] = []
    grad_now: tuple[float, float] | None = None
    lam_used = math.nan
    status = "max_iterations"
    k = 0
    while True:
        if k >= stop.k_max:
            history.append(HistoryEntry(k, x, y, value))
            status = "max_iterations"
            break
        gx, gy = gradient(obj, (x, y), probe)
        grad_now = (gx, gy)
        gnorm = math.hypot(gx, gy)
        if gnorm <= stop.grad_tol:
            history.append(HistoryEntry(k, x, y, value, gx, gy))
            status = "converged"
            break
        lam = 2.0 * max(probe.delta_x, probe.delta_y) / gnorm
        accepted = False
        for _ in range(stop.max_backtracks + 1):
            cand = (x + lam * gx, y + lam * gy)
            if obj.region.contains(*cand):
                v_cand = obj.evaluate(cand)
                if v_cand > value:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            history.append(HistoryEntry(k, x, y, value, gx, gy))
            status = "line_search_failed"
            break
        history.append(HistoryEntry(k, x, y, value, gx, gy, lam))
        x, y = cand
        value = v_cand
        lam_used = lam
        k += 1
    return OptimizerState(
        k=k, center=(x, y), value=value, gradient=grad_now,
        step_scale=lam_used, history=history, status=status,
    )


@dataclass(frozen=True)
class MapSample:
    """One lattice sample of the objective surface."""

    row: int
    col: int
    x: float
    y: float
    value: float  # NaN unless status == "ok"
    status: str   # "ok" | "outside" | "error: ..."


def _lattice(lo: float, hi: float, spacing: float) -> np.ndarray:
    extent = hi - lo
    count = max(1, int(math.floor(extent / spacing)) + 1)
    offset = (extent - (count - 1) * spacing) / 2.0
    return lo + offset + spacing * np.arange(count)


def map_objective(obj, region: SearchRegion, spacing: float,
                  threads: int = 1) -> list[MapSample]:
    """Objective sampled on a centered lattice over the region's bounding box.

    Rows are ordered row-major by lattice index regardless of thread
    count; lattice points outside the region are kept with status
    "outside", and per-sample evaluation failures are recorded rather
    than raised.
    """
    if not spacing > 0:
        raise ValueError(f"lattice spacing must be positive, got {spacing}")
    x0, y0, x1, y1 = region.bounds
    xs = _lattice(x0, x1, spacing)
    ys = _lattice(y0, y1, spacing)

    points = []
    for r, y in enumerate(ys):
        for c, x in enumerate(xs):
            points.append((r, c, float(x), float(y)))

    def sample(pt) -> MapSample:
        r, c, x, y = pt
        if not region.contains(x, y):
            return MapSample(r, c, x, y, math.nan, "outside")
        try:
            return MapSample(r, c, x, y, obj.evaluate((x, y)), "ok")
        except FloodOptError as exc:
            return MapSample(r, c, x, y, math.nan, f"error: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(sample, points))
    else:
        results = [sample(p) for p in points]
    return results
