"""Grid, flow-state and configuration value types shared by every module.

Conventions: arrays are shaped (ny, nx) and indexed [j, i] with
x = origin_x + (i + 0.5) * dx and y = origin_y + (j + 0.5) * dy, i.e. row 0
is the southern edge. All quantities are SI: meters, seconds, m^3/s.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GeometryError

__all__ = [
    "PhysicsParams",
    "SimGrid",
    "FlowState",
    "Hydrograph",
    "SourceField",
    "validate_grid",
    "hydrograph_at",
]


def _readonly(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PhysicsParams:
    """Physical constants and solver thresholds.

    g: gravitational acceleration [m/s^2]
    omega_e: Earth's angular velocity [rad/s]
    latitude_deg: latitude used for the Coriolis parameter [deg]
    cfl: Courant number, in (0, 1)
    h_dry: depth below which a cell is treated as dry [m]
    """

    g: float = 9.81
    omega_e: float = 7.292e-5
    latitude_deg: float = 48.8
    cfl: float = 0.5
    h_dry: float = 1e-3

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"g must be positive, got {self.g}")
        if not 0 < self.cfl < 1:
            raise ValueError(f"cfl must lie in (0, 1), got {self.cfl}")
        if not self.h_dry > 0:
            raise ValueError(f"h_dry must be positive, got {self.h_dry}")

    @property
    def coriolis_f(self) -> float:
        """Coriolis parameter f = 2 * omega_e * sin(latitude) [1/s]."""
        return 2.0 * self.omega_e * np.sin(np.radians(self.latitude_deg))


@dataclass(frozen=True)
class SimGrid:
    """Regular raster of cells carrying bed elevation and roughness.

    bed: bed elevation b(x, y) [m], shape (ny, nx)
    manning: Manning roughness coefficient per cell, in (0, 1]
    """

    nx: int
    ny: int
    dx: float
    dy: float
    bed: np.ndarray
    manning: np.ndarray
    origin_x: float = 0.0
    origin_y: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "bed", _readonly(self.bed))
        object.__setattr__(self, "manning", _readonly(self.manning))
        problems = validate_grid(self)
        if problems:
            raise ValueError("invalid grid: " + "; ".join(problems))

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def x_centers(self) -> np.ndarray:
        return self.origin_x + (np.arange(self.nx) + 0.5) * self.dx

    def y_centers(self) -> np.ndarray:
        return self.origin_y + (np.arange(self.ny) + 0.5) * self.dy

    def cell_containing(self, x: float, y: float) -> tuple[int, int]:
        """(j, i) of the cell whose footprint contains (x, y)."""
        if not self.contains(x, y):
            raise GeometryError(
                f"point ({x}, {y}) outside grid extent "
                f"[{self.origin_x}, {self.origin_x + self.nx * self.dx}] x "
                f"[{self.origin_y}, {self.origin_y + self.ny * self.dy}]"
            )
        i = min(int((x - self.origin_x) / self.dx), self.nx - 1)
        j = min(int((y - self.origin_y) / self.dy), self.ny - 1)
        return j, i

    def contains(self, x: float, y: float) -> bool:
        return (
            self.origin_x <= x <= self.origin_x + self.nx * self.dx
            and self.origin_y <= y <= self.origin_y + self.ny * self.dy
        )

    def with_bed(self, bed: np.ndarray) -> "SimGrid":
        """Copy of this grid with a replaced bed array."""
        return SimGrid(
            nx=self.nx, ny=self.ny, dx=self.dx, dy=self.dy,
            bed=bed, manning=self.manning,
            origin_x=self.origin_x, origin_y=self.origin_y,
        )


def validate_grid(grid) -> list[str]:
    """All SimGrid invariant violations, empty when the grid is valid.

    Total function: never raises; each violation names the field and,
    for array entries, the offending (j, i) index.
    """
    problems: list[str] = []
    if grid.nx < 3:
        problems.append(f"nx must be >= 3, got {grid.nx}")
    if grid.ny < 3:
        problems.append(f"ny must be >= 3, got {grid.ny}")
    if not grid.dx > 0:
        problems.append(f"dx must be positive, got {grid.dx}")
    if not grid.dy > 0:
        problems.append(f"dy must be positive, got {grid.dy}")

    expected = (grid.ny, grid.nx)
    for name in ("bed", "manning"):
        arr = getattr(grid, name)
        if arr.shape != expected:
            problems.append(f"{name} shape {arr.shape} != (ny, nx) = {expected}")
            continue
        bad = ~np.isfinite(arr)
        if bad.any():
            j, i = np.argwhere(bad)[0]
            problems.append(f"{name} non-finite at cell ({j}, {i})")
    if grid.manning.shape == expected and np.isfinite(grid.manning).all():
        bad = (grid.manning <= 0) | (grid.manning > 1)
        if bad.any():
            j, i = np.argwhere(bad)[0]
            problems.append(
                f"manning must lie in (0, 1], got {grid.manning[j, i]} at cell ({j}, {i})"
            )
    return problems


@dataclass
class FlowState:
    """Conserved flow fields on a grid: depth and momenta.

    h: water depth H >= 0 [m]; hu, hv: momenta uH, vH [m^2/s];
    t: simulation time [s]. Mutated only by the solver.
    """

    h: np.ndarray
    hu: np.ndarray
    hv: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, grid: SimGrid, t: float = 0.0) -> "FlowState":
        shape = grid.shape
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape), t)

    @classmethod
    def at_rest(cls, grid: SimGrid, surface: float, t: float = 0.0) -> "FlowState":
        """Lake-at-rest state: depth max(surface - bed, 0), zero momenta."""
        h = np.maximum(surface - grid.bed, 0.0)
        return cls(h, np.zeros(grid.shape), np.zeros(grid.shape), t)

    def copy(self) -> "FlowState":
        return FlowState(self.h.copy(), self.hu.copy(), self.hv.copy(), self.t)

    def volume(self, grid: SimGrid) -> float:
        """Total water volume [m^3]."""
        return float(self.h.sum()) * grid.cell_area

    def velocities(self, h_dry: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
        """Cell velocities (u, v); zero where depth <= h_dry."""
        wet = self.h > h_dry
        hs = np.where(wet, self.h, 1.0)
        u = np.where(wet, self.hu / hs, 0.0)
        v = np.where(wet, self.hv / hs, 0.0)
        return u, v


@dataclass(frozen=True)
class Hydrograph:
    """Discharge time series Q(t) with the flood window [t_qs, t_qe].

    samples: ordered (t [s], q [m^3/s]) pairs with strictly increasing t
    and q >= 0; the flood window must lie within the sampled span.
    """

    times: np.ndarray
    discharges: np.ndarray
    t_qs: float
    t_qe: float

    def __post_init__(self):
        object.__setattr__(self, "times", _readonly(self.times))
        object.__setattr__(self, "discharges", _readonly(self.discharges))
        t, q = self.times, self.discharges
        if t.ndim != 1 or t.shape != q.shape or t.size < 2:
            raise ValueError("hydrograph needs >= 2 (t, q) samples")
        if not np.all(np.diff(t) > 0):
            raise ValueError("hydrograph times must be strictly increasing")
        if np.any(q < 0) or not np.isfinite(q).all() or not np.isfinite(t).all():
            raise ValueError("hydrograph discharges must be finite and >= 0")
        if not self.t_qs < self.t_qe:
            raise ValueError(f"flood window empty: t_qs={self.t_qs} >= t_qe={self.t_qe}")
        if self.t_qs < t[0] or self.t_qe > t[-1]:
            raise ValueError("flood window must lie within the sampled span")

    @classmethod
    def from_samples(cls, samples, t_qs: float, t_qe: float) -> "Hydrograph":
        pairs = [(float(t), float(q)) for t, q in samples]
        return cls(
            times=np.array([p[0] for p in pairs]),
            discharges=np.array([p[1] for p in pairs]),
            t_qs=t_qs,
            t_qe=t_qe,
        )

    @classmethod
    def trapezoid(
        cls,
        q_base: float,
        q_peak: float,
        t_rise_start: float,
        t_rise_end: float,
        t_fall_start: float,
        t_fall_end: float,
        t_end: float,
        t_qs: float | None = None,
        t_qe: float | None = None,
    ) -> "Hydrograph":
        """Trapezoidal flood pulse riding on a base discharge."""
        samples = [
            (0.0, q_base),
            (t_rise_start, q_base),
            (t_rise_end, q_peak),
            (t_fall_start, q_peak),
            (t_fall_end, q_base),
            (t_end, q_base),
        ]
        samples = sorted(set(samples))
        return cls.from_samples(
            samples,
            t_qs=0.0 if t_qs is None else t_qs,
            t_qe=t_end if t_qe is None else t_qe,
        )

    @property
    def span(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])


def hydrograph_at(hg: Hydrograph, t: float) -> float:
    """Discharge at time t, linearly interpolated; exact at sample points."""
    t0, t1 = hg.span
    if not t0 <= t <= t1:
        raise DomainError(f"time {t} outside hydrograph span [{t0}, {t1}]")
    return float(np.interp(t, hg.times, hg.discharges))


@dataclass(frozen=True)
class SourceField:
    """Hydrograph injection region: cells and their area fractions.

    rows/cols: cell indices; fractions: positive weights summing to 1.
    The summed injection over all cells equals Q0(t). u_inject/v_inject
    optionally give the injected water a momentum (default: mass only).
    """

    rows: np.ndarray
    cols: np.ndarray
    fractions: np.ndarray
    u_inject: float = 0.0
    v_inject: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "rows", _readonly(self.rows, dtype=np.intp))
        object.__setattr__(self, "cols", _readonly(self.cols, dtype=np.intp))
        object.__setattr__(self, "fractions", _readonly(self.fractions))
        if not (self.rows.shape == self.cols.shape == self.fractions.shape):
            raise ValueError("rows, cols and fractions must have equal length")
        if self.rows.size == 0:
            raise ValueError("source field needs at least one cell")
        if np.any(self.fractions <= 0):
            raise ValueError("area fractions must be positive")
        if abs(float(self.fractions.sum()) - 1.0) > 1e-9:
            raise ValueError(
                f"area fractions must sum to 1, got {float(self.fractions.sum())!r}"
            )

    @classmethod
    def from_cells(cls, cells, weights=None, u_inject=0.0, v_inject=0.0) -> "SourceField":
        """Build from (j, i) cells; weights default to uniform and are normalized."""
        cells = list(cells)
        w = np.ones(len(cells)) if weights is None else np.asarray(weights, dtype=float)
        frac = w / w.sum()
        return cls(
            rows=np.array([c[0] for c in cells]),
            cols=np.array([c[1] for c in cells]),
            fractions=frac,
            u_inject=u_inject,
            v_inject=v_inject,
        )
