"""Terrain builders: DEM ingestion, synthetic river landscapes, dam rasterization.

Terrain geometry follows core.SimGrid conventions (row 0 = south). ESRI
ASCII rasters store rows north to south and are flipped on read.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SimGrid, SourceField
from .errors import FormatError, GeometryError

__all__ = [
    "DamSpec",
    "Centerline",
    "SearchRegion",
    "ChannelBranchParams",
    "ChannelBranchScene",
    "read_dem",
    "synth_channel_with_branch",
    "rasterize_dam",
]


@dataclass(frozen=True)
class DamSpec:
    """Parametric water-retaining dam.

    (x_d, y_d) is the dam center, length the crest length [m]. The dam
    axis is normally derived perpendicular to the riverbed centerline;
    orientation, when given, overrides it with an explicit axis vector.
    crest is the elevation added above the local reference surface; the
    default is high enough that the dam is never overtopped.
    """

    x_d: float
    y_d: float
    length: float
    crest: float = 10.0
    orientation: tuple[float, float] | None = None

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError(f"dam length must be positive, got {self.length}")
        if not self.crest > 0:
            raise ValueError(f"dam crest must be positive, got {self.crest}")
        if self.orientation is not None:
            ox, oy = self.orientation
            norm = float(np.hypot(ox, oy))
            if norm == 0.0:
                raise ValueError("dam orientation vector must be nonzero")
            object.__setattr__(self, "orientation", (ox / norm, oy / norm))

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_d, self.y_d)


@dataclass(frozen=True)
class Centerline:
    """Polyline tracing the riverbed axis, used to orient dams."""

    points: np.ndarray  # (n, 2)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("centerline needs >= 2 (x, y) points")
        if (np.hypot(*(np.diff(pts, axis=0).T)) == 0).any():
            raise ValueError("consecutive centerline points must be distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def tangent_near(self, x: float, y: float) -> tuple[float, float]:
        """Unit tangent of the segment nearest to (x, y)."""
        p = np.array([x, y])
        a = self.points[:-1]
        b = self.points[1:]
        d = b - a
        seg_len2 = (d * d).sum(axis=1)
        t = np.clip(((p - a) * d).sum(axis=1) / seg_len2, 0.0, 1.0)
        closest = a + t[:, None] * d
        k = int(np.argmin(((p - closest) ** 2).sum(axis=1)))
        tx, ty = d[k] / np.sqrt(seg_len2[k])
        return float(tx), float(ty)


def _polygon_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _segments_cross(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    return (
        orient(p1, p2, p3) * orient(p1, p2, p4) < 0
        and orient(p3, p4, p1) * orient(p3, p4, p2) < 0
    )


@dataclass(frozen=True)
class SearchRegion:
    """Simple polygon bounding admissible dam centers."""

    vertices: np.ndarray  # (n, 2)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("search region needs >= 3 (x, y) vertices")
        if abs(_polygon_area(v)) == 0.0:
            raise ValueError("search region polygon has zero area")
        n = v.shape[0]
        for i in range(n):
            for k in range(i + 1, n):
                if abs(i - k) in (1, n - 1):
                    continue
                if _segments_cross(v[i], v[(i + 1) % n], v[k], v[(k + 1) % n]):
                    raise ValueError("search region polygon must be simple")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @classmethod
    def rectangle(cls, x0: float, y0: float, x1: float, y1: float) -> "SearchRegion":
        return cls(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        v = self.vertices
        return (
            float(v[:, 0].min()), float(v[:, 1].min()),
            float(v[:, 0].max()), float(v[:, 1].max()),
        )

    def contains(self, x: float, y: float, tol: float = 1e-9) -> bool:
        """Point-in-polygon by ray casting; boundary points count as inside."""
        v = self.vertices
        n = v.shape[0]
        inside = False
        for i in range(n):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % n]
            # On-edge check.
            dx, dy = x2 - x1, y2 - y1
            len2 = dx * dx + dy * dy
            t = ((x - x1) * dx + (y - y1) * dy) / len2
            if 0.0 <= t <= 1.0:
                px, py = x1 + t * dx, y1 + t * dy
                if (x - px) ** 2 + (y - py) ** 2 <= tol * tol:
                    return True
            if (y1 > y) != (y2 > y):
                x_cross = x1 + (y - y1) * dx / dy
                if x < x_cross:
                    inside = not inside
        return inside


def read_dem(path, manning: float = 0.03, nodata_elevation: float | None = None):
    """Read an ESRI ASCII grid into a SimGrid.

    Header keys ncols, nrows, xllcorner, yllcorner, cellsize and optional
    NODATA_value; data rows run north to south. NODATA cells are raised
    to nodata_elevation (default: highest finite elevation + 100 m, i.e.
    impermeable) and flagged in the returned mask.

    Returns (grid, nodata_mask).
    """
    header: dict[str, float] = {}
    values: list[float] = []
    required = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")
    with open(path) as fh:
        lines = fh.readlines()

    line_no = 0
    n_lines = len(lines)
    while line_no < n_lines:
        tokens = lines[line_no].split()
        if not tokens:
            line_no += 1
            continue
        key = tokens[0].lower()
        if key in required or key == "nodata_value":
            if len(tokens) != 2:
                raise FormatError(f"{path}: line {line_no + 1}: malformed header line")
            try:
                header[key] = float(tokens[1])
            except ValueError:
                raise FormatError(
                    f"{path}: line {line_no + 1}: unparsable header value {tokens[1]!r}"
                ) from None
            line_no += 1
        else:
            break

    missing = [k for k in required if k not in header]
    if missing:
        raise FormatError(f"{path}: header missing {', '.join(missing)}")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if ncols != header["ncols"] or nrows != header["nrows"] or ncols < 1 or nrows < 1:
        raise FormatError(f"{path}: ncols/nrows must be positive integers")

    for ln in range(line_no, n_lines):
        for tok in lines[ln].split():
            try:
                values.append(float(tok))
            except ValueError:
                raise FormatError(
                    f"{path}: line {ln + 1}: unparsable value {tok!r}"
                ) from None

    if len(values) != ncols * nrows:
        raise FormatError(
            f"{path}: expected {ncols * nrows} values ({nrows} rows of {ncols}), "
            f"got {len(values)}"
        )

    north_up = np.array(values).reshape(nrows, ncols)
    bed = north_up[::-1, :].copy()  # row 0 becomes the southern edge
    nodata_mask = np.zeros_like(bed, dtype=bool)
    if "nodata_value" in header:
        nodata_mask = bed == header["nodata_value"]
    if nodata_mask.any():
        if nodata_elevation is None:
            finite = bed[~nodata_mask]
            nodata_elevation = (float(finite.max()) if finite.size else 0.0) + 100.0
        bed = np.where(nodata_mask, nodata_elevation, bed)

    grid = SimGrid(
        nx=ncols, ny=nrows,
        dx=header["cellsize"], dy=header["cellsize"],
        bed=bed, manning=np.full(bed.shape, manning),
        origin_x=header["xllcorner"], origin_y=header["yllcorner"],
    )
    return grid, nodata_mask


@dataclass(frozen=True)
class ChannelBranchParams:
    """Synthetic terrain: straight main channel with a side branch.

    The main channel runs west to east with a uniform downstream slope;
    the branch leaves northward over a sill at branch_x and drains off the
    northern edge. The western end of the channel is walled so injected
    water can only leave downstream or through the branch. All lengths in
    meters.
    """

    length_x: float = 3000.0
    length_y: float = 2000.0
    cell: float = 50.0
    floodplain_elevation: float = 8.0
    channel_y: float = 500.0
    channel_width: float = 300.0
    channel_bed_upstream: float = 2.0
    channel_slope: float = 0.001
    branch_x: float = 1500.0
    branch_width: float = 150.0
    branch_sill: float = 1.2
    branch_slope: float = 0.002
    manning: float = 0.03

    def __post_init__(self):
        for name in ("length_x", "length_y", "cell", "channel_width", "branch_width"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.branch_width >= self.channel_width:
            raise ValueError(
                f"branch_width {self.branch_width} must be narrower than "
                f"channel_width {self.channel_width}"
            )
        if not 0 < self.channel_y < self.length_y:
            raise ValueError("channel_y must lie inside the domain")
        if not 0 < self.branch_x < self.length_x:
            raise ValueError("branch_x must lie inside the domain")
        junction_bed = self.channel_bed_upstream - self.channel_slope * self.branch_x
        if self.branch_sill <= junction_bed:
            raise ValueError(
                f"branch_sill {self.branch_sill} must sit above the channel bed "
                f"{junction_bed} at the junction"
            )
        if self.channel_y + self.channel_width / 2 >= self.length_y - 2 * self.cell:
            raise ValueError("channel too close to the northern edge for a branch")


@dataclass(frozen=True)
class ChannelBranchScene:
    """Ready-to-run bundle produced by synth_channel_with_branch."""

    grid: SimGrid
    centerline: Centerline
    region: SearchRegion
    source: SourceField
    gauge_a: tuple[float, float]
    gauge_b: tuple[float, float]
    gauge_positive: tuple[float, float]
    dam_length: float


def synth_channel_with_branch(params: ChannelBranchParams | None = None) -> ChannelBranchScene:
    """Deterministic desk-scale terrain of a river with a higher side branch.

    A dam placed in the main channel downstream of the branch mouth backs
    water up over the sill, raising the branch inflow; the returned gauge
    section spans the branch just north of the junction and the search
    region covers the main channel around and downstream of the junction.
    """
    p = params if params is not None else ChannelBranchParams()
    cell = p.cell
    nx = int(round(p.length_x / cell))
    ny = int(round(p.length_y / cell))
    x = (np.arange(nx) + 0.5) * cell
    y = (np.arange(ny) + 0.5) * cell
    X, Y = np.meshgrid(x, y)

    bed = np.full((ny, nx), p.floodplain_elevation)
    half_w = p.channel_width / 2
    in_channel = (np.abs(Y - p.channel_y) <= half_w) & (X > cell)
    bed[in_channel] = (p.channel_bed_upstream - p.channel_slope * X)[in_channel]

    channel_north_edge = p.channel_y + half_w
    in_branch = (np.abs(X - p.branch_x) <= p.branch_width / 2) & (Y > channel_north_edge)
    bed[in_branch] = (p.branch_sill - p.branch_slope * (Y - channel_north_edge))[in_branch]

    grid = SimGrid(
        nx=nx, ny=ny, dx=cell, dy=cell,
        bed=bed, manning=np.full((ny, nx), p.manning),
    )

    centerline = Centerline(np.array([[0.0, p.channel_y], [p.length_x, p.channel_y]]))

    # Source: the westernmost carved channel column.
    src_rows = np.where(in_channel[:, 1])[0]
    source = SourceField.from_cells([(int(j), 1) for j in src_rows])

    # Gauge across the branch, two cells north of the junction, snapped to
    # grid lines so its faces tile the branch exactly.
    branch_cols = np.where(in_branch[ny - 1, :])[0]
    gx0 = branch_cols[0] * cell
    gx1 = (branch_cols[-1] + 1) * cell
    gy = (int(np.ceil(channel_north_edge / cell)) + 2) * cell
    gauge_a = (gx0, gy)
    gauge_b = (gx1, gy)
    gauge_positive = ((gx0 + gx1) / 2, gy + cell)

    region = SearchRegion.rectangle(
        max(2 * cell, p.branch_x - 10 * cell),
        p.channel_y - half_w,
        p.length_x - 2 * cell,
        p.channel_y + half_w,
    )

    return ChannelBranchScene(
        grid=grid,
        centerline=centerline,
        region=region,
        source=source,
        gauge_a=gauge_a,
        gauge_b=gauge_b,
        gauge_positive=gauge_positive,
        dam_length=p.channel_width,
    )


def rasterize_dam(grid: SimGrid, dam: DamSpec, centerline: Centerline | None,
                  reference: float | None = None) -> SimGrid:
    """New grid with the dam stamped into the bed elevation.

    The dam axis is the segment of length dam.length centered on
    (x_d, y_d), perpendicular to the local centerline tangent (or along
    dam.orientation when set). Cells whose center lies within half a
    cell diagonal of the segment are raised to reference + crest, where
    reference defaults to the highest original bed under the footprint.
    Never lowers any cell; the input grid is unchanged.
    """
    if not grid.contains(dam.x_d, dam.y_d):
        raise GeometryError(f"dam center ({dam.x_d}, {dam.y_d}) outside grid")
    if dam.orientation is not None:
        ax, ay = dam.orientation
    else:
        if centerline is None:
            raise GeometryError("dam needs a centerline or an explicit orientation")
        tx, ty = centerline.tangent_near(dam.x_d, dam.y_d)
        ax, ay = -ty, tx  # perpendicular to the flow axis
    half = dam.length / 2
    p0 = np.array([dam.x_d - ax * half, dam.y_d - ay * half])
    p1 = np.array([dam.x_d + ax * half, dam.y_d + ay * half])
    for px, py in (p0, p1):
        if not grid.contains(px, py):
            raise GeometryError(
                f"dam of length {dam.length} at ({dam.x_d}, {dam.y_d}) extends outside grid"
            )

    radius = 0.5 * float(np.hypot(grid.dx, grid.dy))
    x = grid.x_centers()
    y = grid.y_centers()
    X, Y = np.meshgrid(x, y)
    d = p1 - p0
    len2 = float(d @ d)
    if len2 == 0.0:
        dist = np.hypot(X - p0[0], Y - p0[1])
        axial_ok = True
    else:
        t = np.clip(((X - p0[0]) * d[0] + (Y - p0[1]) * d[1]) / len2, 0.0, 1.0)
        dist = np.hypot(X - (p0[0] + t * d[0]), Y - (p0[1] + t * d[1]))
        # Cap the along-axis extent so the wall never grows more than one
        # cell beyond the requested length.
        axial = np.abs((X - dam.x_d) * ax + (Y - dam.y_d) * ay)
        axial_ok = axial <= (dam.length + min(grid.dx, grid.dy)) / 2.0
    footprint = (dist <= radius) & axial_ok
    if not footprint.any():
        footprint = np.zeros_like(dist, dtype=bool)
        j, i = grid.cell_containing(dam.x_d, dam.y_d)
        footprint[j, i] = True

    if reference is None:
        reference = float(grid.bed[footprint].max())
    bed = np.array(grid.bed)
    bed[footprint] = np.maximum(bed[footprint], reference + dam.crest)
    return grid.with_bed(bed)
