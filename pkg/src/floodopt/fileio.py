"""Binary snapshots, DEM writing, and CSV serialization.

All floats in text outputs use repr formatting, which round-trips
exactly, so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import math
import struct

import numpy as np

from .core import FlowState, Hydrograph, SimGrid
from .errors import FormatError

__all__ = [
    "write_snapshot",
    "read_snapshot",
    "write_dem",
    "load_hydrograph_csv",
    "write_gauge_csv",
    "write_trace_csv",
    "write_surface_csv",
    "write_mass_report",
]

_MAGIC = b"SWSNAPV1"
_HEADER = struct.Struct("<qq5d")  # nx, ny, dx, dy, origin_x, origin_y, t


def fmt(x: float) -> str:
    """Round-trip-exact decimal form of a float."""
    return repr(float(x))


def write_snapshot(state: FlowState, grid: SimGrid, path) -> None:
    """Self-describing binary snapshot of (H, uH, vH) plus grid geometry."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(_HEADER.pack(grid.nx, grid.ny, grid.dx, grid.dy,
                              grid.origin_x, grid.origin_y, state.t))
        for arr in (state.h, state.hu, state.hv):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_snapshot(path, grid: SimGrid | None = None) -> FlowState:
    """Read a snapshot back; verifies geometry against grid when given."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise FormatError(f"{path}: not a snapshot file (bad magic {magic!r})")
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise FormatError(f"{path}: truncated snapshot header")
        nx, ny, dx, dy, ox, oy, t = _HEADER.unpack(header)
        count = nx * ny
        payload = fh.read(3 * count * 8)
        if len(payload) != 3 * count * 8:
            raise FormatError(f"{path}: truncated snapshot payload")
    if grid is not None:
        mine = (grid.nx, grid.ny, grid.dx, grid.dy, grid.origin_x, grid.origin_y)
        theirs = (nx, ny, dx, dy, ox, oy)
        if mine != theirs:
            raise FormatError(
                f"{path}: snapshot geometry {theirs} does not match grid {mine}"
            )
    fields = np.frombuffer(payload, dtype="<f8").reshape(3, ny, nx)
    return FlowState(fields[0].copy(), fields[1].copy(), fields[2].copy(), t)


def write_dem(grid: SimGrid, path, nodata_mask=None, nodata_value: float = -9999.0) -> None:
    """ESRI ASCII grid writer; finite cells round-trip bit-exactly."""
    if grid.dx != grid.dy:
        raise FormatError("ESRI ASCII requires square cells (dx == dy)")
    bed = np.asarray(grid.bed)
    with open(path, "w") as fh:
        fh.write(f"ncols {grid.nx}\n")
        fh.write(f"nrows {grid.ny}\n")
        fh.write(f"xllcorner {fmt(grid.origin_x)}\n")
        fh.write(f"yllcorner {fmt(grid.origin_y)}\n")
        fh.write(f"cellsize {fmt(grid.dx)}\n")
        if nodata_mask is not None and np.asarray(nodata_mask).any():
            fh.write(f"NODATA_value {fmt(nodata_value)}\n")
        for j in range(grid.ny - 1, -1, -1):  # north to south
            row = bed[j]
            if nodata_mask is not None:
                row = np.where(nodata_mask[j], nodata_value, row)
            fh.write(" ".join(fmt(v) for v in row) + "\n")


def load_hydrograph_csv(path, t_qs: float, t_qe: float) -> Hydrograph:
    """Hydrograph from a two-column CSV with a required t_s,q_m3s header."""
    samples = []
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        raise FormatError(f"{path}: empty hydrograph file")
    header = [c.strip() for c in lines[0].split(",")]
    if header != ["t_s", "q_m3s"]:
        raise FormatError(
            f"{path}: line 1: expected header 't_s,q_m3s', got {lines[0].strip()!r}"
        )
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise FormatError(f"{path}: line {no}: expected two columns")
        try:
            samples.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise FormatError(f"{path}: line {no}: unparsable number") from None
    try:
        return Hydrograph.from_samples(samples, t_qs=t_qs, t_qe=t_qe)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def write_gauge_csv(record, path) -> None:
    """Gauge time series: step end time, discharge, cumulative window volume."""
    with open(path, "w") as fh:
        fh.write("t_s,q_m3s,cumulative_m3\n")
        cum = 0.0
        for t_start, dt, q, wdt in record.rows:
            cum += q * wdt
            fh.write(f"{fmt(t_start + dt)},{fmt(q)},{fmt(cum)}\n")


def write_trace_csv(history, path) -> None:
    """Optimizer trace: one row per accepted iterate."""
    with open(path, "w") as fh:
        fh.write("k,x_d,y_d,V_A,grad_x,grad_y,lambda\n")
        for e in history:
            fh.write(
                f"{e.k},{fmt(e.x)},{fmt(e.y)},{fmt(e.value)},"
                f"{fmt(e.grad_x)},{fmt(e.grad_y)},{fmt(e.step_scale)}\n"
            )


def write_surface_csv(samples, path) -> None:
    """Objective surface samples, row-major over the lattice."""
    with open(path, "w") as fh:
        fh.write("x_d,y_d,V_A,status\n")
        for s in samples:
            value = "" if math.isnan(s.value) else fmt(s.value)
            fh.write(f"{fmt(s.x)},{fmt(s.y)},{value},{s.status}\n")


def write_mass_report(path, initial_volume, final_volume, injected, outflow) -> None:
    """Global mass balance of a run as a small CSV."""
    residual = (final_volume - initial_volume) - (injected - outflow)
    scale = max(initial_volume, final_volume, injected, outflow, 1e-30)
    with open(path, "w") as fh:
        fh.write("initial_m3,final_m3,injected_m3,outflow_m3,residual_m3,relative_error\n")
        fh.write(
            f"{fmt(initial_volume)},{fmt(final_volume)},{fmt(injected)},"
            f"{fmt(outflow)},{fmt(residual)},{fmt(abs(residual) / scale)}\n"
        )
