import numpy as np
import pytest

from floodopt.errors import FormatError, GeometryError
from floodopt.fileio import write_dem
from floodopt.terrain import (
    Centerline,
    ChannelBranchParams,
    DamSpec,
    SearchRegion,
    rasterize_dam,
    read_dem,
    synth_channel_with_branch,
)

from conftest import make_grid


def write_asc(tmp_path, text, name="dem.asc"):
    path = tmp_path / name
    path.write_text(text)
    return path


SMALL_ASC = """\
ncols 3
nrows 3
xllcorner 100.0
yllcorner 200.0
cellsize 50
1 2 3
4 5 6
7 8 9
"""


class TestReadDem:
    def test_small_grid_fields(self, tmp_path):
        grid, mask = read_dem(write_asc(tmp_path, SMALL_ASC))
        assert grid.nx == 3 and grid.ny == 3
        assert grid.dx == 50.0 and grid.dy == 50.0
        assert grid.origin_x == 100.0 and grid.origin_y == 200.0
        # First file row is the northern edge -> last grid row.
        assert grid.bed[2].tolist() == [1.0, 2.0, 3.0]
        assert grid.bed[0].tolist() == [7.0, 8.0, 9.0]
        assert not mask.any()

    def test_missing_ncols_is_header_error(self, tmp_path):
        bad = SMALL_ASC.replace("ncols 3\n", "")
        with pytest.raises(FormatError, match="ncols"):
            read_dem(write_asc(tmp_path, bad))

    def test_nodata_cells_flagged_and_raised(self, tmp_path):
        text = SMALL_ASC.replace("cellsize 50\n", "cellsize 50\nNODATA_value -9999\n")
        text = text.replace("4 5 6", "4 -9999 6")
        grid, mask = read_dem(write_asc(tmp_path, text))
        assert mask.sum() == 1
        assert mask[1, 1]
        assert grid.bed[1, 1] > grid.bed[~mask].max()

    def test_row_count_mismatch(self, tmp_path):
        bad = SMALL_ASC.replace("7 8 9\n", "")
        with pytest.raises(FormatError, match="expected 9 values"):
            read_dem(write_asc(tmp_path, bad))

    def test_unparsable_token_names_line(self, tmp_path):
        bad = SMALL_ASC.replace("4 5 6", "4 five 6")
        with pytest.raises(FormatError, match="line 7"):
            read_dem(write_asc(tmp_path, bad))

    def test_writer_round_trips_bit_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        grid = make_grid(rng.uniform(-50, 300, (6, 9)), dx=25.0, origin=(12.5, -7.25))
        path = tmp_path / "out.asc"
        write_dem(grid, path)
        back, _ = read_dem(path, manning=0.02)
        assert (back.bed == grid.bed).all()
        assert back.origin_x == grid.origin_x and back.origin_y == grid.origin_y
        assert back.dx == grid.dx

    def test_writer_round_trips_nodata(self, tmp_path):
        grid = make_grid(np.arange(9.0).reshape(3, 3))
        mask = np.zeros((3, 3), dtype=bool)
        mask[0, 2] = True
        path = tmp_path / "nd.asc"
        write_dem(grid, path, nodata_mask=mask)
        back, back_mask = read_dem(path)
        assert (back_mask == mask).all()
        assert (back.bed[~mask] == grid.bed[~mask]).all()


class TestSynthChannelWithBranch:
    def test_default_sill_above_thalweg(self):
        scene = synth_channel_with_branch()
        p = ChannelBranchParams()
        j, i = scene.grid.cell_containing(p.branch_x, p.channel_y)
        thalweg = scene.grid.bed[j, i]
        jb, ib = scene.grid.cell_containing(p.branch_x, p.channel_y + p.channel_width)
        assert scene.grid.bed[jb, ib] > thalweg

    def test_zero_branch_width_rejected(self):
        with pytest.raises(ValueError):
            ChannelBranchParams(branch_width=0.0)

    def test_branch_wider_than_channel_rejected(self):
        with pytest.raises(ValueError):
            ChannelBranchParams(branch_width=400.0, channel_width=300.0)

    def test_centerline_bed_non_increasing_downstream(self):
        scene = synth_channel_with_branch()
        p = ChannelBranchParams()
        j = scene.grid.cell_containing(p.length_x / 2, p.channel_y)[0]
        channel_bed = scene.grid.bed[j, 2:]
        assert (np.diff(channel_bed) <= 0).all()

    def test_bundle_is_consistent(self):
        scene = synth_channel_with_branch()
        assert scene.region.contains(*scene.gauge_a) is False  # gauge in branch
        assert scene.dam_length > 0
        assert scene.source.rows.size > 0


class TestRasterizeDam:
    def straight_north_centerline(self):
        return Centerline(np.array([[500.0, 0.0], [500.0, 1000.0]]))

    def test_seven_cell_wall_for_300m_dam(self):
        # North-flowing centerline, dam length 300 m on a 50 m grid:
        # east-west wall of 7 contiguous raised cells.
        grid = make_grid(np.zeros((20, 20)))
        dam = DamSpec(x_d=475.0, y_d=475.0, length=300.0, crest=5.0)
        out = rasterize_dam(grid, dam, self.straight_north_centerline())
        raised = np.argwhere(out.bed > 0)
        assert len(raised) == 7
        assert (raised[:, 0] == 9).all()  # single row (y = 475)
        assert sorted(raised[:, 1]) == [6, 7, 8, 9, 10, 11, 12]
        assert (out.bed[out.bed > 0] == 5.0).all()

    def test_small_dam_raises_center_cell(self):
        grid = make_grid(np.zeros((10, 10)))
        dam = DamSpec(x_d=275.0, y_d=325.0, length=10.0, crest=3.0)
        out = rasterize_dam(grid, dam, self.straight_north_centerline())
        j, i = grid.cell_containing(275.0, 325.0)
        assert out.bed[j, i] == 3.0

    def test_idempotent_and_input_unchanged(self):
        grid = make_grid(np.zeros((20, 20)))
        dam = DamSpec(x_d=475.0, y_d=475.0, length=300.0)
        out1 = rasterize_dam(grid, dam, self.straight_north_centerline())
        out2 = rasterize_dam(grid, dam, self.straight_north_centerline())
        assert (out1.bed == out2.bed).all()
        assert (grid.bed == 0.0).all()

    def test_never_lowers_bed(self):
        rng = np.random.default_rng(5)
        grid = make_grid(rng.uniform(0, 10, (20, 20)))
        dam = DamSpec(x_d=500.0, y_d=500.0, length=400.0, crest=2.0)
        out = rasterize_dam(grid, dam, self.straight_north_centerline())
        assert (out.bed >= grid.bed).all()

    def test_footprint_length_near_dam_length(self):
        # Footprint length measured between the extreme raised cell
        # centers, matching the 7-cells-for-300-m example.
        grid = make_grid(np.zeros((30, 30)))
        cl = Centerline(np.array([[725.0, 0.0], [725.0, 1500.0]]))
        for length, center in ((150.0, 725.0), (300.0, 725.0), (600.0, 740.0)):
            dam = DamSpec(x_d=center, y_d=725.0, length=length)
            out = rasterize_dam(grid, dam, cl)
            cols = np.argwhere(out.bed > 0)[:, 1]
            span = (cols.max() - cols.min()) * grid.dx
            assert abs(span - length) <= grid.dx

    def test_rotating_centerline_rotates_footprint(self):
        grid = make_grid(np.zeros((21, 21)))
        center = 525.0
        dam = DamSpec(x_d=center, y_d=center, length=300.0)
        north = Centerline(np.array([[center, 0.0], [center, 1050.0]]))
        east = Centerline(np.array([[0.0, center], [1050.0, center]]))
        wall_ew = rasterize_dam(grid, dam, north)
        wall_ns = rasterize_dam(grid, dam, east)
        assert (wall_ew.bed.T == wall_ns.bed).all()

    def test_explicit_orientation_override(self):
        grid = make_grid(np.zeros((21, 21)))
        dam = DamSpec(x_d=525.0, y_d=525.0, length=300.0, orientation=(0.0, 1.0))
        out = rasterize_dam(grid, dam, None)
        raised = np.argwhere(out.bed > 0)
        assert (raised[:, 1] == 10).all()  # north-south wall

    def test_dam_outside_grid_rejected(self):
        grid = make_grid(np.zeros((10, 10)))
        cl = self.straight_north_centerline()
        with pytest.raises(GeometryError):
            rasterize_dam(grid, DamSpec(x_d=2000.0, y_d=250.0, length=100.0), cl)
        with pytest.raises(GeometryError, match="extends outside"):
            rasterize_dam(grid, DamSpec(x_d=475.0, y_d=25.0, length=2000.0), cl)

    def test_footprint_connected(self):
        grid = make_grid(np.zeros((40, 40)), dx=10.0)
        cl = Centerline(np.array([[0.0, 0.0], [400.0, 400.0]]))  # diagonal flow
        dam = DamSpec(x_d=200.0, y_d=200.0, length=150.0)
        out = rasterize_dam(grid, dam, cl)
        cells = {tuple(rc) for rc in np.argwhere(out.bed > 0)}
        assert cells
        # 8-connected flood fill from one cell must reach all of them.
        seen = set()
        stack = [next(iter(cells))]
        while stack:
            j, i = stack.pop()
            if (j, i) in seen:
                continue
            seen.add((j, i))
            for dj in (-1, 0, 1):
                for di in (-1, 0, 1):
                    if (j + dj, i + di) in cells and (j + dj, i + di) not in seen:
                        stack.append((j + dj, i + di))
        assert seen == cells


class TestSearchRegion:
    def test_contains_and_boundary(self):
        region = SearchRegion.rectangle(0.0, 0.0, 10.0, 5.0)
        assert region.contains(5.0, 2.5)
        assert region.contains(0.0, 2.5)  # boundary counts as inside
        assert not region.contains(11.0, 2.5)

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            SearchRegion(np.array([[0, 0], [1, 1], [2, 2]]))  # zero area
        bowtie = np.array([[0, 0], [4, 4], [4, 0], [0, 3]])
        with pytest.raises(ValueError, match="simple"):
            SearchRegion(bowtie)


class TestCenterline:
    def test_tangent_of_nearest_segment(self):
        cl = Centerline(np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 10.0]]))
        assert cl.tangent_near(5.0, 1.0) == (1.0, 0.0)
        assert cl.tangent_near(10.5, 8.0) == (0.0, 1.0)

    def test_rejects_duplicate_points(self):
        with pytest.raises(ValueError):
            Centerline(np.array([[0.0, 0.0], [0.0, 0.0]]))
