import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floodopt.core import FlowState, Hydrograph, PhysicsParams, SourceField
from floodopt.errors import DomainError, NumericError
from floodopt.solver import (
    SolverConfig,
    apply_coriolis,
    apply_friction,
    apply_sources,
    compute_fluxes,
    run,
    stable_dt,
    step,
)

from conftest import channel_1d, make_grid, state_from_depth

G = 9.81


def lake_setup(seed=3, ny=16, nx=16, surface=3.0, bump=5.0):
    rng = np.random.default_rng(seed)
    grid = make_grid(rng.uniform(0.0, bump, (ny, nx)))
    return grid, FlowState.at_rest(grid, surface)


class TestComputeFluxes:
    @pytest.mark.parametrize("order", [1, 2])
    def test_lake_at_rest_zero_updates(self, order):
        grid, state = lake_setup()
        cfg = SolverConfig(order=order, boundary="closed")
        ff = compute_fluxes(grid, state, cfg)
        assert np.abs(ff.rhs[0]).max() < 1e-15
        assert np.abs(ff.rhs[1]).max() < 1e-12
        assert np.abs(ff.rhs[2]).max() < 1e-12

    def test_uniform_flow_mass_flux_exact(self):
        grid = channel_1d(12, 50.0, np.zeros(12), ny=6)
        h, u = 2.0, 1.5
        state = state_from_depth(h, grid, u=u)
        cfg = SolverConfig(boundary="closed")
        ff = compute_fluxes(grid, state, cfg)
        # Interior x-faces carry exactly u*H*dy.
        interior = ff.fx[0][2:-2, 2:-2]
        assert (interior == u * h * grid.dy).all()

    def test_dry_dry_faces_zero(self, flat_grid):
        state = FlowState.zeros(flat_grid)
        ff = compute_fluxes(flat_grid, state, SolverConfig())
        assert (ff.fx == 0.0).all() and (ff.fy == 0.0).all()
        assert (ff.rhs == 0.0).all()

    def test_non_finite_state_names_cell(self, flat_grid):
        state = FlowState.zeros(flat_grid)
        state.h[2, 5] = np.nan
        with pytest.raises(NumericError, match=r"\(2, 5\)"):
            compute_fluxes(flat_grid, state, SolverConfig())


class TestFriction:
    def test_rest_unchanged(self, flat_grid):
        state = state_from_depth(1.0, flat_grid)
        out = apply_friction(state, flat_grid, dt=10.0, g=G)
        assert (out.hu == 0.0).all() and (out.hv == 0.0).all()

    def test_chezy_manning_force_value(self, flat_grid):
        # H=1, n=0.02, u=1: force = -(1/2)*1*1*(2*9.81*0.0004) = -0.0039240
        state = state_from_depth(1.0, flat_grid, u=1.0)
        dt = 1e-6
        out = apply_friction(state, flat_grid, dt=dt, g=9.81)
        force = (out.hu[0, 0] - state.hu[0, 0]) / dt
        assert force == pytest.approx(-0.0039240, abs=1e-8)

    def test_large_dt_decays_without_sign_flip(self, flat_grid):
        state = state_from_depth(0.05, flat_grid, u=2.0, v=-1.0)
        out = apply_friction(state, flat_grid, dt=1e6, g=G)
        assert (np.sign(out.hu) == np.sign(state.hu)).all()
        assert np.abs(out.hu).max() < np.abs(state.hu).max()

    @given(
        h=st.floats(0.01, 50.0),
        u=st.floats(-20.0, 20.0),
        v=st.floats(-20.0, 20.0),
        dt=st.floats(1e-4, 1e5),
    )
    @settings(max_examples=60, deadline=None)
    def test_never_increases_magnitude_or_turns(self, h, u, v, dt):
        grid = make_grid(np.zeros((3, 3)))
        state = state_from_depth(h, grid, u=u, v=v)
        out = apply_friction(state, grid, dt=dt, g=G)
        before = np.hypot(state.hu, state.hv)
        after = np.hypot(out.hu, out.hv)
        assert (after <= before + 1e-15).all()
        # Direction preserved: cross product zero and dot nonnegative.
        cross = state.hu * out.hv - state.hv * out.hu
        dot = state.hu * out.hu + state.hv * out.hv
        assert np.abs(cross).max() < 1e-9 * max(1.0, before.max() ** 2)
        assert (dot >= 0.0).all()


class TestCoriolis:
    def test_zero_latitude_identity(self, flat_grid):
        state = state_from_depth(2.0, flat_grid, u=1.0, v=-0.5)
        out = apply_coriolis(state, dt=100.0, omega_e=7.292e-5, latitude_deg=0.0)
        assert (out.hu == state.hu).all() and (out.hv == state.hv).all()

    def test_quarter_turn_at_pole(self, flat_grid):
        f = 2.0 * 7.292e-5
        state = state_from_depth(1.0, flat_grid, u=1.0)
        out = apply_coriolis(state, dt=np.pi / (2 * f), omega_e=7.292e-5,
                             latitude_deg=90.0)
        assert out.hu[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert out.hv[0, 0] == pytest.approx(-1.0, abs=1e-12)

    @given(
        u=st.floats(-10.0, 10.0), v=st.floats(-10.0, 10.0),
        dt=st.floats(0.1, 5000.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_norm_preserved(self, u, v, dt):
        grid = make_grid(np.zeros((3, 3)))
        state = state_from_depth(3.0, grid, u=u, v=v)
        out = apply_coriolis(state, dt=dt, omega_e=7.292e-5, latitude_deg=48.8)
        before = np.hypot(state.hu, state.hv)[0, 0]
        after = np.hypot(out.hu, out.hv)[0, 0]
        assert after == pytest.approx(before, rel=1e-12, abs=1e-300)


class TestSources:
    def test_zero_hydrograph_no_change(self, flat_grid):
        hg = Hydrograph.from_samples([(0.0, 0.0), (100.0, 0.0)], t_qs=0.0, t_qe=100.0)
        src = SourceField.from_cells([(0, 0)])
        state = FlowState.zeros(flat_grid)
        out, injected = apply_sources(state, src, hg, t=0.0, dt=10.0, grid=flat_grid)
        assert injected == 0.0
        assert (out.h == 0.0).all()

    def test_single_cell_depth_increase(self, flat_grid):
        # Q=1000 m^3/s for 10 s into one 50x50 cell: depth rises 4 m.
        hg = Hydrograph.from_samples([(0.0, 1000.0), (100.0, 1000.0)],
                                     t_qs=0.0, t_qe=100.0)
        src = SourceField.from_cells([(3, 4)])
        state = FlowState.zeros(flat_grid)
        out, injected = apply_sources(state, src, hg, t=0.0, dt=10.0, grid=flat_grid)
        assert injected == 10000.0
        assert out.h[3, 4] == pytest.approx(4.0)
        assert out.h.sum() == pytest.approx(4.0)

    def test_fraction_split(self, flat_grid):
        hg = Hydrograph.from_samples([(0.0, 100.0), (100.0, 100.0)],
                                     t_qs=0.0, t_qe=100.0)
        src = SourceField.from_cells([(0, 0), (1, 1)], weights=[0.25, 0.75])
        state = FlowState.zeros(flat_grid)
        out, injected = apply_sources(state, src, hg, t=0.0, dt=10.0, grid=flat_grid)
        assert out.h[1, 1] == pytest.approx(3.0 * out.h[0, 0])

    def test_out_of_span_raises(self, flat_grid):
        hg = Hydrograph.from_samples([(0.0, 1.0), (10.0, 1.0)], t_qs=0.0, t_qe=10.0)
        src = SourceField.from_cells([(0, 0)])
        with pytest.raises(DomainError):
            apply_sources(FlowState.zeros(flat_grid), src, hg, t=5.0, dt=10.0,
                          grid=flat_grid)

    def test_injection_velocity(self, flat_grid):
        hg = Hydrograph.from_samples([(0.0, 100.0), (100.0, 100.0)],
                                     t_qs=0.0, t_qe=100.0)
        src = SourceField.from_cells([(0, 0)], u_inject=2.0)
        out, _ = apply_sources(FlowState.zeros(flat_grid), src, hg, t=0.0, dt=10.0,
                               grid=flat_grid)
        assert out.hu[0, 0] == pytest.approx(out.h[0, 0] * 2.0)


class TestStableDt:
    def test_single_wet_cell_formula(self, flat_grid, quiet_physics):
        # cfl=0.5, H=10, dx=50: dt = 0.5*50/sqrt(98.1) = 2.5240...
        state = FlowState.zeros(flat_grid)
        state.h[4, 4] = 10.0
        phys = PhysicsParams(cfl=0.5)
        cfg = SolverConfig(physics=phys)
        assert stable_dt(flat_grid, state, cfg) == pytest.approx(2.52409708, abs=1e-4)

    def test_all_dry_gives_max_dt(self, flat_grid):
        cfg = SolverConfig(max_dt=17.0)
        assert stable_dt(flat_grid, FlowState.zeros(flat_grid), cfg) == 17.0

    def test_deeper_is_smaller(self, flat_grid):
        cfg = SolverConfig()
        s1 = state_from_depth(2.0, flat_grid)
        s2 = state_from_depth(4.0, flat_grid)
        assert stable_dt(flat_grid, s2, cfg) < stable_dt(flat_grid, s1, cfg)


class TestStep:
    def test_lake_at_rest_fixed_point(self):
        grid, state = lake_setup()
        cfg = SolverConfig(boundary="closed")
        new, report = step(grid, state, None, None, cfg)
        assert np.abs(new.h - state.h).max() < 1e-12
        assert report.dt_used > 0

    def test_closed_basin_conserves_volume(self):
        grid = make_grid(np.zeros((12, 12)), dx=10.0)
        x = grid.x_centers()
        h = 2.0 + 0.5 * np.tile((x - x.mean()) / x.max(), (12, 1))
        state = FlowState(h, np.zeros((12, 12)), np.zeros((12, 12)), 0.0)
        cfg = SolverConfig(boundary="closed")
        v0 = state.volume(grid)
        for _ in range(300):
            state, report = step(grid, state, None, None, cfg)
        assert state.volume(grid) == pytest.approx(v0, rel=1e-10)
        assert state.h.min() >= 0.0

    def test_mass_balance_identity_with_sources(self):
        grid = make_grid(np.zeros((10, 10)), dx=10.0)
        hg = Hydrograph.from_samples([(0.0, 40.0), (1000.0, 80.0)],
                                     t_qs=0.0, t_qe=1000.0)
        src = SourceField.from_cells([(5, 5)])
        state = state_from_depth(0.5, grid)
        cfg = SolverConfig(boundary="waterfall")
        for _ in range(40):
            v0 = state.volume(grid)
            state, report = step(grid, state, src, hg, cfg)
            v1 = state.volume(grid)
            balance = (v1 - v0) - (report.injected_volume - report.outflow_volume)
            assert abs(balance) <= 1e-10 * max(v0, v1)
            assert report.outflow_volume >= 0.0

    def test_dry_cells_with_dry_neighbors_untouched(self):
        bed = np.zeros((10, 10))
        bed[:, 6:] = 10.0  # high dry plateau
        grid = make_grid(bed)
        state = FlowState.at_rest(grid, 2.0)
        state.hu[:, :3] = 1.0  # some motion in the wet pool
        cfg = SolverConfig(boundary="closed")
        new, _ = step(grid, state, None, None, cfg)
        # Cells on the plateau interior have only dry neighbors.
        assert (new.h[:, 7:] == 0.0).all()
        assert (new.hu[:, 7:] == 0.0).all() and (new.hv[:, 7:] == 0.0).all()

    def test_depth_positivity_on_draining(self):
        bed = np.zeros((6, 20))
        grid = make_grid(bed, dx=10.0)
        h = np.zeros((6, 20))
        h[:, :5] = 1.0  # block of water spreading over dry bed, open edges
        state = FlowState(h, np.zeros_like(h), np.zeros_like(h), 0.0)
        cfg = SolverConfig(boundary="waterfall")
        for _ in range(200):
            state, report = step(grid, state, None, None, cfg)
            assert state.h.min() >= 0.0
        assert np.isfinite(state.h).all()

    def test_max_froude_reported(self):
        grid = channel_1d(100, 1.0, np.zeros(100))
        x = grid.x_centers()
        h = np.tile(np.where(x < 50.0, 1.0, 1e-12), (3, 1))
        state = FlowState(h, np.zeros_like(h), np.zeros_like(h), 0.0)
        phys = PhysicsParams(cfl=0.45, h_dry=1e-6, latitude_deg=0.0)
        cfg = SolverConfig(physics=phys, boundary="closed")
        froude = 0.0
        for _ in range(30):
            state, report = step(grid, state, None, None, cfg)
            froude = max(froude, report.max_froude)
        assert froude > 1.0  # dry-bed front is supercritical


class TestRun:
    def test_zero_duration_returns_initial(self, flat_grid):
        state = state_from_depth(1.0, flat_grid, t=5.0)
        calls = []
        out = run(flat_grid, state, None, None, SolverConfig(), 5.0,
                  observers=[lambda s, r: calls.append(s.t)])
        assert out is state
        assert calls == []

    def test_observers_see_increasing_time_and_exact_landing(self, flat_grid):
        state = state_from_depth(1.0, flat_grid)
        times = []
        out = run(flat_grid, state, None, None, SolverConfig(boundary="closed"),
                  10.0, observers=[lambda s, r: times.append(s.t)])
        assert all(t1 < t2 for t1, t2 in zip(times, times[1:]))
        assert times[-1] == 10.0
        assert out.t == 10.0

    def test_t_end_before_start_raises(self, flat_grid):
        state = state_from_depth(1.0, flat_grid, t=5.0)
        with pytest.raises(DomainError):
            run(flat_grid, state, None, None, SolverConfig(), 4.0)
