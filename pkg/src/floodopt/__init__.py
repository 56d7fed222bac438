"""Shallow-water flood simulation over raster terrain and dam placement search."""

from .core import (
    FlowState,
    Hydrograph,
    PhysicsParams,
    SimGrid,
    SourceField,
    hydrograph_at,
    validate_grid,
)
from .gauge import (
    GaugeLine,
    GaugeObserver,
    GaugeRecord,
    accumulate,
    accumulate_flux,
    instantaneous_discharge,
    rasterize_gauge,
)
from .optimize import (
    DamPlacementObjective,
    FunctionObjective,
    OptimizerState,
    ProbeRule,
    StoppingRule,
    ascend,
    gradient,
    map_objective,
)
from .solver import (
    SolverConfig,
    StepReport,
    apply_coriolis,
    apply_friction,
    apply_sources,
    compute_fluxes,
    run,
    stable_dt,
    step,
)
from .terrain import (
    Centerline,
    ChannelBranchParams,
    DamSpec,
    SearchRegion,
    rasterize_dam,
    read_dem,
    synth_channel_with_branch,
)

__version__ = "0.1.0"
