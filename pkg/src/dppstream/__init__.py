"""Small-cell adaptive streaming simulator driven by backlog-aware control.

The library decomposes each slot's decisions into admission control (which
helper, which quality mode), max-weight transmission scheduling, and a
per-user auxiliary variable that steers long-run quality; the simulator wires
those into a deterministic slot loop over a geometric helper/user topology
with Rayleigh-fading link capacities.
"""

from .channel import (
    CapacityEstimator,
    ergodic_capacity,
    ergodic_capacity_no_interference_closedform,
    gain_matrix,
    link_capacities,
)
from .config import (
    ChannelConfig,
    ConfigError,
    ExperimentSpec,
    MobilityConfig,
    SimConfig,
    TopologyConfig,
    VideoConfig,
    parse_config,
    spec_from_manifest,
)
from .control import (
    AdmissionDecision,
    AuxVar,
    ControlAction,
    DppConfig,
    InfeasibleActionError,
    ScheduleDecision,
    TransmissionQueue,
    VirtualQueue,
    admit,
    aux_update,
    dpp_objective,
    schedule,
    update_queue,
    update_virtual,
)
from .engine import (
    MetricsLog,
    NetworkState,
    Simulation,
    UserSummary,
    association_changes,
    backlog_windows,
    quality_deciles,
    run,
    summarize,
)
from .output import OutputBundle, emit_quality_cdf, run_experiment
from .playback import (
    PlaybackBuffer,
    PlaybackEvent,
    PlaybackMetrics,
    PlaybackPolicy,
    metrics,
    on_delivery,
    step,
)
from .topology import (
    HelperNode,
    NetworkGraph,
    Position,
    UserNode,
    advance_mobility,
    build_grid_topology,
    neighborhood,
    pathloss,
)
from .video import (
    ChunkProfile,
    QualityBounds,
    QualityMode,
    TraceError,
    VideoProfile,
    chunk_profile,
    dump_trace,
    load_trace,
    quality_bounds,
    synth_vbr,
)

__version__ = "0.1.0"
