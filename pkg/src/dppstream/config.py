"""Experiment configuration: INI-style key-value files, validation, manifests.

The file has one flat section per subsystem; every key has a default, so an
empty file is a valid experiment. Validation collects every failure before
raising, so a bad file is reported in one shot.
"""
from __future__ import annotations

import configparser
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .control import DppConfig, UTILITIES
from .playback import PlaybackPolicy


class ConfigError(ValueError):
    """Invalid experiment configuration; .errors lists every failure."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class TopologyConfig:
    area_side: float = 400.0
    cells_per_side: int = 5
    users_per_cell: int = 2
    service_radius: float = 60.0
    pathloss_delta: float = 40.0
    pathloss_alpha: float = 3.5


@dataclass(frozen=True)
class MobilityConfig:
    """One user re-routed onto a waypoint trajectory of (x, y, slot) triples."""

    user: int
    waypoints: tuple[tuple[float, float, float], ...]


@dataclass(frozen=True)
class ChannelConfig:
    center_snr_db: float = 20.0
    capacity_samples: int = 4000


@dataclass(frozen=True)
class VideoConfig:
    source: str = "synth"  # synth | trace
    chunks: int = 800
    # (length, mode_count, base_size_bits) per segment
    segments: tuple[tuple[int, int, int], ...] = (
        (200, 8, 200_000),
        (400, 4, 200_000),
        (200, 8, 200_000),
    )
    trace_path: str | None = None
    random_offsets: bool = True


@dataclass(frozen=True)
class SimConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    mobility: MobilityConfig | None = None
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    video: VideoConfig = field(default_factory=VideoConfig)
    control: DppConfig = field(default_factory=lambda: DppConfig(v=1e12))
    playback: PlaybackPolicy = field(default_factory=PlaybackPolicy)
    slots: int = 1000
    symbols_per_slot: int = 9_000_000  # 18 MHz bandwidth x 0.5 s slots
    seed: int = 1
    check_invariants: bool = True
    collect_edge_trace: bool = False
    # Start virtual queues at their equilibrium scale V / d_max instead of 0.
    # Theta moves by at most the quality range per slot, so from a cold start
    # it cannot reach the V-scale operating point within any practical
    # horizon and the control parameter would have no effect on the run.
    theta_warm_start: bool = True


@dataclass(frozen=True)
class ExperimentSpec:
    sim: SimConfig = field(default_factory=SimConfig)
    v_sweep: tuple[float, ...] = (2e12, 4e12, 6e12, 8e12, 1e13)
    out_dir: str = "runs"
    slot_trace: bool = False
    figures: bool = True
    association_user: int | None = None  # None = mobile user if any, else 0


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("on", "true", "yes", "1"):
        return True
    if value in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {raw!r}")


def _parse_triples(raw: str, what: str):
    triples = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"{what} entries must be colon-separated triples: {item!r}")
        triples.append(tuple(float(p) for p in parts))
    if not triples:
        raise ValueError(f"{what} must not be empty")
    return triples


def _parse_floats(raw: str):
    values = [float(item) for item in raw.split(",") if item.strip()]
    if not values:
        raise ValueError("expected a comma-separated list of numbers")
    return values


# section -> key -> (target path, parser)
_SCHEMA = {
    "topology": {
        "area_side_m": ("topology.area_side", float),
        "cells_per_side": ("topology.cells_per_side", int),
        "users_per_cell": ("topology.users_per_cell", int),
        "service_radius_m": ("topology.service_radius", float),
        "pathloss_delta_m": ("topology.pathloss_delta", float),
        "pathloss_alpha": ("topology.pathloss_alpha", float),
    },
    "mobility": {
        "user": ("mobility.user", int),
        "waypoints": ("mobility.waypoints", lambda raw: _parse_triples(raw, "waypoints")),
    },
    "channel": {
        "center_snr_db": ("channel.center_snr_db", float),
        "capacity_samples": ("channel.capacity_samples", int),
    },
    "video": {
        "source": ("video.source", str),
        "chunks": ("video.chunks", int),
        "segments": ("video.segments", lambda raw: _parse_triples(raw, "segments")),
        "trace_path": ("video.trace_path", str),
        "random_offsets": ("video.random_offsets", _parse_bool),
    },
    "control": {
        "v": ("control.v", float),
        "utility": ("control.utility", str),
        "warm_start": ("control.warm_start", _parse_bool),
    },
    "playback": {
        "prebuffer_chunks": ("playback.prebuffer_target", int),
        "rebuffer_chunks": ("playback.rebuffer_target", int),
        "skip_window": ("playback.skip_window", int),
        "skip_gain": ("playback.skip_gain", int),
    },
    "sim": {
        "slots": ("sim.slots", int),
        "symbols_per_slot": ("sim.symbols_per_slot", int),
        "seed": ("sim.seed", int),
        "check_invariants": ("sim.check_invariants", _parse_bool),
    },
    "experiment": {
        "v_sweep": ("experiment.v_sweep", _parse_floats),
        "out_dir": ("experiment.out_dir", str),
        "slot_trace": ("experiment.slot_trace", _parse_bool),
        "figures": ("experiment.figures", _parse_bool),
        "association_user": ("experiment.association_user", str),
    },
}


def _read_file(path, errors) -> dict:
    """Flatten the INI file into {target: parsed value}, collecting errors."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as handle:
            parser.read_file(handle, source=str(path))
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    except configparser.Error as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc

    values: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            errors.append(f"unknown section [{section}]")
            continue
        for key, raw in parser[section].items():
            entry = _SCHEMA[section].get(key)
            if entry is None:
                errors.append(f"unknown key {key!r} in [{section}]")
                continue
            target, parse = entry
            try:
                values[target] = parse(raw)
            except ValueError as exc:
                errors.append(f"[{section}] {key}: {exc}")
    return values


def _apply_overrides(values: dict, overrides, errors) -> None:
    """CLI flags land on top of file values."""
    handlers = {
        "seed": ("sim.seed", int),
        "slots": ("sim.slots", int),
        "v": ("experiment.v_sweep", _parse_floats),
        "out": ("experiment.out_dir", str),
        "trace": ("experiment.slot_trace", _parse_bool),
        "plots": ("experiment.figures", _parse_bool),
    }
    for name, raw in overrides.items():
        if raw is None:
            continue
        if name not in handlers:
            errors.append(f"unknown override {name!r}")
            continue
        target, parse = handlers[name]
        try:
            values[target] = parse(str(raw))
        except ValueError as exc:
            errors.append(f"override {name}: {exc}")


def _build_spec(values: dict, errors) -> ExperimentSpec:
    topo = TopologyConfig(
        area_side=values.get("topology.area_side", 400.0),
        cells_per_side=values.get("topology.cells_per_side", 5),
        users_per_cell=values.get("topology.users_per_cell", 2),
        service_radius=values.get("topology.service_radius", 60.0),
        pathloss_delta=values.get("topology.pathloss_delta", 40.0),
        pathloss_alpha=values.get("topology.pathloss_alpha", 3.5),
    )
    mobility = None
    if "mobility.user" in values or "mobility.waypoints" in values:
        waypoints = values.get("mobility.waypoints")
        if waypoints is None:
            errors.append("[mobility] requires waypoints")
        else:
            mobility = MobilityConfig(
                user=values.get("mobility.user", 0),
                waypoints=tuple(tuple(w) for w in waypoints),
            )
    chan = ChannelConfig(
        center_snr_db=values.get("channel.center_snr_db", 20.0),
        capacity_samples=values.get("channel.capacity_samples", 4000),
    )
    segments = values.get("video.segments")
    if segments is not None:
        segments = tuple(
            (int(length), int(modes), int(round(base_kbits * 1000)))
            for length, modes, base_kbits in segments
        )
    video = VideoConfig(
        source=values.get("video.source", "synth"),
        chunks=values.get("video.chunks", 800),
        segments=segments if segments is not None else VideoConfig.segments,
        trace_path=values.get("video.trace_path"),
        random_offsets=values.get("video.random_offsets", True),
    )
    v = values.get("control.v", 1e12)
    utility = values.get("control.utility", "log")
    if v <= 0:
        errors.append("[control] v must be positive")
        v = 1.0
    if utility not in UTILITIES:
        errors.append(f"[control] utility must be one of {UTILITIES}")
        utility = "log"
    playback_kwargs = {}
    for key, name in (
        ("playback.prebuffer_target", "prebuffer_chunks"),
        ("playback.rebuffer_target", "rebuffer_chunks"),
        ("playback.skip_window", "skip_window"),
        ("playback.skip_gain", "skip_gain"),
    ):
        if key in values:
            playback_kwargs[key.split(".")[1]] = values[key]
    try:
        policy = PlaybackPolicy(**playback_kwargs)
    except ValueError as exc:
        errors.append(f"[playback] {exc}")
        policy = PlaybackPolicy()

    sim = SimConfig(
        topology=topo,
        mobility=mobility,
        channel=chan,
        video=video,
        control=DppConfig(v=v, utility=utility),
        playback=policy,
        slots=values.get("sim.slots", 1000),
        symbols_per_slot=values.get("sim.symbols_per_slot", 9_000_000),
        seed=values.get("sim.seed", 1),
        check_invariants=values.get("sim.check_invariants", True),
        theta_warm_start=values.get("control.warm_start", True),
    )
    assoc_raw = values.get("experiment.association_user", "auto")
    association_user = None
    if isinstance(assoc_raw, str) and assoc_raw.strip() != "auto":
        try:
            association_user = int(assoc_raw)
        except ValueError:
            errors.append("[experiment] association_user must be an index or 'auto'")
    return ExperimentSpec(
        sim=sim,
        v_sweep=tuple(values.get("experiment.v_sweep", ExperimentSpec.v_sweep)),
        out_dir=values.get("experiment.out_dir", "runs"),
        slot_trace=values.get("experiment.slot_trace", False),
        figures=values.get("experiment.figures", True),
        association_user=association_user,
    )


def validate_spec(spec: ExperimentSpec, errors) -> None:
    sim = spec.sim
    topo = sim.topology
    if topo.area_side <= 0:
        errors.append("[topology] area_side_m must be positive")
    if topo.cells_per_side < 1:
        errors.append("[topology] cells_per_side must be at least 1")
    if topo.users_per_cell < 0:
        errors.append("[topology] users_per_cell must be non-negative")
    if topo.service_radius <= 0:
        errors.append("[topology] service_radius_m must be positive")
    if topo.pathloss_delta <= 0:
        errors.append("[topology] pathloss_delta_m must be positive")
    if topo.pathloss_alpha <= 0:
        errors.append("[topology] pathloss_alpha must be positive")
    if sim.channel.capacity_samples < 1:
        errors.append("[channel] capacity_samples must be at least 1")
    if sim.video.source not in ("synth", "trace"):
        errors.append("[video] source must be synth or trace")
    if sim.video.source == "trace" and not sim.video.trace_path:
        errors.append("[video] trace_path required when source = trace")
    if sim.video.source == "trace" and sim.video.trace_path:
        if not Path(sim.video.trace_path).is_file():
            errors.append(f"[video] trace file not found: {sim.video.trace_path}")
    if sim.video.source == "synth":
        if sum(s[0] for s in sim.video.segments) != sim.video.chunks:
            errors.append("[video] segment lengths must sum to chunks")
    if sim.slots < 1:
        errors.append("[sim] slots must be at least 1")
    if sim.symbols_per_slot < 1:
        errors.append("[sim] symbols_per_slot must be at least 1")
    if sim.seed < 0:
        errors.append("[sim] seed must be non-negative")
    num_users = topo.cells_per_side ** 2 * topo.users_per_cell
    if sim.mobility is not None:
        mob = sim.mobility
        if not 0 <= mob.user < max(num_users, 1):
            errors.append(f"[mobility] user {mob.user} outside 0..{num_users - 1}")
        times = [w[2] for w in mob.waypoints]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            errors.append("[mobility] waypoint times must be strictly increasing")
        if any(t < 0 for t in times):
            errors.append("[mobility] waypoint times must be non-negative")
        for x, y, _ in mob.waypoints:
            if not (0 <= x <= topo.area_side and 0 <= y <= topo.area_side):
                errors.append(f"[mobility] waypoint ({x}, {y}) outside the area")
                break
    if not spec.v_sweep:
        errors.append("[experiment] v_sweep must not be empty")
    if any(v <= 0 for v in spec.v_sweep):
        errors.append("[experiment] v_sweep values must be positive")
    if spec.association_user is not None and not 0 <= spec.association_user < max(num_users, 1):
        errors.append(f"[experiment] association_user {spec.association_user} out of range")


def parse_config(path, overrides=None) -> ExperimentSpec:
    """Parse and validate a config file, then apply flag overrides.

    Raises ConfigError listing every problem found.
    """
    errors: list[str] = []
    values = _read_file(path, errors)
    if overrides:
        _apply_overrides(values, overrides, errors)
    spec = _build_spec(values, errors)
    validate_spec(spec, errors)
    if errors:
        raise ConfigError(errors)
    return spec


def spec_to_dict(spec: ExperimentSpec) -> dict:
    return asdict(spec)


def spec_from_dict(data: dict) -> ExperimentSpec:
    sim = data["sim"]
    mobility = sim.get("mobility")
    spec = ExperimentSpec(
        sim=SimConfig(
            topology=TopologyConfig(**sim["topology"]),
            mobility=MobilityConfig(
                user=mobility["user"],
                waypoints=tuple(tuple(w) for w in mobility["waypoints"]),
            )
            if mobility
            else None,
            channel=ChannelConfig(**sim["channel"]),
            video=VideoConfig(
                source=sim["video"]["source"],
                chunks=sim["video"]["chunks"],
                segments=tuple(tuple(s) for s in sim["video"]["segments"]),
                trace_path=sim["video"]["trace_path"],
                random_offsets=sim["video"]["random_offsets"],
            ),
            control=DppConfig(**sim["control"]),
            playback=PlaybackPolicy(**sim["playback"]),
            slots=sim["slots"],
            symbols_per_slot=sim["symbols_per_slot"],
            seed=sim["seed"],
            check_invariants=sim["check_invariants"],
            collect_edge_trace=sim["collect_edge_trace"],
            theta_warm_start=sim["theta_warm_start"],
        ),
        v_sweep=tuple(data["v_sweep"]),
        out_dir=data["out_dir"],
        slot_trace=data["slot_trace"],
        figures=data["figures"],
        association_user=data["association_user"],
    )
    errors: list[str] = []
    validate_spec(spec, errors)
    if errors:
        raise ConfigError(errors)
    return spec


def spec_from_manifest(path) -> ExperimentSpec:
    """Rebuild the spec recorded by a run manifest; re-running it reproduces
    the run's CSV outputs byte for byte."""
    with open(path) as handle:
        manifest = json.load(handle)
    return spec_from_dict(manifest["spec"])


def single_run_spec(spec: ExperimentSpec, v: float) -> ExperimentSpec:
    """Restrict a sweep spec to one V value (used per sweep point)."""
    return replace(
        spec,
        sim=replace(spec.sim, control=replace(spec.sim.control, v=v)),
        v_sweep=(v,),
    )
