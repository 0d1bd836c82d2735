"""Slot-loop orchestration: state refresh, control, queues, playback, metrics.

Each slot runs a fixed phase order so that service and arrivals both act on
the backlog snapshot Q(t): (1) refresh mobility, gains and capacities,
(2) snapshot queues, (3) aux + admission per user against the snapshot,
(4) scheduling and FIFO drain per helper against the snapshot, (5) append the
slot's admissions, (6) playback, (7) virtual-queue updates, (8) metrics. The
whole run is deterministic for a given seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import playback as pb
from .channel import CapacityEstimator, gain_matrix, link_capacities
from .config import ConfigError, SimConfig, validate_spec, ExperimentSpec
from .control import (
    AdmissionDecision,
    TransmissionQueue,
    admit,
    aux_update,
    phi,
    schedule,
    update_queue,
    update_virtual,
)
from .topology import (
    NetworkGraph,
    Position,
    advance_mobility,
    build_grid_topology,
    neighborhood,
)
from .video import VideoProfile, chunk_profile, load_trace, quality_bounds, synth_vbr


@dataclass(frozen=True)
class NetworkState:
    """The slot's observable state: positions, gains, edge capacities, and the
    chunk profile each user requests this slot."""

    slot: int
    positions: tuple[Position, ...]
    neighborhoods: tuple[frozenset, ...]
    capacities: dict
    profiles: tuple


@dataclass
class MetricsLog:
    """Append-only per-slot records plus final playback counters; every
    summary is recomputable from the slot records."""

    num_helpers: int
    num_users: int
    slots: int
    v: float
    utility: str
    # per user, indexed [u][t]
    admitted_helper: list = field(default_factory=list)  # -1 when deferred
    admitted_mode: list = field(default_factory=list)  # 0 when deferred
    admitted_bits: list = field(default_factory=list)
    admitted_quality: list = field(default_factory=list)  # nan when deferred
    gamma: list = field(default_factory=list)  # nan when paused
    theta: list = field(default_factory=list)  # snapshot at slot start
    buffer_run: list = field(default_factory=list)  # contiguous run after step
    playhead: list = field(default_factory=list)
    delivered: list = field(default_factory=list)  # per user: [(slot, chunk)]
    # per slot
    total_backlog: list = field(default_factory=list)
    # optional slot trace rows:
    # (t, helper, user, backlog, served, admitted, mode, gamma, theta, paused)
    edge_rows: list = field(default_factory=list)
    # final per-user playback counters
    playback: list = field(default_factory=list)


@dataclass(frozen=True)
class UserSummary:
    user: int
    avg_quality: float | None
    utility: float | None
    stall_slots: int
    skipped: int
    prebuffer_slots: int


class Simulation:
    """One experiment run. graph, profile, or fixed link capacities can be
    injected to bypass the builders (small deterministic test instances)."""

    def __init__(
        self,
        config: SimConfig,
        graph: NetworkGraph | None = None,
        profile: VideoProfile | None = None,
        fixed_capacities: dict | None = None,
    ):
        errors: list[str] = []
        validate_spec(ExperimentSpec(sim=config, v_sweep=(config.control.v,)), errors)
        if errors:
            raise ConfigError(errors)
        self.config = config
        topo = config.topology
        tx_power = 10.0 ** (config.channel.center_snr_db / 10.0)
        if graph is None:
            graph = build_grid_topology(
                topo.area_side,
                topo.cells_per_side,
                topo.users_per_cell,
                topo.service_radius,
                config.seed,
                tx_power=tx_power,
                pathloss_delta=topo.pathloss_delta,
                pathloss_alpha=topo.pathloss_alpha,
            )
        if config.mobility is not None and graph.users:
            mob = config.mobility
            traj = tuple((Position(x, y), t) for x, y, t in mob.waypoints)
            users = list(graph.users)
            users[mob.user] = users[mob.user].with_trajectory(traj)
            graph = dataclass_replace_users(graph, users)
        if profile is None:
            profile = self._build_profile()
        if config.video.random_offsets and profile.cyclic:
            # stream tag 4: per-user session start offsets
            rng = np.random.default_rng(np.random.SeedSequence((int(config.seed), 4)))
            offsets = rng.integers(0, len(profile.chunks), size=len(graph.users))
            users = [u.with_offset(int(off)) for u, off in zip(graph.users, offsets)]
            graph = dataclass_replace_users(graph, users)
        self.graph = graph
        self.profile = profile
        self.bounds = quality_bounds(profile)
        self.powers = np.asarray([h.tx_power for h in graph.helpers])
        self.est = CapacityEstimator(
            num_samples=config.channel.capacity_samples, seed=config.seed
        )
        self.n = config.symbols_per_slot
        self.queues: dict[tuple[int, int], TransmissionQueue] = {}
        theta0 = (
            config.control.v / self.bounds.d_max if config.theta_warm_start else 0.0
        )
        self.theta = [theta0] * len(graph.users)
        self.buffers = [pb.PlaybackBuffer() for _ in graph.users]
        self._admitted_cum: dict[tuple[int, int], int] = {}
        self._drained_cum: dict[tuple[int, int], int] = {}
        self._static_users = [u.id for u in graph.users if not u.mobile]
        self._mobile_users = [u.id for u in graph.users if u.mobile]
        self._fixed_caps = fixed_capacities
        self._static_caps: dict[tuple[int, int], float] = {}
        self._static_hoods: dict[int, frozenset] = {}
        if fixed_capacities is None and graph.users:
            gains0 = gain_matrix(graph, 0)
            self._static_caps = link_capacities(
                graph, gains0, self.powers, self.est, t=0, users=self._static_users
            )
        for uid in self._static_users:
            self._static_hoods[uid] = neighborhood(graph, uid, 0)
        self.t = 0
        self.log = MetricsLog(
            num_helpers=len(graph.helpers),
            num_users=len(graph.users),
            slots=config.slots,
            v=config.control.v,
            utility=config.control.utility,
        )
        for _ in graph.users:
            for arr in (
                self.log.admitted_helper,
                self.log.admitted_mode,
                self.log.admitted_bits,
                self.log.admitted_quality,
                self.log.gamma,
                self.log.theta,
                self.log.buffer_run,
                self.log.playhead,
            ):
                arr.append([])
            self.log.delivered.append([])

    def _build_profile(self) -> VideoProfile:
        video = self.config.video
        if video.source == "trace":
            return load_trace(video.trace_path)
        return synth_vbr(video.chunks, video.segments, self.config.seed)

    def _network_state(self, t: int) -> NetworkState:
        graph = self.graph
        positions = tuple(advance_mobility(u, t) for u in graph.users)
        hoods = []
        caps = dict(self._static_caps)
        if self._fixed_caps is not None:
            caps = dict(self._fixed_caps)
            for u in graph.users:
                hoods.append(frozenset(h for h, uid in caps if uid == u.id))
        else:
            mobile_caps = {}
            if self._mobile_users:
                gains = gain_matrix(graph, t)
                mobile_caps = link_capacities(
                    graph, gains, self.powers, self.est, t=t, users=self._mobile_users
                )
            caps.update(mobile_caps)
            for u in graph.users:
                if u.mobile:
                    hoods.append(neighborhood(graph, u.id, t))
                else:
                    hoods.append(self._static_hoods[u.id])
        profiles = tuple(
            chunk_profile(self.profile, u.start_offset, t) for u in graph.users
        )
        return NetworkState(
            slot=t,
            positions=positions,
            neighborhoods=tuple(hoods),
            capacities=caps,
            profiles=profiles,
        )

    def step_slot(self) -> NetworkState:
        t = self.t
        cfg = self.config.control
        check = self.config.check_invariants

        # (1) refresh network state, (2) snapshot queues
        state = self._network_state(t)
        snapshot = {edge: q.backlog_bits for edge, q in self.queues.items()}
        theta_snap = list(self.theta)

        # (3) aux + admission per user, reading only the snapshot
        admissions: dict[int, AdmissionDecision] = {}
        gammas: dict[int, float] = {}
        for u in self.graph.users:
            uid = u.id
            eligible = state.neighborhoods[uid]
            if not eligible:
                admissions[uid] = AdmissionDecision.deferral()
                continue
            gammas[uid] = aux_update(theta_snap[uid], cfg, self.bounds).gamma
            backlogs = {h: snapshot.get((h, uid), 0) for h in eligible}
            admissions[uid] = admit(uid, backlogs, theta_snap[uid], state.profiles[uid])

        # (4) scheduling per helper against the snapshot
        served: dict[tuple[int, int], int] = {}
        for h in self.graph.helpers:
            hid = h.id
            users_h = sorted(
                uid for (hh, uid) in state.capacities if hh == hid
            )
            if not users_h:
                continue
            decision = schedule(
                hid,
                {uid: snapshot.get((hid, uid), 0) for uid in users_h},
                {uid: state.capacities[(hid, uid)] for uid in users_h},
                self.n,
            )
            if decision.served_user is not None:
                served[(hid, decision.served_user)] = decision.bits_served

        # (5) drain and append on each touched edge
        arrivals: dict[tuple[int, int], list] = {}
        for uid, dec in admissions.items():
            if not dec.deferred:
                arrivals.setdefault((dec.helper, uid), []).append((t, dec.size_bits))
        delivered: dict[int, list[int]] = {}
        touched = sorted(set(served) | set(arrivals))
        for edge in touched:
            q = self.queues.setdefault(edge, TransmissionQueue())
            before = q.backlog_bits
            budget = served.get(edge, 0)
            q, done = update_queue(q, budget, arrivals.get(edge, []))
            arrived = sum(bits for _, bits in arrivals.get(edge, []))
            self._admitted_cum[edge] = self._admitted_cum.get(edge, 0) + arrived
            self._drained_cum[edge] = self._drained_cum.get(edge, 0) + min(budget, before)
            if done:
                delivered.setdefault(edge[1], []).extend(done)
            if check:
                expect = max(before - budget, 0) + arrived
                if q.backlog_bits != expect:
                    raise RuntimeError(
                        f"slot {t} edge {edge}: backlog {q.backlog_bits} != "
                        f"max({before} - {budget}, 0) + {arrived}"
                    )
                if self._admitted_cum[edge] != self._drained_cum[edge] + q.backlog_bits:
                    raise RuntimeError(f"slot {t} edge {edge}: bit conservation violated")
                if sum(rec[1] for rec in q.fifo) != q.backlog_bits:
                    raise RuntimeError(f"slot {t} edge {edge}: FIFO/backlog mismatch")

        # (6) playback
        for u in self.graph.users:
            uid = u.id
            for chunk in sorted(delivered.get(uid, [])):
                pb.on_delivery(self.buffers[uid], chunk)
                self.log.delivered[uid].append((t, chunk))
            pb.step(self.buffers[uid], self.config.playback, t)

        # (7) virtual queues; paused users carry theta through unchanged
        for u in self.graph.users:
            uid = u.id
            dec = admissions[uid]
            if dec.deferred:
                self.theta[uid] = update_virtual(theta_snap[uid], 0.0, 0.0)
            else:
                self.theta[uid] = update_virtual(
                    theta_snap[uid], gammas[uid], dec.quality
                )
            if check and self.theta[uid] < 0:
                raise RuntimeError(f"slot {t} user {uid}: negative virtual queue")

        # (8) metrics
        log = self.log
        for u in self.graph.users:
            uid = u.id
            dec = admissions[uid]
            log.admitted_helper[uid].append(-1 if dec.deferred else dec.helper)
            log.admitted_mode[uid].append(dec.mode)
            log.admitted_bits[uid].append(dec.size_bits)
            log.admitted_quality[uid].append(
                float("nan") if dec.deferred else dec.quality
            )
            log.gamma[uid].append(gammas.get(uid, float("nan")))
            log.theta[uid].append(theta_snap[uid])
            log.buffer_run[uid].append(self.buffers[uid].contiguous_run())
            log.playhead[uid].append(self.buffers[uid].playhead)
        log.total_backlog.append(sum(q.backlog_bits for q in self.queues.values()))
        if self.config.collect_edge_trace:
            rows = set(touched) | {e for e, b in snapshot.items() if b > 0}
            for edge in sorted(rows):
                hid, uid = edge
                dec = admissions[uid]
                on_edge = (not dec.deferred) and dec.helper == hid
                log.edge_rows.append(
                    (
                        t,
                        hid,
                        uid,
                        snapshot.get(edge, 0),
                        min(served.get(edge, 0), snapshot.get(edge, 0)),
                        dec.size_bits if on_edge else 0,
                        dec.mode if on_edge else 0,
                        gammas.get(uid),
                        theta_snap[uid],
                    )
                )

        self.t += 1
        return state

    def run(self) -> MetricsLog:
        for _ in range(self.config.slots):
            self.step_slot()
        self.log.playback = [pb.metrics(buf) for buf in self.buffers]
        return self.log


def dataclass_replace_users(graph: NetworkGraph, users) -> NetworkGraph:
    return replace(graph, users=tuple(users))


def run(config: SimConfig) -> MetricsLog:
    """Build and run one simulation; deterministic for a given seed."""
    return Simulation(config).run()


def summarize(log: MetricsLog) -> list[UserSummary]:
    """Per-user rows: mean quality over delivered chunks (absent when nothing
    was delivered), its utility value, and the playback counters."""
    rows = []
    for uid in range(log.num_users):
        qualities = [
            log.admitted_quality[uid][chunk] for _, chunk in log.delivered[uid]
        ]
        if qualities:
            avg = sum(qualities) / len(qualities)
            util = phi(avg, log.utility)
        else:
            avg = None
            util = None
        met = log.playback[uid] if log.playback else pb.PlaybackMetrics(0, 0, 0, 0, 0)
        rows.append(
            UserSummary(
                user=uid,
                avg_quality=avg,
                utility=util,
                stall_slots=met.stall_slots,
                skipped=met.skipped_chunks,
                prebuffer_slots=met.prebuffer_slots,
            )
        )
    return rows


def quality_deciles(summaries) -> list[float]:
    """10th..90th percentiles of the per-user average qualities (users with
    no delivered chunks excluded)."""
    values = sorted(s.avg_quality for s in summaries if s.avg_quality is not None)
    if not values:
        return []
    return [
        float(np.percentile(values, p, method="linear")) for p in range(10, 100, 10)
    ]


def association_changes(helpers) -> int:
    """Count helper switches in an association sequence, ignoring deferrals."""
    seq = [h for h in helpers if h is not None and h >= 0]
    return sum(1 for a, b in zip(seq, seq[1:]) if a != b)


def backlog_windows(log: MetricsLog) -> tuple[float, float]:
    """(mid-window, final-window) averages of total backlog, thirds of the
    horizon; a bounded system keeps the final window comparable to the mid."""
    series = log.total_backlog
    third = max(len(series) // 3, 1)
    mid = series[third : 2 * third]
    final = series[2 * third :]
    mid_avg = sum(mid) / len(mid) if mid else 0.0
    final_avg = sum(final) / len(final) if final else 0.0
    return mid_avg, final_avg
