"""Per-slot streaming control, decomposed into three independent pieces.

Each slot the controller minimizes

    sum_u [ Q(h*_u, u) * size_u - Theta_u * D_u ]      (admission)
    - sum_h bits_served_h * Q(h, u*_h)                 (scheduling)
    - sum_u [ V * phi(gamma_u) - gamma_u * Theta_u ]   (aux maximization)

over the feasible actions, using only the current queue backlogs. The three
terms share no decision variables, so admission is solved per user, scheduling
per helper, and the auxiliary variable per user, each in closed form.
dpp_objective evaluates the full expression for any candidate action and is
the reference the individual solvers are tested against.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .video import ChunkProfile, QualityBounds

UTILITIES = ("log", "linear")


class InfeasibleActionError(ValueError):
    """Action violates single-helper assignment or the scheduling vertex."""


@dataclass(frozen=True)
class DppConfig:
    """Control knob V trades utility against backlog; utility picks phi."""

    v: float
    utility: str = "log"

    def __post_init__(self):
        if self.v <= 0:
            raise ValueError("control parameter v must be positive")
        if self.utility not in UTILITIES:
            raise ValueError(f"utility must be one of {UTILITIES}")


def phi(x: float, utility: str = "log") -> float:
    """Per-user concave utility; log gives proportional fairness."""
    if utility == "log":
        return math.log(x)
    return x


@dataclass
class TransmissionQueue:
    """FIFO of (chunk number, remaining bits) with the scalar backlog kept in
    sync; a chunk is delivered when its last bit drains."""

    fifo: deque = field(default_factory=deque)
    backlog_bits: int = 0

    def push(self, chunk: int, size_bits: int) -> None:
        if size_bits <= 0:
            raise ValueError("queued chunks must carry positive bits")
        self.fifo.append([chunk, size_bits])
        self.backlog_bits += size_bits


@dataclass
class VirtualQueue:
    """Tracks Theta_u; stability enforces mean(gamma) <= mean(quality)."""

    theta: float = 0.0

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("virtual queue must be non-negative")


@dataclass(frozen=True)
class AdmissionDecision:
    """One user's request for the slot: target helper and quality mode.

    deferred marks a slot with no eligible helper; the user then makes no
    request at all (no queue arrival, no virtual-queue update).
    """

    helper: int | None
    mode: int
    size_bits: int
    quality: float
    deferred: bool = False

    @classmethod
    def deferral(cls) -> "AdmissionDecision":
        return cls(helper=None, mode=0, size_bits=0, quality=0.0, deferred=True)


@dataclass(frozen=True)
class ScheduleDecision:
    """One helper's slot: at most one served user, at full rate.

    bits_served is floor(n * C) for the served link; fractional bits cannot
    be transmitted, and integer bit accounting keeps the queue dynamics exact.
    """

    served_user: int | None
    bits_served: int = 0


@dataclass(frozen=True)
class AuxVar:
    gamma: float


@dataclass(frozen=True)
class ControlAction:
    """One slot's decisions: admissions keyed by user, schedules by helper,
    aux variables by (non-paused) user."""

    admissions: dict
    schedules: dict
    aux: dict


def admit(
    u: int,
    eligible_backlogs,
    theta: float,
    profile: ChunkProfile,
) -> AdmissionDecision:
    """Admission control for user u.

    Picks the eligible helper with the smallest backlog (tie: smallest id),
    then the mode minimizing Q * size - Theta * quality (tie: smallest mode).
    An empty eligible set yields a deferred decision.
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if not eligible_backlogs:
        return AdmissionDecision.deferral()
    helper = min(eligible_backlogs, key=lambda h: (eligible_backlogs[h], h))
    q = eligible_backlogs[helper]
    if q < 0:
        raise ValueError("backlogs must be non-negative")
    best_mode, best_score = 0, None
    for m, qm in enumerate(profile.modes, start=1):
        score = q * qm.size_bits - theta * qm.quality
        if best_score is None or score < best_score:
            best_mode, best_score = m, score
    chosen = profile.modes[best_mode - 1]
    return AdmissionDecision(
        helper=helper,
        mode=best_mode,
        size_bits=chosen.size_bits,
        quality=chosen.quality,
    )


def schedule(h: int, backlogs, capacities, n: int) -> ScheduleDecision:
    """Max-weight scheduling for helper h: serve the neighbor with the largest
    backlog * capacity product (tie: smallest user id) at full rate for the
    slot; serve nobody when every product is zero."""
    if n < 1:
        raise ValueError("n must be at least 1")
    best_user, best_product = None, 0
    for user in sorted(backlogs):
        q = backlogs[user]
        c = capacities[user]
        if q < 0 or c < 0:
            raise ValueError("backlogs and capacities must be non-negative")
        product = q * c
        if product > best_product:
            best_user, best_product = user, product
    if best_user is None:
        return ScheduleDecision(served_user=None, bits_served=0)
    return ScheduleDecision(
        served_user=best_user, bits_served=math.floor(n * capacities[best_user])
    )


def aux_update(theta: float, cfg: DppConfig, bounds: QualityBounds) -> AuxVar:
    """Maximize V * phi(gamma) - Theta * gamma over [d_min, d_max].

    Log utility: gamma = clamp(V / Theta, d_min, d_max), with Theta = 0
    mapping to d_max. Linear utility: a bang-bang choice at the bounds.
    """
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if cfg.utility == "log":
        if theta == 0:
            return AuxVar(gamma=bounds.d_max)
        return AuxVar(gamma=min(max(cfg.v / theta, bounds.d_min), bounds.d_max))
    return AuxVar(gamma=bounds.d_max if cfg.v >= theta else bounds.d_min)


def update_queue(
    q: TransmissionQueue, served_bits: int, arrivals
) -> tuple[TransmissionQueue, list[int]]:
    """Drain the FIFO head-first by served_bits, then append arrivals.

    Matches the scalar dynamics backlog' = max(backlog - served, 0) + arrived;
    service beyond the backlog is discarded. Returns the queue and the chunk
    numbers fully drained this slot.
    """
    if served_bits < 0:
        raise ValueError("served_bits must be non-negative")
    delivered: list[int] = []
    budget = served_bits
    while budget > 0 and q.fifo:
        head = q.fifo[0]
        take = min(budget, head[1])
        head[1] -= take
        q.backlog_bits -= take
        budget -= take
        if head[1] == 0:
            delivered.append(head[0])
            q.fifo.popleft()
    for chunk, size_bits in arrivals:
        q.push(chunk, size_bits)
    return q, delivered


def update_virtual(theta: float, gamma: float, delivered_quality: float) -> float:
    """Virtual queue step max(Theta + gamma - D, 0).

    delivered_quality is the quality admitted this slot; 0 marks a paused
    slot (no eligible helper), which leaves Theta unchanged.
    """
    if theta < 0 or gamma < 0:
        raise ValueError("theta and gamma must be non-negative")
    if delivered_quality <= 0:
        return theta
    return max(theta + gamma - delivered_quality, 0.0)


def dpp_objective(
    action: ControlAction,
    backlogs,
    thetas,
    capacities,
    cfg: DppConfig,
    n: int,
) -> float:
    """Evaluate the full per-slot objective for a candidate action.

    backlogs and capacities are keyed by edge (h, u); thetas by user. Raises
    InfeasibleActionError when an admission targets a non-edge or a schedule
    is not a full-rate single-user vertex.
    """
    total = 0.0
    for u, dec in action.admissions.items():
        if dec.deferred:
            continue
        edge = (dec.helper, u)
        if edge not in capacities:
            raise InfeasibleActionError(f"admission for user {u} targets non-edge {edge}")
        total += backlogs.get(edge, 0) * dec.size_bits - thetas[u] * dec.quality
    for h, sdec in action.schedules.items():
        if sdec.served_user is None:
            if sdec.bits_served != 0:
                raise InfeasibleActionError(f"helper {h} serves bits with no user")
            continue
        edge = (h, sdec.served_user)
        if edge not in capacities:
            raise InfeasibleActionError(f"schedule for helper {h} uses non-edge {edge}")
        if sdec.bits_served != math.floor(n * capacities[edge]):
            raise InfeasibleActionError(
                f"helper {h} must serve at full rate floor(n*C) or not at all"
            )
        total -= sdec.bits_served * backlogs.get(edge, 0)
    for u, aux in action.aux.items():
        total -= cfg.v * phi(aux.gamma, cfg.utility) - aux.gamma * thetas[u]
    return total
