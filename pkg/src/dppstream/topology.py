"""Grid topology, distance pathloss, and waypoint mobility."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class Position:
    x: float
    y: float


def distance(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


@dataclass(frozen=True)
class HelperNode:
    """Small-cell station. tx_power is a linear SNR scale (noise normalized to 1)."""

    id: int
    position: Position
    tx_power: float = 100.0


@dataclass(frozen=True)
class UserNode:
    """Streaming client following a waypoint trajectory.

    trajectory is a tuple of (Position, slot) pairs with strictly increasing
    slot times; a static user has a single waypoint. file_id and start_offset
    select where in the video library the request stream begins.
    """

    id: int
    trajectory: tuple[tuple[Position, float], ...]
    file_id: int = 0
    start_offset: int = 0

    @property
    def mobile(self) -> bool:
        return len(self.trajectory) > 1

    def with_offset(self, start_offset: int) -> "UserNode":
        return replace(self, start_offset=start_offset)

    def with_trajectory(self, trajectory) -> "UserNode":
        return replace(self, trajectory=tuple(trajectory))


@dataclass(frozen=True)
class NetworkGraph:
    """Bipartite helpers/users geometry; the edge set is recomputed from
    positions each slot, so arbitrary trajectories stay consistent."""

    helpers: tuple[HelperNode, ...]
    users: tuple[UserNode, ...]
    service_radius: float
    pathloss_delta: float
    pathloss_alpha: float
    area_side: float


def pathloss(a: Position, b: Position, delta: float, alpha: float) -> float:
    """Distance gain 1 / (1 + (d/delta)^alpha), in (0, 1]; d = 0 gives 1."""
    if delta <= 0:
        raise ValueError("pathloss delta must be positive")
    d = distance(a, b)
    return 1.0 / (1.0 + (d / delta) ** alpha)


def build_grid_topology(
    area_side: float,
    cells_per_side: int,
    users_per_cell: int,
    service_radius: float,
    rng_seed: int,
    tx_power: float = 100.0,
    pathloss_delta: float = 40.0,
    pathloss_alpha: float = 3.5,
) -> NetworkGraph:
    """Square area split into cells_per_side x cells_per_side cells, one helper
    at each cell center, users_per_cell users uniform i.i.d. within each cell.

    Helpers are numbered row-major from the bottom-left corner. Deterministic
    for a given rng_seed; all users are created static (single waypoint at
    slot 0).
    """
    if area_side <= 0 or cells_per_side <= 0 or service_radius <= 0:
        raise ValueError(
            "area_side, cells_per_side and service_radius must be positive"
        )
    if users_per_cell < 0:
        raise ValueError("users_per_cell must be non-negative")
    cell = area_side / cells_per_side

    helpers = []
    for row in range(cells_per_side):
        for col in range(cells_per_side):
            pos = Position(col * cell + cell / 2.0, row * cell + cell / 2.0)
            helpers.append(HelperNode(id=len(helpers), position=pos, tx_power=tx_power))

    # stream tag 1 keeps topology draws independent of other consumers of the seed
    rng = np.random.default_rng(np.random.SeedSequence((int(rng_seed), 1)))
    users = []
    for row in range(cells_per_side):
        for col in range(cells_per_side):
            for _ in range(users_per_cell):
                x = col * cell + rng.uniform(0.0, cell)
                y = row * cell + rng.uniform(0.0, cell)
                users.append(
                    UserNode(id=len(users), trajectory=((Position(x, y), 0.0),))
                )

    return NetworkGraph(
        helpers=tuple(helpers),
        users=tuple(users),
        service_radius=service_radius,
        pathloss_delta=pathloss_delta,
        pathloss_alpha=pathloss_alpha,
        area_side=area_side,
    )


def advance_mobility(user: UserNode, t: float) -> Position:
    """Position at slot t: linear interpolation between bracketing waypoints,
    clamped to the first/last waypoint outside the trajectory span."""
    if t < 0:
        raise ValueError("slot time must be non-negative")
    traj = user.trajectory
    if not traj:
        raise ValueError(f"user {user.id} has an empty trajectory")
    if t <= traj[0][1]:
        return traj[0][0]
    for (p0, t0), (p1, t1) in zip(traj, traj[1:]):
        if t <= t1:
            frac = (t - t0) / (t1 - t0)
            return Position(p0.x + frac * (p1.x - p0.x), p0.y + frac * (p1.y - p0.y))
    return traj[-1][0]


def neighborhood(graph: NetworkGraph, u: int, t: float) -> frozenset[int]:
    """Helpers within service_radius of user u's position at slot t."""
    pos = advance_mobility(graph.users[u], t)
    return frozenset(
        h.id
        for h in graph.helpers
        if distance(h.position, pos) <= graph.service_radius
    )
