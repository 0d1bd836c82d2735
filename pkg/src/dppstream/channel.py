"""Ergodic link capacities under Rayleigh fading with constant-power interferers.

Capacities are the fading-averaged rate E[log2(1 + S*X0 / (1 + sum_j I_j*X_j))]
in bits per channel symbol, with X_i i.i.d. unit-mean exponential (squared
Rayleigh magnitudes). The expectation is estimated by Monte Carlo; the
no-interference case has the closed form e^(1/s) * E1(1/s) / ln 2 used as an
independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import exp1

from .topology import NetworkGraph, advance_mobility, neighborhood, pathloss

LOG_BASE = 2  # capacities are bits per channel symbol; fixed, exposed read-only

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class CapacityEstimator:
    """Monte-Carlo settings plus deterministic per-link seed derivation.

    common_variates forces every link onto the same fading draws, which makes
    paired comparisons (monotonicity, symmetry) exact instead of statistical.
    interference_gain_floor optionally drops interferers whose received power
    falls below the floor; the default keeps every other helper.
    """

    num_samples: int = 4000
    seed: int = 0
    common_variates: bool = False
    interference_gain_floor: float = 0.0

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError("num_samples must be at least 1")

    def link_rng(self, helper: int, user: int, slot: int) -> np.random.Generator:
        if self.common_variates:
            key = (int(self.seed), 3)
        else:
            key = (int(self.seed), 3, int(helper), int(user), int(slot))
        return np.random.default_rng(np.random.SeedSequence(key))


def ergodic_capacity(
    signal_power: float,
    interferer_powers,
    est: CapacityEstimator,
    rng: np.random.Generator | None = None,
) -> float:
    """Monte-Carlo estimate of the ergodic rate for one link (bits/symbol).

    signal_power and interferer_powers are received powers P*g with noise
    normalized to 1. Direct calls without an explicit rng reuse the
    estimator's base stream, so repeated evaluations share fading draws.
    """
    if signal_power < 0 or any(p < 0 for p in interferer_powers):
        raise ValueError("received powers must be non-negative")
    if signal_power == 0:
        return 0.0
    if rng is None:
        rng = est.link_rng(0, 0, 0)
    x0 = rng.exponential(size=est.num_samples)
    powers = np.asarray(
        [p for p in interferer_powers if p > est.interference_gain_floor],
        dtype=float,
    )
    if powers.size:
        xi = rng.exponential(size=(est.num_samples, powers.size))
        denom = 1.0 + xi @ powers
    else:
        denom = 1.0
    return float(np.mean(np.log2(1.0 + signal_power * x0 / denom)))


def ergodic_capacity_no_interference_closedform(s: float) -> float:
    """Exact fading-averaged rate e^(1/s) * E1(1/s) / ln 2 for SNR scale s.

    Returns 0 at s = 0 by continuity; for very small s the asymptotic
    expansion of e^x E1(x) avoids overflow in the exponential.
    """
    if s < 0:
        raise ValueError("signal power must be non-negative")
    if s == 0.0:
        return 0.0
    x = 1.0 / s
    if x > 700.0:
        # e^x E1(x) ~ (1 - 1/x + 2/x^2) / x for large x
        return (s - s * s + 2.0 * s ** 3) / _LN2
    return math.exp(x) * exp1(x) / _LN2


def gain_matrix(graph: NetworkGraph, t: float) -> np.ndarray:
    """Pathloss gains for every helper-user pair (helpers x users), in (0,1]."""
    gains = np.empty((len(graph.helpers), len(graph.users)))
    for u in graph.users:
        pos = advance_mobility(u, t)
        for h in graph.helpers:
            gains[h.id, u.id] = pathloss(
                h.position, pos, graph.pathloss_delta, graph.pathloss_alpha
            )
    return gains


def link_capacities(
    graph: NetworkGraph,
    gains: np.ndarray,
    powers,
    est: CapacityEstimator,
    t: int = 0,
    users=None,
) -> dict[tuple[int, int], float]:
    """Capacities for every service edge (h, u) at slot t.

    The interferer set for a link is every other helper, transmitting at
    constant power regardless of scheduling. gains must cover all pairs;
    users restricts the computation to a subset (default: all).
    """
    powers = np.asarray(powers, dtype=float)
    caps: dict[tuple[int, int], float] = {}
    ids = range(len(graph.users)) if users is None else users
    for uid in ids:
        received = powers * gains[:, uid]
        for hid in sorted(neighborhood(graph, uid, t)):
            others = np.delete(received, hid)
            caps[(hid, uid)] = ergodic_capacity(
                float(received[hid]), others, est, rng=est.link_rng(hid, uid, t)
            )
    return caps
