"""Sidelink channel model, the fixed-rate feasibility gate and the interference predicate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping

import numpy as np

from .errors import InvalidArgumentError

if TYPE_CHECKING:
    from .scheduler import Packet

RSU_ID = -1  # pseudo node id for the roadside unit


@dataclass(frozen=True)
class ChannelParams:
    carrier_ghz: float = 5.9
    bandwidth_total_mhz: float = 40.0
    n_subchannels: int = 5
    subchannel_bw_mhz: float = 8.0
    tx_power_dbm: float = 23.0
    noise_power_dbm: float = -114.0
    pathloss_a_db: float = 128.1
    pathloss_b_db: float = 36.6
    shadow_sigma_db: float = 8.0
    rate_gate_mbps: float = 27.0
    fixed_rate_mbps: float = 27.0
    interference_radius_m: float = 200.0
    min_distance_m: float = 1.0

    def __post_init__(self):
        if self.n_subchannels < 1:
            raise InvalidArgumentError("n_subchannels must be >= 1")
        if self.subchannel_bw_mhz * self.n_subchannels > self.bandwidth_total_mhz + 1e-9:
            raise InvalidArgumentError("subchannels exceed the total bandwidth")
        if self.rate_gate_mbps != self.fixed_rate_mbps:
            raise InvalidArgumentError("rate_gate_mbps and fixed_rate_mbps must be equal")
        if not self.fixed_rate_mbps > 0:
            raise InvalidArgumentError("fixed_rate_mbps must be > 0")
        if self.interference_radius_m < 0 or self.shadow_sigma_db < 0:
            raise InvalidArgumentError("radius and shadowing sigma must be >= 0")

    @property
    def fixed_rate_bps(self) -> float:
        return self.fixed_rate_mbps * 1e6

    @property
    def rate_gate_bps(self) -> float:
        return self.rate_gate_mbps * 1e6

    @property
    def subchannel_bw_hz(self) -> float:
        return self.subchannel_bw_mhz * 1e6


@dataclass(frozen=True)
class LinkState:
    src: int
    dst: int
    distance: float
    shadowing_db: float
    achievable_bps: float
    feasible: bool
    rate_bps: float


def path_loss_db(distance_m: float, params: ChannelParams | None = None) -> float:
    """Log-distance path loss with the distance in kilometres."""
    if not distance_m > 0:
        raise InvalidArgumentError(f"distance must be > 0, got {distance_m}")
    p = params or ChannelParams()
    d_km = max(distance_m, p.min_distance_m) / 1000.0
    return p.pathloss_a_db + p.pathloss_b_db * math.log10(d_km)


def snr_db(params: ChannelParams, distance_m: float, shadowing_db: float = 0.0) -> float:
    return (params.tx_power_dbm - path_loss_db(distance_m, params) - shadowing_db
            - params.noise_power_dbm)


def achievable_rate_bps(params: ChannelParams, distance_m: float, shadowing_db: float = 0.0) -> float:
    """Shannon capacity of one subchannel."""
    snr = 10 ** (snr_db(params, distance_m, shadowing_db) / 10)
    return params.subchannel_bw_hz * math.log2(1 + snr)


def link_shadowing_db(params: ChannelParams, seed: int, a: int, b: int) -> float:
    """Frozen per-link shadowing; identical for (a, b) and (b, a)."""
    if params.shadow_sigma_db == 0:
        return 0.0
    lo, hi = sorted((int(a), int(b)))
    # SeedSequence entropy must be non-negative
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, lo + 2, hi + 2])
    return float(rng.normal(0.0, params.shadow_sigma_db))


def link_state(params: ChannelParams, src: int, dst: int, src_pos, dst_pos, seed: int) -> LinkState:
    distance = math.dist(src_pos, dst_pos)
    shadow = link_shadowing_db(params, seed, src, dst)
    rate = achievable_rate_bps(params, max(distance, params.min_distance_m), shadow)
    feasible = rate >= params.rate_gate_bps
    return LinkState(src, dst, distance, shadow, rate, feasible,
                     params.fixed_rate_bps if feasible else 0.0)


def conflicts(candidate: "Packet", placed: Iterable["Packet"],
              positions: Mapping[int, tuple[float, float]], radius_m: float) -> bool:
    """True if ``candidate`` cannot share a slot with the ``placed`` packets.

    Endpoint rule: a node transmits at most once, receives at most once and
    never does both in one slot. Co-channel rule: on a shared subchannel, a
    transmitter within ``radius_m`` of the other packet's receiver conflicts.
    """
    cs, cd = candidate.src, candidate.dst
    for q in placed:
        if cs in (q.src, q.dst) or cd in (q.src, q.dst):
            return True
        if q.subchannel == candidate.subchannel and (
                math.dist(positions[q.src], positions[cd]) <= radius_m
                or math.dist(positions[cs], positions[q.dst]) <= radius_m):
            return True
    return False
