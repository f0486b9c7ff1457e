"""Slot-by-slot conflict-free packet scheduling with overlapped leader fusion."""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .assignment import FULL_FEATURE_BITS, Assignment
from .errors import InvalidArgumentError, RefusalError, SchedulingError
from .radio import ChannelParams, conflicts, link_state

FUSION_MFLOPS = {"cobevt": 2228.0, "where2comm": 1400.0, "coalign": 2684.0}

BRUTE_FORCE_MAX_PACKETS = 8
BRUTE_FORCE_MAX_SUBCHANNELS = 3


@dataclass(frozen=True)
class Packet:
    src: int
    dst: int
    area: int
    size_bits: float
    subchannel: int | None = None
    slot: int | None = None

    def __post_init__(self):
        if self.src == self.dst:
            raise InvalidArgumentError(f"packet for area {self.area} loops on node {self.src}")
        if (self.subchannel is None) != (self.slot is None):
            raise InvalidArgumentError("subchannel and slot must be set together")

    @property
    def key(self) -> tuple[int, int, int]:
        return self.area, self.src, self.dst

    def as_tuple(self) -> tuple:
        return self.src, self.dst, self.area, self.subchannel, self.slot


@dataclass(frozen=True)
class FusionCostModel:
    flops_full_fusion: float
    full_feature_bits: float = FULL_FEATURE_BITS

    def __post_init__(self):
        if not self.flops_full_fusion > 0:
            raise InvalidArgumentError("flops_full_fusion must be > 0")

    @classmethod
    def preset(cls, name: str) -> "FusionCostModel":
        try:
            return cls(FUSION_MFLOPS[name] * 1e6)
        except KeyError:
            raise InvalidArgumentError(
                f"unknown fusion model {name!r}; choose from {sorted(FUSION_MFLOPS)}") from None

    def fusion_time(self, group_size: int, feature_bits: float, compute: float) -> float:
        """Seconds to fuse one area: linear in group size and in the feature fraction."""
        return self.flops_full_fusion * group_size * (feature_bits / self.full_feature_bits) / compute


@dataclass(frozen=True)
class Schedule:
    tau_s: float
    packets: tuple[Packet, ...]
    area_complete_slot: dict[int, int]
    area_fusion_end_s: dict[int, float]
    per_cav_fusion_remaining: dict[int, float]
    makespan_slots: int
    joint_latency_s: float

    @property
    def transmission_time_s(self) -> float:
        return self.makespan_slots * self.tau_s

    def slots(self) -> dict[int, list[Packet]]:
        by_slot = defaultdict(list)
        for p in self.packets:
            by_slot[p.slot].append(p)
        return dict(sorted(by_slot.items()))

    def to_dict(self) -> dict:
        return {
            "packets": [list(p.as_tuple()) for p in self.packets],
            "makespan_slots": self.makespan_slots,
            "tau_s": self.tau_s,
            "joint_latency_s": self.joint_latency_s,
            "per_area_completion": {str(a): s for a, s in sorted(self.area_complete_slot.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def build_packets(assignment: Assignment, feature_bits: float | None = None) -> list[Packet]:
    """One packet per non-leader member of each group, addressed to the leader."""
    bits = assignment.feature_bits if feature_bits is None else feature_bits
    return [Packet(m, g.leader, area, bits)
            for area, g in sorted(assignment.groups.items()) for m in g.followers]


def packet_loads(packets: Iterable[Packet]) -> tuple[Counter, Counter]:
    packets = list(packets)
    return Counter(p.src for p in packets), Counter(p.dst for p in packets)


def priority(src: int, dst: int, sender_load: Mapping[int, int], receiver_load: Mapping[int, int]) -> int:
    return sender_load.get(src, 0) + receiver_load.get(dst, 0)


def priority_order(packets: Sequence[Packet]) -> list[Packet]:
    """Highest sender+receiver load first; ties by (area, src)."""
    ls, lr = packet_loads(packets)
    return sorted(packets, key=lambda p: (-priority(p.src, p.dst, ls, lr), p.area, p.src))


def slot_time(feature_bits: float, channel: ChannelParams) -> float:
    """Duration of one packet at the fixed rate."""
    return feature_bits / channel.fixed_rate_bps


def check_links(packets: Iterable[Packet], channel: ChannelParams, positions, seed: int) -> None:
    for p in packets:
        ls = link_state(channel, p.src, p.dst, positions[p.src], positions[p.dst], seed)
        if not ls.feasible:
            raise SchedulingError(
                f"link {p.src}->{p.dst} (area {p.area}) is infeasible: "
                f"{ls.achievable_bps / 1e6:.2f} Mbps < {channel.rate_gate_mbps} Mbps")


def _place(order: list[Packet], channel: ChannelParams, positions, *, dynamic: bool = False
           ) -> list[Packet]:
    remaining = list(order)
    placed: list[Packet] = []
    radius = channel.interference_radius_m
    t = 0
    while remaining:
        in_slot: list[Packet] = []
        for z in range(channel.n_subchannels):
            for i, p in enumerate(remaining):
                cand = replace(p, subchannel=z, slot=t)
                if not conflicts(cand, in_slot, positions, radius):
                    in_slot.append(cand)
                    del remaining[i]
                    break
        placed.extend(in_slot)
        if dynamic and remaining:
            remaining = priority_order(remaining)
        t += 1
    return placed


def _account(placed: list[Packet], tau_s: float, areas: Mapping[int, tuple[int, int]],
             fusion_model: FusionCostModel, compute_map: Mapping[int, float],
             feature_bits: float) -> Schedule:
    makespan = max((p.slot + 1 for p in placed), default=0)
    complete = {a: 0 for a in areas}
    for p in placed:
        complete[p.area] = max(complete.get(p.area, 0), p.slot + 1)
    queues = defaultdict(list)
    for a, (leader, _size) in areas.items():
        queues[leader].append(a)
    fusion_end = {}
    busy = {}
    for leader, queue in queues.items():
        t = 0.0
        for a in sorted(queue, key=lambda a: (complete[a], a)):
            start = max(complete[a] * tau_s, t)
            t = start + fusion_model.fusion_time(areas[a][1], feature_bits, compute_map[leader])
            fusion_end[a] = t
        busy[leader] = t
    tx_end = makespan * tau_s
    remaining = {c: max(0.0, b - tx_end) for c, b in sorted(busy.items())}
    joint = tx_end + max(remaining.values(), default=0.0)
    return Schedule(tau_s, tuple(placed), dict(sorted(complete.items())),
                    dict(sorted(fusion_end.items())), remaining, makespan, joint)


def _areas_from_packets(packets: Sequence[Packet]) -> dict[int, tuple[int, int]]:
    areas: dict[int, tuple[int, int]] = {}
    for p in packets:
        leader, size = areas.get(p.area, (p.dst, 1))
        if leader != p.dst:
            raise InvalidArgumentError(f"area {p.area} has packets to two leaders")
        areas[p.area] = (leader, size + 1)
    return areas


def _prepare(packets, channel, tau_s, areas, feature_bits, positions, shadow_seed):
    if not tau_s > 0:
        raise InvalidArgumentError("tau_s must be > 0")
    packets = list(packets)
    keys = [p.key for p in packets]
    if len(set(keys)) != len(keys):
        raise InvalidArgumentError("duplicate packets in input")
    if shadow_seed is not None:
        check_links(packets, channel, positions, shadow_seed)
    if areas is None:
        areas = _areas_from_packets(packets)
    if feature_bits is None:
        feature_bits = packets[0].size_bits if packets else FULL_FEATURE_BITS
    packets = [replace(p, subchannel=None, slot=None) for p in packets]
    return packets, dict(areas), feature_bits


def schedule(packets: Iterable[Packet], channel: ChannelParams, positions: Mapping,
             fusion_model: FusionCostModel, compute_map: Mapping[int, float], tau_s: float, *,
             areas: Mapping[int, tuple[int, int]] | None = None, feature_bits: float | None = None,
             shadow_seed: int | None = None, dynamic_priority: bool = False) -> Schedule:
    """Place packets slot by slot in load-priority order and account leader fusion.

    The order is computed once on the full packet set. With
    ``dynamic_priority`` the sender/receiver loads are instead recounted over
    the unplaced packets after every slot and the queue is re-ranked.

    ``areas`` maps each area to ``(leader, group_size)``; when omitted it is
    derived from the packets, which misses leader-only groups. With
    ``shadow_seed`` given, every link is checked against the rate gate first.
    """
    packets, areas, bits = _prepare(packets, channel, tau_s, areas, feature_bits, positions,
                                    shadow_seed)
    placed = _place(priority_order(packets), channel, positions, dynamic=dynamic_priority)
    return _account(placed, tau_s, areas, fusion_model, compute_map, bits)


def schedule_random(packets: Iterable[Packet], channel: ChannelParams, positions: Mapping,
                    fusion_model: FusionCostModel, compute_map: Mapping[int, float], tau_s: float,
                    seed: int, *, areas: Mapping[int, tuple[int, int]] | None = None,
                    feature_bits: float | None = None, shadow_seed: int | None = None) -> Schedule:
    """Same slot loop as :func:`schedule` with a seeded uniform shuffle as the order."""
    packets, areas, bits = _prepare(packets, channel, tau_s, areas, feature_bits, positions,
                                    shadow_seed)
    packets.sort(key=lambda p: p.key)
    perm = np.random.default_rng(seed).permutation(len(packets))
    placed = _place([packets[i] for i in perm], channel, positions)
    return _account(placed, tau_s, areas, fusion_model, compute_map, bits)


def assignment_areas(assignment: Assignment) -> dict[int, tuple[int, int]]:
    return {a: (g.leader, g.size) for a, g in assignment.groups.items()}


def brute_force_schedule(packets: Sequence[Packet], channel: ChannelParams, positions: Mapping) -> int:
    """Minimum transmission makespan in slots, by exhaustive search.

    Enumerates every packet subset that fits one slot under some subchannel
    assignment, then finds the smallest partition of all packets into such
    subsets. Fusion is not modelled.
    """
    packets = [replace(p, subchannel=None, slot=None) for p in packets]
    n, z = len(packets), channel.n_subchannels
    if n > BRUTE_FORCE_MAX_PACKETS or z > BRUTE_FORCE_MAX_SUBCHANNELS:
        raise RefusalError(f"{n} packets / {z} subchannels exceeds the "
                           f"{BRUTE_FORCE_MAX_PACKETS}/{BRUTE_FORCE_MAX_SUBCHANNELS} guard")
    if n == 0:
        return 0
    radius = channel.interference_radius_m

    def fits(mask: int) -> bool:
        members = [packets[i] for i in range(n) if mask >> i & 1]
        if len(members) > z:
            return False
        for chans in itertools.product(range(z), repeat=len(members)):
            assigned = [replace(p, subchannel=c, slot=0) for p, c in zip(members, chans)]
            if all(not conflicts(assigned[i], assigned[:i], positions, radius)
                   for i in range(len(assigned))):
                return True
        return False

    feasible = [m for m in range(1, 1 << n) if fits(m)]
    full = (1 << n) - 1
    best = [math.inf] * (1 << n)
    best[0] = 0
    for mask in range(1, full + 1):
        low = mask & -mask
        for s in feasible:
            if s & low and s & mask == s:
                cand = best[mask ^ s] + 1
                if cand < best[mask]:
                    best[mask] = cand
    return int(best[full])

