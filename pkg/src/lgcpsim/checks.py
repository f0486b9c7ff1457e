"""Post-hoc validation of produced schedules and run reports.

Each check replays the output independently of the slot loop that produced
it and returns a list of human-readable violations (empty means pass).
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Mapping, Sequence

from .radio import ChannelParams, conflicts
from .scheduler import FusionCostModel, Packet, Schedule


def conflict_violations(sched: Schedule, channel: ChannelParams, positions: Mapping) -> list[str]:
    out = []
    by_slot = defaultdict(list)
    for p in sched.packets:
        if p.slot is None or p.subchannel is None:
            out.append(f"packet {p.key} left unplaced")
            continue
        if not 0 <= p.subchannel < channel.n_subchannels:
            out.append(f"packet {p.key} on subchannel {p.subchannel}")
        by_slot[p.slot].append(p)
    for slot, ps in sorted(by_slot.items()):
        if len(ps) > channel.n_subchannels:
            out.append(f"slot {slot} holds {len(ps)} packets")
        for i, p in enumerate(ps):
            for q in ps[i + 1:]:
                if conflicts(p, [q], positions, channel.interference_radius_m):
                    out.append(f"slot {slot}: {p.as_tuple()} conflicts with {q.as_tuple()}")
    return out


def completeness_violations(sched: Schedule, packets: Sequence[Packet]) -> list[str]:
    want = sorted(p.key for p in packets)
    got = sorted(p.key for p in sched.packets)
    if want != got:
        return [f"placed packet multiset differs from input ({len(got)} placed, {len(want)} given)"]
    return []


def makespan_violations(sched: Schedule, n_packets: int, n_subchannels: int) -> list[str]:
    lo = math.ceil(n_packets / n_subchannels)
    if not lo <= sched.makespan_slots <= n_packets:
        return [f"makespan {sched.makespan_slots} outside [{lo}, {n_packets}]"]
    return []


def work_conservation_violations(sched: Schedule, channel: ChannelParams) -> list[str]:
    """In each slot before the last, either every subchannel is used or every
    packet still waiting shares an endpoint with that slot's placements."""
    out = []
    slots = sched.slots()
    for t, ps in slots.items():
        if t == sched.makespan_slots - 1 or len(ps) == channel.n_subchannels:
            continue
        busy = {n for p in ps for n in (p.src, p.dst)}
        for q in sched.packets:
            if q.slot > t and q.src not in busy and q.dst not in busy:
                out.append(f"slot {t} had a free subchannel but {q.key} waited")
    return out


def replay_joint_latency(sched: Schedule, areas: Mapping[int, tuple[int, int]],
                         fusion_model: FusionCostModel, compute_map: Mapping[int, float],
                         feature_bits: float) -> float:
    """Max over areas of completion time plus fusion queued on its leader."""
    finish = {a: 0.0 for a in areas}
    for p in sched.packets:
        finish[p.area] = max(finish[p.area], (p.slot + 1) * sched.tau_s)
    best = sched.makespan_slots * sched.tau_s
    for leader in {l for l, _ in areas.values()}:
        led = sorted((a for a in areas if areas[a][0] == leader), key=lambda a: (finish[a], a))
        clock = 0.0
        for a in led:
            clock = max(clock, finish[a])
            clock += fusion_model.flops_full_fusion * areas[a][1] * feature_bits / (
                fusion_model.full_feature_bits * compute_map[leader])
            best = max(best, clock)
    return best


def schedule_violations(sched: Schedule, packets: Sequence[Packet], channel: ChannelParams,
                        positions: Mapping) -> list[str]:
    return (conflict_violations(sched, channel, positions)
            + completeness_violations(sched, packets)
            + makespan_violations(sched, len(packets), channel.n_subchannels)
            + work_conservation_violations(sched, channel))


def report_row_violations(row: Mapping, t_max_s: float, tol: float = 1e-9) -> list[str]:
    """Latency identity and feasibility flag of one LGCP result row."""
    if row.get("paradigm") != "lgcp" or row.get("error"):
        return []
    out = []
    total = row["t_delta"] + row["joint_latency_s"]
    if abs(row["latency_s"] - total) > tol:
        out.append(f"total {row['latency_s']} != t_delta + joint {total}")
    stages = row["t1"] + row["t2"] + row["t3"] + row["t4"]
    if abs(stages - row["latency_s"]) > tol:
        out.append(f"stage sum {stages} != total {row['latency_s']}")
    if bool(row["feasible"]) != (row["latency_s"] <= t_max_s):
        out.append("feasible flag disagrees with the deadline")
    return out
