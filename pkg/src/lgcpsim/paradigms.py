"""End-to-end latency, transmission volume and objective for the three paradigms.

``lgcp`` runs group selection followed by the interference-aware scheduler;
``vehicle`` is all-to-all feature exchange; ``edge`` uploads every full
feature to an edge server that fuses centrally.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

from .assignment import FULL_FEATURE_BITS, Assignment, Group, compute_loads, default_feature_bits, select_groups
from .confidence import ConfidenceMap, global_confidence, group_confidence
from .errors import InvalidArgumentError
from .radio import ChannelParams, link_state
from .scenario import Scenario
from .scheduler import (FusionCostModel, Packet, Schedule, assignment_areas, build_packets, schedule,
                        schedule_random, slot_time)

log = logging.getLogger(__name__)

TABLE_SLOT_S = 0.25e-3
DEFAULT_T_MAX_S = 0.100
EDGE_COMPUTE_FLOPS = 2e12


@dataclass(frozen=True)
class ControlMessageSizes:
    d_init: float = 1600.0
    d_info: float = 1600.0
    d_ts: float = 8000.0
    d_rep: float = 160000.0
    d_g: float = 160000.0

    def __post_init__(self):
        if min(asdict(self).values()) < 0:
            raise InvalidArgumentError("control message sizes must be >= 0")


@dataclass(frozen=True)
class LatencyBreakdown:
    t1: float
    t2: float
    t3: float
    t4: float
    t_delta: float
    joint_latency: float
    total: float

    def stage_sum(self) -> float:
        return self.t1 + self.t2 + self.t3 + self.t4

    def to_dict(self) -> dict:
        return {"t1": self.t1, "t2": self.t2, "t3": self.t3, "t4": self.t4, "t_delta": self.t_delta}


def control_latency(n_cavs: int, channel: ChannelParams, msgs: ControlMessageSizes) -> float:
    r = channel.fixed_rate_bps
    waves = math.ceil(n_cavs / channel.n_subchannels)
    return (msgs.d_init + waves * msgs.d_info + msgs.d_ts + msgs.d_rep + msgs.d_g) / r


def latency_breakdown(n_cavs: int, joint_latency: float, channel: ChannelParams,
                      msgs: ControlMessageSizes) -> LatencyBreakdown:
    r = channel.fixed_rate_bps
    waves = math.ceil(n_cavs / channel.n_subchannels)
    t1 = msgs.d_init / r + waves * msgs.d_info / r
    t2 = msgs.d_ts / r
    t3 = joint_latency + msgs.d_rep / r
    t4 = msgs.d_g / r
    t_delta = control_latency(n_cavs, channel, msgs)
    return LatencyBreakdown(t1, t2, t3, t4, t_delta, joint_latency, t_delta + joint_latency)


def objective(global_conf: float, t_delta: float, joint_latency: float) -> float:
    """Global confidence per second of end-to-end latency."""
    denom = t_delta + joint_latency
    if not denom > 0:
        raise InvalidArgumentError("total latency must be > 0")
    return global_conf / denom


@dataclass(frozen=True)
class ParadigmReport:
    paradigm: str
    n_cavs: int
    volume_bits: float
    latency_s: float
    objective: float | None
    feasible: bool
    global_confidence: float | None = None
    delta_g: float | None = None
    breakdown: LatencyBreakdown | None = None
    undeliverable: int = 0
    transmission_s: float | None = None

    def to_dict(self) -> dict:
        return {
            "paradigm": self.paradigm,
            "n_cavs": self.n_cavs,
            "delta_g": self.delta_g,
            "volume_bits": self.volume_bits,
            "latency_s": self.latency_s,
            "objective": self.objective,
            "feasible": self.feasible,
            "global_confidence": self.global_confidence,
            "undeliverable": self.undeliverable,
            "transmission_s": self.transmission_s,
            "breakdown": self.breakdown.to_dict() if self.breakdown else None,
        }


@dataclass(frozen=True)
class LgcpResult:
    report: ParadigmReport
    assignment: Assignment
    schedule: Schedule
    breakdown: LatencyBreakdown
    dropped: tuple[tuple[int, int, int], ...] = field(default=())  # (area, member, leader)


def resolve_slot(feature_bits: float, channel: ChannelParams, slot_mode: str = "packet") -> float:
    packet_slot = slot_time(feature_bits, channel)
    if slot_mode == "packet":
        if not math.isclose(packet_slot, TABLE_SLOT_S, rel_tol=1e-9):
            log.debug("packet slot %.6g s differs from the 0.25 ms table slot", packet_slot)
        return packet_slot
    if slot_mode == "table":
        return TABLE_SLOT_S
    raise InvalidArgumentError(f"unknown slot mode {slot_mode!r}")


def drop_infeasible_members(assignment: Assignment, scenario: Scenario, channel: ChannelParams,
                            seed: int) -> tuple[Assignment, list[tuple[int, int, int]]]:
    """Remove followers whose link to their leader fails the rate gate."""
    pos = scenario.positions()
    dropped = []
    groups = {}
    for area, g in assignment.groups.items():
        keep = []
        for m in g.members:
            if m != g.leader and not link_state(channel, m, g.leader, pos[m], pos[g.leader], seed).feasible:
                dropped.append((area, m, g.leader))
                log.info("area %d: dropping CAV %d, link to leader %d is infeasible", area, m, g.leader)
                continue
            keep.append(m)
        groups[area] = Group(area, tuple(keep), g.leader)
    if not dropped:
        return assignment, []
    loads = compute_loads(groups.values(), assignment.feature_bits, assignment.cav_ids)
    return Assignment(groups, loads, assignment.feature_bits, assignment.cav_ids), dropped


def lgcp_volume(assignment: Assignment, n_cavs: int, msgs: ControlMessageSizes) -> float:
    features = sum((g.size - 1) * assignment.feature_bits for g in assignment.groups.values())
    reports = len(assignment.groups) * msgs.d_rep
    control = msgs.d_init + n_cavs * msgs.d_info + msgs.d_ts + msgs.d_g
    return features + reports + control


def lgcp_run(scenario: Scenario, cmap: ConfidenceMap, delta_g: float, channel: ChannelParams,
             fusion_model: FusionCostModel, msgs: ControlMessageSizes | None = None,
             t_max_s: float = DEFAULT_T_MAX_S, *, feature_bits: float | None = None,
             slot_mode: str = "packet", tau_s: float | None = None, shadow_seed: int | None = None,
             scheduler: str = "priority", order_seed: int = 0,
             dynamic_priority: bool = False) -> LgcpResult:
    msgs = msgs or ControlMessageSizes()
    grid = scenario.grid
    bits = feature_bits or default_feature_bits(grid.cell_area, grid.roi_area,
                                                fusion_model.full_feature_bits)
    tau = tau_s if tau_s is not None else resolve_slot(bits, channel, slot_mode)
    seed = scenario.seed if shadow_seed is None else shadow_seed

    assignment = select_groups(cmap, delta_g, bits)
    assignment, dropped = drop_infeasible_members(assignment, scenario, channel, seed)
    packets = build_packets(assignment)
    kwargs = dict(areas=assignment_areas(assignment), feature_bits=bits, shadow_seed=seed)
    if scheduler == "priority":
        sched = schedule(packets, channel, scenario.positions(), fusion_model, scenario.compute_map(),
                         tau, dynamic_priority=dynamic_priority, **kwargs)
    elif scheduler == "random":
        sched = schedule_random(packets, channel, scenario.positions(), fusion_model,
                                scenario.compute_map(), tau, order_seed, **kwargs)
    else:
        raise InvalidArgumentError(f"unknown scheduler {scheduler!r}")

    n = len(scenario.cavs)
    breakdown = latency_breakdown(n, sched.joint_latency_s, channel, msgs)
    conf = global_confidence(cmap, assignment.members_by_area())
    report = ParadigmReport(
        paradigm="lgcp", n_cavs=n, volume_bits=lgcp_volume(assignment, n, msgs),
        latency_s=breakdown.total, objective=objective(conf, breakdown.t_delta, sched.joint_latency_s),
        feasible=breakdown.total <= t_max_s, global_confidence=conf, delta_g=delta_g,
        breakdown=breakdown, undeliverable=len(dropped), transmission_s=sched.transmission_time_s)
    return LgcpResult(report, assignment, sched, breakdown, tuple(dropped))


def _all_cav_confidence(cmap: ConfidenceMap | None) -> float | None:
    if cmap is None:
        return None
    if cmap.n_areas == 0:
        return 0.0
    return sum(group_confidence(cmap, a, cmap.cav_ids) for a in cmap.area_ids) / cmap.n_areas


def vehicle_based_run(scenario: Scenario, channel: ChannelParams, fusion_model: FusionCostModel,
                      full_bits: float = FULL_FEATURE_BITS, tau_s: float | None = None, *,
                      cmap: ConfidenceMap | None = None, t_max_s: float = DEFAULT_T_MAX_S,
                      shadow_seed: int | None = None, broadcast: bool = False) -> ParadigmReport:
    """All-to-all full-feature exchange; done when the slowest CAV finishes fusing.

    Unicast by default, so the volume is quadratic in the CAV count. Links
    failing the rate gate are counted as undeliverable and not scheduled.
    """
    ids = scenario.cav_ids
    n = len(ids)
    if n < 2:
        raise InvalidArgumentError("vehicle-based exchange needs at least 2 CAVs")
    tau = tau_s if tau_s is not None else slot_time(full_bits, channel)
    seed = scenario.seed if shadow_seed is None else shadow_seed
    pos = scenario.positions()
    compute = scenario.compute_map()

    if broadcast:
        volume = n * full_bits
        # every node receives each broadcast, so transmissions serialise
        recv_done = {j: n * tau for j in ids}
        received = {j: n - 1 for j in ids}
        undeliverable = 0
    else:
        volume = n * (n - 1) * full_bits
        packets, undeliverable = [], 0
        for s in ids:
            for d in ids:
                if s == d:
                    continue
                if link_state(channel, s, d, pos[s], pos[d], seed).feasible:
                    packets.append(Packet(s, d, d, full_bits))
                else:
                    undeliverable += 1
        sched = schedule(packets, channel, pos, fusion_model, compute, tau, areas={},
                         feature_bits=full_bits)
        recv_done = {j: 0.0 for j in ids}
        received = {j: 0 for j in ids}
        for p in sched.packets:
            recv_done[p.dst] = max(recv_done[p.dst], (p.slot + 1) * tau)
            received[p.dst] += 1
    latency = max(recv_done[j] + received[j] * fusion_model.flops_full_fusion / compute[j] for j in ids)
    conf = _all_cav_confidence(cmap)
    return ParadigmReport(
        paradigm="vehicle", n_cavs=n, volume_bits=volume, latency_s=latency,
        objective=None if conf is None else conf / latency, feasible=latency <= t_max_s,
        global_confidence=conf, undeliverable=undeliverable, transmission_s=max(recv_done.values()))


def edge_uplink_time(n_cavs: int, channel: ChannelParams, full_bits: float = FULL_FEATURE_BITS) -> float:
    return math.ceil(n_cavs / channel.n_subchannels) * full_bits / channel.fixed_rate_bps


def edge_assisted_run(scenario: Scenario, channel: ChannelParams, fusion_model: FusionCostModel,
                      full_bits: float = FULL_FEATURE_BITS, edge_compute: float = EDGE_COMPUTE_FLOPS, *,
                      cmap: ConfidenceMap | None = None, msgs: ControlMessageSizes | None = None,
                      t_max_s: float = DEFAULT_T_MAX_S) -> ParadigmReport:
    msgs = msgs or ControlMessageSizes()
    n = len(scenario.cavs)
    uplink = edge_uplink_time(n, channel, full_bits)
    fusion = n * fusion_model.flops_full_fusion / edge_compute
    downlink = msgs.d_g / channel.fixed_rate_bps
    latency = uplink + fusion + downlink
    conf = _all_cav_confidence(cmap)
    return ParadigmReport(
        paradigm="edge", n_cavs=n, volume_bits=n * full_bits, latency_s=latency,
        objective=None if conf is None else conf / latency, feasible=latency <= t_max_s,
        global_confidence=conf, transmission_s=uplink)
