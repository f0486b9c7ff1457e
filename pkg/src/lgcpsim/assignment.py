"""Greedy per-area group construction and min-max leader assignment."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .confidence import ConfidenceMap, group_confidence
from .errors import InvalidArgumentError, RefusalError

FULL_FEATURE_BITS = 2.16e6

BRUTE_FORCE_MAX_CAVS = 6
BRUTE_FORCE_MAX_AREAS = 6


@dataclass(frozen=True)
class Group:
    area_id: int
    members: tuple[int, ...]  # admission order
    leader: int

    def __post_init__(self):
        if not self.members:
            raise InvalidArgumentError(f"group for area {self.area_id} has no members")
        if len(set(self.members)) != len(self.members):
            raise InvalidArgumentError(f"group for area {self.area_id} repeats a member")
        if self.leader not in self.members:
            raise InvalidArgumentError(f"leader {self.leader} not a member of area {self.area_id}")

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def followers(self) -> tuple[int, ...]:
        return tuple(m for m in self.members if m != self.leader)


@dataclass(frozen=True)
class Assignment:
    groups: dict[int, Group]
    loads: dict[int, float]
    feature_bits: float
    cav_ids: tuple[int, ...] = field(default=())

    def members_by_area(self) -> dict[int, tuple[int, ...]]:
        return {a: g.members for a, g in self.groups.items()}

    def max_load(self) -> float:
        return max(self.loads.values(), default=0.0)

    def to_dict(self) -> dict:
        return {
            "feature_bits": self.feature_bits,
            "groups": [{"area_id": a, "members": list(g.members), "leader": g.leader}
                       for a, g in sorted(self.groups.items())],
            "loads": {str(c): self.loads[c] for c in sorted(self.loads)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def compute_loads(groups: Iterable[Group], feature_bits: float,
                  cav_ids: Iterable[int] = ()) -> dict[int, float]:
    """Fusion load per CAV: group size times feature bits, summed over groups it leads."""
    loads = {c: 0.0 for c in cav_ids}
    for g in groups:
        loads[g.leader] = loads.get(g.leader, 0.0) + g.size * feature_bits
    return loads


def default_feature_bits(cell_area: float, roi_area: float,
                         full_bits: float = FULL_FEATURE_BITS) -> float:
    """Per-area slice of the full shared feature, proportional to cell area."""
    return full_bits * cell_area / roi_area


def rank_cavs(cmap: ConfidenceMap, area_id: int) -> list[int]:
    """CAV ids by descending confidence for the area, ties by ascending id."""
    row = cmap.row(area_id)
    return sorted(row, key=lambda c: (-row[c], c))


def admission_gain(cmap: ConfidenceMap, area_id: int, current: list[int], cav_id: int) -> float:
    before = group_confidence(cmap, area_id, current) if current else 0.0
    return group_confidence(cmap, area_id, [*current, cav_id]) - before


def _admits(cmap, area_id, current, cav_id, delta_g) -> bool:
    # zero-confidence CAVs add nothing even when delta_g == 0
    return cmap.value(area_id, cav_id) > 0 and admission_gain(cmap, area_id, current, cav_id) >= delta_g


def build_group_members(cmap: ConfidenceMap, area_id: int, delta_g: float) -> list[int]:
    """Scan CAVs in rank order, stopping at the first one whose gain is below delta_g."""
    members: list[int] = []
    for cav_id in rank_cavs(cmap, area_id):
        if not _admits(cmap, area_id, members, cav_id, delta_g):
            break
        members.append(cav_id)
    return members


def assign_leaders(member_lists: Mapping[int, Iterable[int]], feature_bits: float,
                   cav_ids: Iterable[int] = ()) -> Assignment:
    """Largest groups first; each takes its least-loaded member as leader."""
    cav_ids = tuple(cav_ids)
    loads = {c: 0.0 for c in cav_ids}
    order = sorted(member_lists, key=lambda a: (-len(tuple(member_lists[a])), a))
    groups = {}
    for area in order:
        members = tuple(member_lists[area])
        leader = min(members, key=lambda c: (loads.get(c, 0.0), c))
        loads[leader] = loads.get(leader, 0.0) + len(members) * feature_bits
        groups[area] = Group(area, members, leader)
    return Assignment(dict(sorted(groups.items())), loads, feature_bits, cav_ids)


def select_groups(cmap: ConfidenceMap, delta_g: float, feature_bits: float) -> Assignment:
    if not 0 <= delta_g <= 1:
        raise InvalidArgumentError(f"delta_g must lie in [0, 1], got {delta_g}")
    if not feature_bits > 0:
        raise InvalidArgumentError("feature_bits must be > 0")
    member_lists = {}
    for area in cmap.area_ids:
        members = build_group_members(cmap, area, delta_g)
        if members:
            member_lists[area] = members
    return assign_leaders(member_lists, feature_bits, cmap.cav_ids)


def brute_force_groups(cmap: ConfidenceMap, delta_g: float, feature_bits: float,
                       max_group_size: int | None = None) -> Assignment:
    """Exhaustive reference for ``select_groups`` on small instances.

    Members: among all subsets that are closed under the confidence ranking
    (no skipped higher-ranked CAV) and whose every member clears delta_g over
    the members admitted before it, take the largest. Leaders: every
    combination is enumerated; the one with the smallest maximum load wins,
    ties broken lexicographically over groups in ascending area order.
    """
    if cmap.n_cavs > BRUTE_FORCE_MAX_CAVS or cmap.n_areas > BRUTE_FORCE_MAX_AREAS:
        raise RefusalError(f"instance {cmap.n_areas} areas x {cmap.n_cavs} CAVs exceeds the "
                           f"{BRUTE_FORCE_MAX_AREAS}x{BRUTE_FORCE_MAX_CAVS} guard")
    if not 0 <= delta_g <= 1:
        raise InvalidArgumentError(f"delta_g must lie in [0, 1], got {delta_g}")
    limit = cmap.n_cavs if max_group_size is None else max_group_size

    member_lists = {}
    for area in cmap.area_ids:
        rank = rank_cavs(cmap, area)
        pos = {c: i for i, c in enumerate(rank)}
        best: tuple[int, ...] = ()
        for size in range(1, min(limit, cmap.n_cavs) + 1):
            for subset in itertools.combinations(cmap.cav_ids, size):
                ordered = sorted(subset, key=pos.__getitem__)
                if [pos[c] for c in ordered] != list(range(size)):
                    continue
                if all(_admits(cmap, area, ordered[:k], c, delta_g) for k, c in enumerate(ordered)):
                    best = tuple(ordered)
        if best:
            member_lists[area] = best

    areas = sorted(member_lists)
    best_leaders, best_max = None, float("inf")
    for leaders in itertools.product(*(member_lists[a] for a in areas)):
        loads: dict[int, float] = {}
        for a, leader in zip(areas, leaders):
            loads[leader] = loads.get(leader, 0.0) + len(member_lists[a]) * feature_bits
        peak = max(loads.values(), default=0.0)
        if peak < best_max:
            best_leaders, best_max = leaders, peak
    groups = {}
    if best_leaders is not None:
        groups = {a: Group(a, member_lists[a], l) for a, l in zip(areas, best_leaders)}
    loads = compute_loads(groups.values(), feature_bits, cmap.cav_ids)
    return Assignment(groups, loads, feature_bits, cmap.cav_ids)
