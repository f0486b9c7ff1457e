"""Batch commands: scenario generation, sweeps, oracle verification and scheduler comparison."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checks
from .assignment import brute_force_groups, default_feature_bits, select_groups
from .confidence import ConfidenceMap, load_confidence, synthetic_confidence
from .config import ExperimentConfig
from .errors import LgcpError, RefusalError, ValidationError
from .paradigms import edge_assisted_run, lgcp_run, vehicle_based_run
from .radio import ChannelParams
from .scenario import Scenario, dumps_scenario, generate_scenario, load_scenario
from .scheduler import (FusionCostModel, Packet, assignment_areas, brute_force_schedule, build_packets,
                        schedule)

log = logging.getLogger(__name__)

ROW_FIELDS = ("seed", "n_cavs", "delta_g", "paradigm", "volume_bits", "latency_s", "objective",
              "feasible", "global_confidence", "transmission_s", "joint_latency_s",
              "t1", "t2", "t3", "t4", "t_delta", "n_groups", "n_packets", "makespan_slots",
              "undeliverable", "error")


@dataclass
class SweepResult:
    rows: list[dict] = field(default_factory=list)

    @property
    def n_errors(self) -> int:
        return sum(1 for r in self.rows if r.get("error"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(ROW_FIELDS)
        for row in self.rows:
            writer.writerow([_cell(row.get(k)) for k in ROW_FIELDS])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([{k: row.get(k) for k in ROW_FIELDS} for row in self.rows], indent=2) + "\n"


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def scenario_for(config: ExperimentConfig, seed: int, n_cavs: int) -> Scenario:
    if config.scenario_path is not None:
        return load_scenario(config.scenario_path)
    return generate_scenario(seed, n_cavs, config.n_background, config.grid, config.lane_width)


def confidence_for(config: ExperimentConfig, scenario: Scenario, seed: int) -> ConfidenceMap:
    path = config.confidence_path
    if path is None and scenario.confidence_source == "file":
        path = scenario.confidence_path
    if path is not None:
        return load_confidence(path, scenario)
    return synthetic_confidence(scenario, config.confidence, seed)


def feature_bits_for(config: ExperimentConfig, scenario: Scenario) -> float:
    if config.feature_bits is not None:
        return config.feature_bits
    g = scenario.grid
    return default_feature_bits(g.cell_area, g.roi_area, config.full_feature_bits)


# -- generate ---------------------------------------------------------------

def scenario_filename(seed: int, n_cavs: int) -> str:
    return f"scenario_s{seed}_n{n_cavs}.json"


def cmd_generate(config: ExperimentConfig, out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for seed in config.seeds:
        for n in config.n_cavs:
            path = out_dir / scenario_filename(seed, n)
            path.write_text(dumps_scenario(scenario_for(config, seed, n)))
            written.append(path)
    return written


# -- run --------------------------------------------------------------------

def _base_row(seed, n, delta_g, paradigm) -> dict:
    return {"seed": seed, "n_cavs": n, "delta_g": delta_g, "paradigm": paradigm}


def run_point(config: ExperimentConfig, seed: int, n_cavs: int) -> list[dict]:
    """All (delta_g, paradigm) rows for one scenario."""
    rows = []
    try:
        scenario = scenario_for(config, seed, n_cavs)
        cmap = confidence_for(config, scenario, seed)
    except LgcpError as exc:
        return [{**_base_row(seed, n_cavs, d, p), "error": f"{type(exc).__name__}: {exc}"}
                for d in config.delta_g for p in config.paradigms]
    n = len(scenario.cavs)
    fusion = config.fusion()
    bits = feature_bits_for(config, scenario)
    for delta_g in config.delta_g:
        for paradigm in config.paradigms:
            row = _base_row(seed, n, delta_g, paradigm)
            try:
                row.update(_run_paradigm(config, paradigm, scenario, cmap, delta_g, fusion, bits, seed))
            except LgcpError as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    return rows


def _run_paradigm(config, paradigm, scenario, cmap, delta_g, fusion, bits, seed) -> dict:
    ch = config.channel
    if paradigm == "lgcp":
        res = lgcp_run(scenario, cmap, delta_g, ch, fusion, config.messages, config.t_max_s,
                       feature_bits=bits, slot_mode=config.slot_mode, shadow_seed=seed,
                       dynamic_priority=config.priority == "dynamic")
        r, b = res.report, res.breakdown
        return {"volume_bits": r.volume_bits, "latency_s": r.latency_s, "objective": r.objective,
                "feasible": r.feasible, "global_confidence": r.global_confidence,
                "transmission_s": r.transmission_s, "joint_latency_s": b.joint_latency,
                "t1": b.t1, "t2": b.t2, "t3": b.t3, "t4": b.t4,
                "t_delta": b.t_delta, "n_groups": len(res.assignment.groups),
                "n_packets": len(res.schedule.packets), "makespan_slots": res.schedule.makespan_slots,
                "undeliverable": r.undeliverable}
    if paradigm == "vehicle":
        r = vehicle_based_run(scenario, ch, fusion, config.full_feature_bits, cmap=cmap,
                              t_max_s=config.t_max_s, shadow_seed=seed,
                              broadcast=config.vehicle_mode == "broadcast")
    else:
        r = edge_assisted_run(scenario, ch, fusion, config.full_feature_bits, config.edge_compute_flops,
                              cmap=cmap, msgs=config.messages, t_max_s=config.t_max_s)
    return {"volume_bits": r.volume_bits, "latency_s": r.latency_s, "objective": r.objective,
            "feasible": r.feasible, "global_confidence": r.global_confidence,
            "transmission_s": r.transmission_s, "undeliverable": r.undeliverable}


def _points(config: ExperimentConfig) -> list[tuple[int, int]]:
    ns = config.n_cavs if config.scenario_path is None else [0]
    return [(seed, n) for seed in config.seeds for n in ns]


def cmd_run(config: ExperimentConfig) -> SweepResult:
    points = _points(config)
    if config.jobs > 1:
        with ProcessPoolExecutor(config.jobs) as pool:
            chunks = list(pool.map(run_point, [config] * len(points), *zip(*points)))
    else:
        chunks = [run_point(config, s, n) for s, n in points]
    result = SweepResult([row for chunk in chunks for row in chunk])
    for row in result.rows:
        problems = checks.report_row_violations(row, config.t_max_s)
        if problems:
            raise ValidationError(f"row {row['seed']}/{row['n_cavs']}/{row['delta_g']}: {problems}")
    return result


# -- verify -----------------------------------------------------------------

def random_confidence_instance(rng: np.random.Generator, max_cavs: int, max_areas: int):
    n_cavs = int(rng.integers(1, max_cavs + 1))
    n_areas = int(rng.integers(1, max_areas + 1))
    values = rng.uniform(0, 1, size=(n_areas, n_cavs)) ** rng.choice([1, 2, 3])
    if rng.uniform() < 0.3:
        values = np.round(values, 1)  # force confidence ties
    delta_g = float(rng.choice([0.0, 0.025, 0.05, 0.075, 0.1, 0.125, 0.2, 0.3]))
    return ConfidenceMap.from_matrix(values), delta_g


def random_packet_instance(rng: np.random.Generator, max_packets: int, max_subchannels: int):
    n_nodes = int(rng.integers(2, 7))
    positions = {i: (float(rng.uniform(0, 600)), float(rng.uniform(0, 80))) for i in range(n_nodes)}
    pairs = [(s, d) for s in range(n_nodes) for d in range(n_nodes) if s != d]
    n_packets = int(rng.integers(1, max_packets + 1))
    picks = rng.choice(len(pairs), size=n_packets, replace=n_packets > len(pairs))
    packets = [Packet(pairs[k][0], pairs[k][1], area, 1.0) for area, k in enumerate(picks)]
    z = int(rng.integers(1, max_subchannels + 1))
    return packets, positions, ChannelParams(n_subchannels=z)


def _guard(config: ExperimentConfig) -> None:
    v = config.verify
    bad = []
    if v.max_cavs > 6 or v.max_areas > 6:
        bad.append(f"group instances up to {v.max_areas} areas x {v.max_cavs} CAVs (guard 6x6)")
    if v.max_packets > 8 or v.max_subchannels > 3:
        bad.append(f"schedule instances up to {v.max_packets} packets / Z={v.max_subchannels} (guard 8 / 3)")
    if bad:
        raise RefusalError("; ".join(bad))


def verify_groups(n_instances: int, seed: int, max_cavs: int = 6, max_areas: int = 6) -> dict:
    equal, ratios = 0, []
    mismatches = []
    for i in range(n_instances):
        cmap, delta_g = random_confidence_instance(np.random.default_rng([seed, i]), max_cavs, max_areas)
        greedy = select_groups(cmap, delta_g, 1.0)
        oracle = brute_force_groups(cmap, delta_g, 1.0)
        if greedy.members_by_area() == oracle.members_by_area():
            equal += 1
        else:
            mismatches.append(i)
        if oracle.max_load() > 0:
            ratios.append(greedy.max_load() / oracle.max_load())
    return {
        "members_equivalence": {"passed": equal, "total": n_instances, "mismatched_instances": mismatches},
        "leader_max_load_ratio": {
            "mean": statistics.fmean(ratios) if ratios else None,
            "max": max(ratios, default=None),
            "optimal_fraction": sum(r == 1.0 for r in ratios) / len(ratios) if ratios else None,
            "over_2x": sum(r > 2.0 for r in ratios),
        },
    }


def verify_schedules(n_instances: int, seed: int, max_packets: int = 8, max_subchannels: int = 3) -> dict:
    dominance, optimal, gaps, invalid = 0, 0, {}, []
    fusion = FusionCostModel(1.0)
    for i in range(n_instances):
        rng = np.random.default_rng([seed, 10_000 + i])
        packets, positions, ch = random_packet_instance(rng, max_packets, max_subchannels)
        sched = schedule(packets, ch, positions, fusion, {k: 1.0 for k in positions}, 1.0)
        best = brute_force_schedule(packets, ch, positions)
        gap = sched.makespan_slots - best
        dominance += gap >= 0
        optimal += gap == 0
        gaps[str(gap)] = gaps.get(str(gap), 0) + 1
        if checks.schedule_violations(sched, packets, ch, positions):
            invalid.append(i)
    return {
        "makespan_dominance": {"passed": dominance, "total": n_instances},
        "makespan_optimal_fraction": optimal / n_instances if n_instances else None,
        "makespan_gap_histogram": dict(sorted(gaps.items(), key=lambda kv: int(kv[0]))),
        "guard_schedule_validity": {"passed": n_instances - len(invalid), "total": n_instances,
                                    "invalid_instances": invalid},
    }


def verify_pipeline(config: ExperimentConfig) -> dict:
    """Re-check every LGCP schedule produced for the configured scenarios."""
    passed = total = 0
    failures = []
    for seed, n in _points(config):
        scenario = scenario_for(config, seed, n)
        cmap = confidence_for(config, scenario, seed)
        for delta_g in config.delta_g:
            res = lgcp_run(scenario, cmap, delta_g, config.channel, config.fusion(), config.messages,
                           config.t_max_s, feature_bits=feature_bits_for(config, scenario),
                           slot_mode=config.slot_mode, shadow_seed=seed,
                           dynamic_priority=config.priority == "dynamic")
            problems = checks.schedule_violations(res.schedule, build_packets(res.assignment),
                                                  config.channel, scenario.positions())
            replay = checks.replay_joint_latency(res.schedule, assignment_areas(res.assignment),
                                                 config.fusion(), scenario.compute_map(),
                                                 res.assignment.feature_bits)
            if not math.isclose(replay, res.schedule.joint_latency_s, rel_tol=1e-12, abs_tol=1e-15):
                problems.append(f"fusion replay {replay} != {res.schedule.joint_latency_s}")
            total += 1
            if problems:
                failures.append({"seed": seed, "n_cavs": n, "delta_g": delta_g, "problems": problems[:5]})
            else:
                passed += 1
    return {"conflict_freedom": {"passed": passed, "total": total, "failures": failures}}


def cmd_verify(config: ExperimentConfig) -> dict:
    _guard(config)
    v = config.verify
    seed = config.seeds[0]
    report = {}
    report.update(verify_groups(v.n_instances, seed, v.max_cavs, v.max_areas))
    report.update(verify_schedules(v.n_schedule_instances, seed, v.max_packets, v.max_subchannels))
    report.update(verify_pipeline(config))
    report["all_passed"] = verify_passed(report)
    return report


def verify_passed(report: dict) -> bool:
    keys = ("members_equivalence", "makespan_dominance", "guard_schedule_validity", "conflict_freedom")
    return all(report[k]["passed"] == report[k]["total"] for k in keys)


# -- compare-sched ----------------------------------------------------------

def cmd_compare_sched(config: ExperimentConfig) -> dict:
    if len(config.seeds) < 30:
        raise ValidationError(f"compare-sched needs at least 30 seeds, got {len(config.seeds)}")
    fusion = config.fusion()
    report = {"comparisons": []}
    for n in (config.n_cavs if config.scenario_path is None else [0]):
        for delta_g in config.delta_g:
            prio, rand = [], []
            for seed in config.seeds:
                scenario = scenario_for(config, seed, n)
                cmap = confidence_for(config, scenario, seed)
                kw = dict(feature_bits=feature_bits_for(config, scenario), slot_mode=config.slot_mode,
                          shadow_seed=seed)
                p = lgcp_run(scenario, cmap, delta_g, config.channel, fusion, config.messages,
                             config.t_max_s, dynamic_priority=config.priority == "dynamic", **kw)
                r = lgcp_run(scenario, cmap, delta_g, config.channel, fusion, config.messages,
                             config.t_max_s, scheduler="random", order_seed=seed, **kw)
                prio.append(p.schedule.joint_latency_s)
                rand.append(r.schedule.joint_latency_s)
            report["comparisons"].append(compare_summary(n, delta_g, config.seeds, prio, rand))
    return report


def compare_summary(n_cavs, delta_g, seeds, prio: list[float], rand: list[float]) -> dict:
    med_p, med_r = statistics.median(prio), statistics.median(rand)
    mean_p, mean_r = statistics.fmean(prio), statistics.fmean(rand)
    return {
        "n_cavs": n_cavs,
        "delta_g": delta_g,
        "n_seeds": len(seeds),
        "priority_median_s": med_p,
        "random_median_s": med_r,
        "priority_mean_s": mean_p,
        "random_mean_s": mean_r,
        "median_reduction": 1 - med_p / med_r if med_r > 0 else 0.0,
        "mean_reduction": 1 - mean_p / mean_r if mean_r > 0 else 0.0,
        "priority_not_worse_fraction": sum(p <= r for p, r in zip(prio, rand)) / len(prio),
        "per_seed": [{"seed": s, "priority_s": p, "random_s": r} for s, p, r in zip(seeds, prio, rand)],
    }
