import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgcpsim.assignment import FULL_FEATURE_BITS
from lgcpsim.checks import report_row_violations
from lgcpsim.confidence import ConfidenceMap, synthetic_confidence
from lgcpsim.errors import InvalidArgumentError
from lgcpsim.paradigms import (ControlMessageSizes, control_latency, edge_assisted_run, edge_uplink_time,
                               latency_breakdown, lgcp_run, lgcp_volume, objective, resolve_slot,
                               vehicle_based_run)
from lgcpsim.radio import ChannelParams
from lgcpsim.scenario import CavState, Scenario, build_grid, generate_scenario, mark_occupancy
from lgcpsim.scheduler import FusionCostModel

CH = ChannelParams(shadow_sigma_db=0.0)
MSGS = ControlMessageSizes()
COALIGN = FusionCostModel.preset("coalign")
W2C = FusionCostModel.preset("where2comm")


def line_scenario(n, spacing=10.0):
    pos = [(5.0 + spacing * i, 3.0) for i in range(n)]
    grid = mark_occupancy(build_grid(280, 80, 10, 6), pos)
    return Scenario(grid, tuple(CavState(i, p) for i, p in enumerate(pos)))


def test_discovery_stage_for_five_cavs():
    # five CAVs fit in one wave of five subchannels
    b = latency_breakdown(5, 0.0, CH, MSGS)
    assert b.t1 == pytest.approx(3200 / 27e6)
    assert b.t2 == pytest.approx(8000 / 27e6)
    assert b.t4 == pytest.approx(160000 / 27e6)
    assert latency_breakdown(6, 0.0, CH, MSGS).t1 == pytest.approx(4800 / 27e6)


def test_breakdown_identities():
    b = latency_breakdown(7, 0.0123, CH, MSGS)
    assert b.total == pytest.approx(b.t_delta + 0.0123, rel=1e-12)
    assert b.stage_sum() == pytest.approx(b.total, rel=1e-12)
    assert b.t_delta == pytest.approx(control_latency(7, CH, MSGS))


def test_feasibility_flag_against_deadline():
    row = {"paradigm": "lgcp", "t_delta": 0.02, "joint_latency_s": 0.1, "latency_s": 0.12,
           "t1": 0.005, "t2": 0.005, "t3": 0.105, "t4": 0.005, "feasible": False}
    assert report_row_violations(row, 0.1) == []
    assert report_row_violations({**row, "feasible": True}, 0.1) != []


@pytest.mark.parametrize("conf, t_delta, joint, expected", [(0.8, 0.01, 0.03, 20.0), (0.0, 0.01, 0.03, 0.0)])
def test_objective_examples(conf, t_delta, joint, expected):
    assert objective(conf, t_delta, joint) == pytest.approx(expected)


def test_objective_needs_positive_latency():
    with pytest.raises(InvalidArgumentError):
        objective(0.5, 0.0, 0.0)


def test_slot_modes():
    assert resolve_slot(27e6 * 1e-3, CH) == pytest.approx(1e-3)
    assert resolve_slot(1.0, CH, "table") == 0.25e-3
    with pytest.raises(InvalidArgumentError):
        resolve_slot(1.0, CH, "bogus")


def test_threshold_one_leaves_only_control_traffic():
    s = line_scenario(3)
    cmap = ConfidenceMap.from_matrix([[0.3, 0.2, 0.1]] * len(s.grid.occupied), area_ids=sorted(s.grid.occupied))
    r = lgcp_run(s, cmap, 1.0, CH, COALIGN)
    assert r.assignment.groups == {}
    assert r.schedule.joint_latency_s == 0.0
    assert r.report.global_confidence == 0.0 and r.report.objective == 0.0
    assert r.report.volume_bits == pytest.approx(1600 + 3 * 1600 + 8000 + 160000)


def test_volume_counts_follower_features_and_reports():
    s = line_scenario(3)
    cmap = ConfidenceMap.from_matrix([[0.5, 0.5, 0.5]] * 3, area_ids=sorted(s.grid.occupied))
    r = lgcp_run(s, cmap, 0.0, CH, COALIGN, feature_bits=1000.0)
    followers = sum(g.size - 1 for g in r.assignment.groups.values())
    assert followers == 6
    assert r.report.volume_bits == pytest.approx(6 * 1000 + 3 * 160000 + 1600 + 3 * 1600 + 8000 + 160000)
    assert r.report.volume_bits == lgcp_volume(r.assignment, 3, MSGS)


@pytest.mark.parametrize("n, expected", [(2, 4.32e6), (4, 12 * FULL_FEATURE_BITS)])
def test_vehicle_volume_is_quadratic(n, expected):
    r = vehicle_based_run(line_scenario(n), CH, COALIGN)
    assert r.volume_bits == pytest.approx(expected)


def test_vehicle_two_cav_latency_closed_form():
    # two 80 ms transfers share the only pair, then each CAV fuses one feature
    r = vehicle_based_run(line_scenario(2), CH, COALIGN)
    assert r.latency_s == pytest.approx(2 * FULL_FEATURE_BITS / 27e6 + 2684e6 / 0.1e12)


def test_vehicle_needs_two_cavs():
    with pytest.raises(InvalidArgumentError):
        vehicle_based_run(line_scenario(1), CH, COALIGN)


def test_vehicle_broadcast_volume():
    r = vehicle_based_run(line_scenario(4), CH, COALIGN, broadcast=True)
    assert r.volume_bits == pytest.approx(4 * FULL_FEATURE_BITS)


def test_edge_closed_form():
    assert edge_uplink_time(5, CH) == pytest.approx(0.080)
    assert edge_uplink_time(6, CH) == pytest.approx(0.160)
    r = edge_assisted_run(line_scenario(5), CH, W2C)
    assert r.latency_s == pytest.approx(0.080 + 0.0035 + 160000 / 27e6)
    assert r.volume_bits == pytest.approx(5 * FULL_FEATURE_BITS)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 7), st.sampled_from([0.0, 0.05, 0.075, 0.1, 0.2]))
def test_volume_ordering_and_row_identities(seed, n, delta_g):
    s = generate_scenario(seed, n, 10)
    cmap = synthetic_confidence(s, seed=seed)
    r = lgcp_run(s, cmap, delta_g, ChannelParams(), COALIGN)
    v = vehicle_based_run(s, ChannelParams(), COALIGN)
    e = edge_assisted_run(s, ChannelParams(), COALIGN)
    assert v.volume_bits == pytest.approx(n * (n - 1) * FULL_FEATURE_BITS)
    assert e.volume_bits == pytest.approx(n * FULL_FEATURE_BITS)
    b = r.breakdown
    assert b.total == pytest.approx(b.t_delta + r.schedule.joint_latency_s, rel=1e-9)
    assert b.stage_sum() == pytest.approx(b.total, rel=1e-9)
    assert r.report.feasible == (b.total <= 0.1)
    if r.report.objective:
        assert math.isclose(r.report.objective, r.report.global_confidence / b.total, rel_tol=1e-12)


def test_higher_threshold_never_adds_volume():
    s = generate_scenario(4, 6, 10)
    cmap = synthetic_confidence(s, seed=4)
    vols = [lgcp_run(s, cmap, d, ChannelParams(), COALIGN).report.volume_bits
            for d in (0.0, 0.05, 0.075, 0.1, 0.2, 1.0)]
    assert all(a >= b for a, b in zip(vols, vols[1:]))
