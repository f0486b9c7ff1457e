import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgcpsim.errors import InvalidArgumentError
from lgcpsim.radio import ChannelParams, achievable_rate_bps, conflicts, link_state, path_loss_db
from lgcpsim.scheduler import Packet

CH = ChannelParams()


@pytest.mark.parametrize("d, expected", [(1000, 128.1), (100, 91.5), (10_000, 164.7)])
def test_path_loss_km_form(d, expected):
    assert path_loss_db(d) == pytest.approx(expected, abs=1e-9)


def test_path_loss_floor_and_errors():
    assert path_loss_db(0.5) == path_loss_db(1.0)
    for bad in (0, -3):
        with pytest.raises(InvalidArgumentError):
            path_loss_db(bad)


@settings(max_examples=200)
@given(st.floats(1.0, 1e5), st.floats(1e-3, 1e4))
def test_path_loss_increasing_above_floor(d, step):
    assert path_loss_db(d + step) > path_loss_db(d)


def test_rate_at_100m():
    # SNR = 23 - 91.5 + 114 = 45.5 dB
    assert achievable_rate_bps(CH, 100.0) == pytest.approx(8e6 * math.log2(1 + 10 ** 4.55), rel=1e-12)
    assert achievable_rate_bps(CH, 100.0) == pytest.approx(1.209e8, rel=1e-3)


def test_rate_at_zero_db_snr():
    assert achievable_rate_bps(CH, 100.0, shadowing_db=45.5) == pytest.approx(8e6, rel=1e-9)


def test_rate_vanishes_far_away():
    assert achievable_rate_bps(CH, 1e9) < 1e-3


def test_link_gate_feasible_and_infeasible():
    no_shadow = ChannelParams(shadow_sigma_db=0.0)
    near = link_state(no_shadow, 0, 1, (0, 0), (100, 0), seed=1)
    assert near.feasible and near.rate_bps == 27e6
    assert near.achievable_bps == pytest.approx(1.209e8, rel=1e-3)
    # ~1150 m gives log2(1 + snr) = 2.5, i.e. 20 Mbps on 8 MHz
    far = link_state(no_shadow, 0, 1, (0, 0), (1149.8214990538625, 0), seed=1)
    assert far.achievable_bps == pytest.approx(2.0e7, rel=1e-6)
    assert not far.feasible and far.rate_bps == 0.0


@settings(max_examples=100)
@given(st.integers(0, 2**63 - 1), st.integers(0, 50), st.integers(0, 50))
def test_shadowing_symmetric_and_deterministic(seed, a, b):
    if a == b:
        return
    ab = link_state(CH, a, b, (0, 0), (50, 10), seed)
    ba = link_state(CH, b, a, (50, 10), (0, 0), seed)
    assert ab.shadowing_db == ba.shadowing_db
    assert ab == link_state(CH, a, b, (0, 0), (50, 10), seed)


def test_shadowing_statistics():
    draws = [link_state(CH, 0, k, (0, 0), (1, 0), seed=3).shadowing_db for k in range(1, 4001)]
    mean = sum(draws) / len(draws)
    sd = math.sqrt(sum((x - mean) ** 2 for x in draws) / (len(draws) - 1))
    assert abs(mean) < 0.5 and abs(sd - 8.0) < 0.4


def test_channel_invariants():
    with pytest.raises(InvalidArgumentError):
        ChannelParams(n_subchannels=0)
    with pytest.raises(InvalidArgumentError):
        ChannelParams(n_subchannels=6)  # 48 MHz > 40 MHz
    with pytest.raises(InvalidArgumentError):
        ChannelParams(rate_gate_mbps=20.0)


POS = {0: (0.0, 0.0), 1: (20.0, 0.0), 2: (1000.0, 0.0), 3: (1020.0, 0.0), 4: (50.0, 0.0), 5: (70.0, 0.0)}


def pkt(src, dst, z, area=0):
    return Packet(src, dst, area, 1.0, subchannel=z, slot=0)


def test_same_source_conflicts_on_any_subchannel():
    assert conflicts(pkt(0, 1, 0), [pkt(0, 3, 1, area=1)], POS, 200.0)


def test_cochannel_within_radius_conflicts():
    # placed transmitter 4 is 50 m from the candidate's receiver 0
    assert conflicts(pkt(1, 0, 2), [pkt(4, 5, 2, area=1)], POS, 200.0)
    assert not conflicts(pkt(1, 0, 2), [pkt(4, 5, 3, area=1)], POS, 200.0)


def test_disjoint_far_different_subchannels():
    assert not conflicts(pkt(0, 1, 0), [pkt(2, 3, 1, area=1)], POS, 200.0)
    assert not conflicts(pkt(0, 1, 0), [pkt(2, 3, 0, area=1)], POS, 200.0)


def test_half_duplex_and_single_reception():
    assert conflicts(pkt(0, 1, 0), [pkt(1, 3, 1, area=1)], POS, 200.0)  # 1 would send and receive
    assert conflicts(pkt(0, 1, 0), [pkt(2, 1, 1, area=1)], POS, 200.0)  # 1 would receive twice


node = st.integers(0, 5)


@st.composite
def packets(draw):
    src = draw(node)
    dst = draw(node.filter(lambda d: d != src))
    return Packet(src, dst, draw(st.integers(0, 9)), 1.0, subchannel=draw(st.integers(0, 2)), slot=0)


positions = st.dictionaries(node, st.tuples(st.floats(0, 600), st.floats(0, 80)), min_size=6, max_size=6)


@settings(max_examples=300)
@given(packets(), packets(), positions, st.floats(0, 400))
def test_conflicts_pairwise_symmetric(p, q, pos, radius):
    assert conflicts(p, [q], pos, radius) == conflicts(q, [p], pos, radius)


@settings(max_examples=300)
@given(packets(), st.lists(packets(), max_size=4), st.lists(packets(), max_size=4), positions)
def test_conflicts_monotone_in_placed_set(p, small, extra, pos):
    if conflicts(p, small, pos, 200.0):
        assert conflicts(p, small + extra, pos, 200.0)
