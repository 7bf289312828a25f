import math

import pytest

from fpmfft import SpeedFunction, determine_pad_length, plan_padding, solve_heterogeneous
from fpmfft.padding import modelled_cost


def model(speeds_by_length, xs=(1, 8, 64)):
    return SpeedFunction.from_speeds(1, {(x, y): s for y, s in speeds_by_length.items() for x in xs})


def test_pads_to_faster_length():
    # 1000 is slow; 1024 is fast enough to pay for the extra work, 2048 is not
    sf = model({1000: 1e9, 1024: 3e9, 2048: 3.2e9})
    d = determine_pad_length(sf, 8, 1000)
    assert d.padded and d.padded_length == 1024
    t_n = 2.5 * 8 * 1000 * math.log2(1000) / 1e9
    t_v = 2.5 * 8 * 1024 * 10 / 3e9
    assert d.predicted_gain_s == pytest.approx(t_n - t_v, rel=1e-12)


def test_no_improvement_keeps_n():
    sf = model({1000: 5e9, 1024: 3e9})
    d = determine_pad_length(sf, 8, 1000)
    assert not d.padded and d.padded_length == 1000 and d.predicted_gain_s == 0.0


def test_equal_time_does_not_pad():
    # 2.5*8*16*4/1 == 2.5*8*32*5/2.5 == 1280
    sf = model({16: 1.0, 32: 2.5})
    assert modelled_cost(sf, 8, 32) == modelled_cost(sf, 8, 16) == 1280.0
    d = determine_pad_length(sf, 8, 16)
    assert d.padded_length == 16


def test_tie_between_candidates_prefers_shorter():
    # 32 and 64 both cost the same: 2.5*x*V*log2(V)/s with s proportional to V*log2(V)
    sf = model({16: 1.0, 32: 32 * 5 * 10.0, 64: 64 * 6 * 10.0})
    assert modelled_cost(sf, 8, 32) == modelled_cost(sf, 8, 64)
    assert determine_pad_length(sf, 8, 16).padded_length == 32


def test_notes():
    sf = model({16: 1.0})
    assert determine_pad_length(sf, 8, 16).note == "no candidates"
    assert determine_pad_length(sf, 0, 16).note == "no rows"
    assert determine_pad_length(model({8: 1.0, 32: 1.0}), 4, 16).padded_length in (16, 32)
    assert determine_pad_length(model({32: 1.0}), 4, 16).note == "base length not modelled"


def test_proxy_objective_can_differ():
    sf = model({100: 1.0, 128: 1.4, 1024: 12.0})
    assert determine_pad_length(sf, 8, 100, objective="proxy").padded_length == 1024
    assert determine_pad_length(sf, 8, 100, objective="time").padded_length == 128
    with pytest.raises(ValueError):
        determine_pad_length(sf, 8, 100, objective="bogus")


def test_plan_padding_per_group():
    g1 = SpeedFunction.from_speeds(1, {(x, y): s for x in (1, 8) for y, s in ((12, 1.0), (16, 5.0))})
    g2 = SpeedFunction.from_speeds(2, {(x, 12): 1.0 for x in (1, 8)})
    dist = solve_heterogeneous([g1, g2], 12)
    pads = plan_padding([g1, g2], dist, 12)
    assert [p.group_id for p in pads] == [1, 2]
    assert pads[1].padded_length == 12
    assert pads[0].padded_length == (16 if dist.counts[0] else 12)
