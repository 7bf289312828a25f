import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpmfft import (
    DomainError,
    SpeedCurve,
    SpeedFunction,
    brute_force_partition,
    harmonic_mean_curve,
    homogeneity_check,
    partition,
    predicted_time,
    solve_heterogeneous,
    solve_homogeneous,
)
from conftest import const_model


def test_two_speeds_hand_case():
    # per-row time is 20 / s at n = 4: 2 s on the fast group, 4 s on the slow one
    fast = const_model(1, 10.0, range(1, 5), [4])
    slow = const_model(2, 5.0, range(1, 5), [4])
    d = solve_heterogeneous([fast, slow], 4)
    assert d.counts == (3, 1)
    assert d.objective_time_s == pytest.approx(6.0, rel=1e-15)
    assert partition([fast, slow], 4).path == "heterogeneous"


def test_dip_avoided_and_lexicographic_tie():
    speeds = {(x, 10): (10.0 if x == 5 else 100.0) for x in range(1, 11)}
    a, b = SpeedFunction.from_speeds(1, speeds), SpeedFunction.from_speeds(2, speeds)
    d = partition([a, b], 10)
    assert d.path == "homogeneous"
    # (5, 5) hits the dip; (4, 6) and (6, 4) tie and the smaller vector wins
    assert d.counts == (4, 6)


def test_zero_rows_allowed_unless_strict():
    fast = const_model(1, 1000.0, range(1, 9), [8])
    slow = const_model(2, 1.0, range(1, 9), [8])
    assert solve_heterogeneous([fast, slow], 8).counts == (8, 0)
    assert solve_heterogeneous([fast, slow], 8, strict_positive=True).counts == (7, 1)
    with pytest.raises(DomainError):
        solve_heterogeneous([fast, slow, fast], 2, strict_positive=True)


def test_predicted_time():
    sf = const_model(1, 40.0, [1, 4], [16])
    assert predicted_time(sf, 2, 16) == pytest.approx(2.5 * 2 * 16 * 4 / 40.0)
    assert predicted_time(sf, 0, 16) == 0.0
    with pytest.raises(DomainError):
        predicted_time(sf, 1, 1)


def test_harmonic_mean_and_rdiff():
    c1 = SpeedCurve("y", 8, [1, 2], [50.0, 10.0])
    c2 = SpeedCurve("y", 8, [1, 2], [100.0, 10.0])
    avg = harmonic_mean_curve([c1, c2])
    assert avg.speeds[0] == pytest.approx(200 / 3, rel=1e-12)
    assert avg.speeds[1] == 10.0
    rep = homogeneity_check([c1, c2])
    assert rep.worst_rdiff == 1.0 and rep.worst_point_x == 1 and not rep.is_identical


def test_homogeneity_on_shared_range():
    c1 = SpeedCurve("y", 8, [1, 3, 9], [10.0, 10.4, 99.0])
    c2 = SpeedCurve("y", 8, [2, 3], [10.1, 10.1])
    rep = homogeneity_check([c1, c2], 0.05)
    # compared at x = 2, 3 only; c1 is 10.2 at x=2 and 10.4 at x=3
    assert rep.is_identical and rep.worst_rdiff == pytest.approx(0.3 / 10.1)
    avg = harmonic_mean_curve([c1, c2])
    assert avg.free.tolist() == [2, 3]
    assert avg.speeds[0] == pytest.approx(2 / (1 / 10.2 + 1 / 10.1))


def test_disjoint_curves_are_not_identical():
    c1 = SpeedCurve("y", 8, [1, 2], [10.0, 10.0])
    c2 = SpeedCurve("y", 8, [7], [10.0])
    rep = homogeneity_check([c1, c2])
    assert not rep.is_identical and rep.worst_rdiff == float("inf")
    with pytest.raises(DomainError):
        harmonic_mean_curve([c1, c2])


def test_exact_epsilon_counts_as_identical():
    rep = homogeneity_check([SpeedCurve("y", 8, [1], [1.0]), SpeedCurve("y", 8, [1], [1.05])], 0.05)
    assert rep.worst_rdiff > 0.05 and rep.is_identical


def test_missing_length_is_domain_error():
    sf = const_model(1, 1.0, [1, 2], [32])
    with pytest.raises(DomainError):
        partition([sf, sf], 16)


def test_n_one():
    sf = const_model(1, 1.0, [1], [2])
    d = solve_heterogeneous([sf, sf], 1)
    assert sum(d.counts) == 1 and d.objective_time_s == 0.0


def test_brute_force_guard():
    sf = const_model(1, 1.0, [1], [2])
    with pytest.raises(ValueError):
        brute_force_partition([sf] * 8, 2000)


@st.composite
def problems(draw, max_p=4, max_n=24):
    p = draw(st.integers(1, max_p))
    n = draw(st.integers(2, max_n))
    sfs = []
    for pid in range(1, p + 1):
        xs = draw(st.lists(st.integers(1, n), min_size=1, max_size=n, unique=True))
        sp = draw(st.lists(st.floats(1.0, 100.0), min_size=len(xs), max_size=len(xs)))
        sfs.append(SpeedFunction.from_speeds(pid, {(x, n): s for x, s in zip(xs, sp)}))
    return sfs, n


@settings(max_examples=150, deadline=None)
@given(problems())
def test_property_dp_matches_enumeration(prob):
    sfs, n = prob
    d = solve_heterogeneous(sfs, n)
    bf = brute_force_partition(sfs, n)
    assert sum(d.counts) == n and min(d.counts) >= 0
    assert d.objective_time_s == pytest.approx(bf.objective_time_s, rel=1e-12)
    assert d.counts == bf.counts


@settings(max_examples=80, deadline=None)
@given(problems(), st.randoms(use_true_random=False))
def test_property_permutation_invariant_objective(prob, rnd):
    sfs, n = prob
    perm = list(sfs)
    rnd.shuffle(perm)
    perm = [SpeedFunction(i + 1, sf) for i, sf in enumerate(perm)]
    a = solve_heterogeneous(sfs, n).objective_time_s
    b = solve_heterogeneous(perm, n).objective_time_s
    assert a == pytest.approx(b, rel=1e-12)


@settings(max_examples=80, deadline=None)
@given(problems(), st.integers(-4, 4))
def test_property_power_of_two_speed_scaling(prob, k):
    sfs, n = prob
    f = 2.0 ** k
    scaled = [SpeedFunction.from_speeds(sf.processor_id, {key: pt.speed * f for key, pt in sf.points.items()})
              for sf in sfs]
    a, b = solve_heterogeneous(sfs, n), solve_heterogeneous(scaled, n)
    assert a.counts == b.counts
    assert b.objective_time_s == pytest.approx(a.objective_time_s / f, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(problems(max_p=1), st.integers(2, 4))
def test_property_identical_groups_take_homogeneous_path(prob, p):
    (sf,), n = prob
    clones = [SpeedFunction(i, sf) for i in range(1, p + 1)]
    d = partition(clones, n)
    assert d.path == "homogeneous" and d.report.worst_rdiff == 0.0
    direct = solve_homogeneous(sf, p, n)
    assert d.counts == direct.counts
    assert d.objective_time_s == pytest.approx(solve_heterogeneous(clones, n).objective_time_s, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(problems())
def test_property_strict_positive(prob):
    sfs, n = prob
    if n < len(sfs):
        return
    d = solve_heterogeneous(sfs, n, strict_positive=True)
    bf = brute_force_partition(sfs, n, strict_positive=True)
    assert min(d.counts) >= 1 and d.counts == bf.counts


def test_ranges():
    sf = const_model(1, 1.0, [1], [8])
    d = solve_heterogeneous([sf, sf, sf], 8)
    starts = [s for s, _ in d.ranges()]
    assert starts == list(np.cumsum((0,) + d.counts[:-1]))
