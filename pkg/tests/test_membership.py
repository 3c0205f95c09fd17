import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dtn_parking.core import Current, TemporalInterval, TemporalPoint
from dtn_parking.membership import (
    DoubleJoin, InvalidInterval, LeaveWithoutJoin, MembershipHistory, OutOfOrder,
    ScriptParseError, eligible_receivers, history_from_events, join, leave,
    load_membership_script, save_membership_script, valid_receiver,
)

from helpers import bitmap, histories


def h_of(*events):
    return history_from_events(events)


def test_join_opens_interval_and_leave_closes_it():
    h = h_of(join(1, 2, 5))
    assert h.intervals(1, 2) == [(5, None)]
    h.apply(leave(1, 2, 9))
    assert h.intervals(1, 2) == [(5, 9)]


def test_illegal_sequences_raise():
    with pytest.raises(DoubleJoin):
        h_of(join(1, 2, 5), join(1, 2, 7))
    with pytest.raises(LeaveWithoutJoin):
        h_of(leave(1, 2, 5))
    with pytest.raises(OutOfOrder):
        h_of(join(1, 2, 5), leave(1, 2, 3))


def test_point_queries_are_half_open():
    h = h_of(join(1, 2, 5), leave(1, 2, 9))
    assert h.is_member_at(1, 2, 5)
    assert not h.is_member_at(1, 2, 9)
    assert not h.is_member_at(1, 2, 4)
    assert not MembershipHistory().is_member_at(1, 2, 5)


def test_member_during_examples():
    h = h_of(join(1, 2, 5), leave(1, 2, 9))
    assert h.member_during(1, 2, 0, 10)
    assert not h.member_during(1, 2, 9, 12)
    assert h_of(join(1, 2, 5)).member_during(1, 2, 100, 200)
    with pytest.raises(InvalidInterval):
        h.member_during(1, 2, 3, 2)


def test_zero_length_membership_holds_no_instant():
    h = h_of(join(0, 0, 4), leave(0, 0, 4))
    assert not h.is_member_at(0, 0, 4)
    assert not h.member_during(0, 0, 0, 100)


def test_valid_receiver_examples():
    h = h_of(join(1, 2, 5), leave(1, 2, 9))
    assert valid_receiver(Current(), h, 1, 2, 7)
    h2 = h_of(join(1, 2, 5), leave(1, 2, 8))
    assert valid_receiver(TemporalInterval(0, 10), h2, 1, 2, 20)
    assert not valid_receiver(TemporalPoint(15), h, 1, 2, 7)


def test_interval_not_started_yet_is_invalid():
    h = h_of(join(1, 2, 0))
    assert not valid_receiver(TemporalInterval(50, 60), h, 1, 2, 10)


def test_eligible_receivers_examples():
    h = h_of(join(1, 0, 0))
    assert eligible_receivers(Current(), h, 0, 5, [1, 2]) == {1}
    assert eligible_receivers(Current(), MembershipHistory(), 0, 5, [1, 2]) == set()
    h2 = h_of(join(2, 0, 3), join(1, 0, 10))
    # oracle: enumerate nodes and check point membership at p directly
    p = t = 7
    expected = {n for n in (1, 2) if h2.is_member_at(n, 0, p)}
    assert expected == {2}
    assert eligible_receivers(TemporalPoint(p), h2, 0, t, [1, 2]) == expected


def test_script_round_trip():
    text = "# comment\n0,1,0,J\n10,1,0,L\n\n12,2,1,J\n"
    events = load_membership_script(text)
    assert save_membership_script(events) == "0,1,0,J\n10,1,0,L\n12,2,1,J\n"


@pytest.mark.parametrize("text,line", [
    ("0,1,0,J\n5,1,0,J\n", 2),
    ("0,1,0,X\n", 1),
    ("0,1,0\n", 1),
    ("5,1,0,J\n3,2,0,J\n", 2),
    ("0,1,0,L\n", 1),
])
def test_script_errors_name_the_line(text, line):
    with pytest.raises(ScriptParseError) as exc:
        load_membership_script(text)
    assert exc.value.line_no == line


HORIZON = 200


@settings(max_examples=200, deadline=None)
@given(histories(horizon=HORIZON), st.integers(0, HORIZON - 1), st.integers(0, HORIZON - 1))
def test_interval_queries_match_bitmap(events, a, b):
    h = history_from_events(events)
    lo, hi = min(a, b), max(a, b)
    for node in range(2):
        for group in range(2):
            bits = bitmap(events, node, group, HORIZON)
            assert h.member_during(node, group, lo, hi) == bool(bits[lo:hi + 1].any())
            assert [h.is_member_at(node, group, t) for t in range(HORIZON)] == bits.tolist()


@settings(max_examples=200, deadline=None)
@given(histories(horizon=HORIZON), st.integers(0, HORIZON), st.integers(0, HORIZON))
def test_point_equals_degenerate_interval(events, p, t):
    h = history_from_events(events)
    if p <= t:
        for node in range(2):
            assert valid_receiver(TemporalPoint(p), h, node, 0, t) == valid_receiver(
                TemporalInterval(p, p), h, node, 0, t)


@settings(max_examples=200, deadline=None)
@given(histories(horizon=HORIZON), st.integers(0, HORIZON), st.integers(0, HORIZON), st.integers(0, HORIZON))
def test_current_implies_interval(events, a, t, b):
    h = history_from_events(events)
    if a <= t <= b:
        for node in range(2):
            if valid_receiver(Current(), h, node, 1, t):
                assert valid_receiver(TemporalInterval(a, b), h, node, 1, t)


@settings(max_examples=200, deadline=None)
@given(histories(horizon=HORIZON), st.integers(0, HORIZON), st.integers(0, HORIZON), st.integers(0, HORIZON))
def test_interval_qualification_is_never_revoked(events, a, b, t):
    h = history_from_events(events)
    lo, hi = min(a, b), max(a, b)
    spec = TemporalInterval(lo, hi)
    for node in range(2):
        if valid_receiver(spec, h, node, 0, t):
            assert all(valid_receiver(spec, h, node, 0, t2) for t2 in range(t, HORIZON + 50, 7))
