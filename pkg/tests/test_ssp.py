import pytest

from ssplive.errors import StructuralError
from ssplive.petri import classify_markings, reachability_graph
from ssplive.pnio import parse_net, serialize_net
from ssplive.semiflows import Semiflow, minimal_t_semiflows
from ssplive.ssp import (
    first_last_transitions,
    named_semiflows,
    preprocess_reductions,
    validate_ssp,
)


def _mutant(load, *edits, name="two_agent_plant"):
    text = serialize_net(load(name))
    for old, new in edits:
        assert old in text, old
        text = text.replace(old, new, 1)
    return parse_net(text)


@pytest.mark.parametrize("name", ["car_plant", "two_agent_plant", "proportional_plant", "sync_pair_plant"])
def test_fixtures_are_ssp(load, name):
    rep = validate_ssp(load(name))
    assert rep.ok, rep.evidence
    assert rep.as_sections()["ssp"] == "yes"


def test_monitor_breaks_destination_privacy(load):
    rep = validate_ssp(load("car_plant_monitor"))
    assert not rep.ok
    assert rep.verdicts[4] is False
    assert any("pm feeds N1, N3" in e for e in rep.evidence[4])
    assert rep.as_sections()["condition_4"] == "fail"


def test_unassigned_place_fails_condition_1(load):
    d = _mutant(load, ("BUFFERS b1,b2,b3,b4,b5", "BUFFERS b1,b2,b3,b4"))
    rep = validate_ssp(d)
    assert rep.evidence[1] == ["b5 is unassigned"]
    assert rep.evidence[3] == ["not checked: decomposition is not a partition"]


def test_unassigned_transition_fails_condition_2(load):
    d = _mutant(load, ("TRANS t3,t4,t5,t6,t7,t11,t12", "TRANS t3,t4,t5,t6,t7,t11"))
    rep = validate_ssp(d)
    assert rep.verdicts[1] and not rep.verdicts[2]
    assert rep.evidence[2] == ["t12 is unassigned"]


def test_join_inside_agent_fails_condition_3(load):
    d = _mutant(load, ("ARC p3 -> t10\n", "ARC p3 -> t10\nARC p2 -> t10\n"))
    rep = validate_ssp(d)
    assert not rep.verdicts[3]
    assert any("t10 is not a state-machine transition" in e for e in rep.evidence[3])


def test_foreign_agent_place_fails_condition_3(load):
    d = _mutant(load, ("ARC p3 -> t10\n", "ARC p3 -> t10\nARC t10 -> p8\n"))
    rep = validate_ssp(d)
    assert any("touches places of other agents" in e for e in rep.evidence[3])


def test_shared_buffer_fails_condition_4(load):
    d = _mutant(load, ("ARC p5 -> t4\n", "ARC p5 -> t4\nARC b1 -> t4\n"))
    rep = validate_ssp(d)
    assert rep.evidence[4] == ["b1 feeds N1, N2"]


def test_two_marked_places_fail_condition_5(load):
    d = _mutant(load, ("PLACE p2\n", "PLACE p2 MARKING 1\n"))
    rep = validate_ssp(d)
    assert not rep.verdicts[5]
    assert "N1: marked places ['p1', 'p2'], expected only p1" in rep.evidence[5]


def test_cycle_avoiding_waiting_place_fails_condition_5(load):
    d = _mutant(load, ("PLACE p1 MARKING 1", "PLACE p1"), ("PLACE p2", "PLACE p2 MARKING 1"),
                ("TRANS t1,t2,t8,t9,t10 WAIT p1", "TRANS t1,t2,t8,t9,t10 WAIT p2"))
    rep = validate_ssp(d)
    assert any("t9-t10" in e and "avoids p2" in e for e in rep.evidence[5])


def test_heavy_waiting_place_is_noted_not_rejected(load):
    d = _mutant(load, ("PLACE p4 MARKING 1", "PLACE p4 MARKING 2"))
    rep = validate_ssp(d)
    assert rep.verdicts[5]
    assert rep.notes == ["N2: waiting place p4 holds 2 tokens"]


def test_source_buffer_fails_condition_6(load):
    d = _mutant(load, ("ARC t3 -> b1\n", "ARC t3 -> b1 WEIGHT 2\n"))
    rep = validate_ssp(d)
    assert rep.verdicts[1] and rep.verdicts[3]
    assert not rep.verdicts[6]
    assert any("not conservative" in e or "not consistent" in e for e in rep.evidence[6])


def test_missing_decomposition_is_an_error(load):
    with pytest.raises(StructuralError):
        validate_ssp(load("conflict_subnet"))


def test_first_and_last_transitions(load):
    d = load("two_agent_plant")
    rows = {n: (s, x) for n, s, x in named_semiflows(d)}
    scope, x7 = rows["x7"]
    assert str(x7) == "t3 + t4 + t5"
    assert first_last_transitions(d.net, d.decomposition.agent(scope), x7) == ("t5", "t3")
    scope, x9 = rows["x9"]
    assert first_last_transitions(d.net, d.decomposition.agent(scope), x9) == ("t12", "t11")


def test_first_and_last_in_car_plant(load):
    d = load("car_plant")
    rows = {n: (s, x) for n, s, x in named_semiflows(d, globals_first=False)}
    scope, x5 = rows["x5"]
    assert first_last_transitions(d.net, d.decomposition.agent(scope), x5) == ("t9", "t11")


def test_two_circuits_have_no_unique_first(load):
    d = load("two_agent_plant")
    both = Semiflow("T", tuple(1 if t in ("t1", "t2", "t9", "t10") else 0 for t in d.net.transitions),
                    d.net.transitions)
    with pytest.raises(StructuralError):
        first_last_transitions(d.net, d.decomposition.agent("N1"), both)


def _stretched(load):
    # t9 -> p3 becomes t9 -> q -> s -> p3, and t9 gets an identical twin t9b
    return _mutant(
        load,
        ("PLACE b1", "PLACE q\nPLACE b1"),
        ("TRANS t12\n", "TRANS t12\nTRANS s\nTRANS t9b\n"),
        ("ARC t9 -> p3\n", "ARC t9 -> q\nARC q -> s\nARC s -> p3\nARC p1 -> t9b\nARC t9b -> q\n"),
        ("PLACES p1,p2,p3 TRANS t1,t2,t8,t9,t10", "PLACES p1,p2,p3,q TRANS t1,t2,t8,t9,t10,s,t9b"),
    )


def test_reductions_merge_twins_and_fuse_chains(load):
    d = _stretched(load)
    assert validate_ssp(d).ok
    r = preprocess_reductions(d)
    assert "t9b" not in r.net.transitions
    assert len(r.net.places) == len(load("two_agent_plant").net.places)
    assert len(r.net.transitions) == 12
    assert validate_ssp(r).ok
    c = classify_markings(reachability_graph(r.net, r.m0))
    assert (c.reachable, c.livelock) == (180, 13)


def test_reductions_keep_semiflow_count_and_reach_a_fixpoint(load):
    d = _stretched(load)
    r = preprocess_reductions(d)
    assert len(named_semiflows(r)) == 9
    assert preprocess_reductions(r) == r
    plant = load("two_agent_plant")
    assert preprocess_reductions(plant) == plant
    assert len(minimal_t_semiflows(r.net)) == 3
