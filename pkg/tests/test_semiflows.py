import pytest
from hypothesis import given, settings, strategies as st

from ssplive.errors import SemiflowLimitError
from ssplive.petri import Net
from ssplive.semiflows import (
    is_conservative,
    is_consistent,
    minimal_p_semiflows,
    minimal_t_semiflows,
)
from ssplive.ssp import agent_subnet, named_semiflows

from conftest import bounded_oracle, random_nets, state_machine, support_oracle


def _t_columns(net):
    C = net.incidence
    return [[C[i][j] for i in range(len(net.places))] for j in range(len(net.transitions))]


def _p_rows(net):
    return [list(r) for r in net.incidence]


def _check_annuls(net, flows):
    C = net.incidence
    for x in flows:
        if x.kind == "T":
            assert all(sum(C[i][j] * x.coefficients[j] for j in range(len(net.transitions))) == 0
                       for i in range(len(net.places)))
        else:
            assert all(sum(C[i][j] * x.coefficients[i] for i in range(len(net.places))) == 0
                       for j in range(len(net.transitions)))


def _check_minimal(flows):
    for a in flows:
        for b in flows:
            if a is not b:
                assert not (a.support <= b.support)


def test_car_plant_agent_n1(load):
    d = load("car_plant")
    sub = agent_subnet(d.net, d.decomposition.agent("N1"))
    assert [str(x) for x in minimal_t_semiflows(sub)] == ["t1 + t2", "t3 + t4"]


def test_two_agent_table(load):
    rows = named_semiflows(load("two_agent_plant"))
    got = [(n, s, str(x)) for n, s, x in rows]
    assert got == [
        ("x1", "global", "t1 + t2 + t3 + t4 + t5"),
        ("x2", "global", "t1 + t5 + t6 + t7 + t8"),
        ("x3", "global", "t9 + t10 + t11 + t12"),
        ("x4", "N1", "t1 + t2"),
        ("x5", "N1", "t1 + t8"),
        ("x6", "N1", "t9 + t10"),
        ("x7", "N2", "t3 + t4 + t5"),
        ("x8", "N2", "t5 + t6 + t7"),
        ("x9", "N2", "t11 + t12"),
    ]


def test_locals_only_numbering(load):
    rows = named_semiflows(load("car_plant"), globals_first=False)
    assert rows[4][0] == "x5" and str(rows[4][2]) == "t9 + t10 + t11"
    assert rows[0][2].format(rows[0][0]) == "x1 = t1 + t2"


def test_circuit_has_one_t_and_one_p_semiflow():
    sm = state_machine(5)
    (x,) = minimal_t_semiflows(sm)
    assert x.coefficients == (1,) * 5
    (y,) = minimal_p_semiflows(sm)
    assert y.coefficients == (1,) * 5


def test_isolated_place_is_p_semiflow():
    net = Net(["p", "q"], ["t"], [[1], [0]], [[0], [0]])
    assert [y.coefficients for y in minimal_p_semiflows(net)] == [(0, 1)]


def test_proportional_plant_p_semiflows_cover_b1_with_b2_or_b3(load):
    d = load("proportional_plant")
    ys = minimal_p_semiflows(d.net)
    _check_annuls(d.net, ys)
    for y in ys:
        if "b1" in y.support:
            assert "b2" in y.support or "b3" in y.support


def test_consistency_and_conservativeness(load):
    for name in ("two_agent_plant", "car_plant", "proportional_plant"):
        d = load(name)
        ok, w = is_consistent(d.net)
        assert ok and all(w)
        ok, w = is_conservative(d.net)
        assert ok and all(w)


def test_uncovered_transition_breaks_consistency():
    net = Net(["p"], ["t", "u"], [[1, 0]], [[1, 1]])
    ok, w = is_consistent(net)
    assert not ok and w[1] == 0


def test_source_transition_breaks_conservativeness():
    net = Net(["p"], ["src"], [[0]], [[1]])
    assert not is_conservative(net)[0]


def test_cap_is_enforced():
    net = random_nets(3, 1, 6, 10)[0]
    with pytest.raises(SemiflowLimitError):
        minimal_t_semiflows(Net(net.places, net.transitions, net.pre, net.post), cap=0)


def test_agent_semiflows_are_elementary_circuits(fixtures):
    import networkx as nx
    from ssplive.ssp import _agent_graph

    for d in fixtures.values():
        if d.decomposition is None:
            continue
        for a in d.decomposition.agents:
            g = _agent_graph(d.net, a)
            circuits = {frozenset(n for n in c if n in d.net.transition_index)
                        for c in nx.simple_cycles(g)}
            flows = {x.support for x in minimal_t_semiflows(agent_subnet(d.net, a))}
            assert flows == circuits


@pytest.mark.parametrize("seed", range(100))
def test_random_nets_t_semiflows_annul_c(seed):
    net = random_nets(seed, 1)[0]
    flows = minimal_t_semiflows(net)
    _check_annuls(net, flows)
    _check_minimal(flows)
    for x in flows:
        from math import gcd
        from functools import reduce

        assert reduce(gcd, x.coefficients) == 1
    ys = minimal_p_semiflows(net)
    _check_annuls(net, ys)
    _check_minimal(ys)


@pytest.mark.parametrize("seed", range(60))
def test_random_nets_match_support_oracle(seed):
    net = random_nets(1000 + seed, 1, max_places=5, max_trans=7)[0]
    assert {x.coefficients for x in minimal_t_semiflows(net)} == support_oracle(_t_columns(net))
    assert {y.coefficients for y in minimal_p_semiflows(net)} == support_oracle(_p_rows(net))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 1_000_000))
def test_random_nets_match_bounded_enumeration(seed):
    net = random_nets(seed, 1, max_places=4, max_trans=5)[0]
    got = {x.coefficients for x in minimal_t_semiflows(net)}
    small = {x for x in got if max(x) <= 3}
    assert small == bounded_oracle(_t_columns(net), bound=3)


def test_fixtures_with_few_transitions_match_oracle(fixtures):
    checked = 0
    for name, d in fixtures.items():
        if len(d.net.transitions) > 12:
            continue
        got = {x.coefficients for x in minimal_t_semiflows(d.net)}
        assert got == support_oracle(_t_columns(d.net)), name
        checked += 1
    assert checked >= 4
