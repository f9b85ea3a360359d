"""SSP class membership: agents, buffers and waiting places.

An SSP net splits into strongly connected state-machine agents that talk
through destination-private buffers. Each agent has a single marked waiting
place through which every buffer-consuming cycle passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .errors import StructuralError
from .petri import Net
from .semiflows import Semiflow, is_conservative, is_consistent, minimal_t_semiflows

CONDITIONS = {
    1: "places partition into agent places and buffers",
    2: "transitions partition into agent transitions",
    3: "every agent is a strongly connected state machine",
    4: "every buffer is destination private",
    5: "one marked waiting place per agent, on every buffer-consuming cycle",
    6: "the net is consistent and conservative",
}


@dataclass(frozen=True)
class Agent:
    name: str
    places: tuple
    transitions: tuple
    wait: str


@dataclass(frozen=True)
class SspDecomposition:
    agents: tuple
    buffers: tuple

    def agent(self, name) -> Agent:
        for a in self.agents:
            if a.name == name:
                return a
        raise KeyError(name)

    def agent_of(self, node):
        """Name of the agent owning a place or transition, None for buffers."""
        for a in self.agents:
            if node in a.places or node in a.transitions:
                return a.name
        return None


@dataclass
class SspValidationReport:
    verdicts: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.verdicts.values())

    def _record(self, k, problems):
        self.verdicts[k] = not problems
        self.evidence[k] = list(problems)

    def as_sections(self) -> dict:
        sec = {}
        for k in sorted(self.verdicts):
            sec[f"condition_{k}"] = "pass" if self.verdicts[k] else "fail"
            if self.evidence[k]:
                sec[f"condition_{k}_evidence"] = "; ".join(self.evidence[k])
        for i, n in enumerate(self.notes, 1):
            sec[f"note_{i}"] = n
        sec["ssp"] = "yes" if self.ok else "no"
        return sec


def agent_subnet(net: Net, agent: Agent) -> Net:
    return net.subnet(agent.places, agent.transitions, name=agent.name)


def _agent_graph(net: Net, agent: Agent) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(agent.places)
    g.add_nodes_from(agent.transitions)
    for t in agent.transitions:
        for p in net.preset(t):
            if p in agent.places:
                g.add_edge(p, t)
        for p in net.postset(t):
            if p in agent.places:
                g.add_edge(t, p)
    return g


def validate_ssp(doc) -> SspValidationReport:
    """Check the six SSP conditions, collecting evidence for each failure."""
    dec = doc.decomposition
    if dec is None:
        raise StructuralError("document carries no SSP decomposition")
    net, m0 = doc.net, doc.initial_marking
    rep = SspValidationReport()

    owner_p: dict = {}
    problems = []
    for a in dec.agents:
        for p in a.places:
            owner_p.setdefault(p, []).append(a.name)
    for b in dec.buffers:
        owner_p.setdefault(b, []).append("buffers")
    for p, owners in owner_p.items():
        if p not in net.place_index:
            problems.append(f"{p} is not a place")
        elif len(owners) > 1:
            problems.append(f"{p} belongs to {', '.join(owners)}")
    problems += [f"{p} is unassigned" for p in net.places if p not in owner_p]
    rep._record(1, problems)

    owner_t: dict = {}
    problems = []
    for a in dec.agents:
        for t in a.transitions:
            owner_t.setdefault(t, []).append(a.name)
    for t, owners in owner_t.items():
        if t not in net.transition_index:
            problems.append(f"{t} is not a transition")
        elif len(owners) > 1:
            problems.append(f"{t} belongs to {', '.join(owners)}")
    problems += [f"{t} is unassigned" for t in net.transitions if t not in owner_t]
    rep._record(2, problems)
    if not (rep.verdicts[1] and rep.verdicts[2]):
        for k in (3, 4, 5, 6):
            rep._record(k, ["not checked: decomposition is not a partition"])
        return rep

    pi, ti = net.place_index, net.transition_index
    problems = []
    for a in dec.agents:
        for t in a.transitions:
            j = ti[t]
            ins = [(p, net.pre[pi[p]][j]) for p in a.places if net.pre[pi[p]][j]]
            outs = [(p, net.post[pi[p]][j]) for p in a.places if net.post[pi[p]][j]]
            if len(ins) != 1 or len(outs) != 1 or ins[0][1] != 1 or outs[0][1] != 1:
                problems.append(f"{a.name}: {t} is not a state-machine transition")
            foreign = [p for p in net.preset(t) + net.postset(t)
                       if p not in a.places and p not in dec.buffers]
            if foreign:
                problems.append(f"{a.name}: {t} touches places of other agents {sorted(set(foreign))}")
        g = _agent_graph(net, a)
        if len(g) and not nx.is_strongly_connected(g):
            problems.append(f"{a.name} is not strongly connected")
    rep._record(3, problems)

    problems = []
    for b in dec.buffers:
        owners = sorted({dec.agent_of(t) for t in net.postset(b)})
        if len(owners) > 1:
            problems.append(f"{b} feeds {', '.join(owners)}")
    rep._record(4, problems)

    problems = []
    for a in dec.agents:
        if a.wait not in a.places:
            problems.append(f"{a.name}: waiting place {a.wait} is not an agent place")
            continue
        marked = [p for p in a.places if m0[pi[p]] > 0]
        if marked != [a.wait]:
            problems.append(f"{a.name}: marked places {marked}, expected only {a.wait}")
        if m0[pi[a.wait]] > 1:
            rep.notes.append(f"{a.name}: waiting place {a.wait} holds {m0[pi[a.wait]]} tokens")
        fed = {t for t in a.transitions if any(p in dec.buffers for p in net.preset(t))}
        for cycle in nx.simple_cycles(_agent_graph(net, a)):
            if fed.intersection(cycle) and a.wait not in cycle:
                order = [n for n in cycle if n in net.transition_index]
                k = order.index(min(order, key=net.transition_index.__getitem__))
                order = order[k:] + order[:k]
                problems.append(f"{a.name}: cycle {'-'.join(order)} consumes buffers but avoids {a.wait}")
    rep._record(5, problems)

    problems = []
    cons, w = is_consistent(net)
    if not cons:
        problems.append("not consistent, uncovered transitions: "
                        + ", ".join(t for t, c in zip(net.transitions, w) if not c))
    cval, w = is_conservative(net)
    if not cval:
        problems.append("not conservative, uncovered places: "
                        + ", ".join(p for p, c in zip(net.places, w) if not c))
    rep._record(6, problems)
    return rep


def first_last_transitions(net: Net, agent: Agent, x: Semiflow):
    """The transitions where semiflow ``x`` leaves and re-enters the waiting place."""
    support = x.support
    first = [t for t in net.postset(agent.wait) if t in support and t in agent.transitions]
    last = [t for t in net.preset(agent.wait) if t in support and t in agent.transitions]
    if len(first) != 1 or len(last) != 1:
        raise StructuralError(
            f"semiflow {x} of {agent.name} has first {first} and last {last}; "
            "exactly one of each is required"
        )
    return first[0], last[0]


def agent_semiflows(doc) -> list:
    """``(agent, Semiflow over the whole net)`` for every local minimal T-semiflow.

    Agents are visited in declaration order and each agent's semiflows in
    canonical order, which fixes the numbering used by control synthesis.
    """
    out = []
    net = doc.net
    for a in doc.decomposition.agents:
        sub = agent_subnet(net, a)
        for x in minimal_t_semiflows(sub):
            full = tuple(x[t] if t in sub.transition_index else 0 for t in net.transitions)
            out.append((a, Semiflow("T", full, net.transitions)))
    return out


def named_semiflows(doc, globals_first=True) -> list:
    """``(name, scope, Semiflow)`` rows: global ones first, then local ones per agent.

    With ``globals_first=False`` only local semiflows are listed, numbered from one.
    """
    rows = []
    if globals_first:
        for x in minimal_t_semiflows(doc.net):
            rows.append((f"x{len(rows) + 1}", "global", x))
    if doc.decomposition is not None:
        for a, x in agent_semiflows(doc):
            rows.append((f"x{len(rows) + 1}", a.name, x))
    return rows


# -- reductions -----------------------------------------------------------------


def preprocess_reductions(doc):
    """Apply identical-transition merging and series fusions until nothing changes.

    Returns a new document; the decomposition is updated alongside the net.
    Places touched by buffers, waiting places and labeled transitions are left alone.
    """
    from .pnio import NetDocument  # local import avoids a cycle

    net, m0, dec = doc.net, list(doc.initial_marking), doc.decomposition
    changed = True
    while changed:
        changed = False
        for rule in (_merge_identical, _fuse_series_place, _fuse_series_transition):
            res = rule(net, m0, dec)
            if res is not None:
                net, m0, dec = res
                changed = True
                break
    return NetDocument(net, tuple(m0), dec, dict(doc.metadata))


def _drop(dec, places=(), transitions=(), rename=None):
    if dec is None:
        return None
    agents = []
    for a in dec.agents:
        wait = rename.get(a.wait, a.wait) if rename else a.wait
        agents.append(Agent(
            a.name,
            tuple(p for p in a.places if p not in places),
            tuple(t for t in a.transitions if t not in transitions),
            wait,
        ))
    return SspDecomposition(tuple(agents), dec.buffers)


def _merge_identical(net, m0, dec):
    seen = {}
    for t in net.transitions:
        key = (net.pre_column(t), net.post_column(t))
        if key in seen and net.labels.get(t) == net.labels.get(seen[key]):
            b = net.builder()
            b.remove_transition(t)
            return b.build(), m0, _drop(dec, transitions={t})
        seen.setdefault(key, t)
    return None


def _protected(dec):
    if dec is None:
        return set()
    return set(dec.buffers) | {a.wait for a in dec.agents}


def _single(col):
    nz = [(i, w) for i, w in enumerate(col) if w]
    return nz[0] if len(nz) == 1 else None


def _fuse_series_place(net, m0, dec):
    # t with pre {p} and post {q}, p feeding only t, q fed only by t: merge p into q
    prot = _protected(dec)
    for t in net.transitions:
        if t in net.labels:
            continue
        a, b = _single(net.pre_column(t)), _single(net.post_column(t))
        if not a or not b or a[1] != 1 or b[1] != 1 or a[0] == b[0]:
            continue
        p, q = net.places[a[0]], net.places[b[0]]
        if p in prot or q in prot or net.postset(p) != [t] or net.preset(q) != [t]:
            continue
        bld = net.builder()
        for u in net.preset(p):
            bld.post[(q, u)] = bld.post.get((q, u), 0) + bld.post[(p, u)]
        m = list(m0)
        m[net.place_index[q]] += m[net.place_index[p]]
        del m[net.place_index[p]]
        bld.remove_transition(t)
        bld.remove_place(p)
        return bld.build(), m, _drop(dec, places={p}, transitions={t})
    return None


def _fuse_series_transition(net, m0, dec):
    # unmarked p with single input t1 and single output t2, where t2 needs only p: fold t2 into t1
    prot = _protected(dec)
    for p in net.places:
        i = net.place_index[p]
        if p in prot or m0[i]:
            continue
        ins, outs = net.preset(p), net.postset(p)
        if len(ins) != 1 or len(outs) != 1 or ins[0] == outs[0]:
            continue
        t1, t2 = ins[0], outs[0]
        if t1 in net.labels or t2 in net.labels:
            continue
        if _single(net.pre_column(t2)) != (i, 1) or net.post[i][net.transition_index[t1]] != 1:
            continue
        if dec is not None and dec.agent_of(t1) != dec.agent_of(t2):
            continue
        bld = net.builder()
        bld.post.pop((p, t1))
        for q in net.postset(t2):
            bld.post[(q, t1)] = bld.post.get((q, t1), 0) + bld.post[(q, t2)]
        bld.remove_transition(t2)
        bld.remove_place(p)
        m = list(m0)
        del m[i]
        return bld.build(), m, _drop(dec, places={p}, transitions={t2})
    return None
