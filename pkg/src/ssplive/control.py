"""Control net construction from an SSP, its simplification, and the CF/JF test.

Each local T-semiflow ``x`` of an agent becomes a three-node sequence
``tx_first -> px -> tx_last`` in the control net. The first transition takes
from the buffer places everything ``x`` will consume, the last one returns
everything ``x`` produces. Agent places ``pN_<agent>`` keep one sequence
active per agent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .errors import StructuralError
from .petri import Net, NetBuilder
from .semiflows import Semiflow, minimal_t_semiflows
from .ssp import agent_semiflows, first_last_transitions, named_semiflows


@dataclass(frozen=True)
class Sequence:
    """Control-net image of one local T-semiflow."""

    name: str
    agent: str
    flow: Semiflow  # over the plant transitions
    first: str  # control transition labeled with plant_first
    place: str | None  # px place, None when first and last coincide
    last: str
    plant_first: str
    plant_last: str


@dataclass
class ControlNet:
    net: Net
    m0: tuple
    buffer_places: dict  # plant buffer -> pb place
    agent_places: dict  # agent -> pN place
    sequences: dict  # semiflow name -> Sequence
    extra_places: list = field(default_factory=list)  # added by enforcement
    silent: list = field(default_factory=list)  # unlabeled control transitions

    @property
    def place_labels(self) -> dict:
        """``px`` place -> semiflow name."""
        return {s.place: n for n, s in self.sequences.items() if s.place}

    def labeled(self, plant_t) -> list:
        return [t for t in self.net.transitions if self.net.labels.get(t) == plant_t]

    def buffer_marking(self) -> dict:
        return {b: self.m0[self.net.place_index[pb]] for b, pb in self.buffer_places.items()}


def build_control_pn(doc) -> ControlNet:
    """Control net of a validated SSP document.

    Buffer places start with the plant's buffer marking, agent places with
    one token, semiflow places empty.
    """
    net, dec = doc.net, doc.decomposition
    if dec is None:
        raise StructuralError("control synthesis needs an SSP decomposition")
    names = {}
    for name, scope, x in named_semiflows(doc):
        if scope != "global":
            names[(scope, x.coefficients)] = name
    b = NetBuilder(f"{net.name}_control")
    m0 = {}
    pbs, pns, seqs = {}, {}, {}
    for buf in dec.buffers:
        pbs[buf] = b.add_place(f"pb_{buf}")
        m0[pbs[buf]] = doc.initial_marking[net.place_index[buf]]
    for a in dec.agents:
        pns[a.name] = b.add_place(f"pN_{a.name}")
        m0[pns[a.name]] = 1
    for a, x in agent_semiflows(doc):
        name = names[(a.name, x.coefficients)]
        tf, tl = first_last_transitions(net, a, x)
        pn = pns[a.name]
        first = b.add_transition(f"t{name}_first", tf)
        if tf == tl:
            last, px = first, None
        else:
            px = b.add_place(f"p{name}")
            last = b.add_transition(f"t{name}_last", tl)
            b.add_arc(first, px)
            b.add_arc(px, last)
        b.add_arc(pn, first)
        b.add_arc(last, pn)
        for buf, pb in pbs.items():
            i = net.place_index[buf]
            need = sum(net.pre[i][net.transition_index[t]] * c for t, c in x.as_dict().items())
            give = sum(net.post[i][net.transition_index[t]] * c for t, c in x.as_dict().items())
            if need:
                b.add_arc(pb, first, need)
            if give:
                b.add_arc(last, pb, give)
        seqs[name] = Sequence(name, a.name, x, first, px, last, tf, tl)
    cnet = b.build()
    return ControlNet(cnet, cnet.marking(m0), pbs, pns, seqs)


@dataclass
class SimplifiedControlNet:
    net: Net
    m0: tuple
    origin: dict  # fused transition -> semiflow name
    subnets: list  # list of (place tuple, transition tuple)

    def subnet_net(self, k) -> Net:
        ps, ts = self.subnets[k]
        return self.net.subnet(ps, ts, name=f"{self.net.name}_{k + 1}")

    def subnet_marking(self, k) -> tuple:
        ps, _ = self.subnets[k]
        return tuple(self.m0[self.net.place_index[p]] for p in ps)


def simplify_control_pn(cn: ControlNet) -> SimplifiedControlNet:
    """Fuse each sequence into one transition and drop the agent places."""
    c = cn.net
    pi, ti = c.place_index, c.transition_index
    keep = [p for p in c.places if p not in cn.agent_places.values()
            and p not in cn.place_labels]
    b = NetBuilder(c.name.replace("_control", "") + "_simplified")
    for p in keep:
        b.add_place(p)
    origin = {}
    for name, s in cn.sequences.items():
        f, l = ti[s.first], ti[s.last]
        pn = pi[cn.agent_places[s.agent]]
        balanced = c.pre[pn][f] == 1 and c.post[pn][l] == 1
        if f != l:
            balanced = balanced and not c.post[pn][f] and not c.pre[pn][l]
        if not balanced:
            raise StructuralError(f"agent place of {s.agent} is not a self-loop on fused {name}")
        if s.place is not None:
            px = pi[s.place]
            if c.post[px][f] != 1 or c.pre[px][l] != 1:
                raise StructuralError(f"sequence {name} is not t_first -> p{name} -> t_last")
        t = b.add_transition(f"t{name}")
        origin[t] = name
        for p in keep:
            i = pi[p]
            if c.pre[i][f]:
                b.set_pre(p, t, c.pre[i][f])
            if c.post[i][l]:
                b.set_post(p, t, c.post[i][l])
    for t in cn.silent:
        b.add_transition(t)
        for p in keep:
            i = pi[p]
            if c.pre[i][ti[t]]:
                b.set_pre(p, t, c.pre[i][ti[t]])
            if c.post[i][ti[t]]:
                b.set_post(p, t, c.post[i][ti[t]])
    net = b.build()
    m0 = tuple(cn.m0[pi[p]] for p in keep)
    return SimplifiedControlNet(net, m0, origin, weak_components(net))


def weak_components(net: Net) -> list:
    """Weakly connected components as ``(places, transitions)`` in net order."""
    g = nx.Graph()
    g.add_nodes_from(net.places)
    g.add_nodes_from(net.transitions)
    for i, p in enumerate(net.places):
        for j, t in enumerate(net.transitions):
            if net.pre[i][j] or net.post[i][j]:
                g.add_edge(p, t)
    order = {n: k for k, n in enumerate(net.places + net.transitions)}
    comps = []
    for comp in nx.connected_components(g):
        ps = tuple(p for p in net.places if p in comp)
        ts = tuple(t for t in net.transitions if t in comp)
        comps.append((ps, ts))
    comps.sort(key=lambda c: min(order[n] for n in c[0] + c[1]))
    return comps


def is_choice_free(net: Net) -> bool:
    return all(len(net.postset(p)) <= 1 for p in net.places)


def is_join_free(net: Net) -> bool:
    return all(len(net.preset(t)) <= 1 for t in net.transitions)


def classify_subnets(scn: SimplifiedControlNet) -> list:
    """Per subnet: choice-free, join-free and whether that alone settles structural liveness."""
    out = []
    for k, (ps, ts) in enumerate(scn.subnets):
        sub = scn.subnet_net(k)
        cf, jf = is_choice_free(sub), is_join_free(sub)
        out.append({
            "places": ps,
            "transitions": ts,
            "CF": cf,
            "JF": jf,
            "structurally_live": cf or jf,
        })
    return out


def round_marking(net: Net) -> tuple:
    """Tokens produced by one firing of every minimal T-semiflow."""
    m = [0] * len(net.places)
    for x in minimal_t_semiflows(net):
        for t, c in x.as_dict().items():
            j = net.transition_index[t]
            for i in range(len(net.places)):
                m[i] += c * net.post[i][j]
    return tuple(m)
