"""Place/transition nets, the firing rule and explicit reachability analysis.

Markings are plain tuples of non-negative ints ordered like ``Net.places``;
they are hashable, immutable and cheap to deduplicate, which is all the
state-space exploration needs.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .errors import FiringError, StructuralError, TruncatedGraphError

Marking = tuple  # tuple[int, ...] indexed like Net.places

DEFAULT_NODE_BUDGET = 1_000_000

#: Livelock readings supported by the census. ``terminal-scc`` counts markings
#: lying in a terminal strongly connected component where some transition never
#: fires; ``dead-transition`` counts every marking at which some transition is dead.
LIVELOCK_DEFINITIONS = ("terminal-scc", "dead-transition")
DEFAULT_LIVELOCK_DEFINITION = "terminal-scc"


@dataclass(frozen=True)
class Net:
    """A P/T net with natural pre/post incidence matrices (rows = places)."""

    places: tuple
    transitions: tuple
    pre: tuple
    post: tuple
    labels: Mapping[str, str] = field(default_factory=dict)
    name: str = "net"

    def __post_init__(self):
        object.__setattr__(self, "places", tuple(self.places))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        object.__setattr__(self, "pre", tuple(tuple(int(x) for x in row) for row in self.pre))
        object.__setattr__(self, "post", tuple(tuple(int(x) for x in row) for row in self.post))
        object.__setattr__(self, "labels", dict(self.labels))
        if len(set(self.places)) != len(self.places):
            raise StructuralError("duplicate place identifier")
        if len(set(self.transitions)) != len(self.transitions):
            raise StructuralError("duplicate transition identifier")
        if set(self.places) & set(self.transitions):
            raise StructuralError("place and transition identifiers overlap")
        for mat, what in ((self.pre, "pre"), (self.post, "post")):
            if len(mat) != len(self.places) or any(len(r) != len(self.transitions) for r in mat):
                raise StructuralError(f"{what} matrix is not |P| x |T|")
            if any(x < 0 for r in mat for x in r):
                raise StructuralError(f"negative entry in {what}")
        unknown = set(self.labels) - set(self.transitions)
        if unknown:
            raise StructuralError(f"labels on unknown transitions: {sorted(unknown)}")

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_arcs(cls, places, transitions, arcs, labels=None, name="net"):
        """Build a net from ``(source, target, weight)`` triples.

        An arc whose source is a place is a pre arc, otherwise a post arc.
        Repeated arcs accumulate.
        """
        b = NetBuilder(name)
        for p in places:
            b.add_place(p)
        for t in transitions:
            b.add_transition(t, (labels or {}).get(t))
        for arc in arcs:
            src, dst, w = arc if len(arc) == 3 else (*arc, 1)
            b.add_arc(src, dst, w)
        return b.build()

    def builder(self) -> "NetBuilder":
        """Mutable copy of this net for incremental edits."""
        b = NetBuilder(self.name)
        for p in self.places:
            b.add_place(p)
        for t in self.transitions:
            b.add_transition(t, self.labels.get(t))
        for i, p in enumerate(self.places):
            for j, t in enumerate(self.transitions):
                if self.pre[i][j]:
                    b.pre[(p, t)] = self.pre[i][j]
                if self.post[i][j]:
                    b.post[(p, t)] = self.post[i][j]
        return b

    # -- indices and derived matrices -----------------------------------------

    @cached_property
    def place_index(self) -> dict:
        return {p: i for i, p in enumerate(self.places)}

    @cached_property
    def transition_index(self) -> dict:
        return {t: j for j, t in enumerate(self.transitions)}

    @cached_property
    def incidence(self) -> tuple:
        """Token-flow matrix ``C = Post - Pre``."""
        return tuple(
            tuple(b - a for a, b in zip(ra, rb)) for ra, rb in zip(self.pre, self.post)
        )

    @cached_property
    def _columns(self):
        # per transition: sparse (place, weight) requirements and (place, delta) effects
        cols = []
        for j in range(len(self.transitions)):
            need = tuple((i, self.pre[i][j]) for i in range(len(self.places)) if self.pre[i][j])
            delta = tuple(
                (i, self.post[i][j] - self.pre[i][j])
                for i in range(len(self.places))
                if self.post[i][j] != self.pre[i][j]
            )
            cols.append((need, delta))
        return tuple(cols)

    def pre_column(self, t) -> tuple:
        j = self.transition_index[t]
        return tuple(row[j] for row in self.pre)

    def post_column(self, t) -> tuple:
        j = self.transition_index[t]
        return tuple(row[j] for row in self.post)

    def preset(self, node) -> list:
        """Input nodes of a place or transition (the dot-prefix notation)."""
        if node in self.transition_index:
            j = self.transition_index[node]
            return [p for i, p in enumerate(self.places) if self.pre[i][j]]
        i = self.place_index[node]
        return [t for j, t in enumerate(self.transitions) if self.post[i][j]]

    def postset(self, node) -> list:
        if node in self.transition_index:
            j = self.transition_index[node]
            return [p for i, p in enumerate(self.places) if self.post[i][j]]
        i = self.place_index[node]
        return [t for j, t in enumerate(self.transitions) if self.pre[i][j]]

    @property
    def is_ordinary(self) -> bool:
        return all(x <= 1 for m in (self.pre, self.post) for r in m for x in r)

    def subnet(self, places: Iterable, transitions: Iterable, name=None) -> "Net":
        """Restriction to the given places and transitions (order of this net kept)."""
        ps, ts = set(places), set(transitions)
        pl = [p for p in self.places if p in ps]
        tr = [t for t in self.transitions if t in ts]
        pi, ti = self.place_index, self.transition_index
        return Net(
            pl,
            tr,
            [[self.pre[pi[p]][ti[t]] for t in tr] for p in pl],
            [[self.post[pi[p]][ti[t]] for t in tr] for p in pl],
            {t: l for t, l in self.labels.items() if t in ts},
            name or self.name,
        )

    # -- markings ---------------------------------------------------------------

    def marking(self, spec=None) -> Marking:
        """Build a marking from a mapping or a multiset string like ``"p1+2*b3"``."""
        if spec is None:
            return tuple(0 for _ in self.places)
        if isinstance(spec, str):
            spec = parse_multiset(spec)
        m = [0] * len(self.places)
        for p, n in spec.items():
            if p not in self.place_index:
                raise StructuralError(f"unknown place {p!r} in marking")
            if n < 0:
                raise StructuralError(f"negative marking for {p!r}")
            m[self.place_index[p]] = int(n)
        return tuple(m)

    def marking_dict(self, m: Marking) -> dict:
        self.check_marking(m)
        return {p: n for p, n in zip(self.places, m) if n}

    def format_marking(self, m: Marking) -> str:
        return format_multiset(self.marking_dict(m)) or "0"

    def check_marking(self, m: Marking):
        if len(m) != len(self.places):
            raise StructuralError(
                f"marking has {len(m)} entries, net {self.name!r} has {len(self.places)} places"
            )


class NetBuilder:
    """Incremental net construction; arcs accumulate, identifiers keep insertion order."""

    def __init__(self, name="net"):
        self.name = name
        self.places: list = []
        self.transitions: list = []
        self.pre: dict = {}
        self.post: dict = {}
        self.labels: dict = {}

    def add_place(self, p):
        if p in self.places or p in self.transitions:
            raise StructuralError(f"duplicate identifier {p!r}")
        self.places.append(p)
        return p

    def add_transition(self, t, label=None):
        if t in self.transitions or t in self.places:
            raise StructuralError(f"duplicate identifier {t!r}")
        self.transitions.append(t)
        if label is not None:
            self.labels[t] = label
        return t

    def add_arc(self, src, dst, weight=1):
        if weight < 0:
            raise StructuralError(f"negative weight on arc {src} -> {dst}")
        if src in self.places and dst in self.transitions:
            self.pre[(src, dst)] = self.pre.get((src, dst), 0) + weight
        elif src in self.transitions and dst in self.places:
            self.post[(dst, src)] = self.post.get((dst, src), 0) + weight
        else:
            raise StructuralError(f"arc {src} -> {dst} does not join a declared place and transition")

    def set_pre(self, p, t, w):
        self.pre[(p, t)] = w

    def set_post(self, p, t, w):
        self.post[(p, t)] = w

    def remove_place(self, p):
        self.places.remove(p)
        self.pre = {k: v for k, v in self.pre.items() if k[0] != p}
        self.post = {k: v for k, v in self.post.items() if k[0] != p}

    def remove_transition(self, t):
        self.transitions.remove(t)
        self.labels.pop(t, None)
        self.pre = {k: v for k, v in self.pre.items() if k[1] != t}
        self.post = {k: v for k, v in self.post.items() if k[1] != t}

    def build(self) -> Net:
        pre = [[self.pre.get((p, t), 0) for t in self.transitions] for p in self.places]
        post = [[self.post.get((p, t), 0) for t in self.transitions] for p in self.places]
        return Net(self.places, self.transitions, pre, post, self.labels, self.name)


_TERM = re.compile(r"^\s*(?:(\d+)\s*[*·]?\s*)?([A-Za-z_][\w.\-]*)\s*$")


def parse_multiset(text: str) -> dict:
    """``"p1 + 2*b3"`` -> ``{"p1": 1, "b3": 2}``."""
    out: dict = {}
    text = text.strip()
    if not text or text == "0":
        return out
    for term in text.split("+"):
        mt = _TERM.match(term)
        if not mt:
            raise StructuralError(f"bad multiset term {term!r}")
        k = int(mt.group(1)) if mt.group(1) else 1
        out[mt.group(2)] = out.get(mt.group(2), 0) + k
    return out


def format_multiset(items: Mapping) -> str:
    return " + ".join(k if n == 1 else f"{n}*{k}" for k, n in items.items() if n)


# -- firing rule ------------------------------------------------------------------


def _tindex(net: Net, t) -> int:
    try:
        return net.transition_index[t]
    except KeyError:
        raise StructuralError(f"unknown transition {t!r}") from None


def enabled(net: Net, m: Marking) -> list:
    """Transitions enabled at ``m``, in net order."""
    net.check_marking(m)
    return [
        net.transitions[j]
        for j, (need, _) in enumerate(net._columns)
        if all(m[i] >= w for i, w in need)
    ]


def fire(net: Net, m: Marking, t) -> Marking:
    net.check_marking(m)
    j = _tindex(net, t)
    need, delta = net._columns[j]
    short = {net.places[i]: w for i, w in need if m[i] < w}
    if short:
        raise FiringError(t, short)
    out = list(m)
    for i, d in delta:
        out[i] += d
    return tuple(out)


def fire_sequence(net: Net, m: Marking, sequence: Sequence) -> Marking:
    """Fire ``sequence`` from ``m``; the result is cross-checked with the state equation."""
    cur = m
    counts = [0] * len(net.transitions)
    for k, t in enumerate(sequence):
        try:
            cur = fire(net, cur, t)
        except FiringError as exc:
            raise FiringError(t, exc.deficient, index=k) from None
        counts[net.transition_index[t]] += 1
    expected = state_equation(net, m, counts)
    assert expected == cur, "state equation disagrees with step-by-step firing"
    return cur


def state_equation(net: Net, m: Marking, counts: Sequence[int]) -> Marking:
    """``m + C . sigma`` for a firing-count vector ``sigma``."""
    C = net.incidence
    return tuple(
        m[i] + sum(C[i][j] * counts[j] for j in range(len(counts))) for i in range(len(m))
    )


# -- reachability -------------------------------------------------------------------


@dataclass
class ReachabilityGraph:
    """Explicit state graph.

    ``actions`` names the edge labels (the net transitions for plain nets, plant
    transitions for supervised runs). Node 0 is the root.
    """

    actions: tuple
    markings: list
    edges: list  # (src index, action index, dst index)
    truncated: bool = False
    net: Net | None = None

    @cached_property
    def index(self) -> dict:
        return {m: k for k, m in enumerate(self.markings)}

    @property
    def root(self):
        return self.markings[0]

    @property
    def nodes(self) -> set:
        return set(self.markings)

    def __len__(self):
        return len(self.markings)

    @cached_property
    def successors(self) -> list:
        succ = [[] for _ in self.markings]
        for s, a, d in self.edges:
            succ[s].append((a, d))
        return succ

    @cached_property
    def _future(self):
        self._require_exhaustive()
        return _scc_future(self.successors)

    def _require_exhaustive(self):
        if self.truncated:
            raise TruncatedGraphError(
                f"reachability graph was truncated at {len(self.markings)} nodes; "
                "exact counts are unavailable"
            )


def reachability_graph(net: Net, m0: Marking, node_budget: int = DEFAULT_NODE_BUDGET) -> ReachabilityGraph:
    """Breadth-first closure of the firing relation from ``m0``."""
    if node_budget < 1:
        raise ValueError("node_budget must be >= 1")
    net.check_marking(m0)
    return explore(net.transitions, m0, lambda m: _net_successors(net, m), node_budget, net=net)


def _net_successors(net, m):
    for j, (need, delta) in enumerate(net._columns):
        if all(m[i] >= w for i, w in need):
            out = list(m)
            for i, d in delta:
                out[i] += d
            yield j, tuple(out)


def explore(actions, root, successors, node_budget=DEFAULT_NODE_BUDGET, net=None) -> ReachabilityGraph:
    """Generic BFS over a successor function yielding ``(action index, state)``."""
    seen = {root: 0}
    order = [root]
    edges = []
    queue = deque([0])
    truncated = False
    while queue:
        k = queue.popleft()
        for a, nxt in successors(order[k]):
            d = seen.get(nxt)
            if d is None:
                if len(order) >= node_budget:
                    truncated = True
                    continue
                d = seen[nxt] = len(order)
                order.append(nxt)
                queue.append(d)
            edges.append((k, a, d))
    return ReachabilityGraph(tuple(actions), order, edges, truncated, net)


def _scc_future(succ):
    """Tarjan SCCs (iterative) plus, per component, the bitmask of actions that
    can still occur from it and whether it is terminal."""
    n = len(succ)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    comp = [-1] * n
    stack: list = []
    comps: list = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, i = work.pop()
            if i == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            edges = succ[v]
            while i < len(edges):
                w = edges[i][1]
                i += 1
                if index[w] == -1:
                    work.append((v, i))
                    work.append((w, 0))
                    recurse = True
                    break
                if on_stack[w]:
                    low[v] = min(low[v], index[w])
            if recurse:
                continue
            if low[v] == index[v]:
                members = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = len(comps)
                    members.append(w)
                    if w == v:
                        break
                comps.append(members)
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
    # Tarjan emits components in reverse topological order: successors come first.
    future = [0] * len(comps)
    terminal = [True] * len(comps)
    for c, members in enumerate(comps):
        mask = 0
        for v in members:
            for a, w in succ[v]:
                mask |= 1 << a
                if comp[w] != c:
                    mask |= future[comp[w]]
                    terminal[c] = False
        future[c] = mask
    return comp, future, terminal


def dead_transitions(rg: ReachabilityGraph, m: Marking) -> set:
    """Actions that can never occur again from ``m``."""
    comp, future, _ = rg._future
    try:
        k = rg.index[m]
    except KeyError:
        raise StructuralError("marking is not a node of the graph") from None
    mask = future[comp[k]]
    return {a for j, a in enumerate(rg.actions) if not mask >> j & 1}


@dataclass(frozen=True)
class Census:
    reachable: int
    deadlock: int
    livelock_dead_transition: int
    livelock_terminal_scc: int
    definition: str = DEFAULT_LIVELOCK_DEFINITION

    @property
    def livelock(self) -> int:
        if self.definition == "terminal-scc":
            return self.livelock_terminal_scc
        return self.livelock_dead_transition

    def matching_definition(self, expected_livelock: int):
        """Name of the livelock reading that reproduces ``expected_livelock``, if any."""
        for d in LIVELOCK_DEFINITIONS:
            if (self.livelock_terminal_scc if d == "terminal-scc" else self.livelock_dead_transition) == expected_livelock:
                return d
        return None


def classify_markings(rg: ReachabilityGraph, definition: str = DEFAULT_LIVELOCK_DEFINITION) -> Census:
    if definition not in LIVELOCK_DEFINITIONS:
        raise ValueError(f"unknown livelock definition {definition!r}")
    comp, future, terminal = rg._future
    full = (1 << len(rg.actions)) - 1
    succ = rg.successors
    dead_any = sum(1 for k in range(len(rg.markings)) if future[comp[k]] != full)
    term = sum(
        1 for k in range(len(rg.markings)) if terminal[comp[k]] and future[comp[k]] != full
    )
    deadlocks = sum(1 for s in succ if not s)
    return Census(len(rg.markings), deadlocks, dead_any, term, definition)


def is_live(net: Net, m0: Marking, node_budget: int = DEFAULT_NODE_BUDGET) -> bool:
    rg = reachability_graph(net, m0, node_budget)
    return classify_markings(rg).livelock == 0


def is_implicit_place(net: Net, m0: Marking, p, node_budget: int = DEFAULT_NODE_BUDGET) -> bool:
    """Behavioural implicitness: ``p`` never is the only place disabling one of its outputs."""
    rg = reachability_graph(net, m0, node_budget)
    rg._require_exhaustive()
    i = net.place_index[p]
    outs = [j for j in range(len(net.transitions)) if net.pre[i][j]]
    for m in rg.markings:
        for j in outs:
            need = net._columns[j][0]
            others_ok = all(m[q] >= w for q, w in need if q != i)
            if others_ok and m[i] < net.pre[i][j]:
                return False
    return True


def place_bounds(rg: ReachabilityGraph) -> dict:
    rg._require_exhaustive()
    if rg.net is None:
        raise StructuralError("place bounds need a net-backed graph")
    return {p: max(m[i] for m in rg.markings) for i, p in enumerate(rg.net.places)}
