"""Siphons, traps, monitor places and the stage-by-stage census.

Monitor places are the classical baseline: keep every bad siphon marked by
adding a place whose token count tracks the siphon's. They work, but a monitor
may hand tokens to several agents at once, which breaks the private-buffer
structure the control-net approach keeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import SiphonLimitError, StructuralError, TruncatedGraphError
from .petri import (
    DEFAULT_NODE_BUDGET,
    Net,
    classify_markings,
    is_implicit_place,
    reachability_graph,
)

DEFAULT_SIPHON_CAP = 50_000


@dataclass(frozen=True)
class Siphon:
    places: frozenset
    is_minimal: bool = True
    is_bad: bool = False

    def __str__(self):
        return "{" + ", ".join(sorted(self.places, key=_natural)) + "}"


def _natural(s):
    import re
    return [int(x) if x.isdigit() else x for x in re.split(r"(\d+)", s)]


def _pre_t(net, places):
    return {t for p in places for t in net.preset(p)}


def _post_t(net, places):
    return {t for p in places for t in net.postset(p)}


def is_siphon(net: Net, places) -> bool:
    return bool(places) and _pre_t(net, places) <= _post_t(net, places)


def is_trap(net: Net, places) -> bool:
    return bool(places) and _post_t(net, places) <= _pre_t(net, places)


def maximal_trap(net: Net, places) -> frozenset:
    """Largest trap inside ``places`` (possibly empty)."""
    trap = set(places)
    changed = True
    while changed:
        changed = False
        for p in list(trap):
            if any(not (set(net.postset(t)) & trap) for t in net.postset(p)):
                trap.discard(p)
                changed = True
    return frozenset(trap)


def minimal_siphons(net: Net, cap: int = DEFAULT_SIPHON_CAP) -> list:
    """All minimal siphons of an ordinary net, each tagged bad when it holds no trap.

    For every place a branching search grows ``{p}`` by adding an input place
    of some transition that feeds the set but is not fed by it.
    """
    if not net.is_ordinary:
        raise StructuralError(
            f"net {net.name!r} is not ordinary; siphon control applies to ordinary nets only"
        )
    found = set()
    visited = set()
    work = [frozenset([p]) for p in net.places]
    while work:
        s = work.pop()
        if s in visited:
            continue
        visited.add(s)
        if len(visited) > cap:
            raise SiphonLimitError(f"siphon search exceeded {cap} candidate sets")
        if any(f <= s for f in found):
            continue
        missing = _pre_t(net, s) - _post_t(net, s)
        if not missing:
            found.add(s)
            continue
        t = min(missing, key=net.transition_index.__getitem__)
        for p in net.preset(t):
            work.append(s | {p})
    minimal = [s for s in found if not any(o < s for o in found)]
    pi = net.place_index
    minimal.sort(key=lambda s: sorted(pi[p] for p in s))
    return [Siphon(s, True, not maximal_trap(net, s)) for s in minimal]


def token_sum(net: Net, m, places) -> int:
    return sum(m[net.place_index[p]] for p in places)


@dataclass
class Monitor:
    place: str
    siphon: Siphon
    agents: tuple  # agents owning the monitor's output transitions
    redundant: bool | None = None  # behaviourally implicit, None when not checked

    @property
    def breaks_privacy(self) -> bool:
        return len(self.agents) >= 2


def add_monitor(net: Net, m0, siphon, decomposition=None, name=None, check_redundancy=False,
                node_budget=DEFAULT_NODE_BUDGET):
    """Add a place keeping the siphon's token sum at least one.

    The monitor's incidence row is the sum of the siphon's rows of C and it
    starts with the siphon's initial tokens minus one.
    """
    places = siphon.places if isinstance(siphon, Siphon) else frozenset(siphon)
    if not isinstance(siphon, Siphon):
        siphon = Siphon(places, True, not maximal_trap(net, places))
    start = token_sum(net, m0, places)
    if start < 1:
        raise StructuralError(f"siphon {siphon} is unmarked and cannot be kept marked")
    row = [sum(net.incidence[net.place_index[p]][j] for p in places)
           for j in range(len(net.transitions))]
    if name is None:
        k = 1
        while f"pm{k}" in net.place_index:
            k += 1
        name = f"pm{k}"
    b = net.builder()
    b.add_place(name)
    for j, t in enumerate(net.transitions):
        if row[j] < 0:
            b.set_pre(name, t, -row[j])
        elif row[j] > 0:
            b.set_post(name, t, row[j])
    new = b.build()
    m = tuple(m0) + (start - 1,)
    outs = new.postset(name)
    agents = ()
    if decomposition is not None:
        agents = tuple(sorted({decomposition.agent_of(t) for t in outs} - {None}))
    mon = Monitor(name, siphon, agents)
    if check_redundancy:
        try:
            mon.redundant = is_implicit_place(new, m, name, node_budget)
        except TruncatedGraphError:
            mon.redundant = None
    return new, m, mon


@dataclass
class BaselineResult:
    net: Net
    m0: tuple
    monitors: list = field(default_factory=list)
    census: object = None
    rounds: int = 0

    @property
    def privacy_violations(self) -> list:
        return [m for m in self.monitors if m.breaks_privacy]


def monitor_baseline(doc, max_rounds: int = 10, node_budget=DEFAULT_NODE_BUDGET,
                     siphon_cap=DEFAULT_SIPHON_CAP) -> BaselineResult:
    """Monitor every minimal bad siphon that some reachable marking empties; repeat until live."""
    net, m0 = doc.net, tuple(doc.initial_marking)
    res = BaselineResult(net, m0)
    done = set()
    for rnd in range(max_rounds + 1):
        rg = reachability_graph(net, m0, node_budget)
        census = classify_markings(rg)
        res.net, res.m0, res.census, res.rounds = net, m0, census, rnd
        if census.livelock == 0:
            return res
        if rnd == max_rounds:
            break
        targets = []
        for s in minimal_siphons(net, siphon_cap):
            if not s.is_bad or s.places in done:
                continue
            idx = [net.place_index[p] for p in s.places]
            if any(sum(m[i] for i in idx) == 0 for m in rg.markings):
                targets.append(s)
        if not targets:
            return res
        for s in targets:
            done.add(s.places)
            net, m0, mon = add_monitor(net, m0, s, doc.decomposition)
            res.monitors.append(mon)
    raise StructuralError(f"monitor baseline still not live after {max_rounds} rounds")


# -- census over all stages ------------------------------------------------------------------


def census_items(census) -> dict:
    return {
        "reachable": census.reachable,
        "deadlock": census.deadlock,
        "livelock": census.livelock,
        "livelock_definition": census.definition,
        "livelock_dead_transition": census.livelock_dead_transition,
        "livelock_terminal_scc": census.livelock_terminal_scc,
    }


def full_pipeline_census(doc, node_budget=DEFAULT_NODE_BUDGET) -> dict:
    """Plant, monitor baseline and composed supervised net, as report sections."""
    from .supervisor import compose, run, synthesize

    sections = {}
    plant = classify_markings(reachability_graph(doc.net, doc.initial_marking, node_budget))
    sections["plant"] = census_items(plant)

    if doc.net.is_ordinary:
        base = monitor_baseline(doc, node_budget=node_budget)
        sec = census_items(base.census)
        sec["monitors"] = len(base.monitors)
        sec["rounds"] = base.rounds
        for k, mon in enumerate(base.monitors, 1):
            sec[f"siphon_{k}"] = str(mon.siphon)
            if mon.agents:
                sec[f"siphon_{k}_feeds"] = ", ".join(mon.agents)
        sec["privacy_violations"] = len(base.privacy_violations)
        sections["monitors"] = sec
    else:
        sections["monitors"] = {"skipped": "net is not ordinary"}

    syn = synthesize(doc, node_budget)
    composed = compose(doc, syn.control)
    ccensus = classify_markings(reachability_graph(composed.net, composed.initial_marking, node_budget))
    sec = census_items(ccensus)
    joint = run(doc, syn.control, "exhaustive", node_budget=node_budget).census
    sec["joint_reachable"] = joint.reachable
    sec["joint_livelock"] = joint.livelock
    sections["supervised"] = sec
    return sections
