"""Guarded evolution of a plant under its control net, and their composition.

A plant transition may fire when a control transition carrying its label is
enabled, or when the control place of a running semiflow containing it holds
exactly one token. After the plant fires, one enabled control transition with
the same label (if any) fires too. Unlabeled control transitions (virtual
checks) fire on their own as soon as they are enabled.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .control import ControlNet, build_control_pn, classify_subnets, simplify_control_pn
from .enforcement import enforce_liveness, find_check_transitions, translate_to_control_net
from .errors import StructuralError, SupervisorError
from .petri import DEFAULT_NODE_BUDGET, explore, fire, is_live
from .pnio import NetDocument
from .petri import NetBuilder


@dataclass
class GuardTable:
    control: object  # the control Net
    labeled: dict  # plant transition -> control transitions carrying it
    places: dict  # plant transition -> px places of semiflows containing it


def guard_table(plant, cn: ControlNet) -> GuardTable:
    labeled = {t: [] for t in plant.transitions}
    for c, lab in cn.net.labels.items():
        if lab not in labeled:
            raise StructuralError(f"control transition {c} carries unknown label {lab!r}")
        labeled[lab].append(c)
    places = {t: [] for t in plant.transitions}
    for name, s in cn.sequences.items():
        if s.place is None:
            continue
        for t in s.flow.support:
            places[t].append(s.place)
    return GuardTable(cn.net, labeled, places)


def _enabled_at(net, m, t):
    return all(m[i] >= w for i, w in net._columns[net.transition_index[t]][0])


def guard_true(t, m_c, gt: GuardTable) -> bool:
    c = gt.control
    if any(_enabled_at(c, m_c, u) for u in gt.labeled[t]):
        return True
    return any(m_c[c.place_index[p]] == 1 for p in gt.places[t])


@dataclass
class SupervisorState:
    m_s: tuple
    m_c: tuple
    trace: list = field(default_factory=list)  # (index, plant t or None, control t or None)

    def copy(self):
        return SupervisorState(self.m_s, self.m_c, list(self.trace))


class RandomPolicy:
    """Seeded uniform choice; equal seeds give equal traces."""

    def __init__(self, seed=0):
        self.seed = seed
        self.rng = random.Random(seed)

    def choose_plant(self, choices, state):
        return self.rng.choice(choices)

    def choose_control(self, choices, state):
        return self.rng.choice(choices)


class ScriptedPolicy:
    """Replays ``(plant, control-or-None)`` steps; a plant step outside the firable set is an error."""

    def __init__(self, steps):
        self.steps = [s if isinstance(s, tuple) else (s, None) for s in steps]
        self.pos = 0

    def exhausted(self):
        return self.pos >= len(self.steps)

    def choose_plant(self, choices, state):
        t = self.steps[self.pos][0]
        if t not in choices:
            raise SupervisorError(
                f"scripted step {self.pos} chooses {t}, firable are {', '.join(choices) or 'none'}"
            )
        return t

    def choose_control(self, choices, state):
        want = self.steps[self.pos][1]
        if want is None:
            return choices[0]
        if want not in choices:
            raise SupervisorError(f"scripted step {self.pos} wants {want}, enabled are {choices}")
        return want

    def advance(self):
        self.pos += 1


def parse_script(text: str) -> list:
    """Script steps from a trace (``<i> <plant> <control|->``) or bare transition names."""
    steps = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].split()
        if not line:
            continue
        if line[0].isdigit():
            plant = line[1] if len(line) > 1 else "-"
            ctrl = line[2] if len(line) > 2 else "-"
            if plant == "-":
                continue  # silent control step, replayed automatically
            steps.append((plant, None if ctrl == "-" else ctrl))
        else:
            steps.extend((t, None) for t in line)
    return steps


def format_trace(trace) -> str:
    return "".join(f"{i} {p or '-'} {c or '-'}\n" for i, p, c in trace)


class Supervisor:
    def __init__(self, doc, cn: ControlNet, check_hypothesis=True, node_budget=DEFAULT_NODE_BUDGET):
        self.plant = doc.net
        self.cn = cn
        self.control = cn.net
        self.gt = guard_table(self.plant, cn)
        if check_hypothesis:
            check_hypothesis_of(doc, cn, node_budget)
        self.state = SupervisorState(tuple(doc.initial_marking), tuple(cn.m0))
        self._settle(self.state, None)

    def firable(self, state=None) -> list:
        s = state or self.state
        out = []
        for t in self.plant.transitions:
            if _enabled_at(self.plant, s.m_s, t) and guard_true(t, s.m_c, self.gt):
                out.append(t)
        return out

    def control_options(self, t, m_c) -> list:
        return [u for u in self.gt.labeled[t] if _enabled_at(self.control, m_c, u)]

    def _settle(self, state, policy):
        # fire enabled silent control transitions until none is left
        changed = True
        while changed:
            changed = False
            for u in self.cn.silent:
                if _enabled_at(self.control, state.m_c, u):
                    state.m_c = fire(self.control, state.m_c, u)
                    state.trace.append((len(state.trace), None, u))
                    changed = True

    def step(self, policy) -> bool:
        """One iteration of the control loop; False when nothing is firable."""
        s = self.state
        tf = self.firable()
        if not tf:
            return False
        t = policy.choose_plant(tf, s)
        if t not in tf:
            raise SupervisorError(f"policy chose {t}, which is not firable")
        opts = self.control_options(t, s.m_c)
        u = policy.choose_control(opts, s) if opts else None
        if u is not None and u not in opts:
            raise SupervisorError(f"policy chose control transition {u}, which is not enabled")
        s.m_s = fire(self.plant, s.m_s, t)
        if u is not None:
            s.m_c = fire(self.control, s.m_c, u)
        s.trace.append((len(s.trace), t, u))
        if isinstance(policy, ScriptedPolicy):
            policy.advance()
        self._settle(s, policy)
        return True

    def successors(self, joint):
        """Joint-state successors ``(plant index, next joint)`` branching over control choices."""
        ns = len(self.plant.places)
        st = SupervisorState(joint[:ns], joint[ns:])
        for t in self.firable(st):
            j = self.plant.transition_index[t]
            ms = fire(self.plant, st.m_s, t)
            for u in self.control_options(t, st.m_c) or [None]:
                nxt = SupervisorState(ms, st.m_c if u is None else fire(self.control, st.m_c, u))
                self._settle(nxt, None)
                yield j, nxt.m_s + nxt.m_c


def check_hypothesis_of(doc, cn: ControlNet, node_budget=DEFAULT_NODE_BUDGET):
    """The control net must be live and the plant must hold at least its buffer tokens."""
    for b, pb in cn.buffer_places.items():
        have = doc.initial_marking[doc.net.place_index[b]]
        need = cn.m0[cn.net.place_index[pb]]
        if have < need:
            raise SupervisorError(f"plant buffer {b} holds {have} tokens, control net needs {need}")
    if not is_live(cn.net, cn.m0, node_budget):
        raise SupervisorError("control net is not live at its initial marking")


@dataclass
class RunResult:
    trace: list
    verdict: str  # "running", "blocked", "live", "not-live"
    state: SupervisorState | None = None
    graph: object = None
    census: object = None
    blocked_at: int | None = None  # script index refused by the guards


def run(doc, cn: ControlNet, policy="random", steps=100, seed=0, node_budget=DEFAULT_NODE_BUDGET,
        check_hypothesis=True) -> RunResult:
    """Drive the supervised system.

    ``policy`` is ``"random"``, ``"exhaustive"``, a list of script steps, or a
    policy object. Exhaustive mode explores every joint marking and classifies it.
    """
    from .petri import classify_markings

    sup = Supervisor(doc, cn, check_hypothesis, node_budget)
    if policy == "exhaustive":
        rg = explore(sup.plant.transitions, sup.state.m_s + sup.state.m_c, sup.successors, node_budget)
        census = classify_markings(rg)
        return RunResult([], "live" if census.livelock == 0 else "not-live", None, rg, census)
    if policy == "random":
        policy = RandomPolicy(seed)
    elif isinstance(policy, (list, tuple)):
        policy = ScriptedPolicy(policy)
    verdict = "running"
    k = 0
    while k < steps:
        if isinstance(policy, ScriptedPolicy):
            if policy.exhausted():
                break
            if policy.steps[policy.pos][0] not in sup.firable():
                return RunResult(sup.state.trace, "refused", sup.state, blocked_at=policy.pos)
        if not sup.step(policy):
            verdict = "blocked"
            break
        k += 1
    return RunResult(sup.state.trace, verdict, sup.state)


# -- trace checks ---------------------------------------------------------------------


def trace_violations(doc, cn: ControlNet, trace) -> list:
    """Guard soundness and semiflow atomicity violations along a trace.

    Soundness: when a first control transition fires, the plant can still
    complete the whole semiflow from the marking before that step.
    Atomicity: while a semiflow is active, its agent fires only transitions
    of the semiflow's support.
    """
    from .enforcement import replay

    plant, dec = doc.net, doc.decomposition
    seq_by_first = {s.first: s for s in cn.sequences.values()}
    seq_by_last = {s.last: s for s in cn.sequences.values()}
    active = {}
    m = tuple(doc.initial_marking)
    problems = []
    for i, t, u in trace:
        if t is None:
            continue
        agent = dec.agent_of(t)
        if agent in active and t not in active[agent].flow.support:
            problems.append(f"step {i}: {t} fired while {active[agent].name} is active")
        if u in seq_by_first:
            s = seq_by_first[u]
            if replay(plant, m, s.flow.as_dict()) is None:
                problems.append(f"step {i}: {s.name} started but cannot complete")
            active[s.agent] = s
        if u in seq_by_last:
            active.pop(seq_by_last[u].agent, None)
        m = fire(plant, m, t)
    return problems


# -- synthesis and composition -----------------------------------------------------------


@dataclass
class Synthesis:
    control: ControlNet  # final control net, enforcement applied
    raw: ControlNet
    simplified: object
    classes: list
    enforcements: dict  # subnet index -> EnforcementResult


def synthesize(doc, node_budget=DEFAULT_NODE_BUDGET) -> Synthesis:
    """Control net, its simplification, the CF/JF test, and enforcement where needed."""
    raw = build_control_pn(doc)
    scn = simplify_control_pn(raw)
    classes = classify_subnets(scn)
    results = {}
    for k, cls in enumerate(classes):
        if cls["structurally_live"]:
            continue
        sub = scn.subnet_net(k)
        results[k] = enforce_liveness(sub, find_check_transitions(sub), node_budget)
    cn = translate_to_control_net(raw, scn, list(results.values()))
    return Synthesis(cn, raw, scn, classes, results)


def compose(doc, cn: ControlNet) -> NetDocument:
    """Single net fusing plant transitions with the control transitions carrying them.

    Plant buffers are identified with their control places; buffer arcs
    follow the control net, where a semiflow reserves its inputs when it
    starts and releases its outputs when it ends. An unlabeled plant
    transition gets one copy per running-semiflow place that can enable it.
    """
    plant, c = doc.net, cn.net
    buf_of = {pb: b for b, pb in cn.buffer_places.items()}
    buffers = set(cn.buffer_places)
    gt = guard_table(plant, cn)
    b = NetBuilder(f"{plant.name}_composed")
    m0 = {}
    for k, p in enumerate(plant.places):
        b.add_place(p)
        m0[p] = doc.initial_marking[k]
    for k, p in enumerate(c.places):
        if p in buf_of:
            continue
        b.add_place(p)
        m0[p] = cn.m0[k]
    for b_, pb in cn.buffer_places.items():
        m0[b_] = cn.m0[c.place_index[pb]]

    def add_plant(t, name):
        j = plant.transition_index[t]
        for i, p in enumerate(plant.places):
            if p in buffers:
                continue
            if plant.pre[i][j]:
                b.set_pre(p, name, b.pre.get((p, name), 0) + plant.pre[i][j])
            if plant.post[i][j]:
                b.set_post(p, name, b.post.get((p, name), 0) + plant.post[i][j])

    def add_control(u, name):
        j = c.transition_index[u]
        for i, p in enumerate(c.places):
            q = buf_of.get(p, p)
            if c.pre[i][j]:
                b.set_pre(q, name, b.pre.get((q, name), 0) + c.pre[i][j])
            if c.post[i][j]:
                b.set_post(q, name, b.post.get((q, name), 0) + c.post[i][j])

    for t in plant.transitions:
        labeled = gt.labeled[t]
        if labeled:
            for u in labeled:
                name = t if len(labeled) == 1 else f"{t}.{u}"
                b.add_transition(name, t)
                add_plant(t, name)
                add_control(u, name)
            continue
        guards = gt.places[t]
        for p in guards:
            name = t if len(guards) == 1 else f"{t}.{p}"
            b.add_transition(name, t)
            add_plant(t, name)
            b.set_pre(p, name, 1)
            b.set_post(p, name, 1)
    for u in cn.silent:
        b.add_transition(u)
        add_control(u, u)
    net = b.build()
    return NetDocument(net, net.marking(m0), None, {"composed_from": plant.name})
