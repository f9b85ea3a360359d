"""Check transitions, control places that make a subnet live, and their
translation back onto the full control net."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .errors import EnforcementError, StructuralError
from .petri import DEFAULT_NODE_BUDGET, Net, is_live
from .semiflows import minimal_t_semiflows

DEFAULT_MAX_SET = 4


def conflict_transitions(net: Net) -> list:
    """Transitions with an input place shared with another transition."""
    return [t for t in net.transitions
            if any(len(net.postset(p)) >= 2 for p in net.preset(t))]


def replay(net: Net, start, x) -> list | None:
    """A firing sequence from ``start`` whose count vector is exactly ``x``, or None.

    ``x`` maps transitions to counts. Depth-first with memoisation on
    (marking, remaining counts).
    """
    rem0 = tuple(x.get(t, 0) for t in net.transitions)
    cols = net._columns
    dead = set()

    def go(m, rem, path):
        if not any(rem):
            return path
        key = (m, rem)
        if key in dead:
            return None
        for j, (need, delta) in enumerate(cols):
            if rem[j] and all(m[i] >= w for i, w in need):
                nm = list(m)
                for i, d in delta:
                    nm[i] += d
                r = list(rem)
                r[j] -= 1
                found = go(tuple(nm), tuple(r), path + [net.transitions[j]])
                if found is not None:
                    return found
        dead.add(key)
        return None

    return go(tuple(start), rem0, [])


@dataclass(frozen=True)
class Check:
    """Check of one semiflow: a single transition or a virtual one over ``members``."""

    semiflow: int
    transition: str
    members: tuple = ()

    @property
    def virtual(self) -> bool:
        return bool(self.members)


@dataclass
class CheckAssignment:
    net: Net  # the subnet, extended with virtual checks when any were needed
    semiflows: list  # minimal T-semiflows of ``net``
    checks: list  # one Check per semiflow, same order
    virtual_places: dict = field(default_factory=dict)  # member -> redirect place


def _is_check(net, flows, k, t):
    x = flows[k]
    if any(t in y.support for i, y in enumerate(flows) if i != k):
        return False
    return replay(net, net.post_column(t), x.as_dict()) is not None


def find_check_transitions(net: Net, semiflows=None, max_set: int = DEFAULT_MAX_SET) -> CheckAssignment:
    """Pick a check transition per minimal T-semiflow.

    Single transitions are preferred, non-conflict ones first, then net order.
    Otherwise subsets of coefficient-one transitions unique to the semiflow
    are tried in increasing size and the first working one gets a virtual check.
    """
    flows = list(semiflows) if semiflows is not None else minimal_t_semiflows(net)
    conflict = set(conflict_transitions(net))
    checks: list = [None] * len(flows)
    pending = []
    for k, x in enumerate(flows):
        cands = [t for t in net.transitions if t in x.support and _is_check(net, flows, k, t)]
        cands.sort(key=lambda t: t in conflict)
        if cands:
            checks[k] = Check(k, cands[0])
        else:
            pending.append(k)
    cur = net
    vplaces: dict = {}
    for k in pending:
        x = flows[k]
        others = set().union(*(y.support for i, y in enumerate(flows) if i != k))
        pool = [t for t in net.transitions
                if t in x.support and t not in others and x[t] == 1 and t not in vplaces]
        found = None
        for size in range(2, max_set + 1):
            for members in combinations(pool, size):
                cand, tch, places = make_virtual_check(cur, members, _fresh(cur, f"tch{k + 1}"))
                y = dict(x.as_dict())
                y[tch] = 1
                if replay(cand, cand.post_column(tch), y) is not None:
                    found = (cand, tch, members, places)
                    break
            if found:
                break
        if not found:
            raise EnforcementError(
                f"semiflow {x} has no check transition and no check set of size <= {max_set}"
            )
        cur, tch, members, places = found
        vplaces.update(places)
        checks[k] = Check(k, tch, members)
    if pending:
        flows = [_extend(f, cur, checks[k]) for k, f in enumerate(flows)]
    return CheckAssignment(cur, flows, checks, vplaces)


def _extend(flow, net, check):
    from .semiflows import Semiflow

    coeffs = tuple(
        flow.as_dict().get(t, 0) if t != check.transition or not check.virtual else 1
        for t in net.transitions
    )
    return Semiflow("T", coeffs, net.transitions)


def _fresh(net, base):
    name, k = base, 1
    used = set(net.places) | set(net.transitions)
    while name in used:
        k += 1
        name = f"{base}_{k}"
    return name


def make_virtual_check(net: Net, members, name="tch"):
    """Redirect each member's output into a private place and let a new
    unlabeled transition ``name`` synchronize them and release the original output.

    Returns ``(new net, name, {member: place})``. A singleton set leaves the net as is.
    """
    members = tuple(members)
    if len(members) == 1:
        return net, members[0], {}
    b = net.builder()
    post_sum = {}
    places = {}
    for s in members:
        for p in net.postset(s):
            post_sum[p] = post_sum.get(p, 0) + b.post.pop((p, s))
        q = b.add_place(_fresh(net, f"q{s}"))
        b.set_post(q, s, 1)
        places[s] = q
    b.add_transition(name)
    for s, q in places.items():
        b.set_pre(q, name, 1)
    for p, w in post_sum.items():
        b.set_post(p, name, w)
    return b.build(), name, places


@dataclass
class EnforcementResult:
    enforced_net: Net
    m0: tuple
    added_places: dict  # conflict transition -> control place
    checks: CheckAssignment

    def added_marking(self) -> dict:
        pi = self.enforced_net.place_index
        return {p: self.m0[pi[p]] for p in self.added_places.values()}


def enforce_liveness(net: Net, checks: CheckAssignment | None = None,
                     node_budget: int = DEFAULT_NODE_BUDGET) -> EnforcementResult:
    """Add one control place per conflict transition and mark the net live.

    Each control place feeds only its transition and is refilled by the check
    of every semiflow containing it, by the semiflow's coefficient. The initial
    marking is what all checks produce together.
    """
    if checks is None:
        checks = find_check_transitions(net)
    base = checks.net
    tck = {c.transition for c in checks.checks}
    conflict = [t for t in conflict_transitions(base) if t not in tck]
    b = base.builder()
    added = {}
    for t in conflict:
        p = b.add_place(_fresh(base, f"p{t}"))
        b.set_pre(p, t, 1)
        added[t] = p
    for c in checks.checks:
        x = checks.semiflows[c.semiflow]
        for t, p in added.items():
            if t in x.support:
                b.set_post(p, c.transition, b.post.get((p, c.transition), 0) + x[t])
    enforced = b.build()
    m0 = [0] * len(enforced.places)
    for c in checks.checks:
        for i, w in enumerate(enforced.post_column(c.transition)):
            m0[i] += w
    m0 = tuple(m0)
    if not is_live(enforced, m0, node_budget):
        raise EnforcementError("enforced subnet is not live at the computed initial marking")
    return EnforcementResult(enforced, m0, added, checks)


def translate_to_control_net(cn, scn, results):
    """Carry enforcement places and virtual checks back onto the control net.

    ``results`` are the enforcement results of subnets of ``scn`` (the
    simplification of ``cn``). A place added on fused transition ``tx`` is
    consumed at ``tx_first`` and produced at ``tx_last`` with the same weights
    and initial marking. A virtual check keeps its structure: the member's
    last transition feeds the redirect place, the check releases the outputs.
    """
    from .control import ControlNet

    if not results:
        return cn
    c = cn.net
    seq_of = {f"t{n}": s for n, s in cn.sequences.items()}
    b = c.builder()
    m0 = dict(zip(c.places, cn.m0))
    extra, silent = list(cn.extra_places), list(cn.silent)

    def ends(t):
        if t in seq_of:
            return seq_of[t].first, seq_of[t].last
        if t in silent or t in c.transition_index:
            return t, t
        if t in b.transitions:  # a virtual check added below
            return t, t
        raise StructuralError(f"transition {t} of the simplified net has no origin in the control net")

    for res in results:
        en = res.enforced_net
        known = set(scn.net.places)
        for t in en.transitions:
            if t not in seq_of and t not in c.transition_index and t not in b.transitions:
                b.add_transition(t)
                silent.append(t)
        for p in en.places:
            if p in known:
                continue
            if p in b.places:
                raise StructuralError(f"place {p} already exists in the control net")
            b.add_place(p)
            extra.append(p)
            m0[p] = res.m0[en.place_index[p]]
            for t in en.transitions:
                j = en.transition_index[t]
                first, last = ends(t)
                i = en.place_index[p]
                if en.pre[i][j]:
                    b.set_pre(p, first, en.pre[i][j])
                if en.post[i][j]:
                    b.set_post(p, last, en.post[i][j])
        # a virtual check changed where its members deliver tokens
        for chk in res.checks.checks:
            if not chk.virtual:
                continue
            for s in chk.members:
                _, last = ends(s)
                for p in list(known):
                    if (p, last) in b.post:
                        b.post.pop((p, last))
            tch = chk.transition
            j = en.transition_index[tch]
            for p in known:
                i = en.place_index[p]
                if en.post[i][j]:
                    b.set_post(p, tch, en.post[i][j])
                if en.pre[i][j]:
                    b.set_pre(p, tch, en.pre[i][j])
    net = b.build()
    return ControlNet(
        net,
        net.marking(m0),
        dict(cn.buffer_places),
        dict(cn.agent_places),
        dict(cn.sequences),
        extra,
        silent,
    )
