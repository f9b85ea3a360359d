"""Line-oriented net files, DOT export and ``[section] key = value`` reports.

Net file statements, one per line, ``#`` starts a comment::

    NET <name>
    PLACE <id> [MARKING <n>]
    TRANS <id> [LABEL <string>]
    ARC <place> -> <trans> [WEIGHT <n>]
    ARC <trans> -> <place> [WEIGHT <n>]
    AGENT <name> PLACES <id,...> TRANS <id,...> WAIT <place>
    BUFFERS <id,...>
    META <key> <string>
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ParseError, StructuralError
from .petri import Net, NetBuilder, ReachabilityGraph
from .ssp import Agent, SspDecomposition

_IDENT = re.compile(r"^[A-Za-z_][\w.\-]*$")
_TOKEN = re.compile(r'"(?:[^"\\]|\\.)*"|->|[^\s]+')


@dataclass
class NetDocument:
    net: Net
    initial_marking: tuple
    decomposition: SspDecomposition | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.initial_marking = tuple(self.initial_marking)
        self.net.check_marking(self.initial_marking)
        if self.decomposition is not None:
            declared = set(self.net.places) | set(self.net.transitions)
            refs = set(self.decomposition.buffers)
            for a in self.decomposition.agents:
                refs |= set(a.places) | set(a.transitions) | {a.wait}
            missing = sorted(refs - declared)
            if missing:
                raise StructuralError(f"decomposition references undeclared nodes {missing}")

    @property
    def m0(self):
        return self.initial_marking


def _tokens(line):
    out = []
    for mt in _TOKEN.finditer(line):
        tok = mt.group(0)
        if tok.startswith("#"):
            break
        out.append((tok, mt.start() + 1))
    return out


def _unquote(tok):
    if tok.startswith('"'):
        return re.sub(r"\\(.)", r"\1", tok[1:-1])
    return tok


def _nat(tok, col, lineno, what):
    if not tok.isdigit():
        raise ParseError(f"{what} must be a natural number, got {tok!r}", lineno, col)
    return int(tok)


def _ident(tok, col, lineno):
    if not _IDENT.match(tok):
        raise ParseError(f"invalid identifier {tok!r}", lineno, col)
    return tok


def _idlist(tok, col, lineno):
    items = [s for s in tok.split(",") if s]
    for s in items:
        _ident(s, col, lineno)
    return items


def parse_net(text: str) -> NetDocument:
    b = NetBuilder()
    marking = {}
    agents = []
    buffers = None
    meta = {}
    name_seen = False
    arcs_seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        toks = _tokens(line)
        if not toks:
            continue
        kw, col = toks[0]
        args = toks[1:]

        def need(n, usage):
            if len(args) != n:
                raise ParseError(f"expected: {usage}", lineno, col)

        if kw == "NET":
            need(1, "NET <name>")
            if name_seen:
                raise ParseError("second NET statement", lineno, col)
            b.name = _unquote(args[0][0])
            name_seen = True
        elif kw == "PLACE":
            if len(args) not in (1, 3) or (len(args) == 3 and args[1][0] != "MARKING"):
                raise ParseError("expected: PLACE <id> [MARKING <n>]", lineno, col)
            p = _ident(*args[0], lineno)
            if p in b.places or p in b.transitions:
                raise ParseError(f"duplicate identifier {p!r}", lineno, args[0][1])
            b.add_place(p)
            if len(args) == 3:
                marking[p] = _nat(*args[2], lineno, "marking")
        elif kw == "TRANS":
            if len(args) not in (1, 3) or (len(args) == 3 and args[1][0] != "LABEL"):
                raise ParseError("expected: TRANS <id> [LABEL <string>]", lineno, col)
            t = _ident(*args[0], lineno)
            if t in b.places or t in b.transitions:
                raise ParseError(f"duplicate identifier {t!r}", lineno, args[0][1])
            b.add_transition(t, _unquote(args[2][0]) if len(args) == 3 else None)
        elif kw == "ARC":
            if len(args) not in (3, 5) or args[1][0] != "->" or (len(args) == 5 and args[3][0] != "WEIGHT"):
                raise ParseError("expected: ARC <src> -> <dst> [WEIGHT <n>]", lineno, col)
            src, dst = args[0][0], args[2][0]
            if len(args) == 5 and args[4][0].startswith("-"):
                raise ParseError(f"negative weight {args[4][0]}", lineno, args[4][1])
            w = _nat(*args[4], lineno, "weight") if len(args) == 5 else 1
            if w == 0:
                raise ParseError("arc weight must be positive", lineno, args[4][1])
            for node, c in ((src, args[0][1]), (dst, args[2][1])):
                if node not in b.places and node not in b.transitions:
                    raise ParseError(f"arc references undeclared node {node!r}", lineno, c)
            if (src, dst) in arcs_seen:
                raise ParseError(f"duplicate arc {src} -> {dst}", lineno, col)
            arcs_seen.add((src, dst))
            try:
                b.add_arc(src, dst, w)
            except StructuralError as exc:
                raise ParseError(str(exc), lineno, col) from None
        elif kw == "AGENT":
            if len(args) != 7 or [a[0] for a in args[1::2]] != ["PLACES", "TRANS", "WAIT"]:
                raise ParseError("expected: AGENT <name> PLACES <ids> TRANS <ids> WAIT <place>", lineno, col)
            agents.append(Agent(
                _ident(*args[0], lineno),
                tuple(_idlist(*args[2], lineno)),
                tuple(_idlist(*args[4], lineno)),
                _ident(*args[6], lineno),
            ))
        elif kw == "BUFFERS":
            if len(args) > 1:
                raise ParseError("expected: BUFFERS <id,...>", lineno, col)
            if buffers is not None:
                raise ParseError("second BUFFERS statement", lineno, col)
            buffers = tuple(_idlist(*args[0], lineno)) if args else ()
        elif kw == "META":
            if len(args) != 2:
                raise ParseError("expected: META <key> <string>", lineno, col)
            meta[_ident(*args[0], lineno)] = _unquote(args[1][0])
        else:
            raise ParseError(f"unknown statement {kw!r}", lineno, col)
    net = b.build()
    dec = None
    if agents or buffers is not None:
        dec = SspDecomposition(tuple(agents), buffers or ())
    try:
        return NetDocument(net, net.marking(marking), dec, meta)
    except StructuralError as exc:
        raise ParseError(str(exc)) from None


def _q(s):
    return s if _IDENT.match(s) else '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_net(doc: NetDocument) -> str:
    net = doc.net
    lines = [f"NET {_q(net.name)}"]
    for p, n in zip(net.places, doc.initial_marking):
        lines.append(f"PLACE {p}" + (f" MARKING {n}" if n else ""))
    for t in net.transitions:
        lab = net.labels.get(t)
        lines.append(f"TRANS {t}" + (f" LABEL {_q(lab)}" if lab is not None else ""))
    for j, t in enumerate(net.transitions):
        for i, p in enumerate(net.places):
            if net.pre[i][j]:
                lines.append(f"ARC {p} -> {t}" + (f" WEIGHT {net.pre[i][j]}" if net.pre[i][j] > 1 else ""))
        for i, p in enumerate(net.places):
            if net.post[i][j]:
                lines.append(f"ARC {t} -> {p}" + (f" WEIGHT {net.post[i][j]}" if net.post[i][j] > 1 else ""))
    dec = doc.decomposition
    if dec is not None:
        for a in dec.agents:
            lines.append(
                f"AGENT {a.name} PLACES {','.join(a.places)} TRANS {','.join(a.transitions)} WAIT {a.wait}"
            )
        lines.append("BUFFERS" + (f" {','.join(dec.buffers)}" if dec.buffers else ""))
    for k, v in doc.metadata.items():
        lines.append(f"META {k} {_q(str(v))}")
    return "\n".join(lines) + "\n"


def load_net(path) -> NetDocument:
    return parse_net(Path(path).read_text(encoding="utf-8"))


def save_net(doc: NetDocument, path):
    Path(path).write_text(serialize_net(doc), encoding="utf-8")


def fixture_names() -> list:
    return sorted(
        f.name[:-4] for f in resources.files("ssplive.nets").iterdir() if f.name.endswith(".net")
    )


def load_fixture(name: str) -> NetDocument:
    """Load one of the bundled example nets by stem, e.g. ``"two_agent_plant"``."""
    return parse_net(resources.files("ssplive.nets").joinpath(f"{name}.net").read_text(encoding="utf-8"))


# -- DOT ----------------------------------------------------------------------------


def _dq(s):
    return '"' + str(s).replace('"', '\\"') + '"'


def export_dot(obj, m0=None) -> str:
    """DOT digraph for a ``Net`` (optionally with a marking) or a ``ReachabilityGraph``."""
    if isinstance(obj, ReachabilityGraph):
        return _rg_dot(obj)
    net = obj
    lines = [f"digraph {_dq(net.name)} {{", "  rankdir=LR;"]
    for k, p in enumerate(net.places):
        tok = f"\\n{m0[k]}" if m0 is not None and m0[k] else ""
        lines.append(f"  {_dq(p)} [shape=circle, label={_dq(p + tok)}];")
    for t in net.transitions:
        lab = t + (f"\\n[{net.labels[t]}]" if t in net.labels else "")
        lines.append(f"  {_dq(t)} [shape=box, label={_dq(lab)}];")
    for j, t in enumerate(net.transitions):
        for i, p in enumerate(net.places):
            if net.pre[i][j]:
                w = f" [label={net.pre[i][j]}]" if net.pre[i][j] > 1 else ""
                lines.append(f"  {_dq(p)} -> {_dq(t)}{w};")
            if net.post[i][j]:
                w = f" [label={net.post[i][j]}]" if net.post[i][j] > 1 else ""
                lines.append(f"  {_dq(t)} -> {_dq(p)}{w};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _rg_dot(rg: ReachabilityGraph) -> str:
    lines = ["digraph reachability {"]
    for k, m in enumerate(rg.markings):
        lab = rg.net.format_marking(m) if rg.net is not None else ",".join(map(str, m))
        lines.append(f"  m{k} [label={_dq(lab)}];")
    for s, a, d in rg.edges:
        lines.append(f"  m{s} -> m{d} [label={_dq(rg.actions[a])}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- reports ------------------------------------------------------------------------


def emit_report(sections: dict) -> str:
    """Render ``{section: {key: value}}`` as ``[section]`` blocks of ``key = value`` lines.

    Insertion order is preserved so repeated runs are byte-identical.
    """
    out = []
    for name, items in sections.items():
        out.append(f"[{name}]")
        for k, v in items.items():
            if isinstance(v, bool):
                v = "yes" if v else "no"
            elif isinstance(v, (list, tuple)):
                v = ", ".join(map(str, v))
            out.append(f"{k} = {v}")
        out.append("")
    return "\n".join(out)


def parse_report(text: str) -> dict:
    import configparser

    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    cp.read_string(text)
    return {s: dict(cp[s]) for s in cp.sections()}
