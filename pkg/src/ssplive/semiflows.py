"""Minimal-support T- and P-semiflows by Farkas elimination in exact integers."""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from functools import reduce

from .errors import SemiflowLimitError
from .petri import Net

DEFAULT_CAP = 10_000


@dataclass(frozen=True)
class Semiflow:
    """Non-negative integer annuller of C, over transitions (``T``) or places (``P``)."""

    kind: str
    coefficients: tuple
    nodes: tuple

    @property
    def support(self) -> frozenset:
        return frozenset(n for n, c in zip(self.nodes, self.coefficients) if c)

    def __getitem__(self, node):
        return self.coefficients[self.nodes.index(node)]

    def as_dict(self) -> dict:
        return {n: c for n, c in zip(self.nodes, self.coefficients) if c}

    def __str__(self):
        return " + ".join(n if c == 1 else f"{c}*{n}" for n, c in self.as_dict().items())

    def format(self, name) -> str:
        return f"{name} = {self}"


def _normalize(v):
    g = reduce(gcd, (x for x in v if x), 0)
    return tuple(x // g for x in v) if g > 1 else tuple(v)


def _farkas(matrix, n_vars, cap):
    """Minimal-support non-negative solutions of ``sum_j x_j * matrix[j] = 0``.

    ``matrix[j]`` is the constraint row contributed by variable ``j``.
    """
    # each row: (constraint residue, coefficient vector)
    rows = []
    for j in range(n_vars):
        unit = [0] * n_vars
        unit[j] = 1
        rows.append((tuple(matrix[j]), tuple(unit)))
    n_cons = len(matrix[0]) if matrix else 0
    for k in range(n_cons):
        pos = [r for r in rows if r[0][k] > 0]
        neg = [r for r in rows if r[0][k] < 0]
        keep = [r for r in rows if r[0][k] == 0]
        new = []
        for a_res, a_co in pos:
            for b_res, b_co in neg:
                fa, fb = -b_res[k], a_res[k]
                g = gcd(fa, fb)
                fa, fb = fa // g, fb // g
                res = tuple(fa * x + fb * y for x, y in zip(a_res, b_res))
                co = tuple(fa * x + fb * y for x, y in zip(a_co, b_co))
                both = res + co
                g2 = reduce(gcd, (x for x in both if x), 0)
                if g2 > 1:
                    res = tuple(x // g2 for x in res)
                    co = tuple(x // g2 for x in co)
                new.append((res, co))
        rows = _prune(keep + new)
        if len(rows) > cap:
            partial = [co for res, co in rows if not any(res)]
            raise SemiflowLimitError(
                f"Farkas elimination exceeded {cap} intermediate vectors", partial
            )
    return [co for res, co in rows if not any(res)]


def _prune(rows):
    """Drop rows whose coefficient support strictly contains, or duplicates, another's."""
    supports = [frozenset(i for i, c in enumerate(co) if c) for _, co in rows]
    order = sorted(range(len(rows)), key=lambda i: len(supports[i]))
    kept: list = []
    seen = set()
    for i in order:
        s = supports[i]
        if any(supports[j] < s for j in kept):
            continue
        key = (rows[i][0], rows[i][1])
        if key in seen:
            continue
        seen.add(key)
        kept.append(i)
    kept.sort()
    return [rows[i] for i in kept]


def _minimal(vectors):
    vecs = sorted({_normalize(v) for v in vectors if any(v)})
    sups = [frozenset(i for i, c in enumerate(v) if c) for v in vecs]
    out = []
    for i, v in enumerate(vecs):
        if any(sups[j] < sups[i] for j in range(len(vecs))):
            continue
        out.append(v)
    # one vector per support (minimal supports carry a unique canonical vector)
    uniq = {}
    for v in out:
        uniq.setdefault(frozenset(i for i, c in enumerate(v) if c), v)
    return sorted(uniq.values(), reverse=True)


def minimal_t_semiflows(net: Net, cap: int = DEFAULT_CAP) -> list:
    """All minimal T-semiflows, gcd-normalized, in descending lexicographic order."""
    C = net.incidence
    cols = [[C[i][j] for i in range(len(net.places))] for j in range(len(net.transitions))]
    vecs = _minimal(_farkas(cols, len(net.transitions), cap))
    return [Semiflow("T", v, net.transitions) for v in vecs]


def minimal_p_semiflows(net: Net, cap: int = DEFAULT_CAP) -> list:
    C = net.incidence
    vecs = _minimal(_farkas([list(r) for r in C], len(net.places), cap))
    return [Semiflow("P", v, net.places) for v in vecs]


def _cover(flows, nodes):
    witness = [0] * len(nodes)
    for f in flows:
        for k, c in enumerate(f.coefficients):
            witness[k] += c
    return all(witness), tuple(witness)


def is_consistent(net: Net, cap: int = DEFAULT_CAP):
    """``(verdict, witness)``; the witness is the sum of all minimal T-semiflows."""
    return _cover(minimal_t_semiflows(net, cap), net.transitions)


def is_conservative(net: Net, cap: int = DEFAULT_CAP):
    return _cover(minimal_p_semiflows(net, cap), net.places)
