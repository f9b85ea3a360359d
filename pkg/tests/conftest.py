import random
import re
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import settings

settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

from ssplive.petri import Net
from ssplive.pnio import fixture_names, load_fixture

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(re.match(r"\d+", k).group()), k)):
        ok, text = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {text}")


@pytest.fixture(scope="session")
def fixtures():
    return {n: load_fixture(n) for n in fixture_names()}


@pytest.fixture
def load():
    return load_fixture


def random_net(rng, n_places, n_trans, max_w=2, density=0.35):
    pre = [[0] * n_trans for _ in range(n_places)]
    post = [[0] * n_trans for _ in range(n_places)]
    for i in range(n_places):
        for j in range(n_trans):
            if rng.random() < density:
                pre[i][j] = rng.randint(1, max_w)
            if rng.random() < density:
                post[i][j] = rng.randint(1, max_w)
    return Net([f"p{i}" for i in range(n_places)], [f"t{j}" for j in range(n_trans)], pre, post)


def random_nets(seed, count, max_places=5, max_trans=6):
    rng = random.Random(seed)
    return [random_net(rng, rng.randint(1, max_places), rng.randint(1, max_trans)) for _ in range(count)]


def state_machine(n, name="sm"):
    """Elementary circuit p0 -> t0 -> p1 -> ... -> p0."""
    pre = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    post = [[1 if i == (j + 1) % n else 0 for j in range(n)] for i in range(n)]
    return Net([f"p{i}" for i in range(n)], [f"t{i}" for i in range(n)], pre, post, name=name)


# -- independent semiflow oracles -------------------------------------------------


def _rank_and_kernel(cols):
    """Rank of the matrix whose columns are ``cols`` and, if its kernel is
    one-dimensional, a generator of it (Fractions)."""
    n = len(cols)
    m = len(cols[0]) if cols else 0
    rows = [[Fraction(cols[j][i]) for j in range(n)] for i in range(m)]
    pivots = []
    r = 0
    for c in range(n):
        piv = next((i for i in range(r, m) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pv = rows[r][c]
        rows[r] = [x / pv for x in rows[r]]
        for i in range(m):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    rank = len(pivots)
    if n - rank != 1:
        return rank, None
    free = next(c for c in range(n) if c not in pivots)
    v = [Fraction(0)] * n
    v[free] = Fraction(1)
    for k, c in enumerate(pivots):
        v[c] = -rows[k][free]
    return rank, v


def support_oracle(vectors_of_columns):
    """Minimal semiflows via the support characterization.

    A support S carries a minimal semiflow iff the columns indexed by S have
    a one-dimensional kernel spanned by a strictly positive vector and no
    proper subset does. Returned as gcd-normalized integer tuples.
    """
    from math import gcd, lcm
    from functools import reduce

    n = len(vectors_of_columns)
    found = {}
    for mask in range(1, 1 << n):
        S = [j for j in range(n) if mask >> j & 1]
        if any((m & mask) == m for m in found):
            continue
        _, v = _rank_and_kernel([vectors_of_columns[j] for j in S])
        if v is None:
            continue
        if all(x < 0 for x in v):
            v = [-x for x in v]
        if not all(x > 0 for x in v):
            continue
        den = reduce(lcm, (x.denominator for x in v), 1)
        ints = [int(x * den) for x in v]
        g = reduce(gcd, ints)
        vec = [0] * n
        for j, x in zip(S, ints):
            vec[j] = x // g
        found[mask] = tuple(vec)
    return set(found.values())


def bounded_oracle(vectors_of_columns, bound=3):
    """Minimal-support non-negative kernel vectors with entries <= bound, by enumeration."""
    from math import gcd
    from functools import reduce

    n = len(vectors_of_columns)
    m = len(vectors_of_columns[0]) if n else 0
    sols = []
    for x in product(range(bound + 1), repeat=n):
        if not any(x):
            continue
        if all(sum(vectors_of_columns[j][i] * x[j] for j in range(n)) == 0 for i in range(m)):
            g = reduce(gcd, x)
            sols.append(tuple(c // g for c in x))
    sups = {s: frozenset(j for j, c in enumerate(s) if c) for s in set(sols)}
    return {s for s in sups if not any(o < sups[s] for o in sups.values())}
