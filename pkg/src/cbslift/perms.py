"""Permutations of ``range(w)`` as one-line tuples.

``p[j]`` is the image of ``j``. ``compose(a, b)`` is ``a o b`` (apply ``b`` first).
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

Perm = tuple[int, ...]


def identity(w: int) -> Perm:
    return tuple(range(w))


def compose(a: Sequence[int], b: Sequence[int]) -> Perm:
    return tuple(a[j] for j in b)


def compose_all(perms: Sequence[Sequence[int]], w: int) -> Perm:
    """Compose ``perms`` in application order: the first element acts first."""
    out = identity(w)
    for p in perms:
        out = compose(p, out)
    return out


def inverse(p: Sequence[int]) -> Perm:
    inv = [0] * len(p)
    for j, pj in enumerate(p):
        inv[pj] = j
    return tuple(inv)


def is_perm(p: Sequence[int]) -> bool:
    return sorted(p) == list(range(len(p)))


def cycle(w: int, elems: Sequence[int]) -> Perm:
    """The cycle ``elems[0] -> elems[1] -> ... -> elems[0]`` on ``range(w)``."""
    p = list(range(w))
    for a, b in zip(elems, list(elems[1:]) + [elems[0]]):
        p[a] = b
    return tuple(p)


def is_full_cycle(p: Sequence[int]) -> bool:
    j, n = p[0], 1
    while j != 0:
        j = p[j]
        n += 1
    return n == len(p)


def rank(p: Sequence[int]) -> int:
    """Lehmer rank in ``[0, w!)``; lexicographic order of one-line notation."""
    return _rank(tuple(p))


@lru_cache(maxsize=1 << 16)
def _rank(p: Perm) -> int:
    w = len(p)
    rest = list(range(w))
    r = 0
    for i, pi in enumerate(p):
        idx = rest.index(pi)
        r += idx * math.factorial(w - 1 - i)
        rest.pop(idx)
    return r


@lru_cache(maxsize=1 << 16)
def unrank(r: int, w: int) -> Perm:
    rest = list(range(w))
    out = []
    for i in range(w):
        f = math.factorial(w - 1 - i)
        idx, r = divmod(r, f)
        out.append(rest.pop(idx))
    return tuple(out)


def random_perm(w: int, rng) -> Perm:
    return tuple(int(v) for v in rng.permutation(w))
