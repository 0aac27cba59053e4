"""Monotone functions built from an unsatisfiable CSP and a two-party gadget.

Coordinates of ``z`` are pairs ``(C, labelling of vars(C) by Alice symbols)``,
constraints in base order and labellings in lexicographic order. ``f(z) = 1``
iff some global labelling of all variables hits a 1-coordinate in every
constraint.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core_csp import Csp
from .errors import SizeLimitError
from .gadgets import Gadget

MAX_LABELLINGS = 10 ** 7
MAX_ITERATIONS = 10 ** 6
MAX_TABLE_BITS = 24


@dataclass(frozen=True)
class RmFunction:
    base: Csp
    gadget: Gadget
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.gadget.k != 2:
            raise ValueError("the construction needs a two-party gadget")
        offs, acc = [], 0
        for c in self.base.constraints:
            offs.append(acc)
            acc += self.nx ** c.arity
        object.__setattr__(self, "offsets", tuple(offs))

    @property
    def nx(self) -> int:
        return self.gadget.domain_sizes[0]

    @property
    def ny(self) -> int:
        return self.gadget.domain_sizes[1]

    @property
    def N(self) -> int:
        return sum(self.nx ** c.arity for c in self.base.constraints)

    def coordinate(self, ci: int, labels: Sequence[int]) -> int:
        """Bit position of ``(C_ci, labels)``; ``labels`` indexes Alice's domain per variable of C."""
        pos = 0
        for s in labels:
            pos = pos * self.nx + s
        return self.offsets[ci] + pos

    def describe(self, coord: int) -> tuple[int, tuple[int, ...]]:
        ci = max(i for i, o in enumerate(self.offsets) if o <= coord)
        pos = coord - self.offsets[ci]
        labels = []
        for _ in range(self.base.constraints[ci].arity):
            pos, s = divmod(pos, self.nx)
            labels.append(s)
        return ci, tuple(reversed(labels))


def rm_function(base: Csp, g: Gadget) -> RmFunction:
    return RmFunction(base, g)


def rm_eval(f: RmFunction, z: Sequence[int]) -> int:
    """Depth-first search over global labellings, checking each constraint once its variables are set."""
    if len(z) != f.N:
        raise ValueError(f"expected {f.N} bits")
    n = f.base.n_vars
    if f.nx ** n > MAX_LABELLINGS:
        raise SizeLimitError(f"{f.nx ** n} labellings exceed the search cap")
    due: list[list[int]] = [[] for _ in range(n)]
    for ci, c in enumerate(f.base.constraints):
        if c.arity == 0:
            if not z[f.coordinate(ci, ())]:
                return 0
            continue
        due[max(c.var_ids)].append(ci)
    lab = [0] * n

    def rec(v: int) -> bool:
        if v == n:
            return True
        for s in range(f.nx):
            lab[v] = s
            if all(z[f.coordinate(ci, [lab[u] for u in f.base.constraints[ci].var_ids])] for ci in due[v]):
                if rec(v + 1):
                    return True
        return False

    return int(rec(0))


def alice_map(f: RmFunction, x: Sequence[int]) -> tuple[int, ...]:
    """1 exactly on the coordinates ``(C, x restricted to C)``; ``x`` holds Alice indices."""
    z = [0] * f.N
    for ci, c in enumerate(f.base.constraints):
        z[f.coordinate(ci, [x[v] for v in c.var_ids])] = 1
    return tuple(z)


def bob_map(f: RmFunction, y: Sequence[int]) -> tuple[int, ...]:
    """1 on ``(C, l)`` iff ``C`` holds under ``v -> g(l(v), y(v))``; ``y`` holds Bob indices."""
    g = f.gadget
    z = [0] * f.N
    for ci, c in enumerate(f.base.constraints):
        for labels in itertools.product(range(f.nx), repeat=c.arity):
            alpha = {v: g((g.element(0, s), g.element(1, y[v]))) for v, s in zip(c.var_ids, labels)}
            row = sum(alpha[v] << j for j, v in enumerate(c.var_ids))
            if c.table[row]:
                z[f.coordinate(ci, labels)] = 1
    return tuple(z)


def kw_coordinate(a: Sequence[int], b: Sequence[int]) -> int:
    """First coordinate with ``a = 1`` and ``b = 0``."""
    for j, (u, w) in enumerate(zip(a, b)):
        if u and not w:
            return j
    raise ValueError("no coordinate separates the inputs; a is not above b")


def kw_translate(f: RmFunction, x: Sequence[int], y: Sequence[int]) -> int:
    """Solve the KW game on (alice_map(x), bob_map(y)) and return the constraint it names."""
    ci, _ = f.describe(kw_coordinate(alice_map(f, x), bob_map(f, y)))
    return ci


def composed_assignment(f: RmFunction, x: Sequence[int], y: Sequence[int]) -> tuple[int, ...]:
    g = f.gadget
    return tuple(g((g.element(0, xv), g.element(1, yv))) for xv, yv in zip(x, y))


def rm_table(f: RmFunction, chunk: int = 1 << 20) -> np.ndarray:
    """Truth table of ``f`` over all ``2**N`` inputs; bit ``j`` of the index is ``z[j]``."""
    if f.N > MAX_TABLE_BITS:
        raise SizeLimitError(f"N={f.N} is too large to tabulate")
    n = f.base.n_vars
    if f.nx ** n > MAX_LABELLINGS:
        raise SizeLimitError(f"{f.nx ** n} labellings exceed the search cap")
    labellings = [[f.coordinate(ci, [lab[v] for v in c.var_ids]) for ci, c in enumerate(f.base.constraints)]
                  for lab in itertools.product(range(f.nx), repeat=n)]
    total = 1 << f.N
    out = np.zeros(total, dtype=bool)
    for start in range(0, total, chunk):
        z = np.arange(start, min(total, start + chunk), dtype=np.int64)
        bits = [((z >> j) & 1).astype(bool) for j in range(f.N)]
        acc = np.zeros(z.shape, dtype=bool)
        for coords in labellings:
            hit = np.ones(z.shape, dtype=bool)
            for c in coords:
                hit &= bits[c]
            acc |= hit
        out[start:start + z.size] = acc
    return out


def is_monotone_exhaustive(f: RmFunction) -> tuple[bool, tuple | None]:
    """Check every single-bit increase over all ``2**N`` inputs.

    Returns ``(True, None)`` or ``(False, (mask, bit))`` for the first violation.
    """
    vals = rm_table(f)
    for j in range(f.N):
        # axis 1 of the view separates bit j = 0 from bit j = 1
        v = vals.reshape(-1, 2, 1 << j)
        bad = np.flatnonzero((v[:, 0, :] & ~v[:, 1, :]).ravel())
        if bad.size:
            hi, lo = divmod(int(bad[0]), 1 << j)
            return False, ((hi << (j + 1)) | lo, j)
    return True, None


# --------------------------------------------------------------------------- average case


def mu_sampler(f: RmFunction, rng: np.random.Generator) -> tuple[int, ...]:
    """Half the time an Alice image of a uniform labelling, else a Bob image."""
    n = f.base.n_vars
    if rng.random() < 0.5:
        return alice_map(f, [int(v) for v in rng.integers(f.nx, size=n)])
    return bob_map(f, [int(v) for v in rng.integers(f.ny, size=n)])


def rerandomize(g: Gadget, x: Sequence[int], y: Sequence[int], rng) -> tuple[list[int], list[int]]:
    """Apply an independent rsr outcome to every coordinate (values are indices)."""
    xs, ys = [], []
    for xv, yv in zip(x, y):
        o = g.rsr.sample(rng)
        xs.append(g.index(0, g.rsr.apply(o, 0, g.element(0, xv))))
        ys.append(g.index(1, g.rsr.apply(o, 1, g.element(1, yv))))
    return xs, ys


@dataclass
class AverageCaseResult:
    constraint: int
    iterations: int
    cost: int


def average_case_protocol(f: RmFunction, approx: Callable[[tuple], int],
                          kw_oracle: Callable[[tuple, tuple], tuple[int, int]],
                          x: Sequence[int], y: Sequence[int], rng,
                          max_iterations: int = MAX_ITERATIONS) -> AverageCaseResult:
    """Find a violated constraint of the base under ``g(x, y)``.

    Stage 1 re-randomises the input and keeps it only when the approximator
    classifies both images correctly (one bit from each party). Stage 2 asks
    ``kw_oracle`` for a separating coordinate; it returns ``(coordinate, bits)``.
    """
    for it in range(1, max_iterations + 1):
        xs, ys = rerandomize(f.gadget, x, y, rng)
        a, b = alice_map(f, xs), bob_map(f, ys)
        if approx(a) == 1 and approx(b) == 0:
            coord, bits = kw_oracle(a, b)
            ci, _ = f.describe(coord)
            return AverageCaseResult(ci, it, 2 * it + bits)
    raise RuntimeError(f"stage 1 did not succeed within {max_iterations} iterations")


def exact_kw_oracle(f: RmFunction):
    bits = max(1, math.ceil(math.log2(f.N)))

    def oracle(a, b):
        return kw_coordinate(a, b), bits
    return oracle


def planted_approximation(f: RmFunction, rho: float, rng) -> tuple[Callable[[tuple], int], float]:
    """``f`` with the Alice images of a ``2*rho`` fraction of labellings sent to 0.

    Those images are minimal 1-inputs, so the result stays monotone. Returns the
    approximator and the exact Alice-side mass that was removed.
    """
    n = f.base.n_vars
    total = f.nx ** n
    if total > MAX_LABELLINGS:
        raise SizeLimitError("too many labellings to plant noise")
    count = int(round(2 * rho * total))
    order = rng.permutation(total)[:count]
    removed = set()
    for idx in order.tolist():
        lab = []
        for _ in range(n):
            idx, s = divmod(idx, f.nx)
            lab.append(s)
        removed.add(alice_map(f, lab))

    def approx(z):
        z = tuple(z)
        if z in removed:
            return 0
        return rm_eval(f, z)
    return approx, count / total
