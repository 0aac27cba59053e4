"""Composed search problems and the reduction from unique set-disjointness.

An instance of ``S o g^n`` is a tuple of ``n`` coordinates, each a k-tuple of
party values for the gadget ``g``. Party ``i`` sees component ``i`` of every
coordinate and nothing else.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Hashable, Sequence

import numpy as np

from .core_csp import SearchProblem, mask_to_bits
from .errors import PromiseViolation, SizeLimitError
from .gadgets import MAX_ENUM, Gadget
from .sensitivity import Selector

Instance = tuple[tuple, ...]


@dataclass(frozen=True)
class ComposedProblem:
    base: SearchProblem
    gadget: Gadget

    @property
    def n(self) -> int:
        return self.base.n_vars

    def decode(self, inst: Instance) -> tuple[int, ...]:
        if len(inst) != self.n:
            raise ValueError(f"expected {self.n} coordinates")
        out = []
        for j, x in enumerate(inst):
            v = self.gadget(x)
            if v is None:
                raise PromiseViolation(f"coordinate {j} decodes outside the gadget's promise")
            out.append(v)
        return tuple(out)

    def feasible(self, inst: Instance, q: Hashable) -> bool:
        return self.base.feasible(self.decode(inst), q)

    def feasible_set(self, inst: Instance) -> frozenset:
        return self.base.feasible_set(self.decode(inst))

    def is_critical(self, inst: Instance) -> bool:
        return len(self.feasible_set(inst)) == 1

    def party_view(self, inst: Instance, i: int) -> tuple:
        return tuple(x[i] for x in inst)


def compose(S: SearchProblem, g: Gadget) -> ComposedProblem:
    return ComposedProblem(S, g)


# --------------------------------------------------------------------------- mu_alpha


@lru_cache(maxsize=32)
def _classes(g: Gadget) -> dict[int, list[tuple]]:
    return {0: g.preimage(0), 1: g.preimage(1)}


def sample_preimage(g: Gadget, z: int, rng: np.random.Generator) -> tuple:
    if g.size <= MAX_ENUM:
        cls = _classes(g)[z]
        if not cls:
            raise ValueError(f"gadget {g.name} has no {z}-inputs")
        return cls[int(rng.integers(len(cls)))]
    for _ in range(10 ** 6):
        x = g.random_input(rng)
        if g(x) == z:
            return x
    raise ValueError(f"rejection sampling found no {z}-input")


def mu_alpha_sampler(g: Gadget, alpha: Sequence[int], rng: np.random.Generator) -> Instance:
    """Uniform over all instances decoding to ``alpha`` (independent coordinates)."""
    return tuple(sample_preimage(g, int(a), rng) for a in alpha)


def mu_alpha_distribution(g: Gadget, alpha: Sequence[int]) -> dict[Instance, Fraction]:
    cls = _classes(g)
    total = 1
    for a in alpha:
        total *= len(cls[a])
    if total > MAX_ENUM:
        raise SizeLimitError(f"mu_alpha has {total} atoms")
    p = Fraction(1, total)
    return {inst: p for inst in itertools.product(*(cls[a] for a in alpha))}


# --------------------------------------------------------------------------- UDISJ


@dataclass(frozen=True)
class UdisjInstance:
    """Row ``i`` is party ``i``'s input; the promise allows at most one all-ones column."""

    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(tuple(int(b) for b in r) for r in self.rows))
        if len({len(r) for r in self.rows}) != 1:
            raise ValueError("all rows must have the same length")

    @classmethod
    def two_party(cls, a: Sequence[int], b: Sequence[int]) -> "UdisjInstance":
        return cls((tuple(a), tuple(b)))

    @property
    def size(self) -> int:
        return len(self.rows[0])

    def intersections(self) -> list[int]:
        return [j for j in range(self.size) if all(r[j] for r in self.rows)]

    def satisfies_promise(self) -> bool:
        return len(self.intersections()) <= 1

    def value(self) -> int:
        if not self.satisfies_promise():
            raise PromiseViolation("more than one common element")
        return int(bool(self.intersections()))


def all_promise_instances(k: int, size: int) -> list[UdisjInstance]:
    out = []
    for bits in itertools.product((0, 1), repeat=k * size):
        inst = UdisjInstance(tuple(bits[i * size:(i + 1) * size] for i in range(k)))
        if inst.satisfies_promise():
            out.append(inst)
    return out


def _check_blocks(blocks: Sequence[Sequence[int]], n: int) -> None:
    seen: set = set()
    for b in blocks:
        if seen & set(b):
            raise ValueError("blocks must be pairwise disjoint")
        if any(not 0 <= v < n for v in b):
            raise ValueError("block refers to an unknown coordinate")
        seen |= set(b)


def _reduce_party(g: Gadget, i: int, row: Sequence[int], alpha: Sequence[int],
                  owner: Sequence[int | None], outcomes: Sequence) -> tuple:
    """Party ``i``'s share of the reduced instance, computed from its own row only."""
    out = []
    for j, a in enumerate(alpha):
        blk = owner[j]
        if blk is None:
            # fixed preimage of alpha_j
            v = g.and_embed[i][a]
        else:
            v = g.and_embed[i][row[blk]]
            if a:
                v = g.flip[i](v)
        out.append(g.rsr.apply(outcomes[j], i, v))
    return tuple(out)


def udisj_reduce(inst: UdisjInstance, alpha: Sequence[int], blocks: Sequence[Sequence[int]],
                 g: Gadget, rng: np.random.Generator | None = None,
                 outcomes: Sequence | None = None, enforce_promise: bool = True) -> Instance:
    """Map a UDISJ instance of size ``len(blocks)`` to an instance of ``S o g^n``.

    Without an intersection the output is distributed as ``mu_alpha``; with a
    common element ``i`` it is distributed as ``mu`` of ``alpha`` flipped on
    block ``i``. ``outcomes`` fixes the shared randomness (one rsr outcome per
    coordinate); otherwise it is drawn from ``rng``. Outside the promise the
    parties still run the same local maps when ``enforce_promise`` is off.
    """
    if inst.size != len(blocks):
        raise ValueError("UDISJ size must equal the number of blocks")
    if len(inst.rows) != g.k:
        raise ValueError(f"gadget has {g.k} parties, instance has {len(inst.rows)}")
    if enforce_promise and not inst.satisfies_promise():
        raise PromiseViolation("UDISJ instance has more than one common element")
    n = len(alpha)
    _check_blocks(blocks, n)
    owner: list[int | None] = [None] * n
    for bi, b in enumerate(blocks):
        for v in b:
            owner[v] = bi
    if outcomes is None:
        if rng is None:
            raise ValueError("need either rng or explicit outcomes")
        outcomes = [g.rsr.sample(rng) for _ in range(n)]
    shares = [_reduce_party(g, i, inst.rows[i], alpha, owner, outcomes) for i in range(g.k)]
    return tuple(tuple(shares[i][j] for i in range(g.k)) for j in range(n))


def expected_target(inst: UdisjInstance, alpha: Sequence[int], blocks: Sequence[Sequence[int]]) -> tuple[int, ...]:
    hit = inst.intersections()
    out = list(alpha)
    if hit:
        for v in blocks[hit[0]]:
            out[v] ^= 1
    return tuple(out)


def reduction_distribution(inst: UdisjInstance, alpha: Sequence[int],
                           blocks: Sequence[Sequence[int]], g: Gadget) -> dict[Instance, Fraction]:
    """Exact output distribution, enumerating every rsr outcome per coordinate."""
    n = len(alpha)
    total = g.rsr.n_outcomes ** n
    if total > MAX_ENUM:
        raise SizeLimitError(f"{total} randomness outcomes")
    outs = list(g.rsr.outcomes())
    counts: Counter = Counter()
    for combo in itertools.product(outs, repeat=n):
        counts[udisj_reduce(inst, alpha, blocks, g, outcomes=combo)] += 1
    return {k: Fraction(v, total) for k, v in counts.items()}


def check_reduction_exact(inst: UdisjInstance, alpha: Sequence[int],
                          blocks: Sequence[Sequence[int]], g: Gadget) -> tuple[bool, str]:
    """Compare the reduction's exact output law with ``mu`` of the expected target."""
    target = expected_target(inst, alpha, blocks)
    got = reduction_distribution(inst, alpha, blocks, g)
    want = mu_alpha_distribution(g, target)
    if got != want:
        extra = set(got) ^ set(want)
        return False, f"support differs on {len(extra)} instances" if extra else "probabilities differ"
    return True, f"{len(want)} atoms, each with probability {next(iter(want.values()))}"


# --------------------------------------------------------------------------- protocols


Protocol = Callable[[Instance, np.random.Generator], Hashable]


def wrapped_protocol(protocol: Protocol, expected: Hashable, alpha: Sequence[int],
                     blocks: Sequence[Sequence[int]], g: Gadget, epsilon: float = 0.25):
    """UDISJ decider: run the reduction and ``protocol`` twice, answer 0 iff both runs return ``expected``."""
    if not 0 <= epsilon <= 0.25:
        raise ValueError("protocol error must be at most 1/4")

    def decide(inst: UdisjInstance, rng: np.random.Generator) -> int:
        for _ in range(2):
            x = udisj_reduce(inst, alpha, blocks, g, rng, enforce_promise=False)
            if protocol(x, rng) != expected:
                return 1
        return 0

    return decide


def exact_solver(problem: ComposedProblem, selector: Selector) -> Protocol:
    def run(inst, rng=None):
        return selector(problem.decode(inst))
    return run


def corrupted(protocol: Protocol, rate: float, solutions: Sequence[Hashable]) -> Protocol:
    """With probability ``rate`` replace the answer by a different uniformly chosen solution."""
    def run(inst, rng):
        out = protocol(inst, rng)
        if rng.random() < rate:
            others = [q for q in solutions if q != out]
            out = others[int(rng.integers(len(others)))]
        return out
    return run


def argmax_selector(problem: ComposedProblem,
                    output_law: Callable[[Instance], dict]) -> Selector:
    """For each alpha, the feasible solution the protocol outputs most often under ``mu_alpha``.

    ``output_law(inst)`` gives the protocol's output distribution on ``inst``.
    Ties go to the lowest solution id.
    """
    n = problem.n
    choice = []
    for a in range(1 << n):
        alpha = mask_to_bits(a, n)
        feasible = problem.base.feasible_set(alpha)
        score: dict = {q: Fraction(0) for q in feasible}
        for inst, p in mu_alpha_distribution(problem.gadget, alpha).items():
            for q, pq in output_law(inst).items():
                if q in score:
                    score[q] += p * Fraction(pq)
        choice.append(min(score, key=lambda q: (-score[q], q)))
    return Selector(n, tuple(choice))
