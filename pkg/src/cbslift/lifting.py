"""Lifting a CNF through a k-party gadget.

Base variable ``v`` becomes a k-by-l matrix of bits: party ``i`` holds the
l-bit code (least significant bit first) of its gadget value. The lifted
variable for ``(v, i, j)`` has id ``v*k*l + i*l + j``.

Each base clause ``C`` becomes a group of clauses, one for every way of
encoding an assignment that falsifies ``C``; a lifted clause rules out its
encoding exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from .core_csp import Constraint, Csp
from .errors import PromiseViolation, SizeLimitError
from .gadgets import MAX_ENUM, Gadget

MAX_GROUP = 10 ** 6


@dataclass(frozen=True)
class LiftedCnf:
    base: Csp
    gadget: Gadget
    csp: Csp
    # per lifted clause: (base clause, encoding) or None for a dead-code clause
    clause_origin: tuple
    k: int
    l: int
    dead_codes: bool
    lookup: dict = field(repr=False, compare=False, default_factory=dict)

    @property
    def n(self) -> int:
        return self.base.n_vars

    def var(self, v: int, i: int, j: int) -> int:
        return v * self.k * self.l + i * self.l + j

    def params(self) -> dict:
        d = self.base.degree
        kl = self.k * self.l
        return {"n": self.n, "m": self.base.m, "d": d, "k": self.k, "l": self.l,
                "N": self.csp.n_vars, "D": self.csp.degree, "M": self.csp.m,
                "N_formula": self.n * kl, "D_formula": d * kl, "M_bound": self.base.m * 2 ** (d * kl),
                "dead_code_clauses": sum(o is None for o in self.clause_origin)}

    def params_hold(self) -> bool:
        p = self.params()
        return p["N"] == p["N_formula"] and p["D"] == p["D_formula"] and p["M"] <= p["M_bound"]

    def code(self, beta: Sequence[int], v: int, i: int) -> int:
        return sum(beta[self.var(v, i, j)] << j for j in range(self.l))

    def decode_inputs(self, beta: Sequence[int]) -> tuple | None:
        """Gadget input per base variable, or None if some code is unused."""
        out = []
        for v in range(self.n):
            x = []
            for i in range(self.k):
                c = self.code(beta, v, i)
                if c >= self.gadget.domain_sizes[i]:
                    return None
                x.append(self.gadget.element(i, c))
            out.append(tuple(x))
        return tuple(out)

    def decode(self, beta: Sequence[int]) -> tuple[int, ...] | None:
        xs = self.decode_inputs(beta)
        if xs is None:
            return None
        return tuple(self.gadget(x) for x in xs)

    def encode(self, xs: Sequence[Sequence]) -> tuple[int, ...]:
        beta = [0] * self.csp.n_vars
        for v, x in enumerate(xs):
            for i, xi in enumerate(x):
                c = self.gadget.index(i, xi)
                for j in range(self.l):
                    beta[self.var(v, i, j)] = (c >> j) & 1
        return tuple(beta)

    def partition(self) -> list[list[int]]:
        """Variables owned by each party."""
        return [[self.var(v, i, j) for v in range(self.n) for j in range(self.l)] for i in range(self.k)]

    def to_json(self) -> dict:
        out = {"gadget": self.gadget.name, "params": self.params(),
               "params_hold": self.params_hold(), "partition": self.partition(),
               "dead_code_extension": self.dead_codes}
        return out


def _code_clause(lc_var, v: int, i: int, code: int, l: int) -> list[int]:
    """Literals over party ``i``'s bits of ``v`` that are all false exactly at ``code``."""
    return [-(lc_var(v, i, j) + 1) if (code >> j) & 1 else lc_var(v, i, j) + 1 for j in range(l)]


def lift(base: Csp, g: Gadget) -> LiftedCnf:
    if not base.is_clausal():
        raise ValueError("lift expects a clausal base; convert with csp_to_cnf first")
    if g.size > MAX_ENUM:
        raise SizeLimitError(f"gadget {g.name} has too many inputs to tabulate")
    k = g.k
    l = max(g.bits_per_party)
    classes: dict[int, list[tuple[int, ...]]] = {0: [], 1: []}
    for x in g.inputs():
        val = g(x)
        if val is None:
            raise PromiseViolation(f"gadget {g.name} is undefined on a reachable input {x}")
        classes[val].append(g.input_key(x))
    for z in classes:
        classes[z].sort()
    dead = any(s < 2 ** l for s in g.domain_sizes)

    def var(v, i, j):
        return v * k * l + i * l + j

    clauses: list[Constraint] = []
    origin: list = []
    lookup: dict = {}
    for ci, c in enumerate(base.constraints):
        lits = c.literals()
        # base variable v falsifies its literal when g takes the opposite value
        choices = [classes[0] if lit > 0 else classes[1] for lit in lits]
        size = 1
        for ch in choices:
            size *= len(ch)
        if size > MAX_GROUP:
            raise SizeLimitError(f"clause {ci} lifts to {size} clauses")
        for enc in itertools.product(*choices):
            out = []
            for lit, key in zip(lits, enc):
                v = abs(lit) - 1
                for i in range(k):
                    out.extend(_code_clause(var, v, i, key[i], l))
            lookup[(ci, enc)] = len(clauses)
            clauses.append(Constraint.clause(out))
            origin.append((ci, enc))
    if dead:
        for v in range(base.n_vars):
            for i in range(k):
                for code in range(g.domain_sizes[i], 2 ** l):
                    clauses.append(Constraint.clause(_code_clause(var, v, i, code, l)))
                    origin.append(None)
    csp = Csp(base.n_vars * k * l, tuple(clauses))
    return LiftedCnf(base, g, csp, tuple(origin), k, l, dead, lookup)


def translate_solution(lc: LiftedCnf, lifted_clause: int) -> int | None:
    """Base clause a lifted clause came from (None for dead-code clauses)."""
    o = lc.clause_origin[lifted_clause]
    return None if o is None else o[0]


def lifted_clause_for(lc: LiftedCnf, base_clause: int, beta: Sequence[int]) -> int:
    """The lifted clause of ``base_clause``'s group that ``beta`` violates.

    Only the bits of the clause's own variables are read.
    """
    lits = lc.base.constraints[base_clause].literals()
    enc = tuple(tuple(lc.code(beta, abs(lit) - 1, i) for i in range(lc.k)) for lit in lits)
    idx = lc.lookup.get((base_clause, enc))
    if idx is None:
        raise ValueError(f"base clause {base_clause} is not violated by the decoded assignment")
    return idx
