"""Boolean constraint systems, canonical search problems and DIMACS/JSON I/O.

Assignments are tuples of 0/1 indexed by variable id. Exhaustive routines index
the full cube by bitmask, with bit ``j`` holding variable ``j``.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np

from .errors import DimacsError, SizeLimitError

MAX_DEGREE = 16
MAX_UNSAT_VARS = 24

Assignment = tuple[int, ...]


def mask_to_bits(mask: int, n: int) -> Assignment:
    return tuple((mask >> j) & 1 for j in range(n))


def bits_to_mask(bits: Sequence[int]) -> int:
    m = 0
    for j, b in enumerate(bits):
        if b:
            m |= 1 << j
    return m


@dataclass(frozen=True)
class Constraint:
    """A constraint given by its truth table over ``var_ids``.

    Row ``r`` of ``table`` is the value when variable ``var_ids[j]`` equals bit
    ``j`` of ``r``.
    """

    var_ids: tuple[int, ...]
    table: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "var_ids", tuple(int(v) for v in self.var_ids))
        object.__setattr__(self, "table", tuple(int(t) for t in self.table))
        if len(set(self.var_ids)) != len(self.var_ids):
            raise ValueError(f"repeated variable in constraint {self.var_ids}")
        if len(self.var_ids) > MAX_DEGREE:
            raise ValueError(f"constraint degree {len(self.var_ids)} exceeds {MAX_DEGREE}")
        if len(self.table) != 1 << len(self.var_ids):
            raise ValueError("table length must be 2**len(var_ids)")
        if any(t not in (0, 1) for t in self.table):
            raise ValueError("table entries must be 0 or 1")

    @classmethod
    def clause(cls, literals: Iterable[int]) -> "Constraint":
        """Clause from signed 1-based DIMACS literals."""
        lits = list(literals)
        var_ids = tuple(abs(l) - 1 for l in lits)
        # the single falsifying row sets positive literals to 0, negative ones to 1
        bad = sum(1 << j for j, l in enumerate(lits) if l < 0)
        table = [1] * (1 << len(lits))
        table[bad] = 0
        return cls(var_ids, tuple(table))

    @property
    def arity(self) -> int:
        return len(self.var_ids)

    def row(self, alpha: Sequence[int]) -> int:
        r = 0
        for j, v in enumerate(self.var_ids):
            if alpha[v]:
                r |= 1 << j
        return r

    def __call__(self, alpha: Sequence[int]) -> int:
        return self.table[self.row(alpha)]

    def falsifying_rows(self) -> list[int]:
        return [r for r, t in enumerate(self.table) if t == 0]

    def literals(self) -> tuple[int, ...] | None:
        """Signed 1-based literals if this constraint is a clause, else None."""
        bad = self.falsifying_rows()
        if len(bad) != 1:
            return None
        r = bad[0]
        return tuple(-(v + 1) if (r >> j) & 1 else v + 1 for j, v in enumerate(self.var_ids))

    def is_minimal(self) -> bool:
        """Every listed variable is influential."""
        for j in range(self.arity):
            bit = 1 << j
            if all(self.table[r] == self.table[r ^ bit] for r in range(len(self.table))):
                return False
        return True

    def violated_mask(self, masks: np.ndarray) -> np.ndarray:
        rows = np.zeros(masks.shape, dtype=np.int64)
        for j, v in enumerate(self.var_ids):
            rows |= ((masks >> v) & 1) << j
        return np.asarray(self.table, dtype=bool)[rows] == False  # noqa: E712


@dataclass(frozen=True)
class Csp:
    n_vars: int
    constraints: tuple[Constraint, ...]
    declared_degree: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for c in self.constraints:
            if any(v < 0 or v >= self.n_vars for v in c.var_ids):
                raise ValueError(f"variable out of range in {c.var_ids}")
        if self.declared_degree is not None and self.degree > self.declared_degree:
            raise ValueError(f"degree {self.degree} exceeds declared {self.declared_degree}")

    @classmethod
    def from_clauses(cls, n_vars: int, clauses: Iterable[Iterable[int]]) -> "Csp":
        return cls(n_vars, tuple(Constraint.clause(c) for c in clauses))

    @property
    def degree(self) -> int:
        return max((c.arity for c in self.constraints), default=0)

    @property
    def m(self) -> int:
        return len(self.constraints)

    def is_clausal(self) -> bool:
        return all(c.literals() is not None for c in self.constraints)

    def clauses(self) -> list[tuple[int, ...]]:
        out = []
        for c in self.constraints:
            lits = c.literals()
            if lits is None:
                raise ValueError("CSP is not in clausal form")
            out.append(lits)
        return out

    def violated(self, alpha: Sequence[int]) -> list[int]:
        return [i for i, c in enumerate(self.constraints) if not c(alpha)]

    def first_violated(self, alpha: Sequence[int]) -> int | None:
        for i, c in enumerate(self.constraints):
            if not c(alpha):
                return i
        return None

    def satisfies(self, alpha: Sequence[int]) -> bool:
        return self.first_violated(alpha) is None

    def violation_matrix(self, masks: np.ndarray) -> np.ndarray:
        """Boolean array ``(len(masks), m)``; entry true iff constraint violated."""
        masks = np.asarray(masks, dtype=np.int64)
        out = np.zeros((masks.shape[0], self.m), dtype=bool)
        for i, c in enumerate(self.constraints):
            out[:, i] = c.violated_mask(masks)
        return out


@dataclass(frozen=True)
class SearchProblem:
    """Relation between ``{0,1}^n`` and solution ids.

    ``feasible_sets_fn`` is an optional fast path returning the feasible set of
    every mask in ``range(2**n)``.
    """

    n_vars: int
    solutions: tuple[Hashable, ...]
    feasible: Callable[[Sequence[int], Hashable], bool]
    feasible_sets_fn: Callable[[], list[frozenset]] | None = field(default=None, compare=False)

    def feasible_set(self, alpha: Sequence[int]) -> frozenset:
        return frozenset(q for q in self.solutions if self.feasible(alpha, q))

    def is_critical(self, alpha: Sequence[int]) -> bool:
        return len(self.feasible_set(alpha)) == 1

    @cached_property
    def all_feasible_sets(self) -> list[frozenset]:
        if self.n_vars > MAX_UNSAT_VARS:
            raise SizeLimitError(f"{self.n_vars} variables is too many to tabulate")
        if self.feasible_sets_fn is not None:
            return self.feasible_sets_fn()
        return [self.feasible_set(mask_to_bits(a, self.n_vars)) for a in range(1 << self.n_vars)]


def canonical_search(csp: Csp) -> SearchProblem:
    """S(F): given an assignment, find a violated constraint (by index)."""

    def feasible(alpha, i):
        return not csp.constraints[i](alpha)

    def tabulate():
        masks = np.arange(1 << csp.n_vars, dtype=np.int64)
        mat = csp.violation_matrix(masks)
        return [frozenset(np.flatnonzero(row).tolist()) for row in mat]

    return SearchProblem(csp.n_vars, tuple(range(csp.m)), feasible, tabulate)


def csp_to_cnf_with_origin(csp: Csp) -> tuple[Csp, tuple[int, ...]]:
    """Clausal form plus, for each clause, the index of the constraint it came from."""
    clauses, origin = [], []
    for i, c in enumerate(csp.constraints):
        for r in c.falsifying_rows():
            lits = [-(v + 1) if (r >> j) & 1 else v + 1 for j, v in enumerate(c.var_ids)]
            clauses.append(Constraint.clause(lits))
            origin.append(i)
    return Csp(csp.n_vars, tuple(clauses)), tuple(origin)


def csp_to_cnf(csp: Csp) -> Csp:
    return csp_to_cnf_with_origin(csp)[0]


def is_unsatisfiable(csp: Csp, chunk: int = 1 << 20) -> bool:
    """Exhaustive check over all ``2**n_vars`` assignments."""
    if csp.n_vars > MAX_UNSAT_VARS:
        raise SizeLimitError(f"is_unsatisfiable is capped at {MAX_UNSAT_VARS} variables")
    total = 1 << csp.n_vars
    for start in range(0, total, chunk):
        masks = np.arange(start, min(total, start + chunk), dtype=np.int64)
        violated_any = np.zeros(masks.shape, dtype=bool)
        for c in csp.constraints:
            violated_any |= c.violated_mask(masks)
            if violated_any.all():
                break
        if not violated_any.all():
            return False
    return True


def dimacs_bytes(csp: Csp, comments: Sequence[str] = ()) -> bytes:
    buf = io.BytesIO()
    write_dimacs(csp, buf, comments)
    return buf.getvalue()


def write_dimacs(csp: Csp, sink, comments: Sequence[str] = ()) -> None:
    clauses = csp.clauses()
    lines = [f"c {c}" for c in comments]
    lines.append(f"p cnf {csp.n_vars} {len(clauses)}")
    lines.extend(" ".join(str(l) for l in (*cl, 0)) for cl in clauses)
    sink.write(("\n".join(lines) + "\n").encode("ascii"))


def read_dimacs(source) -> Csp:
    """Parse DIMACS CNF from a text/binary stream, bytes or str."""
    if isinstance(source, (bytes, bytearray)):
        text = bytes(source).decode("ascii")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("ascii") if isinstance(data, (bytes, bytearray)) else data

    header = None
    clauses: list[list[int]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if header is not None or len(parts) != 4 or parts[1] != "cnf":
                raise DimacsError(f"line {lineno}: malformed header {line!r}")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise DimacsError(f"line {lineno}: malformed header {line!r}") from None
            if header[0] < 0 or header[1] < 0:
                raise DimacsError(f"line {lineno}: negative counts in header")
            continue
        if header is None:
            raise DimacsError(f"line {lineno}: clause before header")
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"line {lineno}: bad literal {tok!r}") from None
            if lit == 0:
                clauses.append(current)
                current = []
            elif abs(lit) > header[0]:
                raise DimacsError(f"line {lineno}: literal {lit} out of range")
            else:
                current.append(lit)
    if header is None:
        raise DimacsError("missing 'p cnf' header")
    if current:
        raise DimacsError("last clause is not terminated by 0")
    if len(clauses) != header[1]:
        raise DimacsError(f"header declares {header[1]} clauses, found {len(clauses)}")
    cons = []
    for cl in clauses:
        lits = list(dict.fromkeys(cl))
        if any(-l in lits for l in lits):
            raise DimacsError(f"tautological clause {cl}")
        cons.append(Constraint.clause(lits))
    return Csp(header[0], tuple(cons))


def csp_to_json(csp: Csp) -> dict:
    return {
        "n_vars": csp.n_vars,
        "constraints": [
            {"vars": list(c.var_ids), "table": "".join(str(t) for t in c.table)}
            for c in csp.constraints
        ],
    }


def csp_from_json(obj: dict | str) -> Csp:
    if isinstance(obj, str):
        obj = json.loads(obj)
    cons = tuple(Constraint(tuple(c["vars"]), tuple(int(ch) for ch in c["table"]))
                 for c in obj["constraints"])
    return Csp(int(obj["n_vars"]), cons)
