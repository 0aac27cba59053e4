"""Block sensitivity, critical block sensitivity and exact decision-tree depth."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Hashable, Sequence

import numpy as np

from .core_csp import SearchProblem, bits_to_mask, mask_to_bits
from .errors import SizeLimitError
from .formulas import enumerate_paired_paths, path_assignment, pebbling_formula

MAX_BS_VARS = 20
MAX_CBS_VARS = 14
MAX_SELECTORS = 10 ** 7
MAX_DT_VARS = 12


@dataclass(frozen=True)
class Selector:
    """A total choice of one solution per assignment, indexed by bitmask."""

    n_vars: int
    choice: tuple[Hashable, ...]

    def __post_init__(self):
        if len(self.choice) != 1 << self.n_vars:
            raise ValueError("selector must cover all 2**n assignments")

    @classmethod
    def from_function(cls, n_vars: int, fn: Callable[[tuple], Hashable]) -> "Selector":
        return cls(n_vars, tuple(fn(mask_to_bits(a, n_vars)) for a in range(1 << n_vars)))

    def __call__(self, alpha: Sequence[int]) -> Hashable:
        return self.choice[bits_to_mask(alpha)]

    def is_valid_for(self, S: SearchProblem) -> bool:
        return all(c in fs for c, fs in zip(self.choice, S.all_feasible_sets))


@dataclass
class SensitivityReport:
    value: int
    witness_input: tuple[int, ...] | None
    witness_blocks: list[tuple[int, ...]]
    exact: bool = True
    interval: tuple[int, int] | None = None
    selector: Selector | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        out = {"value": self.value, "exact": self.exact,
               "witness_input": None if self.witness_input is None else "".join(map(str, self.witness_input)),
               "witness_blocks": [list(b) for b in self.witness_blocks]}
        if self.interval is not None:
            out["interval"] = list(self.interval)
        return out


def _codes(choice: Sequence[Hashable]) -> np.ndarray:
    table: dict = {}
    return np.fromiter((table.setdefault(c, len(table)) for c in choice), dtype=np.int64, count=len(choice))


def minimal_blocks(sensitive: np.ndarray, n: int) -> list[int]:
    """Inclusion-minimal masks among those flagged sensitive (mask 0 ignored)."""
    sens = sensitive.copy()
    sens[0] = False
    below = sens.copy()
    idx = np.arange(1 << n)
    for j in range(n):
        has = (idx >> j) & 1 == 1
        below[has] |= below[idx[has] ^ (1 << j)]
    strict = np.zeros_like(sens)
    for j in range(n):
        has = (idx >> j) & 1 == 1
        strict[has] |= below[idx[has] ^ (1 << j)]
    return np.flatnonzero(sens & ~strict).tolist()


def max_packing(blocks: Sequence[int], universe: int) -> list[int]:
    """A maximum family of pairwise disjoint masks from ``blocks``."""
    blocks = sorted(set(blocks))

    @lru_cache(maxsize=None)
    def best(avail: int) -> tuple[int, ...]:
        usable = [b for b in blocks if b & avail == b]
        if not usable:
            return ()
        e = min((b & -b) for b in usable)
        # either element e stays uncovered, or some block through e is used
        out = best(avail & ~e)
        for b in usable:
            if b & e:
                cand = (b,) + best(avail & ~b)
                if len(cand) > len(out):
                    out = cand
        return out

    return list(best(universe))


def _mask_vars(mask: int) -> tuple[int, ...]:
    return tuple(j for j in range(mask.bit_length()) if mask >> j & 1)


def block_sensitivity(f: Selector, alpha: Sequence[int]) -> SensitivityReport:
    n = f.n_vars
    if n > MAX_BS_VARS:
        raise SizeLimitError(f"block sensitivity is capped at {MAX_BS_VARS} variables")
    codes = _codes(f.choice)
    return _bs_from_codes(codes, n, bits_to_mask(alpha))


def _bs_from_codes(codes: np.ndarray, n: int, a: int) -> SensitivityReport:
    idx = np.arange(1 << n)
    sens = codes[a ^ idx] != codes[a]
    packing = max_packing(minimal_blocks(sens, n), (1 << n) - 1)
    return SensitivityReport(len(packing), mask_to_bits(a, n), [_mask_vars(b) for b in packing])


def forced_lower_bound(S: SearchProblem) -> SensitivityReport:
    """Packing of blocks sensitive for every selector, maximised over critical inputs.

    A block ``B`` is forced at critical ``a`` when the unique solution at ``a``
    is infeasible at ``a ^ B``.
    """
    n = S.n_vars
    sets = S.all_feasible_sets
    idx = np.arange(1 << n)
    best = SensitivityReport(0, None, [])
    for a, fs in enumerate(sets):
        if len(fs) != 1:
            continue
        (q,) = fs
        forced = np.fromiter((q not in sets[a ^ b] for b in idx), dtype=bool, count=1 << n)
        packing = max_packing(minimal_blocks(forced, n), (1 << n) - 1)
        if len(packing) > best.value or best.witness_input is None:
            best = SensitivityReport(len(packing), mask_to_bits(a, n), [_mask_vars(b) for b in packing])
    return best


def lowest_selector(S: SearchProblem) -> Selector:
    """Pick the smallest feasible solution everywhere (solution ids must be orderable)."""
    return Selector(S.n_vars, tuple(min(fs) for fs in S.all_feasible_sets))


def _worst_critical(codes: np.ndarray, n: int, critical: list[int], cutoff: int | None) -> SensitivityReport:
    worst = None
    for a in critical:
        rep = _bs_from_codes(codes, n, a)
        if worst is None or rep.value > worst.value:
            worst = rep
            if cutoff is not None and worst.value >= cutoff:
                break
    return worst


def critical_block_sensitivity(S: SearchProblem) -> SensitivityReport:
    """min over selectors of max over critical inputs of block sensitivity.

    Selectors are enumerated with a cutoff: a selector is abandoned once some
    critical input reaches the best maximum found so far. If the selector space
    is too large, a certified interval is returned instead.
    """
    n = S.n_vars
    if n > MAX_CBS_VARS:
        raise SizeLimitError(f"critical block sensitivity is capped at {MAX_CBS_VARS} variables")
    sets = S.all_feasible_sets
    if any(len(fs) == 0 for fs in sets):
        raise ValueError("search problem must be total")
    critical = [a for a, fs in enumerate(sets) if len(fs) == 1]
    free = [a for a, fs in enumerate(sets) if len(fs) > 1]
    options = [sorted(sets[a], key=repr) for a in free]
    space = 1
    for o in options:
        space *= len(o)

    base = [next(iter(fs)) if len(fs) == 1 else None for fs in sets]
    if not critical:
        sel = Selector(n, tuple(min(fs, key=repr) for fs in sets))
        return SensitivityReport(0, None, [], selector=sel)

    if space > MAX_SELECTORS:
        sel = Selector(n, tuple(min(fs, key=repr) for fs in sets))
        upper = _worst_critical(_codes(sel.choice), n, critical, None)
        lower = forced_lower_bound(S)
        return SensitivityReport(upper.value, upper.witness_input, upper.witness_blocks, exact=False,
                                 interval=(lower.value, upper.value), selector=sel)

    best_rep, best_sel = None, None
    choice = list(base)
    for combo in itertools.product(*options):
        for a, q in zip(free, combo):
            choice[a] = q
        cutoff = None if best_rep is None else best_rep.value
        rep = _worst_critical(_codes(choice), n, critical, cutoff)
        if best_rep is None or rep.value < best_rep.value:
            best_rep, best_sel = rep, Selector(n, tuple(choice))
    best_rep.selector = best_sel
    return best_rep


def decision_tree_depth(S: SearchProblem) -> int:
    """Exact deterministic query complexity by memoised search over restrictions."""
    n = S.n_vars
    if n > MAX_DT_VARS:
        raise SizeLimitError(f"decision-tree depth is capped at {MAX_DT_VARS} variables")
    sets = S.all_feasible_sets
    everything = frozenset().union(*sets)

    @lru_cache(maxsize=None)
    def depth(fixed: int, values: int) -> int:
        common = set(everything)
        free = [j for j in range(n) if not fixed >> j & 1]
        for rest in range(1 << len(free)):
            a = values
            for t, j in enumerate(free):
                if rest >> t & 1:
                    a |= 1 << j
            common &= sets[a]
            if not common:
                break
        if common:
            return 0
        return min(1 + max(depth(fixed | 1 << j, values), depth(fixed | 1 << j, values | 1 << j))
                   for j in free)

    return depth(0, 0)


# --------------------------------------------------------------------------- H x P pairing


@dataclass
class PairSensitivityReport:
    n_paths: int
    best_path: int
    out_degree: int
    in_degree: int
    n_pairs: int
    blocks: list[tuple[int, ...]]
    disjoint: bool
    sensitive: bool
    critical: bool
    degrees_consistent: bool

    @property
    def value(self) -> int:
        return len(self.blocks)

    @property
    def passed(self) -> bool:
        return self.disjoint and self.sensitive and self.critical and self.degrees_consistent

    def to_json(self) -> dict:
        return {"n_paths": self.n_paths, "best_path": self.best_path, "out_degree": self.out_degree,
                "in_degree": self.in_degree, "n_pairs": self.n_pairs, "value": self.value,
                "blocks": [list(b) for b in self.blocks], "disjoint": self.disjoint,
                "sensitive": self.sensitive, "critical": self.critical,
                "degrees_consistent": self.degrees_consistent, "passed": self.passed}


def path_pair_sensitivity_check(dag, selector: Callable[[tuple], int] | None = None) -> PairSensitivityReport:
    """Orient each pair ``{p, q}`` towards the path whose source the selector names.

    ``selector`` maps a pair assignment to a violated constraint id of the
    pebbling formula; by default the lower-numbered constraint is chosen.
    """
    pf = pebbling_formula(dag)
    pairing = enumerate_paired_paths(dag)
    paths = pairing.paths
    if selector is None:
        def selector(alpha):
            return min(pf.csp.violated(alpha))

    src_con = [pf.node_constraint(p.nodes[0]) for p in paths]
    out_nb: list[list[tuple[int, int]]] = [[] for _ in paths]
    indeg = [0] * len(paths)
    for pk, prs in enumerate(pairing.pairs):
        for i, qk in prs:
            if qk < pk:
                continue
            chosen = selector(path_assignment(dag, paths[pk], paths[qk]))
            if chosen == src_con[qk]:
                out_nb[pk].append((i, qk))
                indeg[qk] += 1
            elif chosen == src_con[pk]:
                # the pairing is symmetric, so record the edge q -> p
                ip = next(j for j, t in pairing.pairs[qk] if t == pk)
                out_nb[qk].append((ip, pk))
                indeg[pk] += 1
            else:
                raise ValueError("selector returned a constraint that is not a path source")

    consistent = all(len(out_nb[k]) + indeg[k] == len(pairing.pairs[k]) for k in range(len(paths)))
    best = max(range(len(paths)), key=lambda k: (len(out_nb[k]), -k))
    p = paths[best]
    p_nodes = set(p.nodes)
    blocks = [tuple(sorted(set(paths[qk].nodes) - p_nodes)) for _, qk in out_nb[best]]
    seen: set = set()
    disjoint = True
    for b in blocks:
        if seen & set(b):
            disjoint = False
        seen |= set(b)

    alpha_p = path_assignment(dag, p)
    viol = pf.csp.violated(alpha_p)
    critical = viol == [src_con[best]]
    sensitive = True
    for b in blocks:
        flipped = list(alpha_p)
        for v in b:
            flipped[v] ^= 1
        if selector(tuple(flipped)) == src_con[best]:
            sensitive = False
    return PairSensitivityReport(len(paths), best, len(out_nb[best]), indeg[best],
                                 len(pairing.pairs[best]), blocks, disjoint, sensitive, critical, consistent)
