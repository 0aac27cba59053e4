"""Space-oriented resolution traces and the binary search for a violated clause.

Clauses are frozensets of signed 1-based literals. A trace is a list of steps:
``download`` adds a clause of the CNF, ``infer`` adds the resolvent of two
lines currently held, ``erase`` drops a line. Configuration ``D_i`` is the set
of lines held after ``i`` steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core_csp import Csp
from .errors import SizeLimitError, TraceError
from .formulas import PebblingFormula, replay_strategy
from .lifting import LiftedCnf

Clause = frozenset


@dataclass(frozen=True)
class Line:
    clause: Clause
    kind: str  # "download" or "infer"
    source: int | None = None
    premises: tuple[int, ...] = ()


@dataclass
class ProofTrace:
    n_vars: int
    lines: list[Line] = field(default_factory=list)
    steps: list[tuple[str, int]] = field(default_factory=list)

    @property
    def length(self) -> int:
        return len(self.steps)

    def configurations(self) -> list[frozenset]:
        conf: set = set()
        out = [frozenset()]
        for op, lid in self.steps:
            if op == "erase":
                conf.discard(lid)
            else:
                conf.add(lid)
            out.append(frozenset(conf))
        return out

    def configuration(self, i: int) -> frozenset:
        conf: set = set()
        for op, lid in self.steps[:i]:
            if op == "erase":
                conf.discard(lid)
            else:
                conf.add(lid)
        return frozenset(conf)

    @property
    def space(self) -> int:
        return max(len(c) for c in self.configurations())

    def to_json(self) -> dict:
        return {
            "n_vars": self.n_vars,
            "lines": [{"clause": sorted(l.clause, key=lambda t: (abs(t), t)), "kind": l.kind,
                       "source": l.source, "premises": list(l.premises)} for l in self.lines],
            "steps": [{"op": op, "line": lid} for op, lid in self.steps],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ProofTrace":
        lines = [Line(frozenset(l["clause"]), l["kind"], l.get("source"), tuple(l.get("premises", ())))
                 for l in obj["lines"]]
        return cls(int(obj["n_vars"]), lines, [(s["op"], int(s["line"])) for s in obj["steps"]])


class _Builder:
    def __init__(self, n_vars: int):
        self.trace = ProofTrace(n_vars)
        self.held: set = set()

    def download(self, clause: Sequence[int], source: int) -> int:
        lid = len(self.trace.lines)
        self.trace.lines.append(Line(frozenset(clause), "download", source))
        self.trace.steps.append(("download", lid))
        self.held.add(lid)
        return lid

    def infer(self, a: int, b: int) -> int:
        ca, cb = self.trace.lines[a].clause, self.trace.lines[b].clause
        lid = len(self.trace.lines)
        self.trace.lines.append(Line(resolve(ca, cb), "infer", None, (a, b)))
        self.trace.steps.append(("infer", lid))
        self.held.add(lid)
        return lid

    def erase(self, lid: int) -> None:
        self.trace.steps.append(("erase", lid))
        self.held.discard(lid)


def resolve(a: Clause, b: Clause) -> Clause:
    """Resolvent on the unique clashing variable."""
    clash = [t for t in a if -t in b]
    if len(clash) != 1:
        raise TraceError(f"clauses clash on {len(clash)} variables; resolution needs exactly one")
    t = clash[0]
    return frozenset((a - {t}) | (b - {-t}))


def resolution_refutation_pebbling(pf: PebblingFormula, moves: Sequence[tuple[str, int]]) -> ProofTrace:
    """Derive ``(v)`` whenever ``v`` is pebbled and erase it when the pebble is removed."""
    dag = pf.dag
    _, final = replay_strategy(dag, moves)
    if dag.sink not in final and not any(op == "place" and v == dag.sink for op, v in moves):
        raise TraceError("strategy never pebbles the sink")
    b = _Builder(dag.n_nodes)
    unit: dict[int, int] = {}
    done = False
    for op, v in moves:
        if op == "remove":
            b.erase(unit.pop(v))
            continue
        ci = pf.node_constraint(v)
        cur = b.download(pf.csp.constraints[ci].literals(), ci)
        for w in dag.preds[v]:
            nxt = b.infer(cur, unit[w])
            b.erase(cur)
            cur = nxt
        unit[v] = cur
        if v == dag.sink:
            done = True
            break
    if not done:
        raise TraceError("strategy never pebbles the sink")
    neg = b.download(pf.csp.constraints[PebblingFormula.SINK_CONSTRAINT].literals(),
                     PebblingFormula.SINK_CONSTRAINT)
    b.infer(unit[dag.sink], neg)
    return b.trace


def check_trace(trace: ProofTrace, cnf: Csp) -> dict:
    """Replay a trace: downloads must be CNF clauses, inferences correct resolution steps."""
    clauses = [frozenset(c) for c in cnf.clauses()]
    held: set = set()
    seen: set = set()
    peak = 0
    for k, (op, lid) in enumerate(trace.steps):
        if not 0 <= lid < len(trace.lines):
            raise TraceError(f"step {k}: unknown line {lid}")
        line = trace.lines[lid]
        if op == "download":
            if line.kind != "download" or line.source is None or not 0 <= line.source < len(clauses) \
                    or clauses[line.source] != line.clause:
                raise TraceError(f"step {k}: line {lid} is not a clause of the formula")
        elif op == "infer":
            if line.kind != "infer" or len(line.premises) != 2:
                raise TraceError(f"step {k}: line {lid} is not an inference")
            a, b = line.premises
            if a not in held or b not in held:
                raise TraceError(f"step {k}: premises of line {lid} are not in memory")
            if resolve(trace.lines[a].clause, trace.lines[b].clause) != line.clause:
                raise TraceError(f"step {k}: line {lid} is not the resolvent of its premises")
        elif op == "erase":
            if lid not in held:
                raise TraceError(f"step {k}: erasing line {lid} that is not held")
            held.discard(lid)
            continue
        else:
            raise TraceError(f"step {k}: unknown operation {op!r}")
        if lid in seen:
            raise TraceError(f"step {k}: line {lid} introduced twice")
        seen.add(lid)
        held.add(lid)
        peak = max(peak, len(held))
    if not any(len(trace.lines[l].clause) == 0 for l in held):
        raise TraceError("final configuration holds no empty clause")
    return {"length": trace.length, "space": peak, "lines": len(trace.lines)}


# --------------------------------------------------------------------------- lifted refutations


def _falsified(clause: Clause, rho: dict) -> bool:
    return all(abs(t) in rho and rho[abs(t)] != (t > 0) for t in clause)


def _derive(b: _Builder, target: Clause, premises: list[tuple[Clause, int | None, int | None]]) -> int:
    """Tree-like derivation of a subclause of ``target`` from ``premises``.

    Premises are ``(clause, held line or None, CNF index or None)``. Works by
    splitting on variables under the assignment that falsifies ``target``;
    leaves are falsified premises, downloaded on demand. Returns a held line.
    """
    rho = {abs(t): t < 0 for t in target}
    clauses = [p[0] for p in premises]

    def pick_var():
        best = None
        for c in clauses:
            if any(abs(t) in rho and rho[abs(t)] == (t > 0) for t in c):
                continue
            free = [abs(t) for t in c if abs(t) not in rho]
            if best is None or len(free) < len(best):
                best = free
        return best[0]

    def rec() -> tuple[int, bool]:
        for c, held, src in premises:
            if _falsified(c, rho):
                if held is not None:
                    return held, False
                return b.download(sorted(c), src), True
        x = pick_var()
        lines = []
        for val in (False, True):
            rho[x] = val
            lines.append(rec())
            del rho[x]
        (l0, own0), (l1, own1) = lines
        # a branch whose clause does not mention x already works for both sides
        for (lid, own), (other, oown) in (((l0, own0), (l1, own1)), ((l1, own1), (l0, own0))):
            if x not in b.trace.lines[lid].clause and -x not in b.trace.lines[lid].clause:
                if oown:
                    b.erase(other)
                return lid, own
        out = b.infer(l0, l1)
        for lid, own in lines:
            if own:
                b.erase(lid)
        return out, True

    lid, own = rec()
    if not own:
        raise TraceError("target already held")
    return lid


def lifted_refutation(lc: LiftedCnf, pf: PebblingFormula, moves: Sequence[tuple[str, int]]) -> ProofTrace:
    """Simulate each pebbling step on the lifted formula.

    Pebbling ``v`` derives, for every encoding on which ``v`` decodes to 0, the
    clause excluding that encoding, from the same clauses for its in-neighbours
    and the lifted group of ``v``'s implication.
    """
    if lc.base.n_vars != pf.dag.n_nodes:
        raise ValueError("lifted CNF does not match the pebbling formula")
    dag = pf.dag
    replay_strategy(dag, moves)
    g, k, l = lc.gadget, lc.k, lc.l
    zero_codes = sorted(g.input_key(x) for x in g.preimage(0))

    def unit_group(v):
        out = []
        for key in zero_codes:
            lits = []
            for i in range(k):
                for j in range(l):
                    var = lc.var(v, i, j) + 1
                    lits.append(-var if (key[i] >> j) & 1 else var)
            out.append(frozenset(lits))
        return out

    groups: dict[int, list[tuple[int, ...]]] = {}
    for idx, o in enumerate(lc.clause_origin):
        if o is not None:
            groups.setdefault(o[0], []).append(idx)
    extra = [i for i, o in enumerate(lc.clause_origin) if o is None]
    cnf_clauses = [frozenset(c) for c in lc.csp.clauses()]

    b = _Builder(lc.csp.n_vars)
    held: dict[int, list[int]] = {}

    def premises_for(base_clause, nodes):
        prem = [(cnf_clauses[i], None, i) for i in groups.get(base_clause, [])]
        for w in nodes:
            prem.extend((b.trace.lines[lid].clause, lid, None) for lid in held[w])
        vars_ = {v for v in nodes} | {abs(t) - 1 for t in lc.base.constraints[base_clause].literals()}
        prem.extend((cnf_clauses[i], None, i) for i in extra
                    if {(abs(t) - 1) // (k * l) for t in cnf_clauses[i]} <= vars_)
        return prem

    for op, v in moves:
        if op == "remove":
            for lid in held.pop(v):
                b.erase(lid)
            continue
        prem = premises_for(pf.node_constraint(v), dag.preds[v])
        held[v] = [_derive(b, t, prem) for t in unit_group(v)]
        if v == dag.sink:
            break
    if dag.sink not in held:
        raise TraceError("strategy never pebbles the sink")
    prem = premises_for(PebblingFormula.SINK_CONSTRAINT, [dag.sink])
    _derive(b, frozenset(), prem)
    return b.trace


# --------------------------------------------------------------------------- binary search


@dataclass
class Probe:
    index: int
    all_true: bool
    cost: int


@dataclass
class Transcript:
    probes: list[Probe]

    @property
    def cost(self) -> int:
        return sum(p.cost for p in self.probes)


def clause_true(clause: Clause, alpha: Sequence[int]) -> bool:
    return any((alpha[abs(t) - 1] == 1) == (t > 0) for t in clause)


def binary_search_protocol(trace: ProofTrace, alpha: Sequence[int],
                           line_cost: Callable[[Line], int] | None = None,
                           configs: list[frozenset] | None = None) -> tuple[int, Transcript]:
    """Locate a downloaded clause falsified by ``alpha``; returns its CNF index.

    Keeps ``D_lo`` all true and ``D_hi`` containing a false line, probing the
    midpoint each round. ``line_cost`` prices one line evaluation (default 1).
    """
    if configs is None:
        configs = trace.configurations()
    cost = line_cost or (lambda line: 1)
    lo, hi = 0, trace.length
    probes = []
    while hi - lo > 1:
        mid = (lo + hi) // 2
        lines = [trace.lines[i] for i in configs[mid]]
        ok = all(clause_true(l.clause, alpha) for l in lines)
        probes.append(Probe(mid, ok, sum(cost(l) for l in lines)))
        if ok:
            lo = mid
        else:
            hi = mid
    op, lid = trace.steps[hi - 1]
    line = trace.lines[lid]
    if op != "download" or clause_true(line.clause, alpha):
        raise TraceError(f"step {hi - 1} ({op}) introduces no false download; the trace is unsound")
    return line.source, Transcript(probes)


def max_probes(trace: ProofTrace) -> int:
    return max(0, math.ceil(math.log2(trace.length))) if trace.length > 1 else 0


def _clause_masks(clause: Clause) -> tuple[int, int]:
    pos = sum(1 << (t - 1) for t in clause if t > 0)
    neg = sum(1 << (-t - 1) for t in clause if t < 0)
    return pos, neg


def binary_search_all(trace: ProofTrace, n_vars: int, chunk: int = 1 << 20,
                      return_probes: bool = False):
    """Run the binary search for every assignment of ``n_vars`` variables at once.

    Assignment ``a`` is the bitmask with bit ``j`` holding variable ``j+1``.
    Returns the CNF index found for each assignment (or -1 on an unsound trace),
    and with ``return_probes`` also the number of probes each search made.
    """
    if n_vars > 26:
        raise SizeLimitError("exhaustive search is capped at 26 variables")
    configs = [np.fromiter(sorted(c), dtype=np.int64) for c in trace.configurations()]
    dt = np.uint32 if n_vars <= 32 else np.int64
    masks = np.array([_clause_masks(l.clause) for l in trace.lines], dtype=dt).reshape(-1, 2)
    step_line = np.array([lid for _, lid in trace.steps], dtype=np.int64)
    step_dl = np.array([op == "download" for op, _ in trace.steps])
    sources = np.array([-1 if l.source is None else l.source for l in trace.lines], dtype=np.int64)
    total = 1 << n_vars
    out = np.empty(total, dtype=np.int64)
    probes = np.zeros(total, dtype=np.int16)
    for start in range(0, total, chunk):
        a = np.arange(start, min(total, start + chunk), dtype=dt)
        lo = np.zeros(a.shape, dtype=np.int64)
        hi = np.full(a.shape, trace.length, dtype=np.int64)
        while True:
            active = np.flatnonzero(hi - lo > 1)
            if active.size == 0:
                break
            mid = (lo[active] + hi[active]) // 2
            probes[start + active] += 1
            ok = np.ones(active.size, dtype=bool)
            order = np.argsort(mid, kind="stable")
            uniq, first, counts = np.unique(mid[order], return_index=True, return_counts=True)
            for m, f0, cnt in zip(uniq.tolist(), first.tolist(), counts.tolist()):
                sel = order[f0:f0 + cnt]
                av = a[active[sel]]
                nav = ~av
                good = np.ones(sel.size, dtype=bool)
                for lid in configs[m]:
                    pos, neg = masks[lid]
                    good &= ((av & pos) | (nav & neg)) != 0
                ok[sel] = good
            lo[active[ok]] = mid[ok]
            hi[active[~ok]] = mid[~ok]
        step = hi - 1
        lid = step_line[step]
        pos, neg = masks[lid, 0], masks[lid, 1]
        false_line = ((a & pos) == 0) & ((~a & neg) == 0)
        res = np.where(step_dl[step] & false_line, sources[lid], -1)
        out[start:start + a.size] = res
    return (out, probes) if return_probes else out
