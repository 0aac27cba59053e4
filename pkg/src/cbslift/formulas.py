"""Tseitin and pebbling formulas, their decision trees, and the pebble game."""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core_csp import Constraint, Csp
from .errors import IllegalMove, SizeLimitError
from .graphs import GENERATORS, ChargedGraph, Dag, negate_generator

MAX_PEBBLE_NODES = 22
MAX_PATHS = 10 ** 6


# --------------------------------------------------------------------------- Tseitin


@dataclass(frozen=True)
class TseitinFormula:
    graph: ChargedGraph
    csp: Csp


def parity_constraint(var_ids: Sequence[int], parity: int) -> Constraint:
    """Satisfied iff the variables sum to ``parity`` mod 2."""
    k = len(var_ids)
    return Constraint(tuple(var_ids), tuple(int(bin(r).count("1") % 2 == parity) for r in range(1 << k)))


def tseitin_formula(graph: ChargedGraph) -> TseitinFormula:
    cons = tuple(parity_constraint(graph.incident[v], graph.charge[v]) for v in range(graph.n_nodes))
    return TseitinFormula(graph, Csp(len(graph.edges), cons, declared_degree=graph.max_degree))


def viol(tf: TseitinFormula, alpha: Sequence[int]) -> frozenset:
    """Nodes whose parity constraint is violated by ``alpha``."""
    if len(alpha) != len(tf.graph.edges):
        raise ValueError("assignment length must equal the number of edges")
    out = frozenset(tf.csp.violated(alpha))
    assert len(out) % 2 == 1, "odd total charge forces an odd number of violations"
    return out


def flip_path(alpha: Sequence[int], edge_ids: Iterable[int]) -> tuple[int, ...]:
    a = list(alpha)
    for e in edge_ids:
        a[e] ^= 1
    return tuple(a)


def assignment_with_violations(tf: TseitinFormula, U: Iterable[int]) -> tuple[int, ...]:
    """An edge assignment whose violated set is exactly ``U`` (``|U|`` odd).

    Non-tree edges are fixed to 0 and the spanning-tree edges are solved from
    the leaves up so that each node's parity hits its target.
    """
    g = tf.graph
    U = frozenset(U)
    if len(U) % 2 == 0:
        raise ValueError("U must have odd size")
    if any(not 0 <= u < g.n_nodes for u in U):
        raise ValueError("U contains an unknown node")
    # desired incident sum: charge, flipped where a violation is wanted
    target = [g.charge[v] ^ (v in U) for v in range(g.n_nodes)]
    parent_edge = [-1] * g.n_nodes
    order = [0]
    seen = {0}
    for v in order:
        for e in g.incident[v]:
            w = g.other_end(e, v)
            if w not in seen:
                seen.add(w)
                parent_edge[w] = e
                order.append(w)
    alpha = [0] * len(g.edges)
    acc = [0] * g.n_nodes
    for v in reversed(order[1:]):
        e = parent_edge[v]
        bit = acc[v] ^ target[v]
        alpha[e] = bit
        acc[v] ^= bit
        acc[g.other_end(e, v)] ^= bit
    return tuple(alpha)


def tseitin_decision_tree(tf: TseitinFormula, alpha: Sequence[int]) -> tuple[int, int]:
    """Parity binary search on a grid; returns ``(violated node, edge queries)``.

    Keeps a rectangle whose violation count is odd. The parity of a rectangle
    is its charge plus the values on its boundary edges, all of which were
    queried as earlier cuts. Each round halves the longer side.
    """
    g = tf.graph
    if g.shape is None:
        raise ValueError("tseitin_decision_tree needs a grid graph")
    rows, cols = g.shape
    edge_id = {frozenset(e): k for k, e in enumerate(g.edges)}
    queried: dict[int, int] = {}

    def q(e: int) -> int:
        if e not in queried:
            queried[e] = alpha[e]
        return queried[e]

    def odd(r0, r1, c0, c1) -> bool:
        total = 0
        for r in range(r0, r1):
            for c in range(c0, c1):
                v = r * cols + c
                total ^= g.charge[v]
                for e in g.incident[v]:
                    w = g.other_end(e, v)
                    wr, wc = divmod(w, cols)
                    if not (r0 <= wr < r1 and c0 <= wc < c1):
                        total ^= q(e)
        return total == 1

    r0, r1, c0, c1 = 0, rows, 0, cols
    while (r1 - r0) * (c1 - c0) > 1:
        if r1 - r0 >= c1 - c0:
            mid = (r0 + r1) // 2
            for c in range(c0, c1):
                q(edge_id[frozenset(((mid - 1) * cols + c, mid * cols + c))])
            if odd(r0, mid, c0, c1):
                r1 = mid
            else:
                r0 = mid
        else:
            mid = (c0 + c1) // 2
            for r in range(r0, r1):
                q(edge_id[frozenset((r * cols + mid - 1, r * cols + mid))])
            if odd(r0, r1, c0, mid):
                c1 = mid
            else:
                c0 = mid
    return r0 * cols + c0, len(queried)


# --------------------------------------------------------------------------- pebbling


@dataclass(frozen=True)
class PebblingFormula:
    """Constraint 0 is ``(not sink)``; constraint ``1 + v`` is node ``v``'s implication."""

    dag: Dag
    csp: Csp

    SINK_CONSTRAINT = 0

    def node_constraint(self, v: int) -> int:
        return 1 + v

    def constraint_node(self, i: int) -> int | None:
        return None if i == 0 else i - 1


def pebbling_formula(dag: Dag) -> PebblingFormula:
    cons = [Constraint((dag.sink,), (1, 0))]
    for v in range(dag.n_nodes):
        ws = dag.preds[v]
        k = len(ws) + 1
        table = [1] * (1 << k)
        # violated only when every in-neighbour is true and v is false
        table[(1 << len(ws)) - 1] = 0
        cons.append(Constraint((*ws, v), tuple(table)))
    return PebblingFormula(dag, Csp(dag.n_nodes, tuple(cons), declared_degree=dag.max_indegree + 1))


def pebbling_decision_tree(pf: PebblingFormula, alpha: Sequence[int]) -> tuple[int, int]:
    """Walk down from the sink along false nodes; returns ``(constraint, queries)``."""
    dag = pf.dag
    queries = 1
    if alpha[dag.sink]:
        return PebblingFormula.SINK_CONSTRAINT, queries
    v = dag.sink
    while True:
        nxt = None
        for w in dag.preds[v]:
            queries += 1
            if not alpha[w]:
                nxt = w
                break
        if nxt is None:
            return pf.node_constraint(v), queries
        v = nxt


Move = tuple[str, int]


def replay_strategy(dag: Dag, moves: Sequence[Move]) -> tuple[int, frozenset]:
    """Check legality of a pebbling; returns ``(peak pebbles, final configuration)``."""
    conf: set[int] = set()
    peak = 0
    for step, (op, v) in enumerate(moves):
        if op == "place":
            if v in conf:
                raise IllegalMove(f"move {step}: node {v} already pebbled")
            missing = [w for w in dag.preds[v] if w not in conf]
            if missing:
                raise IllegalMove(f"move {step}: in-neighbours {missing} of {v} not pebbled")
            conf.add(v)
            peak = max(peak, len(conf))
        elif op == "remove":
            if v not in conf:
                raise IllegalMove(f"move {step}: node {v} carries no pebble")
            conf.remove(v)
        else:
            raise IllegalMove(f"move {step}: unknown operation {op!r}")
    return peak, frozenset(conf)


def layered_pebbling_strategy(dag: Dag) -> list[Move]:
    """Pebble layer by layer, clearing each layer once the next one is covered."""
    layers = dag.layering()
    moves: list[Move] = [("place", v) for v in layers[0]]
    for prev, cur in zip(layers, layers[1:]):
        moves.extend(("place", v) for v in cur)
        moves.extend(("remove", v) for v in prev)
    return moves


def pebbling_number_exact(dag: Dag) -> int:
    """Black pebbling number by BFS over configurations, one budget at a time."""
    n = dag.n_nodes
    if n > MAX_PEBBLE_NODES:
        raise SizeLimitError(f"exact pebbling is capped at {MAX_PEBBLE_NODES} nodes")
    pred_mask = [sum(1 << w for w in dag.preds[v]) for v in range(n)]
    sink_bit = 1 << dag.sink
    # no strategy needs more pebbles than nodes on the longest path + max indegree... n is a safe cap
    for budget in range(1, n + 1):
        if _reachable_with_budget(n, pred_mask, sink_bit, budget):
            return budget
    raise AssertionError("every DAG can be pebbled with n pebbles")


def _reachable_with_budget(n: int, pred_mask: list[int], sink_bit: int, budget: int) -> bool:
    seen = {0}
    todo = deque([0])
    while todo:
        conf = todo.popleft()
        size = bin(conf).count("1")
        for v in range(n):
            bit = 1 << v
            if conf & bit:
                nxt = conf ^ bit
            elif size < budget and conf & pred_mask[v] == pred_mask[v]:
                nxt = conf | bit
                if bit == sink_bit:
                    return True
            else:
                continue
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return False


# --------------------------------------------------------------------------- H x P paths


@dataclass(frozen=True)
class SourceSinkPath:
    """A source-to-sink path of an H x P graph, by its generator steps."""

    steps: tuple[int, ...]
    nodes: tuple[int, ...]
    projection: frozenset


@dataclass(frozen=True)
class PathPairing:
    paths: tuple[SourceSinkPath, ...]
    index: dict
    # pairs[p] = ((layer i, q), ...) with i 1-based
    pairs: tuple[tuple[tuple[int, int], ...], ...]

    def lemma_bound_holds(self, p: int) -> bool:
        return len(self.pairs[p]) >= len(self.paths[p].projection) - 1


def _hxp_params(dag: Dag) -> tuple[int, int]:
    if dag.meta.get("family") != "hxp":
        raise ValueError("expected a graph built by hxp_graph")
    return dag.meta["r"], dag.meta["ell"]


def enumerate_source_sink_paths(dag: Dag) -> list[SourceSinkPath]:
    """Every source-sink path, ordered lexicographically by step sequence."""
    r, ell = _hxp_params(dag)
    count = 6 ** (ell - 1)
    if count > MAX_PATHS:
        raise SizeLimitError(f"{count} paths exceeds the {MAX_PATHS} cap")
    index = {lab: k for k, lab in enumerate(dag.labels)}
    out = []
    for steps in itertools.product(range(6), repeat=ell - 1):
        # walk backwards from the sink to find the start
        v = [0, 0, 0]
        for b in steps:
            g = GENERATORS[b]
            v = [(v[t] - g[t]) % r for t in range(3)]
        pts = [tuple(v)]
        for b in steps:
            g = GENERATORS[b]
            pts.append(tuple((pts[-1][t] + g[t]) % r for t in range(3)))
        nodes = tuple(index[(*p, i + 1)] for i, p in enumerate(pts))
        out.append(SourceSinkPath(steps, nodes, frozenset(pts)))
    return out


def enumerate_paired_paths(dag: Dag) -> PathPairing:
    """All source-sink paths and, for each, the paths paired with it.

    ``q`` is paired with ``p`` at layer ``i >= 2`` when its first ``i-1`` steps
    are the negated steps of ``p``, it agrees with ``p`` from layer ``i`` on,
    and it meets ``p`` nowhere before layer ``i``.
    """
    _, ell = _hxp_params(dag)
    paths = enumerate_source_sink_paths(dag)
    index = {p.steps: k for k, p in enumerate(paths)}
    pairs = []
    for p in paths:
        mine = []
        for i in range(2, ell + 1):
            steps = tuple(negate_generator(b) for b in p.steps[: i - 1]) + p.steps[i - 1:]
            qk = index[steps]
            q = paths[qk]
            if all(q.nodes[j] != p.nodes[j] for j in range(i - 1)):
                assert q.nodes[i - 1:] == p.nodes[i - 1:]
                mine.append((i, qk))
        pairs.append(tuple(mine))
    out = PathPairing(tuple(paths), index, tuple(pairs))
    for k in range(len(paths)):
        assert out.lemma_bound_holds(k), f"path {k} has too few pairs"
    return out


def path_assignment(dag: Dag, *paths: SourceSinkPath) -> tuple[int, ...]:
    """0 on every node of the given paths, 1 elsewhere."""
    alpha = [1] * dag.n_nodes
    for p in paths:
        for v in p.nodes:
            alpha[v] = 0
    return tuple(alpha)


def pebbling_queries_bound(dag: Dag) -> int:
    return len(dag.layering()) * (1 + dag.max_indegree)


def sqrt_constant(queries: int, n: int) -> float:
    return queries / math.sqrt(n)
