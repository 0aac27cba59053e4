"""Charged undirected graphs for Tseitin formulas and DAGs for pebbling formulas."""

from __future__ import annotations

import itertools
import statistics
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Sequence

import numpy as np


@dataclass(frozen=True)
class ChargedGraph:
    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    charge: tuple[int, ...]
    shape: tuple[int, int] | None = None
    routing_set: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))
        object.__setattr__(self, "charge", tuple(int(c) for c in self.charge))
        if len(self.charge) != self.n_nodes:
            raise ValueError("one charge bit per node required")
        for u, v in self.edges:
            if u == v or not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise ValueError(f"bad edge {(u, v)}")
        if sum(self.charge) % 2 != 1:
            raise ValueError("total charge must be odd")
        if not self.is_connected():
            raise ValueError("graph must be connected")

    @cached_property
    def incident(self) -> tuple[tuple[int, ...], ...]:
        """Edge ids incident to each node, in edge order."""
        inc: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for e, (u, v) in enumerate(self.edges):
            inc[u].append(e)
            inc[v].append(e)
        return tuple(tuple(x) for x in inc)

    @property
    def max_degree(self) -> int:
        return max(len(x) for x in self.incident)

    def other_end(self, e: int, v: int) -> int:
        a, b = self.edges[e]
        return b if a == v else a

    def is_connected(self) -> bool:
        if self.n_nodes == 0:
            return False
        adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        seen = {0}
        todo = [0]
        while todo:
            u = todo.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return len(seen) == self.n_nodes

    def to_json(self) -> dict:
        out = {"nodes": self.n_nodes, "edges": [list(e) for e in self.edges], "charge": list(self.charge)}
        if self.shape is not None:
            out["shape"] = list(self.shape)
        if self.routing_set is not None:
            out["routing_set"] = list(self.routing_set)
        return out


def grid_graph(rows: int, cols: int, charge_node: int = 0) -> ChargedGraph:
    """``rows x cols`` grid; node ``r*cols + c``; the top row is the routing set."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    n = rows * cols
    edges = []
    for r in range(rows):
        for c in range(cols - 1):
            edges.append((r * cols + c, r * cols + c + 1))
    for r in range(rows - 1):
        for c in range(cols):
            edges.append((r * cols + c, (r + 1) * cols + c))
    charge = [0] * n
    charge[charge_node] = 1
    return ChargedGraph(n, tuple(edges), tuple(charge), shape=(rows, cols),
                        routing_set=tuple(range(cols)))


def cycle_graph(n: int, charge_node: int = 0) -> ChargedGraph:
    """Cycle on ``n >= 3`` nodes; edge ``i`` joins ``i`` and ``i+1 mod n``."""
    if n < 3:
        raise ValueError("a cycle needs at least 3 nodes")
    charge = [0] * n
    charge[charge_node] = 1
    return ChargedGraph(n, tuple((i, (i + 1) % n) for i in range(n)), tuple(charge))


def triangle(charge_node: int = 0) -> ChargedGraph:
    return cycle_graph(3, charge_node)


@dataclass(frozen=True)
class Dag:
    """DAG with a unique sink; node ``labels`` keep the construction coordinates."""

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    sink: int
    labels: tuple[Hashable, ...] = ()
    layers: tuple[tuple[int, ...], ...] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(u), int(v)) for u, v in self.edges))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(self.n_nodes)))
        outdeg = [0] * self.n_nodes
        for u, v in self.edges:
            if u == v or not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise ValueError(f"bad edge {(u, v)}")
            outdeg[u] += 1
        sinks = [v for v in range(self.n_nodes) if outdeg[v] == 0]
        if sinks != [self.sink]:
            raise ValueError(f"expected unique sink {self.sink}, found {sinks}")
        if len(self.topological_order) != self.n_nodes:
            raise ValueError("graph has a cycle")

    @cached_property
    def preds(self) -> tuple[tuple[int, ...], ...]:
        p: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for u, v in self.edges:
            p[v].append(u)
        return tuple(tuple(x) for x in p)

    @cached_property
    def succs(self) -> tuple[tuple[int, ...], ...]:
        s: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for u, v in self.edges:
            s[u].append(v)
        return tuple(tuple(x) for x in s)

    @cached_property
    def topological_order(self) -> tuple[int, ...]:
        indeg = [0] * self.n_nodes
        for _, v in self.edges:
            indeg[v] += 1
        todo = deque(v for v in range(self.n_nodes) if indeg[v] == 0)
        order = []
        while todo:
            u = todo.popleft()
            order.append(u)
            for w in self.succs[u]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    todo.append(w)
        return tuple(order)

    @property
    def sources(self) -> tuple[int, ...]:
        return tuple(v for v in range(self.n_nodes) if not self.preds[v])

    @property
    def max_indegree(self) -> int:
        return max(len(p) for p in self.preds)

    def layering(self) -> tuple[tuple[int, ...], ...]:
        """Stored layers, or layers by longest path from a source."""
        if self.layers is not None:
            return self.layers
        depth = [0] * self.n_nodes
        for v in self.topological_order:
            for u in self.preds[v]:
                depth[v] = max(depth[v], depth[u] + 1)
        out: list[list[int]] = [[] for _ in range(max(depth) + 1)]
        for v in range(self.n_nodes):
            out[depth[v]].append(v)
        return tuple(tuple(x) for x in out)

    def to_json(self) -> dict:
        out = {
            "nodes": self.n_nodes,
            "labels": [list(l) if isinstance(l, tuple) else l for l in self.labels],
            "edges": [list(e) for e in self.edges],
            "sink": self.sink,
        }
        if self.layers is not None:
            out["layers"] = [list(l) for l in self.layers]
        out.update(self.meta)
        return out


def pyramid(height: int) -> Dag:
    """Pyramid of the given height; node ``(i, j)`` sits on layer ``i`` at position ``j``.

    Layer 0 holds ``height + 1`` sources; ``(i, j)`` has in-neighbours
    ``(i-1, j)`` and ``(i-1, j+1)``; the apex ``(height, 0)`` is the sink.
    """
    if height < 1:
        raise ValueError("height must be at least 1")
    labels = [(i, j) for i in range(height + 1) for j in range(height + 1 - i)]
    index = {lab: k for k, lab in enumerate(labels)}
    edges = []
    for i in range(1, height + 1):
        for j in range(height + 1 - i):
            v = index[(i, j)]
            edges.append((index[(i - 1, j)], v))
            edges.append((index[(i - 1, j + 1)], v))
    layers = tuple(tuple(index[(i, j)] for j in range(height + 1 - i)) for i in range(height + 1))
    return Dag(len(labels), tuple(edges), index[(height, 0)], tuple(labels), layers,
               {"family": "pyramid", "height": height})


def path_tensor_graph(width: int, n_layers: int) -> tuple[list[tuple[int, int]], set]:
    """Undirected path on ``range(width)`` tensored with a directed path of layers.

    Returns the node list ``(position, layer)`` and the directed edge set.
    """
    nodes = [(p, i) for i in range(n_layers) for p in range(width)]
    edges = set()
    for i in range(n_layers - 1):
        for p in range(width):
            for q in (p - 1, p + 1):
                if 0 <= q < width:
                    edges.add(((p, i), (q, i + 1)))
    return nodes, edges


def pyramid_tensor_embedding(height: int) -> dict:
    """Injective map of pyramid node labels into ``path_tensor_graph(2h+1, h+1)``."""
    return {(i, j): (2 * j + i, i) for i in range(height + 1) for j in range(height + 1 - i)}


GENERATORS: tuple[tuple[int, int, int], ...] = (
    (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1),
)


def negate_generator(b: int) -> int:
    """Index of ``-GENERATORS[b]``."""
    return b ^ 1


@dataclass(frozen=True)
class CayleyGrid:
    """Cayley graph of ``Z_r^3`` under the six unit generators."""

    r: int

    def __post_init__(self):
        if self.r < 3 or self.r % 2 == 0:
            raise ValueError("r must be odd and at least 3")

    @property
    def m(self) -> int:
        return self.r ** 3

    def nodes(self) -> list[tuple[int, int, int]]:
        return list(itertools.product(range(self.r), repeat=3))

    def step(self, v: Sequence[int], b: int) -> tuple[int, int, int]:
        g = GENERATORS[b]
        return tuple((v[t] + g[t]) % self.r for t in range(3))

    def neighbours(self, v: Sequence[int]) -> list[tuple[int, int, int]]:
        return [self.step(v, b) for b in range(6)]


def partial_cover_walk(h: CayleyGrid, start: Sequence[int], steps: int, rng) -> frozenset:
    """Nodes visited by a uniform random walk of ``steps`` steps from ``start``."""
    v = tuple(start)
    seen = {v}
    moves = rng.integers(0, 6, size=steps)
    for b in moves:
        v = h.step(v, int(b))
        seen.add(v)
    return frozenset(seen)


def steps_to_half_cover(h: CayleyGrid, start: Sequence[int], rng, cap: int = 10 ** 7) -> int:
    target = (h.m + 1) // 2
    v = tuple(start)
    seen = {v}
    steps = 0
    while len(seen) < target:
        v = h.step(v, int(rng.integers(0, 6)))
        seen.add(v)
        steps += 1
        if steps > cap:
            raise RuntimeError("random walk did not reach half cover")
    return steps


def estimate_pct(h: CayleyGrid, trials: int, rng) -> float:
    """Median number of steps for a walk from the origin to visit half the nodes."""
    return statistics.median(steps_to_half_cover(h, (0, 0, 0), rng) for _ in range(trials))


def default_ell(r: int, rng, trials: int = 1000) -> int:
    """Layer count ``2 * pct + 1`` from an empirical partial-cover estimate."""
    return 2 * int(np.ceil(estimate_pct(CayleyGrid(r), trials, rng))) + 1


def hxp_graph(r: int, ell: int) -> Dag:
    """Tensor product of the ``Z_r^3`` Cayley grid with a directed path on ``ell`` layers.

    Node labels are ``(x, y, z, layer)`` with layers ``1..ell``. The sink is
    ``(0, 0, 0, ell)`` and nodes that cannot reach it are removed.
    """
    if r % 2 == 0:
        raise ValueError("r must be odd")
    if r < 3:
        raise ValueError("r must be at least 3")
    if ell < 2:
        raise ValueError("ell must be at least 2")
    h = CayleyGrid(r)
    # backward reachability from the sink, layer by layer
    keep: list[set] = [set() for _ in range(ell + 1)]
    keep[ell] = {(0, 0, 0)}
    for i in range(ell - 1, 0, -1):
        keep[i] = {h.step(u, negate_generator(b)) for u in keep[i + 1] for b in range(6)}
    labels = [(*v, i) for i in range(1, ell + 1) for v in sorted(keep[i])]
    index = {lab: k for k, lab in enumerate(labels)}
    edges = []
    for (x, y, z, i), k in index.items():
        if i == ell:
            continue
        for b in range(6):
            u = h.step((x, y, z), b)
            j = index.get((*u, i + 1))
            if j is not None:
                edges.append((k, j))
    layers = tuple(tuple(index[(*v, i)] for v in sorted(keep[i])) for i in range(1, ell + 1))
    return Dag(len(labels), tuple(edges), index[(0, 0, 0, ell)], tuple(labels), layers,
               {"family": "hxp", "r": r, "ell": ell})


def graph_from_json(obj: dict):
    """Inverse of ``ChargedGraph.to_json`` / ``Dag.to_json``."""
    if "sink" in obj:
        labels = tuple(tuple(l) if isinstance(l, list) else l for l in obj.get("labels", []))
        layers = tuple(tuple(l) for l in obj["layers"]) if "layers" in obj else None
        meta = {k: v for k, v in obj.items() if k not in ("nodes", "labels", "edges", "sink", "layers")}
        return Dag(obj["nodes"], tuple(map(tuple, obj["edges"])), obj["sink"], labels, layers, meta)
    return ChargedGraph(
        obj["nodes"], tuple(map(tuple, obj["edges"])), tuple(obj["charge"]),
        tuple(obj["shape"]) if "shape" in obj else None,
        tuple(obj["routing_set"]) if "routing_set" in obj else None,
    )
