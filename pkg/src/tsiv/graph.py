"""Time graphs of VAR processes, latent projections and separation queries.

Graphs here are small mixed graphs with directed (``u -> v``) and bidirected
(``u <-> v``) edges.  Nodes of a time graph are :class:`NodeId` pairs
``(component, t)``; generic graphs accept any hashable, orderable node.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, NamedTuple

import numpy as np

from .var_model import VarParameters


class NodeId(NamedTuple):
    """Component index (in the state vector) and integer time."""

    component: int
    t: int


def _sorted(nodes):
    return sorted(nodes, key=lambda n: repr(n) if not isinstance(n, (tuple, int)) else n)


def _pair(u, v):
    return (u, v) if repr(u) <= repr(v) else (v, u)


@dataclass(frozen=True, eq=False)
class MixedGraph:
    """Graph with directed and bidirected edges over a finite node set."""

    nodes: frozenset
    directed: frozenset = frozenset()
    bidirected: frozenset = frozenset()

    def __post_init__(self):
        nodes = frozenset(self.nodes)
        directed = frozenset((u, v) for u, v in self.directed)
        bidirected = frozenset(_pair(u, v) for u, v in self.bidirected)
        for u, v in directed | bidirected:
            if u not in nodes or v not in nodes:
                raise ValueError(f"edge ({u!r}, {v!r}) has an endpoint outside the node set")
            if u == v:
                raise ValueError(f"self loop at {u!r}")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "bidirected", bidirected)
        children, parents, spouses = {}, {}, {}
        for n in nodes:
            children[n], parents[n], spouses[n] = set(), set(), set()
        for u, v in directed:
            children[u].add(v)
            parents[v].add(u)
        for u, v in bidirected:
            spouses[u].add(v)
            spouses[v].add(u)
        object.__setattr__(self, "_children", children)
        object.__setattr__(self, "_parents", parents)
        object.__setattr__(self, "_spouses", spouses)

    @property
    def is_admg(self) -> bool:
        return bool(self.bidirected) or isinstance(self, MarginalGraph)

    def children(self, v):
        return self._children[v]

    def parents(self, v):
        return self._parents[v]

    def spouses(self, v):
        return self._spouses[v]

    def ancestors(self, nodes: Iterable) -> set:
        """Ancestors of ``nodes``, including the nodes themselves."""
        return _closure(nodes, self._parents)

    def descendants(self, nodes: Iterable) -> set:
        """Descendants of ``nodes``, including the nodes themselves."""
        return _closure(nodes, self._children)

    def is_acyclic(self) -> bool:
        indeg = {n: len(self._parents[n]) for n in self.nodes}
        queue = deque(n for n, k in indeg.items() if k == 0)
        seen = 0
        while queue:
            n = queue.popleft()
            seen += 1
            for c in self._children[n]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        return seen == len(self.nodes)

    def without_directed(self, edges: Iterable) -> "MixedGraph":
        drop = set(edges)
        return MixedGraph(self.nodes, self.directed - drop, self.bidirected)

    def edge_sets(self) -> tuple[frozenset, frozenset]:
        return self.directed, self.bidirected

    def same_edges(self, other: "MixedGraph") -> bool:
        return (self.nodes == other.nodes and self.directed == other.directed
                and self.bidirected == other.bidirected)

    def node_label(self, node) -> str:
        return str(node)

    def to_json(self) -> str:
        def enc(n):
            if isinstance(n, NodeId):
                return {"component": n.component, "t": n.t}
            return {"name": str(n)}
        order = _sorted(self.nodes)
        return json.dumps({
            "nodes": [enc(n) for n in order],
            "directed": [[enc(u), enc(v)] for u, v in _sorted(self.directed)],
            "bidirected": [[enc(u), enc(v)] for u, v in _sorted(self.bidirected)],
        })

    def to_dot(self) -> str:
        ids = {n: f"n{k}" for k, n in enumerate(_sorted(self.nodes))}
        lines = ["digraph G {"]
        for n, i in ids.items():
            lines.append(f'  {i} [label="{self.node_label(n)}"];')
        for u, v in _sorted(self.directed):
            lines.append(f"  {ids[u]} -> {ids[v]};")
        for u, v in _sorted(self.bidirected):
            lines.append(f"  {ids[u]} -> {ids[v]} [dir=both, style=dashed];")
        lines.append("}")
        return "\n".join(lines)


def _closure(start, nbrs):
    out = set(start)
    stack = list(out)
    while stack:
        v = stack.pop()
        for w in nbrs[v]:
            if w not in out:
                out.add(w)
                stack.append(w)
    return out


@dataclass(frozen=True, eq=False)
class TimeGraph(MixedGraph):
    """Full time graph of a VAR process restricted to a window ``[t_min, t_max]``."""

    labels: tuple = ()
    window: tuple = (0, 0)

    def node(self, name: str, t: int) -> NodeId:
        """Node by component label, e.g. ``g.node("X1", -1)``."""
        return NodeId(self.labels.index(name), t)

    def node_label(self, node) -> str:
        name = self.labels[node.component] if self.labels else f"S{node.component}"
        if node.t == 0:
            return f"{name}_t"
        return f"{name}_t{node.t:+d}"


@dataclass(frozen=True, eq=False)
class MarginalGraph(MixedGraph):
    """Latent projection of a graph onto a node subset (an ADMG)."""

    labels: tuple = ()
    admg: bool = True

    node_label = TimeGraph.node_label


def build_full_time_graph(params: VarParameters, window: tuple[int, int],
                          labels: Iterable[str] | None = None) -> TimeGraph:
    """Full time graph with an edge ``(j, t) -> (i, t + k)`` whenever ``A_k[i, j] != 0``."""
    t_min, t_max = int(window[0]), int(window[1])
    if t_max < t_min:
        raise ValueError("empty window")
    if labels is None:
        labels = params.layout.labels() if params.layout is not None else [f"S{i}" for i in range(params.d)]
    labels = tuple(labels)
    d = params.d
    nodes = [NodeId(i, t) for t in range(t_min, t_max + 1) for i in range(d)]
    directed = []
    for k in range(1, params.p + 1):
        rows, cols = np.nonzero(params.A(k))
        for t in range(t_min, t_max + 1 - k):
            directed.extend((NodeId(int(j), t), NodeId(int(i), t + k)) for i, j in zip(rows, cols))
    return TimeGraph(frozenset(nodes), frozenset(directed), frozenset(), labels=labels,
                     window=(t_min, t_max))


def marginalize(g: MixedGraph, M: Iterable) -> MarginalGraph:
    """Project ``g`` onto ``M``.

    ``i -> j`` iff a directed path from ``i`` to ``j`` has all interior nodes
    outside ``M``.  ``i <-> j`` iff some node ``U`` outside ``M`` has directed
    paths to both ``i`` and ``j`` with all interior nodes outside ``M``.  Shared
    interior nodes are allowed; this is equivalent to requiring disjoint paths,
    because the last node common to both paths can serve as ``U``.

    Bidirected edges already present in ``g`` are carried along: each is
    treated as an auxiliary latent parent of its two endpoints.
    """
    M = frozenset(M)
    missing = M - g.nodes
    if missing:
        raise ValueError(f"nodes not in graph: {sorted(map(repr, missing))[:5]}")

    children = {n: set(g.children(n)) for n in g.nodes}
    latent_sources = [n for n in g.nodes if n not in M]
    for k, (u, v) in enumerate(_sorted(g.bidirected)):
        aux = ("__latent__", k)
        children[aux] = {u, v}
        latent_sources.append(aux)

    def reach(start):
        """Nodes of M reachable from ``start`` through non-M interior nodes."""
        hit, seen = set(), set()
        stack = list(children[start])
        while stack:
            w = stack.pop()
            if w in seen:
                continue
            seen.add(w)
            if w in M:
                hit.add(w)
            else:
                stack.extend(children[w])
        return hit

    directed = {(i, j) for i in M for j in reach(i)}
    bidirected = set()
    for U in latent_sources:
        for i, j in combinations(_sorted(reach(U)), 2):
            bidirected.add(_pair(i, j))
    labels = getattr(g, "labels", ())
    return MarginalGraph(M, frozenset(directed), frozenset(bidirected), labels=labels)


def is_stabilized(params: VarParameters, M_relative: Iterable[tuple[str, int]], history: int = 30,
                  extra: int = 5) -> bool:
    """Check that projecting onto ``M`` is unchanged when ``extra`` steps of history are added.

    ``M_relative`` lists ``(label, t)`` pairs with ``t <= 0``; the window
    starts ``history`` steps before the earliest node in ``M``.
    """
    a = project_window(params, M_relative, history)
    b = project_window(params, M_relative, history + extra)
    return a.same_edges(b)


def project_window(params: VarParameters, M_relative: Iterable[tuple[str, int]],
                   history: int = 30) -> MarginalGraph:
    """Build a full time graph with ``history`` steps before ``M`` and project onto ``M``."""
    M_relative = list(M_relative)
    t_lo = min(t for _, t in M_relative) - history
    t_hi = max(t for _, t in M_relative)
    g = build_full_time_graph(params, (t_lo, t_hi))
    return marginalize(g, [g.node(name, t) for name, t in M_relative])


@dataclass(frozen=True)
class SeparationQuery:
    """Is ``A`` separated from ``C`` given ``B``, possibly after removing edges.

    ``removal`` is ``None``, ``"C1"`` (drop direct edges from ``x_tilde`` into
    ``y``) or ``"C1prime"`` (drop edges out of ``x_tilde`` that lie on a directed
    path to ``y``).
    """

    A: frozenset
    C: frozenset
    B: frozenset = frozenset()
    removal: str | None = None
    x_tilde: frozenset = frozenset()
    y: frozenset = frozenset()

    def __post_init__(self):
        for name in ("A", "C", "B", "x_tilde", "y"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.A & self.B or self.A & self.C or self.B & self.C:
            raise ValueError("query sets must be pairwise disjoint")
        if self.removal not in (None, "C1", "C1prime"):
            raise ValueError(f"unknown removal directive {self.removal!r}")


def remove_direct_edges(g: MixedGraph, x_tilde, y) -> MixedGraph:
    x_tilde, y = set(x_tilde), set(y)
    return g.without_directed((u, v) for u, v in g.directed if u in x_tilde and v in y)


def remove_effect_edges(g: MixedGraph, x_tilde, y) -> MixedGraph:
    """Drop edges ``x -> w`` with ``x`` in ``x_tilde`` and ``w`` an ancestor of ``y`` (or in ``y``)."""
    x_tilde = set(x_tilde)
    an_y = g.ancestors(y)
    return g.without_directed((u, v) for u, v in g.directed if u in x_tilde and v in an_y)


def _apply_removal(g, q):
    if q.removal == "C1":
        return remove_direct_edges(g, q.x_tilde, q.y)
    if q.removal == "C1prime":
        return remove_effect_edges(g, q.x_tilde, q.y)
    return g


def d_separated(g: MixedGraph, q: SeparationQuery) -> bool:
    """Exact d-/m-separation by reachability over (node, arrowhead-at-node) states.

    A node entered with an arrowhead and left through an arrowhead is a
    collider and passes iff it is in ``B`` or an ancestor of ``B``; any other
    node passes iff it is not in ``B``.
    """
    for S in (q.A, q.B, q.C):
        if not S <= g.nodes:
            raise ValueError("query sets must lie within the graph's nodes")
    g = _apply_removal(g, q)
    B = q.B
    an_B = g.ancestors(B)
    # (node, entered with arrowhead at node)
    stack = [(a, None) for a in q.A]
    seen = set()
    while stack:
        v, head_in = stack.pop()
        if (v, head_in) in seen:
            continue
        seen.add((v, head_in))
        if v in q.C:
            return False
        # edges leaving v, described by (neighbour, arrowhead at v, arrowhead at neighbour)
        moves = [(w, False, True) for w in g.children(v)]
        moves += [(w, True, False) for w in g.parents(v)]
        moves += [(w, True, True) for w in g.spouses(v)]
        for w, head_at_v, head_at_w in moves:
            if head_in is not None:
                collider = head_in and head_at_v
                if collider and v not in an_B:
                    continue
                if not collider and v in B:
                    continue
            stack.append((w, head_at_w))
    return True


def d_separated_bruteforce(g: MixedGraph, q: SeparationQuery) -> bool:
    """Separation by enumerating every simple path; exponential, for testing only."""
    g = _apply_removal(g, q)
    an_B = g.ancestors(q.B)
    adj = {n: [] for n in g.nodes}
    for u, v in g.directed:
        adj[u].append((v, False, True))
        adj[v].append((u, True, False))
    for u, v in g.bidirected:
        adj[u].append((v, True, True))
        adj[v].append((u, True, True))

    def open_path(path_heads):
        # path_heads[k] = (node, head at node from previous edge, head at node from next edge)
        for node, h_prev, h_next in path_heads:
            if h_prev and h_next:
                if node not in an_B:
                    return False
            elif node in q.B:
                return False
        return True

    def dfs(v, visited, inner, head_in):
        for w, head_at_v, head_at_w in adj[v]:
            if w in visited:
                continue
            step = inner + ([(v, head_in, head_at_v)] if head_in is not None else [])
            if w in q.C:
                if open_path(step):
                    return True
                continue
            visited.add(w)
            if dfs(w, visited, step, head_at_w):
                return True
            visited.discard(w)
        return False

    for a in q.A:
        if dfs(a, {a}, [], None):
            return False
    return True


@dataclass
class ConditionReport:
    c1: bool
    c2: bool
    variant: str

    @property
    def holds(self) -> bool:
        return self.c1 and self.c2

    def to_dict(self) -> dict:
        return {"variant": self.variant, "c1_or_c1prime": self.c1, "c2": self.c2}


def check_conditions(g: MixedGraph, I, x_tilde, B, Y, variant: str = "C1") -> ConditionReport:
    """Graphical conditions for instrument set ``I``, regressors ``x_tilde``, conditioning ``B``.

    The separation condition uses the graph with direct ``x_tilde -> Y`` edges
    removed (``"C1"``) or with every edge out of ``x_tilde`` on a directed path
    to ``Y`` removed (``"C1prime"``).  The second condition requires ``B`` to
    contain no descendant of ``x_tilde`` or ``Y``.  The rank condition is not
    graphical and is checked in :mod:`tsiv.identifiability`.
    """
    I, x_tilde, B = frozenset(I), frozenset(x_tilde), frozenset(B)
    Y = frozenset(Y) if isinstance(Y, (set, frozenset, list)) else frozenset([Y])
    sets = [I, x_tilde, B, Y]
    for a, b in combinations(sets, 2):
        if a & b:
            raise ValueError("I, x_tilde, B and Y must be disjoint")
    if variant not in ("C1", "C1prime"):
        raise ValueError(f"unknown variant {variant!r}")
    q = SeparationQuery(I, Y, B, removal=variant, x_tilde=x_tilde, y=Y)
    c1 = d_separated(g, q)
    c2 = not (B & g.descendants(x_tilde | Y))
    return ConditionReport(c1, c2, variant)
