"""Combinatorial toolbox: max-flow/min-cut, spanning connectors, Eulerian walks, shortcutting.

All functions are pure and exact (rational capacities and costs).
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import InputError, InvariantViolation, StructureError
from .model import Edge, EdgeVector, MetricInstance, Multigraph, edge


def max_flow_min_cut(capacities: EdgeVector, n: int, sources: Iterable[int],
                     sinks: Iterable[int]) -> tuple[Fraction, frozenset[int]]:
    """Minimum capacity cut separating the sources from the sinks.

    Undirected capacities; terminal groups are contracted and a
    breadth-first augmenting-path flow is run.  Returns the exact flow
    value and the inclusion-minimal source side (residual reachability),
    expanded back to original vertices.  Strong duality (flow value equals
    the returned cut's capacity) is asserted on every call.
    """
    S = frozenset(sources)
    T = frozenset(sinks)
    if not S or not T:
        raise InputError("source and sink sets must be nonempty")
    if S & T:
        raise InputError(f"source and sink sets overlap: {sorted(S & T)}")

    # contract terminal groups into nodes 0 (sources) and 1 (sinks)
    node_of = {}
    nxt = 2
    for v in range(n):
        if v in S:
            node_of[v] = 0
        elif v in T:
            node_of[v] = 1
        else:
            node_of[v] = nxt
            nxt += 1
    nn = nxt

    cap: dict[tuple[int, int], Fraction] = {}
    for (u, v), c in capacities.items():
        if c < 0:
            raise InputError(f"negative capacity on edge {(u, v)}")
        a, b = node_of[u], node_of[v]
        if a == b or c == 0:
            continue
        cap[(a, b)] = cap.get((a, b), Fraction(0)) + c
        cap[(b, a)] = cap.get((b, a), Fraction(0)) + c
    adj: dict[int, list[int]] = {v: [] for v in range(nn)}
    for (a, b) in cap:
        adj[a].append(b)
    for v in adj:
        adj[v] = sorted(set(adj[v]))

    flow = Fraction(0)
    while True:
        # BFS for a shortest augmenting path 0 -> 1
        pred = {0: -1}
        queue = deque([0])
        while queue and 1 not in pred:
            a = queue.popleft()
            for b in adj[a]:
                if b not in pred and cap.get((a, b), 0) > 0:
                    pred[b] = a
                    queue.append(b)
        if 1 not in pred:
            break
        # bottleneck
        b = 1
        bottleneck = None
        while pred[b] != -1:
            a = pred[b]
            c = cap[(a, b)]
            bottleneck = c if bottleneck is None or c < bottleneck else bottleneck
            b = a
        b = 1
        while pred[b] != -1:
            a = pred[b]
            cap[(a, b)] -= bottleneck
            cap[(b, a)] = cap.get((b, a), Fraction(0)) + bottleneck
            b = a
        flow += bottleneck

    reach = {0}
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for b in adj[a]:
            if b not in reach and cap.get((a, b), 0) > 0:
                reach.add(b)
                queue.append(b)
    cut_side = frozenset(v for v in range(n) if node_of[v] in reach)

    check = sum(c for (u, v), c in capacities.items()
                if (u in cut_side) != (v in cut_side))
    if check != flow:
        raise InvariantViolation(
            f"max-flow/min-cut mismatch: flow {flow}, cut capacity {check}")
    return flow, cut_side


def connected_components(g: Multigraph) -> list[list[int]]:
    """Components as sorted vertex lists, ordered by smallest representative."""
    return g.components()


def min_spanning_connector(components: Sequence[Iterable[int]],
                           candidates: Sequence[tuple[Edge, Fraction]]) -> set[Edge]:
    """Cheapest candidate subset connecting the given components (contracted MST).

    Kruskal on the contracted component graph; exact by the matroid
    exchange argument.  Raises if the candidates cannot connect everything.
    """
    comp_of = {}
    for ci, comp in enumerate(components):
        for v in comp:
            comp_of[v] = ci
    k = len(components)
    if k <= 1:
        return set()
    parent = list(range(k))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    chosen: set[Edge] = set()
    merged = 1
    for e, cost in sorted(candidates, key=lambda item: (item[1], item[0])):
        a, b = comp_of[e[0]], comp_of[e[1]]
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
            chosen.add(e)
            merged += 1
            if merged == k:
                return chosen
    raise InvariantViolation(
        "candidate edges cannot connect the components")


def eulerian_st_walk(g: Multigraph, s: int, t: int) -> list[int]:
    """An Eulerian walk from s to t using every multigraph edge exactly once.

    Requires odd degrees exactly at {s, t} and a connected edge-support
    (isolated vertices other than s, t are not traversable).  Iterative
    Hierholzer with deterministic neighbor order.
    """
    if s == t:
        raise InputError("endpoints must be distinct")
    odd = g.odd_vertices()
    if odd != {s, t}:
        bad = sorted(odd.symmetric_difference({s, t}))
        raise StructureError(
            f"vertex {bad[0]} has the wrong degree parity for an s-t walk")
    comps = g.components()
    active = [c for c in comps if len(c) > 1 or c[0] in (s, t)]
    if len(active) != 1:
        offending = next(c for c in active if s not in c)
        raise StructureError(
            f"edge support is disconnected; separate component {offending}")

    # incidence with edge ids so parallel edges are traversed individually
    adj: dict[int, list[tuple[int, int]]] = {v: [] for v in range(g.n)}
    eid = 0
    for e in g.iter_edges():
        adj[e[0]].append((e[1], eid))
        adj[e[1]].append((e[0], eid))
        eid += 1
    for v in adj:
        adj[v].sort()
    used = [False] * eid
    ptr = {v: 0 for v in range(g.n)}

    stack = [s]
    out: list[int] = []
    while stack:
        v = stack[-1]
        lst = adj[v]
        i = ptr[v]
        while i < len(lst) and used[lst[i][1]]:
            i += 1
        ptr[v] = i
        if i == len(lst):
            out.append(stack.pop())
        else:
            w, e_id = lst[i]
            used[e_id] = True
            stack.append(w)
    walk = out[::-1]
    if walk[0] != s:
        walk.reverse()
    if walk[0] != s or walk[-1] != t or len(walk) != g.num_edges() + 1:
        raise InvariantViolation("Hierholzer produced an invalid s-t walk")
    return walk


def shortcut(walk: Sequence[int], inst: MetricInstance) -> tuple[list[int], Fraction]:
    """Shortcut a spanning s-t walk to a Hamiltonian s-t path.

    Keeps the first occurrence of every internal vertex, in walk order,
    with t moved to the end.  By the triangle inequality the result costs
    no more than the walk.
    """
    s, t = inst.s, inst.t
    if not walk or walk[0] != s or walk[-1] != t:
        raise StructureError(f"walk must start at {s} and end at {t}")
    missing = set(inst.vertices()).difference(walk)
    if missing:
        raise StructureError(f"walk does not cover vertices {sorted(missing)}")
    path = [s]
    seen = {s, t}
    for v in walk[1:]:
        if v not in seen:
            path.append(v)
            seen.add(v)
    path.append(t)
    return path, inst.path_cost(path)
