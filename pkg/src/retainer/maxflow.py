"""Dinic's maximum flow on real-valued capacities."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

__all__ = ["NetworkError", "FlowResult", "max_flow"]

EPS = 1e-12


class NetworkError(ValueError):
    """Malformed flow network."""


@dataclass
class FlowResult:
    value: float
    flows: list[float]
    source_side: set[int]


def max_flow(n_nodes: int, edges: Sequence[tuple[int, int, float]], source: int, sink: int) -> FlowResult:
    """Maximum ``source``-``sink`` flow.

    ``edges`` is a list of ``(u, v, capacity)``; ``flows[i]`` in the result is
    the flow on ``edges[i]``.  Residual capacities below ``1e-12`` (relative
    to the largest capacity) count as saturated.  ``source_side`` is the set
    of nodes reachable from the source in the final residual graph, i.e. the
    source side of a minimum cut.  The result depends only on the input order.
    """
    if n_nodes < 2:
        raise NetworkError("need at least two nodes")
    if not (0 <= source < n_nodes and 0 <= sink < n_nodes) or source == sink:
        raise NetworkError("source and sink must be distinct nodes")
    # arc arrays: arc 2i is edge i, arc 2i+1 its reverse
    head, cap, adj = [], [], [[] for _ in range(n_nodes)]
    biggest = 0.0
    for u, v, c in edges:
        if not (0 <= u < n_nodes and 0 <= v < n_nodes):
            raise NetworkError(f"edge ({u}, {v}) references a missing node")
        if not c >= 0 or math.isnan(c):
            raise NetworkError(f"edge ({u}, {v}) has invalid capacity {c}")
        if math.isinf(c):
            raise NetworkError("capacities must be finite")
        adj[u].append(len(head))
        head.append(v)
        cap.append(float(c))
        adj[v].append(len(head))
        head.append(u)
        cap.append(0.0)
        biggest = max(biggest, c)
    tol = EPS * max(1.0, biggest)

    def bfs():
        level = [-1] * n_nodes
        level[source] = 0
        q = deque([source])
        while q:
            u = q.popleft()
            for a in adj[u]:
                v = head[a]
                if level[v] < 0 and cap[a] > tol:
                    level[v] = level[u] + 1
                    q.append(v)
        return level

    total = 0.0
    while True:
        level = bfs()
        if level[sink] < 0:
            break
        it = [0] * n_nodes
        while True:
            # iterative DFS for one augmenting path in the level graph
            path = []
            u = source
            while u != sink:
                arcs = adj[u]
                while it[u] < len(arcs):
                    a = arcs[it[u]]
                    v = head[a]
                    if cap[a] > tol and level[v] == level[u] + 1:
                        break
                    it[u] += 1
                if it[u] == len(arcs):
                    if not path:
                        break
                    level[u] = -1  # dead end
                    a = path.pop()
                    u = head[a ^ 1]
                    it[u] += 1
                    continue
                a = arcs[it[u]]
                path.append(a)
                u = head[a]
            if u != sink:
                break
            push = min(cap[a] for a in path)
            for a in path:
                cap[a] -= push
                cap[a ^ 1] += push
            total += push

    level = bfs()
    side = {v for v in range(n_nodes) if level[v] >= 0}
    flows = [cap[2 * i + 1] for i in range(len(edges))]
    return FlowResult(total, flows, side)
