"""Exact s-t max-flow / min-cut on small directed networks.

Augmenting-path solver that maintains two search trees rooted at the source
and the sink and reuses them between augmentations (grow / augment / adopt
phases).  Everything is deterministic: arcs are scanned in insertion order
and the active queue is FIFO, so identical networks always produce identical
flows and cuts.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

_FREE, _SRC, _SNK = 0, 1, 2


class FlowNetwork:
    """Directed capacitated graph stored as paired residual arcs.

    Arc ``e`` and its reverse ``e ^ 1`` are allocated together, so residual
    updates are index arithmetic.
    """

    def __init__(self, num_nodes: int):
        if num_nodes < 2:
            raise ValueError("a flow network needs at least two nodes")
        self.num_nodes = num_nodes
        self.arc_to = []      # head node of each arc
        self.arc_cap = []     # residual capacity, mutated by the solver
        self.arc_cap0 = []    # original capacity, kept for cut bookkeeping
        self.adj = [[] for _ in range(num_nodes)]

    def add_edge(self, u: int, v: int, cap: float, rev_cap: float = 0.0):
        if u == v:
            raise ValueError("self loops are not allowed")
        if cap < 0 or rev_cap < 0 or not np.isfinite(cap) or not np.isfinite(rev_cap):
            raise ValueError("capacities must be finite and >= 0")
        e = len(self.arc_to)
        self.arc_to.extend((v, u))
        self.arc_cap.extend((float(cap), float(rev_cap)))
        self.arc_cap0.extend((float(cap), float(rev_cap)))
        self.adj[u].append(e)
        self.adj[v].append(e + 1)
        return e

    def cut_capacity(self, source_side) -> float:
        """Total original capacity of arcs leaving the given node set."""
        inside = np.zeros(self.num_nodes, dtype=bool)
        inside[list(source_side)] = True
        total = 0.0
        for e in range(0, len(self.arc_to), 2):
            u = self.arc_to[e + 1]
            v = self.arc_to[e]
            if inside[u] and not inside[v]:
                total += self.arc_cap0[e]
            if inside[v] and not inside[u]:
                total += self.arc_cap0[e + 1]
        return total


@dataclass(frozen=True)
class MaxFlowResult:
    flow: float
    source_side: tuple
    sink_side: tuple


def max_flow(net: FlowNetwork, source: int, sink: int) -> MaxFlowResult:
    """Maximum flow from ``source`` to ``sink`` plus the induced minimum cut.

    The returned source side is the set of nodes reachable from the source
    in the final residual network, which makes the cut canonical.
    """
    if source == sink:
        raise ValueError("source and sink must differ")
    n = net.num_nodes
    arc_to = net.arc_to
    cap = net.arc_cap
    adj = net.adj

    tree = [_FREE] * n
    parent_arc = [-1] * n      # arc carrying residual toward this node's tree
    tree[source] = _SRC
    tree[sink] = _SNK
    active = deque((source, sink))
    in_active = [False] * n
    in_active[source] = in_active[sink] = True
    orphans = deque()
    flow = 0.0

    def tree_residual(node_tree: int, e: int) -> float:
        # Residual available for growing `node_tree` across adjacency arc e
        # (e points away from the tree node being scanned).
        return cap[e] if node_tree == _SRC else cap[e ^ 1]

    def has_root(v: int) -> bool:
        # Walk parents; a valid chain ends at a terminal.
        while True:
            if v == source or v == sink:
                return True
            e = parent_arc[v]
            if e < 0:
                return False
            v = arc_to[e ^ 1] if tree[v] == _SRC else arc_to[e]

    def grow():
        # Returns the bridging arc (src-tree tail -> snk-tree head) or -1.
        while active:
            p = active[0]
            if tree[p] == _FREE:
                active.popleft()
                in_active[p] = False
                continue
            tp = tree[p]
            for e in adj[p]:
                if tree_residual(tp, e) <= 0.0:
                    continue
                q = arc_to[e]
                if tree[q] == _FREE:
                    tree[q] = tp
                    # For the source tree the parent arc enters q; for the
                    # sink tree it leaves q toward the sink.
                    parent_arc[q] = e if tp == _SRC else (e ^ 1)
                    if not in_active[q]:
                        active.append(q)
                        in_active[q] = True
                elif tree[q] != tp:
                    return e if tp == _SRC else (e ^ 1)
            active.popleft()
            in_active[p] = False
        return -1

    def augment(bridge: int):
        nonlocal flow
        # Bottleneck over source-tree path, bridge, sink-tree path.
        bottleneck = cap[bridge]
        v = arc_to[bridge ^ 1]
        while v != source:
            e = parent_arc[v]
            if cap[e] < bottleneck:
                bottleneck = cap[e]
            v = arc_to[e ^ 1]
        v = arc_to[bridge]
        while v != sink:
            e = parent_arc[v]
            if cap[e] < bottleneck:
                bottleneck = cap[e]
            v = arc_to[e]
        # Push the flow and orphan children of saturated arcs.
        cap[bridge] -= bottleneck
        cap[bridge ^ 1] += bottleneck
        v = arc_to[bridge ^ 1]
        while v != source:
            e = parent_arc[v]
            cap[e] -= bottleneck
            cap[e ^ 1] += bottleneck
            if cap[e] <= 0.0:
                parent_arc[v] = -1
                orphans.append(v)
            v = arc_to[e ^ 1]
        v = arc_to[bridge]
        while v != sink:
            e = parent_arc[v]
            cap[e] -= bottleneck
            cap[e ^ 1] += bottleneck
            if cap[e] <= 0.0:
                parent_arc[v] = -1
                orphans.append(v)
            v = arc_to[e]
        flow += bottleneck

    def adopt():
        while orphans:
            v = orphans.popleft()
            tv = tree[v]
            found = -1
            for e in adj[v]:
                q = arc_to[e]
                if tree[q] != tv:
                    continue
                # Need residual from q toward v for the source tree, from v
                # toward q for the sink tree.
                res = cap[e ^ 1] if tv == _SRC else cap[e]
                if res <= 0.0:
                    continue
                if has_root(q):
                    found = (e ^ 1) if tv == _SRC else e
                    break
            if found >= 0:
                parent_arc[v] = found
                continue
            # No parent: v leaves the tree, neighbors get reactivated and
            # children become orphans themselves.
            for e in adj[v]:
                q = arc_to[e]
                if tree[q] != tv:
                    continue
                res = cap[e ^ 1] if tv == _SRC else cap[e]
                if res > 0.0 and not in_active[q]:
                    active.append(q)
                    in_active[q] = True
                pe = parent_arc[q]
                if pe >= 0:
                    pnode = arc_to[pe ^ 1] if tv == _SRC else arc_to[pe]
                    if pnode == v:
                        parent_arc[q] = -1
                        orphans.append(q)
            tree[v] = _FREE
            parent_arc[v] = -1

    while True:
        bridge = grow()
        if bridge < 0:
            break
        augment(bridge)
        adopt()

    src_side = tuple(v for v in range(n) if tree[v] == _SRC)
    snk_side = tuple(v for v in range(n) if tree[v] != _SRC)
    return MaxFlowResult(flow=flow, source_side=src_side, sink_side=snk_side)
