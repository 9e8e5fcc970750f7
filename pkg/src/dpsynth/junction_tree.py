"""Junction-tree construction over selected cliques.

Min-fill elimination with deterministic tie-breaking (lowest column index),
maximal-clique extraction, then a maximum-spanning-tree join on separator
size.  Disconnected components are attached with empty separators, which
preserves the running-intersection property because distinct components share
no attribute.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .dataset import Clique, clique_cells, make_clique
from .domain import Domain


@dataclass(frozen=True)
class JunctionTree:
    nodes: tuple[Clique, ...]
    edges: tuple[tuple[int, int, Clique], ...]
    elimination_order: tuple[int, ...]

    def node_containing(self, clique: Sequence[int]) -> int | None:
        want = set(clique)
        for i, node in enumerate(self.nodes):
            if want <= set(node):
                return i
        return None


def build_junction_tree(domain: Domain, cliques: Sequence[Sequence[int]]) -> JunctionTree:
    d = len(domain)
    cliques = [make_clique(c, domain) for c in cliques]
    adj: dict[int, set[int]] = {v: set() for v in range(d)}
    for cl in cliques:
        for a in cl:
            adj[a].update(x for x in cl if x != a)

    # Min-fill elimination, triangulating as we go.
    remaining = set(range(d))
    order: list[int] = []
    elim_cliques: list[frozenset[int]] = []
    while remaining:
        best, best_fill = None, None
        for v in sorted(remaining):
            nbrs = adj[v] & remaining
            nbrs_list = sorted(nbrs)
            fill = 0
            for i, a in enumerate(nbrs_list):
                for b in nbrs_list[i + 1 :]:
                    if b not in adj[a]:
                        fill += 1
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
        nbrs = adj[best] & remaining
        elim_cliques.append(frozenset({best} | nbrs))
        nbrs_list = sorted(nbrs)
        for i, a in enumerate(nbrs_list):
            for b in nbrs_list[i + 1 :]:
                adj[a].add(b)
                adj[b].add(a)
        remaining.discard(best)
        order.append(best)

    # Keep only maximal cliques, in deterministic order.
    maximal: list[frozenset[int]] = []
    for c in sorted(elim_cliques, key=lambda s: (-len(s), sorted(s))):
        if not any(c <= m for m in maximal):
            maximal.append(c)
    nodes = sorted(tuple(sorted(c)) for c in maximal)

    # Maximum spanning tree on separator size (Kruskal, deterministic ties).
    n = len(nodes)
    cand = []
    for i in range(n):
        for j in range(i + 1, n):
            w = len(set(nodes[i]) & set(nodes[j]))
            cand.append((-w, i, j))
    cand.sort()
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges: list[tuple[int, int, Clique]] = []
    for negw, i, j in cand:
        if negw == 0:
            continue
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            edges.append((i, j, tuple(sorted(set(nodes[i]) & set(nodes[j])))))
    # Join remaining components with empty separators.
    for i in range(1, n):
        ri, r0 = find(i), find(0)
        if ri != r0:
            parent[ri] = r0
            edges.append((0, i, ()))

    return JunctionTree(
        nodes=tuple(nodes), edges=tuple(edges), elimination_order=tuple(order)
    )


def estimate_model_size(domain: Domain, cliques: Sequence[Sequence[int]]) -> int:
    """Bytes of the potential tensors on the tree these cliques would induce."""
    tree = build_junction_tree(domain, cliques)
    return 8 * sum(clique_cells(domain, node) for node in tree.nodes)
