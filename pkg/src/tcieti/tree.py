"""Hierarchically weighted spanning trees, belt edges and primal edge selection."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .mesh import DD, DI, DN, II, NI, NN, coarse_euler_constant


class InvariantViolation(RuntimeError):
    """An internal consistency check of the gauge construction failed."""


class UnionFind:
    """Disjoint sets with path compression and union by rank."""

    def __init__(self, n):
        self.parent = np.arange(n)
        self.rank = np.zeros(n, dtype=np.int64)

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        """Merge the sets of ``a`` and ``b``; False if they were already joined."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


@dataclass(frozen=True)
class GaugeTree:
    """Spanning tree on the control graph plus derived edge sets.

    All masks are boolean arrays over global edge ids.  ``primal`` is
    ``None`` until :func:`select_primal` has run.
    """

    in_tree: np.ndarray
    weights: np.ndarray
    belt_mask: np.ndarray
    primal: np.ndarray | None = None
    patch_primal: tuple | None = None
    order: np.ndarray | None = field(default=None, repr=False)

    @property
    def eliminated(self):
        """Tree and belt edges, both fixed to the gauge value 0."""
        return self.in_tree | self.belt_mask

    @property
    def n_belt(self):
        return int(self.belt_mask.sum())

    @property
    def n_gp(self):
        return 0 if self.primal is None else int(self.primal.sum())

    @property
    def n_p(self):
        return 0 if self.patch_primal is None else int(sum(len(p) for p in self.patch_primal))


def assign_weights(graph):
    """Kruskal weight 1..7 per edge following the wire-basket hierarchy."""
    if not graph.classified:
        raise InvariantViolation("graph edges are not classified")
    w = np.full(graph.n_edges, 7, dtype=np.int8)
    facet = graph.edge_D | graph.edge_N | graph.edge_I
    w[facet] = 6
    cls = graph.edge_wire_class
    for code, weight in ((DI, 1), (DN, 2), (NI, 3), (II, 4), (DD, 5), (NN, 5)):
        w[cls == code] = weight
    if np.any(graph.edge_on_wire & (cls < 0)):
        raise InvariantViolation("wire-basket edge without a class")
    return w


def kruskal_tree(graph, weights, tie_break=None):
    """Minimum spanning tree by Kruskal on (weight, tie key).

    The tie key is the global edge id, or a seeded random permutation of the
    ids when ``tie_break`` is an integer seed.
    """
    n = graph.n_edges
    if tie_break is None:
        key = np.arange(n)
    else:
        key = np.random.default_rng(tie_break).permutation(n)
    order = np.lexsort((key, weights))
    uf = UnionFind(graph.n_nodes)
    in_tree = np.zeros(n, dtype=bool)
    en = graph.edge_nodes
    count = 0
    for e in order:
        if uf.union(en[e, 0], en[e, 1]):
            in_tree[e] = True
            count += 1
    if count != graph.n_nodes - 1:
        roots = np.array([uf.find(v) for v in range(graph.n_nodes)])
        lonely = np.flatnonzero(roots != roots[0])
        raise InvariantViolation(
            f"control graph is disconnected; node {lonely[0]} is not reached from node 0")
    return GaugeTree(in_tree=in_tree, weights=np.asarray(weights), belt_mask=np.zeros(n, dtype=bool),
                     order=order)


def _components(n_nodes, edge_nodes, node_mask=None):
    a = coo_matrix((np.ones(len(edge_nodes)), (edge_nodes[:, 0], edge_nodes[:, 1])),
                   shape=(n_nodes, n_nodes)).tocsr()
    a = a + a.T
    if node_mask is not None:
        a = a[node_mask][:, node_mask]
    if a.shape[0] == 0:
        return 0, np.zeros(0, dtype=np.int64)
    return connected_components(a, directed=False)


def _forest_ok(n_nodes, edge_nodes, node_mask, forest_mask, all_mask):
    """Forest edges are acyclic and span every component of the subgraph."""
    k_all, _ = _components(n_nodes, edge_nodes[all_mask], node_mask)
    k_for, _ = _components(n_nodes, edge_nodes[forest_mask], node_mask)
    n_sub = int(node_mask.sum())
    return k_for == k_all and int(forest_mask.sum()) == n_sub - k_all


@dataclass
class HierarchyReport:
    wire_spanning: bool
    dirichlet_spanning: bool
    acyclic: bool

    @property
    def ok(self):
        return self.wire_spanning and self.dirichlet_spanning and self.acyclic

    def as_dict(self):
        return {"wire_spanning": self.wire_spanning,
                "dirichlet_spanning": self.dirichlet_spanning,
                "acyclic": self.acyclic}


def validate_hierarchy(tree, graph):
    """Check that the tree restricts to spanning forests of the wire basket and of Dirichlet."""
    en = graph.edge_nodes
    t = tree.in_tree
    wire = graph.edge_on_wire
    wire_nodes = graph.node_on_wire
    k_wire, _ = _components(graph.n_nodes, en[wire], wire_nodes)
    wire_ok = k_wire <= 1 and _forest_ok(graph.n_nodes, en, wire_nodes, t & wire, wire)
    dir_ok = _forest_ok(graph.n_nodes, en, graph.node_D, t & graph.edge_D, graph.edge_D)
    k_tree, _ = _components(graph.n_nodes, en[t])
    acyclic = int(t.sum()) == graph.n_nodes - k_tree
    return HierarchyReport(bool(wire_ok), bool(dir_ok), bool(acyclic))


def cotree_wire_count(tree, graph, dec):
    """Count wire-basket cotree edges and compare with the Euler-based formula."""
    counted = int((graph.edge_on_wire & ~tree.in_tree).sum())
    expected = dec.n_faces - dec.n_cells - coarse_euler_constant(dec) + 1
    if counted != expected:
        raise InvariantViolation(f"wire cotree count {counted} differs from formula value {expected}")
    return counted


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _tree_potential(graph, mask):
    """Unwrapped polar angle along the forest given by ``mask`` (BFS from each root)."""
    theta = np.arctan2(graph.node_coords[:, 1], graph.node_coords[:, 0])
    nbrs = [[] for _ in range(graph.n_nodes)]
    for a, b in graph.edge_nodes[mask]:
        nbrs[a].append(b)
        nbrs[b].append(a)
    pot = np.full(graph.n_nodes, np.nan)
    for root in range(graph.n_nodes):
        if not np.isnan(pot[root]):
            continue
        pot[root] = theta[root]
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in nbrs[u]:
                if np.isnan(pot[v]):
                    pot[v] = pot[u] + _wrap(theta[v] - theta[u])
                    queue.append(v)
    return theta, pot


def winding_numbers(graph, tree_mask, edges):
    """Winding about the z-axis of the fundamental cycle of each given edge."""
    theta, pot = _tree_potential(graph, tree_mask)
    a, b = graph.edge_nodes[edges, 0], graph.edge_nodes[edges, 1]
    turn = pot[a] + _wrap(theta[b] - theta[a]) - pot[b]
    return np.rint(turn / (2 * np.pi)).astype(int)


def add_belt_edge(tree, graph, dec):
    """Add one loop-closing cotree edge per hole unless Dirichlet data already closes it.

    Candidates are wire-basket cotree edges whose fundamental cycle winds
    around the z-axis, in ascending id.  A candidate that leaves every
    subdomain's eliminated graph connected is preferred.
    """
    n_holes = 1 - coarse_euler_constant(dec)
    if n_holes <= 0:
        return tree
    if n_holes > 1:
        raise InvariantViolation("belt edges are only supported for a single hole")
    t = tree.eliminated
    # a Dirichlet cycle around the hole already removes the harmonic field
    d_cot = np.flatnonzero(graph.edge_D & ~t)
    if len(d_cot):
        _, comp = _components(graph.n_nodes, graph.edge_nodes[t & graph.edge_D])
        en = graph.edge_nodes[d_cot]
        same = comp[en[:, 0]] == comp[en[:, 1]]
        if np.any(winding_numbers(graph, t, d_cot[same]) != 0):
            return tree
    cand = np.flatnonzero(graph.edge_on_wire & ~t)
    cand = cand[winding_numbers(graph, t, cand) != 0]
    if len(cand) == 0:
        raise InvariantViolation("no loop-closing cotree edge found")
    chosen = cand[0]
    for e in cand:
        belt = np.zeros(graph.n_edges, dtype=bool)
        belt[e] = True
        trial = select_primal(replace(tree, belt_mask=belt), graph)
        if all(eliminated_graph_connected(i, trial, graph) for i in range(graph.n_patches)):
            chosen = e
            break
    belt = tree.belt_mask.copy()
    belt[chosen] = True
    return replace(tree, belt_mask=belt, primal=None, patch_primal=None)


def select_primal(tree, graph, force_empty=False):
    """Primal edges: cross-edges and Neumann-interface wire edges outside the tree."""
    cls = graph.edge_wire_class
    primal = ((cls == II) | (cls == NI)) & ~tree.eliminated
    if force_empty:
        primal[:] = False
    patch_primal = tuple(np.flatnonzero(primal[pe]) for pe in graph.patch_edges)
    return replace(tree, primal=primal, patch_primal=patch_primal)


def local_eliminated_mask(i, tree, graph):
    """Local edges of patch ``i`` that are Dirichlet, tree, belt or primal."""
    pe = graph.patch_edges[i]
    mask = graph.edge_D | tree.eliminated
    if tree.primal is not None:
        mask = mask | tree.primal
    return mask[pe]


def eliminated_graph_connected(i, tree, graph, dirichlet=None):
    """True iff the eliminated local edges connect all nodes of patch ``i``."""
    pe, pn = graph.patch_edges[i], graph.patch_nodes[i]
    mask = local_eliminated_mask(i, tree, graph)
    if dirichlet is not None:
        mask = mask | np.asarray(dirichlet)[pe]
    # relabel to local node ids
    lookup = {int(g): l for l, g in enumerate(pn)}
    en = graph.edge_nodes[pe[mask]]
    loc = np.array([[lookup[int(a)], lookup[int(b)]] for a, b in en], dtype=np.int64).reshape(-1, 2)
    k, _ = _components(len(pn), loc)
    return k == 1


def build_gauge(graph, dec, belt=True, tie_break=None, force_empty_primal=False):
    """Weights, Kruskal tree, optional belt edge and primal selection in one call."""
    w = assign_weights(graph)
    tree = kruskal_tree(graph, w, tie_break=tie_break)
    if belt:
        tree = add_belt_edge(tree, graph, dec)
    return select_primal(tree, graph, force_empty=force_empty_primal)
