import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import minimum_spanning_tree

from tcieti.mesh import II, NI, BoundaryConfig, build_cube_decomposition, build_grid_decomposition, build_torus_decomposition
from tcieti.tree import (InvariantViolation, UnionFind, add_belt_edge, assign_weights, build_gauge,
                         cotree_wire_count, eliminated_graph_connected, kruskal_tree, select_primal,
                         validate_hierarchy, winding_numbers)

MIXED = BoundaryConfig.layout("cube-mixed")
NEUMANN = BoundaryConfig.layout("all-neumann")


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.lists(st.tuples(st.integers(0, 29), st.integers(0, 29)), max_size=60))
def test_union_find_matches_components(n, pairs):
    uf = UnionFind(n)
    label = list(range(n))
    for a, b in pairs:
        a, b = a % n, b % n
        joined = uf.union(a, b)
        assert joined == (label[a] != label[b])
        old, new = label[b], label[a]
        label = [new if l == old else l for l in label]
    for a in range(n):
        root = uf.find(a)
        assert uf.find(root) == root
        for b in range(n):
            assert (uf.find(b) == root) == (label[a] == label[b])


class _PathGraph:
    n_nodes = 3
    n_edges = 2
    edge_nodes = np.array([[0, 1], [1, 2]])


def test_path_graph_tree():
    t = kruskal_tree(_PathGraph(), np.array([7, 7]))
    assert t.in_tree.all()


def test_disconnected_graph_reports_component():
    class G(_PathGraph):
        n_nodes = 4
    with pytest.raises(InvariantViolation, match="node 3"):
        kruskal_tree(G(), np.array([7, 7]))


def test_weight_examples():
    dec, g = build_cube_decomposition(2, 3, MIXED)
    w = assign_weights(g)
    assert set(np.unique(w[~g.edge_on_facet])) == {7}
    assert np.all(w[g.edge_wire_class == II] == 4)
    d_face = g.edge_D & ~g.edge_on_wire
    assert d_face.any() and np.all(w[d_face] == 6)
    assert np.all(w[g.edge_on_wire] <= 5) and np.all(w[~g.edge_on_wire] >= 6)


@pytest.mark.parametrize("seed", [None, 3])
def test_kruskal_matches_scipy_mst(seed):
    _, g = build_grid_decomposition((2, 2, 1), 2, MIXED)
    w = assign_weights(g)
    t = kruskal_tree(g, w, tie_break=seed)
    key = np.arange(g.n_edges) if seed is None else np.random.default_rng(seed).permutation(g.n_edges)
    # unique weights make the minimum spanning tree unique
    unique_w = w.astype(float) * (g.n_edges + 1) + key + 1
    a = coo_matrix((unique_w, (g.edge_nodes[:, 0], g.edge_nodes[:, 1])), shape=(g.n_nodes,) * 2)
    mst = minimum_spanning_tree(a.tocsr()).tocoo()
    expected = {(min(r, c), max(r, c)) for r, c in zip(mst.row, mst.col)}
    got = {tuple(e) for e in g.edge_nodes[t.in_tree]}
    assert got == expected


def test_kruskal_deterministic():
    _, g = build_cube_decomposition(2, 2, MIXED)
    w = assign_weights(g)
    assert np.array_equal(kruskal_tree(g, w).in_tree, kruskal_tree(g, w).in_tree)


def test_single_patch_counts():
    dec, g = build_cube_decomposition(1, 1, NEUMANN)
    t = build_gauge(g, dec)
    assert t.in_tree.sum() == 7
    assert cotree_wire_count(t, g, dec) == 5
    assert t.n_gp == 0


@pytest.mark.parametrize("s_h", [1, 2, 4])
def test_cube_cotree_count(s_h):
    dec, g = build_cube_decomposition(2, s_h, MIXED)
    t = build_gauge(g, dec)
    assert cotree_wire_count(t, g, dec) == 28
    assert validate_hierarchy(t, g).ok


def test_torus_cotree_formula():
    dec, g = build_torus_decomposition(3, 2, BoundaryConfig.layout("torus-mixed"))
    # brute-force count of coarse faces: 3 radial-angular interfaces + 4 exterior faces per patch
    assert dec.n_faces == 3 + 3 * 4
    t = build_gauge(g, dec)
    assert cotree_wire_count(t, g, dec) == dec.n_faces - dec.n_cells - 0 + 1 == 13


def test_cotree_mismatch_raises():
    dec, g = build_cube_decomposition(2, 1, MIXED)
    t = build_gauge(g, dec)
    t.in_tree[np.flatnonzero(t.in_tree & g.edge_on_wire)[0]] = False
    with pytest.raises(InvariantViolation):
        cotree_wire_count(t, g, dec)


def test_uniform_weights_break_dirichlet_spanning():
    _, g = build_grid_decomposition((2, 1, 1), 1, MIXED)
    t = kruskal_tree(g, np.ones(g.n_edges, dtype=int))
    rep = validate_hierarchy(t, g)
    assert rep.acyclic and not rep.dirichlet_spanning
    assert validate_hierarchy(kruskal_tree(g, assign_weights(g)), g).ok


def test_all_dirichlet_single_patch_forest():
    dec, g = build_cube_decomposition(1, 1, BoundaryConfig.uniform("D"))
    t = build_gauge(g, dec)
    assert validate_hierarchy(t, g).dirichlet_spanning
    assert (t.in_tree & g.edge_D).sum() == 7


def test_belt_edge_full_neumann_torus():
    dec, g = build_torus_decomposition(3, 2, BoundaryConfig.layout("torus-neumann"))
    base = kruskal_tree(g, assign_weights(g))
    t = add_belt_edge(base, g, dec)
    assert t.n_belt == 1
    e = np.flatnonzero(t.belt_mask)
    assert not base.in_tree[e].any()
    assert abs(winding_numbers(g, base.in_tree, e)[0]) == 1


def test_belt_noop_cases():
    dec, g = build_cube_decomposition(2, 1, NEUMANN)
    assert build_gauge(g, dec).n_belt == 0
    dec, g = build_torus_decomposition(3, 2, BoundaryConfig.layout("torus-mixed"))
    assert build_gauge(g, dec).n_belt == 0


@settings(max_examples=6, deadline=None)
@given(st.sampled_from([1, 2, 3, 4]))
def test_cotree_independent_of_mesh_size(s_h):
    dec, g = build_cube_decomposition(3, s_h, MIXED)
    assert cotree_wire_count(build_gauge(g, dec), g, dec) == 2 * 27 + 3 * 9


def test_primal_rule_and_cross_edges():
    dec, g = build_cube_decomposition(2, 2, MIXED)
    t = build_gauge(g, dec)
    cls = g.edge_wire_class
    assert np.array_equal(t.primal, ((cls == II) | (cls == NI)) & ~t.eliminated)
    assert np.all((t.in_tree | t.primal)[cls == II])
    assert t.n_gp <= 28
    assert t.n_p == sum(len(p) for p in t.patch_primal)
    n_gp = {build_gauge(*reversed(build_cube_decomposition(2, s, MIXED))).n_gp for s in (1, 2, 3)}
    assert n_gp == {t.n_gp}


def test_two_patch_primal_on_shared_perimeter():
    dec, g = build_grid_decomposition((2, 1, 1), 2, MIXED)
    t = build_gauge(g, dec)
    shared_perimeter = (g.edge_wire_class == NI)
    assert np.all(shared_perimeter[t.primal])
    assert t.n_gp == int((shared_perimeter & ~t.in_tree).sum())


def test_single_patch_no_primal():
    dec, g = build_cube_decomposition(1, 3, MIXED)
    assert build_gauge(g, dec).n_gp == 0


def test_eliminated_graph_full_pipeline():
    for dec, g in (build_cube_decomposition(2, 2, MIXED),
                   build_torus_decomposition(3, 2, BoundaryConfig.layout("torus-mixed"))):
        t = build_gauge(g, dec)
        assert all(eliminated_graph_connected(i, t, g) for i in range(g.n_patches))


def test_flat_layout_without_primal_disconnects_middle():
    dec, g = build_grid_decomposition((3, 3, 1), 2, MIXED)
    t = build_gauge(g, dec, force_empty_primal=True)
    assert not eliminated_graph_connected(4, t, g)
    assert all(eliminated_graph_connected(i, build_gauge(g, dec), g) for i in range(9))


def test_torus_without_belt_disconnects_one_subdomain():
    dec, g = build_torus_decomposition(3, 2, BoundaryConfig.layout("torus-neumann"))
    t = build_gauge(g, dec, belt=False)
    flags = [eliminated_graph_connected(i, t, g) for i in range(3)]
    assert flags.count(False) == 1
    t = build_gauge(g, dec, belt=True)
    assert all(eliminated_graph_connected(i, t, g) for i in range(3))


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_random_ties_keep_hierarchy(seed):
    dec, g = build_grid_decomposition((2, 2, 1), 2, MIXED)
    t = build_gauge(g, dec, tie_break=seed)
    assert validate_hierarchy(t, g).ok
    assert cotree_wire_count(t, g, dec) == dec.n_faces - dec.n_cells
    assert all(eliminated_graph_connected(i, t, g) for i in range(4))
