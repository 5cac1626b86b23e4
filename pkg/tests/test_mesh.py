import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tcieti.mesh import (DD, DI, DN, II, NI, NN, BoundaryConfig, ConfigurationError, GeometryError, Patch,
                         build_control_graph, build_cube_decomposition, build_grid_decomposition,
                         build_torus_decomposition, check_jacobian, classify_edges, coarse_euler_constant,
                         decomposition_from_config, first_betti_number, grid_decomposition, local_edge_nodes,
                         write_graph_csv)

MIXED = BoundaryConfig.layout("cube-mixed")


def test_single_patch_counts():
    dec, g = build_cube_decomposition(1, 1, MIXED)
    assert (g.n_nodes, g.n_edges) == (8, 12)
    assert g.edge_on_wire.all()
    assert coarse_euler_constant(dec) == 8 - 12 + 6 - 1 == 1


def test_local_dof_sum_two_by_two():
    _, g = build_cube_decomposition(2, 2, MIXED)
    assert g.n_local_total == 3 * 8 * 2 * 9 == 432


def test_wire_basket_count_s_h_one():
    _, g = build_cube_decomposition(2, 1, MIXED)
    assert g.edge_on_wire.sum() == 54


def test_cube_euler_counts():
    dec, _ = build_cube_decomposition(2, 1, MIXED)
    assert (dec.n_vertices, dec.n_edges, dec.n_faces, dec.n_cells) == (27, 54, 36, 8)
    assert coarse_euler_constant(dec) == 1


def test_torus_ring_topology():
    dec, g = build_torus_decomposition(3, 2, BoundaryConfig.layout("torus-neumann"))
    assert dec.n_cells == dec.n_patches == 3
    assert coarse_euler_constant(dec) == 0
    assert first_betti_number(dec) == 1
    assert not g.edge_D.any()


def test_torus_six_patch_layouts():
    for layers, n_ring in ((1, 6), (2, 3)):
        dec, _ = build_torus_decomposition(n_ring, 1, BoundaryConfig.layout("torus-mixed"), layers=layers)
        assert dec.n_patches == 6
        assert coarse_euler_constant(dec) == 0


def test_torus_dimensions():
    dec, g = build_torus_decomposition(4, 2, BoundaryConfig.layout("torus-mixed"))
    r = np.hypot(g.node_coords[:, 0], g.node_coords[:, 1])
    assert r.max() == pytest.approx(2.0)
    assert g.node_coords[:, 2].max() == pytest.approx(2.0)
    # only the inner face is Dirichlet in the mixed layout
    inner = g.node_coords[g.node_D]
    assert np.all(np.hypot(inner[:, 0], inner[:, 1]) <= 1.0 + 1e-12)


def test_all_dirichlet_single_patch():
    _, g = build_cube_decomposition(1, 2, BoundaryConfig.uniform("D"))
    assert g.edge_D[g.edge_on_facet].all()
    assert not g.edge_I.any()
    interior = ~g.edge_on_facet
    assert interior.sum() > 0 and not g.edge_D[interior].any()


def test_two_patch_shared_face():
    dec, g = build_grid_decomposition((2, 1, 1), 2, BoundaryConfig.uniform("N"))
    shared = np.isclose(g.node_coords[g.edge_nodes, 0], 0.5).all(axis=1)
    assert g.edge_I[shared].all() and shared.sum() == 12
    perimeter = shared & g.edge_on_wire
    assert (g.edge_wire_class[perimeter] == NI).all()
    assert perimeter.sum() == 8


def test_cross_edge_is_II():
    _, g = build_cube_decomposition(2, 2, MIXED)
    c = g.node_coords[g.edge_nodes]
    # z-directed edges on the line x = y = 0.5 are shared by four patches
    line = np.isclose(c[..., 0], 0.5).all(1) & np.isclose(c[..., 1], 0.5).all(1)
    assert line.sum() == 4
    assert (g.edge_wire_class[line] == II).all()
    assert (g.edge_owner_count[line] == 4).all()


@settings(max_examples=12, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.sampled_from(["cube-mixed", "all-neumann", "all-dirichlet"]))
def test_cube_counting_formulas(s_H, s_h, layout):
    dec, g = build_cube_decomposition(s_H, s_h, BoundaryConfig.layout(layout))
    assert g.edge_on_wire.sum() == 3 * s_h * s_H * (s_H + 1) ** 2
    assert g.n_local_total == 3 * s_H ** 3 * s_h * (s_h + 1) ** 2
    m = s_h * s_H
    assert g.n_edges == 3 * m * (m + 1) ** 2
    assert dec.n_cells == s_H ** 3


@settings(max_examples=12, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 2), st.integers(1, 3),
       st.sampled_from(["cube-mixed", "all-neumann", "all-dirichlet"]))
def test_wire_classes_partition(nx, ny, nz, s_h, layout):
    _, g = build_grid_decomposition((nx, ny, nz), s_h, BoundaryConfig.layout(layout))
    cls = g.edge_wire_class
    assert np.array_equal(cls >= 0, g.edge_on_wire)
    assert set(np.unique(cls[cls >= 0])) <= {DI, DN, NI, II, DD, NN}
    assert np.all(g.edge_owner_count[cls == II] >= 3)
    interior = ~g.edge_on_facet
    assert not (g.edge_D | g.edge_N | g.edge_I)[interior].any()
    # every interface edge appears once per adjacent subdomain
    assert np.array_equal(g.edge_owner_count > 1, g.edge_I)


def test_orientation_signs():
    _, g = build_torus_decomposition(3, 2, BoundaryConfig.layout("torus-mixed"))
    for pn, pe, sg in zip(g.patch_nodes, g.patch_edges, g.patch_signs):
        s = round(len(pn) ** (1 / 3)) - 1
        loc = pn[local_edge_nodes(s)]
        assert np.array_equal(g.edge_nodes[pe][:, 0], np.minimum(loc[:, 0], loc[:, 1]))
        assert set(np.unique(sg)) <= {-1, 1}
    assert np.all(g.edge_nodes[:, 0] < g.edge_nodes[:, 1])


def test_global_numbering_lexicographic():
    _, g = build_cube_decomposition(2, 1, MIXED)
    zyx = g.node_coords[:, ::-1]
    assert all(tuple(zyx[i]) < tuple(zyx[i + 1]) for i in range(len(zyx) - 1))


def test_untagged_face_is_an_error():
    dec = grid_decomposition((1, 1, 1), 1)
    with pytest.raises(ConfigurationError):
        classify_edges(build_control_graph(dec), BoundaryConfig({"x0": "D"}))


def test_inverted_patch_rejected():
    corners = np.array([[c & 1, (c >> 1) & 1, (c >> 2) & 1] for c in range(8)], dtype=float)
    corners[:, 0] *= -1
    with pytest.raises(GeometryError):
        check_jacobian(Patch(corners, 1))


def test_config_and_csv(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"geometry": "torus", "n_ring": 3, "s_h": 1,
                               "bc": {"tags": {"inner": "D"}, "default": "N"}}))
    dec, g, bc = decomposition_from_config(cfg)
    assert dec.n_patches == 3 and g.edge_D.any()
    out = tmp_path / "g.csv"
    write_graph_csv(g, out)
    lines = out.read_text().splitlines()
    assert lines[0].startswith("edge,node0,node1")
    assert len(lines) == g.n_edges + 1
