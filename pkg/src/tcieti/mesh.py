"""Multipatch hexahedral decompositions and the lowest-order control graph.

Every patch is the image of the unit cube under a trilinear map given by its
eight corners, subdivided into ``s_h`` elements per direction.  The control
graph of the lowest-order edge space is the union of the patch grids: one
node per mesh vertex and one edge per edge-element degree of freedom.

Local numbering inside a patch with ``s`` subdivisions::

    node (i, j, k)       -> i + (s+1) * (j + (s+1) * k)
    x-edge (i, j, k)     -> i + s * (j + (s+1) * k)
    y-edge (i, j, k)     -> nx + i + (s+1) * (j + s * k)
    z-edge (i, j, k)     -> 2 nx + i + (s+1) * (j + (s+1) * k)

with ``nx = s (s+1)^2``.  Local edges point towards increasing parameter.
Global nodes are numbered lexicographically by their rounded (z, y, x)
coordinates, global edges by their sorted (low node, high node) pair.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

# Face ids of the reference cube: xi=0, xi=1, eta=0, eta=1, zeta=0, zeta=1.
FACE_AXES = ((0, 0), (0, 1), (1, 0), (1, 1), (2, 0), (2, 1))

# Wire-basket classes, in the order used by the tree weights.
DI, DN, NI, II, DD, NN = range(6)
WIRE_CLASS_NAMES = ("DI", "DN", "NI", "II", "DD", "NN")

ROUND = 1e-9


class ConfigurationError(ValueError):
    """Raised for incomplete or inconsistent decomposition input."""


class GeometryError(ValueError):
    """Raised when a patch map is not orientation preserving."""


def _corner_shape(pts):
    """Trilinear corner functions at reference points, shape (Q, 8)."""
    pts = np.atleast_2d(pts)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    out = np.empty((len(pts), 8))
    for c in range(8):
        dx, dy, dz = c & 1, (c >> 1) & 1, (c >> 2) & 1
        fx = x if dx else 1.0 - x
        fy = y if dy else 1.0 - y
        fz = z if dz else 1.0 - z
        out[:, c] = fx * fy * fz
    return out


def _corner_shape_grad(pts):
    """Gradients of the trilinear corner functions, shape (Q, 8, 3)."""
    pts = np.atleast_2d(pts)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    out = np.empty((len(pts), 8, 3))
    for c in range(8):
        dx, dy, dz = c & 1, (c >> 1) & 1, (c >> 2) & 1
        fx, gx = (x, 1.0) if dx else (1.0 - x, -1.0)
        fy, gy = (y, 1.0) if dy else (1.0 - y, -1.0)
        fz, gz = (z, 1.0) if dz else (1.0 - z, -1.0)
        out[:, c, 0] = gx * fy * fz
        out[:, c, 1] = fx * gy * fz
        out[:, c, 2] = fx * fy * gz
    return out


@dataclass(frozen=True)
class Patch:
    """Trilinear image of the unit cube, subdivided ``s_h`` times per direction.

    ``corners[c]`` is the image of the reference corner with bits
    ``(c & 1, c >> 1 & 1, c >> 2 & 1)``.
    """

    corners: np.ndarray
    s_h: int

    def map(self, pts):
        return _corner_shape(pts) @ self.corners

    def jacobian(self, pts):
        """Jacobian matrices ``DF[q, a, b] = d x_a / d xi_b``."""
        return np.einsum("ca,qcb->qab", self.corners, _corner_shape_grad(pts))

    @property
    def n_nodes(self):
        return (self.s_h + 1) ** 3

    @property
    def n_edges(self):
        s = self.s_h
        return 3 * s * (s + 1) ** 2

    @property
    def n_elements(self):
        return self.s_h ** 3

    def node_coords(self):
        s = self.s_h
        t = np.linspace(0.0, 1.0, s + 1)
        k, j, i = np.meshgrid(t, t, t, indexing="ij")
        pts = np.column_stack([i.ravel(), j.ravel(), k.ravel()])
        return self.map(pts)


@dataclass(frozen=True)
class PatchDecomposition:
    """Coarse multipatch layout.

    ``face_labels[i][f]`` is ``None`` for an interface face and the name of
    the exterior boundary part (e.g. ``"y0"`` or ``"inner"``) otherwise.
    ``interfaces`` holds ``(i, j, face_of_i, face_of_j)`` with ``i < j``.
    """

    kind: str
    patches: tuple
    face_labels: tuple
    interfaces: tuple
    n_vertices: int
    n_edges: int
    n_faces: int
    n_cells: int
    params: dict = field(default_factory=dict)

    @property
    def n_patches(self):
        return len(self.patches)

    @property
    def s_h(self):
        return self.patches[0].s_h


@dataclass(frozen=True)
class BoundaryConfig:
    """Dirichlet/Neumann tag per exterior boundary label.

    ``default`` applies to labels missing from ``tags``; leave it ``None`` to
    require an explicit tag for every exterior face.
    """

    tags: dict = field(default_factory=dict)
    default: str | None = None

    def __post_init__(self):
        for tag in list(self.tags.values()) + [self.default]:
            if tag not in ("D", "N", None):
                raise ConfigurationError(f"unknown boundary tag {tag!r}")

    def tag(self, label):
        t = self.tags.get(label, self.default)
        if t is None:
            raise ConfigurationError(f"exterior face {label!r} has no boundary tag")
        return t

    @classmethod
    def uniform(cls, tag):
        return cls({}, tag)

    @classmethod
    def layout(cls, name):
        """Named layouts used by the experiments."""
        if name == "cube-mixed":
            return cls({"x0": "N", "x1": "N", "y0": "D", "y1": "D", "z0": "N", "z1": "N"})
        if name == "torus-mixed":
            return cls({"inner": "D", "outer": "N", "bottom": "N", "top": "N"})
        if name in ("torus-neumann", "all-neumann"):
            return cls.uniform("N")
        if name == "all-dirichlet":
            return cls.uniform("D")
        raise ConfigurationError(f"unknown boundary layout {name!r}")


@dataclass(frozen=True)
class ControlGraph:
    """Global p=1 control graph with per-patch copies and classification.

    Edge and node flags are boolean arrays over global ids; ``edge_wire_class``
    holds one of ``DI, DN, NI, II, DD, NN`` for wire-basket edges and ``-1``
    elsewhere (``node_wire_class`` likewise).  ``patch_edges[i][l]`` is the
    global edge of local edge ``l`` of patch ``i`` and ``patch_signs[i][l]``
    is +1 when the local direction agrees with the global one.
    """

    node_coords: np.ndarray
    edge_nodes: np.ndarray
    patch_nodes: tuple
    patch_edges: tuple
    patch_signs: tuple
    face_labels: tuple
    edge_on_wire: np.ndarray
    node_on_wire: np.ndarray
    edge_on_facet: np.ndarray
    node_on_facet: np.ndarray
    edge_owner_count: np.ndarray
    edge_D: np.ndarray = None
    edge_N: np.ndarray = None
    edge_I: np.ndarray = None
    node_D: np.ndarray = None
    node_N: np.ndarray = None
    node_I: np.ndarray = None
    edge_wire_class: np.ndarray = None
    node_wire_class: np.ndarray = None

    @property
    def n_nodes(self):
        return len(self.node_coords)

    @property
    def n_edges(self):
        return len(self.edge_nodes)

    @property
    def n_patches(self):
        return len(self.patch_edges)

    @property
    def classified(self):
        return self.edge_wire_class is not None

    @property
    def n_local_total(self):
        return sum(len(e) for e in self.patch_edges)

    def owners(self, edge):
        """List of ``(patch, local edge)`` copies of a global edge."""
        out = []
        for i, pe in enumerate(self.patch_edges):
            for l in np.flatnonzero(pe == edge):
                out.append((i, int(l)))
        return out

    def owner_table(self):
        """All copies sorted by (global edge, patch): arrays edge, patch, local."""
        edges = np.concatenate(self.patch_edges)
        patch = np.concatenate([np.full(len(pe), i) for i, pe in enumerate(self.patch_edges)])
        local = np.concatenate([np.arange(len(pe)) for pe in self.patch_edges])
        order = np.lexsort((local, patch, edges))
        return edges[order], patch[order], local[order]

    def wire_set(self, cls):
        return np.flatnonzero(self.edge_wire_class == cls)

    def adjacency(self, edge_mask=None, n_nodes=None):
        """Sparse symmetric adjacency restricted to the masked edges."""
        en = self.edge_nodes if edge_mask is None else self.edge_nodes[edge_mask]
        n = self.n_nodes if n_nodes is None else n_nodes
        data = np.ones(len(en))
        a = coo_matrix((data, (en[:, 0], en[:, 1])), shape=(n, n))
        return (a + a.T).tocsr()


# -- local topology of one patch ---------------------------------------------

def local_edge_nodes(s):
    """Start/end local node of every local edge, shape (n_edges, 2)."""
    n1 = s + 1
    nid = lambda i, j, k: i + n1 * (j + n1 * k)
    out = []
    k, j, i = np.meshgrid(np.arange(n1), np.arange(n1), np.arange(s), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    out.append(np.column_stack([nid(i, j, k), nid(i + 1, j, k)]))
    k, j, i = np.meshgrid(np.arange(n1), np.arange(s), np.arange(n1), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    out.append(np.column_stack([nid(i, j, k), nid(i, j + 1, k)]))
    k, j, i = np.meshgrid(np.arange(s), np.arange(n1), np.arange(n1), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    out.append(np.column_stack([nid(i, j, k), nid(i, j, k + 1)]))
    return np.vstack(out)


def local_edge_index(s, direction, i, j, k):
    """Local id of the edge starting at grid point (i, j, k) along ``direction``."""
    nx = s * (s + 1) ** 2
    if direction == 0:
        return i + s * (j + (s + 1) * k)
    if direction == 1:
        return nx + i + (s + 1) * (j + s * k)
    return 2 * nx + i + (s + 1) * (j + (s + 1) * k)


def element_edges(s):
    """Local edge ids of every element in reference order, shape (s^3, 12).

    Reference order: x-edges at (y, z) = (0,0), (1,0), (0,1), (1,1), then
    y-edges at (x, z), then z-edges at (x, y), same sub-ordering.
    """
    c, b, a = np.meshgrid(np.arange(s), np.arange(s), np.arange(s), indexing="ij")
    a, b, c = a.ravel(), b.ravel(), c.ravel()
    cols = []
    for d1, d2 in ((0, 0), (1, 0), (0, 1), (1, 1)):
        cols.append(local_edge_index(s, 0, a, b + d1, c + d2))
    for d1, d2 in ((0, 0), (1, 0), (0, 1), (1, 1)):
        cols.append(local_edge_index(s, 1, a + d1, b, c + d2))
    for d1, d2 in ((0, 0), (1, 0), (0, 1), (1, 1)):
        cols.append(local_edge_index(s, 2, a + d1, b + d2, c))
    return np.column_stack(cols)


def element_nodes(s):
    """Local node ids of every element's 8 corners (bit order), shape (s^3, 8)."""
    n1 = s + 1
    c, b, a = np.meshgrid(np.arange(s), np.arange(s), np.arange(s), indexing="ij")
    a, b, c = a.ravel(), b.ravel(), c.ravel()
    cols = []
    for corner in range(8):
        dx, dy, dz = corner & 1, (corner >> 1) & 1, (corner >> 2) & 1
        cols.append((a + dx) + n1 * ((b + dy) + n1 * (c + dz)))
    return np.column_stack(cols)


def _grid_index(s):
    n1 = s + 1
    k, j, i = np.meshgrid(np.arange(n1), np.arange(n1), np.arange(n1), indexing="ij")
    return np.column_stack([i.ravel(), j.ravel(), k.ravel()])


def local_face_nodes(s, face):
    axis, side = FACE_AXES[face]
    g = _grid_index(s)
    return np.flatnonzero(g[:, axis] == side * s)


def local_face_edges(s, face):
    """Local edges lying in the closure of a patch face."""
    en = local_edge_nodes(s)
    on = np.zeros((s + 1) ** 3, dtype=bool)
    on[local_face_nodes(s, face)] = True
    return np.flatnonzero(on[en[:, 0]] & on[en[:, 1]])


def local_wire_nodes(s):
    """Nodes on the 12 macro-edges of a patch."""
    g = _grid_index(s)
    bnd = (g == 0) | (g == s)
    return np.flatnonzero(bnd.sum(axis=1) >= 2)


def local_wire_edges(s):
    en = local_edge_nodes(s)
    on = np.zeros((s + 1) ** 3, dtype=bool)
    on[local_wire_nodes(s)] = True
    # both endpoints on macro-edges and the edge itself on two boundary faces
    g = _grid_index(s)
    a, b = g[en[:, 0]], g[en[:, 1]]
    fixed = (a == b) & ((a == 0) | (a == s))
    return np.flatnonzero(on[en[:, 0]] & on[en[:, 1]] & (fixed.sum(axis=1) >= 2))


def local_boundary_nodes(s):
    g = _grid_index(s)
    return np.flatnonzero(((g == 0) | (g == s)).any(axis=1))


def local_boundary_edges(s):
    return np.unique(np.concatenate([local_face_edges(s, f) for f in range(6)]))


# -- coarse complex ----------------------------------------------------------

_MACRO_EDGES = (
    # pairs of corner ids spanning each of the 12 macro-edges
    (0, 1), (2, 3), (4, 5), (6, 7),
    (0, 2), (1, 3), (4, 6), (5, 7),
    (0, 4), (1, 5), (2, 6), (3, 7),
)


def _face_corners(face):
    axis, side = FACE_AXES[face]
    return [c for c in range(8) if ((c >> axis) & 1) == side]


def _key(x):
    return tuple(np.round(np.asarray(x) / ROUND).astype(np.int64))


def _coarse_counts(patches):
    verts, edges, faces = set(), set(), set()
    for p in patches:
        for c in p.corners:
            verts.add(_key(c))
        for a, b in _MACRO_EDGES:
            edges.add(_key(0.5 * (p.corners[a] + p.corners[b])))
        for f in range(6):
            faces.add(_key(p.corners[_face_corners(f)].mean(axis=0)))
    return len(verts), len(edges), len(faces)


def _find_interfaces(patches):
    seen = {}
    interfaces = []
    for i, p in enumerate(patches):
        for f in range(6):
            key = _key(p.corners[_face_corners(f)].mean(axis=0))
            if key in seen:
                j, g = seen.pop(key)
                interfaces.append((j, i, g, f))
            else:
                seen[key] = (i, f)
    return interfaces, {v: k for k, v in seen.items()}


def check_jacobian(patch, pts=None):
    """Raise ``GeometryError`` unless det DF > 0 at the given reference points."""
    if pts is None:
        g = (np.polynomial.legendre.leggauss(3)[0] + 1) / 2
        z, y, x = np.meshgrid(g, g, g, indexing="ij")
        pts = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    det = np.linalg.det(patch.jacobian(pts))
    if np.any(det <= 0):
        raise GeometryError(f"non-positive Jacobian determinant {det.min():.3e}")
    return det


def _make_decomposition(kind, patches, labeller, params):
    for p in patches:
        check_jacobian(p)
    interfaces, exterior = _find_interfaces(patches)
    labels = [[None] * 6 for _ in patches]
    for (i, f) in exterior:
        labels[i][f] = labeller(i, f)
    nv, ne, nf = _coarse_counts(patches)
    return PatchDecomposition(
        kind=kind,
        patches=tuple(patches),
        face_labels=tuple(tuple(l) for l in labels),
        interfaces=tuple(sorted(interfaces)),
        n_vertices=nv,
        n_edges=ne,
        n_faces=nf,
        n_cells=len(patches),
        params=dict(params),
    )


def coarse_euler_constant(dec):
    """Euler characteristic of the coarse complex, |V| - |E| + |F| - |C|."""
    return dec.n_vertices - dec.n_edges + dec.n_faces - dec.n_cells


def first_betti_number(dec):
    """b1 of the decomposed solid, from chi = b0 - b1 + b2 with b0=1, b2=0."""
    return 1 - coarse_euler_constant(dec)


# -- builders ----------------------------------------------------------------

def _box_corners(lo, hi):
    return np.array([[hi[0] if c & 1 else lo[0],
                      hi[1] if (c >> 1) & 1 else lo[1],
                      hi[2] if (c >> 2) & 1 else lo[2]] for c in range(8)], dtype=float)


def grid_decomposition(shape, s_h):
    """Unit cube split into ``shape = (nx, ny, nz)`` equal boxes."""
    nx, ny, nz = shape
    if min(shape) < 1 or s_h < 1:
        raise ConfigurationError("patch counts and s_h must be positive")
    patches = []
    index = {}
    for c in range(nz):
        for b in range(ny):
            for a in range(nx):
                lo = (a / nx, b / ny, c / nz)
                hi = ((a + 1) / nx, (b + 1) / ny, (c + 1) / nz)
                index[len(patches)] = (a, b, c)
                patches.append(Patch(_box_corners(lo, hi), s_h))

    def labeller(i, f):
        axis, side = FACE_AXES[f]
        return "xyz"[axis] + str(side)

    return _make_decomposition("cube", patches, labeller, {"shape": tuple(shape), "s_h": s_h})


def torus_decomposition(n_ring, s_h, layers=1, r_inner=1.0, r_outer=2.0, height=2.0):
    """Polyhedral ring around the z-axis, ``n_ring`` sectors by ``layers`` radial shells.

    Patch parameters: xi radial (outwards), eta angular (counter-clockwise),
    zeta along z.  Exterior labels are ``inner``, ``outer``, ``bottom``, ``top``.
    """
    if n_ring < 3 or s_h < 1 or layers < 1:
        raise ConfigurationError("need n_ring >= 3, s_h >= 1, layers >= 1")
    radii = np.linspace(r_inner, r_outer, layers + 1)
    theta = 2 * np.pi * np.arange(n_ring + 1) / n_ring
    patches = []
    for k in range(n_ring):
        for l in range(layers):
            corners = np.empty((8, 3))
            for c in range(8):
                dx, dy, dz = c & 1, (c >> 1) & 1, (c >> 2) & 1
                r, t = radii[l + dx], theta[k + dy]
                corners[c] = (r * np.cos(t), r * np.sin(t), height * dz)
            patches.append(Patch(corners, s_h))

    def labeller(i, f):
        return {0: "inner", 1: "outer", 4: "bottom", 5: "top"}[f]

    params = {"n_ring": n_ring, "layers": layers, "s_h": s_h,
              "r_inner": r_inner, "r_outer": r_outer, "height": height}
    return _make_decomposition("torus", patches, labeller, params)


def build_control_graph(dec):
    """Merge patch grids into the global control graph (unclassified)."""
    coords = [p.node_coords() for p in dec.patches]
    allc = np.vstack(coords)
    keys = np.round(allc / ROUND).astype(np.int64)
    # unique over (z, y, x) rows gives the lexicographic global numbering
    uniq, first, inverse = np.unique(keys[:, ::-1], axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    node_coords = allc[first]

    offsets = np.cumsum([0] + [len(c) for c in coords])
    patch_nodes = [inverse[offsets[i]:offsets[i + 1]] for i in range(dec.n_patches)]

    pairs = []
    for p, pn in zip(dec.patches, patch_nodes):
        en = pn[local_edge_nodes(p.s_h)]
        pairs.append(en)
    allp = np.vstack(pairs)
    lo = np.minimum(allp[:, 0], allp[:, 1])
    hi = np.maximum(allp[:, 0], allp[:, 1])
    edge_nodes, einv = np.unique(np.column_stack([lo, hi]), axis=0, return_inverse=True)
    einv = einv.ravel()
    eoff = np.cumsum([0] + [len(e) for e in pairs])
    patch_edges, patch_signs = [], []
    for i, en in enumerate(pairs):
        patch_edges.append(einv[eoff[i]:eoff[i + 1]])
        patch_signs.append(np.where(en[:, 0] < en[:, 1], 1, -1).astype(np.int8))

    ne, nn = len(edge_nodes), len(node_coords)
    owner_count = np.bincount(einv, minlength=ne)
    edge_on_wire = np.zeros(ne, dtype=bool)
    node_on_wire = np.zeros(nn, dtype=bool)
    edge_on_facet = np.zeros(ne, dtype=bool)
    node_on_facet = np.zeros(nn, dtype=bool)
    for p, pn, pe in zip(dec.patches, patch_nodes, patch_edges):
        s = p.s_h
        edge_on_wire[pe[local_wire_edges(s)]] = True
        node_on_wire[pn[local_wire_nodes(s)]] = True
        edge_on_facet[pe[local_boundary_edges(s)]] = True
        node_on_facet[pn[local_boundary_nodes(s)]] = True

    return ControlGraph(
        node_coords=node_coords,
        edge_nodes=edge_nodes,
        patch_nodes=tuple(patch_nodes),
        patch_edges=tuple(patch_edges),
        patch_signs=tuple(patch_signs),
        face_labels=dec.face_labels,
        edge_on_wire=edge_on_wire,
        node_on_wire=node_on_wire,
        edge_on_facet=edge_on_facet,
        node_on_facet=node_on_facet,
        edge_owner_count=owner_count,
    )


def classify_edges(graph, bc):
    """Fill the D/N/I flags and the six disjoint wire-basket classes.

    An edge (node) belongs to a facet type when it lies in the closure of a
    patch face of that type, i.e. when the tangential trace of its basis
    function does not vanish there.
    """
    ne, nn = graph.n_edges, graph.n_nodes
    flags_e = {t: np.zeros(ne, dtype=bool) for t in "DNI"}
    flags_n = {t: np.zeros(nn, dtype=bool) for t in "DNI"}
    for i, labels in enumerate(graph.face_labels):
        s = round(len(graph.patch_nodes[i]) ** (1 / 3)) - 1
        for f, label in enumerate(labels):
            t = "I" if label is None else bc.tag(label)
            flags_e[t][graph.patch_edges[i][local_face_edges(s, f)]] = True
            flags_n[t][graph.patch_nodes[i][local_face_nodes(s, f)]] = True

    def wire_classes(D, N, I, wire):
        cls = np.full(len(D), -1, dtype=np.int8)
        # precedence keeps the six sets disjoint when three facet types meet
        for code, mask in ((DI, D & I), (DN, D & N), (NI, N & I),
                           (II, wire & I), (DD, wire & D), (NN, wire & N)):
            cls[(cls < 0) & mask & wire] = code
        return cls

    ecls = wire_classes(flags_e["D"], flags_e["N"], flags_e["I"], graph.edge_on_wire)
    ncls = wire_classes(flags_n["D"], flags_n["N"], flags_n["I"], graph.node_on_wire)
    return replace(
        graph,
        edge_D=flags_e["D"], edge_N=flags_e["N"], edge_I=flags_e["I"],
        node_D=flags_n["D"], node_N=flags_n["N"], node_I=flags_n["I"],
        edge_wire_class=ecls, node_wire_class=ncls,
    )


def build_grid_decomposition(shape, s_h, bc):
    dec = grid_decomposition(shape, s_h)
    return dec, classify_edges(build_control_graph(dec), bc)


def build_cube_decomposition(s_H, s_h, bc):
    """Unit cube split into ``s_H^3`` equal cubes with ``s_h`` local subdivisions."""
    if s_H < 1 or s_h < 1:
        raise ConfigurationError("s_H and s_h must be positive")
    return build_grid_decomposition((s_H, s_H, s_H), s_h, bc)


def build_torus_decomposition(n_ring, s_h, bc, layers=1):
    dec = torus_decomposition(n_ring, s_h, layers=layers)
    return dec, classify_edges(build_control_graph(dec), bc)


# -- configuration and dumps -------------------------------------------------

def decomposition_from_config(cfg):
    """Build ``(dec, graph, bc)`` from a config mapping (see README for the schema)."""
    if isinstance(cfg, (str, Path)):
        cfg = json.loads(Path(cfg).read_text())
    kind = cfg.get("geometry", "cube")
    if "bc" in cfg:
        bc_cfg = cfg["bc"]
        bc = BoundaryConfig(dict(bc_cfg.get("tags", {})), bc_cfg.get("default"))
    else:
        bc = BoundaryConfig.layout(cfg.get("layout", "cube-mixed" if kind == "cube" else "torus-mixed"))
    s_h = int(cfg["s_h"])
    if kind == "cube":
        if "shape" in cfg:
            dec, graph = build_grid_decomposition(tuple(cfg["shape"]), s_h, bc)
        else:
            dec, graph = build_cube_decomposition(int(cfg["s_H"]), s_h, bc)
    elif kind == "torus":
        dec, graph = build_torus_decomposition(int(cfg["n_ring"]), s_h, bc, layers=int(cfg.get("layers", 1)))
    else:
        raise ConfigurationError(f"unknown geometry {kind!r}")
    return dec, graph, bc


def write_graph_csv(graph, path, tree=None):
    """Edge table with class flags and owners; tree columns when given."""
    e_edges, e_patch, _ = graph.owner_table()
    owners = [[] for _ in range(graph.n_edges)]
    for e, p in zip(e_edges, e_patch):
        owners[e].append(str(p))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["edge", "node0", "node1", "D", "N", "I", "wire_class", "owners"]
        if tree is not None:
            head += ["weight", "in_tree", "is_primal", "is_belt"]
        w.writerow(head)
        for e in range(graph.n_edges):
            c = graph.edge_wire_class[e]
            row = [e, graph.edge_nodes[e, 0], graph.edge_nodes[e, 1],
                   int(graph.edge_D[e]), int(graph.edge_N[e]), int(graph.edge_I[e]),
                   WIRE_CLASS_NAMES[c] if c >= 0 else "", " ".join(owners[e])]
            if tree is not None:
                row += [int(tree.weights[e]), int(tree.in_tree[e]),
                        int(tree.primal[e]) if tree.primal is not None else 0,
                        int(tree.belt_mask[e])]
            w.writerow(row)


def n_components(graph, node_mask, edge_mask):
    """Connected components of the subgraph on the masked nodes and edges."""
    adj = graph.adjacency(edge_mask)
    sub = adj[node_mask][:, node_mask]
    if sub.shape[0] == 0:
        return 0
    return connected_components(sub, directed=False)[0]
