"""Lowest-order edge elements on trilinear patches: assembly, data and errors.

Each patch is meshed by ``s_h^3`` elements; element ``e`` is the image of the
reference cube under ``G(x) = F((idx_e + x) / s_h)``.  Edge functions are
mapped covariantly, ``u = DG^{-T} w``, and their curls contravariantly,
``curl u = DG curl w / det DG``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from .mesh import (FACE_AXES, GeometryError, element_edges, local_face_edges)

# Tag values of the local DOF partition.
TAG_DIRICHLET, TAG_TREE, TAG_PRIMAL, TAG_RI, TAG_RV = range(5)
TAG_NAMES = ("dirichlet", "tree", "primal", "r_I", "r_V")

_PAIRS = ((0, 0), (1, 0), (0, 1), (1, 1))

# Gauss points per direction.  Loads use more points than the stiffness so that
# the discrete data stays orthogonal to discrete gradients up to round-off,
# which keeps the flux density independent of the chosen tree.
STIFFNESS_ORDER = 3
RHS_ORDER = 5


def _lin(t, side):
    return t if side else 1.0 - t


def reference_basis(pts):
    """Values and curls of the 12 reference edge functions at ``pts`` (Q, 3).

    Returns two arrays of shape (Q, 12, 3).  Ordering: x-edges at (y, z) in
    ``(0,0), (1,0), (0,1), (1,1)``, then y-edges at (x, z), then z-edges at (x, y).
    """
    pts = np.atleast_2d(pts)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    q = len(pts)
    val = np.zeros((q, 12, 3))
    crl = np.zeros((q, 12, 3))
    for k, (s1, s2) in enumerate(_PAIRS):
        d1, d2 = (1.0 if s1 else -1.0), (1.0 if s2 else -1.0)
        # x-edge: w = (a(y) b(z), 0, 0)
        a, b = _lin(y, s1), _lin(z, s2)
        val[:, k, 0] = a * b
        crl[:, k, 1] = a * d2
        crl[:, k, 2] = -d1 * b
        # y-edge: w = (0, a(x) b(z), 0)
        a, b = _lin(x, s1), _lin(z, s2)
        val[:, 4 + k, 1] = a * b
        crl[:, 4 + k, 0] = -a * d2
        crl[:, 4 + k, 2] = d1 * b
        # z-edge: w = (0, 0, a(x) b(y))
        a, b = _lin(x, s1), _lin(y, s2)
        val[:, 8 + k, 2] = a * b
        crl[:, 8 + k, 0] = a * d2
        crl[:, 8 + k, 1] = -d1 * b
    return val, crl


def reference_edge_geometry():
    """Start point and unit direction of the 12 reference edges."""
    start = np.zeros((12, 3))
    direc = np.zeros((12, 3))
    for k, (s1, s2) in enumerate(_PAIRS):
        start[k] = (0, s1, s2)
        start[4 + k] = (s1, 0, s2)
        start[8 + k] = (s1, s2, 0)
        direc[k, 0] = direc[4 + k, 1] = direc[8 + k, 2] = 1.0
    return start, direc


def face_flux_matrix():
    """Map from the 12 edge coefficients to the 6 outward face fluxes of the curl.

    The normal component of a reference curl is constant on each face, so the
    face-centre value is the exact flux through the unit face.
    """
    centres = np.array([[0, .5, .5], [1, .5, .5], [.5, 0, .5],
                        [.5, 1, .5], [.5, .5, 0], [.5, .5, 1]])
    _, crl = reference_basis(centres)
    d = np.zeros((6, 12))
    for f, (axis, side) in enumerate(FACE_AXES):
        d[f] = (1.0 if side else -1.0) * crl[f, :, axis]
    return d


def gauss_cube(n):
    """Tensor Gauss rule on the unit cube: points (n^3, 3) and weights."""
    g, w = np.polynomial.legendre.leggauss(n)
    g, w = (g + 1) / 2, w / 2
    z, y, x = np.meshgrid(g, g, g, indexing="ij")
    wz, wy, wx = np.meshgrid(w, w, w, indexing="ij")
    return np.column_stack([x.ravel(), y.ravel(), z.ravel()]), (wx * wy * wz).ravel()


def gauss_square(n):
    g, w = np.polynomial.legendre.leggauss(n)
    g, w = (g + 1) / 2, w / 2
    v, u = np.meshgrid(g, g, indexing="ij")
    wv, wu = np.meshgrid(w, w, indexing="ij")
    return np.column_stack([u.ravel(), v.ravel()]), (wu * wv).ravel()


def _element_offsets(s):
    c, b, a = np.meshgrid(np.arange(s), np.arange(s), np.arange(s), indexing="ij")
    return np.column_stack([a.ravel(), b.ravel(), c.ravel()]).astype(float)


def element_geometry(patch, pts, elements=None):
    """Physical points, element Jacobians and determinants for all elements.

    Returns ``x (E, Q, 3)``, ``DG (E, Q, 3, 3)`` and ``det (E, Q)``.
    """
    s = patch.s_h
    off = _element_offsets(s)
    if elements is not None:
        off = off[elements]
    par = (off[:, None, :] + pts[None, :, :]) / s
    flat = par.reshape(-1, 3)
    x = patch.map(flat).reshape(len(off), len(pts), 3)
    dg = patch.jacobian(flat).reshape(len(off), len(pts), 3, 3) / s
    det = np.linalg.det(dg)
    if np.any(det <= 0):
        raise GeometryError(f"non-positive Jacobian determinant {det.min():.3e}")
    return x, dg, det


def _nu_values(nu, x):
    if callable(nu):
        return np.asarray(nu(x.reshape(-1, 3))).reshape(x.shape[:-1])
    return np.full(x.shape[:-1], float(nu))


def element_matrices(patch, nu=1.0, order=STIFFNESS_ORDER):
    """Element stiffness matrices, shape (s^3, 12, 12)."""
    pts, wts = gauss_cube(order)
    x, dg, det = element_geometry(patch, pts)
    _, crl = reference_basis(pts)
    phys = np.einsum("eqab,qkb->eqka", dg, crl, optimize=True)
    coef = _nu_values(nu, x) * wts[None, :] / det
    P = phys.transpose(0, 2, 1, 3).reshape(len(phys), 12, -1)
    Pw = (phys * coef[..., None, None]).transpose(0, 2, 1, 3).reshape(len(phys), 12, -1)
    return P @ Pw.transpose(0, 2, 1)


def _scatter(s, ke):
    conn = element_edges(s)
    n = 3 * s * (s + 1) ** 2
    rows = np.repeat(conn, 12, axis=1).ravel()
    cols = np.tile(conn, (1, 12)).ravel()
    return coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_stiffness(patch, nu=1.0, order=STIFFNESS_ORDER):
    """Patch stiffness matrix in local (parametric) edge orientation."""
    k = _scatter(patch.s_h, element_matrices(patch, nu, order))
    # exact symmetry regardless of summation order
    return ((k + k.T) * 0.5).tocsr()


@dataclass(frozen=True)
class ManufacturedCase:
    """Closed-form potential, flux density and current density with nu = 1."""

    A: callable
    B: callable
    J: callable
    nu: float = 1.0
    name: str = "custom"

    def g_N(self, x, normal):
        """Neumann data (nu B) x n."""
        return np.cross(self.nu * self.B(x), normal)


def _trig_A(x):
    x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([np.cos(x1) * np.cos(x2) * np.sin(x0),
                     -2 * np.cos(x0) * np.cos(x2) * np.sin(x1),
                     np.cos(x0) * np.cos(x1) * np.sin(x2)], axis=-1)


def _trig_B(x):
    x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([-3 * np.cos(x0) * np.sin(x1) * np.sin(x2),
                     np.zeros_like(x0),
                     3 * np.sin(x0) * np.sin(x1) * np.cos(x2)], axis=-1)


def _trig_J(x):
    x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([3 * np.sin(x0) * np.cos(x1) * np.cos(x2),
                     -6 * np.cos(x0) * np.sin(x1) * np.cos(x2),
                     3 * np.cos(x0) * np.cos(x1) * np.sin(x2)], axis=-1)


def trig_case():
    """Smooth trigonometric solution used by all experiments."""
    return ManufacturedCase(_trig_A, _trig_B, _trig_J, 1.0, "trig")


def zero_case():
    z = lambda x: np.zeros(np.shape(x))
    return ManufacturedCase(z, z, z, 1.0, "zero")


def _face_param(face, uv):
    axis, side = FACE_AXES[face]
    free = [a for a in range(3) if a != axis]
    pts = np.empty((len(uv), 3))
    pts[:, axis] = side
    pts[:, free[0]] = uv[:, 0]
    pts[:, free[1]] = uv[:, 1]
    return pts


def _face_elements(s, face):
    axis, side = FACE_AXES[face]
    off = _element_offsets(s)
    return np.flatnonzero(off[:, axis] == side * (s - 1))


def _face_normal(dg, face):
    """Outward area vector n dS per unit reference area."""
    axis, side = FACE_AXES[face]
    a, b = [(1, 2), (2, 0), (0, 1)][axis]
    n = np.cross(dg[..., :, a], dg[..., :, b])
    return n if side else -n


def assemble_rhs(patch, case, neumann_faces=(), order=None):
    """Load vector in local edge orientation: volume current plus Neumann trace."""
    order = RHS_ORDER if order is None else order
    s = patch.s_h
    pts, wts = gauss_cube(order)
    x, dg, det = element_geometry(patch, pts)
    val, _ = reference_basis(pts)
    jq = case.J(x)
    # J . DG^{-T} w det = (DG^{-1} J) . w det
    tj = np.linalg.solve(dg, jq[..., None])[..., 0]
    fe = np.einsum("eqa,qka->ek", tj * (det * wts)[..., None], val, optimize=True)
    n = 3 * s * (s + 1) ** 2
    conn = element_edges(s)
    rhs = np.bincount(conn.ravel(), weights=fe.ravel(), minlength=n)
    if neumann_faces:
        uv, w2 = gauss_square(order)
        for face in neumann_faces:
            fpts = _face_param(face, uv)
            elems = _face_elements(s, face)
            xf, dgf, _ = element_geometry(patch, fpts, elems)
            nds = _face_normal(dgf, face)
            g = case.g_N(xf, nds)
            tg = np.linalg.solve(dgf, g[..., None])[..., 0]
            fv, _ = reference_basis(fpts)
            fe = np.einsum("eqa,qka,q->ek", tg, fv, w2)
            rhs += np.bincount(conn[elems].ravel(), weights=fe.ravel(), minlength=n)
    return rhs


def edge_integrals(field_fn, start, end, n_gauss=4):
    """Line integrals of ``field . t`` along straight segments ``start -> end``."""
    g, w = np.polynomial.legendre.leggauss(n_gauss)
    g, w = (g + 1) / 2, w / 2
    d = end - start
    pts = start[:, None, :] + g[None, :, None] * d[:, None, :]
    vals = field_fn(pts)
    return np.einsum("eqa,ea,q->e", vals, d, w)


def dirichlet_values(graph, case):
    """Edge-integral coefficients of ``A`` for every global edge (global orientation)."""
    xc = graph.node_coords
    en = graph.edge_nodes
    return edge_integrals(case.A, xc[en[:, 0]], xc[en[:, 1]])


@dataclass
class LocalSystem:
    """Subdomain stiffness and load in global edge orientation with DOF tags."""

    patch: int
    K: csr_matrix
    j: np.ndarray
    tags: np.ndarray
    values: np.ndarray
    global_edges: np.ndarray
    signs: np.ndarray
    index: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = {name: np.flatnonzero(self.tags == t) for t, name in enumerate(TAG_NAMES)}
        self.index["r"] = np.flatnonzero(self.tags >= TAG_RI)
        self.index["fixed"] = np.flatnonzero(self.tags <= TAG_TREE)

    @property
    def n(self):
        return len(self.j)

    def block(self, rows, cols):
        return self.K[self.index[rows]][:, self.index[cols]]

    def reduced_rhs(self):
        """Load with fixed (Dirichlet and gauge) values moved to the right-hand side."""
        return eliminate_dirichlet(self.K, self.j, self.index["fixed"], self.values[self.index["fixed"]])


def eliminate_dirichlet(K, j, fixed, values):
    """Load vector over the retained DOFs after prescribing ``values`` on ``fixed``.

    Returns ``(retained ids, j_retained)``.
    """
    n = K.shape[0]
    keep = np.setdiff1d(np.arange(n), fixed)
    jr = j[keep].copy()
    if len(fixed) and np.any(values):
        jr -= K[keep][:, fixed] @ values
    return keep, jr


def build_local_systems(dec, graph, gauge, bc, case, nu=1.0, rhs_order=RHS_ORDER):
    """Assemble every subdomain and tag its DOFs.

    Dirichlet tags take precedence over tree tags; gauge edges carry the value 0.
    """
    avals = dirichlet_values(graph, case) if case is not None else np.zeros(graph.n_edges)
    primal = gauge.primal if gauge.primal is not None else np.zeros(graph.n_edges, dtype=bool)
    out = []
    for i, patch in enumerate(dec.patches):
        pe = graph.patch_edges[i]
        sg = graph.patch_signs[i].astype(float)
        K = assemble_stiffness(patch, nu)
        nfaces = [f for f, lab in enumerate(dec.face_labels[i]) if lab is not None and bc.tag(lab) == "N"]
        j = assemble_rhs(patch, case, nfaces, order=rhs_order) if case is not None else np.zeros(len(pe))
        S = _diag(sg)
        Kg = (S @ K @ S).tocsr()
        jg = sg * j
        tags = np.full(len(pe), TAG_RV, dtype=np.int8)
        tags[graph.edge_owner_count[pe] > 1] = TAG_RI
        tags[primal[pe]] = TAG_PRIMAL
        tags[gauge.eliminated[pe]] = TAG_TREE
        tags[graph.edge_D[pe]] = TAG_DIRICHLET
        values = np.where(tags == TAG_DIRICHLET, avals[pe], 0.0)
        out.append(LocalSystem(i, Kg, jg, tags, values, pe, sg.astype(np.int8)))
    return out


def _diag(v):
    n = len(v)
    return csr_matrix((v, (np.arange(n), np.arange(n))), shape=(n, n))


def element_curls(patch, coeffs_local, pts):
    """Physical curl of the discrete field at reference points of every element."""
    x, dg, det = element_geometry(patch, pts)
    _, crl = reference_basis(pts)
    a = coeffs_local[element_edges(patch.s_h)]
    ref = np.einsum("ek,qkb->eqb", a, crl)
    return x, np.einsum("eqab,eqb->eqa", dg, ref) / det[..., None], det


def element_fluxes(patch, coeffs_local):
    """Six outward face fluxes of the discrete curl per element, shape (s^3, 6)."""
    a = coeffs_local[element_edges(patch.s_h)]
    return a @ face_flux_matrix().T


def error_B(dec, coeffs, case, order=4):
    """Broken L2 error of the flux density; ``coeffs[i]`` in global orientation."""
    pts, wts = gauss_cube(order)
    total = 0.0
    for patch, (a, sg) in zip(dec.patches, coeffs):
        x, b, det = element_curls(patch, a * sg, pts)
        diff = case.B(x) - b
        total += float(np.einsum("eqa,eqa,eq,q->", diff, diff, det, wts))
    return np.sqrt(total)


def patch_coefficients(graph, a_global):
    """Split a global coefficient vector into per-patch (coeffs, signs) pairs."""
    return [(a_global[pe], sg.astype(float)) for pe, sg in zip(graph.patch_edges, graph.patch_signs)]


def all_fluxes(dec, coeffs):
    """Stacked element face fluxes over all patches."""
    return np.concatenate([element_fluxes(p, a * sg).ravel() for p, (a, sg) in zip(dec.patches, coeffs)])


def boundary_faces_of_type(dec, bc, i, tag):
    return [f for f, lab in enumerate(dec.face_labels[i]) if lab is not None and bc.tag(lab) == tag]


def local_face_edge_set(dec, i, faces):
    s = dec.patches[i].s_h
    if not faces:
        return np.zeros(0, dtype=np.int64)
    return np.unique(np.concatenate([local_face_edges(s, f) for f in faces]))
