"""Signed Boolean coupling between subdomain copies of interface edges.

Local systems live in global edge orientation, so every continuity row is
``a_j[l_j] - a_k[l_k] = 0`` with coefficients exactly +1 and -1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix


class ConsistencyError(RuntimeError):
    """Eliminated or primal sets disagree across an interface."""


@dataclass(frozen=True)
class CouplingMatrix:
    """Rows ``(patch_plus, local_plus, patch_minus, local_minus, global_edge)``."""

    plus_patch: np.ndarray
    plus_local: np.ndarray
    minus_patch: np.ndarray
    minus_local: np.ndarray
    edge: np.ndarray
    sizes: tuple

    @property
    def n_rows(self):
        return len(self.edge)

    def subset(self, mask):
        return CouplingMatrix(self.plus_patch[mask], self.plus_local[mask],
                              self.minus_patch[mask], self.minus_local[mask],
                              self.edge[mask], self.sizes)

    def block(self, i, columns=None):
        """Integer matrix of rows x local DOFs of patch ``i``.

        ``columns`` optionally maps local ids to a compressed column index
        (-1 for DOFs outside the block).
        """
        rows, cols, vals = [], [], []
        for patch, local, sign in ((self.plus_patch, self.plus_local, 1),
                                   (self.minus_patch, self.minus_local, -1)):
            r = np.flatnonzero(patch == i)
            rows.append(r)
            cols.append(local[r])
            vals.append(np.full(len(r), sign, dtype=np.int64))
        rows, cols, vals = map(np.concatenate, (rows, cols, vals))
        n = self.sizes[i]
        if columns is not None:
            cols = columns[cols]
            if np.any(cols < 0):
                raise ConsistencyError("coupling row hits a DOF outside the requested block")
            n = int(columns.max()) + 1 if len(columns) and columns.max() >= 0 else 0
        return coo_matrix((vals, (rows, cols)), shape=(self.n_rows, n)).tocsr()

    def apply(self, local_vectors):
        """Jumps ``B a`` for per-patch vectors."""
        out = np.zeros(self.n_rows)
        for i, v in enumerate(local_vectors):
            r = self.plus_patch == i
            out[r] += v[self.plus_local[r]]
            r = self.minus_patch == i
            out[r] -= v[self.minus_local[r]]
        return out

    def dense(self):
        """Full integer matrix over the concatenated local DOFs (small cases)."""
        off = np.concatenate([[0], np.cumsum(self.sizes)])
        m = np.zeros((self.n_rows, off[-1]), dtype=np.int64)
        r = np.arange(self.n_rows)
        m[r, off[self.plus_patch] + self.plus_local] += 1
        m[r, off[self.minus_patch] + self.minus_local] -= 1
        return m


def build_coupling(graph):
    """Chained rows: copy c is tied to copy c+1 in ascending patch order."""
    edges, patch, local = graph.owner_table()
    same = edges[1:] == edges[:-1]
    idx = np.flatnonzero(same)
    sizes = tuple(len(pe) for pe in graph.patch_edges)
    return CouplingMatrix(patch[idx], local[idx], patch[idx + 1], local[idx + 1], edges[idx], sizes)


def trim(coupling, eliminated, primal):
    """Drop rows on eliminated DOFs and split the rest into ``(B_r, B_p)``.

    ``eliminated`` and ``primal`` are per-patch boolean arrays over local DOFs.
    """
    e_plus = _lookup(eliminated, coupling.plus_patch, coupling.plus_local)
    e_minus = _lookup(eliminated, coupling.minus_patch, coupling.minus_local)
    if np.any(e_plus != e_minus):
        bad = int(coupling.edge[np.flatnonzero(e_plus != e_minus)[0]])
        raise ConsistencyError(f"edge {bad} is eliminated on one side of the interface only")
    keep = ~e_plus
    p_plus = _lookup(primal, coupling.plus_patch, coupling.plus_local)
    p_minus = _lookup(primal, coupling.minus_patch, coupling.minus_local)
    if np.any((p_plus != p_minus) & keep):
        bad = int(coupling.edge[np.flatnonzero((p_plus != p_minus) & keep)[0]])
        raise ConsistencyError(f"edge {bad} is primal on one side of the interface only")
    return coupling.subset(keep & ~p_plus), coupling.subset(keep & p_plus)


def _lookup(masks, patch, local):
    out = np.zeros(len(patch), dtype=bool)
    for i, m in enumerate(masks):
        r = patch == i
        out[r] = np.asarray(m)[local[r]]
    return out


@dataclass(frozen=True)
class PrimalBasis:
    """Per-patch 0/1 maps from global primal unknowns to local primal copies."""

    blocks: tuple
    primal_edges: np.ndarray
    local_primal: tuple

    @property
    def n_gp(self):
        return len(self.primal_edges)

    def dense(self, sizes):
        """C_p stacked over all local DOFs (rows) for checks on small cases."""
        off = np.concatenate([[0], np.cumsum(sizes)])
        c = np.zeros((off[-1], self.n_gp), dtype=np.int64)
        for i, (blk, lp) in enumerate(zip(self.blocks, self.local_primal)):
            c[off[i] + lp] = blk.toarray()
        return c


def build_primal_basis(B_p, graph, primal_mask):
    """One column per global primal edge, a 1 for each local copy.

    Verifies ``B_p C_p = 0`` in integer arithmetic.
    """
    primal_edges = np.flatnonzero(primal_mask)
    col = -np.ones(graph.n_edges, dtype=np.int64)
    col[primal_edges] = np.arange(len(primal_edges))
    blocks, local_primal = [], []
    for pe in graph.patch_edges:
        lp = np.flatnonzero(primal_mask[pe])
        blocks.append(csr_matrix((np.ones(len(lp), dtype=np.int64), (np.arange(len(lp)), col[pe[lp]])),
                                 shape=(len(lp), len(primal_edges))))
        local_primal.append(lp)
    basis = PrimalBasis(tuple(blocks), primal_edges, tuple(local_primal))
    check_primal_kernel(B_p, basis)
    counts = np.zeros(len(primal_edges), dtype=np.int64)
    for blk in blocks:
        counts += np.asarray(blk.sum(axis=0)).ravel()
    if np.any(counts < 2):
        raise ConsistencyError("primal edge with fewer than two local copies")
    return basis


def check_primal_kernel(B_p, basis):
    """Exact integer check that every primal coupling row annihilates C_p."""
    prod = np.zeros((B_p.n_rows, basis.n_gp), dtype=np.int64)
    for i, (blk, lp) in enumerate(zip(basis.blocks, basis.local_primal)):
        cols = -np.ones(B_p.sizes[i], dtype=np.int64)
        cols[lp] = np.arange(len(lp))
        bi = B_p.block(i, cols) if len(lp) else None
        if bi is not None and bi.shape[1]:
            prod += (bi @ blk).toarray().astype(np.int64)
    if np.any(prod != 0):
        raise ConsistencyError("B_p C_p is not zero")
    return prod
