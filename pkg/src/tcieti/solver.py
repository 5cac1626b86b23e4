"""Dual-primal interface solver on tree-cotree gauged subdomain systems.

With the remaining DOFs ``r`` and primal DOFs ``p = C_p P`` of every
subdomain, the coarse matrix, coupling blocks and data vectors are

    F = sum C'(K_pr K_rr^-1 K_rp - K_pp) C      G = sum B K_rr^-1 K_rp C
    W = sum B K_rr^-1 B'                        d = sum C'(K_pr K_rr^-1 j_r - j_p)
    e = sum B K_rr^-1 j_r

and the multipliers solve ``S lam = G F^-1 d - e`` with ``S = G F^-1 G' - W``.
Both F and S are negative definite, so CG runs on ``-S``.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix

from .coupling import build_coupling, build_primal_basis, trim
from .fem import (TAG_PRIMAL, TAG_RI, TAG_RV, all_fluxes, build_local_systems, error_B)
from .linalg import DenseFactor, FactorizationError, SparseFactor, estimate_condition, pcg
from .tree import build_gauge, eliminated_graph_connected, validate_hierarchy

SIGN_CONVENTION = "pcg on -S (S = G F^-1 G' - W is negative definite)"
PRECONDITIONERS = ("none", "lumped", "dirichlet")


class SolverFailure(RuntimeError):
    """Raised when the interface iteration does not converge."""


@dataclass
class Subdomain:
    """Partitioned blocks of one subdomain, all in global edge orientation."""

    index: int
    r: np.ndarray
    p: np.ndarray
    K_rr: csr_matrix
    K_rp: csr_matrix
    K_pp: csr_matrix
    j_r: np.ndarray
    j_p: np.ndarray
    B: csr_matrix
    C: csr_matrix
    r_I: np.ndarray
    r_V: np.ndarray
    factor: SparseFactor | None = None
    cols: np.ndarray | None = None
    X: np.ndarray | None = None
    KrpC: np.ndarray | None = None


def _split(system):
    """Blocks over retained DOFs with fixed values moved to the load."""
    K, tags = system.K, system.tags
    r = np.flatnonzero(tags >= TAG_RI)
    p = np.flatnonzero(tags == TAG_PRIMAL)
    fixed = system.index["fixed"]
    rhs = system.j.copy()
    if len(fixed) and np.any(system.values[fixed]):
        rhs -= K[:, fixed] @ system.values[fixed]
    Kr = K[r]
    return r, p, Kr[:, r].tocsr(), Kr[:, p].tocsr(), K[p][:, p].tocsr(), rhs[r], rhs[p]


def factorize_locals(subs, tolerant=False, threads=1):
    """Factorize every K_rr; singular blocks are collected, not raised one by one.

    Returns the list of singular subdomain ids.  With ``tolerant`` the
    singular blocks get a pseudo-inverse and the solve can continue.
    """
    def work(s):
        try:
            s.factor = SparseFactor(s.K_rr, owner=s.index, tolerant=tolerant)
            return s.factor.singular, None
        except FactorizationError as exc:
            return True, exc

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(work, subs))
    singular = [s.index for s, (sing, _) in zip(subs, results) if sing]
    errors = [exc for _, exc in results if exc is not None]
    if errors:
        exc = errors[0]
        err = FactorizationError(f"singular K_rr in subdomains {singular}", exc.owner, exc.pivot)
        err.singular = singular
        raise err
    return singular


class DualPrimalOperators:
    """Factorized local blocks, coarse problem and the implicit interface operator."""

    def __init__(self, systems, coupling_r, basis, tolerant=False, threads=1):
        self.threads = max(1, threads)
        self.tolerant = tolerant
        self.basis = basis
        self.coupling_r = coupling_r
        self.m_r = coupling_r.n_rows
        self.n_gp = basis.n_gp
        self.subs = []
        for sys, C in zip(systems, basis.blocks):
            r, p, Krr, Krp, Kpp, jr, jp = _split(sys)
            col = -np.ones(sys.n, dtype=np.int64)
            col[r] = np.arange(len(r))
            B = coupling_r.block(sys.patch, col) if len(r) else csr_matrix((self.m_r, 0))
            if B.shape[1] < len(r):
                B = csr_matrix((B.data, B.indices, B.indptr), shape=(self.m_r, len(r)))
            tr = sys.tags[r]
            self.subs.append(Subdomain(sys.patch, r, p, Krr, Krp, Kpp, jr, jp, B.astype(float),
                                       C.astype(float).tocsr(), np.flatnonzero(tr == TAG_RI),
                                       np.flatnonzero(tr == TAG_RV)))
        self.times = {}
        t0 = time.perf_counter()
        self.singular = factorize_locals(self.subs, tolerant=tolerant, threads=self.threads)
        self.times["factorize"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        self.F, self.G, self.d, self.e = assemble_coarse(self.subs, self.m_r, self.n_gp, self.threads)
        self.F_factor = DenseFactor(self.F, owner="F", tolerant=tolerant)
        self.times["coarse"] = time.perf_counter() - t0
        self._dir = None

    # -- implicit operators -------------------------------------------------

    def _map(self, fn):
        if self.threads == 1:
            return [fn(s) for s in self.subs]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return list(pool.map(fn, self.subs))

    def apply_W(self, lam):
        parts = self._map(lambda s: s.B @ s.factor.solve(s.B.T @ lam) if s.B.shape[1] else None)
        out = np.zeros(self.m_r)
        for v in parts:
            if v is not None:
                out += v
        return out

    def apply_S(self, lam):
        """S lam = G F^-1 G' lam - W lam, never assembling S."""
        out = -self.apply_W(lam)
        if self.n_gp:
            out += self.G @ self.F_factor.solve(self.G.T @ lam)
        return out

    def apply_neg_S(self, lam):
        return -self.apply_S(lam)

    def rhs(self):
        """G F^-1 d - e."""
        out = -self.e.copy()
        if self.n_gp:
            out += self.G @ self.F_factor.solve(self.d)
        return out

    def lumped(self):
        """M_L^-1 = sum B_I K_II B_I'."""
        blocks = [(s.B[:, s.r_I], s.K_rr[s.r_I][:, s.r_I]) for s in self.subs]

        def apply(x):
            out = np.zeros(self.m_r)
            for B, K in blocks:
                if B.shape[1]:
                    out += B @ (K @ (B.T @ x))
            return out
        return apply

    def dirichlet(self):
        """M_D^-1 = sum B_I (K_II - K_IV K_VV^-1 K_VI) B_I'."""
        if self._dir is None:
            self._dir = []
            for s in self.subs:
                KII = s.K_rr[s.r_I][:, s.r_I]
                KIV = s.K_rr[s.r_I][:, s.r_V]
                fac = SparseFactor(s.K_rr[s.r_V][:, s.r_V], owner=s.index, tolerant=self.tolerant)
                self._dir.append((s.B[:, s.r_I], KII, KIV, fac))

        def apply(x):
            out = np.zeros(self.m_r)
            for B, KII, KIV, fac in self._dir:
                if not B.shape[1]:
                    continue
                y = B.T @ x
                z = KII @ y
                if KIV.shape[1]:
                    z -= KIV @ fac.solve(KIV.T @ y)
                out += B @ z
            return out
        return apply

    def preconditioner(self, kind):
        if kind == "none":
            return None
        if kind == "lumped":
            return self.lumped()
        if kind == "dirichlet":
            return self.dirichlet()
        raise ValueError(f"unknown preconditioner {kind!r}")

    def dense_S(self):
        """Explicit S for small checks."""
        return np.column_stack([self.apply_S(c) for c in np.eye(self.m_r)])

    # -- solve and recovery -------------------------------------------------

    def solve_interface(self, precond="dirichlet", tol=1e-6, maxiter=None):
        maxiter = max(10 * self.m_r, 10) if maxiter is None else maxiter
        t0 = time.perf_counter()
        res = pcg(self.apply_neg_S, -self.rhs(), self.preconditioner(precond), tol=tol, maxiter=maxiter)
        self.times[f"pcg_{precond}"] = time.perf_counter() - t0
        return res

    def recover(self, lam, systems):
        """Primal and remaining coefficients; returns full local vectors."""
        P = self.F_factor.solve(self.d - self.G.T @ lam) if self.n_gp else np.zeros(0)
        out = []
        for s, sys in zip(self.subs, systems):
            a = sys.values.copy()
            ap = s.C @ P if self.n_gp else np.zeros(len(s.p))
            a[s.p] = ap
            if len(s.r):
                a[s.r] = s.factor.solve(s.j_r - s.K_rp @ ap - s.B.T @ lam)
            out.append(a)
        return P, out

    # -- condition numbers --------------------------------------------------

    def kappa_F(self):
        if self.n_gp == 0 or self.F_factor.singular:
            return None
        return estimate_condition(lambda x: -(self.F @ x), self.n_gp,
                                  lambda x: -self.F_factor.solve(x), steps=self.n_gp)

    def kappa_Krr(self):
        """Per-subdomain estimates; None where the factorization is singular."""
        out = []
        for s in self.subs:
            if s.factor.singular or len(s.r) == 0:
                out.append(None)
                continue
            out.append(estimate_condition(lambda x, K=s.K_rr: K @ x, len(s.r),
                                          lambda x, f=s.factor: f.solve(x), steps=60))
        return out


def assemble_coarse(subs, m_r, n_gp, threads=1):
    """Dense F, sparse G and the vectors d, e from local solves."""
    F = np.zeros((n_gp, n_gp))
    d = np.zeros(n_gp)
    e = np.zeros(m_r)
    g_rows, g_cols, g_vals = [], [], []
    for s in subs:
        if len(s.r):
            Kj = s.factor.solve(s.j_r)
            e += s.B @ Kj
        cols = np.unique(s.C.indices) if n_gp else np.zeros(0, dtype=np.int64)
        s.cols = cols
        if len(cols) == 0:
            continue
        Cl = s.C[:, cols].toarray()
        KrpC = (s.K_rp @ Cl) if len(s.r) else np.zeros((0, len(cols)))
        X = np.column_stack([s.factor.solve(c) for c in KrpC.T]) if len(s.r) else KrpC
        s.X, s.KrpC = X, KrpC
        Fl = KrpC.T @ X - Cl.T @ (s.K_pp @ Cl)
        F[np.ix_(cols, cols)] += Fl
        d[cols] += X.T @ s.j_r - Cl.T @ s.j_p
        if len(s.r):
            BX = coo_matrix(s.B @ X)
            g_rows.append(BX.row)
            g_cols.append(cols[BX.col])
            g_vals.append(BX.data)
    if g_rows:
        G = coo_matrix((np.concatenate(g_vals), (np.concatenate(g_rows), np.concatenate(g_cols))),
                       shape=(m_r, n_gp)).tocsr()
    else:
        G = csr_matrix((m_r, n_gp))
    F = 0.5 * (F + F.T)
    return F, G, d, e


@dataclass
class SolveReport:
    """Outcome of one dual-primal solve; ``None`` condition numbers mean failed."""

    precond: str
    tol: float
    iterations: int
    converged: bool
    residuals: list
    energy: list
    kappa: float | None
    kappa_F: float | None
    kappa_Krr: list | None
    eps_B: float | None
    n: int
    n_gp: int
    n_p: int
    m_r: int
    n_belt: int
    jump: float
    singular_subdomains: list
    disconnected_subdomains: list
    times: dict
    sign_convention: str = SIGN_CONVENTION

    def to_json(self, **kw):
        return json.dumps(asdict(self), default=_json_default, **kw)

    @property
    def kappa_Krr_max(self):
        if not self.kappa_Krr or any(k is None for k in self.kappa_Krr):
            return None
        return max(self.kappa_Krr)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


@dataclass
class Problem:
    """Everything up to the local systems, reusable for several solves."""

    dec: object
    graph: object
    bc: object
    case: object
    gauge: object
    systems: list
    coupling: object
    coupling_r: object
    coupling_p: object
    basis: object
    disconnected: list = field(default_factory=list)
    hierarchy: object = None


def setup_problem(dec, graph, bc, case, belt=True, tie_break=None, force_empty_primal=False, nu=1.0):
    """Gauge, assemble and couple: everything except factorizations."""
    gauge = build_gauge(graph, dec, belt=belt, tie_break=tie_break, force_empty_primal=force_empty_primal)
    systems = build_local_systems(dec, graph, gauge, bc, case, nu)
    coupling = build_coupling(graph)
    eliminated = [s.tags <= 1 for s in systems]
    primal = [s.tags == TAG_PRIMAL for s in systems]
    B_r, B_p = trim(coupling, eliminated, primal)
    basis = build_primal_basis(B_p, graph, gauge.primal)
    disconnected = [i for i in range(graph.n_patches) if not eliminated_graph_connected(i, gauge, graph)]
    return Problem(dec, graph, bc, case, gauge, systems, coupling, B_r, B_p, basis,
                   disconnected, validate_hierarchy(gauge, graph))


def interface_jump(problem, coeffs):
    """Largest coupling-row jump of the local vectors relative to their max norm."""
    if problem.coupling.n_rows == 0:
        return 0.0
    jumps = problem.coupling.apply(coeffs)
    scale = max(max((np.abs(a).max() for a in coeffs if len(a)), default=0.0), np.finfo(float).tiny)
    return float(np.abs(jumps).max() / scale)


def solve(problem, precond="dirichlet", tol=1e-6, tolerant=False, threads=1,
          estimate=("S",), ops=None, maxiter=None, strict=True):
    """Run the dual-primal method and return ``(report, local coefficients, ops)``."""
    t0 = time.perf_counter()
    if ops is None:
        ops = DualPrimalOperators(problem.systems, problem.coupling_r, problem.basis,
                                  tolerant=tolerant, threads=threads)
    res = ops.solve_interface(precond, tol, maxiter)
    if strict and not res.converged:
        raise SolverFailure(f"PCG did not converge in {res.iterations} iterations")
    _, coeffs = ops.recover(res.x, problem.systems)
    sg = [s.signs.astype(float) for s in problem.systems]
    eps = error_B(problem.dec, list(zip(coeffs, sg)), problem.case) if problem.case is not None else None
    cond = res.condition() if "S" in estimate else None
    report = SolveReport(
        precond=precond, tol=tol, iterations=res.iterations, converged=res.converged,
        residuals=[float(v) for v in res.residuals], energy=[float(v) for v in res.energy],
        kappa=None if cond is None else float(cond[0]),
        kappa_F=ops.kappa_F() if "F" in estimate else None,
        kappa_Krr=ops.kappa_Krr() if "Krr" in estimate else None,
        eps_B=eps, n=int(sum(s.n for s in problem.systems)), n_gp=ops.n_gp,
        n_p=problem.gauge.n_p, m_r=ops.m_r, n_belt=problem.gauge.n_belt,
        jump=interface_jump(problem, coeffs), singular_subdomains=list(ops.singular),
        disconnected_subdomains=list(problem.disconnected),
        times=dict(ops.times, total=time.perf_counter() - t0))
    return report, coeffs, ops


def monolithic_solve(problem):
    """Undecomposed system with the same global gauge, solved directly.

    Returns per-patch coefficient vectors in global orientation.
    """
    graph = problem.graph
    ne = graph.n_edges
    rows, cols, vals = [], [], []
    rhs = np.zeros(ne)
    values = np.zeros(ne)
    fixed = np.zeros(ne, dtype=bool)
    for s in problem.systems:
        K = s.K.tocoo()
        ge = s.global_edges
        rows.append(ge[K.row])
        cols.append(ge[K.col])
        vals.append(K.data)
        np.add.at(rhs, ge, s.j)
        fx = s.tags <= 1
        fixed[ge[fx]] = True
        values[ge[fx]] = s.values[fx]
    K = coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ne, ne)).tocsr()
    free = np.flatnonzero(~fixed)
    b = rhs[free] - K[free][:, fixed] @ values[fixed]
    fac = SparseFactor(K[free][:, free], owner="global")
    a = values.copy()
    a[free] = fac.solve(b)
    return [a[pe] for pe in graph.patch_edges], a


def element_fluxes_of(problem, coeffs):
    sg = [s.signs.astype(float) for s in problem.systems]
    return all_fluxes(problem.dec, list(zip(coeffs, sg)))
