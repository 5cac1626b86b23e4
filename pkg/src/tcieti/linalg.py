"""Sparse factorizations with singularity detection, PCG and Lanczos estimates."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse import csc_matrix, issparse
from scipy.sparse.linalg import splu

SINGULAR_RTOL = 1e-12
DENSE_FALLBACK_MAX = 6000


class FactorizationError(RuntimeError):
    """A singular block that cannot be handled; carries the owner id."""

    def __init__(self, message, owner=None, pivot=None):
        super().__init__(message)
        self.owner = owner
        self.pivot = pivot


class SparseFactor:
    """LU of a symmetric matrix with symmetric pivoting and a pivot test.

    The factor is flagged ``singular`` when the smallest pivot magnitude is
    below ``SINGULAR_RTOL`` times the largest diagonal entry.  With
    ``tolerant=True`` a singular matrix is still usable: solves fall back to a
    pseudo-inverse, which mimics the implicit gauge of a tolerant LDL^T.
    """

    def __init__(self, A, owner=None, tolerant=False):
        self.owner = owner
        self.n = A.shape[0]
        self.singular = False
        self.pivot = None
        self._lu = None
        self._pinv = None
        self._dense = None
        if self.n == 0:
            return
        A = csc_matrix(A) if issparse(A) else csc_matrix(np.atleast_2d(A))
        scale = float(np.max(np.abs(A.diagonal()))) if self.n else 0.0
        try:
            lu = splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                      options={"SymmetricMode": True})
            piv = np.abs(lu.U.diagonal())
            j = int(np.argmin(piv))
            if not np.isfinite(piv).all() or piv[j] < SINGULAR_RTOL * max(scale, np.finfo(float).tiny):
                self.singular = True
                self.pivot = int(np.flatnonzero(lu.perm_c == j)[0])
            else:
                self._lu = lu
        except RuntimeError:
            self.singular = True
        if self.singular:
            if not tolerant:
                raise FactorizationError(
                    f"singular matrix (block {owner}, pivot {self.pivot})", owner, self.pivot)
            if self.n > DENSE_FALLBACK_MAX:
                raise FactorizationError(f"singular block {owner} too large for the dense fallback", owner)
            self._pinv = np.linalg.pinv(A.toarray(), rcond=1e-10, hermitian=True)

    def solve(self, b):
        if self.n == 0:
            return np.zeros_like(b)
        if self._lu is not None:
            return self._lu.solve(np.asarray(b, dtype=float))
        return self._pinv @ b


class DenseFactor:
    """Symmetric dense factor for small matrices (coarse problem)."""

    def __init__(self, A, owner=None, tolerant=False):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        self.n = A.shape[0]
        self.owner = owner
        self.singular = False
        self.pivot = None
        self._pinv = None
        self._lu = None
        if self.n == 0:
            return
        with warnings.catch_warnings():
            # singularity is judged below with an explicit threshold
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(A, check_finite=True)
        d = np.abs(np.diag(lu))
        scale = np.max(np.abs(np.diag(A)))
        if d.min() < SINGULAR_RTOL * max(scale, np.finfo(float).tiny):
            self.singular = True
            self.pivot = int(np.argmin(d))
            if not tolerant:
                raise FactorizationError(f"singular matrix (block {owner}, pivot {self.pivot})", owner, self.pivot)
            self._pinv = np.linalg.pinv(A, rcond=1e-10, hermitian=True)
        else:
            self._lu = (lu, piv)

    def solve(self, b):
        if self.n == 0:
            return np.zeros_like(b)
        if self._lu is not None:
            return sla.lu_solve(self._lu, b)
        return self._pinv @ b


@dataclass
class PCGResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residuals: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    betas: list = field(default_factory=list)

    def condition(self):
        """Extreme Ritz values from the CG-coupled Lanczos tridiagonal."""
        return cg_lanczos_condition(self.alphas, self.betas)


def pcg(apply_A, b, apply_M=None, tol=1e-6, maxiter=None, x0=None):
    """Preconditioned CG on an SPD operator, stopping on the relative preconditioned residual.

    Records the energy functional ``0.5 x'Ax - b'x`` after every step, which
    is non-increasing in exact arithmetic.
    """
    n = len(b)
    maxiter = max(10 * n, 1) if maxiter is None else maxiter
    M = (lambda r: r) if apply_M is None else apply_M
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - apply_A(x) if x0 is not None else b.copy()
    z = M(r)
    rz = float(r @ z)
    res0 = np.sqrt(abs(rz))
    out = PCGResult(x, 0, True, [1.0 if res0 > 0 else 0.0], [0.0 if x0 is None else float(0.5 * x @ apply_A(x) - b @ x)])
    if res0 == 0.0:
        return out
    p = z.copy()
    for k in range(maxiter):
        q = apply_A(p)
        pq = float(p @ q)
        if pq <= 0 or not np.isfinite(pq):
            out.converged = False
            break
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        out.energy.append(out.energy[-1] - 0.5 * alpha * rz)
        z = M(r)
        rz_new = float(r @ z)
        beta = rz_new / rz
        out.alphas.append(alpha)
        out.betas.append(beta)
        out.iterations = k + 1
        rel = np.sqrt(abs(rz_new)) / res0
        out.residuals.append(rel)
        if rel <= tol:
            out.converged = True
            break
        p = z + beta * p
        rz = rz_new
    else:
        out.converged = False
    out.x = x
    return out


def cg_lanczos_condition(alphas, betas):
    """(kappa, lambda_min, lambda_max) from CG coefficients, or None on breakdown."""
    m = len(alphas)
    if m == 0:
        return None
    a = np.asarray(alphas)
    b = np.asarray(betas)
    if np.any(a <= 0) or not np.all(np.isfinite(a)) or np.any(b < 0):
        return None
    diag = 1.0 / a
    diag[1:] += b[:m - 1] / a[:m - 1]
    off = np.sqrt(b[:m - 1]) / a[:m - 1]
    ev = sla.eigvalsh_tridiagonal(diag, off) if m > 1 else diag
    lo, hi = float(ev.min()), float(ev.max())
    if lo <= 0 or not np.isfinite(hi):
        return None
    return hi / lo, lo, hi


def lanczos(apply_A, n, steps=80, seed=0, tol=1e-10):
    """Lanczos with full reorthogonalization; returns Ritz values or None on NaN."""
    steps = min(steps, n)
    if steps == 0:
        return np.zeros(0)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    V = np.zeros((steps, n))
    alpha, beta = [], []
    for k in range(steps):
        V[k] = v
        w = apply_A(v)
        if not np.all(np.isfinite(w)):
            return None
        a = float(w @ v)
        w = w - V[:k + 1].T @ (V[:k + 1] @ w)
        w = w - V[:k + 1].T @ (V[:k + 1] @ w)
        alpha.append(a)
        bnorm = float(np.linalg.norm(w))
        if k == steps - 1 or bnorm <= tol * max(abs(a), 1.0):
            break
        beta.append(bnorm)
        v = w / bnorm
    if len(alpha) == 1:
        return np.array(alpha)
    return sla.eigvalsh_tridiagonal(np.array(alpha), np.array(beta[:len(alpha) - 1]))


def estimate_condition(apply_A, n, apply_inv=None, steps=80, seed=0):
    """Ratio of extreme absolute eigenvalues, or None ("failed").

    The largest magnitude comes from Lanczos on ``A``; the smallest from
    Lanczos on ``A^{-1}`` when a solver is given, otherwise from the same run.
    A definite operator is expected: mixed signs or NaNs count as breakdown.
    """
    if n == 0:
        return None
    ritz = lanczos(apply_A, n, steps, seed)
    if ritz is None or len(ritz) == 0:
        return None
    if ritz.min() < 0 < ritz.max() and min(abs(ritz.min()), ritz.max()) > 1e-8 * np.abs(ritz).max():
        return None
    hi = float(np.abs(ritz).max())
    if apply_inv is None:
        lo = float(np.abs(ritz).min())
    else:
        inv = lanczos(apply_inv, n, steps, seed + 1)
        if inv is None or len(inv) == 0:
            return None
        big = float(np.abs(inv).max())
        if big == 0 or not np.isfinite(big):
            return None
        lo = 1.0 / big
    if lo <= 0 or not np.isfinite(hi):
        return None
    return hi / lo
