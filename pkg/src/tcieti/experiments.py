"""Parameter studies: convergence, torus kernels, scalability and coarse-size ratios."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .fem import trig_case
from .mesh import BoundaryConfig, build_cube_decomposition, build_torus_decomposition, coarse_euler_constant
from .solver import PRECONDITIONERS, setup_problem, solve
from .tree import InvariantViolation, build_gauge, cotree_wire_count, validate_hierarchy

FAILED = "---"

TORUS_LAYOUTS = {3: (3, 1), 6: (3, 2)}


@dataclass
class ExperimentConfig:
    geometry: str = "cube"
    layout: str = "cube-mixed"
    s_h: tuple = (2, 4, 8, 16)
    s_H: tuple = (2,)
    n_ring: tuple = (3, 6)
    precond: str = "dirichlet"
    tol: float = 1e-6
    belt: bool = True
    threads: int = 1
    out: str | None = None

    def __post_init__(self):
        self.s_h = tuple(int(v) for v in self.s_h)
        self.s_H = tuple(int(v) for v in self.s_H)
        if not self.s_h or not self.s_H:
            raise ValueError("s_h and s_H lists must be nonempty")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.precond not in PRECONDITIONERS:
            raise ValueError(f"unknown preconditioner {self.precond!r}")


@dataclass
class ExperimentResult:
    columns: list
    rows: list
    reports: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def ok(self):
        return all(self.checks.values())

    def column(self, name):
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def write(self, path, config=None):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.rows:
                w.writerow([_fmt(v) for v in row])
        side = {"config": asdict(config) if config is not None else None,
                "checks": self.checks, "extra": self.extra,
                "reports": [json.loads(r.to_json()) for r in self.reports]}
        path.with_suffix(".json").write_text(json.dumps(side, indent=1))
        return path


def _fmt(v):
    if v is None:
        return FAILED
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def fitted_slope(s_h, eps):
    """Least-squares slope of log eps over log s_h."""
    if len(s_h) < 2:
        return None
    return float(np.polyfit(np.log(s_h), np.log(eps), 1)[0])


def _cube_problem(s_H, s_h, layout, belt=True):
    bc = BoundaryConfig.layout(layout)
    dec, graph = build_cube_decomposition(s_H, s_h, bc)
    return setup_problem(dec, graph, bc, trig_case(), belt=belt)


def _checked(problem, checks, key):
    checks[f"{key}:hierarchy"] = bool(problem.hierarchy.ok)
    checks[f"{key}:local_invertibility"] = not problem.disconnected


def run_convergence(cfg):
    """eps_B over s_h on the cube, with the rate between consecutive rows."""
    cols = ["s_H", "s_h", "eps_B", "rate", "iterations", "n"]
    res = ExperimentResult(cols, [])
    for s_H in cfg.s_H:
        prev = None
        for s_h in cfg.s_h:
            pr = _cube_problem(s_H, s_h, cfg.layout, cfg.belt)
            _checked(pr, res.checks, f"{s_H}x{s_h}")
            rep, _, _ = solve(pr, cfg.precond, cfg.tol, threads=cfg.threads)
            rate = None if prev is None else float(np.log(prev[1] / rep.eps_B) / np.log(s_h / prev[0]))
            res.rows.append([s_H, s_h, rep.eps_B, rate if prev is not None else "", rep.iterations, rep.n])
            res.reports.append(rep)
            prev = (s_h, rep.eps_B)
        res.extra[f"slope_s_H={s_H}"] = fitted_slope(
            [r[1] for r in res.rows if r[0] == s_H], [r[2] for r in res.rows if r[0] == s_H])
    return res


def run_torus_study(cfg, s_h=None):
    """Condition numbers and error for mixed, Neumann and Neumann-with-belt setups."""
    s_h = cfg.s_h[0] if s_h is None else s_h
    cols = ["config", "N", "cond_Krr", "cond_F", "cond_S", "eps_B"]
    res = ExperimentResult(cols, [])
    setups = (("mixed", "torus-mixed", False), ("Neumann", "torus-neumann", False),
              ("Mod.", "torus-neumann", True))
    for N in cfg.n_ring:
        n_ring, layers = TORUS_LAYOUTS.get(N, (N, 1))
        for name, layout, belt in setups:
            bc = BoundaryConfig.layout(layout)
            dec, graph = build_torus_decomposition(n_ring, s_h, bc, layers=layers)
            pr = setup_problem(dec, graph, bc, trig_case(), belt=belt)
            res.checks[f"{name}-{N}:hierarchy"] = bool(pr.hierarchy.ok)
            rep, _, ops = solve(pr, "none", cfg.tol, tolerant=True, threads=cfg.threads,
                                estimate=("S", "F", "Krr"), strict=False)
            kr = rep.kappa_Krr_max
            res.rows.append([name, N, kr, rep.kappa_F, rep.kappa, rep.eps_B])
            res.reports.append(rep)
            res.extra[f"{name}-{N}"] = {"singular_subdomains": rep.singular_subdomains,
                                        "F_singular": bool(ops.F_factor.singular),
                                        "n_belt": rep.n_belt,
                                        "disconnected": rep.disconnected_subdomains}
    return res


SCALABILITY_DEFAULTS = {
    1: [(2, 2), (2, 4), (2, 8), (2, 16)],
    2: [(2, 8), (4, 4), (8, 2)],
    3: [(2, 2), (3, 2), (4, 2)],
}


def scalability_pairs(test, cfg=None):
    """(s_H, s_h) rows of a scalability test, honouring explicit config lists."""
    if cfg is None:
        return SCALABILITY_DEFAULTS[test]
    if test == 1:
        return [(cfg.s_H[0], s) for s in cfg.s_h]
    if test == 3:
        return [(H, cfg.s_h[0]) for H in cfg.s_H]
    return SCALABILITY_DEFAULTS[2]


def run_scalability(cfg, test, pairs=None):
    """All three preconditioner variants per row of the chosen test."""
    if test not in (1, 2, 3):
        raise ValueError("test must be 1, 2 or 3")
    pairs = scalability_pairs(test, cfg) if pairs is None else pairs
    cols = ["s_H", "s_h", "n_gp", "cond_S", "cond_MLS", "cond_MDS", "it_S", "it_MLS", "it_MDS", "eps_B"]
    res = ExperimentResult(cols, [])
    for s_H, s_h in pairs:
        pr = _cube_problem(s_H, s_h, cfg.layout, cfg.belt)
        _checked(pr, res.checks, f"{s_H}x{s_h}")
        ops, kap, its, eps = None, {}, {}, None
        for pc in PRECONDITIONERS:
            rep, _, ops = solve(pr, pc, cfg.tol, threads=cfg.threads, ops=ops)
            kap[pc], its[pc] = rep.kappa, rep.iterations
            res.reports.append(rep)
            if pc == cfg.precond:
                eps = rep.eps_B
        res.rows.append([s_H, s_h, ops.n_gp, kap["none"], kap["lumped"], kap["dirichlet"],
                         its["none"], its["lumped"], its["dirichlet"], eps])
    return res


def coarse_ratio_limit(s_h):
    """Limit of |E_lambda_c| / n for many subdomains."""
    return 2.0 / (3.0 * s_h * (s_h + 1) ** 2)


def run_appendix_ratios(cfg):
    """Counted and closed-form wire-basket and cotree sizes on the cube."""
    cols = ["s_H", "s_h", "cotree_counted", "cotree_formula", "n_gp", "n_counted", "n_formula",
            "wire_counted", "wire_formula", "ratio_cotree_n", "r_lambda_percent"]
    res = ExperimentResult(cols, [])
    bc = BoundaryConfig.layout(cfg.layout)
    for s_H in cfg.s_H:
        for s_h in cfg.s_h:
            dec, graph = build_cube_decomposition(s_H, s_h, bc)
            gauge = build_gauge(graph, dec, belt=cfg.belt)
            key = f"{s_H}x{s_h}"
            res.checks[f"{key}:hierarchy"] = bool(validate_hierarchy(gauge, graph).ok)
            try:
                cot = cotree_wire_count(gauge, graph, dec)
                res.checks[f"{key}:cotree_euler"] = True
            except InvariantViolation:
                cot = int((graph.edge_on_wire & ~gauge.in_tree).sum())
                res.checks[f"{key}:cotree_euler"] = False
            cot_f = 2 * s_H ** 3 + 3 * s_H ** 2
            n_c, n_f = graph.n_local_total, 3 * s_H ** 3 * s_h * (s_h + 1) ** 2
            w_c, w_f = int(graph.edge_on_wire.sum()), 3 * s_h * s_H * (s_H + 1) ** 2
            res.checks[f"{key}:cotree_formula"] = cot == cot_f
            res.checks[f"{key}:n_formula"] = n_c == n_f
            res.checks[f"{key}:wire_formula"] = w_c == w_f
            res.checks[f"{key}:euler"] = coarse_euler_constant(dec) == 1
            res.rows.append([s_H, s_h, cot, cot_f, gauge.n_gp, n_c, n_f, w_c, w_f,
                             cot / n_c, round(100 * coarse_ratio_limit(s_h), 2)])
    return res
