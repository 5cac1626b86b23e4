import functools

import pytest

from tcieti.fem import trig_case
from tcieti.mesh import BoundaryConfig, build_cube_decomposition, build_grid_decomposition, build_torus_decomposition
from tcieti.solver import setup_problem

ACCEPTANCE = {}


@functools.lru_cache(maxsize=None)
def cube_problem(s_H, s_h, layout="cube-mixed", belt=True, tie_break=None):
    bc = BoundaryConfig.layout(layout)
    dec, graph = build_cube_decomposition(s_H, s_h, bc)
    return setup_problem(dec, graph, bc, trig_case(), belt=belt, tie_break=tie_break)


@functools.lru_cache(maxsize=None)
def grid_problem(shape, s_h, layout="cube-mixed", force_empty_primal=False, tie_break=None):
    bc = BoundaryConfig.layout(layout)
    dec, graph = build_grid_decomposition(shape, s_h, bc)
    return setup_problem(dec, graph, bc, trig_case(), tie_break=tie_break,
                         force_empty_primal=force_empty_primal)


@functools.lru_cache(maxsize=None)
def torus_problem(n_ring, s_h, layout, belt, layers=1):
    bc = BoundaryConfig.layout(layout)
    dec, graph = build_torus_decomposition(n_ring, s_h, bc, layers=layers)
    return setup_problem(dec, graph, bc, trig_case(), belt=belt)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
