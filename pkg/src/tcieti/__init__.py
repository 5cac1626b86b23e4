"""Tree-cotree gauged dual-primal domain decomposition for magnetostatics."""
from .mesh import (BoundaryConfig, ControlGraph, Patch, PatchDecomposition, build_cube_decomposition,
                   build_grid_decomposition, build_torus_decomposition, classify_edges,
                   coarse_euler_constant)
from .tree import (GaugeTree, UnionFind, add_belt_edge, assign_weights, build_gauge, cotree_wire_count,
                   eliminated_graph_connected, kruskal_tree, select_primal, validate_hierarchy)
from .fem import ManufacturedCase, LocalSystem, trig_case, error_B
from .coupling import CouplingMatrix, PrimalBasis, build_coupling, build_primal_basis, trim
from .solver import DualPrimalOperators, SolveReport, monolithic_solve, setup_problem, solve

__version__ = "0.1.0"
