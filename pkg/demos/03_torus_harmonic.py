"""Harmonic fields on the torus: Neumann boundaries with and without the belt edge.

With pure Neumann data and no belt edge the loop around the hole is left
ungauged, which shows up as a singular local block (3 patches) or a singular
coarse matrix (6 patches).  The belt edge restores invertibility.
"""
from tcieti.experiments import ExperimentConfig, run_torus_study

res = run_torus_study(ExperimentConfig(geometry="torus", layout="torus-mixed", s_h=(2,)))
print("  ".join(f"{c:>9}" for c in res.columns))
for row in res.rows:
    print("  ".join(f"{'---' if v is None else (f'{v:.3g}' if isinstance(v, float) else v):>9}" for v in row))
for key, info in res.extra.items():
    print(key, info)
