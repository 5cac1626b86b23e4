"""Weak scaling at s_h = 2: iteration counts stay flat as the patch count grows."""
from tcieti.experiments import ExperimentConfig, run_scalability

res = run_scalability(ExperimentConfig(s_h=(2,), s_H=(2, 3)), test=3)
print("  ".join(f"{c:>8}" for c in res.columns))
for row in res.rows:
    print("  ".join(f"{v:8.3g}" if isinstance(v, float) else f"{v:>8}" for v in row))
