"""The three boundary modifiers hold their conditions exactly for any network output."""
import numpy as np

from mixres import fields
from mixres.geometry import BallDomain, sample_boundary
from mixres.modifier import BoundaryModifier, check_assumption, modify
from mixres.network import init_params, forward_jet

dom = BallDomain(3, center=(0.5, 0.0, -0.2), radius=1.5)
g = fields.gaussian_bump(dom)
x = sample_boundary(dom, 10_000, 1).points

for kind in ("dirichlet", "neumann", "robin"):
    mod = BoundaryModifier(kind, g, dom, alpha=0.8)
    worst = 0.0
    for seed in range(5):
        params = init_params((3, 16, 16, 4), 3.0, seed)
        jet = modify(mod, x, forward_jet(params, "tanh", x))
        worst = max(worst, float(np.max(np.abs(mod.boundary_residual(x, jet)))))
    rep = check_assumption(mod, dom, 2000, 0)
    print(f"{kind:<10} max boundary residual {worst:.2e}  constants {tuple(round(c, 4) for c in mod.constants)}"
          f"  assumption ratios ok: {rep.admissible}")
