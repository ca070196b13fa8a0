"""Train a mixed-residual network on the unit disk and compare it with the exact solution.

Uses a reduced budget (1000 steps, N = 1024) so it finishes in well under a
minute; the bundled config runs the full 5000-step, N = 4096 solve.
"""
import numpy as np

from mixres import loss as mim
from mixres.geometry import sample_interior
from mixres.network import init_params
from mixres.problem import h1_error, h1_norm
from mixres.registry import get_problem
from mixres.trainer import TrainConfig, error_decomposition_report, train

prob, sol = get_problem("ball-d2-dirichlet-quadratic")
cfg = TrainConfig(steps=1000, batch=1024, learning_rate=1e-3, seed=0, log_every=200)
params, rep = train(prob, init_params((2, 32, 32, 3), 1.0, 0), "tanh", None, cfg)
for rec in rep.log:
    print(f"step {rec['step']:>5}  loss {rec['loss']:.4e}  |grad| {rec['grad_norm']:.3e}")

err = h1_error(prob, sol, mim.network_jet_source(params, "tanh", prob.boundary), 1 << 17, 12345)
norm, _ = h1_norm(prob, sol.u, 1 << 17, 12345)
print(f"relative H1 error of u: {err.h1_u / norm:.4f}   L2 error of p: {err.l2_p:.4f}")

dec = error_decomposition_report(prob, sol, params, "tanh", cfg, rep, n_quad=1 << 17)
print("error decomposition proxies:", {k: round(v, 6) for k, v in dec.to_dict().items()})

# the boundary value is exact no matter how well the interior is fitted
theta = np.linspace(0, 2 * np.pi, 7)
rim = np.stack([np.cos(theta), np.sin(theta)], -1)
u_rim = mim.modified_jets(params, "tanh", prob.boundary, rim).u
print("u on the unit circle:", np.round(u_rim, 15))

x = sample_interior(prob.domain, 5, 99).points
jet = mim.modified_jets(params, "tanh", prob.boundary, x)
for xi, ui in zip(x, jet.u):
    print(f"x = ({xi[0]:+.3f}, {xi[1]:+.3f})  u_net = {ui:.4f}  u_exact = {1 - xi @ xi:.4f}")
