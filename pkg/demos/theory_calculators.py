"""Prescribed network sizes, sample counts and bound constants."""
import math

from mixres import theory as th
from mixres.network import init_params
from mixres.registry import get_problem

inp = th.PrescriptionInput(epsilon=0.5, dim=2, mu=0.5)
pres = th.prescribe_network(inp)
N = th.prescribe_samples(inp, pres.depth)
print(f"depth {pres.depth}, nonzeros {pres.nnz}, weight bound {pres.weight_bound:g}")
print(f"samples N = 2^{math.log2(N):.0f} ({len(str(N))} digits)")

for eps in (0.9, 0.5, 0.25):
    n_eps = th.prescribe_samples(th.PrescriptionInput(eps, 2, 0.5), 2)
    print(f"eps = {eps}: N has {len(str(n_eps))} digits")

print("Rademacher bound, B=2 L=4 n=4 B_theta=1:")
for n in (10**2, 10**4, 10**6):
    print(f"  N = {n:>8}: {th.rademacher_bound(2.0, 4.0, 4, 1.0, n):.6f}")

prob, _ = get_problem("ball-d2-dirichlet-quadratic")
params = init_params((2, 8, 8, 3), 1.0, 0)
lc = th.lipschitz_constants(params, prob.boundary)
print("Lipschitz constants of an (2, 8, 8, 3) network:", {k: round(v, 3) for k, v in lc._asdict().items()})
ratios = [th.verify_empirical_lipschitz(th.random_param_pairs((2, 8, 8, 3), 1.0, 20, 0), "tanh", prob.boundary, i)
          for i in range(1, 9)]
print("measured / bound:", [f"{r:.1e}" for r in ratios])

for name in ("ball-d2-dirichlet-quadratic-varcoef", "ball-d2-dirichlet-quadratic-steep"):
    try:
        print(name, "coercivity", tuple(round(c, 4) for c in th.coercivity_constants(get_problem(name)[0])))
    except ValueError as exc:
        print(name, "rejected:", exc)
