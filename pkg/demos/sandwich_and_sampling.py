"""Loss excess between its coercivity bounds, and the 1/sqrt(N) sampling error."""
from mixres import theory as th
from mixres.network import init_params
from mixres.registry import get_problem
from mixres.trainer import statistical_error_scaling

for kind in ("dirichlet", "neumann", "robin"):
    prob, sol = get_problem(f"ball-d2-{kind}-quadratic-varcoef")
    for seed in range(3):
        pert = th.random_perturbation(kind, prob.domain, seed, alpha=prob.boundary.alpha)
        r = th.verify_sandwich(prob, sol, pert, n_quad=100_000, seed=seed)
        print(f"{kind:<10} lower {r.lower:.4e} <= excess {r.middle:.4e} (+/- {r.middle_stderr:.1e})"
              f" <= upper {r.upper:.4e}   holds: {r.holds}")

prob, _ = get_problem("ball-d2-dirichlet-quadratic")
res = statistical_error_scaling(prob, init_params((2, 16, 16, 3), 1.0, 0), "tanh", trials=16, n_big=1 << 20)
for n, m in zip(res.sample_counts, res.mean_deviation):
    print(f"N = {n:>6}: mean |L - L_N| = {m:.4e}")
print(f"log-log slope {res.slope:.3f}")
