"""Verification suites: each returns a list of named checks with measured values."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import loss as mim
from . import theory
from .geometry import block_generator, sample_boundary, sample_interior
from .modifier import check_assumption, modify
from .network import Activation, forward, forward_jet, init_params
from .problem import INSENSIBLE, AssumptionError, validate_assumptions
from .registry import bundled_names, get_problem
from .trainer import TrainConfig, statistical_error_scaling, train

SUITES = ("activation", "boundary", "gradients", "coercivity", "sandwich", "lipschitz", "scaling")


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _le(suite, name, value, threshold, detail=""):
    return Check(suite, name, float(value), float(threshold), bool(value <= threshold), detail)


# ---------------------------------------------------------------- activation


def activation_suite(seed: int = 0, n: int = 100_000) -> list[Check]:
    """Bounds and Lipschitz inequalities of the activations on ``[-50, 50]``."""
    rng = block_generator(seed, 1 << 23)
    x = rng.uniform(-50, 50, n)
    y = rng.uniform(-50, 50, n)
    # also probe close pairs, where Lipschitz ratios approach the derivative
    y[: n // 2] = x[: n // 2] + rng.normal(scale=1e-3, size=n // 2)
    out = []
    for kind in ("tanh", "logistic"):
        act = Activation(kind)
        v, d1, _ = act.derivatives(x)
        vy, d1y, _ = act.derivatives(y)
        gap = np.abs(x - y)
        ok = gap > 0
        out.append(_le("activation", f"{kind} max|rho|", np.max(np.abs(v)), 1.0))
        out.append(_le("activation", f"{kind} max|rho'|", np.max(np.abs(d1)), 1.0))
        out.append(_le("activation", f"{kind} Lipschitz rho", np.max(np.abs(v - vy)[ok] / gap[ok]), 1.0))
        out.append(_le("activation", f"{kind} Lipschitz rho'", np.max(np.abs(d1 - d1y)[ok] / gap[ok]), 1.0))
    return out


# ---------------------------------------------------------------- boundary


def _random_widths(rng, d: int, max_depth: int = 4, max_width: int = 16) -> tuple[int, ...]:
    depth = int(rng.integers(1, max_depth + 1))
    return (d,) + tuple(int(rng.integers(1, max_width + 1)) for _ in range(depth - 1)) + (d + 1,)


def boundary_residuals(kind: str, d: int, n_nets: int = 20, n_points: int = 10_000, seed: int = 0) -> float:
    """Worst enforced-identity residual over random networks on boundary samples."""
    prob, _ = get_problem(f"ball-d{d}-{kind}-gaussian" if kind == "dirichlet" else f"ball-d{d}-{kind}-quadratic")
    mod = prob.boundary
    x = sample_boundary(prob.domain, n_points, seed).points
    rng = block_generator(seed, 1 << 24)
    worst = 0.0
    for k in range(n_nets):
        widths = _random_widths(rng, d)
        act = "tanh" if k % 2 == 0 else "logistic"
        params = init_params(widths, 2.0, seed * 1000 + k)
        jet = modify(mod, x, forward_jet(params, act, x))
        worst = max(worst, float(np.max(np.abs(mod.boundary_residual(x, jet)))))
    return worst


def boundary_suite(seed: int = 0) -> list[Check]:
    out = []
    for kind in ("dirichlet", "neumann", "robin"):
        for d in (1, 2, 3):
            out.append(_le("boundary", f"{kind} d={d} residual", boundary_residuals(kind, d, seed=seed), 1e-12))
    for kind in ("dirichlet", "neumann", "robin"):
        prob, _ = get_problem(f"ball-d2-{kind}-quadratic")
        rep = check_assumption(prob.boundary, prob.domain, 20_000, seed)
        worst = max(rep.value_bound, rep.derivative_bound, rep.value_lipschitz, rep.derivative_lipschitz)
        out.append(_le("boundary", f"{kind} modifier constants ratio", worst, 1.0))
    return out


# ---------------------------------------------------------------- gradients


def _relerr(approx: np.ndarray, exact: np.ndarray) -> float:
    """Normwise relative error ``max |approx - exact| / max |exact|``."""
    scale = float(np.max(np.abs(exact)))
    diff = float(np.max(np.abs(approx - exact)))
    return diff / scale if scale > 0 else diff


def jacobian_fd_error(params, act, x: np.ndarray, h: float = 1e-4) -> float:
    jet = forward_jet(params, act, x)
    d = x.shape[-1]
    fd = np.empty_like(jet.jacobian)
    for p in range(d):
        e = np.zeros(d)
        e[p] = h
        fd[:, :, p] = (forward(params, act, x + e) - forward(params, act, x - e)) / (2 * h)
    return _relerr(fd, jet.jacobian)


def loss_gradient_fd_error(problem, params, act, x: np.ndarray, h: float = 1e-4) -> float:
    mod = problem.boundary
    _, g = mim.loss_and_gradient(problem, params, act, mod, x)
    theta = params.flatten()
    fd = np.empty_like(theta)
    for k in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        fd[k] = (
            mim.loss_value(problem, params.unflatten(tp), act, mod, x)
            - mim.loss_value(problem, params.unflatten(tm), act, mod, x)
        ) / (2 * h)
    return _relerr(fd, g)


def gradient_checks(n_configs: int = 100, seed: int = 0, n_points: int = 8):
    """Jacobian and loss-gradient errors over random configurations."""
    rng = block_generator(seed, 1 << 25)
    kinds = ("dirichlet", "neumann", "robin")
    jac, grad = [], []
    for k in range(n_configs):
        d = int(rng.integers(1, 4))
        kind = kinds[k % 3]
        om = "-varcoef" if k % 2 else ""
        prob, _ = get_problem(f"ball-d{d}-{kind}-quadratic{om}")
        widths = _random_widths(rng, d)
        act = "tanh" if (k // 3) % 2 == 0 else "logistic"
        params = init_params(widths, 1.0, seed * 10_000 + k)
        # nudge biases away from zero so every parameter is exercised
        theta = params.flatten() + 0.1 * rng.standard_normal(params.n_params)
        params = params.unflatten(np.clip(theta, -1.0, 1.0))
        x = sample_interior(prob.domain, n_points, seed * 10_000 + k).points
        jac.append(jacobian_fd_error(params, act, x))
        grad.append(loss_gradient_fd_error(prob, params, act, x))
    return np.array(jac), np.array(grad)


def gradients_suite(seed: int = 0, n_configs: int = 100) -> list[Check]:
    jac, grad = gradient_checks(n_configs, seed)
    return [
        _le("gradients", f"input Jacobian vs FD ({n_configs} configs)", jac.max(), 1e-6),
        _le("gradients", f"loss gradient vs FD ({n_configs} configs)", grad.max(), 1e-6),
    ]


# ---------------------------------------------------------------- coercivity


def coercivity_suite(seed: int = 0) -> list[Check]:
    out = []
    for name in bundled_names():
        prob, _ = get_problem(name)
        c = theory.coercivity_constants(prob)
        passed = validate_assumptions(prob, 20_000, seed).passed
        out.append(Check("coercivity", f"{name} min constant", min(c), 0.0, min(c) > 0 and passed))
    prob, _ = get_problem("ball-d2-dirichlet-quadratic-steep")
    try:
        theory.coercivity_constants(prob)
        rejected, msg = False, "accepted"
    except AssumptionError as exc:
        rejected, msg = INSENSIBLE in str(exc), str(exc)
    failed_validation = not validate_assumptions(prob, 20_000, seed).passed
    out.append(Check("coercivity", "omega = 1 + 0.5 x1 rejected", float(rejected and failed_validation), 1.0,
                     rejected and failed_validation, msg))
    return out


# ---------------------------------------------------------------- sandwich


def sandwich_reports(n_pert: int = 20, n_quad: int = 100_000, seed: int = 0, dims=(1, 2)):
    """``(kind, d, report)`` for random admissible perturbations."""
    out = []
    for kind in ("dirichlet", "neumann", "robin"):
        for d in dims:
            for k in range(n_pert):
                om = "-varcoef" if k % 2 else ""
                prob, sol = get_problem(f"ball-d{d}-{kind}-quadratic{om}")
                pert = theory.random_perturbation(kind, prob.domain, seed * 1000 + k, alpha=prob.boundary.alpha)
                out.append((kind, d, theory.verify_sandwich(prob, sol, pert, n_quad, seed * 1000 + k)))
    return out


def sandwich_suite(seed: int = 0, n_pert: int = 20) -> list[Check]:
    reps = sandwich_reports(n_pert, seed=seed)
    out = []
    for kind in ("dirichlet", "neumann", "robin"):
        for d in (1, 2):
            sel = [r for k, dd, r in reps if k == kind and dd == d]
            fails = sum(not r.holds for r in sel)
            # smallest gap in units of its standard error (>= -3 passes)
            z = min(min(r.lower_gap / max(r.lower_gap_stderr, 1e-300), r.upper_gap / max(r.upper_gap_stderr, 1e-300)) for r in sel)
            out.append(Check("sandwich", f"{kind} d={d} failures of {len(sel)}", fails, 0, fails == 0, f"min z = {z:.3g}"))
    return out


# ---------------------------------------------------------------- lipschitz


def lipschitz_ratios(widths=(2, 8, 8, 3), n_pairs: int = 100, seed: int = 0, kind: str = "dirichlet") -> np.ndarray:
    prob, _ = get_problem(f"ball-d{widths[0]}-{kind}-quadratic")
    pairs = theory.random_param_pairs(widths, 1.0, n_pairs, seed)
    return np.array(
        [theory.verify_empirical_lipschitz(pairs, "tanh", prob.boundary, i, 1, seed) for i in range(1, 9)]
    )


def lipschitz_suite(seed: int = 0) -> list[Check]:
    out = []
    for kind in ("dirichlet", "neumann", "robin"):
        r = lipschitz_ratios(seed=seed, kind=kind)
        out.append(_le("lipschitz", f"{kind} worst parameter-Lipschitz ratio (8 classes)", r.max(), 1.0))
        prob, _ = get_problem(f"ball-d2-{kind}-quadratic")
        params = init_params((2, 8, 8, 3), 1.0, seed)
        s = theory.verify_class_bounds(params, "tanh", prob.boundary, 10_000, seed)
        out.append(_le("lipschitz", f"{kind} worst sup|F_i| / B_i", s.max(), 1.0))
        lc = theory.lipschitz_constants(params, prob.boundary)
        caps = theory.uniform_caps(theory.Architecture.of(params))
        ok = theory.caps_hold(theory.class_constants(2, *lc), caps)
        out.append(Check("lipschitz", f"{kind} uniform caps hold", float(ok), 1.0, ok))
    return out


# ---------------------------------------------------------------- scaling


def scaling_fit(seed: int = 0, steps: int = 500):
    """Train a small network briefly, then fit the statistical-error slope at fixed parameters."""
    prob, _ = get_problem("ball-d2-dirichlet-quadratic")
    params = init_params((2, 16, 16, 3), 1.0, seed)
    params, _ = train(prob, params, "tanh", None, TrainConfig(steps=steps, batch=1024, seed=seed, log_every=steps))
    return statistical_error_scaling(prob, params, "tanh", seed=seed)


def scaling_suite(seed: int = 0) -> list[Check]:
    res = scaling_fit(seed)
    dev = abs(res.slope + 0.5)
    return [Check("scaling", "log-log slope of mean |L - L_N|", res.slope, 0.15, dev <= 0.15,
                  "means " + ", ".join(f"{m:.4g}" for m in res.mean_deviation))]


RUNNERS = {
    "activation": activation_suite,
    "boundary": boundary_suite,
    "gradients": gradients_suite,
    "coercivity": coercivity_suite,
    "sandwich": sandwich_suite,
    "lipschitz": lipschitz_suite,
    "scaling": scaling_suite,
}


def run_suite(name: str, seed: int = 0) -> list[Check]:
    if name not in RUNNERS:
        raise KeyError(f"unknown suite {name!r}; expected one of {SUITES}")
    return RUNNERS[name](seed=seed)
