"""Full-batch minimization of the empirical MIM loss with Adam or SGD."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import loss as mim
from .geometry import sample_interior
from .modifier import BoundaryModifier
from .network import NetworkParams, as_activation, clamp_to_bound
from .problem import EllipticProblem, ManufacturedSolution, h1_error, require_assumptions


class DivergenceError(RuntimeError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"training diverged at step {step} (loss = {loss!r})")
        self.step = step
        self.loss = loss


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings.

    ``batch`` is the size ``N`` of the interior sample set defining the
    empirical loss. With ``resample_every = 0`` the set is drawn once and the
    objective is fixed; otherwise a fresh set is drawn every that many steps.
    """

    steps: int = 5000
    batch: int = 4096
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    resample_every: int = 0
    seed: int = 0
    project_weights: bool = True
    log_every: int = 100
    divergence_factor: float = 1e6

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.resample_every < 0:
            raise ValueError("resample_every must be >= 0")


@dataclass
class TrainReport:
    final_loss: float
    best_loss: float
    loss_history: list[float] = field(repr=False)
    e_opt_proxy: float
    wall_time: float
    best_step: int = 0
    log: list[dict] = field(default_factory=list, repr=False)

    def to_dict(self, include_history: bool = False, include_timing: bool = True) -> dict:
        out = asdict(self)
        out.pop("log")
        if not include_history:
            out.pop("loss_history")
        if not include_timing:
            out.pop("wall_time")
        return out


class Adam:
    def __init__(self, n: int, lr: float, beta1: float, beta2: float, eps: float):
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        mhat = self.m / (1 - self.b1**self.t)
        vhat = self.v / (1 - self.b2**self.t)
        return theta - self.lr * mhat / (np.sqrt(vhat) + self.eps)


class SGD:
    def __init__(self, n: int, lr: float):
        self.lr = lr

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return theta - self.lr * grad


def _sample_seed(cfg: TrainConfig, round_: int) -> int:
    # distinct stream per resampling round, independent of evaluation seeds
    return (cfg.seed * 1_000_003 + 7919 * round_ + 17) & 0xFFFFFFFFFFFFFFFF


def training_samples(problem: EllipticProblem, cfg: TrainConfig, round_: int = 0):
    return sample_interior(problem.domain, cfg.batch, _sample_seed(cfg, round_))


def train(
    problem: EllipticProblem,
    params_init: NetworkParams,
    act,
    mod: BoundaryModifier | None,
    cfg: TrainConfig,
    log_path=None,
    check_assumptions: bool = True,
) -> tuple[NetworkParams, TrainReport]:
    """Run ``cfg.steps`` optimizer steps; returns the final iterate and a report.

    The loss history records the loss of every visited iterate, including the
    final one, so it has ``steps + 1`` entries.
    """
    act = as_activation(act)
    mod = problem.boundary if mod is None else mod
    if check_assumptions:
        require_assumptions(problem)
    if params_init.widths[-1] != problem.dim + 1 or params_init.dim != problem.dim:
        raise ValueError(f"network widths {params_init.widths} do not match d = {problem.dim}")
    t0 = time.perf_counter()
    params = clamp_to_bound(params_init) if cfg.project_weights else params_init
    theta = params.flatten()
    n = theta.size
    opt = Adam(n, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps_adam) if cfg.optimizer == "adam" else SGD(n, cfg.learning_rate)
    samples = training_samples(problem, cfg, 0)
    history: list[float] = []
    log: list[dict] = []
    best, best_step, initial = math.inf, 0, None
    fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for step in range(cfg.steps + 1):
            if cfg.resample_every and step > 0 and step % cfg.resample_every == 0:
                samples = training_samples(problem, cfg, step // cfg.resample_every)
            value, grad = mim.loss_and_gradient(problem, params, act, mod, samples)
            if initial is None:
                initial = value
            if not math.isfinite(value) or value > cfg.divergence_factor * max(initial, 1e-300):
                raise DivergenceError(step, value)
            history.append(value)
            if value < best:
                best, best_step = value, step
            if step % cfg.log_every == 0 or step == cfg.steps:
                rec = {
                    "step": step,
                    "loss": value,
                    "grad_norm": float(np.linalg.norm(grad)),
                    "max_weight": float(np.max(np.abs(theta))),
                }
                log.append(rec)
                if fh:
                    fh.write(json.dumps(rec) + "\n")
            if step == cfg.steps:
                break
            theta = opt.step(theta, grad)
            if cfg.project_weights:
                np.clip(theta, -params.weight_bound, params.weight_bound, out=theta)
            params = params.unflatten(theta)
    finally:
        if fh:
            fh.close()
    report = TrainReport(
        final_loss=history[-1],
        best_loss=best,
        loss_history=history,
        e_opt_proxy=history[-1] - best,
        wall_time=time.perf_counter() - t0,
        best_step=best_step,
        log=log,
    )
    return params, report


@dataclass(frozen=True)
class DecompositionReport:
    e_app_proxy: float
    e_sta_estimate: float
    e_sta_stderr: float
    e_opt_proxy: float
    total_h1: float
    h1_u: float
    l2_p: float
    fitted_constant: float

    def to_dict(self) -> dict:
        return asdict(self)


def error_decomposition_report(
    problem: EllipticProblem,
    solution: ManufacturedSolution,
    trained: NetworkParams,
    act,
    cfg: TrainConfig,
    train_report: TrainReport | None = None,
    mod: BoundaryModifier | None = None,
    n_quad: int = 1 << 18,
    seed: int = 12345,
) -> DecompositionReport:
    """Proxies for the approximation, statistical and optimization errors.

    * optimization: final empirical loss minus the best visited one
    * statistical: ``|L - L_N|`` at the trained parameters, with ``L``
      a high-N estimate on an independent sample
    * approximation: the continuous-loss estimate at the trained parameters,
      which upper-bounds the best achievable loss excess in the class

    ``fitted_constant`` is ``total / sqrt(e_app + e_sta + e_opt)``, the
    smallest constant for which the square-root relation holds here.
    """
    act = as_activation(act)
    mod = problem.boundary if mod is None else mod
    emp = mim.loss_value(problem, trained, act, mod, training_samples(problem, cfg, 0))
    cont, cont_se = mim.continuous_loss_estimate(problem, trained, act, mod, n_quad, seed)
    e_opt = train_report.e_opt_proxy if train_report is not None else 0.0
    err = h1_error(problem, solution, mim.network_jet_source(trained, act, mod), n_quad, seed + 1)
    total = err.h1_u + err.l2_p
    e_sta = abs(cont - emp)
    s = cont + e_sta + e_opt
    fitted = total / math.sqrt(s) if s > 0 else (0.0 if total == 0 else math.inf)
    return DecompositionReport(cont, e_sta, cont_se, e_opt, total, err.h1_u, err.l2_p, fitted)


@dataclass(frozen=True)
class ScalingResult:
    sample_counts: tuple[int, ...]
    mean_deviation: tuple[float, ...]
    slope: float
    intercept: float
    reference_loss: float
    reference_stderr: float


def statistical_error_scaling(
    problem: EllipticProblem,
    params: NetworkParams,
    act,
    mod: BoundaryModifier | None = None,
    sample_counts=(1 << 8, 1 << 10, 1 << 12, 1 << 14),
    trials: int = 32,
    seed: int = 0,
    n_big: int = 1 << 22,
) -> ScalingResult:
    """Log-log slope of ``mean |L - L_N|`` against ``N`` for fixed parameters."""
    act = as_activation(act)
    mod = problem.boundary if mod is None else mod
    ref, ref_se = mim.continuous_loss_estimate(problem, params, act, mod, n_big, seed)
    means = []
    for i, n in enumerate(sample_counts):
        devs = []
        for t in range(trials):
            s = (seed + 1) * 1_000_000 + i * 1000 + t + 1
            devs.append(abs(mim.loss_value(problem, params, act, mod, sample_interior(problem.domain, n, s)) - ref))
        means.append(float(np.mean(devs)))
    slope, intercept = np.polyfit(np.log(sample_counts), np.log(means), 1)
    return ScalingResult(tuple(sample_counts), tuple(means), float(slope), float(intercept), ref, ref_se)
