"""Least-squares residual of the first-order system ``p = grad u``, ``-div p + omega u = f``.

The pointwise density is

    omega |p - grad u|^2 + (-div p + omega u - f)^2

with ``u`` and ``p`` read from a boundary-modified jet, so ``div p`` comes from
the Jacobian of the network output and no second derivatives are taken.

Expanding the density gives the eight terms

    G1 = |p|^2            G2 = -2 p . grad u     G3 = |grad u|^2
    G4 = (div p)^2        G5 = -2 omega u div p  G6 = 2 f div p
    G7 = omega^2 u^2      G8 = -2 omega u f

and ``density = omega (G1 + G2 + G3) + G4 + ... + G8 + f^2``. ``G1..G3`` are
kept unweighted; the weight is applied on recombination.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SampleSet, sample_interior, volume
from .modifier import BoundaryModifier, modify, modify_vjp
from .network import Jet, NetworkParams, as_activation, forward_jet, forward_jet_tape, jet_backward
from .problem import EllipticProblem

CHUNK = 512


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    gamma: tuple[float, ...]
    f_squared: float
    omega_gamma: tuple[float, float, float]
    n_samples: int
    volume_factor: float

    def recombined(self) -> float:
        """``|Omega| * (sum of the omega-weighted G1..G3, G4..G8 and f^2 means)``."""
        terms = list(self.omega_gamma) + list(self.gamma[3:]) + [self.f_squared]
        return self.volume_factor * math.fsum(terms)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "gamma": list(self.gamma),
            "omega_gamma_123": list(self.omega_gamma),
            "f_squared": self.f_squared,
            "n_samples": self.n_samples,
            "volume_factor": self.volume_factor,
        }


def _coefficients(problem: EllipticProblem, x):
    om = problem.omega.value(x)
    f = problem.rhs_f.value(x)
    if not (np.all(np.isfinite(om)) and np.all(np.isfinite(f))):
        raise ValueError("non-finite omega or f at sample points")
    return om, f


def density(problem: EllipticProblem, modified_jet: Jet, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    om, f = _coefficients(problem, x)
    r1 = modified_jet.p - modified_jet.grad_u
    r2 = -modified_jet.div_p + om * modified_jet.u - f
    return om * np.sum(r1 * r1, axis=-1) + r2 * r2


def density_partials(problem: EllipticProblem, jet: Jet, x):
    """Density and its partials with respect to the modified jet entries."""
    om, f = _coefficients(problem, x)
    r1 = jet.p - jet.grad_u
    r2 = -jet.div_p + om * jet.u - f
    dens = om * np.sum(r1 * r1, axis=-1) + r2 * r2
    d = jet.p.shape[-1]
    gv = np.empty_like(jet.value)
    gv[:, 0] = 2.0 * r2 * om
    gv[:, 1:] = 2.0 * om[:, None] * r1
    gJ = np.zeros_like(jet.jacobian)
    gJ[:, 0, :] = -2.0 * om[:, None] * r1
    idx = np.arange(d)
    gJ[:, 1 + idx, idx] = -2.0 * r2[:, None]
    return dens, gv, gJ


def gamma_terms(problem: EllipticProblem, modified_jet: Jet, x) -> np.ndarray:
    """The eight expansion terms, shape ``(..., 8)``."""
    x = np.asarray(x, dtype=float)
    om, f = _coefficients(problem, x)
    u, gu, p, dp = modified_jet.u, modified_jet.grad_u, modified_jet.p, modified_jet.div_p
    return np.stack(
        [
            np.sum(p * p, axis=-1),
            -2.0 * np.sum(p * gu, axis=-1),
            np.sum(gu * gu, axis=-1),
            dp * dp,
            -2.0 * dp * u * om,
            2.0 * dp * f,
            om * om * u * u,
            -2.0 * u * om * f,
        ],
        axis=-1,
    )


def recombine(problem: EllipticProblem, gamma: np.ndarray, x) -> np.ndarray:
    om, f = _coefficients(problem, np.asarray(x, dtype=float))
    return om * gamma[..., :3].sum(axis=-1) + gamma[..., 3:].sum(axis=-1) + f * f


def modified_jets(params: NetworkParams, act, mod: BoundaryModifier, x) -> Jet:
    return modify(mod, x, forward_jet(params, act, x))


def network_jet_source(params: NetworkParams, act, mod: BoundaryModifier):
    act = as_activation(act)
    return lambda x: modified_jets(params, act, mod, x)


def _points(samples) -> np.ndarray:
    pts = samples.points if isinstance(samples, SampleSet) else np.asarray(samples, dtype=float)
    if pts.shape[0] == 0:
        raise ValueError("empty sample set")
    return pts


def densities(problem, params, act, mod, pts: np.ndarray) -> np.ndarray:
    act = as_activation(act)
    out = np.empty(pts.shape[0])
    for s in range(0, pts.shape[0], CHUNK):
        x = pts[s : s + CHUNK]
        out[s : s + CHUNK] = density(problem, modified_jets(params, act, mod, x), x)
    return out


def jet_source_densities(problem, jet_source, pts: np.ndarray) -> np.ndarray:
    out = np.empty(pts.shape[0])
    for s in range(0, pts.shape[0], CHUNK):
        x = pts[s : s + CHUNK]
        out[s : s + CHUNK] = density(problem, jet_source(x), x)
    return out


def _breakdown(problem, jet_source, pts) -> LossBreakdown:
    n = pts.shape[0]
    vol = volume(problem.domain)
    dens = np.empty(n)
    gam = np.empty((n, 8))
    wg = np.empty((n, 3))
    f2 = np.empty(n)
    for s in range(0, n, CHUNK):
        x = pts[s : s + CHUNK]
        jet = jet_source(x)
        om, f = _coefficients(problem, x)
        dens[s : s + CHUNK] = density(problem, jet, x)
        g = gamma_terms(problem, jet, x)
        gam[s : s + CHUNK] = g
        wg[s : s + CHUNK] = om[:, None] * g[:, :3]
        f2[s : s + CHUNK] = f * f
    return LossBreakdown(
        total=vol * math.fsum(dens) / n,
        gamma=tuple(math.fsum(gam[:, k]) / n for k in range(8)),
        f_squared=math.fsum(f2) / n,
        omega_gamma=tuple(math.fsum(wg[:, k]) / n for k in range(3)),
        n_samples=n,
        volume_factor=vol,
    )


def empirical_loss(problem: EllipticProblem, params: NetworkParams, act, mod: BoundaryModifier, samples) -> LossBreakdown:
    """``|Omega|/N * sum_k density(X_k)`` with the term breakdown."""
    return _breakdown(problem, network_jet_source(params, act, mod), _points(samples))


def jet_source_loss(problem: EllipticProblem, jet_source, samples) -> LossBreakdown:
    """Empirical loss for an arbitrary modified-jet source (e.g. an exact solution)."""
    return _breakdown(problem, jet_source, _points(samples))


def loss_value(problem, params, act, mod, samples) -> float:
    pts = _points(samples)
    return volume(problem.domain) * math.fsum(densities(problem, params, act, mod, pts)) / pts.shape[0]


def mc_estimate(vals: np.ndarray, vol: float) -> tuple[float, float]:
    n = vals.shape[0]
    mean = vol * math.fsum(vals) / n
    se = vol * float(np.std(vals, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    return mean, se


def continuous_loss_estimate(problem, params, act, mod, n_big: int = 1 << 20, seed: int = 0) -> tuple[float, float]:
    """Independent high-N Monte Carlo surrogate of the continuous loss, with stderr."""
    if n_big < 10_000:
        raise ValueError("n_big must be at least 1e4")
    pts = sample_interior(problem.domain, n_big, seed).points
    return mc_estimate(densities(problem, params, act, mod, pts), volume(problem.domain))


def loss_and_gradient(problem, params: NetworkParams, act, mod: BoundaryModifier, samples) -> tuple[float, np.ndarray]:
    """Empirical loss and its exact gradient over the flattened parameters."""
    act = as_activation(act)
    pts = _points(samples)
    n = pts.shape[0]
    vol = volume(problem.domain)
    grad = np.zeros(params.n_params)
    dens_all = np.empty(n)
    for s in range(0, n, CHUNK):
        x = pts[s : s + CHUNK]
        raw, tape = forward_jet_tape(params, act, x)
        jet = modify(mod, x, raw)
        dens, gv, gJ = density_partials(problem, jet, x)
        dens_all[s : s + CHUNK] = dens
        rv, rJ = modify_vjp(mod, x, gv, gJ)
        grad += jet_backward(params, tape, rv, rJ)
    return vol * math.fsum(dens_all) / n, grad * (vol / n)


def loss_gradient(problem, params, act, mod, samples) -> np.ndarray:
    return loss_and_gradient(problem, params, act, mod, samples)[1]


def density_functional(problem: EllipticProblem, mod: BoundaryModifier, x):
    """Single-point jet functional (raw jet -> density) for ``network.scalar_grad``."""
    x2 = np.asarray(x, dtype=float).reshape(1, -1)

    def fn(raw: Jet):
        jet = modify(mod, x2, Jet(raw.value[None], raw.jacobian[None]))
        dens, gv, gJ = density_partials(problem, jet, x2)
        rv, rJ = modify_vjp(mod, x2, gv, gJ)
        return float(dens[0]), rv[0], rJ[0]

    return fn
