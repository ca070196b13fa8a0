"""Output modification layers that make boundary conditions hold exactly.

With ``y = (x - c)/R``, ``r = |y|`` and the cutoff ``w = (1 - r)^2`` the three
ball constructions are

* dirichlet: ``u = w f_1 + g r``; ``p = f_{2..d+1}``
* neumann:   ``u = f_1``; ``p_i = w f_{i+1} + g y_i``
* robin:     ``u = f_1``; ``p_i = w f_{i+1} + (g - alpha f_1) y_i``

where ``g`` is a smooth extension of the boundary data. On ``r = 1`` these give
``u = g``, ``p . nu = g`` and ``alpha u + p . nu = g`` respectively. Every map is
affine in the raw network jet, so the reverse pass is its transpose.

The gradient of ``r`` is taken as zero at the center.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .fields import ScalarField
from .geometry import BallDomain, block_generator
from .network import Jet

KINDS = ("dirichlet", "neumann", "robin")


class ModifierConstants(NamedTuple):
    B_g: float
    B_gprime: float
    B_phiprime: float


def default_constants(kind: str, g_tilde: ScalarField, domain: BallDomain, alpha: float = 1.0) -> ModifierConstants:
    """Admissible ``(B_g, B_g', B_phi')`` read off the construction.

    ``B_g = sup|g|`` (the factors ``r`` and ``y_i`` are at most 1),
    ``B_g' = sup|grad g| + sup|g|/R`` (product rule on ``g r`` or ``g y_i``),
    ``B_phi' = 2/R`` from ``|grad w| <= 2(1-r)/R``, plus ``alpha/R`` for the
    Robin coupling through ``f_1 y_i``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown boundary kind {kind!r}")
    if g_tilde.sup_abs is None or g_tilde.sup_grad is None:
        raise ValueError(f"g_tilde {g_tilde.name!r} lacks sup-norm oracles")
    R = domain.radius
    B_g = g_tilde.sup_abs
    B_gp = g_tilde.sup_grad + g_tilde.sup_abs / R
    B_phip = 2.0 / R + (alpha / R if kind == "robin" else 0.0)
    return ModifierConstants(B_g, B_gp, B_phip)


@dataclass(frozen=True)
class BoundaryModifier:
    kind: str
    g_tilde: ScalarField
    domain: BallDomain
    alpha: float = 1.0
    constants: ModifierConstants | None = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown boundary kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "robin" and not self.alpha > 0:
            raise ValueError("Robin coefficient alpha must be positive")
        if self.constants is None:
            object.__setattr__(
                self, "constants", default_constants(self.kind, self.g_tilde, self.domain, self.alpha)
            )

    def with_constants(self, B_g, B_gprime, B_phiprime) -> BoundaryModifier:
        return replace(self, constants=ModifierConstants(B_g, B_gprime, B_phiprime))

    def boundary_residual(self, x, jet: Jet) -> np.ndarray:
        """Signed residual of the enforced boundary identity (defined on the sphere)."""
        y = self.domain.scaled(x)
        nu = y / np.linalg.norm(y, axis=-1, keepdims=True)
        g = self.g_tilde(x)
        if self.kind == "dirichlet":
            return jet.u - g
        flux = np.sum(jet.p * nu, axis=-1)
        if self.kind == "neumann":
            return flux - g
        return self.alpha * jet.u + flux - g


class _Geom(NamedTuple):
    y: np.ndarray  # (M, d)
    r: np.ndarray  # (M,)
    w: np.ndarray  # (M,)
    grad_w: np.ndarray  # (M, d)
    grad_r: np.ndarray  # (M, d)


def _geometry(domain: BallDomain, x: np.ndarray) -> _Geom:
    R = domain.radius
    y = (x - domain.center_array) / R
    r = np.linalg.norm(y, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    grad_r = np.where((r > 0)[:, None], y / (safe[:, None] * R), 0.0)
    w = (1.0 - r) ** 2
    grad_w = -2.0 * (1.0 - r)[:, None] * grad_r
    return _Geom(y, r, w, grad_w, grad_r)


def _batch(x, jet: Jet):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        return x[None, :], Jet(jet.value[None], jet.jacobian[None]), True
    return x, jet, False


def modify(mod: BoundaryModifier, x, jet: Jet) -> Jet:
    """Apply the modification layer to a raw network jet."""
    x, jet, single = _batch(x, jet)
    if not (np.all(np.isfinite(jet.value)) and np.all(np.isfinite(jet.jacobian))):
        raise ValueError("non-finite network jet passed to modifier")
    geo = _geometry(mod.domain, x)
    R = mod.domain.radius
    g = mod.g_tilde.value(x)
    dg = mod.g_tilde.grad(x)
    v = jet.value.copy()
    J = jet.jacobian.copy()
    f, Jf = jet.value, jet.jacobian
    w = geo.w
    if mod.kind == "dirichlet":
        v[:, 0] = w * f[:, 0] + g * geo.r
        J[:, 0, :] = (
            geo.grad_w * f[:, :1] + w[:, None] * Jf[:, 0, :] + dg * geo.r[:, None] + g[:, None] * geo.grad_r
        )
    else:
        coef = g - mod.alpha * f[:, 0] if mod.kind == "robin" else g
        dcoef = dg - mod.alpha * Jf[:, 0, :] if mod.kind == "robin" else dg
        v[:, 1:] = w[:, None] * f[:, 1:] + coef[:, None] * geo.y
        J[:, 1:, :] = (
            f[:, 1:, None] * geo.grad_w[:, None, :]
            + w[:, None, None] * Jf[:, 1:, :]
            + geo.y[:, :, None] * dcoef[:, None, :]
            + (coef / R)[:, None, None] * np.eye(mod.domain.dim)
        )
    out = Jet(v, J)
    return out[0] if single else out


def modify_vjp(mod: BoundaryModifier, x, g_value: np.ndarray, g_jacobian: np.ndarray):
    """Transpose of ``modify`` acting on cotangents ``(g_value, g_jacobian)``.

    Returns the cotangents with respect to the raw network jet.
    """
    x = np.asarray(x, dtype=float)
    geo = _geometry(mod.domain, x)
    R = mod.domain.radius
    w = geo.w
    gv = g_value.copy()
    gJ = g_jacobian.copy()
    if mod.kind == "dirichlet":
        gu, gJu = g_value[:, 0], g_jacobian[:, 0, :]
        gv[:, 0] = w * gu + np.sum(geo.grad_w * gJu, axis=-1)
        gJ[:, 0, :] = w[:, None] * gJu
        return gv, gJ
    gp, gJp = g_value[:, 1:], g_jacobian[:, 1:, :]
    gv[:, 1:] = w[:, None] * gp + np.einsum("miq,mq->mi", gJp, geo.grad_w)
    gJ[:, 1:, :] = w[:, None, None] * gJp
    if mod.kind == "robin":
        a = mod.alpha
        trace = np.trace(gJp, axis1=1, axis2=2)
        gv[:, 0] += -a * np.sum(geo.y * gp, axis=-1) - a * trace / R
        gJ[:, 0, :] += -a * np.einsum("mi,miq->mq", geo.y, gJp)
    return gv, gJ


@dataclass(frozen=True)
class AssumptionReport:
    """Worst observed ``lhs / rhs`` for each modifier inequality (``<= 1`` is admissible)."""

    value_bound: float
    derivative_bound: float
    value_lipschitz: float
    derivative_lipschitz: float
    trials: int

    @property
    def admissible(self) -> bool:
        return max(self.value_bound, self.derivative_bound, self.value_lipschitz, self.derivative_lipschitz) <= 1.0


def check_assumption(mod: BoundaryModifier, domain: BallDomain, trials: int, seed: int, scale: float = 3.0) -> AssumptionReport:
    """Empirical check of the modifier bounds and Lipschitz properties.

    Draws random points in the ball and random raw jets ``(f, df)``,
    ``(f~, df~)`` and compares, per output component and direction,

    * ``|phi|``            against ``|f|_inf + B_g``
    * ``|d phi|``          against ``|df|_inf + B_phi' |f|_inf + B_g'``
    * ``|phi - phi~|``     against ``|f - f~|_inf``
    * ``|d phi - d phi~|`` against ``|df - df~|_inf + B_phi' |f - f~|_inf``

    where the sup norms run over output components (and are taken per input
    direction for derivatives).
    """
    from .geometry import sample_interior

    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = domain.dim
    x = sample_interior(domain, trials, seed).points
    rng = block_generator(seed, 1 << 20)
    f = scale * rng.standard_normal((trials, d + 1))
    Jf = scale * rng.standard_normal((trials, d + 1, d))
    ft = scale * rng.standard_normal((trials, d + 1))
    Jft = scale * rng.standard_normal((trials, d + 1, d))
    B_g, B_gp, B_phip = mod.constants
    a = modify(mod, x, Jet(f, Jf))
    b = modify(mod, x, Jet(ft, Jft))

    fin = np.max(np.abs(f), axis=1)
    dfin = np.max(np.abs(Jf), axis=1)  # (M, d)
    dv = np.max(np.abs(f - ft), axis=1)
    dJ = np.max(np.abs(Jf - Jft), axis=1)
    tiny = 1e-300

    r1 = np.abs(a.value) / (fin[:, None] + B_g + tiny)
    r2 = np.abs(a.jacobian) / (dfin[:, None, :] + B_phip * fin[:, None, None] + B_gp + tiny)
    r3 = np.abs(a.value - b.value) / (dv[:, None] + tiny)
    r4 = np.abs(a.jacobian - b.jacobian) / (dJ[:, None, :] + B_phip * dv[:, None, None] + tiny)
    return AssumptionReport(float(r1.max()), float(r2.max()), float(r3.max()), float(r4.max()), trials)
