"""Elliptic problems ``-Lap u + omega u = f`` on a ball, with manufactured solutions."""
from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import fields
from .fields import ScalarField
from .geometry import BallDomain, sample_interior, volume
from .modifier import BoundaryModifier
from .network import Jet

INSENSIBLE = "relatively insensible variation"


class AssumptionError(ValueError):
    """The coefficient ``omega`` violates the positivity or variation condition."""


@dataclass(frozen=True)
class EllipticProblem:
    domain: BallDomain
    omega: ScalarField
    rhs_f: ScalarField
    boundary: BoundaryModifier
    c_omega: float
    name: str = ""

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def grad_omega_sup(self) -> float:
        if self.omega.sup_grad is None:
            raise ValueError("omega has no gradient sup oracle")
        return self.omega.sup_grad

    @property
    def omega_sup(self) -> float:
        if self.omega.sup_abs is None:
            raise ValueError("omega has no sup oracle")
        return self.omega.sup_abs


@dataclass(frozen=True)
class ManufacturedSolution:
    """Exact pair ``(u, p = grad u)`` of a manufactured problem."""

    u: ScalarField
    induced_f: ScalarField

    def p(self, x):
        return self.u.grad(np.asarray(x, dtype=float))

    def div_p(self, x):
        return self.u.laplacian(np.asarray(x, dtype=float))

    def jet(self, x) -> Jet:
        """Jet of ``(u, p)``: value ``(u, grad u)``, Jacobian ``(grad u; Hess u)``."""
        x = np.asarray(x, dtype=float)
        if self.u.hess is None:
            raise ValueError("manufactured jet needs the Hessian of u")
        g = self.u.grad(x)
        value = np.concatenate([self.u.value(x)[..., None], g], axis=-1)
        jac = np.concatenate([g[..., None, :], self.u.hess(x)], axis=-2)
        return Jet(value, jac)


@dataclass(frozen=True)
class ValidationReport:
    min_omega_sampled: float
    max_grad_omega_sampled: float
    c_omega: float
    grad_omega_sup: float
    positive_lower_bound: bool
    lower_bound_consistent: bool
    insensible_variation: bool

    @property
    def passed(self) -> bool:
        return self.positive_lower_bound and self.lower_bound_consistent and self.insensible_variation

    def message(self) -> str:
        if self.passed:
            return "assumptions hold"
        parts = []
        if not self.positive_lower_bound:
            parts.append(f"c_omega = {self.c_omega:g} is not positive")
        if not self.lower_bound_consistent:
            parts.append(
                f"sampled min omega {self.min_omega_sampled:g} is below the certified c_omega {self.c_omega:g}"
            )
        if not self.insensible_variation:
            parts.append(
                f"{INSENSIBLE} fails: ||grad omega||_inf = {self.grad_omega_sup:g} "
                f">= c_omega^(3/2) = {max(self.c_omega, 0) ** 1.5:g}"
            )
        return "; ".join(parts)


def validate_assumptions(problem: EllipticProblem, samples: int = 100_000, seed: int = 0) -> ValidationReport:
    """Check ``omega >= c_omega > 0`` and ``||grad omega||_inf < c_omega^(3/2)``."""
    pts = sample_interior(problem.domain, samples, seed).points
    om = problem.omega(pts)
    gnorm = np.linalg.norm(problem.omega.grad(pts), axis=-1)
    c = float(problem.c_omega)
    gsup = problem.grad_omega_sup
    return ValidationReport(
        min_omega_sampled=float(om.min()),
        max_grad_omega_sampled=float(gnorm.max()),
        c_omega=c,
        grad_omega_sup=float(gsup),
        positive_lower_bound=c > 0,
        lower_bound_consistent=bool(om.min() >= c),
        insensible_variation=c > 0 and gsup < c**1.5,
    )


def require_assumptions(problem: EllipticProblem, samples: int = 100_000, seed: int = 0) -> ValidationReport:
    report = validate_assumptions(problem, samples, seed)
    if not report.passed:
        raise AssumptionError(report.message())
    return report


def boundary_extension(u: ScalarField, domain: BallDomain, kind: str, alpha: float = 1.0) -> ScalarField:
    """Smooth extension of the boundary data implied by ``u`` for the given kind."""
    if kind == "dirichlet":
        return u
    if kind == "neumann":
        return fields.normal_derivative_extension(u, domain)
    if kind == "robin":
        return fields.normal_derivative_extension(u, domain, alpha=alpha)
    raise ValueError(f"unknown boundary kind {kind!r}")


def make_manufactured(
    domain: BallDomain,
    omega: ScalarField,
    u: ScalarField,
    kind: str = "dirichlet",
    alpha: float = 1.0,
    c_omega: float | None = None,
    name: str = "",
) -> tuple[EllipticProblem, ManufacturedSolution]:
    """Build ``f = -Lap u + omega u`` and boundary data from a closed-form ``u``."""
    if not u.has_laplacian:
        raise ValueError(f"u = {u.name!r} has no Laplacian oracle")
    f = ScalarField(
        name=f"-Lap({u.name})+omega*u",
        value=lambda x: -u.laplacian(x) + omega.value(x) * u.value(x),
        grad=lambda x: _no_grad(),
    )
    if c_omega is None:
        if omega.inf is None:
            raise ValueError("c_omega not given and omega has no inf oracle")
        c_omega = omega.inf
    mod = BoundaryModifier(kind, boundary_extension(u, domain, kind, alpha), domain, alpha)
    problem = EllipticProblem(domain, omega, f, mod, float(c_omega), name)
    return problem, ManufacturedSolution(u, f)


def _no_grad():
    raise NotImplementedError("gradient of the right-hand side is not needed by the solver")


class H1Error(NamedTuple):
    h1_u: float
    l2_p: float
    stderr: tuple[float, float]


def _norm_from_samples(vals: np.ndarray, vol: float) -> tuple[float, float]:
    """MC estimate of ``sqrt(vol * E[vals])`` with a delta-method standard error."""
    n = vals.shape[0]
    sq = vol * math.fsum(vals) / n
    se_sq = vol * float(np.std(vals, ddof=1)) / math.sqrt(n) if n > 1 else 0.0
    norm = math.sqrt(max(sq, 0.0))
    se = se_sq / (2.0 * norm) if norm > 0 else 0.0
    return norm, se


def h1_error(
    problem: EllipticProblem,
    solution: ManufacturedSolution,
    jet_source: Callable[[np.ndarray], Jet],
    n_quad: int = 100_000,
    seed: int = 0,
    chunk: int = 1 << 15,
) -> H1Error:
    """MC estimates of ``||u - u_e||_{H^1}`` and ``||p - p_e||_{L^2}``.

    ``u`` is read from ``jet.value[:, 0]``, ``grad u`` from the Jacobian row 0
    and ``p`` from ``jet.value[:, 1:]``.
    """
    if n_quad < 100:
        raise ValueError("n_quad must be at least 100")
    pts = sample_interior(problem.domain, n_quad, seed).points
    hu = np.empty(n_quad)
    hp = np.empty(n_quad)
    for s in range(0, n_quad, chunk):
        x = pts[s : s + chunk]
        jet = jet_source(x)
        du = jet.u - solution.u.value(x)
        dg = jet.grad_u - solution.u.grad(x)
        dp = jet.p - solution.u.grad(x)
        hu[s : s + chunk] = du * du + np.sum(dg * dg, axis=-1)
        hp[s : s + chunk] = np.sum(dp * dp, axis=-1)
    vol = volume(problem.domain)
    h1, se1 = _norm_from_samples(hu, vol)
    l2, se2 = _norm_from_samples(hp, vol)
    return H1Error(h1, l2, (se1, se2))


def h1_norm(problem: EllipticProblem, u: ScalarField, n_quad: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """MC estimate of ``||u||_{H^1}`` with standard error."""
    pts = sample_interior(problem.domain, n_quad, seed).points
    vals = u.value(pts) ** 2 + np.sum(u.grad(pts) ** 2, axis=-1)
    return _norm_from_samples(vals, volume(problem.domain))
