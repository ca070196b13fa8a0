"""Closed-form scalar fields with derivative and sup-norm oracles.

Every field is vectorized over points of shape ``(M, d)``. The bound oracles
(``sup_abs``, ``sup_grad``, ``sup_hess``, ``inf``) are certified over the closed
ball the field was built for; they feed the admissible-constant calculations.
"""
from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .geometry import BallDomain

Array = np.ndarray


@dataclass(frozen=True)
class ScalarField:
    name: str
    value: Callable[[Array], Array]
    grad: Callable[[Array], Array]
    hess: Callable[[Array], Array] | None = None
    laplacian_fn: Callable[[Array], Array] | None = None
    sup_abs: float | None = None
    sup_grad: float | None = None
    sup_hess: float | None = None
    inf: float | None = None

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    def laplacian(self, x):
        x = np.asarray(x, dtype=float)
        if self.laplacian_fn is not None:
            return self.laplacian_fn(x)
        if self.hess is None:
            raise ValueError(f"field {self.name!r} has no Laplacian oracle")
        return np.trace(self.hess(x), axis1=-2, axis2=-1)

    @property
    def has_laplacian(self) -> bool:
        return self.laplacian_fn is not None or self.hess is not None


def _radial_range(domain: BallDomain) -> tuple[float, float]:
    """Range of ``|x|`` over the closed ball."""
    c = float(np.linalg.norm(domain.center_array))
    return max(0.0, c - domain.radius), c + domain.radius


def constant(c: float, dim: int, name: str | None = None) -> ScalarField:
    c = float(c)
    return ScalarField(
        name=name or f"const({c:g})",
        value=lambda x: np.full(x.shape[:-1], c),
        grad=lambda x: np.zeros(x.shape),
        hess=lambda x: np.zeros(x.shape + (dim,)),
        sup_abs=abs(c),
        sup_grad=0.0,
        sup_hess=0.0,
        inf=c,
    )


def affine(c0: float, coef, domain: BallDomain, name: str | None = None) -> ScalarField:
    """``c0 + coef . x`` with exact extrema over the ball."""
    coef = np.asarray(coef, dtype=float).reshape(-1)
    if coef.shape[0] != domain.dim:
        raise ValueError("coef length must equal domain dim")
    d = domain.dim
    mid = c0 + float(coef @ domain.center_array)
    spread = float(np.linalg.norm(coef)) * domain.radius
    return ScalarField(
        name=name or f"affine({c0:g},{list(coef)})",
        value=lambda x: c0 + x @ coef,
        grad=lambda x: np.broadcast_to(coef, x.shape).copy(),
        hess=lambda x: np.zeros(x.shape + (d,)),
        sup_abs=max(abs(mid - spread), abs(mid + spread)),
        sup_grad=float(np.linalg.norm(coef)),
        sup_hess=0.0,
        inf=mid - spread,
    )


def quadratic_bump(domain: BallDomain) -> ScalarField:
    """``1 - |x|^2``."""
    d = domain.dim
    lo, hi = _radial_range(domain)
    return ScalarField(
        name="1-|x|^2",
        value=lambda x: 1.0 - np.sum(x * x, axis=-1),
        grad=lambda x: -2.0 * x,
        hess=lambda x: np.broadcast_to(-2.0 * np.eye(d), x.shape + (d,)).copy(),
        laplacian_fn=lambda x: np.full(x.shape[:-1], -2.0 * d),
        sup_abs=max(abs(1 - lo * lo), abs(1 - hi * hi)),
        sup_grad=2.0 * hi,
        sup_hess=2.0,
        inf=1 - hi * hi,
    )


def gaussian_bump(domain: BallDomain) -> ScalarField:
    """``exp(-|x|^2)``."""
    d = domain.dim
    lo, hi = _radial_range(domain)

    def hess(x):
        e = np.exp(-np.sum(x * x, axis=-1))[..., None, None]
        return e * (4.0 * x[..., :, None] * x[..., None, :] - 2.0 * np.eye(d))

    def lap(x):
        r2 = np.sum(x * x, axis=-1)
        return np.exp(-r2) * (4.0 * r2 - 2.0 * d)

    # 2 r exp(-r^2) peaks at r = 1/sqrt(2)
    rpk = min(max(1 / math.sqrt(2), lo), hi)
    return ScalarField(
        name="exp(-|x|^2)",
        value=lambda x: np.exp(-np.sum(x * x, axis=-1)),
        grad=lambda x: -2.0 * x * np.exp(-np.sum(x * x, axis=-1))[..., None],
        hess=hess,
        laplacian_fn=lap,
        sup_abs=math.exp(-lo * lo),
        sup_grad=2 * rpk * math.exp(-rpk * rpk),
        sup_hess=2.0,
        inf=math.exp(-hi * hi),
    )


def zero(dim: int) -> ScalarField:
    return constant(0.0, dim, name="0")


def normal_derivative_extension(u: ScalarField, domain: BallDomain, alpha: float = 0.0) -> ScalarField:
    """Smooth extension ``alpha*u + grad(u) . (x - c)/R`` of the boundary flux data.

    On the sphere ``(x - c)/R`` is the outward normal, so its trace is
    ``alpha*u + du/dnu``. ``alpha = 0`` gives Neumann data.
    """
    if u.hess is None:
        raise ValueError("normal-derivative extension needs the Hessian of u")
    c, R = domain.center_array, domain.radius

    def value(x):
        y = (x - c) / R
        out = np.sum(u.grad(x) * y, axis=-1)
        return out + alpha * u.value(x) if alpha else out

    def grad(x):
        y = (x - c) / R
        g = np.einsum("...ij,...j->...i", u.hess(x), y) + u.grad(x) / R
        return g + alpha * u.grad(x) if alpha else g

    sa = sg = None
    if u.sup_grad is not None and u.sup_abs is not None:
        sa = u.sup_grad + abs(alpha) * u.sup_abs
    if u.sup_hess is not None and u.sup_grad is not None:
        sg = u.sup_hess + u.sup_grad / R + abs(alpha) * u.sup_grad
    label = "du/dnu" if not alpha else f"{alpha:g}*u+du/dnu"
    return ScalarField(name=f"ext[{label} of {u.name}]", value=value, grad=grad, sup_abs=sa, sup_grad=sg)


def sum_fields(a: ScalarField, b: ScalarField, name: str | None = None) -> ScalarField:
    def opt_add(p, q):
        return None if p is None or q is None else p + q

    hess = None
    if a.hess is not None and b.hess is not None:
        hess = lambda x: a.hess(x) + b.hess(x)  # noqa: E731
    lap = None
    if a.has_laplacian and b.has_laplacian:
        lap = lambda x: a.laplacian(x) + b.laplacian(x)  # noqa: E731
    inf = None
    if a.inf is not None and b.inf is not None:
        inf = a.inf + b.inf
    return ScalarField(
        name=name or f"({a.name})+({b.name})",
        value=lambda x: a.value(x) + b.value(x),
        grad=lambda x: a.grad(x) + b.grad(x),
        hess=hess,
        laplacian_fn=lap,
        sup_abs=opt_add(a.sup_abs, b.sup_abs),
        sup_grad=opt_add(a.sup_grad, b.sup_grad),
        sup_hess=opt_add(a.sup_hess, b.sup_hess),
        inf=inf,
    )
