"""Named manufactured problems on the unit ball.

Names follow ``ball-d{d}-{kind}-{solution}[-{omega}]``:

* solution: ``quadratic`` (``1 - |x|^2``), ``gaussian`` (``exp(-|x|^2)``) or ``zero``
* omega: omitted for ``omega = 1``, ``varcoef`` for ``2 + 0.1 x_1`` and
  ``steep`` for ``1 + 0.5 x_1`` (which violates the variation condition)
"""
from __future__ import annotations

import re

from . import fields
from .geometry import BallDomain
from .problem import EllipticProblem, ManufacturedSolution, make_manufactured

SOLUTIONS = ("quadratic", "gaussian", "zero")
OMEGAS = {"": "1", "varcoef": "2 + 0.1 x_1", "steep": "1 + 0.5 x_1"}
KINDS = ("dirichlet", "neumann", "robin")

_NAME = re.compile(r"^ball-d(?P<d>[1-9])-(?P<kind>[a-z]+)-(?P<sol>[a-z]+)(?:-(?P<om>[a-z]+))?$")


def omega_field(tag: str, domain: BallDomain):
    e1 = [1.0] + [0.0] * (domain.dim - 1)
    if tag == "":
        return fields.constant(1.0, domain.dim, name="1")
    if tag == "varcoef":
        return fields.affine(2.0, [0.1 * v for v in e1], domain, name="2+0.1*x1")
    if tag == "steep":
        return fields.affine(1.0, [0.5 * v for v in e1], domain, name="1+0.5*x1")
    raise KeyError(f"unknown omega tag {tag!r}")


def solution_field(tag: str, domain: BallDomain):
    if tag == "quadratic":
        return fields.quadratic_bump(domain)
    if tag == "gaussian":
        return fields.gaussian_bump(domain)
    if tag == "zero":
        return fields.zero(domain.dim)
    raise KeyError(f"unknown solution tag {tag!r}")


def get_problem(name: str, alpha: float = 1.0) -> tuple[EllipticProblem, ManufacturedSolution]:
    m = _NAME.match(name)
    if not m or m["kind"] not in KINDS or m["sol"] not in SOLUTIONS or (m["om"] or "") not in OMEGAS:
        raise KeyError(f"unknown problem {name!r}")
    domain = BallDomain(int(m["d"]))
    omega = omega_field(m["om"] or "", domain)
    u = solution_field(m["sol"], domain)
    return make_manufactured(domain, omega, u, m["kind"], alpha=alpha, name=name)


def bundled_names() -> list[str]:
    """The default manufactured suite (all satisfy the coefficient assumptions)."""
    names = []
    for d in (1, 2, 3):
        for kind in KINDS:
            names.append(f"ball-d{d}-{kind}-quadratic")
            names.append(f"ball-d{d}-{kind}-quadratic-varcoef")
        names.append(f"ball-d{d}-dirichlet-gaussian")
        names.append(f"ball-d{d}-dirichlet-gaussian-varcoef")
    return names
