"""Closed-form constants of the error analysis and empirical checks against live networks.

Calculators evaluate in ``mpmath`` so the astronomically large prescriptions
stay exact (sample counts are returned as Python integers) and convert to
``float`` whenever the value is representable. All logarithms are natural.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import NamedTuple

import mpmath
import numpy as np
from scipy import integrate, optimize

from .geometry import BallDomain, block_generator, sample_boundary, sample_interior, volume
from .modifier import BoundaryModifier, modify
from .network import Jet, NetworkParams, as_activation, forward_jet, init_params, unflatten
from .problem import AssumptionError, EllipticProblem, ManufacturedSolution, INSENSIBLE

BF_VARIANTS = ("weight", "row-sum")
BFPRIME_VARIANTS = ("value-data", "cutoff", "assumption")


class VacuousBoundError(ValueError):
    """The bound's logarithm has a nonpositive value, so the bound says nothing."""


def _num(x):
    """``float`` if representable, else the ``mpmath`` number itself."""
    if isinstance(x, int):
        return x
    try:
        v = float(x)
    except OverflowError:
        return x
    return v if math.isfinite(v) or not mpmath.isfinite(x) else x


def _mp(q: Fraction) -> mpmath.mpf:
    return mpmath.mpf(q.numerator) / q.denominator


def _dec(x) -> Fraction:
    """Exact rational of the shortest decimal spelling of ``x`` (``0.1`` means 1/10)."""
    return Fraction(repr(float(x)))


def _ceil_exact(v: mpmath.mpf) -> int:
    """Ceiling that treats values within working precision of an integer as that integer."""
    near = mpmath.nint(v)
    if abs(v - near) <= abs(v) * mpmath.mpf(10) ** (-(mpmath.mp.dps - 12)):
        return int(near)
    return int(mpmath.ceil(v))


@dataclass(frozen=True)
class PrescriptionInput:
    """Accuracy target ``epsilon``, dimension ``d``, smoothness margin ``mu``
    and the multiplicative constants of depth, width, weight bound and sample
    count (all 1 by default; the analysis leaves them unspecified)."""

    epsilon: float
    dim: int
    mu: float
    c_depth: float = 1.0
    c_width: float = 1.0
    c_weight: float = 1.0
    c_samples: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must lie in (0,1), got {self.mu}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        for name in ("c_depth", "c_width", "c_weight", "c_samples"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.epsilon >= 1:
            warnings.warn("epsilon >= 1: the prescriptions degenerate", stacklevel=3)


class NetworkPrescription(NamedTuple):
    depth: int
    nnz: int
    weight_bound: float


def prescribe_network(inp: PrescriptionInput) -> NetworkPrescription:
    """``D = ceil(C ln(d+1))``, ``n = ceil(C eps^(-d/(1-mu)))``,
    ``B = C eps^(-(9d+8)/(2-2mu))``."""
    d = inp.dim
    one_minus = 1 - _dec(inp.mu)
    with mpmath.workdps(60):
        eps = _mp(_dec(inp.epsilon))
        depth = _ceil_exact(_mp(_dec(inp.c_depth)) * mpmath.log(d + 1))
        nnz = _ceil_exact(_mp(_dec(inp.c_width)) * eps ** _mp(-Fraction(d) / one_minus))
        bound = _mp(_dec(inp.c_weight)) * eps ** _mp(-Fraction(9 * d + 8) / (2 * one_minus))
        return NetworkPrescription(max(depth, 1), nnz, _num(bound))


def sample_exponent(inp: PrescriptionInput, depth: int) -> Fraction:
    """Exponent ``-4 - D(22d+16)/(1-mu)`` of the sample prescription, exactly."""
    return -4 - Fraction(depth * (22 * inp.dim + 16)) / (1 - _dec(inp.mu))


def prescribe_samples(inp: PrescriptionInput, depth: int) -> int:
    """``N = ceil(C eps^(-4 - D(22d+16)/(1-mu)))`` as an exact integer."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    e = sample_exponent(inp, depth)
    eps = _dec(inp.epsilon)
    # size the precision to the number of digits of the result
    digits = abs(float(e)) * abs(math.log10(inp.epsilon)) + abs(math.log10(inp.c_samples)) + 40
    with mpmath.workdps(int(digits) + 30):
        v = _mp(_dec(inp.c_samples)) * _mp(eps) ** _mp(e)
        return max(_ceil_exact(v), 1)


class LipschitzConstants(NamedTuple):
    B_f: float
    L_f: float
    B_fprime: float
    L_fprime: float


@dataclass(frozen=True)
class Architecture:
    """What the bounds need to know about a network class."""

    dim: int
    depth: int
    width_product: int
    nnz: int
    weight_bound: float
    last_hidden: int

    @classmethod
    def of(cls, params: NetworkParams, nnz: int | None = None) -> Architecture:
        hidden = params.widths[1:-1]
        return cls(
            dim=params.dim,
            depth=params.depth,
            width_product=int(math.prod(hidden)),
            nnz=params.nonzero_count() if nnz is None else int(nnz),
            weight_bound=params.weight_bound,
            last_hidden=params.widths[-2],
        )


def lipschitz_constants_for(
    arch: Architecture,
    B_g: float,
    B_gprime: float,
    B_phiprime: float,
    bf_variant: str = "weight",
    bfprime_variant: str = "assumption",
) -> LipschitzConstants:
    """Bounds and parameter-Lipschitz constants of the modified outputs.

    ``B_f``, the bound on the modified output values:

    * ``weight``:  ``B + B_g``
    * ``row-sum``: ``(n_{D-1} + 1) B + B_g`` (last layer row sum with bias)

    ``B_f'``, the bound on their input derivatives, with
    ``P = prod n_j B^D``:

    * ``value-data``: ``P + B_g'``
    * ``cutoff``:     ``P + B_phi'``
    * ``assumption``: ``P + B_phi' B_f + B_g'`` (consistent with the
      modifier's derivative inequality; the default)

    ``L_f = sqrt(n) B^(D-1) prod n_j`` and
    ``L_f' = sqrt(n) (D+2) B^(2D-1) (prod n_j)^2``.
    """
    if bf_variant not in BF_VARIANTS:
        raise ValueError(f"bf_variant must be one of {BF_VARIANTS}")
    if bfprime_variant not in BFPRIME_VARIANTS:
        raise ValueError(f"bfprime_variant must be one of {BFPRIME_VARIANTS}")
    with mpmath.workdps(30):
        B = mpmath.mpf(arch.weight_bound)
        D = arch.depth
        P = mpmath.mpf(arch.width_product)
        rn = mpmath.sqrt(arch.nnz)
        if bf_variant == "weight":
            B_f = B + B_g
        else:
            B_f = (arch.last_hidden + 1) * B + B_g
        core = P * B**D
        if bfprime_variant == "value-data":
            B_fp = core + B_gprime
        elif bfprime_variant == "cutoff":
            B_fp = core + B_phiprime
        else:
            B_fp = core + B_phiprime * B_f + B_gprime
        L_f = rn * B ** (D - 1) * P
        L_fp = rn * (D + 2) * B ** (2 * D - 1) * P**2
        return LipschitzConstants(*(_num(v) for v in (B_f, L_f, B_fp, L_fp)))


def lipschitz_constants(
    params: NetworkParams,
    mod: BoundaryModifier,
    bf_variant: str = "weight",
    bfprime_variant: str = "assumption",
    nnz: int | None = None,
) -> LipschitzConstants:
    B_g, B_gp, B_phip = mod.constants
    return lipschitz_constants_for(Architecture.of(params, nnz), B_g, B_gp, B_phip, bf_variant, bfprime_variant)


class ClassBound(NamedTuple):
    B: float
    L: float


def class_constants(d: int, B_f, L_f, B_fprime, L_fprime) -> tuple[ClassBound, ...]:
    """Sup bounds ``B_i`` and parameter-Lipschitz constants ``L_i`` of the eight
    loss-term classes ``|p|^2, p.grad u, |grad u|^2, (div p)^2, u div p, div p, u^2, u``."""
    vals = (B_f, L_f, B_fprime, L_fprime)
    if any(v < 0 for v in vals):
        raise ValueError("class constants need nonnegative inputs")
    Bf, Lf, Bp, Lp = (v if isinstance(v, mpmath.mpf) else mpmath.mpf(v) for v in vals)
    pairs = [
        (d * Bf**2, 2 * d * Bf * Lf),
        (d * Bf * Bp, 2 * d * Bf * Lp + 2 * d * Bp * Lf),
        (d * Bp**2, 2 * d * Bp * Lp),
        (d * Bp**2, 2 * d * Bp * Lp),
        (d * Bf * Bp, 2 * d * Bf * Lp + 2 * d * Bp * Lf),
        (d * Bp, d * Lp),
        (Bf**2, 2 * Bf * Lf),
        (Bf, Lf),
    ]
    return tuple(ClassBound(_num(b), _num(l)) for b, l in pairs)


def uniform_caps(arch: Architecture) -> ClassBound:
    """``4d (prod n)^2 B^(2D)`` and ``4d sqrt(n) (D+2) B^(3D-1) (prod n)^3``."""
    with mpmath.workdps(30):
        B = mpmath.mpf(arch.weight_bound)
        D, P, d = arch.depth, mpmath.mpf(arch.width_product), arch.dim
        b = 4 * d * P**2 * B ** (2 * D)
        l = 4 * d * mpmath.sqrt(arch.nnz) * (D + 2) * B ** (3 * D - 1) * P**3
        return ClassBound(_num(b), _num(l))


def caps_hold(bounds, caps: ClassBound) -> bool:
    return all(mpmath.mpf(b.B) <= mpmath.mpf(caps.B) and mpmath.mpf(b.L) <= mpmath.mpf(caps.L) for b in bounds)


def _dudley(B_i: float, L_i: float, nnz: int, B_theta: float, N: float):
    """Numeric infimum over ``delta in (0, B/2]`` of
    ``4 delta + 12 sqrt(n)/sqrt(N) int_delta^{B/2} sqrt(log(2 B L sqrt(n)/e)) de``."""
    K = 2.0 * B_theta * L_i * math.sqrt(nnz)
    top = B_i / 2.0
    if not K > top:
        raise VacuousBoundError(
            f"covering logarithm log({K:g}/e) is nonpositive on part of (0, {top:g}]; bound is vacuous"
        )
    c = 12.0 * math.sqrt(nnz) / math.sqrt(N)

    def h(delta):
        val, _ = integrate.quad(lambda e: math.sqrt(math.log(K / e)), delta, top, epsabs=1e-13, epsrel=1e-12)
        return 4.0 * delta + c * val

    res = optimize.minimize_scalar(h, bounds=(top * 1e-12, top), method="bounded", options={"xatol": 1e-10 * top})
    best = min(res.fun, h(top))
    return float(best)


def rademacher_bound(B_i, L_i, nnz: int, B_theta, N) -> float:
    """Rademacher complexity bound of one loss-term class.

    With ``delta = 1/sqrt(N)`` (valid when ``N >= 4/B_i^2``)
    ``4/sqrt(N) + 6 sqrt(n) B_i/sqrt(N) sqrt(log(2 L_i B sqrt(n) sqrt(N)))``;
    for smaller ``N`` the infimum form is minimized numerically.
    Raises ``VacuousBoundError`` when the logarithm is nonpositive.
    """
    if N < 1 or nnz < 1:
        raise ValueError("N and nnz must be >= 1")
    if B_i < 0 or L_i < 0 or B_theta < 0:
        raise ValueError("bound inputs must be nonnegative")
    with mpmath.workdps(40):
        Nm = mpmath.mpf(N)
        if B_i == 0:
            return _num(4 / mpmath.sqrt(Nm))
        Bm, Lm, Tm = (mpmath.mpf(v) for v in (B_i, L_i, B_theta))
        if Nm * Bm**2 >= 4:
            arg = 2 * Lm * Tm * mpmath.sqrt(nnz) * mpmath.sqrt(Nm)
            if arg <= 1:
                raise VacuousBoundError(f"log argument 2 L B sqrt(n N) = {mpmath.nstr(arg, 6)} <= 1; bound is vacuous")
            val = 4 / mpmath.sqrt(Nm) + 6 * mpmath.sqrt(nnz) * Bm / mpmath.sqrt(Nm) * mpmath.sqrt(mpmath.log(arg))
            return _num(val)
    return _dudley(float(B_i), float(L_i), nnz, float(B_theta), float(N))


def statistical_bound(d: int, depth: int, nnz: int, B_theta, N, c_coe: float = 1.0):
    """``C d sqrt(D) n^(2D) B^(2D) / sqrt(N) * sqrt(log(d D n B N))``."""
    if min(d, depth, nnz) < 1 or not N > 0 or not B_theta > 0:
        raise ValueError("statistical_bound needs positive inputs")
    if c_coe < 0:
        raise ValueError("c_coe must be nonnegative")
    if c_coe == 0:
        return 0.0
    with mpmath.workdps(40):
        Nm, Bm = mpmath.mpf(N), mpmath.mpf(B_theta)
        arg = d * depth * nnz * Bm * Nm
        if arg <= 1:
            raise VacuousBoundError(f"log argument d D n B N = {mpmath.nstr(arg, 6)} <= 1; bound is vacuous")
        val = (
            mpmath.mpf(c_coe) * d * mpmath.sqrt(depth) * mpmath.mpf(nnz) ** (2 * depth) * Bm ** (2 * depth)
            / mpmath.sqrt(Nm) * mpmath.sqrt(mpmath.log(arg))
        )
        return _num(val)


class Coercivity(NamedTuple):
    c_grad: float
    c_value: float
    c_flux: float


def coercivity_from(c_omega: float, grad_omega_sup: float) -> Coercivity:
    """``(c, c^2 - G^(4/3), c - G^(2/3))`` with ``G = ||grad omega||_inf``."""
    G = float(grad_omega_sup)
    out = Coercivity(float(c_omega), c_omega**2 - G ** (4.0 / 3.0), c_omega - G ** (2.0 / 3.0))
    bad = [name for name, v in zip(out._fields, out) if not v > 0]
    if bad:
        raise AssumptionError(
            f"coercivity constants {', '.join(bad)} nonpositive ({INSENSIBLE} fails): "
            f"c_omega = {c_omega:g}, ||grad omega||_inf = {G:g}, triple = "
            f"({out[0]:.6g}, {out[1]:.6g}, {out[2]:.6g})"
        )
    return out


def coercivity_constants(problem: EllipticProblem) -> Coercivity:
    return coercivity_from(problem.c_omega, problem.grad_omega_sup)


# ---------------------------------------------------------------- report


@dataclass
class TheoryReport:
    depth: int
    width_product: int
    nnz: int
    weight_bound: float
    N: int
    B_f: float
    L_f: float
    B_fprime: float
    L_fprime: float
    class_bounds: tuple
    rademacher: tuple
    statistical_bound: float
    coercivity: tuple
    caps: tuple
    caps_hold: bool
    constants: dict = field(default_factory=dict)
    variants: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def conv(v):
            if isinstance(v, mpmath.mpf):
                return mpmath.nstr(v, 17)
            if isinstance(v, tuple):
                return [conv(x) for x in v]
            if isinstance(v, list):
                return [conv(x) for x in v]
            if isinstance(v, dict):
                return {k: conv(x) for k, x in v.items()}
            return v

        out = {k: conv(v) for k, v in asdict(self).items()}
        out["class_bounds"] = [{"B": conv(b[0]), "L": conv(b[1])} for b in self.class_bounds]
        out["caps"] = {"B": conv(self.caps[0]), "L": conv(self.caps[1])}
        return out

    def to_text(self) -> str:
        def s(v):
            return mpmath.nstr(v, 8) if isinstance(v, mpmath.mpf) else (f"{v:.8g}" if isinstance(v, float) else str(v))

        lines = [
            f"depth D              {self.depth}",
            f"nonzero params n     {self.nnz}",
            f"width product        {self.width_product}",
            f"weight bound B       {s(self.weight_bound)}",
            f"samples N            {self.N}",
            f"B_f  {s(self.B_f)}   L_f  {s(self.L_f)}",
            f"B_f' {s(self.B_fprime)}   L_f' {s(self.L_fprime)}",
            "class   B_i              L_i              rademacher",
        ]
        for i, (b, r) in enumerate(zip(self.class_bounds, self.rademacher), start=1):
            lines.append(f"F{i}      {s(b.B):<16} {s(b.L):<16} {s(r) if r is not None else 'vacuous'}")
        lines.append(f"caps (B, L)          ({s(self.caps.B)}, {s(self.caps.L)}) hold: {self.caps_hold}")
        lines.append(f"statistical bound    {s(self.statistical_bound)}")
        lines.append("coercivity           (" + ", ".join(f"{c:.6g}" for c in self.coercivity) + ")")
        for k, v in self.constants.items():
            lines.append(f"constant {k:<12} {s(v)}")
        for k, v in self.variants.items():
            lines.append(f"variant {k:<13} {v}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


def build_report(
    arch: Architecture,
    N: int,
    B_g: float = 0.0,
    B_gprime: float = 0.0,
    B_phiprime: float = 2.0,
    c_omega: float = 1.0,
    grad_omega_sup: float = 0.0,
    c_coe: float = 1.0,
    bf_variant: str = "weight",
    bfprime_variant: str = "assumption",
    extra_constants: dict | None = None,
) -> TheoryReport:
    lc = lipschitz_constants_for(arch, B_g, B_gprime, B_phiprime, bf_variant, bfprime_variant)
    bounds = class_constants(arch.dim, *lc)
    caps = uniform_caps(arch)
    notes = []
    rad = []
    for i, b in enumerate(bounds, start=1):
        try:
            rad.append(rademacher_bound(b.B, b.L, arch.nnz, arch.weight_bound, N))
        except VacuousBoundError as exc:
            rad.append(None)
            notes.append(f"F{i}: {exc}")
    try:
        stat = statistical_bound(arch.dim, arch.depth, arch.nnz, arch.weight_bound, N, c_coe)
    except VacuousBoundError as exc:
        stat = None
        notes.append(f"statistical: {exc}")
    coer = coercivity_from(c_omega, grad_omega_sup)
    constants = {"c_coe": c_coe, "B_g": B_g, "B_gprime": B_gprime, "B_phiprime": B_phiprime}
    constants.update(extra_constants or {})
    return TheoryReport(
        depth=arch.depth,
        width_product=arch.width_product,
        nnz=arch.nnz,
        weight_bound=arch.weight_bound,
        N=N,
        B_f=lc.B_f,
        L_f=lc.L_f,
        B_fprime=lc.B_fprime,
        L_fprime=lc.L_fprime,
        class_bounds=bounds,
        rademacher=tuple(rad),
        statistical_bound=stat,
        coercivity=tuple(coer),
        caps=caps,
        caps_hold=caps_hold(bounds, caps),
        constants=constants,
        variants={"B_f": bf_variant, "B_fprime": bfprime_variant},
        notes=notes,
    )


def prescription_report(inp: PrescriptionInput, widths=None, N: int | None = None, **kwargs) -> TheoryReport:
    """Report for the prescribed class. Without explicit hidden ``widths`` the
    width product defaults to ``n^(D-1)`` (every hidden layer as wide as the
    nonzero budget) and the last hidden width to ``n``. ``N`` overrides the
    prescribed sample count."""
    pres = prescribe_network(inp)
    if N is None:
        N = prescribe_samples(inp, pres.depth)
    if widths is None:
        prod, last = pres.nnz ** (pres.depth - 1), pres.nnz
    else:
        widths = [int(w) for w in widths]
        if len(widths) != pres.depth - 1:
            raise ValueError(f"need {pres.depth - 1} hidden widths for depth {pres.depth}, got {len(widths)}")
        prod, last = int(math.prod(widths)), (widths[-1] if widths else inp.dim)
    arch = Architecture(inp.dim, pres.depth, prod, pres.nnz, pres.weight_bound, last)
    extra = {"c_depth": inp.c_depth, "c_width": inp.c_width, "c_weight": inp.c_weight, "c_samples": inp.c_samples}
    return build_report(arch, N, extra_constants=extra, **kwargs)


# ---------------------------------------------------------------- empirical checks

CLASS_NAMES = ("|p|^2", "p.grad u", "|grad u|^2", "(div p)^2", "u div p", "div p", "u^2", "u")


def class_values(jet: Jet) -> np.ndarray:
    """Values of the eight loss-term classes at each point, shape ``(M, 8)``."""
    u, gu, p, dp = jet.u, jet.grad_u, jet.p, jet.div_p
    return np.stack(
        [np.sum(p * p, -1), np.sum(p * gu, -1), np.sum(gu * gu, -1), dp * dp, u * dp, dp, u * u, u], axis=-1
    )


def random_param_pairs(widths, weight_bound: float, count: int, seed: int):
    """Pairs inside the weight box: half independent draws, half small perturbations."""
    rng = block_generator(seed, 1 << 21)
    n = init_params(widths, weight_bound, 0).n_params
    pairs = []
    for k in range(count):
        a = rng.uniform(-weight_bound, weight_bound, n)
        if k % 2 == 0:
            b = rng.uniform(-weight_bound, weight_bound, n)
        else:
            b = np.clip(a + 1e-3 * weight_bound * rng.standard_normal(n), -weight_bound, weight_bound)
        pairs.append((unflatten(widths, a, weight_bound), unflatten(widths, b, weight_bound)))
    return pairs


def verify_empirical_lipschitz(
    pairs,
    act,
    mod: BoundaryModifier,
    cls: int,
    n_points: int = 1,
    seed: int = 0,
    bfprime_variant: str = "assumption",
) -> float:
    """Worst ``|F_i(x; a) - F_i(x; b)| / (L_i ||a - b||_2)`` over the pairs,
    with ``n_points`` random points per pair (0 if every pair coincides)."""
    if not 1 <= cls <= 8:
        raise ValueError("class index must be in 1..8")
    act = as_activation(act)
    worst = 0.0
    for k, (a, b) in enumerate(pairs):
        if a.widths != b.widths:
            raise ValueError("parameter pair has mismatched architectures")
        dist = float(np.linalg.norm(a.flatten() - b.flatten()))
        if dist == 0:
            continue
        nnz = max(a.nonzero_count(), b.nonzero_count())
        lc = lipschitz_constants(a, mod, bfprime_variant=bfprime_variant, nnz=nnz)
        L = float(class_constants(a.dim, *lc)[cls - 1].L)
        x = sample_interior(mod.domain, n_points, seed * 7919 + k).points
        fa = class_values(modify(mod, x, forward_jet(a, act, x)))[:, cls - 1]
        fb = class_values(modify(mod, x, forward_jet(b, act, x)))[:, cls - 1]
        worst = max(worst, float(np.max(np.abs(fa - fb))) / (L * dist))
    return worst


def verify_class_bounds(params: NetworkParams, act, mod: BoundaryModifier, n_points: int, seed: int, **variants) -> np.ndarray:
    """Measured ``sup |F_i| / B_i`` for each class on random interior points."""
    act = as_activation(act)
    x = sample_interior(mod.domain, n_points, seed).points
    vals = np.max(np.abs(class_values(modify(mod, x, forward_jet(params, act, x)))), axis=0)
    bounds = class_constants(params.dim, *lipschitz_constants(params, mod, **variants))
    return np.array([v / float(b.B) if float(b.B) > 0 else (0.0 if v == 0 else math.inf) for v, b in zip(vals, bounds)])


# ---------------------------------------------------------------- sandwich


@dataclass(frozen=True)
class Perturbation:
    """Closed-form ``(u_bar, p_bar)`` with first derivatives.

    ``u``: points -> (M,), ``grad_u``: -> (M, d), ``p``: -> (M, d),
    ``jac_p``: -> (M, d, d) with ``jac_p[m, i, j] = d p_i / d x_j``.
    """

    u: object
    grad_u: object
    p: object
    jac_p: object
    label: str = ""


def zero_perturbation(dim: int) -> Perturbation:
    return Perturbation(
        lambda x: np.zeros(x.shape[0]),
        lambda x: np.zeros(x.shape),
        lambda x: np.zeros(x.shape),
        lambda x: np.zeros(x.shape + (dim,)),
        "zero",
    )


def _quadratic(rng, d: int):
    """Random ``c + b.x + x.A.x`` with standard normal coefficients."""
    c = rng.standard_normal()
    b = rng.standard_normal(d)
    A = rng.standard_normal((d, d))
    A = 0.5 * (A + A.T)
    val = lambda x: c + x @ b + np.einsum("mi,ij,mj->m", x, A, x)
    grad = lambda x: b + 2.0 * x @ A
    return val, grad


def random_perturbation(kind: str, domain: BallDomain, seed: int, alpha: float = 1.0, scale: float = 0.1) -> Perturbation:
    """Random smooth admissible perturbation (polynomial times cutoff).

    With ``y = (x - c)/R`` and ``b = 1 - |y|^2``:

    * dirichlet: ``u_bar = b P``,     ``p_bar = Q``
    * neumann:   ``u_bar = P``,       ``p_bar = b Q``
    * robin:     ``u_bar = P``,       ``p_bar = b Q - alpha u_bar y``

    for random quadratics ``P`` and ``Q_1..Q_d``, so the homogeneous boundary
    identity holds exactly.
    """
    d = domain.dim
    rng = block_generator(seed, 1 << 22)
    P, dP = _quadratic(rng, d)
    Qs = [_quadratic(rng, d) for _ in range(d)]
    c, R = domain.center_array, domain.radius

    def bump(x):
        y = (x - c) / R
        return 1.0 - np.sum(y * y, -1), -2.0 * y / R

    def Q(x):
        return scale * np.stack([q(x) for q, _ in Qs], -1)

    def dQ(x):
        return scale * np.stack([g(x) for _, g in Qs], -2)

    if kind == "dirichlet":
        def u(x):
            return scale * bump(x)[0] * P(x)

        def gu(x):
            b, db = bump(x)
            return scale * (db * P(x)[:, None] + b[:, None] * dP(x))

        return Perturbation(u, gu, Q, dQ, f"dirichlet-{seed}")

    u = lambda x: scale * P(x)
    gu = lambda x: scale * dP(x)

    def p(x):
        b, _ = bump(x)
        out = b[:, None] * Q(x)
        if kind == "robin":
            out = out - alpha * u(x)[:, None] * (x - c) / R
        return out

    def jp(x):
        b, db = bump(x)
        out = Q(x)[:, :, None] * db[:, None, :] + b[:, None, None] * dQ(x)
        if kind == "robin":
            y = (x - c) / R
            out = out - alpha * (y[:, :, None] * gu(x)[:, None, :] + u(x)[:, None, None] * np.eye(d) / R)
        return out

    if kind not in ("neumann", "robin"):
        raise ValueError(f"unknown boundary kind {kind!r}")
    return Perturbation(u, gu, p, jp, f"{kind}-{seed}")


def homogeneous_residual(problem: EllipticProblem, pert: Perturbation, n: int = 4096, seed: int = 0) -> float:
    """Max boundary residual of the homogeneous identity the perturbation must satisfy."""
    mod = problem.boundary
    x = sample_boundary(problem.domain, n, seed).points
    nu = (x - problem.domain.center_array) / problem.domain.radius
    if mod.kind == "dirichlet":
        r = pert.u(x)
    elif mod.kind == "neumann":
        r = np.sum(pert.p(x) * nu, -1)
    else:
        r = mod.alpha * pert.u(x) + np.sum(pert.p(x) * nu, -1)
    return float(np.max(np.abs(r)))


@dataclass(frozen=True)
class SandwichReport:
    middle: float
    middle_stderr: float
    lower: float
    upper: float
    lower_gap: float
    lower_gap_stderr: float
    upper_gap: float
    upper_gap_stderr: float
    lower_holds: bool
    upper_holds: bool

    @property
    def holds(self) -> bool:
        return self.lower_holds and self.upper_holds

    def to_dict(self) -> dict:
        out = asdict(self)
        out["holds"] = self.holds
        return out


def _mean_se(v: np.ndarray, vol: float) -> tuple[float, float]:
    n = v.shape[0]
    return vol * math.fsum(v) / n, vol * float(np.std(v, ddof=1)) / math.sqrt(n)


def verify_sandwich(
    problem: EllipticProblem,
    solution: ManufacturedSolution,
    pert: Perturbation,
    n_quad: int = 100_000,
    seed: int = 0,
    n_sigma: float = 3.0,
    boundary_tol: float = 1e-10,
) -> SandwichReport:
    """Check ``lower <= L(u_e + u_bar, p_e + p_bar) - L(u_e, p_e) <= upper``.

    ``lower = c1 |grad u_bar|^2 + c2 |u_bar|^2 + c3 |p_bar|^2`` with the
    coercivity triple, and
    ``upper = 2 (||omega||_inf^2 ||u_bar||_{H1}^2 + ||p_bar||_{H1}^2)``.
    The loss difference is computed through the loss density on the perturbed
    exact jets. The comparison uses paired per-point differences, each allowed
    to dip ``n_sigma`` standard errors below zero.
    """
    from .loss import density

    res = homogeneous_residual(problem, pert, seed=seed + 1)
    if res > boundary_tol:
        raise ValueError(
            f"perturbation {pert.label!r} violates the homogeneous {problem.boundary.kind} "
            f"boundary identity (max residual {res:.3e})"
        )
    c1, c2, c3 = coercivity_constants(problem)
    om_inf = problem.omega_sup
    x = sample_interior(problem.domain, n_quad, seed).points
    ex = solution.jet(x)
    u, gu, p, jp = pert.u(x), pert.grad_u(x), pert.p(x), pert.jac_p(x)
    value = ex.value + np.concatenate([u[:, None], p], -1)
    jac = ex.jacobian + np.concatenate([gu[:, None, :], jp], -2)
    mid = density(problem, Jet(value, jac), x) - density(problem, ex, x)
    u2, g2, p2, jp2 = u * u, np.sum(gu * gu, -1), np.sum(p * p, -1), np.sum(jp * jp, (-2, -1))
    low = c1 * g2 + c2 * u2 + c3 * p2
    up = 2.0 * (om_inf**2 * (u2 + g2) + p2 + jp2)
    vol = volume(problem.domain)
    m, m_se = _mean_se(mid, vol)
    lg, lg_se = _mean_se(mid - low, vol)
    ug, ug_se = _mean_se(up - mid, vol)
    return SandwichReport(
        middle=m,
        middle_stderr=m_se,
        lower=vol * math.fsum(low) / n_quad,
        upper=vol * math.fsum(up) / n_quad,
        lower_gap=lg,
        lower_gap_stderr=lg_se,
        upper_gap=ug,
        upper_gap_stderr=ug_se,
        lower_holds=lg >= -n_sigma * lg_se,
        upper_holds=ug >= -n_sigma * ug_se,
    )
