"""Ball domains and reproducible uniform sampling.

Samples are drawn in fixed-size blocks. Block ``k`` of a request with seed
``s`` uses a Philox generator keyed by ``SeedSequence(s, spawn_key=(k,))``, so
the concatenated point list depends only on ``(domain, n, seed)`` and not on
how the blocks are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

BLOCK = 1 << 15


@dataclass(frozen=True)
class BallDomain:
    """Open ball ``{x : |x - center| < radius}`` in ``R^dim``."""

    dim: int
    center: tuple[float, ...] | None = None
    radius: float = 1.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"radius must be finite and positive, got {self.radius!r}")
        c = (0.0,) * self.dim if self.center is None else tuple(float(v) for v in self.center)
        if len(c) != self.dim:
            raise ValueError(f"center has length {len(c)}, expected {self.dim}")
        if not all(math.isfinite(v) for v in c):
            raise ValueError("center must be finite")
        object.__setattr__(self, "center", c)

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def volume(self) -> float:
        return volume(self)

    def scaled(self, x: np.ndarray) -> np.ndarray:
        """Map points to ball-local coordinates ``(x - center) / radius``."""
        return (np.asarray(x, dtype=float) - self.center_array) / self.radius


def volume(domain: BallDomain) -> float:
    d = domain.dim
    return math.pi ** (d / 2) * domain.radius**d / math.gamma(d / 2 + 1)


def surface_area(domain: BallDomain) -> float:
    d = domain.dim
    return d * volume(domain) / domain.radius


@dataclass(frozen=True)
class SampleSet:
    points: np.ndarray = field(repr=False)
    seed: int
    kind: Literal["interior", "boundary"]

    def __post_init__(self):
        self.points.setflags(write=False)

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.kind == other.kind
            and self.points.shape == other.points.shape
            and np.array_equal(self.points, other.points)
        )

    __hash__ = None


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Generator for sample block ``block`` of a request seeded with ``seed``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(ss))


def _check_request(domain: BallDomain, n: int):
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    if not isinstance(domain, BallDomain):
        raise TypeError("domain must be a BallDomain")


def _directions(rng: np.random.Generator, m: int, d: int) -> np.ndarray:
    g = rng.standard_normal((m, d))
    norms = np.linalg.norm(g, axis=1)
    # a zero Gaussian vector has probability zero; redraw to stay total
    while np.any(norms == 0.0):
        bad = norms == 0.0
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(g, axis=1)
    return g / norms[:, None]


def _interior_block(domain: BallDomain, m: int, rng: np.random.Generator) -> np.ndarray:
    d, r, c = domain.dim, domain.radius, domain.center_array
    out = np.empty((m, d))
    filled = 0
    while filled < m:
        k = m - filled
        dirs = _directions(rng, k, d)
        rad = r * rng.random(k) ** (1.0 / d)
        pts = c + rad[:, None] * dirs
        ok = np.linalg.norm(pts - c, axis=1) < r
        good = pts[ok]
        out[filled : filled + good.shape[0]] = good
        filled += good.shape[0]
    return out


def _boundary_block(domain: BallDomain, m: int, rng: np.random.Generator) -> np.ndarray:
    return domain.center_array + domain.radius * _directions(rng, m, domain.dim)


def _sample(domain, n, seed, block_fn):
    _check_request(domain, n)
    blocks = []
    for k, start in enumerate(range(0, n, BLOCK)):
        m = min(BLOCK, n - start)
        blocks.append(block_fn(domain, m, block_generator(seed, k)))
    return np.concatenate(blocks, axis=0)


def sample_interior(domain: BallDomain, n: int, seed: int) -> SampleSet:
    """Draw ``n`` i.i.d. uniform points strictly inside the ball.

    Direction is a normalized standard Gaussian and the radius is
    ``radius * U**(1/d)``. Points that round onto the closed boundary are
    redrawn from the same block stream.
    """
    pts = _sample(domain, n, seed, _interior_block)
    return SampleSet(pts, int(seed), "interior")


def sample_boundary(domain: BallDomain, n: int, seed: int) -> SampleSet:
    """Draw ``n`` uniform points on the sphere ``|x - center| = radius``."""
    pts = _sample(domain, n, seed, _boundary_block)
    return SampleSet(pts, int(seed), "boundary")


def outward_normal(domain: BallDomain, x: np.ndarray) -> np.ndarray:
    y = np.asarray(x, dtype=float) - domain.center_array
    return y / np.linalg.norm(y, axis=-1, keepdims=True)
