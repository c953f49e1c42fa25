"""Seeded sampling of λ and spectral parameters away from model poles."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

SEED_ENV = "QUADBRAID_SEED"
GUARD = 0.1


def resolve_seed(seed: int | None = None, default: int = 0) -> int:
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        return int(env)
    return default


def _box(rng, size, re=1.0, im=0.3):
    return rng.uniform(-re, re, size) + 1j * rng.uniform(-im, im, size)


@dataclass
class Sampler:
    """Rejection sampler on the box [−1,1] + i[−0.3,0.3].

    ``guard(lam)`` lists complex arguments whose sinh sits in a denominator;
    points with any |sinh(arg)| ≤ 0.1 are rejected.
    """

    seed: int = 0
    n: int = 2
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)

    def lam(self, guard=None, max_tries: int = 1000) -> np.ndarray:
        for _ in range(max_tries):
            lam = _box(self.rng, self.n)
            if guard is None or all(abs(np.sinh(a)) > GUARD for a in guard(lam)):
                return lam
        raise RuntimeError("could not find an admissible λ sample")

    def lams(self, k: int, guard=None) -> list[np.ndarray]:
        return [self.lam(guard) for _ in range(k)]

    def u(self, scale: float = 0.5, avoid=(), max_tries: int = 1000, margin: float = GUARD) -> complex:
        """Spectral parameter in a smaller box, with |sinh(u − a)| > margin for a in ``avoid``."""
        for _ in range(max_tries):
            u = complex(_box(self.rng, 1, scale, 0.3 * scale)[0])
            if all(abs(np.sinh(u - a)) > margin for a in avoid):
                return u
        raise RuntimeError("could not find an admissible spectral parameter")
