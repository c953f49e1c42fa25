"""Dense complex operators on labeled tensor legs.

Every operator stores its legs in sorted order; binary operations first embed
both operands into the union of their legs, so index bookkeeping never depends
on the order in which a caller happened to list the legs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_COND_MAX = 1e12


class LegError(ValueError):
    """Unknown, duplicated or overlapping leg labels."""


class SingularMatrixError(np.linalg.LinAlgError):
    """Matrix too ill-conditioned to invert (degenerate model point)."""


def matrix_unit(i: int, j: int, n: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=complex)
    m[i, j] = 1.0
    return m


@dataclass(frozen=True)
class WeightBasis:
    """Diagonal generators h_i = E_ii of the Cartan part."""

    n: int

    def h(self, i: int) -> np.ndarray:
        return matrix_unit(i, i, self.n)

    def generators(self) -> list[np.ndarray]:
        return [self.h(i) for i in range(self.n)]


def _check_unique(legs: Sequence) -> None:
    if len(set(legs)) != len(legs):
        raise LegError(f"duplicate leg labels in {list(legs)}")


def _permute_legs(mat: np.ndarray, n: int, src: Sequence, dst: Sequence) -> np.ndarray:
    """Reorder the tensor factors of ``mat`` from leg order ``src`` to ``dst``."""
    k = len(src)
    if list(src) == list(dst):
        return mat
    perm = [list(src).index(l) for l in dst]
    t = mat.reshape([n] * (2 * k)).transpose(perm + [p + k for p in perm])
    return t.reshape(n**k, n**k)


@dataclass(frozen=True, eq=False)
class DenseOperator:
    legs: tuple
    n: int
    mat: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_unique(self.legs)
        if tuple(sorted(self.legs)) != tuple(self.legs):
            raise LegError("legs must be stored sorted; use DenseOperator.from_matrix")
        d = self.n ** len(self.legs)
        if self.mat.shape != (d, d):
            raise ValueError(f"matrix shape {self.mat.shape} does not match {len(self.legs)} legs of dim {self.n}")

    # construction -------------------------------------------------------
    @classmethod
    def from_matrix(cls, mat, legs: Sequence, n: int) -> "DenseOperator":
        """Wrap ``mat`` whose tensor factors follow ``legs`` (any order)."""
        legs = tuple(legs)
        _check_unique(legs)
        mat = np.asarray(mat, dtype=complex)
        target = tuple(sorted(legs))
        return cls(target, n, _permute_legs(mat, n, legs, target))

    @classmethod
    def identity(cls, legs: Iterable, n: int) -> "DenseOperator":
        legs = tuple(sorted(legs))
        return cls(legs, n, np.eye(n ** len(legs), dtype=complex))

    @classmethod
    def single(cls, mat, leg, n: int) -> "DenseOperator":
        return cls((leg,), n, np.asarray(mat, dtype=complex))

    # basic algebra --------------------------------------------------------
    def embed(self, total_legs: Iterable) -> "DenseOperator":
        return embed(self, total_legs)

    def _aligned(self, other: "DenseOperator"):
        if other.n != self.n:
            raise ValueError("leg dimensions differ")
        if other.legs == self.legs:
            return self.mat, other.mat, self.legs
        union = tuple(sorted(set(self.legs) | set(other.legs)))
        return embed(self, union).mat, embed(other, union).mat, union

    def __matmul__(self, other: "DenseOperator") -> "DenseOperator":
        a, b, legs = self._aligned(other)
        return DenseOperator(legs, self.n, a @ b)

    def __add__(self, other: "DenseOperator") -> "DenseOperator":
        a, b, legs = self._aligned(other)
        return DenseOperator(legs, self.n, a + b)

    def __sub__(self, other: "DenseOperator") -> "DenseOperator":
        a, b, legs = self._aligned(other)
        return DenseOperator(legs, self.n, a - b)

    def __mul__(self, c) -> "DenseOperator":
        return DenseOperator(self.legs, self.n, self.mat * c)

    __rmul__ = __mul__

    def __neg__(self) -> "DenseOperator":
        return DenseOperator(self.legs, self.n, -self.mat)

    def norm(self) -> float:
        return float(np.linalg.norm(self.mat))

    def tensor(self) -> np.ndarray:
        return self.mat.reshape([self.n] * (2 * len(self.legs)))

    def relabel(self, mapping: dict) -> "DenseOperator":
        new = [mapping.get(l, l) for l in self.legs]
        return DenseOperator.from_matrix(self.mat, new, self.n)

    def matrix_in(self, legs: Sequence) -> np.ndarray:
        """Entries with tensor factors in the requested leg order."""
        if set(legs) != set(self.legs):
            raise LegError(f"{list(legs)} is not a reordering of {self.legs}")
        return _permute_legs(self.mat, self.n, self.legs, legs)

    def partial_trace(self, leg) -> "DenseOperator":
        return partial_trace(self, leg)

    def partial_transpose(self, legs) -> "DenseOperator":
        return partial_transpose(self, legs)

    def leg_swap(self, a, b) -> "DenseOperator":
        return leg_swap(self, a, b)

    def inverse(self, cond_max: float = DEFAULT_COND_MAX) -> "DenseOperator":
        return inverse(self, cond_max)


def embed(op: DenseOperator, total_legs: Iterable) -> DenseOperator:
    """op ⊗ 1 on the remaining legs of ``total_legs``."""
    total = tuple(sorted(total_legs))
    _check_unique(total)
    missing = set(op.legs) - set(total)
    if missing:
        raise LegError(f"legs {sorted(missing)} not in target {list(total)}")
    if total == op.legs:
        return op
    rest = [l for l in total if l not in op.legs]
    full = np.kron(op.mat, np.eye(op.n ** len(rest), dtype=complex))
    return DenseOperator(total, op.n, _permute_legs(full, op.n, list(op.legs) + rest, total))


def permutation(a, b, context: Iterable, n: int) -> DenseOperator:
    """P_ab on ``context`` legs."""
    if a == b:
        raise LegError("permutation needs two distinct legs")
    p = sum(np.kron(matrix_unit(i, j, n), matrix_unit(j, i, n)) for i in range(n) for j in range(n))
    return embed(DenseOperator.from_matrix(p, (a, b), n), context)


def partial_trace(M: DenseOperator, leg) -> DenseOperator:
    if leg not in M.legs:
        raise LegError(f"unknown leg {leg}")
    k = len(M.legs)
    i = M.legs.index(leg)
    t = np.trace(M.tensor(), axis1=i, axis2=k + i)
    rest = tuple(l for l in M.legs if l != leg)
    d = M.n ** len(rest)
    return DenseOperator(rest, M.n, np.asarray(t).reshape(d, d))


def partial_transpose(M: DenseOperator, legs) -> DenseOperator:
    legs = [legs] if not isinstance(legs, (list, tuple, set, frozenset)) else list(legs)
    k = len(M.legs)
    axes = list(range(2 * k))
    for l in legs:
        if l not in M.legs:
            raise LegError(f"unknown leg {l}")
        i = M.legs.index(l)
        axes[i], axes[k + i] = axes[k + i], axes[i]
    return DenseOperator(M.legs, M.n, M.tensor().transpose(axes).reshape(M.mat.shape))


def leg_swap(M: DenseOperator, a, b) -> DenseOperator:
    """P_ab M P_ab, i.e. M with the roles of legs a and b exchanged."""
    for l in (a, b):
        if l not in M.legs:
            raise LegError(f"unknown leg {l}")
    if a == b:
        return M
    return M.relabel({a: b, b: a})


def inverse(M: DenseOperator, cond_max: float = DEFAULT_COND_MAX) -> DenseOperator:
    c = np.linalg.cond(M.mat)
    if not np.isfinite(c) or c > cond_max:
        raise SingularMatrixError(f"condition number {c:.3g} exceeds {cond_max:.3g}")
    return DenseOperator(M.legs, M.n, np.linalg.inv(M.mat))


def commutator_norm(A: DenseOperator, B: DenseOperator) -> float:
    """Frobenius norm of AB - BA."""
    return (A @ B - B @ A).norm()


def kron_legs(mats: Sequence[np.ndarray], legs: Sequence, n: int) -> DenseOperator:
    """Tensor product of single-leg matrices placed on ``legs``."""
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return DenseOperator.from_matrix(out, legs, n)
