"""Dynamical matrices and the algebra of matrix-coefficient difference operators.

Conventions
-----------
A ``DynamicalMatrix`` carries a shift step ``gamma``.  Weight-shifted
evaluation M(λ + γ h_k) is realised blockwise: on the weight-i subspace of
leg k the matrix is evaluated at λ + γ e_i.

A ``DifferenceOperator`` is Σ_s M_s(λ) S_s with S_s f(λ) = f(λ + γ s) and
s an integer vector.  Composition follows

    (M_s S_s)(M'_r S_r) = M_s(λ) M'_r(λ + γ s) S_{s+r}.

Coefficients are produced lazily by a single function ``lam -> {s: matrix}``
so that a product of many factors evaluates each factor once per needed λ.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .tensor_core import (
    DEFAULT_COND_MAX,
    DenseOperator,
    LegError,
    SingularMatrixError,
    embed,
    partial_trace,
)

Shift = tuple


def as_lambda(lam, n: int) -> np.ndarray:
    lam = np.asarray(lam, dtype=complex).reshape(-1)
    if lam.shape != (n,):
        raise ValueError(f"λ must have {n} components, got {lam.shape}")
    return lam


def unit(i: int, n: int) -> np.ndarray:
    e = np.zeros(n, dtype=int)
    e[i] = 1
    return e


# ---------------------------------------------------------------------------
# DynamicalMatrix
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class DynamicalMatrix:
    """Pure function (u-arguments, λ) -> operator on ``legs``.

    ``fn(*us, lam)`` returns a matrix whose tensor factors follow ``legs`` in
    the declared order.
    """

    legs: tuple
    n: int
    arity: int
    fn: Callable = field(repr=False)
    gamma: complex = 0.0
    name: str = ""

    def __post_init__(self):
        if len(set(self.legs)) != len(self.legs):
            raise LegError(f"duplicate legs {self.legs}")
        if self.arity not in (0, 1, 2):
            raise ValueError("arity must be 0, 1 or 2")

    def __call__(self, *args) -> DenseOperator:
        *us, lam = args
        if len(us) != self.arity:
            raise TypeError(f"{self.name or 'matrix'} expects {self.arity} spectral arguments, got {len(us)}")
        mat = self.fn(*us, as_lambda(lam, self.n))
        return DenseOperator.from_matrix(mat, self.legs, self.n)

    def raw(self, *args) -> np.ndarray:
        """Entries in declared leg order (no reordering)."""
        *us, lam = args
        return np.asarray(self.fn(*us, as_lambda(lam, self.n)), dtype=complex)

    # combinators ---------------------------------------------------------
    def on(self, *legs) -> "DynamicalMatrix":
        """Same entries placed on other legs, e.g. A_{12} -> A_{0j}."""
        if len(legs) != len(self.legs):
            raise LegError("relabelling must keep the number of legs")
        return DynamicalMatrix(tuple(legs), self.n, self.arity, self.fn, self.gamma, self.name)

    def at(self, *us) -> "DynamicalMatrix":
        """Fix the spectral arguments, leaving a function of λ only."""
        fn = self.fn
        return DynamicalMatrix(self.legs, self.n, 0, lambda lam: fn(*us, lam), self.gamma, self.name)

    def with_gamma(self, gamma) -> "DynamicalMatrix":
        return DynamicalMatrix(self.legs, self.n, self.arity, self.fn, gamma, self.name)

    def map(self, f: Callable[[np.ndarray], np.ndarray], name: str = "") -> "DynamicalMatrix":
        fn = self.fn
        g = lambda *a: f(np.asarray(fn(*a), dtype=complex))
        g.lam_independent = self.lam_independent()
        return DynamicalMatrix(self.legs, self.n, self.arity, g, self.gamma, name or self.name)

    def swapped(self) -> "DynamicalMatrix":
        """M_{21}: the two legs exchanged, spectral arguments untouched."""
        if len(self.legs) != 2:
            raise LegError("swapped() needs a two-leg matrix")
        n = self.n
        return self.map(lambda m: m.reshape(n, n, n, n).transpose(1, 0, 3, 2).reshape(n * n, n * n),
                        name=(self.name + "_21") if self.name else "")

    def lam_independent(self) -> bool:
        return bool(getattr(self.fn, "lam_independent", False))


def constant_matrix(mat, legs: Sequence, n: int, arity: int = 0, gamma=0.0, name="") -> DynamicalMatrix:
    mat = np.asarray(mat, dtype=complex)

    def fn(*args):
        return mat

    fn.lam_independent = True
    return DynamicalMatrix(tuple(legs), n, arity, fn, gamma, name)


def _normalise_shift_legs(shift_legs) -> list[tuple]:
    coeff: dict = {}
    for item in shift_legs:
        leg, sign = item if isinstance(item, tuple) else (item, 1)
        coeff[leg] = coeff.get(leg, 0) + int(sign)
    return [(leg, c) for leg, c in coeff.items() if c != 0]


def weight_shift_embed(M: DynamicalMatrix, shift_legs) -> DynamicalMatrix:
    """M(λ + γ Σ_k sign_k h_k) as an operator on M.legs ∪ shift legs.

    ``shift_legs`` is a list of ``(leg, sign)`` pairs (bare labels mean sign +1);
    repeated legs add their signs, so h_3 + h_< style arguments compose.
    """
    shifts = _normalise_shift_legs(shift_legs)
    overlap = {l for l, _ in shifts} & set(M.legs)
    if overlap:
        raise LegError(f"shift legs {sorted(overlap)} overlap the operator legs {M.legs}")
    if not shifts:
        return M
    n, k = M.n, len(M.legs)
    s_legs = [l for l, _ in shifts]
    signs = np.array([c for _, c in shifts])
    dM, dS = n**k, n ** len(shifts)
    gamma, fn = M.gamma, M.fn

    def shifted(*args):
        *us, lam = args
        out = np.zeros((dM, dS, dM, dS), dtype=complex)
        for flat, idx in enumerate(itertools.product(range(n), repeat=len(shifts))):
            vec = np.zeros(n)
            for i, c in zip(idx, signs):
                vec[i] += c
            out[:, flat, :, flat] = fn(*us, lam + gamma * vec)
        return out.reshape(dM * dS, dM * dS)

    return DynamicalMatrix(tuple(M.legs) + tuple(s_legs), n, M.arity, shifted, gamma, M.name)


def sc_shift(M: DynamicalMatrix, mode: str = "SC", sign: int = 1, legs: Iterable | None = None) -> DynamicalMatrix:
    """Entrywise index-dependent shift.

    Entry (row, col) is read from M at λ - sign·γ·Σ_{k in legs} e_{idx_k}, where
    idx_k is the column (``SC``) or row (``SL``) index on leg k.  ``sign=+1``
    with SC is the usual M^{SC}; ``sign=-1`` with SL is the bar convention.
    """
    mode = mode.upper()
    if mode not in ("SC", "SL"):
        raise ValueError("mode must be 'SC' or 'SL'")
    legs = list(M.legs if legs is None else legs)
    unknown = set(legs) - set(M.legs)
    if unknown:
        raise LegError(f"legs {sorted(unknown)} not in {M.legs}")
    n, k = M.n, len(M.legs)
    pos = [M.legs.index(l) for l in legs]
    gamma, fn = M.gamma, M.fn

    def shifted(*args):
        *us, lam = args
        out = None
        for idx in itertools.product(range(n), repeat=len(pos)):
            vec = np.zeros(n)
            for i in idx:
                vec[i] += 1
            full = np.asarray(fn(*us, lam - sign * gamma * vec), dtype=complex).reshape([n] * (2 * k))
            if out is None:
                out = np.zeros_like(full)
            sl = [slice(None)] * (2 * k)
            for p, i in zip(pos, idx):
                sl[p + (k if mode == "SC" else 0)] = i
            out[tuple(sl)] = full[tuple(sl)]
        return out.reshape(n**k, n**k)

    return DynamicalMatrix(M.legs, n, M.arity, shifted, gamma, M.name)


def product(factors: Sequence[DynamicalMatrix], legs: Iterable | None = None) -> DynamicalMatrix:
    """Ordered product of arity-0 dynamical matrices as one function of λ."""
    factors = list(factors)
    if not factors:
        raise ValueError("empty product")
    n, gamma = factors[0].n, factors[0].gamma
    all_legs = set(legs or ())
    for f in factors:
        if f.arity != 0:
            raise ValueError("fix spectral arguments with .at() before multiplying")
        all_legs |= set(f.legs)
    total = tuple(sorted(all_legs))

    def fn(lam):
        out = DenseOperator.identity(total, n)
        for f in factors:
            out = out @ f(lam)
        return out.mat

    return DynamicalMatrix(total, n, 0, fn, gamma)


# ---------------------------------------------------------------------------
# DifferenceOperator
# ---------------------------------------------------------------------------
def _key(s) -> Shift:
    return tuple(int(x) for x in s)


@dataclass(frozen=True, eq=False)
class DifferenceOperator:
    """Σ_s M_s(λ) S_s with integer shift vectors s."""

    legs: tuple
    n: int
    gamma: complex
    fn: Callable[[np.ndarray], Mapping[Shift, np.ndarray]] = field(repr=False)

    def __post_init__(self):
        if tuple(sorted(self.legs)) != tuple(self.legs):
            raise LegError("difference-operator legs must be sorted")

    # constructors --------------------------------------------------------
    @classmethod
    def from_function(cls, M, legs=None, n=None, gamma=None) -> "DifferenceOperator":
        """A pure function of λ (zero shift).  Accepts an arity-0 DynamicalMatrix."""
        if isinstance(M, DynamicalMatrix):
            if M.arity != 0:
                raise ValueError("fix spectral arguments first")
            n, gamma = M.n, M.gamma if gamma is None else gamma
            tot = tuple(sorted(M.legs)) if legs is None else tuple(sorted(legs))
            zero = (0,) * n
            return cls(tot, n, gamma, lambda lam: {zero: embed(M(lam), tot).mat})
        zero = (0,) * n
        tot = tuple(sorted(legs))

        def fn(lam):
            v = M(lam)
            if isinstance(v, DenseOperator):
                v = embed(v, tot).mat
            return {zero: np.asarray(v, dtype=complex)}

        return cls(tot, n, gamma, fn)

    @classmethod
    def constant(cls, op: DenseOperator, gamma=0.0) -> "DifferenceOperator":
        zero = (0,) * op.n
        return cls(op.legs, op.n, gamma, lambda lam: {zero: op.mat})

    @classmethod
    def identity(cls, legs, n, gamma) -> "DifferenceOperator":
        return cls.constant(DenseOperator.identity(legs, n), gamma)

    @classmethod
    def scalar_shift(cls, s, legs, n, gamma, coeff=1.0) -> "DifferenceOperator":
        op = DenseOperator.identity(legs, n)
        key = _key(s)
        return cls(op.legs, n, gamma, lambda lam: {key: coeff * op.mat})

    # evaluation ----------------------------------------------------------
    def terms(self, lam, prune: float | None = None) -> dict[Shift, DenseOperator]:
        lam = as_lambda(lam, self.n)
        out = {}
        for s, m in self.fn(lam).items():
            if prune is not None and np.linalg.norm(m) <= prune:
                continue
            out[s] = DenseOperator(self.legs, self.n, np.asarray(m, dtype=complex))
        return out

    def raw_terms(self, lam) -> dict[Shift, np.ndarray]:
        return dict(self.fn(as_lambda(lam, self.n)))

    def shift_part(self, lam, tol: float = 0.0) -> float:
        """Largest Frobenius norm among coefficients with a nonzero shift."""
        zero = (0,) * self.n
        vals = [np.linalg.norm(m) for s, m in self.raw_terms(lam).items() if s != zero]
        return float(max(vals, default=0.0))

    def as_matrix(self, lam, tol: float = 1e-10) -> DenseOperator:
        """The zero-shift coefficient, refusing if genuine shifts remain."""
        sp = self.shift_part(lam)
        if sp > tol:
            raise ValueError(f"operator has a nonzero shift part ({sp:.3g}); not a pure matrix function")
        zero = (0,) * self.n
        m = self.raw_terms(lam).get(zero)
        if m is None:
            m = np.zeros((self.n ** len(self.legs),) * 2, dtype=complex)
        return DenseOperator(self.legs, self.n, m)

    def restricted_to_constants(self, lam) -> DenseOperator:
        """Action on λ-constant functions: Σ_s M_s(λ)."""
        acc = np.zeros((self.n ** len(self.legs),) * 2, dtype=complex)
        for m in self.raw_terms(lam).values():
            acc = acc + m
        return DenseOperator(self.legs, self.n, acc)

    def act(self, f: Callable[[np.ndarray], np.ndarray], lam) -> np.ndarray:
        """(D f)(λ) for a vector-valued function f on the operator's legs."""
        lam = as_lambda(lam, self.n)
        out = 0
        for s, m in self.fn(lam).items():
            out = out + m @ np.asarray(f(lam + self.gamma * np.array(s)), dtype=complex)
        return out

    # algebra ---------------------------------------------------------------
    def _compatible(self, other: "DifferenceOperator"):
        if other.n != self.n:
            raise ValueError("mismatched leg dimension n")
        if not np.isclose(other.gamma, self.gamma):
            raise ValueError(f"mismatched shift step: {self.gamma} vs {other.gamma}")

    def embed(self, legs) -> "DifferenceOperator":
        tot = tuple(sorted(legs))
        if tot == self.legs:
            return self
        src, n, fn = self.legs, self.n, self.fn

        def efn(lam):
            return {s: embed(DenseOperator(src, n, m), tot).mat for s, m in fn(lam).items()}

        return DifferenceOperator(tot, n, self.gamma, efn)

    def __matmul__(self, other: "DifferenceOperator") -> "DifferenceOperator":
        return diffop_mul(self, other)

    def __add__(self, other: "DifferenceOperator") -> "DifferenceOperator":
        return diffop_add(self, other)

    def __sub__(self, other: "DifferenceOperator") -> "DifferenceOperator":
        return diffop_add(self, other.scale(-1.0))

    def scale(self, c) -> "DifferenceOperator":
        fn = self.fn
        return DifferenceOperator(self.legs, self.n, self.gamma, lambda lam: {s: c * m for s, m in fn(lam).items()})

    def right_multiply(self, F: Callable[[np.ndarray], np.ndarray]) -> "DifferenceOperator":
        """D·F for a pure matrix function F (given on this operator's legs)."""
        return diffop_mul(self, DifferenceOperator.from_function(F, self.legs, self.n, self.gamma))


def _union(a: DifferenceOperator, b: DifferenceOperator):
    return tuple(sorted(set(a.legs) | set(b.legs)))


def diffop_mul(X: DifferenceOperator, Y: DifferenceOperator) -> DifferenceOperator:
    X._compatible(Y)
    legs = _union(X, Y)
    Xe, Ye = X.embed(legs), Y.embed(legs)
    gamma = X.gamma

    def fn(lam):
        out: dict = {}
        cache: dict = {}
        for s, ms in Xe.fn(lam).items():
            if s not in cache:
                cache[s] = Ye.fn(lam + gamma * np.array(s))
            for r, mr in cache[s].items():
                key = tuple(a + b for a, b in zip(s, r))
                prod = ms @ mr
                out[key] = out[key] + prod if key in out else prod
        return out

    return DifferenceOperator(legs, X.n, gamma, fn)


def diffop_add(X: DifferenceOperator, Y: DifferenceOperator) -> DifferenceOperator:
    X._compatible(Y)
    legs = _union(X, Y)
    Xe, Ye = X.embed(legs), Y.embed(legs)

    def fn(lam):
        out = dict(Xe.fn(lam))
        for s, m in Ye.fn(lam).items():
            out[s] = out[s] + m if s in out else m
        return out

    return DifferenceOperator(legs, X.n, X.gamma, fn)


def diffop_linear(coeffs: Sequence[complex], ops: Sequence[DifferenceOperator]) -> DifferenceOperator:
    """Σ c_k X_k, evaluated in one pass."""
    legs = tuple(sorted(set().union(*[o.legs for o in ops])))
    emb = [o.embed(legs) for o in ops]
    n, gamma = ops[0].n, ops[0].gamma

    def fn(lam):
        out: dict = {}
        for c, o in zip(coeffs, emb):
            for s, m in o.fn(lam).items():
                out[s] = out[s] + c * m if s in out else c * m
        return out

    return DifferenceOperator(legs, n, gamma, fn)


def diffop_trace(X: DifferenceOperator, leg) -> DifferenceOperator:
    if leg not in X.legs:
        raise LegError(f"unknown leg {leg}")
    src, n, fn = X.legs, X.n, X.fn
    rest = tuple(l for l in src if l != leg)

    def tfn(lam):
        return {s: partial_trace(DenseOperator(src, n, m), leg).mat for s, m in fn(lam).items()}

    return DifferenceOperator(rest, n, X.gamma, tfn)


def diffop_commutator(X: DifferenceOperator, Y: DifferenceOperator) -> DifferenceOperator:
    return diffop_add(diffop_mul(X, Y), diffop_mul(Y, X).scale(-1.0))


def diffop_residual(X: DifferenceOperator, Y: DifferenceOperator, lam_samples) -> float:
    """Max over samples and shift vectors of ‖X_s − Y_s‖_F."""
    X._compatible(Y)
    legs = _union(X, Y)
    Xe, Ye = X.embed(legs), Y.embed(legs)
    worst = 0.0
    for lam in lam_samples:
        lam = as_lambda(lam, X.n)
        a, b = Xe.fn(lam), Ye.fn(lam)
        for s in set(a) | set(b):
            d = a.get(s, 0) - b.get(s, 0)
            worst = max(worst, float(np.linalg.norm(d)))
    return worst


def diffop_norm(X: DifferenceOperator, lam_samples) -> float:
    worst = 0.0
    for lam in lam_samples:
        for m in X.fn(as_lambda(lam, X.n)).values():
            worst = max(worst, float(np.linalg.norm(m)))
    return worst


def exp_shift(leg, sign: int, n: int, gamma) -> DifferenceOperator:
    """e^{±γ𝒟_leg} = Σ_i E_ii^{(leg)} S_{±e_i}."""
    if sign not in (1, -1):
        raise ValueError("sign must be ±1")
    proj = [np.diag(unit(i, n)).astype(complex) for i in range(n)]
    terms = {_key(sign * unit(i, n)): proj[i] for i in range(n)}
    return DifferenceOperator((leg,), n, gamma, lambda lam: terms)


def is_pure_function(X: DifferenceOperator, lam_samples, tol: float = 1e-12) -> bool:
    scale = max(diffop_norm(X, lam_samples), 1.0)
    return all(X.shift_part(l) <= tol * scale for l in lam_samples)


def pointwise_inverse(X: DifferenceOperator, cond_max: float = DEFAULT_COND_MAX) -> DifferenceOperator:
    """Inverse of a pure matrix function."""
    zero = (0,) * X.n
    fn, legs, n = X.fn, X.legs, X.n

    def ifn(lam):
        terms = fn(lam)
        m = terms.get(zero)
        if m is None:
            raise SingularMatrixError("zero operator")
        others = [np.linalg.norm(v) for s, v in terms.items() if s != zero]
        if others and max(others) > 1e-10 * max(1.0, np.linalg.norm(m)):
            raise ValueError("pointwise_inverse needs a pure function of λ")
        c = np.linalg.cond(m)
        if not np.isfinite(c) or c > cond_max:
            raise SingularMatrixError(f"condition number {c:.3g} exceeds {cond_max:.3g}")
        return {zero: np.linalg.inv(m)}

    return DifferenceOperator(legs, n, X.gamma, ifn)


def diffop_inverse(X: DifferenceOperator, lam_samples, cond_max: float = DEFAULT_COND_MAX) -> DifferenceOperator:
    """Inverse for operators of the form F(λ)·Π_k e^{s_k γ𝒟_k}.

    Tries a pure function first, then peels one exp_shift factor per leg.
    Other shapes (whose inverse is not a finite sum) are refused.
    """
    if is_pure_function(X, lam_samples):
        return pointwise_inverse(X, cond_max)
    for k in X.legs:
        for s in (1, -1):
            G = diffop_mul(X, exp_shift(k, -s, X.n, X.gamma))
            if is_pure_function(G, lam_samples):
                return diffop_mul(exp_shift(k, -s, X.n, X.gamma), pointwise_inverse(G, cond_max))
    raise ValueError("difference operator is not of monomial shift form; inverse not finite")
