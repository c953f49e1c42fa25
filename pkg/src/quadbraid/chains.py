"""Double-row transfer matrices, χ-conjugation and commutativity scans.

Every transfer matrix is assembled inside the difference-operator calculus,
so shifts h_< and the factors e^{±ε𝒟₀} need no special casing.  The
auxiliary leg is 0 and quantum legs are 1..L (L = N for SP, 2N for SNP).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .models import ModelSpec
from .shift_calculus import (
    DifferenceOperator,
    DynamicalMatrix,
    constant_matrix,
    diffop_mul,
    diffop_residual,
    diffop_trace,
    exp_shift,
    sc_shift,
    weight_shift_embed,
)
from .tensor_core import DenseOperator, SingularMatrixError

AUX = 0


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """A model, a site count and the boundary data choices.

    ``N`` counts sites for SP and pairs for SNP.  ``u_quantum`` defaults to
    zeros.  ``start`` selects where the semidynamical shifts land: ``"C"``
    (odd legs) or ``"A"`` (even legs).
    """

    model: ModelSpec
    N: int
    chi_mode: Optional[str] = None
    u_quantum: Optional[tuple] = None
    start: str = "C"

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.start not in ("C", "A"):
            raise ValueError("start must be 'C' or 'A'")
        mode = self.mode
        if mode not in ("identity", "diagonal", "nondiagonal"):
            raise ValueError(f"unknown chi mode {mode!r}")
        if self.u_quantum is not None and len(self.u_quantum) != self.L:
            raise ValueError(f"u_quantum needs {self.L} entries")

    @property
    def mode(self) -> str:
        return self.chi_mode or self.model.chi_mode

    @property
    def L(self) -> int:
        return self.N if self.model.boundary == "SP" else 2 * self.N

    @property
    def legs(self) -> tuple:
        return tuple(range(1, self.L + 1))

    def uq(self, k: int) -> complex:
        return 0.0 if self.u_quantum is None else self.u_quantum[k - 1]

    @property
    def eps(self) -> complex:
        return self.model.step

    @property
    def n(self) -> int:
        return self.model.n


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    u: complex
    value: DifferenceOperator
    chain: ChainSpec = field(repr=False)

    def at(self, lam, tol: float = 1e-10) -> DenseOperator:
        """Pure matrix at λ (refuses if genuine shifts remain)."""
        return self.value.as_matrix(lam, tol)

    def terms(self, lam):
        return self.value.terms(lam)


# ---------------------------------------------------------------------------
# factors
# ---------------------------------------------------------------------------
def _dop(M: DynamicalMatrix, legs, eps, shift_legs=()) -> DifferenceOperator:
    M = M.with_gamma(eps)
    if shift_legs:
        M = weight_shift_embed(M, [(l, 1) for l in shift_legs])
    return DifferenceOperator.from_function(M)


def structure_factor(chain: ChainSpec, which: str, k: int, u, shift_legs=(), model: ModelSpec = None
                     ) -> DifferenceOperator:
    """M_{0k}(u, u_k; λ + ε Σ h_shift) for M in A, B, C, D."""
    model = model or chain.model
    M = getattr(model, which).on(AUX, k).at(u, chain.uq(k))
    return _dop(M, (AUX, k), chain.eps, shift_legs)


def boundary_T(chain: ChainSpec, u, shift_legs=(), model: ModelSpec = None) -> DifferenceOperator:
    model = model or chain.model
    return _dop(model.T.on(AUX).at(u), (AUX,), chain.eps, shift_legs)


def chi_sc_t(chain: ChainSpec, u, model: ModelSpec = None) -> DifferenceOperator:
    """χ₀^{SC t}(u): column-index shift, then transpose."""
    model = model or chain.model
    K = sc_shift(model.chi.with_gamma(chain.eps).on(AUX).at(u), "SC", 1).map(lambda m: m.T)
    return DifferenceOperator.from_function(K)


def chi_t(chain: ChainSpec, u, model: ModelSpec = None) -> DifferenceOperator:
    model = model or chain.model
    return DifferenceOperator.from_function(model.chi.with_gamma(chain.eps).on(AUX).at(u).map(lambda m: m.T))


def _chain_product(ops: Sequence[DifferenceOperator]) -> DifferenceOperator:
    out = ops[0]
    for o in ops[1:]:
        out = diffop_mul(out, o)
    return out


def _greater(chain: ChainSpec, k: int, parity: Optional[int] = None) -> list:
    return [l for l in chain.legs if l > k and (parity is None or l % 2 == parity)]


def _snp_letters(k: int, start: str = "C"):
    """(left, right) letters on quantum leg k of an SNP chain."""
    even = k % 2 == 0
    if start == "A":
        even = not even
    return ("A", "B") if even else ("C", "D")


def monodromy(chain: ChainSpec, u, shifts: str, model: ModelSpec = None, u_of=None) -> DifferenceOperator:
    """Ordered product left(L)…left(1) T₀ right(1)…right(L) with weight shifts.

    ``shifts``: ``"none"``, ``"all"`` (every leg greater than the factor's)
    or ``"odd"`` (legs of the shifted parity greater than the factor's).
    ``u_of(position)`` may override the auxiliary spectral parameter of single
    factors; positions are ("L", k), ("R", k) and ("T", 0).
    """
    model = model or chain.model
    at = (lambda pos: u) if u_of is None else (lambda pos: u_of(pos, u))
    L = chain.L
    parity = None
    if shifts == "odd":
        parity = 1 if chain.start == "C" else 0

    def sh(k):
        if shifts == "none":
            return ()
        return _greater(chain, k, parity)

    def letters(k):
        if model.boundary == "SP":
            return "A", "B"
        return _snp_letters(k, chain.start if shifts == "odd" else "C")

    left = [structure_factor(chain, letters(k)[0], k, at(("L", k)), sh(k), model) for k in range(L, 0, -1)]
    right = [structure_factor(chain, letters(k)[1], k, at(("R", k)), sh(k), model) for k in range(1, L + 1)]
    T0 = boundary_T(chain, at(("T", 0)), sh(0), model)
    return _chain_product(left + [T0] + right)


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------
def _check_flavor(chain: ChainSpec, flavors, boundary=None):
    m = chain.model
    if m.flavor not in flavors:
        raise ValueError(f"{m.name} is {m.flavor}; this builder needs {flavors}")
    if boundary and m.boundary != boundary:
        raise ValueError(f"this builder needs boundary {boundary}, model has {m.boundary}")


def transfer_nondyn(chain: ChainSpec, u, model: ModelSpec = None, u_of=None) -> TransferMatrix:
    """t(u) = tr₀ χ₀ᵗ(u) [left factors] T₀(u) [right factors]."""
    model = model or chain.model
    M = monodromy(chain, u, "none", model, u_of)
    uc = u if u_of is None else u_of(("chi", 0), u)
    t = diffop_trace(diffop_mul(chi_t(chain, uc, model), M), AUX)
    return TransferMatrix(u, t, chain)


def transfer_nondyn_sp(chain: ChainSpec, u) -> TransferMatrix:
    _check_flavor(chain, ("nondynamical",), "SP")
    return transfer_nondyn(chain, u)


def transfer_nondyn_snp(chain: ChainSpec, u) -> TransferMatrix:
    _check_flavor(chain, ("nondynamical",), "SNP")
    return transfer_nondyn(chain, u)


def transfer_semidyn(chain: ChainSpec, u, model: ModelSpec = None, u_of=None) -> TransferMatrix:
    """t(u) = tr₀ χ₀ᵗ [A, C with h_<^{odd}] T₀(h_<^{odd}) [D, B with h_<^{odd}] e^{ε𝒟₀}."""
    model = model or chain.model
    if model.boundary != "SNP":
        raise ValueError("the semidynamical chain is soliton non-preserving")
    M = monodromy(chain, u, "odd", model, u_of)
    e0 = exp_shift(AUX, 1, chain.n, chain.eps)
    uc = u if u_of is None else u_of(("chi", 0), u)
    t = diffop_trace(_chain_product([chi_t(chain, uc, model), M, e0]), AUX)
    return TransferMatrix(u, t, chain)


def transfer_fulldyn(chain: ChainSpec, u, model: ModelSpec = None, u_of=None) -> TransferMatrix:
    """t(u) = tr₀ e^{−ε𝒟₀} [factors with h_<] e^{ε𝒟₀} χ₀^{SC t}(u).

    Handles SP and SNP, diagonal or non-diagonal χ; with ``chi_mode`` identity
    the χ factor is dropped.
    """
    model = model or chain.model
    n, eps = chain.n, chain.eps
    M = monodromy(chain, u, "all", model, u_of)
    ops = [exp_shift(AUX, -1, n, eps), M, exp_shift(AUX, 1, n, eps)]
    if chain.mode != "identity":
        ops.append(chi_sc_t(chain, u if u_of is None else u_of(("chi", 0), u), model))
    t = diffop_trace(_chain_product(ops), AUX)
    return TransferMatrix(u, t, chain)


def transfer_fulldyn_sp(chain: ChainSpec, u) -> TransferMatrix:
    _check_flavor(chain, ("fully_dynamical",), "SP")
    return transfer_fulldyn(chain, u)


def transfer_fulldyn_snp(chain: ChainSpec, u) -> TransferMatrix:
    _check_flavor(chain, ("fully_dynamical",), "SNP")
    return transfer_fulldyn(chain, u)


def transfer(chain: ChainSpec, u, model: ModelSpec = None, u_of=None) -> TransferMatrix:
    """Dispatch on the model's flavor."""
    flavor = (model or chain.model).flavor
    if flavor == "nondynamical":
        return transfer_nondyn(chain, u, model, u_of)
    if flavor == "semidynamical":
        return transfer_semidyn(chain, u, model, u_of)
    return transfer_fulldyn(chain, u, model, u_of)


# ---------------------------------------------------------------------------
# χ-conjugation
# ---------------------------------------------------------------------------
def _conj_entry(model: ModelSpec, pieces):
    """Two-leg structure matrix  Π left · M · Π right  evaluated entrywise.

    ``pieces`` is (left, M, right): left/right are lists of (leg 1|2, transpose,
    invert, shift-leg or None) describing χ factors.
    """
    n, eps = model.n, model.step
    chi = model.chi.fn
    left, M, right = pieces
    mfn = M.fn

    def factor(spec, u1, u2, lam, weights):
        leg, transpose, invert, shift = spec
        u = u1 if leg == 1 else u2
        l = lam if shift is None else lam + eps * weights[shift]
        m = np.asarray(chi(u, l), dtype=complex)
        if invert:
            m = np.linalg.inv(m)
        if transpose:
            m = m.T
        return m

    def fn(u1, u2, lam):
        lam = np.asarray(lam, dtype=complex)
        # weight-shifted single-leg factors: block-diagonal in the other leg's weight
        def block(spec):
            leg, _, _, shift = spec
            if shift is None:
                m = factor(spec, u1, u2, lam, None)
                return np.kron(m, np.eye(n)) if leg == 1 else np.kron(np.eye(n), m)
            out = np.zeros((n * n, n * n), dtype=complex)
            for i in range(n):
                e = np.zeros(n)
                e[i] = 1
                weights = {1: e, 2: e}
                m = factor(spec, u1, u2, lam, weights)
                p = np.zeros((n, n))
                p[i, i] = 1
                out += np.kron(m, p) if leg == 1 else np.kron(p, m)
            return out

        out = np.eye(n * n, dtype=complex)
        for spec in left:
            out = out @ block(spec)
        out = out @ np.asarray(mfn(u1, u2, lam), dtype=complex)
        for spec in right:
            out = out @ block(spec)
        return out

    if M.lam_independent() and model.chi.lam_independent():
        fn.lam_independent = True
    return DynamicalMatrix(M.legs, n, 2, fn, M.gamma, M.name + "~")


def _chi_is_diagonal(model: ModelSpec, samples: int = 4) -> bool:
    rng = np.random.default_rng(7)
    for _ in range(samples):
        u = complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.1, 0.1))
        lam = rng.uniform(-1, 1, model.n) + 1j * rng.uniform(-0.3, 0.3, model.n)
        m = model.chi.raw(u, lam)
        if np.linalg.norm(m - np.diag(np.diag(m))) > 1e-13 * max(1.0, np.linalg.norm(m)):
            return False
    return True


def chi_conjugate(model: ModelSpec) -> ModelSpec:
    """The χ-conjugated model: tilded structure matrices, T̃, and χ̃ = 1.

    Non-dynamical and semidynamical flavors use transposed χ factors; the
    fully dynamical flavor needs a diagonal χ and uses

        Ã = χ₁χ₂(h₁) A χ₁⁻¹(h₂) χ₂⁻¹,  B̃ = χ₂ B χ₂⁻¹(h₁),
        C̃ = χ₁ C χ₁⁻¹(h₂),  D̃ = D,  T̃ = χ T.
    """
    n = model.n
    if model.flavor == "fully_dynamical":
        if not _chi_is_diagonal(model):
            raise ValueError("fully dynamical χ-conjugation needs a diagonal χ; use the non-diagonal chain")
        A = _conj_entry(model, ([(1, False, False, None), (2, False, False, 1)], model.A,
                                [(1, False, True, 2), (2, False, True, None)]))
        B = _conj_entry(model, ([(2, False, False, None)], model.B, [(2, False, True, 1)]))
        C = _conj_entry(model, ([(1, False, False, None)], model.C, [(1, False, True, 2)]))
        tpose = False
    elif model.flavor == "semidynamical":
        A = _conj_entry(model, ([(1, True, False, None), (2, True, False, None)], model.A,
                                [(1, True, True, None), (2, True, True, None)]))
        B = _conj_entry(model, ([(2, True, False, None)], model.B, [(2, True, True, 1)]))
        C = _conj_entry(model, ([(1, True, False, None)], model.C, [(1, True, True, 2)]))
        tpose = True
    else:
        A = _conj_entry(model, ([(1, True, False, None), (2, True, False, None)], model.A,
                                [(1, True, True, None), (2, True, True, None)]))
        B = _conj_entry(model, ([(2, True, False, None)], model.B, [(2, True, True, None)]))
        C = _conj_entry(model, ([(1, True, False, None)], model.C, [(1, True, True, None)]))
        tpose = True

    chi_fn, T_fn = model.chi.fn, model.T.fn

    def T_new(u, lam):
        c = np.asarray(chi_fn(u, lam), dtype=complex)
        return (c.T if tpose else c) @ np.asarray(T_fn(u, lam), dtype=complex)

    if model.chi.lam_independent() and model.T.lam_independent():
        T_new.lam_independent = True
    T = DynamicalMatrix(model.T.legs, n, 1, T_new, model.T.gamma, "T~")
    one = constant_matrix(np.eye(n), model.chi.legs, n, arity=1, gamma=model.chi.gamma, name="chi~")
    return model.replace(A=A, B=B, C=C, T=T, chi=one, chi_mode="identity", chi_diagonal=True,
                         conjugated=True, dual=None)


def conjugation_operator(chain: ChainSpec, model: ModelSpec = None, inverse: bool = False) -> DifferenceOperator:
    """Ξ with t̃ = Ξ t Ξ⁻¹ (pure function of λ).

    SP: product over all legs; SNP: even legs only.  Dynamical flavors shift
    χ_k by the legs greater than k (odd ones for the semidynamical chain).
    """
    model = model or chain.model
    eps, n = chain.eps, chain.n
    legs = chain.legs if model.boundary == "SP" else [k for k in chain.legs if k % 2 == 0]
    ops = []
    for k in legs:
        K = model.chi.with_gamma(eps).on(k).at(chain.uq(k))
        if model.flavor != "fully_dynamical":
            K = K.map(lambda m: m.T)
        if inverse:
            K = K.map(np.linalg.inv)
        if model.flavor == "fully_dynamical":
            sh = _greater(chain, k)
        elif model.flavor == "semidynamical":
            sh = _greater(chain, k, 1 if chain.start == "C" else 0)
        else:
            sh = []
        ops.append(_dop(K, (k,), eps, sh))
    out = _chain_product(ops)
    return out.embed(chain.legs)


def covariance_residual(chain: ChainSpec, u, lam_samples) -> float:
    """‖t̃(u) − Ξ t(u) Ξ⁻¹‖ with t̃ built from the χ-conjugated model."""
    model = chain.model
    conj = chi_conjugate(model)
    c2 = ChainSpec(conj, chain.N, "identity", chain.u_quantum, chain.start)
    t = transfer(chain, u).value
    tt = transfer(c2, u).value
    Xi = conjugation_operator(chain)
    Xi_inv = conjugation_operator(chain, inverse=True)
    return diffop_residual(tt, _chain_product([Xi, t, Xi_inv]), lam_samples)


# ---------------------------------------------------------------------------
# commutativity
# ---------------------------------------------------------------------------
@dataclass
class CommutationReport:
    model: str
    flavor: str
    boundary: str
    N: int
    max_residual: float
    grid: list
    skipped: list
    tolerance: float
    passed: bool
    restricted_max: float = 0.0

    def to_dict(self) -> dict:
        return {
            "model": self.model, "flavor": self.flavor, "boundary": self.boundary, "N": self.N,
            "max_residual": float(self.max_residual), "restricted_max": float(self.restricted_max),
            "tolerance": self.tolerance, "passed": self.passed, "grid": self.grid, "skipped": self.skipped,
        }


def _c(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def commutation_scan(chain: ChainSpec, u_samples, v_samples, lam_samples, tol: float = 1e-8
                     ) -> CommutationReport:
    """max ‖[t(u), t(v)]‖ over the grid, compared shift vector by shift vector.

    ``restricted_max`` is the same commutator restricted to λ-constant
    functions (Σ_s over coefficients), reported alongside.
    """
    worst, worst_r, grid, skipped = 0.0, 0.0, [], []
    for u in u_samples:
        tu = transfer(chain, u).value
        for v in v_samples:
            tv = transfer(chain, v).value
            uv, vu = diffop_mul(tu, tv), diffop_mul(tv, tu)
            for lam in lam_samples:
                try:
                    with np.errstate(all="raise"):
                        r = diffop_residual(uv, vu, [lam])
                        rr = (uv.restricted_to_constants(lam) - vu.restricted_to_constants(lam)).norm()
                except (SingularMatrixError, FloatingPointError, np.linalg.LinAlgError):
                    skipped.append({"u": _c(u), "v": _c(v), "lambda": [_c(x) for x in lam]})
                    continue
                worst, worst_r = max(worst, r), max(worst_r, rr)
                grid.append({"u": _c(u), "v": _c(v), "lambda": [_c(x) for x in lam], "residual": r})
    m = chain.model
    return CommutationReport(m.name, m.flavor, m.boundary, chain.N, worst, grid, skipped, tol,
                             worst < tol and not skipped, worst_r)


def sample_grid(chain: ChainSpec, seed: int = 0, k: int = 3, margin: float = 0.25):
    """Seeded (u, v, λ) grid of size k each, away from the model's spectral poles."""
    from .sampling import Sampler

    s = Sampler(seed, chain.n)
    avoid = tuple(chain.model.u_poles)
    us = [s.u(avoid=avoid, margin=margin) for _ in range(k)]
    vs = [s.u(avoid=avoid, margin=margin) for _ in range(k)]
    return us, vs, s.lams(k, chain.model.guard)


# ---------------------------------------------------------------------------
# t(0) closed forms and boundary rewritings
# ---------------------------------------------------------------------------
def _perm(a, b, eps) -> DifferenceOperator:
    from .tensor_core import permutation

    return DifferenceOperator.constant(permutation(a, b, (a, b), 2), eps)


def _zero_factor(chain: ChainSpec, which: str, a: int, b: int, shift_legs=()) -> DifferenceOperator:
    M = getattr(chain.model, which).on(a, b).at(0.0, 0.0)
    return _dop(M, (a, b), chain.eps, shift_legs)


def _T_at_zero(chain: ChainSpec, leg: int, shift_legs=()) -> DifferenceOperator:
    return _dop(chain.model.T.on(leg).at(0.0), (leg,), chain.eps, shift_legs)


def tr_chi_sc(chain: ChainSpec, u=0.0) -> DifferenceOperator:
    """tr χ^{SC}(u) as a scalar function of λ (on no legs)."""
    return diffop_trace(chi_sc_t(chain, u), AUX)


def boundary_X(chain: ChainSpec, k: int, row_shift: bool = False, u=0.0) -> DifferenceOperator:
    """X_k = tr₀ P₀ₖ B₀ₖ(u, 0).

    ``row_shift=True`` reads B at λ − ε(e_{row₀} + e_{rowₖ}), the form produced
    by moving e^{−ε𝒟ₖ} … e^{ε𝒟₀} through B.
    """
    M = chain.model.B.with_gamma(chain.eps).on(AUX, k).at(u, 0.0)
    if row_shift:
        M = sc_shift(M, "SL", 1)
    return diffop_trace(diffop_mul(_perm(AUX, k, chain.eps), DifferenceOperator.from_function(M)), AUX)


def conjugate_by_shift(X: DifferenceOperator, legs, sign: int = 1) -> DifferenceOperator:
    """e^{sε𝒟_legs} X e^{−sε𝒟_legs}."""
    left = [exp_shift(l, sign, X.n, X.gamma) for l in legs]
    right = [exp_shift(l, -sign, X.n, X.gamma) for l in legs]
    return _chain_product(left + [X] + right)


def t0_closed_sp(chain: ChainSpec) -> DifferenceOperator:
    """Fully dynamical SP: t(0) = T₁(0; h_<)·tr χ^{SC} (= n·T₁(h_<) when χ = 1)."""
    legs = chain.legs
    T1 = _T_at_zero(chain, 1, legs[1:])
    if chain.mode == "identity":
        return T1.scale(chain.n).embed(legs)
    return diffop_mul(T1, tr_chi_sc(chain)).embed(legs)


def t0_display_snp(chain: ChainSpec) -> DifferenceOperator:
    """Closed SNP product at u = u_i = 0 (A = D = P there).

    C_{2N,2N−1} … C_{21} · P_{24}…P_{2N−2,2N} · P_{2N−1,2N−3}…P_{31} · B_{32} … B_{2N−1,2N−2} · [tail]

    Non-dynamical tail: T_{2N} P_{1,2N} X_{2N}.  Dynamical flavors shift every
    factor by the (odd, for semidynamical) legs greater than its own and use
    the tail P_{1,2N} T₁(h_<) Y_{2N}, with Y = e^{ε𝒟_{2N}} X^{SL} e^{−ε𝒟_{2N}}
    (fully dynamical, χ = 1), T-independent χ factor
    tr₀(P₀,₂ₙ e^{−ε𝒟₂ₙ} B₀,₂ₙ e^{ε𝒟₀} χ₀^{SC t}) (non-diagonal χ), or
    tr₀(P₀,₂ₙ B₀,₂ₙ e^{ε𝒟₀}) (semidynamical).
    """
    m, N, eps, n = chain.model, chain.N, chain.eps, chain.n
    if m.boundary != "SNP":
        raise ValueError("the SNP product needs an SNP model")
    L = 2 * N
    legs = chain.legs
    flavor = m.flavor
    parity = None
    if flavor == "semidynamical":
        parity = 1 if chain.start == "C" else 0

    def sh(*own):
        if flavor == "nondynamical":
            return []
        return [l for l in legs if l > max(own) and (parity is None or l % 2 == parity)]

    ops = [_zero_factor(chain, "C", 2 * j, 2 * j - 1, sh(2 * j, 2 * j - 1)) for j in range(N, 0, -1)]
    ops += [_perm(2 * j, 2 * j + 2, eps) for j in range(1, N)]
    ops += [_perm(2 * j + 1, 2 * j - 1, eps) for j in range(N - 1, 0, -1)]
    if flavor == "nondynamical":
        ops += [_zero_factor(chain, "B", 2 * j + 1, 2 * j) for j in range(1, N)]
        ops.append(_T_at_zero(chain, L))
        if L > 1:
            ops.append(_perm(1, L, eps))
        tail = diffop_trace(_chain_product([chi_t(chain, 0.0), _perm(AUX, L, eps), _zero_factor(chain, "B", AUX, L)]), AUX)
        ops.append(tail)
    else:
        ops.append(_perm(1, L, eps))
        ops += [_zero_factor(chain, "B", 2 * j + 1, 2 * j, sh(2 * j + 1, 2 * j)) for j in range(1, N)]
        ops.append(_T_at_zero(chain, 1, sh(1)))
        if flavor == "semidynamical":
            ops.append(diffop_trace(_chain_product([chi_t(chain, 0.0), _perm(AUX, L, eps),
                                                    _zero_factor(chain, "B", AUX, L),
                                                    exp_shift(AUX, 1, n, eps)]), AUX))
        elif chain.mode == "identity":
            ops.append(conjugate_by_shift(boundary_X(chain, L, row_shift=True), [L]))
        else:
            ops.append(diffop_trace(_chain_product([_perm(AUX, L, eps), exp_shift(L, -1, n, eps),
                                                    _zero_factor(chain, "B", AUX, L), exp_shift(AUX, 1, n, eps),
                                                    chi_sc_t(chain, 0.0)]), AUX))
    return _chain_product(ops).embed(legs)


def semidyn_trace_rewrite(chain: ChainSpec, k: int = 1, B: Optional[DynamicalMatrix] = None):
    """Both sides of tr₀(P₀ₖ B₀ₖ e^{ε𝒟₀}) = e^{ε𝒟ₖ} X_k^{SC₀}.

    X^{SC₀}_{ij} reads B_{iiij} at λ − ε e_{col₀}.  The identity needs B to
    commute with h on its first leg (partial zero weight).
    """
    eps, n = chain.eps, chain.n
    Bm = (chain.model.B if B is None else B).with_gamma(eps).on(AUX, k).at(0.0, 0.0)
    lhs = diffop_trace(_chain_product([_perm(AUX, k, eps), DifferenceOperator.from_function(Bm),
                                       exp_shift(AUX, 1, n, eps)]), AUX)
    Bsc = DifferenceOperator.from_function(sc_shift(Bm, "SC", 1, legs=[AUX]))
    X = diffop_trace(diffop_mul(_perm(AUX, k, eps), Bsc), AUX)
    rhs = diffop_mul(exp_shift(k, 1, n, eps), X)
    return lhs, rhs


def fulldyn_trace_rewrite(chain: ChainSpec, k: int = 1):
    """Both sides of tr₀(P₀ₖ e^{−ε𝒟ₖ} B₀ₖ e^{ε𝒟₀}) = e^{ε𝒟ₖ} X_k^{SL} e^{−ε𝒟ₖ}."""
    eps, n = chain.eps, chain.n
    lhs = diffop_trace(_chain_product([_perm(AUX, k, eps), exp_shift(k, -1, n, eps),
                                       _zero_factor(chain, "B", AUX, k), exp_shift(AUX, 1, n, eps)]), AUX)
    rhs = conjugate_by_shift(boundary_X(chain, k, row_shift=True), [k])
    return lhs, rhs
