"""Sampled residual checks for the exchange-algebra identities.

Every check draws seeded (u, λ) samples, evaluates both sides of an identity
and reports the worst Frobenius residual.  Points near poles are resampled a
bounded number of times.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .models import ModelSpec
from .sampling import Sampler
from .shift_calculus import (
    DifferenceOperator,
    DynamicalMatrix,
    diffop_mul,
    diffop_trace,
    exp_shift,
    sc_shift,
    weight_shift_embed,
)
from .tensor_core import DenseOperator, SingularMatrixError

DEFAULT_TOL = 1e-9
DEFAULT_SAMPLES = 20
MAX_RETRIES = 5


@dataclass
class VerificationReport:
    name: str
    flavor: str
    samples: int
    max_residual: float
    tolerance: float
    passed: bool
    worst_point: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["max_residual"] = float(self.max_residual)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _cplx(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _point(us, lam) -> dict:
    return {"u": [_cplx(u) for u in us], "lambda": [_cplx(x) for x in np.atleast_1d(lam)]}


def _spectral(sampler: Sampler, model: ModelSpec, k: int) -> list[complex]:
    """k spectral parameters with all pairwise sums/differences away from γ."""
    g = model.gamma
    for _ in range(1000):
        us = [sampler.u() for _ in range(k)]
        combos = [a + s * b for a, b in itertools.combinations(us, 2) for s in (1, -1)] + us
        if all(abs(np.sinh(c - g)) > 0.1 and abs(np.sinh(c + g)) > 0.1 and abs(np.sinh(c)) > 0.05
               and abs(np.sinh(c - 2 * g)) > 0.1 for c in combos):
            return us
    raise RuntimeError("no admissible spectral sample")


def run_check(name: str, model: ModelSpec, residual: Callable, n_u: int, samples: int = DEFAULT_SAMPLES,
              tol: float = DEFAULT_TOL, seed: int = 0, note: str = "") -> VerificationReport:
    """Evaluate ``residual(us, lam)`` on seeded samples (bounded resampling near poles)."""
    sampler = Sampler(seed, model.n)
    worst, worst_pt, used = 0.0, {}, 0
    for _ in range(samples):
        for attempt in range(MAX_RETRIES + 1):
            us = _spectral(sampler, model, n_u) if n_u else []
            lam = sampler.lam(model.guard)
            try:
                with np.errstate(all="raise"):
                    r = float(residual(us, lam))
                if not np.isfinite(r):
                    raise FloatingPointError
            except (SingularMatrixError, FloatingPointError, ZeroDivisionError, np.linalg.LinAlgError):
                if attempt == MAX_RETRIES:
                    raise
                continue
            break
        used += 1
        if r >= worst:
            worst, worst_pt = r, _point(us, lam)
    return VerificationReport(name, model.flavor, used, worst, tol, worst < tol, worst_pt, note)


# ---------------------------------------------------------------------------
# small helpers on three-leg products
# ---------------------------------------------------------------------------
def _ev(M: DynamicalMatrix, legs, us, lam, shift_legs=()) -> DenseOperator:
    X = M.on(*legs)
    if shift_legs:
        X = weight_shift_embed(X, [(l, 1) for l in shift_legs])
    return X(*us, lam)


def _prod(*ops: DenseOperator) -> DenseOperator:
    out = ops[0]
    for o in ops[1:]:
        out = out @ o
    return out


def _diff(a: DenseOperator, b: DenseOperator) -> float:
    return (a - b).norm()


def _swap21(M: DynamicalMatrix, u1, u2, lam) -> DenseOperator:
    """M_{21}(u1,u2) := P M_{12}(u2,u1) P."""
    return M(u2, u1, lam).leg_swap(1, 2)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------
def check_unitarity(model: ModelSpec, samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL, seed=0) -> VerificationReport:
    """A₁₂ = A₂₁⁻¹, B₁₂ = C₂₁, D₁₂ = D₂₁⁻¹."""
    I = DenseOperator.identity((1, 2), model.n)

    def res(us, lam):
        u1, u2 = us
        ra = _diff(model.A(u1, u2, lam) @ _swap21(model.A, u1, u2, lam), I)
        rb = _diff(model.B(u1, u2, lam), _swap21(model.C, u1, u2, lam))
        rd = _diff(model.D(u1, u2, lam) @ _swap21(model.D, u1, u2, lam), I)
        return max(ra, rb, rd)

    return run_check("unitarity", model, res, 2, samples, tol, seed)


def check_pure_ybe(model: ModelSpec, M: Optional[DynamicalMatrix] = None, samples=DEFAULT_SAMPLES,
                   tol=DEFAULT_TOL, seed=0, name="pure_ybe") -> VerificationReport:
    """M₁₂ M₁₃ M₂₃ = M₂₃ M₁₃ M₁₂ (no shifts)."""
    M = model.A if M is None else M

    def res(us, lam):
        u1, u2, u3 = us
        lhs = _prod(_ev(M, (1, 2), (u1, u2), lam), _ev(M, (1, 3), (u1, u3), lam), _ev(M, (2, 3), (u2, u3), lam))
        rhs = _prod(_ev(M, (2, 3), (u2, u3), lam), _ev(M, (1, 3), (u1, u3), lam), _ev(M, (1, 2), (u1, u2), lam))
        return _diff(lhs, rhs)

    return run_check(name, model, res, 3, samples, tol, seed)


def check_gnf(model: ModelSpec, M: Optional[DynamicalMatrix] = None, step=None, samples=DEFAULT_SAMPLES,
              tol=DEFAULT_TOL, seed=0, name="gnf", mirror=False) -> VerificationReport:
    """M₁₂(λ+s h₃) M₁₃ M₂₃(λ+s h₁) = M₂₃ M₁₃(λ+s h₂) M₁₂.

    ``step`` defaults to the model's signed step.  ``mirror=True`` moves every
    shift to the factor in the mirrored position (M₁₃(λ+s h₂) on the left,
    M₂₃(λ+s h₁) and M₁₂(λ+s h₃) on the right): a wrong-convention control.
    """
    M = model.D if M is None else M
    M = M.with_gamma(model.step if step is None else step)

    def res(us, lam):
        u1, u2, u3 = us
        if not mirror:
            lhs = _prod(_ev(M, (1, 2), (u1, u2), lam, (3,)), _ev(M, (1, 3), (u1, u3), lam),
                        _ev(M, (2, 3), (u2, u3), lam, (1,)))
            rhs = _prod(_ev(M, (2, 3), (u2, u3), lam), _ev(M, (1, 3), (u1, u3), lam, (2,)),
                        _ev(M, (1, 2), (u1, u2), lam))
        else:
            lhs = _prod(_ev(M, (1, 2), (u1, u2), lam), _ev(M, (1, 3), (u1, u3), lam, (2,)),
                        _ev(M, (2, 3), (u2, u3), lam))
            rhs = _prod(_ev(M, (2, 3), (u2, u3), lam, (1,)), _ev(M, (1, 3), (u1, u3), lam),
                        _ev(M, (1, 2), (u1, u2), lam, (3,)))
        return _diff(lhs, rhs)

    return run_check(name, model, res, 3, samples, tol, seed)


def _T_on(T: DynamicalMatrix, aux):
    """T with its first (auxiliary) leg placed on ``aux``; quantum legs kept."""
    return T.on(aux, *T.legs[1:])


def exchange_sides(model: ModelSpec, T: DynamicalMatrix, u1, u2, lam, structure=None):
    """Both sides of the flavor's exchange relation at one point."""
    A, B, C, D = structure or model.structure()
    T = T.with_gamma(model.step)
    T1, T2 = _T_on(T, 1), _T_on(T, 2)
    ev = lambda M, sh=(): (weight_shift_embed(M, [(l, 1) for l in sh]) if sh else M)
    if model.flavor == "nondynamical":
        sh1, sh2, shl1, shl2 = (), (), (), ()
    elif model.flavor == "semidynamical":
        # A T1 B T2(λ+εh1) = T2 C T1(λ+εh2) D
        sh1, sh2, shl1, shl2 = (), (1,), (), (2,)
    else:
        # A T1(λ+εh2) B T2(λ+εh1) = T2(λ+εh1) C T1(λ+εh2) D
        sh1, sh2, shl1, shl2 = (2,), (1,), (1,), (2,)
    lhs = _prod(A(u1, u2, lam), ev(T1, sh1)(u1, lam), B(u1, u2, lam), ev(T2, sh2)(u2, lam))
    rhs = _prod(ev(T2, shl1)(u2, lam), C(u1, u2, lam), ev(T1, shl2)(u1, lam), D(u1, u2, lam))
    return lhs, rhs


def check_exchange(model: ModelSpec, T: Optional[DynamicalMatrix] = None, samples=DEFAULT_SAMPLES,
                   tol=DEFAULT_TOL, seed=0, name="exchange", structure=None) -> VerificationReport:
    """The flavor's two-sided exchange relation for a representation T.

    T's first leg is auxiliary; any further legs are quantum and ride along.
    """
    T = model.T if T is None else T

    def res(us, lam):
        lhs, rhs = exchange_sides(model, T, us[0], us[1], lam, structure)
        return _diff(lhs, rhs)

    return run_check(name, model, res, 2, samples, tol, seed)


# ---------------------------------------------------------------------------
# dual relation
# ---------------------------------------------------------------------------
def _pt(m: np.ndarray, n: int, leg: int) -> np.ndarray:
    """Partial transpose of a two-leg matrix on leg 0 or 1."""
    t = m.reshape(n, n, n, n)
    t = t.transpose(2, 1, 0, 3) if leg == 0 else t.transpose(0, 3, 2, 1)
    return t.reshape(n * n, n * n)


def _entry_shift(f: Callable[[np.ndarray], np.ndarray], lam, eps, n, rows=(), cols=()) -> np.ndarray:
    """Entry (r, c) of f at λ − ε(Σ_{rows} e_{r_k} + Σ_{cols} e_{c_k}) for a two-leg f."""
    cache: dict = {}
    out = np.zeros((n * n, n * n), dtype=complex)
    for r in range(n * n):
        ri = divmod(r, n)
        for c in range(n * n):
            ci = divmod(c, n)
            vec = np.zeros(n, dtype=int)
            for k in rows:
                vec[ri[k]] += 1
            for k in cols:
                vec[ci[k]] += 1
            key = tuple(vec)
            if key not in cache:
                cache[key] = f(lam - eps * vec)
            out[r, c] = cache[key][r, c]
    return out


def _inv(m: np.ndarray, cond_max=1e12) -> np.ndarray:
    c = np.linalg.cond(m)
    if not np.isfinite(c) or c > cond_max:
        raise SingularMatrixError(f"condition number {c:.3g}")
    return np.linalg.inv(m)


def dual_intertwiners(model: ModelSpec, K: DynamicalMatrix, u1, u2, lam, structure=None):
    """(Q_L, Q_R) whose equality is the dual exchange relation for diagonal K.

    Q_L solves the (A,B) half and Q_R the (C,D) half of the condition that
    t(u)t(v) can be exchanged into t(v)t(u); both use K^{SC}.  With ε = 0 they
    reduce to the two sides of (A⁻¹)^{t₁₂}K₁((B^{t₁})⁻¹)^{t₂}K₂ = K₂((C^{t₂})⁻¹)^{t₁}K₁(D^{t₁₂})⁻¹.
    """
    n, eps = model.n, model.step
    A, B, C, D = structure or model.structure()
    lam = np.asarray(lam, dtype=complex)
    Ksc1 = sc_shift(K.with_gamma(eps).at(u1), "SC", 1)
    Ksc2 = sc_shift(K.with_gamma(eps).at(u2), "SC", 1)
    k1 = np.diag(Ksc1.raw(lam))
    k2 = np.diag(Ksc2.raw(lam))
    KK = np.diag(np.kron(k1, k2))

    a = lambda l: A.raw(u1, u2, l)
    b = lambda l: B.raw(u1, u2, l)
    c = lambda l: C.raw(u1, u2, l)
    d = lambda l: D.raw(u1, u2, l)

    # (A,B) half
    Ahat = _entry_shift(a, lam, eps, n, cols=(0, 1))
    bflat = lambda l: _entry_shift(lambda x: _pt(b(x), n, 0), l, eps, n, rows=(1,))
    Y = _entry_shift(lambda l: _inv(bflat(l)), lam, eps, n, rows=(0,))
    W = _pt(KK @ Y, n, 0)
    QL = (W @ _inv(Ahat)).T

    # (C,D) half
    cflat = lambda l: _entry_shift(lambda x: _pt(c(x), n, 1), l, eps, n, rows=(0,))
    Z = _entry_shift(lambda l: _inv(cflat(l)), lam, eps, n, rows=(1,))
    V = _pt(KK @ Z, n, 0)
    QR = np.zeros_like(V)
    for r in range(n * n):
        i, j = divmod(r, n)
        vec = np.zeros(n)
        vec[i] += 1
        vec[j] += 1
        QR[r] = V[r] @ _inv(d(lam - eps * vec).T)
    return QL, QR


def classic_dual_sides(model: ModelSpec, K: DynamicalMatrix, u1, u2, lam, structure=None):
    """(A⁻¹)^{t₁₂} K₁ ((B^{t₁})⁻¹)^{t₂} K₂  and  K₂ ((C^{t₂})⁻¹)^{t₁} K₁ (D^{t₁₂})⁻¹."""
    n = model.n
    A, B, C, D = structure or model.structure()
    K1 = np.kron(K.raw(u1, lam), np.eye(n))
    K2 = np.kron(np.eye(n), K.raw(u2, lam))
    a, b, c, d = (M.raw(u1, u2, lam) for M in (A, B, C, D))
    lhs = _inv(a).T @ K1 @ _pt(_inv(_pt(b, n, 0)), n, 1) @ K2
    rhs = K2 @ _pt(_inv(_pt(c, n, 1)), n, 0) @ K1 @ _inv(d.T)
    return lhs, rhs


def _is_diagonal(K: DynamicalMatrix, us, lam) -> bool:
    m = K.raw(us[0], lam)
    return np.linalg.norm(m - np.diag(np.diag(m))) <= 1e-14 * max(1.0, np.linalg.norm(m))


def _lam_dependent(model: ModelSpec, K: DynamicalMatrix, seed=0) -> bool:
    s = Sampler(seed + 101, model.n)
    u1, u2 = 0.21 + 0.05j, -0.13 + 0.02j
    l1, l2 = s.lam(model.guard), s.lam(model.guard)
    mats = list(model.structure())
    diffs = [np.linalg.norm(M.raw(u1, u2, l1) - M.raw(u1, u2, l2)) for M in mats]
    diffs.append(np.linalg.norm(K.raw(u1, l1) - K.raw(u1, l2)))
    return max(diffs) > 1e-13


def check_dual_exchange(model: ModelSpec, K: Optional[DynamicalMatrix] = None, samples=DEFAULT_SAMPLES,
                        tol=DEFAULT_TOL, seed=0, name="dual_exchange", structure=None) -> VerificationReport:
    """Dual exchange relation for a scalar K.

    Non-dynamical flavor: the two-sided relation with partial transposes, any K.
    Fully dynamical flavor: equality of the two c-number intertwiners from
    ``dual_intertwiners``; K must be diagonal.  The semidynamical flavor is only
    supported on λ-independent data, where it coincides with the first case.
    """
    K = model.chi if K is None else K
    flavor = model.flavor
    if flavor == "semidynamical":
        if _lam_dependent(model, K, seed):
            raise NotImplementedError("semidynamical dual relation is only checked on λ-independent data")
        flavor = "nondynamical"

    if flavor == "nondynamical":
        def res(us, lam):
            lhs, rhs = classic_dual_sides(model, K, us[0], us[1], lam, structure)
            return np.linalg.norm(lhs - rhs)
    else:
        def res(us, lam):
            if not _is_diagonal(K, us, lam):
                raise ValueError("the dynamical dual check needs a diagonal (zero-weight) K")
            QL, QR = dual_intertwiners(model, K, us[0], us[1], lam, structure)
            return np.linalg.norm(QL - QR)

    return run_check(name, model, res, 2, samples, tol, seed)


def check_literal_dual(model: ModelSpec, K: Optional[DynamicalMatrix] = None, samples=DEFAULT_SAMPLES,
                       tol=DEFAULT_TOL, seed=0) -> VerificationReport:
    """Literal reading of the explicit dual relation A K₁(λ+εh₂) B̃ K₂(λ+εh₁) = K₂(λ+εh₁) C̃ K₁(λ+εh₂) D.

    Recorded, not asserted: with the literal dual entries this relation does not
    hold for the catalogued χ (see README).
    """
    if not model.dual:
        raise ValueError(f"model {model.name} has no explicit dual structure matrices")
    K = model.chi if K is None else K
    s = model.dual
    rep = check_exchange(model, K, samples, tol, seed, name="literal_dual",
                         structure=(s["A"], s["B"], s["C"], s["D"]))
    rep.note = "literal evaluation of the explicit dual structure matrices; expected to fail"
    return rep


# ---------------------------------------------------------------------------
# comodule
# ---------------------------------------------------------------------------
def comodule_residuals(model: ModelSpec, L: DynamicalMatrix, R: DynamicalMatrix, u1, u2, alpha, lam):
    """Residuals of the four comodule relations on legs (1, 2, q=3)."""
    eps = model.step
    A, B, C, D = (M.with_gamma(eps) for M in model.structure())
    L, R = L.with_gamma(eps), R.with_gamma(eps)

    def ev(M, legs, us, sh=()):
        return _ev(M, legs, us, lam, sh)

    L1 = lambda sh=(): ev(L, (1, 3), (u1, alpha), sh)
    L2 = lambda sh=(): ev(L, (2, 3), (u2, alpha), sh)
    R1 = lambda sh=(): ev(R, (1, 3), (u1, alpha), sh)
    R2 = lambda sh=(): ev(R, (2, 3), (u2, alpha), sh)
    X = lambda M, sh=(): ev(M, (1, 2), (u1, u2), sh)
    r1 = _diff(_prod(X(A), L1((2,)), L2()), _prod(L2((1,)), L1(), X(A, (3,))))
    r2 = _diff(_prod(R1((2,)), X(B), L2((1,))), _prod(L2(), X(B, (3,)), R1()))
    r3 = _diff(_prod(L1(), X(C, (3,)), R2()), _prod(R2((1,)), X(C), L1((2,))))
    r4 = _diff(_prod(X(D, (3,)), R1(), R2((1,))), _prod(R2(), R1((2,)), X(D)))
    return r1, r2, r3, r4


def comodule_T(model: ModelSpec, L: DynamicalMatrix, R: DynamicalMatrix, alpha, T=None) -> DynamicalMatrix:
    """T'_{1q}(u;λ) = L_{1q}(u,α;λ) T₁(u;λ+εh_q) R_{1q}(u,α;λ) on legs (1, 3)."""
    eps = model.step
    T = (model.T if T is None else T).with_gamma(eps)
    Lq = L.with_gamma(eps).on(1, 3)
    Rq = R.with_gamma(eps).on(1, 3)
    Tq = weight_shift_embed(T.on(1), [(3, 1)])
    n = model.n

    def fn(u, lam):
        m = Lq(u, alpha, lam) @ Tq(u, lam) @ Rq(u, alpha, lam)
        return m.matrix_in((1, 3))

    return DynamicalMatrix((1, 3), n, 1, fn, eps, "T'")


def check_comodule(model: ModelSpec, L: DynamicalMatrix, R: DynamicalMatrix, samples=DEFAULT_SAMPLES,
                   tol=DEFAULT_TOL, seed=0, name="comodule", alpha=0.17 + 0.05j) -> VerificationReport:
    """Four comodule relations for (L, R), then the exchange relation for L·T·R."""
    def res(us, lam):
        return max(comodule_residuals(model, L, R, us[0], us[1], alpha, lam))

    rep = run_check(name, model, res, 2, samples, tol, seed)
    ex = check_exchange(model, comodule_T(model, L, R, alpha), samples, tol, seed + 1, name=name + "_exchange")
    worst = max(rep.max_residual, ex.max_residual)
    note = f"relations {rep.max_residual:.2e}; composite T exchange {ex.max_residual:.2e}"
    return VerificationReport(name, model.flavor, rep.samples + ex.samples, worst, tol, worst < tol,
                              rep.worst_point if rep.max_residual >= ex.max_residual else ex.worst_point, note)


# ---------------------------------------------------------------------------
# weights and λ-independence
# ---------------------------------------------------------------------------
def zero_weight_defect(m: DenseOperator, mode: str = "total", leg=None) -> float:
    n = m.n
    worst = 0.0
    for i in range(n):
        h = np.zeros((n, n), dtype=complex)
        h[i, i] = 1
        if mode == "total":
            H = None
            for l in m.legs:
                term = DenseOperator.single(h, l, n).embed(m.legs)
                H = term if H is None else H + term
        elif mode == "partial":
            if leg is None or leg not in m.legs:
                raise ValueError("partial zero weight needs one of the operator's legs")
            H = DenseOperator.single(h, leg, n).embed(m.legs)
        else:
            raise ValueError("mode must be 'total' or 'partial'")
        worst = max(worst, (m @ H - H @ m).norm())
    return worst


def check_zero_weight(model: ModelSpec, mats, mode="total", leg=None, samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL,
                      seed=0, name="zero_weight") -> VerificationReport:
    mats = mats if isinstance(mats, (list, tuple)) else [mats]

    def res(us, lam):
        worst = 0.0
        for M in mats:
            if isinstance(M, DenseOperator):
                op = M
            else:
                op = M(*us[:M.arity], lam)
            worst = max(worst, zero_weight_defect(op, mode, leg))
        return worst

    return run_check(name, model, res, 2, samples, tol, seed)


def restricted_trace(model: ModelSpec, T: DynamicalMatrix, K: DynamicalMatrix, u) -> DifferenceOperator:
    """tr e^{−ε𝒟} T e^{ε𝒟} (K^{SC})ᵗ for scalar T, K on a single leg."""
    eps, n = model.step, model.n
    Tu = DifferenceOperator.from_function(T.with_gamma(eps).on(0).at(u))
    Ksc = sc_shift(K.with_gamma(eps).on(0).at(u), "SC", 1).map(lambda m: m.T)
    H = diffop_mul(diffop_mul(diffop_mul(exp_shift(0, -1, n, eps), Tu), exp_shift(0, 1, n, eps)),
                   DifferenceOperator.from_function(Ksc))
    return diffop_trace(H, 0)


def check_lambda_independence(model: ModelSpec, T: Optional[DynamicalMatrix] = None,
                              K: Optional[DynamicalMatrix] = None, samples=5, tol=DEFAULT_TOL, seed=0,
                              name="lambda_independence") -> VerificationReport:
    """Is the action of tr e^{−ε𝒟}Te^{ε𝒟}(K^{SC})ᵗ on λ-constant functions λ-independent?"""
    T = model.T if T is None else T
    K = model.chi if K is None else K
    sampler = Sampler(seed, model.n)
    u = 0.23 + 0.07j
    vals = []
    lams = sampler.lams(max(samples, 2), model.guard)
    H = restricted_trace(model, T, K, u)
    for lam in lams:
        vals.append(H.restricted_to_constants(lam).mat)
    worst = max(float(np.linalg.norm(v - vals[0])) for v in vals)
    return VerificationReport(name, model.flavor, len(lams), worst, tol, worst < tol,
                              _point([u], lams[int(np.argmax([np.linalg.norm(v - vals[0]) for v in vals]))]))


# ---------------------------------------------------------------------------
# suite
# ---------------------------------------------------------------------------
def identity_suite(model: ModelSpec, samples=DEFAULT_SAMPLES, tol=DEFAULT_TOL, seed=0) -> list[VerificationReport]:
    """The eight identities applicable to a catalog model."""
    kw = dict(samples=samples, tol=tol, seed=seed)
    out = [check_unitarity(model, **kw)]
    if model.flavor == "fully_dynamical":
        # A = R₁₂ obeys the dynamical YBE with the opposite step to the chain's
        out.append(check_gnf(model, model.A, step=-model.step, name="gnf_R", **kw))
    else:
        out.append(check_pure_ybe(model, model.A, name="pure_ybe_A", **kw))
    out.append(check_gnf(model, model.D, name="gnf_D", **kw))
    out.append(check_exchange(model, **kw))
    out.append(check_dual_exchange(model, **kw))
    out.append(check_zero_weight(model, [model.B, model.C], "total", name="zero_weight_BC", **kw))
    out.append(check_comodule(model, model.A, model.B, name="comodule_AB", **kw))
    out.append(check_comodule(model, model.C, model.D, name="comodule_CD", **kw))
    return out
