"""Model catalog: the gl₂ fully dynamical model and a trigonometric six-vertex control."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .shift_calculus import DynamicalMatrix, constant_matrix
from .tensor_core import matrix_unit

FLAVORS = ("nondynamical", "semidynamical", "fully_dynamical")
BOUNDARIES = ("SP", "SNP")
CHI_MODES = ("identity", "diagonal", "nondiagonal")


class SingularPointError(ValueError):
    """Sample point on (or too close to) a pole of the model."""


@dataclass(frozen=True, eq=False)
class ModelSpec:
    name: str
    n: int
    gamma: complex
    flavor: str
    boundary: str
    shift_sign: int
    A: DynamicalMatrix
    B: DynamicalMatrix
    C: DynamicalMatrix
    D: DynamicalMatrix
    T: DynamicalMatrix
    chi: DynamicalMatrix
    chi_diagonal: bool = True
    xi: Optional[complex] = None
    chi_mode: str = "diagonal"
    # literal dual structure matrices, when a model supplies them explicitly
    dual: Optional[dict] = field(default=None, repr=False)
    # singularity guard: λ -> list of complex arguments whose sinh must stay away from 0
    guard: Optional[object] = field(default=None, repr=False)
    conjugated: bool = False
    # spectral values u where t(u) has poles (sampling keeps away from them)
    u_poles: tuple = ()

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ValueError(f"unknown flavor {self.flavor!r}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.shift_sign not in (1, -1):
            raise ValueError("shift_sign must be ±1")
        for m in (self.A, self.B, self.C, self.D):
            if len(m.legs) != 2 or m.arity != 2:
                raise ValueError("structure matrices act on two legs with two spectral arguments")
        for m in (self.T, self.chi):
            if len(m.legs) != 1 or m.arity != 1:
                raise ValueError("T and chi act on one leg with one spectral argument")

    @property
    def step(self) -> complex:
        """Signed shift step ε = shift_sign·γ used by every λ+εh shift."""
        return self.shift_sign * self.gamma

    def structure(self):
        return self.A, self.B, self.C, self.D

    def replace(self, **kw) -> "ModelSpec":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# gl₂ fully dynamical model
# ---------------------------------------------------------------------------
E = lambda i, j: matrix_unit(i, j, 2)
_E11E11 = np.kron(E(0, 0), E(0, 0))
_E22E22 = np.kron(E(1, 1), E(1, 1))
_E11E22 = np.kron(E(0, 0), E(1, 1))
_E22E11 = np.kron(E(1, 1), E(0, 0))
_E12E21 = np.kron(E(0, 1), E(1, 0))
_E21E12 = np.kron(E(1, 0), E(0, 1))


def _l12(lam) -> complex:
    lam = np.asarray(lam, dtype=complex)
    return lam[0] - lam[1]


def gl2_alpha(l, u, g):
    return np.sinh(l - g) * np.sinh(u) / (np.sinh(u - g) * np.sinh(l))


def gl2_beta(l, u, g):
    return np.sinh(u - l) * np.sinh(g) / (np.sinh(u - g) * np.sinh(l))


def gl2_R(lam, u, gamma) -> np.ndarray:
    """R(λ,u) = E11⊗E11 + E22⊗E22 + αE11⊗E22 + δE22⊗E11 + βE12⊗E21 + γ̂E21⊗E12."""
    l = _l12(lam)
    return (_E11E11 + _E22E22
            + gl2_alpha(l, u, gamma) * _E11E22 + gl2_alpha(-l, u, gamma) * _E22E11
            + gl2_beta(l, u, gamma) * _E12E21 + gl2_beta(-l, u, gamma) * _E21E12)


def gl2_R_dual(lam, u, gamma) -> np.ndarray:
    """The dual R̃ with the six literal entries (ζ̃, η̃, α̃, δ̃, β̃, γ̃)."""
    l = _l12(lam)
    g, sh = gamma, np.sinh

    def zeta(l):
        return 1.0 / (1.0 - sh(g) ** 2 * sh(l - u) * sh(2 * g - l - u) / (sh(l) * sh(2 * g - l) * sh(2 * g - u) ** 2))

    def alpha(l):
        return sh(l) * sh(u - g) / (sh(u) * sh(l - g))

    def beta(l):
        return -sh(g) * sh(l) * sh(g - u) * sh(2 * g - l - u) / (sh(g - l) ** 2 * sh(2 * g - u) * sh(u))

    return (zeta(l) * _E11E11 + zeta(-l) * _E22E22 + alpha(l) * _E11E22 + alpha(-l) * _E22E11
            + beta(l) * _E12E21 + beta(-l) * _E21E12)


def gl2_chi(lam, u, gamma, xi) -> np.ndarray:
    lam = np.asarray(lam, dtype=complex)
    l, sh, g = lam[0] - lam[1], np.sinh, gamma
    c1 = sh(l) * sh(-lam[0] + xi - u + g) / (sh(l - g) * sh(-lam[0] + xi + u - g))
    c2 = sh(l) * sh(-lam[1] + xi - u + g) / (sh(l + g) * sh(-lam[1] + xi + u - g))
    return np.diag([c1, c2]).astype(complex)


def gl2_T() -> np.ndarray:
    return np.eye(2, dtype=complex)


def gl2_tr_chi_sc_inverse(lam, gamma, xi) -> complex:
    """Closed form of (tr χ^{SC})⁻¹ at u = 0."""
    lam = np.asarray(lam, dtype=complex)
    sh, g = np.sinh, gamma
    return (sh(2 * g - xi + lam[0]) * sh(2 * g - xi + lam[1])
            / (2 * np.cosh(g) * sh(g - xi + lam[1]) * sh(g - xi + lam[0])))


def gl2_guard(gamma, xi):
    """Arguments whose sinh appears in a denominator somewhere in the gl₂ pipeline."""
    def args(lam):
        lam = np.asarray(lam, dtype=complex)
        l = lam[0] - lam[1]
        out = [l, l - gamma, l + gamma, 2 * gamma - l, 2 * gamma + l, gamma - l]
        for x in lam:
            out += [xi - x - gamma, xi - x - 2 * gamma, xi - x, 2 * gamma - xi + x, gamma - xi + x]
        return out
    return args


def gl2_model(gamma=0.2, xi=1.1, boundary="SP", chi_mode="diagonal") -> ModelSpec:
    """A₁₂=R₁₂(λ,u₁−u₂), B₁₂=R₂₁(λ,u₁+u₂), C₁₂=R₁₂(λ,u₁+u₂), D₁₂=R₂₁(λ,u₁−u₂)."""
    g = complex(gamma)
    step = -g
    R12 = DynamicalMatrix((1, 2), 2, 2, lambda u1, u2, lam: gl2_R(lam, u1 - u2, g), step, "R12")
    Rsum = DynamicalMatrix((1, 2), 2, 2, lambda u1, u2, lam: gl2_R(lam, u1 + u2, g), step, "R12")
    A = R12
    B = Rsum.swapped()
    C = Rsum
    D = R12.swapped()
    Rd_sum = DynamicalMatrix((1, 2), 2, 2, lambda u1, u2, lam: gl2_R_dual(lam, u1 + u2, g), step, "Rdual12")
    dual = {"A": A, "B": Rd_sum.swapped(), "C": Rd_sum, "D": D}
    T = constant_matrix(gl2_T(), (1,), 2, arity=1, gamma=step, name="T")
    if chi_mode == "identity":
        chi = constant_matrix(np.eye(2), (1,), 2, arity=1, gamma=step, name="chi")
    else:
        chi = DynamicalMatrix((1,), 2, 1, lambda u, lam: gl2_chi(lam, u, g, xi), step, "chi")
    return ModelSpec("gl2", 2, g, "fully_dynamical", boundary, -1, A.with_gamma(step), B.with_gamma(step),
                     C.with_gamma(step), D.with_gamma(step), T, chi, True, complex(xi), chi_mode, dual,
                     gl2_guard(g, complex(xi)), u_poles=(g,))


# ---------------------------------------------------------------------------
# six-vertex control (λ-independent)
# ---------------------------------------------------------------------------
def sixvertex_R(u, eta) -> np.ndarray:
    """Trigonometric six-vertex R normalised so that R(0) = P."""
    a, b, c = np.sinh(u + eta), np.sinh(u), np.sinh(eta)
    return np.array([[a, 0, 0, 0], [0, b, c, 0], [0, c, b, 0], [0, 0, 0, a]], dtype=complex) / a


def sixvertex_chi(u, eta, z) -> np.ndarray:
    """Diagonal λ-independent dual solution diag(sinh(z+u+η), sinh(z−u−η))."""
    return np.diag([np.sinh(z + u + eta), np.sinh(z - u - eta)]).astype(complex)


def _lam_free(f):
    f.lam_independent = True
    return f


def control_sixvertex(eta=0.35, flavor="nondynamical", boundary="SP", chi_mode="identity", z=0.7 + 0.2j) -> ModelSpec:
    """A=R(u₁−u₂), B=R₂₁(u₁+u₂), C=R(u₁+u₂), D=R₂₁(u₁−u₂), T = 1."""
    if flavor == "fully_dynamical":
        raise ValueError("the six-vertex control is λ-independent; use nondynamical or semidynamical")
    e = complex(eta)
    step = e
    A = DynamicalMatrix((1, 2), 2, 2, _lam_free(lambda u1, u2, lam: sixvertex_R(u1 - u2, e)), step, "R12")
    C = DynamicalMatrix((1, 2), 2, 2, _lam_free(lambda u1, u2, lam: sixvertex_R(u1 + u2, e)), step, "R12")
    B = C.swapped()
    D = A.swapped()
    T = constant_matrix(np.eye(2), (1,), 2, arity=1, gamma=step, name="T")
    if chi_mode == "identity":
        chi = constant_matrix(np.eye(2), (1,), 2, arity=1, gamma=step, name="chi")
    else:
        zz = complex(z)
        chi = DynamicalMatrix((1,), 2, 1, _lam_free(lambda u, lam: sixvertex_chi(u, e, zz)), step, "chi")
    return ModelSpec("sixvertex", 2, e, flavor, boundary, 1, A, B, C, D, T, chi, True,
                     complex(z), chi_mode, None, None, u_poles=(-e,))


# ---------------------------------------------------------------------------
# variations used by controls
# ---------------------------------------------------------------------------
def perturb(model: ModelSpec, size: float, which: str = "A", seed: int = 0) -> ModelSpec:
    """Add ``size``·N to one structure matrix, N a fixed random unit-norm matrix."""
    rng = np.random.default_rng(seed)
    d = model.n**2
    noise = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    noise /= np.linalg.norm(noise)
    M = getattr(model, which)
    fn = M.fn
    new = DynamicalMatrix(M.legs, M.n, M.arity, lambda *a: np.asarray(fn(*a)) + size * noise, M.gamma, M.name)
    return model.replace(**{which: new})


def with_T(model: ModelSpec, T) -> ModelSpec:
    if not isinstance(T, DynamicalMatrix):
        T = constant_matrix(T, (1,), model.n, arity=1, gamma=model.step, name="T")
    return model.replace(T=T)


def with_chi(model: ModelSpec, chi, diagonal: bool | None = None) -> ModelSpec:
    if not isinstance(chi, DynamicalMatrix):
        chi = constant_matrix(chi, (1,), model.n, arity=1, gamma=model.step, name="chi")
    if diagonal is None:
        diagonal = model.chi_diagonal
    return model.replace(chi=chi, chi_diagonal=diagonal)


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------
CONFIG_KEYS = {"name", "n", "gamma", "xi", "flavor", "boundary", "chi", "shift_sign", "schema"}


class ConfigError(ValueError):
    pass


def _complex(v):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(v[0], v[1])
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    return complex(v)


def model_from_config(cfg: dict) -> ModelSpec:
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown model config fields: {sorted(unknown)}")
    if "name" not in cfg:
        raise ConfigError("model config needs a 'name'")
    name = cfg["name"]
    chi_mode = cfg.get("chi", "diagonal" if name == "gl2" else "identity")
    if chi_mode not in CHI_MODES:
        raise ConfigError(f"chi must be one of {CHI_MODES}")
    if int(cfg.get("n", 2)) != 2:
        raise ConfigError("only n = 2 models are catalogued")
    if name == "gl2":
        if cfg.get("flavor", "fully_dynamical") != "fully_dynamical":
            raise ConfigError("gl2 is a fully dynamical model")
        if int(cfg.get("shift_sign", -1)) != -1:
            raise ConfigError("gl2 relations carry λ−γh shifts (shift_sign = -1)")
        return gl2_model(_complex(cfg.get("gamma", 0.2)), _complex(cfg.get("xi", 1.1)),
                         cfg.get("boundary", "SP"), chi_mode)
    if name == "sixvertex":
        flavor = cfg.get("flavor", "nondynamical")
        if flavor not in ("nondynamical", "semidynamical"):
            raise ConfigError("sixvertex is λ-independent: flavor nondynamical or semidynamical")
        boundary = cfg.get("boundary", "SP" if flavor == "nondynamical" else "SNP")
        mode = "identity" if chi_mode == "identity" else "diagonal"
        return control_sixvertex(_complex(cfg.get("gamma", 0.35)), flavor, boundary, mode,
                                 _complex(cfg.get("xi", 0.7 + 0.2j)))
    raise ConfigError(f"unknown model name {name!r}")


def load_model(path) -> ModelSpec:
    p = Path(path)
    try:
        cfg = json.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"model file not found: {p}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {p}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("model config must be a JSON object")
    return model_from_config(cfg)
