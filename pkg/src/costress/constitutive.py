"""Energies, stresses and equilibrium residual of the isotropic
indeterminate couple stress model, for all three parameter regimes:

* ``gkmt``     alpha1 > 0, alpha2 > 0 (fully positive curvature energy)
* ``modified`` alpha1 > 0, alpha2 = 0 (symmetric, trace-free couple stress)
* ``hd``       alpha1 = 0, alpha2 > 0 (skew couple stress)
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np
from numpy.typing import NDArray

from .fields import (
    DisplacementField,
    NumericDomainError,
    curl_from_grad,
    grad_curl_from_grad2,
    kinematics,
)
from .tensors import EPS3, ID3, anti, axl, dev, inner, skw, sym, tr

__all__ = [
    "LoadData",
    "MaterialParams",
    "ScalarForms",
    "StressState",
    "couple_stress_batch",
    "equilibrium_residual",
    "stresses",
    "stresses_batch",
    "torsion_and_mean_curvature",
    "w_curv",
    "w_lin",
]

_REGIME_ALPHAS = {
    "gkmt": (1.0, 1.0),
    "modified": (1.0, 0.0),
    "hd": (0.0, 1.0),
}


@dataclass(frozen=True)
class MaterialParams:
    """Full constitutive parameter set.

    ``mu_c`` is the Cosserat couple modulus, used only by the penalized
    Cosserat solver.  ``alpha2`` also answers to the name ``alpha3`` in
    JSON input (the two names denote the same parameter).
    """

    mu: float
    lam: float
    L_c: float
    alpha1: float
    alpha2: float
    mu_c: float = 0.0

    def __post_init__(self):
        if not self.mu > 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not 3.0 * self.lam + 2.0 * self.mu > 0.0:
            raise ValueError(f"3*lambda + 2*mu must be positive, got {3 * self.lam + 2 * self.mu}")
        if self.alpha1 < 0.0 or self.alpha2 < 0.0:
            raise ValueError("alpha1 and alpha2 must be nonnegative")
        if self.L_c < 0.0:
            raise ValueError("L_c must be nonnegative")

    @property
    def regime(self) -> str:
        if self.alpha1 > 0.0 and self.alpha2 > 0.0:
            return "gkmt"
        if self.alpha1 > 0.0:
            return "modified"
        if self.alpha2 > 0.0:
            return "hd"
        return "classical"

    @classmethod
    def for_regime(cls, regime: str, mu: float = 1.0, lam: float = 1.0,
                   L_c: float = 1.0, mu_c: float = 0.0) -> "MaterialParams":
        """Material parameters with the canonical alphas of a named regime."""
        try:
            a1, a2 = _REGIME_ALPHAS[regime]
        except KeyError:
            raise ValueError(f"unknown regime {regime!r}; expected one of {sorted(_REGIME_ALPHAS)}")
        return cls(mu=mu, lam=lam, L_c=L_c, alpha1=a1, alpha2=a2, mu_c=mu_c)

    def to_json(self) -> str:
        return json.dumps(
            {
                "mu": self.mu,
                "lambda": self.lam,
                "L_c": self.L_c,
                "alpha1": self.alpha1,
                "alpha2": self.alpha2,
                "mu_c": self.mu_c,
                "regime": self.regime,
            }
        )

    @classmethod
    def from_dict(cls, d: dict) -> "MaterialParams":
        d = dict(d)
        d.pop("regime", None)
        if "alpha3" in d:
            a3 = d.pop("alpha3")
            if "alpha2" in d and d["alpha2"] != a3:
                raise ValueError(
                    f"alpha2 ({d['alpha2']}) and alpha3 ({a3}) are the same "
                    "parameter but were given different values"
                )
            d["alpha2"] = a3
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {"mu", "lam", "L_c", "alpha1", "alpha2", "mu_c"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown material parameter keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, s: str) -> "MaterialParams":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class LoadData:
    """Body force density and (for the Cosserat problem) body couple."""

    f: object = None        # callable x -> (3,) or None for zero
    m_body: object = None   # callable x -> (3,) axial couple density

    def force(self, x: NDArray) -> NDArray:
        if self.f is None:
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape[:-1] + (3,)) if x.ndim > 1 else np.zeros(3)
        return np.asarray(self.f(x), dtype=float)

    def couple(self, x: NDArray) -> NDArray:
        if self.m_body is None:
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape[:-1] + (3,)) if x.ndim > 1 else np.zeros(3)
        return np.asarray(self.m_body(x), dtype=float)


@dataclass(frozen=True)
class StressState:
    """Local, nonlocal and couple stresses at a point."""

    sigma: NDArray        # symmetric local force stress
    m_tilde: NDArray      # couple stress tensor
    tau_tilde: NDArray    # skew nonlocal force stress, anti(Div m)/2
    sigma_total: NDArray  # sigma - tau_tilde


@dataclass(frozen=True)
class ScalarForms:
    """A scalar energy together with its algebraically equivalent forms."""

    value: float
    forms: dict

    def __float__(self):
        return self.value


def w_lin(params: MaterialParams, grad_u: NDArray) -> ScalarForms:
    """Local strain energy density, in (mu, lambda) and (dev, bulk) form."""
    e = sym(grad_u)
    t = tr(grad_u)
    mu_lambda = params.mu * inner(e, e) + 0.5 * params.lam * t * t
    dev_e = dev(e)
    dev_bulk = params.mu * inner(dev_e, dev_e) + (2.0 * params.mu + 3.0 * params.lam) / 6.0 * t * t
    return ScalarForms(value=mu_lambda, forms={"mu_lambda": mu_lambda, "dev_bulk": dev_bulk})


def w_curv(params: MaterialParams, grad_curl_u: NDArray, trace_tol: float = 1e-8) -> ScalarForms:
    """Curvature energy density in its three equivalent algebraic forms.

    The input is the curvature measure grad curl u, which is trace free
    for any displacement field; a spurious trace (finite-difference
    noise) triggers a warning and is discarded by the deviatoric form.
    """
    M = np.asarray(grad_curl_u, dtype=float)
    t = tr(M)
    if abs(t) > trace_tol * max(1.0, np.linalg.norm(M)):
        warnings.warn(
            f"grad curl u has trace {t:.3e}; div curl u should vanish",
            stacklevel=2,
        )
    k = params.mu * params.L_c ** 2
    s, a = sym(M), skw(M)
    form_sym_skw = k * (params.alpha1 / 4.0 * inner(s, s) + params.alpha2 / 4.0 * inner(a, a))
    # route via the gradient of axl(skw grad u) = (grad curl u)/2
    N = 0.5 * M
    sn, an = sym(N), skw(N)
    form_axl = k * (params.alpha1 * inner(sn, sn) + params.alpha2 * inner(an, an))
    ds = dev(s)
    form_dev = k * (params.alpha1 / 4.0 * inner(ds, ds) + params.alpha2 / 4.0 * inner(a, a))
    return ScalarForms(
        value=form_dev,
        forms={"sym_skw": form_sym_skw, "axl_gradient": form_axl, "dev_sym_skw": form_dev},
    )


def couple_stress(params: MaterialParams, grad_curl_u: NDArray) -> NDArray:
    """Couple stress m = mu L_c^2 [alpha1 sym + alpha2 skw](grad curl u)."""
    k = params.mu * params.L_c ** 2
    return k * (params.alpha1 * sym(grad_curl_u) + params.alpha2 * skw(grad_curl_u))


def _div_couple_stress(params: MaterialParams, grad3: NDArray) -> NDArray:
    """(Div m)_i from the third displacement gradient."""
    # DM[i, j, k] = d_k (grad curl u)_ij = eps_ilm d_k d_j d_l u_m
    DM = np.einsum("ilm,mljk->ijk", EPS3, grad3)
    k = params.mu * params.L_c ** 2
    div_sym = 0.5 * (np.einsum("ijj->i", DM) + np.einsum("jij->i", DM))
    div_skw = 0.5 * (np.einsum("ijj->i", DM) - np.einsum("jij->i", DM))
    return k * (params.alpha1 * div_sym + params.alpha2 * div_skw)


def stresses(params: MaterialParams, field: DisplacementField, x: NDArray) -> StressState:
    """All stress measures of the model at a point.

    Div m (hence tau) is computed from closed-form third derivatives when
    the field provides them, otherwise from the FD oracle.
    """
    x = np.asarray(x, dtype=float)
    G = field.grad(x)
    H = field.grad2(x)
    T3 = field.grad3(x)
    if not all(np.all(np.isfinite(a)) for a in (G, H, T3)):
        raise NumericDomainError(f"non-finite derivatives at {x}")
    sigma = 2.0 * params.mu * sym(G) + params.lam * tr(G) * ID3
    M = grad_curl_from_grad2(H)
    m_tilde = couple_stress(params, M)
    tau = 0.5 * anti(_div_couple_stress(params, T3))
    return StressState(sigma=sigma, m_tilde=m_tilde, tau_tilde=tau, sigma_total=sigma - tau)


def stresses_batch(params: MaterialParams, field: DisplacementField, X: NDArray) -> StressState:
    """Vectorized :func:`stresses`; every array gains a leading batch axis.

    Requires the field's derivative evaluations to broadcast over a
    (n, 3) point array (closed-form families do).
    """
    X = np.asarray(X, dtype=float)
    G = field.grad(X)
    H = field.grad2(X)
    T3 = field.grad3(X)
    if not all(np.all(np.isfinite(a)) for a in (G, H, T3)):
        raise NumericDomainError("non-finite derivatives in batch evaluation")
    sym_G = 0.5 * (G + np.swapaxes(G, -1, -2))
    tr_G = np.einsum("...ii->...", G)
    sigma = 2.0 * params.mu * sym_G + params.lam * tr_G[..., None, None] * ID3
    M = np.einsum("ilm,...mlj->...ij", EPS3, H)
    k = params.mu * params.L_c ** 2
    m_tilde = k * (
        params.alpha1 * 0.5 * (M + np.swapaxes(M, -1, -2))
        + params.alpha2 * 0.5 * (M - np.swapaxes(M, -1, -2))
    )
    DM = np.einsum("ilm,...mljk->...ijk", EPS3, T3)
    d1 = np.einsum("...ijj->...i", DM)
    d2 = np.einsum("...jij->...i", DM)
    div_m = k * (params.alpha1 * 0.5 * (d1 + d2) + params.alpha2 * 0.5 * (d1 - d2))
    tau = 0.5 * np.einsum("ijk,...k->...ij", -EPS3, div_m)
    return StressState(sigma=sigma, m_tilde=m_tilde, tau_tilde=tau, sigma_total=sigma - tau)


def couple_stress_batch(params: MaterialParams, field: DisplacementField, X: NDArray) -> NDArray:
    """Couple stress tensors at a (n, 3) point array, shape (n, 3, 3)."""
    H = field.grad2(np.asarray(X, dtype=float))
    M = np.einsum("ilm,...mlj->...ij", EPS3, H)
    k = params.mu * params.L_c ** 2
    return k * (
        params.alpha1 * 0.5 * (M + np.swapaxes(M, -1, -2))
        + params.alpha2 * 0.5 * (M - np.swapaxes(M, -1, -2))
    )


def _div_sigma(params: MaterialParams, H: NDArray) -> NDArray:
    """(Div sigma)_i from the second displacement gradient."""
    lap = np.einsum("ijj->i", H)
    grad_div = np.einsum("jij->i", H)
    return params.mu * lap + (params.mu + params.lam) * grad_div


def equilibrium_residual(
    params: MaterialParams,
    field: DisplacementField,
    loads: LoadData,
    x: NDArray,
    h: float = 1e-3,
) -> NDArray:
    """Residual Div(sigma - tau) + f at a point.

    Div tau needs fourth derivatives of u; it is obtained by finite
    differences on the nonlocal stress field (which itself uses
    closed-form third derivatives where available).
    """
    x = np.asarray(x, dtype=float)
    H = field.grad2(x)
    div_sigma = _div_sigma(params, H)

    def tau_field(y):
        return 0.5 * anti(_div_couple_stress(params, field.grad3(y)))

    # (Div tau)_i = d_j tau_ij by the same 4th-order + Richardson stencil
    from .fields import _fd_partial

    hh = h * (1.0 + float(np.linalg.norm(x)))
    div_tau = np.zeros(3)
    for j in range(3):
        dtau = _fd_partial(tau_field, x, (j,), hh)
        div_tau += dtau[:, j]
    res = div_sigma - div_tau + loads.force(x)
    if not np.all(np.isfinite(res)):
        raise NumericDomainError(f"non-finite equilibrium residual at {x}")
    return res


def torsion_and_mean_curvature(field: DisplacementField, x: NDArray):
    """(chi, omega) = (sym, skw) parts of grad curl u at a point."""
    state = kinematics(field, x)
    return state.chi_torsion, state.omega_mean_curv
