"""Displacement fields with derivative evaluation up to third order.

Built-in families (zero, constant, rigid motion, seeded polynomial,
infinitesimal conformal) carry closed-form derivatives; arbitrary
callables fall back to a finite-difference oracle.  The same oracle
doubles as the independent cross-check for every closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly
from numpy.typing import NDArray

from .tensors import EPS3, ID3, anti, axl, skw, sym

__all__ = [
    "Box",
    "CallableField",
    "ConformalParams",
    "ConstantField",
    "DisplacementField",
    "FdStencilError",
    "KinematicState",
    "NumericDomainError",
    "PolynomialField",
    "RigidMotionField",
    "ZeroField",
    "curl_from_grad",
    "fd_derivative_oracle",
    "field_from_spec",
    "field_to_spec",
    "grad_curl_from_grad2",
    "kinematics",
    "make_conformal",
    "make_polynomial",
    "random_conformal",
]


class FdStencilError(ValueError):
    """A finite-difference stencil cannot be fit inside the domain."""


class NumericDomainError(ArithmeticError):
    """A field evaluation produced a non-finite value."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box domain."""

    lo: tuple[float, float, float] = (0.0, 0.0, 0.0)
    hi: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def boundary_distance(self, x: NDArray) -> float:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return float(min(np.min(x - lo), np.min(hi - x)))


# Base step per derivative order; tuned so that after one Richardson
# level truncation and roundoff balance in double precision.
_FD_BASE_STEP = {1: 1e-3, 2: 4e-3, 3: 1.5e-2}
_FD_MIN_STEP = 1e-7

# 4th-order central first-derivative stencil (center weight is zero).
_FD_OFFSETS = (-2.0, -1.0, 1.0, 2.0)
_FD_WEIGHTS = (1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0)


def _nested_stencil(func, x: NDArray, axes: tuple[int, ...], h: float) -> NDArray:
    if not axes:
        return np.asarray(func(x), dtype=float)
    a = axes[0]
    acc = None
    for off, wgt in zip(_FD_OFFSETS, _FD_WEIGHTS):
        y = np.array(x, dtype=float)
        y[a] += off * h
        term = wgt * _nested_stencil(func, y, axes[1:], h)
        acc = term if acc is None else acc + term
    return acc / h


def _fd_partial(func, x: NDArray, axes: tuple[int, ...], h: float) -> NDArray:
    # one Richardson level (h, h/2) on the formally 4th-order stencil
    coarse = _nested_stencil(func, x, axes, h)
    fine = _nested_stencil(func, x, axes, h / 2.0)
    return (16.0 * fine - coarse) / 15.0


def fd_derivative_oracle(
    field,
    x: NDArray,
    order: int,
    h_base: float | None = None,
    domain: Box | None = None,
) -> NDArray:
    """Central finite differences of formal order 4 plus one Richardson level.

    Returns the derivative tensor D[i, a1, ..., a_order] = d^order u_i /
    dx_a1 ... dx_a_order.  Serves as the independent oracle for every
    closed-form derivative.

    Parameters
    ----------
    field
        A :class:`DisplacementField` or a plain callable ``x -> (3,)``.
    order
        Derivative order, 1, 2 or 3.
    h_base
        Override for the base step; defaults to a per-order tuned value
        scaled by ``1 + |x|``.
    domain
        Optional box; the stencil shrinks its step near the boundary and
        raises :class:`FdStencilError` once no usable step remains.
    """
    if order not in (1, 2, 3):
        raise ValueError(f"derivative order must be 1, 2 or 3, got {order}")
    func = field.value if isinstance(field, DisplacementField) else field
    x = np.asarray(x, dtype=float)
    if domain is None and isinstance(field, DisplacementField):
        domain = field.domain

    scale = 1.0 + float(np.linalg.norm(x))
    h = (h_base if h_base is not None else _FD_BASE_STEP[order]) * scale
    if domain is not None:
        margin = domain.boundary_distance(x)
        if margin <= 0.0:
            raise FdStencilError(f"point {x} is on or outside the domain boundary")
        h = min(h, 0.999 * margin / (2.0 * order))
        if h < _FD_MIN_STEP * scale:
            raise FdStencilError(
                f"stencil step {h:.3e} too small near the boundary at {x}"
            )

    out = np.zeros((3,) + (3,) * order)
    for combo in _sorted_axis_combos(order):
        val = _fd_partial(func, x, combo, h)
        for perm in _permutations_unique(combo):
            out[(slice(None),) + perm] = val
    if not np.all(np.isfinite(out)):
        raise NumericDomainError(f"finite differences produced non-finite values at {x}")
    return out


def _sorted_axis_combos(order: int):
    if order == 1:
        return [(a,) for a in range(3)]
    if order == 2:
        return [(a, b) for a in range(3) for b in range(a, 3)]
    return [(a, b, c) for a in range(3) for b in range(a, 3) for c in range(b, 3)]


def _permutations_unique(combo: tuple[int, ...]):
    import itertools

    return set(itertools.permutations(combo))


class DisplacementField:
    """A vector-valued field of position with derivatives up to third order.

    Subclasses either provide closed-form derivatives or inherit the
    finite-difference fallbacks.  Fields are immutable after construction
    and safe to evaluate concurrently.
    """

    family: str = "abstract"
    domain: Box | None = None
    has_closed_derivatives: bool = False

    def value(self, x: NDArray) -> NDArray:
        raise NotImplementedError

    def grad(self, x: NDArray) -> NDArray:
        """Gradient G[i, j] = d u_i / d x_j."""
        return fd_derivative_oracle(self, x, 1)

    def grad2(self, x: NDArray) -> NDArray:
        """Second gradient H[i, j, k] = d^2 u_i / dx_j dx_k."""
        return fd_derivative_oracle(self, x, 2)

    def grad3(self, x: NDArray) -> NDArray:
        """Third gradient T[i, j, k, l] = d^3 u_i / dx_j dx_k dx_l."""
        return fd_derivative_oracle(self, x, 3)

    def params(self) -> dict:
        return {}

    def __call__(self, x: NDArray) -> NDArray:
        return self.value(x)


class ZeroField(DisplacementField):
    family = "zero"
    has_closed_derivatives = True

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (3,)) if x.ndim > 1 else np.zeros(3)

    def grad(self, x):
        return np.zeros(np.shape(x)[:-1] + (3, 3))

    def grad2(self, x):
        return np.zeros(np.shape(x)[:-1] + (3, 3, 3))

    def grad3(self, x):
        return np.zeros(np.shape(x)[:-1] + (3, 3, 3, 3))


class ConstantField(DisplacementField):
    family = "constant"
    has_closed_derivatives = True

    def __init__(self, c):
        self.c = np.array(c, dtype=float)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim > 1:
            return np.broadcast_to(self.c, x.shape[:-1] + (3,)).copy()
        return self.c.copy()

    def grad(self, x):
        return np.zeros(np.shape(x)[:-1] + (3, 3))

    def grad2(self, x):
        return np.zeros(np.shape(x)[:-1] + (3, 3, 3))

    def grad3(self, x):
        return np.zeros(np.shape(x)[:-1] + (3, 3, 3, 3))

    def params(self):
        return {"c": self.c.tolist()}


class RigidMotionField(DisplacementField):
    """u(x) = W x + b with W skew, given by its axial vector."""

    family = "rigid"
    has_closed_derivatives = True

    def __init__(self, w_axial, b=(0.0, 0.0, 0.0)):
        self.w_axial = np.array(w_axial, dtype=float)
        self.b = np.array(b, dtype=float)
        self.W = anti(self.w_axial)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.W.T + self.b

    def grad(self, x):
        shape = np.shape(x)[:-1] + (3, 3)
        return np.broadcast_to(self.W, shape).copy()

    def grad2(self, x):
        return np.zeros(np.shape(x)[:-1] + (3, 3, 3))

    def grad3(self, x):
        return np.zeros(np.shape(x)[:-1] + (3, 3, 3, 3))

    def params(self):
        return {"w_axial": self.w_axial.tolist(), "b": self.b.tolist()}


class PolynomialField(DisplacementField):
    """Trivariate vector polynomial with closed-form derivatives."""

    family = "polynomial"
    has_closed_derivatives = True

    def __init__(self, coeffs, seed: int | None = None, degree: int | None = None):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim != 4 or coeffs.shape[0] != 3:
            raise ValueError("coefficients must have shape (3, d+1, d+1, d+1)")
        self.coeffs = coeffs
        self.seed = seed
        self.degree = degree if degree is not None else coeffs.shape[1] - 1
        # stacked coefficient tensors, derivative axes first: C1[i, a],
        # C2[i, a, b], C3[i, a, b, c] all hold (D, D, D) monomial blocks,
        # zero padded so one einsum evaluates every component at once
        D = coeffs.shape[1]
        self._C0 = coeffs
        self._C1 = np.stack([self._der_block(self._C0, a) for a in range(3)], axis=1)
        self._C2 = np.stack([self._der_block(self._C1, a) for a in range(3)], axis=2)
        self._C3 = np.stack([self._der_block(self._C2, a) for a in range(3)], axis=3)
        self._D = D

    @staticmethod
    def _der_block(C: NDArray, axis: int) -> NDArray:
        """Differentiate the trailing (D, D, D) monomial block along one
        coordinate, keeping the block shape by zero padding."""
        D = C.shape[-1]
        out = np.zeros_like(C)
        k = np.arange(1, D)
        mover = np.moveaxis(out, axis - 3, -1)
        mover[..., : D - 1] = np.moveaxis(C, axis - 3, -1)[..., 1:] * k
        return out

    def _powers(self, x: NDArray) -> NDArray:
        """P[..., a, k] = x_a ** k for k = 0..D-1."""
        x = np.asarray(x, dtype=float)
        return x[..., None] ** np.arange(self._D)

    def value(self, x):
        P = self._powers(x)
        return np.einsum("cijk,...i,...j,...k->...c",
                         self._C0, P[..., 0, :], P[..., 1, :], P[..., 2, :])

    def grad(self, x):
        P = self._powers(x)
        return np.einsum("caijk,...i,...j,...k->...ca",
                         self._C1, P[..., 0, :], P[..., 1, :], P[..., 2, :])

    def grad2(self, x):
        P = self._powers(x)
        return np.einsum("cabijk,...i,...j,...k->...cab",
                         self._C2, P[..., 0, :], P[..., 1, :], P[..., 2, :])

    def grad3(self, x):
        P = self._powers(x)
        return np.einsum("cabdijk,...i,...j,...k->...cabd",
                         self._C3, P[..., 0, :], P[..., 1, :], P[..., 2, :])

    def params(self):
        return {"seed": self.seed, "degree": self.degree}


def make_polynomial(seed: int, degree: int) -> PolynomialField:
    """Deterministic random vector polynomial of total degree <= degree."""
    if degree > 6:
        raise ValueError(f"polynomial degree must be <= 6, got {degree}")
    rng = np.random.default_rng(seed)
    n = degree + 1
    coeffs = rng.uniform(-1.0, 1.0, size=(3, n, n, n))
    i, j, k = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    total = i + j + k
    coeffs[:, total > degree] = 0.0
    # damp high-order terms so values stay O(1) on the unit box
    coeffs /= 1.0 + total
    return PolynomialField(coeffs, seed=seed, degree=degree)


@dataclass(frozen=True)
class ConformalParams:
    """Parameters of an infinitesimal conformal map.

    ``w_axial`` is the axial vector of the quadratic-part generator,
    ``a_hat`` a skew tensor, ``b_hat`` a translation and ``p_hat`` the
    uniform dilation coefficient.
    """

    w_axial: NDArray = dc_field(default_factory=lambda: np.zeros(3))
    a_hat: NDArray = dc_field(default_factory=lambda: np.zeros((3, 3)))
    b_hat: NDArray = dc_field(default_factory=lambda: np.zeros(3))
    p_hat: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "w_axial", np.array(self.w_axial, dtype=float))
        object.__setattr__(self, "a_hat", np.array(self.a_hat, dtype=float))
        object.__setattr__(self, "b_hat", np.array(self.b_hat, dtype=float))
        if not np.allclose(self.a_hat, -self.a_hat.T, atol=0.0):
            raise ValueError("a_hat must be exactly skew-symmetric")


class ConformalField(DisplacementField):
    """phi_c(x) = <w, x> x - w |x|^2 / 2 + [p id + A] x + b.

    The Jacobian lies pointwise in R.id + so(3); the torsion tensor
    sym grad curl vanishes identically.
    """

    family = "conformal"
    has_closed_derivatives = True

    def __init__(self, params: ConformalParams):
        self.cparams = params
        self.w = params.w_axial
        self.A = params.a_hat
        self.b = params.b_hat
        self.p = params.p_hat
        # constant second gradient: H[i,j,k] = w_j d_ik + w_k d_ij - w_i d_jk
        w = self.w
        H = (
            np.einsum("j,ik->ijk", w, ID3)
            + np.einsum("k,ij->ijk", w, ID3)
            - np.einsum("i,jk->ijk", w, ID3)
        )
        self._H = H

    def value(self, x):
        x = np.asarray(x, dtype=float)
        wx = x @ self.w
        r2 = np.sum(x * x, axis=-1)
        quad = wx[..., None] * x - 0.5 * r2[..., None] * self.w
        return quad + self.p * x + x @ self.A.T + self.b

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return (x @ self.w + self.p) * ID3 + anti(np.cross(self.w, x)) + self.A
        wx = x @ self.w
        cross = np.cross(np.broadcast_to(self.w, x.shape), x)
        out = (wx + self.p)[..., None, None] * ID3
        out = out + np.einsum("ijk,...k->...ij", -EPS3, cross) + self.A
        return out

    def grad2(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self._H.copy()
        return np.broadcast_to(self._H, x.shape[:-1] + (3, 3, 3)).copy()

    def grad3(self, x):
        return np.zeros(np.shape(x)[:-1] + (3, 3, 3, 3))

    def params(self):
        return {
            "w_axial": self.w.tolist(),
            "a_hat": self.A.tolist(),
            "b_hat": self.b.tolist(),
            "p_hat": self.p,
        }


def make_conformal(params: ConformalParams) -> ConformalField:
    """Build the infinitesimal conformal displacement field."""
    return ConformalField(params)


def random_conformal(seed: int) -> ConformalField:
    """Deterministic random conformal field with O(1) parameters."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, 3)
    return ConformalField(
        ConformalParams(
            w_axial=rng.uniform(-1.0, 1.0, 3),
            a_hat=anti(a),
            b_hat=rng.uniform(-1.0, 1.0, 3),
            p_hat=float(rng.uniform(-1.0, 1.0)),
        )
    )


class CallableField(DisplacementField):
    """Wrap an arbitrary callable; derivatives come from the FD oracle."""

    family = "callable"
    has_closed_derivatives = False

    def __init__(self, func: Callable[[NDArray], NDArray], domain: Box | None = None,
                 name: str = "callable"):
        self._func = func
        self.domain = domain
        self.name = name

    def value(self, x):
        out = np.asarray(self._func(np.asarray(x, dtype=float)), dtype=float)
        if not np.all(np.isfinite(out)):
            raise NumericDomainError(f"field evaluation non-finite at {x}")
        return out


@dataclass(frozen=True)
class KinematicState:
    """All first- and second-gradient kinematic quantities at a point."""

    grad_u: NDArray
    sym_grad: NDArray
    curl_u: NDArray
    axl_skw_grad: NDArray
    grad_curl: NDArray
    chi_torsion: NDArray
    omega_mean_curv: NDArray
    second_grad: NDArray


def curl_from_grad(G: NDArray) -> NDArray:
    """curl u from the displacement gradient, c_i = eps_ijk d_j u_k."""
    return np.array([G[2, 1] - G[1, 2], G[0, 2] - G[2, 0], G[1, 0] - G[0, 1]])


def grad_curl_from_grad2(H: NDArray) -> NDArray:
    """grad curl u from the second gradient, M_ij = eps_ilm d_j d_l u_m."""
    return np.einsum("ilm,mlj->ij", EPS3, H)


def kinematics(field: DisplacementField, x: NDArray) -> KinematicState:
    """Evaluate the full kinematic state of a field at a point.

    Closed-form derivatives are used when the family provides them,
    finite differences otherwise.

    Raises
    ------
    NumericDomainError
        If any derivative evaluates to a non-finite value.
    """
    x = np.asarray(x, dtype=float)
    G = field.grad(x)
    H = field.grad2(x)
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(H))):
        raise NumericDomainError(f"non-finite kinematics at {x}")
    M = grad_curl_from_grad2(H)
    return KinematicState(
        grad_u=G,
        sym_grad=sym(G),
        curl_u=curl_from_grad(G),
        axl_skw_grad=axl(skw(G), tol=np.inf),
        grad_curl=M,
        chi_torsion=sym(M),
        omega_mean_curv=skw(M),
        second_grad=H,
    )


_FIELD_BUILDERS = {
    "zero": lambda p: ZeroField(),
    "constant": lambda p: ConstantField(p["c"]),
    "rigid": lambda p: RigidMotionField(p["w_axial"], p.get("b", (0.0, 0.0, 0.0))),
    "polynomial": lambda p: make_polynomial(int(p["seed"]), int(p["degree"])),
    "conformal": lambda p: ConformalField(
        ConformalParams(
            w_axial=np.array(p.get("w_axial", (0.0, 0.0, 0.0)), dtype=float),
            a_hat=np.array(p.get("a_hat", np.zeros((3, 3))), dtype=float),
            b_hat=np.array(p.get("b_hat", (0.0, 0.0, 0.0)), dtype=float),
            p_hat=float(p.get("p_hat", 0.0)),
        )
    ),
}


def field_to_spec(field: DisplacementField) -> dict:
    """JSON-serializable specification of a built-in field."""
    if field.family not in _FIELD_BUILDERS:
        raise ValueError(f"field family {field.family!r} is not serializable")
    return {"family": field.family, **field.params()}


def field_from_spec(spec: dict | str) -> DisplacementField:
    """Rebuild a field from its JSON specification."""
    if isinstance(spec, str):
        spec = json.loads(spec)
    spec = dict(spec)
    family = spec.pop("family", None)
    if family not in _FIELD_BUILDERS:
        raise ValueError(f"unknown field family {family!r}")
    return _FIELD_BUILDERS[family](spec)
