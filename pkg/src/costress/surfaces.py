"""Parametrized boundary patches, surface quadrature and the intrinsic
surface differential operators used by the traction decompositions.

Two geometries are provided: flat box faces (exact geometry, trivial
surface gradients) and spherical caps (curvature-exercising geometry).
Surface gradients are computed in the parametric chart through the first
fundamental form; chart derivatives use the same 4th-order stencil with
one Richardson level as the volumetric FD oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "BoxFace",
    "Frame",
    "QuadratureDiagnostic",
    "SphericalCap",
    "SurfacePatch",
    "surface_divergence_check",
    "stokes_flux_check",
]


class QuadratureDiagnostic(RuntimeError):
    """Raised when a checked quantity does not converge under refinement."""


@dataclass(frozen=True)
class Frame:
    """Pointwise surface frame: position, chart tangents, normal, metric."""

    x: NDArray
    x_s: NDArray
    x_t: NDArray
    n: NDArray
    jac: float          # area element |x_s x x_t|
    g: NDArray          # first fundamental form, 2x2
    g_inv: NDArray


def _gauss(order: int, a: float, b: float):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * nodes, half * weights


class SurfacePatch:
    """Base class; concrete patches supply the parametrization."""

    s_range: tuple[float, float]
    t_range: tuple[float, float]
    #: parameter sides that carry an edge curve (the rest are seams/poles)
    edge_sides: tuple[str, ...]
    #: chart degenerates at s = s_range[0] (spherical pole)
    singular_smin: bool = False

    def point(self, s: float, t: float) -> NDArray:
        raise NotImplementedError

    def chart_tangents(self, s: float, t: float) -> tuple[NDArray, NDArray]:
        raise NotImplementedError

    def normal(self, s: float, t: float) -> NDArray:
        x_s, x_t = self.chart_tangents(s, t)
        nv = np.cross(x_s, x_t)
        return nv / np.linalg.norm(nv)

    def frame(self, s: float, t: float) -> Frame:
        x_s, x_t = self.chart_tangents(s, t)
        nv = np.cross(x_s, x_t)
        jac = float(np.linalg.norm(nv))
        g = np.array([[x_s @ x_s, x_s @ x_t], [x_s @ x_t, x_t @ x_t]])
        return Frame(
            x=self.point(s, t),
            x_s=x_s,
            x_t=x_t,
            n=nv / jac,
            jac=jac,
            g=g,
            g_inv=np.linalg.inv(g),
        )

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    # -- batched geometry ----------------------------------------------------

    def points_batch(self, S: NDArray, T: NDArray) -> NDArray:
        """Ambient positions for chart coordinate arrays, shape (n, 3)."""
        return np.array([self.point(s, t) for s, t in zip(np.ravel(S), np.ravel(T))])

    def tangents_batch(self, S: NDArray, T: NDArray):
        """Chart tangent arrays (x_s, x_t), each of shape (n, 3)."""
        pairs = [self.chart_tangents(s, t) for s, t in zip(np.ravel(S), np.ravel(T))]
        return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])

    def frames_batch(self, S: NDArray, T: NDArray) -> Frame:
        """Frame with leading batch axis on every field; g is (n, 2, 2)."""
        x_s, x_t = self.tangents_batch(S, T)
        nv = np.cross(x_s, x_t)
        jac = np.linalg.norm(nv, axis=-1)
        g = np.empty(x_s.shape[:-1] + (2, 2))
        g[..., 0, 0] = np.einsum("ni,ni->n", x_s, x_s)
        g[..., 0, 1] = g[..., 1, 0] = np.einsum("ni,ni->n", x_s, x_t)
        g[..., 1, 1] = np.einsum("ni,ni->n", x_t, x_t)
        return Frame(
            x=self.points_batch(S, T),
            x_s=x_s,
            x_t=x_t,
            n=nv / jac[..., None],
            jac=jac,
            g=g,
            g_inv=np.linalg.inv(g),
        )

    # -- quadrature -------------------------------------------------------

    def quadrature(self, order: int):
        """Tensor Gauss rule; weights include the area element."""
        s_nodes, s_w = _gauss(order, *self.s_range)
        t_nodes, t_w = _gauss(order, *self.t_range)
        pts, wts = [], []
        for s, ws in zip(s_nodes, s_w):
            for t, wt in zip(t_nodes, t_w):
                x_s, x_t = self.chart_tangents(s, t)
                pts.append((s, t))
                wts.append(ws * wt * np.linalg.norm(np.cross(x_s, x_t)))
        return pts, np.array(wts)

    def integrate(self, fun, order: int) -> float:
        pts, wts = self.quadrature(order)
        return float(sum(w * fun(s, t) for (s, t), w in zip(pts, wts)))

    # -- edges -------------------------------------------------------------

    def edge_quadrature(self, side: str, order: int):
        """Gauss rule along one edge; returns [(s, t, w_arc)] with the
        arc-length element folded into the weights."""
        s0, s1 = self.s_range
        t0, t1 = self.t_range
        if side in ("smin", "smax"):
            fixed = s0 if side == "smin" else s1
            nodes, w = _gauss(order, t0, t1)
            out = []
            for t, wt in zip(nodes, w):
                _, x_t = self.chart_tangents(fixed, t)
                out.append((fixed, t, wt * np.linalg.norm(x_t)))
            return out
        if side in ("tmin", "tmax"):
            fixed = t0 if side == "tmin" else t1
            nodes, w = _gauss(order, s0, s1)
            out = []
            for s, ws in zip(nodes, w):
                x_s, _ = self.chart_tangents(s, fixed)
                out.append((s, fixed, ws * np.linalg.norm(x_s)))
            return out
        raise ValueError(f"unknown edge side {side!r}")

    def conormal(self, side: str, s: float, t: float) -> NDArray:
        """In-surface outward conormal at an edge point."""
        x_s, x_t = self.chart_tangents(s, t)
        if side == "smin":
            raw = -x_s
        elif side == "smax":
            raw = x_s
        elif side == "tmin":
            raw = -x_t
        else:
            raw = x_t
        n = self.normal(s, t)
        raw = raw - (raw @ n) * n
        # orthogonalize against the edge tangent (exact for orthogonal charts)
        tang = x_t if side in ("smin", "smax") else x_s
        tang = tang / np.linalg.norm(tang)
        raw = raw - (raw @ tang) * tang
        return raw / np.linalg.norm(raw)

    def edge_offset_point(self, side: str, s: float, t: float, eps: float,
                          inward: bool = True):
        """(s, t) displaced by geodesic distance eps from an edge point,
        inward (into the patch) or outward (across the edge)."""
        x_s, x_t = self.chart_tangents(s, t)
        sign = -1.0 if inward else 1.0
        if side == "smin":
            sign = -sign
        if side == "tmin":
            sign = -sign
        if side in ("smin", "smax"):
            return s + sign * eps / np.linalg.norm(x_s), t
        return s, t + sign * eps / np.linalg.norm(x_t)

    # -- chart finite differences ------------------------------------------

    def chart_step(self, axis: int, s: float, t: float) -> float:
        rng = self.s_range if axis == 0 else self.t_range
        h = 1e-3 * (rng[1] - rng[0])
        if axis == 0 and self.singular_smin:
            # keep the whole stencil away from the pole
            h = min(h, max((s - self.s_range[0]) / 3.0, 1e-10))
        return h

    def chart_partial(self, fun, s: float, t: float, axis: int):
        """d fun / d(chart coordinate) by a 4th-order stencil with one
        Richardson level.  fun maps (s, t) to an arbitrary ndarray."""
        h = self.chart_step(axis, s, t)

        def stencil(hh):
            acc = None
            for off, wgt in zip((-2.0, -1.0, 1.0, 2.0),
                                (1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0)):
                if axis == 0:
                    term = wgt * np.asarray(fun(s + off * hh, t), dtype=float)
                else:
                    term = wgt * np.asarray(fun(s, t + off * hh), dtype=float)
                acc = term if acc is None else acc + term
            return acc / hh

        return (16.0 * stencil(h / 2.0) - stencil(h)) / 15.0

    # -- intrinsic operators -------------------------------------------------

    def surface_scalar_gradient(self, fun, s: float, t: float) -> NDArray:
        """Surface gradient of a scalar chart field, as an ambient vector."""
        fr = self.frame(s, t)
        dq = np.array([self.chart_partial(fun, s, t, 0), self.chart_partial(fun, s, t, 1)])
        coef = fr.g_inv @ dq
        return coef[0] * fr.x_s + coef[1] * fr.x_t

    def surface_rowwise_divergence(self, fun, s: float, t: float) -> NDArray:
        """Row-wise surface divergence of a 3x3 chart field T:
        r_i = (grad_S T)_ijk P_kj = d^S_j T_ij."""
        fr = self.frame(s, t)
        dT = np.stack(
            [self.chart_partial(fun, s, t, 0), self.chart_partial(fun, s, t, 1)]
        )  # (2, 3, 3)
        tangents = np.stack([fr.x_s, fr.x_t])  # (2, 3)
        # sum_ab g^ab dT[a, i, j] tangents[b, j]
        return np.einsum("ab,aij,bj->i", fr.g_inv, dT, tangents)

    def surface_divergence_tangential(self, vfun, s: float, t: float) -> float:
        """div_S of the tangential projection of an ambient vector field.

        vfun maps an ambient point to a 3-vector; the projection onto the
        tangent plane happens here.  Uses (1/sqrt g) d_a (sqrt g w^a)."""

        def q(axis):
            def comp(ss, tt):
                fr = self.frame(ss, tt)
                w = vfun(fr.x)
                w = w - (w @ fr.n) * fr.n
                cov = np.array([w @ fr.x_s, w @ fr.x_t])
                return fr.jac * (fr.g_inv @ cov)[axis]

            return comp

        fr = self.frame(s, t)
        ds = self.chart_partial(q(0), s, t, 0)
        dt = self.chart_partial(q(1), s, t, 1)
        return float((ds + dt) / fr.jac)


class BoxFace(SurfacePatch):
    """Flat rectangular face, x(s, t) = origin + s e1 + t e2."""

    edge_sides = ("smin", "smax", "tmin", "tmax")

    def __init__(self, origin, e1, e2, extent_s: float, extent_t: float,
                 flip_normal: bool = False):
        self.origin = np.asarray(origin, dtype=float)
        self.e1 = np.asarray(e1, dtype=float) / np.linalg.norm(e1)
        self.e2 = np.asarray(e2, dtype=float) / np.linalg.norm(e2)
        if flip_normal:
            self.e1, self.e2 = self.e2, self.e1
        self.s_range = (0.0, float(extent_s))
        self.t_range = (0.0, float(extent_t))

    @classmethod
    def unit_cube_face(cls, which: str) -> "BoxFace":
        """Outward-oriented face of the unit cube, e.g. 'z+' or 'x-'."""
        axis = {"x": 0, "y": 1, "z": 2}[which[0]]
        sign = which[1]
        e = np.eye(3)
        a, b = (axis + 1) % 3, (axis + 2) % 3
        origin = np.zeros(3)
        if sign == "+":
            origin[axis] = 1.0
            return cls(origin, e[a], e[b], 1.0, 1.0)
        return cls(origin, e[b], e[a], 1.0, 1.0)

    def point(self, s, t):
        return self.origin + s * self.e1 + t * self.e2

    def chart_tangents(self, s, t):
        return self.e1.copy(), self.e2.copy()

    def points_batch(self, S, T):
        S, T = np.ravel(S), np.ravel(T)
        return self.origin + np.outer(S, self.e1) + np.outer(T, self.e2)

    def tangents_batch(self, S, T):
        n = np.ravel(S).shape[0]
        return np.tile(self.e1, (n, 1)), np.tile(self.e2, (n, 1))

    @property
    def diameter(self):
        return math.hypot(self.s_range[1], self.t_range[1])


class SphericalCap(SurfacePatch):
    """Spherical cap of opening angle theta_max about an axis.

    Chart coordinates are (theta, phi); phi is a periodic seam, the pole
    theta = 0 is a chart singularity, and the only edge is the rim
    theta = theta_max.  The normal points radially outward.
    """

    edge_sides = ("smax",)
    singular_smin = True

    def __init__(self, center=(0.0, 0.0, 0.0), radius: float = 1.0,
                 axis=(0.0, 0.0, 1.0), theta_max: float = math.pi / 2.0):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        e3 = np.asarray(axis, dtype=float)
        e3 = e3 / np.linalg.norm(e3)
        helper = np.array([1.0, 0.0, 0.0])
        if abs(helper @ e3) > 0.9:
            helper = np.array([0.0, 1.0, 0.0])
        e1 = helper - (helper @ e3) * e3
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(e3, e1)
        self.e1, self.e2, self.e3 = e1, e2, e3
        self.s_range = (0.0, float(theta_max))
        self.t_range = (0.0, 2.0 * math.pi)

    def point(self, s, t):
        r = self.radius
        return self.center + r * (
            math.sin(s) * (math.cos(t) * self.e1 + math.sin(t) * self.e2)
            + math.cos(s) * self.e3
        )

    def chart_tangents(self, s, t):
        r = self.radius
        x_s = r * (math.cos(s) * (math.cos(t) * self.e1 + math.sin(t) * self.e2)
                   - math.sin(s) * self.e3)
        x_t = r * math.sin(s) * (-math.sin(t) * self.e1 + math.cos(t) * self.e2)
        return x_s, x_t

    def normal(self, s, t):
        return (self.point(s, t) - self.center) / self.radius

    def points_batch(self, S, T):
        S, T = np.ravel(S), np.ravel(T)
        radial = (np.outer(np.sin(S) * np.cos(T), self.e1)
                  + np.outer(np.sin(S) * np.sin(T), self.e2)
                  + np.outer(np.cos(S), self.e3))
        return self.center + self.radius * radial

    def tangents_batch(self, S, T):
        S, T = np.ravel(S), np.ravel(T)
        x_s = self.radius * (np.outer(np.cos(S) * np.cos(T), self.e1)
                             + np.outer(np.cos(S) * np.sin(T), self.e2)
                             - np.outer(np.sin(S), self.e3))
        x_t = self.radius * (np.outer(-np.sin(S) * np.sin(T), self.e1)
                             + np.outer(np.sin(S) * np.cos(T), self.e2))
        return x_s, x_t

    @property
    def diameter(self):
        return 2.0 * self.radius * math.sin(min(self.s_range[1], math.pi / 2.0))


def surface_divergence_check(v, patch: SurfacePatch, order: int = 16):
    """Surface divergence theorem on a patch: the surface integral of
    div_S of the tangential part of v against the edge integral of the
    conormal component.  Returns (lhs, rhs, gap)."""
    lhs = patch.integrate(
        lambda s, t: patch.surface_divergence_tangential(v, s, t), order
    )
    rhs = 0.0
    for side in patch.edge_sides:
        for s, t, w in patch.edge_quadrature(side, order):
            nu = patch.conormal(side, s, t)
            rhs += w * float(np.asarray(v(patch.point(s, t))) @ nu)
    return lhs, rhs, abs(lhs - rhs)


def stokes_flux_check(field, patch: SurfacePatch, order: int = 16):
    """Stokes theorem on a patch: flux of curl u against the circulation
    of u along the edge with tangent tau = n x nu."""
    from .fields import curl_from_grad

    def flux_integrand(s, t):
        fr = patch.frame(s, t)
        return float(curl_from_grad(field.grad(fr.x)) @ fr.n)

    flux = patch.integrate(flux_integrand, order)
    circ = 0.0
    for side in patch.edge_sides:
        for s, t, w in patch.edge_quadrature(side, order):
            nu = patch.conormal(side, s, t)
            tau = np.cross(patch.normal(s, t), nu)
            circ += w * float(field.value(patch.point(s, t)) @ tau)
    return flux, circ, abs(flux - circ)
