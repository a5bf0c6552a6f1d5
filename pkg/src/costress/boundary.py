"""Traction boundary conditions, the boundary virtual-work decomposition
and the quantitative refutation of the skew-couple-stress postulate.

Three formulations are implemented:

* ``classical``  the historical 3+2 split: total force traction corrected
  by the surface curl of the normal-moment scalar, plus the tangential
  double-force traction.
* ``complete``   the corrected split with the extra tangential-gradient
  force term, the second-order normal-derivative traction and the 3 edge
  jump conditions.
* ``hd``         the skew-couple-stress variant: plain total force
  traction plus the tangential moment traction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .constitutive import (
    MaterialParams,
    couple_stress_batch,
    stresses,
    stresses_batch,
)
from .fields import DisplacementField, curl_from_grad
from .surfaces import SurfacePatch
from .tensors import EPS3, anti

__all__ = [
    "TractionSet",
    "WorkIdentityReport",
    "HdPostulateReport",
    "boundary_work_identity",
    "classical_tractions",
    "complete_tractions",
    "edge_jump",
    "hd_postulate_report",
    "hd_tractions",
]


@dataclass(frozen=True)
class TractionSet:
    """The independently prescribable traction quantities at a point."""

    t_force: NDArray            # 3 conditions
    g_double: NDArray           # 2 conditions, tangential by construction
    formulation: str
    pi_jump: NDArray | None = None  # 3 edge conditions, complete form only


def _surface_quantities(params, field, patch, s, t):
    fr = patch.frame(s, t)
    st = stresses(params, field, fr.x)
    m_n = st.m_tilde @ fr.n
    w = m_n - (m_n @ fr.n) * fr.n          # (id - n(x)n) m.n
    return fr, st, m_n, w


def _normal_moment_scalar(params, field, patch):
    """psi(s, t) = <m.n, n> as a chart field."""

    def psi(s, t):
        fr = patch.frame(s, t)
        m = stresses(params, field, fr.x).m_tilde
        return float(fr.n @ (m @ fr.n))

    return psi


def _anti_wP(params, field, patch):
    """Chart field T(s, t) = anti((id - n(x)n) m.n) (id - n(x)n)."""

    def T(s, t):
        fr = patch.frame(s, t)
        m_n = stresses(params, field, patch.point(s, t)).m_tilde @ fr.n
        w = m_n - (m_n @ fr.n) * fr.n
        P = np.eye(3) - np.outer(fr.n, fr.n)
        return anti(w) @ P

    return T


def classical_tractions(params: MaterialParams, field: DisplacementField,
                        patch: SurfacePatch, s: float, t: float) -> TractionSet:
    """Historical Mindlin-Tiersten 3+2 traction quantities at (s, t)."""
    fr, st, m_n, w = _surface_quantities(params, field, patch, s, t)
    grad_psi = patch.surface_scalar_gradient(_normal_moment_scalar(params, field, patch), s, t)
    t_force = st.sigma_total @ fr.n - 0.5 * np.cross(fr.n, grad_psi)
    return TractionSet(t_force=t_force, g_double=w, formulation="classical")


def complete_tractions(params: MaterialParams, field: DisplacementField,
                       patch: SurfacePatch, s: float, t: float) -> TractionSet:
    """Corrected 3+2 surface traction quantities at (s, t).

    The edge jump conditions live on the edge curve; see
    :func:`edge_jump`.
    """
    fr, st, m_n, w = _surface_quantities(params, field, patch, s, t)
    grad_psi = patch.surface_scalar_gradient(_normal_moment_scalar(params, field, patch), s, t)
    tang_grad = patch.surface_rowwise_divergence(_anti_wP(params, field, patch), s, t)
    t_force = st.sigma_total @ fr.n - 0.5 * np.cross(fr.n, grad_psi) - 0.5 * tang_grad
    g_double = anti(w) @ fr.n
    return TractionSet(t_force=t_force, g_double=g_double, formulation="complete")


def hd_tractions(params: MaterialParams, field: DisplacementField,
                 patch: SurfacePatch, s: float, t: float,
                 plus_variant: bool = False) -> TractionSet:
    """Skew-couple-stress format tractions at (s, t).

    ``plus_variant`` evaluates (sigma + tau).n instead of the total force
    stress (sigma - tau).n; this matches one printed display of the
    formulation but disagrees with every other occurrence of the total
    force stress, so it is off by default and flagged as suspect.
    """
    fr, st, m_n, w = _surface_quantities(params, field, patch, s, t)
    t_force = (st.sigma + st.tau_tilde if plus_variant else st.sigma_total) @ fr.n
    return TractionSet(t_force=t_force, g_double=w, formulation="hd")


def edge_jump(params: MaterialParams, field: DisplacementField,
              patch: SurfacePatch, side: str, s: float, t: float,
              eps_rel: float = 1e-4) -> NDArray:
    """Jump of anti((id - n(x)n) m.n) . nu across an edge point.

    Evaluated as one-sided limits at geodesic offsets eps and 2 eps on
    either side of the edge, each extrapolated linearly to the edge.  For
    fields smooth across the edge the jump vanishes.
    """
    nu = patch.conormal(side, s, t)

    def one_sided(inward: bool) -> NDArray:
        eps = eps_rel * patch.diameter

        def q(e):
            ss, tt = patch.edge_offset_point(side, s, t, e, inward=inward)
            fr = patch.frame(ss, tt)
            m_n = stresses(params, field, fr.x).m_tilde @ fr.n
            w = m_n - (m_n @ fr.n) * fr.n
            return anti(w) @ nu

        return 2.0 * q(eps) - q(2.0 * eps)

    return one_sided(True) - one_sided(False)


@dataclass(frozen=True)
class WorkIdentityReport:
    direct: float
    decomposed: float
    gap: float
    terms: dict


def _psi_T_batch(params, field, patch, S, T):
    """psi = <m.n, n> and anti((id - n(x)n) m.n)(id - n(x)n) at chart
    coordinate arrays, vectorized."""
    fb = patch.frames_batch(S, T)
    m = couple_stress_batch(params, field, fb.x)
    m_n = np.einsum("nij,nj->ni", m, fb.n)
    psi = np.einsum("ni,ni->n", m_n, fb.n)
    w = m_n - psi[:, None] * fb.n
    A = np.einsum("ijk,nk->nij", -EPS3, w)
    P = np.eye(3) - np.einsum("ni,nj->nij", fb.n, fb.n)
    return psi, A @ P


def _chart_derivatives(params, field, patch, S, T, axis):
    """d psi / d chart and d T / d chart at quadrature points, using the
    4th-order stencil with one Richardson level, all points batched."""
    n = S.shape[0]
    h = np.array([patch.chart_step(axis, s, t) for s, t in zip(S, T)])
    offsets = np.array([-2.0, -1.0, 1.0, 2.0])
    weights = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
    scales = np.array([1.0, 0.5])
    # chart coordinates of every stencil sample: (n, 2 scales, 4 offsets)
    delta = h[:, None, None] * scales[None, :, None] * offsets[None, None, :]
    Ss = np.broadcast_to(S[:, None, None], delta.shape).copy()
    Ts = np.broadcast_to(T[:, None, None], delta.shape).copy()
    if axis == 0:
        Ss += delta
    else:
        Ts += delta
    psi, Tm = _psi_T_batch(params, field, patch, Ss.ravel(), Ts.ravel())
    psi = psi.reshape(n, 2, 4)
    Tm = Tm.reshape(n, 2, 4, 3, 3)
    hh = h[:, None] * scales[None, :]
    d_psi = np.einsum("nso,o->ns", psi, weights) / hh
    d_T = np.einsum("nsoij,o->nsij", Tm, weights) / hh[..., None, None]
    rich = np.array([-1.0, 16.0]) / 15.0
    return np.einsum("ns,s->n", d_psi, rich), np.einsum("nsij,s->nij", d_T, rich)


def boundary_work_identity(params: MaterialParams, u: DisplacementField,
                           delta_u: DisplacementField, patch: SurfacePatch,
                           order: int = 16) -> WorkIdentityReport:
    """Check the boundary virtual-work decomposition on a patch.

    ``direct`` is the raw surface work of the total force traction and
    the moment traction against the virtual displacement; ``decomposed``
    re-expresses it through the complete traction split, the
    second-order normal-derivative traction and the two edge terms that
    the surface integrations by parts produce on a patch with boundary.
    """
    pts, wts = patch.quadrature(order)
    S = np.array([p[0] for p in pts])
    T = np.array([p[1] for p in pts])
    fb = patch.frames_batch(S, T)
    st = stresses_batch(params, u, fb.x)

    m_n = np.einsum("nij,nj->ni", st.m_tilde, fb.n)
    psi = np.einsum("ni,ni->n", m_n, fb.n)
    w = m_n - psi[:, None] * fb.n
    A = np.einsum("ijk,nk->nij", -EPS3, w)
    t_total = np.einsum("nij,nj->ni", st.sigma_total, fb.n)

    du = np.asarray(delta_u.value(fb.x), dtype=float)
    Gdu = np.asarray(delta_u.grad(fb.x), dtype=float)
    axl_skw = 0.5 * np.einsum("ijk,nkj->ni", EPS3, Gdu)

    direct = float(wts @ (-np.einsum("ni,ni->n", t_total, du)
                          - np.einsum("ni,ni->n", m_n, axl_skw)))

    dpsi_s, dT_s = _chart_derivatives(params, u, patch, S, T, 0)
    dpsi_t, dT_t = _chart_derivatives(params, u, patch, S, T, 1)
    dpsi = np.stack([dpsi_s, dpsi_t])          # (2, n)
    dT = np.stack([dT_s, dT_t])                # (2, n, 3, 3)
    tangents = np.stack([fb.x_s, fb.x_t])      # (2, n, 3)
    coef = np.einsum("nab,bn->an", fb.g_inv, dpsi)
    grad_psi = np.einsum("an,ani->ni", coef, tangents)
    tang_grad = np.einsum("nab,anij,bnj->ni", fb.g_inv, dT, tangents)

    t_force = float(wts @ (-np.einsum("ni,ni->n", t_total, du)))
    t_mt = float(wts @ (0.5 * np.einsum("ni,ni->n", np.cross(fb.n, grad_psi), du)))
    t_tang = float(wts @ (0.5 * np.einsum("ni,ni->n", tang_grad, du)))
    An = np.einsum("nij,nj->ni", A, fb.n)
    Gdu_n = np.einsum("nij,nj->ni", Gdu, fb.n)
    t_normal_deriv = float(wts @ (-0.5 * np.einsum("ni,ni->n", An, Gdu_n)))

    t_edge_conormal = 0.0
    t_edge_psi = 0.0
    for side in patch.edge_sides:
        for s, t, wq in patch.edge_quadrature(side, order):
            fr = patch.frame(s, t)
            st = stresses(params, u, fr.x)
            m_n = st.m_tilde @ fr.n
            w = m_n - (m_n @ fr.n) * fr.n
            nu = patch.conormal(side, s, t)
            tau = np.cross(fr.n, nu)
            du = delta_u.value(fr.x)
            t_edge_conormal += wq * (-0.5 * (anti(w) @ nu) @ du)
            t_edge_psi += wq * (-0.5 * (m_n @ fr.n) * (tau @ du))

    terms = {
        "force": t_force,
        "normal_moment_correction": t_mt,
        "tangential_gradient": t_tang,
        "normal_derivative": t_normal_deriv,
        "edge_conormal": t_edge_conormal,
        "edge_normal_moment": t_edge_psi,
    }
    decomposed = sum(terms.values())
    return WorkIdentityReport(
        direct=direct, decomposed=decomposed, gap=abs(direct - decomposed), terms=terms
    )


@dataclass(frozen=True)
class HdPostulateReport:
    """Quantities refuting the pure-force-traction postulate.

    ``sup_normal_moment`` is the sup of |<m.n, n>| over the quadrature
    points (machine zero for skew couple stress), while
    ``residual_work_norm`` is the L2 norm over the patch of the
    tangential-gradient force term that keeps performing work against
    the virtual displacement regardless.
    """

    sup_normal_moment: float
    residual_work_norm: float


def hd_postulate_report(params: MaterialParams, field: DisplacementField,
                        patch: SurfacePatch, order: int = 16) -> HdPostulateReport:
    pts, wts = patch.quadrature(order)
    S = np.array([p[0] for p in pts])
    T = np.array([p[1] for p in pts])
    fb = patch.frames_batch(S, T)
    m = couple_stress_batch(params, field, fb.x)
    m_n = np.einsum("nij,nj->ni", m, fb.n)
    sup_nm = float(np.max(np.abs(np.einsum("ni,ni->n", m_n, fb.n))))

    _, dT_s = _chart_derivatives(params, field, patch, S, T, 0)
    _, dT_t = _chart_derivatives(params, field, patch, S, T, 1)
    dT = np.stack([dT_s, dT_t])
    tangents = np.stack([fb.x_s, fb.x_t])
    r = np.einsum("nab,anij,bnj->ni", fb.g_inv, dT, tangents)
    sq = float(wts @ np.einsum("ni,ni->n", r, r))
    return HdPostulateReport(sup_normal_moment=sup_nm, residual_work_norm=float(np.sqrt(sq)))
