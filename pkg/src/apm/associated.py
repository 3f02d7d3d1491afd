"""The associated metric ``g~(x, y) = g(x, Py)`` and the tensors of ``nabla -> nabla~``.

Every quantity that has a closed form in terms of ``nabla P`` is also
computed straight from ``g~`` (its own Levi-Civita connection and curvature),
so the two can be compared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import PointFrame, chart_jets, frame_at
from .expr import BinOp, Num
from .geometry import (
    ConnectionAtPoint,
    CurvatureAtPoint,
    Jet,
    covariant_derivative,
    curvature_package,
    jeinsum,
    levi_civita,
)
from .structure import f_scale
from .tensor import CO, CONTRA, MetricAtPoint, TensorComponents, TensorError, cyclic_sum_3

DET_FLOOR = 1e-12


class AssociatedError(ValueError):
    pass


def associated_metric_exprs(spec):
    """Expression entries of ``g~_ij = sum_m g_im P^m_j``."""
    d = spec.dim
    rows = []
    for i in range(d):
        row = []
        for j in range(d):
            acc = None
            for m in range(d):
                term = BinOp("*", spec.metric[i][m], spec.structure[m][j])
                acc = term if acc is None else BinOp("+", acc, term)
            row.append(acc if acc is not None else Num(0.0))
        rows.append(tuple(row))
    return tuple(rows)


def associated_frame(spec, point=None) -> PointFrame:
    """Frame data of ``(M, P, g~)``, built from ``g~`` itself rather than from ``Phi``."""
    d = spec.dim
    z3, z4 = np.zeros((d, d, d)), np.zeros((d, d, d, d))
    if spec.backend == "lie_group":
        gt = spec.metric @ spec.structure
        gt = 0.5 * (gt + gt.T)
        metric = _pseudo_metric(gt)
        return PointFrame(
            d, metric, z3, z4, spec.structure.copy(), z3, z4, spec.structure_constants.copy(), z4, (), "lie_group"
        )
    point = np.asarray(point, dtype=float)
    (gt, dgt, d2gt), (P, dP, d2P) = chart_jets(associated_metric_exprs(spec), spec.structure, point)
    # products of exact jets; symmetrize round-off of the two summation orders
    gt = 0.5 * (gt + gt.T)
    dgt = 0.5 * (dgt + np.swapaxes(dgt, 1, 2))
    d2gt = 0.5 * (d2gt + np.swapaxes(d2gt, 2, 3))
    return PointFrame(d, _pseudo_metric(gt), dgt, d2gt, P, dP, d2P, z3, z4, tuple(point.tolist()), "chart")


def _pseudo_metric(gt) -> MetricAtPoint:
    try:
        return MetricAtPoint.from_matrix(gt, riemannian=False, det_floor=DET_FLOOR)
    except TensorError as exc:
        raise AssociatedError(f"associated metric degenerate: {exc}") from exc


def nabla_tilde_direct(spec, point=None) -> ConnectionAtPoint:
    return levi_civita(associated_frame(spec, point))


def phi_tensor(frame: PointFrame, conn: ConnectionAtPoint, curv: CurvatureAtPoint) -> TensorComponents:
    """``Phi(x,y,z) = g(nabla~_x y - nabla_x y, z)`` from ``F`` alone.

    The Koszul formula for ``g~`` gives
    ``Phi(x,y,z) = (F(x,y,Pz) + F(y,Pz,x) - F(Pz,x,y)) / 2``.
    """
    F, P = curv.F.data, frame.P
    phi = 0.5 * (
        np.einsum("xym,mz->xyz", F, P) + np.einsum("ymx,mz->xyz", F, P) - np.einsum("mz,mxy->xyz", P, F)
    )
    return TensorComponents.covariant(phi)


def phi_printed(frame: PointFrame, curv: CurvatureAtPoint) -> TensorComponents:
    """The variant ``(F(x,y,Pz) + F(y,Pz,x) - F(z,x,y)) / 2`` (last term without ``P``).

    Kept for comparison only: it does not equal ``g(nabla~ - nabla)`` unless
    ``F(Pz,x,y) = F(z,x,y)``.
    """
    F, P = curv.F.data, frame.P
    phi = 0.5 * (
        np.einsum("xym,mz->xyz", F, P) + np.einsum("ymx,mz->xyz", F, P) - np.einsum("zxy->xyz", F)
    )
    return TensorComponents.covariant(phi)


def f_tilde(frame_tilde: PointFrame, conn_tilde: ConnectionAtPoint) -> TensorComponents:
    """``F~(x,y,z) = g~((nabla~_x P) y, z)``."""
    return curvature_package(frame_tilde, conn_tilde).F


def t_jet(frame: PointFrame, DP: Jet) -> Jet:
    """``T(x,y) = -(nabla_x P) P y - (nabla_y P) P x`` with output slot last."""
    P = Jet(frame.P, frame.dP)
    one = jeinsum("ikm,mj->ijk", DP, P)
    swapped = Jet(np.swapaxes(one.val, 0, 1), np.swapaxes(one.der, 1, 2))
    return -(one + swapped)


def q_from_t(T: Jet, gamma: np.ndarray) -> np.ndarray:
    """``Q(x,y)z`` from ``T`` and the connection used to differentiate it; ``Q[x,y,z,k]``."""
    NT = covariant_derivative(T, gamma, (CO, CO, CONTRA))
    Tv = T.val
    return (
        NT
        - np.swapaxes(NT, 0, 1)
        + np.einsum("yzm,xmk->xyzk", Tv, Tv)
        - np.einsum("xzm,ymk->xyzk", Tv, Tv)
    )


def t_q_tensors(frame: PointFrame, conn: ConnectionAtPoint, curv: CurvatureAtPoint):
    T = t_jet(frame, curv.DP)
    if frame.backend == "lie_group":
        T = Jet(T.val, np.zeros_like(T.der))
    Q = q_from_t(T, conn.gamma)
    return TensorComponents(T.val, (CO, CO, CONTRA)), TensorComponents(Q, (CO, CO, CO, CONTRA))


def s_l_invariants(frame, conn, curv, tq):
    """Tensorial part ``T/2`` of ``S`` and ``L = R + Q/2`` (``L[x,y,z,k]``)."""
    T, Q = tq
    S = TensorComponents(0.5 * T.data, T.variance)
    L = TensorComponents(curv.R_up + 0.5 * Q.data, Q.variance)
    return S, L


def b_tensor(frame: PointFrame, curv: CurvatureAtPoint) -> TensorComponents:
    D, P, g = curv.DP_out, frame.P, frame.g
    Dsym = D + np.swapaxes(D, 0, 1)  # (nabla_a P) b + (nabla_b P) a
    # (nabla_x P) w + (nabla_{Pw} P) P x
    U = D + np.einsum("mw,mnk,nx->xwk", P, D, P)
    first = np.einsum("zyk,kl,xwl->xyzw", Dsym, g, U)
    second = np.einsum("xzk,kl,ywl->xyzw", Dsym, g, U)
    return TensorComponents.covariant(-first + second)


def r_tilde_formula(frame: PointFrame, curv: CurvatureAtPoint) -> np.ndarray:
    """Closed form of ``R~(x,y,z,w)`` for W3 manifolds, in terms of ``R``, ``nabla F`` and ``nabla P``."""
    R, NF, D, P, g = curv.R.data, curv.nablaF.data, curv.DP_out, frame.P, frame.g
    Dsym = D + np.swapaxes(D, 0, 1)
    # (nabla_x P) P w + (nabla_w P) P x
    V = np.einsum("xmk,mw->xwk", D, P) + np.einsum("wmk,mx->xwk", D, P)
    return (
        np.einsum("xyzm,mw->xyzw", R, P)
        - np.einsum("xwyz->xyzw", NF)
        + np.einsum("ywxz->xyzw", NF)
        + np.einsum("yzk,kl,xwl->xyzw", Dsym, g, V)
        - np.einsum("xzk,kl,ywl->xyzw", Dsym, g, V)
    )


def q_formula(frame: PointFrame, curv: CurvatureAtPoint) -> np.ndarray:
    """Right-hand side of the expansion of ``g(Q(x,y)z, Pw)``."""
    R, P = curv.R.data, frame.P
    return r_tilde_formula(frame, curv) - np.einsum("xyzm,mw->xyzw", R, P)


@dataclass
class AssociatedAtPoint:
    g_tilde: TensorComponents
    signature: tuple[int, int]
    phi: TensorComponents
    F_tilde: TensorComponents
    T: TensorComponents
    Q: TensorComponents
    R_tilde_direct: TensorComponents
    R_tilde_formula: TensorComponents
    S: TensorComponents
    L: TensorComponents
    B: TensorComponents
    gamma_tilde: np.ndarray
    R_tilde_up: np.ndarray
    T_tilde: TensorComponents
    Q_tilde: TensorComponents
    L_tilde: TensorComponents
    nabla_tilde_P: np.ndarray  # [x, y, k]: component k of (nabla~_x P) y
    residual_W3_tilde: float
    residual_W0_tilde: float

    @property
    def r_tilde_residual(self) -> float:
        return float(np.max(np.abs(self.R_tilde_direct.data - self.R_tilde_formula.data)))


def associated_at_point(spec, point, frame, conn, curv) -> AssociatedAtPoint:
    fr_t = associated_frame(spec, point)
    conn_t = levi_civita(fr_t)
    curv_t = curvature_package(fr_t, conn_t)
    T, Q = t_q_tensors(frame, conn, curv)
    S, L = s_l_invariants(frame, conn, curv, (T, Q))
    T_t = t_jet(fr_t, curv_t.DP)
    if fr_t.backend == "lie_group":
        T_t = Jet(T_t.val, np.zeros_like(T_t.der))
    Q_t = q_from_t(T_t, conn_t.gamma)
    L_t = curv_t.R_up + 0.5 * Q_t
    Ft = curv_t.F
    s = max(Ft.max_abs(), f_scale(fr_t, conn_t), 1e-30)
    s0 = f_scale(fr_t, conn_t)
    return AssociatedAtPoint(
        g_tilde=TensorComponents.covariant(fr_t.g),
        signature=fr_t.metric.signature,
        phi=phi_tensor(frame, conn, curv),
        F_tilde=Ft,
        T=T,
        Q=Q,
        R_tilde_direct=curv_t.R,
        R_tilde_formula=TensorComponents.covariant(r_tilde_formula(frame, curv)),
        S=S,
        L=L,
        B=b_tensor(frame, curv),
        gamma_tilde=conn_t.gamma,
        R_tilde_up=curv_t.R_up,
        T_tilde=TensorComponents(T_t.val, (CO, CO, CONTRA)),
        Q_tilde=TensorComponents(Q_t, (CO, CO, CO, CONTRA)),
        L_tilde=TensorComponents(L_t, (CO, CO, CO, CONTRA)),
        nabla_tilde_P=curv_t.DP_out,
        residual_W3_tilde=cyclic_sum_3(Ft, (0, 1, 2)).max_abs() / s,
        residual_W0_tilde=(Ft.max_abs() / s0) if Ft.max_abs() > 0 else 0.0,
    )


def r_tilde_two_paths(spec, point=None):
    """``(R~ direct, R~ closed form, max componentwise difference)`` at one point."""
    frame = frame_at(spec, point)
    conn = levi_civita(frame)
    curv = curvature_package(frame, conn)
    fr_t = associated_frame(spec, point)
    direct = curvature_package(fr_t, levi_civita(fr_t)).R
    formula = TensorComponents.covariant(r_tilde_formula(frame, curv))
    return direct, formula, float(np.max(np.abs(direct.data - formula.data)))
