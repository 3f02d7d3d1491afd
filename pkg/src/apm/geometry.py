"""Levi-Civita connection, curvature and the structure tensors at a point.

Index layout (all arrays, frame components):

* ``gamma[i, j, k]``  component ``k`` of ``nabla_{e_i} e_j``
* ``DP[a, k, j]``     component ``k`` of ``(nabla_{e_a} P) e_j`` (matrix form)
* ``F[a, j, k]``      ``g((nabla_{e_a} P) e_j, e_k)``
* ``R_up[i, j, l, k]`` component ``k`` of ``R(e_i, e_j) e_l``
* ``R[i, j, l, m]``   ``g(R(e_i, e_j) e_l, e_m)``
* ``nablaF[x, a, j, k]`` ``(nabla_x F)(e_a, e_j, e_k)``

with ``R(x, y) = nabla_x nabla_y - nabla_y nabla_x - nabla_[x,y]``.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from .backend import PointFrame
from .tensor import CO, CONTRA, MetricAtPoint, TensorComponents, contract

EPS_PLANE = 1e-10


class DegeneratePlaneError(ValueError):
    def __init__(self, message: str, argument: str):
        self.argument = argument
        super().__init__(message)


# --------------------------------------------------------------------------
# first-order jets of component arrays
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Jet:
    """Component array with its frame derivatives; ``der[a] = e_a(val)``."""

    val: np.ndarray
    der: np.ndarray

    def __add__(self, other):
        return Jet(self.val + other.val, self.der + other.der)

    def __sub__(self, other):
        return Jet(self.val - other.val, self.der - other.der)

    def __neg__(self):
        return Jet(-self.val, -self.der)

    def __mul__(self, s: float):
        return Jet(s * self.val, s * self.der)

    __rmul__ = __mul__


def jeinsum(subscripts: str, *operands):
    """``np.einsum`` with the product rule applied to any :class:`Jet` operands."""
    vals = [op.val if isinstance(op, Jet) else op for op in operands]
    value = np.einsum(subscripts, *vals)
    if not any(isinstance(op, Jet) for op in operands):
        return value
    lhs, out = subscripts.split("->")
    terms = lhs.split(",")
    free = next(c for c in string.ascii_letters if c not in subscripts)
    der = None
    for n, op in enumerate(operands):
        if not isinstance(op, Jet):
            continue
        sub = ",".join(free + t if m == n else t for m, t in enumerate(terms))
        args = [op.der if m == n else v for m, v in enumerate(vals)]
        part = np.einsum(f"{sub}->{free}{out}", *args)
        der = part if der is None else der + part
    return Jet(value, der)


_SLOTS = "bcdefhi"


def _connection_terms(gamma, X, variance):
    """Sum over slots of the ``Gamma`` action on ``X``; derivative slot first."""
    r = len(variance)
    idx = _SLOTS[:r]
    total = None
    for p, v in enumerate(variance):
        src = idx[:p] + "m" + idx[p + 1 :]
        if v == CO:
            term = -jeinsum(f"a{idx[p]}m,{src}->a{idx}", gamma, X)
        else:
            term = jeinsum(f"am{idx[p]},{src}->a{idx}", gamma, X)
        total = term if total is None else total + term
    return total


def covariant_derivative(X: Jet, gamma: np.ndarray, variance) -> np.ndarray:
    """``(nabla_a X)`` with the derivative slot first."""
    return X.der + _connection_terms(gamma, X.val, variance)


def covariant_derivative_jet(X: Jet, dX: Jet, gamma: Jet, variance) -> Jet:
    """``nabla X`` together with its own frame derivatives.

    ``dX`` is the jet of ``X.der`` (so ``dX.der`` holds second frame derivatives).
    """
    return dX + _connection_terms(gamma, X, variance)


# --------------------------------------------------------------------------
# connection
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ConnectionAtPoint:
    """``gamma[i, j, k]`` = component ``k`` of ``nabla_{e_i} e_j`` and its frame derivatives."""

    gamma: np.ndarray
    dgamma: np.ndarray

    @property
    def jet(self) -> Jet:
        return Jet(self.gamma, self.dgamma)


def _metric_jet(frame: PointFrame) -> tuple[Jet, Jet, Jet]:
    ginv = frame.g_inv
    g = Jet(frame.g, frame.dg)
    dg = Jet(frame.dg, frame.d2g)
    ginv_jet = Jet(ginv, -np.einsum("im,amn,nj->aij", ginv, frame.dg, ginv))
    return g, dg, ginv_jet


def levi_civita(frame: PointFrame) -> ConnectionAtPoint:
    """Koszul formula in a general frame (coordinate brackets vanish, Lie-frame metric derivatives vanish)."""
    g, dg, ginv = _metric_jet(frame)
    # Cl[a, b, k] = g([e_a, e_b], e_k)
    Cl = jeinsum("mab,mk->abk", frame.bracket, g)
    low = 0.5 * (
        dg
        + Jet(np.swapaxes(dg.val, 0, 1), np.swapaxes(dg.der, 1, 2))
        - Jet(np.transpose(dg.val, (1, 2, 0)), np.transpose(dg.der, (0, 2, 3, 1)))
        + Cl
        - Jet(np.transpose(Cl.val, (2, 0, 1)), np.transpose(Cl.der, (0, 3, 1, 2)))
        + Jet(np.transpose(Cl.val, (1, 2, 0)), np.transpose(Cl.der, (0, 2, 3, 1)))
    )
    gamma = jeinsum("ijm,mk->ijk", low, ginv)
    if frame.backend == "lie_group":
        gamma = Jet(gamma.val, np.zeros_like(gamma.der))
    return ConnectionAtPoint(gamma.val, gamma.der)


def metric_compatibility_residual(frame: PointFrame, conn: ConnectionAtPoint) -> float:
    nabla_g = covariant_derivative(Jet(frame.g, frame.dg), conn.gamma, (CO, CO))
    return float(np.max(np.abs(nabla_g)))


def torsion_residual(frame: PointFrame, conn: ConnectionAtPoint) -> float:
    # nabla_i e_j - nabla_j e_i - [e_i, e_j]
    tors = conn.gamma - np.swapaxes(conn.gamma, 0, 1) - np.transpose(frame.bracket, (1, 2, 0))
    return float(np.max(np.abs(tors)))


# --------------------------------------------------------------------------
# curvature package
# --------------------------------------------------------------------------


def riemann_up(frame: PointFrame, conn: ConnectionAtPoint) -> np.ndarray:
    G, dG, C = conn.gamma, conn.dgamma, frame.bracket
    R = (
        dG
        - np.swapaxes(dG, 0, 1)
        + np.einsum("jlm,imk->ijlk", G, G)
        - np.einsum("ilm,jmk->ijlk", G, G)
        - np.einsum("nij,nlk->ijlk", C, G)
    )
    return R


def nabla_P_jet(frame: PointFrame, conn: ConnectionAtPoint) -> Jet:
    """Jet of ``DP[a, k, j]``, matrix form of ``nabla_{e_a} P``."""
    P = Jet(frame.P, frame.dP)
    dP = Jet(frame.dP, frame.d2P)
    return covariant_derivative_jet(P, dP, conn.jet, (CONTRA, CO))


@dataclass(frozen=True)
class CurvatureAtPoint:
    R: TensorComponents
    rho: TensorComponents
    tau: float
    rho_star: TensorComponents
    tau_star: float
    tau_star_star: float
    F: TensorComponents
    nablaF: TensorComponents
    theta: TensorComponents
    norm_nabla_P: float
    A: TensorComponents
    R_up: np.ndarray
    DP: Jet
    F_jet: Jet

    @property
    def DP_out(self) -> np.ndarray:
        """``DP_out[a, j, k]``: component ``k`` of ``(nabla_{e_a} P) e_j``."""
        return np.swapaxes(self.DP.val, 1, 2)


def curvature_package(frame: PointFrame, conn: ConnectionAtPoint) -> CurvatureAtPoint:
    m = frame.metric
    P = frame.P
    R_up = riemann_up(frame, conn)
    R = np.einsum("ijlk,km->ijlm", R_up, m.g)
    Rt = TensorComponents.covariant(R)
    rho = contract(Rt, 0, 3, m)
    tau = float(contract(rho, 0, 1, m).data)
    # R(e_i, y, z, P e_j)
    R_Pw = TensorComponents.covariant(np.einsum("iyzm,mj->iyzj", R, P))
    rho_star = contract(R_Pw, 0, 3, m)
    tau_star = float(contract(rho_star, 0, 1, m).data)
    # R(e_i, e_k, P e_l, P e_j)
    R_PP = TensorComponents.covariant(np.einsum("ikpq,pl,qj->iklj", R, P, P))
    tau_ss = float(contract(contract(R_PP, 1, 2, m), 0, 1, m).data)

    DP = nabla_P_jet(frame, conn)
    F_jet = jeinsum("amj,mk->ajk", DP, Jet(m.g, frame.dg))
    if frame.backend == "lie_group":
        F_jet = Jet(F_jet.val, np.zeros_like(F_jet.der))
    F = F_jet.val
    nablaF = covariant_derivative(F_jet, conn.gamma, (CO, CO, CO))
    theta = contract(TensorComponents.covariant(F), 0, 1, m)
    gi = m.g_inv
    norm = float(np.einsum("ikm,jln,ij,kl,mn->", F, F, gi, gi, gi))
    DPo = np.swapaxes(DP.val, 1, 2)
    # g((nabla_x P) z, (nabla_y P) w)
    G2 = np.einsum("xzl,ywl->xyzw", F, DPo)
    A = -G2 - np.swapaxes(G2, 0, 1)
    return CurvatureAtPoint(
        R=Rt,
        rho=rho,
        tau=tau,
        rho_star=rho_star,
        tau_star=tau_star,
        tau_star_star=tau_ss,
        F=TensorComponents.covariant(F),
        nablaF=TensorComponents.covariant(nablaF),
        theta=theta,
        norm_nabla_P=norm,
        A=TensorComponents.covariant(A),
        R_up=R_up,
        DP=DP,
        F_jet=F_jet,
    )


def ricci_identity_residual(frame: PointFrame, curv: CurvatureAtPoint) -> float:
    """Max component of ``(nabla_x F)(y,z,w) - (nabla_y F)(x,z,w) - R(x,y,Pz,w) + R(x,y,z,Pw)``."""
    NF, R, P = curv.nablaF.data, curv.R.data, frame.P
    lhs = NF - np.swapaxes(NF, 0, 1)
    rhs = np.einsum("xymw,mz->xyzw", R, P) - np.einsum("xyzm,mw->xyzw", R, P)
    return float(np.max(np.abs(lhs - rhs)))


def ricci_identity_check(frame: PointFrame, conn: ConnectionAtPoint) -> float:
    return ricci_identity_residual(frame, curvature_package(frame, conn))


# --------------------------------------------------------------------------
# sectional and invariant bisectional curvature
# --------------------------------------------------------------------------


def _g(m: MetricAtPoint, u, v) -> float:
    return float(np.asarray(u) @ m.g @ np.asarray(v))


def _R(curv: CurvatureAtPoint, x, y, z, w) -> float:
    return float(np.einsum("ijkl,i,j,k,l->", curv.R.data, x, y, z, w))


def sectional(frame: PointFrame, curv: CurvatureAtPoint, x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    m = frame.metric
    den = _g(m, x, x) * _g(m, y, y) - _g(m, x, y) ** 2
    if den <= EPS_PLANE:
        raise DegeneratePlaneError(f"x and y do not span a plane (Gram determinant {den:.3e})", "x,y")
    return _R(curv, x, y, y, x) / den


def bisectional(frame: PointFrame, curv: CurvatureAtPoint, x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    m, P = frame.metric, frame.P
    Px, Py = P @ x, P @ y
    dens = []
    for name, v, Pv in (("x", x, Px), ("y", y, Py)):
        den = _g(m, v, v) ** 2 - _g(m, v, Pv) ** 2
        if den <= EPS_PLANE:
            raise DegeneratePlaneError(
                f"{name} is (numerically) an eigenvector of P: g(v,v)^2 - g(v,Pv)^2 = {den:.3e}", name
            )
        dens.append(den)
    return _R(curv, x, Px, y, Py) / (np.sqrt(dens[0]) * np.sqrt(dens[1]))


def random_vector(rng: np.random.Generator, d: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, d)


def random_noneigenvector(rng: np.random.Generator, frame: PointFrame, tries: int = 100) -> np.ndarray:
    m, P = frame.metric, frame.P
    for _ in range(tries):
        v = random_vector(rng, frame.dim)
        if _g(m, v, v) ** 2 - _g(m, v, P @ v) ** 2 > EPS_PLANE:
            return v
    raise DegeneratePlaneError("no noneigenvector found in 100 draws", "x")


def random_plane(rng: np.random.Generator, frame: PointFrame, tries: int = 100):
    m = frame.metric
    for _ in range(tries):
        x, y = random_vector(rng, frame.dim), random_vector(rng, frame.dim)
        if _g(m, x, x) * _g(m, y, y) - _g(m, x, y) ** 2 > EPS_PLANE:
            return x, y
    raise DegeneratePlaneError("no nondegenerate plane found in 100 draws", "x,y")
