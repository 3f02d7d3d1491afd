"""Registered identity checks, each evaluated at sampled points and vector tuples.

Every check has a hypothesis (a predicate on the classification and on the
computed tensors) and a body (a residual). A check whose hypothesis fails is
``vacuous``; it is never reported as ``pass``.

Identities are written against :class:`Probe`, which evaluates the
multilinear objects on batches of vectors. Each identity is checked on every
tuple of frame vectors plus a set of random tuples.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .associated import AssociatedAtPoint, associated_at_point, phi_printed, q_formula
from .backend import frame_at, sample_points
from .geometry import (
    DegeneratePlaneError,
    bisectional,
    curvature_package,
    levi_civita,
    random_noneigenvector,
    sectional,
)
from .structure import ClassificationReport, classify_points, f_scale, point_residuals

PASS, FAIL, VACUOUS = "pass", "fail", "vacuous"


def rel_residual(lhs, rhs) -> float:
    """``max|lhs - rhs| / max(1, max|lhs|, max|rhs|)``."""
    lhs, rhs = np.asarray(lhs, float), np.asarray(rhs, float)
    diff = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
    scale = max(1.0, float(np.max(np.abs(lhs))) if lhs.size else 0.0, float(np.max(np.abs(rhs))) if rhs.size else 0.0)
    return diff / scale


class Probe:
    """Batched evaluation of the tensors at one point on vector arrays of shape ``(n, d)``."""

    def __init__(self, frame, curv):
        self.d = frame.dim
        self.Pm = frame.P
        self.G = frame.g
        self.Ginv = frame.g_inv
        self.DPm = curv.DP.val
        self.Rt = curv.R.data
        self.Ft = curv.F.data
        self.NFt = curv.nablaF.data

    def P(self, x):
        return x @ self.Pm.T

    def g(self, u, v):
        return np.einsum("ni,ij,nj->n", u, self.G, v)

    def D(self, x, y):
        """``(nabla_x P) y``."""
        return np.einsum("na,akj,nj->nk", x, self.DPm, y)

    def R(self, x, y, z, w):
        return np.einsum("ijkl,ni,nj,nk,nl->n", self.Rt, x, y, z, w)

    def F(self, x, y, z):
        return np.einsum("ijk,ni,nj,nk->n", self.Ft, x, y, z)

    def NF(self, x, y, z, w):
        return np.einsum("ijkl,ni,nj,nk,nl->n", self.NFt, x, y, z, w)

    def trace(self, fn: Callable, n: int):
        """``g^{ij} fn(e_i, e_j)`` for a batch of size ``n``."""
        eye = np.eye(self.d)
        out = np.zeros(n)
        for i in range(self.d):
            for j in range(self.d):
                if self.Ginv[i, j] == 0.0:
                    continue
                ei = np.broadcast_to(eye[i], (n, self.d))
                ej = np.broadcast_to(eye[j], (n, self.d))
                out = out + self.Ginv[i, j] * fn(ei, ej)
        return out


def tuples(d: int, rank: int, rng: np.random.Generator, n_random: int):
    """All frame-vector tuples followed by ``n_random`` random ones; a list of ``(n, d)`` arrays."""
    eye = np.eye(d)
    idx = np.array(list(itertools.product(range(d), repeat=rank)))
    basis = [eye[idx[:, k]] for k in range(rank)]
    rand = [rng.uniform(-1.0, 1.0, (n_random, d)) for _ in range(rank)]
    return [np.vstack([b, r]) for b, r in zip(basis, rand)]


def cyc3(fn, x, y, z, *rest):
    return fn(x, y, z, *rest) + fn(y, z, x, *rest) + fn(z, x, y, *rest)


# --------------------------------------------------------------------------
# per-point context
# --------------------------------------------------------------------------


@dataclass
class PointContext:
    index: int
    point: object
    frame: object
    conn: object
    curv: object
    residuals: object
    probe: Probe
    assoc: AssociatedAtPoint | None
    assoc_error: str | None
    rng_seed: np.random.SeedSequence

    def rng(self, check_index: int) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self.rng_seed.entropy, spawn_key=self.rng_seed.spawn_key + (check_index,))
        )

    @property
    def curvature_scale(self) -> float:
        return float(np.max(np.abs(self.curv.R.data)))


def _point_context(spec, index, point, seed) -> PointContext:
    frame = frame_at(spec, point)
    conn = levi_civita(frame)
    curv = curvature_package(frame, conn)
    assoc, err = None, None
    try:
        assoc = associated_at_point(spec, point, frame, conn, curv)
    except Exception as exc:  # reported per check, never aborts the suite
        err = f"{type(exc).__name__}: {exc}"
    return PointContext(
        index=index,
        point=point,
        frame=frame,
        conn=conn,
        curv=curv,
        residuals=point_residuals(frame, conn, curv),
        probe=Probe(frame, curv),
        assoc=assoc,
        assoc_error=err,
        rng_seed=np.random.SeedSequence(seed, spawn_key=(1, index)),
    )


@dataclass
class SuiteContext:
    spec: object
    points: list[PointContext]
    classification: ClassificationReport
    tol_num: float
    tol_body: float
    tol_class: float
    n_tuples: int
    seed: int

    @property
    def w3(self) -> bool:
        return self.classification.verdicts["W3"]

    def pointwise(self, fn) -> tuple[float, dict]:
        worst, details = 0.0, {}
        for pc in self.points:
            r, extra = fn(pc)
            if r > worst or not details:
                worst = max(worst, r)
                details = extra
        return worst, details


# --------------------------------------------------------------------------
# check bodies
# --------------------------------------------------------------------------


def _tensor_ratio(t: np.ndarray, scale: float) -> float:
    m = float(np.max(np.abs(t)))
    return 0.0 if m == 0.0 else m / max(scale, 1e-30)


def body_f_props(ctx, pc):
    p = pc.probe
    x, y, z = tuples(p.d, 3, pc.rng(1), ctx.n_tuples)
    F = p.F
    parts = {
        "F(x,y,z)=F(x,z,y)": rel_residual(F(x, y, z), F(x, z, y)),
        "F(x,y,z)=-F(x,Py,Pz)": rel_residual(F(x, y, z), -F(x, p.P(y), p.P(z))),
        "F(x,y,Pz)=-F(x,Py,z)": rel_residual(F(x, y, p.P(z)), -F(x, p.P(y), z)),
    }
    return max(parts.values()), parts


def body_eq8(ctx, pc):
    p = pc.probe
    x, y, z, w = tuples(p.d, 4, pc.rng(2), ctx.n_tuples)
    lhs = p.NF(x, y, z, p.P(w)) + p.NF(x, y, p.P(z), w)
    rhs = -p.g(p.D(x, z), p.D(y, w)) - p.g(p.D(y, z), p.D(x, w))
    direct = rel_residual(lhs, rhs)
    # the stored A tensor is a separate code path
    A = np.einsum("ijkl,ni,nj,nk,nl->n", pc.curv.A.data, x, y, z, w)
    return max(direct, rel_residual(lhs, A)), {"vector form": direct, "A tensor": rel_residual(lhs, A)}


def body_eq13(ctx, pc):
    p = pc.probe
    x, y, z, w = tuples(p.d, 4, pc.rng(3), ctx.n_tuples)
    lhs = p.NF(x, y, z, w) - p.NF(y, x, z, w)
    rhs = p.R(x, y, p.P(z), w) - p.R(x, y, z, p.P(w))
    r = rel_residual(lhs, rhs)
    return r, {"ricci identity": r}


def body_eq11_12(ctx, pc):
    p = pc.probe
    x, y, z, w = tuples(p.d, 4, pc.rng(4), ctx.n_tuples)
    nf_P = lambda y, z, w, x: p.NF(x, p.P(y), z, w)  # noqa: E731
    rhs_11 = lambda y, z, w, x: p.g(p.D(x, y), p.D(z, w) + p.D(w, z))  # noqa: E731
    nf = lambda y, z, w, x: p.NF(x, y, z, w)  # noqa: E731
    r11 = rel_residual(cyc3(nf_P, y, z, w, x), cyc3(rhs_11, y, z, w, x))
    r12 = rel_residual(cyc3(nf, y, z, w, x), 0.0 * x[:, 0])
    return max(r11, r12), {"derivative of twisted cyclic sum": r11, "derivative of cyclic sum": r12}


def _e17(p, x, y, z, w):
    P = p.P
    return (
        p.R(x, P(y), P(z), w)
        - p.R(x, P(y), z, P(w))
        + p.R(P(x), y, z, P(w))
        - p.R(P(x), y, P(z), w)
    )


def _sym_pair(p, x, y, z, w):
    return p.g(p.D(x, y) + p.D(y, x), p.D(z, w) + p.D(w, z))


def body_eq15(ctx, pc):
    p = pc.probe
    x, y, z, w = tuples(p.d, 4, pc.rng(5), ctx.n_tuples)
    lhs = cyc3(lambda a, b, c, w: _e17(p, a, b, c, w), x, y, z, w)
    rhs = cyc3(lambda a, b, c, w: _sym_pair(p, a, b, c, w), x, y, z, w)
    r = rel_residual(lhs, rhs)
    return r, {"curvature identity": r}


def _bilinear(t, y, z):
    return np.einsum("ij,ni,nj->n", t, y, z)


def body_cor22_rho(ctx, pc):
    p = pc.probe
    y, z = tuples(p.d, 2, pc.rng(6), ctx.n_tuples)
    rho, rs = pc.curv.rho.data, pc.curv.rho_star.data
    lhs = _bilinear(rho, y, z) + _bilinear(rho, p.P(y), p.P(z)) - _bilinear(rs, p.P(y), z) - _bilinear(rs, y, p.P(z))
    rhs = p.trace(lambda ei, ej: p.g(p.D(ei, y) + p.D(y, ei), p.D(z, ej) + p.D(ej, z)), len(y))
    r = rel_residual(lhs, rhs)
    return r, {"ricci trace identity": r}


def _double_trace_nP(p):
    """``g^{ij} g^{kl} g((nabla_{e_i} P) e_k, (nabla_{e_l} P) e_j)``."""
    return float(np.einsum("ij,kl,ipk,pq,lqj->", p.Ginv, p.Ginv, p.DPm, p.G, p.DPm))


def body_cor22_nP(ctx, pc):
    lhs = pc.curv.norm_nabla_P
    rhs = -2.0 * _double_trace_nP(pc.probe)
    r = rel_residual(lhs, rhs)
    return r, {"norm": lhs, "-2 traced form": rhs}


def body_cor22_nP2(ctx, pc):
    c = pc.curv
    rhs = 2.0 * (c.tau - c.tau_star_star)
    r = rel_residual(c.norm_nabla_P, rhs)
    return r, {"norm": c.norm_nabla_P, "2(tau - tau**)": rhs}


def kaehler_ratio(pc) -> float:
    R, P = pc.curv.R.data, pc.frame.P
    RPP = np.einsum("xyab,az,bw->xyzw", R, P, P)
    return _tensor_ratio(RPP - R, pc.curvature_scale)


def body_rem21(ctx, pc):
    c = pc.curv
    r1 = rel_residual(c.tau_star_star, c.tau)
    r2 = rel_residual(c.norm_nabla_P, 0.0)
    return max(r1, r2), {"tau** = tau": r1, "norm = 0": r2}


def h_reparameterization_residuals(frame, curv, rng, n: int) -> dict[str, float]:
    """Residuals of the plane-dependence claims for ``h`` over ``n`` random reparameterizations.

    ``z = l1 x + m1 Px`` and ``w = l2 y + m2 Py`` scale ``R(z,Pz,w,Pw)`` by
    ``(l1^2 - m1^2)(l2^2 - m2^2)`` and the denominator by its absolute value,
    so ``h(z,w)`` equals ``h(x,y)`` only up to that sign. Likewise
    ``R(x,Px,x,Px) = -R(x,Px,Px,x)`` makes ``h(x,x) = -k(x,Px)``. Both the
    unsigned claims and the sign-tracked forms are measured.
    """
    P = frame.P
    out = dict.fromkeys(
        ("h(z,w) = h(x,y)", "h(x,x) = k(x,Px)", "h(z,w) = sign * h(x,y)", "h(x,x) = -k(x,Px)"), 0.0
    )
    g = frame.g

    def conditioned(v):
        # 1 - (g(v,Pv)/g(v,v))^2 away from 0: v not close to an eigenvector of P
        gv, gpv = v @ g @ v, v @ g @ (P @ v)
        return 1.0 - (gpv / gv) ** 2 >= 0.05

    done = 0
    while done < n:
        x = random_noneigenvector(rng, frame)
        y = random_noneigenvector(rng, frame)
        l1, m1, l2, m2 = rng.uniform(-1.0, 1.0, 4)
        if min(abs(l1**2 - m1**2), abs(l2**2 - m2**2)) < 0.05 or not (conditioned(x) and conditioned(y)):
            continue
        z = l1 * x + m1 * (P @ x)
        w = l2 * y + m2 * (P @ y)
        try:
            h_zw = bisectional(frame, curv, z, w)
        except DegeneratePlaneError:
            continue
        done += 1
        h_xy = bisectional(frame, curv, x, y)
        sign = float(np.sign((l1**2 - m1**2) * (l2**2 - m2**2)))
        hxx = bisectional(frame, curv, x, x)
        kx = sectional(frame, curv, x, P @ x)
        upd = {
            "h(z,w) = h(x,y)": abs(h_zw - h_xy) / max(1.0, abs(h_xy)),
            "h(z,w) = sign * h(x,y)": abs(h_zw - sign * h_xy) / max(1.0, abs(h_xy)),
            "h(x,x) = k(x,Px)": abs(hxx - kx) / max(1.0, abs(kx)),
            "h(x,x) = -k(x,Px)": abs(hxx + kx) / max(1.0, abs(kx)),
        }
        for k, v in upd.items():
            out[k] = max(out[k], v)
    return out


def body_thm32(ctx, pc):
    det = h_reparameterization_residuals(pc.frame, pc.curv, pc.rng(10), max(ctx.n_tuples, 20))
    worst = max(det["h(z,w) = h(x,y)"], det["h(x,x) = k(x,Px)"])
    return worst, det


def _h_and_e17_ratios(ctx, pc):
    p = pc.probe
    x, y, z, w = tuples(p.d, 4, pc.rng(11), ctx.n_tuples)
    scale = pc.curvature_scale
    numerator = p.R(x, p.P(x), y, p.P(y))
    e17 = _e17(p, x, y, z, w)
    return _tensor_ratio(numerator, scale), _tensor_ratio(e17, scale)


def body_cor34(ctx, pc):
    p = pc.probe
    x, y, z, w = tuples(p.d, 4, pc.rng(12), ctx.n_tuples)
    ri = rel_residual(cyc3(lambda a, b, c, w: _sym_pair(p, a, b, c, w), x, y, z, w), 0.0 * x[:, 0])
    c = pc.curv
    r1 = rel_residual(c.tau_star_star, c.tau)
    r2 = rel_residual(c.norm_nabla_P, 0.0)
    return max(ri, r1, r2), {"cyclic expression vanishes": ri, "tau** = tau": r1, "norm = 0": r2}


def body_eq27(ctx, pc):
    a = pc.assoc
    fr, cv, conn = pc.frame, pc.curv, pc.conn
    P, g = fr.P, fr.g
    F = cv.F.data
    det = {}
    det["F~ = -F(P.,.,.)"] = rel_residual(a.F_tilde.data, -np.einsum("mx,myz->xyz", P, F))
    det["cyclic F~ = 0"] = rel_residual(
        a.F_tilde.data + np.einsum("yzx->xyz", a.F_tilde.data) + np.einsum("zxy->xyz", a.F_tilde.data), 0.0 * F
    )
    D = cv.DP_out
    # nabla~_x y - nabla_x y = -(nabla_x P) P y - (nabla_y P) P x
    diff = a.gamma_tilde - conn.gamma
    det["connection difference"] = rel_residual(diff, a.T.data)
    det["Phi = g(nabla~ - nabla)"] = rel_residual(a.phi.data, np.einsum("xyk,kz->xyz", diff, g))
    printed = rel_residual(phi_printed(fr, cv).data, np.einsum("xyk,kz->xyz", diff, g))
    tors = a.gamma_tilde - np.swapaxes(a.gamma_tilde, 0, 1) - np.transpose(fr.bracket, (1, 2, 0))
    det["nabla~ torsion-free"] = rel_residual(tors, 0.0 * tors)
    # (nabla~_x P) y two ways
    Dt = a.nabla_tilde_P
    eq25 = -np.einsum("my,mnk,nx->xyk", P, D, P) - D - np.einsum("yxk->xyk", D)
    eq26 = np.einsum("mx,mnk,ny->xyk", P, D, P)
    det["nabla~P four-term form"] = rel_residual(Dt, eq25)
    det["nabla~P reduced form"] = rel_residual(Dt, eq26)
    worst = max(det.values())
    flags = {"Phi variant without P in last term": printed}
    tol = ctx.tol_body
    if (det["nabla~P four-term form"] > tol) != (det["nabla~P reduced form"] > tol):
        flags["four-term and reduced nabla~P forms disagree"] = True
    det["flags"] = flags
    return worst, det


def body_eq29(ctx, pc):
    a = pc.assoc
    det = {"R~ direct vs closed form": rel_residual(a.R_tilde_direct.data, a.R_tilde_formula.data)}
    det["R~(x,y)z - R(x,y)z = Q(x,y)z"] = rel_residual(a.R_tilde_up - pc.curv.R_up, a.Q.data)
    return max(det.values()), det


def body_eq35(ctx, pc):
    a = pc.assoc
    gQP = np.einsum("xyzk,kl,lw->xyzw", a.Q.data, pc.frame.g, pc.frame.P)
    r = rel_residual(gQP, q_formula(pc.frame, pc.curv))
    return r, {"g(Q(x,y)z, Pw) expansion": r}


def body_thm51(ctx, pc):
    a = pc.assoc
    det = {
        "T~ = -T": rel_residual(a.T_tilde.data, -a.T.data),
        "Q~ = -Q": rel_residual(a.Q_tilde.data, -a.Q.data),
        "S~ = S": rel_residual(a.gamma_tilde + 0.5 * a.T_tilde.data, pc.conn.gamma + 0.5 * a.T.data),
        "L~ = L": rel_residual(a.L_tilde.data, a.L.data),
    }
    return max(det.values()), det


def t_ratio(pc) -> float:
    a = pc.assoc
    s = f_scale(pc.frame, pc.conn) / max(float(np.max(np.abs(pc.frame.g))), 1e-300)
    return _tensor_ratio(a.T.data, s * float(np.max(np.abs(pc.frame.P))))


def l_ratio(pc) -> float:
    a = pc.assoc
    scale = max(pc.curvature_scale, 0.5 * float(np.max(np.abs(a.Q.data))))
    return _tensor_ratio(a.L.data, scale)


def body_thm52(ctx, pc):
    r = pc.residuals.W0
    return r, {"normalized |F|": r}


def body_eq46(ctx, pc):
    p = pc.probe
    P = p.P
    x, y, z, w = tuples(p.d, 4, pc.rng(19), ctx.n_tuples)
    lhs = 2.0 * (p.R(x, y, z, w) + p.R(x, P(y), P(z), w) + p.R(P(x), P(y), z, w) + p.R(P(x), y, P(z), w))
    rhs = (
        2.0 * p.g(p.D(y, P(x)) + p.D(P(y), x), p.D(P(w), z))
        + p.g(p.D(y, P(z)) + p.D(P(y), z), p.D(P(w), x))
        + p.g(p.D(z, P(x)) + p.D(P(z), x), p.D(P(w), y))
    )
    B = np.einsum("ijkl,ni,nj,nk,nl->n", pc.assoc.B.data, x, y, z, w)
    lhs49 = 2.0 * p.R(x, y, z, w)
    rhs49 = p.NF(x, P(w), y, z) - p.NF(y, P(w), x, z) + B
    det = {"curvature identity": rel_residual(lhs, rhs), "intermediate with B": rel_residual(lhs49, rhs49)}
    return max(det.values()), det


def body_cor54(ctx, pc):
    c, p = pc.curv, pc.probe
    P = p.P
    y, z = tuples(p.d, 2, pc.rng(20), ctx.n_tuples)
    rho, rs = c.rho.data, c.rho_star.data
    n = len(y)
    lhs = 2.0 * (_bilinear(rho, y, z) + _bilinear(rs, P(y), z) + _bilinear(rho, P(y), P(z)) + _bilinear(rs, y, P(z)))
    rhs = (
        2.0 * p.trace(lambda ei, ej: p.g(p.D(y, ei) + p.D(P(y), P(ei)), p.D(P(ej), P(z))), n)
        + p.trace(lambda ei, ej: p.g(p.D(z, ei) + p.D(P(z), P(ei)), p.D(P(ej), P(y))), n)
        + p.trace(lambda ei, ej: p.g(p.D(y, z) + p.D(P(y), P(z)), p.D(P(ei), P(ej))), n)
    )
    det = {
        "norm = -8 tau": rel_residual(c.norm_nabla_P, -8.0 * c.tau),
        "tau** = 5 tau": rel_residual(c.tau_star_star, 5.0 * c.tau),
        "traced intermediate": rel_residual(lhs, rhs),
    }
    return max(det.values()), det


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckDef:
    id: str
    paper_ref: str
    hypothesis: str
    kind: str  # "point": body over points; "global": custom evaluation
    body: Callable
    tolerance: str = "body"  # "num", "body" or "class"
    needs_assoc: bool = False
    note: str = ""


@dataclass
class TheoremCheck:
    id: str
    paper_ref: str
    hypothesis: str
    status: str
    max_residual: float
    tolerance: float
    samples: dict
    details: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float):
                return v if math.isfinite(v) else "nan"
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, (np.floating, np.integer)):
                return clean(float(v))
            return v

        out = {
            "id": self.id,
            "paper_ref": self.paper_ref,
            "hypothesis": self.hypothesis,
            "status": self.status,
            "max_residual": clean(float(self.max_residual)),
            "tolerance": self.tolerance,
            "samples": self.samples,
            "details": clean(self.details),
        }
        if self.note:
            out["note"] = self.note
        return out


def _always(ctx):
    return True, {}


def _w3(ctx):
    return ctx.w3, {"W3": ctx.w3}


def _hyp_rem21(ctx):
    worst = max(kaehler_ratio(pc) for pc in ctx.points)
    ok = ctx.w3 and ctx.spec.dim >= 4 and worst <= ctx.tol_class
    return ok, {"W3": ctx.w3, "kaehler curvature residual": worst, "dim": ctx.spec.dim}


def _hyp_cor34(ctx):
    worst = max(_h_and_e17_ratios(ctx, pc)[1] for pc in ctx.points)
    return ctx.w3 and worst <= ctx.tol_class, {"W3": ctx.w3, "zero-h condition residual": worst}


def _hyp_s0(ctx):
    if any(pc.assoc is None for pc in ctx.points):
        return ctx.w3, {"W3": ctx.w3}
    worst = max(t_ratio(pc) for pc in ctx.points)
    return ctx.w3 and worst <= ctx.tol_class, {"W3": ctx.w3, "normalized |T|": worst}


def _hyp_l0(ctx):
    if any(pc.assoc is None for pc in ctx.points):
        return ctx.w3, {"W3": ctx.w3}
    worst = max(l_ratio(pc) for pc in ctx.points)
    return ctx.w3 and worst <= ctx.tol_class, {"W3": ctx.w3, "normalized |L|": worst}


def _global_thm33(ctx):
    """Zero h and the polarized condition must vanish together (sampled)."""
    hs, es = [], []
    for pc in ctx.points:
        h, e = _h_and_e17_ratios(ctx, pc)
        hs.append(h)
        es.append(e)
    tol = ctx.tol_class
    h_zero, e_zero = max(hs) <= tol, max(es) <= tol
    if h_zero == e_zero:
        residual = max(max(hs), max(es)) if h_zero else 0.0
    else:
        residual = max(max(hs), max(es))
    det = {"max normalized h numerator": max(hs), "max normalized zero-h condition": max(es)}
    if len(hs) >= 3 and np.std(np.log10(np.array(hs) + 1e-300)) > 0 and np.std(np.log10(np.array(es) + 1e-300)) > 0:
        det["magnitude correlation"] = float(np.corrcoef(np.log10(np.array(hs) + 1e-300), np.log10(np.array(es) + 1e-300))[0, 1])
    return residual, det, h_zero == e_zero


def _global_thm42(ctx):
    w3_t = max(pc.assoc.residual_W3_tilde for pc in ctx.points)
    w0_t = max(pc.assoc.residual_W0_tilde for pc in ctx.points)
    n = ctx.spec.dim // 2
    sigs = sorted({tuple(pc.assoc.signature) for pc in ctx.points})
    c = ctx.classification
    tol = ctx.tol_class
    agree_w3 = (w3_t <= tol) == c.verdicts["W3"]
    agree_w0 = (w0_t <= tol) == c.verdicts["W0"]
    sig_ok = sigs == [(n, n)]
    det = {
        "W3 residual": c.residual_W3,
        "associated W3 residual": w3_t,
        "W0 residual": c.residual_W0,
        "associated W0 residual": w0_t,
        "associated signature": [list(s) for s in sigs],
    }
    ok = agree_w3 and agree_w0 and sig_ok
    if ok:
        residual = 0.0
    else:
        residual = max(c.residual_W3, w3_t, c.residual_W0, w0_t, 0.0 if sig_ok else 1.0)
    return residual, det, ok


CHECKS: list[CheckDef] = [
    CheckDef("eq3-F-props", "Sec. 1, (3)", "always", "point", body_f_props, "num"),
    CheckDef("eq8-A", "Sec. 1, (8)-(9)", "always", "point", body_eq8, "num"),
    CheckDef("eq13-ricci", "Sec. 2, (13)", "always", "point", body_eq13, "num"),
    CheckDef("eq11-12", "Sec. 2, (11)-(12)", "W3", "point", body_eq11_12),
    CheckDef("thm2.1-eq15", "Theorem 2.1, (15)", "W3", "point", body_eq15),
    CheckDef("cor2.2-rho", "Corollary 2.2, (rho)", "W3", "point", body_cor22_rho),
    CheckDef("cor2.2-nP", "Corollary 2.2, (nP)", "W3", "point", body_cor22_nP),
    CheckDef("cor2.2-nP2", "Corollary 2.2, (nP2)", "W3", "point", body_cor22_nP2),
    CheckDef("rem2.1-kaehlerR", "Remark 2.1", "W3 and Kaehler-type curvature", "point", body_rem21),
    CheckDef("thm3.2-h-welldef", "Theorem 3.2, (16)", "always", "point", body_thm32),
    CheckDef(
        "thm3.3-eq17",
        "Theorem 3.3, (17)",
        "always",
        "global",
        _global_thm33,
        "class",
        note="sampled evidence: sampling can falsify but not certify the equivalence",
    ),
    CheckDef("cor3.4", "Corollary 3.4", "W3 and zero invariant bisectional curvature", "point", body_cor34),
    CheckDef("thm4.2-assoc-w3", "Theorem 4.2, Remark 4.1", "always", "global", _global_thm42, "class", True),
    CheckDef("eq27-Ftilde", "Sec. 4, (23)-(28)", "W3", "point", body_eq27, needs_assoc=True),
    CheckDef("thm4.3-eq29", "Theorem 4.3, (29)-(30)", "W3", "point", body_eq29, needs_assoc=True),
    CheckDef("eq35-Q", "Sec. 4, (35)", "W3", "point", body_eq35, needs_assoc=True),
    CheckDef("thm5.1-invariance", "Theorem 5.1, (37)-(41)", "W3", "point", body_thm51, needs_assoc=True),
    CheckDef("thm5.2-S0", "Theorem 5.2", "W3 and T = 0", "point", body_thm52, "class", True),
    CheckDef("thm5.3-eq46", "Theorem 5.3, (46)-(49)", "W3 and L = 0", "point", body_eq46, needs_assoc=True),
    CheckDef("cor5.4", "Corollary 5.4, (53)", "W3 and L = 0", "point", body_cor54, needs_assoc=True),
]

HYPOTHESES = {
    "always": _always,
    "W3": _w3,
    "W3 and Kaehler-type curvature": _hyp_rem21,
    "W3 and zero invariant bisectional curvature": _hyp_cor34,
    "W3 and T = 0": _hyp_s0,
    "W3 and L = 0": _hyp_l0,
}

CHECK_IDS = [c.id for c in CHECKS]


@dataclass
class SuiteConfig:
    n_points: int = 20
    n_tuples: int = 50
    seed: int = 0
    checks: list[str] | None = None
    threads: int | None = None


@dataclass
class TheoremReport:
    spec_name: str
    seed: int
    classification: ClassificationReport
    checks: list[TheoremCheck]

    def by_id(self, check_id: str) -> TheoremCheck:
        for c in self.checks:
            if c.id == check_id:
                return c
        raise KeyError(check_id)

    @property
    def any_failed(self) -> bool:
        return any(c.status == FAIL for c in self.checks)


def _threads(config: SuiteConfig) -> int:
    if config.threads is not None:
        return max(1, config.threads)
    raw = os.environ.get("APM_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else min(8, os.cpu_count() or 1)


def build_context(spec, config: SuiteConfig) -> SuiteContext:
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(0,)))
    pts = sample_points(spec, config.n_points, rng)
    work = lambda ip: _point_context(spec, ip[0], ip[1], config.seed)  # noqa: E731
    n_threads = _threads(config)
    if n_threads > 1 and len(pts) > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            points = list(pool.map(work, enumerate(pts)))
    else:
        points = [work(ip) for ip in enumerate(pts)]
    tol = spec.tolerances
    classification = classify_points([(pc.point, pc.residuals) for pc in points], tol.cls, config.seed)
    return SuiteContext(
        spec=spec,
        points=points,
        classification=classification,
        tol_num=tol.num(spec.backend),
        tol_body=tol.num_lie if spec.backend == "lie_group" else tol.body_chart,
        tol_class=tol.cls,
        n_tuples=config.n_tuples,
        seed=config.seed,
    )


def run_check(ctx: SuiteContext, cdef: CheckDef) -> TheoremCheck:
    tolerance = {"num": ctx.tol_num, "body": ctx.tol_body, "class": ctx.tol_class}[cdef.tolerance]
    samples = {"points": len(ctx.points), "tuples": ctx.n_tuples, "seed": ctx.seed}
    base = dict(id=cdef.id, paper_ref=cdef.paper_ref, hypothesis=cdef.hypothesis, tolerance=tolerance, samples=samples, note=cdef.note)
    try:
        if cdef.needs_assoc and any(pc.assoc is None for pc in ctx.points):
            err = next(pc.assoc_error for pc in ctx.points if pc.assoc is None)
            return TheoremCheck(status=FAIL, max_residual=float("nan"), details={"error": err}, **base)
        holds, hyp_details = HYPOTHESES[cdef.hypothesis](ctx)
        if cdef.kind == "global":
            residual, details, ok = cdef.body(ctx)
        else:
            residual, details = ctx.pointwise(lambda pc: cdef.body(ctx, pc))
            ok = residual <= tolerance
        details = {"hypothesis": hyp_details, **details}
        if not math.isfinite(residual):
            status = FAIL if holds else VACUOUS
        elif not holds:
            status = VACUOUS
        else:
            status = PASS if (ok and residual <= tolerance) else FAIL
        return TheoremCheck(status=status, max_residual=float(residual), details=details, **base)
    except Exception as exc:  # a broken check must not abort the suite
        return TheoremCheck(
            status=FAIL, max_residual=float("nan"), details={"error": f"{type(exc).__name__}: {exc}"}, **base
        )


def run_suite(spec, config: SuiteConfig | None = None) -> TheoremReport:
    config = config or SuiteConfig()
    wanted = config.checks
    if wanted is not None:
        unknown = sorted(set(wanted) - set(CHECK_IDS))
        if unknown:
            raise KeyError(f"unknown check ids: {', '.join(unknown)}")
    ctx = build_context(spec, config)
    checks = [run_check(ctx, c) for c in CHECKS if wanted is None or c.id in wanted]
    return TheoremReport(spec.name, config.seed, ctx.classification, checks)
