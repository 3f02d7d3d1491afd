"""Class membership tests: W0 (nabla P = 0), W1+W2 (N = 0) and W3 (cyclic F = 0)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import PointFrame, frame_at, sample_points
from .geometry import (
    ConnectionAtPoint,
    CurvatureAtPoint,
    curvature_package,
    levi_civita,
    nabla_P_jet,
)
from .tensor import CO, CONTRA, TensorComponents, cyclic_sum_3

TOL_CLASS = 1e-7

CLASSES = ("W0", "W1+W2", "W3")


def _dp_out(frame: PointFrame, conn: ConnectionAtPoint) -> np.ndarray:
    return np.swapaxes(nabla_P_jet(frame, conn).val, 1, 2)


def _nbar_terms(D: np.ndarray, P: np.ndarray):
    # D[x, y, k]: component k of (nabla_x P) y
    t1 = np.einsum("xmk,my->xyk", D, P)  # (nabla_x P) P y
    t2 = np.einsum("mx,myk->xyk", P, D)  # (nabla_{Px} P) y
    t3 = np.einsum("ymk,mx->xyk", D, P)  # (nabla_y P) P x
    t4 = np.einsum("my,mxk->xyk", P, D)  # (nabla_{Py} P) x
    return t1, t2, t3, t4


def nbar(frame: PointFrame, conn: ConnectionAtPoint) -> TensorComponents:
    """Symmetric four-term tensor whose vanishing characterizes W3; output slot last."""
    t1, t2, t3, t4 = _nbar_terms(_dp_out(frame, conn), frame.P)
    return TensorComponents(t1 + t2 + t3 + t4, (CO, CO, CONTRA))


def nijenhuis(frame: PointFrame, conn: ConnectionAtPoint) -> TensorComponents:
    t1, t2, t3, t4 = _nbar_terms(_dp_out(frame, conn), frame.P)
    return TensorComponents(t1 + t2 - t3 - t4, (CO, CO, CONTRA))


def nbar_property_residuals(frame: PointFrame, Nb: TensorComponents) -> dict[str, float]:
    N, P = Nb.data, frame.P
    N_PxPy = np.einsum("ma,nb,mnk->abk", P, P, N)
    N_Pxy = np.einsum("ma,mbk->abk", P, N)
    N_xPy = np.einsum("nb,ank->abk", P, N)
    PN = np.einsum("km,abm->abk", P, N)
    return {
        "Nbar(Px,Py)=Nbar(x,y)": float(np.max(np.abs(N_PxPy - N))),
        "Nbar(Px,y)=Nbar(x,Py)": float(np.max(np.abs(N_Pxy - N_xPy))),
        "Nbar(x,Py)=-P Nbar(x,y)": float(np.max(np.abs(N_xPy + PN))),
    }


def f_scale(frame: PointFrame, conn: ConnectionAtPoint) -> float:
    """Magnitude bound for the terms that make up F, used to normalize residuals."""
    amax = lambda a: float(np.max(np.abs(a))) if a.size else 0.0  # noqa: E731
    return amax(frame.g) * (amax(frame.dP) + 2.0 * amax(conn.gamma) * amax(frame.P))


@dataclass
class PointResiduals:
    W0: float
    W3: float
    W3_P: float
    Nbar: float
    Nij: float
    F_max: float


def point_residuals(frame: PointFrame, conn: ConnectionAtPoint, curv: CurvatureAtPoint) -> PointResiduals:
    """Normalized residuals of the class-defining tensors at one point.

    Tensors that should vanish are compared against ``max(|F|, s_F)``, where
    ``s_F`` bounds the raw terms of ``F``. That keeps structural zeros of a
    curved W0 manifold at round-off level instead of dividing noise by noise.
    """
    F = curv.F
    P, g = frame.P, frame.g
    s_F = f_scale(frame, conn)
    F_max = F.max_abs()
    scale = max(F_max, s_F, 1e-30)
    cyc = cyclic_sum_3(F, (0, 1, 2))
    FP = TensorComponents.covariant(np.einsum("mx,myz->xyz", P, F.data))
    cyc_P = cyclic_sum_3(FP, (0, 1, 2))
    D = curv.DP_out
    t1, t2, t3, t4 = _nbar_terms(D, P)
    Nb = np.einsum("xyk,kl->xyl", t1 + t2 + t3 + t4, g)
    N = np.einsum("xyk,kl->xyl", t1 + t2 - t3 - t4, g)
    return PointResiduals(
        W0=F_max / max(s_F, 1e-30) if F_max > 0 else 0.0,
        W3=cyc.max_abs() / scale,
        W3_P=cyc_P.max_abs() / scale,
        Nbar=float(np.max(np.abs(Nb))) / scale,
        Nij=float(np.max(np.abs(N))) / scale,
        F_max=F_max,
    )


@dataclass
class ClassificationReport:
    residual_W0: float
    residual_W3: float
    residual_W3_P: float
    residual_Nbar: float
    residual_Nij: float
    verdicts: dict[str, bool]
    tolerance: float
    points_sampled: int
    seed: int
    worst_points: dict[str, list[float] | None] = field(default_factory=dict)
    alerts: list[str] = field(default_factory=list)

    def is_member(self, cls: str) -> bool:
        return self.verdicts[cls]

    def to_dict(self) -> dict:
        return {
            "residual_W0": self.residual_W0,
            "residual_W3": self.residual_W3,
            "residual_W3_P": self.residual_W3_P,
            "residual_Nbar": self.residual_Nbar,
            "residual_Nij": self.residual_Nij,
            "verdicts": dict(self.verdicts),
            "tolerance": self.tolerance,
            "points_sampled": self.points_sampled,
            "seed": self.seed,
            "worst_points": dict(self.worst_points),
            "alerts": list(self.alerts),
        }

    def text(self) -> str:
        mark = lambda ok: "PASS" if ok else "FAIL"  # noqa: E731
        v = self.verdicts
        return f"W0: {mark(v['W0'])}  W1⊕W2: {mark(v['W1+W2'])}  W3: {mark(v['W3'])}"


def classify_points(point_data, tol: float, seed: int) -> ClassificationReport:
    """Aggregate ``(point, PointResiduals)`` pairs into a report (AND over points)."""
    keys = ("W0", "W3", "W3_P", "Nbar", "Nij")
    worst = {k: -1.0 for k in keys}
    where: dict[str, list[float] | None] = {k: None for k in keys}
    for point, res in point_data:
        for k in keys:
            v = getattr(res, k)
            if v > worst[k]:
                worst[k] = v
                where[k] = None if point is None else [float(c) for c in point]
    verdicts = {
        "W0": worst["W0"] <= tol,
        "W1+W2": worst["Nij"] <= tol,
        "W3": worst["W3"] <= tol,
    }
    alerts = []
    if (worst["W3_P"] <= tol) != verdicts["W3"]:
        alerts.append(
            f"cyclic-sum forms disagree: S F(x,y,z) residual {worst['W3']:.3e} vs "
            f"S F(Px,y,z) residual {worst['W3_P']:.3e}"
        )
    if (worst["Nbar"] <= tol) != verdicts["W3"]:
        alerts.append(
            f"W3 verdict and Nbar = 0 disagree: cyclic residual {worst['W3']:.3e}, "
            f"Nbar residual {worst['Nbar']:.3e}"
        )
    return ClassificationReport(
        residual_W0=worst["W0"],
        residual_W3=worst["W3"],
        residual_W3_P=worst["W3_P"],
        residual_Nbar=worst["Nbar"],
        residual_Nij=worst["Nij"],
        verdicts=verdicts,
        tolerance=tol,
        points_sampled=len(point_data),
        seed=seed,
        worst_points=where,
        alerts=alerts,
    )


def classify(spec, n_points: int = 20, seed: int = 0, tol: float | None = None) -> ClassificationReport:
    tol = spec.tolerances.cls if tol is None else tol
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    data = []
    for p in sample_points(spec, n_points, rng):
        frame = frame_at(spec, p)
        conn = levi_civita(frame)
        data.append((p, point_residuals(frame, conn, curvature_package(frame, conn))))
    return classify_points(data, tol, seed)
