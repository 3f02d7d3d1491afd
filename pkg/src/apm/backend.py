"""Chart and Lie-group backends producing second-order frame data at a point."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .expr import Expr, ExprDomainError, eval_jet2, to_source
from .tensor import MetricAtPoint, TensorError

TOL_ALG = 1e-10


class SpecError(ValueError):
    """A manifold description violates one of its structural invariants."""


@dataclass(frozen=True)
class Tolerances:
    alg: float = TOL_ALG
    num_lie: float = 1e-9
    num_chart: float = 1e-8
    body_chart: float = 1e-7
    cls: float = 1e-7

    def num(self, backend: str) -> float:
        return self.num_lie if backend == "lie_group" else self.num_chart


@dataclass(frozen=True)
class ChartSpec:
    """Metric and structure given by coordinate expressions.

    ``structure[i][j]`` is the component ``P^i_j`` (``(Px)^i = P^i_j x^j``).
    """

    dim: int
    metric: tuple[tuple[Expr, ...], ...]
    structure: tuple[tuple[Expr, ...], ...]
    sample_box: tuple[tuple[float, float], ...] | None = None
    name: str = "chart"
    tolerances: Tolerances = field(default_factory=Tolerances)

    backend = "chart"

    def __post_init__(self):
        _check_dim(self.dim)
        for label, m in (("metric", self.metric), ("structure", self.structure)):
            if len(m) != self.dim or any(len(row) != self.dim for row in m):
                raise SpecError(f"{label} must be {self.dim}x{self.dim}")
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                if self.metric[i][j] != self.metric[j][i]:
                    raise SpecError(
                        f"metric entries ({i + 1},{j + 1}) and ({j + 1},{i + 1}) differ: "
                        f"{to_source(self.metric[i][j])} vs {to_source(self.metric[j][i])}"
                    )
        if self.sample_box is not None and len(self.sample_box) != self.dim:
            raise SpecError(f"sample_box needs {self.dim} intervals")

    def box(self) -> np.ndarray:
        if self.sample_box is None:
            return np.tile([-1.0, 1.0], (self.dim, 1))
        return np.array(self.sample_box, dtype=float)


@dataclass(frozen=True)
class LieGroupSpec:
    """Left-invariant metric and structure on a Lie group.

    ``structure_constants[k, i, j]`` is ``C^k_{ij}`` with
    ``[e_i, e_j] = C^k_{ij} e_k``; ``structure`` is ``P0`` in matrix form.
    """

    dim: int
    structure_constants: np.ndarray
    metric: np.ndarray
    structure: np.ndarray
    name: str = "lie_group"
    tolerances: Tolerances = field(default_factory=Tolerances)

    backend = "lie_group"

    def __post_init__(self):
        _check_dim(self.dim)
        d = self.dim
        C = np.asarray(self.structure_constants, dtype=float)
        if C.shape != (d, d, d):
            raise SpecError(f"structure constants must have shape {(d, d, d)}, got {C.shape}")
        if not np.array_equal(C, -np.swapaxes(C, 1, 2)):
            raise SpecError("structure constants not antisymmetric in (i, j)")
        for label in ("metric", "structure"):
            if np.asarray(getattr(self, label)).shape != (d, d):
                raise SpecError(f"{label} must be {d}x{d}")
        object.__setattr__(self, "structure_constants", C)
        object.__setattr__(self, "metric", np.asarray(self.metric, dtype=float))
        object.__setattr__(self, "structure", np.asarray(self.structure, dtype=float))


def _check_dim(dim: int) -> None:
    if dim < 2 or dim % 2:
        raise SpecError(
            f"dimension must be even and >= 2 (tr P = 0 with P^2 = id forces even dimension), got {dim}"
        )


@dataclass(frozen=True)
class PointFrame:
    """Jet data at one point.

    Derivative indices come first: ``dg[a, i, j] = e_a(g_ij)`` and
    ``d2g[a, b, i, j] = e_a e_b (g_ij)``. ``bracket[k, i, j] = C^k_{ij}``.
    P arrays are in matrix form, ``P[k, j] = P^k_j``.
    """

    dim: int
    metric: MetricAtPoint
    dg: np.ndarray
    d2g: np.ndarray
    P: np.ndarray
    dP: np.ndarray
    d2P: np.ndarray
    bracket: np.ndarray
    dC: np.ndarray
    point: tuple[float, ...] = ()
    backend: str = "chart"

    @property
    def g(self) -> np.ndarray:
        return self.metric.g

    @property
    def g_inv(self) -> np.ndarray:
        return self.metric.g_inv


def _matrix_jets(entries, point, label):
    d = len(entries)
    val = np.empty((d, d))
    grad = np.empty((d, d, d))
    hess = np.empty((d, d, d, d))
    for i in range(d):
        for j in range(d):
            try:
                jet = eval_jet2(entries[i][j], point)
            except ExprDomainError as exc:
                raise ExprDomainError(
                    f"{label}[{i + 1}][{j + 1}] at point {list(map(float, point))}: {exc}"
                ) from exc
            val[i, j] = jet.value
            grad[:, i, j] = jet.grad
            hess[:, :, i, j] = jet.hess
    return val, grad, hess


def chart_jets(metric_entries, structure_entries, point):
    """Raw jets of metric and structure entries; no validation."""
    g, dg, d2g = _matrix_jets(metric_entries, point, "metric")
    P, dP, d2P = _matrix_jets(structure_entries, point, "structure")
    return (g, dg, d2g), (P, dP, d2P)


def structure_residuals(g: np.ndarray, P: np.ndarray) -> dict[str, float]:
    d = g.shape[0]
    eye = np.eye(d)
    return {
        "metric_symmetric": float(np.max(np.abs(g - g.T))),
        "metric_min_eigenvalue": float(np.linalg.eigvalsh(0.5 * (g + g.T))[0]),
        "P_involution": float(np.max(np.abs(P @ P - eye))),
        "P_compatible": float(np.max(np.abs(P.T @ g @ P - g))),
        "P_trace": float(abs(np.trace(P))),
    }


def jacobi_residual(C: np.ndarray) -> np.ndarray:
    """``sum_cyc(i,j,l) C^m_{ij} C^k_{ml}``, shape ``(k, i, j, l)``."""
    # [[e_i, e_j], e_l] = C^m_ij C^k_ml e_k
    J = np.einsum("mij,kml->kijl", C, C)
    return J + np.transpose(J, (0, 2, 3, 1)) + np.transpose(J, (0, 3, 1, 2))


def _raise_if_invalid(res: dict[str, float], tol: float, where: str) -> None:
    if res["metric_min_eigenvalue"] <= 0.0:
        raise SpecError(
            f"metric not positive definite {where}: min eigenvalue {res['metric_min_eigenvalue']:.3e}"
        )
    for key in ("metric_symmetric", "P_involution", "P_compatible", "P_trace"):
        if res[key] > tol:
            raise SpecError(f"invariant {key} fails {where}: residual {res[key]:.3e} > {tol:g}")


def frame_at(spec, point=None, validate: bool = True) -> PointFrame:
    """Frame data of ``spec`` at ``point`` (ignored for Lie groups)."""
    d = spec.dim
    tol = spec.tolerances.alg
    if spec.backend == "lie_group":
        C = spec.structure_constants
        g, P = spec.metric, spec.structure
        if validate:
            res = structure_residuals(g, P)
            res["jacobi"] = float(np.max(np.abs(jacobi_residual(C))))
            _raise_if_invalid(res, tol, "for Lie group spec")
            if res["jacobi"] > tol:
                raise SpecError(f"Jacobi identity fails: residual {res['jacobi']:.3e} > {tol:g}")
        metric = MetricAtPoint.from_matrix(g)
        z3 = np.zeros((d, d, d))
        z4 = np.zeros((d, d, d, d))
        return PointFrame(d, metric, z3, z4, P.copy(), z3, z4, C.copy(), z4, (), "lie_group")

    if point is None:
        raise SpecError("chart frames need a point")
    point = np.asarray(point, dtype=float)
    if point.shape != (d,):
        raise SpecError(f"point must have length {d}")
    (g, dg, d2g), (P, dP, d2P) = chart_jets(spec.metric, spec.structure, point)
    if validate:
        _raise_if_invalid(structure_residuals(g, P), tol, f"at point {point.tolist()}")
    try:
        metric = MetricAtPoint.from_matrix(g)
    except TensorError as exc:
        raise SpecError(str(exc)) from exc
    z3 = np.zeros((d, d, d))
    z4 = np.zeros((d, d, d, d))
    return PointFrame(d, metric, dg, d2g, P, dP, d2P, z3, z4, tuple(point.tolist()), "chart")


def sample_points(spec, n: int = 20, rng: np.random.Generator | None = None) -> list:
    """Deterministic sample of evaluation points; a single dummy point for Lie groups."""
    if spec.backend == "lie_group":
        return [None]
    rng = rng if rng is not None else np.random.default_rng(0)
    box = spec.box()
    return [box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random(spec.dim) for _ in range(n)]


@dataclass
class ValidationReport:
    residuals: dict[str, float]
    tolerance: float
    failures: list[str]
    points_checked: int

    @property
    def passed(self) -> bool:
        return not self.failures


def validate_spec(spec, n_points: int = 20, seed: int = 0) -> ValidationReport:
    tol = spec.tolerances.alg
    worst: dict[str, float] = {}
    failures: list[str] = []

    def merge(res):
        for k, v in res.items():
            if k == "metric_min_eigenvalue":
                worst[k] = min(worst.get(k, np.inf), v)
            else:
                worst[k] = max(worst.get(k, 0.0), v)

    if spec.backend == "lie_group":
        merge(structure_residuals(spec.metric, spec.structure))
        merge({"jacobi": float(np.max(np.abs(jacobi_residual(spec.structure_constants))))})
        n_checked = 1
    else:
        pts = sample_points(spec, n_points, np.random.default_rng(seed))
        n_checked = 0
        for p in pts:
            try:
                (g, _, _), (P, _, _) = chart_jets(spec.metric, spec.structure, p)
            except ExprDomainError as exc:
                failures.append(f"domain error: {exc}")
                continue
            merge(structure_residuals(g, P))
            n_checked += 1
    for k, v in worst.items():
        if k == "metric_min_eigenvalue":
            if v <= 0.0:
                failures.append(f"metric not positive definite: min eigenvalue {v:.3e}")
        elif v > tol:
            failures.append(f"{k}: residual {v:.3e} > {tol:g}")
    return ValidationReport(worst, tol, failures, n_checked)
