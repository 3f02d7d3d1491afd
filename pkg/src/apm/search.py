"""Penalty-based synthesis of Lie-group examples (W3, S = 0, L = 0 targets).

The parameter vector has three blocks:

* the free structure constants ``C^k_{ij}``, ``i < j``, ordered by ``(k, i, j)``;
* two lower-triangular Cholesky factors ``L+``, ``L-`` (``n x n`` each, row
  major, diagonal stored as a logarithm);
* the strictly upper entries of a skew matrix ``A`` (row major).

With ``O = expm(A)`` the decoded metric and structure are
``g0 = O blockdiag(L+ L+^T, L- L-^T) O^T`` and ``P0 = O diag(I, -I) O^T``, so
antisymmetry, ``P0^2 = id``, ``tr P0 = 0`` and compatibility hold by
construction. The zero vector decodes to the abelian group with ``g0 = I``
and ``P0 = diag(I, -I)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, logm, polar
from scipy.optimize import least_squares

from .associated import t_q_tensors
from .backend import LieGroupSpec, PointFrame, SpecError, jacobi_residual
from .geometry import curvature_package, levi_civita, nabla_P_jet
from .tensor import MetricAtPoint, TensorError

TARGETS = ("w0", "w3", "s-zero", "l-zero")
HARD_TOL = 1e-10
POLISH_TOL = 1e-13  # local runs stop early only once well inside HARD_TOL
DEFAULT_FLOOR = 0.1
DEFAULT_BUDGET = 200_000
FLOOR_MARGIN = 1.01
DEFAULT_PER_START = 5_000


@dataclass(frozen=True)
class Layout:
    dim: int

    @property
    def n(self) -> int:
        return self.dim // 2

    @property
    def n_constants(self) -> int:
        d = self.dim
        return d * d * (d - 1) // 2

    @property
    def n_cholesky(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def n_angles(self) -> int:
        return self.dim * (self.dim - 1) // 2

    @property
    def size(self) -> int:
        return self.n_constants + 2 * self.n_cholesky + self.n_angles

    def split(self, p):
        a = self.n_constants
        b = a + self.n_cholesky
        c = b + self.n_cholesky
        return p[:a], p[a:b], p[b:c], p[c:]


def _check_search_dim(dim: int) -> None:
    if dim < 4 or dim % 2:
        raise SpecError(f"search dimension must be even and >= 4, got {dim}")


def _tri(n: int):
    return np.tril_indices(n)


def _cholesky(v, n):
    L = np.zeros((n, n))
    L[_tri(n)] = v
    L[np.diag_indices(n)] = np.exp(np.diag(L))
    return L


def _constants(v, d):
    C = np.zeros((d, d, d))
    iu = np.triu_indices(d, 1)
    blocks = v.reshape(d, -1)
    for k in range(d):
        C[k][iu] = blocks[k]
    return C - np.swapaxes(C, 1, 2)


def decode_parts(params, dim: int):
    _check_search_dim(dim)
    lay = Layout(dim)
    p = np.asarray(params, dtype=float)
    if p.shape != (lay.size,):
        raise ValueError(f"parameter vector for dim {dim} must have length {lay.size}, got {p.size}")
    vc, vp, vm, va = lay.split(p)
    n = lay.n
    C = _constants(vc, dim)
    Lp, Lm = _cholesky(vp, n), _cholesky(vm, n)
    A = np.zeros((dim, dim))
    A[np.triu_indices(dim, 1)] = va
    O = expm(A - A.T)
    B = np.zeros((dim, dim))
    B[:n, :n] = Lp @ Lp.T
    B[n:, n:] = Lm @ Lm.T
    g = O @ B @ O.T
    g = 0.5 * (g + g.T)
    P = O @ np.diag(np.r_[np.ones(n), -np.ones(n)]) @ O.T
    P = 0.5 * (P + P.T)
    return C, g, P


def decode(params, dim: int, name: str = "searched") -> LieGroupSpec:
    C, g, P = decode_parts(params, dim)
    return LieGroupSpec(dim, C, g, P, name=name)


def encode(spec: LieGroupSpec) -> np.ndarray:
    """A parameter vector with ``decode(encode(spec)) == spec`` (up to round-off).

    The rotation is not unique; the one closest to the identity (blockwise
    polar factor) is chosen.
    """
    d = spec.dim
    _check_search_dim(d)
    lay = Layout(d)
    n = lay.n
    C, g, P = spec.structure_constants, spec.metric, spec.structure
    vc = np.concatenate([C[k][np.triu_indices(d, 1)] for k in range(d)])
    w, V = np.linalg.eigh(P)
    Vp, Vm = V[:, w > 0], V[:, w < 0]
    if Vp.shape[1] != n or Vm.shape[1] != n:
        raise SpecError("structure must have n eigenvalues +1 and n eigenvalues -1")
    eye = np.eye(d)
    Vp = Vp @ polar(Vp.T @ eye[:, :n])[0]
    Vm = Vm @ polar(Vm.T @ eye[:, n:])[0]
    O = np.hstack([Vp, Vm])
    if np.linalg.det(O) < 0:
        O[:, -1] *= -1.0
    A = np.real(logm(O))
    A = 0.5 * (A - A.T)
    B = O.T @ g @ O
    Lp = np.linalg.cholesky(0.5 * (B[:n, :n] + B[:n, :n].T))
    Lm = np.linalg.cholesky(0.5 * (B[n:, n:] + B[n:, n:].T))
    for L in (Lp, Lm):
        L[np.diag_indices(n)] = np.log(np.diag(L))
    va = A[np.triu_indices(d, 1)]
    return np.concatenate([vc, Lp[_tri(n)], Lm[_tri(n)], va])


# --------------------------------------------------------------------------
# objective
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Weights:
    jacobi: float = 1.0
    w3: float = 1.0
    compat: float = 1.0
    target: float = 1.0
    floor: float = 1.0


@dataclass(frozen=True)
class SearchProblem:
    dim: int = 4
    target: str = "w3"
    floor: float = DEFAULT_FLOOR
    weights: Weights = field(default_factory=Weights)
    method: str = "lm"  # "lm" or "coordinate"
    init_scale: float = 1.0

    def __post_init__(self):
        _check_search_dim(self.dim)
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {', '.join(TARGETS)}")
        if self.method not in ("lm", "coordinate"):
            raise ValueError("method must be 'lm' or 'coordinate'")
        if self.floor < 0:
            raise ValueError("floor must be non-negative")

    @property
    def uses_floor(self) -> bool:
        return self.target != "w0" and self.floor > 0

    @property
    def constraints(self) -> list[str]:
        out = ["w0"] if self.target == "w0" else ["w3"]
        if self.uses_floor:
            out.append("non-w0-floor")
        if self.target in ("s-zero", "l-zero"):
            out.append(self.target)
        return out


def _frame(C, g, P) -> PointFrame:
    d = C.shape[0]
    z3, z4 = np.zeros((d, d, d)), np.zeros((d, d, d, d))
    return PointFrame(d, MetricAtPoint.from_matrix(g), z3, z4, P, z3, z4, C, z4, (), "lie_group")


def evaluate_terms(problem: SearchProblem, params) -> dict[str, np.ndarray]:
    """Named residual arrays at ``params`` (unweighted)."""
    C, g, P = decode_parts(params, problem.dim)
    frame = _frame(C, g, P)
    conn = levi_civita(frame)
    terms: dict[str, np.ndarray] = {
        "jacobi": jacobi_residual(C).ravel(),
        "compat": (P.T @ g @ P - g).ravel(),
    }
    if problem.target == "l-zero":
        curv = curvature_package(frame, conn)
        F, norm = curv.F.data, curv.norm_nabla_P
    else:
        curv = None
        DP = np.swapaxes(nabla_P_jet(frame, conn).val, 1, 2)
        F = np.einsum("xyk,kz->xyz", DP, g)
        gi = frame.g_inv
        norm = float(np.einsum("ia,jb,kc,ijk,abc->", gi, gi, gi, F, F))
    if problem.target == "w0":
        terms["w0"] = F.ravel()
    else:
        terms["w3"] = (F + np.einsum("yzx->xyz", F) + np.einsum("zxy->xyz", F)).ravel()
    if problem.uses_floor:
        terms["floor"] = np.array([max(0.0, FLOOR_MARGIN * problem.floor - norm)])
    if problem.target == "s-zero":
        DP = np.swapaxes(nabla_P_jet(frame, conn).val, 1, 2)
        PDP = np.einsum("xmk,my->xyk", DP, P)
        terms["s-zero"] = (-(PDP + np.swapaxes(PDP, 0, 1))).ravel()
    if problem.target == "l-zero":
        _, Q = t_q_tensors(frame, conn, curv)
        terms["l-zero"] = (curv.R_up + 0.5 * Q.data).ravel()
    terms["norm_nabla_P"] = np.array([norm])
    return terms


def _weighted_vector(problem: SearchProblem, terms) -> np.ndarray:
    w = problem.weights
    weight = {"jacobi": w.jacobi, "compat": w.compat, "w3": w.w3, "w0": w.w3, "floor": w.floor,
              "s-zero": w.target, "l-zero": w.target}
    return np.concatenate([np.sqrt(weight[k]) * v for k, v in terms.items() if k in weight])


def penalty_terms(problem: SearchProblem, params) -> dict[str, float]:
    return _summarize(evaluate_terms(problem, params))


def _summarize(terms) -> dict[str, float]:
    out = {}
    for k, v in terms.items():
        out[k] = float(v[0]) if k == "norm_nabla_P" else float(np.max(np.abs(v))) if v.size else 0.0
    return out


def is_converged(problem: SearchProblem, terms: dict[str, float], tol: float = HARD_TOL) -> bool:
    hard = [k for k in ("jacobi", "compat", "w3", "w0", "s-zero", "l-zero") if k in terms]
    if any(terms[k] > tol for k in hard):
        return False
    if problem.uses_floor and terms["norm_nabla_P"] < problem.floor:
        return False
    return True


# --------------------------------------------------------------------------
# optimizer
# --------------------------------------------------------------------------


class _BudgetExhausted(Exception):
    pass


class _Converged(Exception):
    def __init__(self, x):
        self.x = x


class _Degenerate(Exception):
    """The parameters decode to a numerically singular metric."""


class _Counter:
    """Evaluation counter with a global budget and a per-start limit."""

    def __init__(self, problem, budget):
        self.problem, self.budget, self.n = problem, budget, 0
        self.limit = budget

    def residual(self, p):
        if self.n >= self.limit:
            raise _BudgetExhausted
        self.n += 1
        try:
            terms = evaluate_terms(self.problem, p)
        except TensorError as exc:
            raise _Degenerate from exc
        if is_converged(self.problem, _summarize(terms), POLISH_TOL):
            raise _Converged(np.array(p, dtype=float))
        return _weighted_vector(self.problem, terms)

    def penalty(self, p):
        try:
            r = self.residual(p)
        except _Degenerate:
            return np.inf
        return float(r @ r)


def _start(problem: SearchProblem, rng: np.random.Generator) -> np.ndarray:
    lay = Layout(problem.dim)
    s = problem.init_scale
    return np.concatenate(
        [
            rng.normal(0.0, s, lay.n_constants),
            rng.normal(0.0, 0.3 * s, 2 * lay.n_cholesky),
            rng.normal(0.0, 0.3 * s, lay.n_angles),
        ]
    )


def _lm(counter: _Counter, x0):
    best = {"x": x0.copy(), "f": np.inf}

    def fun(p):
        r = counter.residual(p)
        f = float(r @ r)
        if f < best["f"]:
            best["x"], best["f"] = p.copy(), f
        return r

    try:
        remaining = max(counter.limit - counter.n, 1)
        res = least_squares(fun, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=remaining)
        return res.x, float(2.0 * res.cost)
    except _Converged as done:
        return done.x, 0.0
    except (_BudgetExhausted, _Degenerate):
        return best["x"], best["f"]


def _coordinate(counter: _Counter, x0, step0: float = 0.5, min_step: float = 1e-12):
    x, f = x0.copy(), np.inf
    try:
        f = counter.penalty(x)
        step = step0
        while step > min_step and f > 0.0:
            improved = False
            for i in range(x.size):
                for sgn in (1.0, -1.0):
                    y = x.copy()
                    y[i] += sgn * step
                    fy = counter.penalty(y)
                    if fy < f:
                        x, f, improved = y, fy, True
                        break
            if not improved:
                step *= 0.5
    except _Converged as done:
        return done.x, 0.0
    except _BudgetExhausted:
        pass
    return x, f


@dataclass
class SearchResult:
    best_spec: LieGroupSpec
    penalty_terms: dict[str, float]
    iterations: int
    seed: int
    converged: bool
    target: str
    starts: int
    budget: int
    floor: float
    method: str
    best_start: int
    params: list[float]

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "dim": self.best_spec.dim,
            "seed": self.seed,
            "budget": self.budget,
            "floor": self.floor,
            "method": self.method,
            "converged": self.converged,
            "iterations": self.iterations,
            "starts": self.starts,
            "best_start": self.best_start,
            "penalty_terms": dict(self.penalty_terms),
            "params": list(self.params),
        }


def synthesize(
    problem: SearchProblem,
    budget: int = DEFAULT_BUDGET,
    seed: int = 0,
    name: str | None = None,
    per_start: int = DEFAULT_PER_START,
) -> SearchResult:
    """Multi-start local refinement until a start converges or the evaluation budget runs out.

    Starts are tried in order with seeds derived from ``seed`` and the start
    index, each limited to ``per_start`` evaluations; the best start wins,
    ties going to the lower index.
    """
    if budget < 1 or per_start < 1:
        raise ValueError("budget and per_start must be positive")
    counter = _Counter(problem, budget)
    best = None  # (penalty, start index, params)
    start = 0
    while counter.n < counter.budget:
        counter.limit = min(counter.budget, counter.n + per_start)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, start)))
        x0 = _start(problem, rng)
        if problem.method == "lm":
            x, f = _lm(counter, x0)
        else:
            x, f = _coordinate(counter, x0)
        if best is None or f < best[0]:
            best = (f, start, x)
        start += 1
        if is_converged(problem, penalty_terms(problem, x)):
            break
    f, best_start, x = best
    terms = penalty_terms(problem, x)
    spec = decode(x, problem.dim, name=name or f"searched-{problem.target}-d{problem.dim}-seed{seed}")
    return SearchResult(
        best_spec=spec,
        penalty_terms=terms,
        iterations=counter.n,
        seed=seed,
        converged=is_converged(problem, terms),
        target=problem.target,
        starts=start,
        budget=budget,
        floor=problem.floor,
        method=problem.method,
        best_start=best_start,
        params=[float(v) for v in x],
    )
