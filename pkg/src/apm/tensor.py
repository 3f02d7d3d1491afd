"""Dense tensor components at a point.

Slot order is row-major, and each slot carries a variance label. For tensors
that return a vector (``(nabla_x P) y``, ``T(x, y)``, ``R(x, y) z``) the
output slot is stored *last*, so lowering that slot gives the matching
``(0, r)`` form directly, e.g. ``F[i, j, k] = g((nabla_i P) e_j, e_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

CO = "co"
CONTRA = "contra"

MAX_RANK = 5
MAX_DIM = 8


class TensorError(ValueError):
    pass


@dataclass(frozen=True)
class MetricAtPoint:
    """A metric and its inverse, validated as a pair.

    ``riemannian=False`` swaps the positive-definiteness check for a
    nondegeneracy check; the signature is recorded either way.
    """

    g: np.ndarray
    g_inv: np.ndarray
    signature: tuple[int, int]

    @classmethod
    def from_matrix(cls, g, riemannian: bool = True, det_floor: float = 1e-12) -> "MetricAtPoint":
        g = np.array(g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise TensorError(f"metric must be square, got shape {g.shape}")
        if not np.array_equal(g, g.T):
            asym = float(np.max(np.abs(g - g.T)))
            if asym > 1e-12 * max(1.0, float(np.max(np.abs(g)))):
                raise TensorError(f"metric not symmetric (residual {asym:.3e})")
            g = 0.5 * (g + g.T)
        eig = np.linalg.eigvalsh(g)
        if riemannian:
            if eig[0] <= 0.0:
                raise TensorError(f"metric not positive definite (min eigenvalue {eig[0]:.3e})")
        elif abs(np.linalg.det(g)) <= det_floor:
            raise TensorError(f"metric degenerate (|det| <= {det_floor:g})")
        g_inv = np.linalg.inv(g)
        g_inv = 0.5 * (g_inv + g_inv.T)
        signature = (int(np.sum(eig > 0)), int(np.sum(eig < 0)))
        return cls(g, g_inv, signature)

    @property
    def dim(self) -> int:
        return self.g.shape[0]


class TensorComponents:
    """Components of a rank-``r`` tensor in a frame of dimension ``d``."""

    __slots__ = ("data", "variance")

    def __init__(self, data, variance: Sequence[str]):
        data = np.asarray(data, dtype=float)
        variance = tuple(variance)
        if len(variance) != data.ndim:
            raise TensorError(f"{len(variance)} variance labels for rank {data.ndim}")
        if data.ndim > MAX_RANK:
            raise TensorError(f"rank {data.ndim} exceeds {MAX_RANK}")
        if data.ndim and len(set(data.shape)) != 1:
            raise TensorError(f"all slots must share one dimension, got {data.shape}")
        for v in variance:
            if v not in (CO, CONTRA):
                raise TensorError(f"bad variance label {v!r}")
        if not np.all(np.isfinite(data)):
            raise TensorError("non-finite tensor components")
        self.data = data
        self.variance = variance

    @classmethod
    def covariant(cls, data) -> "TensorComponents":
        data = np.asarray(data, dtype=float)
        return cls(data, (CO,) * data.ndim)

    @property
    def rank(self) -> int:
        return self.data.ndim

    @property
    def dim(self) -> int:
        return self.data.shape[0] if self.data.ndim else 0

    def __repr__(self) -> str:
        return f"TensorComponents(rank={self.rank}, dim={self.dim}, variance={self.variance})"

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0


def _check_slot(t: TensorComponents, slot: int) -> None:
    if not 0 <= slot < t.rank:
        raise TensorError(f"slot {slot} out of range for rank {t.rank}")


def contract(
    t: TensorComponents, slot_a: int, slot_b: int, m: MetricAtPoint | None = None
) -> TensorComponents:
    """Trace over two slots; like-variance slots are paired through ``m``."""
    _check_slot(t, slot_a)
    _check_slot(t, slot_b)
    if slot_a == slot_b:
        raise TensorError("contraction slots must differ")
    va, vb = t.variance[slot_a], t.variance[slot_b]
    data = t.data
    if va == vb:
        if m is None:
            raise TensorError(f"contracting two {va} slots needs a metric")
        pairing = m.g_inv if va == CO else m.g
        data = np.moveaxis(np.tensordot(data, pairing, axes=([slot_b], [0])), -1, slot_b)
    out = np.trace(data, axis1=slot_a, axis2=slot_b)
    keep = [v for i, v in enumerate(t.variance) if i not in (slot_a, slot_b)]
    return TensorComponents(out, keep)


def raise_lower(t: TensorComponents, slot: int, m: MetricAtPoint) -> TensorComponents:
    """Flip the variance of one slot using ``m``."""
    _check_slot(t, slot)
    pairing = m.g if t.variance[slot] == CONTRA else m.g_inv
    data = np.moveaxis(np.tensordot(t.data, pairing, axes=([slot], [0])), -1, slot)
    variance = list(t.variance)
    variance[slot] = CO if variance[slot] == CONTRA else CONTRA
    return TensorComponents(data, variance)


def cyclic_sum_3(t: TensorComponents, slots: tuple[int, int, int]) -> TensorComponents:
    """``out(.., a, b, c, ..) = t(a, b, c) + t(b, c, a) + t(c, a, b)`` over ``slots``."""
    i, j, k = slots
    for s in slots:
        _check_slot(t, s)
    if len({i, j, k}) != 3:
        raise TensorError("cyclic sum needs three distinct slots")
    if len({t.variance[s] for s in slots}) != 1:
        raise TensorError("cyclic sum over slots of mixed variance")
    axes = list(range(t.rank))
    # term t(b, c, a): slot i takes the value of output slot j, and so on
    shifted = list(axes)
    shifted[i], shifted[j], shifted[k] = k, i, j
    once = np.transpose(t.data, shifted)
    shifted2 = list(axes)
    shifted2[i], shifted2[j], shifted2[k] = j, k, i
    twice = np.transpose(t.data, shifted2)
    return TensorComponents(t.data + once + twice, t.variance)


def cyclic_sum_array(a: np.ndarray, slots: tuple[int, int, int] = (0, 1, 2)) -> np.ndarray:
    """Plain-array cyclic sum, for internal use on raw component arrays."""
    return cyclic_sum_3(TensorComponents(a, (CO,) * a.ndim), slots).data
