import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apm import load_example
from apm.backend import LieGroupSpec, frame_at, sample_points
from apm.expr import eval_value
from apm.geometry import curvature_package, levi_civita
from apm.structure import classify, nbar, nbar_property_residuals, nijenhuis

from conftest import fd_christoffel

EXPECTED = {
    "flat_product": (True, True, True),
    "warped_chart": (False, True, False),
    "sphere_block": (False, True, False),
    "twisted_chart": (False, False, False),
    "heisenberg_padded": (False, True, False),
    "su2_line": (False, False, True),
    "searched_w3": (False, False, True),
}


@pytest.mark.parametrize("name", sorted(EXPECTED))
def test_example_verdicts(name):
    rep = classify(load_example(name))
    assert (rep.verdicts["W0"], rep.verdicts["W1+W2"], rep.verdicts["W3"]) == EXPECTED[name]
    assert rep.alerts == []
    assert rep.text().count("PASS") == sum(EXPECTED[name])


@pytest.mark.parametrize("name", ("warped_chart", "sphere_block", "heisenberg_padded", "twisted_chart"))
def test_non_w3_residuals_are_far_from_tolerance(name):
    assert classify(load_example(name)).residual_W3 > 1e-3


def test_classification_is_deterministic():
    spec = load_example("twisted_chart")
    a, b = classify(spec, seed=5), classify(spec, seed=5)
    assert a.to_dict() == b.to_dict()


@pytest.mark.parametrize("name", ("warped_chart", "sphere_block", "twisted_chart"))
def test_F_matches_finite_difference_oracle(name):
    spec = load_example(name)
    d, h = spec.dim, 1e-5
    def Pval(x):
        return np.array([[eval_value(spec.structure[i][j], x) for j in range(d)] for i in range(d)])

    for x in sample_points(spec, 4, np.random.default_rng(9)):
        fr = frame_at(spec, x)
        curv = curvature_package(fr, levi_civita(fr))
        G = fd_christoffel(spec, x)
        dP = np.empty((d, d, d))
        for a in range(d):
            e = np.zeros(d)
            e[a] = h
            dP[a] = (Pval(x + e) - Pval(x - e)) / (2 * h)
        P = Pval(x)
        # component k of (nabla_a P) e_j
        DP = np.einsum("akj->ajk", dP) + np.einsum("mj,amk->ajk", P, G) - np.einsum("km,ajm->ajk", P, G)
        F = np.einsum("ajk,kl->ajl", DP, fr.g)
        assert np.max(np.abs(curv.F.data - F)) <= 1e-7 * max(1.0, np.max(np.abs(F)))


@pytest.mark.parametrize("name", ("twisted_chart", "su2_line", "searched_w3", "warped_chart"))
def test_nbar_properties(name):
    spec = load_example(name)
    for x in sample_points(spec, 3, np.random.default_rng(2)):
        fr = frame_at(spec, x)
        conn = levi_civita(fr)
        Nb = nbar(fr, conn)
        s = max(1.0, Nb.max_abs())
        for key, v in nbar_property_residuals(fr, Nb).items():
            assert v <= 1e-12 * s, key
        assert np.max(np.abs(Nb.data - np.swapaxes(Nb.data, 0, 1))) <= 1e-12 * s
        N = nijenhuis(fr, conn).data
        assert np.max(np.abs(N + np.swapaxes(N, 0, 1))) <= 1e-12 * max(1.0, np.max(np.abs(N)))


def test_nijenhuis_matches_bracket_definition_on_lie_group():
    # N(x,y) = [Px,Py] + [x,y] - P[Px,y] - P[x,Py] for left-invariant fields
    spec = load_example("su2_line")
    C, P = spec.structure_constants, spec.structure
    br = lambda u, v: np.einsum("kij,i,j->k", C, u, v)  # noqa: E731
    fr = frame_at(spec)
    N = nijenhuis(fr, levi_civita(fr)).data
    rng = np.random.default_rng(0)
    for _ in range(5):
        x, y = rng.normal(size=(2, 4))
        ref = br(P @ x, P @ y) + br(x, y) - P @ br(P @ x, y) - P @ br(x, P @ y)
        assert np.allclose(np.einsum("xyk,x,y->k", N, x, y), ref, atol=1e-13)


def test_nbar_vanishes_exactly_when_w3():
    for name, (_, _, w3) in EXPECTED.items():
        rep = classify(load_example(name))
        assert (rep.residual_Nbar <= rep.tolerance) == w3, name


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 1000))
def test_verdicts_survive_constant_rescaling_and_frame_change(c, seed):
    # a scaled metric and a conjugated basis describe the same structure up to isometry
    base = load_example("su2_line")
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(4, 4)) + 3 * np.eye(4)
    Ai = np.linalg.inv(A)
    C = np.einsum("ka,aij,ib,jc->kbc", Ai, base.structure_constants, A, A)
    C = 0.5 * (C - np.swapaxes(C, 1, 2))
    spec = LieGroupSpec(4, C, c * A.T @ base.metric @ A, Ai @ base.structure @ A)
    rep = classify(spec)
    assert (rep.verdicts["W0"], rep.verdicts["W1+W2"], rep.verdicts["W3"]) == EXPECTED["su2_line"]
