import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apm import load_example
from apm.backend import frame_at, sample_points
from apm.geometry import (
    DegeneratePlaneError,
    bisectional,
    curvature_package,
    levi_civita,
    metric_compatibility_residual,
    random_noneigenvector,
    ricci_identity_residual,
    sectional,
    torsion_residual,
)

from conftest import CHART_EXAMPLES, W3_EXAMPLES, fd_christoffel, fd_riemann

ALL = CHART_EXAMPLES + ("heisenberg_padded", "su2_line", "searched_w3")


def package(spec, x=None):
    fr = frame_at(spec, x)
    conn = levi_civita(fr)
    return fr, conn, curvature_package(fr, conn)


def points(spec, n=5, seed=3):
    return sample_points(spec, n, np.random.default_rng(seed))


def test_warped_christoffels():
    fr, conn, _ = package(load_example("warped_chart"), [0.4, 1.0])
    G = conn.gamma
    assert G[0, 1, 1] == pytest.approx(1.0, abs=1e-15)
    assert G[1, 0, 1] == pytest.approx(1.0, abs=1e-15)
    assert G[1, 1, 0] == pytest.approx(-math.exp(0.8), rel=1e-15)
    zero = np.ones_like(G, bool)
    zero[0, 1, 1] = zero[1, 0, 1] = zero[1, 1, 0] = False
    assert not G[zero].any()


def test_warped_chart_is_hyperbolic():
    fr, _, curv = package(load_example("warped_chart"), [0.4, 1.0])
    assert sectional(fr, curv, [1, 0], [0, 1]) == pytest.approx(-1.0, abs=1e-13)
    assert curv.tau == pytest.approx(-2.0, abs=1e-13)


def test_sphere_block_has_unit_curvature():
    spec = load_example("sphere_block")
    for x in points(spec):
        fr, _, curv = package(spec, x)
        assert sectional(fr, curv, [1, 0, 0, 0], [0, 1, 0, 0]) == pytest.approx(1.0, abs=1e-12)
        assert sectional(fr, curv, [1, 0, 0, 0], [0, 0, 1, 0]) == pytest.approx(0.0, abs=1e-12)


def bracket(C, x, y):
    return np.einsum("kij,i,j->k", C, x, y)


def test_bi_invariant_su2():
    spec = load_example("su2_line")
    C = spec.structure_constants
    fr, conn, curv = package(spec)
    assert np.allclose(conn.gamma, 0.5 * np.transpose(C, (1, 2, 0)), atol=1e-15)
    rng = np.random.default_rng(0)
    for _ in range(10):
        x, y, z, w = rng.normal(size=(4, 4))
        expected = -0.25 * bracket(C, bracket(C, x, y), z) @ w
        assert np.einsum("ijkl,i,j,k,l->", curv.R.data, x, y, z, w) == pytest.approx(expected, abs=1e-13)
    assert sectional(fr, curv, [1, 0, 0, 0], [0, 1, 0, 0]) == pytest.approx(0.25, abs=1e-15)


@pytest.mark.parametrize("name", ("warped_chart", "sphere_block", "twisted_chart"))
def test_christoffels_match_finite_differences(name):
    spec = load_example(name)
    for x in points(spec):
        _, conn, _ = package(spec, x)
        fd = fd_christoffel(spec, x)
        assert np.max(np.abs(conn.gamma - fd)) <= 1e-7 * max(1.0, np.max(np.abs(fd)))


@pytest.mark.parametrize("name", ("warped_chart", "sphere_block", "twisted_chart"))
def test_riemann_matches_finite_differences(name):
    spec = load_example(name)
    for x in points(spec, 3):
        _, _, curv = package(spec, x)
        fd = fd_riemann(spec, x)
        assert np.max(np.abs(curv.R.data - fd)) <= 1e-5 * max(1.0, np.max(np.abs(fd)))


@pytest.mark.parametrize("name", ALL)
def test_connection_is_levi_civita(name):
    spec = load_example(name)
    for x in points(spec, 4):
        fr, conn, _ = package(spec, x)
        s = max(1.0, float(np.max(np.abs(fr.g))))
        assert metric_compatibility_residual(fr, conn) <= 1e-12 * s
        assert torsion_residual(fr, conn) <= 1e-12 * s


@pytest.mark.parametrize("name", ALL)
def test_riemann_symmetries_and_bianchi(name):
    spec = load_example(name)
    for x in points(spec, 4):
        _, _, curv = package(spec, x)
        R = curv.R.data
        s = max(1.0, float(np.max(np.abs(R))))
        assert np.max(np.abs(R + np.swapaxes(R, 0, 1))) <= 1e-12 * s
        assert np.max(np.abs(R + np.swapaxes(R, 2, 3))) <= 1e-12 * s
        assert np.max(np.abs(R - np.transpose(R, (2, 3, 0, 1)))) <= 1e-12 * s
        bianchi = R + np.transpose(R, (1, 2, 0, 3)) + np.transpose(R, (2, 0, 1, 3))
        assert np.max(np.abs(bianchi)) <= 1e-12 * s


@pytest.mark.parametrize("name", ALL)
def test_ricci_identity_for_nabla_F(name):
    spec = load_example(name)
    for x in points(spec, 4):
        fr, _, curv = package(spec, x)
        s = max(1.0, curv.R.max_abs(), curv.nablaF.max_abs())
        assert ricci_identity_residual(fr, curv) <= 1e-11 * s


@pytest.mark.parametrize("name", W3_EXAMPLES)
def test_norm_nabla_P_is_twice_tau_difference_on_w3(name):
    spec = load_example(name)
    for x in points(spec, 4):
        _, _, curv = package(spec, x)
        rhs = 2 * (curv.tau - curv.tau_star_star)
        assert abs(curv.norm_nabla_P - rhs) <= 1e-10 * max(1.0, abs(curv.norm_nabla_P), abs(rhs))


@pytest.mark.parametrize("name", W3_EXAMPLES)
def test_theta_vanishes_on_w3(name):
    spec = load_example(name)
    for x in points(spec, 3):
        _, _, curv = package(spec, x)
        assert curv.theta.max_abs() <= 1e-12 * max(1.0, curv.F.max_abs())


def test_f_symmetries_on_twisted_chart():
    spec = load_example("twisted_chart")
    for x in points(spec, 4):
        fr, _, curv = package(spec, x)
        F, P = curv.F.data, fr.P
        s = max(1.0, curv.F.max_abs())
        assert np.max(np.abs(F - np.swapaxes(F, 1, 2))) <= 1e-12 * s
        FPP = np.einsum("xmn,my,nz->xyz", F, P, P)
        assert np.max(np.abs(FPP + F)) <= 1e-12 * s


def test_bisectional_errors_name_the_argument():
    spec = load_example("flat_product")
    fr, _, curv = package(spec, [0, 0, 0, 0])
    good = [1.0, 0.0, 1.0, 0.0] if not np.allclose(fr.P @ [1, 0, 1, 0], [1, 0, 1, 0]) else [1.0, 1.0, 0.0, 0.0]
    eig = np.linalg.eigh(fr.P)[1][:, 0]
    with pytest.raises(DegeneratePlaneError) as e:
        bisectional(fr, curv, eig, good)
    assert e.value.argument == "x"
    with pytest.raises(DegeneratePlaneError) as e:
        bisectional(fr, curv, good, eig)
    assert e.value.argument == "y"
    with pytest.raises(DegeneratePlaneError):
        sectional(fr, curv, [1, 0, 0, 0], [2, 0, 0, 0])


@pytest.mark.parametrize("name", ("sphere_block", "twisted_chart", "su2_line"))
def test_bisectional_invariant_under_plane_rescaling(name):
    spec = load_example(name)
    fr, _, curv = package(spec, points(spec, 1)[0])
    rng = np.random.default_rng(1)
    x, y = random_noneigenvector(rng, fr), random_noneigenvector(rng, fr)
    h = bisectional(fr, curv, x, y)
    assert bisectional(fr, curv, 2.5 * x, -0.5 * y) == pytest.approx(h, rel=1e-12, abs=1e-14)
    assert bisectional(fr, curv, y, x) == pytest.approx(h, rel=1e-12, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_sectional_depends_only_on_plane(a, b, c, dd):
    det = a * dd - b * c
    if abs(det) < 1e-2:
        return
    spec = load_example("twisted_chart")
    fr, _, curv = package(spec, [0.2, -0.4, 0.6, 0.1])
    x, y = np.array([1.0, 0.3, -0.2, 0.5]), np.array([0.1, -1.0, 0.4, 0.2])
    k = sectional(fr, curv, x, y)
    assert sectional(fr, curv, a * x + b * y, c * x + dd * y) == pytest.approx(k, rel=1e-9, abs=1e-12)
