import numpy as np
import pytest

from apm import EXAMPLES, load_example
from apm.expr import eval_value

CHART_EXAMPLES = ("flat_product", "warped_chart", "sphere_block", "twisted_chart")
LIE_EXAMPLES = ("heisenberg_padded", "su2_line", "searched_w3")
W3_EXAMPLES = ("flat_product", "su2_line", "searched_w3")


@pytest.fixture(scope="session")
def examples():
    return {name: load_example(name) for name in EXAMPLES}


def metric_values(spec, x):
    d = spec.dim
    return np.array([[eval_value(spec.metric[i][j], x) for j in range(d)] for i in range(d)])


def fd_christoffel(spec, x, h=1e-5):
    """Gamma[i, j, k] = component k of nabla_i d_j, from central differences of g only."""
    d = spec.dim
    x = np.asarray(x, float)
    dg = np.empty((d, d, d))
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        dg[a] = (metric_values(spec, x + e) - metric_values(spec, x - e)) / (2 * h)
    g_inv = np.linalg.inv(metric_values(spec, x))
    low = 0.5 * (np.einsum("ijl->ijl", dg) + np.einsum("jil->ijl", dg) - np.einsum("lij->ijl", dg))
    return np.einsum("ijl,lk->ijk", low, g_inv)


def fd_riemann(spec, x, h=1e-3):
    """R[i, j, k, w] = g(R(d_i, d_j) d_k, d_w) with derivatives of Gamma by central differences."""
    d = spec.dim
    x = np.asarray(x, float)
    G = fd_christoffel(spec, x)
    dG = np.empty((d, d, d, d))
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        dG[a] = (fd_christoffel(spec, x + e) - fd_christoffel(spec, x - e)) / (2 * h)
    # R(d_i, d_j) d_k = (d_i G_jk^m - d_j G_ik^m + G_jk^l G_il^m - G_ik^l G_jl^m) d_m
    up = (
        dG
        - np.swapaxes(dG, 0, 1)
        + np.einsum("jkl,ilm->ijkm", G, G)
        - np.einsum("ikl,jlm->ijkm", G, G)
    )
    return np.einsum("ijkm,mw->ijkw", up, metric_values(spec, x))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep
