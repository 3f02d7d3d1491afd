import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apm.expr import (
    BinOp,
    ExprDomainError,
    ExprSyntaxError,
    Neg,
    Num,
    Var,
    eval_jet2,
    eval_value,
    parse_expr,
    to_source,
    variables,
)


def fd_grad_hess(e, x, h=1e-5):
    d = len(x)
    f = lambda p: eval_value(e, p)  # noqa: E731
    grad = np.empty(d)
    hess = np.empty((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h
        grad[i] = (f(x + ei) - f(x - ei)) / (2 * h)
        for j in range(d):
            ej = np.zeros(d)
            ej[j] = h
            hess[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
    return grad, hess


def test_constant_plus_zero_term():
    e = parse_expr("1 + 0*x1", 2)
    assert eval_value(e, [0.3, -2.0]) == 1.0


def test_pythagorean_identity():
    e = parse_expr("sin(x1)^2 + cos(x1)^2", 1)
    assert abs(eval_value(e, [0.7]) - 1.0) < 1e-15


def test_exp_jet_against_closed_form_and_differences():
    e = parse_expr("exp(2*x2)", 2)
    jet = eval_jet2(e, [0.0, 0.5])
    assert jet.value == pytest.approx(math.e, rel=1e-15)
    assert np.allclose(jet.grad, [0.0, 2 * math.e], rtol=1e-15)
    assert jet.hess[1, 1] == pytest.approx(4 * math.e, rel=1e-15)
    g, h = fd_grad_hess(e, np.array([0.0, 0.5]))
    assert np.allclose(jet.grad, g, rtol=1e-6)
    assert abs(jet.hess[1, 1] - h[1, 1]) < 1e-6 * 4 * math.e


def test_constant_jet():
    jet = eval_jet2(parse_expr("3.5", 3), [1.0, 2.0, 3.0])
    assert jet.value == 3.5
    assert not jet.grad.any() and not jet.hess.any()


def test_bilinear_jet():
    jet = eval_jet2(parse_expr("x1*x2", 2), [2.0, 3.0])
    assert jet.value == 6.0
    assert np.array_equal(jet.grad, [3.0, 2.0])
    assert np.array_equal(jet.hess, [[0.0, 1.0], [1.0, 0.0]])


def test_product_matches_differences():
    e = parse_expr("sin(x1)*exp(x2)", 2)
    x = np.array([0.3, -0.2])
    jet = eval_jet2(e, x)
    g, h = fd_grad_hess(e, x)
    assert np.allclose(jet.grad, g, rtol=1e-6, atol=1e-10)
    assert np.allclose(jet.hess, h, rtol=1e-5, atol=1e-6)


def test_precedence_power_over_unary_minus():
    assert eval_value(parse_expr("-2^2", 1), [0.0]) == -4.0
    assert eval_value(parse_expr("2^3^2", 1), [0.0]) == 512.0
    assert eval_value(parse_expr("8/2/2", 1), [0.0]) == 2.0
    assert eval_value(parse_expr("1 - 2 - 3", 1), [0.0]) == -4.0
    assert eval_value(parse_expr("2^-1", 1), [0.0]) == 0.5


def test_tree_shape():
    e = parse_expr("x1 + 2*x2", 2)
    assert e == BinOp("+", Var(1), BinOp("*", Num(2.0), Var(2)))
    assert variables(e) == {1, 2}


@pytest.mark.parametrize(
    "source, offset",
    [("x1 +", 4), ("(x1", 3), ("x1 $ 2", 3), ("", 0), ("2 x1", 2)],
)
def test_syntax_errors_carry_offset(source, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr(source, 2)
    assert info.value.offset == offset


def test_out_of_range_variable_and_unknown_function():
    with pytest.raises(ExprSyntaxError, match="x3"):
        parse_expr("x3", 2)
    with pytest.raises(ExprSyntaxError, match="foo"):
        parse_expr("foo(x1)", 2)


def test_domain_errors():
    with pytest.raises(ExprDomainError):
        eval_jet2(parse_expr("log(x1)", 1), [0.0])
    with pytest.raises(ExprDomainError):
        eval_jet2(parse_expr("sqrt(x1)", 1), [-1.0])
    with pytest.raises(ExprDomainError):
        eval_jet2(parse_expr("1/x1", 1), [0.0])
    with pytest.raises(ExprDomainError):
        eval_jet2(parse_expr("x1^0.5", 1), [-1.0])


def test_integer_power_of_negative_base():
    jet = eval_jet2(parse_expr("x1^3", 1), [-2.0])
    assert (jet.value, jet.grad[0], jet.hess[0, 0]) == (-8.0, 12.0, -12.0)


CORPUS = [
    "1", "x1", "-x1", "x1 + x2", "x1 - x2 - x3", "x1 * x2 / x3", "x1^2", "x1^x2", "2^x1^2",
    "-x1^2", "(-x1)^2", "sin(x1)", "cos(x2 + x1)", "exp(-x1*x2)", "log(1 + x1^2)",
    "sqrt(2 + sin(x3))", "tanh(x1 - x2)", "sin(x1)^2 + cos(x1)^2", "exp(2*x1)", "x1*x2*x3",
    "1/(1 + x1^2)", "(x1 + x2)*(x1 - x2)", "3.25e-3*x1", "1e3", "0.5", "x1/x2/x3", "((x1))",
    "sin(cos(exp(x1)))", "x1^-2", "2*-x1", "-(-x1)", "x3^2 - 2*x3 + 1", "exp(x1*x2)",
    "cos(x3*x1)", "sin(x2 + x4^2)", "-cos(x3*x1)", "x4^2", "sqrt(x1^2 + x2^2 + 1)",
    "log(exp(x1))", "tanh(x1)^2", "1 - tanh(x1)^2", "x1 + x2 + x3 + x4", "x1*(x2*(x3*x4))",
    "(x1)^(x2)", "exp(sin(x1))*cos(x2)", "2.5*x1 - 0.25", "-1", "-(1)", "x2^2/2", "1e-8*x4",
    "sin(x1)*exp(x2)", "-2^2", "x1^3^2",
]


@pytest.mark.parametrize("source", CORPUS)
def test_print_parse_round_trip(source):
    e = parse_expr(source, 4)
    printed = to_source(e)
    again = parse_expr(printed, 4)
    assert again == e
    assert to_source(again) == printed


_leaf = st.one_of(
    st.integers(1, 3).map(Var),
    # the parser only ever produces non-negative literals (a sign is a Neg node)
    st.floats(0, 3, allow_nan=False, allow_infinity=False, width=32).map(lambda v: Num(abs(float(v)))),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(["+", "-", "*"]), children, children).map(lambda t: BinOp(*t)),
        children.map(lambda c: BinOp("^", c, Num(2.0))),
        children.map(Neg),
    )


polynomials = st.recursive(_leaf, _extend, max_leaves=8)


@settings(max_examples=60, deadline=None)
@given(polynomials, st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_jet_matches_differences_on_random_polynomials(e, x):
    x = np.array(x)
    jet = eval_jet2(e, x)
    g, h = fd_grad_hess(e, x, h=1e-4)
    scale = max(1.0, abs(jet.value), float(np.max(np.abs(jet.grad))), float(np.max(np.abs(jet.hess))))
    assert np.allclose(jet.grad, g, atol=1e-6 * scale)
    assert np.allclose(jet.hess, h, atol=1e-4 * scale)
    assert np.array_equal(jet.hess, jet.hess.T)


@settings(max_examples=60, deadline=None)
@given(polynomials)
def test_round_trip_on_random_trees(e):
    assert parse_expr(to_source(e), 3) == e

