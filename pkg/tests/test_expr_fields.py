import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windfront import expr
from windfront.errors import ParseError, ValidationError
from windfront.fields import ConstantField, ExpressionField, GridField, as_field


def ev(text, **env):
    return float(expr.evaluate(expr.parse(text), env))


@pytest.mark.parametrize(
    "text, value",
    [
        ("1 + 2 * 3", 7.0),
        ("(1 + 2) * 3", 9.0),
        ("2 ^ 3 ^ 2", 512.0),
        ("-2 ^ 2", -4.0),
        ("8 / 4 / 2", 1.0),
        ("min(3, 1) + max(2, 5)", 6.0),
        ("sqrt(16) + exp(0) + cos(0) + sin(0)", 6.0),
        ("2 * pi", 2 * math.pi),
        ("1e-3 * 1000", 1.0),
    ],
)
def test_grammar(text, value):
    assert ev(text) == pytest.approx(value, rel=1e-15)


def test_variables():
    assert ev("0.2*y + x*t", x=2.0, y=3.0, t=0.5) == pytest.approx(1.6)


@pytest.mark.parametrize("bad", ["1 +", "foo(1)", "sin(1, 2)", "(1", "x $ y", "import os", "q + 1", ""])
def test_parse_errors(bad):
    with pytest.raises(ParseError):
        expr.parse(bad)


def test_parse_error_has_column():
    with pytest.raises(ParseError) as err:
        expr.parse("1 + * 2")
    assert err.value.column is not None


def test_free_variables():
    assert expr.free_variables(expr.parse("x*sin(t) + 3")) == {"x", "t"}


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(-3, 3),
    b=st.floats(-3, 3),
    x=st.floats(0.1, 2),
    y=st.floats(-2, 2),
)
def test_symbolic_derivative_matches_central_difference(a, b, x, y):
    text = f"{a}*x^2*y + sin({b}*y) + exp(-x) + sqrt(x + 1)*cos(x*y)"
    node = expr.parse(text)
    h = 1e-6
    for var in ("x", "y"):
        d = expr.evaluate(expr.diff(node, var), {"x": x, "y": y})
        env_p = {"x": x + h * (var == "x"), "y": y + h * (var == "y")}
        env_m = {"x": x - h * (var == "x"), "y": y - h * (var == "y")}
        fd = (expr.evaluate(node, env_p) - expr.evaluate(node, env_m)) / (2 * h)
        assert d == pytest.approx(fd, rel=1e-6, abs=1e-6)


def test_expression_field_batched():
    f = ExpressionField(["0.2*y", 0.0])
    x = np.array([[0.0, 1.0], [2.0, -1.0], [5.0, 0.5]])
    out = f(x, 0.0)
    assert out.shape == (3, 2)
    assert np.allclose(out[:, 0], [0.2, -0.2, 0.1])
    assert not f.time_dependent and not f.constant
    d = f.derivatives(x, 0.0)
    assert d.shape == (3, 3, 2)  # (t, x, y) x batch x shape
    assert np.allclose(d[2, :, 0], 0.2) and np.allclose(d[1], 0.0)


def test_as_field_constant_folding():
    assert isinstance(as_field("2*3"), ConstantField)
    assert isinstance(as_field([[1.0, 0.0], [0.0, 1.0]]), ConstantField)


def test_grid_field_bilinear_linear_time(tmp_path):
    xs = np.linspace(0, 2, 5)
    ys = np.linspace(-1, 1, 4)
    ts = np.array([0.0, 1.0])
    rows = ["x,y,t,Wx,Wy"]
    for t in ts:
        for x in xs:
            for y in ys:
                rows.append(f"{x},{y},{t},{1 + 2 * x + 3 * y + t},{x * y}")
    p = tmp_path / "wind.csv"
    p.write_text("\n".join(rows) + "\n")
    f = GridField.from_wind_csv(p)
    q = np.array([[0.3, 0.1], [1.7, -0.6]])
    val = f(q, 0.25)
    # affine data is reproduced exactly by bilinear x linear interpolation
    assert np.allclose(val[:, 0], 1 + 2 * q[:, 0] + 3 * q[:, 1] + 0.25, atol=1e-12)
    d = f.derivatives(q, 0.5)
    assert np.allclose(d[0, :, 0], 1.0) and np.allclose(d[1, :, 0], 2.0) and np.allclose(d[2, :, 0], 3.0)
    assert f.time_dependent and f.bounds is not None


def test_grid_field_rejects_bad_header(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("x,y,Wx,Wy\n0,0,1,1\n")
    with pytest.raises(ValidationError):
        GridField.from_wind_csv(p)
