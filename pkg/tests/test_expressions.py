import numpy as np
import pytest

from hdgpod.expressions import (ExpressionError, compile_expression,
                                space_time_field, spatial_field)


def test_paper_initial_data_2d():
    field = spatial_field("sin(pi*x)*sin(pi*y)*exp(x)*cos(y)", 2)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, (50, 2))
    expected = (np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])
                * np.exp(pts[:, 0]) * np.cos(pts[:, 1]))
    assert np.allclose(field(pts), expected, atol=1e-15)


def test_paper_initial_data_3d():
    field = spatial_field("sin(pi*x)*sin(pi*y)*sin(pi*z)*exp(x)*cos(y)*z", 3)
    rng = np.random.default_rng(1)
    pts = rng.uniform(0, 1, (20, 3))
    expected = (np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])
                * np.sin(np.pi * pts[:, 2]) * np.exp(pts[:, 0])
                * np.cos(pts[:, 1]) * pts[:, 2])
    assert np.allclose(field(pts), expected, atol=1e-15)


def test_time_dependence_and_constants():
    f = space_time_field("exp(-2*t)*x + pi", 2)
    pts = np.array([[0.5, 0.25]])
    assert f(pts, 0.0)[0] == pytest.approx(0.5 + np.pi)
    assert f(pts, 1.0)[0] == pytest.approx(0.5 * np.exp(-2.0) + np.pi)


def test_constant_expression_broadcasts():
    field = spatial_field("1 + 2**2", 2)
    out = field(np.zeros((7, 2)))
    assert out.shape == (7,)
    assert np.all(out == 5.0)


@pytest.mark.parametrize("bad", [
    "__import__('os')",
    "x.real",
    "open('f')",
    "lambda: 1",
    "x if x else y",
    "[1,2]",
    "unknown_name",
    "sin(x, y)",
    "q + 1",
])
def test_rejects_out_of_grammar(bad):
    with pytest.raises(ExpressionError):
        compile_expression(bad, ("x", "y", "t"))


def test_syntax_error_message():
    with pytest.raises(ExpressionError, match="cannot parse"):
        compile_expression("sin(", ("x",))
