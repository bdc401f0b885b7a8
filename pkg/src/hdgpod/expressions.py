"""Safe closed-form expressions for problem data.

Supports arithmetic (+ - * / ** and unary minus), the functions sin, cos,
exp, the constant pi, and the variables x, y, z, t.  Expressions are
parsed with :mod:`ast` and validated against a whitelist before being
compiled, then evaluate vectorized over numpy arrays.
"""

import ast
import math

import numpy as np

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTANTS = {"pi": math.pi}
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARYOPS = (ast.USub, ast.UAdd)


class ExpressionError(ValueError):
    """Raised for expressions outside the supported grammar."""


def _validate(node, variables):
    if isinstance(node, ast.Expression):
        _validate(node.body, variables)
    elif isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        _validate(node.left, variables)
        _validate(node.right, variables)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, _UNARYOPS):
        _validate(node.operand, variables)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError(f"unknown function in expression: {ast.dump(node.func)}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id}() takes exactly one argument")
        _validate(node.args[0], variables)
    elif isinstance(node, ast.Name):
        if node.id not in variables and node.id not in _CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r} in expression")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal {node.value!r}")
    else:
        raise ExpressionError(f"unsupported syntax: {type(node).__name__}")


def compile_expression(text, variables):
    """Compile ``text`` into a function of the named variables."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc}") from None
    _validate(tree, tuple(variables))
    code = compile(tree, "<expression>", "eval")
    namespace = {**_FUNCTIONS, **_CONSTANTS, "__builtins__": {}}

    def evaluate(**values):
        return eval(code, namespace, values)

    return evaluate


def spatial_field(text, dim):
    """A function of points (..., dim), for time-independent data."""
    names = ("x", "y", "z")[:dim]
    fn = compile_expression(text, names + ("t",))

    def field(points):
        coords = {name: points[..., i] for i, name in enumerate(names)}
        vals = fn(t=0.0, **coords)
        return np.broadcast_to(np.asarray(vals, dtype=float), points.shape[:-1])

    return field


def space_time_field(text, dim):
    """A function f(points, t) with points of shape (..., dim)."""
    names = ("x", "y", "z")[:dim]
    fn = compile_expression(text, names + ("t",))

    def field(points, t):
        coords = {name: points[..., i] for i, name in enumerate(names)}
        vals = fn(t=t, **coords)
        return np.broadcast_to(np.asarray(vals, dtype=float), points.shape[:-1])

    return field
