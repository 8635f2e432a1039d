"""Closed-form coefficient expressions over the spatial variables x1..xd.

Expressions are parsed with Python's ``ast`` module, restricted to a small
whitelist (arithmetic, powers, exp/sin/cos, the constants pi and e), and
evaluated vectorized over numpy point arrays.  The same object also carries
small-step central-difference derivatives so that twice-differentiable
trial functions can be differentiated at arbitrary points, independently of
any grid.
"""

import ast
import math

import numpy as np

from .errors import EvaluationError, ParseError

_FUNCTIONS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
}

_NAMED_CONSTANTS = {
    "pi": math.pi,
    "e": math.e,
}

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)

# Relative step for pointwise derivative sampling.  eps**(1/4-ish) balances
# truncation against cancellation in second differences.
FD_REL_STEP = 1.2e-4


class Expr:
    """A scalar coefficient: either a parsed expression tree or a closure.

    Parsed expressions round-trip through :func:`format_expr`; synthetic ones
    (e.g. manufactured right-hand sides) only evaluate.
    """

    __slots__ = ("dim", "_tree", "_fn", "_label")

    def __init__(self, dim: int, tree=None, fn=None, label: str | None = None):
        if tree is None and fn is None:
            raise ValueError("Expr needs a parse tree or a callable")
        self.dim = int(dim)
        self._tree = tree
        self._fn = fn
        self._label = label

    @property
    def is_synthetic(self) -> bool:
        return self._tree is None

    @property
    def text(self) -> str:
        if self._tree is not None:
            return ast.unparse(self._tree)
        return self._label or "<synthetic>"

    def __repr__(self):
        return f"Expr({self.text!r}, dim={self.dim})"

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at points of shape (..., dim); returns shape (...,)."""
        points = np.asarray(points, dtype=float)
        if points.shape[-1] != self.dim:
            raise ValueError(f"expected points with last axis {self.dim}, got {points.shape}")
        if self._tree is not None:
            out = _eval_tree(self._tree.body, points)
        else:
            out = np.asarray(self._fn(points), dtype=float)
        return np.broadcast_to(out, points.shape[:-1]).astype(float, copy=True)

    def eval_checked(self, points: np.ndarray) -> np.ndarray:
        """Evaluate and raise :class:`EvaluationError` on any non-finite value."""
        points = np.asarray(points, dtype=float)
        with np.errstate(all="ignore"):
            values = self(points)
        bad = ~np.isfinite(values)
        if bad.any():
            where = np.argwhere(bad)[0]
            witness = points[tuple(where)]
            raise EvaluationError(f"expression '{self.text}' is not finite", point=witness)
        return values

    def equivalent(self, other: "Expr") -> bool:
        """Structural equality of parse trees (synthetic exprs compare by identity)."""
        if self._tree is None or other._tree is None:
            return self is other
        return ast.dump(self._tree) == ast.dump(other._tree)

    # -- pointwise derivatives (central differences with a tiny analytic step) --

    def _steps(self, widths) -> np.ndarray:
        widths = np.asarray(widths, dtype=float)
        if widths.shape != (self.dim,):
            raise ValueError("widths must have one entry per axis")
        return FD_REL_STEP * np.maximum(widths, 1.0)

    def fd_gradient(self, points: np.ndarray, widths) -> np.ndarray:
        """Gradient at arbitrary points, shape (..., dim)."""
        points = np.asarray(points, dtype=float)
        steps = self._steps(widths)
        out = np.empty(points.shape, dtype=float)
        for i in range(self.dim):
            dp = np.zeros(self.dim)
            dp[i] = steps[i]
            out[..., i] = (self(points + dp) - self(points - dp)) / (2.0 * steps[i])
        return out

    def fd_hessian(self, points: np.ndarray, widths) -> np.ndarray:
        """Hessian at arbitrary points, shape (..., dim, dim)."""
        points = np.asarray(points, dtype=float)
        steps = self._steps(widths)
        d = self.dim
        out = np.empty(points.shape[:-1] + (d, d), dtype=float)
        f0 = self(points)
        for i in range(d):
            di = np.zeros(d)
            di[i] = steps[i]
            out[..., i, i] = (self(points + di) - 2.0 * f0 + self(points - di)) / steps[i] ** 2
            for j in range(i + 1, d):
                dj = np.zeros(d)
                dj[j] = steps[j]
                mixed = (
                    self(points + di + dj)
                    - self(points + di - dj)
                    - self(points - di + dj)
                    + self(points - di - dj)
                ) / (4.0 * steps[i] * steps[j])
                out[..., i, j] = mixed
                out[..., j, i] = mixed
        return out


def _validate_tree(node: ast.AST, dim: int, source: str) -> None:
    if isinstance(node, ast.Expression):
        _validate_tree(node.body, dim, source)
        return
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ParseError(f"non-numeric constant {node.value!r}", node.lineno, node.col_offset)
        return
    if isinstance(node, ast.Name):
        name = node.id
        if name in _NAMED_CONSTANTS:
            return
        if name.startswith("x") and name[1:].isdigit():
            k = int(name[1:])
            if 1 <= k <= dim:
                return
            raise ParseError(f"variable {name} out of range for dimension {dim}", node.lineno, node.col_offset)
        raise ParseError(f"unknown name '{name}'", node.lineno, node.col_offset)
    if isinstance(node, ast.BinOp):
        if not isinstance(node.op, _ALLOWED_BINOPS):
            raise ParseError(f"operator {type(node.op).__name__} not allowed", node.lineno, node.col_offset)
        _validate_tree(node.left, dim, source)
        _validate_tree(node.right, dim, source)
        return
    if isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ParseError(f"unary operator {type(node.op).__name__} not allowed", node.lineno, node.col_offset)
        _validate_tree(node.operand, dim, source)
        return
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ParseError("only exp, sin, cos calls are allowed", node.lineno, node.col_offset)
        if len(node.args) != 1 or node.keywords:
            raise ParseError(f"{node.func.id} takes exactly one argument", node.lineno, node.col_offset)
        _validate_tree(node.args[0], dim, source)
        return
    raise ParseError(
        f"unsupported syntax {type(node).__name__}",
        getattr(node, "lineno", None),
        getattr(node, "col_offset", None),
    )


def _eval_tree(node: ast.AST, points: np.ndarray):
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in _NAMED_CONSTANTS:
            return _NAMED_CONSTANTS[node.id]
        return points[..., int(node.id[1:]) - 1]
    if isinstance(node, ast.BinOp):
        left = _eval_tree(node.left, points)
        right = _eval_tree(node.right, points)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.divide(left, right)
        with np.errstate(invalid="ignore", over="ignore"):
            return np.power(left, right)
    if isinstance(node, ast.UnaryOp):
        value = _eval_tree(node.operand, points)
        return -value if isinstance(node.op, ast.USub) else +value
    if isinstance(node, ast.Call):
        with np.errstate(over="ignore", invalid="ignore"):
            return _FUNCTIONS[node.func.id](_eval_tree(node.args[0], points))
    raise AssertionError(f"unvalidated node {node!r}")


def parse_expr(text: str, dim: int) -> Expr:
    """Parse an expression over x1..x{dim}.  '^' is accepted as power."""
    source = text.strip().replace("^", "**")
    if not source:
        raise ParseError("empty expression")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"invalid expression {text!r}: {exc.msg}", exc.lineno, exc.offset) from None
    _validate_tree(tree, dim, source)
    return Expr(dim, tree=tree)


def constant_expr(value: float, dim: int) -> Expr:
    return parse_expr(repr(float(value)), dim)


def synthetic_expr(fn, dim: int, label: str) -> Expr:
    """Wrap a vectorized callable points->(...,) as a non-printable expression."""
    return Expr(dim, fn=fn, label=label)


def format_expr(expr: Expr) -> str:
    """Printable form; parse(format(e)) is structurally equivalent to e."""
    if expr.is_synthetic:
        raise ValueError(f"synthetic expression {expr.text!r} has no printable form")
    return expr.text


def is_constant(expr: Expr) -> bool:
    """True when the parse tree references no spatial variable."""
    if expr._tree is None:
        return False
    for node in ast.walk(expr._tree):
        if isinstance(node, ast.Name) and node.id not in _NAMED_CONSTANTS:
            return False
    return True
