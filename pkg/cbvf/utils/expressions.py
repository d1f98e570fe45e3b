"""A small arithmetic expression language for configs.

Grammar: numeric constants, variables ``x1..x3`` and ``u1..u3``, binary
``+ - * /``, unary ``+ -``, and the functions ``abs``, ``min``, ``max`` and
``pow``. Expressions are parsed with :mod:`ast`, checked against this
whitelist, and evaluated elementwise with numpy.
"""

import ast
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from cbvf.core.errors import ConfigError

VARIABLE = re.compile(r"^([xu])([1-3])$")

BINARY_OPS: dict[type, Callable[[Any, Any], Any]] = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
}

FUNCTIONS: dict[str, tuple[Callable[..., Any], int, Optional[int]]] = {
    # name: (implementation, min args, max args or None for variadic)
    "abs": (np.abs, 1, 1),
    "pow": (np.power, 2, 2),
    "min": (np.minimum, 2, None),
    "max": (np.maximum, 2, None),
}


def _reject(node: ast.AST, message: str, source: str) -> ConfigError:
    col = getattr(node, "col_offset", None)
    where = f" at column {col + 1}" if col is not None else ""
    return ConfigError(f"{message}{where} in expression {source!r}")


def _check(node: ast.AST, source: str, names: set[str]) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, source, names)
    elif isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise _reject(node, f"unsupported constant {node.value!r}", source)
    elif isinstance(node, ast.Name):
        if not VARIABLE.match(node.id):
            raise _reject(node, f"unknown variable '{node.id}'", source)
        names.add(node.id)
    elif isinstance(node, ast.BinOp):
        if type(node.op) not in BINARY_OPS:
            raise _reject(node, f"unsupported operator {type(node.op).__name__}", source)
        _check(node.left, source, names)
        _check(node.right, source, names)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.UAdd, ast.USub)):
            raise _reject(node, f"unsupported operator {type(node.op).__name__}", source)
        _check(node.operand, source, names)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise _reject(node, "only abs, min, max and pow may be called", source)
        if node.keywords:
            raise _reject(node, "keyword arguments are not allowed", source)
        _, lo, hi = FUNCTIONS[node.func.id]
        if len(node.args) < lo or (hi is not None and len(node.args) > hi):
            raise _reject(node, f"wrong number of arguments to {node.func.id}", source)
        for arg in node.args:
            _check(arg, source, names)
    else:
        raise _reject(node, f"unsupported syntax {type(node).__name__}", source)


@dataclass(frozen=True)
class Expression:
    """A parsed, validated expression over state and control variables."""

    source: str
    tree: ast.Expression = field(compare=False, repr=False)
    variables: frozenset[str] = frozenset()

    @classmethod
    def parse(cls, source: str) -> "Expression":
        if not isinstance(source, str) or not source.strip():
            raise ConfigError("expression must be a non-empty string")
        try:
            tree = ast.parse(source.strip(), mode="eval")
        except SyntaxError as e:
            raise ConfigError(f"invalid expression {source!r}: {e.msg}") from e
        names: set[str] = set()
        _check(tree, source, names)
        return cls(source=source, tree=tree, variables=frozenset(names))

    def max_index(self, prefix: str) -> int:
        indices = [int(name[1]) for name in self.variables if name[0] == prefix]
        return max(indices, default=0)

    def evaluate(self, x: np.ndarray, u: Optional[np.ndarray] = None) -> np.ndarray:
        """Evaluate with ``x[..., i]`` bound to x{i+1} and ``u[..., j]`` to u{j+1}."""
        env: dict[str, Any] = {}
        x = np.asarray(x, dtype=float)
        for i in range(x.shape[-1]):
            env[f"x{i + 1}"] = x[..., i]
        if u is not None:
            u = np.asarray(u, dtype=float)
            for j in range(u.shape[-1]):
                env[f"u{j + 1}"] = u[..., j]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(self._eval(self.tree.body, env), dtype=float)

    def _eval(self, node: ast.AST, env: dict[str, Any]) -> Any:
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ConfigError(f"variable '{node.id}' is not bound in {self.source!r}")
            return env[node.id]
        if isinstance(node, ast.BinOp):
            left, right = self._eval(node.left, env), self._eval(node.right, env)
            return BINARY_OPS[type(node.op)](left, right)
        if isinstance(node, ast.UnaryOp):
            operand = self._eval(node.operand, env)
            return -operand if isinstance(node.op, ast.USub) else operand
        if isinstance(node, ast.Call):
            fn, _, hi = FUNCTIONS[node.func.id]
            args = [self._eval(arg, env) for arg in node.args]
            if hi is None:
                result = args[0]
                for arg in args[1:]:
                    result = fn(result, arg)
                return result
            return fn(*args)
        raise ConfigError(f"unsupported syntax {type(node).__name__} in {self.source!r}")


def state_function(source: str, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Compile an expression over x1..x{dim} into ``fn(states[..., dim]) -> values[...]``."""
    expr = Expression.parse(source)
    if expr.max_index("u"):
        raise ConfigError(f"state function {source!r} may not use control variables")
    if expr.max_index("x") > dim:
        raise ConfigError(f"expression {source!r} uses x{expr.max_index('x')} but dim is {dim}")

    def fn(states: np.ndarray) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        return np.broadcast_to(expr.evaluate(states), states.shape[:-1]).copy()

    fn.__doc__ = source
    return fn


def dynamics_function(
    sources: list[str], control_dim: int
) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Compile one expression per state component into a vectorized f(x, u)."""
    dim = len(sources)
    exprs = [Expression.parse(s) for s in sources]
    for expr in exprs:
        if expr.max_index("x") > dim:
            used = expr.max_index("x")
            raise ConfigError(f"dynamics {expr.source!r} uses x{used} but dim is {dim}")
        if expr.max_index("u") > control_dim:
            raise ConfigError(
                f"dynamics {expr.source!r} uses u{expr.max_index('u')} but U has "
                f"{control_dim} component(s)"
            )

    def f(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(u)[:-1])
        return np.stack([np.broadcast_to(e.evaluate(x, u), shape) for e in exprs], axis=-1)

    return f
