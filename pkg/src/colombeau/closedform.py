"""Closed-form rules parsed from text.

Two small languages are supported:

* x-expressions (optionally with ``eps``) such as ``"sin(x)"`` or
  ``"bump(x/eps - 1)"``, compiled with sympy so that closed-form
  derivatives in x are available to any order;
* eps-expressions such as ``"eps**2 * frac(1/eps)"``, evaluated on the
  exact fractional scaling tag by a restricted AST interpreter.
"""

from __future__ import annotations

import ast
import cmath
import functools
import math
import operator
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
import sympy as sp

from .domain import as_points


class ExpressionError(ValueError):
    pass


# -- sympy x-expressions ----------------------------------------------------

def _bump_expr(t):
    """exp(-1/(1 - 4 t^2)) on (-1/2, 1/2), zero elsewhere; maximum exp(-1) at 0."""
    return sp.Piecewise((sp.exp(-1 / (1 - 4 * t**2)), sp.Abs(t) < sp.Rational(1, 2)), (0, True))


def _variables(n: int) -> list[sp.Symbol]:
    if n == 1:
        return [sp.Symbol("x", real=True)]
    return [sp.Symbol(f"x{i + 1}", real=True) for i in range(n)]


def _parse(text: str, n: int, with_eps: bool):
    xs = _variables(n)
    local = {str(x): x for x in xs}
    eps = sp.Symbol("eps", positive=True)
    if with_eps:
        local["eps"] = eps
    local["bump"] = _bump_expr
    try:
        expr = sp.sympify(text, locals=local)
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc}") from exc
    allowed = set(xs) | ({eps} if with_eps else set())
    extra = expr.free_symbols - allowed
    if extra:
        raise ExpressionError(f"unknown names {sorted(map(str, extra))} in {text!r}")
    return expr, xs, eps


class XExpression:
    """A closed form in x (and eps) with lazily compiled x-derivatives."""

    def __init__(self, text: str, n: int = 1, with_eps: bool = False):
        self.text = text
        self.n = n
        self.with_eps = with_eps
        self.expr, self._xs, self._eps = _parse(text, n, with_eps)
        self.is_complex = bool(self.expr.has(sp.I))

    @functools.lru_cache(maxsize=None)
    def _compiled(self, alpha: tuple[int, ...]) -> Callable:
        e = self.expr
        for x, a in zip(self._xs, alpha):
            if a:
                e = sp.diff(e, x, a)
        args = ([self._eps] if self.with_eps else []) + self._xs
        return sp.lambdify(args, e, "numpy")

    def derivative(self, alpha: Optional[tuple[int, ...]] = None) -> Callable:
        alpha = tuple(alpha) if alpha else (0,) * self.n
        fn = self._compiled(alpha)
        dtype = complex if self.is_complex else float

        if self.with_eps:
            def rule(eps, pts):
                pts = as_points(pts, self.n)
                with np.errstate(all="ignore"):
                    v = fn(eps, *[pts[:, i] for i in range(self.n)])
                return np.broadcast_to(np.asarray(v, dtype=dtype), (pts.shape[0],)).copy()
        else:
            def rule(pts):
                pts = as_points(pts, self.n)
                with np.errstate(all="ignore"):
                    v = fn(*[pts[:, i] for i in range(self.n)])
                return np.broadcast_to(np.asarray(v, dtype=dtype), (pts.shape[0],)).copy()
        return rule

    def __call__(self, *args):
        return self.derivative(None)(*args)

    def __repr__(self):
        return f"XExpression({self.text!r})"


# -- eps-expressions on exact tags ------------------------------------------

def _to_float(v):
    return float(v) if isinstance(v, Fraction) else v


def _frac_part(v):
    return v - math.floor(v)


def _lift(fn):
    def wrapped(v):
        v = _to_float(v)
        if isinstance(v, complex):
            return getattr(cmath, fn.__name__)(v)
        try:
            return fn(v)
        except OverflowError:
            # only exp overflows on finite input; its limit is +inf
            return math.inf
    return wrapped


_FUNCS: dict[str, Callable] = {
    "sin": _lift(math.sin),
    "cos": _lift(math.cos),
    "exp": _lift(math.exp),
    "log": _lift(math.log),
    "sqrt": _lift(math.sqrt),
    "abs": abs,
    "frac": _frac_part,
    "floor": lambda v: math.floor(v),
    "log2": lambda v: math.log2(_to_float(v)),
}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


class EpsExpression:
    """Arithmetic in ``eps`` evaluated on the exact Fraction tag.

    Rational operations stay exact, so e.g. ``frac(1/eps)`` is exactly 0 at
    eps = 2^-k.  Transcendental functions fall back to floats.
    """

    def __init__(self, text: str):
        self.text = text
        try:
            self._tree = ast.parse(text, mode="eval").body
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse eps-expression {text!r}: {exc.msg}") from exc
        self._check(self._tree)

    def _check(self, node):
        if isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed in {self.text!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if type(node.op) not in _UNOPS:
                raise ExpressionError(f"operator not allowed in {self.text!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
                raise ExpressionError(f"unknown function in {self.text!r}")
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"functions take one argument in {self.text!r}")
            self._check(node.args[0])
        elif isinstance(node, ast.Name):
            if node.id != "eps" and node.id not in _CONSTS:
                raise ExpressionError(f"unknown name {node.id!r} in {self.text!r}")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float, complex)) or isinstance(node.value, bool):
                raise ExpressionError(f"bad literal in {self.text!r}")
        else:
            raise ExpressionError(f"unsupported syntax {type(node).__name__} in {self.text!r}")

    def _eval(self, node, eps):
        if isinstance(node, ast.BinOp):
            a, b = self._eval(node.left, eps), self._eval(node.right, eps)
            if isinstance(node.op, ast.Pow) and isinstance(a, Fraction) and not (
                isinstance(b, int) or (isinstance(b, Fraction) and b.denominator == 1)
            ):
                a = float(a)
            return _BINOPS[type(node.op)](a, b)
        if isinstance(node, ast.UnaryOp):
            return _UNOPS[type(node.op)](self._eval(node.operand, eps))
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](self._eval(node.args[0], eps))
        if isinstance(node, ast.Name):
            return eps if node.id == "eps" else _CONSTS[node.id]
        value = node.value
        if isinstance(value, float) and value.is_integer():
            return Fraction(int(value))
        return Fraction(value) if isinstance(value, int) else value

    def __call__(self, eps) -> complex:
        v = self._eval(self._tree, eps if isinstance(eps, Fraction) else Fraction(eps))
        if isinstance(v, complex):
            return v
        return float(v)

    def __repr__(self):
        return f"EpsExpression({self.text!r})"
