"""Generalized numbers and points as combinator trees over test-function tags.

A number is a rule phi -> C built from a fixed vocabulary:

    (const V)                       constant
    (scale_of)                      the exact scaling tag eps of phi
    (closed "EXPR")                 closed form in eps, e.g. "eps**2*frac(1/eps)"
    (gen_id_match "ID" A B)         A(phi) if phi's generator is ID, else B(phi)
    (evidence_table D ("ID" "EPS" V) ...)
                                    V when phi == S_EPS phi_ID exactly, else D(phi)
    (add A B) (sub A B) (mul A B) (div A B) (neg A) (pow A K)
    (recip A)                       1/A where A != 0, 0 elsewhere
    (zero_ind A)                    1 where A == 0, 0 elsewhere
    (point_value R X)               R(phi, X(phi)) inside U(Omega), 0 outside

Trees print to and parse from a text format headed by ``FORMAT``, so
scenarios can define numbers and points declaratively.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .closedform import EpsExpression
from .domain import KBox
from .testfn import TestFunction

FORMAT = "cgn/1"


class ParseError(ValueError):
    def __init__(self, msg: str, pos: int = -1, text: str = ""):
        where = f" at offset {pos}" if pos >= 0 else ""
        super().__init__(f"{msg}{where}" + (f": ...{text[max(0, pos - 10):pos + 10]}..." if text and pos >= 0 else ""))
        self.pos = pos


def _fmt_value(v) -> str:
    if isinstance(v, complex):
        return repr(v).strip("()")
    return repr(float(v))


class Num:
    """Base class for generalized-number rules."""

    real = True

    def __call__(self, phi: TestFunction):
        raise NotImplementedError

    def sexpr(self) -> str:
        raise NotImplementedError

    def __str__(self):
        return self.sexpr()

    def __repr__(self):
        return f"Num({self.sexpr()})"

    def evaluate_many(self, phis: Sequence[TestFunction]) -> np.ndarray:
        vals = [self(p) for p in phis]
        return np.array(vals, dtype=float if all(isinstance(v, float) for v in vals) else complex)

    # arithmetic
    def __add__(self, o):
        return Op("add", (self, as_num(o)))

    def __radd__(self, o):
        return Op("add", (as_num(o), self))

    def __sub__(self, o):
        return Op("sub", (self, as_num(o)))

    def __rsub__(self, o):
        return Op("sub", (as_num(o), self))

    def __mul__(self, o):
        return Op("mul", (self, as_num(o)))

    def __rmul__(self, o):
        return Op("mul", (as_num(o), self))

    def __truediv__(self, o):
        return Op("div", (self, as_num(o)))

    def __neg__(self):
        return Op("neg", (self,))

    def __pow__(self, k: int):
        return Pow(self, int(k))


def as_num(v) -> Num:
    if isinstance(v, Num):
        return v
    return Const(v)


@dataclass(frozen=True, repr=False)
class Const(Num):
    value: complex | float

    @property
    def real(self):
        return not isinstance(self.value, complex)

    def __call__(self, phi):
        return self.value if isinstance(self.value, complex) else float(self.value)

    def sexpr(self):
        return f"(const {_fmt_value(self.value)})"


@dataclass(frozen=True, repr=False)
class ScaleOf(Num):
    def __call__(self, phi):
        return float(phi.scale)

    def sexpr(self):
        return "(scale_of)"


@dataclass(frozen=True, repr=False)
class Closed(Num):
    text: str

    def __post_init__(self):
        object.__setattr__(self, "_expr", EpsExpression(self.text))

    @property
    def real(self):
        return "j" not in self.text

    def __call__(self, phi):
        return self._expr(phi.scale)

    def sexpr(self):
        return f'(closed "{self.text}")'


@dataclass(frozen=True, repr=False)
class GenIdMatch(Num):
    gen_id: str
    then: Num
    other: Num

    @property
    def real(self):
        return self.then.real and self.other.real

    def __call__(self, phi):
        return self.then(phi) if phi.generator_id == self.gen_id else self.other(phi)

    def sexpr(self):
        return f'(gen_id_match "{self.gen_id}" {self.then.sexpr()} {self.other.sexpr()})'


@dataclass(frozen=True, repr=False)
class EvidenceTable(Num):
    """Value lookup keyed by (generator id, exact scale) of an untranslated phi."""

    default: Num
    entries: tuple[tuple[str, Fraction, complex | float], ...]

    def __post_init__(self):
        object.__setattr__(self, "_index", {(g, e): v for g, e, v in self.entries})

    @property
    def real(self):
        return self.default.real and all(not isinstance(v, complex) for _, _, v in self.entries)

    def lookup(self, phi: TestFunction):
        if any(phi.shift):
            return None
        return self._index.get((phi.generator_id, phi.scale))

    def __call__(self, phi):
        v = self.lookup(phi)
        return self.default(phi) if v is None else v

    def sexpr(self):
        rows = " ".join(f'("{g}" "{e}" {_fmt_value(v)})' for g, e, v in self.entries)
        return f"(evidence_table {self.default.sexpr()}" + (f" {rows})" if rows else ")")


_OPS: dict[str, tuple[int, Callable]] = {
    "add": (2, lambda a, b: a + b),
    "sub": (2, lambda a, b: a - b),
    "mul": (2, lambda a, b: a * b),
    "div": (2, lambda a, b: a / b),
    "neg": (1, lambda a: -a),
}


@dataclass(frozen=True, repr=False)
class Op(Num):
    name: str
    args: tuple[Num, ...]

    def __post_init__(self):
        arity, _ = _OPS[self.name]
        if len(self.args) != arity:
            raise ValueError(f"{self.name} takes {arity} arguments")

    @property
    def real(self):
        return all(a.real for a in self.args)

    def __call__(self, phi):
        return _OPS[self.name][1](*(a(phi) for a in self.args))

    def sexpr(self):
        return f"({self.name} " + " ".join(a.sexpr() for a in self.args) + ")"


@dataclass(frozen=True, repr=False)
class Pow(Num):
    base: Num
    k: int

    @property
    def real(self):
        return self.base.real

    def __call__(self, phi):
        return self.base(phi) ** self.k

    def sexpr(self):
        return f"(pow {self.base.sexpr()} {self.k})"


@dataclass(frozen=True, repr=False)
class Recip(Num):
    """1/a where a != 0, and 0 elsewhere."""

    arg: Num

    @property
    def real(self):
        return self.arg.real

    def __call__(self, phi):
        v = self.arg(phi)
        return 0.0 if v == 0 else 1.0 / v

    def sexpr(self):
        return f"(recip {self.arg.sexpr()})"


@dataclass(frozen=True, repr=False)
class ZeroInd(Num):
    """1 where a == 0, and 0 elsewhere."""

    arg: Num

    def __call__(self, phi):
        return 1.0 if self.arg(phi) == 0 else 0.0

    def sexpr(self):
        return f"(zero_ind {self.arg.sexpr()})"


@dataclass(frozen=True, repr=False)
class Opaque(Num):
    """A Python callable; evaluates but only prints by label."""

    fn: Callable
    label: str
    is_real: bool = True

    @property
    def real(self):
        return self.is_real

    def __call__(self, phi):
        return self.fn(phi)

    def sexpr(self):
        return f"(opaque {self.label})"


@dataclass(frozen=True, repr=False)
class PointValue(Num):
    """R(X)(phi) = R(phi, X(phi)) when (phi, X(phi)) is in U(Omega), else 0."""

    efunc: object
    point: "GenPointGe"

    @property
    def real(self):
        return getattr(self.efunc, "real", False)

    def __call__(self, phi):
        x = self.point(phi)
        return self.efunc.evaluate_guarded(phi, x)

    def sexpr(self):
        return f"(point_value {self.efunc.label} {self.point.sexpr()})"


@dataclass(frozen=True)
class GenPointGe:
    """A rule phi -> Omega with a compact-support certificate ``support``."""

    components: tuple[Num, ...]
    support: KBox
    label: str = "X"

    @property
    def n(self) -> int:
        return len(self.components)

    def __call__(self, phi: TestFunction) -> np.ndarray:
        return np.array([float(np.real(c(phi))) for c in self.components])

    def sexpr(self) -> str:
        return "(point " + " ".join(c.sexpr() for c in self.components) + ")"

    def check_range(self, phis: Sequence[TestFunction]) -> list[TestFunction]:
        """Test functions whose value leaves the certified compact box."""
        return [p for p in phis if not self.support.contains(self(p))[0]]


# -- text format ------------------------------------------------------------

_TOKEN = re.compile(r'\s*(?:(\()|(\))|"((?:[^"\\]|\\.)*)"|([^\s()"]+))')


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            if text[pos:].strip() == "":
                break
            raise ParseError("unexpected character", pos, text)
        if m.group(1):
            out.append(("(", m.start(1)))
        elif m.group(2):
            out.append((")", m.start(2)))
        elif m.group(3) is not None:
            out.append(("str", m.group(3), m.start(3)))
        elif m.group(4):
            out.append(("atom", m.group(4), m.start(4)))
        pos = m.end()
    return out


def _read(tokens, i, text):
    if i >= len(tokens):
        raise ParseError("unexpected end of input", len(text), text)
    tok = tokens[i]
    if tok[0] == "(":
        items, i = [], i + 1
        while True:
            if i >= len(tokens):
                raise ParseError("unclosed parenthesis", tok[1], text)
            if tokens[i][0] == ")":
                return (items, tok[1]), i + 1
            item, i = _read(tokens, i, text)
            items.append(item)
    if tok[0] == ")":
        raise ParseError("unexpected ')'", tok[1], text)
    return tok, i + 1


def read_sexpr(text: str):
    """Parse text into nested (list, pos) / token tuples."""
    tokens = _tokenize(text)
    tree, i = _read(tokens, 0, text)
    if i != len(tokens):
        raise ParseError("trailing input", tokens[i][-1], text)
    return tree


def _atom_value(tok, text):
    if tok[0] != "atom":
        raise ParseError("expected a number", tok[-1], text)
    s = tok[1]
    try:
        if "j" in s:
            return complex(s)
        return float(s)
    except ValueError:
        raise ParseError(f"bad number {s!r}", tok[-1], text) from None


def _as_list(node, text):
    if isinstance(node[0], list):
        return node[0], node[1]
    raise ParseError("expected a parenthesized form", node[-1], text)


class NumParser:
    """Builds Num trees from text; ``resolve`` maps names to objects."""

    def __init__(self, resolve: Optional[Callable[[str, str], object]] = None):
        self.resolve = resolve

    def parse(self, text: str) -> Num:
        return self.build(read_sexpr(text), text)

    def parse_point(self, text: str, support: KBox, label: str = "X") -> GenPointGe:
        items, pos = _as_list(read_sexpr(text), text)
        if not items or items[0][:2] != ("atom", "point"):
            raise ParseError("expected (point ...)", pos, text)
        comps = tuple(self.build(c, text) for c in items[1:])
        if len(comps) != support.n:
            raise ParseError(f"point has {len(comps)} components, support is {support.n}-dimensional", pos, text)
        return GenPointGe(comps, support, label)

    def build(self, node, text) -> Num:
        if not isinstance(node[0], list):
            if node[0] == "atom" and self.resolve is not None and not re.match(r"^[-+.\d]", node[1]):
                obj = self.resolve(node[1], "number")
                if isinstance(obj, Num):
                    return obj
            raise ParseError(f"expected a form, got {node[1]!r}", node[-1], text)
        items, pos = node
        if not items or items[0][0] != "atom":
            raise ParseError("empty or malformed form", pos, text)
        head, args = items[0][1], items[1:]

        def need(k):
            if len(args) != k:
                raise ParseError(f"{head} takes {k} argument(s), got {len(args)}", pos, text)

        if head == "const":
            need(1)
            return Const(_atom_value(args[0], text))
        if head == "scale_of":
            need(0)
            return ScaleOf()
        if head == "closed":
            need(1)
            if args[0][0] != "str":
                raise ParseError("closed takes a quoted expression", pos, text)
            try:
                return Closed(args[0][1])
            except ValueError as exc:
                raise ParseError(str(exc), pos, text) from None
        if head == "gen_id_match":
            need(3)
            if args[0][0] != "str":
                raise ParseError("gen_id_match takes a quoted generator id", pos, text)
            return GenIdMatch(args[0][1], self.build(args[1], text), self.build(args[2], text))
        if head == "evidence_table":
            if not args:
                raise ParseError("evidence_table needs a default", pos, text)
            default = self.build(args[0], text)
            rows = []
            for row in args[1:]:
                cells, rpos = _as_list(row, text)
                if len(cells) != 3 or cells[0][0] != "str" or cells[1][0] != "str":
                    raise ParseError('table rows are ("ID" "EPS" VALUE)', rpos, text)
                rows.append((cells[0][1], Fraction(cells[1][1]), _atom_value(cells[2], text)))
            return EvidenceTable(default, tuple(rows))
        if head in _OPS:
            need(_OPS[head][0])
            return Op(head, tuple(self.build(a, text) for a in args))
        if head == "pow":
            need(2)
            return Pow(self.build(args[0], text), int(_atom_value(args[1], text).real))
        if head == "recip":
            need(1)
            return Recip(self.build(args[0], text))
        if head == "zero_ind":
            need(1)
            return ZeroInd(self.build(args[0], text))
        if head == "point_value":
            need(2)
            if self.resolve is None:
                raise ParseError("point_value needs named objects", pos, text)
            if args[0][0] != "atom" or args[1][0] != "atom":
                raise ParseError("point_value takes an efunc name and a point name", pos, text)
            return PointValue(self.resolve(args[0][1], "efunc"), self.resolve(args[1][1], "point"))
        if head == "ref":
            need(1)
            if self.resolve is None:
                raise ParseError("ref needs named objects", pos, text)
            return self.resolve(args[0][1], "number")
        raise ParseError(f"unknown combinator {head!r}", pos, text)


def parse_num(text: str) -> Num:
    return NumParser().parse(text)


def dump(num: Num) -> str:
    """Versioned text form of a number tree."""
    return f";{FORMAT}\n{num.sexpr()}"


def load(text: str) -> Num:
    lines = text.splitlines()
    if lines and lines[0].startswith(";"):
        version = lines[0][1:].strip()
        if version != FORMAT:
            raise ParseError(f"unsupported number format {version!r}")
        text = "\n".join(lines[1:])
    return parse_num(text)


def tag_number(fn: Callable[[Fraction], complex | float], label: str) -> Num:
    """A number reading only the scale tag, through a Python function."""
    return Opaque(lambda phi: fn(phi.scale), label)


def point_table(
    entries: Mapping[tuple[str, Fraction], np.ndarray], default: np.ndarray, support: KBox, label: str = "X"
) -> GenPointGe:
    """The constructed point: exact lookups on (generator id, scale), ``default`` elsewhere."""
    n = support.n
    comps = []
    for i in range(n):
        rows = tuple((g, e, float(x[i])) for (g, e), x in entries.items())
        comps.append(EvidenceTable(Const(float(default[i])), rows))
    return GenPointGe(tuple(comps), support, label)
