"""Declarative scenarios: a TOML file of domain, battery, named objects and tasks.

Schema (version 1)::

    schema = 1
    name = "delta_squared"

    [domain]                 # optional; default is the whole space
    n = 1
    boxes = [[[-2.0, 2.0]]]  # list of boxes, each a list of [lo, hi] per axis

    [battery]
    q_max = 8
    rho = 1.0
    grid = { base = 0.5, start_exp = 4, end_exp = 36 }

    [objects.delta]
    kind = "delta"

    [objects.R]
    kind = "efunc"
    expr = "delta * delta"

    [[tasks]]
    id = "neg"
    kind = "ge_negligible"
    target = "R"
    K = [[0.0, 0.0]]

Object kinds: delta (``order``), heaviside, smooth / locally_integrable
(``expr`` in x), classical (``expr``), efunc (``expr`` over names with
+ - *, ``D(R, i)``, ``recip(R)``, ``rho(r)``, ``iota(u)``), number
(``sexpr``), point (``sexpr``, ``support``), net (``expr`` in x and eps),
gs_point (``components`` in eps, ``support``), matrix (``rows``),
test_object_net (``q``, ``modulation``).
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import tomli

from .asymptotics import EpsGrid
from .closedform import EpsExpression, XExpression
from .distributions import DeltaDerivative, Heaviside, LocallyIntegrable, SmoothFunction
from .domain import Domain, KBox
from .gd import TestObjectNet
from .ge import EFunc, TestBattery, classical, embed, rho_embed
from .gs import FunctionNet, GenPointGs
from .matrix import MatrixGe
from .numbers import Const, GenPointGe, Num, NumParser, ParseError

SCHEMA_VERSION = 1
_REF_KEYS = ("target", "point", "r", "s", "nets")
BOUNDS = {"q_max": 12, "m_max": 12, "m0": 12, "alpha_max": 4, "end_exp": 60, "K_points": 4097}


class ScenarioError(ValueError):
    """Malformed scenario: parse errors, undefined names, cycles, out-of-bound parameters."""


@dataclass
class Task:
    id: str
    kind: str
    params: dict

    def get(self, key, default=None):
        return self.params.get(key, default)


@dataclass
class Scenario:
    name: str
    domain: Domain
    battery_spec: dict
    object_specs: dict
    tasks: list[Task]
    source: str = ""
    _objects: dict = field(default_factory=dict, repr=False)
    _battery: Optional[TestBattery] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def grid(self) -> EpsGrid:
        g = self.battery_spec.get("grid", {})
        return EpsGrid(float(g.get("base", 0.5)), int(g.get("start_exp", 4)), int(g.get("end_exp", 36)))

    @property
    def battery(self) -> TestBattery:
        if self._battery is None:
            self._battery = TestBattery(
                self.n, int(self.battery_spec.get("q_max", 8)), float(self.battery_spec.get("rho", 1.0)), self.grid
            )
        return self._battery

    def override(self, q_max: Optional[int] = None, exponents: Optional[tuple[int, int]] = None) -> None:
        if q_max is not None:
            self.battery_spec["q_max"] = q_max
        if exponents is not None:
            g = dict(self.battery_spec.get("grid", {}))
            g["start_exp"], g["end_exp"] = exponents
            self.battery_spec["grid"] = g
        self._battery = None
        _check_battery(self.battery_spec)

    def obj(self, name: str, want: Optional[str] = None):
        """Build (once) and return a named object."""
        return _Builder(self).get(name, want)

    def k_box(self, task: Task, key: str = "K") -> KBox:
        bounds = task.get(key)
        if bounds is None:
            raise ScenarioError(f"task {task.id!r} needs {key}")
        pts = int(task.get(f"{key}_points", task.get("K_points", 129)))
        if pts > BOUNDS["K_points"]:
            raise ScenarioError(f"task {task.id!r}: {key}_points {pts} exceeds {BOUNDS['K_points']}")
        return KBox.from_bounds(bounds, pts)


def _check_battery(spec: dict) -> None:
    q = int(spec.get("q_max", 8))
    if not 0 <= q <= BOUNDS["q_max"]:
        raise ScenarioError(f"battery q_max {q} outside [0, {BOUNDS['q_max']}]")
    g = spec.get("grid", {})
    end = int(g.get("end_exp", 36))
    if end > BOUNDS["end_exp"]:
        raise ScenarioError(f"grid end_exp {end} exceeds {BOUNDS['end_exp']}")
    try:
        EpsGrid(float(g.get("base", 0.5)), int(g.get("start_exp", 4)), end)
    except ValueError as exc:
        raise ScenarioError(f"bad eps grid: {exc}") from None


def _check_task(t: Task) -> None:
    for key in ("m_max", "m0", "alpha_max"):
        if key in t.params:
            v = int(t.params[key])
            if not 0 <= v <= BOUNDS[key]:
                raise ScenarioError(f"task {t.id!r}: {key} = {v} outside [0, {BOUNDS[key]}]")


def parse_scenario(text: str, origin: str = "<string>") -> Scenario:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(f"{origin}: {exc}") from None
    version = data.get("schema", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"{origin}: unsupported scenario schema {version!r} (supported: {SCHEMA_VERSION})")
    dom = data.get("domain", {})
    n = int(dom.get("n", 1))
    domain = Domain.from_bounds(dom["boxes"]) if "boxes" in dom else Domain.whole_space(n)
    if domain.n != n:
        raise ScenarioError(f"{origin}: domain boxes have dimension {domain.n}, n = {n}")
    battery = dict(data.get("battery", {}))
    _check_battery(battery)
    objects = data.get("objects", {})
    tasks = []
    seen = set()
    for i, raw in enumerate(data.get("tasks", [])):
        raw = dict(raw)
        tid = str(raw.pop("id", f"task{i + 1}"))
        if tid in seen:
            raise ScenarioError(f"{origin}: duplicate task id {tid!r}")
        seen.add(tid)
        if "kind" not in raw:
            raise ScenarioError(f"{origin}: task {tid!r} has no kind")
        t = Task(tid, str(raw.pop("kind")), raw)
        _check_task(t)
        tasks.append(t)
    sc = Scenario(str(data.get("name", Path(origin).stem)), domain, battery, objects, tasks, text)
    # resolve every object up front so undefined names and cycles fail early
    b = _Builder(sc)
    for name in objects:
        b.get(name)
    for t in tasks:
        for key in _REF_KEYS:
            refs = t.get(key)
            for ref in (refs if isinstance(refs, list) else [refs] if refs is not None else []):
                if ref not in objects:
                    raise ScenarioError(f"{origin}: task {t.id!r} {key} refers to undefined name {ref!r}")
    return sc


def load_scenario(path) -> Scenario:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {p}: {exc}") from None
    return parse_scenario(text, str(p))


# -- object construction ---------------------------------------------------------

_DIST_KINDS = {"delta", "heaviside", "smooth", "locally_integrable"}


class _Builder:
    def __init__(self, sc: Scenario):
        self.sc = sc
        self.cache = sc._objects
        self.building: list[str] = []

    def get(self, name: str, want: Optional[str] = None):
        if name not in self.cache:
            spec = self.sc.object_specs.get(name)
            if spec is None:
                where = f" (referenced from {self.building[-1]!r})" if self.building else ""
                raise ScenarioError(f"undefined name {name!r}{where}")
            if name in self.building:
                raise ScenarioError("cyclic object definitions: " + " -> ".join(self.building + [name]))
            self.building.append(name)
            try:
                self.cache[name] = self.build(name, dict(spec))
            except (ParseError, ValueError, SyntaxError) as exc:
                if isinstance(exc, ScenarioError):
                    raise
                raise ScenarioError(f"object {name!r}: {exc}") from None
            finally:
                self.building.pop()
        return self._coerce(name, self.cache[name], want)

    def _coerce(self, name, obj, want):
        if want is None:
            return obj
        if want == "efunc":
            if isinstance(obj, EFunc):
                return obj
            if isinstance(obj, (DeltaDerivative, Heaviside, SmoothFunction, LocallyIntegrable)):
                return embed(obj)
            if isinstance(obj, Num):
                return rho_embed(obj, self.sc.n, self.sc.domain)
        if want == "number" and isinstance(obj, Num):
            return obj
        if want == "point" and isinstance(obj, GenPointGe):
            return obj
        if want == "distribution" and isinstance(obj, (DeltaDerivative, Heaviside, SmoothFunction, LocallyIntegrable)):
            return obj
        if want == "net" and isinstance(obj, FunctionNet):
            return obj
        if want == "gs_point" and isinstance(obj, GenPointGs):
            return obj
        if want == "matrix" and isinstance(obj, MatrixGe):
            return obj
        if want == "test_object_net" and isinstance(obj, TestObjectNet):
            return obj
        raise ScenarioError(f"object {name!r} is a {type(obj).__name__}, expected {want}")

    def build(self, name: str, spec: dict):
        kind = spec.get("kind")
        sc = self.sc
        n, dom = sc.n, sc.domain
        if kind == "delta":
            order = tuple(spec.get("order", [0] * n))
            if len(order) != n:
                raise ScenarioError(f"object {name!r}: delta order must have {n} entries")
            return DeltaDerivative(order, dom)
        if kind == "heaviside":
            if n != 1:
                raise ScenarioError(f"object {name!r}: heaviside needs n = 1")
            return Heaviside(dom)
        if kind == "smooth":
            return SmoothFunction.from_expr(_need(spec, "expr", name), n, dom)
        if kind == "locally_integrable":
            e = XExpression(_need(spec, "expr", name), n)
            return LocallyIntegrable(e.derivative(None), n, e.text, dom)
        if kind == "classical":
            return classical(_need(spec, "expr", name), n, dom)
        if kind == "efunc":
            return _EfuncExpr(self, name).build(_need(spec, "expr", name))
        if kind == "number":
            return self._parser().parse(_need(spec, "sexpr", name))
        if kind == "point":
            support = KBox.from_bounds(_need(spec, "support", name), int(spec.get("support_points", 9)))
            support.check_inside(dom)
            return self._parser().parse_point(_need(spec, "sexpr", name), support, name)
        if kind == "net":
            return FunctionNet.from_expr(_need(spec, "expr", name), n, dom)
        if kind == "gs_point":
            comps = [EpsExpression(c) for c in _need(spec, "components", name)]
            if len(comps) != n:
                raise ScenarioError(f"object {name!r}: gs_point needs {n} components")
            support = KBox.from_bounds(_need(spec, "support", name), 9)
            return GenPointGs(lambda eps, cs=comps: np.array([float(np.real(c(eps))) for c in cs]), n, support,
                              float(spec.get("threshold", 1.0)), name)
        if kind == "matrix":
            rows = _need(spec, "rows", name)
            return MatrixGe.of([[self._entry(v) for v in r] for r in rows])
        if kind == "test_object_net":
            q = int(_need(spec, "q", name))
            phi = sc.battery.phis[q]
            amp = float(spec.get("modulation", 0.0))
            return TestObjectNet.modulated(phi, amp) if amp else TestObjectNet.constant(phi)
        raise ScenarioError(f"object {name!r}: unknown kind {kind!r}")

    def _entry(self, v) -> Num:
        if isinstance(v, (int, float)):
            return Const(float(v))
        v = str(v).strip()
        if v.startswith("("):
            return self._parser().parse(v)
        return self.get(v, "number")

    def _parser(self) -> NumParser:
        return NumParser(lambda ref, want: self.get(ref, want))


def _need(spec: dict, key: str, name: str):
    if key not in spec:
        raise ScenarioError(f"object {name!r} ({spec.get('kind')}) needs {key!r}")
    return spec[key]


class _EfuncExpr:
    """Arithmetic over named objects: + - * with scalars, D(R, i), recip(R), rho(r), iota(u)."""

    def __init__(self, builder: _Builder, owner: str):
        self.b = builder
        self.owner = owner

    def build(self, text: str):
        try:
            tree = ast.parse(text, mode="eval").body
        except SyntaxError as exc:
            raise ScenarioError(f"object {self.owner!r}: cannot parse {text!r} at column {exc.offset}") from None
        out = self.eval(tree, text)
        if not isinstance(out, EFunc):
            raise ScenarioError(f"object {self.owner!r}: expression {text!r} is not a representative")
        return out

    def eval(self, node, text):
        if isinstance(node, ast.Name):
            return self.b.get(node.id, "efunc")
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return node.value
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -self.eval(node.operand, text)
        if isinstance(node, ast.BinOp) and type(node.op) in (ast.Add, ast.Sub, ast.Mult):
            a, c = self.eval(node.left, text), self.eval(node.right, text)
            if not isinstance(a, EFunc) and isinstance(c, EFunc):
                a, c = c, a
                if isinstance(node.op, ast.Sub):
                    return (-a) + c
            return {ast.Add: lambda: a + c, ast.Sub: lambda: a - c, ast.Mult: lambda: a * c}[type(node.op)]()
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            fn, args = node.func.id, node.args
            if fn == "D" and len(args) == 2 and isinstance(args[1], ast.Constant):
                return self.eval(args[0], text).derive(int(args[1].value))
            if fn == "recip" and len(args) == 1:
                return self.eval(args[0], text).reciprocal()
            if fn == "rho" and len(args) == 1 and isinstance(args[0], ast.Name):
                return rho_embed(self.b.get(args[0].id, "number"), self.b.sc.n, self.b.sc.domain)
            if fn == "iota" and len(args) == 1 and isinstance(args[0], ast.Name):
                return embed(self.b.get(args[0].id, "distribution"))
        raise ScenarioError(
            f"object {self.owner!r}: unsupported construct at column {getattr(node, 'col_offset', 0)} of {text!r}"
        )


def bundled_path(name: str) -> Path:
    return Path(__file__).with_name("scenarios") / f"{name}.toml"


def bundled_names() -> list[str]:
    return sorted(p.stem for p in (Path(__file__).with_name("scenarios")).glob("*.toml"))

