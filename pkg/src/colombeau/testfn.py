"""Compactly supported test functions with certified moment orders.

A :class:`TestFunction` is a generator (a polynomial times the standard
bump on the ball of radius rho) together with exact scaling and
translation tags.  Two test functions are the same object iff generator id
and tags agree; function values are never compared.
"""

from __future__ import annotations

import functools
import itertools
import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import sympy as sp

from .domain import as_points

TOL_MOMENT = 1e-9
ORDER_THRESHOLD = 1e-6
QUAD_NODES = 64


def factory_nodes(n: int) -> int:
    """Node count per axis for building and certifying generators."""
    return 256 if n <= 2 else 48


Number = Union[int, float, Fraction]
MultiIndex = tuple[int, ...]


class ConstructionError(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


# -- multi-indices ----------------------------------------------------------

def multi_indices(n: int, order: int) -> list[MultiIndex]:
    """All multi-indices of length n with |alpha| == order, graded-lex."""
    if n == 1:
        return [(order,)]
    out = []
    for first in range(order, -1, -1):
        out.extend((first,) + rest for rest in multi_indices(n - 1, order - first))
    return out


def multi_indices_upto(n: int, order: int) -> list[MultiIndex]:
    return [a for k in range(order + 1) for a in multi_indices(n, k)]


def unit(n: int, i: int) -> MultiIndex:
    return tuple(1 if j == i else 0 for j in range(n))


def _binom(alpha: MultiIndex, beta: MultiIndex) -> int:
    return math.prod(math.comb(a, b) for a, b in zip(alpha, beta))


# -- quadrature -------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _gauss_legendre(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(nodes)


def tensor_nodes(lo, hi, nodes: int = QUAD_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre nodes (Q, n) and weights (Q,) on a box."""
    x, w = _gauss_legendre(nodes)
    lo, hi = np.atleast_1d(np.asarray(lo, float)), np.atleast_1d(np.asarray(hi, float))
    half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
    axes = [mid[i] + half[i] * x for i in range(lo.size)]
    wts = [half[i] * w for i in range(lo.size)]
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    wt = np.ones(pts.shape[0])
    for m in np.meshgrid(*wts, indexing="ij"):
        wt = wt * m.ravel()
    return pts, wt


def quadrature(f: Callable[[np.ndarray], np.ndarray], box, nodes: int = QUAD_NODES):
    """Integrate ``f`` (points (Q, n) -> values (Q,)) over ``box`` = (lo, hi)."""
    pts, wt = tensor_nodes(box[0], box[1], nodes)
    return np.sum(wt * f(pts))


# -- bump weight ------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _bump_derivative(n: int, rho: float, alpha: MultiIndex) -> Callable[[np.ndarray], np.ndarray]:
    """d^alpha of exp(-1/(1 - |y/rho|^2)) (unnormalized), zero off the ball."""
    ys = sp.symbols(f"y0:{n}", real=True)
    s = sum(y**2 for y in ys) / sp.Float(rho) ** 2
    expr = sp.exp(-1 / (1 - s))
    for i, a in enumerate(alpha):
        if a:
            expr = sp.diff(expr, ys[i], a)
    fn = sp.lambdify(ys, expr, "numpy", cse=True)

    def evaluate(pts: np.ndarray) -> np.ndarray:
        out = np.zeros(pts.shape[0])
        ss = np.sum(pts**2, axis=1) / rho**2
        # exp(-700) times any polynomial in 1/(1-s) of moderate degree underflows
        inside = (1.0 - ss) > 1.0 / 700.0
        if inside.any():
            sub = pts[inside]
            out[inside] = fn(*[sub[:, i] for i in range(n)])
        return out

    return evaluate


@functools.lru_cache(maxsize=None)
def _bump_normalizer(n: int, rho: float, nodes: Optional[int] = None) -> float:
    nodes = nodes or factory_nodes(n)
    base = _bump_derivative(n, rho, (0,) * n)
    return 1.0 / float(quadrature(base, ((-rho,) * n, (rho,) * n), nodes))


# -- generators and tagged test functions -----------------------------------

@dataclass(eq=False)
class Generator:
    """phi(y) = p(y) * c * exp(-1/(1 - |y/rho|^2)) on the ball of radius rho.

    ``coeffs`` maps exponent tuples to polynomial coefficients.
    ``certified_order`` is (a, next_moment): all moments of orders 1..a
    vanish and the largest (a+1)-moment has magnitude next_moment.
    """

    id: str
    n: int
    rho: float
    mass: int
    coeffs: Mapping[MultiIndex, float]
    certified_order: tuple[int, float] = (0, 0.0)
    label: str = ""

    def __post_init__(self):
        self._c = _bump_normalizer(self.n, self.rho)

    def __hash__(self):
        return hash(self.id)

    def __eq__(self, other):
        return isinstance(other, Generator) and other.id == self.id

    def _poly_derivative(self, beta: MultiIndex, pts: np.ndarray) -> np.ndarray:
        out = np.zeros(pts.shape[0])
        for expo, c in self.coeffs.items():
            if any(e < b for e, b in zip(expo, beta)):
                continue
            factor = c * math.prod(math.perm(e, b) for e, b in zip(expo, beta))
            term = np.full(pts.shape[0], factor)
            for i, (e, b) in enumerate(zip(expo, beta)):
                if e - b:
                    term = term * pts[:, i] ** (e - b)
            out += term
        return out

    def evaluate(self, pts, alpha: Optional[MultiIndex] = None) -> np.ndarray:
        """d^alpha phi at ``pts`` (generator coordinates)."""
        pts = as_points(pts, self.n)
        alpha = alpha or (0,) * self.n
        out = np.zeros(pts.shape[0])
        for beta in itertools.product(*(range(a + 1) for a in alpha)):
            rest = tuple(a - b for a, b in zip(alpha, beta))
            w = _bump_derivative(self.n, self.rho, rest)(pts)
            if not w.any():
                continue
            out += _binom(alpha, beta) * self._poly_derivative(beta, pts) * w
        return self._c * out

    def manifest(self) -> dict:
        a, nxt = self.certified_order
        return {
            "id": self.id,
            "n": self.n,
            "rho": self.rho,
            "mass": self.mass,
            "certified_order": a,
            "next_moment": nxt,
            "degree": max(sum(e) for e in self.coeffs),
        }


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


@dataclass(frozen=True, eq=False)
class TestFunction:
    """(T_x S_eps phi)(y) = eps^{-n} phi((y - x)/eps) with exact tags."""

    __test__ = False  # not a pytest class

    generator: Generator
    scale: Fraction = Fraction(1)
    shift: tuple[Fraction, ...] = field(default=())

    def __post_init__(self):
        if not self.shift:
            object.__setattr__(self, "shift", (Fraction(0),) * self.generator.n)
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def key(self) -> tuple:
        return (self.generator.id, self.scale, self.shift)

    def __eq__(self, other):
        return isinstance(other, TestFunction) and other.key == self.key

    def __hash__(self):
        return hash(self.key)

    @property
    def generator_id(self) -> str:
        return self.generator.id

    @property
    def n(self) -> int:
        return self.generator.n

    @property
    def eps(self) -> float:
        return float(self.scale)

    @property
    def center(self) -> np.ndarray:
        return np.array([float(s) for s in self.shift])

    @property
    def support_radius(self) -> float:
        return float(self.scale) * self.generator.rho

    @property
    def mass(self) -> int:
        return self.generator.mass

    @property
    def certified_order(self) -> tuple[int, float]:
        return self.generator.certified_order

    @property
    def is_unscaled(self) -> bool:
        return self.scale == 1 and not any(self.shift)

    def __call__(self, y) -> np.ndarray:
        return self.derivative(None, y)

    def derivative(self, alpha: Optional[MultiIndex], y) -> np.ndarray:
        pts = as_points(y, self.n)
        eps = float(self.scale)
        alpha = alpha or (0,) * self.n
        u = (pts - self.center) / eps
        return eps ** (-self.n - sum(alpha)) * self.generator.evaluate(u, alpha)

    def support_box(self) -> tuple[np.ndarray, np.ndarray]:
        r = self.support_radius
        return self.center - r, self.center + r

    def describe(self) -> dict:
        return {
            "generator_id": self.generator.id,
            "scale": str(self.scale),
            "shift": [str(s) for s in self.shift],
        }


def scale(phi: TestFunction, eps: Number) -> TestFunction:
    """S_eps: scaling multiplies the scale tag and also scales the center."""
    e = _frac(eps)
    if e <= 0:
        raise ValueError("scale factor must be positive")
    return TestFunction(phi.generator, phi.scale * e, tuple(s * e for s in phi.shift))


def translate(phi: TestFunction, x) -> TestFunction:
    """T_x: adds x to the translation tag."""
    xs = [x] if np.ndim(x) == 0 else list(np.asarray(x, dtype=object).ravel())
    if len(xs) != phi.n:
        raise ValueError(f"translation of length {len(xs)} in dimension {phi.n}")
    return TestFunction(phi.generator, phi.scale, tuple(s + _frac(v) for s, v in zip(phi.shift, xs)))


def unscaled(gen: Generator) -> TestFunction:
    return TestFunction(gen)


# -- registry ---------------------------------------------------------------

class GeneratorRegistry:
    """Append-only set of generators addressed by id."""

    def __init__(self, generators: Iterable[Generator] = ()):
        self._lock = threading.Lock()
        self._gens: dict[str, Generator] = {}
        for g in generators:
            self.register(g)

    def register(self, gen: Generator) -> Generator:
        with self._lock:
            have = self._gens.get(gen.id)
            if have is not None:
                return have
            self._gens[gen.id] = gen
            return gen

    def get(self, gen_id: str) -> Optional[Generator]:
        return self._gens.get(gen_id)

    def __contains__(self, gen_id) -> bool:
        if isinstance(gen_id, Generator):
            gen_id = gen_id.id
        return gen_id in self._gens

    def __iter__(self):
        return iter(list(self._gens.values()))

    def __len__(self) -> int:
        return len(self._gens)


_CACHE = GeneratorRegistry()


def from_record(d: dict) -> TestFunction:
    """Rebuild a test function from its ``describe()`` record."""
    gen = _CACHE.get(d["generator_id"])
    if gen is None:
        raise KeyError(f"generator {d['generator_id']} is not registered")
    return TestFunction(gen, Fraction(d["scale"]), tuple(Fraction(s) for s in d["shift"]))


def match_scaled(psi: TestFunction, registry) -> Optional[tuple[str, Fraction, tuple[Fraction, ...]]]:
    """Decompose psi = T_x S_eps phi for a registered phi, by tag lookup only."""
    if psi.generator.id in registry:
        return psi.generator.id, psi.scale, psi.shift
    return None


# -- factories --------------------------------------------------------------

def _rho_tag(rho: float) -> str:
    return repr(float(rho))


def make_bump(n: int, rho: float = 1.0) -> TestFunction:
    """The symmetric bump of radius rho with integral 1."""
    if n < 1 or rho <= 0:
        raise ValueError("make_bump needs n >= 1 and rho > 0")
    gid = f"bump/n{n}/r{_rho_tag(rho)}"
    gen = _CACHE.get(gid)
    if gen is None:
        gen = Generator(gid, n, float(rho), 1, {(0,) * n: 1.0}, label="bump")
        gen.certified_order = moment_order(TestFunction(gen), q_max=8)
        gen = _CACHE.register(gen)
    return TestFunction(gen)


def _moments(gen: Generator, alphas: Sequence[MultiIndex], nodes: Optional[int] = None) -> np.ndarray:
    nodes = nodes or factory_nodes(gen.n)
    lo, hi = (-gen.rho,) * gen.n, (gen.rho,) * gen.n
    pts, wt = tensor_nodes(lo, hi, nodes)
    vals = wt * gen.evaluate(pts)
    return np.array([np.sum(vals * np.prod(pts ** np.array(a), axis=1)) for a in alphas])


def make_moment_testfn(n: int, q: int, mass: int = 1, rho: float = 1.0) -> TestFunction:
    """A test function in A_q minus A_{q+1} (mass 1) or A_{0q} (mass 0).

    phi = p * psi with deg p = q + 1 and psi the normalized bump.  The
    moments of orders 1..q vanish, the (q+1)-moment along y_1^{q+1} is 1
    and the other (q+1)-moments are 0, which pins the moment order to q.
    """
    if q < 0:
        raise ValueError("q must be >= 0")
    if mass not in (0, 1):
        raise ValueError("mass must be 0 or 1")
    gid = f"mom/n{n}/q{q}/m{mass}/r{_rho_tag(rho)}"
    gen = _CACHE.get(gid)
    if gen is not None:
        return TestFunction(gen)

    basis = multi_indices_upto(n, q + 1)
    weight = make_bump(n, rho).generator
    # Gram matrix of monomials under the bump weight
    sums = {}
    for a in basis:
        for b in basis:
            sums.setdefault(tuple(i + j for i, j in zip(a, b)), None)
    keys = list(sums)
    vals = _moments(weight, keys)
    mom = dict(zip(keys, vals))
    gram = np.array([[mom[tuple(i + j for i, j in zip(a, b))] for b in basis] for a in basis])
    designated = (q + 1,) + (0,) * (n - 1)
    rhs = np.array(
        [float(mass) if sum(a) == 0 else (1.0 if a == designated else 0.0) for a in basis]
    )
    try:
        if not np.all(np.isfinite(gram)) or np.linalg.cond(gram) > 1e15:
            raise np.linalg.LinAlgError("moment matrix is numerically singular")
        coef = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise ConstructionError(f"cannot build A_{q} test function: {exc}") from exc

    gen = Generator(gid, n, float(rho), mass, dict(zip(basis, coef.tolist())), label=f"phi_{q}")
    gen.certified_order = moment_order(TestFunction(gen), q_max=q + 1)
    return TestFunction(_CACHE.register(gen))


def combine(coeffs: Sequence[float], phis: Sequence[TestFunction]) -> TestFunction:
    """Linear combination of unscaled generators sharing n and rho."""
    gens = [p.generator for p in phis]
    if not all(p.is_unscaled for p in phis):
        raise PreconditionError("combine needs unscaled, untranslated test functions")
    if len({(g.n, g.rho) for g in gens}) != 1:
        raise PreconditionError("combined generators must share dimension and radius")
    poly: dict[MultiIndex, float] = {}
    for c, g in zip(coeffs, gens):
        for expo, v in g.coeffs.items():
            poly[expo] = poly.get(expo, 0.0) + c * v
    gid = "lin(" + ",".join(f"{c!r}*{g.id}" for c, g in zip(coeffs, gens)) + ")"
    g0 = gens[0]
    mass = sum(c * g.mass for c, g in zip(coeffs, gens))
    gen = Generator(gid, g0.n, g0.rho, int(round(mass)) if mass in (0, 1) else mass, poly, label="lin")
    gen.certified_order = moment_order(TestFunction(gen), q_max=8)
    return TestFunction(_CACHE.register(gen))


def moment_order(phi: TestFunction, q_max: int = 8, tol: float = TOL_MOMENT) -> tuple[int, float]:
    """Largest a <= q_max with all moments of orders 1..a below ``tol``.

    Returns (a, max |(a+1)-moment|), or (q_max, 0.0) when no moment up to
    order q_max is violated.
    """
    if not phi.is_unscaled:
        raise PreconditionError("moment_order needs an unscaled, untranslated test function")
    n = phi.n
    alphas = multi_indices_upto(n, q_max + 1)
    mom = dict(zip(alphas, _moments(phi.generator, alphas)))
    for k in range(1, q_max + 1):
        worst = max(abs(mom[a]) for a in multi_indices(n, k))
        if worst >= tol:
            return k - 1, float(worst)
    return q_max, 0.0


def moments(phi: TestFunction, alphas: Sequence[MultiIndex], nodes: int = QUAD_NODES) -> np.ndarray:
    """Moments int y^alpha phi(y) dy of a (possibly scaled/translated) test function."""
    lo, hi = phi.support_box()
    pts, wt = tensor_nodes(lo, hi, nodes)
    vals = wt * phi(pts)
    return np.array([np.sum(vals * np.prod(pts ** np.array(a), axis=1)) for a in alphas])
