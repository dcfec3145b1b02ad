"""Sampled interface to the diffeomorphism-invariant full algebra.

Representatives are tested against test-object nets phi(eps, x) instead
of fixed test functions.  The C- and J-formalisms are related by
T(phi, x) = (T_x phi, x); since translations act on exact tags, the
round trip and the point-evaluation consistency identity hold bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .asymptotics import EpsGrid, Verdict
from .domain import Domain, KBox, as_points
from .ge import EFunc, moderate_from_families, negligible_from_families
from .numbers import Num
from .testfn import TestFunction, scale, translate

GUARD_WARN_RATE = 0.5


def _exact(x) -> tuple[Fraction, ...]:
    return tuple(Fraction(float(v)) for v in np.atleast_1d(x))


@dataclass(frozen=True)
class TestObjectNet:
    """phi(eps, x) with values in A_q; the test uses S_eps phi(eps, x).

    ``rule(eps, x)`` gets an exact Fraction eps and a point x of shape (n,)
    and returns an unscaled-at-eps test function.  Set ``x_dependent`` to
    False when the rule ignores x so sweeps evaluate it once per eps.
    """

    __test__ = False

    rule: Callable[[Fraction, np.ndarray], TestFunction]
    q: int
    label: str
    x_dependent: bool = True

    @classmethod
    def constant(cls, phi: TestFunction, q: Optional[int] = None) -> "TestObjectNet":
        return cls(lambda eps, x: phi, phi.certified_order[0] if q is None else q, phi.generator_id, False)

    @classmethod
    def modulated(cls, phi: TestFunction, amplitude: float = 0.25, q: Optional[int] = None) -> "TestObjectNet":
        """phi(eps, x) = S_lambda phi with lambda = 1 + amplitude * sin(x_1); S_lambda keeps A_q."""
        if not 0 <= amplitude < 1:
            raise ValueError("modulation amplitude must lie in [0, 1)")

        def rule(eps, x):
            return scale(phi, Fraction(1 + amplitude * float(np.sin(x[0]))))

        q = phi.certified_order[0] if q is None else q
        return cls(rule, q, f"{phi.generator_id}~sin{amplitude!r}", True)

    def members(self, eps: Fraction, pts: np.ndarray) -> list[tuple[TestFunction, np.ndarray]]:
        if not self.x_dependent:
            return [(scale(self.rule(eps, pts[0]), eps), np.arange(pts.shape[0]))]
        groups: dict = {}
        order = []
        for i, x in enumerate(pts):
            psi = scale(self.rule(eps, x), eps)
            if psi.key not in groups:
                groups[psi.key] = (psi, [])
                order.append(psi.key)
            groups[psi.key][1].append(i)
        return [(groups[k][0], np.array(groups[k][1])) for k in order]

    def certify(self, grid: EpsGrid, K: KBox, max_points: int = 33) -> dict:
        """Sampled boundedness of support radii and sup norms, and the moment order."""
        pts = K.grid
        if pts.shape[0] > max_points:
            pts = pts[np.linspace(0, pts.shape[0] - 1, max_points).astype(int)]
        radii, sups, orders = [], [], []
        for e in grid.exact:
            for x in pts:
                phi = self.rule(e, x)
                lo, hi = phi.support_box()
                probe = np.linspace(lo, hi, 65)
                radii.append(phi.support_radius)
                sups.append(float(np.max(np.abs(phi(probe)))))
                orders.append(phi.certified_order[0])
        ok = bool(np.all(np.isfinite(sups))) and min(orders) >= self.q
        return {"net": self.label, "q": self.q, "max_radius": max(radii), "max_sup": max(sups),
                "min_order": min(orders), "valid": ok}

    def describe(self) -> dict:
        return {"kind": "net", "label": self.label, "q": self.q, "x_dependent": self.x_dependent}


def _check_nets(nets: Sequence[TestObjectNet], grid: EpsGrid, K: KBox) -> list[dict]:
    certs = [net.certify(grid, K) for net in nets]
    bad = [c["net"] for c in certs if not c["valid"]]
    if bad:
        raise ValueError(f"test-object nets without a valid boundedness certificate: {bad}")
    return certs


def gd_moderate_verdict(R: EFunc, K: KBox, alpha_max: int, nets: Sequence[TestObjectNet],
                        grid: Optional[EpsGrid] = None, cutoff=None) -> Verdict:
    grid = grid or EpsGrid()
    certs = _check_nets(nets, grid, K)
    v = moderate_from_families(R, K, alpha_max, nets, grid, cutoff, "gd_moderate")
    v.notes["nets"] = certs
    return v


def gd_negligible_verdict(R: EFunc, K: KBox, m_max: int, nets: Sequence[TestObjectNet],
                          grid: Optional[EpsGrid] = None, cutoff=None) -> Verdict:
    grid = grid or EpsGrid()
    certs = _check_nets(nets, grid, K)
    v = negligible_from_families(R, K, m_max, nets, grid, cutoff, "gd_negligible")
    v.notes["nets"] = certs
    return v


# -- C and J formalisms --------------------------------------------------------

@dataclass
class JFunc:
    """R(phi, x) for phi with support in Omega and x in Omega."""

    rule: Callable[[TestFunction, np.ndarray], complex]
    n: int
    domain: Domain
    label: str = "RJ"

    def guard(self, phi: TestFunction, x) -> bool:
        x = as_points(x, self.n)
        return bool(self.domain.ball_inside(phi.center[None, :], phi.support_radius)[0]
                    and self.domain.contains(x)[0])

    def __call__(self, phi: TestFunction, x):
        return self.rule(phi, np.atleast_1d(np.asarray(x, dtype=float)))


def to_j(R: EFunc) -> JFunc:
    """(T*R)(phi, x) = R(T_{-x} phi, x)."""

    def rule(phi, x):
        return R.evaluate(translate(phi, tuple(-v for v in _exact(x))), x[None, :])[0]

    return JFunc(rule, R.n, R.domain, f"T*{R.label}")


def to_c(J: JFunc, order: int = 0) -> EFunc:
    """Inverse translation: R(phi, x) = J(T_x phi, x), evaluated point by point."""

    def rule_for(alpha):
        if any(alpha):
            raise ValueError("x-derivatives are not available after the formalism translation")

        def rule(phi, pts):
            return np.array([J(translate(phi, _exact(x)), x) for x in pts])

        return rule

    return EFunc(J.n, order, rule_for, f"(T*)^-1 {J.label}", J.domain)


@dataclass(frozen=True)
class GdPoint:
    """X(phi, x) in Omega with range in the compact box ``support``."""

    rule: Callable[[TestFunction, np.ndarray], np.ndarray]
    support: KBox
    label: str = "X"

    def __call__(self, phi: TestFunction, x) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.rule(phi, np.atleast_1d(np.asarray(x, dtype=float))), dtype=float))

    @classmethod
    def constant(cls, x0, support: Optional[KBox] = None) -> "GdPoint":
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return cls(lambda phi, x: x0, support or KBox(tuple(x0), tuple(x0), 1), f"const{x0.tolist()}")

    @classmethod
    def from_number(cls, components: Sequence[Num], support: KBox) -> "GdPoint":
        """x-independent point read from the test function only."""
        return cls(lambda phi, x: np.array([float(np.real(c(phi))) for c in components]), support,
                   "(point " + " ".join(c.sexpr() for c in components) + ")")


def point_to_j(X: GdPoint) -> GdPoint:
    """X^J(phi, x) = X(T_{-x} phi, x)."""
    return GdPoint(lambda phi, x: X(translate(phi, tuple(-v for v in _exact(x))), x), X.support, f"T*{X.label}")


def gd_point_eval_C(R: EFunc, X: GdPoint) -> Callable:
    """(phi, x) -> R(phi, X(phi, x)), or None off U(Omega)."""

    def rule(phi, x):
        y = X(phi, x)
        if not R.guard(phi, y)[0]:
            return None
        return R.evaluate(phi, y[None, :])[0]

    return rule


def gd_point_eval_J(RJ: JFunc, X: GdPoint) -> Callable:
    """(phi, x) -> RJ(T_{X(phi, x) - x} phi, X(phi, x)), or None where RJ is undefined."""

    def rule(phi, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = X(phi, x)
        moved = translate(phi, tuple(a - b for a, b in zip(_exact(y), _exact(x))))
        if not RJ.guard(moved, y):
            return None
        return RJ(moved, y)

    return rule


def transport_c(rule: Callable) -> Callable:
    """T* on a partial rule: (phi, x) -> rule(T_{-x} phi, x)."""
    return lambda phi, x: rule(translate(phi, tuple(-v for v in _exact(x))), np.atleast_1d(x))


@dataclass
class PointEvalSample:
    values: list
    skipped: int
    total: int
    warning: Optional[Verdict] = None

    @property
    def rate(self) -> float:
        return self.skipped / self.total if self.total else 0.0


def sample_point_eval(rule: Callable, pairs: Iterable[tuple[TestFunction, np.ndarray]]) -> PointEvalSample:
    """Evaluate a partial rule on sample pairs, counting the undefined ones."""
    vals, skipped, total = [], 0, 0
    for phi, x in pairs:
        total += 1
        v = rule(phi, x)
        if v is None:
            skipped += 1
        vals.append(v)
    out = PointEvalSample(vals, skipped, total)
    if total and out.rate > GUARD_WARN_RATE:
        out.warning = Verdict.inconclusive(
            "gd_point_eval", f"{skipped} of {total} sampled pairs violate the domain guard; "
            "the eps regime is too coarse for direct evaluation",
        )
    return out


def constancy_check(X: GdPoint, samples: Iterable[tuple[TestFunction, Sequence]]) -> tuple[bool, Optional[dict]]:
    """X(phi, x) == X(phi, y) exactly for all sampled phi and x, y."""
    for phi, xs in samples:
        xs = [np.atleast_1d(np.asarray(x, dtype=float)) for x in xs]
        ref = X(phi, xs[0])
        for x in xs[1:]:
            v = X(phi, x)
            if not np.array_equal(v, ref):
                return False, {"phi": phi.describe(), "x": xs[0].tolist(), "y": x.tolist(),
                               "X(x)": ref.tolist(), "X(y)": v.tolist()}
    return True, None
