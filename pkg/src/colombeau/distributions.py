"""Distributions acting on test functions.

Four kinds are supported: smooth functions with closed-form derivatives,
derivatives of the Dirac delta at 0, the Heaviside function (n = 1), and
locally integrable functions paired by quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .closedform import XExpression
from .domain import Domain, as_points
from .testfn import QUAD_NODES, MultiIndex, TestFunction, _gauss_legendre, tensor_nodes, unit


class DomainGuardError(ValueError):
    """A test function's support is not contained in the domain."""


@dataclass(frozen=True)
class SmoothFunction:
    """Regular distribution of a smooth f; ``deriv(alpha)`` gives d^alpha f."""

    f: Callable[[np.ndarray], np.ndarray]
    deriv: Optional[Callable[[MultiIndex], Callable]] = None
    n: int = 1
    label: str = "f"
    domain: Optional[Domain] = None

    @classmethod
    def from_expr(cls, text: str, n: int = 1, domain: Optional[Domain] = None) -> "SmoothFunction":
        e = XExpression(text, n)
        return cls(e.derivative(None), e.derivative, n, text, domain)

    def derivative_rule(self, alpha: MultiIndex) -> Callable:
        if not any(alpha):
            return self.f
        if self.deriv is None:
            raise NotImplementedError(f"no closed-form derivatives for {self.label}")
        return self.deriv(alpha)


@dataclass(frozen=True)
class DeltaDerivative:
    """u = d^order delta_0, acting as (-1)^|order| (d^order psi)(0)."""

    order: MultiIndex = (0,)
    domain: Optional[Domain] = None

    @property
    def n(self) -> int:
        return len(self.order)

    @property
    def label(self) -> str:
        return "delta" if not any(self.order) else f"delta^{self.order}"


@dataclass(frozen=True)
class Heaviside:
    """u = H on the real line."""

    domain: Optional[Domain] = None
    n: int = 1
    label: str = "H"


@dataclass(frozen=True)
class LocallyIntegrable:
    """Regular distribution of an L^1_loc function, paired by quadrature only."""

    f: Callable[[np.ndarray], np.ndarray]
    n: int = 1
    label: str = "g"
    domain: Optional[Domain] = None


DistributionSpec = Union[SmoothFunction, DeltaDerivative, Heaviside, LocallyIntegrable]


def derivative(u: DistributionSpec, i: int = 0) -> DistributionSpec:
    """Distributional partial derivative d_i u for the kinds where it is closed-form."""
    if isinstance(u, DeltaDerivative):
        return DeltaDerivative(tuple(a + b for a, b in zip(u.order, unit(u.n, i))), u.domain)
    if isinstance(u, Heaviside):
        return DeltaDerivative((0,), u.domain)
    if isinstance(u, SmoothFunction):
        alpha = unit(u.n, i)
        parent = u

        def deriv(beta):
            return parent.derivative_rule(tuple(a + b for a, b in zip(alpha, beta)))

        return SmoothFunction(u.derivative_rule(alpha), deriv, u.n, f"d{i}({u.label})", u.domain)
    raise NotImplementedError(f"no closed-form derivative for {type(u).__name__}")


def pair_shifted(
    u: DistributionSpec,
    phi: TestFunction,
    xs,
    alpha: Optional[MultiIndex] = None,
    nodes: int = QUAD_NODES,
) -> np.ndarray:
    """<u, T_x d^alpha phi> for every row x of ``xs``.

    No domain guard is applied here; callers decide what to do with
    pairs whose support leaves the domain.
    """
    n = phi.n
    xs = as_points(xs, n)
    alpha = tuple(alpha) if alpha else (0,) * n

    if isinstance(u, DeltaDerivative):
        k = u.order
        sign = (-1) ** sum(k)
        return sign * phi.derivative(tuple(a + b for a, b in zip(k, alpha)), -xs)

    if isinstance(u, Heaviside):
        if n != 1:
            raise ValueError("Heaviside is only defined for n = 1")
        if alpha[0] >= 1:
            # int_{-x}^inf phi^(a)(t) dt = -phi^(a-1)(-x)
            return -phi.derivative((alpha[0] - 1,), -xs)
        c, r = float(phi.center[0]), phi.support_radius
        lo = np.maximum(-xs[:, 0], c - r)
        hi = np.full_like(lo, c + r)
        out = np.zeros(xs.shape[0])
        live = lo < hi
        if live.any():
            t, w = _gauss_legendre(nodes)
            a, b = lo[live, None], hi[live, None]
            pts = 0.5 * (b - a) * t[None, :] + 0.5 * (b + a)
            vals = phi.derivative(alpha, pts.reshape(-1, 1)).reshape(pts.shape)
            out[live] = np.sum(0.5 * (b - a) * w[None, :] * vals, axis=1)
        return out

    if isinstance(u, (SmoothFunction, LocallyIntegrable)):
        lo, hi = phi.support_box()
        ts, wt = tensor_nodes(lo, hi, nodes)
        f = u.f
        if any(alpha) and isinstance(u, SmoothFunction) and u.deriv is not None:
            # integrate by parts: pairing d^alpha phi_eps against f loses
            # eps^-|alpha| digits to cancellation, d^alpha f against phi does not
            sign = (-1) ** sum(alpha)
            f = u.derivative_rule(alpha)
            weights = sign * wt * phi(ts)
        else:
            weights = wt * phi.derivative(alpha, ts)
        pts = (xs[:, None, :] + ts[None, :, :]).reshape(-1, n)
        vals = np.asarray(f(pts)).reshape(xs.shape[0], ts.shape[0])
        return vals @ weights

    raise TypeError(f"unsupported distribution {u!r}")


def pair(u: DistributionSpec, psi: TestFunction, alpha: Optional[MultiIndex] = None, nodes: int = QUAD_NODES):
    """<u, d^alpha psi>; raises DomainGuardError if supp psi leaves u's domain."""
    if u.domain is not None and not u.domain.ball_inside(psi.center, psi.support_radius)[0]:
        raise DomainGuardError(f"support of {psi.generator_id} is not inside the domain")
    return pair_shifted(u, psi, np.zeros((1, psi.n)), alpha, nodes)[0]
