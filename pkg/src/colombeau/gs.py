"""The special algebra: eps-indexed nets of smooth functions.

A net is an :class:`XJet` indexed by a float eps.  Moderateness and
negligibility are sampled as sup-norms over a compact K-grid for every
eps of an :class:`EpsGrid`; generalized numbers and points are plain
rules in eps.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .asymptotics import (
    EpsGrid,
    InsufficientData,
    Verdict,
    fit_order,
    landau_violations,
)
from .closedform import XExpression
from .domain import Domain, KBox
from .jets import XJet
from .testfn import MultiIndex, multi_indices_upto

N_MAX = 12
M_MAX = 8


class FunctionNet(XJet):
    """(eps, y) -> u_eps(y) together with closed-form y-derivatives."""

    def __init__(self, n, order, rule_for, label="u", domain: Optional[Domain] = None):
        super().__init__(n, order, rule_for, label)
        self.domain = domain if domain is not None else Domain.whole_space(n)

    def _make(self, order, rule_for, label, other=None):
        return FunctionNet(self.n, order, rule_for, label, self.domain)

    @classmethod
    def from_expr(cls, text: str, n: int = 1, domain: Optional[Domain] = None, order: int = 4) -> "FunctionNet":
        """Net from a closed form in x (or x1..xn) and eps, e.g. ``"bump(x/eps - 1)"``."""
        e = XExpression(text, n, with_eps=True)

        def rule_for(alpha):
            r = e.derivative(alpha)
            return lambda eps, pts: r(float(eps), pts)

        return cls(n, order, rule_for, text, domain)

    @classmethod
    def from_callable(
        cls, fn: Callable, n: int = 1, label: str = "u", domain: Optional[Domain] = None,
        derivs: Optional[dict] = None,
    ) -> "FunctionNet":
        """Net from ``fn(eps, pts)``; ``derivs`` maps multi-indices to derivative rules."""
        derivs = dict(derivs or {})
        derivs[(0,) * n] = fn
        order = 0
        while order < 8 and all(a in derivs for a in multi_indices_upto(n, order + 1)):
            order += 1

        def rule_for(alpha):
            return derivs[tuple(alpha)]

        return cls(n, order, rule_for, label, domain)


@dataclass(frozen=True)
class GenNumberGs:
    """eps -> C."""

    rule: Callable[[float], complex]
    label: str = "r"

    def __call__(self, eps) -> complex:
        return self.rule(eps)

    def sample(self, grid: EpsGrid) -> np.ndarray:
        return np.array([self.rule(e) for e in grid.values])


@dataclass(frozen=True)
class GenPointGs:
    """eps -> Omega, optionally certified to stay in ``support_box`` for eps < ``threshold``."""

    rule: Callable[[float], np.ndarray]
    n: int = 1
    support_box: Optional[KBox] = None
    threshold: float = 1.0
    label: str = "x"
    notes: dict = field(default_factory=dict, compare=False)

    def __call__(self, eps) -> np.ndarray:
        return np.asarray(self.rule(eps), dtype=float).reshape(self.n)

    @classmethod
    def constant(cls, x, support_box: Optional[KBox] = None) -> "GenPointGs":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        box = support_box or KBox(tuple(x), tuple(x), 1)
        return cls(lambda eps: x, len(x), box, 1.0, f"const{x.tolist()}")

    def check_support(self, grid: EpsGrid) -> list[float]:
        """Grid eps below the threshold whose value leaves the certified box."""
        if self.support_box is None:
            return []
        return [e for e in grid.values if e < self.threshold and not self.support_box.contains(self(e))[0]]


def gs_point_eval(u: FunctionNet, xt: GenPointGs) -> GenNumberGs:
    """eps -> u_eps(x_eps), exact composition of the two rules."""
    if xt.support_box is None:
        raise ValueError(f"point {xt.label} has no compact-support certificate")
    if xt.n != u.n:
        raise ValueError("dimension mismatch between net and point")

    def rule(eps):
        return u.evaluate(eps, xt(eps)[None, :])[0]

    return GenNumberGs(rule, f"{u.label}({xt.label})")


# -- sweeps -----------------------------------------------------------------

@dataclass
class Sweep:
    """Per-eps sup over a K-grid: magnitudes and the argmax points."""

    eps: np.ndarray
    exact: list
    mags: np.ndarray
    argmax: np.ndarray


def sup_sweep(u: FunctionNet, K: KBox, grid: EpsGrid, alpha: Optional[MultiIndex] = None) -> Sweep:
    pts = K.grid
    mags, where = [], []
    for e in grid.values:
        with np.errstate(all="ignore"):
            v = np.abs(u.evaluate(e, pts, alpha))
        v = np.where(np.isnan(v), np.inf, v)
        i = int(np.argmax(v))
        mags.append(float(v[i]))
        where.append(pts[i])
    return Sweep(grid.values, grid.exact, np.array(mags), np.array(where))


def _estimate(eps, mags, label):
    try:
        return fit_order(eps, mags, label=label)
    except InsufficientData:
        return None


def _check_domain(u: XJet, K: KBox):
    dom = getattr(u, "domain", None)
    if dom is not None:
        K.check_inside(dom)


def _witness(sweep: Sweep, i: int, **extra) -> dict:
    return {
        "eps": float(sweep.eps[i]),
        "eps_exact": str(sweep.exact[i]),
        "x": sweep.argmax[i].tolist(),
        "magnitude": float(sweep.mags[i]),
        **extra,
    }


def moderate_order(eps, mags, cutoff: float, n_max: int) -> tuple[Optional[int], np.ndarray]:
    """Smallest N <= n_max with |f| <= eps^-N below the cutoff, and the violations at n_max."""
    for N in range(0, n_max + 1):
        bad = landau_violations(eps, mags, -N, cutoff)
        if bad.size == 0:
            return N, bad
    return None, bad


def negligible_order(eps, mags, m_max: int, cutoff: float) -> tuple[int, Optional[int], np.ndarray]:
    """(largest m passed, first failing m or None, violating indices at that m)."""
    passed = 0
    for m in range(1, m_max + 1):
        bad = landau_violations(eps, mags, m, cutoff)
        if bad.size:
            return passed, m, bad
        passed = m
    return passed, None, np.array([], dtype=int)


def gs_moderate_verdict(
    u: FunctionNet,
    K: KBox,
    alpha_max: int = 0,
    grid: Optional[EpsGrid] = None,
    n_max: int = N_MAX,
    cutoff: Optional[float] = None,
) -> Verdict:
    """sup_K |d^alpha u_eps| = O(eps^-N) for every |alpha| <= alpha_max, with N <= n_max."""
    grid = grid or EpsGrid()
    cutoff = grid.asymptotic_cutoff() if cutoff is None else cutoff
    if alpha_max > u.order:
        raise ValueError(f"alpha_max {alpha_max} exceeds the derivative order {u.order} of {u.label}")
    _check_domain(u, K)
    estimates, certs = [], {}
    for alpha in multi_indices_upto(u.n, alpha_max):
        sw = sup_sweep(u, K, grid, alpha)
        est = _estimate(sw.eps, sw.mags, f"sup|d^{alpha} {u.label}|")
        if est is not None:
            estimates.append(est)
        N, bad = moderate_order(sw.eps, sw.mags, cutoff, n_max)
        if N is None:
            i = int(bad[0])
            return Verdict.refute(
                "gs_moderate",
                _witness(sw, i, alpha=list(alpha), bound=f"eps^-{n_max}"),
                estimates=estimates,
                certificates=certs,
                reason=f"sup exceeds eps^-{n_max}",
            )
        certs[str(alpha)] = N
    return Verdict.support(
        "gs_moderate", max(certs.values(), default=0),
        certificates={"N": max(certs.values(), default=0), "per_alpha": certs},
        estimates=estimates,
    )


def gs_negligible_verdict(
    u: FunctionNet,
    K: KBox,
    m_max: int = M_MAX,
    grid: Optional[EpsGrid] = None,
    cutoff: Optional[float] = None,
    moderate: Optional[Verdict] = None,
) -> Verdict:
    """sup_K |u_eps| = O(eps^m) for m = 1..m_max; only alpha = 0 is tested."""
    grid = grid or EpsGrid()
    cutoff = grid.asymptotic_cutoff() if cutoff is None else cutoff
    _check_domain(u, K)
    moderate = moderate or gs_moderate_verdict(u, K, 0, grid, cutoff=cutoff)
    if not moderate.supported:
        return Verdict.inconclusive(
            "gs_negligible", "net is not moderate, so derivative-free negligibility does not apply",
            notes={"moderate": moderate},
        )
    sw = sup_sweep(u, K, grid)
    est = _estimate(sw.eps, sw.mags, f"sup|{u.label}|")
    estimates = [est] if est is not None else []
    passed, failed_m, bad = negligible_order(sw.eps, sw.mags, m_max, cutoff)
    if failed_m is not None:
        i = int(bad[0])
        return Verdict.refute(
            "gs_negligible", _witness(sw, i, m=failed_m, alpha=[0] * u.n),
            max_order=passed, estimates=estimates,
        )
    return Verdict.support("gs_negligible", m_max, estimates=estimates)


def gs_witness_search(
    u: FunctionNet, K: KBox, m0: int = 1, grid: Optional[EpsGrid] = None
) -> Optional[GenPointGs]:
    """Point net x(eps) = argmax_K |u_eps| if |u_eps(x(eps))| > eps^m0 often enough.

    "Often enough" means at least half of the asymptotic window.  The net
    is defined for every eps, not only on the grid.
    """
    grid = grid or EpsGrid()
    _check_domain(u, K)
    pts = K.grid

    def argmax(eps):
        with np.errstate(all="ignore"):
            v = np.abs(u.evaluate(eps, pts))
        return pts[int(np.argmax(np.where(np.isnan(v), np.inf, v)))]

    sw = sup_sweep(u, K, grid)
    window = grid.asymptotic_slice()
    e, m = sw.eps[window], sw.mags[window]
    with np.errstate(over="ignore"):
        hits = m > e**m0
    if hits.sum() * 2 < hits.size or not hits.any():
        return None
    table = {float(ev): x for ev, x in zip(sw.eps, sw.argmax)}
    return GenPointGs(
        lambda eps: table[float(eps)] if float(eps) in table else argmax(eps),
        u.n,
        K,
        1.0,
        f"argmax|{u.label}|",
        notes={"hits": int(hits.sum()), "window_points": int(hits.size), "m0": m0},
    )


# -- constants ----------------------------------------------------------------

def spread(values: np.ndarray) -> tuple[float, int, int]:
    """max |v_i - v_j| over a sample, with a maximizing pair of indices."""
    v = np.asarray(values)
    if not np.iscomplexobj(v) or not np.any(v.imag):
        r = v.real
        i, j = int(np.argmax(r)), int(np.argmin(r))
        return float(r[i] - r[j]), i, j
    # extreme points along a few directions contain a diameter pair of the convex hull
    angles = np.linspace(0, np.pi, 64, endpoint=False)
    dirs = np.cos(angles) + 1j * np.sin(angles)
    proj = (v[None, :] * np.conj(dirs)[:, None]).real
    cand = np.unique(np.concatenate([np.argmax(proj, axis=1), np.argmin(proj, axis=1)]))
    best, bi, bj = 0.0, 0, 0
    for a, b in itertools.combinations(cand, 2):
        d = abs(v[a] - v[b])
        if d > best:
            best, bi, bj = float(d), int(a), int(b)
    return best, bi, bj


def gs_constant_check(
    u: FunctionNet,
    K: KBox,
    grid: Optional[EpsGrid] = None,
    m_max: int = M_MAX,
    cutoff: Optional[float] = None,
) -> Verdict:
    """Reports negligibility of every d_i u and of the spread of u over K.

    Both tests should agree on a connected domain; if they do not the
    overall verdict is Inconclusive.
    """
    grid = grid or EpsGrid()
    cutoff = grid.asymptotic_cutoff() if cutoff is None else cutoff
    if not u.domain.connected:
        raise ValueError("constant check needs a connected domain")
    _check_domain(u, K)

    derivs = [gs_negligible_verdict(u.derive(i), K, m_max, grid, cutoff) for i in range(u.n)]

    pts = K.grid
    mags, pairs = [], []
    for e in grid.values:
        s, i, j = spread(u.evaluate(e, pts))
        mags.append(s)
        pairs.append((pts[i].tolist(), pts[j].tolist()))
    mags = np.array(mags)
    est = _estimate(grid.values, mags, f"spread {u.label}")
    passed, failed_m, bad = negligible_order(grid.values, mags, m_max, cutoff)
    if failed_m is None:
        spread_v = Verdict.support("gs_spread", m_max, estimates=[est] if est else [])
    else:
        k = int(bad[0])
        spread_v = Verdict.refute(
            "gs_spread",
            {"eps": float(grid.values[k]), "eps_exact": str(grid.exact[k]), "x": pairs[k][0],
             "y": pairs[k][1], "magnitude": float(mags[k]), "m": failed_m},
            max_order=passed, estimates=[est] if est else [],
        )

    deriv_ok = all(v.supported for v in derivs)
    notes = {"derivatives": derivs, "spread": spread_v}
    if deriv_ok and spread_v.supported:
        return Verdict.support("gs_constant", m_max, notes=notes)
    if not deriv_ok and spread_v.refuted:
        failing = next(v for v in derivs if not v.supported)
        return Verdict.refute("gs_constant", spread_v.witness, max_order=spread_v.max_order,
                              notes=notes, reason=f"derivative test: {failing.kind.value}")
    return Verdict.inconclusive("gs_constant", "derivative and spread tests disagree on this grid", notes=notes)
