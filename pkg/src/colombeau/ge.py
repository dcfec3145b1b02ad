"""The elementary full algebra: representatives R(phi, x) indexed by test functions.

Asymptotic tests scale the generators of a :class:`TestBattery` over an
eps grid.  Generalized numbers and points are combinator trees from
:mod:`colombeau.numbers`, so the case split of the witness construction
("is phi equal to S_eps phi_q?") is decided exactly on tags.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .asymptotics import EpsGrid, InsufficientData, Verdict, fit_order, landau_violations
from .closedform import XExpression
from .distributions import DeltaDerivative, DistributionSpec, pair_shifted
from .domain import Domain, KBox, as_points
from .jets import XJet
from .numbers import GenPointGe, Num, PointValue, Recip, ZeroInd, point_table
from .testfn import (
    QUAD_NODES,
    MultiIndex,
    TestFunction,
    from_record,
    make_moment_testfn,
    multi_indices_upto,
    scale,
)

Q_MAX = 8
M_MAX = 8
N_MAX = 12
EVIDENCE_MIN_HITS = 5
# magnitudes of quadrature-based representatives below this are round-off
RESOLUTION = 1e-13


class EFunc(XJet):
    """R(phi, x), smooth in x, defined on U(Omega) = {(phi, x): supp phi + x in Omega}."""

    def __init__(self, n, order, rule_for, label="R", domain: Optional[Domain] = None, real: bool = False,
                 exact: bool = True):
        super().__init__(n, order, rule_for, label)
        self.domain = domain if domain is not None else Domain.whole_space(n)
        self.real = real
        # False when values come from quadrature and carry round-off
        self.exact = exact

    def _make(self, order, rule_for, label, other=None):
        real = self.real and (other is None or getattr(other, "real", True))
        exact = self.exact and (other is None or getattr(other, "exact", True))
        return EFunc(self.n, order, rule_for, label, self.domain, real, exact)

    def guard(self, phi: TestFunction, pts) -> np.ndarray:
        """Mask of points x with (phi, x) in U(Omega)."""
        pts = as_points(pts, self.n)
        if all(np.all(np.isinf(b.lo)) and np.all(np.isinf(b.hi)) for b in self.domain.boxes):
            return np.ones(pts.shape[0], dtype=bool)
        return self.domain.ball_inside(phi.center + pts, phi.support_radius)

    def evaluate_guarded(self, phi: TestFunction, x):
        """R(phi, x) on U(Omega) and 0 outside."""
        x = as_points(x, self.n)
        if not self.guard(phi, x)[0]:
            return 0.0
        v = self.evaluate(phi, x)[0]
        return complex(v) if np.iscomplexobj(v) else float(v)


def pairing_nodes(n: int) -> int:
    """Quadrature nodes per axis for embedded pairings: 256 in 1D, the default otherwise."""
    return 256 if n == 1 else QUAD_NODES


def embed(u: DistributionSpec, order: int = 8, nodes: Optional[int] = None) -> EFunc:
    """iota(u)(phi, x) = <u, T_x phi>; d^alpha_x iota(u) = (-1)^|alpha| <u, T_x d^alpha phi>."""
    nodes = nodes or pairing_nodes(u.n)

    def rule_for(alpha):
        sign = (-1) ** sum(alpha)
        return lambda phi, pts: sign * pair_shifted(u, phi, pts, alpha, nodes)

    real = not getattr(getattr(u, "f", None), "is_complex", False)
    return EFunc(u.n, order, rule_for, f"iota({u.label})", u.domain, real, isinstance(u, DeltaDerivative))


def classical(text: str, n: int = 1, domain: Optional[Domain] = None, order: int = 8) -> EFunc:
    """The phi-independent representative (phi, x) -> f(x) of a smooth closed form."""
    e = XExpression(text, n)

    def rule_for(alpha):
        r = e.derivative(alpha)
        return lambda phi, pts: r(pts)

    return EFunc(n, order, rule_for, text, domain, not e.is_complex)


def rho_embed(r: Num, n: int = 1, domain: Optional[Domain] = None) -> EFunc:
    """rho(r)(phi, x) = r(phi), constant in x."""

    def rule_for(alpha):
        if any(alpha):
            return lambda phi, pts: np.zeros(pts.shape[0])
        return lambda phi, pts: np.full(pts.shape[0], r(phi))

    return EFunc(n, 10**6, rule_for, f"rho({r.sexpr()})", domain, r.real)


def invert_function(R: EFunc) -> EFunc:
    """S(phi, x) = 1/R(phi, x) where R != 0 and 0 elsewhere."""
    return R.reciprocal()


def ge_point_eval(R: EFunc, X: GenPointGe) -> Num:
    """R(X)(phi) = R(phi, X(phi)) on U(Omega), 0 otherwise."""
    if X.n != R.n:
        raise ValueError("dimension mismatch between representative and point")
    return PointValue(R, X)


# -- batteries ----------------------------------------------------------------

@dataclass(frozen=True)
class BatteryMember:
    """A fixed generator phi_q, used at S_eps phi_q for every x."""

    phi: TestFunction
    q: int

    @property
    def label(self) -> str:
        return self.phi.generator_id

    def members(self, eps: Fraction, pts: np.ndarray) -> list[tuple[TestFunction, np.ndarray]]:
        return [(scale(self.phi, eps), np.arange(pts.shape[0]))]

    def describe(self) -> dict:
        return {"kind": "constant", "generator_id": self.phi.generator_id, "q": self.q}


@dataclass(frozen=True)
class TestBattery:
    """phi_q = make_moment_testfn(n, q, 1, rho) for q = 0..q_max, plus an eps grid."""

    __test__ = False

    n: int = 1
    q_max: int = Q_MAX
    rho: float = 1.0
    grid: EpsGrid = field(default_factory=EpsGrid)

    def __post_init__(self):
        phis = tuple(make_moment_testfn(self.n, q, 1, self.rho) for q in range(self.q_max + 1))
        for q, phi in enumerate(phis):
            if phi.certified_order[0] != q:
                raise ValueError(f"generator {phi.generator_id} certifies order {phi.certified_order[0]}, not {q}")
        object.__setattr__(self, "_phis", phis)

    @property
    def phis(self) -> tuple[TestFunction, ...]:
        return self._phis

    @property
    def families(self) -> list[BatteryMember]:
        return [BatteryMember(p, q) for q, p in enumerate(self._phis)]

    @property
    def id(self) -> str:
        g = self.grid
        return f"battery/n{self.n}/q{self.q_max}/r{self.rho!r}/eps{g.base!r}^{g.start_exp}..{g.end_exp}"

    def with_grid(self, grid: EpsGrid) -> "TestBattery":
        return TestBattery(self.n, self.q_max, self.rho, grid)

    def scaled(self, q: int) -> list[TestFunction]:
        return [scale(self._phis[q], e) for e in self.grid.exact]

    def manifest(self) -> dict:
        return {
            "id": self.id,
            "grid": self.grid.to_dict(),
            "generators": [p.generator.manifest() for p in self._phis],
        }


# -- sweeps -------------------------------------------------------------------

@dataclass
class FamilySweep:
    """sup over a K-grid of |d^alpha R(psi, x)| for each eps, psi taken from one family."""

    q: int
    label: str
    eps: np.ndarray
    exact: list
    mags: np.ndarray
    argmax: list
    phis: list
    skipped: int = 0


def family_sweep(R: EFunc, K: KBox, family, grid: EpsGrid, alpha: Optional[MultiIndex] = None) -> FamilySweep:
    pts = K.grid
    mags, where, which, skipped = [], [], [], 0
    for e in grid.exact:
        best, bx, bphi = 0.0, None, None
        for psi, idx in family.members(e, pts):
            sub = pts[idx]
            ok = R.guard(psi, sub)
            skipped += int((~ok).sum())
            if not ok.any():
                continue
            with np.errstate(all="ignore"):
                v = np.abs(R.evaluate(psi, sub[ok], alpha))
            v = np.where(np.isnan(v), np.inf, v)
            i = int(np.argmax(v))
            if bx is None or v[i] > best:
                best, bx, bphi = float(v[i]), sub[ok][i], psi
        mags.append(best)
        where.append(None if bx is None else bx.tolist())
        which.append(bphi)
    return FamilySweep(family.q, family.label, grid.values, grid.exact, np.array(mags), where, which, skipped)


def _witness(sw: FamilySweep, i: int, **extra) -> dict:
    phi = sw.phis[i]
    return {
        "q": sw.q,
        "family": sw.label,
        "phi": phi.describe() if phi is not None else None,
        "eps": float(sw.eps[i]),
        "eps_exact": str(sw.exact[i]),
        "x": sw.argmax[i],
        "magnitude": float(sw.mags[i]),
        **extra,
    }


def replay_witness(R: EFunc, witness: dict) -> float:
    """Re-evaluate |d^alpha R(phi, x)| from a witness record."""
    phi = from_record(witness["phi"])
    alpha = tuple(witness.get("alpha") or (0,) * R.n)
    return float(np.abs(R.evaluate(phi, [witness["x"]], alpha))[0])


def _estimates(sweeps: Iterable[FamilySweep], label: str) -> list:
    out = []
    for sw in sweeps:
        try:
            out.append(fit_order(sw.eps, sw.mags, label=f"{label} [{sw.label}]"))
        except InsufficientData:
            pass
    return out


def _above(families: Sequence, q: int) -> list:
    return [f for f in families if f.q >= q]


def moderate_from_families(
    R: EFunc, K: KBox, alpha_max: int, families: Sequence, grid: EpsGrid,
    cutoff: Optional[float] = None, test: str = "ge_moderate", battery_id: str = "",
    n_max: int = N_MAX,
) -> Verdict:
    """Per alpha, the smallest N <= n_max such that every family of order >= N satisfies sup <= eps^-N."""
    cutoff = grid.asymptotic_cutoff() if cutoff is None else cutoff
    if alpha_max > R.order:
        raise ValueError(f"alpha_max {alpha_max} exceeds the derivative order {R.order} of {R.label}")
    K.check_inside(R.domain)
    q_top = max(f.q for f in families)
    certs, estimates, skipped = {}, [], 0
    for alpha in multi_indices_upto(R.n, alpha_max):
        sweeps = {id(f): family_sweep(R, K, f, grid, alpha) for f in families}
        skipped += sum(s.skipped for s in sweeps.values())
        estimates += _estimates(sweeps.values(), f"sup|d^{alpha} {R.label}|")
        found, last_bad = None, None
        for N in range(0, n_max + 1):
            # A_N is sampled by the families of order >= N, or by the top family once N passes it
            bad = [
                (sweeps[id(f)], landau_violations(sweeps[id(f)].eps, sweeps[id(f)].mags, -N, cutoff))
                for f in _above(families, min(N, q_top))
            ]
            bad = [(s, b) for s, b in bad if b.size]
            if not bad:
                found = N
                break
            last_bad = bad[0]
        if found is None:
            sw, b = last_bad
            return Verdict.refute(
                test, _witness(sw, int(b[0]), alpha=list(alpha), bound=f"eps^-{n_max}"),
                estimates=estimates, battery_id=battery_id,
                certificates={"per_alpha": certs}, notes={"guard_skipped": skipped},
                reason=f"no N <= {n_max} bounds the sup",
            )
        certs[str(alpha)] = found
    N = max(certs.values())
    return Verdict.support(
        test, N, certificates={"N": N, "per_alpha": certs}, estimates=estimates,
        battery_id=battery_id, notes={"guard_skipped": skipped},
    )


def negligible_from_families(
    R: EFunc, K: KBox, m_max: int, families: Sequence, grid: EpsGrid,
    cutoff: Optional[float] = None, test: str = "ge_negligible", battery_id: str = "",
) -> Verdict:
    """For each m <= m_max, the smallest q such that every family of order >= q satisfies sup <= eps^m.

    Only alpha = 0 is swept; moderateness at alpha = 0 is checked on the
    same samples first.
    """
    cutoff = grid.asymptotic_cutoff() if cutoff is None else cutoff
    K.check_inside(R.domain)
    sweeps = {id(f): family_sweep(R, K, f, grid) for f in families}
    skipped = sum(s.skipped for s in sweeps.values())
    estimates = _estimates(sweeps.values(), f"sup|{R.label}|")
    q_top = max(f.q for f in families)
    notes = {"guard_skipped": skipped}

    def violations(q, p):
        out = []
        for f in _above(families, q):
            s = sweeps[id(f)]
            b = landau_violations(s.eps, s.mags, p, cutoff)
            if b.size:
                out.append((s, b))
        return out

    if not any(not violations(min(N, q_top), -N) for N in range(N_MAX + 1)):
        return Verdict.inconclusive(
            test, "representative is not moderate at alpha = 0, so negligibility is not tested",
            estimates=estimates, battery_id=battery_id, notes=notes,
        )
    table = {}
    for m in range(1, m_max + 1):
        hit = next((q for q in range(q_top + 1) if not violations(q, m)), None)
        if hit is None:
            sw, b = violations(q_top, m)[0]
            return Verdict.refute(
                test, _witness(sw, int(b[0]), m=m, alpha=[0] * R.n),
                max_order=m - 1, certificates={"m_to_q": table}, estimates=estimates,
                battery_id=battery_id, notes=notes,
            )
        table[m] = hit
    return Verdict.support(test, m_max, certificates={"m_to_q": table}, estimates=estimates,
                           battery_id=battery_id, notes=notes)


def ge_moderate_verdict(R: EFunc, K: KBox, alpha_max: int, battery: TestBattery, cutoff=None) -> Verdict:
    return moderate_from_families(R, K, alpha_max, battery.families, battery.grid, cutoff,
                                  "ge_moderate", battery.id)


def ge_negligible_verdict(R: EFunc, K: KBox, m_max: int, battery: TestBattery, cutoff=None) -> Verdict:
    return negligible_from_families(R, K, m_max, battery.families, battery.grid, cutoff,
                                    "ge_negligible", battery.id)


# -- point-value characterization -----------------------------------------------

@dataclass
class EvidenceRow:
    q: int
    generator_id: str
    order: int
    pairs: list  # (eps Fraction, x ndarray, magnitude)

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "generator_id": self.generator_id,
            "moment_order": self.order,
            "pairs": [{"eps": str(e), "x": x.tolist(), "magnitude": m} for e, x, m in self.pairs],
        }


@dataclass
class Evidence:
    m0: int
    K: KBox
    rows: dict = field(default_factory=dict)
    thin: dict = field(default_factory=dict)  # q -> number of hits when too few

    @property
    def empty(self) -> bool:
        return not self.rows

    def to_dict(self) -> dict:
        return {"m0": self.m0, "rows": [r.to_dict() for r in self.rows.values()], "thin": self.thin}


def gather_evidence(R: EFunc, K: KBox, m0: int, battery: TestBattery, min_hits: int = EVIDENCE_MIN_HITS) -> Evidence:
    """Per q, the grid eps with some x in the K-grid where |R(S_eps phi_q, x)| > eps^m0."""
    K.check_inside(R.domain)
    pts = K.grid
    ev = Evidence(m0, K)
    for q, phi in enumerate(battery.phis):
        pairs = []
        for e in battery.grid.exact:
            psi = scale(phi, e)
            ok = R.guard(psi, pts)
            if not ok.any():
                continue
            sub = pts[ok]
            v = np.abs(R.evaluate(psi, sub))
            v = np.where(np.isnan(v), 0.0, v)
            i = int(np.argmax(v))
            if v[i] > float(e) ** m0:
                pairs.append((e, sub[i].copy(), float(v[i])))
        if len(pairs) >= min_hits:
            ev.rows[q] = EvidenceRow(q, phi.generator_id, phi.certified_order[0], pairs)
        elif pairs:
            ev.thin[q] = len(pairs)
    return ev


def select_orders(evidence: Evidence) -> list[int]:
    """q_1 = 1, q_{l+1} = a_l + 1, moving up to the next q that has evidence."""
    chosen, q = [], 1
    available = sorted(evidence.rows)
    while True:
        nxt = next((k for k in available if k >= q), None)
        if nxt is None:
            return chosen
        chosen.append(nxt)
        q = evidence.rows[nxt].order + 1


def construct_point(evidence: Evidence, x0=None, label: str = "X") -> GenPointGe:
    """X(S_eps phi_q) = x_{q,eps} on the evidence pairs, X = x0 for every other phi."""
    K = evidence.K
    x0 = K.center if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    if not K.contains(x0)[0]:
        raise ValueError("x0 must lie in K")
    chosen = select_orders(evidence)
    if len(chosen) < 2:
        missing = [q for q in range(1, max(evidence.rows, default=0) + 2) if q not in evidence.rows]
        raise ValueError(
            f"evidence too thin: usable orders {chosen}, no evidence for q in {missing}, "
            f"too few hits for {evidence.thin}"
        )
    entries = {}
    for q in chosen:
        row = evidence.rows[q]
        for e, x, _ in row.pairs:
            entries[(row.generator_id, e)] = x
    X = point_table(entries, x0, K, label)
    return X


def characterization_pipeline(R: EFunc, K: KBox, m0: int, battery: TestBattery) -> Verdict:
    """Refute R = 0 by building a compactly supported point X with R(X) not O(eps^m0)."""
    ev = gather_evidence(R, K, m0, battery)
    if ev.empty or len(select_orders(ev)) < 2:
        return Verdict.support(
            "characterization", m0, battery_id=battery.id,
            certificates={"evidence": ev}, reason="no witnessing point sequence on the battery",
        )
    X = construct_point(ev)
    value = ge_point_eval(R, X)
    checked = []
    for q in select_orders(ev):
        row = ev.rows[q]
        phi = battery.phis[q]
        eps = np.array([float(e) for e, _, _ in row.pairs])
        mags = np.array([abs(value(scale(phi, e))) for e, _, _ in row.pairs])
        passes = landau_violations(eps, mags, m0, float(eps.max()) * 2).size == 0
        checked.append({"q": q, "generator_id": row.generator_id, "eps": [str(e) for e, _, _ in row.pairs],
                        "magnitudes": mags.tolist(), "landau_passes": passes})
    failing = [c for c in checked if not c["landau_passes"]]
    if not failing:
        return Verdict.inconclusive("characterization", "constructed point did not reproduce the evidence",
                                    battery_id=battery.id, certificates={"evidence": ev})
    c = failing[0]
    phi = scale(battery.phis[c["q"]], Fraction(c["eps"][0]))
    witness = {
        "point": X.label,
        "phi": phi.describe(),
        "eps_exact": c["eps"][0],
        "x": X(phi).tolist(),
        "magnitude": c["magnitudes"][0],
        "m0": m0,
    }
    return Verdict.refute(
        "characterization", witness, max_order=m0 - 1, battery_id=battery.id,
        certificates={"orders": select_orders(ev), "checks": checked, "evidence": ev},
    )


# -- generalized numbers ----------------------------------------------------------

def _number_samples(r: Num, battery: TestBattery, q: int) -> tuple[np.ndarray, list, np.ndarray]:
    phis = battery.scaled(q)
    vals = np.array([abs(r(p)) for p in phis], dtype=float)
    return battery.grid.values, phis, vals


def _number_witness(q, phi, eps, mag, **extra):
    return {"q": q, "phi": phi.describe(), "eps": float(eps), "eps_exact": str(phi.scale),
            "magnitude": float(mag), **extra}


def replay_number(r: Num, witness: dict) -> float:
    return float(abs(r(from_record(witness["phi"]))))


def _lower_bound_search(samples: dict, battery: TestBattery, cutoff: float, test: str, q_min: int = 1,
                        floor: float = 0.0) -> Verdict:
    """Smallest q >= q_min such that every phi_{q'}, q' >= q, has |r(S_eps phi_q')| >= eps^q below the cutoff.

    Magnitudes at or below ``floor`` count as zero.
    """
    q_top = battery.q_max
    last = None
    for q in range(q_min, N_MAX + 1):
        bad = []
        for k in range(min(q, q_top), q_top + 1):
            eps, phis, vals = samples[k]
            with np.errstate(over="ignore"):
                low = (eps < cutoff) & ~((vals >= eps**q) & (vals > floor))
            if low.any():
                bad.append((k, phis, eps, vals, np.flatnonzero(low)))
        if not bad:
            return Verdict.support(test, q, certificates={"q": q}, battery_id=battery.id)
        last = bad[0]
    k, phis, eps, vals, idx = last
    i = int(idx[0])
    return Verdict.refute(
        test,
        _number_witness(k, phis[i], eps[i], vals[i], bound=f"eps^{N_MAX}",
                        failing_eps=[str(phis[j].scale) for j in idx]),
        battery_id=battery.id,
    )


def strictly_nonzero_verdict(r: Num, battery: TestBattery, cutoff: Optional[float] = None) -> Verdict:
    """|r(S_eps phi)| >= eps^q for phi of moment order >= q, eps below the cutoff (C = 1)."""
    cutoff = battery.grid.asymptotic_cutoff() if cutoff is None else cutoff
    samples = {q: _number_samples(r, battery, q) for q in range(battery.q_max + 1)}
    return _lower_bound_search(samples, battery, cutoff, "strictly_nonzero")


def number_moderate_verdict(r: Num, battery: TestBattery, cutoff: Optional[float] = None) -> Verdict:
    cutoff = battery.grid.asymptotic_cutoff() if cutoff is None else cutoff
    samples = {q: _number_samples(r, battery, q) for q in range(battery.q_max + 1)}
    for N in range(N_MAX + 1):
        bad = [(k, landau_violations(samples[k][0], samples[k][2], -N, cutoff))
               for k in range(min(N, battery.q_max), battery.q_max + 1)]
        bad = [(k, b) for k, b in bad if b.size]
        if not bad:
            return Verdict.support("number_moderate", N, certificates={"N": N}, battery_id=battery.id)
    k, b = bad[0]
    eps, phis, vals = samples[k]
    i = int(b[0])
    return Verdict.refute("number_moderate", _number_witness(k, phis[i], eps[i], vals[i], bound=f"eps^-{N_MAX}"),
                          battery_id=battery.id)


def number_negligible_verdict(r: Num, battery: TestBattery, m_max: int = M_MAX,
                              cutoff: Optional[float] = None) -> Verdict:
    """For each m <= m_max some q with |r(S_eps phi_q')| <= eps^m for all q' >= q."""
    cutoff = battery.grid.asymptotic_cutoff() if cutoff is None else cutoff
    samples = {q: _number_samples(r, battery, q) for q in range(battery.q_max + 1)}
    table = {}
    for m in range(1, m_max + 1):
        found = None
        for q in range(battery.q_max + 1):
            if all(landau_violations(samples[k][0], samples[k][2], m, cutoff).size == 0
                   for k in range(q, battery.q_max + 1)):
                found = q
                break
        if found is None:
            k = battery.q_max
            eps, phis, vals = samples[k]
            i = int(landau_violations(eps, vals, m, cutoff)[0])
            return Verdict.refute("number_negligible", _number_witness(k, phis[i], eps[i], vals[i], m=m),
                                  max_order=m - 1, certificates={"m_to_q": table}, battery_id=battery.id)
        table[m] = found
    return Verdict.support("number_negligible", m_max, certificates={"m_to_q": table}, battery_id=battery.id)


def invert_number(r: Num) -> Num:
    """s(phi) = 1/r(phi) where r(phi) != 0 and 0 elsewhere."""
    return Recip(r)


def zero_divisor_partner(r: Num) -> Num:
    """s(phi) = 1 where r(phi) = 0 and 0 elsewhere, so r * s vanishes identically."""
    return ZeroInd(r)


def ge_invertible_verdict(R: EFunc, Ks: Sequence[KBox], battery: TestBattery,
                          cutoff: Optional[float] = None, resolution: float = RESOLUTION) -> Verdict:
    """For each K: sup_K |R(S_eps phi, x)| >= eps^q for phi of order >= q (m = q).

    For representatives computed by quadrature, sups at or below
    ``resolution`` are round-off and count as zero.
    """
    cutoff = battery.grid.asymptotic_cutoff() if cutoff is None else cutoff
    floor = 0.0 if R.exact else resolution
    per_k = []
    for K in Ks:
        K.check_inside(R.domain)
        samples = {}
        for f in battery.families:
            sw = family_sweep(R, K, f, battery.grid)
            samples[f.q] = (sw.eps, sw.phis, sw.mags)
        v = _lower_bound_search(samples, battery, cutoff, "ge_invertible", floor=floor)
        if v.refuted:
            v.witness["K"] = K.to_dict()
            v.certificates["per_K"] = per_k
            return v
        per_k.append({"K": K.to_dict(), "q": v.max_order})
    q = max(c["q"] for c in per_k)
    return Verdict.support("ge_invertible", q, certificates={"q": q, "per_K": per_k}, battery_id=battery.id)


def leq_verdict(r: Num, s: Num, battery: TestBattery, m_max: int = M_MAX,
                cutoff: Optional[float] = None) -> Verdict:
    """r <= s: pointwise on the battery, else up to a negligible excess."""
    if not (r.real and s.real):
        raise ValueError("the order relation is only defined for real numbers")
    worst = None
    for q in range(battery.q_max + 1):
        for phi in battery.scaled(q):
            a, b = float(np.real(r(phi))), float(np.real(s(phi)))
            if not a <= b and (worst is None or a - b > worst[0]):
                worst = (a - b, q, phi)
    if worst is None:
        return Verdict.support("leq", None, certificates={"stage": "pointwise"}, battery_id=battery.id)
    excess = _Excess(r, s)
    v = number_negligible_verdict(excess, battery, m_max, cutoff)
    if v.supported:
        return Verdict.support("leq", m_max, certificates={"stage": "up_to_negligible", **v.certificates},
                               battery_id=battery.id)
    gap, q, phi = worst
    return Verdict.refute(
        "leq", _number_witness(q, phi, phi.eps, gap, r=float(np.real(r(phi))), s=float(np.real(s(phi)))),
        battery_id=battery.id, notes={"excess": v},
    )


class _Excess(Num):
    """max(r - s, 0)."""

    def __init__(self, r: Num, s: Num):
        self.r, self.s = r, s

    def __call__(self, phi):
        return max(float(np.real(self.r(phi) - self.s(phi))), 0.0)

    def sexpr(self):
        return f"(excess {self.r.sexpr()} {self.s.sexpr()})"


# -- constants ----------------------------------------------------------------------

@dataclass(frozen=True)
class Chain:
    """Polyline joining two compact boxes through overlapping domain boxes."""

    waypoints: np.ndarray
    length: float
    L: float
    tube: tuple[KBox, ...]

    def to_dict(self) -> dict:
        return {"waypoints": self.waypoints.tolist(), "length": self.length, "L": self.L,
                "tube": [k.to_dict() for k in self.tube]}


def connecting_chain(domain: Domain, K1: KBox, K2: KBox, points: int = 33) -> Chain:
    """Waypoints K1.center, box centers and overlap centers along a box path, K2.center.

    Consecutive waypoints share a convex domain box, so each segment stays
    in the domain; any point of K1 reaches any point of K2 along a curve of
    length at most L = polyline length + (diam K1 + diam K2) / 2.
    """
    if not domain.connected:
        raise ValueError("the box graph of the domain is disconnected")
    i, j = domain.containing_box(K1), domain.containing_box(K2)
    path = domain.box_path(i, j)
    way = [K1.center]
    for a, b in zip(path, path[1:]):
        way.append(domain.boxes[a].overlap(domain.boxes[b]).center)
    way.append(K2.center)
    way = np.array(way)
    length = float(np.sum(np.linalg.norm(np.diff(way, axis=0), axis=1)))
    tube = [K1, K2]
    for a, b in zip(way, way[1:]):
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        tube.append(KBox(tuple(lo), tuple(hi), points))
    return Chain(way, length, length + 0.5 * (K1.diam + K2.diam), tuple(tube))


def ge_constant_check(
    R: EFunc, K1: KBox, K2: KBox, X: GenPointGe, battery: TestBattery,
    m_max: int = M_MAX, cutoff: Optional[float] = None,
) -> Verdict:
    """Reports negligibility of each D_i R on the tube M and of sup_{y in K1} |R(y) - R(X)|."""
    cutoff = battery.grid.asymptotic_cutoff() if cutoff is None else cutoff
    chain = connecting_chain(R.domain, K1, K2)
    derivs = []
    for i in range(R.n):
        D = R.derive(i)
        derivs += [ge_negligible_verdict(D, M, m_max, battery, cutoff) for M in chain.tube]
    deriv_ok = all(v.supported for v in derivs)

    pts = K1.grid
    sweeps, skipped = [], 0
    for f in battery.families:
        mags, where, phis = [], [], []
        for e in battery.grid.exact:
            psi = scale(f.phi, e)
            x = X(psi)
            ok = R.guard(psi, pts)
            skipped += int((~ok).sum())
            if not R.guard(psi, x)[0] or not ok.any():
                mags.append(0.0)
                where.append(None)
                phis.append(psi)
                continue
            sub = pts[ok]
            d = np.abs(R.evaluate(psi, sub) - R.evaluate(psi, x[None, :])[0])
            k = int(np.argmax(d))
            mags.append(float(d[k]))
            where.append({"y": sub[k].tolist(), "X": x.tolist()})
            phis.append(psi)
        sweeps.append((f.q, np.array(mags), where, phis))

    table, spread_v = {}, None
    for m in range(1, m_max + 1):
        found = None
        for q in range(battery.q_max + 1):
            if all(landau_violations(battery.grid.values, mg, m, cutoff).size == 0
                   for qq, mg, _, _ in sweeps if qq >= q):
                found = q
                break
        if found is None:
            qq, mg, where, phis = sweeps[-1]
            i = int(landau_violations(battery.grid.values, mg, m, cutoff)[0])
            spread_v = Verdict.refute(
                "ge_spread",
                {"q": qq, "phi": phis[i].describe(), "eps_exact": str(phis[i].scale), "eps": phis[i].eps,
                 **(where[i] or {}), "magnitude": float(mg[i]), "m": m},
                max_order=m - 1, certificates={"m_to_q": table}, battery_id=battery.id,
            )
            break
        table[m] = found
    if spread_v is None:
        spread_v = Verdict.support("ge_spread", m_max, certificates={"m_to_q": table}, battery_id=battery.id)

    notes = {"chain": chain, "derivatives": derivs, "spread": spread_v, "guard_skipped": skipped}
    certs = {"L": chain.L, "M": [k.to_dict() for k in chain.tube]}
    if deriv_ok and spread_v.supported:
        return Verdict.support("ge_constant", m_max, certificates=certs, notes=notes, battery_id=battery.id)
    if not deriv_ok and spread_v.refuted:
        return Verdict.refute("ge_constant", spread_v.witness, max_order=spread_v.max_order,
                              certificates=certs, notes=notes, battery_id=battery.id)
    return Verdict.inconclusive("ge_constant", "derivative and spread tests disagree on this battery",
                                certificates=certs, notes=notes, battery_id=battery.id)
