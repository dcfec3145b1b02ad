"""The eleven acceptance criteria, one test each, at their stated tolerances.

Each test reports one PASS/FAIL line in the terminal summary.  Run as a
script (``python tests/test_acceptance.py``) for the same output.
"""

import json
import subprocess
import sys
import textwrap
from fractions import Fraction

import numpy as np
import pytest

from colombeau.asymptotics import EpsGrid, fit_order
from colombeau.distributions import DeltaDerivative, Heaviside, SmoothFunction
from colombeau.domain import Domain, KBox
from colombeau.gd import (
    GdPoint,
    TestObjectNet,
    gd_moderate_verdict,
    gd_negligible_verdict,
    gd_point_eval_C,
    gd_point_eval_J,
    point_to_j,
    to_c,
    to_j,
    transport_c,
)
from colombeau.ge import (
    characterization_pipeline,
    classical,
    construct_point,
    embed,
    gather_evidence,
    ge_constant_check,
    ge_invertible_verdict,
    ge_moderate_verdict,
    ge_negligible_verdict,
    ge_point_eval,
    invert_number,
    number_negligible_verdict,
    replay_witness,
    rho_embed,
    strictly_nonzero_verdict,
    zero_divisor_partner,
)
from colombeau.gs import FunctionNet, gs_point_eval, gs_witness_search, GenPointGs
from colombeau.matrix import MatrixGe, adjugate_inverse, nondegenerate_verdict
from colombeau.numbers import Closed, Const, GenPointGe, Op, ScaleOf
from colombeau.runner import load_report, replay_report, run_scenario
from colombeau.scenario import bundled_names, bundled_path, load_scenario, parse_scenario
from colombeau.testfn import make_moment_testfn, moments, multi_indices_upto, scale, translate
from oracle_values import CLOSED_BUMP_MAX, SIN_TAYLOR_LEAD

DELTA = embed(DeltaDerivative())
E = ScaleOf()
KC = KBox.from_bounds([-0.5, 0.5], 33)


def _all_phis(b):
    return [p for q in range(b.q_max + 1) for p in b.scaled(q)]


# -- 1 ------------------------------------------------------------------------

FACTORY_SCRIPT = textwrap.dedent("""
    import json, time
    t0 = time.perf_counter()
    from colombeau.testfn import make_moment_testfn, moments, multi_indices_upto
    made = [make_moment_testfn(n, q) for n, top in ((1, 6), (2, 3)) for q in range(top + 1)]
    seconds = time.perf_counter() - t0
    rows = []
    for phi in made:
        n, q = phi.n, phi.certified_order[0]
        alphas = multi_indices_upto(n, q + 1)
        rows.append({"n": n, "q": q, "alphas": alphas, "moments": moments(phi, alphas, 256).tolist()})
    print(json.dumps({"seconds": seconds, "rows": rows}))
""")


def test_criterion_01_moment_factory(criterion):
    # a fresh interpreter so no generator cache is warm
    out = subprocess.run([sys.executable, "-c", FACTORY_SCRIPT], capture_output=True, text=True, check=True)
    data = json.loads(out.stdout)
    worst_c = worst_d = 0.0
    for row in data["rows"]:
        n, q = row["n"], row["q"]
        designated = [q + 1] + [0] * (n - 1)
        for a, v in zip(row["alphas"], row["moments"]):
            if a == designated:
                worst_d = max(worst_d, abs(v - 1.0))
            else:
                worst_c = max(worst_c, abs(v - (0.0 if any(a) else 1.0)))
    orders = [(r["n"], r["q"]) for r in data["rows"]]
    want = [(1, q) for q in range(7)] + [(2, q) for q in range(4)]
    ok = orders == want and worst_c <= 1e-8 and worst_d <= 1e-6 and data["seconds"] < 10
    criterion(1, ok, f"build {data['seconds']:.2f} s; constrained err {worst_c:.1e}; designated err {worst_d:.1e}")


# -- 2 ------------------------------------------------------------------------

def test_criterion_02_scaling_laws(criterion):
    grid = EpsGrid()
    worst = 0.0
    for n, qs in ((1, range(9)), (2, range(4))):
        alphas = multi_indices_upto(n, 4)
        for q in qs:
            phi = make_moment_testfn(n, q)
            base = moments(phi, alphas, 256)
            deg = np.array([sum(a) for a in alphas])
            for e in grid.exact:
                got = moments(scale(phi, e), alphas, 256)
                want = float(e) ** deg * base
                worst = max(worst, float(np.max(np.abs(got - want) / np.maximum(1.0, np.abs(want)))))
    criterion(2, worst <= 1e-9, f"max deviation {worst:.1e} over {len(grid)} grid eps, |alpha| <= 4, n = 1, 2")


# -- 3 ------------------------------------------------------------------------

def test_criterion_03_embedding_rates(criterion):
    s = embed(SmoothFunction.from_expr("sin(x)")) - classical("sin(x)")
    g = EpsGrid(0.5, 2, 9)
    slopes, lead_ok = {}, True
    for q in range(5):
        phi = make_moment_testfn(1, q)
        err = [abs(s.evaluate(scale(phi, e), [[0.3]])[0]) for e in g.exact]
        slopes[q] = fit_order(g.values, err, window=(2.0**-2, 2.0**-7)).slope
        # Taylor remainder: the (q+1)-moment of phi_q is 1
        lead_ok &= err[5] / 2.0 ** (-7 * (q + 1)) == pytest.approx(abs(SIN_TAYLOR_LEAD[q]), rel=0.05)
    ok = all(q + 0.7 <= p <= q + 1.3 for q, p in slopes.items()) and lead_ok
    criterion(3, ok, "slopes " + ", ".join(f"q={q}: {p:.3f}" for q, p in slopes.items()))


# -- 4 ------------------------------------------------------------------------

def test_criterion_04_delta_products(criterion, battery):
    g = battery.grid
    s1, s2 = [], []
    for phi in battery.phis:
        v1 = [abs(DELTA.evaluate(scale(phi, e), [[0.0]])[0]) for e in g.exact]
        v2 = [abs((DELTA * DELTA).evaluate(scale(phi, e), [[0.0]])[0]) for e in g.exact]
        s1.append(fit_order(g.values, v1).slope)
        s2.append(fit_order(g.values, v2).slope)
    v = ge_negligible_verdict(DELTA * DELTA, KBox.from_bounds([0.0, 0.0]), 8, battery)
    w = v.witness or {}
    replay = replay_witness(DELTA * DELTA, w) if v.refuted else None
    ok = (all(abs(p + 1) <= 0.05 for p in s1) and all(abs(p + 2) <= 0.1 for p in s2)
          and v.refuted and abs(replay - w["magnitude"]) <= 1e-12 * max(1.0, w["magnitude"]))
    criterion(4, ok, f"delta slopes in [{min(s1):.4f}, {max(s1):.4f}], squared in [{min(s2):.4f}, {max(s2):.4f}]; "
                     f"negligibility {v.kind.value}, witness q={w.get('q')} eps={w.get('eps')}")


# -- 5 ------------------------------------------------------------------------

def test_criterion_05_characterization(criterion, battery):
    ev = gather_evidence(DELTA, KC, 1, battery)
    X = construct_point(ev)
    r = ge_point_eval(DELTA, X)
    pairs, worst = 0, np.inf
    for q, row in ev.rows.items():
        for e, _, _ in row.pairs:
            pairs += 1
            worst = min(worst, abs(r(scale(battery.phis[q], e))) / float(e))
    every_q = sorted(ev.rows) == list(range(battery.q_max + 1))
    zero = rho_embed(Const(0.0))
    zero_ok = all(characterization_pipeline(zero, KC, m0, battery).supported for m0 in range(1, 9))
    ok = every_q and worst >= 1.0 and zero_ok
    criterion(5, ok, f"evidence for q={sorted(ev.rows)}; min |R(X)|/eps = {worst:.3g} over {pairs} pairs; "
                     f"R = 0 supported for m0 = 1..8: {zero_ok}")


# -- 6 ------------------------------------------------------------------------

def test_criterion_06_gs_point_values(criterion):
    bump = FunctionNet.from_expr("bump(x/eps - 1)")
    fine = EpsGrid(0.5, 3, 12)
    xs = np.linspace(0.0, 1.0, 64)
    predicted_zero = mismatches = nonzero = 0
    for e in fine.values[fine.values < 1 / 6]:
        for x in xs:
            val = gs_point_eval(bump, GenPointGs.constant(x))(e)
            # support arithmetic: psi(x/eps - 1) vanishes unless eps/2 < x < 3 eps/2
            inside = e / 2 < x < 3 * e / 2
            predicted_zero += not inside
            nonzero += val != 0.0
            mismatches += (val == 0.0) == inside
    far = all(gs_point_eval(bump, GenPointGs.constant(x))(e) == 0.0
              for e in fine.values[fine.values < 1 / 6] for x in xs[xs >= 0.25])
    X = gs_witness_search(bump, KBox.from_bounds([0.0, 1.0], 4097), 1, fine)
    r = gs_point_eval(bump, X) if X is not None else None
    low = min(r(e) for e in fine.values[fine.asymptotic_slice()]) if r else 0.0
    ok = mismatches == 0 and far and low >= 0.9 * CLOSED_BUMP_MAX
    criterion(6, ok, f"{predicted_zero} predicted zeros, {nonzero} nonzero values inside the support, "
                     f"{mismatches} mismatches; witness min value {low:.6f} vs 0.9 max psi = {0.9 * CLOSED_BUMP_MAX:.6f}")


# -- 7 ------------------------------------------------------------------------

def test_criterion_07_invertibility(criterion, battery):
    phis = _all_phis(battery)
    v = strictly_nonzero_verdict(E, battery)
    inv_ok = {(E * invert_number(E))(p) for p in phis} == {1.0}
    zeros = Closed("frac(1/eps)")
    vz = strictly_nonzero_verdict(zeros, battery)
    s = zero_divisor_partner(zeros)
    kills = {(zeros * s)(p) for p in phis} == {0.0}
    vs = number_negligible_verdict(s, battery)
    R = rho_embed(E)
    vf = ge_invertible_verdict(R, [KBox.from_bounds([0.0, 1.0], 5)], battery)
    ok = (v.supported and v.max_order == 1 and inv_ok and vz.refuted and kills
          and vs.refuted and vs.witness is not None and vf.supported)
    criterion(7, ok, f"eps: {v.kind.value} q={v.max_order}, r*inv(r) == 1: {inv_ok}; frac(1/eps): {vz.kind.value}, "
                     f"r*s == 0: {kills}, s negligible: {vs.kind.value}")


# -- 8 ------------------------------------------------------------------------

def test_criterion_08_matrices(criterion, battery):
    A = MatrixGe.of([[E, 0.0], [0.0, E]])
    v = nondegenerate_verdict(A, battery)
    P = A @ adjugate_inverse(A)
    dev = max(float(np.abs(P(p) - np.eye(2)).max()) for p in _all_phis(battery))
    vb = nondegenerate_verdict(MatrixGe.of([[E, 0.0], [1.0, 0.0]]), battery)
    ok = v.supported and v.max_order == 2 and dev <= 1e-12 and vb.refuted
    criterion(8, ok, f"diag: {v.kind.value} q={v.max_order}, max |A adj(A)/det - I| = {dev:.1e}; "
                     f"singular: {vb.kind.value}")


# -- 9 ------------------------------------------------------------------------

def test_criterion_09_constants(criterion, battery):
    X = GenPointGe((Const(0.0),), KBox.from_bounds([0.0, 0.0]))
    K1 = KBox.from_bounds([-0.5, 0.5], 9)
    R = rho_embed(E)
    v = ge_constant_check(R, K1, K1, X, battery)
    spread = max(float(np.ptp(R.evaluate(p, K1.grid))) for p in _all_phis(battery))
    dom = Domain.from_bounds([[[-1.0, 1.0]]])
    ident = embed(SmoothFunction.from_expr("x", domain=dom))
    vi = ge_constant_check(ident, K1, K1, X, battery)
    d = vi.notes["derivatives"][0]
    dev = abs(d.witness["magnitude"] - 1.0) if d.refuted else np.inf
    ok = v.supported and spread == 0.0 and vi.refuted and dev <= 1e-10
    criterion(9, ok, f"rho_embed(eps): {v.kind.value}, spread {spread}; iota(id): {vi.kind.value} "
                     f"via D R with |D R - 1| = {dev:.1e}")


# -- 10 -----------------------------------------------------------------------

def _comparable(v):
    d = v.to_dict()
    for key in ("test", "battery_id"):
        d.pop(key)
    d["notes"].pop("nets", None)
    return d


def test_criterion_10_gd_consistency(criterion, short_battery):
    b = short_battery
    K = KBox.from_bounds([-0.5, 0.5], 17)
    nets = [TestObjectNet.constant(p) for p in b.phis]
    cases = {
        "delta moderate": (DELTA, "mod"),
        "delta^2 negligible": (DELTA * DELTA, "neg"),
        "zero negligible": (rho_embed(Const(0.0)), "neg"),
        "sin moderate": (embed(SmoothFunction.from_expr("sin(x)")), "mod"),
        "heaviside moderate": (embed(Heaviside()), "mod"),
    }
    equal = 0
    for R, kind in cases.values():
        if kind == "mod":
            a, c = ge_moderate_verdict(R, K, 1, b), gd_moderate_verdict(R, K, 1, nets, b.grid)
        else:
            a, c = ge_negligible_verdict(R, K, 3, b), gd_negligible_verdict(R, K, 3, nets, b.grid)
        equal += _comparable(a) == _comparable(c)
    dom = Domain.from_bounds([[[-1.0, 1.0]]])
    R = embed(SmoothFunction.from_expr("sin(x) + x**2", domain=dom)) * embed(DeltaDerivative(domain=dom))
    C = to_c(to_j(R))
    X = GdPoint.from_number([Op("mul", (Const(3.0), ScaleOf()))], KBox.from_bounds([0.0, 0.5]))
    lhs, rhs = gd_point_eval_J(to_j(R), point_to_j(X)), transport_c(gd_point_eval_C(R, X))
    rng = np.random.default_rng(2024)
    exact = guarded = 0
    while guarded < 100:
        phi = translate(scale(b.phis[int(rng.integers(9))], Fraction(1, 2 ** int(rng.integers(4, 12)))),
                        Fraction(float(rng.uniform(-0.3, 0.3))))
        x = np.array([rng.uniform(-0.5, 0.5)])
        if not R.guard(phi, x[None, :])[0]:
            continue
        guarded += 1
        exact += (C.evaluate(phi, x[None, :])[0] == R.evaluate(phi, x[None, :])[0]) and lhs(phi, x) == rhs(phi, x)
    ok = equal == len(cases) and exact == guarded
    criterion(10, ok, f"{equal}/{len(cases)} scenarios equal; {exact}/{guarded} guarded pairs exact")


# -- 11 -----------------------------------------------------------------------

def test_criterion_11_determinism_and_replay(criterion, tmp_path):
    from test_cli import ALL_KINDS

    identical = witnesses = replayed = 0
    scenarios = [load_scenario(bundled_path(n)) for n in bundled_names()] + [parse_scenario(ALL_KINDS)]
    for sc in scenarios:
        first, second = run_scenario(sc).to_json(), run_scenario(sc, parallel=True).to_json()
        identical += first == second
        path = tmp_path / f"{sc.name}.json"
        path.write_text(first)
        rep = load_report(path)
        recorded = [t for t in rep.tasks if ((t.verdict or {}).get("witness") or {}).get("magnitude") is not None]
        again = replay_report(sc, rep)
        witnesses += len(recorded)
        replayed += sum(1 for t in recorded if again.get(t.id, {}).get("matches"))
    ok = identical == len(scenarios) and replayed == witnesses > 0
    criterion(11, ok, f"{identical}/{len(scenarios)} reruns byte-identical; "
                      f"{replayed}/{witnesses} witnesses replay to 1e-12 from the saved JSON")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
