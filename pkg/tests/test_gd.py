from fractions import Fraction

import numpy as np
import pytest

from colombeau.distributions import DeltaDerivative, Heaviside, SmoothFunction
from colombeau.domain import Domain, KBox
from colombeau.gd import (
    GdPoint,
    JFunc,
    TestObjectNet,
    constancy_check,
    gd_moderate_verdict,
    gd_negligible_verdict,
    gd_point_eval_C,
    gd_point_eval_J,
    point_to_j,
    sample_point_eval,
    to_c,
    to_j,
    transport_c,
)
from colombeau.ge import embed, ge_moderate_verdict, ge_negligible_verdict, rho_embed
from colombeau.numbers import Const, Op, ScaleOf
from colombeau.testfn import make_moment_testfn, scale, translate

DELTA = embed(DeltaDerivative())
K = KBox.from_bounds([-0.5, 0.5], 17)


def comparable(v):
    d = v.to_dict()
    for key in ("test", "battery_id"):
        d.pop(key)
    d["notes"].pop("nets", None)
    return d


def constant_nets(b):
    return [TestObjectNet.constant(p) for p in b.phis]


@pytest.mark.parametrize("case", ["delta_mod", "delta_sq_neg", "zero_neg", "sin_mod", "heaviside_mod"])
def test_constant_nets_reproduce_ge(case, short_battery):
    b = short_battery
    R = {
        "delta_mod": DELTA, "delta_sq_neg": DELTA * DELTA, "zero_neg": rho_embed(Const(0.0)),
        "sin_mod": embed(SmoothFunction.from_expr("sin(x)")), "heaviside_mod": embed(Heaviside()),
    }[case]
    if case.endswith("mod"):
        a, c = ge_moderate_verdict(R, K, 1, b), gd_moderate_verdict(R, K, 1, constant_nets(b), b.grid)
    else:
        a, c = ge_negligible_verdict(R, K, 3, b), gd_negligible_verdict(R, K, 3, constant_nets(b), b.grid)
    assert comparable(a) == comparable(c)


def test_modulated_nets_keep_delta_slope(short_battery):
    nets = [TestObjectNet.modulated(p) for p in short_battery.phis]
    v = gd_moderate_verdict(DELTA, K, 0, nets, short_battery.grid)
    assert v.supported
    assert all(e.slope == pytest.approx(-1.0, abs=0.05) for e in v.estimates)
    assert all(c["valid"] for c in v.notes["nets"])


def test_zero_is_negligible_for_any_net(short_battery):
    nets = [TestObjectNet.modulated(p, 0.5) for p in short_battery.phis]
    v = gd_negligible_verdict(rho_embed(Const(0.0)), K, 8, nets, short_battery.grid)
    assert v.supported and v.max_order == 8


def test_modulation_bounds_checked():
    with pytest.raises(ValueError):
        TestObjectNet.modulated(make_moment_testfn(1, 1), 1.5)


def test_translation_of_delta_reads_tags():
    J = to_j(DELTA)
    phi = scale(make_moment_testfn(1, 2), Fraction(1, 8))
    for x in (0.0, 0.03, -0.05):
        # (T*R)(phi, x) = <delta, T_x T_{-x} phi> = phi(0)
        assert J(phi, [x]) == phi([[0.0]])[0]
    R = embed(SmoothFunction.from_expr("cos(x)"))
    assert to_j(R)(phi, [0.0]) == R.evaluate(phi, [[0.0]])[0]


def _pairs(rng, b, count):
    for _ in range(count):
        phi = translate(scale(b.phis[int(rng.integers(9))], Fraction(1, 2 ** int(rng.integers(4, 12)))),
                        Fraction(float(rng.uniform(-0.3, 0.3))))
        yield phi, np.array([rng.uniform(-0.5, 0.5)])


def test_round_trip_and_point_evaluation_identity(short_battery):
    dom = Domain.from_bounds([[[-1.0, 1.0]]])
    R = embed(SmoothFunction.from_expr("sin(x) + x**2", domain=dom)) * embed(DeltaDerivative(domain=dom))
    J, C = to_j(R), to_c(to_j(R))
    X = GdPoint.from_number([Op("mul", (Const(3.0), ScaleOf()))], KBox.from_bounds([0.0, 0.5]))
    lhs, rhs = gd_point_eval_J(J, point_to_j(X)), transport_c(gd_point_eval_C(R, X))
    rng = np.random.default_rng(0)
    for phi, x in _pairs(rng, short_battery, 20):
        assert C.evaluate(phi, x[None, :])[0] == R.evaluate(phi, x[None, :])[0]
        assert lhs(phi, x) == rhs(phi, x)


def test_constant_point_reduces_c_formula():
    X = GdPoint.constant([0.2])
    R = embed(SmoothFunction.from_expr("exp(x)"))
    phi = scale(make_moment_testfn(1, 1), Fraction(1, 32))
    assert gd_point_eval_C(R, X)(phi, [0.7]) == R.evaluate(phi, [[0.2]])[0]


def test_j_formula_offset_is_point_minus_x():
    X = GdPoint.constant([0.2])
    seen = []
    J = JFunc(lambda phi, x: seen.append((phi.shift, x.tolist())) or 0.0, 1, Domain.whole_space(1))
    phi = make_moment_testfn(1, 0)
    gd_point_eval_J(J, X)(phi, [0.5])
    assert seen == [((Fraction(0.2) - Fraction(0.5),), [0.2])]


def test_guard_skip_rate_warning():
    dom = Domain.from_bounds([[[-0.1, 0.1]]])
    R = embed(SmoothFunction.from_expr("x", domain=dom))
    rule = gd_point_eval_C(R, GdPoint.constant([0.0]))
    wide = [(make_moment_testfn(1, q), [0.0]) for q in range(4)]
    s = sample_point_eval(rule, wide)
    assert s.skipped == 4 and s.warning is not None and s.warning.kind.value == "Inconclusive"


def test_constancy_check_examples():
    samples = [(make_moment_testfn(1, 1), [0.0, 0.3, -0.2])]
    assert constancy_check(GdPoint.from_number([Op("mul", (ScaleOf(), Const(2.0)))], KBox.from_bounds([0, 2])),
                           samples) == (True, None)
    ok, w = constancy_check(GdPoint(lambda phi, x: x, KBox.from_bounds([-1, 1])), samples)
    assert not ok and w["X(x)"] != w["X(y)"]
    assert constancy_check(GdPoint.constant([0.4]), samples)[0]


def test_single_net_moderateness_searches_past_its_order(short_battery):
    net = TestObjectNet.modulated(short_battery.phis[1])
    v = gd_moderate_verdict(DELTA, K, 0, [net], short_battery.grid)
    # sup |phi_1| / eps times the modulation stays below eps^-2 on the asymptotic half
    assert v.supported and v.certificates["N"] == 2
