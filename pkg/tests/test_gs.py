import numpy as np
import pytest

from colombeau.asymptotics import EpsGrid
from colombeau.domain import KBox
from colombeau.gs import (
    FunctionNet,
    GenPointGs,
    gs_constant_check,
    gs_moderate_verdict,
    gs_negligible_verdict,
    gs_point_eval,
    gs_witness_search,
    spread,
)
from oracle_values import CLOSED_BUMP_DMAX, CLOSED_BUMP_MAX

K = KBox.from_bounds([0.0, 1.0])
BUMP = FunctionNet.from_expr("bump(x/eps - 1)")
FINE = EpsGrid(0.5, 3, 12)
KFINE = KBox.from_bounds([0.0, 1.0], 4097)


def test_moderate_examples():
    v = gs_moderate_verdict(FunctionNet.from_expr("sin(x)/eps"), K, 0)
    assert v.supported and v.certificates["N"] == 1
    assert v.estimates[0].slope == pytest.approx(-1.0, abs=1e-9)
    assert gs_moderate_verdict(FunctionNet.from_expr("exp(1/eps)"), K).refuted


def test_bump_derivative_sup_grows_like_inverse_eps():
    # eps stays >= 2^-9 so the support (eps/2, 3eps/2) spans >= 8 K-grid steps
    v = gs_moderate_verdict(BUMP, KFINE, 1, EpsGrid(0.5, 2, 9))
    d1 = next(e for e in v.estimates if "(1,)" in e.label)
    assert d1.slope == pytest.approx(-1.0, abs=0.05)
    sup = np.abs(BUMP.evaluate(2.0**-3, KFINE.grid, (1,))).max()
    assert sup * 2.0**-3 == pytest.approx(CLOSED_BUMP_DMAX, rel=1e-3)


def test_negligible_boundary_follows_non_strict_bound():
    v = gs_negligible_verdict(FunctionNet.from_expr("eps**5*x"), K)
    assert v.refuted and v.max_order == 5 and v.witness["m"] == 6


def test_bump_net_is_zero_away_from_origin():
    v = gs_negligible_verdict(BUMP, KBox.from_bounds([0.25, 1.0]))
    assert v.supported and v.max_order == 8


def test_bump_net_not_negligible_on_unit_interval():
    v = gs_negligible_verdict(BUMP, KFINE, grid=FINE)
    assert v.refuted
    assert v.witness["x"] == pytest.approx([v.witness["eps"]], abs=1 / 4096)
    assert v.witness["magnitude"] == pytest.approx(CLOSED_BUMP_MAX, rel=1e-6)


def test_point_eval_examples():
    three = GenPointGs.constant(3.0)
    assert set(gs_point_eval(FunctionNet.from_expr("x**2"), three).sample(FINE)) == {9.0}
    at_eps = GenPointGs(lambda e: np.array([e]), 1, KBox.from_bounds([0.0, 1.0]))
    vals = gs_point_eval(BUMP, at_eps).sample(FINE)
    assert vals == pytest.approx([CLOSED_BUMP_MAX] * len(vals), rel=1e-12)
    fixed = gs_point_eval(BUMP, GenPointGs.constant(0.3))
    assert all(fixed(e) == 0.0 for e in FINE.values if e < 0.1)


def test_point_eval_needs_support_certificate():
    with pytest.raises(ValueError):
        gs_point_eval(BUMP, GenPointGs(lambda e: np.array([e])))


def test_witness_search_examples():
    X = gs_witness_search(BUMP, KFINE, 1, FINE)
    assert X is not None
    r = gs_point_eval(BUMP, X)
    for e in FINE.values[FINE.asymptotic_slice()]:
        assert X(e)[0] == pytest.approx(e, abs=1 / 4096)
        assert r(e) >= 0.9 * CLOSED_BUMP_MAX
    assert gs_witness_search(FunctionNet.from_expr("0*x"), K, 2) is None
    # eps >= eps^2 on (0, 1]: the maximizer x = 1 is returned
    W = gs_witness_search(FunctionNet.from_expr("eps*x"), K, 2)
    assert W is not None and W(2.0**-9).tolist() == [1.0]


@pytest.mark.parametrize("expr,kind,derivs", [
    ("eps**-2", "SupportedUpTo", ["SupportedUpTo"]),
    ("x", "RefutedWithWitness", ["RefutedWithWitness"]),
    ("eps**5*sin(x)", "RefutedWithWitness", ["RefutedWithWitness"]),
])
def test_constant_check_examples(expr, kind, derivs):
    v = gs_constant_check(FunctionNet.from_expr(expr), K, m_max=6)
    assert v.kind.value == kind
    assert [d.kind.value for d in v.notes["derivatives"]] == derivs


def test_fifth_power_sine_supported_up_to_four():
    v = gs_constant_check(FunctionNet.from_expr("eps**5*sin(x)"), K, m_max=4)
    assert v.supported and v.max_order == 4
    assert v.notes["derivatives"][0].supported and v.notes["spread"].supported


def test_spread_real_and_complex():
    assert spread(np.array([1.0, -2.0, 0.5]))[0] == 3.0
    z = np.exp(1j * np.linspace(0, 2 * np.pi, 41))
    s, i, j = spread(z)
    assert s == pytest.approx(2.0, abs=1e-2) and abs(z[i] - z[j]) == s
