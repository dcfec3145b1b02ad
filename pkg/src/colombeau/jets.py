"""Rules smooth in x, carried together with their x-derivative rules.

A :class:`XJet` wraps ``rule(first, pts)`` where ``first`` is whatever the
rule is indexed by (an eps for nets, a test function for full-algebra
representatives) and ``pts`` is an (N, n) array.  Derivatives up to
``order`` are closed-form rules; ring operations combine them with the
product rule, so no differentiation is ever numerical.
"""

from __future__ import annotations

import itertools
from typing import Callable, Optional

import numpy as np

from .domain import as_points
from .testfn import MultiIndex, _binom, unit

RuleFor = Callable[[MultiIndex], Callable]


class DerivativeOrderExhausted(ValueError):
    pass


class XJet:
    def __init__(self, n: int, order: int, rule_for: RuleFor, label: str = "", **extra):
        self.n = n
        self.order = order
        self._rule_for = rule_for
        self.label = label
        for k, v in extra.items():
            setattr(self, k, v)

    def _extra(self) -> dict:
        return {}

    def _make(self, order: int, rule_for: RuleFor, label: str, other: Optional["XJet"] = None):
        return type(self)(self.n, order, rule_for, label, **self._merge_extra(other))

    def _merge_extra(self, other) -> dict:
        return self._extra()

    def rule_for(self, alpha: Optional[MultiIndex] = None) -> Callable:
        alpha = tuple(alpha) if alpha else (0,) * self.n
        if len(alpha) != self.n:
            raise ValueError(f"multi-index {alpha} in dimension {self.n}")
        if sum(alpha) > self.order:
            raise DerivativeOrderExhausted(
                f"derivative {alpha} requested but only order {self.order} is available for {self.label}"
            )
        return self._rule_for(alpha)

    def evaluate(self, first, pts, alpha: Optional[MultiIndex] = None) -> np.ndarray:
        return np.asarray(self.rule_for(alpha)(first, as_points(pts, self.n)))

    def __call__(self, first, pts) -> np.ndarray:
        return self.evaluate(first, pts)

    # -- ring structure ----------------------------------------------------

    def _coerce(self, other) -> "XJet":
        if isinstance(other, XJet):
            if other.n != self.n:
                raise ValueError("dimension mismatch")
            return other
        c = complex(other) if isinstance(other, complex) else float(other)
        return self._make(
            10**6,
            lambda a, c=c: (lambda first, pts: np.full(pts.shape[0], c if not any(a) else 0.0 * c)),
            repr(c),
        )

    def __add__(self, other):
        o = self._coerce(other)
        a, b = self, o
        return self._make(
            min(a.order, b.order),
            lambda al: _sum_rule(a.rule_for(al), b.rule_for(al)),
            f"({a.label} + {b.label})",
            o,
        )

    __radd__ = __add__

    def __neg__(self):
        a = self
        return self._make(a.order, lambda al: _scaled_rule(-1.0, a.rule_for(al)), f"-{a.label}")

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, XJet):
            c = complex(other) if isinstance(other, complex) else float(other)
            a = self
            return self._make(a.order, lambda al: _scaled_rule(c, a.rule_for(al)), f"{c!r}*{a.label}")
        a, b = self, self._coerce(other)

        def rule_for(al):
            terms = []
            for beta in itertools.product(*(range(k + 1) for k in al)):
                rest = tuple(x - y for x, y in zip(al, beta))
                terms.append((_binom(al, beta), a.rule_for(beta), b.rule_for(rest)))

            def rule(first, pts):
                out = 0
                for c, ra, rb in terms:
                    out = out + c * ra(first, pts) * rb(first, pts)
                return out

            return rule

        return self._make(min(a.order, b.order), rule_for, f"({a.label} * {b.label})", b)

    __rmul__ = __mul__

    def derive(self, i: int) -> "XJet":
        if self.order < 1:
            raise DerivativeOrderExhausted(f"no derivatives left on {self.label}")
        if not 0 <= i < self.n:
            raise ValueError(f"derivative index {i} out of range for n={self.n}")
        a, e = self, unit(self.n, i)
        return self._make(
            self.order - 1,
            lambda al: a.rule_for(tuple(x + y for x, y in zip(al, e))),
            f"D{i}({a.label})",
        )

    def reciprocal(self) -> "XJet":
        """1/R where R != 0 and 0 elsewhere, with quotient-rule derivatives up to order 2."""
        a = self

        def rule_for(al):
            k = sum(al)
            r0 = a.rule_for((0,) * a.n)
            if k == 0:
                return lambda first, pts: _safe_recip(r0(first, pts))
            if k == 1:
                r1 = a.rule_for(al)
                return lambda first, pts: -r1(first, pts) * _safe_recip(r0(first, pts)) ** 2
            idx = [i for i, m in enumerate(al) for _ in range(m)]
            ei, ej = unit(a.n, idx[0]), unit(a.n, idx[1])
            ri, rj, rij = a.rule_for(ei), a.rule_for(ej), a.rule_for(al)

            def rule(first, pts):
                inv = _safe_recip(r0(first, pts))
                return 2 * ri(first, pts) * rj(first, pts) * inv**3 - rij(first, pts) * inv**2

            return rule

        return self._make(min(a.order, 2), rule_for, f"1/{a.label}")


def _sum_rule(ra, rb):
    return lambda first, pts: ra(first, pts) + rb(first, pts)


def _scaled_rule(c, ra):
    return lambda first, pts: c * ra(first, pts)


def _safe_recip(v):
    v = np.asarray(v)
    out = np.zeros_like(v, dtype=np.result_type(v, float))
    nz = v != 0
    out[nz] = 1.0 / v[nz]
    return out
