"""Epsilon grids, C=1 Landau bounds and log-log order estimation.

Every asymptotic condition in this package ("|f(eps)| = O(eps^p)") is
sampled on a geometric grid of eps values.  A finite grid can refute a
bound or support it, never prove it; :class:`Verdict` records which.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional, Sequence

import numpy as np


class InsufficientData(ValueError):
    """Fewer than four usable samples in a fit window."""


class ZeroOnWindow(InsufficientData):
    """All sampled magnitudes in the window are exactly zero."""


@dataclass(frozen=True)
class EpsGrid:
    """eps_i = base**i for start_exp <= i <= end_exp, decreasing toward 0."""

    base: float = 0.5
    start_exp: int = 4
    end_exp: int = 36

    def __post_init__(self):
        if not 0.0 < self.base < 1.0:
            raise ValueError(f"grid base must lie in (0, 1), got {self.base}")
        if self.start_exp < 1 or self.end_exp < self.start_exp:
            raise ValueError("grid exponents must satisfy 1 <= start_exp <= end_exp")
        if self.end_exp - self.start_exp + 1 < 8:
            raise ValueError("an eps grid needs at least 8 points")

    @property
    def exponents(self) -> range:
        return range(self.start_exp, self.end_exp + 1)

    @property
    def exact(self) -> list[Fraction]:
        """Grid values as exact fractions (used as scaling tags)."""
        b = Fraction(self.base)
        return [b**i for i in self.exponents]

    @property
    def values(self) -> np.ndarray:
        return np.array([float(e) for e in self.exact])

    def __len__(self) -> int:
        return self.end_exp - self.start_exp + 1

    def asymptotic_slice(self) -> slice:
        """The smallest half of the grid (the default fit window)."""
        return slice(len(self) // 2, len(self))

    def asymptotic_cutoff(self) -> float:
        """A cutoff selecting exactly the asymptotic half for landau_check."""
        vals = self.values
        k = len(self) // 2
        # midpoint between the last excluded value and the first included one
        return float(0.5 * (vals[k - 1] + vals[k]))

    def to_dict(self) -> dict:
        return {"base": self.base, "start_exp": self.start_exp, "end_exp": self.end_exp}


@dataclass(frozen=True)
class OrderEstimate:
    """Least-squares fit of log|f| = intercept + slope * log(eps)."""

    slope: float
    intercept: float
    residual: float
    window: tuple[float, float]
    n_points: int
    n_zero: int = 0
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "window_hi": self.window[0],
            "window_lo": self.window[1],
            "n_points": self.n_points,
            "n_zero": self.n_zero,
        }


def fit_order(
    eps: Sequence[float],
    magnitudes: Sequence[float],
    window: Optional[tuple[float, float]] = None,
    label: str = "",
) -> OrderEstimate:
    """Estimate p in |f(eps)| ~ c * eps**p by a log-log least-squares line.

    ``window`` is an inclusive (eps_hi, eps_lo) range; by default the
    smallest half of the samples.  Zero magnitudes are excluded from the
    regression and counted in ``n_zero``.
    """
    e = np.asarray(eps, dtype=float)
    m = np.abs(np.asarray(magnitudes))
    if e.shape != m.shape:
        raise ValueError("eps and magnitudes must have the same length")
    if window is None:
        order = np.argsort(-e)
        sel = np.zeros(e.shape, dtype=bool)
        sel[order[len(e) // 2 :]] = True
    else:
        hi, lo = max(window), min(window)
        sel = (e <= hi) & (e >= lo)
    e, m = e[sel], m[sel]
    if e.size == 0:
        raise InsufficientData("no samples inside the fit window")
    zero = m == 0.0
    if zero.all():
        raise ZeroOnWindow("identically zero on window")
    keep = ~zero
    if keep.sum() < 4:
        raise InsufficientData(f"only {int(keep.sum())} usable samples in window (need 4)")
    x = np.log(e[keep])
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        y = np.log(m[keep])
    if not np.all(np.isfinite(y)):
        return OrderEstimate(
            slope=-math.inf, intercept=math.nan, residual=math.inf,
            window=(float(e.max()), float(e.min())), n_points=int(keep.sum()),
            n_zero=int(zero.sum()), label=label,
        )
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.max(np.abs(y - (intercept + slope * x))))
    return OrderEstimate(
        slope=float(slope),
        intercept=float(intercept),
        residual=residual,
        window=(float(e.max()), float(e.min())),
        n_points=int(keep.sum()),
        n_zero=int(zero.sum()),
        label=label,
    )


def landau_violations(eps, magnitudes, p: float, cutoff: float) -> np.ndarray:
    """Indices i with eps_i < cutoff and |f(eps_i)| > eps_i**p."""
    e = np.asarray(eps, dtype=float)
    m = np.abs(np.asarray(magnitudes))
    active = e < cutoff
    if not active.any():
        raise ValueError(
            f"cutoff {cutoff} leaves no grid point below it (smallest eps {e.min()})"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        bound = e**p
        bad = active & ~(m <= bound)
    return np.flatnonzero(bad)


def landau_check(eps, magnitudes, p: float, cutoff: float) -> bool:
    """True iff |f(eps_i)| <= eps_i**p at every grid point below ``cutoff``.

    This is the O(eps^p) bound with the constant fixed to 1.  The comparison
    is non-strict, and NaN magnitudes count as violations.
    """
    return landau_violations(eps, magnitudes, p, cutoff).size == 0


class VerdictKind(str, enum.Enum):
    REFUTED = "RefutedWithWitness"
    SUPPORTED = "SupportedUpTo"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class Verdict:
    """Empirical outcome of an asymptotic test.

    ``witness`` (refutations) holds everything needed to replay the
    violating magnitude; ``max_order`` is the highest order that passed;
    ``certificates`` holds test-specific data such as the N of a
    moderateness bound or the (m, q) pairs of a negligibility sweep.
    """

    kind: VerdictKind
    test: str
    max_order: Optional[int] = None
    witness: Optional[dict] = None
    reason: str = ""
    battery_id: str = ""
    certificates: dict = field(default_factory=dict)
    estimates: list[OrderEstimate] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def supported(self) -> bool:
        return self.kind is VerdictKind.SUPPORTED

    @property
    def refuted(self) -> bool:
        return self.kind is VerdictKind.REFUTED

    @classmethod
    def refute(cls, test: str, witness: dict, **kw) -> "Verdict":
        return cls(VerdictKind.REFUTED, test, witness=witness, **kw)

    @classmethod
    def support(cls, test: str, max_order: Optional[int], **kw) -> "Verdict":
        return cls(VerdictKind.SUPPORTED, test, max_order=max_order, **kw)

    @classmethod
    def inconclusive(cls, test: str, reason: str, **kw) -> "Verdict":
        return cls(VerdictKind.INCONCLUSIVE, test, reason=reason, **kw)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "test": self.test,
            "max_order": self.max_order,
            "witness": _jsonable(self.witness),
            "reason": self.reason,
            "battery_id": self.battery_id,
            "certificates": _jsonable(self.certificates),
            "estimates": [est.to_dict() for est in self.estimates],
            "notes": _jsonable(self.notes),
        }


def _jsonable(obj):
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return obj
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Verdict):
        return obj.to_dict()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    return repr(obj)
