"""Open domains as finite unions of axis-aligned boxes, and compact boxes K."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


def as_points(y, n: int) -> np.ndarray:
    """Coerce ``y`` to a float array of shape (N, n)."""
    a = np.asarray(y, dtype=float)
    if a.ndim == 0:
        if n != 1:
            raise ValueError(f"scalar point given in dimension {n}")
        return a.reshape(1, 1)
    if a.ndim == 1:
        if n == 1:
            return a.reshape(-1, 1)
        if a.shape[0] == n:
            return a.reshape(1, n)
        raise ValueError(f"point of length {a.shape[0]} given in dimension {n}")
    if a.shape[-1] != n:
        raise ValueError(f"points have trailing dimension {a.shape[-1]}, expected {n}")
    return a.reshape(-1, n)


@dataclass(frozen=True)
class Box:
    """Open box prod_i (lo_i, hi_i); bounds may be infinite."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("box bounds have mismatched dimensions")
        if any(not a < b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"empty box {self.lo} .. {self.hi}")

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> np.ndarray:
        lo, hi = np.array(self.lo), np.array(self.hi)
        c = 0.5 * (lo + hi)
        # half-infinite or infinite axes: pick a finite representative
        c = np.where(np.isfinite(lo) & ~np.isfinite(hi), lo + 1.0, c)
        c = np.where(~np.isfinite(lo) & np.isfinite(hi), hi - 1.0, c)
        c = np.where(~np.isfinite(lo) & ~np.isfinite(hi), 0.0, c)
        return c

    def margin(self, pts: np.ndarray) -> np.ndarray:
        """Distance from each point to the box complement (<= 0 if outside)."""
        lo, hi = np.array(self.lo), np.array(self.hi)
        with np.errstate(invalid="ignore"):
            d = np.minimum(pts - lo, hi - pts)
        return d.min(axis=1)

    def overlap(self, other: "Box") -> Optional["Box"]:
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if all(a < b for a, b in zip(lo, hi)):
            return Box(lo, hi)
        return None

    def contains_closed_box(self, k: "KBox") -> bool:
        return all(a < l and h < b for a, l, h, b in zip(self.lo, k.lo, k.hi, self.hi))


@dataclass(frozen=True)
class Domain:
    """Omega as a finite union of open boxes."""

    boxes: tuple[Box, ...]

    def __post_init__(self):
        if not self.boxes:
            raise ValueError("a domain needs at least one box")
        if len({b.n for b in self.boxes}) != 1:
            raise ValueError("domain boxes have mixed dimensions")

    @classmethod
    def whole_space(cls, n: int) -> "Domain":
        return cls((Box((-np.inf,) * n, (np.inf,) * n),))

    @classmethod
    def from_bounds(cls, bounds: Sequence) -> "Domain":
        """``bounds`` is a list of boxes, each a list of per-axis [lo, hi] pairs."""
        boxes = []
        for b in bounds:
            b = [tuple(float(v) for v in ax) for ax in b]
            boxes.append(Box(tuple(a for a, _ in b), tuple(h for _, h in b)))
        return cls(tuple(boxes))

    @property
    def n(self) -> int:
        return self.boxes[0].n

    def margin(self, pts) -> np.ndarray:
        """Box-wise lower bound on dist(x, complement of Omega)."""
        pts = as_points(pts, self.n)
        return np.max([b.margin(pts) for b in self.boxes], axis=0)

    def contains(self, pts) -> np.ndarray:
        return self.margin(pts) > 0

    def ball_inside(self, centers, radius: float) -> np.ndarray:
        """Whether the closed ball of ``radius`` around each center lies in one box."""
        return self.margin(centers) > radius

    def box_graph(self) -> dict[int, list[int]]:
        g = {i: [] for i in range(len(self.boxes))}
        for i, j in itertools.combinations(range(len(self.boxes)), 2):
            if self.boxes[i].overlap(self.boxes[j]) is not None:
                g[i].append(j)
                g[j].append(i)
        return g

    @property
    def connected(self) -> bool:
        g = self.box_graph()
        seen, todo = {0}, deque([0])
        while todo:
            for j in g[todo.popleft()]:
                if j not in seen:
                    seen.add(j)
                    todo.append(j)
        return len(seen) == len(self.boxes)

    def box_path(self, i: int, j: int) -> list[int]:
        """Shortest chain of pairwise-overlapping boxes from box i to box j."""
        g = self.box_graph()
        prev = {i: None}
        todo = deque([i])
        while todo:
            a = todo.popleft()
            if a == j:
                break
            for b in g[a]:
                if b not in prev:
                    prev[b] = a
                    todo.append(b)
        if j not in prev:
            raise ValueError(f"boxes {i} and {j} are not connected")
        path = [j]
        while prev[path[-1]] is not None:
            path.append(prev[path[-1]])
        return path[::-1]

    def containing_box(self, k: "KBox") -> int:
        for i, b in enumerate(self.boxes):
            if b.contains_closed_box(k):
                return i
        raise ValueError(f"compact box {k.lo}..{k.hi} is not contained in a single domain box")

    def to_dict(self) -> dict:
        """Infinite bounds become the strings "-inf" / "inf" so the record is strict JSON."""
        def f(v):
            return v if np.isfinite(v) else ("inf" if v > 0 else "-inf")

        return {"n": self.n, "boxes": [[[f(a), f(h)] for a, h in zip(b.lo, b.hi)] for b in self.boxes]}


@dataclass(frozen=True)
class KBox:
    """Closed box K with a uniform sample grid of ``points`` per axis."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    points: int = 129
    _grid: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"invalid compact box {self.lo}..{self.hi}")
        if self.points < 1:
            raise ValueError("a K-grid needs at least one point per axis")
        axes = [
            np.array([a]) if a == b else np.linspace(a, b, self.points)
            for a, b in zip(self.lo, self.hi)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        object.__setattr__(self, "_grid", np.stack([m.ravel() for m in mesh], axis=1))

    @classmethod
    def from_bounds(cls, bounds, points: int = 129) -> "KBox":
        if np.ndim(bounds) == 1:
            bounds = [bounds]
        return cls(tuple(float(a) for a, _ in bounds), tuple(float(b) for _, b in bounds), points)

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def grid(self) -> np.ndarray:
        return self._grid

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.array(self.lo) + np.array(self.hi))

    @property
    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=float)

    @property
    def diam(self) -> float:
        return float(np.linalg.norm(np.array(self.hi) - np.array(self.lo)))

    def contains(self, pts, tol: float = 0.0) -> np.ndarray:
        pts = as_points(pts, self.n)
        return np.all((pts >= np.array(self.lo) - tol) & (pts <= np.array(self.hi) + tol), axis=1)

    def check_inside(self, omega: Domain) -> None:
        if not np.all(omega.contains(self.grid)) or not np.all(omega.contains(self.corners)):
            raise ValueError(f"K-grid {self.lo}..{self.hi} is not contained in the domain")

    def to_dict(self) -> dict:
        return {"bounds": [list(ax) for ax in zip(self.lo, self.hi)], "points": self.points}
