"""The real projective line, arcs and cones on it, and the action of SL(2, R).

A point [x; y] is stored normalized to unit length with y >= 0 (and x = 1
when y = 0, which is the point at infinity).  Internally every point is
located by the angle ``alpha = atan2(x, y) mod pi``, which increases with
the slope x/y and wraps from +inf to -inf.  Arcs are oriented in the
direction of increasing ``alpha``: ``Arc(lo, hi)`` is the set swept when the
slope increases from ``lo`` to ``hi`` (passing through infinity if needed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import ConstructionError, InvalidArgumentError

if TYPE_CHECKING:
    from .mat2 import Mat2

PI = math.pi
# Endpoint identification and strictness threshold, in radians.
ANGLE_EPS = 1e-12

__all__ = [
    "ProjPoint",
    "Arc",
    "Cone",
    "INFINITY",
    "point_from_slope",
    "point_from_angle",
    "act",
    "forward_angle",
    "proj_distance",
    "arc_contains",
    "image_clearance",
    "maps_strictly_inside",
    "separating_arc",
    "padded_cone",
]


@dataclass(frozen=True, slots=True)
class ProjPoint:
    x: float
    y: float

    @classmethod
    def from_vector(cls, x: float, y: float) -> ProjPoint:
        x, y = float(x), float(y)
        n = math.hypot(x, y)
        if not n > 0.0 or not math.isfinite(n):
            raise InvalidArgumentError(f"cannot normalize homogeneous vector ({x}, {y})")
        x, y = x / n, y / n
        if y < 0.0 or (y == 0.0 and x < 0.0):
            x, y = -x, -y
        if y == 0.0:
            x = 1.0
        return cls(x, y + 0.0)

    @property
    def slope(self) -> float:
        return math.inf if self.y == 0.0 else self.x / self.y

    @property
    def angle(self) -> float:
        """Position on the circle R/(pi Z), increasing with the slope."""
        a = math.atan2(self.x, self.y)
        return a + PI if a < 0.0 else (0.0 if a >= PI else a)

    def isclose(self, other: ProjPoint, tol: float = 1e-10) -> bool:
        return abs(self.x * other.y - other.x * self.y) <= tol

    def __repr__(self) -> str:
        return f"ProjPoint(slope={self.slope!r})"


INFINITY = ProjPoint(1.0, 0.0)


def point_from_slope(t: float) -> ProjPoint:
    if isinstance(t, str):
        t = float(t)
    if math.isnan(t):
        raise InvalidArgumentError("slope is NaN")
    if math.isinf(t):
        return INFINITY
    return ProjPoint.from_vector(t, 1.0)


def point_from_angle(alpha: float) -> ProjPoint:
    return ProjPoint.from_vector(math.sin(alpha), math.cos(alpha))


def act(M: Mat2, p: ProjPoint) -> ProjPoint:
    """Projective (Mobius) action [x; y] -> M [x; y]."""
    return ProjPoint.from_vector(M.a11 * p.x + M.a12 * p.y, M.a21 * p.x + M.a22 * p.y)


def forward_angle(p: ProjPoint, q: ProjPoint) -> float:
    """Angle swept going from ``p`` to ``q`` in the increasing direction, in [0, pi)."""
    d = (q.angle - p.angle) % PI
    return 0.0 if d >= PI else d


def proj_distance(p: ProjPoint, q: ProjPoint) -> float:
    d = forward_angle(p, q)
    return min(d, PI - d)


@dataclass(frozen=True, slots=True)
class Arc:
    lo: ProjPoint
    hi: ProjPoint

    def __post_init__(self):
        L = forward_angle(self.lo, self.hi)
        if not (ANGLE_EPS < L < PI - ANGLE_EPS):
            raise InvalidArgumentError(f"arc length {L!r} is not a proper sub-arc")

    @classmethod
    def from_slopes(cls, lo: float, hi: float) -> Arc:
        return cls(point_from_slope(lo), point_from_slope(hi))

    @classmethod
    def from_angles(cls, lo: float, hi: float) -> Arc:
        return cls(point_from_angle(lo), point_from_angle(hi))

    @property
    def length(self) -> float:
        return forward_angle(self.lo, self.hi)

    def midpoint(self) -> ProjPoint:
        return point_from_angle(self.lo.angle + 0.5 * self.length)

    def offset(self, p: ProjPoint) -> float:
        """Signed angular offset of ``p`` from ``lo``, in [-(pi - L)/2, (pi + L)/2)."""
        L = self.length
        d = forward_angle(self.lo, p)
        return d - PI if d >= 0.5 * (PI + L) else d


@dataclass(frozen=True)
class Cone:
    arcs: tuple[Arc, ...]

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple(self.arcs))
        if not self.arcs:
            raise InvalidArgumentError("a cone needs at least one arc")
        if sum(a.length for a in self.arcs) >= PI - ANGLE_EPS:
            raise InvalidArgumentError("cone closure must be a proper subset of the projective line")
        for i, a in enumerate(self.arcs):
            for b in self.arcs[i + 1:]:
                if _arcs_meet(a, b):
                    raise InvalidArgumentError("cone arcs must be pairwise disjoint")

    @classmethod
    def single(cls, arc: Arc) -> Cone:
        return cls((arc,))

    @property
    def is_principal(self) -> bool:
        return len(self.arcs) == 1

    def contains(self, p: ProjPoint, strict: bool = True) -> bool:
        return any(arc_contains(a, p, strict) for a in self.arcs)


def _arcs_meet(a: Arc, b: Arc) -> bool:
    return (
        arc_contains(a, b.lo, strict=False)
        or arc_contains(a, b.hi, strict=False)
        or arc_contains(b, a.lo, strict=False)
    )


def arc_contains(a: Arc, p: ProjPoint, strict: bool = False) -> bool:
    L = a.length
    d = forward_angle(a.lo, p)
    if strict:
        return ANGLE_EPS < d < L - ANGLE_EPS
    return d <= L + ANGLE_EPS or d >= PI - ANGLE_EPS


def _image_arc(M: Mat2, a: Arc) -> tuple[ProjPoint, float]:
    lo, hi = act(M, a.lo), act(M, a.hi)
    L = forward_angle(lo, hi)
    det = M.det
    scale = M.a11**2 + M.a12**2 + M.a21**2 + M.a22**2
    if abs(det) > 1e-9 * scale:
        reverse = det < 0
    else:
        # numerically rank one: the true image is a sliver narrower than the
        # rounding error in the endpoints, so take the short way round
        reverse = L > PI / 2
    if reverse:
        # image runs hi -> lo
        lo, L = hi, PI - L
    return lo, L


def image_clearance(M: Mat2, c: Cone) -> float:
    """Smallest angular clearance between M(closure of c) and the boundary of c.

    Positive iff every arc is mapped strictly inside some arc of ``c``;
    negative values measure how far an image sticks out.
    """
    worst = math.inf
    for a in c.arcs:
        lo, L = _image_arc(M, a)
        best = -math.inf
        for b in c.arcs:
            d = b.offset(lo)
            best = max(best, min(d, b.length - d - L))
        worst = min(worst, best)
    return worst


def maps_strictly_inside(M: Mat2, c: Cone, margin: float = 0.0) -> bool:
    cl = image_clearance(M, c)
    return cl > ANGLE_EPS and cl >= margin


# --------------------------------------------------------------------------
# Arc construction from point clouds
# --------------------------------------------------------------------------

def _angles(points: Iterable) -> np.ndarray:
    return np.array([p.angle if isinstance(p, ProjPoint) else float(p) for p in points], dtype=float)


def separating_arc(inside: Sequence, outside: Sequence) -> tuple[float, float, float, float]:
    """Smallest closed arc containing every ``inside`` point and no ``outside`` point.

    Points are ProjPoints or raw angles. Returns ``(lo, span, gap_before,
    gap_after)`` in radians, where the gaps are the free angular room to the
    nearest outside point on each side.  Raises ConstructionError when the
    inside points are interleaved with outside points.
    """
    u = np.sort(_angles(inside) % PI)
    s = _angles(outside) % PI
    if u.size == 0:
        raise InvalidArgumentError("no inside points")
    # gaps[i] runs from u[i] to u[i + 1] (the last one wraps around to u[0])
    gaps = np.append(np.diff(u), u[0] + PI - u[-1])
    n = u.size
    if s.size == 0:
        g = int(np.argmax(gaps))
    else:
        # the complement of the arc is one gap between consecutive inside
        # points, and it must hold every outside point
        g_of_s = (np.searchsorted(u, s, side="right") - 1) % n
        g = int(g_of_s[0])
        if not (g_of_s == g).all():
            raise ConstructionError("inside and outside points interleave; no separating arc")
    hi = float(u[g])
    lo = float(u[(g + 1) % n])
    span = PI - float(gaps[g])
    if s.size:
        gap_after = (s - hi) % PI
        gap_before = (lo - s) % PI
        if (gap_after <= ANGLE_EPS).any() or (gap_before <= ANGLE_EPS).any():
            raise ConstructionError("an outside point touches the arc")
        return lo, span, float(gap_before.min()), float(gap_after.min())
    half = 0.5 * (PI - span)
    return lo, span, half, half


def padded_cone(inside: Sequence, outside: Sequence, frac: float = 0.5) -> Cone:
    """Single-arc cone around ``inside``, padded toward the nearest ``outside`` point.

    Each endpoint moves outward by ``frac`` of its free room.
    """
    if not 0.0 < frac < 1.0:
        raise InvalidArgumentError("padding fraction must lie in (0, 1)")
    lo, span, before, after = separating_arc(inside, outside)
    return Cone.single(Arc.from_angles(lo - frac * before, lo + span + frac * after))
