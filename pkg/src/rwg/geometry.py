"""Polygonal boundaries of the computational domains.

Every domain is built from the strip ``|y| < l/2`` and the double cone
``K = {|phi| < omega/2} U {|phi - pi| < omega/2}`` whose vertex is smoothed by
a disk of radius ``r0``.  The narrow profile ``Omega = K U disk(0, r0)`` is
contracted by ``epsilon`` and placed at the two narrow centres ``x = 0`` and
``x = d``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class GeometryError(ValueError):
    """Raised when a geometry cannot be constructed."""


class Tag(enum.IntEnum):
    DIRICHLET = 1
    GAMMA_1 = 2
    GAMMA_2 = 3


@dataclass(frozen=True)
class WaveguideGeometry:
    """Strip of width ``l`` with two narrows of scale ``epsilon``.

    ``omega`` is the full opening of each cone sector, ``d`` the distance
    between the narrow centres and ``r0`` the radius of the disk that
    smooths the cone vertex in the unscaled narrow profile.
    """

    l: float = 1.0
    omega: float = math.pi / 2
    d: float = 2.0
    r0: float = 0.5
    epsilon: float = 0.3

    def __post_init__(self):
        self.validate()

    @property
    def corner_exponent(self) -> float:
        return math.pi / self.omega

    @property
    def ray_run(self) -> float:
        """Horizontal distance from a cone vertex to where its ray meets the wall."""
        return 0.5 * self.l / math.tan(0.5 * self.omega)

    @property
    def narrow_width(self) -> float:
        return 2.0 * self.epsilon * self.r0

    def with_epsilon(self, epsilon: float) -> "WaveguideGeometry":
        return WaveguideGeometry(self.l, self.omega, self.d, self.r0, epsilon)

    def validate(self):
        if not self.l > 0:
            raise GeometryError(f"strip width l must be positive, got {self.l}")
        if not 0 < self.omega < math.pi:
            raise GeometryError(f"omega must lie in (0, pi), got {self.omega}")
        if not self.d > 0:
            raise GeometryError(f"d must be positive, got {self.d}")
        if not self.r0 > 0:
            raise GeometryError(f"r0 must be positive, got {self.r0}")
        if not self.epsilon > 0:
            raise GeometryError(f"epsilon must be positive, got {self.epsilon}")
        if not self.epsilon * self.r0 < self.l / 4:
            raise GeometryError(
                f"narrow radius epsilon*r0={self.epsilon * self.r0:g} must stay below l/4={self.l / 4:g}"
            )
        # the cone sides meet at height tan(omega/2)*d/2 which must clear the wall
        crossing = math.tan(0.5 * self.omega) * 0.5 * self.d
        if not crossing > 0.5 * self.l * (1 + 1e-9):
            raise GeometryError(
                f"cone sides of the two narrows cross inside the strip (at y={crossing:g} <= l/2); increase d"
            )


@dataclass
class PolygonalBoundary:
    """Closed, positively oriented polygon with tagged segments."""

    vertices: np.ndarray
    segments: np.ndarray
    tags: np.ndarray
    corner_markers: list[int] = field(default_factory=list)
    # vertex indices that belong to polygonised arcs (not true corners)
    arc_vertices: frozenset[int] = frozenset()

    def signed_area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    def is_simple(self) -> bool:
        return not _has_self_intersection(self.vertices, self.segments)

    def contains(self, points) -> np.ndarray:
        """Even-odd point-in-polygon test."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        v = self.vertices
        a, b = v[self.segments[:, 0]], v[self.segments[:, 1]]
        inside = np.zeros(len(pts), dtype=bool)
        for p0, p1 in zip(a, b):
            cond = (p0[1] > pts[:, 1]) != (p1[1] > pts[:, 1])
            with np.errstate(divide="ignore", invalid="ignore"):
                xcross = p0[0] + (pts[:, 1] - p0[1]) * (p1[0] - p0[0]) / (p1[1] - p0[1])
            inside ^= cond & (pts[:, 0] < xcross)
        return inside

    def segments_with(self, tag: Tag) -> np.ndarray:
        return self.segments[self.tags == tag]

    def interior_angles(self) -> np.ndarray:
        v = self.vertices
        prev = np.roll(v, 1, axis=0)
        nxt = np.roll(v, -1, axis=0)
        a_in = np.arctan2(v[:, 1] - prev[:, 1], v[:, 0] - prev[:, 0])
        a_out = np.arctan2(nxt[:, 1] - v[:, 1], nxt[:, 0] - v[:, 0])
        turn = (a_out - a_in + np.pi) % (2 * np.pi) - np.pi
        return np.pi - turn

    def singular_corners(self) -> list[int]:
        """Vertices whose interior angle produces a non-smooth solution."""
        out = []
        for i, theta in enumerate(self.interior_angles()):
            if i in self.arc_vertices or abs(theta - np.pi) < 1e-9:
                continue
            ratio = np.pi / theta
            if abs(ratio - round(ratio)) > 1e-6:
                out.append(i)
        return out


class _PolyBuilder:
    def __init__(self):
        self.points: list[tuple[float, float]] = []
        self.tags: list[Tag] = []
        self.arc: set[int] = set()

    def add(self, p, tag_to_next: Tag, on_arc: bool = False) -> int:
        self.points.append((float(p[0]), float(p[1])))
        self.tags.append(tag_to_next)
        if on_arc:
            self.arc.add(len(self.points) - 1)
        return len(self.points) - 1

    def add_arc(self, center, radius, t0, t1, tag: Tag, n: int):
        """Arc points strictly between angles t0 and t1 (endpoints excluded)."""
        for t in np.linspace(t0, t1, n + 1)[1:-1]:
            self.add((center[0] + radius * math.cos(t), center[1] + radius * math.sin(t)), tag, on_arc=True)

    def build(self, corner_markers) -> PolygonalBoundary:
        v = np.array(self.points)
        n = len(v)
        seg = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
        b = PolygonalBoundary(v, seg, np.array([int(t) for t in self.tags]), list(corner_markers),
                              frozenset(self.arc))
        if b.signed_area() <= 0:
            raise GeometryError("constructed polygon is not positively oriented")
        if not b.is_simple():
            raise GeometryError("constructed polygon self-intersects")
        return b


def arc_segments(radius: float, angle: float, h_max: float, rel_tol: float = 1e-5) -> int:
    """Number of chords for an arc so that the sagitta stays below tolerance."""
    tol = min(h_max / 10.0, rel_tol * radius)
    dtheta = 2.0 * math.acos(max(1.0 - tol / radius, -1.0))
    n_len = math.ceil(radius * angle / h_max)
    n = max(2, math.ceil(angle / dtheta), n_len)
    # even count puts a vertex on the symmetry axis of the arc
    return n + (n % 2)


def _narrow_lower(pb: _PolyBuilder, cx: float, geom: WaveguideGeometry, h_max: float):
    """Bottom half of a narrow at centre cx: wall->ray->arc->ray (left to right)."""
    half = 0.5 * geom.omega
    rho = geom.epsilon * geom.r0
    a = geom.ray_run
    c = (cx, 0.0)
    pb.add((cx - a, -0.5 * geom.l), Tag.DIRICHLET)
    pb.add((cx + rho * math.cos(math.pi + half), rho * math.sin(math.pi + half)), Tag.DIRICHLET)
    n = arc_segments(rho, math.pi - geom.omega, h_max)
    pb.add_arc(c, rho, math.pi + half, 2 * math.pi - half, Tag.DIRICHLET, n)
    pb.add((cx + rho * math.cos(-half), rho * math.sin(-half)), Tag.DIRICHLET)
    pb.add((cx + a, -0.5 * geom.l), Tag.DIRICHLET)


def _narrow_upper(pb: _PolyBuilder, cx: float, geom: WaveguideGeometry, h_max: float):
    """Top half of a narrow at centre cx, traversed right to left."""
    half = 0.5 * geom.omega
    rho = geom.epsilon * geom.r0
    a = geom.ray_run
    c = (cx, 0.0)
    pb.add((cx + a, 0.5 * geom.l), Tag.DIRICHLET)
    pb.add((cx + rho * math.cos(half), rho * math.sin(half)), Tag.DIRICHLET)
    n = arc_segments(rho, math.pi - geom.omega, h_max)
    pb.add_arc(c, rho, half, math.pi - half, Tag.DIRICHLET, n)
    pb.add((cx + rho * math.cos(math.pi - half), rho * math.sin(math.pi - half)), Tag.DIRICHLET)
    pb.add((cx - a, 0.5 * geom.l), Tag.DIRICHLET)


def build_waveguide(geom: WaveguideGeometry, R_trunc: float, h_max: float = 0.05) -> PolygonalBoundary:
    """Boundary of the truncated waveguide ``G(eps) n {-R < x < d + R}``.

    The left end ``x = -R`` is tagged GAMMA_1, the right end ``x = d + R``
    GAMMA_2.  ``h_max`` only controls how finely the narrow arcs are
    polygonised.
    """
    geom.validate()
    if not R_trunc > geom.ray_run:
        raise GeometryError(f"R_trunc={R_trunc:g} must exceed the cone run {geom.ray_run:g}")
    half_l = 0.5 * geom.l
    pb = _PolyBuilder()
    pb.add((-R_trunc, -half_l), Tag.DIRICHLET)
    _narrow_lower(pb, 0.0, geom, h_max)
    _narrow_lower(pb, geom.d, geom, h_max)
    pb.add((geom.d + R_trunc, -half_l), Tag.GAMMA_2)
    pb.add((geom.d + R_trunc, half_l), Tag.DIRICHLET)
    _narrow_upper(pb, geom.d, geom, h_max)
    _narrow_upper(pb, 0.0, geom, h_max)
    pb.add((-R_trunc, half_l), Tag.GAMMA_1)
    return pb.build(corner_markers=[])


def build_resonator(geom: WaveguideGeometry) -> PolygonalBoundary:
    """Boundary of the bounded limit component between the two cone vertices."""
    geom.validate()
    a = geom.ray_run
    half_l = 0.5 * geom.l
    d = geom.d
    pb = _PolyBuilder()
    o1 = pb.add((0.0, 0.0), Tag.DIRICHLET)
    pb.add((a, -half_l), Tag.DIRICHLET)
    pb.add((d - a, -half_l), Tag.DIRICHLET)
    o2 = pb.add((d, 0.0), Tag.DIRICHLET)
    pb.add((d - a, half_l), Tag.DIRICHLET)
    pb.add((a, half_l), Tag.DIRICHLET)
    return pb.build(corner_markers=[o1, o2])


def build_halfstrip(geom: WaveguideGeometry, R_trunc: float) -> PolygonalBoundary:
    """Boundary of the left limit component truncated at ``x = -R``.

    Coordinates are centred at the first cone vertex, which is the only
    corner marker.
    """
    geom.validate()
    a = geom.ray_run
    if not R_trunc > 0:
        raise GeometryError(f"R_trunc must be positive, got {R_trunc}")
    if not R_trunc > a:
        raise GeometryError(f"R_trunc={R_trunc:g} must exceed the cone run {a:g}")
    half_l = 0.5 * geom.l
    pb = _PolyBuilder()
    o1 = pb.add((0.0, 0.0), Tag.DIRICHLET)
    pb.add((-a, half_l), Tag.DIRICHLET)
    pb.add((-R_trunc, half_l), Tag.GAMMA_1)
    pb.add((-R_trunc, -half_l), Tag.DIRICHLET)
    pb.add((-a, -half_l), Tag.DIRICHLET)
    return pb.build(corner_markers=[o1])


def build_omega(r0: float, omega: float, R_trunc: float, h_max: float = 0.25,
                single_sector: bool = False) -> PolygonalBoundary:
    """Boundary of ``(K U disk(0, r0)) n disk(0, R)``.

    The outer arc of the right sector is GAMMA_2, that of the left sector
    GAMMA_1.  With ``single_sector`` only the right sector ``|phi| < omega/2``
    is built (no disk), the origin then being the corner marker.
    """
    if not 0 < omega < math.pi:
        raise GeometryError(f"omega must lie in (0, pi), got {omega}")
    if not r0 > 0:
        raise GeometryError(f"r0 must be positive, got {r0}")
    if not R_trunc > 2 * r0:
        raise GeometryError(f"R_trunc={R_trunc:g} must exceed 2*r0={2 * r0:g}")
    half = 0.5 * omega
    n_out = arc_segments(R_trunc, omega, h_max)
    pb = _PolyBuilder()

    def polar(r, t):
        return (r * math.cos(t), r * math.sin(t))

    if single_sector:
        o = pb.add((0.0, 0.0), Tag.DIRICHLET)
        pb.add(polar(R_trunc, -half), Tag.GAMMA_2)
        pb.add_arc((0, 0), R_trunc, -half, half, Tag.GAMMA_2, n_out)
        pb.add(polar(R_trunc, half), Tag.DIRICHLET)
        return pb.build(corner_markers=[o])

    n_in = arc_segments(r0, math.pi - omega, h_max)
    pb.add(polar(R_trunc, -half), Tag.GAMMA_2)
    pb.add_arc((0, 0), R_trunc, -half, half, Tag.GAMMA_2, n_out)
    pb.add(polar(R_trunc, half), Tag.DIRICHLET)
    pb.add(polar(r0, half), Tag.DIRICHLET)
    pb.add_arc((0, 0), r0, half, math.pi - half, Tag.DIRICHLET, n_in)
    pb.add(polar(r0, math.pi - half), Tag.DIRICHLET)
    pb.add(polar(R_trunc, math.pi - half), Tag.GAMMA_1)
    pb.add_arc((0, 0), R_trunc, math.pi - half, math.pi + half, Tag.GAMMA_1, n_out)
    pb.add(polar(R_trunc, math.pi + half), Tag.DIRICHLET)
    pb.add(polar(r0, math.pi + half), Tag.DIRICHLET)
    pb.add_arc((0, 0), r0, math.pi + half, 2 * math.pi - half, Tag.DIRICHLET, n_in)
    pb.add(polar(r0, 2 * math.pi - half), Tag.DIRICHLET)
    # origin marks the narrow centre; it is not a polygon vertex
    return pb.build(corner_markers=[])


def channel_width(b: PolygonalBoundary, x0: float) -> float:
    """Length of the vertical chord of the polygon at abscissa ``x0``."""
    v = b.vertices
    ys = []
    for i, j in b.segments:
        (xa, ya), (xb, yb) = v[i], v[j]
        if (xa - x0) * (xb - x0) <= 0 and xa != xb:
            ys.append(ya + (x0 - xa) * (yb - ya) / (xb - xa))
        elif xa == xb == x0:
            ys.extend([ya, yb])
    if len(ys) < 2:
        raise GeometryError(f"no chord at x={x0}")
    return max(ys) - min(ys)


def _has_self_intersection(v: np.ndarray, seg: np.ndarray) -> bool:
    """Sweep over segments sorted by min-x; adjacent segments share a vertex."""
    a, b = v[seg[:, 0]], v[seg[:, 1]]
    xmin = np.minimum(a[:, 0], b[:, 0])
    xmax = np.maximum(a[:, 0], b[:, 0])
    order = np.argsort(xmin, kind="stable")
    n = len(seg)
    active: list[int] = []
    for idx in order:
        active = [k for k in active if xmax[k] >= xmin[idx]]
        for k in active:
            if set(seg[k]) & set(seg[idx]):
                if _collinear_overlap(a[k], b[k], a[idx], b[idx]):
                    return True
                continue
            if _segments_cross(a[k], b[k], a[idx], b[idx]):
                return True
        active.append(idx)
    return n < 3


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _segments_cross(p1, p2, q1, q2) -> bool:
    d1, d2 = _orient(q1, q2, p1), _orient(q1, q2, p2)
    d3, d4 = _orient(p1, p2, q1), _orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 < 0 and d3 * d4 < 0:
        return True

    def on_seg(p, q, r):
        return (min(p[0], q[0]) <= r[0] <= max(p[0], q[0])
                and min(p[1], q[1]) <= r[1] <= max(p[1], q[1]))

    scale = max(np.ptp([p1[0], p2[0], q1[0], q2[0]]), np.ptp([p1[1], p2[1], q1[1], q2[1]]), 1.0)
    eps = 1e-14 * scale * scale
    for d, p, q, r in ((d1, q1, q2, p1), (d2, q1, q2, p2), (d3, p1, p2, q1), (d4, p1, p2, q2)):
        if abs(d) <= eps and on_seg(p, q, r):
            return True
    return False


def _collinear_overlap(p1, p2, q1, q2) -> bool:
    """Adjacent segments folding back onto each other."""
    if abs(_orient(p1, p2, q1)) > 1e-14 or abs(_orient(p1, p2, q2)) > 1e-14:
        return False
    d = np.asarray(p2) - np.asarray(p1)
    t = [float(np.dot(np.asarray(q) - p1, d) / np.dot(d, d)) for q in (q1, q2)]
    shared = [x for x in t if abs(x) < 1e-12 or abs(x - 1) < 1e-12]
    other = [x for x in t if x not in shared]
    return any(0 < x < 1 for x in other)


def build_strip(l: float, x_left: float, x_right: float) -> PolygonalBoundary:
    """Straight strip piece with no narrows (empty scatterer)."""
    if not x_right > x_left:
        raise GeometryError("x_right must exceed x_left")
    h = 0.5 * l
    pb = _PolyBuilder()
    pb.add((x_left, -h), Tag.DIRICHLET)
    pb.add((x_right, -h), Tag.GAMMA_2)
    pb.add((x_right, h), Tag.DIRICHLET)
    pb.add((x_left, h), Tag.GAMMA_1)
    return pb.build(corner_markers=[])


def build_rectangle(width: float, height: float, tags=None) -> PolygonalBoundary:
    """Rectangle ``[0, width] x [0, height]``; tags per side (bottom, right, top, left)."""
    tags = tags or [Tag.DIRICHLET] * 4
    pb = _PolyBuilder()
    for p, t in zip([(0, 0), (width, 0), (width, height), (0, height)], tags):
        pb.add(p, t)
    return pb.build(corner_markers=[])
