"""Planar contact surfaces, H-representation polytopes, and predicates.

Everything here is immutable after construction and safe for concurrent
use. Default tolerances: 1e-9 for equality-style checks, 1e-7 for derived
comparisons (vertex sets, deduplication).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ValidationError
from . import simplex

EQ_TOL = 1e-9
DERIVED_TOL = 1e-7


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.flags.writeable = False
    return a


def yaw_rotation(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_to_normal(normal) -> np.ndarray:
    """Minimal (geodesic) rotation taking +z to `normal`.

    Well-defined for any normal bounded away from -z, which quasi-flatness
    guarantees for the surfaces used here.
    """
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    axis = np.array([-n[1], n[0], 0.0])
    s = np.linalg.norm(axis)
    cth = n[2]
    if s < 1e-12:
        if cth < 0.0:
            raise ValidationError("rotation from +z to -z is ambiguous")
        return np.eye(3)
    k = axis / s
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + s * K + (1.0 - cth) * (K @ K)


def frame_rotation(yaw: float, normal) -> np.ndarray:
    """Yaw about z composed with the minimal rotation aligning +z to normal."""
    return rotation_to_normal(normal) @ yaw_rotation(yaw)


@dataclass(frozen=True)
class RigidTransform:
    """Rotation + translation. `apply` maps body points to world points."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", _freeze(np.asarray(self.rotation, float).reshape(3, 3)))
        object.__setattr__(self, "translation", _freeze(np.asarray(self.translation, float).reshape(3)))

    @classmethod
    def from_yaw(cls, yaw: float, translation) -> "RigidTransform":
        return cls(yaw_rotation(yaw), translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation


def _dedupe_points(pts: np.ndarray, tol: float) -> np.ndarray:
    out: list[np.ndarray] = []
    for p in pts:
        if not any(np.linalg.norm(p - q) <= tol for q in out):
            out.append(p)
    return np.array(out) if out else np.zeros((0, pts.shape[1]))


def _enumerate_vertices(A: np.ndarray, b: np.ndarray, tol: float = DERIVED_TOL) -> np.ndarray:
    """All vertices of {x | Ax <= b} by intersecting row d-tuples.

    Exact for the small bounded H-representations used here (a dozen rows
    at most); avoids any external vertex-enumeration dependency.
    """
    m, d = A.shape
    idx = list(combinations(range(m), d))
    if not idx:
        return np.zeros((0, d))
    mats = A[np.array(idx)]
    rhs = b[np.array(idx)]
    dets = np.abs(np.linalg.det(mats))
    ok = dets > 1e-12
    if not ok.any():
        return np.zeros((0, d))
    pts = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    feas = np.all(pts @ A.T <= b + tol, axis=1)
    return _dedupe_points(pts[feas], tol)


@dataclass(frozen=True)
class Polytope:
    """Convex set {x | A x <= b} in H-representation (columns = 3)."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _freeze(np.atleast_2d(self.A)))
        object.__setattr__(self, "b", _freeze(np.atleast_1d(np.asarray(self.b, float))))
        if self.A.shape[0] != self.b.shape[0]:
            raise ValidationError("polytope row count mismatch")

    @classmethod
    def box(cls, lower, upper) -> "Polytope":
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        d = len(lower)
        eye = np.eye(d)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    def contains(self, points, tol: float = EQ_TOL) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all(pts @ self.A.T <= self.b + tol, axis=1)

    def vertices(self, tol: float = DERIVED_TOL) -> np.ndarray:
        return _enumerate_vertices(self.A, self.b, tol)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.vertices()
        if not len(v):
            raise ValidationError("empty polytope has no bounding box")
        return v.min(axis=0), v.max(axis=0)

    def rotate(self, R: np.ndarray) -> "Polytope":
        return Polytope(self.A @ np.asarray(R, dtype=float).T, self.b)

    def translate(self, t) -> "Polytope":
        t = np.asarray(t, dtype=float)
        return Polytope(self.A, self.b + self.A @ t)

    def validate(self, name: str = "polytope") -> None:
        """Check boundedness and non-empty interior via LPs."""
        d = self.A.shape[1]
        for axis in range(d):
            for sgn in (1.0, -1.0):
                c = np.zeros(d)
                c[axis] = sgn
                res = simplex.solve_linear(c, A_ub=self.A, b_ub=self.b)
                if res.status == simplex.UNBOUNDED:
                    raise ValidationError(f"{name} is unbounded along axis {axis}")
                if res.status == simplex.INFEASIBLE:
                    raise ValidationError(f"{name} is empty")
        # Chebyshev radius > 0 <=> non-empty interior.
        norms = np.linalg.norm(self.A, axis=1)
        c = np.zeros(d + 1)
        c[-1] = -1.0
        A_ub = np.hstack([self.A, norms[:, None]])
        A_ub = np.vstack([A_ub, np.concatenate([np.zeros(d), [-1.0]])])
        b_ub = np.concatenate([self.b, [0.0]])
        res = simplex.solve_linear(c, A_ub=A_ub, b_ub=b_ub)
        if not res.optimal or -res.objective <= 1e-9:
            raise ValidationError(f"{name} has empty interior")


def rotated_polytope(poly: Polytope, yaw: float, surface_normal) -> Polytope:
    """Image of `poly` under the contact-frame rotation for (yaw, normal)."""
    return poly.rotate(frame_rotation(yaw, surface_normal))


def _plane_basis(normal: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis (3x2) of the plane with this normal."""
    n = normal / np.linalg.norm(normal)
    ref = np.array([1.0, 0.0, 0.0]) if abs(n[0]) <= 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(n, ref)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return np.column_stack([u, v])


@dataclass(frozen=True)
class ContactSurface:
    """Convex planar polygon: points p with p'n = offset and H p <= h."""

    id: int
    normal: np.ndarray
    plane_offset: float
    halfspaces_A: np.ndarray
    halfspaces_b: np.ndarray
    vertices: np.ndarray = field(default=None)  # derived, cached

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > EQ_TOL:
            raise ValidationError(f"surface {self.id}: normal is not unit length")
        object.__setattr__(self, "normal", _freeze(n))
        object.__setattr__(self, "halfspaces_A", _freeze(np.atleast_2d(self.halfspaces_A)))
        object.__setattr__(self, "halfspaces_b", _freeze(np.atleast_1d(np.asarray(self.halfspaces_b, float))))
        if self.vertices is None:
            object.__setattr__(self, "vertices", _freeze(self._compute_vertices()))
        else:
            object.__setattr__(self, "vertices", _freeze(np.atleast_2d(self.vertices)))
        self._check()

    # -- construction ----------------------------------------------------

    @classmethod
    def from_vertices(cls, sid: int, vertices) -> "ContactSurface":
        """Build from an ordered planar polygon (any winding)."""
        v = np.atleast_2d(np.asarray(vertices, dtype=float))
        if len(v) < 3:
            raise ValidationError(f"surface {sid}: fewer than 3 vertices")
        # Newell normal; flip so it points upward (quasi-flat surfaces only).
        n = np.zeros(3)
        for i in range(len(v)):
            a, b = v[i], v[(i + 1) % len(v)]
            n += np.cross(a, b)
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            raise ValidationError(f"surface {sid}: degenerate polygon")
        n /= norm
        if n[2] < 0:
            n = -n
            v = v[::-1]
        e = float(np.mean(v @ n))
        if np.abs(v @ n - e).max() > 1e-7:
            raise ValidationError(f"surface {sid}: vertices are not coplanar")
        rows, rhs = [], []
        for i in range(len(v)):
            d = v[(i + 1) % len(v)] - v[i]
            out = np.cross(d, n)
            nn = np.linalg.norm(out)
            if nn < 1e-12:
                continue
            out /= nn
            rows.append(out)
            rhs.append(float(out @ v[i]))
        return cls(sid, n, e, np.array(rows), np.array(rhs), vertices=v)

    def _compute_vertices(self) -> np.ndarray:
        o = self.plane_offset * self.normal
        U = _plane_basis(self.normal)
        G = self.halfspaces_A @ U
        h = self.halfspaces_b - self.halfspaces_A @ o
        pts2 = _enumerate_vertices(G, h)
        if len(pts2) < 3:
            raise ValidationError(f"surface {self.id}: polygon has fewer than 3 vertices")
        center = pts2.mean(axis=0)
        order = np.argsort(np.arctan2(pts2[:, 1] - center[1], pts2[:, 0] - center[0]))
        return pts2[order] @ U.T + o

    def _check(self):
        v = self.vertices
        res = np.abs(v @ self.normal - self.plane_offset)
        if res.max() > 1e-7:
            raise ValidationError(f"surface {self.id}: cached vertices off-plane")
        if np.any(v @ self.halfspaces_A.T > self.halfspaces_b[None, :] + 1e-7):
            raise ValidationError(f"surface {self.id}: cached vertices violate halfspaces")
        if self.area() <= 1e-8:
            raise ValidationError(f"surface {self.id}: degenerate area")

    # -- derived quantities ------------------------------------------------

    def area(self) -> float:
        v = self.vertices
        s = np.zeros(3)
        for i in range(1, len(v) - 1):
            s += np.cross(v[i] - v[0], v[i + 1] - v[0])
        return 0.5 * float(np.linalg.norm(s))

    def plane_frame(self) -> tuple[np.ndarray, np.ndarray]:
        """(origin, 3x2 basis) parameterizing the supporting plane."""
        return self.plane_offset * self.normal, _plane_basis(self.normal)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def height_at(self, x: float, y: float) -> float:
        """z of the supporting plane below/above the vertical line (x, y)."""
        n = self.normal
        return (self.plane_offset - n[0] * x - n[1] * y) / n[2]

    def contains_xy(self, x: float, y: float, tol: float = EQ_TOL) -> bool:
        p = np.array([x, y, self.height_at(x, y)])
        return surface_contains(self, p, tol)


def surface_contains(surface: ContactSurface, p, tol: float = EQ_TOL) -> bool:
    """Point membership: on the plane and inside every bounding halfspace."""
    p = np.asarray(p, dtype=float)
    if abs(p @ surface.normal - surface.plane_offset) > tol:
        return False
    return bool(np.all(surface.halfspaces_A @ p <= surface.halfspaces_b + tol))


def quasi_flat(surface: ContactSurface, mu: float) -> bool:
    """True when the friction cone of the surface contains gravity."""
    n = surface.normal
    tilt = np.arctan2(np.hypot(n[0], n[1]), n[2])
    return tilt <= np.arctan(mu) + EQ_TOL


def polytope_surface_intersects(poly: Polytope, pose: RigidTransform,
                                surface: ContactSurface, tol: float = EQ_TOL) -> bool:
    """LP feasibility of (posed polytope) intersected with the surface polygon.

    The shared point is sought in the surface-plane coordinates, which
    leaves a two-variable feasibility LP. A bounding-box prefilter rejects
    clearly separated pairs without touching the LP.
    """
    verts = pose.apply(poly.vertices())
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    slo, shi = surface.aabb()
    if np.any(lo > shi + tol) or np.any(hi < slo - tol):
        return False
    # Posed polytope rows: A R' y <= b + A R' t.
    G1 = poly.A @ pose.rotation.T
    h1 = poly.b + G1 @ pose.translation
    o, U = surface.plane_frame()
    G = np.vstack([G1 @ U, surface.halfspaces_A @ U])
    h = np.concatenate([h1 - G1 @ o, surface.halfspaces_b - surface.halfspaces_A @ o])
    res = simplex.solve_linear(np.zeros(2), A_ub=G, b_ub=h + tol)
    return res.optimal


def _interior_overlap(a: ContactSurface, b: ContactSurface, margin: float = EQ_TOL) -> bool:
    """True when the two polygons share a point interior to both.

    Maximizes the joint halfspace margin on the intersection of the two
    supporting planes; shared boundaries (margin 0) do not count.
    """
    A_ub = np.hstack([np.vstack([a.halfspaces_A, b.halfspaces_A]),
                      np.ones((len(a.halfspaces_b) + len(b.halfspaces_b), 1))])
    b_ub = np.concatenate([a.halfspaces_b, b.halfspaces_b])
    A_eq = np.array([np.append(a.normal, 0.0), np.append(b.normal, 0.0)])
    b_eq = np.array([a.plane_offset, b.plane_offset])
    c = np.zeros(4)
    c[3] = -1.0
    res = simplex.solve_linear(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq)
    return res.optimal and -res.objective > margin


@dataclass(frozen=True)
class Scene:
    """A set of disjoint quasi-flat contact surfaces plus a friction level."""

    surfaces: tuple[ContactSurface, ...]
    friction: float = 0.5
    name: str = "scene"

    def __post_init__(self):
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        self.validate()

    def validate(self) -> None:
        ids = [s.id for s in self.surfaces]
        if ids != list(range(len(ids))):
            raise ValidationError(f"scene '{self.name}': surface ids must be 0..{len(ids) - 1}")
        if self.friction <= 0:
            raise ValidationError(f"scene '{self.name}': friction must be positive")
        for s in self.surfaces:
            if not quasi_flat(s, self.friction):
                raise ValidationError(
                    f"scene '{self.name}': surface {s.id} is not quasi-flat at friction {self.friction}")
        for a, b in combinations(self.surfaces, 2):
            alo, ahi = a.aabb()
            blo, bhi = b.aabb()
            if np.any(alo > bhi + EQ_TOL) or np.any(ahi < blo - EQ_TOL):
                continue
            if _interior_overlap(a, b):
                raise ValidationError(
                    f"scene '{self.name}': surfaces {a.id} and {b.id} intersect")

    @property
    def m(self) -> int:
        return len(self.surfaces)

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        los, his = zip(*(s.aabb() for s in self.surfaces))
        return np.min(los, axis=0), np.max(his, axis=0)

    def surface_below(self, x: float, y: float) -> ContactSurface | None:
        """Topmost surface whose polygon covers the vertical line (x, y)."""
        best = None
        best_z = -np.inf
        for s in self.surfaces:
            if s.contains_xy(x, y, tol=1e-7):
                z = s.height_at(x, y)
                if z > best_z:
                    best, best_z = s, z
        return best
