"""Convex body primitives: oriented boxes, ellipsoids, cross-polytopes and
vertex polytopes, with closed-form support functions and containment tests.

All bodies live in R^d (d >= 2) and are parameterised in a local frame:
world point = center + rotation @ local point.  Size parameters of the
parametric kinds are sorted nonincreasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-12


class PredicateConvergenceError(RuntimeError):
    """Raised when the iterative distance predicate exhausts its budget."""


def as_vector(x, d=None):
    """Coerce to a float64 vector, optionally checking the dimension."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise ValueError(f"expected dimension {d}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector entries must be finite")
    return v


def _frozen_array(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Rotation:
    """A proper rotation of R^d: orthogonal matrix with determinant +1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen_array(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
            raise ValueError("rotation matrix must be square, d >= 2")
        d = m.shape[0]
        if not np.allclose(m.T @ m, np.eye(d), atol=1e-10):
            raise ValueError("rotation columns are not orthonormal")
        if abs(np.linalg.det(m) - 1.0) > 1e-10:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "matrix", m)

    @property
    def d(self):
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d))

    @classmethod
    def from_angle(cls, theta):
        """Planar rotation (d = 2) by angle theta."""
        c, s = np.cos(theta), np.sin(theta)
        return cls(np.array([[c, -s], [s, c]]))

    def apply(self, v):
        return self.matrix @ v

    def compose(self, other: "Rotation") -> "Rotation":
        return Rotation(self.matrix @ other.matrix)


def _check_sizes(sizes, what):
    s = np.asarray(sizes, dtype=float)
    if s.ndim != 1 or s.shape[0] < 2:
        raise ValueError(f"{what} must be a vector of length d >= 2")
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise ValueError(f"{what} must be strictly positive and finite")
    if np.any(np.diff(s) > 0):
        raise ValueError(f"{what} must be sorted nonincreasing")
    return s


class ConvexBody:
    """Base class; concrete kinds implement the local support function."""

    kind: str = "abstract"

    def __init__(self, center, rotation):
        d = self._dimension()
        self.center = _frozen_array(as_vector(center, d) if center is not None
                                    else np.zeros(d))
        self.rotation = rotation if rotation is not None else Rotation.identity(d)
        if self.rotation.d != d:
            raise ValueError("rotation dimension mismatch")

    @property
    def d(self):
        return self.center.shape[0]

    def _dimension(self):
        raise NotImplementedError

    def _support_local(self, w):
        raise NotImplementedError

    def support(self, direction):
        """A point of the body maximising the inner product with direction."""
        v = as_vector(direction, self.d)
        w = self.rotation.matrix.T @ v
        return self.center + self.rotation.matrix @ self._support_local(w)

    def support_value(self, direction):
        v = as_vector(direction, self.d)
        return float(self.support(v) @ v)

    def bounding_radius(self):
        """Radius of the smallest center-anchored ball covering the body."""
        raise NotImplementedError

    def aabb(self):
        """Axis-aligned bounding box (lower, upper), exact per kind."""
        half = self._aabb_half()
        return self.center - half, self.center + half

    def _aabb_half(self):
        raise NotImplementedError

    def contains(self, point, tol=1e-9):
        """True iff the point is within distance tol of the body."""
        if tol <= 0:
            raise ValueError("tol must be positive")
        p = as_vector(point, self.d)
        u = self.rotation.matrix.T @ (p - self.center)
        quick = self._contains_local(u)
        if quick:
            return True
        from .gjk import distance_to_point
        return distance_to_point(self, p) <= tol

    def _contains_local(self, u):
        raise NotImplementedError

    def translate(self, offset):
        return self._replace(center=self.center + as_vector(offset, self.d))

    def rotate(self, rotation: Rotation):
        """Rotate the body about its own center."""
        return self._replace(rotation=rotation.compose(self.rotation))

    def _replace(self, center=None, rotation=None):
        raise NotImplementedError


class OrientedBox(ConvexBody):
    kind = "box"

    def __init__(self, half_sides, center=None, rotation=None):
        self.half_sides = _frozen_array(_check_sizes(half_sides, "half_sides"))
        super().__init__(center, rotation)

    def _dimension(self):
        return self.half_sides.shape[0]

    def _support_local(self, w):
        s = np.where(w >= 0, 1.0, -1.0)
        return s * self.half_sides

    def bounding_radius(self):
        return float(np.linalg.norm(self.half_sides))

    def _aabb_half(self):
        return np.abs(self.rotation.matrix) @ self.half_sides

    def _contains_local(self, u):
        return bool(np.all(np.abs(u) <= self.half_sides))

    def local_vertices(self):
        d = self.d
        signs = np.array(np.meshgrid(*([[-1.0, 1.0]] * d), indexing="ij"))
        return signs.reshape(d, -1).T * self.half_sides

    def vertices(self):
        return self.center + self.local_vertices() @ self.rotation.matrix.T

    def _replace(self, center=None, rotation=None):
        return OrientedBox(self.half_sides,
                           self.center if center is None else center,
                           self.rotation if rotation is None else rotation)


class Ellipsoid(ConvexBody):
    kind = "ellipsoid"

    def __init__(self, semi_axes, center=None, rotation=None):
        self.semi_axes = _frozen_array(_check_sizes(semi_axes, "semi_axes"))
        super().__init__(center, rotation)

    @classmethod
    def ball(cls, radius, center, d=None):
        c = as_vector(center)
        return cls(np.full(c.shape[0] if d is None else d, float(radius)), c)

    def _dimension(self):
        return self.semi_axes.shape[0]

    def _support_local(self, w):
        t = self.semi_axes * w
        h = np.linalg.norm(t)
        if h == 0.0:
            out = np.zeros(self.d)
            out[0] = self.semi_axes[0]
            return out
        return self.semi_axes * t / h

    def bounding_radius(self):
        return float(self.semi_axes[0])

    def _aabb_half(self):
        # per-axis extent of a rotated ellipsoid: row norms of R @ diag(a)
        return np.linalg.norm(self.rotation.matrix * self.semi_axes, axis=1)

    def _contains_local(self, u):
        return bool(np.sum((u / self.semi_axes) ** 2) <= 1.0)

    def _replace(self, center=None, rotation=None):
        return Ellipsoid(self.semi_axes,
                         self.center if center is None else center,
                         self.rotation if rotation is None else rotation)


class CrossPolytope(ConvexBody):
    """Convex hull of +/- half_diameters[i] along the local axes."""

    kind = "cross"

    def __init__(self, half_diameters, center=None, rotation=None):
        self.half_diameters = _frozen_array(
            _check_sizes(half_diameters, "half_diameters"))
        super().__init__(center, rotation)

    def _dimension(self):
        return self.half_diameters.shape[0]

    def _support_local(self, w):
        score = self.half_diameters * np.abs(w)
        i = int(np.argmax(score))
        out = np.zeros(self.d)
        out[i] = self.half_diameters[i] * (1.0 if w[i] >= 0 else -1.0)
        return out

    def bounding_radius(self):
        return float(self.half_diameters[0])

    def _aabb_half(self):
        return np.max(np.abs(self.rotation.matrix) * self.half_diameters, axis=1)

    def _contains_local(self, u):
        return bool(np.sum(np.abs(u) / self.half_diameters) <= 1.0)

    def local_vertices(self):
        d = self.d
        out = np.zeros((2 * d, d))
        for i in range(d):
            out[2 * i, i] = self.half_diameters[i]
            out[2 * i + 1, i] = -self.half_diameters[i]
        return out

    def vertices(self):
        return self.center + self.local_vertices() @ self.rotation.matrix.T

    def _replace(self, center=None, rotation=None):
        return CrossPolytope(self.half_diameters,
                             self.center if center is None else center,
                             self.rotation if rotation is None else rotation)


class VertexPolytope(ConvexBody):
    """Convex hull of explicit local vertices; must have nonempty interior."""

    kind = "polytope"

    def __init__(self, vertices, center=None, rotation=None):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] < 2:
            raise ValueError("vertices must have shape (n, d) with d >= 2")
        d = v.shape[1]
        if v.shape[0] < d + 1:
            raise ValueError("degenerate body")
        if np.linalg.matrix_rank(v[1:] - v[0], tol=1e-12) < d:
            raise ValueError("degenerate body")
        self._vertices = _frozen_array(v)
        super().__init__(center, rotation)

    def _dimension(self):
        return self._vertices.shape[1]

    def _support_local(self, w):
        i = int(np.argmax(self._vertices @ w))
        return self._vertices[i]

    def bounding_radius(self):
        return float(np.max(np.linalg.norm(self._vertices, axis=1)))

    def aabb(self):
        world = self.vertices()
        return world.min(axis=0), world.max(axis=0)

    def _contains_local(self, u):
        # no cheap closed form; defer to the distance predicate
        return False

    def local_vertices(self):
        return self._vertices

    def vertices(self):
        return self.center + self._vertices @ self.rotation.matrix.T

    def _replace(self, center=None, rotation=None):
        return VertexPolytope(self._vertices,
                              self.center if center is None else center,
                              self.rotation if rotation is None else rotation)


POLYTOPAL_KINDS = ("box", "cross", "polytope")
