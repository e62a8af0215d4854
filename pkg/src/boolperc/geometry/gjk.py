"""Iterative support-function distance between convex bodies (GJK).

The solver walks the Minkowski difference A - B with support queries and
keeps the sub-simplex of difference points closest to the origin.  It
returns certified lower/upper bounds on the Euclidean distance, so the
intersection predicate can decide "within tol" without ever guessing.
"""

from __future__ import annotations

import itertools

import numpy as np

from .bodies import ConvexBody, PredicateConvergenceError, as_vector

MAX_ITER = 160
REL_EPS = 1e-12


def _closest_on_hull(points):
    """Closest point to the origin on the convex hull of a few points.

    Enumerates every nonempty subset, solves the affine least-squares
    problem on it, and keeps the best subset whose barycentric
    coordinates are nonnegative.  Returns (point, kept_points).
    """
    k = len(points)
    best = None
    best_norm2 = np.inf
    for r in range(1, k + 1):
        for subset in itertools.combinations(range(k), r):
            q = [points[i] for i in subset]
            if r == 1:
                p = q[0]
                lam = np.array([1.0])
            else:
                base = q[0]
                diff = np.array(q[1:]) - base
                gram = diff @ diff.T
                rhs = -diff @ base
                try:
                    t = np.linalg.solve(gram, rhs)
                except np.linalg.LinAlgError:
                    continue
                lam = np.concatenate(([1.0 - t.sum()], t))
                if np.any(lam < -1e-12):
                    continue
                p = lam @ np.array(q)
            n2 = float(p @ p)
            if n2 < best_norm2 - 1e-300 or (best is None):
                best_norm2 = n2
                best = (p, q)
    if best is None:  # all subsets degenerate; fall back to nearest vertex
        norms = [float(p @ p) for p in points]
        i = int(np.argmin(norms))
        best = (points[i], [points[i]])
    return best


def gjk_bounds(support_a, support_b, d, *, scale=1.0, tol=0.0,
               need_distance=True, max_iter=MAX_ITER, init_dir=None):
    """Lower/upper bounds on dist(A, B) from support callables.

    When need_distance is false the loop may exit early once the lower
    bound certifies separation beyond tol.  Raises
    PredicateConvergenceError if the budget runs out.
    """
    eps_zero = 1e-13 * scale
    eps_gap = max(1e-12 * scale, 1e-15)

    if init_dir is None or float(init_dir @ init_dir) < 1e-300:
        v = np.zeros(d)
        v[0] = scale
    else:
        v = np.asarray(init_dir, dtype=float).copy()

    simplex: list[np.ndarray] = []
    best_lower = -np.inf
    for _ in range(max_iter):
        nv = float(np.linalg.norm(v))
        if nv <= eps_zero:
            return 0.0, 0.0
        vhat = v / nv
        s = support_a(-vhat) - support_b(vhat)
        lower = float(s @ vhat)
        best_lower = max(best_lower, lower)
        if not need_distance and best_lower > tol:
            return best_lower, np.inf
        if nv - lower <= eps_gap + REL_EPS * nv:
            return max(best_lower, 0.0), nv
        if any(float(np.linalg.norm(s - w)) <= 1e-14 * scale for w in simplex):
            return max(best_lower, 0.0), nv
        simplex.append(s)
        v, simplex = _closest_on_hull(simplex)
        if len(simplex) == d + 1:
            # origin inside a full-dimensional simplex
            return 0.0, 0.0
    raise PredicateConvergenceError("predicate did not converge")


def _pair_scale(a: ConvexBody, b: ConvexBody):
    return 1.0 + float(np.linalg.norm(a.center - b.center)) \
        + a.bounding_radius() + b.bounding_radius()


def distance(a: ConvexBody, b: ConvexBody):
    """Euclidean distance between two convex bodies (0 when overlapping)."""
    lo, hi = gjk_bounds(a.support, b.support, a.d, scale=_pair_scale(a, b),
                        init_dir=a.center - b.center)
    return hi


def intersects(a: ConvexBody, b: ConvexBody, tol=1e-9):
    """True iff dist(a, b) <= tol; touching within tol counts as a hit."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a.d != b.d:
        raise ValueError("dimension mismatch")
    lo, hi = gjk_bounds(a.support, b.support, a.d, scale=_pair_scale(a, b),
                        tol=tol, need_distance=False,
                        init_dir=a.center - b.center)
    if not np.isfinite(hi):
        return False
    return hi <= tol


def distance_to_point(body: ConvexBody, point):
    p = as_vector(point, body.d)
    scale = 1.0 + float(np.linalg.norm(body.center - p)) + body.bounding_radius()
    lo, hi = gjk_bounds(body.support, lambda v: p, body.d, scale=scale,
                        init_dir=body.center - p)
    return hi


def distance_to_point_set(body: ConvexBody, points, tol=1e-9):
    """Distance from a body to the convex hull of a finite point set."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("point set must be nonempty with shape (n, d)")
    centroid = pts.mean(axis=0)

    def sup(v):
        return pts[int(np.argmax(pts @ v))]

    rad = float(np.max(np.linalg.norm(pts - centroid, axis=1)))
    scale = 1.0 + float(np.linalg.norm(body.center - centroid)) \
        + body.bounding_radius() + rad
    lo, hi = gjk_bounds(body.support, sup, body.d, scale=scale,
                        init_dir=body.center - centroid)
    return hi
