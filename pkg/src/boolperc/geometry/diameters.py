"""Iterated diameters of convex bodies and hyperplane projections.

The k-th diameter is the diameter of the body's orthogonal projection onto
the subspace perpendicular to the first k-1 diameter orientations.
Polytopal kinds are exact (corner-pair enumeration survives projection);
ellipsoids are support-sampled with multilevel refinement so the relative
error stays below 1/resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bodies import ConvexBody, Ellipsoid, as_vector

DEFAULT_RESOLUTION_2D = 4096
DEFAULT_RESOLUTION_ND = 16384

_SAMPLER_SEED = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class DiameterSequence:
    """Nonincreasing diameters with pairwise-orthonormal orientations."""

    lengths: np.ndarray      # (d,)
    orientations: np.ndarray  # (d, d), column i is the i-th orientation

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=float)
        ors = np.asarray(self.orientations, dtype=float)
        d = lengths.shape[0]
        if ors.shape != (d, d):
            raise ValueError("orientations must be a (d, d) column matrix")
        if np.any(np.diff(lengths) > 1e-9 * max(1.0, lengths[0])):
            raise ValueError("diameter lengths must be nonincreasing")
        if not np.allclose(ors.T @ ors, np.eye(d), atol=1e-9):
            raise ValueError("orientations must be orthonormal")
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "orientations", ors)

    @property
    def d(self):
        return self.lengths.shape[0]


@dataclass(frozen=True)
class ProjectedRegion:
    """Support-sample representation of a region inside a hyperplane."""

    normal: np.ndarray
    base: np.ndarray
    samples: np.ndarray   # (k, d), all within tolerance of the hyperplane
    tolerance: float

    def __post_init__(self):
        n = as_vector(self.normal)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("normal must be a unit vector")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 2 or s.shape[0] == 0:
            raise ValueError("samples must be a nonempty (k, d) array")
        offsets = (s - as_vector(self.base)) @ n
        if np.max(np.abs(offsets)) > self.tolerance:
            raise ValueError("samples leave the hyperplane slab")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "samples", s)


def default_resolution(d):
    return DEFAULT_RESOLUTION_2D if d == 2 else DEFAULT_RESOLUTION_ND


def _complement_basis(u):
    """Orthonormal basis of the hyperplane perpendicular to unit vector u."""
    m = u.shape[0]
    e = np.zeros(m)
    i = int(np.argmax(np.abs(u)))
    e[i] = 1.0 if u[i] >= 0 else -1.0
    v = u + e
    h = np.eye(m) - 2.0 * np.outer(v, v) / (v @ v)
    # column i of h equals -e-ish direction aligned with u; drop it
    cols = [c for c in range(m) if c != i]
    basis = h[:, cols]
    # re-orthonormalise against u for numerical safety
    basis -= np.outer(u, u @ basis)
    q, _ = np.linalg.qr(basis)
    return q


def _max_pair(coords):
    """Largest pairwise distance; first maximising pair in scan order."""
    n = coords.shape[0]
    best = -1.0
    pair = (0, 0)
    for i in range(n - 1):
        diff = coords[i + 1:] - coords[i]
        dist2 = np.einsum("ij,ij->i", diff, diff)
        j = int(np.argmax(dist2))
        if dist2[j] > best:
            best = float(dist2[j])
            pair = (i, i + 1 + j)
    return np.sqrt(best), pair


def _polytope_sequence(verts, d):
    lengths = np.empty(d)
    orientations = np.empty((d, d))
    basis = np.eye(d)
    coords = verts.copy()
    for k in range(d):
        if coords.shape[1] == 0:
            raise ValueError("degenerate body")
        dia, (i, j) = _max_pair(coords)
        if dia <= 0.0:
            raise ValueError("degenerate body")
        u = (coords[i] - coords[j]) / dia
        lengths[k] = dia
        orientations[:, k] = basis @ u
        if k < d - 1:
            comp = _complement_basis(u)
            coords = coords @ comp
            basis = basis @ comp
    return lengths, orientations


def _fibonacci_sphere(n):
    """Deterministic spread of n directions on the unit 2-sphere."""
    i = np.arange(n) + 0.5
    phi = np.pi * (1.0 + np.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _seeded_directions(n, m, level):
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(_SAMPLER_SEED, spawn_key=(m, level))))
    g = rng.standard_normal((n, m))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    return g / norms[:, None]


def _fibonacci_cap(center, radius, n):
    """Deterministic spread of n directions in a cap of the unit 2-sphere."""
    i = np.arange(n) + 0.5
    phi = np.pi * (1.0 + np.sqrt(5.0)) * i
    z = 1.0 - (1.0 - np.cos(radius)) * i / n
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    local = np.column_stack([np.sin(theta) * np.cos(phi),
                             np.sin(theta) * np.sin(phi),
                             np.cos(theta)])
    comp = _complement_basis(center)
    return local[:, :2] @ comp.T + np.outer(local[:, 2], center)


def _cap_directions(center, radius, n, level):
    """n directions inside the spherical cap of angular radius around center."""
    m = center.shape[0]
    if m == 3:
        return _fibonacci_cap(center, radius, n)
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(_SAMPLER_SEED, spawn_key=(m, level, 1))))
    u = rng.random(n)
    theta = radius * u ** (1.0 / max(m - 1, 1))
    g = rng.standard_normal((n, m))
    g -= np.outer(g @ center, center)
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0] = 1.0
    w = g / norms[:, None]
    return np.cos(theta)[:, None] * center + np.sin(theta)[:, None] * w


def _sampled_max_width(mat, resolution):
    """Maximise |mat @ u| over unit u by coarse sampling plus cap refinement.

    The shrink factor per level conservatively over-estimates the covering
    radius of the sample, so the true maximiser stays inside the refined
    cap and the relative error lands well below 1/resolution.
    """
    m = mat.shape[1]
    if m == 1:
        u = np.array([1.0])
        return float(np.linalg.norm(mat[:, 0])), u

    def widths(dirs):
        return np.linalg.norm(dirs @ mat.T, axis=1)

    if m == 2:
        n0 = max(128, resolution // 8)
        theta = np.linspace(0.0, np.pi, n0, endpoint=False)
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        vals = widths(dirs)
        best = int(np.argmax(vals))
        center, half = theta[best], np.pi / n0
        levels = 0
        budget = max(resolution - n0, 64)
        while levels * 17 < budget and half > 1e-12:
            grid = center + np.linspace(-half, half, 17)
            dirs = np.column_stack([np.cos(grid), np.sin(grid)])
            vals = widths(dirs)
            b = int(np.argmax(vals))
            center, half = grid[b], half / 8.0
            levels += 1
        u = np.array([np.cos(center), np.sin(center)])
        return float(np.linalg.norm(mat @ u)), u

    n_level = max(1024, resolution // 4)
    if m == 3:
        dirs = _fibonacci_sphere(n_level)
    else:
        dirs = _seeded_directions(n_level, m, 0)
    vals = widths(dirs)
    best = int(np.argmax(vals))
    center = dirs[best]
    best_val = vals[best]
    shrink = max(0.3 if m >= 4 else 0.0, 5.0 * n_level ** (-1.0 / (m - 1)))
    radius = min(np.pi / 2, shrink * np.pi)
    target = np.sqrt(0.25 / resolution)
    for level in range(1, 9):
        dirs = _cap_directions(center, radius, n_level, level)
        vals = widths(dirs)
        b = int(np.argmax(vals))
        if vals[b] > best_val:
            best_val = vals[b]
            center = dirs[b]
        radius *= shrink
        if radius <= target:
            break
    return float(best_val), center


def _ellipsoid_sequence(body: Ellipsoid, resolution):
    d = body.d
    lengths = np.empty(d)
    orientations = np.empty((d, d))
    basis = np.eye(d)
    for k in range(d):
        # width along B @ u is 2 |diag(a) R^T B u|
        mat = body.semi_axes[:, None] * (body.rotation.matrix.T @ basis)
        width, u = _sampled_max_width(mat, resolution)
        lengths[k] = 2.0 * width
        orientations[:, k] = basis @ u
        if k < d - 1:
            comp = _complement_basis(u)
            basis = basis @ comp
    return lengths, orientations


def diameter_sequence(body: ConvexBody, resolution=None) -> DiameterSequence:
    """Iterated diameters and orientations of a convex body.

    Exact over corner pairs for polytopal kinds (resolution is ignored);
    support-sampled to relative error <= 1/resolution for ellipsoids.
    Ties between diameter-realising pairs resolve to the first pair found
    under the fixed corner scan order.
    """
    d = body.d
    if resolution is None:
        resolution = default_resolution(d)
    if resolution <= 0:
        raise ValueError("resolution must be a positive integer")
    if body.kind == "ellipsoid":
        lengths, orientations = _ellipsoid_sequence(body, resolution)
    else:
        lengths, orientations = _polytope_sequence(body.vertices(), d)
    # tiny sampling jitter can leave lengths out of order by ~1/resolution
    order_fix = np.maximum.accumulate(-lengths)
    lengths = -order_fix
    return DiameterSequence(lengths=lengths, orientations=orientations)


def hyperplane_directions(normal, d, resolution):
    """Unit directions spanning the hyperplane perpendicular to normal."""
    comp = _complement_basis(normal)
    if d == 2:
        z = np.array([[1.0], [-1.0]])
    elif d == 3:
        t = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
        z = np.column_stack([np.cos(t), np.sin(t)])
    else:
        z = _seeded_directions(resolution, d - 1, 7)
    return z @ comp.T


def project(body: ConvexBody, normal, base, resolution=None) -> ProjectedRegion:
    """Orthogonal projection of a body onto a hyperplane, as support samples.

    Exact vertex images for polytopal kinds; resolution-many support
    directions for ellipsoids.
    """
    d = body.d
    n = as_vector(normal, d)
    if abs(np.linalg.norm(n) - 1.0) > 1e-12:
        raise ValueError("normal must be a unit vector")
    b = as_vector(base, d)
    if resolution is None:
        resolution = max(64, default_resolution(d) // 64)
    if body.kind == "ellipsoid":
        dirs = hyperplane_directions(n, d, resolution)
        pts = np.array([body.support(v) for v in dirs])
    else:
        pts = body.vertices()
    proj = pts - np.outer((pts - b) @ n, n)
    scale = 1.0 + float(np.linalg.norm(b)) + body.bounding_radius() \
        + float(np.linalg.norm(body.center))
    return ProjectedRegion(normal=n, base=b, samples=proj,
                           tolerance=1e-9 * scale)
