"""Constructive inscribed box for a convex body with known diameters.

A body with diameters l_1 >= ... >= l_d contains a box with side-lengths
2^(-2(d-1)) * l_i.  The construction works inside the cross-polytope
spanned by the centred diameter segments; by convexity the box then sits
inside every convex body sharing those diameters and orientations.

The induction is the geometric one: the planar base case inscribes the
midpoint rectangle of the larger triangle cut off by the main diagonal;
each lift to the next dimension takes the hyperpyramid over the current
box and keeps the box spanned by the edge midpoints.  When the apex
projects outside the current box, the apex is first replaced by
z = 2^(-2(d-1)) (p - y) + y, which lands the construction back in the
interior case.
"""

from __future__ import annotations

import numpy as np

from .bodies import OrientedBox, Rotation


def _base_rectangle(l1, l2):
    """Planar case: midpoint rectangle of the larger triangle half.

    The diagonal of length l1 splits the span into two triangles of equal
    height l2/2; the tie breaks toward the first-listed corner (+e2).
    The midpoint rectangle spans [-l1/4, l1/4] x [0, l2/4]; the required
    l1/4 x l2/4 box is carved out centred horizontally.
    """
    lo = np.array([-l1 / 8.0, 0.0])
    hi = np.array([l1 / 8.0, l2 / 4.0])
    return lo, hi


def _recenter(lo, hi):
    # the cross-polytope is symmetric under sign flips, so the box
    # translated to the centre stays inside it
    half = (hi - lo) / 2.0
    return -half, half


def lift_step(lo, hi, apex):
    """One induction step: lift a centred d-box to d+1 using the apex.

    lo/hi describe the current box inside the first d coordinates; apex is
    a (d+1)-vector whose last coordinate is the new half-diameter height.
    Returns the lifted box (lo, hi) in d+1 coordinates, anchored on the
    base hyperplane.
    """
    d = lo.shape[0]
    proj = apex[:d]
    inside = np.all(proj >= lo - 1e-12) and np.all(proj <= hi + 1e-12)
    if not inside:
        # worst-case corner replacement: reflect through the farthest
        # box corner y and scale toward the apex
        y = np.where(apex[:d] >= (lo + hi) / 2.0, lo, hi)
        y = np.append(y, 0.0)
        z = 2.0 ** (-2.0 * (d - 1)) * (apex - y) + y
        apex = z
        proj = apex[:d]
        if not (np.all(proj >= lo - 1e-9 * np.max(hi - lo))
                and np.all(proj <= hi + 1e-9 * np.max(hi - lo))):
            raise ValueError("apex replacement left the base box")
    # midpoints of the segments from the base corners to the apex span
    # the halved box at half the apex height
    mid_lo = (lo + proj) / 2.0
    mid_hi = (hi + proj) / 2.0
    height = apex[d] / 2.0
    return (np.append(mid_lo, 0.0), np.append(mid_hi, height))


def _shrink_to(lo, hi, sides):
    """Carve the centred sub-box with the prescribed side-lengths."""
    c = (lo + hi) / 2.0
    if np.any(hi - lo < sides - 1e-9 * np.max(sides)):
        raise ValueError("construction box too small for required sides")
    new_lo = c - sides / 2.0
    new_hi = c + sides / 2.0
    # keep anchored at the base in the last coordinate
    shiftable = new_lo[-1] < lo[-1]
    if shiftable:
        delta = lo[-1] - new_lo[-1]
        new_lo[-1] += delta
        new_hi[-1] += delta
    return new_lo, new_hi


def inscribed_box(lengths, orientations, center) -> OrientedBox:
    """Box with side-lengths 2^(-2(d-1)) l_i inside the diameter span.

    lengths must be positive and nonincreasing; orientations orthonormal
    (columns).  The box is centred at `center` and aligned with the
    orientations.
    """
    l = np.asarray(lengths, dtype=float)
    d = l.shape[0]
    if d < 2:
        raise ValueError("need dimension >= 2")
    if np.any(l <= 0):
        raise ValueError("lengths must be strictly positive")
    if np.any(np.diff(l) > 1e-9 * l[0]):
        raise ValueError("lengths must be sorted nonincreasing")
    ors = np.asarray(orientations, dtype=float)
    if ors.shape != (d, d) or not np.allclose(ors.T @ ors, np.eye(d), atol=1e-9):
        raise ValueError("orientations must be d orthonormal vectors")

    lo, hi = _base_rectangle(l[0], l[1])
    lo, hi = _recenter(lo, hi)
    for k in range(2, d):
        # apex realising the (k+1)-st diameter: tie between the two
        # centred endpoints breaks toward the first-listed (+) corner
        apex = np.zeros(k + 1)
        apex[k] = l[k] / 2.0
        lo, hi = lift_step(lo, hi, apex)
        sides = 2.0 ** (-2.0 * k) * l[:k + 1]
        lo, hi = _shrink_to(lo, hi, sides)
        lo, hi = _recenter(lo, hi)

    target = 2.0 ** (-2 * (d - 1)) * l
    if not np.allclose(hi - lo, target, rtol=1e-12, atol=0.0):
        raise AssertionError("construction drifted from the target sides")
    # emit the sides as one exact power-of-two scaling
    half = target / 2.0
    rot = ors.copy()
    if np.linalg.det(rot) < 0:
        rot[:, -1] = -rot[:, -1]  # boxes are sign-symmetric per axis
    return OrientedBox(half_sides=half, center=np.asarray(center, dtype=float),
                       rotation=Rotation(rot))


def cross_polytope_contains(lengths, orientations, center, point, tol=1e-9):
    """Membership oracle for the cross-polytope spanned by the diameters."""
    l = np.asarray(lengths, dtype=float)
    u = np.asarray(orientations, dtype=float).T @ (
        np.asarray(point, dtype=float) - np.asarray(center, dtype=float))
    return float(np.sum(2.0 * np.abs(u) / l)) <= 1.0 + tol
