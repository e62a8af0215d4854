"""Random grain generation: heavy-tailed diameter laws, Haar rotations,
and the built-in grain families.

Families produce convex bodies centred at the origin (the caller places
them).  All size parameters are floored so every grain contains a ball of
radius eps_interior.  Samplers come in a scalar form (one ConvexBody) and
a vectorised batch form used by the point-process layer; both draw the
same laws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .geometry import (ConvexBody, CrossPolytope, Ellipsoid, OrientedBox,
                       Rotation, VertexPolytope)
from .rng import SeededRng

_TRIANGLE_INRADIUS_BOUND = (math.sqrt(2.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TailLaw:
    """Pareto (pure power tail) or a deterministic point mass.

    Pareto: P(X >= x) = (x / scale)^(-alpha) for x >= scale.
    """

    alpha: float           # tail index; +inf for the point mass
    scale: float           # x_min for Pareto, the value for Degenerate
    kind: str = "pareto"   # "pareto" | "degenerate"

    def __post_init__(self):
        if self.kind not in ("pareto", "degenerate"):
            raise ValueError(f"unknown law kind {self.kind!r}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.kind == "pareto" and not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @classmethod
    def pareto(cls, alpha, x_min=1.0):
        return cls(alpha=float(alpha), scale=float(x_min), kind="pareto")

    @classmethod
    def degenerate(cls, value):
        return cls(alpha=math.inf, scale=float(value), kind="degenerate")

    @property
    def minimum(self):
        return self.scale

    def from_uniform(self, u):
        """Inverse-transform a uniform(0,1) draw: x_min * u^(-1/alpha)."""
        if self.kind == "degenerate":
            return self.scale * np.ones_like(np.asarray(u, dtype=float)) \
                if np.ndim(u) else self.scale
        return self.scale * np.asarray(u, dtype=float) ** (-1.0 / self.alpha)

    def survival(self, x):
        if self.kind == "degenerate":
            return np.where(np.asarray(x) <= self.scale, 1.0, 0.0)
        x = np.asarray(x, dtype=float)
        return np.where(x <= self.scale, 1.0, (x / self.scale) ** -self.alpha)

    def isf(self, q):
        """x with P(X >= x) = q."""
        if self.kind == "degenerate":
            return self.scale
        return self.scale * q ** (-1.0 / self.alpha)

    def moment_finite(self, p):
        """Whether E[X^p] is finite (p < alpha for Pareto)."""
        if self.kind == "degenerate":
            return True
        return p < self.alpha

    def sample(self, rng: SeededRng, n=None):
        if self.kind == "degenerate":
            return self.scale if n is None else np.full(n, self.scale)
        u = rng.random(n)
        return self.from_uniform(u)


def sample_tail(law: TailLaw, rng: SeededRng):
    """One draw from a tail law (inverse transform for Pareto)."""
    return float(law.sample(rng))


def haar_rotations(n, d, rng: SeededRng):
    """(n, d, d) Haar-uniform rotations from orthonormalised normals.

    Gram-Schmidt on a matrix of independent standard normals equals the
    QR factor with positive diagonal (the sign convention that makes it
    unique); the determinant is then fixed to +1 by flipping the last
    column where needed.  Column-wise vectorisation avoids per-matrix
    LAPACK overhead for the small d used here.
    """
    a = rng.standard_normal((n, d, d))
    q = np.empty_like(a)
    for c in range(d):
        v = a[:, :, c].copy()
        for p in range(c):
            v -= np.einsum("ni,ni->n", q[:, :, p], a[:, :, c])[:, None] \
                * q[:, :, p]
        norm = np.linalg.norm(v, axis=1)
        norm[norm == 0] = 1.0
        q[:, :, c] = v / norm[:, None]
    det = np.linalg.det(q)
    q[det < 0, :, -1] *= -1.0
    return q


def sample_rotation(d, rng: SeededRng) -> Rotation:
    """One Haar-uniform rotation of SO(d)."""
    if d < 2:
        raise ValueError("d must be >= 2")
    return Rotation(haar_rotations(1, d, rng)[0])


class GrainFamily:
    """Base class for random grain families."""

    d: int
    eps_interior: float

    # --- law structure -------------------------------------------------
    def tail_indices(self):
        """Tail index of D^(k) for k = 1..d (+inf for bounded)."""
        raise NotImplementedError

    def moment_flags(self):
        """(vol_L1, vol_L2, D1_Ld) for the untruncated law."""
        raise NotImplementedError

    def d1_min(self):
        """Smallest possible first diameter."""
        raise NotImplementedError

    def d1_isf(self, q):
        """t with P(D^(1) >= t) = q."""
        raise NotImplementedError

    # --- sampling -------------------------------------------------------
    def sample_sizes(self, n, rng: SeededRng):
        """(n, k) raw size draws, before eps flooring and truncation."""
        raise NotImplementedError

    def cap_sizes(self, sizes, cap):
        """Clamp raw sizes so that D^(1) <= cap (in place allowed)."""
        raise NotImplementedError

    def d1_of_sizes(self, sizes):
        """First diameter for each row of raw sizes."""
        raise NotImplementedError

    def diameter_lengths(self, sizes):
        """(n, d) full diameter vectors, closed form where available."""
        raise NotImplementedError

    def build_batch(self, sizes, rotations):
        """Pack sized+rotated grains into per-kind arrays.

        Returns (kind, size_params (n, d), tri_verts or None) where
        size_params are semi-axes / half-sides in nonincreasing order.
        """
        raise NotImplementedError

    def grain_from(self, sizes_row, rotation: Rotation) -> ConvexBody:
        raise NotImplementedError

    def validate_cap(self, cap):
        if cap is not None and cap < self.d1_min():
            raise ValueError("truncation cap below the family minimum")


def sample_grain(family: GrainFamily, rng: SeededRng) -> ConvexBody:
    """One grain: sizes per the family law, then a Haar rotation."""
    sizes = family.sample_sizes(1, rng)
    rot = sample_rotation(family.d, rng)
    return family.grain_from(sizes[0], rot)


def tail_index_vector(family: GrainFamily):
    """Tail indices of D^(1..d); +inf marks bounded diameters."""
    return tuple(float(a) for a in family.tail_indices())


def _floor(a, lo):
    return np.maximum(a, lo)


@dataclass(frozen=True)
class EllipsoidLongShort(GrainFamily):
    """Ellipsoids with m short axes of length one and d-m long axes of a
    common random length."""

    d: int
    m: int
    law: TailLaw
    eps_interior: float = 0.05

    def __post_init__(self):
        if not (1 <= self.m <= self.d - 1):
            raise ValueError("m must be in 1..d-1")
        if self.eps_interior <= 0 or self.eps_interior >= 0.5:
            raise ValueError("eps_interior must lie in (0, 0.5)")

    def tail_indices(self):
        return [self.law.alpha] * (self.d - self.m) + [math.inf] * self.m

    def moment_flags(self):
        p = self.d - self.m
        return (self.law.moment_finite(p), self.law.moment_finite(2 * p),
                self.law.moment_finite(self.d))

    def d1_min(self):
        return max(self.law.minimum, 1.0)

    def d1_isf(self, q):
        return max(self.law.isf(q), 1.0)

    def sample_sizes(self, n, rng):
        return np.asarray(self.law.sample(rng, n)).reshape(n, 1)

    def cap_sizes(self, sizes, cap):
        return np.minimum(sizes, cap)

    def d1_of_sizes(self, sizes):
        return np.maximum(sizes[:, 0], 1.0)

    def diameter_lengths(self, sizes):
        n = sizes.shape[0]
        axes = np.empty((n, self.d))
        axes[:, :self.d - self.m] = sizes[:, :1]
        axes[:, self.d - self.m:] = 1.0
        axes = _floor(axes, 2 * self.eps_interior)
        return -np.sort(-axes, axis=1)

    def _semi(self, sizes):
        return _floor(0.5 * self.diameter_lengths(sizes), self.eps_interior)

    def build_batch(self, sizes, rotations):
        return "ellipsoid", self._semi(sizes), None

    def grain_from(self, sizes_row, rotation):
        semi = self._semi(sizes_row.reshape(1, -1))[0]
        return Ellipsoid(semi, rotation=rotation)


@dataclass(frozen=True)
class EllipsoidIndependent(GrainFamily):
    """Ellipsoids with independently drawn axis lengths.

    Laws are ordered heaviest first: tail indices beta_1 <= ... <= beta_d.
    The k-th diameter is then regularly varying with index
    beta_1 + ... + beta_k.
    """

    d: int
    laws: tuple
    eps_interior: float = 0.05

    def __post_init__(self):
        if len(self.laws) != self.d:
            raise ValueError("need one law per axis")
        alphas = [law.alpha for law in self.laws]
        if any(a > b for a, b in zip(alphas, alphas[1:])):
            raise ValueError("laws must be ordered heaviest tail first")
        if self.eps_interior <= 0:
            raise ValueError("eps_interior must be positive")

    def tail_indices(self):
        sums = np.cumsum([law.alpha for law in self.laws])
        return list(sums)

    def moment_flags(self):
        vol_l1 = all(law.moment_finite(1) for law in self.laws)
        vol_l2 = all(law.moment_finite(2) for law in self.laws)
        return (vol_l1, vol_l2, self.laws[0].moment_finite(self.d))

    def d1_min(self):
        return max(law.minimum for law in self.laws)

    def d1_isf(self, q):
        lo = self.d1_min()
        if q >= 1.0:
            return lo

        def cdf_gap(t):
            p = 1.0
            for law in self.laws:
                p *= 1.0 - float(law.survival(t))
            return p - (1.0 - q)

        hi = max(law.isf(q / self.d) for law in self.laws) + lo + 1.0
        return float(brentq(cdf_gap, lo, hi, xtol=1e-9, rtol=1e-12))

    def sample_sizes(self, n, rng):
        cols = [np.asarray(law.sample(rng, n)) for law in self.laws]
        return np.column_stack(cols)

    def cap_sizes(self, sizes, cap):
        return np.minimum(sizes, cap)

    def d1_of_sizes(self, sizes):
        return np.max(sizes, axis=1)

    def diameter_lengths(self, sizes):
        axes = _floor(sizes, 2 * self.eps_interior)
        return -np.sort(-axes, axis=1)

    def _semi(self, sizes):
        return _floor(0.5 * self.diameter_lengths(sizes), self.eps_interior)

    def build_batch(self, sizes, rotations):
        return "ellipsoid", self._semi(sizes), None

    def grain_from(self, sizes_row, rotation):
        semi = self._semi(sizes_row.reshape(1, -1))[0]
        return Ellipsoid(semi, rotation=rotation)


@dataclass(frozen=True)
class EllipsoidDependent(GrainFamily):
    """Ellipsoids with axes U^(-beta_i) driven by one shared uniform.

    Exponents are nondecreasing; the k-th diameter has tail index
    1 / beta_(d-k+1).
    """

    d: int
    betas: tuple
    eps_interior: float = 0.05

    def __post_init__(self):
        b = tuple(float(x) for x in self.betas)
        if len(b) != self.d:
            raise ValueError("need one exponent per axis")
        if any(x < 0 for x in b) or any(x > y for x, y in zip(b, b[1:])):
            raise ValueError("exponents must be nonnegative and nondecreasing")
        object.__setattr__(self, "betas", b)
        if self.eps_interior <= 0 or self.eps_interior >= 0.5:
            raise ValueError("eps_interior must lie in (0, 0.5)")

    def tail_indices(self):
        return [math.inf if self.betas[self.d - k - 1] == 0
                else 1.0 / self.betas[self.d - k - 1] for k in range(self.d)]

    def moment_flags(self):
        total = sum(self.betas)
        return (total < 1.0, 2.0 * total < 1.0,
                self.d * self.betas[-1] < 1.0)

    def d1_min(self):
        return 1.0

    def d1_isf(self, q):
        if self.betas[-1] == 0:
            return 1.0
        return float(q) ** (-self.betas[-1])

    def sample_sizes(self, n, rng):
        return rng.random(n).reshape(n, 1)

    def cap_sizes(self, sizes, cap):
        if self.betas[-1] == 0:
            return sizes
        return np.maximum(sizes, cap ** (-1.0 / self.betas[-1]))

    def d1_of_sizes(self, sizes):
        return sizes[:, 0] ** (-self.betas[-1])

    def diameter_lengths(self, sizes):
        u = sizes[:, 0][:, None]
        axes = u ** (-np.asarray(self.betas)[None, :])
        axes = _floor(axes, 2 * self.eps_interior)
        return -np.sort(-axes, axis=1)

    def _semi(self, sizes):
        return _floor(0.5 * self.diameter_lengths(sizes), self.eps_interior)

    def build_batch(self, sizes, rotations):
        return "ellipsoid", self._semi(sizes), None

    def grain_from(self, sizes_row, rotation):
        semi = self._semi(sizes_row.reshape(1, -1))[0]
        return Ellipsoid(semi, rotation=rotation)


@dataclass(frozen=True)
class RightTriangle(GrainFamily):
    """Planar right triangles with heavy-tailed hypotenuse R and area
    R^(1+beta)/4, anchored at a uniformly chosen corner."""

    law: TailLaw
    beta: float
    eps_interior: float = 0.05
    d: int = 2

    def __post_init__(self):
        if self.d != 2:
            raise ValueError("right triangles are planar")
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must lie in (0, 1)")
        if self.law.minimum < 1.0:
            raise ValueError("hypotenuse law must have minimum >= 1")
        if not (0.0 < self.eps_interior <= _TRIANGLE_INRADIUS_BOUND):
            raise ValueError(
                f"eps_interior must lie in (0, {_TRIANGLE_INRADIUS_BOUND:.4f}] "
                "(inradius bound for R >= 1)")

    def tail_indices(self):
        return [self.law.alpha, self.law.alpha / self.beta]

    def moment_flags(self):
        return (self.law.moment_finite(1.0 + self.beta),
                self.law.moment_finite(2.0 * (1.0 + self.beta)),
                self.law.moment_finite(2.0))

    def d1_min(self):
        return self.law.minimum

    def d1_isf(self, q):
        return self.law.isf(q)

    def sample_sizes(self, n, rng):
        r = np.maximum(np.asarray(self.law.sample(rng, n)), 1.0)
        corner = rng.integers(0, 3, n).astype(float)
        return np.column_stack([r, corner])

    def cap_sizes(self, sizes, cap):
        out = sizes.copy()
        out[:, 0] = np.minimum(out[:, 0], cap)
        return out

    def d1_of_sizes(self, sizes):
        return sizes[:, 0]

    def legs(self, r):
        """Legs (a, b) with a^2 + b^2 = r^2 and a b = r^(1+beta) / 2."""
        r = np.asarray(r, dtype=float)
        s_plus = np.sqrt(r ** 2 + r ** (1.0 + self.beta))
        s_minus = np.sqrt(np.maximum(r ** 2 - r ** (1.0 + self.beta), 0.0))
        return (s_plus + s_minus) / 2.0, (s_plus - s_minus) / 2.0

    def diameter_lengths(self, sizes):
        r = sizes[:, 0]
        height = 0.5 * r ** self.beta
        return np.column_stack([r, height])

    def local_vertices(self, r, corner):
        a, b = self.legs(r)
        verts = np.array([[0.0, 0.0], [a, 0.0], [0.0, b]])
        return verts - verts[int(corner)]

    def build_batch(self, sizes, rotations):
        n = sizes.shape[0]
        tri = np.empty((n, 3, 2))
        a, b = self.legs(sizes[:, 0])
        base = np.zeros((n, 3, 2))
        base[:, 1, 0] = a
        base[:, 2, 1] = b
        idx = sizes[:, 1].astype(np.int64)
        anchor = base[np.arange(n), idx]
        tri = base - anchor[:, None, :]
        return "triangle", np.column_stack([a, b]), tri

    def grain_from(self, sizes_row, rotation):
        verts = self.local_vertices(sizes_row[0], sizes_row[1])
        return VertexPolytope(verts, rotation=rotation)


@dataclass(frozen=True)
class BoxFamily(GrainFamily):
    """Boxes with k heavy sides of a common random length and d-k thin
    sides of fixed length."""

    d: int
    k_heavy: int
    law: TailLaw
    thin: float = 0.2
    eps_interior: float = 0.05

    def __post_init__(self):
        if not (1 <= self.k_heavy <= self.d):
            raise ValueError("k_heavy must be in 1..d")
        if self.thin < 2 * self.eps_interior:
            raise ValueError("thin side must be at least 2 * eps_interior")
        if self.law.minimum < self.thin:
            raise ValueError("heavy side law must dominate the thin side")

    def tail_indices(self):
        return [self.law.alpha] * self.k_heavy \
            + [math.inf] * (self.d - self.k_heavy)

    def moment_flags(self):
        return (self.law.moment_finite(self.k_heavy),
                self.law.moment_finite(2 * self.k_heavy),
                self.law.moment_finite(self.d))

    def _diag(self, v):
        return np.sqrt(self.k_heavy * v ** 2
                       + (self.d - self.k_heavy) * self.thin ** 2)

    def d1_min(self):
        return float(self._diag(self.law.minimum))

    def d1_isf(self, q):
        return float(self._diag(self.law.isf(q)))

    def sample_sizes(self, n, rng):
        return np.asarray(self.law.sample(rng, n)).reshape(n, 1)

    def cap_sizes(self, sizes, cap):
        extra = (self.d - self.k_heavy) * self.thin ** 2
        if cap ** 2 <= extra:
            raise ValueError("truncation cap below the family minimum")
        vmax = math.sqrt((cap ** 2 - extra) / self.k_heavy)
        return np.minimum(sizes, vmax)

    def d1_of_sizes(self, sizes):
        return self._diag(sizes[:, 0])

    def diameter_lengths(self, sizes):
        raise NotImplementedError(
            "box diameters need corner enumeration; use diameter_sequence")

    def _half(self, sizes):
        n = sizes.shape[0]
        half = np.empty((n, self.d))
        half[:, :self.k_heavy] = sizes[:, :1] / 2.0
        half[:, self.k_heavy:] = self.thin / 2.0
        return _floor(half, self.eps_interior)

    def build_batch(self, sizes, rotations):
        return "box", self._half(sizes), None

    def grain_from(self, sizes_row, rotation):
        half = self._half(sizes_row.reshape(1, -1))[0]
        return OrientedBox(half, rotation=rotation)


def sample_size_and_rotation_batch(family: GrainFamily, n, rng: SeededRng,
                                   cap=None, resample=False):
    """Draw sizes then rotations for n grains, honouring the truncation.

    Draw order (documented for reproducibility): all sizes first, then all
    rotations; with `resample`, offending rows redraw their sizes in
    rounds before rotations are drawn.
    """
    sizes = family.sample_sizes(n, rng)
    if cap is not None:
        family.validate_cap(cap)
        if resample:
            for _ in range(1000):
                bad = family.d1_of_sizes(sizes) > cap
                if not np.any(bad):
                    break
                sizes[bad] = family.sample_sizes(int(bad.sum()), rng)
            else:
                raise ValueError("resampling under the cap did not terminate")
        else:
            sizes = family.cap_sizes(sizes, cap)
    rotations = haar_rotations(n, family.d, rng)
    return sizes, rotations
