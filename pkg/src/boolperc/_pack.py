"""Packed array representation of grain collections.

The object API (ConvexBody) is convenient but too heavy for millions of
grains; kernels operate on flat arrays instead.  Kind codes: 0 box,
1 ellipsoid, 2 cross-polytope, 3 vertex polytope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (CrossPolytope, Ellipsoid, OrientedBox, Rotation,
                       VertexPolytope)

KIND_BOX = 0
KIND_ELLIPSOID = 1
KIND_CROSS = 2
KIND_POLYTOPE = 3

_KIND_BY_NAME = {"box": KIND_BOX, "ellipsoid": KIND_ELLIPSOID,
                 "cross": KIND_CROSS, "polytope": KIND_POLYTOPE,
                 "triangle": KIND_POLYTOPE}


@dataclass
class GrainArray:
    """Flat per-grain arrays; vertex polytopes carry a CSR vertex table."""

    kind: np.ndarray      # (n,) uint8
    center: np.ndarray    # (n, d)
    size: np.ndarray      # (n, d) semi-axes / half-sides; informational for vp
    rot: np.ndarray       # (n, d, d)
    vp_off: np.ndarray    # (n+1,) int64 offsets into vp_verts
    vp_verts: np.ndarray  # (m, d) local vertices for vp grains

    @property
    def n(self):
        return self.kind.shape[0]

    @property
    def d(self):
        return self.center.shape[1]

    @classmethod
    def empty(cls, d):
        return cls(kind=np.empty(0, dtype=np.uint8),
                   center=np.empty((0, d)), size=np.empty((0, d)),
                   rot=np.empty((0, d, d)),
                   vp_off=np.zeros(1, dtype=np.int64),
                   vp_verts=np.empty((0, d)))

    @classmethod
    def build(cls, kind_name, size, rot, centers=None, tri=None):
        """Pack one homogeneous batch produced by a grain family."""
        n, d = size.shape[0], rot.shape[1]
        code = _KIND_BY_NAME[kind_name]
        kind = np.full(n, code, dtype=np.uint8)
        center = np.zeros((n, d)) if centers is None else np.asarray(centers,
                                                                     dtype=float)
        sz = np.zeros((n, d))
        sz[:, :size.shape[1]] = size
        if code == KIND_POLYTOPE:
            if tri is None:
                raise ValueError("vertex polytopes need explicit vertices")
            counts = np.full(n, tri.shape[1], dtype=np.int64)
            vp_off = np.concatenate([[0], np.cumsum(counts)])
            vp_verts = tri.reshape(-1, d)
        else:
            vp_off = np.zeros(n + 1, dtype=np.int64)
            vp_verts = np.empty((0, d))
        return cls(kind=kind, center=center, size=sz, rot=np.ascontiguousarray(rot),
                   vp_off=vp_off, vp_verts=vp_verts)

    @classmethod
    def from_bodies(cls, bodies):
        if not bodies:
            raise ValueError("need at least one body")
        d = bodies[0].d
        n = len(bodies)
        kind = np.empty(n, dtype=np.uint8)
        center = np.empty((n, d))
        size = np.zeros((n, d))
        rot = np.empty((n, d, d))
        offs = [0]
        verts = []
        for i, b in enumerate(bodies):
            center[i] = b.center
            rot[i] = b.rotation.matrix
            if isinstance(b, OrientedBox):
                kind[i] = KIND_BOX
                size[i] = b.half_sides
            elif isinstance(b, Ellipsoid):
                kind[i] = KIND_ELLIPSOID
                size[i] = b.semi_axes
            elif isinstance(b, CrossPolytope):
                kind[i] = KIND_CROSS
                size[i] = b.half_diameters
            elif isinstance(b, VertexPolytope):
                kind[i] = KIND_POLYTOPE
                verts.append(b.local_vertices())
            else:
                raise TypeError(f"unsupported body {type(b)!r}")
            offs.append(offs[-1] + (len(verts[-1]) if kind[i] == KIND_POLYTOPE
                                    else 0))
        vp_off = np.asarray(offs, dtype=np.int64)
        vp_verts = np.concatenate(verts, axis=0) if verts else np.empty((0, d))
        return cls(kind=kind, center=center, size=size, rot=rot,
                   vp_off=vp_off, vp_verts=vp_verts)

    def body(self, i):
        kind = int(self.kind[i])
        rot = Rotation(self.rot[i])
        if kind == KIND_BOX:
            return OrientedBox(self.size[i], self.center[i], rot)
        if kind == KIND_ELLIPSOID:
            return Ellipsoid(self.size[i], self.center[i], rot)
        if kind == KIND_CROSS:
            return CrossPolytope(self.size[i], self.center[i], rot)
        verts = self.vp_verts[self.vp_off[i]:self.vp_off[i + 1]]
        return VertexPolytope(verts, self.center[i], rot)

    def bodies(self):
        return [self.body(i) for i in range(self.n)]

    def bounding_radii(self):
        r = np.empty(self.n)
        for code, expr in ((KIND_BOX, lambda m: np.linalg.norm(self.size[m],
                                                               axis=1)),
                           (KIND_ELLIPSOID, lambda m: self.size[m, 0]),
                           (KIND_CROSS, lambda m: self.size[m, 0])):
            mask = self.kind == code
            if np.any(mask):
                r[mask] = expr(mask)
        mask = self.kind == KIND_POLYTOPE
        if np.any(mask):
            norms = np.linalg.norm(self.vp_verts, axis=1)
            for i in np.flatnonzero(mask):
                r[i] = norms[self.vp_off[i]:self.vp_off[i + 1]].max()
        return r

    def capsules(self):
        """Covering capsules: (axis half-length, transversal radius).

        Every grain lies inside the capsule around the segment of
        half-length seg along its first local axis, inflated by trans.
        Vertex polytopes fall back to their bounding sphere (seg = 0).
        """
        n, d = self.n, self.d
        seg = np.zeros(n)
        trans = np.zeros(n)
        radii = self.bounding_radii()
        for code in (KIND_BOX, KIND_CROSS):
            mask = self.kind == code
            if np.any(mask):
                seg[mask] = self.size[mask, 0]
                trans[mask] = np.linalg.norm(self.size[mask][:, 1:], axis=1)
        mask = self.kind == KIND_ELLIPSOID
        if np.any(mask):
            seg[mask] = self.size[mask, 0]
            trans[mask] = self.size[mask, 1] if d > 1 else 0.0
        mask = self.kind == KIND_POLYTOPE
        if np.any(mask):
            seg[mask] = 0.0
            trans[mask] = radii[mask]
        return seg, trans

    def aabbs(self):
        """Exact axis-aligned bounding boxes: (lo, hi), each (n, d)."""
        half = np.empty((self.n, self.d))
        mask = self.kind == KIND_BOX
        if np.any(mask):
            half[mask] = np.einsum("nij,nj->ni", np.abs(self.rot[mask]),
                                   self.size[mask])
        mask = self.kind == KIND_ELLIPSOID
        if np.any(mask):
            half[mask] = np.sqrt(np.einsum("nij,nj->ni", self.rot[mask] ** 2,
                                           self.size[mask] ** 2))
        mask = self.kind == KIND_CROSS
        if np.any(mask):
            half[mask] = np.max(np.abs(self.rot[mask])
                                * self.size[mask][:, None, :], axis=2)
        lo = self.center - half
        hi = self.center + half
        mask = self.kind == KIND_POLYTOPE
        if np.any(mask):
            for i in np.flatnonzero(mask):
                w = self.vp_verts[self.vp_off[i]:self.vp_off[i + 1]] \
                    @ self.rot[i].T + self.center[i]
                lo[i] = np.min(w, axis=0)
                hi[i] = np.max(w, axis=0)
        return lo, hi

    def subset(self, idx):
        idx = np.asarray(idx)
        counts = (self.vp_off[1:] - self.vp_off[:-1])[idx]
        vp_off = np.concatenate([[0], np.cumsum(counts)])
        chunks = [self.vp_verts[self.vp_off[i]:self.vp_off[i + 1]]
                  for i in idx] or [np.empty((0, self.d))]
        return GrainArray(kind=self.kind[idx], center=self.center[idx],
                          size=self.size[idx], rot=self.rot[idx],
                          vp_off=vp_off,
                          vp_verts=np.concatenate(chunks, axis=0))

    @classmethod
    def concatenate(cls, parts):
        parts = [p for p in parts if p.n > 0] or parts[:1]
        d = parts[0].d
        offs = [np.zeros(1, dtype=np.int64)]
        total = 0
        for p in parts:
            offs.append(p.vp_off[1:] + total)
            total += p.vp_off[-1]
        return cls(kind=np.concatenate([p.kind for p in parts]),
                   center=np.concatenate([p.center for p in parts]),
                   size=np.concatenate([p.size for p in parts]),
                   rot=np.concatenate([p.rot for p in parts]),
                   vp_off=np.concatenate(offs),
                   vp_verts=np.concatenate([p.vp_verts for p in parts]
                                           or [np.empty((0, d))]))
