"""Marked Poisson process in a finite window, with Palm insertion, size
truncation, and a size-layered spatial index.

Heavy tails make the untruncated model unobservable in a finite window:
a far-away giant grain could always reach in.  Sampling therefore happens
in a window enlarged by a margin (half the size cap, or half the 1-1e-6
quantile of the first diameter when no cap is set), and the applied cap is
recorded so the bias stays visible.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._pack import (KIND_BOX, KIND_CROSS, KIND_ELLIPSOID, KIND_POLYTOPE,
                    GrainArray)
from .geometry import DiameterSequence, diameter_sequence
from .grains import GrainFamily, sample_size_and_rotation_batch
from .rng import SeededRng

MARGIN_TAIL_Q = 1e-6


@dataclass(frozen=True)
class Window:
    """Axis-aligned observation window [lower, upper]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("window corners must be matching vectors")
        if np.any(hi <= lo):
            raise ValueError("window must have positive extent on every axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, side, d):
        return cls(np.zeros(d), np.full(d, float(side)))

    @property
    def d(self):
        return self.lower.shape[0]

    @property
    def volume(self):
        return float(np.prod(self.upper - self.lower))

    @property
    def center(self):
        return (self.lower + self.upper) / 2.0

    @property
    def diagonal(self):
        return float(np.linalg.norm(self.upper - self.lower))

    def enlarged(self, margin):
        return Window(self.lower - margin, self.upper + margin)

    def contains_point(self, p):
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))


@dataclass(frozen=True)
class TruncationPolicy:
    """Hard cap on the first diameter; clamp by default, resample on demand."""

    cap: float | None = None
    resample: bool = False

    def __post_init__(self):
        if self.cap is not None and self.cap <= 0:
            raise ValueError("cap must be positive")


@dataclass
class MarkedPoint:
    """View of one process point: location, grain, Palm flag."""

    id: int
    location: np.ndarray
    grain: object
    palm: bool

    @cached_property
    def diameters(self) -> DiameterSequence:
        g = self.grain
        if g.kind == "ellipsoid":
            return DiameterSequence(lengths=2.0 * g.semi_axes,
                                    orientations=g.rotation.matrix.copy())
        if g.kind == "cross":
            return DiameterSequence(lengths=2.0 * g.half_diameters,
                                    orientations=g.rotation.matrix.copy())
        return diameter_sequence(g)


class Configuration:
    """A realised marked point set: array-backed, immutable by convention."""

    def __init__(self, window, u, grains: GrainArray, palm, truncation,
                 margin):
        self.window = window
        self.u = float(u)
        self.grains = grains
        self.palm = np.asarray(palm, dtype=bool)
        self.truncation = truncation
        self.margin = float(margin)
        if self.palm.shape[0] != grains.n:
            raise ValueError("palm flag count mismatch")

    @property
    def n(self):
        return self.grains.n

    def __len__(self):
        return self.n

    @property
    def d(self):
        return self.grains.d

    @property
    def locations(self):
        return self.grains.center

    @cached_property
    def bounding_radii(self):
        return self.grains.bounding_radii()

    def point(self, i) -> MarkedPoint:
        if not (0 <= i < self.n):
            raise IndexError(f"point id {i} out of range")
        return MarkedPoint(id=i, location=self.grains.center[i],
                           grain=self.grains.body(i), palm=bool(self.palm[i]))

    def points(self):
        return (self.point(i) for i in range(self.n))

    def palm_ids(self):
        return np.flatnonzero(self.palm)

    @classmethod
    def from_bodies(cls, window, bodies, palm=None, u=0.0, truncation=None,
                    margin=0.0):
        """Hand-built configuration (bodies already placed in the world)."""
        ga = GrainArray.from_bodies(list(bodies))
        palm = np.zeros(ga.n, dtype=bool) if palm is None \
            else np.asarray(palm, dtype=bool)
        return cls(window, u, ga, palm, truncation or TruncationPolicy(),
                   margin)

    # --- serialization ---------------------------------------------------
    _KIND_NAMES = {KIND_BOX: "box", KIND_ELLIPSOID: "ellipsoid",
                   KIND_CROSS: "cross", KIND_POLYTOPE: "polytope"}

    def to_jsonl(self, path):
        """One JSON object per point, after one metadata line."""
        with open(path, "w") as fh:
            meta = {"meta": {
                "d": self.d, "u": self.u,
                "window": [self.window.lower.tolist(),
                           self.window.upper.tolist()],
                "margin": self.margin,
                "cap": self.truncation.cap,
                "resample": self.truncation.resample,
            }}
            fh.write(json.dumps(meta, sort_keys=True) + "\n")
            ga = self.grains
            for i in range(self.n):
                kind = self._KIND_NAMES[int(ga.kind[i])]
                rec = {
                    "id": i,
                    "location": ga.center[i].tolist(),
                    "kind": kind,
                    "size": ga.size[i].tolist(),
                    "rotation": ga.rot[i].tolist(),
                    "palm": bool(self.palm[i]),
                }
                if kind == "polytope":
                    rec["vertices"] = \
                        ga.vp_verts[ga.vp_off[i]:ga.vp_off[i + 1]].tolist()
                fh.write(json.dumps(rec, sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, path):
        with open(path) as fh:
            meta = json.loads(fh.readline())["meta"]
            records = [json.loads(line) for line in fh if line.strip()]
        d = meta["d"]
        n = len(records)
        kind = np.empty(n, dtype=np.uint8)
        center = np.empty((n, d))
        size = np.zeros((n, d))
        rot = np.empty((n, d, d))
        palm = np.zeros(n, dtype=bool)
        offs = [0]
        verts = []
        name_to_code = {v: k for k, v in cls._KIND_NAMES.items()}
        for rec in records:
            i = rec["id"]
            kind[i] = name_to_code[rec["kind"]]
            center[i] = rec["location"]
            size[i, :len(rec["size"])] = rec["size"]
            rot[i] = rec["rotation"]
            palm[i] = rec["palm"]
        for rec in sorted(records, key=lambda r: r["id"]):
            if rec["kind"] == "polytope":
                verts.append(np.asarray(rec["vertices"], dtype=float))
                offs.append(offs[-1] + len(rec["vertices"]))
            else:
                offs.append(offs[-1])
        ga = GrainArray(kind=kind, center=center, size=size, rot=rot,
                        vp_off=np.asarray(offs, dtype=np.int64),
                        vp_verts=(np.concatenate(verts, axis=0) if verts
                                  else np.empty((0, d))))
        window = Window(np.asarray(meta["window"][0]),
                        np.asarray(meta["window"][1]))
        trunc = TruncationPolicy(cap=meta["cap"], resample=meta["resample"])
        return cls(window, meta["u"], ga, palm, trunc, meta["margin"])


def sample_configuration(window: Window, u, family: GrainFamily,
                         trunc: TruncationPolicy | None = None,
                         palm_locations=(), rng: SeededRng | None = None,
                         margin_override=None) -> Configuration:
    """Sample the marked process in the margin-enlarged window.

    Draw order is fixed for reproducibility: Poisson count, locations,
    grain sizes, rotations, then one (sizes, rotation) block per Palm
    point.  Palm points are appended after the Poisson points and are
    never removed by truncation.
    """
    if u < 0:
        raise ValueError("intensity u must be nonnegative")
    if rng is None:
        raise ValueError("an explicit SeededRng is required")
    trunc = trunc or TruncationPolicy()
    cap = trunc.cap
    if cap is not None:
        family.validate_cap(cap)
        margin = cap / 2.0
    else:
        margin = family.d1_isf(MARGIN_TAIL_Q) / 2.0
    if margin_override is not None:
        margin = float(margin_override)
    if not math.isfinite(margin):
        raise ValueError("margin is not finite; set a truncation cap")
    d = family.d
    if window.d != d:
        raise ValueError("window dimension does not match the family")
    for p in palm_locations:
        if not window.contains_point(p):
            raise ValueError("palm locations must lie inside the window")

    enlarged = window.enlarged(margin)
    lam = u * enlarged.volume
    n = rng.poisson(lam) if lam > 0 else 0
    span = enlarged.upper - enlarged.lower
    locs = enlarged.lower + rng.random((n, d)) * span
    sizes, rots = sample_size_and_rotation_batch(family, n, rng, cap=cap,
                                                 resample=trunc.resample)
    kind_name, params, tri = family.build_batch(sizes, rots)
    parts = [GrainArray.build(kind_name, params, rots, centers=locs, tri=tri)]
    palm_flags = [np.zeros(n, dtype=bool)]
    for p in palm_locations:
        s1, r1 = sample_size_and_rotation_batch(family, 1, rng, cap=cap,
                                                resample=trunc.resample)
        kn, pp, tt = family.build_batch(s1, r1)
        parts.append(GrainArray.build(kn, pp, r1,
                                      centers=np.asarray([p], dtype=float),
                                      tri=tt))
        palm_flags.append(np.ones(1, dtype=bool))
    ga = GrainArray.concatenate(parts)
    return Configuration(window, u, ga, np.concatenate(palm_flags), trunc,
                         margin)


# ---------------------------------------------------------------------------
# layered spatial index
# ---------------------------------------------------------------------------

class LayeredGrid:
    """Dyadic size-layered uniform grids over grain bounding spheres.

    Layer j has cell side 2^j and holds ids whose bounding-sphere radius
    lies in [2^(j-1), 2^j); each id registers in every cell of its layer
    that its bounding sphere overlaps.
    """

    def __init__(self, centers, radii):
        self.centers = np.asarray(centers, dtype=float)
        self.radii = np.asarray(radii, dtype=float)
        self.layers: dict[int, dict[tuple, list]] = {}
        for i in range(self.centers.shape[0]):
            r = self.radii[i]
            if r <= 0:
                raise ValueError("bounding radii must be positive")
            j = int(math.floor(math.log2(r))) + 1
            cells = self.layers.setdefault(j, {})
            for key in self._sphere_cells(self.centers[i], r, j):
                cells.setdefault(key, []).append(i)

    @staticmethod
    def _sphere_cells(c, r, j):
        cs = 2.0 ** j
        lo = np.floor((c - r) / cs).astype(np.int64)
        hi = np.floor((c + r) / cs).astype(np.int64)
        return itertools.product(*(range(a, b + 1) for a, b in zip(lo, hi)))

    def layer_of(self, i):
        return int(math.floor(math.log2(self.radii[i]))) + 1

    def query_sphere(self, center, radius):
        """Ids whose bounding sphere meets the given sphere (exact at the
        sphere level: a superset of truly intersecting grains)."""
        c = np.asarray(center, dtype=float)
        out = set()
        for j, cells in self.layers.items():
            for key in self._sphere_cells(c, radius, j):
                bucket = cells.get(key)
                if bucket:
                    out.update(bucket)
        if not out:
            return []
        ids = np.fromiter(out, dtype=np.int64)
        keep = np.linalg.norm(self.centers[ids] - c, axis=1) \
            <= self.radii[ids] + radius
        return sorted(int(i) for i in ids[keep])

    def query_candidates(self, probe):
        """Candidate ids for a probe body, by bounding spheres."""
        return self.query_sphere(probe.center, probe.bounding_radius())


def build_index(config: Configuration) -> LayeredGrid:
    return LayeredGrid(config.locations, config.bounding_radii)
