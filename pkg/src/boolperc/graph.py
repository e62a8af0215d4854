"""Intersection graph over a configuration, chemical distances, connected
components, and the finite-window percolation proxy.

Two broad phases feed the same exact predicate: the spec'd layered grid
(any dimension), and a capsule-rasterised dense grid for large planar
configurations.  Both produce identical edge sets; the fast path exists
because heavy-tailed grain sizes blow up bounding-sphere candidate lists
while true neighbourhoods stay near-linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import OrientedBox, PredicateConvergenceError
from .pointprocess import Configuration, LayeredGrid, build_index
from .rng import SeededRng

_FAST_PATH_MIN_POINTS = 1500
_GRID_CELL_LIMIT = 80_000_000


@dataclass
class ComponentLabels:
    labels: np.ndarray  # (n,) consecutive component ids
    sizes: np.ndarray   # (k,) size per component id

    @property
    def count(self):
        return self.sizes.shape[0]


class IntersectionGraph:
    """CSR adjacency with sorted neighbour lists; ids mirror the config."""

    def __init__(self, n, edge_i, edge_j):
        self.n = int(n)
        ei = np.asarray(edge_i, dtype=np.int64)
        ej = np.asarray(edge_j, dtype=np.int64)
        if np.any(ei == ej):
            raise ValueError("self loops are not allowed")
        lo = np.minimum(ei, ej)
        hi = np.maximum(ei, ej)
        keys = np.unique(lo * self.n + hi) if lo.size else lo.astype(np.int64)
        self._edge_lo = (keys // self.n).astype(np.int64)
        self._edge_hi = (keys % self.n).astype(np.int64)
        both = np.concatenate([self._edge_lo * self.n + self._edge_hi,
                               self._edge_hi * self.n + self._edge_lo])
        both.sort()
        self.indices = (both % self.n).astype(np.int32)
        starts = both // self.n
        counts = np.bincount(starts, minlength=self.n) if both.size \
            else np.zeros(self.n, dtype=np.int64)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    @property
    def edge_count(self):
        return self._edge_lo.shape[0]

    def neighbors(self, i):
        self._check_id(i)
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def degree(self, i):
        self._check_id(i)
        return int(self.indptr[i + 1] - self.indptr[i])

    def edges(self):
        return self._edge_lo, self._edge_hi

    def _check_id(self, i):
        if not (0 <= i < self.n):
            raise ValueError(f"invalid point id {i}")

    def to_edgelist(self, path):
        """Sorted 'i j' pairs, one per line."""
        with open(path, "w") as fh:
            for a, b in zip(self._edge_lo, self._edge_hi):
                fh.write(f"{a} {b}\n")

    @classmethod
    def from_edgelist(cls, path, n):
        pairs = np.loadtxt(path, dtype=np.int64, ndmin=2)
        if pairs.size == 0:
            pairs = np.empty((0, 2), dtype=np.int64)
        return cls(n, pairs[:, 0], pairs[:, 1])


def _predicate_pairs(config, ei, ej, tol, need_dist=False):
    """Run the exact support-function predicate on candidate pairs."""
    ga = config.grains
    if ei.size == 0:
        empty = np.empty(0)
        return empty, empty.copy(), np.empty(0, dtype=np.uint8)
    kernel = _kernels.gjk_pairs2 if ga.d == 2 else _kernels.gjk_pairs
    lo, hi, err = kernel(
        ga.kind, ga.center, ga.size, ga.rot, ga.vp_off, ga.vp_verts,
        config.bounding_radii, ei.astype(np.int64), ej.astype(np.int64),
        float(tol), need_dist)
    if np.any(err):
        bad = int(np.flatnonzero(err)[0])
        raise PredicateConvergenceError(
            f"predicate did not converge for pair "
            f"({int(ei[bad])}, {int(ej[bad])})")
    return lo, hi, err


def _layered_candidate_pairs(config, index: LayeredGrid):
    ei, ej = [], []
    radii = config.bounding_radii
    locs = config.locations
    for i in range(config.n):
        for j in index.query_sphere(locs[i], radii[i]):
            if j > i:
                ei.append(i)
                ej.append(j)
    return np.asarray(ei, dtype=np.int64), np.asarray(ej, dtype=np.int64)


def _inner_capsules(ga):
    """Per-grain capsules certified inside the grain (radius 0 if none).

    Mirrors the per-kind formulas used by the pair kernels; both sides
    only ever certify true containment, so accepts stay sound.
    """
    from ._pack import KIND_BOX, KIND_CROSS, KIND_ELLIPSOID
    a = ga.size[:, 0]
    b = ga.size[:, 1]
    iseg = np.zeros(ga.n)
    irad = np.zeros(ga.n)
    mask = ga.kind == KIND_ELLIPSOID
    if np.any(mask):
        span = (a[mask] ** 2 - b[mask] ** 2) / a[mask]
        iseg[mask] = 0.9 * span
        irad[mask] = b[mask] * np.sqrt(
            1.0 - 0.81 * (a[mask] ** 2 - b[mask] ** 2) / a[mask] ** 2)
    mask = ga.kind == KIND_BOX
    if np.any(mask):
        iseg[mask] = np.maximum(a[mask] - b[mask], 0.0)
        irad[mask] = b[mask]
    mask = ga.kind == KIND_CROSS
    if np.any(mask):
        iseg[mask] = 0.5 * a[mask]
        irad[mask] = 0.5 * a[mask] * b[mask] \
            / np.sqrt(a[mask] ** 2 + b[mask] ** 2)
    return iseg, irad


def _grid2d_build(config, tol):
    """Fused planar pipeline: rasterised grid, prefilters, predicate."""
    ga = config.grains
    n = ga.n
    center = np.ascontiguousarray(ga.center)
    seg, trans = ga.capsules()
    reg_pad = max(1e-6, 10.0 * tol)
    trans_reg = trans + reg_pad
    axis = np.ascontiguousarray(ga.rot[:, :, 0])
    brad = config.bounding_radii
    iseg, irad = _inner_capsules(ga)

    med = float(np.median(brad)) if n else 1.0
    cs = max(2.0 * med, 1e-6)
    ext = seg + trans_reg
    lo = (center - ext[:, None]).min(axis=0)
    hi = (center + ext[:, None]).max(axis=0)
    while True:
        gx0 = int(math.floor(lo[0] / cs)) - 1
        gy0 = int(math.floor(lo[1] / cs)) - 1
        nx = int(math.floor(hi[0] / cs)) - gx0 + 2
        ny = int(math.floor(hi[1] / cs)) - gy0 + 2
        if nx * ny <= _GRID_CELL_LIMIT:
            break
        cs *= 2.0

    cell_ptr, cell_items = _kernels.grid_fill(center, axis, seg, trans_reg,
                                              cs, gx0, gy0, nx, ny)
    ncell = nx * ny
    nslab = max(1, min(96, ncell // 4096 + 1))
    bounds = np.linspace(0, ncell, nslab + 1).astype(np.int64)
    cap_guess = max(1024, int(8 * max(n // nslab, 1)))
    buf_i = np.empty(cap_guess, dtype=np.int32)
    buf_j = np.empty(cap_guess, dtype=np.int32)
    keys = []
    for s in range(nslab):
        cnt, errcode = _kernels.edges_slab(
            cell_ptr, cell_items, bounds[s], bounds[s + 1],
            ga.kind, center, ga.size, ga.rot, ga.vp_off, ga.vp_verts,
            axis, seg, trans, iseg, irad, brad, float(tol), buf_i, buf_j)
        if errcode:
            g1, g2 = divmod(int(errcode) - 1, 2 ** 31)
            raise PredicateConvergenceError(
                f"predicate did not converge for pair ({g1}, {g2})")
        if cnt > buf_i.shape[0]:
            buf_i = np.empty(cnt + 1024, dtype=np.int32)
            buf_j = np.empty(cnt + 1024, dtype=np.int32)
            cnt, errcode = _kernels.edges_slab(
                cell_ptr, cell_items, bounds[s], bounds[s + 1],
                ga.kind, center, ga.size, ga.rot, ga.vp_off, ga.vp_verts,
                axis, seg, trans, iseg, irad, brad, float(tol), buf_i, buf_j)
        if cnt:
            k = buf_i[:cnt].astype(np.int64) * n + buf_j[:cnt]
            keys.append(np.unique(k))
    if not keys:
        return (np.empty(0, dtype=np.int64),) * 2
    allk = np.unique(np.concatenate(keys))
    return allk // n, allk % n


def build_graph(config: Configuration, index: LayeredGrid | None = None,
                tol=1e-9, method="auto") -> IntersectionGraph:
    """Edge (i, j) iff the grains intersect within tol.

    Candidates come from the layered index (or, for large planar
    configurations, an edge-equivalent capsule grid); the exact
    support-function predicate decides every edge.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = config.n
    if n == 0:
        return IntersectionGraph(0, np.empty(0, dtype=np.int64),
                                 np.empty(0, dtype=np.int64))
    if method == "auto":
        use_fast = (config.d == 2 and index is None
                    and n >= _FAST_PATH_MIN_POINTS)
    else:
        use_fast = method == "grid2d"
    if use_fast:
        ei, ej = _grid2d_build(config, tol)
        return IntersectionGraph(n, ei, ej)
    index = index if index is not None else build_index(config)
    ei, ej = _layered_candidate_pairs(config, index)
    lo, hi, _ = _predicate_pairs(config, ei, ej, tol, need_dist=False)
    accept = np.isfinite(hi) & (hi <= tol)
    return IntersectionGraph(n, ei[accept], ej[accept])


def chemical_distance(graph: IntersectionGraph, a, b):
    """Edge count of the shortest path, or None across components."""
    graph._check_id(a)
    graph._check_id(b)
    if a == b:
        return 0
    dist = _kernels.bfs_distance(graph.indptr, graph.indices,
                                 np.int64(a), np.int64(b))
    return None if dist < 0 else int(dist)


def bfs_levels(graph: IntersectionGraph, src):
    graph._check_id(src)
    return _kernels.bfs_levels(graph.indptr, graph.indices, np.int64(src))


def components(graph: IntersectionGraph) -> ComponentLabels:
    """Union-find component labelling with sizes."""
    ei, ej = graph.edges()
    roots = _kernels.union_find_labels(graph.n, ei, ej)
    if graph.n == 0:
        return ComponentLabels(labels=np.empty(0, dtype=np.int64),
                               sizes=np.empty(0, dtype=np.int64))
    uniq, labels = np.unique(roots, return_inverse=True)
    sizes = np.bincount(labels, minlength=uniq.shape[0]).astype(np.int64)
    return ComponentLabels(labels=labels.astype(np.int64), sizes=sizes)


def boundary_touching(config: Configuration, tol=1e-9):
    """Per-grain flag: does the grain intersect the window boundary?

    True iff the grain meets the closed window but is not strictly inside
    it; the axis-aligned extents decide containment exactly, the
    support-function predicate confirms the overlap.
    """
    ga = config.grains
    lo, hi = ga.aabbs()
    wlo, whi = config.window.lower, config.window.upper
    inside = np.all(lo > wlo, axis=1) & np.all(hi < whi, axis=1)
    overlap = np.all(lo <= whi + tol, axis=1) & np.all(hi >= wlo - tol, axis=1)
    cand = np.flatnonzero(overlap & ~inside)
    out = np.zeros(config.n, dtype=bool)
    if cand.size == 0:
        return out
    box = OrientedBox((whi - wlo) / 2.0, center=(wlo + whi) / 2.0)
    from ._pack import GrainArray
    merged = GrainArray.concatenate([config.grains,
                                     GrainArray.from_bodies([box])])
    radii = np.concatenate([config.bounding_radii,
                            [box.bounding_radius()]])
    kernel = _kernels.gjk_pairs2 if merged.d == 2 else _kernels.gjk_pairs
    lo_d, hi_d, err = kernel(
        merged.kind, merged.center, merged.size, merged.rot, merged.vp_off,
        merged.vp_verts, radii, cand.astype(np.int64),
        np.full(cand.shape[0], config.n, dtype=np.int64), float(tol), False)
    if np.any(err):
        raise PredicateConvergenceError("window-boundary predicate failed")
    out[cand] = np.isfinite(hi_d) & (hi_d <= tol)
    return out


@dataclass
class ThetaEstimate:
    value: float
    stderr: float
    replicas: int
    indicators: tuple


def center_reaches_boundary(config: Configuration, graph=None, tol=1e-9):
    """Does the first Palm point's component touch the window boundary?"""
    palm = config.palm_ids()
    if palm.size == 0:
        raise ValueError("configuration has no Palm point")
    graph = graph if graph is not None else build_graph(config, tol=tol)
    labels = components(graph).labels
    touch = boundary_touching(config, tol=tol)
    if not np.any(touch):
        return False
    return bool(np.any(labels[touch] == labels[palm[0]]))


def theta_hat(window, u, family, trunc, replicas, rng: SeededRng,
              tol=1e-9) -> ThetaEstimate:
    """Finite-window percolation proxy with binomial standard error.

    Fraction of replicas in which the Palm point at the window centre
    lies in a component containing a grain that meets the window
    boundary.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    from .pointprocess import sample_configuration
    hits = []
    for r in range(replicas):
        sub = rng.substream(r)
        config = sample_configuration(window, u, family, trunc,
                                      palm_locations=[window.center], rng=sub)
        hits.append(center_reaches_boundary(config, tol=tol))
    theta = float(np.mean(hits))
    stderr = math.sqrt(theta * (1.0 - theta) / replicas)
    return ThetaEstimate(value=theta, stderr=stderr, replicas=replicas,
                         indicators=tuple(bool(h) for h in hits))
