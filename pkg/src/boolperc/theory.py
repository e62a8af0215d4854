"""Closed-form scaling quantities and path-event machinery.

Covers the tail-exponent set M, the dominating index kappa with its
log-log distance prefactor, the regime trichotomy, doubly exponential
threshold ladders, angular admissible sectors, tangent-plane shadow
regions, and a greedy checker for the ladder path events.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ProjectedRegion, distance_to_point_set
from .geometry.diameters import hyperplane_directions
from .pointprocess import Configuration, LayeredGrid, MarkedPoint


@dataclass(frozen=True)
class ModelExponents:
    """Tail indices alpha_1 <= ... <= alpha_d (use inf for bounded)."""

    d: int
    alpha: tuple

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("d must be >= 2")
        a = tuple(float(x) for x in self.alpha)
        if len(a) != self.d:
            raise ValueError("need one exponent per dimension")
        if any(x <= 0 for x in a):
            raise ValueError("tail indices must be positive")
        if any(x > y for x, y in zip(a, a[1:])):
            raise ValueError("tail indices must be nondecreasing")
        object.__setattr__(self, "alpha", a)


def robust_set_M(exp: ModelExponents):
    """Indices k in 1..d-1 with alpha_k strictly inside (k, min(2k, d))."""
    out = []
    for k in range(1, exp.d):
        a = exp.alpha[k - 1]
        if k < a < min(2 * k, exp.d):
            out.append(k)
    return frozenset(out)


def _ratio(exp: ModelExponents, s):
    return min(exp.d - s, s) / (exp.alpha[s - 1] - s)


def kappa_and_prefactor(exp: ModelExponents):
    """(kappa, 2 / log(min(d-kappa, kappa) / (alpha_kappa - kappa))).

    None when M is empty.  Ties in the argmax break to the smallest
    index, which leaves the prefactor unchanged.
    """
    m = robust_set_M(exp)
    if not m:
        return None
    kappa = max(m, key=lambda s: (_ratio(exp, s), -s))
    ratio = _ratio(exp, kappa)
    if ratio <= 1.0:
        raise AssertionError("membership in M forces the ratio above 1")
    return kappa, 2.0 / math.log(ratio)


REGIME_ULTRASMALL = "ultrasmall"
REGIME_FAST = "faster-than-loglog"
REGIME_SLOW = "slower-than-loglog"

VERDICT_ROBUST = "robust"
VERDICT_MAYBE = "possibly-non-robust"


@dataclass(frozen=True)
class RegimeReport:
    d: int
    alpha: tuple
    M: frozenset
    kappa: int | None
    prefactor: float | None
    regime: str
    robust: str
    dense: bool

    def to_json(self):
        return json.dumps({
            "d": self.d,
            "alpha": ["inf" if math.isinf(a) else a for a in self.alpha],
            "M": sorted(self.M),
            "kappa": self.kappa,
            "prefactor": self.prefactor,
            "regime": self.regime,
            "robust": self.robust,
            "dense": self.dense,
        }, sort_keys=True)


def classify_regime(exp: ModelExponents, vol_l1: bool, vol_l2: bool,
                    d1_ld: bool) -> RegimeReport:
    """Regime trichotomy plus robustness and density verdicts.

    Moment flags come from the caller: integrability of Vol(C) and of the
    d-th moment of the first diameter depend on the full grain law, not
    only on the tail indices.
    """
    if vol_l2 and not vol_l1:
        raise ValueError("contradictory moment flags: L2 without L1")
    m = robust_set_M(exp)
    if any(exp.alpha[k - 1] <= k for k in range(1, exp.d + 1)):
        regime = REGIME_FAST
    elif m:
        regime = REGIME_ULTRASMALL
    else:
        regime = REGIME_SLOW
    kp = kappa_and_prefactor(exp)
    kappa, prefactor = kp if kp else (None, None)
    robust_cond = any(exp.alpha[k - 1] < min(2 * k, exp.d)
                      for k in range(1, exp.d + 1))
    if robust_cond:
        verdict = VERDICT_ROBUST
    else:
        # sufficient non-robustness: all alpha_k > 2k with square-integrable
        # volume, or an L^d first diameter; either way only "possibly"
        verdict = VERDICT_MAYBE
    return RegimeReport(d=exp.d, alpha=exp.alpha, M=m, kappa=kappa,
                        prefactor=prefactor, regime=regime, robust=verdict,
                        dense=not vol_l1)


@dataclass(frozen=True)
class ThresholdSequence:
    """f_n = f_(n-1)^(ratio - epsilon): the doubly exponential ladder."""

    values: tuple           # f_0 < f_1 < ... < f_n
    epsilon: float
    kappa: int
    min_term: int           # min(d - kappa, kappa)
    alpha_kappa: float
    alpha_1: float
    d: int

    @property
    def exponent(self):
        return self.min_term / (self.alpha_kappa - self.kappa) - self.epsilon

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


def threshold_sequence(f0, exp: ModelExponents, epsilon, n) -> ThresholdSequence:
    """The ladder f_0, f_1, ..., f_n with f_i = f_(i-1)^(ratio - epsilon)."""
    if not f0 > 1.0:
        raise ValueError("f0 must exceed 1")
    if not (0.0 < epsilon < 0.25):
        raise ValueError("epsilon must lie in (0, 1/4)")
    if n < 0:
        raise ValueError("n must be nonnegative")
    kp = kappa_and_prefactor(exp)
    if kp is None:
        raise ValueError("M is empty; no threshold sequence exists")
    kappa, _ = kp
    ratio = _ratio(exp, kappa)
    power = ratio - epsilon
    if power <= 1.0:
        raise ValueError("not strictly increasing")
    vals = [float(f0)]
    for _ in range(n):
        nxt = vals[-1] ** power
        if not math.isfinite(nxt):
            raise OverflowError("threshold sequence overflowed float range")
        vals.append(nxt)
    return ThresholdSequence(values=tuple(vals), epsilon=float(epsilon),
                             kappa=kappa, min_term=min(exp.d - kappa, kappa),
                             alpha_kappa=exp.alpha[kappa - 1],
                             alpha_1=exp.alpha[0], d=exp.d)


def default_phi(kappa):
    """Angular margin 2^(-kappa) * pi.

    For kappa = 1 this is pi/2, which empties the sector: no direction
    can exceed a right angle to both +p and -p.  Callers probing
    kappa = 1 must override phi.
    """
    return 2.0 ** (-kappa) * math.pi


def angle_between(a, b):
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("zero-length vector has no angle")
    c = float(np.dot(a, b) / (na * nb))
    return math.acos(min(1.0, max(-1.0, c)))


def in_O_i(anchor: MarkedPoint, candidate, f_i, kappa, phi=None):
    """Admissible-sector membership for the next ladder vertex.

    Distance window [f_i/2, f_i] around the anchor, and the connecting
    vector must keep an angle above phi to +/- each of the anchor's first
    kappa diameter orientations.
    """
    if phi is None:
        phi = default_phi(kappa)
    delta = np.asarray(anchor.location, dtype=float) \
        - np.asarray(candidate, dtype=float)
    r = float(np.linalg.norm(delta))
    if r == 0.0:
        raise ValueError("candidate coincides with the anchor")
    if not (f_i / 2.0 <= r <= f_i):
        return False
    ors = anchor.diameters.orientations
    for j in range(kappa):
        ang = angle_between(delta, ors[:, j])
        if ang <= phi or (math.pi - ang) <= phi:
            return False
    return True


def b_star(anchor: MarkedPoint, toward, f_prev, resolution=128) -> ProjectedRegion:
    """Shadow of (grain ∩ ball of radius f_prev) on the tangent hyperplane.

    The hyperplane touches the ball around the anchor on the side facing
    `toward`.  The grain is support-sampled; samples outside the ball are
    radially clamped onto the sphere, then everything is projected.
    """
    if f_prev <= 0:
        raise ValueError("f_prev must be positive")
    x = np.asarray(anchor.location, dtype=float)
    t = np.asarray(toward, dtype=float) - x
    nt = float(np.linalg.norm(t))
    if nt == 0.0:
        raise ValueError("toward coincides with the anchor")
    u = t / nt
    base = x + f_prev * u
    d = x.shape[0]
    grain = anchor.grain
    dirs = hyperplane_directions(u, d, resolution)
    dirs = np.vstack([dirs, u[None, :], -u[None, :]])
    pts = np.array([grain.support(v) for v in dirs])
    rel = pts - x
    dist = np.linalg.norm(rel, axis=1)
    clamp = dist > f_prev
    scalefix = np.ones_like(dist)
    scalefix[clamp] = f_prev / dist[clamp]
    pts = x + rel * scalefix[:, None]
    proj = pts - np.outer((pts - base) @ u, u)
    rad = min(grain.bounding_radius(), f_prev)
    slack = rad * (math.pi / max(resolution, 8)) ** 2
    scale = 1.0 + float(np.linalg.norm(base)) + grain.bounding_radius()
    return ProjectedRegion(normal=u, base=base, samples=proj,
                           tolerance=max(1e-9 * scale, slack, 1e-12))


@dataclass(frozen=True)
class StepRecord:
    point_id: int
    threshold: float
    diameter_ok: bool
    sector_ok: bool
    bstar_ok: bool


@dataclass(frozen=True)
class PathWitness:
    """Vertex ids of a ladder path plus the per-step check record."""

    start: int
    ids: tuple
    steps: tuple = field(default_factory=tuple)

    def all_checks_pass(self):
        return all(s.diameter_ok and s.sector_ok and s.bstar_ok
                   for s in self.steps)


VARIANT_TWO_SIDED = "A"       # lower bound on D^(kappa), upper on D^(1)
VARIANT_LOWER_ONLY = "A-bar"  # lower bound on D^(kappa) only


def _step_checks(config, prev: MarkedPoint, cand: MarkedPoint, i,
                 thresholds: ThresholdSequence, variant, phi, resolution):
    base = 2.0 ** (2 * (thresholds.d - 1) + thresholds.epsilon)
    f_i = thresholds[i]
    ds = cand.diameters
    diam_ok = ds.lengths[thresholds.kappa - 1] >= base * f_i
    if variant == VARIANT_TWO_SIDED:
        bound = base * f_i ** (2.0 * thresholds.alpha_kappa / thresholds.alpha_1)
        diam_ok = diam_ok and ds.lengths[0] <= bound
    sector_ok = bool(in_O_i(prev, cand.location, f_i, thresholds.kappa, phi))
    region = b_star(prev, cand.location, thresholds[i - 1],
                    resolution=resolution)
    bstar_ok = bool(distance_to_point_set(cand.grain, region.samples)
                    <= region.tolerance)
    return StepRecord(point_id=cand.id, threshold=f_i, diameter_ok=bool(diam_ok),
                      sector_ok=sector_ok, bstar_ok=bstar_ok)


def check_path_event(config: Configuration, index: LayeredGrid, start_id, n,
                     thresholds: ThresholdSequence, variant=VARIANT_TWO_SIDED,
                     phi=None, resolution=128):
    """Greedy depth-first search for a ladder path of length n.

    Candidates at each step come from the spatial index restricted to the
    sector annulus; they are tried in increasing id order, so the returned
    witness is the lexicographically first one.  Absence of a witness
    under this breadth-limited search does not certify that the event
    fails.
    """
    if variant not in (VARIANT_TWO_SIDED, VARIANT_LOWER_ONLY):
        raise ValueError(f"unknown variant {variant!r}")
    if len(thresholds) < n + 1:
        raise ValueError("thresholds shorter than the requested length")
    start = config.point(start_id)
    if n == 0:
        return PathWitness(start=start_id, ids=())

    def extend(prev: MarkedPoint, i, used):
        f_i = thresholds[i]
        cands = index.query_sphere(prev.location, f_i)
        for cid in cands:
            if cid in used or cid == start_id:
                continue
            cand = config.point(cid)
            rec = _step_checks(config, prev, cand, i, thresholds, variant,
                               phi, resolution)
            if not (rec.diameter_ok and rec.sector_ok and rec.bstar_ok):
                continue
            if i == n:
                return [rec]
            rest = extend(cand, i + 1, used | {cid})
            if rest is not None:
                return [rec] + rest
        return None

    steps = extend(start, 1, frozenset())
    if steps is None:
        return None
    return PathWitness(start=start_id, ids=tuple(s.point_id for s in steps),
                       steps=tuple(steps))


def revalidate_witness(config, witness: PathWitness,
                       thresholds: ThresholdSequence,
                       variant=VARIANT_TWO_SIDED, phi=None, resolution=128):
    """Recompute every per-step predicate of a witness from scratch."""
    prev = config.point(witness.start)
    for i, pid in enumerate(witness.ids, start=1):
        cand = config.point(pid)
        rec = _step_checks(config, prev, cand, i, thresholds, variant, phi,
                           resolution)
        if not (rec.diameter_ok and rec.sector_ok and rec.bstar_ok):
            return False
        prev = cand
    return True
