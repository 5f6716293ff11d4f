"""Estimate illuminant coefficients from the set of per-pixel invariants.

The valid invariant directions are histogrammed on the sphere, sparsely
populated bins are pruned, and the corners of the tightest conic hull are
extracted: robust mean (one light), RANSAC arc endpoints (two lights), or
the minimum-area enclosing triangle of the gnomonically projected set
(three lights).
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import kernels
from .errors import (
    AllCollinear,
    AllPruned,
    ArcDegenerate,
    BehindTangentPlane,
    CentroidDegenerate,
    CollinearSet,
    DegenerateHull,
    DegenerateLights,
    EmptyField,
    EmptySet,
    InputError,
    InvalidCount,
)
from .imaging import GammaField

DEFAULT_BINS = 100
DEFAULT_MIN_COUNT = 100


@dataclass(frozen=True)
class SphereHistogram:
    """Counts and per-bin mean directions over a (theta, phi) grid."""

    counts: np.ndarray  # (B, B) int64
    mean_dirs: np.ndarray  # (B, B, 3); unit where counts > 0
    bins_per_axis: int

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass(frozen=True)
class PrunedSet:
    directions: np.ndarray  # (M, 3) unit
    weights: np.ndarray  # (M,) counts

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float).reshape(-1, 3)
        w = np.asarray(self.weights, dtype=np.int64).reshape(-1)
        if d.shape[0] != w.shape[0]:
            raise InputError("directions and weights differ in length")
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.directions.shape[0]


@dataclass(frozen=True)
class RansacConfig:
    inlier_angle_deg: float = 1.0
    iterations: int = 500
    seed: int = 0


@dataclass(frozen=True)
class LightEstimate:
    """Recovered unit-norm illuminant coefficient vectors."""

    count: int
    coefficients: np.ndarray  # (N, 3)
    method: str = ""
    seed: int | None = None

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float).reshape(-1, 3)
        if self.count not in (1, 2, 3) or c.shape[0] != self.count:
            raise InvalidCount(f"estimate must hold 1-3 lights, got {c.shape[0]}")
        norms = np.linalg.norm(c, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise InputError("light coefficients must be unit norm")
        min_sep = math.radians(0.1)
        for i, j in combinations(range(self.count), 2):
            ang = _angle(c[i], c[j])
            if ang <= min_sep:
                raise DegenerateLights(
                    f"lights {i} and {j} separated by only {math.degrees(ang):.4f} deg"
                )
        object.__setattr__(self, "coefficients", c)

    def to_json_dict(self):
        return {
            "n": self.count,
            "coefficients": [[float(v) for v in row] for row in self.coefficients],
            "method": self.method,
            "seed": self.seed,
        }


def _angle(a, b):
    return math.acos(min(1.0, max(-1.0, float(np.dot(a, b)))))


# --- histogram and pruning ------------------------------------------------


def build_histogram(gamma: GammaField, bins_per_axis: int = DEFAULT_BINS) -> SphereHistogram:
    """Assign each valid direction to its (theta, phi) bin; store mean vectors."""
    if not np.any(gamma.mask):
        raise EmptyField("no valid pixels to histogram")
    counts, vecsum = kernels.sphere_histogram(
        np.ascontiguousarray(gamma.gamma.reshape(-1, 3)),
        np.ascontiguousarray(gamma.mask.reshape(-1)),
        int(bins_per_axis),
    )
    norms = np.linalg.norm(vecsum, axis=2)
    means = np.zeros_like(vecsum)
    nz = norms > 0
    means[nz] = vecsum[nz] / norms[nz, None]
    return SphereHistogram(counts=counts, mean_dirs=means, bins_per_axis=bins_per_axis)


def prune(hist: SphereHistogram, min_count: int = DEFAULT_MIN_COUNT) -> PrunedSet:
    """Keep bins holding at least min_count pixels."""
    keep = hist.counts >= min_count
    if not np.any(keep):
        raise AllPruned(
            f"no bin reaches {min_count} pixels (max {hist.counts.max()}); "
            "lower min_count for small images"
        )
    return PrunedSet(directions=hist.mean_dirs[keep], weights=hist.counts[keep])


# --- estimators -------------------------------------------------------------


def estimate_one(pruned: PrunedSet) -> LightEstimate:
    """Iteratively trimmed weighted spherical mean."""
    if len(pruned) == 0:
        raise EmptySet("empty direction set")
    dirs = pruned.directions
    w = pruned.weights.astype(float)

    keep = np.ones(len(pruned), dtype=bool)
    m = _weighted_mean_dir(dirs, w, keep)
    for _ in range(20):
        dev = np.arccos(np.clip(dirs[keep] @ m, -1.0, 1.0))
        med = float(np.median(dev))
        new_keep = np.zeros_like(keep)
        new_keep[np.flatnonzero(keep)[dev <= 3.0 * med + 1e-12]] = True
        m_new = _weighted_mean_dir(dirs, w, new_keep)
        done = _angle(m, m_new) < 1e-8
        m, keep = m_new, new_keep
        if done:
            break
    return LightEstimate(count=1, coefficients=m[None, :], method="robust-mean")


def _weighted_mean_dir(dirs, w, keep):
    s = (w[keep, None] * dirs[keep]).sum(axis=0)
    norm = np.linalg.norm(s)
    if norm < 1e-12:
        return dirs[np.argmax(w * keep)]
    return s / norm


def estimate_two(pruned: PrunedSet, cfg: RansacConfig = RansacConfig()) -> LightEstimate:
    """RANSAC great circle with maximum weighted inliers; arc endpoints."""
    if len(pruned) < 2:
        raise ArcDegenerate("need at least 2 directions")
    dirs = pruned.directions
    w = pruned.weights.astype(float)
    m = len(pruned)
    sin_tol = math.sin(math.radians(cfg.inlier_angle_deg))

    rng = np.random.default_rng(cfg.seed)
    best_score = -1.0
    best_normal = None
    for _ in range(cfg.iterations):
        i = int(rng.integers(0, m))
        j = int(rng.integers(0, m))
        if i == j:
            continue
        nvec = np.cross(dirs[i], dirs[j])
        norm = np.linalg.norm(nvec)
        if norm < 1e-12:
            continue
        nvec /= norm
        score = float(w[np.abs(dirs @ nvec) <= sin_tol].sum())
        if score > best_score:
            best_score = score
            best_normal = nvec
    if best_normal is None:
        raise ArcDegenerate("all sampled direction pairs coincide")

    # refine by weighted plane fit to the inliers, then refresh the inliers
    normal = best_normal
    for _ in range(2):
        inl = np.abs(dirs @ normal) <= sin_tol
        if np.count_nonzero(inl) < 2:
            break
        scatter = (w[inl, None, None] * dirs[inl, :, None] * dirs[inl, None, :]).sum(axis=0)
        evals, evecs = np.linalg.eigh(scatter)
        normal = evecs[:, 0]

    inl = np.abs(dirs @ normal) <= sin_tol
    if np.count_nonzero(inl) < 2:
        inl = np.ones(m, dtype=bool)
    proj = dirs[inl] - np.outer(dirs[inl] @ normal, normal)
    norms = np.linalg.norm(proj, axis=1)
    ok = norms > 1e-12
    if np.count_nonzero(ok) < 2:
        raise ArcDegenerate("inliers collapse onto the circle axis")
    proj = proj[ok] / norms[ok, None]

    scatter = (w[inl][ok, None, None] * proj[:, :, None] * proj[:, None, :]).sum(axis=0)
    _, evecs = np.linalg.eigh(scatter)
    u1 = evecs[:, 2]
    u2 = np.cross(normal, u1)
    ang = np.arctan2(proj @ u2, proj @ u1)

    order = np.argsort(ang)
    sorted_ang = ang[order]
    gaps = np.diff(sorted_ang)
    wrap = sorted_ang[0] + 2.0 * math.pi - sorted_ang[-1]
    k = int(np.argmax(np.append(gaps, wrap)))
    if k == len(sorted_ang) - 1:
        start, end = sorted_ang[0], sorted_ang[-1]
    else:
        start, end = sorted_ang[k + 1], sorted_ang[k]
    b = np.stack(
        [
            math.cos(start) * u1 + math.sin(start) * u2,
            math.cos(end) * u1 + math.sin(end) * u2,
        ]
    )
    b /= np.linalg.norm(b, axis=1, keepdims=True)
    return LightEstimate(count=2, coefficients=b, method="ransac-arc", seed=cfg.seed)


def estimate_three(pruned: PrunedSet) -> LightEstimate:
    """Gnomonic projection at the centroid, then minimum-area triangle."""
    if len(pruned) < 3:
        raise CollinearSet("need at least 3 directions")
    dirs = pruned.directions
    w = pruned.weights.astype(float)

    centroid = (w[:, None] * dirs).sum(axis=0)
    norm = np.linalg.norm(centroid)
    if norm < 1e-12 * max(w.sum(), 1.0):
        raise CentroidDegenerate("weighted mean direction vanishes")
    centroid /= norm

    pts = gnomonic_project(dirs, centroid)
    try:
        hull = convex_hull_2d(pts)
    except AllCollinear as exc:
        raise CollinearSet(str(exc)) from exc
    if _polygon_area(hull) <= 1e-12:
        raise CollinearSet("projected hull area is numerically zero")

    tri = min_area_enclosing_triangle(hull)
    b = gnomonic_unproject(tri, centroid)
    return LightEstimate(count=3, coefficients=b, method="min-area-triangle")


def estimate_lights(pruned: PrunedSet, n: int, cfg: RansacConfig | None = None) -> LightEstimate:
    if n == 1:
        return estimate_one(pruned)
    if n == 2:
        return estimate_two(pruned, cfg or RansacConfig())
    if n == 3:
        return estimate_three(pruned)
    raise InvalidCount(f"light count {n} not in {{1, 2, 3}}")


# --- gnomonic projection ----------------------------------------------------


def tangent_frame(center):
    """Deterministic orthonormal (u, v) spanning the plane normal to center."""
    center = np.asarray(center, dtype=float)
    helper = np.array([0.0, 0.0, 1.0])
    if abs(center @ helper) > 0.9:
        helper = np.array([1.0, 0.0, 0.0])
    u = np.cross(helper, center)
    u /= np.linalg.norm(u)
    v = np.cross(center, u)
    return u, v


def gnomonic_project(d, center):
    """Central projection onto the tangent plane at center; (..., 3) -> (..., 2)."""
    d = np.asarray(d, dtype=float)
    u, v = tangent_frame(center)
    dot = d @ np.asarray(center, dtype=float)
    if np.any(dot <= 1e-6):
        raise BehindTangentPlane("direction outside the tangent hemisphere")
    return np.stack([(d @ u) / dot, (d @ v) / dot], axis=-1)


def gnomonic_unproject(p, center):
    """Inverse of gnomonic_project; (..., 2) -> unit (..., 3)."""
    p = np.asarray(p, dtype=float)
    center = np.asarray(center, dtype=float)
    u, v = tangent_frame(center)
    d = center + p[..., :1] * u + p[..., 1:2] * v
    return d / np.linalg.norm(d, axis=-1, keepdims=True)


# --- planar geometry ---------------------------------------------------------


def _cross2(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_2d(points):
    """Monotone-chain hull, counter-clockwise, collinear edge points dropped."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise AllCollinear("need at least 3 points")
    uniq = np.unique(pts, axis=0)
    order = np.lexsort((uniq[:, 1], uniq[:, 0]))
    uniq = uniq[order]

    def chain(seq):
        out = []
        for p in seq:
            while len(out) > 1 and _cross2(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(uniq)
    upper = chain(uniq[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if hull.shape[0] < 3:
        raise AllCollinear("points are collinear")
    return hull


def _polygon_area(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def triangle_area(tri):
    return 0.5 * abs(_cross2(tri[0], tri[1], tri[2]))


def _contains(tri, pts, slack):
    """All pts inside triangle tri (CCW or CW), within absolute slack."""
    a, b, c = tri
    sgn = 1.0 if _cross2(a, b, c) >= 0 else -1.0
    for p, q in ((a, b), (b, c), (c, a)):
        edge = np.asarray(q) - np.asarray(p)
        rel = pts - np.asarray(p)
        crossv = sgn * (edge[0] * rel[:, 1] - edge[1] * rel[:, 0])
        scale = np.linalg.norm(edge)
        if np.any(crossv < -slack * max(scale, 1.0)):
            return False
    return True


def _line_intersect(p1, d1, p2, d2):
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < 1e-14:
        return None
    t = ((p2[0] - p1[0]) * d2[1] - (p2[1] - p1[1]) * d2[0]) / denom
    return p1 + t * d1


def min_area_enclosing_triangle(hull):
    """Smallest-area triangle containing the convex polygon.

    Certified enumeration: the optimum has one side flush with a hull edge
    and each non-flush side touching the hull at its midpoint; such optima
    are always matched in area by a candidate with two flush sides plus a
    midpoint-cut side, or three flush sides.  Both families are enumerated
    and the best containing candidate returned.
    """
    hull = np.asarray(hull, dtype=float).reshape(-1, 2)
    m = hull.shape[0]
    if m < 3:
        raise DegenerateHull("hull needs at least 3 vertices")
    area = 0.5 * (
        np.dot(hull[:, 0], np.roll(hull[:, 1], -1))
        - np.dot(hull[:, 1], np.roll(hull[:, 0], -1))
    )
    if area < 0:  # accept clockwise input by reversing
        hull = hull[::-1].copy()
        area = -area
    scale = float(np.abs(hull).max()) + 1.0
    if area <= 1e-12 * scale * scale:
        raise DegenerateHull("hull area is numerically zero")

    edges_p = hull
    edges_d = np.roll(hull, -1, axis=0) - hull
    slack = 1e-9

    best_area = np.inf
    best_tri = None

    # three flush sides
    for e, i, j in combinations(range(m), 3):
        tri = _flush_triangle(edges_p, edges_d, e, i, j)
        if tri is None:
            continue
        a = triangle_area(tri)
        if a < best_area and _contains(tri, hull, slack * scale):
            best_area = a
            best_tri = tri

    # two flush sides + midpoint cut through a vertex
    for e, i in combinations(range(m), 2):
        cands = _midpoint_cut_candidates(edges_p, edges_d, e, i, hull)
        for tri in cands:
            a = triangle_area(tri)
            if a < best_area and _contains(tri, hull, slack * scale):
                best_area = a
                best_tri = tri

    if best_tri is None:
        raise DegenerateHull("no enclosing triangle candidate survived")
    if not _contains(best_tri, hull, 1e-9 * scale):
        raise RuntimeError("internal: enclosing triangle lost containment")
    return np.asarray(best_tri)


def _flush_triangle(edges_p, edges_d, e, i, j):
    v1 = _line_intersect(edges_p[e], edges_d[e], edges_p[i], edges_d[i])
    v2 = _line_intersect(edges_p[e], edges_d[e], edges_p[j], edges_d[j])
    v3 = _line_intersect(edges_p[i], edges_d[i], edges_p[j], edges_d[j])
    if v1 is None or v2 is None or v3 is None:
        return None
    return np.stack([v1, v2, v3])


def _midpoint_cut_candidates(edges_p, edges_d, e, i, hull):
    """Triangles with sides flush on edges e and i and a third side cut so
    that some hull vertex sits at its midpoint."""
    w = _line_intersect(edges_p[e], edges_d[e], edges_p[i], edges_d[i])
    if w is None:
        return []
    scale = float(np.abs(hull).max()) + 1.0
    rel = hull - w
    de = edges_d[e] / np.linalg.norm(edges_d[e])
    di = edges_d[i] / np.linalg.norm(edges_d[i])
    # pick the wedge orientation (ray signs) that contains the hull
    for se in (1.0, -1.0):
        for si in (1.0, -1.0):
            e1 = se * de
            e2 = si * di
            denom = e1[0] * e2[1] - e1[1] * e2[0]
            if abs(denom) < 1e-12:
                continue
            s = (rel[:, 0] * e2[1] - rel[:, 1] * e2[0]) / denom
            t = (e1[0] * rel[:, 1] - e1[1] * rel[:, 0]) / denom
            if s.min() < -1e-9 * scale or t.min() < -1e-9 * scale:
                continue
            out = []
            for k in range(hull.shape[0]):
                if s[k] <= 1e-12 * scale or t[k] <= 1e-12 * scale:
                    continue
                tri = np.stack([w, w + 2.0 * s[k] * e1, w + 2.0 * t[k] * e2])
                out.append(tri)
            return out
    return []
