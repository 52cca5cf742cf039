"""Ground-truth rate regions by exhaustive enumeration.

Everything here answers "which rate vectors are achievable" questions the
slow but certain way: enumerate binary allocations, evaluate their rates,
and reason about hulls, domination and Pareto frontiers of the resulting
point clouds.  Sizes are guarded so the enumerations stay desk-scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .core import (
    RATE_TOL,
    NetworkConfig,
    PowerAllocation,
    batch_link_rates,
    link_rates,
)
from .iterative import sample_repulsive_allocation

PROVENANCES = ("S1", "SM", "PC_sample", "repulsive_sample")

# Enumerated rate points closer than this per coordinate are one point.
DEDUP_DECIMALS = 9


@dataclass
class RegionSample:
    """A cloud of achievable rate vectors plus where they came from."""

    points: np.ndarray
    provenance: str

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not np.all(np.isfinite(self.points)) or np.any(self.points < 0):
            raise ValueError("rate points must be finite and nonnegative")

    def __len__(self) -> int:
        return len(self.points)


def _binary_allocations(n: int, m: int, lo: int, hi: int, p_max: float) -> np.ndarray:
    idx = np.arange(lo, hi, dtype=np.int64)
    pos = np.arange(n * m, dtype=np.int64)
    bits = (idx[:, None] >> pos) & 1
    return p_max * bits.reshape(-1, n, m).astype(float)


def enumerate_s1(net: NetworkConfig) -> RegionSample:
    """Rates of all 2^n single-slot on/off configurations (no dedup)."""
    if net.n_links > 20:
        raise ValueError("instance too large to enumerate (n_links > 20)")
    total = 1 << net.n_links
    allocs = _binary_allocations(net.n_links, 1, 0, total, net.p_max)
    return RegionSample(batch_link_rates(allocs, net), "S1")


def enumerate_sm(net: NetworkConfig, m: int) -> RegionSample:
    """Rates of all 2^(n*m) binary frame allocations, deduplicated."""
    n = net.n_links
    if n * m > 20:
        raise ValueError("instance too large to enumerate (n_links * frame_size > 20)")
    total = 1 << (n * m)
    points = np.empty((total, n))
    chunk = 1 << 14
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        allocs = _binary_allocations(n, m, lo, hi, net.p_max)
        points[lo:hi] = batch_link_rates(allocs, net)
    keys = np.round(points, DEDUP_DECIMALS)
    _, first = np.unique(keys, axis=0, return_index=True)
    return RegionSample(points[np.sort(first)], "SM")


def conv_hull_weights(r, sample: RegionSample, tol: float = 1e-7):
    """Mixing weights writing r as a convex combination of sample points,
    or None when no such combination exists."""
    pts = sample.points
    r = np.asarray(r, dtype=float)
    if r.shape != (pts.shape[1],):
        raise ValueError("rate vector dimension does not match sample")
    k = len(pts)
    a_eq = np.vstack([pts.T, np.ones((1, k))])
    b_eq = np.concatenate([r, [1.0]])
    res = linprog(np.zeros(k), A_eq=a_eq, b_eq=b_eq,
                  bounds=[(0, None)] * k, method="highs")
    if not res.success:
        return None
    w = np.maximum(res.x, 0.0)
    w = w / w.sum()
    if np.max(np.abs(pts.T @ w - r)) > tol:
        return None
    return w


def in_conv_hull(r, sample: RegionSample, tol: float = 1e-7) -> bool:
    return conv_hull_weights(r, sample, tol=tol) is not None


def in_coord_convex(r, sample: RegionSample) -> bool:
    """Whether some sample point dominates r coordinate-wise."""
    r = np.asarray(r, dtype=float)
    if r.shape != (sample.points.shape[1],):
        raise ValueError("rate vector dimension does not match sample")
    return bool(np.any(np.all(sample.points >= r - RATE_TOL, axis=1)))


def pareto_boundary(sample: RegionSample) -> RegionSample:
    """Points of the sample not strictly dominated by another point."""
    pts = sample.points
    keys = np.round(pts, DEDUP_DECIMALS)
    _, first = np.unique(keys, axis=0, return_index=True)
    pts = pts[np.sort(first)]
    keep = np.ones(len(pts), dtype=bool)
    for j, x in enumerate(pts):
        above = np.all(pts >= x - RATE_TOL, axis=1)
        strictly = np.any(pts > x + RATE_TOL, axis=1)
        above[j] = False
        if np.any(above & strictly):
            keep[j] = False
    return RegionSample(pts[keep], sample.provenance)


def sample_pc_region(net: NetworkConfig, grid: int) -> RegionSample:
    """Rates over a grid x grid lattice of constant power pairs (2 links)."""
    if net.n_links != 2:
        raise ValueError("power-control sampling supports exactly 2 links")
    if grid < 2:
        raise ValueError("grid must be at least 2")
    levels = np.linspace(0.0, net.p_max, grid)
    p1, p2 = np.meshgrid(levels, levels, indexing="ij")
    allocs = np.stack([p1.ravel(), p2.ravel()], axis=1)[:, :, None]
    return RegionSample(batch_link_rates(allocs, net), "PC_sample")


def sample_repulsive_rates(net: NetworkConfig, m: int, count: int,
                           rng: np.random.Generator,
                           binary: bool = False) -> RegionSample:
    """Rates of randomly drawn prefix/suffix (repulsive) allocations."""
    pts = np.empty((count, net.n_links))
    for j in range(count):
        p = sample_repulsive_allocation(m, net.p_max, rng, binary=binary)
        pts[j] = link_rates(p, net)
    return RegionSample(pts, "repulsive_sample")


def compose_frame_from_mixture(power_profiles, weights, m: int) -> PowerAllocation:
    """Build an m-slot frame time-sharing the given single-slot profiles.

    Profile j occupies floor(m * weights[j]) consecutive slots; leftover
    slots stay silent.  The frame rates then equal the floored mixture of
    the profiles' single-slot rates.
    """
    profiles = [np.asarray(q, dtype=float) for q in power_profiles]
    weights = np.asarray(weights, dtype=float)
    if len(profiles) != len(weights):
        raise ValueError("profile and weight counts differ")
    if len(profiles) == 0:
        raise ValueError("need at least one profile")
    if np.any(weights < -1e-12) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be a probability vector")
    n = profiles[0].shape[0]
    if any(q.shape != (n,) for q in profiles):
        raise ValueError("profiles must all be length-n power vectors")
    powers = np.zeros((n, m))
    slot = 0
    for q, lam in zip(profiles, weights):
        k = int(np.floor(m * lam + 1e-12))
        powers[:, slot:slot + k] = q[:, None]
        slot += k
    return PowerAllocation(powers)


def sample_feasible_target(net: NetworkConfig, m: int,
                           rng: np.random.Generator,
                           margin: float = 0.01) -> np.ndarray:
    """A target known achievable: rates of a random binary allocation,
    shrunk by the margin."""
    bits = rng.integers(0, 2, size=(net.n_links, m)).astype(float)
    return (1.0 - margin) * link_rates(net.p_max * bits, net)


def sample_from_closure(sample: RegionSample, count: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Targets drawn from the coordinate-convex closure of the sample:
    a random point scaled down coordinate-wise."""
    picks = rng.integers(0, len(sample.points), size=count)
    scale = rng.uniform(0.0, 1.0, size=(count, sample.points.shape[1]))
    return sample.points[picks] * scale


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def hull_pareto_polyline(sample: RegionSample) -> np.ndarray:
    """Northeast boundary of the convex hull of a 2-d sample.

    Returns hull vertices not dominated by another hull vertex, ordered by
    increasing first coordinate; consecutive vertices are joined by hull
    edges, so the polyline is the Pareto boundary of the hull.
    """
    pts = sample.points
    if pts.shape[1] != 2:
        raise ValueError("hull boundary supports exactly 2 links")
    uniq = np.unique(np.round(pts, DEDUP_DECIMALS), axis=0)
    if len(uniq) == 1:
        return uniq.copy()
    order = np.lexsort((uniq[:, 1], uniq[:, 0]))
    pts_sorted = uniq[order]
    lower: list[np.ndarray] = []
    for q in pts_sorted:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    upper: list[np.ndarray] = []
    for q in pts_sorted[::-1]:
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    hull = np.array(lower[:-1] + upper[:-1])
    keep = []
    for j, x in enumerate(hull):
        above = np.all(hull >= x - RATE_TOL, axis=1)
        strictly = np.any(hull > x + RATE_TOL, axis=1)
        above[j] = False
        if not np.any(above & strictly):
            keep.append(j)
    chain = hull[keep]
    return chain[np.argsort(chain[:, 0])]


def boundary_grid(polyline: np.ndarray, count: int = 50) -> np.ndarray:
    """count points spread evenly by arclength along a polyline."""
    poly = np.asarray(polyline, dtype=float)
    if len(poly) == 1:
        return np.repeat(poly, count, axis=0)
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    stops = np.linspace(0.0, cum[-1], count)
    out = np.empty((count, poly.shape[1]))
    for k, s in enumerate(stops):
        j = min(np.searchsorted(cum, s, side="right") - 1, len(seg) - 1)
        t = 0.0 if seg[j] == 0 else (s - cum[j]) / seg[j]
        out[k] = poly[j] + t * (poly[j + 1] - poly[j])
    return out


def coverage_deficit(grid_points: np.ndarray, sample: RegionSample) -> np.ndarray:
    """How far each grid point sticks out of the sample's coordinate-convex
    closure: min over sample points of the worst per-coordinate shortfall."""
    grid_points = np.atleast_2d(np.asarray(grid_points, dtype=float))
    shortfall = grid_points[:, None, :] - sample.points[None, :, :]
    worst = np.max(np.maximum(shortfall, 0.0), axis=2)
    return worst.min(axis=1)


def write_region_csv(sample: RegionSample, path) -> None:
    n = sample.points.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(",".join([f"rate_{i}" for i in range(n)] + ["provenance"]) + "\n")
        for row in sample.points:
            fh.write(",".join(repr(float(v)) for v in row)
                     + f",{sample.provenance}\n")
