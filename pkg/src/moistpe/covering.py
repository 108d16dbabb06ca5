"""Iterated theta-coverings of sampled attractor images and the resulting
fractal-dimension bound, plus a box-counting check that Lipschitz/Holder maps
do not raise dimension.

All covering statements are about the finite sample they were computed on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .forcing import forcing_fields
from .grid import Grid, PhysParams, State
from .timestepper import StepConfig, run

Map = Callable[[np.ndarray], np.ndarray]


class DegeneratePair(ValueError):
    """Two distinct stored points are at zero weak distance."""


class CoverageFailure(RuntimeError):
    """A sample point lies outside every ball claimed to cover it."""


class InsufficientScales(ValueError):
    """Fewer than three dyadic scales usable for box counting."""


class EmbeddedNorm:
    """A norm of the form ||embed(x)||_2 with ``embed`` linear.

    ``embed`` maps an (n, d) array of points to an (n, m) array. Pairwise
    distances then reduce to Euclidean distances between embedded points.
    """

    def __init__(self, embed: Callable[[np.ndarray], np.ndarray], name: str = ""):
        self.embed = embed
        self.name = name

    def __call__(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.embed(np.atleast_2d(x))[0]))

    def distances_to(self, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.embed(X) - self.embed(np.atleast_2d(y)), axis=1)


def euclidean(scale: float = 1.0) -> EmbeddedNorm:
    return EmbeddedNorm(lambda X: scale * np.asarray(X, dtype=float).reshape(len(X), -1), f"{scale}*euclid")


@dataclass
class MetricCloud:
    points: np.ndarray
    n_H: EmbeddedNorm
    n_V: EmbeddedNorm

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if self.points.shape[1] < 1 or len(self.points) < 1:
            raise ValueError("cloud needs at least one point of dimension >= 1")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)


def check_metric(norm: EmbeddedNorm, points: np.ndarray, trials: int = 50, seed: int = 0, rtol: float = 1e-12) -> bool:
    """Spot-check symmetry and the triangle inequality on random triples."""
    rng = np.random.default_rng(seed)
    n = len(points)
    for _ in range(trials):
        i, j, k = rng.integers(0, n, 3)
        dij = norm(points[i] - points[j])
        dji = norm(points[j] - points[i])
        dik, dkj = norm(points[i] - points[k]), norm(points[k] - points[j])
        scale = max(dij, dik, dkj, 1e-300)
        if abs(dij - dji) > rtol * scale or dij > dik + dkj + rtol * scale:
            return False
    return True


def apply_map(S: Map, X: np.ndarray) -> np.ndarray:
    return np.array([np.asarray(S(x), dtype=float).ravel() for x in X])


@dataclass
class SmoothingConstant:
    K: float
    pairs: int
    removed: list[int] = field(default_factory=list)


def dedupe(cloud: MetricCloud) -> tuple[MetricCloud, list[int]]:
    """Drop points at zero weak distance from an earlier point."""
    E = cloud.n_H.embed(cloud.points)
    keep, removed = [], []
    for i in range(len(E)):
        if keep and np.min(np.linalg.norm(E[keep] - E[i], axis=1)) == 0.0:
            removed.append(i)
        else:
            keep.append(i)
    return MetricCloud(cloud.points[keep], cloud.n_H, cloud.n_V), removed


def smoothing_map(S: Map, cloud: MetricCloud, max_pairs: int | None = None, seed: int = 0,
                  strict: bool = False) -> SmoothingConstant:
    """Empirical smoothing constant K = max n_V(Sx - Sy) / n_H(x - y) over pairs.

    Duplicate points are removed and reported; with ``strict`` they raise
    :class:`DegeneratePair` instead.
    """
    clean, removed = dedupe(cloud)
    if removed and strict:
        raise DegeneratePair(f"points {removed} duplicate earlier points in the weak norm")
    X = clean.points
    n = len(X)
    if n < 2:
        return SmoothingConstant(0.0, 0, removed)
    EH = clean.n_H.embed(X)
    EV = clean.n_V.embed(apply_map(S, X))
    I, J = np.triu_indices(n, 1)
    if max_pairs is not None and len(I) > max_pairs:
        sel = np.random.default_rng(seed).choice(len(I), max_pairs, replace=False)
        I, J = I[sel], J[sel]
    dH = np.linalg.norm(EH[I] - EH[J], axis=1)
    dV = np.linalg.norm(EV[I] - EV[J], axis=1)
    return SmoothingConstant(float(np.max(dV / dH)), len(I), removed)


def greedy_cover(E: np.ndarray, radius: float, start: int = 0) -> tuple[list[int], float]:
    """Farthest-point covering of embedded points by balls of ``radius``.

    Returns center indices and the largest point-to-nearest-center distance.
    """
    centers = [start]
    d = np.linalg.norm(E - E[start], axis=1)
    while True:
        far = int(np.argmax(d))
        if d[far] <= radius:
            return centers, float(d.max())
        centers.append(far)
        d = np.minimum(d, np.linalg.norm(E - E[far], axis=1))


@dataclass
class CoveringLevel:
    k: int
    radius: float
    centers: np.ndarray
    max_miss: float
    accumulated: int

    @property
    def count(self) -> int:
        return len(self.centers)


@dataclass
class CoveringTree:
    """Levels of the iterated covering and the derived counting constants.

    ``n_theta_first`` is the literal first-level count |V_1|. ``n_theta`` is
    |V_k|^(1/k) at the deepest level, the smallest N with |V_k| <= N^k there.
    Shallow levels carry a constant inflation from the greedy covering and the
    choice of R; its k-th root fades as k grows, so the estimate approaches the
    per-level growth factor from above.
    """

    theta: float
    R: float
    x0: np.ndarray
    levels: list[CoveringLevel]
    n_theta: float
    n_theta_first: int

    @property
    def degenerate(self) -> bool:
        return self.n_theta <= 1.0

    def manifest(self) -> dict[str, float]:
        out: dict[str, float] = {"theta": self.theta, "R": self.R, "n_theta": self.n_theta,
                                 "n_theta_first": self.n_theta_first, "levels": len(self.levels)}
        for lv in self.levels:
            out[f"level{lv.k}.centers"] = lv.count
            out[f"level{lv.k}.radius"] = lv.radius
            out[f"level{lv.k}.max_miss"] = lv.max_miss
            out[f"level{lv.k}.accumulated"] = lv.accumulated
            if lv.k > 0:
                out[f"level{lv.k}.root"] = lv.count ** (1.0 / lv.k)
        out["dim_bound"] = fractal_dim_bound(self)
        return out


def build_covering(S: Map, cloud: MetricCloud, theta: float, k_max: int, x0: np.ndarray | None = None,
                   R: float | None = None) -> CoveringTree:
    """Cover S^k(sample) by weak-norm balls of radius theta^k R for k = 1..k_max.

    ``x0`` defaults to the sample point nearest the sample mean and ``R`` to the
    largest weak distance from it. Every level is verified on the sample.
    """
    if not 0 < theta < 1:
        raise ValueError("theta must lie in (0, 1)")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    X = cloud.points
    EH = cloud.n_H.embed(X)
    if x0 is None:
        i0 = int(np.argmin(np.linalg.norm(EH - EH.mean(axis=0), axis=1)))
        x0 = X[i0]
    e0 = cloud.n_H.embed(np.atleast_2d(x0))[0]
    dist0 = np.linalg.norm(EH - e0, axis=1)
    if R is None:
        R = float(dist0.max())
    elif dist0.max() > R * (1 + 1e-12):
        raise CoverageFailure(f"sample leaves the initial ball: distance {dist0.max():.6g} > R = {R:.6g}")
    if R == 0.0:
        R = 1.0

    levels = [CoveringLevel(0, R, np.atleast_2d(x0), float(dist0.max()), 1)]
    images = X
    accumulated = 1
    for k in range(1, k_max + 1):
        images = apply_map(S, images)
        E = cloud.n_H.embed(images)
        radius = theta ** k * R
        start = int(np.argmin(np.linalg.norm(E - E.mean(axis=0), axis=1)))
        idx, miss = greedy_cover(E, radius, start)
        centers = images[idx]
        # independent verification of the covering claim on the sample
        CE = E[idx]
        nearest = np.min(np.linalg.norm(E[:, None, :] - CE[None, :, :], axis=2), axis=1) if len(E) * len(CE) <= 4_000_000 \
            else np.array([np.min(np.linalg.norm(CE - e, axis=1)) for e in E])
        if nearest.max() > radius * (1 + 1e-12):
            raise CoverageFailure(f"level {k}: point at {nearest.max():.6g} from every center (radius {radius:.6g})")
        accumulated += len(idx)
        levels.append(CoveringLevel(k, radius, centers, float(nearest.max()), accumulated))

    counts = [lv.count for lv in levels[1:]]
    n_theta = counts[-1] ** (1.0 / len(counts))
    return CoveringTree(theta, R, np.asarray(x0), levels, float(n_theta), counts[0])


def dim_bound(n_theta: float, theta: float) -> float:
    """-ln N / ln theta, or 0 when N <= 1 (degenerate)."""
    if n_theta <= 1.0:
        return 0.0
    return -math.log(n_theta) / math.log(theta)


def fractal_dim_bound(tree: CoveringTree) -> float:
    """Dimension bound of ``tree``; 0 when degenerate (see ``tree.degenerate``)."""
    return dim_bound(tree.n_theta, tree.theta)


# ------------------------------------------------------------ box counting

@dataclass
class BoxDimension:
    dimension: float
    scales: np.ndarray
    counts: np.ndarray
    r2: float


def box_counting_dimension(A: np.ndarray, max_level: int = 16, min_count: int = 2,
                           saturation: float = 0.125) -> BoxDimension:
    """Slope of log N(eps) against log(1/eps) over dyadic eps = diam * 2^-j.

    A scale is usable when its box count is at least ``min_count`` and at most
    ``saturation`` times the number of points (beyond that the finite sample
    rather than the set controls the count).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    lo = A.min(axis=0)
    diam = float(np.max(A.max(axis=0) - lo))
    if diam == 0.0:
        raise InsufficientScales("sample has zero extent")
    scales, counts = [], []
    for j in range(1, max_level + 1):
        eps = diam * 2.0 ** -j
        n = len(np.unique(np.floor((A - lo) / eps).astype(np.int64), axis=0))
        if n > saturation * len(A):
            break
        if n >= min_count:
            scales.append(eps)
            counts.append(n)
    if len(scales) < 3:
        raise InsufficientScales(f"only {len(scales)} usable dyadic scales")
    x = np.log(1.0 / np.array(scales))
    y = np.log(np.array(counts, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    r2 = 1.0 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum()) if len(y) > 2 else 1.0
    return BoxDimension(float(slope), np.array(scales), np.array(counts), r2)


@dataclass
class HolderCheck:
    passed: bool
    dim_A: float
    dim_fA: float
    alpha: float
    slack: float


def holder_dim_property(f: Map, A: np.ndarray, alpha: float = 1.0, slack: float = 0.15) -> HolderCheck:
    """Box-counting check that dim f(A) <= dim A / alpha (+ slack)."""
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    fA = apply_map(f, A)
    dA = box_counting_dimension(A).dimension
    dfA = box_counting_dimension(fA).dimension
    return HolderCheck(dfA <= dA / alpha + slack, dA, dfA, alpha, slack)


# ------------------------------------------- reduced primitive-equation map

def state_to_vector(s: State) -> np.ndarray:
    return s.to_vector()


def h_embedding(g: Grid) -> EmbeddedNorm:
    """Embedding whose Euclidean norm is the discrete H norm."""
    sw = np.sqrt(g.w3).ravel()

    def embed(X):
        X = np.asarray(X, dtype=float).reshape(len(X), 4, -1)
        return (X * sw).reshape(len(X), -1)

    return EmbeddedNorm(embed, "H")


def v_embedding(p: PhysParams, g: Grid) -> EmbeddedNorm:
    """Embedding whose Euclidean norm is the discrete V norm (edge sums plus top traces)."""
    coef = {
        0: (1 / p.Re1, 1 / p.Re1, 1 / p.Re2, 0.0),
        1: (1 / p.Re1, 1 / p.Re1, 1 / p.Re2, 0.0),
        2: (1 / p.Rt1, 1 / p.Rt1, 1 / p.Rt2, p.alpha),
        3: (1 / p.Rt3, 1 / p.Rt3, 1 / p.Rt4, p.beta),
    }
    hs = (g.hx, g.hy, g.hz)
    weights = []
    for axis in range(3):
        w = np.array(hs[axis])
        for other in range(3):
            if other != axis:
                shape = [1, 1, 1]
                shape[other] = g.shape[other]
                w = w * g.trapezoid_weights("xyz"[other]).reshape(shape)
        weights.append(np.sqrt(w))
    top = np.sqrt(g.w2)

    def embed(X):
        X = np.asarray(X, dtype=float)
        n = len(X)
        F = X.reshape(n, 4, *g.shape)
        parts = []
        for c in range(4):
            f = F[:, c]
            for axis in range(3):
                d = np.diff(f, axis=axis + 1) / hs[axis]
                parts.append((math.sqrt(coef[c][axis]) * weights[axis] * d).reshape(n, -1))
            if coef[c][3] > 0:
                parts.append((math.sqrt(coef[c][3]) * top * f[..., -1]).reshape(n, -1))
        return np.concatenate(parts, axis=1)

    return EmbeddedNorm(embed, "V")


def pe_semigroup_map(p: PhysParams, g: Grid, t1: float, dt: float) -> Map:
    """Vector map x -> S(t1) x of the discrete primitive-equation semigroup."""
    cfg = StepConfig(dt=dt, t_end=t1, snapshot_every=max(1, int(round(t1 / dt))))
    forcing = forcing_fields(p, g)

    def S(x: np.ndarray) -> np.ndarray:
        s = State.from_vector(np.asarray(x, dtype=float), g, 0.0)
        return run(s, p, g, cfg, forcing=forcing).final.to_vector()

    return S


def pe_trajectory_sample(s0: State, p: PhysParams, g: Grid, dt: float, pre_time: float, count: int,
                         stride: int = 1) -> np.ndarray:
    """``count`` snapshots spaced ``stride`` steps apart, taken after ``pre_time``."""
    forcing = forcing_fields(p, g)
    if pre_time > 0:
        s0 = run(s0, p, g, StepConfig(dt=dt, t_end=pre_time, snapshot_every=10 ** 9), forcing=forcing).final
    cfg = StepConfig(dt=dt, t_end=(count - 1) * stride * dt, snapshot_every=stride)
    snaps = run(s0.replace(time=0.0), p, g, cfg, keep_snapshots=True, forcing=forcing).snapshots
    return np.array([s.to_vector() for s in snaps[:count]])


def pe_cloud(samples: np.ndarray, p: PhysParams, g: Grid) -> MetricCloud:
    return MetricCloud(samples, h_embedding(g), v_embedding(p, g))


@dataclass
class DoublingCheck:
    """Dimension bounds on a sample and on its every-other-point thinning."""

    bound_half: float
    bound_full: float
    tree_half: CoveringTree
    tree_full: CoveringTree
    tolerance: float

    @property
    def change(self) -> float:
        lo, hi = sorted((self.bound_half, self.bound_full))
        if hi == 0.0:
            return 0.0
        return (hi - lo) / hi if lo == 0.0 else hi / lo - 1.0

    @property
    def stable(self) -> bool:
        return math.isfinite(self.bound_full) and math.isfinite(self.bound_half) and self.change <= self.tolerance


def doubling_check(S: Map, cloud: MetricCloud, theta: float, k_max: int, tolerance: float = 0.25) -> DoublingCheck:
    """Compare the bound on ``cloud`` with the bound on every other point of it."""
    half = MetricCloud(cloud.points[::2], cloud.n_H, cloud.n_V)
    t_half = build_covering(S, half, theta, k_max)
    t_full = build_covering(S, cloud, theta, k_max)
    return DoublingCheck(fractal_dim_bound(t_half), fractal_dim_bound(t_full), t_half, t_full, tolerance)
