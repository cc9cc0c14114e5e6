"""Sequence and smoothness norms: Lorentz, mean oscillation, Besov, heat maximal.

All integrals over the half-space are truncated to explicit windows and carry
sensitivity data so truncation error is measured rather than assumed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .geometry import (
    AdjacentSystems,
    Box,
    DyadicCube,
    SpaceParams,
    ball_measure,
    ball_measure_many,
    cube_measure,
)
from .kernels import HeatKernelEvaluator
from .quadrature import box_grid_rule
from .symbols import Symbol

__all__ = [
    "LorentzParams",
    "lorentz_norm",
    "mean_oscillation",
    "OscillationProfile",
    "osc_profile",
    "OscNormResult",
    "osc_norm",
    "BesovResult",
    "besov_norm_direct",
    "besov_radius_multiplier",
    "besov_norm_dyadic",
    "heat_extension",
    "heat_maximal",
    "mo_power_equivalence_report",
]


@dataclass(frozen=True)
class LorentzParams:
    """Exponents of the sequence space; quasi-norm ranges are allowed."""

    p: float
    q: float

    def __post_init__(self):
        if not self.p > 0:
            raise InvalidInputError("p must be positive")
        if not (self.q > 0 or math.isinf(self.q)):
            raise InvalidInputError("q must be positive or infinite")


def lorentz_norm(seq, lp: LorentzParams) -> float:
    """Rearrangement norm: (sum a*_k^q k^(q/p-1))^(1/q), sup k^(1/p) a*_k at q=inf."""
    a = np.asarray(seq, float).ravel()
    if a.size == 0:
        return 0.0
    if np.any(a < 0):
        raise InvalidInputError("sequence entries must be nonnegative")
    a = np.sort(a)[::-1]
    k = np.arange(1, a.size + 1, dtype=float)
    if math.isinf(lp.q):
        return float(np.max(k ** (1.0 / lp.p) * a))
    with np.errstate(divide="ignore"):
        s = np.sum(a**lp.q * k ** (lp.q / lp.p - 1.0))
    return float(s ** (1.0 / lp.q))


def _as_box(cube) -> Box:
    if isinstance(cube, DyadicCube):
        return cube.box()
    if isinstance(cube, Box):
        return cube
    raise InvalidInputError("expected a dyadic cube or a box")


def mean_oscillation(params: SpaceParams, b, cube, r: float = 1.0, cells: int = 2, nodes: int = 8) -> float:
    """(average of |b - mean(b)|^r over the cube, weighted measure)^(1/r)."""
    if r < 1:
        raise InvalidInputError("oscillation power must be >= 1")
    if getattr(b, "is_constant", False):
        return 0.0
    box = _as_box(cube)
    pts, wts = box_grid_rule(params.lam, box.lo, box.hi, cells, nodes)
    vals = np.asarray(b(pts), float)
    m = cube_measure(params, box)
    mean = float(np.sum(wts * vals)) / m
    osc = float(np.sum(wts * np.abs(vals - mean) ** r)) / m
    return osc ** (1.0 / r)


@dataclass
class OscillationProfile:
    """Mean-oscillation values over the cubes of the adjacent systems."""

    r: float
    k_range: tuple
    window: Optional[Box]
    entries: list = field(default_factory=list)  # (nu, k, m-tuple, value)

    def values(self, nu: Optional[int] = None, k_range: Optional[tuple] = None) -> np.ndarray:
        out = [
            v
            for (s, k, _m, v) in self.entries
            if (nu is None or s == nu) and (k_range is None or k_range[0] <= k <= k_range[1])
        ]
        return np.asarray(out, float)

    def systems(self) -> list:
        return sorted({s for (s, _k, _m, _v) in self.entries})

    def to_csv(self) -> str:
        lines = ["system,k,cube,value"]
        for s, k, m, v in self.entries:
            mid = ";".join(str(i) for i in m)
            lines.append(f"{s},{k},{mid},{v!r}")
        return "\n".join(lines) + "\n"


def osc_profile(
    params: SpaceParams,
    systems: AdjacentSystems,
    b,
    r: float = 1.0,
    k_range: Optional[tuple] = None,
    window: Optional[Box] = None,
    cells: int = 2,
    nodes: int = 8,
    powers: Optional[tuple] = None,
):
    """Collect MO_Q^r over every system and generation in range.

    Cubes where the symbol vanishes identically contribute exact zeros and are
    skipped.  With `powers` set, returns one profile per power, sharing the
    cube sweep.
    """
    if k_range is None:
        k_range = (systems.k_min, systems.k_max)
    rs = powers if powers is not None else (r,)
    profs = [OscillationProfile(rr, k_range, window) for rr in rs]
    if getattr(b, "is_constant", False):
        return profs[0] if powers is None else profs
    support = getattr(b, "support", None)
    for nu in range(systems.kappa):
        for k in range(k_range[0], k_range[1] + 1):
            for cube in systems.cubes(nu, k):
                cbox = cube.box()
                if window is not None and not cbox.intersects(window):
                    continue
                if support is not None and not cbox.intersects(support):
                    continue
                pts, wts = box_grid_rule(params.lam, cbox.lo, cbox.hi, cells, nodes)
                vals = np.asarray(b(pts), float)
                m = cube_measure(params, cbox)
                mean = float(np.sum(wts * vals)) / m
                dev = np.abs(vals - mean)
                for prof in profs:
                    mo = (float(np.sum(wts * dev**prof.r)) / m) ** (1.0 / prof.r)
                    prof.entries.append((nu, k, cube.m, mo))
    return profs[0] if powers is None else profs


@dataclass(frozen=True)
class OscNormResult:
    value: float
    per_system: tuple
    shrunk_value: float  # same norm with the generation range narrowed by one
    r: float
    k_range: tuple


def osc_norm(
    params: SpaceParams,
    systems: AdjacentSystems,
    b,
    lp: LorentzParams,
    r: float = 1.0,
    k_range: Optional[tuple] = None,
    window: Optional[Box] = None,
    cells: int = 2,
    nodes: int = 8,
    profile: Optional[OscillationProfile] = None,
) -> OscNormResult:
    """Sum over systems of the Lorentz norm of the truncated MO profile."""
    if profile is None:
        profile = osc_profile(params, systems, b, r, k_range, window, cells, nodes)
    kr = profile.k_range
    per = tuple(lorentz_norm(profile.values(nu=nu), lp) for nu in range(systems.kappa))
    inner = (kr[0] + 1, kr[1] - 1)
    shrunk = sum(
        lorentz_norm(profile.values(nu=nu, k_range=inner), lp) for nu in range(systems.kappa)
    )
    return OscNormResult(float(sum(per)), per, float(shrunk), profile.r, kr)


# ---------------------------------------------------------------------------
# Besov norms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BesovResult:
    value: float
    collar: float
    half_collar_value: float
    p: float
    window: Box


def _default_besov_window(params: SpaceParams, b) -> Box:
    sup = getattr(b, "support", None)
    if sup is None:
        raise InvalidInputError("besov truncation needs a window or a support hint")
    big = sup.dilate(4.0)
    lo = list(big.lo)
    lo[-1] = max(lo[-1], 0.0)
    return Box(tuple(lo), big.hi)


def besov_pair_sum(
    params: SpaceParams,
    vals: np.ndarray,
    pts: np.ndarray,
    wts: np.ndarray,
    p: float,
    collar: float,
    pair_mask=None,
    ball_nodes: int = 32,
) -> tuple:
    """Truncated double integral of |b(x)-b(y)|^p / m(B(x,|x-y|))^2.

    Returns (sum with separation >= collar, sum with separation >= collar/2).
    `pair_mask(i_block, j)` may further restrict the pairs (region splits).
    """
    n_pts = pts.shape[0]
    total = 0.0
    total_half = 0.0
    block = max(1, 250_000 // max(n_pts, 1))
    for i0 in range(0, n_pts, block):
        i1 = min(i0 + block, n_pts)
        diff = pts[i0:i1, None, :] - pts[None, :, :]
        sep = np.sqrt(np.sum(diff * diff, axis=2))
        keep = sep >= 0.5 * collar
        if pair_mask is not None:
            keep &= pair_mask(np.arange(i0, i1), np.arange(n_pts))
        if not np.any(keep):
            continue
        centers = np.broadcast_to(pts[i0:i1, None, :], diff.shape)[keep]
        vol = ball_measure_many(params, centers, sep[keep], nodes=ball_nodes)
        dv = np.abs(vals[i0:i1, None] - vals[None, :])[keep]
        ww = (wts[i0:i1, None] * wts[None, :])[keep]
        contrib = ww * dv**p / vol**2
        total_half += float(np.sum(contrib))
        total += float(np.sum(contrib[sep[keep] >= collar]))
    return total, total_half


def besov_norm_direct(
    params: SpaceParams,
    b,
    p: float,
    window: Optional[Box] = None,
    cells: int = 16,
    nodes: int = 4,
    collar: Optional[float] = None,
    ball_nodes: int = 32,
) -> BesovResult:
    """Direct double-integral Besov norm over a truncation window."""
    if p <= params.dim:
        raise InvalidInputError("direct besov norm needs p > n+1")
    if getattr(b, "is_constant", False):
        win = window if window is not None else Box((0.0,) * params.dim, (1.0,) * params.dim)
        return BesovResult(0.0, 0.0, 0.0, p, win)
    if window is None:
        window = _default_besov_window(params, b)
    pts, wts = box_grid_rule(params.lam, window.lo, window.hi, cells, nodes)
    if collar is None:
        # a couple of cell diagonals: pairs below this are quadrature noise
        diag = math.sqrt(sum((s / cells) ** 2 for s in window.sides))
        collar = 2.0 * diag
    vals = np.asarray(b(pts), float)
    total, total_half = besov_pair_sum(params, vals, pts, wts, p, collar, ball_nodes=ball_nodes)
    return BesovResult(total ** (1.0 / p), collar, total_half ** (1.0 / p), p, window)


def besov_radius_multiplier(n: int) -> float:
    """Radius multiple c_n: smallest with B(c_Q, c_n 2^-k) covering 3Q, plus margin."""
    return 1.5 * math.sqrt(n + 1) * 1.05


def besov_norm_dyadic(
    params: SpaceParams,
    systems: AdjacentSystems,
    b,
    p: float,
    k_range: Optional[tuple] = None,
    window: Optional[Box] = None,
    nu: int = 0,
    cube_cells: int = 2,
    ball_cells: int = 8,
    nodes: int = 4,
) -> float:
    """Dyadic Besov form: cube averages against ball averages, one system."""
    if getattr(b, "is_constant", False):
        return 0.0
    if k_range is None:
        k_range = (systems.k_min, systems.k_max)
    cn = besov_radius_multiplier(params.n)
    support = getattr(b, "support", None)
    total = 0.0
    for k in range(k_range[0], k_range[1] + 1):
        radius = cn * 2.0**-k
        for cube in systems.cubes(nu, k):
            cbox = cube.box()
            if window is not None and not cbox.intersects(window):
                continue
            if support is not None:
                # both factors vanish when the ball misses the support
                c = np.asarray(cbox.center)
                blo = c - radius
                bhi = c + radius
                if any(
                    bhi[j] <= support.lo[j] or blo[j] >= support.hi[j]
                    for j in range(params.dim)
                ):
                    continue
            qp, qw = box_grid_rule(params.lam, cbox.lo, cbox.hi, cube_cells, nodes)
            qm = cube_measure(params, cbox)
            c = np.asarray(cbox.center)
            blo = list(c - radius)
            blo[-1] = max(blo[-1], 0.0)
            bhi = c + radius
            bp, bw = box_grid_rule(params.lam, tuple(blo), tuple(bhi), ball_cells, nodes)
            inside = np.sum((bp - c) ** 2, axis=1) < radius * radius
            bp = bp[inside]
            bw = bw[inside]
            bm = float(np.sum(bw))  # masked-rule ball mass, consistent normalization
            if bm <= 0:
                continue
            fq = np.asarray(b(qp), float)
            fb = np.asarray(b(bp), float)
            dv = np.abs(fq[:, None] - fb[None, :]) ** p
            total += float(qw @ dv @ bw) / (qm * bm)
    return total ** (1.0 / p)


# ---------------------------------------------------------------------------
# heat extension and the maximal function
# ---------------------------------------------------------------------------


def _extension_rule(params: SpaceParams, b, y, s: float, cells: int, nodes: int, reach: float = 14.0):
    sup = b.support
    if sup is None:
        raise InvalidInputError("heat extension needs a support hint")
    lo, hi = [], []
    for j in range(params.dim):
        a0 = max(sup.lo[j], y[j] - reach * s)
        a1 = min(sup.hi[j], y[j] + reach * s)
        if j == params.dim - 1:
            a0 = max(a0, 0.0)
        if a0 >= a1:
            return None
        lo.append(a0)
        hi.append(a1)
    return box_grid_rule(params.lam, tuple(lo), tuple(hi), cells, nodes)


def heat_extension(
    params: SpaceParams,
    b,
    t: float,
    x,
    evaluator: Optional[HeatKernelEvaluator] = None,
    cells: int = 12,
    nodes: int = 8,
) -> float:
    """Value of the heat semigroup applied to b, at scale t and point x."""
    if getattr(b, "is_constant", False):
        return float(b.params.get("value", 1.0))
    if evaluator is None:
        evaluator = HeatKernelEvaluator(params)
    x = np.asarray(x, float).ravel()
    rule = _extension_rule(params, b, x, t, cells, nodes)
    if rule is None:
        return 0.0
    pts, wts = rule
    kv = np.asarray(evaluator.kernel(t, x, pts), float)
    return float(np.sum(wts * kv * np.asarray(b(pts), float)))


def heat_maximal(
    params: SpaceParams,
    b,
    x,
    t: float,
    evaluator: Optional[HeatKernelEvaluator] = None,
    delta: float = 0.25,
    ny: int = 5,
    ns: int = 4,
    cells: int = 12,
    nodes: int = 8,
) -> float:
    """Sampled sup of s * |full gradient of the heat extension| near (x, t).

    The sup runs over y in the ball B(x, t) inside the half-space and scales
    s in [delta*t, t]; the gradient includes the scale slot.  Constants give
    exactly zero since the kernel integrates to one at every scale.
    """
    if getattr(b, "is_constant", False):
        return 0.0
    if evaluator is None:
        evaluator = HeatKernelEvaluator(params)
    x = np.asarray(x, float).ravel()
    d = params.dim
    offs = np.linspace(-1.0, 1.0, ny)
    axes = [x[j] + t * offs for j in range(d)]
    floor = max(1e-9, 1e-6 * t)
    best = 0.0
    mesh = np.meshgrid(*axes, indexing="ij")
    ypts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.sum((ypts - x) ** 2, axis=1) <= t * t + 1e-12
    ypts = ypts[keep]
    ypts[:, -1] = np.maximum(ypts[:, -1], floor)
    svals = np.geomspace(delta * t, t, ns)
    for s in svals:
        for y in ypts:
            rule = _extension_rule(params, b, y, s, cells, nodes)
            if rule is None:
                continue
            pts, wts = rule
            bv = np.asarray(b(pts), float)
            g2 = 0.0
            for j in range(d):
                alpha = tuple(1 if i == j else 0 for i in range(d))
                dv = evaluator.derivative_many(s, y, pts, alpha)
                g2 += float(np.sum(wts * dv * bv)) ** 2
            dv = evaluator.derivative_many(s, y, pts, "time")
            g2 += float(np.sum(wts * dv * bv)) ** 2
            best = max(best, s * math.sqrt(g2))
    return best


def mo_power_equivalence_report(
    params: SpaceParams,
    systems: AdjacentSystems,
    b,
    lp: LorentzParams,
    k_range: Optional[tuple] = None,
    window: Optional[Box] = None,
    cells: int = 2,
    nodes: int = 8,
) -> dict:
    """Lorentz norms of the MO profile at powers 1 and 3, per system."""
    prof1, prof3 = osc_profile(
        params, systems, b, k_range=k_range, window=window, cells=cells, nodes=nodes, powers=(1.0, 3.0)
    )
    per = []
    for nu in range(systems.kappa):
        v1 = lorentz_norm(prof1.values(nu=nu), lp)
        v3 = lorentz_norm(prof3.values(nu=nu), lp)
        per.append((v1, v3))
    s1 = float(sum(v for v, _ in per))
    s3 = float(sum(v for _, v in per))
    return {
        "per_system": per,
        "sum": (s1, s3),
        "ratio": (s3 / s1) if s1 > 0 else (0.0 if s3 == 0 else math.inf),
    }
