"""Geometry of the weighted upper half-space.

The ambient space is R^n x (0, inf) carrying the measure
dm(x) = dx_1 ... dx_n * x_{n+1}^(2*lam) dx_{n+1}.  This module owns exact box
measures, numerical ball measures, the adjacent families of shifted dyadic
grids, Whitney decompositions of the off-diagonal region, and the opposed
corner grandchildren used for kernel lower bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError, OutOfWindowError
from .quadrature import gauss_legendre

__all__ = [
    "SpaceParams",
    "Box",
    "DyadicCube",
    "AdjacentSystems",
    "WhitneyBox",
    "cube_measure",
    "ball_measure",
    "ball_measure_many",
    "doubling_ratio",
    "build_systems",
    "grid_children",
    "whitney_decompose",
    "whitney_lower_constant",
    "whitney_upper_constant",
    "adjacency_constant",
    "corner_subcubes",
    "unit_ball_volume",
]


@dataclass(frozen=True)
class SpaceParams:
    """Dimension parameters: n free coordinates plus one weighted coordinate."""

    n: int
    lam: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise InvalidInputError(f"n must be a nonnegative integer, got {self.n}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise InvalidInputError(f"lam must be positive and finite, got {self.lam}")

    @property
    def dim(self) -> int:
        return self.n + 1

    @property
    def lower_dim(self) -> float:
        # small-ball growth exponent
        return self.n + 1

    @property
    def upper_dim(self) -> float:
        # large-ball / boundary growth exponent
        return self.n + 1 + 2.0 * self.lam


@dataclass(frozen=True)
class Box:
    """Axis-parallel box given by corner tuples (len == space dimension)."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise InvalidInputError("corner dimension mismatch")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise InvalidInputError("box has negative side length")
        object.__setattr__(self, "lo", tuple(float(a) for a in self.lo))
        object.__setattr__(self, "hi", tuple(float(b) for b in self.hi))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    @property
    def center(self) -> tuple:
        return tuple(0.5 * (a + b) for a, b in zip(self.lo, self.hi))

    def contains(self, point: Sequence[float]) -> bool:
        # lower-closed, upper-open convention
        return all(a <= x < b for a, x, b in zip(self.lo, point, self.hi))

    def intersects(self, other: "Box") -> bool:
        return all(a < d and c < b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def dilate(self, factor: float) -> "Box":
        c = self.center
        return Box(
            tuple(cc - 0.5 * factor * s for cc, s in zip(c, self.sides)),
            tuple(cc + 0.5 * factor * s for cc, s in zip(c, self.sides)),
        )


def cube_measure(params: SpaceParams, box: Box) -> float:
    """Exact weighted measure of a box.

    Product of plain side lengths in the first n coordinates times
    (b^(2*lam+1) - a^(2*lam+1)) / (2*lam+1) in the last one.
    """
    if box.dim != params.dim:
        raise InvalidInputError(f"box dimension {box.dim} != space dimension {params.dim}")
    a, b = box.lo[-1], box.hi[-1]
    if a < 0:
        raise InvalidInputError("box extends below the half-space boundary")
    out = 1.0
    for j in range(params.n):
        out *= box.hi[j] - box.lo[j]
    e = 2.0 * params.lam + 1.0
    return out * (b**e - a**e) / e


def unit_ball_volume(n: int) -> float:
    """Lebesgue volume of the unit ball in R^n (n = 0 gives 1)."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def ball_measure(params: SpaceParams, center: Sequence[float], r: float, nodes: int = 48) -> float:
    return float(ball_measure_many(params, np.asarray(center, float)[None, :], np.array([r]), nodes)[0])


def ball_measure_many(params: SpaceParams, centers: np.ndarray, rs: np.ndarray, nodes: int = 48) -> np.ndarray:
    """Weighted measure of Euclidean balls intersected with the half-space.

    Slices the ball perpendicular to the weighted coordinate: with c the last
    coordinate of the center,

        m(B) = int  V_n(sqrt(r^2 - (z-c)^2)) z^(2*lam) dz

    over z in [max(0, c-r), c+r].  The substitution z = c + r*sin(phi) removes
    the square-root endpoint singularity, so Gauss-Legendre in phi converges
    fast.  n = 0 uses the closed form.
    """
    centers = np.asarray(centers, dtype=float)
    rs = np.asarray(rs, dtype=float)
    if centers.ndim != 2 or centers.shape[1] != params.dim:
        raise InvalidInputError("centers must have shape (N, dim)")
    if np.any(rs <= 0):
        raise InvalidInputError("radius must be positive")
    c = centers[:, -1]
    if np.any(c < 0):
        raise InvalidInputError("center below the half-space boundary")
    e = 2.0 * params.lam + 1.0
    if params.n == 0:
        lo = np.maximum(c - rs, 0.0)
        return ((c + rs) ** e - lo**e) / e
    vol = unit_ball_volume(params.n)
    x, w = gauss_legendre(nodes)
    # phi from phi0 (boundary clip) to pi/2
    phi0 = np.arcsin(np.clip(-c / rs, -1.0, 1.0))
    half = 0.5 * (0.5 * np.pi - phi0)
    phi = phi0[:, None] + half[:, None] * (x[None, :] + 1.0)
    z = c[:, None] + rs[:, None] * np.sin(phi)
    rho = rs[:, None] * np.cos(phi)
    integ = vol * rho**params.n * np.where(z > 0, z, 0.0) ** (2.0 * params.lam) * rs[:, None] * np.cos(phi)
    return (integ * w[None, :]).sum(axis=1) * half


def doubling_ratio(params: SpaceParams, center: Sequence[float], r: float, nodes: int = 48) -> float:
    """m(B(x, 2r)) / m(B(x, r)); lies in [2^(n+1), 2^(n+1+2*lam)]."""
    big = ball_measure(params, center, 2.0 * r, nodes)
    small = ball_measure(params, center, r, nodes)
    return big / small


# ---------------------------------------------------------------------------
# adjacent dyadic systems
# ---------------------------------------------------------------------------

_SHIFT_NUM = {0: (0, 0), 1: (1, 2), 2: (2, 1)}  # numerator of shift/3 at even, odd generation


def _shift_fraction(sigma: int, k: int) -> float:
    num = _SHIFT_NUM[sigma][k & 1]
    return num / 3.0


@dataclass(frozen=True)
class DyadicCube:
    """One cell of a shifted dyadic grid.

    m indexes the lattice position per coordinate; in the last coordinate
    m = -1 marks the truncated cell pinned at the half-space boundary that
    shifted grids need to keep partitioning [0, inf).
    """

    system: int
    k: int
    m: tuple
    lo: tuple
    hi: tuple

    @property
    def side(self) -> float:
        # nominal sidelength of the generation (boundary cells are shorter
        # in the last coordinate)
        return 2.0 ** (-self.k)

    @property
    def center(self) -> tuple:
        return tuple(0.5 * (a + b) for a, b in zip(self.lo, self.hi))

    @property
    def is_boundary_cell(self) -> bool:
        return self.m[-1] == -1

    @property
    def touches_floor(self) -> bool:
        return self.lo[-1] == 0.0

    def box(self) -> Box:
        return Box(self.lo, self.hi)

    def contains(self, point: Sequence[float]) -> bool:
        return self.box().contains(point)


def _grid_shifts(dim: int, nu: int, k: int) -> np.ndarray:
    digs = []
    v = nu
    for _ in range(dim):
        digs.append(v % 3)
        v //= 3
    return np.array([_shift_fraction(s, k) for s in digs])


def _grid_cube(dim: int, nu: int, k: int, m: Sequence[int]) -> DyadicCube:
    m = tuple(int(v) for v in m)
    if len(m) != dim:
        raise InvalidInputError("index dimension mismatch")
    s = _grid_shifts(dim, nu, k)
    h = 2.0 ** (-k)
    lo = []
    hi = []
    for j in range(dim - 1):
        lo.append((m[j] + s[j]) * h)
        hi.append((m[j] + 1 + s[j]) * h)
    mz = m[-1]
    sz = s[-1]
    if mz == -1:
        if sz == 0.0:
            raise InvalidInputError("system has no boundary cell at this generation")
        lo.append(0.0)
        hi.append(sz * h)
    elif mz >= 0:
        lo.append((mz + sz) * h)
        hi.append((mz + 1 + sz) * h)
    else:
        raise InvalidInputError("last-coordinate index must be >= -1")
    return DyadicCube(nu, k, m, tuple(lo), tuple(hi))


def grid_children(dim: int, cube: DyadicCube) -> list:
    """Generation k+1 cells of the cube's own grid, partitioning the cube.

    Interior cells split at their midpoints.  The truncated boundary cell
    instead follows the next generation's shift: its floor child is shorter
    than half, and when the next shift swallows the whole cell the cube is
    its own single child.
    """
    k2 = cube.k + 1
    s2 = _grid_shifts(dim, cube.system, k2)
    h2 = 2.0 ** (-k2)
    per_axis = []
    for j in range(dim):
        lo, hi = cube.lo[j], cube.hi[j]
        if j < dim - 1 or cube.m[j] >= 0:
            a = int(round((lo - s2[j] * h2) / h2))
            per_axis.append([a, a + 1])
        else:
            cand = [-1] if s2[j] > 0 else []
            m = 0
            while (m + s2[j]) * h2 < hi - 1e-12:
                cand.append(m)
                m += 1
            per_axis.append(cand)
    return [_grid_cube(dim, cube.system, k2, idx) for idx in _product(per_axis)]


@dataclass(frozen=True)
class AdjacentSystems:
    """kappa = 3^(n+1) shifted dyadic grids on the half-space.

    Per coordinate the three shift tracks are 0 and the two alternating
    thirds patterns (1/3, 2/3) and (2/3, 1/3) in units of the sidelength;
    alternation with generation parity is what makes each track nested.
    System index nu encodes one track per coordinate in base 3, so system 0
    is the standard grid.
    """

    params: SpaceParams
    kappa: int
    delta: float
    window: Box
    k_min: int
    k_max: int

    def __post_init__(self):
        if self.window.dim != self.params.dim:
            raise InvalidInputError("window dimension mismatch")
        if self.window.lo[-1] < 0:
            raise InvalidInputError("window must sit inside the half-space")

    def shifts(self, nu: int, k: int) -> np.ndarray:
        """Per-coordinate shift in units of 2^-k for system nu at generation k."""
        if not (0 <= nu < self.kappa):
            raise InvalidInputError(f"system index {nu} out of range")
        return _grid_shifts(self.params.dim, nu, k)

    def cube(self, nu: int, k: int, m: Sequence[int]) -> DyadicCube:
        if not (0 <= nu < self.kappa):
            raise InvalidInputError(f"system index {nu} out of range")
        return _grid_cube(self.params.dim, nu, k, m)

    def containing_cube(self, nu: int, point: Sequence[float], k: int) -> DyadicCube:
        """Generation-k cube of system nu containing the point (lower-closed)."""
        point = tuple(float(v) for v in point)
        if not self.window.contains(point):
            raise OutOfWindowError(f"point {point} outside the enumerated window")
        s = self.shifts(nu, k)
        scale = 2.0**k
        m = []
        for j in range(self.params.dim - 1):
            m.append(int(math.floor(point[j] * scale - s[j])))
        v = point[-1] * scale - s[-1]
        if point[-1] < 0:
            raise InvalidInputError("point below the half-space boundary")
        m.append(int(math.floor(v)) if v >= 0 else -1)
        return self.cube(nu, k, m)

    def cubes(self, nu: int, k: int) -> list:
        """All generation-k cubes of system nu that intersect the window."""
        if not (self.k_min <= k <= self.k_max):
            raise OutOfWindowError(f"generation {k} outside [{self.k_min}, {self.k_max}]")
        s = self.shifts(nu, k)
        scale = 2.0**k
        ranges = []
        for j in range(self.params.dim - 1):
            a = int(math.floor(self.window.lo[j] * scale - s[j]))
            b = int(math.ceil(self.window.hi[j] * scale - s[j]))
            ranges.append(range(a, b))
        a = int(math.floor(max(self.window.lo[-1], 0.0) * scale - s[-1]))
        b = int(math.ceil(self.window.hi[-1] * scale - s[-1]))
        lo_last = -1 if (s[-1] > 0 and self.window.lo[-1] == 0.0) else max(a, 0 if s[-1] == 0 else a)
        last_range = [m for m in range(max(lo_last, -1), b) if m >= 0 or (m == -1 and s[-1] > 0)]
        ranges.append(last_range)
        out = []
        wbox = self.window
        for idx in _product(ranges):
            c = self.cube(nu, k, idx)
            if c.box().intersects(wbox):
                out.append(c)
        return out

    def children(self, cube: DyadicCube) -> list:
        return grid_children(self.params.dim, cube)

    def parent(self, cube: DyadicCube) -> DyadicCube:
        if cube.k <= self.k_min:
            raise OutOfWindowError("cube already at the coarsest enumerated generation")
        c = cube.center
        s = self.shifts(cube.system, cube.k - 1)
        scale = 2.0 ** (cube.k - 1)
        m = []
        for j in range(self.params.dim - 1):
            m.append(int(math.floor(c[j] * scale - s[j])))
        v = c[-1] * scale - s[-1]
        m.append(int(math.floor(v)) if v >= 0 else -1)
        return self.cube(cube.system, cube.k - 1, m)


def _product(ranges: Iterable) -> Iterable[tuple]:
    ranges = [list(r) for r in ranges]
    if not ranges:
        yield ()
        return
    idx = [0] * len(ranges)
    while True:
        yield tuple(ranges[j][idx[j]] for j in range(len(ranges)))
        j = len(ranges) - 1
        while j >= 0:
            idx[j] += 1
            if idx[j] < len(ranges[j]):
                break
            idx[j] = 0
            j -= 1
        if j < 0:
            return


def build_systems(
    params: SpaceParams,
    window: Box,
    k_range: tuple = (-2, 6),
    kappa: int | None = None,
    delta: float = 0.5,
) -> AdjacentSystems:
    """Construct the adjacent shifted grids over a bounded window.

    Only delta = 1/2 is supported: the published shift pattern
    (0, 1/3, 2/3) * 2^-k and the count kappa = 3^(n+1) are tied to halving.
    """
    if delta != 0.5:
        raise InvalidInputError("only delta = 1/2 grids are supported")
    full = 3**params.dim
    if kappa is None:
        kappa = full
    if not (1 <= kappa <= full):
        raise InvalidInputError(f"kappa must lie in [1, {full}]")
    k_min, k_max = int(k_range[0]), int(k_range[1])
    if k_min > k_max:
        raise InvalidInputError("empty generation range")
    return AdjacentSystems(params, kappa, delta, window, k_min, k_max)


def adjacency_constant(params: SpaceParams) -> float:
    """Published constant: containing cube sits inside B(x, C * r).

    For a ball with 2^-(k+3) < r <= 2^-(k+2) the generation-k cube has
    diameter <= sqrt(n+1) * 2^-k < sqrt(n+1) * 8r.
    """
    return 8.0 * math.sqrt(params.dim)


# ---------------------------------------------------------------------------
# Whitney decomposition of the off-diagonal region
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WhitneyBox:
    """Product box Q x Qhat of equal-generation standard dyadic cubes."""

    q: Box
    qhat: Box
    k: int

    @property
    def side(self) -> float:
        return 2.0 ** (-self.k)


def whitney_lower_constant(n: int) -> float:
    return math.sqrt(2.0 * (n + 1)) / 2.0


def whitney_upper_constant(n: int) -> float:
    return 4.0 * math.sqrt(2.0 * (n + 1))


def _box_gap(lo1, hi1, lo2, hi2) -> float:
    g = 0.0
    for a1, b1, a2, b2 in zip(lo1, hi1, lo2, hi2):
        gap = max(a2 - b1, a1 - b2, 0.0)
        g += gap * gap
    return math.sqrt(g)


def whitney_decompose(params: SpaceParams, window: Box, depth: int) -> list:
    """Maximal dyadic product boxes P = Q x Qhat with 2*dist(P, diag) >= diam(P).

    Every emitted box then satisfies

        c1 * l(P) <= dist(P, diagonal) <= c2 * l(P)

    with c1 = sqrt(2(n+1))/2 and c2 = 4*sqrt(2(n+1)) (the selection rule gives
    3*sqrt(2(n+1)) on the right; c2 is published with slack).  The recursion
    refines through `depth` generations below the coarsest window-filling
    scale, leaving a diagonal collar of width about 1.5 * diam at the finest
    generation uncovered.
    """
    if depth < 1:
        raise InvalidInputError("depth must be >= 1")
    if window.dim != params.dim:
        raise InvalidInputError("window dimension mismatch")
    if window.lo[-1] < 0:
        raise InvalidInputError("window must sit inside the half-space")
    d = params.dim
    wmax = max(window.sides)
    if wmax <= 0:
        raise InvalidInputError("window is degenerate")
    # root sidelength >= window side: roots can never satisfy the selection
    # rule, so the two-sided distance bound holds for every emitted box.
    k_root = -math.ceil(math.log2(wmax))
    k_last = k_root + depth
    diam_factor = math.sqrt(2.0 * d)

    out: list = []

    def visit(k: int, qlo, qhat_lo):
        h = 2.0 ** (-k)
        qhi = tuple(a + h for a in qlo)
        qhat_hi = tuple(a + h for a in qhat_lo)
        qbox = Box(qlo, qhi)
        qhat = Box(qhat_lo, qhat_hi)
        if not (qbox.intersects(window) and qhat.intersects(window)):
            return
        gap = _box_gap(qlo, qhi, qhat_lo, qhat_hi)
        dist_diag = gap / math.sqrt(2.0)
        if 2.0 * dist_diag >= diam_factor * h and gap > 0.0:
            out.append(WhitneyBox(qbox, qhat, k))
            return
        if k >= k_last:
            return
        h2 = 0.5 * h
        for da in np.ndindex(*([2] * d)):
            clo = tuple(qlo[j] + da[j] * h2 for j in range(d))
            if clo[-1] < 0:
                continue
            for db in np.ndindex(*([2] * d)):
                dlo = tuple(qhat_lo[j] + db[j] * h2 for j in range(d))
                if dlo[-1] < 0:
                    continue
                visit(k + 1, clo, dlo)

    h0 = 2.0 ** (-k_root)
    idx_ranges = []
    for j in range(d):
        a = int(math.floor(window.lo[j] / h0))
        b = int(math.ceil(window.hi[j] / h0))
        idx_ranges.append(range(a, b))
    roots = [tuple(i * h0 for i in idx) for idx in _product(idx_ranges)]
    for qlo in roots:
        if qlo[-1] < 0:
            continue
        for qhat_lo in roots:
            if qhat_lo[-1] < 0:
                continue
            visit(k_root, qlo, qhat_lo)
    return out


# ---------------------------------------------------------------------------
# opposed corner grandchildren
# ---------------------------------------------------------------------------


def corner_subcubes(systems: AdjacentSystems, cube: DyadicCube, signs: Sequence[int]):
    """Grandchildren (A, B) of a cube realizing a fixed sign pattern.

    For sign +1 in coordinate j, A takes the top quarter and B the bottom
    quarter, so sign_j * (x_j - y_j) >= 2^-(k+1) for all x in A, y in B.
    """
    if cube.is_boundary_cell:
        raise InvalidInputError("corner construction needs a full (untruncated) cube")
    signs = tuple(int(s) for s in signs)
    if len(signs) != systems.params.dim or any(s not in (-1, 1) for s in signs):
        raise InvalidInputError("signs must be a tuple of +-1 per coordinate")
    k2 = cube.k + 2
    s_here = systems.shifts(cube.system, cube.k)
    s_there = systems.shifts(cube.system, k2)
    # same parity => same shift fraction; grandchild indices stay integral
    if not np.allclose(s_here, s_there):
        raise InvalidInputError("shift pattern broke generation-parity alignment")
    m_a = []
    m_b = []
    for j, sg in enumerate(signs):
        base = 4 * cube.m[j] + int(round(3 * s_here[j]))
        if sg > 0:
            m_a.append(base + 3)
            m_b.append(base)
        else:
            m_a.append(base)
            m_b.append(base + 3)
    return systems.cube(cube.system, k2, m_a), systems.cube(cube.system, k2, m_b)
