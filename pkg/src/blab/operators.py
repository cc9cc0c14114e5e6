"""Discretized Riesz commutators: weighted grids, singular values, factorization
coefficients, and the trace pairing.

The discretization is the symmetrized Nystrom form: entry (i, j) is
sqrt(w_i) * kernel(x_i, x_j) * sqrt(w_j) with exact cell measures as weights,
so singular values approximate those of the integral operator on the weighted
L2 space restricted to the box.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import svdvals

from .errors import InvalidInputError, SignViolationError
from .geometry import Box, SpaceParams, cube_measure
from .kernels import RieszKernelEvaluator, _gauss_factor, _bessel_deriv_mixed
from .norms import LorentzParams, lorentz_norm, mean_oscillation
from .quadrature import box_grid_rule
from .wavelets import build_alpert_basis, orthonormal_poly_basis

__all__ = [
    "WeightedGrid",
    "build_grid",
    "DiscreteOperator",
    "riesz_matrix",
    "commutator_matrix",
    "singular_values",
    "schatten_lorentz",
    "hs_direct",
    "NWOCoefficientTable",
    "nwo_coefficients",
    "beta_oscillation",
    "trace_pairing",
]

MATRIX_CAP = 4096


@dataclass(frozen=True)
class WeightedGrid:
    """Uniform cell partition of a box with exact weighted cell measures."""

    params: SpaceParams
    box: Box
    resolution: int
    axes: tuple  # per-axis center arrays
    nodes: np.ndarray  # (N, dim), C-order over axes (first axis slowest)
    weights: np.ndarray  # (N,)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def refine(self) -> "WeightedGrid":
        return build_grid(self.params, self.box, 2 * self.resolution)


def build_grid(params: SpaceParams, box: Box, resolution: int) -> WeightedGrid:
    """Split each axis into `resolution` equal cells; nodes at centroids."""
    if box.dim != params.dim:
        raise InvalidInputError("grid box dimension mismatch")
    if resolution < 2:
        raise InvalidInputError("resolution must be at least 2 cells per side")
    if box.lo[-1] < 0:
        raise InvalidInputError("grid box extends below the boundary")
    if resolution ** params.dim > MATRIX_CAP:
        raise InvalidInputError(
            f"grid of {resolution ** params.dim} cells exceeds the dense cap {MATRIX_CAP}"
        )
    axes = []
    axis_w = []
    for j in range(params.dim):
        edges = np.linspace(box.lo[j], box.hi[j], resolution + 1)
        axes.append(0.5 * (edges[:-1] + edges[1:]))
        if j < params.n:
            axis_w.append(np.diff(edges))
        else:
            e = 2.0 * params.lam + 1.0
            axis_w.append((edges[1:] ** e - edges[:-1] ** e) / e)
    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=1)
    wmesh = np.meshgrid(*axis_w, indexing="ij")
    weights = np.ones(nodes.shape[0])
    for wm in wmesh:
        weights = weights * wm.ravel()
    return WeightedGrid(params, box, resolution, tuple(axes), nodes, weights)


@dataclass(frozen=True)
class DiscreteOperator:
    grid: WeightedGrid
    matrix: np.ndarray
    diagonal_policy: str = "zero"

    def save(self, path_base: str):
        """Binary row-major float64 little-endian dump plus a JSON sidecar."""
        self.matrix.astype("<f8").tofile(path_base + ".bin")
        meta = {
            "shape": list(self.matrix.shape),
            "dtype": "<f8",
            "order": "row-major",
            "diagonal_policy": self.diagonal_policy,
            "grid": {
                "box": {"lo": list(self.grid.box.lo), "hi": list(self.grid.box.hi)},
                "resolution": self.grid.resolution,
                "n": self.grid.params.n,
                "lam": self.grid.params.lam,
            },
        }
        with open(path_base + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)


def _riesz_matrix_pairwise(grid: WeightedGrid, ev: RieszKernelEvaluator) -> np.ndarray:
    n = grid.size
    out = np.zeros((n, n))
    idx = np.arange(n)
    for i0 in range(0, n, 8):
        i1 = min(i0 + 8, n)
        rows = []
        cols = []
        for i in range(i0, i1):
            rows.extend([i] * (n - 1))
            cols.extend(idx[idx != i])
        xs = grid.nodes[rows]
        ys = grid.nodes[cols]
        out[rows, cols] = ev.kernel_many(xs, ys)
    return out


def _riesz_matrix_tensor(grid: WeightedGrid, ev: RieszKernelEvaluator) -> np.ndarray:
    """Fast path for n = 1: translation invariance along the free axis.

    The subordination integrand splits into a Gaussian factor in the first
    coordinate difference (2R-1 distinct values) and a Bessel factor over the
    last-coordinate pairs (R^2 values), so each scale costs O(R^2), not O(R^4).
    """
    ua, za = grid.axes
    na, nb = ua.size, za.size
    hu = float(ua[1] - ua[0])
    hz = float(za[1] - za[0])
    deltas = (np.arange(1 - na, na)) * hu
    zz1 = np.repeat(za, nb)
    zz2 = np.tile(za, nb)
    sep_min = min(hu, hz)
    diam = math.sqrt(sum(s * s for s in grid.box.sides))
    scale = max(float(za.max()), diam)
    u, w = ev._u_grid(sep_min, scale)
    da = 1 if ev.ell == grid.params.dim else 0
    p1 = 1 if ev.ell == 1 else 0
    gmat = np.empty((u.size, deltas.size))
    bmat = np.empty((u.size, nb * nb))
    for i, t in enumerate(u):
        gmat[i] = _gauss_factor(t, deltas, p1, 0)
        bmat[i] = _bessel_deriv_mixed(grid.params.lam, t, zz1, zz2, da, 0, ev.theta_base)
    comp = (gmat * w[:, None]).T @ bmat  # (2R-1, nb*nb)
    comp *= 2.0 / math.sqrt(math.pi)
    dmat = np.arange(na)[:, None] - np.arange(na)[None, :] + na - 1
    k4 = comp[dmat].reshape(na, na, nb, nb).transpose(0, 2, 1, 3)
    out = np.ascontiguousarray(k4).reshape(grid.size, grid.size)
    np.fill_diagonal(out, 0.0)
    return out


def riesz_matrix(grid: WeightedGrid, ev: RieszKernelEvaluator) -> np.ndarray:
    """Raw kernel matrix K(x_i, x_j), diagonal zeroed (separated use only)."""
    if ev.params != grid.params:
        raise InvalidInputError("evaluator and grid disagree on space parameters")
    if grid.params.n == 1:
        return _riesz_matrix_tensor(grid, ev)
    return _riesz_matrix_pairwise(grid, ev)


def commutator_matrix(
    b,
    grid: WeightedGrid,
    ev: RieszKernelEvaluator,
    kernel: Optional[np.ndarray] = None,
) -> DiscreteOperator:
    """Symmetrized matrix of (b(x)-b(y)) K(x,y); zero diagonal policy.

    A precomputed `kernel` matrix (from riesz_matrix on the same grid) may be
    passed to amortize assembly across symbols.
    """
    if kernel is None:
        kernel = riesz_matrix(grid, ev)
    vals = np.asarray(b(grid.nodes), float)
    sq = np.sqrt(grid.weights)
    mat = sq[:, None] * (vals[:, None] - vals[None, :]) * kernel * sq[None, :]
    np.fill_diagonal(mat, 0.0)
    return DiscreteOperator(grid, mat)


def singular_values(op) -> np.ndarray:
    mat = op.matrix if isinstance(op, DiscreteOperator) else np.asarray(op, float)
    return svdvals(mat)


def schatten_lorentz(singvals, lp: LorentzParams) -> float:
    return lorentz_norm(singvals, lp)


def hs_direct(b, grid: WeightedGrid, ev: RieszKernelEvaluator) -> float:
    """Independent Hilbert-Schmidt route: plain double sum of |db|^2 |K|^2.

    Re-evaluates the kernel pair by pair (no symmetrized assembly, no tensor
    shortcut) so it cross-checks both the matrix build and the SVD.
    """
    vals = np.asarray(b(grid.nodes), float)
    n = grid.size
    total = 0.0
    idx = np.arange(n)
    for i in range(n):
        cols = idx[idx != i]
        kv = ev.kernel_many(np.repeat(grid.nodes[i : i + 1], n - 1, axis=0), grid.nodes[cols])
        total += grid.weights[i] * float(
            np.sum(grid.weights[cols] * (vals[i] - vals[cols]) ** 2 * kv**2)
        )
    return math.sqrt(total)


# ---------------------------------------------------------------------------
# NWO factorization coefficients
# ---------------------------------------------------------------------------


def _dyadic_subcubes(box: Box, levels: int) -> list:
    out = [box]
    for _ in range(levels):
        nxt = []
        for b in out:
            c = b.center
            for bits in np.ndindex(*([2] * b.dim)):
                lo = tuple(b.lo[j] if bits[j] == 0 else c[j] for j in range(b.dim))
                hi = tuple(c[j] if bits[j] == 0 else b.hi[j] for j in range(b.dim))
                nxt.append(Box(lo, hi))
        out = nxt
    return out


def _dyadic_ancestor(box: Box, levels: int) -> Box:
    side = max(box.sides)
    m = [int(round(v / side)) for v in box.lo]
    big = side * (1 << levels)
    lo = tuple((mm >> levels) * big for mm in m)
    return Box(lo, tuple(v + big for v in lo))


@dataclass
class NWOCoefficientTable:
    """Alpert-pair coefficients of a localized (inverse) kernel block.

    Fine labels are negative: k = -c means host cubes c generations below the
    base cube.  Coarse labels are nonnegative: k = 0 is the base cube's own
    element family, k = c >= 1 realizes the ancestor tail as degree < order
    polynomial projections carrying the ancestor measure ratio.
    """

    q: Box
    qhat: Box
    order: int
    depth: int
    mode: str
    entries: list = field(default_factory=list)  # (k1, k2, j1, j2, e1, e2, value)

    def max_by_offset(self, block: str = "fine") -> dict:
        out: dict = {}
        for k1, k2, _j1, _j2, _e1, _e2, v in self.entries:
            if block == "fine":
                if k1 >= 0 or k2 >= 0:
                    continue
                off = (-k1 - 1) + (-k2 - 1)
            elif block == "coarse":
                if k1 < 0 or k2 < 0:
                    continue
                off = k1 + k2
            else:
                off = abs(k1) + abs(k2)
            out[off] = max(out.get(off, 0.0), abs(v))
        return out

    def decay_fit(self, block: str = "fine") -> float:
        """Least-squares slope of log2(max |coeff|) against the offset."""
        table = self.max_by_offset(block)
        offs = sorted(o for o, v in table.items() if v > 0)
        if len(offs) < 2:
            raise InvalidInputError("not enough offsets for a decay fit")
        x = np.asarray(offs, float)
        y = np.log2([table[o] for o in offs])
        slope = np.polyfit(x, y, 1)[0]
        return float(slope)

    def to_csv(self) -> str:
        lines = ["k1,k2,j1,j2,e1,e2,value"]
        for k1, k2, j1, j2, e1, e2, v in self.entries:
            lines.append(f"{k1},{k2},{j1},{j2},{e1},{e2},{v!r}")
        return "\n".join(lines) + "\n"


def _side_data(params, box, order, depth, nodes):
    """Master quadrature plus fine wavelet rows and coarse projection rows."""
    cells = 1 << (depth + 1)
    pts, wts = box_grid_rule(params.lam, box.lo, box.hi, cells, nodes)
    m_box = cube_measure(params, box)
    fine = []  # (level c>=1, j, eps, weighted-values row, measure of host)
    for c in range(1, depth + 1):
        hosts = _dyadic_subcubes(box, c)
        for j, host in enumerate(hosts):
            basis = build_alpert_basis(params, host, order)
            mh = cube_measure(params, host)
            for e, el in enumerate(basis.elements):
                fine.append((c, j, e, wts * el.evaluate(pts), mh))
    coarse = []  # (level c>=0, eps, row, scale factor)
    base = build_alpert_basis(params, box, order)
    for e, el in enumerate(base.elements):
        coarse.append((0, e, wts * el.evaluate(pts), 1.0))
    for c in range(1, depth + 1):
        anc = _dyadic_ancestor(box, c)
        ratio = m_box / cube_measure(params, anc)
        polys = orthonormal_poly_basis(params, box, order)
        rows = polys.evaluate(pts)
        for e in range(rows.shape[0]):
            coarse.append((c, e, wts * rows[e], ratio))
    return pts, wts, m_box, fine, coarse


def nwo_coefficients(
    params: SpaceParams,
    q: Box,
    qhat: Box,
    ev: RieszKernelEvaluator,
    order: int,
    depth: int = 3,
    mode: str = "kernel",
    nodes: int = 4,
) -> NWOCoefficientTable:
    """Coefficient table of the localized kernel block over Alpert pairs.

    kernel mode: coefficients of K(x, y) on Q x Qhat, normalized by
    sqrt(m(Q)/m(I1)) sqrt(m(Q)/m(I2)).  inverse mode: coefficients of
    m(Q)^-1 m(Qhat)^-1 K(y, x)^-1 with the same normalization; requires the
    kernel sign-constant on the sampled block.
    """
    if mode not in ("kernel", "inverse"):
        raise InvalidInputError(f"unknown mode {mode!r}")
    if order < 1 or depth < 1:
        raise InvalidInputError("order and depth must be positive")
    pts1, _w1, m_q, fine1, coarse1 = _side_data(params, q, order, depth, nodes)
    pts2, _w2, m_qh, fine2, coarse2 = _side_data(params, qhat, order, depth, nodes)
    if mode == "kernel":
        kmat = ev.kernel_cross(pts1, pts2)
        pref = 1.0
    else:
        raw = ev.kernel_cross(pts2, pts1)  # K(y, x), y in Qhat
        if np.any(raw == 0) or (np.any(raw > 0) and np.any(raw < 0)):
            raise SignViolationError("kernel changes sign on the partner block")
        kmat = (1.0 / raw).T
        pref = 1.0 / (m_q * m_qh)

    rows1 = np.stack([r for (_c, _j, _e, r, _m) in fine1] + [r for (_c, _e, r, _s) in coarse1])
    rows2 = np.stack([r for (_c, _j, _e, r, _m) in fine2] + [r for (_c, _e, r, _s) in coarse2])
    coef = rows1 @ kmat @ rows2.T

    labels1 = [(-c, j, e, math.sqrt(m_q / mh)) for (c, j, e, _r, mh) in fine1]
    labels1 += [(c, 0, e, s) for (c, e, _r, s) in coarse1]
    labels2 = [(-c, j, e, math.sqrt(m_q / mh)) for (c, j, e, _r, mh) in fine2]
    labels2 += [(c, 0, e, s) for (c, e, _r, s) in coarse2]

    table = NWOCoefficientTable(q, qhat, order, depth, mode)
    for i, (k1, j1, e1, s1) in enumerate(labels1):
        for j, (k2, j2, e2, s2) in enumerate(labels2):
            table.entries.append((k1, k2, j1, j2, e1, e2, pref * s1 * s2 * coef[i, j]))
    return table


def beta_oscillation(params: SpaceParams, b, q: Box, qhat: Box, cells: int = 4, nodes: int = 8) -> float:
    """Cubic local oscillation over the pair: the NWO size functional."""
    pq, wq = box_grid_rule(params.lam, q.lo, q.hi, cells, nodes)
    ph, wh = box_grid_rule(params.lam, qhat.lo, qhat.hi, cells, nodes)
    m_q = cube_measure(params, q)
    mean = float(np.sum(wq * np.asarray(b(pq), float))) / m_q
    dev_q = np.abs(np.asarray(b(pq), float) - mean) ** 3
    dev_h = np.abs(np.asarray(b(ph), float) - mean) ** 3
    return ((float(np.sum(wq * dev_q)) + float(np.sum(wh * dev_h))) / m_q) ** (1.0 / 3.0)


def trace_pairing(
    params: SpaceParams,
    b,
    q,
    qhat,
    ev: Optional[RieszKernelEvaluator] = None,
    cells: int = 4,
    nodes: int = 8,
) -> tuple:
    """Exact trace of the commutator against the localized test operator.

    Computes the double average of (b(x) - b(y)) sgn(b(x) - mean(b on Qhat))
    over Q x Qhat, which equals the trace of the paired operator exactly, so
    no kernel evaluation enters; `ev` is accepted for signature parity.
    Returns (trace, MO_Q(b)).
    """
    del ev
    qb = q.box() if hasattr(q, "box") else q
    hb = qhat.box() if hasattr(qhat, "box") else qhat
    pq, wq = box_grid_rule(params.lam, qb.lo, qb.hi, cells, nodes)
    ph, wh = box_grid_rule(params.lam, hb.lo, hb.hi, cells, nodes)
    m_q = cube_measure(params, qb)
    m_h = cube_measure(params, hb)
    bq = np.asarray(b(pq), float)
    bh = np.asarray(b(ph), float)
    mean_h = float(np.sum(wh * bh)) / m_h
    s = np.sign(bq - mean_h)
    diff = bq[:, None] - bh[None, :]
    trace = float(wq @ (diff * s[:, None]) @ wh) / (m_q * m_h)
    mo = mean_oscillation(params, b, qb, r=1.0, cells=cells, nodes=nodes)
    return trace, mo
