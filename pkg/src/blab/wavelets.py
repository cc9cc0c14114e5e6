"""Piecewise-polynomial wavelets with vanishing moments for the weighted measure.

On a dyadic cube Q the order-K space consists of functions that are a
polynomial of degree < K on each of the 2^(n+1) children, are orthogonal to
all polynomials of degree < K against the weighted measure, and are pairwise
orthonormal.  Polynomials are represented in cube-local coordinates
u = (x - center(Q)) / side(Q); that keeps moment matrices well conditioned
for cubes far from the origin.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateMeasureError, InvalidInputError
from .geometry import Box, SpaceParams, cube_measure, grid_children
from .quadrature import box_grid_rule, weighted_cell_rule

__all__ = [
    "multi_indices",
    "weighted_moment",
    "PiecewisePolynomial",
    "AlpertBasis",
    "build_alpert_basis",
    "alpert_dimension",
    "wavelet_coefficient",
    "project_polynomial",
    "PolyBasis",
    "orthonormal_poly_basis",
    "telescoping_check",
]

_RANK_TOL = 1e-12


@lru_cache(maxsize=64)
def multi_indices(dim: int, max_degree: int) -> tuple:
    """All multi-indices with |beta| <= max_degree, graded lexicographic."""
    out = []

    def rec(prefix, remaining, budget):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for v in range(budget + 1):
            rec(prefix + [v], remaining - 1, budget - v)

    for total in range(max_degree + 1):
        block = []

        def rec2(prefix, remaining, left):
            if remaining == 1:
                block.append(tuple(prefix + [left]))
                return
            for v in range(left, -1, -1):
                rec2(prefix + [v], remaining - 1, left - v)

        rec2([], dim, total)
        out.extend(sorted(block, reverse=True))
    return tuple(out)


def weighted_moment(params: SpaceParams, box: Box, beta) -> float:
    """Exact integral of x^beta over a box against the weighted measure."""
    beta = tuple(int(v) for v in beta)
    if len(beta) != params.dim or any(v < 0 for v in beta):
        raise InvalidInputError("bad moment multi-index")
    if box.lo[-1] < 0:
        raise InvalidInputError("box extends below the half-space boundary")
    out = 1.0
    for j in range(params.n):
        p = beta[j] + 1
        out *= (box.hi[j] ** p - box.lo[j] ** p) / p
    e = beta[-1] + 2.0 * params.lam + 1.0
    return out * (box.hi[-1] ** e - box.lo[-1] ** e) / e


def _gen_binom(alpha: float, i: int) -> float:
    out = 1.0
    for k in range(i):
        out *= (alpha - k) / (k + 1)
    return out


def _local_moments_last(lam: float, c: float, L: float, a: float, b: float, pmax: int) -> np.ndarray:
    """m_p = int_a^b ((x-c)/L)^p x^(2*lam) dx for p = 0..pmax, computed stably.

    Near the boundary the direct binomial expansion is safe; away from it the
    expansion cancels catastrophically (factor ~ (c/L)^p), so the weight
    (c + L*u)^(2*lam) is expanded as a binomial series in L*u/c instead.
    The series needs |L*u| <= L/2 < c, which every cell-in-cube call satisfies
    once c >= 1.5*L; below that the direct route loses at most a digit or two.
    """
    e = 2.0 * lam
    u0 = (a - c) / L
    u1 = (b - c) / L
    # series term i decays like rate^i with rate = |x - c|_max / c
    rate = max(c - a, b - c) / c if c > 0.0 else 1.0
    if a <= 0.0 or rate > 0.75:
        out = np.empty(pmax + 1)
        for p in range(pmax + 1):
            terms = [
                math.comb(p, i) * (-c) ** (p - i) * (b ** (i + e + 1.0) - a ** (i + e + 1.0)) / (i + e + 1.0)
                for i in range(p + 1)
            ]
            out[p] = math.fsum(terms) / L**p
        return out
    ratio = L / c
    nterms = 8
    while rate**nterms > 1e-19 and nterms < 400:
        nterms += 4
    i_arr = np.arange(nterms)
    coef = np.array([_gen_binom(e, int(i)) for i in i_arr]) * ratio**i_arr
    out = np.empty(pmax + 1)
    for p in range(pmax + 1):
        q = p + i_arr + 1.0
        out[p] = c**e * L * float(np.sum(coef * (u1**q - u0**q) / q))
    return out


def _local_moments_free(c: float, L: float, a: float, b: float, pmax: int) -> np.ndarray:
    u0 = (a - c) / L
    u1 = (b - c) / L
    p = np.arange(pmax + 1)
    return L * (u1 ** (p + 1) - u0 ** (p + 1)) / (p + 1)


def _cell_local_moments(params: SpaceParams, cube: Box, cell: Box, pmax: int) -> list:
    """Per-axis local monomial moments of one child cell, cube-local frame."""
    cc = cube.center
    L = max(cube.sides)
    axes = []
    for j in range(params.n):
        axes.append(_local_moments_free(cc[j], L, cell.lo[j], cell.hi[j], pmax))
    axes.append(_local_moments_last(params.lam, cc[-1], L, cell.lo[-1], cell.hi[-1], pmax))
    return axes


def _children_boxes(box: Box) -> list:
    d = box.dim
    c = box.center
    out = []
    for bits in np.ndindex(*([2] * d)):
        lo = tuple(box.lo[j] if bits[j] == 0 else c[j] for j in range(d))
        hi = tuple(c[j] if bits[j] == 0 else box.hi[j] for j in range(d))
        out.append(Box(lo, hi))
    return out


def alpert_dimension(params: SpaceParams, order: int) -> int:
    """(2^(n+1) - 1) * #(multi-indices of degree < K)."""
    m = len(multi_indices(params.dim, order - 1))
    return (2**params.dim - 1) * m


@dataclass(frozen=True)
class PiecewisePolynomial:
    """Polynomial of degree < K on each cell of a cube, in cube-local frame.

    The cells partition the cube; usually they are its geometric halves per
    axis, but truncated grid cells split where their own grid does.
    """

    cube: Box
    order: int
    coeffs: np.ndarray  # (n_cells, n_monomials)
    cells: tuple  # of Box, matching coeffs rows

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, float))
        d = self.cube.dim
        betas = multi_indices(d, self.order - 1)
        c = np.asarray(self.cube.center)
        L = max(self.cube.sides)
        u = (points - c) / L
        mono = np.stack([np.prod(u**np.asarray(b, float), axis=1) for b in betas], axis=1)
        out = np.zeros(points.shape[0])
        hi_face = np.asarray(self.cube.hi)
        for ci, cell in enumerate(self.cells):
            inside = np.ones(points.shape[0], dtype=bool)
            for j in range(d):
                # half-open cells; the cube's own top face stays included
                top = points[:, j] < cell.hi[j]
                if cell.hi[j] == hi_face[j]:
                    top |= points[:, j] == cell.hi[j]
                inside &= (points[:, j] >= cell.lo[j]) & top
            if np.any(inside):
                out[inside] = mono[inside] @ self.coeffs[ci]
        return out


@dataclass(frozen=True)
class AlpertBasis:
    """Orthonormal vanishing-moment family on one cube."""

    params: SpaceParams
    cube: Box
    order: int
    elements: tuple  # of PiecewisePolynomial

    def __len__(self) -> int:
        return len(self.elements)

    def to_json(self) -> str:
        betas = multi_indices(self.params.dim, self.order - 1)
        cells = self.elements[0].cells if self.elements else ()
        payload = {
            "cube": {"lo": list(self.cube.lo), "hi": list(self.cube.hi)},
            "order": self.order,
            "monomials": [list(b) for b in betas],
            "frame": "cube-local (x - center)/side",
            "cells": [{"lo": list(c.lo), "hi": list(c.hi)} for c in cells],
            "elements": [
                {"index": i, "child_coefficients": el.coeffs.tolist()}
                for i, el in enumerate(self.elements)
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _child_tables(params: SpaceParams, cube: Box, order: int, cells: list):
    """Per-cell whitening, cross-moment, and frame-change matrices.

    Works in cell-local monomials (center/half-side of the cell), where the
    Gram stays mildly conditioned at every order, and returns for each cell

      W: maps whitened coordinates to cell-local monomial coefficients,
      M: cross moments of cube-local against cell-local monomials,
      T: rebase from cell-local to cube-local monomial coefficients.
    """
    d = params.dim
    betas = multi_indices(d, order - 1)
    m = len(betas)
    pmax = 2 * (order - 1)
    cc = cube.center
    big_l = max(cube.sides)
    out = []
    for child in cells:
        ch_c = child.center
        ell = 0.5 * max(child.sides)
        axes = []
        for j in range(params.n):
            axes.append(_local_moments_free(ch_c[j], ell, child.lo[j], child.hi[j], pmax))
        axes.append(_local_moments_last(params.lam, ch_c[-1], ell, child.lo[-1], child.hi[-1], pmax))
        delta = [(ch_c[j] - cc[j]) / big_l for j in range(d)]
        scale = ell / big_l
        # u = scale * v + delta per axis, so u^a folds into cell-local moments
        cross_ax = []
        rebase_ax = []
        for j in range(d):
            xa = np.zeros((pmax + 1, order))
            ra = np.zeros((order, order))
            for a in range(pmax + 1):
                for b in range(order):
                    if a + b > pmax:
                        continue
                    acc = 0.0
                    for t in range(a + 1):
                        acc += math.comb(a, t) * delta[j] ** (a - t) * scale**t * axes[j][t + b]
                    xa[a, b] = acc
            for b in range(order):
                for a in range(b + 1):
                    ra[a, b] = math.comb(b, a) * (-delta[j]) ** (b - a) / scale**b
            cross_ax.append(xa)
            rebase_ax.append(ra)
        gram = np.empty((m, m))
        mom = np.empty((m, m))
        frame = np.empty((m, m))
        for i, bi in enumerate(betas):
            for jj, bj in enumerate(betas):
                g = 1.0
                x = 1.0
                t = 1.0
                for ax in range(d):
                    g *= axes[ax][bi[ax] + bj[ax]]
                    x *= cross_ax[ax][bi[ax], bj[ax]]
                    t *= rebase_ax[ax][bi[ax], bj[ax]]
                gram[i, jj] = g
                mom[i, jj] = x
                frame[i, jj] = t
        evals, evecs = np.linalg.eigh(gram)
        if np.min(evals) <= _RANK_TOL * np.max(evals):
            raise DegenerateMeasureError("cell moment matrix degenerated")
        white = evecs / np.sqrt(evals)
        out.append((white, mom, frame))
    return betas, out


def build_alpert_basis(params: SpaceParams, cube: Box, order: int) -> AlpertBasis:
    """Construct the orthonormal vanishing-moment basis of one cube.

    Each cell carries an orthonormal polynomial family (whitened in the
    cell's own frame); the SVD null space of the moment constraints in that
    metric is therefore orthonormal as a function system with no further
    conditioning loss.  Coefficients are rebased to the cube-local frame for
    storage, largest-magnitude coefficient made positive.

    Plain boxes split into their 2^(n+1) geometric halves.  Grid cubes split
    into their own grid's children, which for the truncated boundary cell of
    a shifted grid is not the same thing; the telescoping identity needs the
    grid's split.  A truncated cell that is its own single child gets an
    empty basis (there is no detail between those generations).
    """
    if order < 1:
        raise InvalidInputError("order must be >= 1")
    cells = None
    if hasattr(cube, "box"):
        if cube.is_boundary_cell:
            cells = [c.box() for c in grid_children(params.dim, cube)]
        cube = cube.box()
    if cube.dim != params.dim:
        raise InvalidInputError("cube dimension mismatch")
    if cells is None:
        cells = _children_boxes(cube)
    betas, tables = _child_tables(params, cube, order, cells)
    m = len(betas)
    nc = len(cells)
    if nc == 1:
        return AlpertBasis(params, cube, order, ())
    cons = np.hstack([mom @ white for (white, mom, _f) in tables])
    u_svd, s_svd, vt = np.linalg.svd(cons)
    rank = int(np.sum(s_svd > _RANK_TOL * s_svd[0]))
    if rank != m:
        raise DegenerateMeasureError(
            f"constraint rank {rank} != {m}; weighted moment matrix degenerated"
        )
    null = vt[rank:].T  # (nc*m, count), orthonormal in L2(dm)
    if null.shape[1] != m * (nc - 1):
        raise DegenerateMeasureError("null space dimension mismatch")
    cell_boxes = tuple(cells)
    elements = []
    for idx in range(null.shape[1]):
        vec = null[:, idx]
        coeffs = np.empty((nc, m))
        for ci, (white, _mom, frame) in enumerate(tables):
            coeffs[ci] = frame @ (white @ vec[ci * m : (ci + 1) * m])
        flat = coeffs.ravel()
        top = np.argmax(np.abs(flat))
        if flat[top] < 0:
            coeffs = -coeffs
        elements.append(PiecewisePolynomial(cube, order, coeffs, cell_boxes))
    return AlpertBasis(params, cube, order, tuple(elements))


@dataclass(frozen=True)
class PolyBasis:
    """L2(dm)-orthonormal polynomials of degree < order on a box."""

    box: Box
    order: int
    coeffs: np.ndarray  # (n_basis, n_monomials), box-local frame

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, float))
        betas = multi_indices(self.box.dim, self.order - 1)
        c = np.asarray(self.box.center)
        L = max(self.box.sides)
        u = (points - c) / L
        mono = np.stack([np.prod(u**np.asarray(b, float), axis=1) for b in betas], axis=1)
        return self.coeffs @ mono.T


def orthonormal_poly_basis(params: SpaceParams, box: Box, order: int) -> PolyBasis:
    betas = multi_indices(params.dim, order - 1)
    m = len(betas)
    axes = _cell_local_moments(params, box, box, 2 * (order - 1))
    gram = np.empty((m, m))
    for i, bi in enumerate(betas):
        for j, bj in enumerate(betas):
            v = 1.0
            for ax in range(params.dim):
                v *= axes[ax][bi[ax] + bj[ax]]
            gram[i, j] = v
    evals, evecs = np.linalg.eigh(gram)
    if np.min(evals) <= _RANK_TOL * np.max(evals):
        raise DegenerateMeasureError("polynomial gram matrix lost rank")
    rows = (evecs / np.sqrt(evals)).T[::-1]
    fixed = []
    for vec in rows:
        top = np.argmax(np.abs(vec))
        fixed.append(-vec if vec[top] < 0 else vec)
    return PolyBasis(box, order, np.asarray(fixed))


def _cube_rule(params: SpaceParams, cube: Box, order: int, nodes: int | None = None):
    # child-cell aligned rule: element restrictions are smooth on each cell
    nn = nodes if nodes is not None else max(2 * order + 4, 8)
    return box_grid_rule(params.lam, cube.lo, cube.hi, 2, nn)


def _cells_rule(params: SpaceParams, cells, nodes: int):
    """Concatenated per-cell rules; panels never straddle a cell boundary."""
    pts = []
    wts = []
    for cell in cells:
        p, w = weighted_cell_rule(params.lam, cell.lo, cell.hi, nodes)
        pts.append(p)
        wts.append(w)
    return np.concatenate(pts, axis=0), np.concatenate(wts)


def wavelet_coefficient(params: SpaceParams, f, element: PiecewisePolynomial, nodes: int | None = None) -> float:
    """Inner product <f, h> against the weighted measure by cell-aligned rules."""
    nn = nodes if nodes is not None else max(2 * element.order + 4, 8)
    pts, wts = _cells_rule(params, element.cells, nn)
    return float(np.sum(wts * np.asarray(f(pts), float) * element.evaluate(pts)))


def project_polynomial(params: SpaceParams, f, box: Box, order: int, nodes: int | None = None):
    """L2(dm) projection of f onto polynomials of degree < order on a box.

    Returns a callable evaluating the projection (box-local frame inside).
    """
    betas = multi_indices(params.dim, order - 1)
    pts, wts = _cube_rule(params, box, order, nodes)
    c = np.asarray(box.center)
    L = max(box.sides)
    u = (pts - c) / L
    mono = np.stack([np.prod(u**np.asarray(b, float), axis=1) for b in betas], axis=1)
    gram = mono.T @ (wts[:, None] * mono)
    rhs = mono.T @ (wts * np.asarray(f(pts), float))
    coef = np.linalg.solve(gram, rhs)

    def proj(points):
        points = np.atleast_2d(np.asarray(points, float))
        uu = (points - c) / L
        mm = np.stack([np.prod(uu**np.asarray(b, float), axis=1) for b in betas], axis=1)
        return mm @ coef

    return proj


def telescoping_check(params: SpaceParams, chain: list, f, order: int, nodes: int | None = None) -> float:
    """Residual of the projection telescope along a nested cube chain.

    chain = [P = Q_0, Q_1, ..., Q_r = Q] with each Q_{i+1} a child of Q_i.
    The detail projections over the intermediate cubes must satisfy, on Q,

        sum_i Delta_{Q_i} f = E_Q f - E_P f,

    where Delta_I f sums coefficient * element over the basis of I and E is
    the polynomial projection.  Returns the relative L2(Q) residual.
    """
    if len(chain) < 2:
        raise InvalidInputError("chain needs at least a parent and a descendant")
    boxes = [c.box() if hasattr(c, "box") else c for c in chain]
    for a, b in zip(boxes, boxes[1:]):
        if not all(
            a.lo[j] <= b.lo[j] and b.hi[j] <= a.hi[j] + 1e-12 * max(a.sides) for j in range(a.dim)
        ):
            raise InvalidInputError("chain cubes are not nested")
    q = boxes[-1]
    p = boxes[0]
    pts, wts = _cube_rule(params, q, order, nodes)
    acc = np.zeros(pts.shape[0])
    for cube in chain[:-1]:
        basis = build_alpert_basis(params, cube, order)
        for el in basis.elements:
            coef = wavelet_coefficient(params, f, el, nodes)
            acc += coef * el.evaluate(pts)
    e_q = project_polynomial(params, f, q, order, nodes)(pts)
    e_p = project_polynomial(params, f, p, order, nodes)(pts)
    target = e_q - e_p
    num = float(np.sqrt(np.sum(wts * (acc - target) ** 2)))
    den = float(np.sqrt(np.sum(wts * np.asarray(f(pts), float) ** 2))) or 1.0
    return num / den
