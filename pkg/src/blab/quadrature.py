"""Quadrature rules for the weighted half-space measure.

The measure is dm(x) = dx_1 ... dx_n * x_{n+1}^{2*lam} dx_{n+1}.  Cells that
touch {x_{n+1} = 0} get a Gauss-Jacobi rule so the power weight is integrated
exactly; interior cells fold the (there analytic) weight into plain
Gauss-Legendre weights.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .errors import InvalidInputError


@lru_cache(maxsize=64)
def gauss_legendre(nodes: int):
    if nodes < 1:
        raise InvalidInputError("need at least one quadrature node")
    x, w = np.polynomial.legendre.leggauss(nodes)
    return x, w


def interval_rule(a: float, b: float, nodes: int):
    """Gauss-Legendre nodes/weights for integrating f over [a, b]."""
    x, w = gauss_legendre(nodes)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@lru_cache(maxsize=256)
def _jacobi_cached(nodes: int, beta: float):
    # weight (1+t)^beta on [-1, 1]; alpha = 0
    return roots_jacobi(nodes, 0.0, beta)


def left_power_rule(a: float, b: float, power: float, nodes: int):
    """Rule for int_a^b f(z) (z-a)^power dz, exact in f for polynomials.

    Used for boundary cells where the measure weight vanishes at z = a.
    """
    t, w = _jacobi_cached(nodes, power)
    half = 0.5 * (b - a)
    z = a + half * (t + 1.0)
    return z, w * half ** (power + 1.0)


@lru_cache(maxsize=256)
def theta_jacobi_rule(lam: float, nodes: int):
    """Nodes/weights for int_0^pi f(cos t) sin(t)^(2*lam-1) dt.

    Substituting u = cos t turns the integral into a Gauss-Jacobi one with
    weight (1-u^2)^(lam-1), which the rule integrates exactly.
    """
    if lam <= 0:
        raise InvalidInputError("lam must be positive")
    u, w = roots_jacobi(nodes, lam - 1.0, lam - 1.0)
    return u, w


def weighted_cell_rule(lam: float, lo, hi, nodes: int):
    """Tensor rule for one box cell of the weighted measure.

    Returns (points, weights) with points of shape (N, d).  The last
    coordinate carries the x^(2*lam) weight; lo[-1] == 0 switches that axis to
    the exact Jacobi rule.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    axes = []
    for j in range(d - 1):
        axes.append(interval_rule(lo[j], hi[j], nodes))
    if lo[-1] < 0:
        raise InvalidInputError("cell extends below the half-space boundary")
    if lo[-1] == 0.0:
        z, wz = left_power_rule(0.0, hi[-1], 2.0 * lam, nodes)
    else:
        z, wz = interval_rule(lo[-1], hi[-1], nodes)
        wz = wz * z ** (2.0 * lam)
    axes.append((z, wz))
    pts = np.stack([g.ravel() for g in np.meshgrid(*[a[0] for a in axes], indexing="ij")], axis=-1)
    wts = axes[0][1]
    for _, w in axes[1:]:
        wts = np.multiply.outer(wts, w)
    return pts, wts.ravel()


def box_grid_rule(lam: float, lo, hi, cells: int, nodes: int):
    """Subdivide a box into cells^d uniform cells and concatenate cell rules."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if cells < 1:
        raise InvalidInputError("cells must be >= 1")
    d = lo.size
    edges = [np.linspace(lo[j], hi[j], cells + 1) for j in range(d)]
    all_pts = []
    all_wts = []
    for idx in np.ndindex(*([cells] * d)):
        clo = [edges[j][idx[j]] for j in range(d)]
        chi = [edges[j][idx[j] + 1] for j in range(d)]
        p, w = weighted_cell_rule(lam, clo, chi, nodes)
        all_pts.append(p)
        all_wts.append(w)
    return np.concatenate(all_pts, axis=0), np.concatenate(all_wts)
