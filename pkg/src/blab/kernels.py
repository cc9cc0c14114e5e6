"""Heat and Riesz kernels of the weighted half-space Laplacian.

The 1-D heat factor (semigroup written as exp(-t^2 * L), so t is a length
scale) is

    K1(t, a, b) = 2^(-2*lam) / (Gamma(lam) * sqrt(pi)) * t^(-2*lam-1)
                  * int_0^pi exp(-(a^2 + b^2 - 2*a*b*cos(th)) / (4 t^2))
                            * sin(th)^(2*lam-1) dth,

which integrates to one against b^(2*lam) db.  The substitution u = cos(th)
turns the angular integral into a Gauss-Jacobi rule with weight
(1-u^2)^(lam-1).  The rule needs O(sqrt(z)) nodes where z = a*b/(2*t^2), so
beyond Z_SWITCH evaluation flips to the equivalent modified-Bessel form
(exponentially scaled I_(lam-1/2)); passing an explicit node count forces the
angular rule.

The full kernel multiplies Gauss factors in the first n coordinates.  The
directional Riesz kernel comes from subordination,

    K_ell(x, y) = (2/sqrt(pi)) * int_0^inf  d/dx_ell K_heat(u; x, y) du,

evaluated on logarithmic Gauss-Legendre panels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.special import ive

from .errors import (
    InvalidInputError,
    NoPartnerFoundError,
    SingularityError,
    UnsupportedOrderError,
)
from .geometry import AdjacentSystems, DyadicCube, SpaceParams, cube_measure
from .quadrature import box_grid_rule, gauss_legendre, theta_jacobi_rule

__all__ = [
    "heat_kernel_1d",
    "HeatKernelEvaluator",
    "RieszKernelEvaluator",
    "PartnerResult",
    "find_partner_cube",
    "heat_mass",
    "Z_SWITCH",
]

Z_SWITCH = 400.0  # bessel argument beyond which the scaled-I form takes over
_THETA_BASE = 48


def _c0(lam: float) -> float:
    return 2.0 ** (-2.0 * lam) / (math.gamma(lam) * math.sqrt(math.pi))


def _theta_nodes_for(z: float, base: int) -> int:
    n = base + int(math.ceil(3.2 * math.sqrt(max(z, 0.0))))
    return int(min(4096, 16 * math.ceil(n / 16)))


def _bessel_theta(lam, t, a, b, nodes):
    """Angular-rule evaluation of K1; all arguments broadcast."""
    u, w = theta_jacobi_rule(lam, nodes)
    t, a, b = np.broadcast_arrays(np.asarray(t, float), np.asarray(a, float), np.asarray(b, float))
    q = 0.25 / (t * t)
    arg = -(a * a + b * b)[..., None] * q[..., None] + (2.0 * a * b * q)[..., None] * u
    with np.errstate(under="ignore"):
        block = np.exp(arg)
    j = block @ w
    return _c0(lam) * t ** (-2.0 * lam - 1.0) * j


def _bessel_ive(lam, t, a, b):
    """Scaled modified-Bessel form; requires a*b > 0 elementwise."""
    t, a, b = np.broadcast_arrays(np.asarray(t, float), np.asarray(a, float), np.asarray(b, float))
    nu = lam - 0.5
    z = a * b / (2.0 * t * t)
    with np.errstate(under="ignore"):
        return (
            0.5 / (t * t)
            * (a * b) ** (0.5 - lam)
            * ive(nu, z)
            * np.exp(-((a - b) ** 2) * 0.25 / (t * t))
        )


def heat_kernel_1d(lam: float, t, x, y, nodes: int | None = None):
    """Heat kernel of the 1-D weighted operator at scale t (time t^2).

    Normalized so that the integral against y^(2*lam) dy equals one.
    `nodes` forces a fixed angular rule; the default is adaptive with the
    scaled-Bessel form beyond Z_SWITCH.
    """
    if lam <= 0:
        raise InvalidInputError("lam must be positive")
    t_arr, a, b = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float), np.asarray(y, float))
    if np.any(t_arr <= 0):
        raise InvalidInputError("scale t must be positive")
    if np.any(a < 0) or np.any(b < 0):
        raise InvalidInputError("spatial arguments live on [0, inf)")
    z = a * b / (2.0 * t_arr * t_arr)
    if nodes is not None:
        return _bessel_theta(lam, t_arr, a, b, int(nodes))
    zmax = float(np.max(z)) if z.size else 0.0
    if zmax <= Z_SWITCH:
        return _bessel_theta(lam, t_arr, a, b, _theta_nodes_for(zmax, _THETA_BASE))
    out = np.empty_like(z)
    mask = z <= Z_SWITCH
    if np.any(mask):
        zm = float(np.max(z[mask]))
        out[mask] = _bessel_theta(lam, t_arr[mask], a[mask], b[mask], _theta_nodes_for(zm, _THETA_BASE))
    if np.any(~mask):
        out[~mask] = _bessel_ive(lam, t_arr[~mask], a[~mask], b[~mask])
    if out.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# derivative prefactors
# ---------------------------------------------------------------------------

_HERMITE = (
    lambda z: np.ones_like(z),
    lambda z: 2.0 * z,
    lambda z: 4.0 * z * z - 2.0,
    lambda z: 8.0 * z**3 - 12.0 * z,
)


def _gauss_factor(t, d, p, q):
    """d/dx^p d/dy^q of (4 pi t^2)^(-1/2) exp(-d^2 / (4 t^2)), d = x - y."""
    m = p + q
    if m >= len(_HERMITE):
        raise UnsupportedOrderError(f"gauss factor derivative order {m} unsupported")
    z = d / (2.0 * t)
    with np.errstate(under="ignore"):
        g = np.exp(-z * z) / math.sqrt(4.0 * math.pi) / t
    return (-1.0) ** p * (2.0 * t) ** (-m) * _HERMITE[m](z) * g


def _poly_diff(terms: dict, which: str, inv2t2: float, uvals: np.ndarray) -> dict:
    out: dict = {}

    def add(key, val):
        out[key] = out[key] + val if key in out else val

    for (i, j), c in terms.items():
        if which == "a":
            if i:
                add((i - 1, j), i * c)
            add((i + 1, j), -inv2t2 * c)
            add((i, j + 1), inv2t2 * (c * uvals))
        else:
            if j:
                add((i, j - 1), j * c)
            add((i, j + 1), -inv2t2 * c)
            add((i + 1, j), inv2t2 * (c * uvals))
    return out


def _bessel_deriv_theta(lam, t, a, b, da, db, nodes):
    """d/da^da d/db^db K1(t, a, b) with scalar t, arrays a, b of shape (N,)."""
    u, w = theta_jacobi_rule(lam, nodes)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    inv2t2 = 0.5 / (t * t)
    terms = {(0, 0): np.ones_like(u)}
    for _ in range(da):
        terms = _poly_diff(terms, "a", inv2t2, u)
    for _ in range(db):
        terms = _poly_diff(terms, "b", inv2t2, u)
    q = 0.25 / (t * t)
    with np.errstate(under="ignore"):
        block = np.exp(-(a * a + b * b)[:, None] * q + (2.0 * a * b * q)[:, None] * u[None, :])
    coef = np.zeros((a.size, u.size))
    for (i, j), c in terms.items():
        coef += (a**i * b**j)[:, None] * np.asarray(c)[None, :]
    jval = (coef * block) @ w
    return _c0(lam) * t ** (-2.0 * lam - 1.0) * jval


def _bessel_deriv_ive(lam, t, a, b, da, db):
    """First-order derivatives in the scaled-Bessel regime (a*b large)."""
    if da + db == 0:
        return _bessel_ive(lam, t, a, b)
    if da + db != 1:
        raise UnsupportedOrderError("ive branch only supports first derivatives")
    nu = lam - 0.5
    z = a * b / (2.0 * t * t)
    k = _bessel_ive(lam, t, a, b)
    ratio = (ive(nu - 1.0, z) + ive(nu + 1.0, z)) / (2.0 * ive(nu, z))
    inv2t2 = 0.5 / (t * t)
    if da == 1:
        return k * ((0.5 - lam) / a - a * inv2t2 + b * inv2t2 * ratio)
    return k * ((0.5 - lam) / b - b * inv2t2 + a * inv2t2 * ratio)


def _bessel_deriv_mixed(lam, t, a, b, da, db, base_nodes, z_switch=Z_SWITCH):
    """Hybrid dispatch; scalar t, arrays a, b -> (N,)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    z = a * b / (2.0 * t * t)
    out = np.empty_like(z)
    mask = z <= z_switch
    if da + db > 1:
        # rare path, only used by the derivative API at moderate arguments
        nodes = _theta_nodes_for(float(np.max(z)) if z.size else 0.0, base_nodes)
        return _bessel_deriv_theta(lam, t, a, b, da, db, nodes)
    if np.any(mask):
        zm = float(np.max(z[mask]))
        out[mask] = _bessel_deriv_theta(lam, t, a[mask], b[mask], da, db, _theta_nodes_for(zm, base_nodes))
    if np.any(~mask):
        out[~mask] = _bessel_deriv_ive(lam, t, a[~mask], b[~mask], da, db)
    return out


def _bessel_time_deriv(lam, t, a, b, nodes):
    """d/dt K1 at scalar t, arrays a, b."""
    u, w = theta_jacobi_rule(lam, nodes)
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    q = 0.25 / (t * t)
    energy = (a * a + b * b)[:, None] - (2.0 * a * b)[:, None] * u[None, :]
    with np.errstate(under="ignore"):
        block = np.exp(-energy * q)
    j0 = block @ w
    j1 = (energy * block) @ w
    c = _c0(lam) * t ** (-2.0 * lam - 1.0)
    return c * (j1 * 0.5 / t**3 - (2.0 * lam + 1.0) / t * j0)


@dataclass(frozen=True)
class HeatKernelEvaluator:
    """Evaluates the (n+1)-dimensional weighted heat kernel and derivatives."""

    params: SpaceParams
    theta_base: int = _THETA_BASE

    def kernel_1d(self, t, a, b, nodes: int | None = None):
        return heat_kernel_1d(self.params.lam, t, a, b, nodes=nodes)

    def kernel(self, t, x, y):
        """Kernel at scale t; x, y of shape (d,) or (N, d)."""
        x = np.atleast_2d(np.asarray(x, float))
        y = np.atleast_2d(np.asarray(y, float))
        n = self.params.n
        val = np.asarray(heat_kernel_1d(self.params.lam, t, x[:, -1], y[:, -1]), float)
        if n:
            d2 = ((x[:, :n] - y[:, :n]) ** 2).sum(axis=1)
            with np.errstate(under="ignore"):
                val = val * (4.0 * math.pi * t * t) ** (-0.5 * n) * np.exp(-d2 * 0.25 / (t * t))
        return float(val[0]) if val.size == 1 else val

    def derivative(self, t, x, y, which):
        """Time derivative ('time') or spatial x-derivative (multi-index, |a|<=2)."""
        x = np.asarray(x, float).ravel()
        y = np.asarray(y, float).ravel()
        d = self.params.dim
        if x.size != d or y.size != d:
            raise InvalidInputError("point dimension mismatch")
        n = self.params.n
        lam = self.params.lam
        a1 = np.array([x[-1]])
        b1 = np.array([y[-1]])
        nodes = _theta_nodes_for(float(a1[0] * b1[0] / (2 * t * t)), self.theta_base)
        if isinstance(which, str):
            if which != "time":
                raise UnsupportedOrderError(f"unknown derivative selector {which!r}")
            gs = [_gauss_factor(t, x[j] - y[j], 0, 0) for j in range(n)]
            k1 = float(_bessel_deriv_theta(lam, t, a1, b1, 0, 0, nodes)[0])
            total = float(_bessel_time_deriv(lam, t, a1, b1, nodes)[0]) * math.prod(gs)
            prod_all = math.prod(gs) * k1
            for j in range(n):
                dj = x[j] - y[j]
                total += prod_all * (-1.0 / t + dj * dj / (2.0 * t**3))
            return total
        alpha = tuple(int(v) for v in which)
        if len(alpha) != d or any(v < 0 for v in alpha):
            raise InvalidInputError("multi-index length mismatch")
        if sum(alpha) > 2:
            raise UnsupportedOrderError("spatial derivative order above 2 unsupported")
        out = 1.0
        for j in range(n):
            out *= _gauss_factor(t, x[j] - y[j], alpha[j], 0)
        out *= float(_bessel_deriv_theta(lam, t, a1, b1, alpha[-1], 0, nodes)[0])
        return out

    def derivative_many(self, t, x, ys, which):
        """Derivative in the first argument, vectorized over rows of ys."""
        x = np.asarray(x, float).ravel()
        ys = np.atleast_2d(np.asarray(ys, float))
        n = self.params.n
        lam = self.params.lam
        a = np.full(ys.shape[0], x[-1])
        b = ys[:, -1].astype(float)
        if isinstance(which, str):
            if which != "time":
                raise UnsupportedOrderError(f"unknown derivative selector {which!r}")
            nodes = _theta_nodes_for(float(np.max(a * b)) / (2 * t * t), self.theta_base)
            gprod = np.ones(ys.shape[0])
            for j in range(n):
                gprod = gprod * _gauss_factor(t, x[j] - ys[:, j], 0, 0)
            k1 = _bessel_deriv_theta(lam, t, a, b, 0, 0, nodes)
            total = _bessel_time_deriv(lam, t, a, b, nodes) * gprod
            for j in range(n):
                dj = x[j] - ys[:, j]
                total = total + gprod * k1 * (-1.0 / t + dj * dj / (2.0 * t**3))
            return total
        alpha = tuple(int(v) for v in which)
        if len(alpha) != self.params.dim or any(v < 0 for v in alpha):
            raise InvalidInputError("multi-index length mismatch")
        if sum(alpha) > 2:
            raise UnsupportedOrderError("spatial derivative order above 2 unsupported")
        out = np.ones(ys.shape[0])
        for j in range(n):
            out = out * _gauss_factor(t, x[j] - ys[:, j], alpha[j], 0)
        return out * _bessel_deriv_mixed(lam, t, a, b, alpha[-1], 0, self.theta_base)


# ---------------------------------------------------------------------------
# Riesz kernel via subordination
# ---------------------------------------------------------------------------


@lru_cache(maxsize=128)
def _log_panel_rule(u_min: float, u_max: float, per_decade: int, nodes: int):
    """Gauss-Legendre panels in v = log(u); weights include the du = u dv factor."""
    v0, v1 = math.log(u_min), math.log(u_max)
    n_pan = max(1, int(math.ceil((v1 - v0) / math.log(10.0) * per_decade)))
    x, w = gauss_legendre(nodes)
    edges = np.linspace(v0, v1, n_pan + 1)
    us = []
    ws = []
    for i in range(n_pan):
        half = 0.5 * (edges[i + 1] - edges[i])
        v = edges[i] + half * (x + 1.0)
        us.append(np.exp(v))
        ws.append(w * half * np.exp(v))
    return np.concatenate(us), np.concatenate(ws)


@dataclass(frozen=True)
class RieszKernelEvaluator:
    """Directional Riesz kernel d/dx_ell applied to the inverse square root.

    ell is 1-based; ell == n+1 differentiates the weighted coordinate.
    Accuracy knobs: angular rule base node count, subordination panels per
    decade and nodes per panel, the near-field cutoff (u_min = sep/cut_lo)
    and the far-field exponent margin.
    """

    params: SpaceParams
    ell: int
    theta_base: int = _THETA_BASE
    per_decade: int = 4
    panel_nodes: int = 8
    cut_lo: float = 14.0
    tail_margin: float = 9.0

    def __post_init__(self):
        if not (1 <= self.ell <= self.params.dim):
            raise InvalidInputError(f"ell must lie in [1, {self.params.dim}]")

    def refined(self, factor: int = 2) -> "RieszKernelEvaluator":
        """Copy with `factor` times the quadrature depth everywhere."""
        return replace(
            self,
            theta_base=self.theta_base * factor,
            per_decade=self.per_decade * factor,
            cut_lo=self.cut_lo * (1.0 + 0.25 * (factor - 1)),
            tail_margin=self.tail_margin + 2.0 * (factor - 1),
        )

    # -- subordination grid ------------------------------------------------
    def _u_grid(self, sep_min: float, scale_max: float):
        if sep_min <= 0:
            raise SingularityError("coincident points passed to the Riesz kernel")
        u_min = sep_min / self.cut_lo
        power = self.params.n + 1 + 2.0 * self.params.lam
        u_max = max(scale_max, sep_min) * 10.0 ** (self.tail_margin / power)
        return _log_panel_rule(u_min, u_max, self.per_decade, self.panel_nodes)

    def _integrand_pairs(self, u, xs, ys, alpha=None, beta=None):
        """d/dx_ell (+ optional extra multi-indices) of the heat kernel.

        u: (U,) subordination scales; xs, ys: (N, d).  Returns (U, N).
        """
        n = self.params.n
        lam = self.params.lam
        d = self.params.dim
        j0 = self.ell - 1
        px = [0] * d
        py = [0] * d
        px[j0] += 1
        if alpha is not None:
            for j in range(d):
                px[j] += alpha[j]
                py[j] += beta[j]
        a = xs[:, -1]
        b = ys[:, -1]
        out = np.empty((u.size, xs.shape[0]))
        for i, t in enumerate(u):
            row = _bessel_deriv_mixed(lam, t, a, b, px[-1], py[-1], self.theta_base)
            for j in range(n):
                row = row * _gauss_factor(t, xs[:, j] - ys[:, j], px[j], py[j])
            out[i] = row
        return out

    def kernel_many(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Kernel for N point pairs; xs, ys of shape (N, d)."""
        xs = np.atleast_2d(np.asarray(xs, float))
        ys = np.atleast_2d(np.asarray(ys, float))
        if xs.shape != ys.shape or xs.shape[1] != self.params.dim:
            raise InvalidInputError("point arrays must both be (N, dim)")
        sep = np.sqrt(((xs - ys) ** 2).sum(axis=1))
        scale = max(float(xs[:, -1].max()), float(ys[:, -1].max()), float(sep.max()))
        if np.any(sep <= 1e-13 * max(scale, 1.0)):
            raise SingularityError("coincident points passed to the Riesz kernel")
        u, w = self._u_grid(float(sep.min()), scale)
        vals = self._integrand_pairs(u, xs, ys)
        return (2.0 / math.sqrt(math.pi)) * (w @ vals)

    def kernel(self, x, y) -> float:
        return float(self.kernel_many(np.asarray(x, float)[None, :], np.asarray(y, float)[None, :])[0])

    def kernel_cross(self, xs: np.ndarray, ys: np.ndarray, chunk: int = 8192) -> np.ndarray:
        """Kernel on the product grid: xs (A, d) x ys (B, d) -> (A, B)."""
        xs = np.atleast_2d(np.asarray(xs, float))
        ys = np.atleast_2d(np.asarray(ys, float))
        A, B = xs.shape[0], ys.shape[0]
        out = np.empty((A, B))
        pair_x = np.repeat(xs, B, axis=0)
        pair_y = np.tile(ys, (A, 1))
        flat = out.reshape(-1)
        for s in range(0, A * B, chunk):
            e = min(s + chunk, A * B)
            flat[s:e] = self.kernel_many(pair_x[s:e], pair_y[s:e])
        return out

    def derivative(self, x, y, alpha, beta) -> float:
        """d/dx^alpha d/dy^beta of the kernel, total order <= 2."""
        alpha = tuple(int(v) for v in alpha)
        beta = tuple(int(v) for v in beta)
        d = self.params.dim
        if len(alpha) != d or len(beta) != d:
            raise InvalidInputError("multi-index length mismatch")
        if any(v < 0 for v in alpha + beta):
            raise InvalidInputError("multi-index entries must be nonnegative")
        if sum(alpha) + sum(beta) > 2:
            raise UnsupportedOrderError("riesz derivative order above 2 unsupported")
        xs = np.asarray(x, float)[None, :]
        ys = np.asarray(y, float)[None, :]
        sep = float(np.sqrt(((xs - ys) ** 2).sum()))
        scale = max(float(xs.max()), float(ys.max()), sep)
        if sep <= 1e-13 * max(scale, 1.0):
            raise SingularityError("coincident points passed to the Riesz kernel")
        u, w = self._u_grid(sep, scale)
        vals = self._integrand_pairs(u, xs, ys, alpha=alpha, beta=beta)
        return float((2.0 / math.sqrt(math.pi)) * (w @ vals)[0])


# ---------------------------------------------------------------------------
# partner cubes with sign-definite kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PartnerResult:
    cube: DyadicCube
    partner: DyadicCube
    sign: int
    witness: float  # min |K| * m(Q) over the sampled pairs
    separation: int
    axis: int
    direction: int


def _cube_samples(cube: DyadicCube, per_axis: int) -> np.ndarray:
    axes = []
    for lo, hi in zip(cube.lo, cube.hi):
        step = (hi - lo) / per_axis
        axes.append(lo + step * (np.arange(per_axis) + 0.5))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def heat_mass(ev: HeatKernelEvaluator, t: float, x, reach: float = 14.0, cells: int = 12, nodes: int = 8) -> float:
    """Integral of the heat kernel against dm; should equal 1 for any (t, x).

    The window spans reach*t in every direction (Gaussian tails beyond are
    far below the quadrature error), clipped at the boundary.
    """
    x = np.asarray(x, float).ravel()
    if x.size != ev.params.dim:
        raise InvalidInputError("point dimension mismatch")
    lo = tuple(v - reach * t for v in x[:-1]) + (max(x[-1] - reach * t, 0.0),)
    hi = tuple(v + reach * t for v in x[:-1]) + (x[-1] + reach * t,)
    pts, wts = box_grid_rule(ev.params.lam, lo, hi, cells, nodes)
    vals = ev.kernel(t, np.broadcast_to(x, pts.shape).copy(), pts)
    return float(np.sum(wts * np.asarray(vals, float)))


def find_partner_cube(
    systems: AdjacentSystems,
    cube: DyadicCube,
    ell: int,
    evaluator: RieszKernelEvaluator,
    m_max: int = 12,
    samples_per_axis: int | None = None,
    direction: int | None = None,
) -> PartnerResult:
    """Search same-generation translates of a cube for sign-definite kernel.

    Candidates sit at lattice offsets M in {2, ..., m_max} along +-e_j,
    the ell-axis first.  A candidate is accepted when the kernel keeps one
    strict sign on the sampled product grid; the returned witness is
    min |K| * m(Q), the achieved lower-bound constant.
    """
    params = systems.params
    if cube.is_boundary_cell:
        raise InvalidInputError("partner search needs a full (untruncated) cube")
    if evaluator.ell != ell or evaluator.params != params:
        raise InvalidInputError("evaluator does not match the requested direction")
    if samples_per_axis is None:
        samples_per_axis = 32 if params.dim == 1 else 6
    xs = _cube_samples(cube, samples_per_axis)
    mq = cube_measure(params, cube.box())
    axes = [ell - 1] + [j for j in range(params.dim) if j != ell - 1]
    dirs = (direction,) if direction in (-1, 1) else (1, -1)
    for m_sep in range(2, m_max + 1):
        for axis in axes:
            for sgn in dirs:
                m2 = list(cube.m)
                m2[axis] += sgn * m_sep
                if axis == params.dim - 1 and m2[axis] < 0:
                    continue
                cand = systems.cube(cube.system, cube.k, m2)
                ysamp = _cube_samples(cand, samples_per_axis)
                nx = xs.shape[0]
                px = np.repeat(xs, ysamp.shape[0], axis=0)
                py = np.tile(ysamp, (nx, 1))
                vals = evaluator.kernel_many(px, py)
                if np.all(vals > 0) or np.all(vals < 0):
                    sign = 1 if vals[0] > 0 else -1
                    return PartnerResult(
                        cube, cand, sign, float(np.min(np.abs(vals)) * mq), m_sep, axis + 1, sgn
                    )
    raise NoPartnerFoundError(
        f"no sign-definite partner within lattice separation {m_max} of cube {cube.m}"
    )
