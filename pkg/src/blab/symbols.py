"""Symbol catalogue: scalar functions on the half-space used as commutator data.

Each symbol carries its gradient (for Besov quadratures) and an optional
support box so operators can skip regions where it vanishes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError
from .geometry import Box

__all__ = ["Symbol", "make_symbol", "SYMBOL_KINDS"]


@dataclass(frozen=True)
class Symbol:
    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    support: Optional[Box] = None
    is_constant: bool = False
    params: dict = field(default_factory=dict)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, float))
        return np.asarray(self.fn(pts), float)

    def gradient(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, float))
        return np.asarray(self.grad(pts), float)


def _bump_pair(center: np.ndarray, radius: float):
    """Smooth compactly supported bump exp(1 - 1/(1 - rho^2)) and gradient."""

    def fn(pts):
        d = (pts - center) / radius
        rho2 = np.sum(d * d, axis=1)
        out = np.zeros(pts.shape[0])
        inside = rho2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - rho2[inside]))
        return out

    def grad(pts):
        d = (pts - center) / radius
        rho2 = np.sum(d * d, axis=1)
        out = np.zeros_like(pts)
        inside = rho2 < 1.0
        g = np.zeros(pts.shape[0])
        g[inside] = np.exp(1.0 - 1.0 / (1.0 - rho2[inside])) * (-2.0 / (1.0 - rho2[inside]) ** 2)
        out[inside] = g[inside, None] * d[inside] / radius
        return out

    return fn, grad


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def _smoothstep_d(t: np.ndarray) -> np.ndarray:
    tc = np.clip(t, 0.0, 1.0)
    d = 30.0 * tc * tc * (tc - 1.0) ** 2
    d[(t <= 0.0) | (t >= 1.0)] = 0.0
    return d


def _window_pair(box: Box, width: float):
    """C^2 cutoff equal to 1 inside the box shrunk by width, 0 outside the box."""

    def parts(pts):
        vals = np.ones(pts.shape[0])
        ders = np.zeros_like(pts)
        per_axis = []
        for j in range(box.dim):
            t_lo = (pts[:, j] - box.lo[j]) / width
            t_hi = (box.hi[j] - pts[:, j]) / width
            s = _smoothstep(t_lo) * _smoothstep(t_hi)
            ds = (
                _smoothstep_d(t_lo) * _smoothstep(t_hi)
                - _smoothstep(t_lo) * _smoothstep_d(t_hi)
            ) / width
            per_axis.append((s, ds))
            vals = vals * s
        for j in range(box.dim):
            prod_others = np.ones(pts.shape[0])
            for i in range(box.dim):
                if i != j:
                    prod_others = prod_others * per_axis[i][0]
            ders[:, j] = per_axis[j][1] * prod_others
        return vals, ders

    return parts


SYMBOL_KINDS = ("constant", "bump", "shifted_bump", "linear_window", "sine_window", "smoothstep")


def make_symbol(kind: str, dim: int, **kw) -> Symbol:
    """Build a catalogue symbol.

    constant:      value
    bump:          center, radius
    linear_window: axis, box (dict lo/hi), width  -- x_axis times a C^2 window
    sine_window:   freq, axis, box, width         -- sin(freq*x_axis) windowed
    smoothstep:    axis, x0, width                -- monotone C^2 step
    """
    if kind == "constant":
        value = float(kw.get("value", 1.0))

        def fn(pts):
            return np.full(pts.shape[0], value)

        def grad(pts):
            return np.zeros_like(pts)

        return Symbol("constant", fn, grad, None, True, {"value": value})

    if kind in ("bump", "shifted_bump"):
        center = np.asarray(kw["center"], float)
        radius = float(kw["radius"])
        if kind == "shifted_bump":
            shift = np.asarray(kw.get("shift", np.zeros(dim)), float)
            if shift.shape != (dim,):
                raise InvalidInputError("bump shift must have length n+1")
            center = center + shift
        if center.shape != (dim,):
            raise InvalidInputError("bump center must have length n+1")
        if radius <= 0:
            raise InvalidInputError("bump radius must be positive")
        fn, grad = _bump_pair(center, radius)
        lo = tuple(center - radius)
        hi = tuple(center + radius)
        support = Box(tuple(max(v, 0.0) if j == dim - 1 else v for j, v in enumerate(lo)), hi)
        return Symbol(kind, fn, grad, support, False, {"center": center.tolist(), "radius": radius})

    if kind in ("linear_window", "sine_window"):
        axis = int(kw.get("axis", 0))
        if not 0 <= axis < dim:
            raise InvalidInputError("axis out of range")
        box = kw["box"]
        if isinstance(box, dict):
            box = Box(tuple(box["lo"]), tuple(box["hi"]))
        width = float(kw.get("width", 0.25 * min(box.sides)))
        if width <= 0 or 2 * width > min(box.sides):
            raise InvalidInputError("window width must fit inside the box")
        window = _window_pair(box, width)
        if kind == "linear_window":

            def fn(pts, _w=window, _ax=axis):
                s, _ = _w(pts)
                return pts[:, _ax] * s

            def grad(pts, _w=window, _ax=axis):
                s, ds = _w(pts)
                out = pts[:, _ax, None] * ds
                out[:, _ax] += s
                return out

            meta = {"axis": axis, "box": {"lo": list(box.lo), "hi": list(box.hi)}, "width": width}
            return Symbol("linear_window", fn, grad, box, False, meta)
        freq = float(kw.get("freq", 1.0))

        def fn(pts, _w=window, _ax=axis, _f=freq):
            s, _ = _w(pts)
            return np.sin(_f * pts[:, _ax]) * s

        def grad(pts, _w=window, _ax=axis, _f=freq):
            s, ds = _w(pts)
            out = np.sin(_f * pts[:, _ax, None]) * ds
            out[:, _ax] += _f * np.cos(_f * pts[:, _ax]) * s
            return out

        meta = {
            "axis": axis,
            "freq": freq,
            "box": {"lo": list(box.lo), "hi": list(box.hi)},
            "width": width,
        }
        return Symbol("sine_window", fn, grad, box, False, meta)

    if kind == "smoothstep":
        axis = int(kw.get("axis", 0))
        if not 0 <= axis < dim:
            raise InvalidInputError("axis out of range")
        x0 = float(kw["x0"])
        width = float(kw["width"])
        if width <= 0:
            raise InvalidInputError("step width must be positive")

        def fn(pts, _ax=axis):
            return _smoothstep((pts[:, _ax] - x0) / width)

        def grad(pts, _ax=axis):
            out = np.zeros_like(pts)
            out[:, _ax] = _smoothstep_d((pts[:, _ax] - x0) / width) / width
            return out

        return Symbol("smoothstep", fn, grad, None, False, {"axis": axis, "x0": x0, "width": width})

    raise InvalidInputError(f"unknown symbol kind {kind!r}")
