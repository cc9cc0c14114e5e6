"""Command line entry point.

    blab <verb> --config <path> [--out <dir>] [--threads N] [--seed S]

Verbs: kernel, wavelet, norm, operator, experiment.  Every verb loads a JSON
config, runs its checks, writes outputs under --out, and exits 0 only if all
checks passed.  Numeric outputs are deterministic for a fixed config; timing
data is confined to run_meta.json.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import BlabError, SchemaError
from .geometry import build_systems
from .harness import (
    ExperimentConfig,
    _check_keys,
    _integer,
    _number,
    _parse_box,
    _parse_lorentz,
    _parse_space,
    _parse_symbol,
    run_experiment,
)
from .kernels import HeatKernelEvaluator, RieszKernelEvaluator, heat_mass
from .norms import besov_norm_direct, besov_norm_dyadic, mean_oscillation, osc_norm
from .operators import (
    build_grid,
    commutator_matrix,
    hs_direct,
    schatten_lorentz,
    singular_values,
)
from .quadrature import box_grid_rule
from .wavelets import build_alpert_basis, multi_indices


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise SchemaError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise SchemaError(f"config is not valid JSON: {e}")
    if not isinstance(cfg, dict):
        raise SchemaError("config: top level must be an object")
    return cfg


def _write_json(outdir: Path, name: str, payload: dict) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / name).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _finish(outdir: Path, payload: dict, checks: list) -> int:
    payload["checks"] = [{"name": n, "passed": bool(ok), "detail": d} for n, ok, d in checks]
    ok_all = all(ok for _, ok, _ in checks)
    payload["passed"] = ok_all
    _write_json(outdir, "summary.json", payload)
    for name, ok, detail in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return 0 if ok_all else 1


def cmd_kernel(cfg: dict, outdir: Path, seed: int) -> int:
    _check_keys(cfg, {"kind", "space", "t", "ell", "points", "samples", "tol"}, "config")
    kind = cfg.get("kind")
    if kind not in ("heat", "riesz"):
        raise SchemaError("kind: expected 'heat' or 'riesz'")
    params = _parse_space(cfg.get("space"))
    tol = _number(cfg.get("tol", 1e-6), "tol", positive=True)
    rng = np.random.default_rng(seed)
    checks = []
    rows = []
    if kind == "heat":
        t = _number(cfg.get("t", 1.0), "t", positive=True)
        ev = HeatKernelEvaluator(params)
        pts = cfg.get("points")
        if pts is None:
            pts = (rng.random((3, params.dim)) * 2.0 + 0.25).tolist()
        for x in pts:
            x = np.asarray(x, float)
            total = heat_mass(ev, t, x)
            rows.append({"x": list(map(float, x)), "t": t, "mass": total})
            checks.append(
                (f"normalization@{np.round(x, 4).tolist()}", abs(total - 1.0) <= tol, f"mass={total!r}")
            )
    else:
        ell = _integer(cfg.get("ell", 1), "ell", lo=1)
        ev = RieszKernelEvaluator(params, ell)
        ref = ev.refined()
        pairs = cfg.get("points")
        if pairs is None:
            base = rng.random((4, params.dim)) + 0.25
            off = rng.random((4, params.dim)) * 0.5 + 0.5
            pairs = [[a.tolist(), (a + b).tolist()] for a, b in zip(base, off)]
        for x, y in pairs:
            x = np.asarray(x, float)
            y = np.asarray(y, float)
            v = ev.kernel(x, y)
            v2 = ref.kernel(x, y)
            drift = abs(v - v2) / max(abs(v2), 1e-300)
            rows.append({"x": list(map(float, x)), "y": list(map(float, y)), "value": v})
            checks.append((f"refinement@{np.round(x, 3).tolist()}", drift <= tol, f"drift={drift:.3e}"))
    return _finish(outdir, {"kind": kind, "rows": rows}, checks)


def cmd_wavelet(cfg: dict, outdir: Path, seed: int) -> int:
    del seed
    _check_keys(cfg, {"space", "cube", "order", "tol"}, "config")
    params = _parse_space(cfg.get("space"))
    if "cube" not in cfg:
        raise SchemaError("config: missing 'cube'")
    cube = _parse_box(cfg["cube"], params.dim, "cube")
    order = _integer(cfg.get("order", 2), "order", lo=1)
    tol = _number(cfg.get("tol", 1e-10), "tol", positive=True)
    basis = build_alpert_basis(params, cube, order)

    pts, wts = box_grid_rule(params.lam, cube.lo, cube.hi, 2, 2 * order + 6)
    vals = np.stack([el.evaluate(pts) for el in basis.elements])
    gram = (vals * wts) @ vals.T
    ortho = float(np.max(np.abs(gram - np.eye(len(basis.elements)))))

    worst = 0.0
    for beta in multi_indices(params.dim, order - 1):
        mono = np.prod(pts ** np.asarray(beta, float), axis=1)
        worst = max(worst, float(np.max(np.abs((vals * wts) @ mono))))

    checks = [
        ("orthonormality", ortho <= tol, f"residual={ortho:.3e}"),
        ("vanishing_moments", worst <= tol, f"residual={worst:.3e}"),
    ]
    payload = {
        "order": order,
        "n_elements": len(basis.elements),
        "basis": json.loads(basis.to_json()),
    }
    return _finish(outdir, payload, checks)


def cmd_norm(cfg: dict, outdir: Path, seed: int) -> int:
    del seed
    _check_keys(
        cfg, {"space", "symbol", "norm", "p", "q", "r", "window", "k_range", "cube"}, "config"
    )
    params = _parse_space(cfg.get("space"))
    if "symbol" not in cfg:
        raise SchemaError("config: missing 'symbol'")
    sym = _parse_symbol(cfg["symbol"], params.dim, "symbol")
    which = cfg.get("norm")
    if which not in ("osc", "besov_direct", "besov_dyadic", "mo"):
        raise SchemaError("norm: expected one of osc, besov_direct, besov_dyadic, mo")
    checks = []
    payload = {"norm": which}
    if which == "mo":
        if "cube" not in cfg:
            raise SchemaError("config: missing 'cube'")
        cube = _parse_box(cfg["cube"], params.dim, "cube")
        r = _number(cfg.get("r", 1.0), "r")
        value = mean_oscillation(params, sym, cube, r=r)
        payload.update({"value": value, "r": r})
        checks.append(("finite", math.isfinite(value), f"value={value!r}"))
        return _finish(outdir, payload, checks)

    if "window" not in cfg:
        raise SchemaError("config: missing 'window'")
    window = _parse_box(cfg["window"], params.dim, "window")
    kr = cfg.get("k_range", [-2, 5])
    if not (isinstance(kr, list) and len(kr) == 2):
        raise SchemaError("k_range: expected [k_min, k_max]")
    k_range = (int(kr[0]), int(kr[1]))
    if which == "osc":
        lp = _parse_lorentz(cfg.get("p", 2.0), cfg.get("q", 2.0), "config")
        systems = build_systems(params, window, k_range)
        out = osc_norm(params, systems, sym, lp, window=window)
        sens = abs(out.value - out.shrunk_value) / out.value if out.value > 0 else 0.0
        payload.update({"value": out.value, "shrunk_value": out.shrunk_value})
        checks.append(("finite", math.isfinite(out.value), f"value={out.value!r}"))
        checks.append(("truncation_sensitivity", sens <= 0.5, f"rel={sens:.3f}"))
    elif which == "besov_direct":
        p = _number(cfg.get("p", params.dim + 1.0), "p", positive=True)
        out = besov_norm_direct(params, sym, p, window=window)
        sens = (
            abs(out.half_collar_value - out.value) / out.value if out.value > 0 else 0.0
        )
        payload.update({"value": out.value, "half_collar_value": out.half_collar_value})
        checks.append(("finite", math.isfinite(out.value), f"value={out.value!r}"))
        checks.append(("collar_sensitivity", sens <= 0.5, f"rel={sens:.3f}"))
    else:
        p = _number(cfg.get("p", params.dim + 1.0), "p", positive=True)
        systems = build_systems(params, window, k_range)
        value = besov_norm_dyadic(params, systems, sym, p, k_range=k_range, window=window)
        payload.update({"value": value})
        checks.append(("finite", math.isfinite(value), f"value={value!r}"))
    return _finish(outdir, payload, checks)


def cmd_operator(cfg: dict, outdir: Path, seed: int) -> int:
    del seed
    _check_keys(
        cfg, {"space", "symbol", "window", "resolution", "ell", "p", "q", "tol", "save_matrix"}, "config"
    )
    params = _parse_space(cfg.get("space"))
    if "symbol" not in cfg:
        raise SchemaError("config: missing 'symbol'")
    sym = _parse_symbol(cfg["symbol"], params.dim, "symbol")
    if "window" not in cfg:
        raise SchemaError("config: missing 'window'")
    window = _parse_box(cfg["window"], params.dim, "window")
    res = _integer(cfg.get("resolution", 16), "resolution", lo=2)
    ell = _integer(cfg.get("ell", 1), "ell", lo=1)
    lp = _parse_lorentz(cfg.get("p", 2.0), cfg.get("q", 2.0), "config")
    tol = _number(cfg.get("tol", 0.02), "tol", positive=True)

    ev = RieszKernelEvaluator(params, ell)
    grid = build_grid(params, window, res)
    op = commutator_matrix(sym, grid, ev)
    sv = singular_values(op)
    value = schatten_lorentz(sv, lp)

    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "singular_values.csv").write_text(
        "sigma\n" + "\n".join(repr(float(v)) for v in sv) + "\n", encoding="utf-8"
    )
    if cfg.get("save_matrix"):
        op.save(str(outdir / "commutator"))

    checks = [("finite", math.isfinite(value), f"value={value!r}")]
    if lp.p == 2.0 and lp.q == 2.0 and not sym.is_constant:
        hs = hs_direct(sym, grid, ev)
        rel = abs(value - hs) / hs if hs > 0 else 0.0
        checks.append(("hs_consistency", rel <= tol, f"rel={rel:.4e}"))
    payload = {"schatten": value, "p": lp.p, "q": lp.q, "resolution": res, "n_singular_values": int(sv.size)}
    return _finish(outdir, payload, checks)


def cmd_experiment(cfg_path: str, outdir: Path, threads: int, seed: int) -> int:
    cfg = ExperimentConfig.from_file(cfg_path)
    if seed:
        cfg.seed = seed
    rep = run_experiment(cfg)
    dest = outdir if outdir is not None else Path(cfg.out) if cfg.out else Path("run")
    rep.write(dest, threads=threads)
    for name, ok, detail in rep.checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    print(f"report: {dest / 'report.csv'}")
    return 0 if rep.passed() else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="blab",
        description="Weighted half-space commutator laboratory",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("kernel", "wavelet", "norm", "operator", "experiment"):
        sp = sub.add_parser(verb)
        sp.add_argument("--config", required=True, help="path to a JSON config")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker count (runs are sequential; recorded in metadata)")
        sp.add_argument("--seed", type=int, default=0, help="seed for sampled check points")
    args = parser.parse_args(argv)

    outdir = Path(args.out) if args.out else None
    try:
        if args.verb == "experiment":
            return cmd_experiment(args.config, outdir, args.threads, args.seed)
        cfg = _load_config(args.config)
        dest = outdir if outdir is not None else Path("run")
        handler = {
            "kernel": cmd_kernel,
            "wavelet": cmd_wavelet,
            "norm": cmd_norm,
            "operator": cmd_operator,
        }[args.verb]
        return handler(cfg, dest, args.seed)
    except BlabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
