"""Command-line entry point for oscillation functionals, constants, and studies.

Subcommands: eval-h, eval-k, beta, psi, gamma, denoise, pack-bench, report.
Options merge three layers with precedence flags > config file > defaults;
the config file is plain key=value lines keyed by long option names. Exit
codes: 0 success, 2 validation problem (bad flags, missing files or keys),
3 solver or runtime failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .denoise import almost_minimizer_study, convergence_study
from .fieldio import read_field, write_field_csv, write_pgm
from .fields import Sinusoid, lq_norm
from .functionals import EvalOptions, beta_constant, estimate_psi, sweep_eps
from .gammalab import (
    bv_characterization_probe,
    cantor_experiment,
    liminf_experiment,
    pointwise_limit_experiment,
    recovery_sequence_experiment,
)
from .packing import PlacementCandidate, solve_exact_small, solve_greedy_local
from .reporting import emit_report, load_report, render_png_lineplot, render_svg_lineplot, write_series_csv
from .windows import WindowSpec


class ValidationError(Exception):
    pass


def _parse_eps_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in str(text).split(",") if v != "")
    except ValueError as exc:
        raise ValidationError(f"bad eps ladder {text!r}: {exc}") from None
    if not vals or any(v <= 0 for v in vals):
        raise ValidationError(f"eps ladder must be positive numbers, got {text!r}")
    return vals


def _read_config_file(path: str) -> dict[str, str]:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"config file not found: {path}")
    out = {}
    for i, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{i}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _merged(args: argparse.Namespace, defaults: dict) -> dict:
    """Three-layer option merge: explicit flags, then config file, then defaults."""
    cfg = _read_config_file(args.config) if getattr(args, "config", None) else {}
    out = {}
    for key, default in defaults.items():
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            out[key] = flag_val
        elif key in cfg:
            out[key] = cfg[key]
        else:
            out[key] = default
    for key in cfg:
        if key not in defaults:
            raise ValidationError(f"unknown config key: {key}")
    return out


def _require(opts: dict, key: str):
    if opts.get(key) is None:
        raise ValidationError(f"missing required option '{key}' (flag --{key.replace('_', '-')} or config key)")
    return opts[key]


def _eval_options(opts: dict, orientations=None) -> EvalOptions:
    kw = dict(
        rho=int(opts.get("rho") or 4),
        solver=str(opts.get("solver") or "auto"),
        seed=int(opts.get("seed") or 0),
    )
    if opts.get("threads") is not None:
        kw["threads"] = int(opts["threads"])
    if orientations is not None:
        kw["orientations"] = orientations
    return EvalOptions(**kw)


def _load_input_field(opts: dict):
    path = _require(opts, "input")
    p = Path(str(path))
    if not p.exists():
        raise ValidationError(f"input file not found: {p}")
    return read_field(p)


_SHAPES_1D = {"interval"}
_SHAPES_2D = {"axis_box", "rotated_square", "ball", "diamond"}


def _check_shape(shape: str, dim: int) -> str:
    allowed = _SHAPES_1D if dim == 1 else _SHAPES_2D
    if shape not in allowed:
        raise ValidationError(f"shape {shape!r} not valid for a {dim}D field (choose from {sorted(allowed)})")
    return shape


def _cmd_eval_h(args) -> int:
    opts = _merged(args, dict(input=None, eps=None, shape=None, rho=None, solver=None,
                              seed=0, threads=None, out="reports"))
    u = _load_input_field(opts)
    eps_list = _parse_eps_list(_require(opts, "eps"))
    shape = _check_shape(str(opts["shape"] or ("interval" if u.domain.dim == 1 else "axis_box")), u.domain.dim)
    eopts = _eval_options(opts)
    t0 = time.perf_counter()
    ladder = sweep_eps(u, "H", 1, eps_list, eopts, shape=shape)
    series = {"H": ladder.series()}
    value = ladder.extrapolated if len(eps_list) > 1 else ladder.values[0]
    print(f"{value:.6f}")
    emit_report(
        "eval-h", opts["out"],
        config={k: opts[k] for k in ("input", "eps", "shape", "rho", "solver", "seed")},
        results={"values": dict(zip(map(str, ladder.eps), ladder.values)),
                 "extrapolated": ladder.extrapolated, "non_cauchy": ladder.non_cauchy},
        series=series, seeds=(int(opts["seed"] or 0),), runtime_s=time.perf_counter() - t0,
    )
    return 0


def _cmd_eval_k(args) -> int:
    opts = _merged(args, dict(input=None, eps=None, m=1, orientations=1, rho=None,
                              solver=None, seed=0, threads=None, out="reports"))
    u = _load_input_field(opts)
    eps_list = _parse_eps_list(_require(opts, "eps"))
    m = int(opts["m"])
    if m < 1:
        raise ValidationError("m must be >= 1")
    eopts = _eval_options(opts, orientations=int(opts["orientations"]))
    t0 = time.perf_counter()
    ladder = sweep_eps(u, "K", m, eps_list, eopts)
    value = ladder.extrapolated if len(eps_list) > 1 else ladder.values[0]
    print(f"{value:.6f}")
    emit_report(
        "eval-k", opts["out"],
        config={k: opts[k] for k in ("input", "eps", "m", "orientations", "rho", "solver", "seed")},
        results={"values": dict(zip(map(str, ladder.eps), ladder.values)),
                 "extrapolated": ladder.extrapolated, "non_cauchy": ladder.non_cauchy},
        series={"K": ladder.series()}, seeds=(int(opts["seed"] or 0),),
        runtime_s=time.perf_counter() - t0,
    )
    return 0


def _cmd_beta(args) -> int:
    opts = _merged(args, dict(n=None, m=None, quad_level=512, starts=8, iters=200, seed=0, out="reports"))
    n = int(_require(opts, "n"))
    m = int(_require(opts, "m"))
    t0 = time.perf_counter()
    res = beta_constant(n, m, quad_level=int(opts["quad_level"]), starts=int(opts["starts"]),
                        iters=int(opts["iters"]), seed=int(opts["seed"]))
    print(f"{res.value:.7f}")
    emit_report(
        "beta", opts["out"],
        config={k: opts[k] for k in ("n", "m", "quad_level", "starts", "iters", "seed")},
        results={"value": res.value, "axis_aligned": res.argmax_axis_aligned,
                 "value_coarse": res.value_coarse,
                 "argmax": {"".join(map(str, k)): v for k, v in res.argmax.items()}},
        seeds=(int(opts["seed"]),), runtime_s=time.perf_counter() - t0,
    )
    return 0


def _cmd_psi(args) -> int:
    opts = _merged(args, dict(directions=8, eps="0.125,0.0625,0.03125", resolution=256,
                              shape="axis_box", rho=2, seed=0, threads=None, out="reports"))
    count = int(opts["directions"])
    if count < 1:
        raise ValidationError("directions must be >= 1")
    dim = 2
    angles = [j * np.pi / count for j in range(count)]
    dirs = tuple((float(np.cos(a)), float(np.sin(a))) for a in angles)
    eps_list = _parse_eps_list(opts["eps"])
    shape = _check_shape(str(opts["shape"]), dim)
    t0 = time.perf_counter()
    table = estimate_psi(shape, dirs, eps_list, resolution=int(opts["resolution"]),
                         opts=_eval_options(opts))
    for d, v in zip(table.directions, table.values):
        print(f"({d[0]:+.4f},{d[1]:+.4f})  {v:.6f}")
    series = {"psi": tuple((float(np.arctan2(d[1], d[0])), float(v))
                           for d, v in zip(table.directions, table.values))}
    emit_report(
        "psi", opts["out"],
        config={k: opts[k] for k in ("directions", "eps", "resolution", "shape", "rho", "seed")},
        results={"directions": [list(d) for d in table.directions], "values": list(table.values),
                 "bounds": list(table.bounds())},
        series=series, seeds=(int(opts["seed"]),), runtime_s=time.perf_counter() - t0,
    )
    return 0


_GAMMA_EXPERIMENTS = ("pointwise", "recovery", "liminf", "cantor", "bv")


def _cmd_gamma(args) -> int:
    opts = _merged(args, dict(experiment=None, resolution=None, eps=None, m=1, seed=0,
                              depth=40, threads=None, out="reports"))
    name = str(_require(opts, "experiment"))
    if name not in _GAMMA_EXPERIMENTS:
        raise ValidationError(f"unknown experiment {name!r} (choose from {_GAMMA_EXPERIMENTS})")
    m = int(opts["m"])
    eps_list = _parse_eps_list(opts["eps"]) if opts["eps"] is not None else None
    res = int(opts["resolution"]) if opts["resolution"] is not None else None
    kw = {}
    if eps_list is not None:
        kw["eps_list"] = eps_list
    t0 = time.perf_counter()
    if name == "pointwise":
        report = pointwise_limit_experiment(Sinusoid((1.0,)), m=m, resolution=res or 1024, **kw)
    elif name == "recovery":
        report = recovery_sequence_experiment(resolution=res or 512, **kw)
    elif name == "liminf":
        report = liminf_experiment(Sinusoid((1.0,)), resolution=res or 2048,
                                   seed=int(opts["seed"]), m=m, **kw)
    elif name == "cantor":
        report = cantor_experiment(depth=int(opts["depth"]), resolution=res or 3**9,
                                   ladder=eps_list)
    else:
        report = bv_characterization_probe(resolution=res or 2048, seed=int(opts["seed"]), **kw)
    for k, v in report.verdicts.items():
        print(f"{k}: {v}")
    emit_report(
        f"gamma-{name}", opts["out"],
        config={k: opts[k] for k in ("experiment", "resolution", "eps", "m", "seed", "depth")},
        results={"verdicts": report.verdicts, "reference": report.reference,
                 "reference_rule": report.reference_rule, "stats": report.stats},
        series=report.series, seeds=(int(opts["seed"]),), runtime_s=time.perf_counter() - t0,
    )
    return 0


def _cmd_denoise(args) -> int:
    opts = _merged(args, dict(input=None, lam=None, q=2.0, eps="0.25,0.125,0.0625", rho=None,
                              tol=1e-3, max_iters=250, seed=0, seed2=1, threads=None, out="reports"))
    f = _load_input_field(opts)
    lam = float(_require(opts, "lam"))
    if lam <= 0:
        raise ValidationError("lam must be positive")
    q = float(opts["q"])
    if q < 1:
        raise ValidationError("q must be >= 1")
    eps_list = _parse_eps_list(opts["eps"])
    rho = int(opts["rho"] or 2)
    tol = float(opts["tol"])
    t0 = time.perf_counter()
    if q > 1:
        study = convergence_study(f, lam, q, eps_list, rho=rho, tol=tol,
                                  seeds=(int(opts["seed"]), int(opts["seed2"])),
                                  problem_overrides={"max_iters": int(opts["max_iters"])})
    else:
        study = almost_minimizer_study(f, lam, 1.0, eps_list, rho=rho, seeds=(int(opts["seed"]),))
    outdir = Path(str(opts["out"]))
    outdir.mkdir(parents=True, exist_ok=True)
    for e, sol in zip(study.eps, study.solutions):
        tag = f"denoised-eps{e:g}"
        if f.domain.dim == 2:
            write_pgm(sol.u, outdir / f"{tag}.pgm")
        else:
            write_field_csv(sol.u, outdir / f"{tag}.csv")
    nf = lq_norm(f, 2.0)
    series = {
        "distance": tuple(zip(study.eps, study.distances)),
        "objective": tuple(zip(study.eps, study.objectives)),
    }
    for e, d, v in zip(study.eps, study.distances, study.objectives):
        print(f"eps={e:g} distance={d:.6f} objective={v:.6f}")
    for k, v in study.verdicts.items():
        print(f"{k}: {v}")
    emit_report(
        "denoise", opts["out"],
        config={k: opts[k] for k in ("input", "lam", "q", "eps", "rho", "tol", "max_iters", "seed")},
        results={"verdicts": study.verdicts, "reference_objective": study.reference_objective,
                 "distances": list(study.distances), "objectives": list(study.objectives),
                 "datum_l2": nf, "meta": study.meta},
        series=series, seeds=(int(opts["seed"]), int(opts["seed2"])),
        runtime_s=time.perf_counter() - t0,
    )
    return 0


def _cmd_pack_bench(args) -> int:
    opts = _merged(args, dict(count=50, size=12, seed=0, out="reports"))
    count, size = int(opts["count"]), int(opts["size"])
    if size > 20:
        raise ValidationError("size must be <= 20 for the exact benchmark")
    rng = np.random.default_rng(int(opts["seed"]))
    t0 = time.perf_counter()
    ratios = []
    times = {"exact": 0.0, "greedy": 0.0}
    for _ in range(count):
        cands = []
        for _ in range(size):
            c = rng.uniform(0.1, 0.9)
            e = rng.uniform(0.05, 0.25)
            cands.append(PlacementCandidate(WindowSpec("interval", (float(c),), float(e)),
                                            float(rng.uniform(0.1, 1.0))))
        t = time.perf_counter()
        ex = solve_exact_small(cands, limit=size)
        times["exact"] += time.perf_counter() - t
        t = time.perf_counter()
        gr = solve_greedy_local(cands, seed=int(opts["seed"]))
        times["greedy"] += time.perf_counter() - t
        ratios.append(gr.family.total_weight / ex.family.total_weight if ex.family.total_weight else 1.0)
    ratios = np.asarray(ratios)
    print(f"instances={count} size={size} greedy/exact min={ratios.min():.4f} mean={ratios.mean():.4f}")
    emit_report(
        "pack-bench", opts["out"],
        config={k: opts[k] for k in ("count", "size", "seed")},
        results={"ratio_min": float(ratios.min()), "ratio_mean": float(ratios.mean()),
                 "time_exact_s": times["exact"], "time_greedy_s": times["greedy"]},
        seeds=(int(opts["seed"]),), runtime_s=time.perf_counter() - t0,
    )
    return 0


def _cmd_report(args) -> int:
    opts = _merged(args, dict(input=None, out="reports"))
    path = Path(str(_require(opts, "input")))
    if not path.exists():
        raise ValidationError(f"input file not found: {path}")
    doc = load_report(path)
    series = {k: tuple((float(x), float(y)) for x, y in pts) for k, pts in doc.get("series", {}).items()}
    outdir = Path(str(opts["out"]))
    outdir.mkdir(parents=True, exist_ok=True)
    base = path.stem
    for key, pts in series.items():
        write_series_csv(outdir / f"{base}-{key}.csv", pts)
    if series:
        render_svg_lineplot(outdir / f"{base}.svg", series, title=doc.get("name", base))
        render_png_lineplot(outdir / f"{base}.png", series, title=doc.get("name", base))
    print(f"rendered {len(series)} series from {path}")
    return 0


_COMMANDS = {
    "eval-h": _cmd_eval_h,
    "eval-k": _cmd_eval_k,
    "beta": _cmd_beta,
    "psi": _cmd_psi,
    "gamma": _cmd_gamma,
    "denoise": _cmd_denoise,
    "pack-bench": _cmd_pack_bench,
    "report": _cmd_report,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oscilla", description=__doc__)
    parser.add_argument("--version", action="version", version=f"oscilla {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, flags: dict):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=None)
        for flag, kind in flags.items():
            p.add_argument(f"--{flag.replace('_', '-')}", dest=flag, default=None, type=kind)
        return p

    add("eval-h", dict(input=str, eps=str, shape=str, rho=int, solver=str, seed=int, threads=int))
    add("eval-k", dict(input=str, eps=str, m=int, orientations=int, rho=int, solver=str,
                       seed=int, threads=int))
    add("beta", dict(n=int, m=int, quad_level=int, starts=int, iters=int, seed=int))
    add("psi", dict(directions=int, eps=str, resolution=int, shape=str, rho=int, seed=int, threads=int))
    add("gamma", dict(experiment=str, resolution=int, eps=str, m=int, seed=int, depth=int, threads=int))
    add("denoise", dict(input=str, lam=float, q=float, eps=str, rho=int, tol=float,
                        max_iters=int, seed=int, seed2=int, threads=int))
    add("pack-bench", dict(count=int, size=int, seed=int))
    add("report", dict(input=str))
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        handler = _COMMANDS[args.command]
    except KeyError:
        print(f"unknown command: {args.command}", file=sys.stderr)
        return 2
    try:
        return handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver or runtime failure
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
