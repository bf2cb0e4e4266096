"""Command-line entry point: simulate, denoise, evaluate, sweep, trace-plot.

Exit codes: 0 success, 2 bad input or arguments, 3 numerical failure.
Solver options resolve as: built-in defaults < ``--case`` preset <
``--config`` JSON file < explicit flags. The resolved configuration is
echoed into every run's ``manifest.json``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .cubeio import CubeFormatError, read_cube, read_pan, write_cube
from .noise import NoiseSpec, corrupt
from .solver import (IterationTrace, NumericalError, SolverConfig, WeightsMode,
                     denoise, recommended_config)
from .synthetic import band_mean_pan

log = logging.getLogger("pandenoise")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

SWEEP_PARAMS = {"q": "q", "beta": "beta", "lambda": "lam", "tau": "tau", "rank": "rank"}


class InputError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    wall_time_s: float = 0.0
    status: str = "ok"
    extra: dict = field(default_factory=dict)

    def write(self, path: Path) -> None:
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(asdict(self), indent=2, default=_json_default))
        os.replace(tmp, path)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _cube_digests(header_path) -> dict:
    header_path = Path(header_path)
    out = {str(header_path): sha256(header_path)}
    try:
        d = json.loads(header_path.read_text())
        data = header_path.parent / d["data_file"]
        out[str(data)] = sha256(data)
    except (ValueError, KeyError, TypeError, OSError):
        pass
    return out


# ------------------------------------------------------------------ config


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--tau", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--rank", type=int)
    g.add_argument("--q", type=float)
    g.add_argument("--rho", type=float)
    g.add_argument("--tol", type=float)
    g.add_argument("--mu0", type=float, help="initial penalty (default 1/||Y||_2)")
    g.add_argument("--max-iter", dest="max_iter", type=int)
    g.add_argument("--corr-window", dest="corr_window", type=int)
    g.add_argument("--unit-weights", action="store_true",
                   help="unit TV weights (RCTV); no PAN needed")
    g.add_argument("--config", type=Path, help="JSON file with solver options")


def resolve_solver_config(args, case: int | None = None) -> SolverConfig:
    base = SolverConfig().to_dict()
    if case is not None:
        base.update(recommended_config(case).to_dict())
    if getattr(args, "config", None) is not None:
        try:
            cfg_file = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        base.update(cfg_file.get("solver", cfg_file))
    for name in ("tau", "beta", "lam", "rank", "q", "rho", "tol", "mu0", "max_iter", "corr_window"):
        v = getattr(args, name, None)
        if v is not None:
            base[name] = v
    if getattr(args, "unit_weights", False):
        base["weights_mode"] = WeightsMode.UNIT.value
    return SolverConfig.from_dict(base)


def _noise_spec(args, case: int, seed: int) -> NoiseSpec:
    kw: dict = {"case_id": case, "seed": seed}
    # noise levels on the command line use the 8-bit scale
    if getattr(args, "sigma", None) is not None:
        kw["sigma_iid"] = args.sigma / 255
    if getattr(args, "sigma_range", None) is not None:
        kw["sigma_range"] = tuple(v / 255 for v in args.sigma_range)
    for flag in ("impulse_range", "stripe_range", "stripe_amplitude"):
        v = getattr(args, flag, None)
        if v is not None:
            key = {"impulse_range": "impulse_ratio_range", "stripe_range": "stripe_ratio_range",
                   "stripe_amplitude": "stripe_amplitude_range"}[flag]
            kw[key] = tuple(v)
    return NoiseSpec(**kw)


def _add_noise_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("noise overrides (sigma values on the 8-bit scale)")
    g.add_argument("--sigma", type=float, help="case 1 noise std, e.g. 10")
    g.add_argument("--sigma-range", type=float, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--impulse-range", type=float, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--stripe-range", type=float, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--stripe-amplitude", type=float, nargs=2, metavar=("LO", "HI"))


def _load_pan(path, shape):
    return read_pan(path, target_shape=shape[:2]) if path is not None else None


# ------------------------------------------------------------------ commands


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    clean = read_cube(args.input)
    spec = _noise_spec(args, args.case, args.seed)
    noisy, report = corrupt(clean.data, spec)

    noisy_hdr = out / "noisy.json"
    write_cube(noisy, noisy_hdr, provenance=spec.to_dict())
    (out / "noise_spec.json").write_text(spec.to_json())
    (out / "mask.json").write_text(json.dumps(report.summary(), indent=2))
    rep = metrics.evaluate(noisy, clean.data)
    (out / "baseline.json").write_text(rep.to_json())
    table = metrics.format_table([("noisy", rep)])
    (out / "baseline.txt").write_text(table)
    outputs = [noisy_hdr, out / "noisy.bin", out / "noise_spec.json", out / "mask.json",
               out / "baseline.json", out / "baseline.txt"]
    if args.write_pan:
        write_cube(band_mean_pan(clean.data).data, out / "pan.json")
        outputs += [out / "pan.json", out / "pan.bin"]
    print(table, end="")
    RunManifest(
        command="simulate",
        config={"noise": spec.to_dict()},
        inputs=_cube_digests(args.input),
        outputs=[str(p) for p in outputs],
        wall_time_s=time.perf_counter() - t0,
    ).write(out / "manifest.json")
    return EXIT_OK


def run_denoise(noisy, pan, cfg: SolverConfig, reference=None):
    if cfg.weights_mode is WeightsMode.PAN_GUIDED and pan is None:
        raise InputError("--pan is required unless --unit-weights is given")
    return denoise(noisy, pan, cfg, reference=reference)


def cmd_denoise(args) -> int:
    t0 = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = resolve_solver_config(args, args.case)
    noisy = read_cube(args.input)
    pan = _load_pan(args.pan, noisy.shape) if cfg.weights_mode is WeightsMode.PAN_GUIDED else None
    ref = read_cube(args.reference).data if args.reference is not None else None
    inputs = _cube_digests(args.input)
    if args.pan is not None:
        inputs[str(args.pan)] = sha256(args.pan)

    t_solve = time.perf_counter()
    res = run_denoise(noisy, pan, cfg, ref)
    solve_time = time.perf_counter() - t_solve

    write_cube(res.X.data, out / "restored.json")
    (out / "trace.txt").write_text(res.trace.to_text())
    outputs = [out / "restored.json", out / "restored.bin", out / "trace.txt"]
    extra = {
        "iterations": len(res.trace),
        "final_residual": res.trace.residuals[-1],
        "stage2_iteration": res.state.stage2_iteration,
        "solve_time_s": solve_time,
    }
    if ref is not None:
        rep = metrics.evaluate(res.X.data, ref)
        (out / "metrics.json").write_text(rep.to_json())
        (out / "metrics.txt").write_text(metrics.format_table([("restored", rep)]))
        outputs += [out / "metrics.json", out / "metrics.txt"]
        extra["metrics"] = {k: v for k, v in zip(metrics.TABLE_COLUMNS, rep.row())}
    status = "converged" if res.state.converged else "max_iter"
    RunManifest(
        command="denoise",
        config={"solver": cfg.to_dict()},
        inputs=inputs,
        outputs=[str(p) for p in outputs],
        wall_time_s=time.perf_counter() - t0,
        status=status,
        extra=extra,
    ).write(out / "manifest.json")
    print(f"{status} after {len(res.trace)} iterations, residual {res.trace.residuals[-1]:.3e}, "
          f"{solve_time:.2f}s")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    restored = read_cube(args.restored)
    reference = read_cube(args.reference)
    if restored.shape != reference.shape:
        raise InputError(f"shape mismatch: {restored.shape} vs {reference.shape}")
    rep = metrics.evaluate(restored.data, reference.data)
    table = metrics.format_table([(args.label, rep)])
    print(table, end="")
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(rep.to_json())
        (out / "metrics.txt").write_text(table)
    return EXIT_OK


SWEEP_HEADER_WIDTH = 14


def format_sweep(param: str, rows) -> str:
    """``rows`` are ``(value, MetricsReport, iterations, seconds, recommended)``."""
    cols = (param, "PSNR", "SSIM", "ERGAS", "SAM", "iters", "seconds", "recommended")
    lines = ["".join(c.rjust(SWEEP_HEADER_WIDTH) for c in cols)]
    for value, rep, iters, secs, rec in rows:
        vals = [f"{value:.6g}"] + [f"{v:.6f}" for v in rep.row()] + [str(iters), f"{secs:.3f}", str(int(rec))]
        lines.append("".join(v.rjust(SWEEP_HEADER_WIDTH) for v in vals))
    return "\n".join(lines) + "\n"


def parse_sweep(text: str) -> list[dict]:
    lines = text.splitlines()
    w = SWEEP_HEADER_WIDTH
    names = [lines[0][i:i + w].strip() for i in range(0, len(lines[0]), w)]
    out = []
    for line in lines[1:]:
        if line.strip():
            out.append({n: float(line[i * w:(i + 1) * w]) for i, n in enumerate(names)})
    return out


def _as_stored(a: np.ndarray) -> np.ndarray:
    return a.astype(np.float32).astype(np.float64)


def cmd_sweep(args) -> int:
    if not args.grid:
        raise InputError("empty grid")
    t0 = time.perf_counter()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    field_name = SWEEP_PARAMS[args.param]
    base = resolve_solver_config(args, args.case)
    clean = read_cube(args.input)
    spec = _noise_spec(args, args.case, args.seed)
    # round through the on-disk precision so a grid point matches simulate -> denoise -> evaluate
    noisy = _as_stored(corrupt(clean.data, spec)[0])
    pan = read_pan(args.pan, clean.shape[:2]) if args.pan is not None else band_mean_pan(clean.data)
    rec_cfg = recommended_config(args.case)

    rows = []
    for value in args.grid:
        d = base.to_dict()
        d[field_name] = int(value) if field_name == "rank" else float(value)
        cfg = SolverConfig.from_dict(d)
        t = time.perf_counter()
        res = run_denoise(noisy, pan, cfg)
        secs = time.perf_counter() - t
        rep = metrics.evaluate(_as_stored(res.X.data), clean.data)
        rec_value = getattr(rec_cfg, field_name)
        rows.append((value, rep, len(res.trace), secs, math.isclose(value, rec_value)))
        log.info("%s=%g: PSNR %.3f SAM %.3f", args.param, value, rep.psnr, rep.sam)

    text = format_sweep(args.param, rows)
    dat = out / f"sweep_{args.param}_case{args.case}.dat"
    dat.write_text(text)
    print(text, end="")
    RunManifest(
        command="sweep",
        config={"solver": base.to_dict(), "noise": spec.to_dict(), "param": args.param,
                "grid": list(args.grid)},
        inputs=_cube_digests(args.input),
        outputs=[str(dat)],
        wall_time_s=time.perf_counter() - t0,
    ).write(out / "manifest.json")
    return EXIT_OK


def plot_trace(trace: IterationTrace, path):
    """Dual-axis PSNR/SAM convergence plot; residual-only when no quality columns."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if len(trace) == 0:
        raise InputError("empty trace")
    it = trace.column("iteration")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.set_xlabel("Iteration")
    if trace.has_quality:
        psnr = trace.column("psnr")
        sam = trace.column("sam")
        ax.plot(it, psnr, "o-", color="tab:blue", ms=3)
        ax.set_ylabel("PSNR (dB)", color="tab:blue")
        ax2 = ax.twinx()
        ax2.plot(it, sam, "s-", color="tab:pink", ms=3)
        ax2.set_ylabel("SAM (deg)", color="tab:pink")
        for a, y in ((ax, psnr), (ax2, sam)):
            y = y[np.isfinite(y)]
            if y.size:
                pad = 0.05 * max(np.ptp(y), 1e-9)
                a.set_ylim(y.min() - pad, y.max() + pad)
    else:
        res = trace.residuals
        ax.semilogy(it, res, "o-", ms=3)
        ax.set_ylabel("constraint residual")
        pos = res[res > 0]
        if pos.size:
            ax.set_ylim(pos.min() / 1.5, pos.max() * 1.5)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    return fig


def cmd_trace_plot(args) -> int:
    try:
        trace = IterationTrace.from_text(Path(args.trace).read_text())
    except ValueError as exc:
        raise InputError(f"{args.trace}: {exc}") from None
    fig = plot_trace(trace, args.out)
    import matplotlib.pyplot as plt

    plt.close(fig)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pandenoise", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="corrupt a clean cube with a synthetic noise case")
    s.add_argument("--input", required=True, type=Path)
    s.add_argument("--case", required=True, type=int, choices=range(1, 6))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--write-pan", action="store_true", help="also write the clean band-mean PAN")
    _add_noise_flags(s)
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("denoise", help="run the PAN-guided solver")
    d.add_argument("--input", required=True, type=Path)
    d.add_argument("--pan", type=Path)
    d.add_argument("--reference", type=Path, help="clean cube for per-iteration PSNR/SAM")
    d.add_argument("--case", type=int, choices=range(1, 6), help="use the recommended preset")
    d.add_argument("--out", required=True, type=Path)
    _add_solver_flags(d)
    d.set_defaults(func=cmd_denoise)

    e = sub.add_parser("evaluate", help="PSNR/SSIM/ERGAS/SAM table")
    e.add_argument("--restored", required=True, type=Path)
    e.add_argument("--reference", required=True, type=Path)
    e.add_argument("--label", default="restored")
    e.add_argument("--out", type=Path)
    e.set_defaults(func=cmd_evaluate)

    w = sub.add_parser("sweep", help="metric curves over one parameter")
    w.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    w.add_argument("--grid", required=True, type=float, nargs="*")
    w.add_argument("--case", required=True, type=int, choices=range(1, 6))
    w.add_argument("--input", required=True, type=Path, help="clean cube")
    w.add_argument("--pan", type=Path, help="default: band mean of the clean cube")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out", required=True, type=Path)
    _add_solver_flags(w)
    _add_noise_flags(w)
    w.set_defaults(func=cmd_sweep)

    t = sub.add_parser("trace-plot", help="plot an iteration trace")
    t.add_argument("--trace", required=True, type=Path)
    t.add_argument("--out", required=True, type=Path)
    t.set_defaults(func=cmd_trace_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, CubeFormatError, ValueError, IndexError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
