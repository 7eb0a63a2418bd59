"""Command-line surface: simulate paths, estimate variograms, identify
parameters, and reproduce the two-run depth-10 experiment.

Exit codes: 0 success, 2 config/usage error, 3 I/O error, 4 numerical
failure.  Every command writes a manifest recording the fully resolved
configuration, so any output can be regenerated from the manifest alone.
Config precedence: command-line flags > config-file keys > defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .engine import (SimConfig, SimulationError, read_topseries_binary,
                     read_topseries_csv, simulate, write_topseries_binary,
                     write_topseries_csv)
from .ident import (CurveQuality, FitError, identify, load_curve,
                    load_or_build_curve, save_curve)
from .model import (AtlasParams, ParameterError, SimpleAtlasSpec,
                    make_atlas_params, make_simple, params_to_kv)
from .stats import (dyadic_lags, ensemble_variogram, pooled_variogram,
                    read_variogram_csv, relative_variogram,
                    write_variogram_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

# The two parameter sets of the reference experiment.
FIG1_RUNS = (
    ("run_a", SimpleAtlasSpec(n=10, g=1e-4, sigma2=1e-4)),
    ("run_b", SimpleAtlasSpec(n=10, g=2e-4, sigma2=1e-4)),
)


class ConfigError(ValueError):
    pass


def _read_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        with open(path) as f:
            for line in f:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"bad config line (need key=value): {line!r}")
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    except OSError as e:
        raise ConfigError(f"config: cannot read {path}: {e}") from e
    return out


def _resolve(key: str, flag_value, config: dict[str, str], default, cast):
    """flags > config file > default; errors name the offending key."""
    if flag_value is not None:
        return flag_value
    if key in config:
        try:
            return cast(config[key])
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {config[key]!r}") from None
    return default


def _parse_bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes"):
        return True
    if s.lower() in ("0", "false", "no"):
        return False
    raise ValueError(s)


def _resolve_params(args, config: dict[str, str]) -> AtlasParams:
    gvec = _resolve("g-vector", getattr(args, "g_vector", None), config, None, str)
    simple_g = _resolve("simple-g", getattr(args, "simple_g", None), config, None, float)
    depth = _resolve("depth", getattr(args, "depth", None), config, None, int)
    sigma2 = _resolve("sigma2", getattr(args, "sigma2", None), config, None, float)
    if sigma2 is None:
        raise ConfigError("sigma2: required")
    if gvec is not None:
        g = [float(v) for v in str(gvec).split(",")]
        return make_atlas_params(g, sigma2)
    if simple_g is None:
        raise ConfigError("simple-g or g-vector: one is required")
    if depth is None:
        raise ConfigError("depth: required with simple-g")
    return make_simple(SimpleAtlasSpec(n=depth, g=simple_g, sigma2=sigma2))


def _resolve_simconfig(args, config: dict[str, str], default_steps=None) -> SimConfig:
    steps = _resolve("steps", args.steps, config, default_steps, lambda s: int(float(s)))
    if steps is None:
        raise ConfigError("steps: required")
    if steps < 1:
        raise ConfigError("steps must be ≥ 1")
    return SimConfig(
        steps=steps,
        dt=_resolve("dt", args.dt, config, 1.0, float),
        burn_in=_resolve("burn_in", args.burn_in, config, 100_000,
                         lambda s: int(float(s))),
        init_mode=_resolve("init_mode", getattr(args, "init_mode", None),
                           config, "exponential_gaps", str),
        paths=_resolve("paths", args.paths, config, 1, int),
        master_seed=_resolve("seed", args.seed, config, 0, int),
        record_mean=_resolve("record_mean", getattr(args, "record_mean", None)
                             or None, config, False, _parse_bool),
    )


def _parse_lags(spec: str, max_allowed: int):
    if not spec.startswith("dyadic:"):
        raise ConfigError(f"lags: unsupported spec {spec!r} (use dyadic:MAX)")
    try:
        max_lag = int(float(spec.split(":", 1)[1]))
    except ValueError:
        raise ConfigError(f"lags: cannot parse {spec!r}") from None
    max_lag = min(max_lag, max_allowed)
    if max_lag < 1:
        raise ConfigError("lags: max must be ≥ 1 and < series length")
    return dyadic_lags(max_lag)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("ATLASID_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out_dir: Path, name: str, payload: dict) -> Path:
    path = out_dir / f"{name}_manifest.json"
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _sim_kv(cfg: SimConfig) -> dict:
    return {"steps": cfg.steps, "dt": cfg.dt, "burn_in": cfg.burn_in,
            "init_mode": cfg.init_mode, "paths": cfg.paths,
            "seed": cfg.master_seed, "record_mean": cfg.record_mean}


def _report_rate(cfg, wall):
    total = (cfg.burn_in + cfg.steps) * cfg.paths
    print(f"simulated {cfg.paths} path(s): {total / max(wall, 1e-9):.3g} steps/s",
          file=sys.stderr)


# ---------------------------------------------------------------------------
# Subcommands

def cmd_simulate(args) -> int:
    config = _read_config_file(args.config) if args.config else {}
    p = _resolve_params(args, config)
    cfg = _resolve_simconfig(args, config)
    out_dir = _out_dir(args)
    outputs = []
    t0 = time.perf_counter()
    for k in range(cfg.paths):
        s = simulate(p, cfg, k)
        if args.format == "binary":
            path = out_dir / f"path_{k:03d}.bin"
            write_topseries_binary(path, s)
        else:
            path = out_dir / f"path_{k:03d}.csv"
            write_topseries_csv(path, s)
        outputs.append(str(path))
        del s
    wall = time.perf_counter() - t0
    _report_rate(cfg, wall)
    _write_manifest(out_dir, "simulate", {
        "command": "simulate",
        "params": params_to_kv(p),
        "sim": _sim_kv(cfg),
        "format": args.format,
        "outputs": outputs,
        "wall_clock_s": wall,
        "steps_per_second": (cfg.burn_in + cfg.steps) * cfg.paths / max(wall, 1e-9),
    })
    return EXIT_OK


def _load_series(path: str):
    if path.endswith(".bin"):
        values, hdr = read_topseries_binary(path)
        from .engine import TopSeries
        from .model import canonical
        # binary files carry no params; synthesize a placeholder of the
        # right depth so downstream meta checks compare n and dt only
        return TopSeries(dt=hdr["dt"], values=values,
                         params_echo=canonical(hdr["n"]), seed_echo=hdr["seed"])
    return read_topseries_csv(path)


def cmd_variogram(args) -> int:
    series = [_load_series(f) for f in args.inputs]
    dt0 = series[0].dt
    p0 = series[0].params_echo
    for s in series[1:]:
        if s.dt != dt0 or s.params_echo != p0:
            raise ConfigError("inputs: mismatched dt or params across inputs")
    min_len = min(len(s.values) for s in series)
    lags = _parse_lags(args.lags, min_len - 1)
    v = ensemble_variogram(series, lags)
    out_dir = _out_dir(args)
    out_csv = out_dir / "variogram.csv"
    write_variogram_csv(out_csv, v)
    _write_manifest(out_dir, "variogram", {
        "command": "variogram",
        "inputs": list(args.inputs),
        "lags": [int(x) for x in lags],
        "outputs": [str(out_csv)],
    })
    return EXIT_OK


def cmd_identify(args) -> int:
    v = read_variogram_csv(args.input)
    curve = load_curve(args.curve) if args.curve else None
    quality = CurveQuality()
    result = identify(v, curve=curve, quality=quality,
                      cache_dir=args.curve_cache)
    out_dir = _out_dir(args)
    kv = result.as_kv()
    report = out_dir / "identify_report.txt"
    with open(report, "w") as f:
        for k, val in kv.items():
            line = f"{k}={val}"
            print(line)
            f.write(line + "\n")
    row = out_dir / "identify_report.csv"
    with open(row, "w") as f:
        f.write(",".join(kv.keys()) + "\n")
        f.write(",".join(kv.values()) + "\n")
    _write_manifest(out_dir, "identify", {
        "command": "identify",
        "input": args.input,
        "curve": args.curve,
        "curve_cache": args.curve_cache,
        "curve_quality": vars(quality) if hasattr(quality, "__dict__") else
                         {"paths": quality.paths, "steps": quality.steps,
                          "dt": quality.dt, "seed": quality.seed,
                          "burn_in": quality.burn_in},
        "result": kv,
        "outputs": [str(report), str(row)],
    })
    return EXIT_OK


def cmd_build_curve(args) -> int:
    quality = CurveQuality(
        paths=args.paths or CurveQuality.paths,
        steps=args.steps or CurveQuality.steps,
        dt=args.dt or CurveQuality.dt,
        seed=args.seed if args.seed is not None else CurveQuality.seed,
        burn_in=args.burn_in if args.burn_in is not None else CurveQuality.burn_in,
    )
    out_dir = _out_dir(args)
    t0 = time.perf_counter()
    curve = load_or_build_curve(args.depth, quality, cache_dir=args.curve_cache)
    wall = time.perf_counter() - t0
    out_csv = out_dir / f"canonical_n{args.depth}.csv"
    save_curve(out_csv, curve)
    _write_manifest(out_dir, "build-curve", {
        "command": "build-curve",
        "depth": args.depth,
        "quality": curve.provenance,
        "outputs": [str(out_csv)],
        "wall_clock_s": wall,
    })
    return EXIT_OK


def _plot_fig1(out_path, curves) -> None:
    """Static log-t plot of relative variograms with the 1/10 reference line.

    Rendered deterministically: fixed SVG hash salt, no date metadata.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "atlasid"
    fig, ax = plt.subplots(figsize=(7, 4.5))
    styles = [dict(color="black"), dict(color="red")]
    for (label, times, values), style in zip(curves, styles):
        ax.plot(times, values, "o", markersize=4, label=label, **style)
    ax.axhline(0.1, color="gray", linewidth=1)
    ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("relative variogram of the top-ranked process")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Date": None})
    plt.close(fig)


def cmd_reproduce_fig1(args) -> int:
    config = _read_config_file(args.config) if args.config else {}
    steps = _resolve("steps", args.steps, config, 10_000_000,
                     lambda s: int(float(s)))
    cfg = SimConfig(
        steps=steps,
        dt=_resolve("dt", args.dt, config, 1.0, float),
        burn_in=_resolve("burn_in", args.burn_in, config, 100_000,
                         lambda s: int(float(s))),
        paths=_resolve("paths", args.paths, config, 1, int),
        master_seed=_resolve("seed", args.seed, config, 1, int),
    )
    lags = _parse_lags(args.lags, steps - 1)
    out_dir = _out_dir(args)
    outputs, plot_series, plateau = [], [], {}
    wall_total = 0.0
    for name, spec in FIG1_RUNS:
        p = make_simple(spec)
        t0 = time.perf_counter()
        v = pooled_variogram(p, cfg, lags)
        wall = time.perf_counter() - t0
        _report_rate(cfg, wall)
        wall_total += wall
        out_csv = out_dir / f"fig1_{name}_variogram.csv"
        write_variogram_csv(out_csv, v)
        outputs.append(str(out_csv))
        rv = relative_variogram(v)
        from .ident import estimate_depth
        try:
            _, ok = estimate_depth(rv)
        except ValueError:
            ok = False
        plateau[name] = ok
        plot_series.append((f"g = {spec.g:g}", rv.times, rv.values))
    plot_path = out_dir / "fig1.svg"
    _plot_fig1(plot_path, plot_series)
    outputs.append(str(plot_path))
    _write_manifest(out_dir, "reproduce-fig1", {
        "command": "reproduce-fig1",
        "runs": {name: params_to_kv(make_simple(spec)) for name, spec in FIG1_RUNS},
        "sim": _sim_kv(cfg),
        "lags": [int(x) for x in lags],
        "plateau_ok": plateau,
        "outputs": outputs,
        "wall_clock_s": wall_total,
    })
    return EXIT_OK


# ---------------------------------------------------------------------------

def _add_common(sp, sim=True):
    sp.add_argument("--config", help="key=value config file")
    sp.add_argument("--out", help="output directory (default: $ATLASID_OUT or .)")
    if sim:
        sp.add_argument("--seed", type=int)
        sp.add_argument("--paths", type=int)
        sp.add_argument("--steps", type=lambda s: int(float(s)))
        sp.add_argument("--burn-in", dest="burn_in", type=lambda s: int(float(s)))
        sp.add_argument("--dt", type=float)


def _add_model(sp):
    sp.add_argument("--depth", type=int)
    sp.add_argument("--simple-g", dest="simple_g", type=float)
    sp.add_argument("--g-vector", dest="g_vector")
    sp.add_argument("--sigma2", type=float)
    sp.add_argument("--init-mode", dest="init_mode",
                    choices=["zeros", "exponential_gaps"])


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="atlasid",
                                 description="Atlas model simulation and identification")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="simulate paths and dump them")
    _add_common(sp)
    _add_model(sp)
    sp.add_argument("--record-mean", dest="record_mean", action="store_true",
                    default=None)
    sp.add_argument("--format", choices=["csv", "binary"], default="csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("variogram", help="pooled variogram of path dumps")
    _add_common(sp, sim=False)
    sp.add_argument("inputs", nargs="+", help="path CSV/binary dumps")
    sp.add_argument("--lags", default="dyadic:524288")
    sp.set_defaults(func=cmd_variogram)

    sp = sub.add_parser("identify", help="identify parameters from a variogram CSV")
    _add_common(sp, sim=False)
    sp.add_argument("input", help="variogram CSV")
    sp.add_argument("--curve", help="reference curve CSV")
    sp.add_argument("--curve-cache", dest="curve_cache",
                    help="directory for cached reference curves")
    sp.set_defaults(func=cmd_identify)

    sp = sub.add_parser("build-curve", help="build a canonical reference curve")
    _add_common(sp)
    sp.add_argument("--depth", type=int, required=True)
    sp.add_argument("--curve-cache", dest="curve_cache")
    sp.set_defaults(func=cmd_build_curve)

    sp = sub.add_parser("reproduce-fig1",
                        help="two-run depth-10 experiment: variogram CSVs + plot")
    _add_common(sp)
    sp.add_argument("--lags", default="dyadic:524288")
    sp.set_defaults(func=cmd_reproduce_fig1)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    except (SimulationError, FitError, FloatingPointError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
