"""Variogram estimation for sampled top-rank series.

The variogram at lag t is E[(Z(t)-Z(0))^2 / t]; for a standard Brownian
motion it is identically 1.  We estimate it from a single path with all
overlapping start points (so per-lag standard errors come only from pooling
across independent paths) and normalize by the smallest-lag value to form
the relative variogram, whose large-lag limit is 1/depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import params_from_kv, params_to_kv
from .engine import TopSeries

DEFAULT_MAX_LAG = 524_288  # 2**19


@dataclass
class Variogram:
    """Variogram values on a lag grid (lags counted in steps of dt)."""

    lags: np.ndarray
    dt: float
    values: np.ndarray
    v0: float
    stderr: np.ndarray | None = None
    meta: dict = None

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if self.meta is None:
            self.meta = {}
        if len(self.lags) == 0 or np.any(np.diff(self.lags) <= 0) or self.lags[0] < 1:
            raise ValueError("lags must be strictly increasing, first >= 1")
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("variogram values must be finite and >= 0")

    @property
    def times(self) -> np.ndarray:
        return self.lags * self.dt


@dataclass
class MeanCheckReport:
    """Windowed check of E[mean-process increment^2 / t] against sigma2/n."""

    estimate: float
    target: float
    z_score: float
    windows: int


def dyadic_lags(max_lag: int = DEFAULT_MAX_LAG) -> np.ndarray:
    """1, 2, 4, ... up to and including the largest power of two <= max_lag."""
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    return 2 ** np.arange(int(np.log2(max_lag)) + 1, dtype=np.int64)


def estimate_variogram(series: TopSeries, lags) -> Variogram:
    """Overlapping-increment variogram estimate of one path."""
    lags = np.asarray(lags, dtype=np.int64)
    if np.any(np.diff(lags) <= 0):
        raise ValueError("lags must be strictly increasing")
    z = series.values
    if lags[-1] >= len(z):
        raise ValueError(f"max lag {lags[-1]} must be < series length {len(z)}")
    values = np.empty(len(lags))
    for i, lag in enumerate(lags):
        d = z[lag:] - z[:-lag]
        values[i] = np.mean(d * d) / (lag * series.dt)
    meta = {"params": series.params_echo, "paths": 1, "steps": len(z),
            "seed": series.seed_echo}
    return Variogram(lags=lags, dt=series.dt, values=values,
                     v0=float(values[0]), meta=meta)


def relative_variogram(v: Variogram) -> Variogram:
    """Divide by the small-lag anchor so the first value is 1."""
    if not v.v0 or v.v0 <= 0:
        raise ValueError("v0 must be positive to form the relative variogram")
    stderr = None if v.stderr is None else v.stderr / v.v0
    return Variogram(lags=v.lags.copy(), dt=v.dt, values=v.values / v.v0,
                     v0=1.0, stderr=stderr, meta=dict(v.meta))


def pool(variograms: list[Variogram]) -> Variogram:
    """Average per-lag over independent paths; stderr across paths."""
    if not variograms:
        raise ValueError("nothing to pool")
    first = variograms[0]
    for v in variograms[1:]:
        if not np.array_equal(v.lags, first.lags) or v.dt != first.dt:
            raise ValueError("mismatched lag grids")
        if v.meta.get("params") != first.meta.get("params"):
            raise ValueError("mismatched params")
    # sort per lag across paths so pooling is exactly permutation invariant
    stack = np.sort(np.vstack([v.values for v in variograms]), axis=0)
    values = stack.mean(axis=0)
    stderr = None
    if len(variograms) >= 2:
        stderr = stack.std(axis=0, ddof=1) / np.sqrt(len(variograms))
        stderr[np.ptp(stack, axis=0) == 0] = 0.0  # exact for identical inputs
    meta = dict(first.meta)
    meta["paths"] = sum(v.meta.get("paths", 1) for v in variograms)
    return Variogram(lags=first.lags.copy(), dt=first.dt, values=values,
                     v0=float(values[0]), stderr=stderr, meta=meta)


def ensemble_variogram(series_list, lags) -> Variogram:
    """Per-path variograms pooled over an ensemble.

    Accepts any iterable, so long paths can be generated lazily and
    discarded after their variogram is reduced.
    """
    return pool([estimate_variogram(s, lags) for s in series_list])


def pooled_variogram(p, cfg, lags) -> Variogram:
    """Simulate cfg.paths paths one at a time and pool their variograms.

    Streaming counterpart of simulate_ensemble + ensemble_variogram: only
    one path is held in memory, which matters for 1e7-step runs.
    """
    from .engine import simulate
    vs = []
    for k in range(cfg.paths):
        series = simulate(p, cfg, k)
        vs.append(estimate_variogram(series, lags))
        del series
    v = pool(vs)
    v.meta["burn_in"] = cfg.burn_in
    return v


def mean_process_check(series: TopSeries, window: int) -> MeanCheckReport:
    """Compare disjoint-window squared mean-process increments to sigma2/n.

    The particle average is an exact Brownian motion (drifts cancel each
    step), so the windowed statistics are iid up to the window partition.
    """
    if series.mean_values is None:
        raise ValueError("mean series was not recorded")
    if window < 1:
        raise ValueError("window must be >= 1")
    m = series.mean_values
    marks = m[::window]
    d = np.diff(marks)
    if len(d) < 2:
        raise ValueError("series too short for this window")
    vals = d * d / (window * series.dt)
    p = series.params_echo
    target = p.sigma2 / p.n
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / np.sqrt(len(vals)))
    return MeanCheckReport(estimate=est, target=target,
                           z_score=(est - target) / se, windows=len(vals))


# ---------------------------------------------------------------------------
# CSV round trip

def write_variogram_csv(path, v: Variogram) -> None:
    """One row per lag with absolute and relative columns; provenance in
    '#' header comments.  Degenerate inputs (v0 = 0, e.g. a constant
    series) leave the relative columns empty."""
    rel = relative_variogram(v) if v.v0 > 0 else None
    with open(path, "w") as f:
        params = v.meta.get("params")
        if params is not None:
            for k, val in params_to_kv(params).items():
                f.write(f"# {k} = {val}\n")
        for k in ("paths", "steps", "seed", "burn_in"):
            if k in v.meta:
                f.write(f"# {k} = {v.meta[k]}\n")
        f.write(f"# dt = {v.dt!r}\n")
        f.write("lag_steps,lag_time,variogram,rel_variogram,"
                "stderr_variogram,stderr_rel\n")
        for i, lag in enumerate(v.lags):
            se = "" if v.stderr is None else repr(float(v.stderr[i]))
            rel_val = "" if rel is None else repr(float(rel.values[i]))
            se_rel = ("" if rel is None or rel.stderr is None
                      else repr(float(rel.stderr[i])))
            f.write(f"{int(lag)},{float(lag * v.dt)!r},{float(v.values[i])!r},"
                    f"{rel_val},{se},{se_rel}\n")


def read_variogram_csv(path) -> Variogram:
    header: dict[str, str] = {}
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                k, _, val = line[1:].partition("=")
                header[k.strip()] = val.strip()
            elif not line.startswith("lag_steps"):
                rows.append(line.split(","))
    lags = np.array([int(r[0]) for r in rows], dtype=np.int64)
    values = np.array([float(r[2]) for r in rows])
    stderr = None
    if rows and rows[0][4] != "":
        stderr = np.array([float(r[4]) for r in rows])
    dt = float(header.get("dt", "1.0"))
    meta = {}
    try:
        meta["params"] = params_from_kv(header)
    except Exception:
        pass
    for k in ("paths", "steps", "seed", "burn_in"):
        if k in header:
            meta[k] = int(header[k])
    return Variogram(lags=lags, dt=dt, values=values, v0=float(values[0]),
                     stderr=stderr, meta=meta)
