"""Euler discretization of rank-based Atlas diffusions.

Each step ranks the particles (descending, ties broken by ascending particle
index), applies rank k's drift to the particle at rank k, and adds
sigma*sqrt(dt) Gaussian noise per particle.  Randomness is keyed by
(master_seed, path_index) only, so ensemble members are reproducible and
independent of scheduling.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import AtlasParams, params_from_kv, params_to_kv

_MASK64 = (1 << 64) - 1
_CHUNK = 1 << 16


class SimulationError(RuntimeError):
    """Numerical failure (overflow / non-finite values) during simulation."""


@dataclass(frozen=True)
class SimConfig:
    """Discretization and ensemble settings for one simulation run."""

    steps: int
    dt: float = 1.0
    burn_in: int = 100_000
    init_mode: str = "exponential_gaps"
    paths: int = 1
    master_seed: int = 0
    record_mean: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if self.init_mode not in ("zeros", "exponential_gaps"):
            raise ValueError(f"unknown init_mode: {self.init_mode!r}")


@dataclass
class ParticleState:
    """Current particle values and simulation clock."""

    x: np.ndarray
    t: float = 0.0


@dataclass
class TopSeries:
    """Top-ranked values sampled after every step of one path."""

    dt: float
    values: np.ndarray
    params_echo: AtlasParams
    seed_echo: int
    mean_values: np.ndarray | None = None

    def __post_init__(self):
        if len(self.values) == 0:
            raise ValueError("series must be nonempty")


def derive_path_seed(master_seed: int, path_index: int) -> int:
    """Mix (master_seed, path_index) into an independent 64-bit stream seed.

    SplitMix64 finalizer applied to master_seed + (path_index+1)*phi64;
    distinct indices map to distinct pre-mix states, and the finalizer is a
    bijection on 64-bit words.
    """
    if path_index < 0:
        raise ValueError("path_index must be >= 0")
    z = (master_seed + (path_index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _gap_rates(p: AtlasParams) -> np.ndarray:
    """Stationary exponential rates for the n-1 rank gaps: -2*prefix(g)/sigma2."""
    prefix = np.cumsum(p.g_array())[:-1]
    return -2.0 * prefix / p.sigma2


def init_state(p: AtlasParams, cfg: SimConfig, rng: np.random.Generator) -> ParticleState:
    """Initial configuration with sum(x) = 0.

    zeros: everything at the origin.  exponential_gaps: ranked gaps drawn
    from their stationary exponential laws, ranks dealt to particles
    uniformly at random, then recentered.
    """
    n = p.n
    if cfg.init_mode == "zeros" or n == 1:
        return ParticleState(x=np.zeros(n), t=0.0)
    # Standard exponentials divided by the rates, so that parameter
    # transforms rescale the draws without disturbing the stream.
    gaps = rng.exponential(1.0, n - 1) / _gap_rates(p)
    ranked = np.zeros(n)
    ranked[:-1] = np.cumsum(gaps[::-1])[::-1]  # ranked[0] highest
    perm = rng.permutation(n)
    x = ranked[perm]
    x -= x.mean()
    return ParticleState(x=x, t=0.0)


def step(state: ParticleState, p: AtlasParams, dt: float, noise: np.ndarray) -> ParticleState:
    """One Euler step (reference implementation; simulate() uses the
    compiled kernel with identical semantics)."""
    x = state.x
    n = p.n
    if len(noise) != n:
        raise ValueError("noise length must equal n")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(noise))):
        raise SimulationError("non-finite state or noise")
    order = np.lexsort((np.arange(n), -x))  # descending, stable in index
    g = p.g_array()
    drift = np.empty(n)
    drift[order] = g * dt
    assert abs(drift.sum()) <= 1e-9 * max(1.0, np.abs(g).max()) * n * dt
    new_x = x + drift + p.sigma * np.sqrt(dt) * noise
    return ParticleState(x=new_x, t=state.t + dt)


@njit(cache=True, nogil=True)
def _advance(x, order, g, sigma, dt, noise, out_top, out_mean, record_mean):
    """Advance len(noise) steps in place; record the post-step top value
    (and optionally the mean) for each step."""
    n = x.shape[0]
    steps = noise.shape[0]
    sq = sigma * np.sqrt(dt)
    for s in range(steps):
        # Insertion sort keeps `order` sorted by value descending with ties
        # broken by ascending index; near-linear on the nearly-sorted input.
        for i in range(1, n):
            oi = order[i]
            xi = x[oi]
            j = i - 1
            while j >= 0 and (x[order[j]] < xi or (x[order[j]] == xi and order[j] > oi)):
                order[j + 1] = order[j]
                j -= 1
            order[j + 1] = oi
        top = -np.inf
        acc = 0.0
        for k in range(n):
            i = order[k]
            xi = x[i] + g[k] * dt + sq * noise[s, i]
            x[i] = xi
            acc += xi
            if xi > top:
                top = xi
        out_top[s] = top
        if record_mean:
            out_mean[s] = acc / n


def simulate(p: AtlasParams, cfg: SimConfig, path_index: int = 0) -> TopSeries:
    """Simulate one path: init, burn-in, then cfg.steps recorded steps.

    Fully deterministic given (p, cfg, path_index).
    """
    seed = derive_path_seed(cfg.master_seed, path_index)
    rng = np.random.Generator(np.random.PCG64(seed))
    state = init_state(p, cfg, rng)
    n = p.n
    g = p.g_array()
    sigma = p.sigma
    order = np.lexsort((np.arange(n), -state.x)).astype(np.int64)
    x = state.x.astype(float)

    values = np.empty(cfg.steps)
    means = np.empty(cfg.steps) if cfg.record_mean else None
    buf_top = np.empty(_CHUNK)
    buf_mean = np.empty(_CHUNK if cfg.record_mean else 1)

    total = cfg.burn_in + cfg.steps
    done = 0
    while done < total:
        m = min(_CHUNK, total - done)
        noise = rng.standard_normal((m, n))
        _advance(x, order, g, sigma, cfg.dt, noise, buf_top[:m],
                 buf_mean[:m] if cfg.record_mean else buf_mean, cfg.record_mean)
        if not np.isfinite(buf_top[:m]).all():
            bad = done + int(np.argmin(np.isfinite(buf_top[:m])))
            raise SimulationError(f"non-finite trajectory at step {bad}")
        lo = max(done, cfg.burn_in)
        hi = done + m
        if hi > cfg.burn_in:
            dst = slice(lo - cfg.burn_in, hi - cfg.burn_in)
            src = slice(lo - done, m)
            values[dst] = buf_top[src]
            if means is not None:
                means[dst] = buf_mean[src]
        done = hi
    return TopSeries(dt=cfg.dt, values=values, params_echo=p,
                     seed_echo=seed, mean_values=means)


@njit(cache=True, nogil=True)
def _advance_ranked(x, order, g, sigma, dt, noise, out_ranked):
    """Like _advance but records the full pre-step ranked vector; used for
    gap-process diagnostics."""
    n = x.shape[0]
    steps = noise.shape[0]
    sq = sigma * np.sqrt(dt)
    for s in range(steps):
        for i in range(1, n):
            oi = order[i]
            xi = x[oi]
            j = i - 1
            while j >= 0 and (x[order[j]] < xi or (x[order[j]] == xi and order[j] > oi)):
                order[j + 1] = order[j]
                j -= 1
            order[j + 1] = oi
        for k in range(n):
            out_ranked[s, k] = x[order[k]]
        for k in range(n):
            i = order[k]
            x[i] += g[k] * dt + sq * noise[s, i]


def simulate_ranked(p: AtlasParams, cfg: SimConfig, path_index: int = 0) -> np.ndarray:
    """Record the ranked particle vector at every recorded step.

    Returns an array of shape (steps, n) with row s holding
    x_(1) >= ... >= x_(n) at the start of recorded step s.  Consumes the
    same noise stream as simulate(); memory is steps*n doubles, so keep
    runs moderate.
    """
    seed = derive_path_seed(cfg.master_seed, path_index)
    rng = np.random.Generator(np.random.PCG64(seed))
    state = init_state(p, cfg, rng)
    n = p.n
    g = p.g_array()
    order = np.lexsort((np.arange(n), -state.x)).astype(np.int64)
    x = state.x.astype(float)
    out = np.empty((cfg.steps, n))
    scratch = np.empty((_CHUNK, n))
    total = cfg.burn_in + cfg.steps
    done = 0
    while done < total:
        m = min(_CHUNK, total - done)
        noise = rng.standard_normal((m, n))
        lo = max(done, cfg.burn_in)
        hi = done + m
        if hi <= cfg.burn_in:
            _advance_ranked(x, order, g, p.sigma, cfg.dt, noise, scratch[:m])
        else:
            _advance_ranked(x, order, g, p.sigma, cfg.dt, noise,
                            out[done - cfg.burn_in: hi - cfg.burn_in]
                            if done >= cfg.burn_in else scratch[:m])
            if done < cfg.burn_in < hi:
                out[0: hi - cfg.burn_in] = scratch[lo - done: m]
        if not np.isfinite(x).all():
            raise SimulationError(f"non-finite trajectory near step {hi}")
        done = hi
    return out


def simulate_ensemble(p: AtlasParams, cfg: SimConfig,
                      max_workers: int | None = None) -> list[TopSeries]:
    """Simulate cfg.paths independent paths; results ordered by path index
    and bitwise independent of scheduling."""
    if cfg.paths == 1:
        return [simulate(p, cfg, 0)]
    with ThreadPoolExecutor(max_workers=max_workers or min(cfg.paths, 4)) as ex:
        futs = [ex.submit(simulate, p, cfg, k) for k in range(cfg.paths)]
        return [f.result() for f in futs]


# ---------------------------------------------------------------------------
# Raw-path dump: 64-byte header + little-endian float64 values

_MAGIC = b"ATLASTOP"
_HEADER = struct.Struct("<8sIIdQQ24x")  # magic, version, n, dt, steps, seed
_VERSION = 1


def write_topseries_binary(path, series: TopSeries) -> None:
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, _VERSION, series.params_echo.n,
                             series.dt, len(series.values), series.seed_echo))
        f.write(np.ascontiguousarray(series.values, dtype="<f8").tobytes())


def read_topseries_binary(path) -> tuple[np.ndarray, dict]:
    """Return (values, header dict). Params are not stored in the binary
    format; pair with the run manifest for full provenance."""
    with open(path, "rb") as f:
        magic, version, n, dt, steps, seed = _HEADER.unpack(f.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError("not an atlasid path file")
        if version != _VERSION:
            raise ValueError(f"unsupported version {version}")
        values = np.frombuffer(f.read(8 * steps), dtype="<f8")
    return values, {"n": n, "dt": dt, "steps": steps, "seed": seed}


def write_topseries_csv(path, series: TopSeries) -> None:
    """CSV path export: step, t, x_top [, x_mean]; params in '#' header lines."""
    with open(path, "w") as f:
        for k, v in params_to_kv(series.params_echo).items():
            f.write(f"# {k} = {v}\n")
        f.write(f"# dt = {series.dt!r}\n")
        f.write(f"# seed = {series.seed_echo}\n")
        cols = "step,t,x_top"
        if series.mean_values is not None:
            cols += ",x_mean"
        f.write(cols + "\n")
        for s, v in enumerate(series.values):
            row = f"{s},{float((s + 1) * series.dt)!r},{float(v)!r}"
            if series.mean_values is not None:
                row += f",{float(series.mean_values[s])!r}"
            f.write(row + "\n")


def read_topseries_csv(path) -> TopSeries:
    header: dict[str, str] = {}
    top, mean = [], []
    has_mean = False
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                k, _, v = line[1:].partition("=")
                header[k.strip()] = v.strip()
            elif line.startswith("step,"):
                has_mean = line.endswith(",x_mean")
            else:
                parts = line.split(",")
                top.append(float(parts[2]))
                if has_mean:
                    mean.append(float(parts[3]))
    return TopSeries(
        dt=float(header.get("dt", "1.0")),
        values=np.array(top),
        params_echo=params_from_kv(header),
        seed_echo=int(header.get("seed", "0")),
        mean_values=np.array(mean) if has_mean else None,
    )
