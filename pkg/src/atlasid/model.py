"""Parameter types and exact parameter transforms for rank-based Atlas diffusions.

An Atlas model of depth n assigns drift ``g[k]`` to whichever particle
currently occupies rank k (rank 1 = largest value) and gives every particle
the same diffusion variance rate ``sigma2``.  The drift rates must sum to
zero, and every proper prefix sum must be strictly negative so the bottom
rank pushes the pack back together.

Everything in this module is a pure function on immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative tolerance for the sum-to-zero constraint; exact equality is the
# mathematical requirement but inputs arrive as floats.
SUM_TOL = 1e-12


class ParameterError(ValueError):
    """Base class for Atlas parameter validation failures."""


class SumNotZero(ParameterError):
    """Drift rates do not sum to zero within tolerance."""


class PartialSumNonNegative(ParameterError):
    """Some proper prefix of the drift rates has a non-negative sum."""

    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(
            f"prefix sum g[1..{index}] = {value:g} must be strictly negative"
        )


class NonPositiveVariance(ParameterError):
    """sigma2 must be strictly positive."""


@dataclass(frozen=True)
class AtlasParams:
    """Validated parameters of a depth-n Atlas model.

    g[k-1] is the drift applied to rank k (1 = top).  Constructed via
    :func:`make_atlas_params`; construction validates all constraints.
    """

    n: int
    g: tuple[float, ...]
    sigma2: float

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.size == 0:
            raise ParameterError("drift vector must be nonempty")
        if self.n != g.size:
            raise ParameterError(f"n={self.n} but len(g)={g.size}")
        if not np.all(np.isfinite(g)) or not np.isfinite(self.sigma2):
            raise ParameterError("parameters must be finite")
        if self.sigma2 <= 0:
            raise NonPositiveVariance(f"sigma2 = {self.sigma2:g} must be > 0")
        tol = SUM_TOL * max(1.0, float(np.max(np.abs(g))))
        total = float(np.sum(g))
        if abs(total) > tol:
            raise SumNotZero(f"sum(g) = {total:g} exceeds tolerance {tol:g}")
        prefix = np.cumsum(g)[:-1]
        bad = np.nonzero(prefix >= 0)[0]
        if bad.size:
            m = int(bad[0]) + 1
            raise PartialSumNonNegative(m, float(prefix[bad[0]]))

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.sigma2))

    def g_array(self) -> np.ndarray:
        return np.asarray(self.g, dtype=float)


@dataclass(frozen=True)
class SimpleAtlasSpec:
    """One-growth-parameter Atlas model: drift -g at all ranks but the
    bottom, which gets (n-1)g."""

    n: int
    g: float
    sigma2: float

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError(f"depth n = {self.n} must be >= 1")
        if self.n == 1:
            if self.g != 0:
                raise ParameterError("n = 1 forces g = 0")
        elif self.g <= 0:
            raise ParameterError(f"growth parameter g = {self.g:g} must be > 0")
        if self.sigma2 <= 0:
            raise NonPositiveVariance(f"sigma2 = {self.sigma2:g} must be > 0")


@dataclass(frozen=True)
class TransformFactors:
    """Time-change factor a and scale factor c of the canonical reduction."""

    a: float
    c: float

    def __post_init__(self):
        if self.a <= 0 or self.c <= 0:
            raise ParameterError("transform factors must be positive")


def make_atlas_params(g, sigma2: float) -> AtlasParams:
    """Validate a drift vector and variance rate into AtlasParams."""
    g = tuple(float(v) for v in g)
    return AtlasParams(n=len(g), g=g, sigma2=float(sigma2))


def make_simple(spec: SimpleAtlasSpec) -> AtlasParams:
    """Expand a simple spec into the full rank-indexed drift vector."""
    if spec.n == 1:
        return make_atlas_params((0.0,), spec.sigma2)
    g = (-spec.g,) * (spec.n - 1) + ((spec.n - 1) * spec.g,)
    return make_atlas_params(g, spec.sigma2)


def canonical(n: int) -> AtlasParams:
    """Canonical depth-n model: g = 1, sigma2 = 1 in simple form."""
    if n < 1:
        raise ParameterError(f"depth n = {n} must be >= 1")
    if n == 1:
        return make_atlas_params((0.0,), 1.0)
    return make_simple(SimpleAtlasSpec(n=n, g=1.0, sigma2=1.0))


def scale_params(p: AtlasParams, a: float) -> AtlasParams:
    """Value rescaling: the model with drifts a*g and variance a^2*sigma2
    is pathwise a times the original model."""
    if a <= 0:
        raise ParameterError(f"scale factor a = {a:g} must be > 0")
    return make_atlas_params(tuple(a * v for v in p.g), a * a * p.sigma2)


def time_change_params(p: AtlasParams, a: float) -> AtlasParams:
    """Time change: the model with drifts a*g and variance a*sigma2 runs
    the original model at a-times speed."""
    if a <= 0:
        raise ParameterError(f"time-change factor a = {a:g} must be > 0")
    return make_atlas_params(tuple(a * v for v in p.g), a * p.sigma2)


def canonical_reduction(spec: SimpleAtlasSpec) -> TransformFactors:
    """Factors (a, c) mapping the canonical depth-n model onto a simple one.

    With a = g^2/sigma2 and c = sigma2/g,
    scale(time_change(canonical(n), a), c) reproduces the simple model's
    parameters exactly, so its relative top-rank variogram is the canonical
    curve evaluated at a*t.
    """
    if spec.n == 1:
        raise ParameterError("canonical reduction undefined for depth 1")
    a = spec.g * spec.g / spec.sigma2
    c = spec.sigma2 / spec.g
    return TransformFactors(a=a, c=c)


# ---------------------------------------------------------------------------
# Plain-text key=value serialization (also used for CSV header comments)

def params_to_kv(p: AtlasParams) -> dict[str, str]:
    """Render parameters as a flat key -> value string mapping."""
    kv = {"depth": str(p.n), "sigma2": repr(p.sigma2)}
    simple = _as_simple(p)
    if simple is not None:
        kv["simple-g"] = repr(simple.g)
    else:
        kv["g-vector"] = ",".join(repr(v) for v in p.g)
    return kv


def params_from_kv(kv: dict[str, str]) -> AtlasParams:
    """Parse parameters from a key -> value mapping (inverse of params_to_kv)."""
    try:
        sigma2 = float(kv["sigma2"])
    except KeyError:
        raise ParameterError("missing key: sigma2") from None
    if "g-vector" in kv:
        g = [float(v) for v in kv["g-vector"].split(",")]
        return make_atlas_params(g, sigma2)
    if "simple-g" in kv:
        if "depth" not in kv:
            raise ParameterError("simple-g requires depth")
        n = int(kv["depth"])
        return make_simple(SimpleAtlasSpec(n=n, g=float(kv["simple-g"]), sigma2=sigma2))
    raise ParameterError("need either g-vector or simple-g")


def _as_simple(p: AtlasParams) -> SimpleAtlasSpec | None:
    """Return the simple spec matching p, or None if p is not simple."""
    if p.n == 1:
        return SimpleAtlasSpec(n=1, g=0.0, sigma2=p.sigma2)
    g = -p.g[0]
    if g <= 0:
        return None
    if all(v == -g for v in p.g[:-1]) and p.g[-1] == (p.n - 1) * g:
        return SimpleAtlasSpec(n=p.n, g=g, sigma2=p.sigma2)
    return None
