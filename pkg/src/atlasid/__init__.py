"""Simulation and identification of rank-based Atlas diffusions."""

__version__ = "0.1.0"

from .model import (AtlasParams, SimpleAtlasSpec, TransformFactors,
                    canonical, canonical_reduction, make_atlas_params,
                    make_simple, scale_params, time_change_params)
from .engine import (SimConfig, TopSeries, derive_path_seed, simulate,
                     simulate_ensemble)
from .stats import (Variogram, dyadic_lags, ensemble_variogram,
                    estimate_variogram, mean_process_check, pool,
                    pooled_variogram, relative_variogram)
from .ident import (CanonicalCurve, CurveQuality, IdentificationResult,
                    build_canonical_curve, estimate_depth, estimate_sigma2,
                    fit_time_scale, identify, load_or_build_curve)

__all__ = [
    "AtlasParams", "SimpleAtlasSpec", "TransformFactors",
    "canonical", "canonical_reduction", "make_atlas_params", "make_simple",
    "scale_params", "time_change_params",
    "SimConfig", "TopSeries", "derive_path_seed", "simulate",
    "simulate_ensemble",
    "Variogram", "dyadic_lags", "ensemble_variogram", "estimate_variogram",
    "mean_process_check", "pool", "pooled_variogram", "relative_variogram",
    "CanonicalCurve", "CurveQuality", "IdentificationResult",
    "build_canonical_curve", "estimate_depth", "estimate_sigma2",
    "fit_time_scale", "identify", "load_or_build_curve",
]
