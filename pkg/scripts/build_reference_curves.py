"""Build and cache canonical reference curves for a list of depths.

The canonical model (growth 1, variance 1) is simulated at high quality
and its relative variogram is saved per depth; identification fits
time-scale against these curves.  Building is expensive (minutes per
depth on one core), so results are cached by their full quality key and
reused on subsequent runs.
"""

import argparse
from pathlib import Path

from atlasid.ident import DEFAULT_QUALITY, CurveQuality, load_or_build_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("depths", type=int, nargs="+", help="depths to build")
    ap.add_argument("--cache", type=Path,
                    default=Path(__file__).resolve().parent.parent
                    / "tests" / "_curve_cache")
    ap.add_argument("--paths", type=int, default=DEFAULT_QUALITY.paths)
    ap.add_argument("--steps", type=int, default=DEFAULT_QUALITY.steps)
    ap.add_argument("--dt", type=float, default=DEFAULT_QUALITY.dt)
    ap.add_argument("--seed", type=int, default=DEFAULT_QUALITY.seed)
    args = ap.parse_args()

    quality = CurveQuality(paths=args.paths, steps=args.steps, dt=args.dt,
                           seed=args.seed, burn_in=DEFAULT_QUALITY.burn_in)
    args.cache.mkdir(parents=True, exist_ok=True)
    for n in args.depths:
        curve = load_or_build_curve(n, quality, args.cache)
        print(f"depth {n}: {len(curve.log_lags)} lags, "
              f"plateau {curve.rel_values[-3:].mean():.4f}")


if __name__ == "__main__":
    main()
