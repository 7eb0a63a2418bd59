from pathlib import Path

import pytest
from hypothesis import settings

# statistical / jit-compiled code has noisy per-example timing
settings.register_profile("atlasid", deadline=None)
settings.load_profile("atlasid")

CACHE_DIR = Path(__file__).parent / "_curve_cache"


@pytest.fixture(scope="session")
def curve_cache() -> Path:
    """On-disk cache for canonical reference curves.

    Persists across pytest runs so the expensive curve builds happen once
    per machine; delete the directory to force a rebuild.
    """
    CACHE_DIR.mkdir(exist_ok=True)
    return CACHE_DIR
