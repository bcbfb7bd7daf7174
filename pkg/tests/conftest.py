import os
from pathlib import Path

import pytest

# constructed manifolds and dispersion tables are cached between test runs
os.environ.setdefault("TILESOM_CACHE_DIR", str(Path(__file__).resolve().parent.parent / ".cache" / "tilesom"))

from tilesom.tessellation import catalog  # noqa: E402


@pytest.fixture(scope="session")
def cache_dir():
    return catalog.cache_dir()


@pytest.fixture(scope="session")
def build():
    return catalog.build
