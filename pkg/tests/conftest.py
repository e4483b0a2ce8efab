import json
from pathlib import Path

import pytest
from hypothesis import settings

DATA = Path(__file__).parent / "data"

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def oracle():
    """Reference values frozen by scripts/freeze_oracles.py (50-digit mpmath)."""
    raw = json.loads((DATA / "oracles.json").read_text())
    return {k: float(v) for k, v in raw.items()}


@pytest.fixture
def data_dir():
    return DATA
