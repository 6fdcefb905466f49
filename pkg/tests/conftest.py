import os
from pathlib import Path

import numpy as np
import pytest

from src.Hawkes.utils.pydantic_schemas import Backend, BackendKind, Params
from tests.oracles import random_events


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def serial():
    return Backend()


@pytest.fixture
def all_backends():
    return [
        Backend(),
        Backend(kind=BackendKind.VECTORIZED, lane_width=4),
        Backend(kind=BackendKind.VECTORIZED, lane_width=2),
        Backend(kind=BackendKind.THREADED, thread_count=3),
        Backend(kind=BackendKind.THREADED_VECTORIZED, thread_count=3, lane_width=4),
    ]


@pytest.fixture
def unit_params():
    return Params(mu0=1.0, tau_x=1.0, tau_t=1.0, theta=1.0, omega=1.0, h=1.0)


@pytest.fixture
def small_events(rng):
    return random_events(20, rng)


GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture
def golden():
    """
    Byte comparison against tests/golden/<name>.

    A missing file is written by the current run (and the test skipped);
    STHAWKES_UPDATE_GOLDEN=1 re-records on purpose after a verified change.
    """
    def check(name: str, content: bytes) -> None:
        path = GOLDEN_DIR / name
        if os.getenv("STHAWKES_UPDATE_GOLDEN") == "1" or not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(content)
            pytest.skip(f"recorded {path.name}")
        assert content == path.read_bytes(), f"{name} differs from the recorded run"

    return check
