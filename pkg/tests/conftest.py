import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eigloc.grid import discretize, ground_state  # noqa: E402
from eigloc.zoo import build  # noqa: E402


@pytest.fixture(scope="session")
def box41():
    body = build("box 4x1")
    disc = discretize(body, 1 / 32)
    return body, disc, ground_state(disc)


@pytest.fixture(scope="session")
def disk():
    body = build("disk R=1")
    disc = discretize(body, 1 / 32)
    return body, disc, ground_state(disc)


@pytest.fixture(scope="session")
def sector16():
    body = build("sector2d R=16 r=1")
    disc = discretize(body, 1 / 16)
    return body, disc, ground_state(disc)


@pytest.fixture(autouse=True)
def _isolated_output(tmp_path, monkeypatch):
    monkeypatch.setenv("EIGLOC_OUTPUT", str(tmp_path))


def rotation2(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])
