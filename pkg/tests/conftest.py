from __future__ import annotations

import numpy as np
import pytest

from loglaplace.models import quartic_model, random_poly_model


def rel_gap(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def random_model_grid():
    """The 50 seeded random models shared by the dual-path and closed-form checks."""
    out = []
    for seed in range(50):
        d = 1 + seed % 3
        L = 2 + (seed // 3) % 2
        out.append(random_poly_model(d, L, seed, 0.1).model)
    return out


@pytest.fixture(scope="session")
def random_models():
    return random_model_grid()


@pytest.fixture(scope="session")
def quartics():
    return {(d, L): quartic_model(d, L).model for d in range(1, 7) for L in (2, 3)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
