"""Shared fixtures. Desk-scale pipeline runs are cached for the whole session."""

from __future__ import annotations

import numpy as np
import pytest

from ttedopa.config import load_config
from ttedopa.pipeline import run_pipeline

# (s, kappa, initial state) for the desk runs used by several test modules
DESK_RUNS = {
    "s2_hot": (2.0, 0.4, "excited"),
    "s2_cold": (2.0, 400.0, "excited"),
    "s05_cold": (0.5, 400.0, "excited"),
    "s3_cold": (3.0, 400.0, "excited"),
    "s3_cold_plus": (3.0, 400.0, "plus"),
    "s2_cold_plus": (2.0, 400.0, "plus"),
}


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    cache = {}

    def get(name):
        if name not in cache:
            s, kappa, init = DESK_RUNS[name]
            cfg = load_config(
                desk=True,
                overrides={"spectral.s": s, "spectral.kappa": kappa, "system.initial_state": init},
            )
            cache[name] = run_pipeline(cfg, tmp_path_factory.mktemp(f"desk_{name}"))
        return cache[name]

    return get


def tiny_overrides(**extra):
    """A configuration small enough for end-to-end plumbing tests (seconds)."""
    base = {
        "chain.n_sites": 6,
        "chain.m_pad": 40,
        "evolution.t_final": 2.0,
        "evolution.d": 3,
        "evolution.chi_max": 8,
        "snapshots": [1.0, 2.0],
        "output.occ_every": 5,
        "spectral.s": 2.0,
        "spectral.kappa": 0.4,
    }
    base.update(extra)
    return base


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
