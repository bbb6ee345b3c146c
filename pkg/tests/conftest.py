"""Shared fixtures: expensive pair computations are cached per session, and the
acceptance tests report one line per criterion in the terminal summary."""
from __future__ import annotations

import numpy as np
import pytest

from coho1.model import Dims, StateZDH

S10 = (Dims(2, 7), Dims(3, 6), Dims(4, 5))
ALL_REGULAR = S10 + (Dims(3, 4), Dims(2, 2), Dims(2, 8), Dims(5, 5), Dims(2, 3))

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record_criterion(key: str, passed: bool, detail: str = "") -> None:
    _ACCEPTANCE[key] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>4}: {'PASS' if ok else 'FAIL'}  {detail}")


def interior_samples(dims: Dims, count: int, rng: np.random.Generator,
                     h_range=(-0.999, 0.999), margin: float = 1e-3) -> list[StateZDH]:
    """Uniform samples of the open locus by rejection on its bounding box."""
    b = dims.q_delta
    zmax = dims.m / min(dims.d1, dims.d2)
    out = []
    while len(out) < count:
        z = rng.uniform(-zmax, zmax)
        dl = rng.uniform(-b, b)
        h = rng.uniform(*h_range)
        r1 = dims.m + dims.d2 * z - dims.k * dl * dl
        r2 = dims.m - dims.d1 * z - dims.k * dl * dl
        if r1 > margin and r2 > margin:
            out.append(StateZDH(z, dl, h))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def pair_cache():
    """Intersection runs keyed by (d1, d2, target); filled lazily."""
    return {}


@pytest.fixture(scope="session")
def run_cached(pair_cache):
    from coho1.survey import run_pair

    curve_cache: dict = {}

    def get(dims: Dims, target: str = "sphere"):
        key = (dims.d1, dims.d2, target)
        if key not in pair_cache:
            pair_cache[key] = run_pair(dims, target, cache=curve_cache)
        return pair_cache[key]

    return get


