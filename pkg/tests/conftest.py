import functools
import warnings

import numpy as np
import pytest

from adaptdd.experiments import build_substructures


@functools.lru_cache(maxsize=None)
def cached_substructures(dim, N, m, coeff):
    return build_substructures(dim, N, m, coeff)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _quiet_projector_pruning():
    # redundant edge multipliers make some U columns F-dependent in 3D
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="projector: pruned")
        yield


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    X = rng.standard_normal((n, rank))
    return X @ X.T


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, ok: bool, detail: str) -> str:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
