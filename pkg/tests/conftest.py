import functools

import numpy as np
import pytest

from pptrank.constructions import load_seed_state
from pptrank.hilbert import BipartiteDims, build_basis

ACCEPTANCE_LINES: list[str] = []


def report(criterion: int, ok: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@functools.lru_cache(maxsize=None)
def basis_for(n_a: int, n_b: int):
    return build_basis(BipartiteDims(n_a, n_b))


@pytest.fixture(scope="session")
def seed_state():
    return load_seed_state()


def random_hermitian(rng, n):
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (z + z.conj().T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
