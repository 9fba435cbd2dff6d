import functools

import numpy as np
import pytest

from ncqm.models import ModelSpec, build_model

SQ5 = (5**0.5 - 1) / 2


@functools.lru_cache(maxsize=None)
def _cached(family, params, margin):
    return build_model(ModelSpec(family, dict(params), margin))


def model(family, margin=0, **params):
    """Session-cached model builder; params must be hashable."""
    key = tuple(sorted((k, tuple(v) if isinstance(v, list) else v) for k, v in params.items()))
    return _cached(family, key, margin)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = {}


def record(number, title, ok, detail):
    """Remember one acceptance verdict for the end-of-run summary."""
    ACCEPTANCE[number] = (title, bool(ok), detail)
    print(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title} ({detail})")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
