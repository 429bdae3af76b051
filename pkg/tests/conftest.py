from __future__ import annotations

import warnings

import numpy as np
import pytest

from crawler_ris.model import CrawlerModel, Friction, Spring

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    """Store the PASS/FAIL outcome of an acceptance criterion for the final report."""

    def record(number: int, ok: bool, detail: str = "") -> None:
        ACCEPTANCE[number] = (bool(ok), detail)
        print(f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture(autouse=True)
def _quiet_uniqueness():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=UserWarning)
        yield


def rescale_model(model: CrawlerModel, factor: float) -> CrawlerModel:
    """Same crawler with every input program run ``factor`` times faster."""
    springs = tuple(Spring(s.i, s.j, s.k, s.L.reparametrize(factor)) for s in model.springs)
    friction = tuple(Friction(f.mu_minus.reparametrize(factor), f.mu_plus.reparametrize(factor),
                              f.weight) for f in model.friction)
    return CrawlerModel(model.points, springs, friction)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
