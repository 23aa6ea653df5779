import functools

import numpy as np
import pytest
from hypothesis import settings

from polarsep.synth import render_scene, standard_scenes

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def _scene(name, size):
    return render_scene(standard_scenes(size)[name])


@pytest.fixture(scope="session")
def scene():
    """``scene(name, size=256)`` renders a standard fixture once per session."""
    return lambda name, size=256: _scene(name, size)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run

_outcomes = {}
_notes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _outcomes.setdefault(m.args[0], [])


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(crit, []).append(report.outcome)
    if report.when != "call":
        return
    for name, text in report.user_properties:
        if name == "note":
            _notes.setdefault(crit, []).append(text)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    rep.criterion = m.args[0] if m is not None else None


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(_outcomes):
        res = _outcomes[crit]
        if not res:
            status = "NOT RUN"
        elif all(r == "passed" for r in res):
            status = "PASS"
        elif any(r == "failed" for r in res):
            status = "FAIL"
        else:
            status = "SKIP"
        note = "; ".join(_notes.get(crit, []))
        tr.write_line(f"criterion {crit:>2}: {status}" + (f"  ({note})" if note else ""))
