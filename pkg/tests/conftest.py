import pytest
from hypothesis import HealthCheck, settings

from semsig.ingest import STREET_SCALE, SyntheticCityConfig, generate_synthetic_city, paris_intensities
from semsig.model import BuildParams
from semsig.siggen import build_database

settings.register_profile(
    "semsig",
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("semsig")


def street_city(width=1000.0, height=1000.0, seed=1):
    cfg = SyntheticCityConfig(width, height, paris_intensities(STREET_SCALE), seed)
    return cfg, generate_synthetic_city(cfg)


@pytest.fixture(scope="session")
def small_city():
    cfg, objects = street_city(300.0, 300.0, seed=5)
    return cfg, objects


@pytest.fixture(scope="session")
def small_db(small_city):
    cfg, objects = small_city
    return build_database(objects, BuildParams(), cfg.bbox())


@pytest.fixture(scope="session")
def km_city():
    return street_city(1000.0, 1000.0, seed=1)


@pytest.fixture(scope="session")
def km_db(km_city):
    cfg, objects = km_city
    return build_database(objects, BuildParams(), cfg.bbox())


# -- acceptance reporting ---------------------------------------------------
# Tests marked ``criterion(n, title)`` get one PASS/FAIL line each in the
# terminal summary; ``request.node.user_properties`` entries named "detail"
# are appended to the line.

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        number, title = mark.args
        details = [v for k, v in item.user_properties if k == "detail"]
        ok = rep.outcome == "passed"
        prev = _CRITERIA.get(number)
        entry = (title, ok, details)
        if prev is not None:
            entry = (title, prev[1] and ok, prev[2] + details)
        _CRITERIA[number] = entry


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, details = _CRITERIA[number]
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}"
        if details:
            line += "  [" + "; ".join(details) + "]"
        tr.write_line(line)
