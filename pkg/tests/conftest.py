import contextlib
import io
import time

import pytest

from msa_forge.cli import main
from msa_forge.fixtures import config_path

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    ok, _ = _CRITERIA.get(n, (True, title))
    if report.when == "call" or report.failed:
        ok = ok and report.passed
    _CRITERIA[n] = (ok, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, title = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title}")


class CLIRunner:
    """Runs the CLI in-process and memoizes results by argument list."""

    def __init__(self):
        self._cache = {}
        self.elapsed = {}

    def __call__(self, *args, cached=True):
        key = tuple(str(a) for a in args)
        if cached and key in self._cache:
            return self._cache[key]
        out, err = io.StringIO(), io.StringIO()
        start = time.perf_counter()
        with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
            code = main(list(key))
        self.elapsed[key] = time.perf_counter() - start
        result = (code, out.getvalue(), err.getvalue())
        if cached:
            self._cache[key] = result
        return result

    @staticmethod
    def bundled_args(command, name, *extra):
        return (command, "--config", config_path(name), *extra)

    def bundled(self, command, name, *extra):
        return self(*self.bundled_args(command, name, *extra))

    def seconds(self, *args):
        return self.elapsed[tuple(str(a) for a in args)]


@pytest.fixture(scope="session")
def cli():
    return CLIRunner()
