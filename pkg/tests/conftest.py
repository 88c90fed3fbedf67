import os

import pytest

from mvempirical import kernels


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request):
    return request.param


def pytest_report_header(config):
    return f"mvempirical kernel backend: {kernels.BACKEND} (available: {sorted(kernels.backends())}); " \
           f"pure-python override: {bool(os.environ.get('MVEMPIRICAL_PURE_PYTHON'))}"


# acceptance outcomes, printed once at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
