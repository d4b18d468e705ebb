import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(params=["cython", "python"])
def kernel_impl(request):
    """Each codec kernel backend in turn."""
    from cabasim import _kernels_py

    if request.param == "python":
        return _kernels_py
    try:
        from cabasim import _kernels
    except ImportError:
        pytest.skip("compiled kernels not built")
    return _kernels


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        title, ok, detail = RESULTS[n]
        line = f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
