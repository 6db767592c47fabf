import numpy as np
import pytest


def random_pd(rng, n, spread=3.0):
    """Random symmetric positive definite 2n x 2n matrix with eigenvalues in [0.2, 0.2 + spread]."""
    A = rng.standard_normal((2 * n, 2 * n))
    Q, _ = np.linalg.qr(A)
    ev = 0.2 + spread * rng.random(2 * n)
    M = Q @ np.diag(ev) @ Q.T
    return (M + M.T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rsplit("::", 1)[-1]
    if "test_acceptance" not in report.nodeid or not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    entry = _ACCEPTANCE.setdefault(number, {"outcome": "PASS", "notes": [], "name": name})
    if report.failed:
        entry["outcome"] = "FAIL"
    elif report.skipped and report.when != "teardown":
        entry["outcome"] = "SKIP"
    for key, value in report.user_properties:
        if report.when == "call":
            entry["notes"].append(f"{key}={value}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        entry = _ACCEPTANCE[number]
        title = entry["name"].split("_", 3)[-1].replace("_", " ")
        line = f"criterion {number:2d}: {entry['outcome']}  {title}"
        if entry["notes"]:
            line += "  [" + "; ".join(entry["notes"]) + "]"
        terminalreporter.write_line(line)
