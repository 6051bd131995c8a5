import os
import sys

sys.path.insert(0, os.path.dirname(__file__))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    ran = {int(r.nodeid.split("test_c")[1][:2]) for key in ("passed", "failed")
           for r in terminalreporter.stats.get(key, []) if "test_acceptance.py::test_c" in r.nodeid}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ran):
        terminalreporter.write_line(mod.RESULTS.get(n, f"criterion {n:2d}: FAIL  did not complete"))
