import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    crit = item.get_closest_marker("criterion")
    if crit is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        entry = _ACCEPTANCE.setdefault(crit.args[0], {"ok": True, "doc": None, "notes": []})
        entry["ok"] = entry["ok"] and rep.outcome == "passed"
        if entry["doc"] is None:
            entry["doc"] = (item.function.__doc__ or item.name).strip().splitlines()[0]
        entry["notes"].extend(v for k, v in item.user_properties if k == "note")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[num]
        tr.write_line(f"criterion {num}: {'PASS' if e['ok'] else 'FAIL'}  {e['doc']}")
        for note in e["notes"]:
            tr.write_line(f"    {note}")
