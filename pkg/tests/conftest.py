import pytest

CRITERIA = {
    1: "exact oracle algebra",
    2: "conformal-map numerics",
    3: "sampler correctness",
    4: "critical geometry at L=256",
    5: "estimator pipeline on synthetic ensembles",
    6: "direct lattice <TT> (out of desk-scale scope)",
}

_results: dict[int, dict[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    rep = (yield).get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    slot = _results.setdefault(mark.args[0], {})
    if rep.failed:
        slot[item.nodeid] = "failed"
    elif rep.skipped:
        slot.setdefault(item.nodeid, "skipped")
    elif rep.when == "call":
        slot.setdefault(item.nodeid, "passed")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        got = _results.get(n)
        if not got:
            tr.write_line(f"criterion {n} ({title}): NOT RUN")
            continue
        bad = [k.split("::")[-1] for k, v in got.items() if v != "passed"]
        status = "FAIL" if bad else "PASS"
        detail = f"{len(got) - len(bad)}/{len(got)} checks"
        if bad:
            detail += "; failing: " + ", ".join(bad)
        tr.write_line(f"criterion {n} ({title}): {status} [{detail}]")
