from hierarchylab import verify as V


def test_symbolic_suite_passes():
    rep = V.run_suite("symbolic")
    assert rep.passed and len(rep.results) >= 40


def test_fault_injection_names_lenard_check():
    rep = V.run_suite("symbolic", faults=("kdv-H2",))
    names = {r.name for r in rep.failed}
    assert "lenard.recursion.H2" in names


def test_failing_check_is_captured():
    r = V._run("boom", "symbolic", lambda: 1 / 0)
    assert not r.passed and "ZeroDivisionError" in r.detail


def test_report_json_shape():
    js = V.run_suite("symbolic").to_json()
    assert {"suite", "passed", "checks"} <= set(js)
