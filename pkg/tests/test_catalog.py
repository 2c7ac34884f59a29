from hierarchylab import catalog


def test_every_catalog_entry_checks():
    res = catalog.check_all()
    assert len(res) >= 100
    bad = [r for r in res if not r.passed]
    assert not bad, bad[:3]


def test_slips_carry_reasons_and_fail_as_tabulated():
    s = catalog.slips()
    assert s
    for e in s:
        assert e.reason
        r = catalog.check_entry(e)
        assert r.corrected_ok and not r.tabulated_ok
