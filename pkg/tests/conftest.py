_outcomes = {}
_notes = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    # tagged at collection so failures inside module fixtures still count
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", tuple(mark.args)))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    crit = props.get("criterion")
    if crit is None:
        return
    number, text = crit
    if report.when == "call" and "note" in props:
        _notes.setdefault(number, []).extend(v for k, v in report.user_properties if k == "note")
    if report.when == "call" or report.failed:
        prev = _outcomes.get(number)
        ok = report.passed
        _outcomes[number] = (text, ok if prev is None else prev[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        text, ok = _outcomes[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {text}")
        for note in _notes.get(number, []):
            terminalreporter.write_line(f"              {note}")
