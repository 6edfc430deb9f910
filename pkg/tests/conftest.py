"""Collects acceptance outcomes and prints one line per criterion at the end."""
from collections import OrderedDict

CRITERIA = OrderedDict()


def record(criterion, part, passed, detail, elapsed):
    CRITERIA.setdefault(criterion, []).append((part, bool(passed), detail, elapsed))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit, parts in sorted(CRITERIA.items()):
        ok = all(p[1] for p in parts)
        total = sum(p[3] for p in parts)
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'} ({total:.1f} s)")
        for part, passed, detail, elapsed in parts:
            tr.write_line(f"    {'pass' if passed else 'FAIL'} {part}: {detail} [{elapsed:.1f} s]")
