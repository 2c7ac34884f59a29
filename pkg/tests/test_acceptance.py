"""Acceptance criteria 1-10 at their stated tolerances, one line per criterion.

Run directly (``python tests/test_acceptance.py``) or through pytest; in the
latter case the lines are repeated in the terminal summary.
"""

import pytest

from hierarchylab.verify import criterion

CASES = [(1, None), (2, None), (3, None), (4, None), (5, None), (6, None), (7, None),
         (8, None), (9, 1), (9, 2), (10, None)]
LINES = []


def _id(case):
    k, N = case
    return f"criterion_{k}" + (f"_N{N}" if N else "")


@pytest.mark.parametrize("case", CASES, ids=[_id(c) for c in CASES])
def test_criterion(case):
    r = criterion(*case)
    LINES.append(r.line)
    print(r.line)
    assert r.passed, r.line  # includes the runtime budget


if __name__ == "__main__":
    import sys
    ok = True
    for c in CASES:
        r = criterion(*c)
        print(r.line, flush=True)
        ok &= r.passed
    sys.exit(0 if ok else 1)
