from __future__ import annotations

import os

import pytest
import sympy
from hypothesis import HealthCheck, settings

from carnotint.exactpoly import Poly

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

RUN_LONG = os.environ.get("CARNOTINT_LONG") == "1"


def pytest_collection_modifyitems(config, items):
    if RUN_LONG:
        return
    skip = pytest.mark.skip(reason="long run; set CARNOTINT_LONG=1")
    for item in items:
        if "long" in item.keywords:
            item.add_marker(skip)


def to_sympy(f: Poly):
    """Independent conversion used by oracle tests."""
    xs = sympy.symbols(f"x1:{f.num_base + 1}")
    ps = sympy.symbols(f"p1:{f.num_mom + 1}")
    gens = list(xs) + list(ps)
    expr = sympy.Integer(0)
    for e, c in f.items():
        term = sympy.Rational(c.numerator, c.denominator)
        for g, k in zip(gens, e):
            term *= g ** k
        expr += term
    return sympy.expand(expr), xs, ps


def sympy_bracket(f: Poly, g: Poly):
    ef, xs, ps = to_sympy(f)
    eg, _, _ = to_sympy(g)
    return sympy.expand(sum(sympy.diff(ef, x) * sympy.diff(eg, p) - sympy.diff(ef, p) * sympy.diff(eg, x)
                            for x, p in zip(xs, ps)))


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
