from __future__ import annotations

import csv
import json
import math

import pytest
from hypothesis import given, strategies as st

from carnotint.dynamics import (DynamicsInputError, IntegratorConfig, SectionSpec, State,
                                accuracy_check, integrate, invariant_monitor, jacobian_trace,
                                pendulum_residual, poincare_section, wrap_angle,
                                write_metadata, write_section_csv, write_trajectory_csv)
from carnotint.reduce import normalize_Q
from carnotint.exactpoly import parse_poly


def law(text):
    return normalize_Q(parse_poly(text.replace("x", "x1").replace("y", "x2"), 2, 0))


def rk4_oracle(q, ic, t_end, n):
    """Fixed-step classical RK4, independent of the adaptive integrator."""
    h = (t_end - ic.t) / n
    x, y, z = ic.x, ic.y, ic.z

    def f(x, y, z):
        return math.cos(z), math.sin(z), q(x, y)

    for _ in range(n):
        k1 = f(x, y, z)
        k2 = f(x + h / 2 * k1[0], y + h / 2 * k1[1], z + h / 2 * k1[2])
        k3 = f(x + h / 2 * k2[0], y + h / 2 * k2[1], z + h / 2 * k2[2])
        k4 = f(x + h * k3[0], y + h * k3[1], z + h * k3[2])
        x += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        y += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        z += h / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    return x, y, z


def test_straight_line():
    tr = integrate(0, State(0, 1, 2, 0.3), 50.0)
    s = tr.final
    assert s.t == 50.0
    assert abs(s.x - (1 + 50 * math.cos(0.3))) < 1e-10
    assert abs(s.y - (2 + 50 * math.sin(0.3))) < 1e-10 and s.z == 0.3


def test_circle_closed_form():
    c = 2.0
    T = 2 * math.pi / c
    tr = integrate(c, State(0, 0, 0, 0), 10 * T, t_eval=[k * T / 4 for k in range(1, 41)])
    for t, x, y, z in zip(tr.t, tr.x, tr.y, tr.z):
        assert abs(x - math.sin(c * t) / c) < 1e-10
        assert abs(y - (1 - math.cos(c * t)) / c) < 1e-10
        assert abs(z - c * t) < 1e-10
    assert abs(tr.x[-1]) < 1e-10 and abs(tr.y[-1]) < 1e-10


def test_against_rk4_oracle():
    red = law("x^2 + y")
    ic = State(0, 0.3, -0.2, 0.5)
    tr = integrate(red, ic, 5.0)
    ox, oy, oz = rk4_oracle(red.curvature(), ic, 5.0, 20000)
    s = tr.final
    assert max(abs(s.x - ox), abs(s.y - oy), abs(s.z - oz)) < 1e-9


def test_accuracy_check_small():
    assert accuracy_check(law("x^2 + y^2 + 1"), State(0, 1, 0, 0), 30.0) < 1e-8


def test_t_eval_ordering_and_monotone_time():
    tr = integrate(law("x^2 + y"), State(0, 0, 0, 0), 3.0, t_eval=[0.5, 1.0, 3.0])
    assert tr.t == [0, 0.5, 1.0, 3.0]
    full = integrate(law("x^2 + y"), State(0, 0, 0, 0), 3.0)
    assert all(a < b for a, b in zip(full.t, full.t[1:]))


def test_invariant_monitor():
    red = law("x^2 + y^2")
    tr = integrate(red, State(0, 1, 0, 0), 200.0)
    assert invariant_monitor(red, tr) < 1e-9
    with pytest.raises(DynamicsInputError):
        invariant_monitor(law("x^2 + 2 y^2"), tr)


def test_pendulum_residuals():
    red = law("x^2 + y")
    h = 1e-3
    ic = State(0, 0, 0, 0.7)
    tr = integrate(red, ic, 10.0, t_eval=[k * h for k in range(1, 10001)])
    assert pendulum_residual(red, tr) < 1e-6
    assert pendulum_residual(red, tr, fd_step=h) < 1e-4
    bad = integrate(red, State(0, 5, 0, 0), 1.0)
    with pytest.raises(DynamicsInputError):
        pendulum_residual(red, bad)
    with pytest.raises(DynamicsInputError):
        pendulum_residual(law("x^2 + y^2"), tr)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-3, 3))
def test_reversibility(x, y, z):
    red = law("x^2 + 2 y")
    fwd = integrate(red, State(0, x, y, z), 3.0).final
    # flipping the heading reverses the flow only when Q is also negated
    neg = law("-x^2 - 2 y")
    back = integrate(neg, State(0, fwd.x, fwd.y, fwd.z + math.pi), 3.0).final
    assert abs(back.x - x) < 1e-6 and abs(back.y - y) < 1e-6
    assert abs(wrap_angle(back.z - math.pi - z)) < 1e-6


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-6, 6))
def test_unit_speed_and_zero_divergence(x, y, z):
    red = law("x^2 - 3 y^2 + x y + 1")
    assert abs(jacobian_trace(red, x, y, z)) < 1e-6
    tr = integrate(red, State(0, x, y, z), 0.5, t_eval=[0.25, 0.5])
    dx, dy = tr.x[1] - tr.x[0], tr.y[1] - tr.y[0]
    assert math.hypot(dx, dy) <= 0.25 + 1e-9


def test_section_z_crossings_are_on_level_and_increasing():
    red = law("x^2 + y")
    res = poincare_section(red, State(0, 0, 0.5, 0), SectionSpec("z", 0.0, "increasing", 25),
                           t_max=5000)
    assert len(res.points) == 25 and not res.truncated
    for s in res.points:
        assert abs(wrap_angle(s.z)) < 1e-10
        assert red.curvature()(s.x, s.y) > 0
    assert all(a.t < b.t for a, b in zip(res.points, res.points[1:]))


@pytest.mark.parametrize("direction", ["increasing", "decreasing"])
def test_section_x_sign(direction):
    res = poincare_section(1.0, State(0, 0, 0, 0), SectionSpec("x", 0.5, direction, 4))
    for s in res.points:
        assert abs(s.x - 0.5) < 1e-10
        vx = math.cos(s.z)
        assert (vx > 0) == (direction == "increasing")


def test_section_truncated():
    res = poincare_section(0, State(0, 0, 0, 0), SectionSpec("x", -1.0, "increasing", 3),
                           t_max=10)
    assert res.truncated and "no crossings" in res.flags


def test_input_validation():
    with pytest.raises(DynamicsInputError):
        State(0, math.nan, 0, 0)
    with pytest.raises(DynamicsInputError):
        IntegratorConfig(rel_tol=0)
    with pytest.raises(DynamicsInputError):
        SectionSpec("w")
    with pytest.raises(DynamicsInputError):
        SectionSpec(count=0)


def test_csv_and_metadata(tmp_path):
    tr = integrate(1.0, State(0, 0, 0, 0), 1.0)
    write_trajectory_csv(tmp_path / "t.csv", tr)
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["t", "x", "y", "z"] and len(rows) == len(tr) + 1
    res = poincare_section(1.0, State(0, 0, 0, 0), SectionSpec("z", 0.0, "increasing", 2))
    write_section_csv(tmp_path / "s.csv", res)
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["x", "y"] and len(rows) == 3
    write_metadata(tmp_path / "m.json", ic=State(0, 0, 0, 0), cfg=IntegratorConfig())
    meta = json.load(open(tmp_path / "m.json"))
    assert meta["cfg"]["rel_tol"] == 1e-12
