"""Numerical flow of ``x' = cos z, y' = sin z, z' = Q(x, y)``.

Adaptive embedded Runge-Kutta (Cash-Karp 4(5)) in plain floats, Poincare
sections with crossings located by re-stepping from the start of the step,
and a few diagnostics: tolerance refinement, drift of the rotationally
symmetric invariant, and the pendulum form of the equation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

from .reduce import ReducedSystem, SingularPointError, elliptic_invariant

TWO_PI = 2.0 * math.pi


class IntegrationError(RuntimeError):
    def __init__(self, msg, last_state=None):
        super().__init__(msg)
        self.last_state = last_state


class DynamicsInputError(ValueError):
    pass


@dataclass(frozen=True)
class State:
    t: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.t, self.x, self.y, self.z)):
            raise DynamicsInputError(f"non-finite state {self}")


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    h_init: float = 1e-3
    h_max: float = 0.1
    max_steps: int = 100_000_000

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise DynamicsInputError("tolerances must be positive")
        if not 0 < self.h_init <= self.h_max:
            raise DynamicsInputError("need 0 < h_init <= h_max")

    def tightened(self, factor: float = 10.0) -> "IntegratorConfig":
        return IntegratorConfig(self.rel_tol / factor, self.abs_tol / factor,
                                self.h_init / factor, self.h_max / factor, self.max_steps)


@dataclass(frozen=True)
class SectionSpec:
    coordinate: str = "z"
    level: float = 0.0
    direction: str = "increasing"
    count: int = 1

    def __post_init__(self):
        if self.coordinate not in ("x", "y", "z"):
            raise DynamicsInputError("section coordinate must be x, y or z")
        if self.direction not in ("increasing", "decreasing"):
            raise DynamicsInputError("direction must be increasing or decreasing")
        if self.count < 1:
            raise DynamicsInputError("count must be at least 1")


@dataclass
class Trajectory:
    t: list = field(default_factory=list)
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    z: list = field(default_factory=list)
    steps: int = 0
    rejected: int = 0

    def append(self, t, x, y, z):
        self.t.append(t)
        self.x.append(x)
        self.y.append(y)
        self.z.append(z)

    def __len__(self):
        return len(self.t)

    def state(self, i: int) -> State:
        return State(self.t[i], self.x[i], self.y[i], self.z[i])

    @property
    def final(self) -> State:
        return self.state(-1)


def curvature_function(Q) -> Callable[[float, float], float]:
    """Accept a ReducedSystem, a number or a callable ``(x, y) -> float``."""
    if isinstance(Q, ReducedSystem):
        return Q.curvature()
    if isinstance(Q, (int, float)):
        q = float(Q)
        return lambda x, y: q
    if callable(Q):
        return Q
    raise DynamicsInputError(f"cannot use {Q!r} as a curvature law")


def vector_field(Q):
    q = curvature_function(Q)
    return lambda x, y, z: (math.cos(z), math.sin(z), q(x, y))


def jacobian_trace(Q, x: float, y: float, z: float, eps: float = 1e-6) -> float:
    """Central-difference trace of the Jacobian of the vector field."""
    f = vector_field(Q)
    return ((f(x + eps, y, z)[0] - f(x - eps, y, z)[0])
            + (f(x, y + eps, z)[1] - f(x, y - eps, z)[1])
            + (f(x, y, z + eps)[2] - f(x, y, z - eps)[2])) / (2 * eps)


# Cash-Karp tableau
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 3 / 10, -9 / 10, 6 / 5
_A51, _A52, _A53, _A54 = -11 / 54, 5 / 2, -70 / 27, 35 / 27
_A61, _A62, _A63, _A64, _A65 = 1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096
_B1, _B3, _B4, _B6 = 37 / 378, 250 / 621, 125 / 594, 512 / 1771
_E1 = _B1 - 2825 / 27648
_E3 = _B3 - 18575 / 48384
_E4 = _B4 - 13525 / 55296
_E5 = -277 / 14336
_E6 = _B6 - 1 / 4


def _ck_step(q, x, y, z, h):
    """One Cash-Karp step: fifth-order result and embedded error estimate."""
    cos, sin = math.cos, math.sin
    k1x, k1y, k1z = cos(z), sin(z), q(x, y)
    zz = z + h * _A21 * k1z
    k2x, k2y, k2z = cos(zz), sin(zz), q(x + h * _A21 * k1x, y + h * _A21 * k1y)
    zz = z + h * (_A31 * k1z + _A32 * k2z)
    k3x, k3y = cos(zz), sin(zz)
    k3z = q(x + h * (_A31 * k1x + _A32 * k2x), y + h * (_A31 * k1y + _A32 * k2y))
    zz = z + h * (_A41 * k1z + _A42 * k2z + _A43 * k3z)
    k4x, k4y = cos(zz), sin(zz)
    k4z = q(x + h * (_A41 * k1x + _A42 * k2x + _A43 * k3x),
            y + h * (_A41 * k1y + _A42 * k2y + _A43 * k3y))
    zz = z + h * (_A51 * k1z + _A52 * k2z + _A53 * k3z + _A54 * k4z)
    k5x, k5y = cos(zz), sin(zz)
    k5z = q(x + h * (_A51 * k1x + _A52 * k2x + _A53 * k3x + _A54 * k4x),
            y + h * (_A51 * k1y + _A52 * k2y + _A53 * k3y + _A54 * k4y))
    zz = z + h * (_A61 * k1z + _A62 * k2z + _A63 * k3z + _A64 * k4z + _A65 * k5z)
    k6x, k6y = cos(zz), sin(zz)
    k6z = q(x + h * (_A61 * k1x + _A62 * k2x + _A63 * k3x + _A64 * k4x + _A65 * k5x),
            y + h * (_A61 * k1y + _A62 * k2y + _A63 * k3y + _A64 * k4y + _A65 * k5y))
    nx = x + h * (_B1 * k1x + _B3 * k3x + _B4 * k4x + _B6 * k6x)
    ny = y + h * (_B1 * k1y + _B3 * k3y + _B4 * k4y + _B6 * k6y)
    nz = z + h * (_B1 * k1z + _B3 * k3z + _B4 * k4z + _B6 * k6z)
    ex = h * (_E1 * k1x + _E3 * k3x + _E4 * k4x + _E5 * k5x + _E6 * k6x)
    ey = h * (_E1 * k1y + _E3 * k3y + _E4 * k4y + _E5 * k5y + _E6 * k6y)
    ez = h * (_E1 * k1z + _E3 * k3z + _E4 * k4z + _E5 * k5z + _E6 * k6z)
    return nx, ny, nz, ex, ey, ez


def _steps(q, ic: State, t_end: float, cfg: IntegratorConfig, stops=()):
    """Yield accepted steps ``(t0, x0, y0, z0, h, t1, x1, y1, z1)``.

    Steps are clipped so that every time in ``stops`` (and ``t_end``) is hit
    exactly.
    """
    t, x, y, z = ic.t, ic.x, ic.y, ic.z
    direction = 1.0 if t_end >= t else -1.0
    targets = sorted((s for s in stops if (s - t) * direction > 0 and (t_end - s) * direction >= 0),
                     reverse=direction < 0)
    targets.append(t_end)
    ti = 0
    h = cfg.h_init
    rtol, atol, hmax = cfg.rel_tol, cfg.abs_tol, cfg.h_max
    nsteps = 0
    while ti < len(targets):
        target = targets[ti]
        if (target - t) * direction <= 0:
            ti += 1
            continue
        remaining = abs(target - t)
        step = min(h, hmax, remaining)
        hit = step == remaining
        while True:
            nsteps += 1
            if nsteps > cfg.max_steps:
                raise IntegrationError("maximum number of steps exceeded", State(t, x, y, z))
            hs = direction * step
            nx, ny, nz, ex, ey, ez = _ck_step(q, x, y, z, hs)
            err = max(abs(ex) / (atol + rtol * max(abs(x), abs(nx))),
                      abs(ey) / (atol + rtol * max(abs(y), abs(ny))),
                      abs(ez) / (atol + rtol * max(abs(z), abs(nz))))
            if not math.isfinite(err):
                err = 1e10
            if err <= 1.0:
                break
            step *= max(0.1, 0.9 * err ** -0.25)
            hit = False
            if step < 1e-14 * max(1.0, abs(t)):
                raise IntegrationError("step size underflow", State(t, x, y, z))
        t1 = target if hit else t + hs
        yield t, x, y, z, hs, t1, nx, ny, nz
        grow = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        if not hit or step * grow < h:
            h = step * grow
        t, x, y, z = t1, nx, ny, nz
        if hit:
            ti += 1


def integrate(Q, ic: State, t_end: float, cfg: IntegratorConfig | None = None,
              t_eval=None) -> Trajectory:
    """Integrate from ``ic`` to ``t_end``.

    Without ``t_eval`` every accepted step is recorded; otherwise only the
    requested times (hit exactly by step clipping) plus the initial state.
    """
    cfg = cfg or IntegratorConfig()
    q = curvature_function(Q)
    traj = Trajectory()
    traj.append(ic.t, ic.x, ic.y, ic.z)
    wanted = None if t_eval is None else set(float(s) for s in t_eval)
    for _, _, _, _, _, t1, x1, y1, z1 in _steps(q, ic, t_end, cfg, wanted or ()):
        traj.steps += 1
        if wanted is None or t1 in wanted:
            traj.append(t1, x1, y1, z1)
    return traj


# sections


@dataclass
class SectionResult:
    spec: SectionSpec
    points: list = field(default_factory=list)
    truncated: bool = False
    flags: list = field(default_factory=list)
    final_time: float = 0.0

    def plane(self) -> tuple[str, str]:
        return {"z": ("x", "y"), "x": ("z", "y"), "y": ("x", "z")}[self.spec.coordinate]

    def plane_points(self) -> list[tuple[float, float]]:
        a, b = self.plane()
        out = []
        for s in self.points:
            vals = {"x": s.x, "y": s.y, "z": wrap_angle(s.z)}
            out.append((vals[a], vals[b]))
        return out


def wrap_angle(z: float) -> float:
    """Representative of ``z`` in ``[-pi, pi)``."""
    return (z + math.pi) % TWO_PI - math.pi


def _coord(idx, x, y, z):
    return (x, y, z)[idx]


def _refine(q, idx, level, t0, x0, y0, z0, h, g0, g1, tol):
    """Locate ``coordinate = level`` inside a step by re-stepping from its start."""
    def g(s):
        nx, ny, nz, *_ = _ck_step(q, x0, y0, z0, s)
        return _coord(idx, nx, ny, nz) - level, nx, ny, nz

    lo, hi, glo, ghi = 0.0, h, g0, g1
    s = h * glo / (glo - ghi)
    best = None
    for it in range(100):
        if not (min(lo, hi) < s < max(lo, hi)):
            s = 0.5 * (lo + hi)
        val, nx, ny, nz = g(s)
        best = (s, nx, ny, nz, val)
        if abs(val) < tol:
            break
        if (val > 0) == (glo > 0):
            lo, glo = s, val
        else:
            hi, ghi = s, val
        # secant, with bisection every third try to guarantee shrinking
        s = 0.5 * (lo + hi) if it % 3 == 2 else hi - ghi * (hi - lo) / (ghi - glo)
    s, nx, ny, nz, val = best
    return t0 + s, nx, ny, nz, abs(val) < tol


def poincare_section(Q, ic: State, spec: SectionSpec, cfg: IntegratorConfig | None = None,
                     t_max: float = math.inf, tol: float = 1e-11) -> SectionResult:
    """Collect ``spec.count`` crossings of ``coordinate = level`` in the given direction.

    For ``z`` the level is taken modulo ``2 pi``.  Stops early (with
    ``truncated`` set) when ``t_max`` is reached.
    """
    cfg = cfg or IntegratorConfig()
    q = curvature_function(Q)
    idx = "xyz".index(spec.coordinate)
    up = spec.direction == "increasing"
    res = SectionResult(spec)
    periodic = spec.coordinate == "z"
    horizon = t_max if math.isfinite(t_max) else ic.t + 1e300
    for t0, x0, y0, z0, h, t1, x1, y1, z1 in _steps(q, ic, horizon, cfg):
        res.final_time = t1
        c0, c1 = _coord(idx, x0, y0, z0), _coord(idx, x1, y1, z1)
        if periodic:
            n0 = math.floor((c0 - spec.level) / TWO_PI)
            n1 = math.floor((c1 - spec.level) / TWO_PI)
            if up:
                levels = [spec.level + TWO_PI * n for n in range(n0 + 1, n1 + 1)]
            else:
                levels = [spec.level + TWO_PI * n for n in range(n0, n1, -1)]
        else:
            lv = spec.level
            levels = [lv] if ((c0 < lv <= c1) if up else (c0 > lv >= c1)) else []
        for lv in levels:
            if c1 == lv:
                tc, xc, yc, zc, ok = t1, x1, y1, z1, True
            else:
                tc, xc, yc, zc, ok = _refine(q, idx, lv, t0, x0, y0, z0, h, c0 - lv, c1 - lv, tol)
            if not ok:
                res.flags.append(f"crossing at t={tc:.17g} not refined to {tol}")
            res.points.append(State(tc, xc, yc, zc))
            if len(res.points) == spec.count:
                return res
    res.truncated = True
    res.flags.append("t_max reached")
    if not res.points:
        res.flags.append("no crossings")
    return res


# diagnostics


def accuracy_check(Q, ic: State, t_end: float, cfg: IntegratorConfig | None = None,
                   samples: int = 200) -> float:
    """Largest state difference between ``cfg`` and a 10x tighter run at common times."""
    cfg = cfg or IntegratorConfig()
    if t_end == ic.t:
        return 0.0
    times = [ic.t + (t_end - ic.t) * i / samples for i in range(1, samples + 1)]
    a = integrate(Q, ic, t_end, cfg, times)
    b = integrate(Q, ic, t_end, cfg.tightened(10.0), times)
    return max(max(abs(a.x[i] - b.x[i]), abs(a.y[i] - b.y[i]), abs(a.z[i] - b.z[i]))
               for i in range(len(a)))


def invariant_monitor(red: ReducedSystem, traj: Trajectory) -> float:
    """Largest ``|F(t) - F(0)|`` of the rotational invariant along ``traj``."""
    if red.kind not in ("Q2", "constant") or red.a != red.b:
        raise DynamicsInputError("invariant needs Q = a (x^2 + y^2) + c")
    F = elliptic_invariant(red.a, red.c)
    try:
        f0 = F(traj.x[0], traj.y[0], traj.z[0])
        return max(abs(F(x, y, z) - f0) for x, y, z in zip(traj.x, traj.y, traj.z))
    except SingularPointError as e:
        raise DynamicsInputError(f"trajectory passes through r = 0: {e}") from e


def pendulum_residual(red: ReducedSystem, traj: Trajectory, fd_step: float | None = None) -> float:
    """Residual of ``z'' = b sin z + 2 a x cos z`` along ``traj``.

    With ``fd_step`` None, ``z''`` comes from differentiating the vector field
    (``Q_x cos z + Q_y sin z``); otherwise ``traj`` must be sampled on a
    uniform grid of that spacing and ``z''`` is a central second difference.
    """
    if red.kind != "Q1":
        raise DynamicsInputError("pendulum form needs a Q1 curvature law")
    if abs(traj.x[0]) > 1e-15:
        raise DynamicsInputError("trajectory must start at x = 0")
    a, b = float(red.a), float(red.b)
    if fd_step is None:
        q = red.curvature()
        e = 1e-4
        worst = 0.0
        for x, y, z in zip(traj.x, traj.y, traj.z):
            # central differences are exact for quadratics up to rounding
            qx = (q(x + e, y) - q(x - e, y)) / (2 * e)
            qy = (q(x, y + e) - q(x, y - e)) / (2 * e)
            zdd = qx * math.cos(z) + qy * math.sin(z)
            worst = max(worst, abs(zdd - b * math.sin(z) - 2 * a * x * math.cos(z)))
        return worst
    ts = traj.t
    for i in range(1, len(ts)):
        if abs(ts[i] - ts[i - 1] - fd_step) > 1e-9 * max(1.0, abs(ts[i])):
            raise DynamicsInputError("trajectory is not sampled on the finite-difference grid")
    h2 = fd_step * fd_step
    worst = 0.0
    for i in range(1, len(ts) - 1):
        zdd = (traj.z[i + 1] - 2 * traj.z[i] + traj.z[i - 1]) / h2
        x, z = traj.x[i], traj.z[i]
        worst = max(worst, abs(zdd - b * math.sin(z) - 2 * a * x * math.cos(z)))
    return worst


# output


def write_trajectory_csv(path, traj: Trajectory) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "z"])
        for row in zip(traj.t, traj.x, traj.y, traj.z):
            w.writerow([f"{v:.17g}" for v in row])


def write_section_csv(path, res: SectionResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(res.plane()))
        for a, b in res.plane_points():
            w.writerow([f"{a:.17g}", f"{b:.17g}"])


def write_metadata(path, **info) -> None:
    def conv(v):
        if isinstance(v, (State, IntegratorConfig, SectionSpec)):
            return asdict(v)
        return str(v)

    with open(path, "w") as fh:
        json.dump(info, fh, indent=2, default=conv)
