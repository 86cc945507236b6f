"""Command-line interface: verify, obstruct, reduce, integrate, section.

Exit codes: 0 success or NO verdict, 1 inconclusive, 2 verification failure,
3 unknown system, 4 precondition violated, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from fractions import Fraction

from . import __version__
from .carnot import (CatalogError, ParameterError, catalog_lookup, load_algebra_file,
                     validate_algebra, verify_realization)
from .dynamics import (IntegrationError, IntegratorConfig, SectionSpec, State, integrate,
                       poincare_section, write_metadata, write_section_csv,
                       write_trajectory_csv)
from .exactpoly import ParseError, Poly
from .integrals import claimed_integrals, verify_integral_set
from .obstruct import (InternalConsistencyError, PreconditionError, build_pde_system, decide,
                       num_unknowns)
from .reduce import (ReducedSystem, ReductionInputError, StructuralError, X_VAR, Y_VAR,
                     format_xy, normalize_Q, symplectic_reduce)

EXIT_OK, EXIT_INCONCLUSIVE, EXIT_VERIFY, EXIT_UNKNOWN, EXIT_PRECONDITION, EXIT_NUMERIC = range(6)

# prolonged systems with more unknowns than this need --allow-long
LONG_RUN_UNKNOWNS = 15000


def _lookup(name: str, a=None, b=None):
    if os.path.exists(name):
        alg, system = load_algebra_file(name)
        return alg, system
    system = catalog_lookup(name, a, b)
    return system.algebra, system


# verify


def cmd_verify(args) -> int:
    alg, system = _lookup(args.system)
    failures = []
    vrep = validate_algebra(alg)
    failures += [f"algebra: {f}" for f in vrep.failures]
    print(f"{alg.name}: algebra checks {len(vrep.checks)}, failures {len(vrep.failures)}")
    if system is not None and system.realization is not None:
        rrep = verify_realization(alg, system.realization)
        failures += [f"realization: {f}" for f in rrep.failures]
        sign = "none" if rrep.sign is None else f"{rrep.sign:+d}"
        print(f"{alg.name}: realization sign {sign}, omega pairs "
              f"{rrep.omega_pairs_checked}, theta pairs {rrep.theta_pairs_checked}, "
              f"{'ok' if rrep.ok else 'FAILED'}")
    name = system.name if system is not None else alg.name
    if not os.path.exists(args.system):
        for s in claimed_integrals(name):
            rep = verify_integral_set(s, system.hamiltonian)
            status = "ok" if rep.ok else "FAILED"
            print(f"{rep.name}: {len(s.members)} integrals, jacobian rank "
                  f"{rep.jacobian_rank}/{rep.claimed_rank}, {status}")
            if not rep.ok:
                failures.append(f"integrals {rep.name}: {rep}")
    if failures:
        print("failures:")
        for f in failures:
            print(f"  {f}")
        return EXIT_VERIFY
    return EXIT_OK


# obstruct


def cmd_obstruct(args) -> int:
    _, system = _lookup(args.system, args.a, args.b)
    if system is None:
        raise PreconditionError("algebra file has no omega 1, omega 2 frame")
    d = args.degree
    k = d + 1 if args.prolong is None else args.prolong
    if not args.allow_long and num_unknowns(system.dim, d, k) > LONG_RUN_UNKNOWNS:
        raise PreconditionError(
            f"{num_unknowns(system.dim, d, k)} unknowns: long run, pass --allow-long")
    if args.mod is not None:
        mode = args.mod
    elif args.auto_primes:
        mode = "auto"
    elif args.exact:
        mode = "exact"
    else:
        mode = "exact" if d < 5 else "auto"
    if not system.obstruct_ready:
        # raise the structured precondition message from the builder
        build_pde_system(system, d)
    rep = decide(system, d, mode, k)
    print(rep.summary())
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(rep.to_json() + "\n")
    if args.json:
        print(rep.to_json())
    return EXIT_OK if rep.no_final else EXIT_INCONCLUSIVE


# reduce


def _parse_constants(text: str | None) -> dict[int, Fraction]:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        key, sep, val = item.partition("=")
        key = key.strip().lower()
        if not sep or not key.startswith("c") or not key[1:].isdigit():
            raise ReductionInputError(f"bad constant {item!r}; use c5=-1/10")
        out[int(key[1:])] = Fraction(val.strip())
    return out


def cmd_reduce(args) -> int:
    _, system = _lookup(args.system, args.a, args.b)
    consts = _parse_constants(args.c)
    Q = symplectic_reduce(system, consts)
    red = normalize_Q(Q, {i: consts.get(i, Fraction(0)) for i in range(3, system.dim + 1)})
    print(f"Q = {format_xy(Q) if Q else '0'}")
    print(red.to_text())
    if red.note:
        print(f"note: {red.note}")
    if args.json:
        info = {"system": system.name, "constants": {f"c{i}": str(v) for i, v in consts.items()},
                "Q": format_xy(Q), "kind": red.kind,
                "params": [str(v) for v in red.params], "map": red.map_text(),
                "exact": red.exact, "note": red.note, "tool_version": __version__}
        with open(args.json, "w") as fh:
            json.dump(info, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


# integrate / section


def parse_Q(text: str) -> ReducedSystem:
    """``Q1:a,b``, ``Q2:a,b,c`` or ``const:c``."""
    kind, sep, rest = text.partition(":")
    if not sep:
        raise ReductionInputError(f"bad --Q {text!r}; use Q1:a,b or Q2:a,b,c")
    vals = [Fraction(v.strip()) for v in rest.split(",") if v.strip()]
    kind = kind.strip()
    if kind == "Q1" and len(vals) == 2:
        a, b = vals
        return ReducedSystem("Q1", (a, b), a * X_VAR * X_VAR + b * Y_VAR)
    if kind == "Q2" and len(vals) == 3:
        a, b, c = vals
        return ReducedSystem("Q2", (a, b, c), a * X_VAR * X_VAR + b * Y_VAR * Y_VAR + c)
    if kind in ("const", "constant") and len(vals) == 1:
        return ReducedSystem("constant", (vals[0],), Poly.constant(vals[0], 2, 0))
    raise ReductionInputError(f"bad --Q {text!r}; use Q1:a,b, Q2:a,b,c or const:c")


def _parse_ic(text: str) -> State:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 3:
        raise ReductionInputError("--ic needs x,y,z")
    return State(0.0, *vals)


def _parse_surface(text: str, count: int) -> SectionSpec:
    coord, sep, rest = text.partition("=")
    level, sep2, sign = rest.partition(":")
    if not sep or not sep2 or sign not in ("+", "-"):
        raise ReductionInputError(f"bad --surface {text!r}; use z=0:+")
    return SectionSpec(coord.strip(), float(level),
                       "increasing" if sign == "+" else "decreasing", count)


def _config(args) -> IntegratorConfig:
    return IntegratorConfig(args.rtol, args.atol, min(1e-3, args.hmax), args.hmax)


def write_svg(path, points, xlabel: str, ylabel: str, size: int = 1000) -> None:
    """Scatter plot on a fixed square canvas, axes fitted to the data."""
    margin = 50
    xs = [p[0] for p in points] or [0.0]
    ys = [p[1] for p in points] or [0.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    span = size - 2 * margin
    sx = lambda v: margin + (v - x0) / (x1 - x0) * span
    sy = lambda v: size - margin - (v - y0) / (y1 - y0) * span
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="white"/>',
           f'<rect x="{margin}" y="{margin}" width="{span}" height="{span}" fill="none" '
           f'stroke="black"/>',
           f'<text x="{size / 2}" y="{size - 15}" text-anchor="middle">{xlabel} '
           f'[{x0:.4g}, {x1:.4g}]</text>',
           f'<text x="15" y="{size / 2}" transform="rotate(-90 15 {size / 2})" '
           f'text-anchor="middle">{ylabel} [{y0:.4g}, {y1:.4g}]</text>']
    out += [f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="1"/>' for a, b in points]
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def cmd_integrate(args) -> int:
    red = parse_Q(args.Q)
    ic = _parse_ic(args.ic)
    cfg = _config(args)
    t0 = time.perf_counter()
    status, flags = EXIT_OK, []
    try:
        traj = integrate(red, ic, args.tmax, cfg)
    except IntegrationError as e:
        status, flags = EXIT_NUMERIC, [str(e)]
        traj = None
    n = 0 if traj is None else len(traj)
    print(f"integrated {red.to_text().split('; map')[0]} to t={args.tmax}: {n} states")
    if traj is not None and args.out:
        write_trajectory_csv(args.out, traj)
        write_metadata(args.out + ".json", command="integrate", Q=args.Q, ic=ic, t_end=args.tmax,
                       config=cfg, states=n, flags=flags, z0_note="initial state as given",
                       elapsed_s=time.perf_counter() - t0, tool_version=__version__)
    if traj is not None and args.svg:
        write_svg(args.svg, list(zip(traj.x, traj.y)), "x", "y")
    for f in flags:
        print(f"flag: {f}")
    return status


def cmd_section(args) -> int:
    red = parse_Q(args.Q)
    ic = _parse_ic(args.ic)
    spec = _parse_surface(args.surface, args.count)
    cfg = _config(args)
    t0 = time.perf_counter()
    status = EXIT_OK
    try:
        res = poincare_section(red, ic, spec, cfg, t_max=args.tmax)
    except IntegrationError as e:
        print(f"flag: {e}")
        return EXIT_NUMERIC
    print(f"section {args.surface}: {len(res.points)} points, t_final={res.final_time:.6g}")
    for f in res.flags:
        print(f"flag: {f}")
    if res.truncated:
        status = EXIT_NUMERIC
    if args.out:
        write_section_csv(args.out, res)
        write_metadata(args.out + ".json", command="section", Q=args.Q, ic=ic, section=spec,
                       config=cfg, points=len(res.points), truncated=res.truncated,
                       flags=res.flags, t_final=res.final_time,
                       elapsed_s=time.perf_counter() - t0, tool_version=__version__)
    if args.svg:
        a, b = res.plane()
        write_svg(args.svg, res.plane_points(), a, b)
    return status


# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="carnotint", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check algebra, realization and claimed integrals")
    p.add_argument("system", help="catalog name or algebra file")
    p.set_defaults(func=cmd_verify)

    def system_args(p):
        p.add_argument("system", help="catalog name or algebra file")
        p.add_argument("--a", type=Fraction, default=None, help="gen6 parameter a")
        p.add_argument("--b", type=Fraction, default=None, help="gen6 parameter b")

    p = sub.add_parser("obstruct", help="decide nonexistence of a degree-d integral")
    system_args(p)
    p.add_argument("-d", "--degree", type=int, required=True)
    p.add_argument("--prolong", type=int, default=None, help="prolongation order (default d+1)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--mod", type=int, default=None, metavar="P", help="work over GF(P)")
    mode.add_argument("--auto-primes", action="store_true", help="built-in prime sequence")
    mode.add_argument("--exact", action="store_true", help="rank over the rationals")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--json", action="store_true", help="also print the JSON report")
    p.add_argument("--allow-long", action="store_true", help="permit large systems")
    p.set_defaults(func=cmd_obstruct)

    p = sub.add_parser("reduce", help="reduced curvature law for fixed momenta")
    system_args(p)
    p.add_argument("--c", help="constants, e.g. c5=-1/10,c6=20 (missing ones are 0)")
    p.add_argument("--json", help="write a JSON summary here")
    p.set_defaults(func=cmd_reduce)

    def dyn_args(p):
        p.add_argument("--Q", required=True, help="Q1:a,b | Q2:a,b,c | const:c")
        p.add_argument("--ic", default="0,0,0", help="x,y,z at t=0")
        p.add_argument("--out", help="CSV output (metadata goes to OUT.json)")
        p.add_argument("--svg", help="SVG scatter output")
        p.add_argument("--rtol", type=float, default=1e-12)
        p.add_argument("--atol", type=float, default=1e-14)
        p.add_argument("--hmax", type=float, default=0.1)

    p = sub.add_parser("integrate", help="integrate the reduced flow")
    dyn_args(p)
    p.add_argument("--tmax", type=float, required=True)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("section", help="Poincare section of the reduced flow")
    dyn_args(p)
    p.add_argument("--surface", default="z=0:+", help="coordinate=level:+ or :-")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--tmax", type=float, default=math.inf)
    p.set_defaults(func=cmd_section)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CatalogError as e:
        print(f"error: {e.args[0] if e.args else e}", file=sys.stderr)
        return EXIT_UNKNOWN
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNKNOWN
    except (PreconditionError, StructuralError, ParameterError, ReductionInputError,
            ParseError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PRECONDITION
    except InternalConsistencyError as e:
        print(f"internal consistency failure: {e}", file=sys.stderr)
        return EXIT_VERIFY
    except (IntegrationError, OverflowError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
