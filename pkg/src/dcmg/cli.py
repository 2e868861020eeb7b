"""Command line entry point: ``dcmg {analyze,simulate,design-theta,omega-range}``.

Exit codes: 0 success, 2 scenario schema error, 3 model validation error,
4 runtime failure (singular blocks, blowup, unsettled phases).
"""
import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis as an
from .errors import (
    AssumptionViolation,
    DegenerateLoadProfile,
    MicrogridError,
    ModelValidationError,
    ScenarioSchemaError,
)
from .plant import partitioned_admittance
from .scenario import parse_scenario
from .sim import run

EXIT_OK, EXIT_SCHEMA, EXIT_MODEL, EXIT_RUNTIME = 0, 2, 3, 4

log = logging.getLogger("dcmg")


def _nodes(idx):
    return [int(i) + 1 for i in idx]


def _f(x):
    return [float(v) for v in np.asarray(x).ravel()]


# -- report builders (plain dicts; rendering happens separately) -------------------


def _steady(spec, omega=None):
    m = spec.model
    if spec.mode == "uniform":
        return an.uniform_steady(m.net, m.ratings)
    pa = partitioned_admittance(m.net, m.partition)
    return an.critical_steady(pa, m.ratings, spec.omega if omega is None else omega)


def design_theta_report(spec, gamma_v, omega=None):
    ss = _steady(spec, omega)
    if spec.mode == "uniform":
        psi = ss.psi
        theta_d = an.design_theta_uniform(ss, gamma_v)
        out = {"mode": "uniform"}
    else:
        psi = ss.psi1
        theta_d = an.design_theta_critical(ss, gamma_v)
        out = {"mode": "critical", "omega": ss.omega, "critical": _nodes(ss.critical)}
    out.update(
        {
            "gamma_v": float(gamma_v),
            "mu": ss.mu,
            "psi_inf": float(np.max(np.abs(psi))),
            "mvdr_at_theta_1": float(np.max(np.abs(psi))) / ss.mu,
            "theta_d": theta_d,
        }
    )
    return out


def omega_range_report(spec, theta):
    if spec.mode != "critical":
        raise AssumptionViolation("omega-range needs a scenario in critical mode")
    ss = _steady(spec)
    rng = an.omega_range(ss, theta)
    return {
        "mode": "critical",
        "theta": float(theta),
        "critical": _nodes(ss.critical),
        "omega_min": rng.lower,
        "binding_node": rng.binding_node + 1,
        "zeta": _f(rng.zeta),
        "nu": _f(rng.nu),
        "monotone_condition": rng.monotone_condition,
        "critical_sum_increasing": rng.critical_sum_increasing,
    }


def analyze_report(spec, gamma_v=None, thetas=None, omegas=None):
    m = spec.model
    thetas = [spec.theta] if not thetas else list(thetas)
    omegas = [spec.omega] if not omegas else list(omegas)
    cc = an.conflict_check(m.net, m.ratings)
    out = {
        "name": spec.name,
        "mode": spec.mode,
        "rated_voltage": m.v_rat,
        "conflict": {"compatible": cc.compatible, "ratios": [float(r) if np.isfinite(r) else None for r in cc.ratios]},
    }
    if spec.mode == "uniform":
        ss = an.uniform_steady(m.net, m.ratings)
        out.update(
            {
                "mu": ss.mu,
                "psi": _f(ss.psi),
                "psi_inf": float(np.max(np.abs(ss.psi))),
                "endpoints": {
                    "delta_v_theta1": _f(an.uniform_delta_v(ss, 1.0)),
                    "delta_v_theta0": _f(an.uniform_delta_v(ss, 0.0)),
                    "delta_i_theta0": _f(an.uniform_delta_i(ss, 0.0)),
                    "delta_i_theta1": _f(an.uniform_delta_i(ss, 1.0)),
                },
            }
        )
        if gamma_v is not None:
            out["theta_d"] = an.design_theta_uniform(ss, gamma_v)
        grid = []
        for th in thetas:
            v, i, alpha = an.uniform_solution(ss, th)
            rep = an.deviations(v, i, m.ratings.current_capacity, m.v_rat)
            grid.append(_point(th, 1.0, v, i, alpha, rep, m))
        out["grid"] = grid
        return out

    pa = partitioned_admittance(m.net, m.partition)
    per_omega = []
    grid = []
    for om in omegas:
        ss = an.critical_steady(pa, m.ratings, om)
        entry = {
            "omega": ss.omega,
            "mu": ss.mu,
            "psi1": _f(ss.psi1),
            "psi1_inf": float(np.max(np.abs(ss.psi1))),
            "i_b1": _f(ss.i_b1),
            "endpoints": {
                "delta_v1_theta1": _f(an.critical_delta_v(ss, 1.0)),
                "delta_i1_theta0": _f(an.critical_delta_i(ss, 0.0)),
            },
        }
        if gamma_v is not None:
            entry["theta_d"] = an.design_theta_critical(ss, gamma_v)
        ranges = []
        for th in thetas:
            if th < 1.0:
                try:
                    r = an.omega_range(ss, th)
                    ranges.append(
                        {
                            "theta": th,
                            "omega_min": r.lower,
                            "binding_node": r.binding_node + 1,
                            "monotone_condition": r.monotone_condition,
                        }
                    )
                except MicrogridError as exc:
                    ranges.append({"theta": th, "error": str(exc)})
        entry["omega_ranges"] = ranges
        per_omega.append(entry)
        for th in thetas:
            v, i, alpha = an.critical_solution(ss, th)
            rep = an.deviations(v, i, m.ratings.current_capacity, m.v_rat)
            pt = _point(th, om, v, i, alpha, rep, m)
            crit = ss.critical
            ordn = ss.ordinary
            pt["critical_mvdr"] = float(np.max(np.abs(rep.delta_v[crit])))
            pt["ordinary_mcdr"] = (
                an.deviations(v, i, m.ratings.current_capacity, m.v_rat, buses=ordn, dgs=ordn).mcdr if ordn.size else 0.0
            )
            grid.append(pt)
    out.update({"critical": _nodes(pa.critical), "omegas": per_omega, "grid": grid})
    return out


def _point(theta, omega, v, i, alpha, rep, m):
    return {
        "theta": float(theta),
        "omega": float(omega),
        "alpha": float(alpha),
        "v": _f(v),
        "i_pu": _f(i / m.ratings.current_capacity),
        "mvdr": rep.mvdr,
        "mcdr": rep.mcdr,
    }


# -- rendering ----------------------------------------------------------------------


def _row(label, values, fmt="{:9.4f}"):
    return f"  {label:<14}" + " ".join(fmt.format(v) for v in values)


def render_text(kind, rep):
    lines = []
    if kind == "analyze":
        lines.append(f"scenario {rep['name'] or '-'}  mode {rep['mode']}  V_rat {rep['rated_voltage']:g} V")
        cc = rep["conflict"]
        lines.append(f"sharing and voltage consensus compatible: {'yes' if cc['compatible'] else 'no'}")
        if rep["mode"] == "uniform":
            lines.append(f"mu {rep['mu']:.6f}   |Psi|_inf {rep['psi_inf']:.6f}")
            if "theta_d" in rep:
                lines.append(f"theta_d {rep['theta_d']:.6f}")
            for k, v in rep["endpoints"].items():
                lines.append(_row(k, v))
        else:
            lines.append(f"critical nodes {rep['critical']}")
            for e in rep["omegas"]:
                lines.append(f"omega {e['omega']:g}: mu {e['mu']:.6f}   |Psi1|_inf {e['psi1_inf']:.6f}")
                if "theta_d" in e:
                    lines.append(f"  theta_d {e['theta_d']:.6f}")
                for k, v in e["endpoints"].items():
                    lines.append(_row(k, v))
                for r in e["omega_ranges"]:
                    if "error" in r:
                        lines.append(f"  theta {r['theta']:g}: {r['error']}")
                    else:
                        lines.append(
                            f"  theta {r['theta']:g}: omega_min {r['omega_min']:.6f} (node {r['binding_node']}),"
                            f" condition {r['monotone_condition']:.4g}"
                        )
        for p in rep["grid"]:
            lines.append(f"theta {p['theta']:g} omega {p['omega']:g}: alpha {p['alpha']:.6f} mvdr {p['mvdr']:.6f} mcdr {p['mcdr']:.6f}")
            lines.append(_row("V [V]", p["v"], "{:9.3f}"))
            lines.append(_row("I_pu", p["i_pu"]))
    elif kind == "design-theta":
        extra = f" omega {rep['omega']:g}" if rep["mode"] == "critical" else ""
        lines.append(f"mode {rep['mode']}{extra} gamma_v {rep['gamma_v']:g}")
        lines.append(f"mu {rep['mu']:.6f}  |Psi|_inf {rep['psi_inf']:.6f}  mvdr(theta=1) {rep['mvdr_at_theta_1']:.6f}")
        lines.append(f"theta_d {rep['theta_d']:.6f}")
    elif kind == "omega-range":
        lines.append(f"theta {rep['theta']:g}  critical nodes {rep['critical']}")
        lines.append(_row("zeta", rep["zeta"]))
        lines.append(_row("nu", rep["nu"]))
        lines.append(f"omega_min {rep['omega_min']:.6f} (binding node {rep['binding_node']})")
        lines.append(
            f"monotone condition {rep['monotone_condition']:.6g}"
            f" ({'critical total rises with omega' if rep['critical_sum_increasing'] else 'not guaranteed'})"
        )
    elif kind == "simulate":
        lines.append(f"scenario {rep['name'] or '-'}: {len(rep['phases'])} phases")
        for k, p in enumerate(rep["phases"], 1):
            flag = "settled" if p["settled"] else "NOT settled"
            lines.append(
                f"phase {k} [{p['start']:g}, {p['end']:g}] s  theta {p['theta']:g} omega {p['omega']:g}"
                f"  mvdr {p['all']['mvdr']:.5f} mcdr {p['all']['mcdr']:.5f}"
                f"  crit mvdr {p['critical']['mvdr']:.5f} ord mcdr {p['ordinary']['mcdr']:.2e}"
                f"  {flag} (rate {p['max_rate']:.2e}/s)"
            )
            lines.append(_row("V [V]", p["v"], "{:9.3f}"))
            lines.append(_row("I_pu", p["i_pu"]))
        if rep.get("out"):
            lines.append(f"wrote {rep['out']}")
    return "\n".join(lines)


def emit(kind, rep, fmt):
    if fmt == "json":
        print(json.dumps(rep, indent=2))
    else:
        print(render_text(kind, rep))


# -- commands -----------------------------------------------------------------------


def _gamma(args, spec):
    g = args.gamma_v if args.gamma_v is not None else spec.gamma_v
    if g is None:
        raise ModelValidationError("no gamma_v given on the command line or in the scenario")
    return g


def cmd_analyze(args, spec):
    g = args.gamma_v if args.gamma_v is not None else spec.gamma_v
    rep = analyze_report(spec, g, args.theta, args.omega)
    emit("analyze", rep, args.format)
    return EXIT_OK


def cmd_design_theta(args, spec):
    omega = args.omega[0] if args.omega else None
    emit("design-theta", design_theta_report(spec, _gamma(args, spec), omega), args.format)
    return EXIT_OK


def cmd_omega_range(args, spec):
    theta = args.theta[0] if args.theta else spec.theta
    emit("omega-range", omega_range_report(spec, theta), args.format)
    return EXIT_OK


def cmd_simulate(args, spec):
    if args.dt is not None:
        spec = replace(spec, dt=args.dt)
    trace = run(spec)
    rep = {"name": spec.name, "phases": [p.as_dict() for p in trace.phases]}
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        trace.write_csv(out / "trace.csv")
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(rep, fh, indent=2)
        rep["out"] = str(out)
    emit("simulate", rep, args.format)
    return EXIT_OK if all(p.settled for p in trace.phases) else EXIT_RUNTIME


COMMANDS = {
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "design-theta": cmd_design_theta,
    "omega-range": cmd_omega_range,
}


def build_parser():
    p = argparse.ArgumentParser(prog="dcmg", description="DC microgrid compromised-control analysis and simulation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--scenario", required=True, help="path to a .scenario file")
        s.add_argument("--gamma-v", type=float, help="admissible maximum voltage deviation ratio")
        s.add_argument("--theta", type=float, nargs="+", help="trade-off factor(s)")
        s.add_argument("--omega", type=float, nargs="+", help="ordinary-current knob value(s)")
        s.add_argument("--out", help="output directory for trace.csv and summary.json")
        s.add_argument("--dt", type=float, help="integrator step in seconds")
        s.add_argument("--format", choices=["text", "json"], default="text")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        spec = parse_scenario(args.scenario)
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ScenarioSchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ModelValidationError, ValueError) as exc:
        print(f"invalid model ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_MODEL
    try:
        return COMMANDS[args.command](args, spec)
    except (ModelValidationError, AssumptionViolation, DegenerateLoadProfile, ValueError) as exc:
        print(f"invalid model ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_MODEL
    except MicrogridError as exc:
        print(f"runtime error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
