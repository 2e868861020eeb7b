"""Compare the implemented readings against the alternatives they replace.

Prints the key steady-state numbers under
  * the implemented model (Y = B R^-1 B^T, re-derived critical theta_d),
  * the literal admittance Y = B R B^T,
  * the literal critical theta_d formula,
  * lines laid out as a plain ring 1-2-...-7-1 in listed order.
Reported targets: 0.061, 23.3 V, 0.277, [0.358, 0.671], 0.63, 1.71.
"""
from dataclasses import replace
from pathlib import Path

import numpy as np

from dcmg import analysis as an
from dcmg.errors import MicrogridError
from dcmg.plant import ElectricalNetwork, partitioned_admittance
from dcmg.scenario import parse_scenario

ROOT = Path(__file__).resolve().parents[1]


def numbers(net, ratings, partition, literal_theta=False):
    out = {}
    try:
        ss = an.uniform_steady(net, ratings)
        dv = an.uniform_delta_v(ss, 1.0)
        out["mvdr(1)"] = np.max(np.abs(dv))
        out["380|dV3|"] = 380 * abs(dv[2])
        out["theta_d(.03)"] = an.design_theta_uniform(ss, 0.03)
        out["mcdr(0)"] = np.max(np.abs(an.uniform_delta_i(ss, 0.0)))
        out["mcdr(.277)"] = np.max(np.abs(an.uniform_delta_i(ss, 0.277)))
        css = an.critical_steady(partitioned_admittance(net, partition), ratings, 2.0)
        f = an.design_theta_critical_literal if literal_theta else an.design_theta_critical
        out["theta_d1(.02)"] = f(css, 0.02)
        out["omega_min(0)"] = an.omega_range(css, 0.0).lower
    except MicrogridError as exc:
        out["error"] = str(exc)
    return out


def main():
    spec = parse_scenario(ROOT / "scenarios" / "case2.scenario")
    m = spec.model
    net = m.net
    literal_y = replace(net, line_resistance=1.0 / net.line_resistance)
    ring = ElectricalNetwork.from_lines(
        7,
        [(k, (k + 1) % 7, net.line_resistance[k], net.line_inductance[k]) for k in range(7)],
        net.load_conductance,
        net.filter_inductance,
        net.filter_capacitance,
    )
    rows = {
        "implemented": numbers(net, m.ratings, m.partition),
        "Y = B R B^T": numbers(literal_y, m.ratings, m.partition),
        "literal theta_d": numbers(net, m.ratings, m.partition, literal_theta=True),
        "ring line layout": numbers(ring, m.ratings, m.partition),
    }
    keys = ["mvdr(1)", "380|dV3|", "theta_d(.03)", "mcdr(0)", "mcdr(.277)", "theta_d1(.02)", "omega_min(0)"]
    print(f"{'reading':<18}" + "".join(f"{k:>14}" for k in keys))
    print(f"{'target':<18}" + "".join(f"{v:>14}" for v in ["0.061", "23.3", "0.277", "0.671", "0.358", "0.63", "1.71"]))
    for name, r in rows.items():
        if "error" in r:
            print(f"{name:<18} error: {r['error']}")
        else:
            print(f"{name:<18}" + "".join(f"{r[k]:14.4f}" for k in keys))


if __name__ == "__main__":
    main()
