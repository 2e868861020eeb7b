"""Slowest closed-loop mode for several communication graphs on the 7-bus case.

The bundled scenarios use the complete graph. A ring leaves time constants
above 10 s, which cannot settle inside 5 s phases.
"""
import itertools
from dataclasses import replace
from pathlib import Path

import numpy as np

from dcmg.control import Controller
from dcmg.model import Event
from dcmg.scenario import parse_scenario
from dcmg.sim import affine_field
from dcmg.topology import CommGraph

ROOT = Path(__file__).resolve().parents[1]


def slowest(model, mode, theta, omega, unplug=None):
    ctrl = Controller(model, mode)
    v0 = np.full(model.n, model.v_rat)
    st = ctrl.initial_state(v0, theta, omega)
    if unplug is not None:
        st = ctrl.apply_event(st, Event("unplug_dg", unplug), v0)
    a, _ = affine_field(model.net, ctrl, st)
    ev = np.linalg.eigvals(a)
    return float(ev[np.abs(ev) > 1e-7].real.max())


def main():
    base = parse_scenario(ROOT / "scenarios" / "case2.scenario").model
    n = base.n
    graphs = {
        "ring": [(k, (k + 1) % n) for k in range(n)],
        "ring + 2-hop chords": [(k, (k + 1) % n) for k in range(n)] + [(k, (k + 2) % n) for k in range(n)],
        "complete": list(itertools.combinations(range(n), 2)),
    }
    print(f"{'graph':<22} {'uni th=1':>9} {'uni th=0':>9} {'crit .63':>9} {'crit, DG6 out':>14}")
    for name, edges in graphs.items():
        m = replace(base, graph=CommGraph.from_edges(n, [(i, j, 20.0) for i, j in edges]))
        row = [
            slowest(m, "uniform", 1.0, 1.0),
            slowest(m, "uniform", 0.0, 1.0),
            slowest(m, "critical", 0.63, 2.0),
            slowest(m, "critical", 0.0, 2.0, unplug=5),
        ]
        print(f"{name:<22} " + " ".join(f"{x:9.3f}" for x in row[:3]) + f" {row[3]:14.3f}")


if __name__ == "__main__":
    main()
