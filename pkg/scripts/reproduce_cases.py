"""Run the three bundled scenarios and print per-phase steady-state summaries.

    python scripts/reproduce_cases.py [--out results/]
"""
import argparse
import json
from pathlib import Path

from dcmg.scenario import parse_scenario
from dcmg.sim import run

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=None, help="write trace.csv/summary.json per case here")
    args = ap.parse_args()
    for case in ("case1", "case2", "case3"):
        spec = parse_scenario(ROOT / "scenarios" / f"{case}.scenario")
        trace = run(spec)
        print(f"== {case}")
        for k, p in enumerate(trace.phases, 1):
            print(
                f"  phase {k} [{p.start:4.1f},{p.end:4.1f}] theta={p.theta:<5g} omega={p.omega:<4g}"
                f" mvdr={p.report.mvdr:.4f} mcdr={p.report.mcdr:.4f}"
                f" crit_mvdr={p.critical_report.mvdr:.4f} ord_mcdr={p.ordinary_report.mcdr:.1e}"
                f" settled={p.settled}"
            )
            print("    V   =", " ".join(f"{v:7.2f}" for v in p.v))
            print("    Ipu =", " ".join(f"{v:7.4f}" for v in p.i_pu))
        if args.out:
            d = args.out / case
            d.mkdir(parents=True, exist_ok=True)
            trace.write_csv(d / "trace.csv")
            (d / "summary.json").write_text(json.dumps([p.as_dict() for p in trace.phases], indent=2))


if __name__ == "__main__":
    main()
