#!/usr/bin/env python3
"""Run the bundled trial scenario and print a one-screen summary."""

import collections
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from auvc2.runner import run_scenario
from auvc2.scenario import parse_scenario


def main():
    scenario_path = sys.argv[1] if len(sys.argv) > 1 else "scenarios/trial.json"
    scenario = parse_scenario(scenario_path)
    t0 = time.monotonic()
    result = run_scenario(scenario, mode="all", relay_listen=("127.0.0.1", 0))
    wall = time.monotonic() - t0

    kinds = collections.Counter(r["kind"] for r in result.records)
    drops = collections.Counter(r["cause"] for r in result.records if r["kind"] == "drop")
    sims = [r for r in result.records if r["kind"] == "sim"]
    end_t = result.records[-1]["t_ms"] / 1000.0 if result.records else 0.0

    print(f"scenario: {scenario_path} (seed {scenario.seed})")
    print(f"simulated {end_t:.0f} s in {wall:.2f} s wall clock")
    print(f"records: {dict(kinds)}")
    print(f"drops by cause: {dict(drops) or 'none'}")
    print("sim events:")
    for r in sims:
        obj = f" objective={r['objective_id']}" if r["objective_id"] else ""
        detail = f" ({r['detail']})" if r["detail"] else ""
        print(f"  t={r['t_ms']/1000:8.1f}s  {r['event']:<20} vehicle={r['vehicle_id']}{obj}{detail}")
    print("notifications:")
    for r in result.records:
        if r["kind"] == "notification" and not r["update"]:
            print(f"  t={r['t_ms']/1000:8.1f}s  [{r['severity']}] {r['text']}")


if __name__ == "__main__":
    main()
