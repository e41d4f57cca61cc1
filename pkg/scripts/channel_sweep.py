#!/usr/bin/env python3
"""Empirical delivery rate vs distance against the analytic loss curve.

Monte Carlo per distance bin; prints a table and, with --plot, writes
channel_sweep.png.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from auvc2.channel import AcousticChannel, ChannelParams, delivery_probability
from auvc2.geo import EnuPoint


def empirical_rate(d_m: float, n: int, seed: int) -> float:
    ch = AcousticChannel(ChannelParams(), seed=seed)
    ch.register(1, EnuPoint(0, 0))
    ch.register(2, EnuPoint(d_m, 0))
    t = 0
    for _ in range(n):
        ch.transmit(b"\xa5\x01\x00\xff" + bytes(6), 1, now_ms=t)
        t += 200
    return len(ch.poll_deliveries(t + 100_000)) / n


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--trials", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--plot", action="store_true")
    args = parser.parse_args()

    params = ChannelParams()
    distances = list(range(0, 3751, 250))
    rows = []
    print(f"{'d [m]':>7} {'analytic':>9} {'empirical':>10}   (n={args.trials})")
    for d in distances:
        analytic = delivery_probability(d, params)
        empirical = empirical_rate(d, args.trials, args.seed)
        rows.append((d, analytic, empirical))
        print(f"{d:>7} {analytic:>9.4f} {empirical:>10.4f}")

    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        d, analytic, empirical = zip(*rows)
        plt.figure(figsize=(6, 4))
        plt.plot(d, analytic, label="analytic")
        plt.plot(d, empirical, "o", label="empirical")
        plt.xlabel("distance [m]")
        plt.ylabel("delivery probability")
        plt.axvline(params.max_range_m, color="grey", linestyle=":")
        plt.legend()
        plt.tight_layout()
        plt.savefig("channel_sweep.png", dpi=120)
        print("wrote channel_sweep.png")


if __name__ == "__main__":
    main()
