#!/usr/bin/env python3
"""Battery endurance vs commanded speed under the hotel + propeller model."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from auvc2.sim import VehicleSpec, VehicleKind


def main():
    spec = VehicleSpec(1, "auv", VehicleKind.AUV, max_speed_kn=4.0, cruise_speed_kn=2.5)
    h0 = spec.hotel_load_pct_per_h
    h1 = spec.prop_load_pct_per_h_per_kn3
    print(f"h0={h0} %/h  h1={h1} %/h/kn^3")
    print(f"{'speed [kn]':>10} {'drain [%/h]':>12} {'endurance [h]':>14} {'range [km]':>11}")
    for tenths in range(10, 41, 5):
        v = tenths / 10.0
        drain = h0 + h1 * v**3
        endurance_h = 100.0 / drain
        range_km = v * 0.5144 * 3600.0 * endurance_h / 1000.0
        print(f"{v:>10.1f} {drain:>12.2f} {endurance_h:>14.2f} {range_km:>11.1f}")


if __name__ == "__main__":
    main()
