#!/usr/bin/env python3
"""Writes a fleet scenario: N Class A OTAA devices around two gateways, one uplink per period."""
import argparse
import json
import math
import random

# Range limits (m) for sf7..sf12 under the default path loss, with about 3 dB of margin.
SF_RANGE = [(7, 80), (8, 115), (9, 160), (10, 225), (11, 290), (12, 385)]


def pick_sf(distance):
    for sf, limit in SF_RANGE:
        if distance <= limit:
            return sf
    raise ValueError(f"{distance:.0f} m is out of range")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--devices", type=int, default=100)
    ap.add_argument("--hours", type=float, default=24)
    ap.add_argument("--period", type=float, default=3600)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("out")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    gateways = [{"id": "gw-west", "location": [-150, 0]}, {"id": "gw-east", "location": [150, 0]}]
    devices = []
    for i in range(args.devices):
        gw = gateways[i % 2]["location"]
        r = 20 + 360 * math.sqrt(rng.random())
        a = rng.uniform(0, 2 * math.pi)
        x, y = round(gw[0] + r * math.cos(a), 1), round(gw[1] + r * math.sin(a), 1)
        nearest = min(math.dist((x, y), g["location"]) for g in gateways)
        devices.append({
            "id": f"node-{i:03d}",
            "location": [x, y],
            "dev_eui": f"{0x70B3D57ED0000000 + i:016x}",
            "app_key": f"{rng.getrandbits(128):032x}",
            "start_s": round(rng.uniform(0, 600), 3),
            "sf": pick_sf(nearest),
            "traffic": {"period_s": args.period, "fport": 2, "payload_hex": "00" * 12, "jitter_s": args.period},
        })
    scenario = {
        "version": 1,
        "seed": args.seed,
        "length_s": args.hours * 3600,
        "gateways": gateways,
        "devices": devices,
    }
    with open(args.out, "w") as f:
        json.dump(scenario, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
