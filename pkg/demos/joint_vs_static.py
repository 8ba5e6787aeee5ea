"""Run the desk-scale study end to end and print the metric table.

Drives the same command pipeline as the CLI: phantom -> simulate ->
reconstruct (both methods) -> metrics. With --fast the iteration budget
drops so the whole thing finishes in well under a minute; expect smaller
margins then.
"""

import argparse
import json
import os

from tomoflow.cli import main as tomoflow_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_out/desk")
    ap.add_argument("--fast", action="store_true", help="30 outer iterations instead of 200")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    here = os.path.dirname(os.path.abspath(__file__))
    cfg = json.load(open(os.path.join(here, "..", "configs", "desk_star.json")))
    cfg["out_dir"] = args.out
    if args.fast:
        cfg["solver"]["K"] = 30
    cfg_path = os.path.join(args.out, "config.json")
    json.dump(cfg, open(cfg_path, "w"), indent=2)

    for argv in (
        ["phantom"],
        ["simulate"],
        ["reconstruct", "--method", "joint"],
        ["reconstruct", "--method", "static-tv"],
        ["metrics"],
    ):
        rc = tomoflow_main([*argv, "--config", cfg_path])
        if rc != 0:
            raise SystemExit(rc)
    print(f"artifacts under {args.out} (PNGs in joint/ and static_tv/)")


if __name__ == "__main__":
    main()
