"""Run the EXP3 and explore-then-commit experiments and print their reports."""

import argparse
import json
import pathlib

from robust_auction.config import parse_config
from robust_auction.simulator import run_experiment

HERE = pathlib.Path(__file__).parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=int, help="override the horizon (default from the config files)")
    ap.add_argument("--reps", type=int)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    for name in ("exp3", "etc"):
        doc = json.loads((HERE / f"{name}.json").read_text())
        doc["seed"] = args.seed
        if args.T:
            doc["T"] = args.T
        if args.reps:
            doc["reps"] = args.reps
        rep = run_experiment(parse_config(doc)).to_dict()
        rep.pop("revenues", None)
        print(json.dumps({name: rep}, indent=2))


if __name__ == "__main__":
    main()
