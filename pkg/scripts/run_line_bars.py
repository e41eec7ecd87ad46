"""Line -> three bars: share of output points on the middle bar, with and without the disambiguating protrusion."""

import argparse
import json

from p2pnet.experiments import line_bars_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--json", help="write scores here")
    args = ap.parse_args()
    out = {}
    for protrusion in (False, True):
        res = line_bars_study(protrusion, seed=args.seed, epochs=args.epochs, n_train=args.pairs)
        print(f"protrusion={protrusion} {res.record()}", flush=True)
        out[f"protrusion={protrusion}"] = res.scores | {"seconds": res.seconds}
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(out, fh, indent=2)


if __name__ == "__main__":
    main()
