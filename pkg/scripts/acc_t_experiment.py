"""Validation bar-head cross entropy with and without accumulated-time input, over several seeds."""

import argparse
import json

from cmhrnn.experiments import acc_time_effect


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fragments", type=int, default=100)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--epochs", type=int, default=8)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args()
    r = acc_time_effect(args.fragments, args.seeds, args.epochs, args.hidden)
    print("seed\tbar_ce_acc_on\tbar_ce_acc_off")
    for s, a, b in zip(r.seeds, r.bar_ce_on, r.bar_ce_off):
        print(f"{s}\t{a:.4f}\t{b:.4f}")
    print(f"acc_t lower on every seed: {r.passed} ({r.seconds:.1f}s)")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"seeds": r.seeds, "on": [float(x) for x in r.bar_ce_on],
                       "off": [float(x) for x in r.bar_ce_off]}, fh, indent=1)


if __name__ == "__main__":
    main()
