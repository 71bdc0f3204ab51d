"""Write synthetic I-vi-ii-V lead sheets as leadsheet-v1 JSON files (input for `cmhrnn ingest`)."""

import argparse
import json
from pathlib import Path

from cmhrnn.codec import to_document
from cmhrnn.synthetic import synthetic_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out_dir")
    ap.add_argument("-n", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--bars", type=int, default=8)
    args = ap.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for ls in synthetic_corpus(args.n, seed=args.seed, n_bars=args.bars):
        (out / f"{ls.title}.json").write_text(json.dumps(to_document(ls), indent=1) + "\n")
    print(f"wrote {args.n} lead sheets to {out}")


if __name__ == "__main__":
    main()
