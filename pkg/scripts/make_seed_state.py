"""Regenerate the shipped 3x3 rank-(4,4) state used as the base of the
rank-raising constructions."""
import argparse
from pathlib import Path

from pptrank.hilbert import BipartiteDims
from pptrank.search import RankTarget, SearchConfig, search
from pptrank.state import save_state

OUT = Path(__file__).resolve().parents[1] / "src" / "pptrank" / "data" / "seed_3x3_rank44.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    out = search(BipartiteDims(3, 3), RankTarget(4, 4), SearchConfig(seed=args.seed))
    if not out.converged or out.achieved != (4, 4):
        raise SystemExit(f"search failed: {out.status}")
    save_state(out.state, args.out)
    print(f"wrote {args.out}: ranks={out.achieved} local={out.state.local_ranks} "
          f"residual={out.state.residual:.2e}")


if __name__ == "__main__":
    main()
