"""Command line: search, classify, scan, chart, construct.

Flags may also come from a ``key=value`` file given with ``--config``
(keys are flag names without the dashes); explicit flags win. ``PPT_SEED``
sets the default seed.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .hilbert import BipartiteDims

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_EXHAUSTED = 2
EXIT_NOT_PPT = 3


class UsageError(Exception):
    pass


def _ranks(text: str) -> tuple[int, int]:
    try:
        m, n = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"ranks must look like 4,4, got {text!r}") from None
    return m, n


def _dims(text: str) -> BipartiteDims:
    try:
        return BipartiteDims.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def default_seed() -> int:
    v = os.environ.get("PPT_SEED")
    return int(v) if v not in (None, "") else 0


def read_config(path) -> dict:
    out = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line without '=': {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _search_flags(p):
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pptrank", description="PPT states of prescribed ranks")
    ap.add_argument("--config", help="key=value file with default flag values")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="find a PPT state of ranks at most (m, n)")
    p.add_argument("--dims", type=_dims, default=None)
    p.add_argument("--ranks", type=_ranks, default=None)
    _search_flags(p)
    p.add_argument("--out", default=None)

    p = sub.add_parser("classify", help="face dimension, product vectors, separability")
    p.add_argument("file")
    p.add_argument("--pv-budget", type=int, default=None)
    p.add_argument("--pair-budget", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("scan", help="search and classify every (m, n)")
    p.add_argument("--dims", type=_dims, default=None)
    _search_flags(p)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("chart", help="draw a rank diagram from a scan table")
    p.add_argument("table")
    p.add_argument("--dims", type=_dims, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("construct", help="separable mixtures and rank-raising extensions")
    p.add_argument("kind", choices=["separable", "hlvc"])
    p.add_argument("--dims", type=_dims, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--mixing", type=float, default=None)
    p.add_argument("--orthogonal", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    return ap


_CONVERTERS = {
    "dims": _dims, "ranks": _ranks, "seed": int, "restarts": int, "max_iter": int,
    "tol": float, "jobs": int, "pv_budget": int, "pair_budget": int, "k": int,
    "levels": int, "mixing": float, "out": str,
}


def merge_config(args, config: dict):
    """Fill flags left at None from the config file."""
    for key, raw in config.items():
        if not hasattr(args, key) or getattr(args, key) is not None:
            continue
        conv = _CONVERTERS.get(key, str)
        try:
            setattr(args, key, conv(raw))
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad config value {key}={raw!r}: {exc}") from None
    return args


def _search_config(args, **defaults):
    from .search import SearchConfig

    kw = dict(defaults)
    if args.seed is not None:
        kw["seed"] = args.seed
    else:
        kw.setdefault("seed", default_seed())
    if args.restarts is not None:
        kw["restarts"] = args.restarts
    if args.max_iter is not None:
        kw["max_iterations"] = args.max_iter
    if args.tol is not None:
        kw["residual_tol"] = args.tol
    try:
        return SearchConfig(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_search(args) -> int:
    from .search import RankTarget, search
    from .state import save_state

    if args.dims is None or args.ranks is None:
        raise UsageError("search needs --dims and --ranks")
    target = RankTarget(*args.ranks)
    try:
        target.validate(args.dims)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cfg = _search_config(args)
    out = search(args.dims, target, cfg)
    if not out.converged:
        print(f"no convergence after {cfg.restarts} restarts (last: {out.status})")
        return EXIT_EXHAUSTED
    st = out.state
    if args.out:
        save_state(st, args.out)
    print(f"ranks=({st.ranks[0]},{st.ranks[1]}) residual={st.residual:.3e} "
          f"iters={st.iterations_used} seed={st.seed} local_ranks=({st.local_ranks[0]},{st.local_ranks[1]})")
    return EXIT_OK


def cmd_classify(args) -> int:
    from .separability import ClassifyConfig, classify_state
    from .state import NotPPTError, load_state

    try:
        st = load_state(args.file)
    except NotPPTError as exc:
        print(f"not PPT: min eig(rho) = {exc.min_eig_rho:.3e}, "
              f"min eig(rho^P) = {exc.min_eig_pt:.3e}", file=sys.stderr)
        return EXIT_NOT_PPT
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read state file {args.file}: {exc}") from None
    seed = args.seed if args.seed is not None else default_seed()
    cl = classify_state(st, ClassifyConfig(args.pv_budget, args.pair_budget, seed))
    print(json.dumps(cl.to_dict()))
    return EXIT_OK


def cmd_scan(args) -> int:
    from .separability import ClassifyConfig
    from .tables import survey

    if args.dims is None or args.out is None:
        raise UsageError("scan needs --dims and --out")
    cfg = _search_config(args, restarts=10)
    prefix = Path(args.out)
    journal = prefix.with_name(prefix.name + ".journal.jsonl")

    def progress(res):
        logging.getLogger("pptrank.scan").info(
            "target %s: %d/%d converged, %d exact", res.target, res.converged, res.attempts, res.exact)

    table = survey(args.dims, cfg=cfg, ccfg=ClassifyConfig(seed=cfg.seed), jobs=args.jobs or 1,
                   journal=journal, progress=progress)
    csv_path, json_path = table.write(prefix)
    found = sum(t.found for t in table.targets)
    print(f"{len(table.rows)} rows, {found}/{len(table.targets)} targets found; "
          f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_chart(args) -> int:
    from .charts import RankDiagram, render_svg, render_text
    from .tables import SurveyTable

    try:
        table = SurveyTable.read(args.table)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read table {args.table}: {exc}") from None
    if args.dims is not None and args.dims != table.dims:
        raise UsageError(f"table is for {table.dims}, not {args.dims}")
    try:
        diagram = RankDiagram.from_table(table)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = args.out or "-"
    if out.endswith(".svg"):
        render_svg(diagram, out)
    else:
        text = render_text(diagram)
        if out == "-":
            sys.stdout.write(text)
            return EXIT_OK
        Path(out).write_text(text, encoding="utf-8")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_construct(args) -> int:
    from .constructions import hlvc_chain, load_seed_state, separable_mixture
    from .state import save_state

    seed = args.seed if args.seed is not None else default_seed()
    try:
        if args.kind == "separable":
            if args.dims is None or args.k is None:
                raise UsageError("construct separable needs --dims and --k")
            c = separable_mixture(args.dims, args.k, seed)
        else:
            levels = args.levels if args.levels is not None else 1
            x = args.mixing if args.mixing is not None else 0.5
            c = hlvc_chain(load_seed_state(), levels, [x] * levels, seed, args.orthogonal)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.out:
        save_state(c.state, args.out)
    st = c.state
    print(f"ranks=({st.ranks[0]},{st.ranks[1]}) local_ranks=({st.local_ranks[0]},{st.local_ranks[1]}) "
          f"recipe={json.dumps(c.recipe.to_dict())}")
    return EXIT_OK


COMMANDS = {"search": cmd_search, "classify": cmd_classify, "scan": cmd_scan,
            "chart": cmd_chart, "construct": cmd_construct}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad usage; invalid input is 1 here
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        if args.config:
            merge_config(args, read_config(args.config))
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
