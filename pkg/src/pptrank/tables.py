"""Rank surveys: search every (m, n), classify what is found, tabulate.

Every converged state gets the cheap part of its classification (ranks,
local ranks, face dimension). The product-vector censuses only run for the
first state of each cheap signature, and the separability verdict for up
to ``verdict_samples`` of them; a table row aggregates the verdicts seen.
States with m < n are recorded through their partial transpose, so rows
always have m >= n.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .faces import RankAmbiguityError, analyze_face
from .hilbert import BipartiteDims, build_basis
from .search import RankTarget, SearchConfig, search_once
from .separability import ClassifyConfig, classify_state, separability_verdict
from .state import PptState, certify, matrix_from_pairs, state_to_dict

log = logging.getLogger(__name__)

CSV_COLUMNS = ["ranks", "bound", "dimF", "local_ranks", "pv_im", "pv_ker", "verdict", "states"]


def all_targets(dims: BipartiteDims) -> list[RankTarget]:
    """Every ``N >= m >= n >= 1``, in scan order (descending m+n, then m)."""
    n = dims.n
    ts = [RankTarget(a, b) for a in range(1, n + 1) for b in range(1, a + 1)]
    return sorted(ts, key=lambda t: (t.m + t.n, t.m), reverse=True)


def restart_seed(base: int, target: RankTarget, r: int) -> int:
    return int(np.random.SeedSequence([base, target.m, target.n, r]).generate_state(1)[0])


def oriented(state: PptState) -> PptState:
    """The state itself if m >= n, else its partial transpose."""
    m, n = state.ranks
    if m >= n:
        return state
    return certify(state.rho_pt, state.dims, seed=state.seed,
                   iterations_used=state.iterations_used, residual=state.residual,
                   target_ranks=state.target_ranks)


@dataclass
class TargetResult:
    target: tuple[int, int]
    attempts: int
    converged: int
    exact: int
    achieved: dict  # "(m,n)" -> count
    keys: list  # cheap signatures seen, as lists
    elapsed_iterations: int = 0

    @property
    def found(self) -> bool:
        return self.exact > 0


def _key(state: PptState, dim_f: int) -> tuple:
    return (tuple(state.ranks), tuple(state.local_ranks), dim_f)


def run_target(dims: BipartiteDims, target: RankTarget, cfg: SearchConfig, keep: int = 3):
    """Restarts for one target. Returns the result and up to ``keep`` states
    (as JSON dicts) per cheap signature."""
    basis = build_basis(dims)
    achieved = Counter()
    samples: dict[tuple, list] = {}
    conv = exact = iters = 0
    for r in range(cfg.restarts):
        out = search_once(dims, target, cfg, seed=restart_seed(cfg.seed, target, r), basis=basis)
        iters += out.iterations
        if not out.converged:
            continue
        conv += 1
        exact += out.achieved == (target.m, target.n)
        st = oriented(out.state)
        try:
            face = analyze_face(st, basis)
        except RankAmbiguityError as exc:
            log.debug("skipping ambiguous state: %s", exc)
            continue
        achieved[str(st.ranks)] += 1
        slot = samples.setdefault(_key(st, face.dim_f), {"count": 0, "states": []})
        slot["count"] += 1
        if len(slot["states"]) < keep:
            slot["states"].append(state_to_dict(st))
    res = TargetResult((target.m, target.n), cfg.restarts, conv, exact, dict(achieved),
                       [list(map(list, k[:2])) + [k[2]] for k in samples], iters)
    return res, samples


@dataclass
class TableRow:
    ranks: tuple[int, int]
    bound: int
    dim_f: int
    local_ranks: tuple[int, int]
    pv_im: str
    pv_ker: str
    verdict: str
    states: int = 0

    def cells(self) -> dict:
        return {
            "ranks": f"({self.ranks[0]},{self.ranks[1]})",
            "bound": str(self.bound),
            "dimF": str(self.dim_f),
            "local_ranks": f"({self.local_ranks[0]},{self.local_ranks[1]})",
            "pv_im": self.pv_im,
            "pv_ker": self.pv_ker,
            "verdict": self.verdict,
            "states": str(self.states),
        }

    @classmethod
    def from_cells(cls, c: dict) -> "TableRow":
        def pair(s):
            a, b = s.strip("()").split(",")
            return int(a), int(b)

        return cls(pair(c["ranks"]), int(c["bound"]), int(c["dimF"]), pair(c["local_ranks"]),
                   c["pv_im"], c["pv_ker"], c["verdict"], int(c.get("states", 0)))

    @property
    def signature(self) -> tuple:
        return (self.ranks, self.dim_f, self.local_ranks, self.pv_im, self.pv_ker)


def _row_key(row: TableRow):
    m, n = row.ranks
    return (m + n, m, row.dim_f)


@dataclass
class SurveyTable:
    dims: BipartiteDims
    rows: list = field(default_factory=list)
    targets: list = field(default_factory=list)

    def sort(self):
        self.rows.sort(key=_row_key, reverse=True)
        return self

    def rows_for(self, m: int, n: int) -> list:
        return [r for r in self.rows if r.ranks == (m, n)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow(r.cells())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, dims: BipartiteDims) -> "SurveyTable":
        rows = [TableRow.from_cells(c) for c in csv.DictReader(io.StringIO(text))]
        return cls(dims, rows)

    def to_dict(self) -> dict:
        return {
            "dims": [self.dims.n_a, self.dims.n_b],
            "rows": [r.cells() for r in self.rows],
            "targets": [asdict(t) for t in self.targets],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SurveyTable":
        dims = BipartiteDims(*d["dims"])
        rows = [TableRow.from_cells(c) for c in d["rows"]]
        targets = [TargetResult(**{**t, "target": tuple(t["target"])}) for t in d.get("targets", [])]
        return cls(dims, rows, targets)

    def write(self, prefix) -> tuple[Path, Path]:
        prefix = Path(prefix)
        csv_path = prefix.with_name(prefix.name + ".csv")
        json_path = prefix.with_name(prefix.name + ".json")
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        json_path.write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")
        return csv_path, json_path

    @classmethod
    def read(cls, path) -> "SurveyTable":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class _Collector:
    """Classifies new signatures and accumulates verdicts per signature."""

    def __init__(self, dims: BipartiteDims, ccfg: ClassifyConfig, verdict_samples: int):
        self.dims = dims
        self.ccfg = ccfg
        self.samples = verdict_samples
        self.basis = build_basis(dims)
        self.rows: dict[tuple, dict] = {}

    def add(self, key: tuple, states: list[dict], count: int) -> dict | None:
        """Fold states of one cheap signature in; returns the row record if it
        changed (for the journal)."""
        rec = self.rows.get(key)
        changed = False
        if rec is None:
            st = _load(states[0], self.dims)
            cl = classify_state(st, self.ccfg, self.basis)
            d = cl.to_dict()
            rec = {"key": [list(key[0]), list(key[1]), key[2]], "row": d,
                   "verdicts": [cl.verdict.status], "states": 0}
            self.rows[key] = rec
            states = states[1:]
            changed = True
        for s in states:
            if len(rec["verdicts"]) >= self.samples:
                break
            v = separability_verdict(_load(s, self.dims), self.ccfg.pair_budget,
                                     self.ccfg.seed + 2, self.basis)
            rec["verdicts"].append(v.status)
            changed = True
        rec["states"] += count
        return rec if changed or count else None

    def restore(self, rec: dict):
        k = rec["key"]
        self.rows[(tuple(k[0]), tuple(k[1]), k[2])] = rec

    def table(self, targets) -> SurveyTable:
        rows = []
        for rec in self.rows.values():
            d = rec["row"]
            rows.append(TableRow(
                tuple(d["ranks"]), d["bound"], d["dimF"], tuple(d["local_ranks"]),
                _cell(d["pv_im"]), _cell(d["pv_ker"]),
                "|".join(sorted(set(rec["verdicts"]))), rec["states"]))
        return SurveyTable(self.dims, rows, list(targets)).sort()


def _cell(pv: dict) -> str:
    return "0" if pv["total"] == 0 else f"{pv['total']}/{pv['independent']}"


def _load(d: dict, dims: BipartiteDims) -> PptState:
    st = certify(matrix_from_pairs(d["matrix"]), dims)
    return st


def _job(args):
    dims, target, cfg, keep = args
    res, samples = run_target(dims, target, cfg, keep)
    return res, list(samples.items())


def survey(dims: BipartiteDims, targets=None, cfg: SearchConfig = SearchConfig(),
           ccfg: ClassifyConfig = ClassifyConfig(), *, verdict_samples: int = 3,
           jobs: int = 1, journal=None, progress=None) -> SurveyTable:
    """Search and classify every target; resumable through ``journal``.

    The journal holds one JSON line per completed target: its attempt
    statistics and the signature records it created or updated.
    """
    targets = all_targets(dims) if targets is None else [RankTarget(*t) for t in targets]
    coll = _Collector(dims, ccfg, verdict_samples)
    done: dict[tuple, TargetResult] = {}
    jpath = Path(journal) if journal else None
    if jpath and jpath.exists():
        for line in jpath.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            entry = json.loads(line)
            t = entry["target"]
            done[(t["target"][0], t["target"][1])] = TargetResult(**{**t, "target": tuple(t["target"])})
            for rec in entry["signatures"]:
                coll.restore(rec)
    todo = [t for t in targets if (t.m, t.n) not in done]
    args = [(dims, t, cfg, verdict_samples) for t in todo]
    if jobs > 1:
        pool = ProcessPoolExecutor(max_workers=jobs)
        results = pool.map(_job, args)
    else:
        pool = None
        results = map(_job, args)
    try:
        for res, samples in results:
            recs = []
            for key, slot in samples:
                rec = coll.add(key, slot["states"], slot["count"])
                if rec is not None:
                    recs.append(rec)
            done[res.target] = res
            if jpath:
                with jpath.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"target": asdict(res), "signatures": recs}) + "\n")
            if progress:
                progress(res)
    finally:
        if pool is not None:
            pool.shutdown()
    ordered = [done[(t.m, t.n)] for t in targets if (t.m, t.n) in done]
    return coll.table(ordered)
