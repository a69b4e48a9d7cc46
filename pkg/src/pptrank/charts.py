"""Rank diagrams: where in the (m, n) plane PPT states were found.

Guides, all computed from the dimensions:

* HLVC lines at m or n = max(N_A, N_B) + 1,
* conjectured extremal bound at m or n = N_A + N_B - 2 (dashed),
* the arc m^2 + n^2 = N^2 + 1 above which no state is extremal,
* the line m + n = 2N - N_A - N_B + 2 above which conjugate pairs are
  no longer finite in number.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constructions import hlvc_bounds
from .hilbert import BipartiteDims
from .separability import SEPARABLE, SEPARABLE_BY_THEOREM, separable_by_theorem
from .tables import SurveyTable

SEPARABLE_GREEN = "separable_green"
EXTREMAL_RED_DOT = "extremal_red_dot"
NONEXTREMAL_RED_CIRCLE = "nonextremal_red_circle"

GLYPHS = {SEPARABLE_GREEN: "o", EXTREMAL_RED_DOT: "*", NONEXTREMAL_RED_CIRCLE: "x"}


@dataclass(frozen=True)
class Guides:
    hlvc: int
    conjecture: int
    arc_radius_sq: int
    criterion_sum: int

    @classmethod
    def for_dims(cls, dims: BipartiteDims) -> "Guides":
        h, c = hlvc_bounds(dims)
        return cls(h, c, dims.n ** 2 + 1, 2 * dims.n - dims.n_a - dims.n_b + 2)

    @property
    def conjecture_region(self) -> bool:
        """Whether the dashed conjecture lines lie above the HLVC lines, so
        there is a band between them to shade."""
        return self.conjecture > self.hlvc


@dataclass
class RankDiagram:
    dims: BipartiteDims
    points: dict = field(default_factory=dict)  # (m, n) -> marker

    @property
    def guides(self) -> Guides:
        return Guides.for_dims(self.dims)

    @classmethod
    def from_table(cls, table: SurveyTable) -> "RankDiagram":
        """One marker per rank pair, taken from its most populated row, and
        mirrored to (n, m)."""
        dims = table.dims
        best: dict = {}
        for row in table.rows:
            m, n = row.ranks
            if max(m, n) > dims.n:
                raise ValueError(f"row ({m},{n}) does not fit dims {dims}")
            key = (max(m, n), min(m, n))
            if key not in best or row.states > best[key].states:
                best[key] = row
        pts = {}
        for (m, n), row in best.items():
            pts[(m, n)] = pts[(n, m)] = marker_for(row, dims)
        return cls(dims, pts)

    def is_symmetric(self) -> bool:
        return all(self.points.get((n, m)) == mk for (m, n), mk in self.points.items())


def marker_for(row, dims: BipartiteDims) -> str:
    verdicts = row.verdict.split("|")
    if SEPARABLE in verdicts or SEPARABLE_BY_THEOREM in verdicts or separable_by_theorem(row.ranks, row.local_ranks):
        return SEPARABLE_GREEN
    if row.dim_f == 1:
        return EXTREMAL_RED_DOT
    return NONEXTREMAL_RED_CIRCLE


def render_text(diagram: RankDiagram) -> str:
    """Fixed-width grid, n down the rows (top = N), m across the columns.

    ``o`` separable, ``*`` extremal, ``x`` non-extremal, ``/`` an empty cell
    on the criterion line, ``:`` an empty cell just inside the arc,
    ``.`` otherwise.
    """
    dims = diagram.dims
    g = diagram.guides
    big = dims.n
    lines = [
        f"rank diagram {dims}",
        f"hlvc m,n={g.hlvc}  conjecture m,n={g.conjecture}  "
        f"arc m^2+n^2={g.arc_radius_sq}  criterion m+n={g.criterion_sum}",
    ]
    for n in range(big, 0, -1):
        cells = []
        for m in range(1, big + 1):
            mk = diagram.points.get((m, n))
            if mk:
                ch = GLYPHS[mk]
            elif m + n == g.criterion_sum:
                ch = "/"
            elif m * m + n * n <= g.arc_radius_sq < (m + 1) ** 2 + n * n:
                ch = ":"
            else:
                ch = "."
            cells.append(ch)
        lines.append(f"{n:>3} " + " ".join(cells))
    lines.append("    " + " ".join(str(m % 10) for m in range(1, big + 1)))
    return "\n".join(lines) + "\n"


def render_svg(diagram: RankDiagram, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    dims = diagram.dims
    g = diagram.guides
    big = dims.n
    fig, ax = plt.subplots(figsize=(5, 5))
    lim = (0.5, big + 0.5)
    ax.set_xlim(*lim)
    ax.set_ylim(*lim)
    ax.set_aspect("equal")
    ax.set_xlabel("m")
    ax.set_ylabel("n")
    ax.set_title(str(dims))
    ax.axvline(g.hlvc, color="red", lw=1)
    ax.axhline(g.hlvc, color="red", lw=1)
    ax.axvline(g.conjecture, color="red", lw=1, ls="--")
    ax.axhline(g.conjecture, color="red", lw=1, ls="--")
    t = np.linspace(0, np.pi / 2, 200)
    r = np.sqrt(g.arc_radius_sq)
    ax.plot(r * np.cos(t), r * np.sin(t), color="red", lw=1)
    xs = np.array(lim)
    ax.plot(xs, g.criterion_sum - xs, color="green", lw=1, ls="--")
    for (m, n), mk in sorted(diagram.points.items()):
        if mk == SEPARABLE_GREEN:
            ax.plot(m, n, "o", mfc="none", mec="green", ms=8)
        elif mk == EXTREMAL_RED_DOT:
            ax.plot(m, n, "o", color="red", ms=6)
        else:
            ax.plot(m, n, "o", mfc="none", mec="red", ms=8)
    ax.set_xticks(range(1, big + 1))
    ax.set_yticks(range(1, big + 1))
    fig.tight_layout()
    # fixed salt keeps the generated element ids stable between runs
    with plt.rc_context({"svg.hashsalt": "pptrank"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
