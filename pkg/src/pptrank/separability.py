"""Separability of PPT states through conjugate pairs of product vectors.

A separable rho is a convex sum of pure product states ``psi psi^dag`` with
every ``psi = phi (x) chi`` in Im rho and ``phi (x) chi*`` in Im rho^P. Such
conjugate pairs are the zeros of ``psi^dag (2 - P - Q^P) psi``. Fewer than
max(m, n) of them rules separability out; with finitely many, rho is
separable iff it is a nonnegative combination of the corresponding pure
states, which is a nonnegative least-squares problem.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, nnls

from .faces import FaceReport, analyze_face
from .hilbert import BipartiteDims, HermitianBasis, build_basis, eigh, partial_transpose, to_coords
from .product_vectors import (
    INFINITE_FACTOR,
    PvCensus,
    ProductVector,
    census,
    find_zeros,
)
from .state import PptState

SEPARABLE = "separable_with_decomposition"
SEPARABLE_BY_THEOREM = "separable_by_low_rank_theorem"
PAIR_DEFICIT = "entangled_by_pair_deficit"
RECONSTRUCTION_FAILED = "entangled_by_reconstruction_failure"
OUT_OF_RANGE = "inconclusive_out_of_range"
INFINITE_PAIRS = "inconclusive_infinite_pairs"
ENTANGLED = (PAIR_DEFICIT, RECONSTRUCTION_FAILED)

RECONSTRUCTION_TOL = 1e-8
PAIR_TOL = 1e-9
# residuals this small are worth a joint refinement of the pair vectors
REFINE_FROM = 1e-2
# PPT states are separable for N <= 6 (2x2, 2x3), whatever the pair count says
PPT_SEPARABLE_MAX_N = 6


def separable_by_theorem(ranks, local_ranks) -> bool:
    """PPT states are separable when supported on at most 2x3 local
    supports, or when min(m, n) <= max(r_A, r_B)."""
    ra, rb = local_ranks
    return ra * rb <= PPT_SEPARABLE_MAX_N or min(ranks) <= max(ra, rb)


def criterion_in_range(dims: BipartiteDims, m: int, n: int) -> bool:
    """Whether pairs can be finite in number, so that counting them decides."""
    return m + n <= 2 * dims.n - dims.n_a - dims.n_b + 2


@dataclass
class ConjugatePair:
    vector: ProductVector
    objective: float
    image_defect: float  # psi^dag (1 - P) psi
    image_pt_defect: float  # psi~^dag (1 - Q) psi~

    @property
    def psi(self) -> np.ndarray:
        return self.vector.psi

    @property
    def psi_tilde(self) -> np.ndarray:
        return self.vector.psi_conj


def _split(rho: np.ndarray, rank: int):
    w, v = eigh(rho)
    k = len(w) - rank
    return v[:, k:], v[:, :k]


def find_conjugate_pairs(state: PptState, budget: int | None = None, seed=0) -> list[ConjugatePair]:
    dims = state.dims
    m, n = state.ranks
    im, ker = _split(state.rho, m)
    im_pt, ker_pt = _split(state.rho_pt, n)
    p = im @ im.conj().T
    q = im_pt @ im_pt.conj().T
    a = 2 * np.eye(dims.n) - p - partial_transpose(q, dims)
    budget = budget or 60 * max(m, n)
    found = find_zeros(a, [(ker, False), (ker_pt, True)], dims, budget, seed, tau=PAIR_TOL)
    pairs = []
    for v in found:
        psi, tilde = v.psi, v.psi_conj
        d1 = float(np.real(psi.conj() @ psi - psi.conj() @ p @ psi))
        d2 = float(np.real(tilde.conj() @ tilde - tilde.conj() @ q @ tilde))
        # both halves separately, not just their sum
        if d1 <= PAIR_TOL and d2 <= PAIR_TOL:
            pairs.append(ConjugatePair(v, v.objective, d1, d2))
    return pairs


@dataclass
class SeparabilityVerdict:
    status: str
    k_pairs: int | str
    weights: np.ndarray | None = None
    residual: float = float("nan")
    condition: float = float("nan")
    pairs: list = field(default_factory=list, repr=False)

    @property
    def entangled(self) -> bool:
        return self.status in ENTANGLED


def reconstruct(state: PptState, pairs: list[ConjugatePair],
                basis: HermitianBasis | None = None) -> SeparabilityVerdict:
    """Best nonnegative combination of the pure states of ``pairs``."""
    m, n = state.ranks
    k = len(pairs)
    if k < max(m, n):
        return SeparabilityVerdict(PAIR_DEFICIT, k, pairs=pairs)
    basis = basis or build_basis(state.dims)
    projs = np.array([np.outer(c.psi, c.psi.conj()) for c in pairs])
    cols = to_coords(projs, basis).T
    sv = np.linalg.svd(cols, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    weights, _ = nnls(cols, to_coords(state.rho, basis))
    approx = np.tensordot(weights, projs, axes=1)
    resid = float(np.max(np.abs(state.rho - approx)))
    if resid > RECONSTRUCTION_TOL and resid <= REFINE_FROM:
        used = [i for i in range(k) if weights[i] > 0]
        vecs, w2, r2 = refine_decomposition(state, [pairs[i].vector for i in used], weights[used])
        if r2 < resid:
            weights = np.zeros(k)
            weights[used] = w2
            for i, v in zip(used, vecs):
                pairs[i].vector = v
            resid = r2
    status = SEPARABLE if resid <= RECONSTRUCTION_TOL else RECONSTRUCTION_FAILED
    return SeparabilityVerdict(status, k, weights, resid, cond, pairs)


def refine_decomposition(state: PptState, vectors: list[ProductVector], weights):
    """Least-squares polish of ``rho = sum_k w_k psi_k psi_k^dag`` over the
    product vectors themselves.

    Pair vectors come out of the search accurate to about the square root of
    the pair tolerance, which can leave a reconstruction residual just above
    RECONSTRUCTION_TOL for a separable state. Any result is still an explicit
    product decomposition, so it can only certify separability.
    Returns (vectors, weights, max-abs residual).
    """
    na, nb = state.dims.n_a, state.dims.n_b
    k = len(vectors)

    def unpack(x):
        z = x[: len(x) // 2] + 1j * x[len(x) // 2:]
        z = z.reshape(k, na + nb)
        return z[:, :na], z[:, na:]

    def resid(x):
        phi, chi = unpack(x)
        psi = np.einsum("ka,kb->kab", phi, chi).reshape(k, -1)
        r = state.rho - psi.T @ psi.conj()
        return np.concatenate([r.real.ravel(), r.imag.ravel()])

    z0 = np.concatenate([np.sqrt(w) * np.concatenate([v.phi, v.chi]) for v, w in zip(vectors, weights)])
    x0 = np.concatenate([z0.real, z0.imag])
    sol = least_squares(resid, x0, method="lm" if len(x0) <= 2 * state.dims.n ** 2 else "trf", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200 * len(x0))
    phi, chi = unpack(sol.x)
    w = np.linalg.norm(phi, axis=1) ** 2 * np.linalg.norm(chi, axis=1) ** 2
    out = [ProductVector(p / np.linalg.norm(p), c / np.linalg.norm(c), 0.0) for p, c in zip(phi, chi)]
    return out, w, float(np.max(np.abs(resid(sol.x))))


def separability_verdict(state: PptState, budget: int | None = None, seed=0,
                         basis: HermitianBasis | None = None) -> SeparabilityVerdict:
    m, n = state.ranks
    if not criterion_in_range(state.dims, m, n):
        return SeparabilityVerdict(OUT_OF_RANGE, "inf")
    pairs = find_conjugate_pairs(state, budget, seed)
    verdict = reconstruct(state, pairs, basis)
    if len(pairs) > INFINITE_FACTOR * max(m, n):
        verdict.k_pairs = "inf"
        if verdict.status != SEPARABLE:
            # the sampled pairs need not be the ones a decomposition uses
            verdict.status = INFINITE_PAIRS
    if verdict.status != SEPARABLE and separable_by_theorem(state.ranks, state.local_ranks):
        # near-degenerate low-rank states can defeat the numerical decomposition
        verdict.status = SEPARABLE_BY_THEOREM
    return verdict


@dataclass(frozen=True)
class ClassifyConfig:
    pv_budget: int | None = None
    pair_budget: int | None = None
    seed: int = 0


@dataclass
class Classification:
    ranks: tuple[int, int]
    local_ranks: tuple[int, int]
    face: FaceReport
    pv_im: PvCensus
    pv_ker: PvCensus
    verdict: SeparabilityVerdict
    full_local_ranks: bool
    ppt_implies_separable: bool = False

    @property
    def signature(self) -> tuple:
        """What distinguishes state types within one table row."""
        return (self.ranks, self.face.dim_f, self.local_ranks, self.pv_im.cell(), self.pv_ker.cell())

    def to_dict(self) -> dict:
        m, n = self.ranks
        return {
            "ranks": [m, n],
            "bound": self.face.lower_bound,
            "dimF": self.face.dim_f,
            "local_ranks": list(self.local_ranks),
            "pv_im": self.pv_im.to_dict(),
            "pv_ker": self.pv_ker.to_dict(),
            "verdict": self.verdict.status,
            "evidence": {
                "eigen_gap": self.face.eigen_gap,
                "face_unreliable": self.face.unreliable,
                "k_pairs": self.verdict.k_pairs,
                "reconstruction_residual": self.verdict.residual,
                "reconstruction_condition": self.verdict.condition,
                "full_local_ranks": self.full_local_ranks,
                "ppt_implies_separable": self.ppt_implies_separable,
            },
        }


def classify_state(state: PptState, cfg: ClassifyConfig = ClassifyConfig(),
                   basis: HermitianBasis | None = None) -> Classification:
    dims = state.dims
    basis = basis or build_basis(dims)
    face = analyze_face(state, basis)
    im, ker = _split(state.rho, state.ranks[0])
    pv_im = census(im @ im.conj().T, dims, cfg.pv_budget, cfg.seed, "image")
    pv_ker = census(ker @ ker.conj().T, dims, cfg.pv_budget, cfg.seed + 1, "kernel")
    verdict = separability_verdict(state, cfg.pair_budget, cfg.seed + 2, basis)
    full = state.local_ranks == (dims.n_a, dims.n_b)
    return Classification(state.ranks, state.local_ranks, face, pv_im, pv_ker, verdict, full,
                          separable_by_theorem(state.ranks, state.local_ranks))
