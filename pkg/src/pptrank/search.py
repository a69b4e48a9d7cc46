"""Newton search for PPT states with prescribed ranks of rho and rho^P.

The unknown is the coordinate vector ``x`` of rho in the canonical Hermitian
basis. The residual ``mu`` collects the ``N - m`` smallest eigenvalues of rho
followed by the ``N - n`` smallest eigenvalues of rho^P; each Newton step
solves ``B dx = -mu`` in the least-squares/minimum-norm sense by conjugate
gradients on the normal equations ``B^T B dx = -B^T mu``.

At the solution the targeted eigenvalues are degenerate (all zero), where
first-order eigenvalue derivatives alone only give linear convergence. With
``cluster_coupling`` on, the system is augmented by rows that keep the
off-diagonal elements of rho (and rho^P) inside the targeted eigenspace at
zero to first order; the eigenvalue rows and the right-hand side ``-mu`` are
unchanged.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .hilbert import (
    BipartiteDims,
    HermitianBasis,
    as_rng,
    build_basis,
    eigh,
    from_coords,
    partial_transpose,
    random_density,
    to_coords,
)
from .state import NotPPTError, PptState, certify

log = logging.getLogger(__name__)

CONVERGED = "converged"
ABORTED_STALL = "aborted_stall"
ABORTED_MAX_ITER = "aborted_max_iter"
REJECTED_NOT_PPT = "rejected_not_ppt"


@dataclass(frozen=True)
class RankTarget:
    m: int
    n: int

    def validate(self, dims: BipartiteDims):
        if not (1 <= self.m <= dims.n and 1 <= self.n <= dims.n):
            raise ValueError(f"ranks ({self.m},{self.n}) must lie in [1, {dims.n}] for {dims}")

    def __iter__(self):
        return iter((self.m, self.n))


@dataclass(frozen=True)
class SearchConfig:
    max_iterations: int = 200
    residual_tol: float = 1e-11
    cg_tol: float = 1e-12
    cg_max_steps: int | None = None  # None -> 2 N^2
    stall_window: int = 20
    restarts: int = 50
    seed: int = 0
    cluster_coupling: bool = True
    # extra Newton steps after reaching residual_tol, while mu keeps shrinking
    refine_iterations: int = 40

    def __post_init__(self):
        for name in ("residual_tol", "cg_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iterations < 0 or self.stall_window < 1 or self.restarts < 1:
            raise ValueError("invalid iteration budget")


@dataclass
class SearchIterate:
    x: np.ndarray
    mu: np.ndarray
    evals: np.ndarray
    evecs: np.ndarray
    evals_pt: np.ndarray
    evecs_pt: np.ndarray
    target: RankTarget
    dims: BipartiteDims
    jacobian: np.ndarray | None = None

    @property
    def residual(self) -> float:
        return float(np.max(np.abs(self.mu))) if self.mu.size else 0.0


@dataclass
class SearchOutcome:
    status: str
    target: RankTarget
    seed: int
    history: list = field(default_factory=list)
    state: PptState | None = None
    iterations: int = 0

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    @property
    def achieved(self) -> tuple[int, int] | None:
        return self.state.ranks if self.state is not None else None


def mu_vector(rho: np.ndarray, target: RankTarget, dims: BipartiteDims):
    """Targeted eigenvalues and both eigensystems (ascending order)."""
    w, v = eigh(rho)
    wp, vp = eigh(partial_transpose(rho, dims))
    mu = np.concatenate([w[: dims.n - target.m], wp[: dims.n - target.n]])
    return mu, (w, v, wp, vp)


def make_iterate(x: np.ndarray, basis: HermitianBasis, target: RankTarget) -> SearchIterate:
    dims = basis.dims
    mu, (w, v, wp, vp) = mu_vector(from_coords(x, basis), target, dims)
    return SearchIterate(x, mu, w, v, wp, vp, target, dims)


def _targeted(it: SearchIterate):
    n = it.dims.n
    return it.evecs[:, : n - it.target.m], it.evecs_pt[:, : n - it.target.n]


def jacobian(it: SearchIterate, basis: HermitianBasis) -> np.ndarray:
    """Rows ``d lambda_k / d x_j = psi_k^dag M_j psi_k`` for the targeted
    eigenvalues of rho, then ``psi_k^dag M_j^P psi_k`` for those of rho^P.

    ``psi^dag M psi = Tr(M psi psi^dag)``, so a row is the coordinate vector of
    the projector (partially transposed for the rho^P rows).
    """
    v, vp = _targeted(it)
    proj = np.einsum("ak,bk->kab", v, v.conj())
    proj_pt = partial_transpose(np.einsum("ak,bk->kab", vp, vp.conj()), it.dims)
    b = to_coords(np.concatenate([proj, proj_pt]), basis)
    it.jacobian = b
    return b


def _offdiag_rows(vecs: np.ndarray, dims, basis, transpose: bool) -> np.ndarray:
    k = vecs.shape[1]
    i, j = np.triu_indices(k, 1)
    if len(i) == 0:
        return np.zeros((0, len(basis)))
    # psi_i^dag M psi_j = Tr(M X) with X = psi_j psi_i^dag
    x = np.einsum("ap,bp->pab", vecs[:, j], vecs[:, i].conj())
    if transpose:
        x = partial_transpose(x, dims)
    xh = np.conj(np.swapaxes(x, -1, -2))
    return np.concatenate([to_coords((x + xh) / 2, basis), to_coords((x - xh) / 2j, basis)])


def coupling_rows(it: SearchIterate, basis: HermitianBasis) -> np.ndarray:
    """Derivatives of Re and Im of the off-diagonal elements of rho and rho^P
    between targeted eigenvectors."""
    v, vp = _targeted(it)
    return np.concatenate([
        _offdiag_rows(v, it.dims, basis, False),
        _offdiag_rows(vp, it.dims, basis, True),
    ])


class StationaryPoint(ArithmeticError):
    """``B^T mu = 0`` while ``mu != 0``: Newton cannot make progress."""


def conjugate_gradient(matvec, b: np.ndarray, tol: float, max_steps: int) -> np.ndarray:
    """CG on a symmetric positive semidefinite operator started from zero.

    Iterates stay in the range of the operator, so for a consistent singular
    system the result approaches the minimum-norm solution.
    """
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    stop = tol * np.sqrt(rr)
    for _ in range(max_steps):
        if np.sqrt(rr) <= stop:
            break
        ap = matvec(p)
        pap = p @ ap
        if pap <= 0:
            break
        alpha = rr / pap
        x += alpha * p
        r -= alpha * ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def newton_step(it: SearchIterate, cfg: SearchConfig, basis: HermitianBasis | None = None) -> np.ndarray:
    """Minimum-norm solution of ``B dx = -mu`` via CG on ``B^T B dx = -B^T mu``."""
    if it.mu.size == 0 or not np.any(it.mu):
        return np.zeros_like(it.x)
    if it.jacobian is None:
        if basis is None:
            raise ValueError("basis needed to build the Jacobian")
        jacobian(it, basis)
    # eigenvalues are homogeneous in x, so without this row the minimum-norm
    # step for small ranks is dx = -x (the zero matrix)
    trace_row = np.zeros((1, len(it.x)))
    trace_row[0, 0] = 1.0
    mat = np.concatenate([it.jacobian, trace_row])
    rhs = np.concatenate([-it.mu, [0.0]])
    if cfg.cluster_coupling and basis is not None:
        c = coupling_rows(it, basis)
        if len(c):
            mat = np.concatenate([mat, c])
            rhs = np.concatenate([rhs, np.zeros(len(c))])
    b = mat.T @ rhs
    if not np.any(b):
        raise StationaryPoint("B^T mu vanishes at a non-solution")
    steps = cfg.cg_max_steps or 2 * len(it.x)
    return conjugate_gradient(lambda p: mat.T @ (mat @ p), b, cfg.cg_tol, steps)


def _kept_positive(it: SearchIterate) -> bool:
    n = it.dims.n
    ok = True
    if it.target.m > 0:
        ok &= it.evals[n - it.target.m] > 0
    if it.target.n > 0:
        ok &= it.evals_pt[n - it.target.n] > 0
    return bool(ok)


def _normalize(x: np.ndarray, dims: BipartiteDims) -> np.ndarray:
    # x[0] multiplies identity/sqrt(N), so Tr rho = sqrt(N) x[0]
    return x / (x[0] * np.sqrt(dims.n))


def ppt_start(dims: BipartiteDims, rng, margin: float = 0.05) -> np.ndarray:
    """Full-rank Wishart state, mixed with the maximally mixed state only as
    far as needed to make rho^P positive definite (smallest eigenvalue at
    least ``margin / N``)."""
    rho = random_density(dims, dims.n, rng)
    lo = np.linalg.eigvalsh(partial_transpose(rho, dims))[0]
    floor = margin / dims.n
    if lo < floor:
        # (1-t) lo + t/N = floor
        t = (floor - lo) / (1.0 / dims.n - lo)
        rho = (1 - t) * rho + t * np.eye(dims.n) / dims.n
    return rho


def search_once(dims: BipartiteDims, target: RankTarget, cfg: SearchConfig = SearchConfig(),
                seed: int | None = None, basis: HermitianBasis | None = None,
                start: np.ndarray | None = None) -> SearchOutcome:
    """One Newton run from a seeded starting point.

    Targets with m < n are run as (n, m) and the result is partially
    transposed: the start only lifts the spectrum of rho^P, which makes the
    direct route stall far more often.
    """
    target = RankTarget(*target)
    target.validate(dims)
    basis = basis or build_basis(dims)
    seed = cfg.seed if seed is None else seed
    if target.m < target.n and start is None:
        out = search_once(dims, RankTarget(target.n, target.m), cfg, seed, basis)
        out.target = target
        if out.state is not None:
            s = out.state
            out.state = certify(s.rho_pt, dims, seed=seed, iterations_used=s.iterations_used,
                                residual=s.residual, target_ranks=(target.m, target.n))
        return out
    rng = as_rng(seed)
    rho0 = ppt_start(dims, rng) if start is None else start
    it = make_iterate(_normalize(to_coords(rho0, basis), dims), basis, target)
    history = [it.residual]
    status = ABORTED_MAX_ITER
    refine_left = cfg.refine_iterations
    n_iter = 0
    while True:
        r = it.residual
        if r <= cfg.residual_tol:
            status = CONVERGED
            if refine_left <= 0 or r <= 1e-15 or n_iter >= cfg.max_iterations:
                break
        if n_iter >= cfg.max_iterations:
            break
        w = cfg.stall_window
        if status != CONVERGED and len(history) > w and history[-1] > 0.9 * history[-1 - w]:
            status = ABORTED_STALL
            break
        try:
            dx = newton_step(it, cfg, basis)
        except StationaryPoint:
            status = ABORTED_STALL
            break
        # the trace must stay positive for the normalization
        while it.x[0] + dx[0] <= 0.1 * it.x[0]:
            dx = dx / 2
        new = make_iterate(_normalize(it.x + dx, dims), basis, target)
        # one halving when the residual blows up; halving until the eigenvalues
        # that must stay nonzero remain positive
        if new.residual > 10 * r:
            dx = dx / 2
            new = make_iterate(_normalize(it.x + dx, dims), basis, target)
        halvings = 0
        while not _kept_positive(new) and halvings < 10:
            dx = dx / 2
            new = make_iterate(_normalize(it.x + dx, dims), basis, target)
            halvings += 1
        n_iter += 1
        if status == CONVERGED:
            refine_left -= 1
            if new.residual >= r:
                break
        it = new
        history.append(it.residual)

    outcome = SearchOutcome(status, target, seed, history, iterations=n_iter)
    if status == CONVERGED:
        try:
            outcome.state = certify(from_coords(it.x, basis), dims, seed=seed,
                                    iterations_used=n_iter, residual=it.residual,
                                    target_ranks=(target.m, target.n))
        except NotPPTError as exc:
            log.debug("seed %s: converged point rejected: %s", seed, exc)
            outcome.status = REJECTED_NOT_PPT
        else:
            if outcome.state.ranks[0] > target.m or outcome.state.ranks[1] > target.n:
                outcome.status = REJECTED_NOT_PPT
                outcome.state = None
    return outcome


def attempt_seeds(cfg: SearchConfig) -> range:
    return range(cfg.seed, cfg.seed + cfg.restarts)


def search(dims: BipartiteDims, target: RankTarget, cfg: SearchConfig = SearchConfig()) -> SearchOutcome:
    """Restart :func:`search_once` with seeds ``cfg.seed, cfg.seed+1, ...``.

    Returns the first outcome reaching exactly the target ranks; failing
    that, the converged outcome with the highest achieved ranks; failing that,
    the last aborted outcome.
    """
    target = RankTarget(*target)
    target.validate(dims)
    basis = build_basis(dims)
    best = None
    last = None
    for s in attempt_seeds(cfg):
        out = search_once(dims, target, cfg, seed=s, basis=basis)
        last = out
        if not out.converged:
            continue
        if out.achieved == (target.m, target.n):
            return out
        if best is None or sum(out.achieved) > sum(best.achieved):
            best = out
    return best or last


def with_seed(cfg: SearchConfig, seed: int) -> SearchConfig:
    return replace(cfg, seed=seed)
