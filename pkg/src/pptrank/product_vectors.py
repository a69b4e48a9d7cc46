"""Product vectors phi (x) chi in a subspace.

Minimizing ``f = psi^dag A psi`` over unit product vectors with ``A = 1 - P``
finds product vectors in the range of the projector ``P``: they are exactly
the zeros of ``f``. The descent step perturbs ``phi`` and ``chi`` along the
gradient parts ``x`` and ``y`` and picks the step length from the exact
minimum of the Rayleigh quotient on ``span{psi, w}``.

Plain descent only resolves psi to about ``sqrt(eps)``, since ``f`` is
quadratic in the error. Candidates are therefore finished by Gauss-Newton on
the linear residuals ``F^dag (phi (x) chi) = 0``, ``F`` spanning the
orthogonal complement of the subspace. That converges quadratically to
machine precision.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .hilbert import BipartiteDims, as_rng, hermitize

TAU_PV = 1e-9
DEDUP_FIDELITY = 1 - 1e-6
INDEPENDENCE_TOL = 1e-8
# descent candidates worth polishing
CANDIDATE_F = 1e-3
# over-prediction factor beyond which a found set counts as a continuum
INFINITE_FACTOR = 3


@dataclass
class ProductVector:
    phi: np.ndarray
    chi: np.ndarray
    objective: float = float("nan")
    steps: int = 0
    converged: bool = True

    @property
    def psi(self) -> np.ndarray:
        return np.kron(self.phi, self.chi)

    @property
    def psi_conj(self) -> np.ndarray:
        """``phi (x) chi*``, the partner vector under partial transposition."""
        return np.kron(self.phi, self.chi.conj())


@dataclass(frozen=True)
class Expectation:
    """Generic product-vector count of a d-dimensional subspace."""

    kind: str  # "zero" | "finite" | "infinite"
    count: int = 0
    params: int = 0

    def __str__(self):
        if self.kind == "infinite":
            return f"infinite({self.params})"
        if self.kind == "finite":
            return f"finite({self.count})"
        return "zero"


def free_parameters(dims: BipartiteDims, d: int) -> int:
    return dims.n_a + dims.n_b - 2 - dims.n + d


def predict_count(dims: BipartiteDims, d: int) -> Expectation:
    if not 0 <= d <= dims.n:
        raise ValueError(f"subspace dimension {d} outside [0, {dims.n}]")
    p = free_parameters(dims, d)
    if p > 0:
        return Expectation("infinite", params=p)
    if p == 0:
        return Expectation("finite", count=comb(dims.n_a + dims.n_b - 2, dims.n_a - 1))
    return Expectation("zero")


def random_product_starts(dims: BipartiteDims, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    rng = as_rng(rng)

    def unit(k):
        z = rng.standard_normal((count, k)) + 1j * rng.standard_normal((count, k))
        return z / np.linalg.norm(z, axis=1, keepdims=True)

    return unit(dims.n_a), unit(dims.n_b)


def _objective(A, phi, chi):
    psi = (phi[:, :, None] * chi[:, None, :]).reshape(len(phi), -1)
    return np.einsum("ki,ij,kj->k", psi.conj(), A, psi).real


def gradient_parts(A, phi, chi, dims: BipartiteDims):
    """``(lam, x, y)`` for a batch: ``lam = psi^dag A psi`` and the components
    of the partial gradients orthogonal to ``phi`` and ``chi``."""
    k = len(phi)
    psi = (phi[:, :, None] * chi[:, None, :]).reshape(k, -1)
    z = (psi @ A.T).reshape(k, dims.n_a, dims.n_b)
    u = np.einsum("kab,kb->ka", z, chi.conj())
    v = np.einsum("kab,ka->kb", z, phi.conj())
    lam = np.einsum("ka,ka->k", phi.conj(), u).real
    return lam, u - lam[:, None] * phi, v - lam[:, None] * chi, z


def minimize_batch(A, dims: BipartiteDims, phi, chi, *, tol: float = 1e-15,
                   max_steps: int = 300, trace: list | None = None):
    """Run the product-vector descent on a batch of starts.

    Each lane stops when ``|x|^2 + |y|^2 <= tol`` or when ``f`` drops by less
    than ``tol`` in a step. Returns ``(phi, chi, f, steps, converged)``; when
    ``trace`` is a list, the objective vector after every step is appended.
    """
    A = hermitize(np.asarray(A, dtype=complex))
    phi = np.array(phi, dtype=complex)
    chi = np.array(chi, dtype=complex)
    k = len(phi)
    f = _objective(A, phi, chi)
    steps = np.zeros(k, dtype=int)
    done = np.zeros(k, dtype=bool)
    if trace is not None:
        trace.append(f.copy())
    for _ in range(max_steps):
        idx = np.nonzero(~done)[0]
        if len(idx) == 0:
            break
        p, c = phi[idx], chi[idx]
        lam, x, y, z = gradient_parts(A, p, c, dims)
        g = np.sum(np.abs(x) ** 2, 1) + np.sum(np.abs(y) ** 2, 1)
        w = (p[:, :, None] * y[:, None, :] + x[:, :, None] * c[:, None, :]).reshape(len(idx), -1)
        nw = np.linalg.norm(w, axis=1)
        safe = np.where(nw > 0, nw, 1.0)
        # 2x2 Rayleigh problem on the orthonormal pair {psi, w/|w|}
        b = np.einsum("ki,ki->k", z.reshape(len(idx), -1).conj(), w) / safe
        cw = np.einsum("ki,ij,kj->k", w.conj(), A, w).real / safe**2
        low = (lam + cw) / 2 - np.sqrt(((lam - cw) / 2) ** 2 + np.abs(b) ** 2)
        nz = np.abs(b) > 0
        eps = np.where(nz, (low - lam) / np.where(nz, b, 1) / safe, 0)
        # psi + eps*w is optimal, the product update is only close to it
        for _ in range(40):
            p2 = p + eps[:, None] * x
            c2 = c + eps[:, None] * y
            p2 /= np.linalg.norm(p2, axis=1, keepdims=True)
            c2 /= np.linalg.norm(c2, axis=1, keepdims=True)
            f2 = _objective(A, p2, c2)
            worse = f2 > f[idx]
            if not worse.any():
                break
            eps = np.where(worse, eps / 2, eps)
        keep = f2 <= f[idx]
        move = idx[keep]
        phi[move], chi[move] = p2[keep], c2[keep]
        drop = f[idx] - np.where(keep, f2, f[idx])
        f[move] = f2[keep]
        steps[idx] += 1
        done[idx[(g <= tol) | (drop <= tol)]] = True
        if trace is not None:
            trace.append(f.copy())
    return phi, chi, f, steps, done


def minimize_once(A, start: ProductVector, dims: BipartiteDims, tol: float = 1e-15,
                  max_steps: int = 2000) -> ProductVector:
    phi, chi, f, steps, done = minimize_batch(
        A, dims, start.phi[None, :], start.chi[None, :], tol=tol, max_steps=max_steps)
    return ProductVector(phi[0], chi[0], float(f[0]), int(steps[0]), bool(done[0]))


def _complement_basis(u: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(np.concatenate([u[:, None], np.eye(len(u))], axis=1))
    return q[:, 1: len(u)]


def _residual_system(phi, chi, blocks, dims: BipartiteDims):
    """Stacked real residual and Jacobian in tangent coordinates."""
    na, nb = dims.n_a, dims.n_b
    up, uc = _complement_basis(phi), _complement_basis(chi)
    res, jac = [], []
    for F, conj in blocks:
        if F.shape[1] == 0:
            continue
        c = chi.conj() if conj else chi
        fr = F.conj().T.reshape(-1, na, nb)
        res.append(np.einsum("kab,a,b->k", fr, phi, c))
        dphi = np.einsum("kab,b->ka", fr, c) @ up
        dchi = np.einsum("kab,a->kb", fr, phi) @ (uc.conj() if conj else uc)
        # real and imaginary parts of the tangent coordinates
        jac.append(np.concatenate([dphi, 1j * dphi, dchi, (-1j if conj else 1j) * dchi], axis=1))
    if not res:
        return np.zeros(0), np.zeros((0, 2 * (na + nb - 2))), up, uc
    r = np.concatenate(res)
    j = np.concatenate(jac)
    return np.concatenate([r.real, r.imag]), np.concatenate([j.real, j.imag]), up, uc


def polish(pv: ProductVector, blocks, dims: BipartiteDims, iters: int = 12):
    """Gauss-Newton on ``F^dag (phi (x) chi') = 0`` for each ``(F, conj)`` in
    ``blocks``, where ``chi' = chi*`` if ``conj`` else ``chi``.

    Steps move ``phi`` and ``chi`` orthogonally to themselves, which removes
    the phase and scale directions the residual does not see. Near-singular
    Jacobian directions are cut off and steps are halved until the residual
    drops. Returns the new vector and the final residual norm.
    """
    a, b = dims.n_a - 1, dims.n_b - 1
    phi, chi = pv.phi.copy(), pv.chi.copy()
    rr, jac, up, uc = _residual_system(phi, chi, blocks, dims)
    norm = float(np.linalg.norm(rr))
    for _ in range(iters):
        if norm < 1e-15:
            break
        d = np.linalg.lstsq(jac, -rr, rcond=1e-9)[0]
        for _ in range(10):
            p2 = phi + up @ (d[:a] + 1j * d[a: 2 * a])
            c2 = chi + uc @ (d[2 * a: 2 * a + b] + 1j * d[2 * a + b:])
            p2 /= np.linalg.norm(p2)
            c2 /= np.linalg.norm(c2)
            rr2, jac2, up2, uc2 = _residual_system(p2, c2, blocks, dims)
            n2 = float(np.linalg.norm(rr2))
            if n2 < norm:
                break
            d = d / 2
        else:
            break
        phi, chi, rr, jac, up, uc, norm = p2, c2, rr2, jac2, up2, uc2, n2
    return ProductVector(phi, chi, pv.objective, pv.steps, True), norm


def dedup(vectors: list[ProductVector], fidelity: float = DEDUP_FIDELITY, key=lambda v: v.psi):
    """Keep one representative per class ``|<psi_i, psi_j>| >= fidelity``."""
    reps, psis = [], []
    for v in vectors:
        p = key(v)
        if all(abs(np.vdot(q, p)) < fidelity for q in psis):
            reps.append(v)
            psis.append(p)
    return reps


def independent_count(vectors: list[ProductVector], tol: float = INDEPENDENCE_TOL,
                      projector: np.ndarray | None = None) -> int:
    """Numerical rank of the matrix with columns psi, optionally after
    projecting them onto the subspace they were found in."""
    if not vectors:
        return 0
    cols = np.array([v.psi for v in vectors]).T
    if projector is not None:
        cols = projector @ cols
    s = np.linalg.svd(cols, compute_uv=False)
    return int(np.sum(s > tol * s[0]))


def find_zeros(A, blocks, dims: BipartiteDims, budget: int, seed=0, *,
               max_steps: int = 300, tau: float = TAU_PV) -> list[ProductVector]:
    """Descent from ``budget`` random starts, then polish and dedup.

    ``A`` is the objective operator and ``blocks`` the linear residual system
    whose zeros are the same product vectors (see :func:`polish`).
    """
    A = hermitize(np.asarray(A, dtype=complex))
    phi, chi = random_product_starts(dims, budget, seed)
    phi, chi, f, steps, done = minimize_batch(A, dims, phi, chi, max_steps=max_steps)
    order = np.argsort(f)
    cands = [ProductVector(phi[i], chi[i], float(f[i]), int(steps[i]), bool(done[i]))
             for i in order if f[i] <= CANDIDATE_F]
    found = []
    for c in dedup(cands, 1 - 1e-4):
        v, res = polish(c, blocks, dims)
        fv = float(_objective(A, v.phi[None], v.chi[None])[0])
        if fv <= tau:
            v.objective = fv
            found.append(v)
    return dedup(found)


@dataclass
class PvCensus:
    subspace_tag: str
    dimension: int
    expected: Expectation
    found_total: int | str
    found_independent: int
    vectors: list = field(default_factory=list, repr=False)

    @property
    def infinite(self) -> bool:
        return self.found_total == "inf"

    def cell(self) -> str:
        """Table cell: ``0``, ``a/b`` or ``inf/b``."""
        if self.found_total == 0:
            return "0"
        return f"{self.found_total}/{self.found_independent}"

    def to_dict(self) -> dict:
        return {"total": self.found_total, "independent": self.found_independent}


def default_budget(expected: Expectation) -> int:
    return 60 * max(1, expected.count)


def census(projector: np.ndarray, dims: BipartiteDims, budget: int | None = None,
           seed=0, tag: str = "image") -> PvCensus:
    """Count product vectors in the range of ``projector``."""
    proj = hermitize(np.asarray(projector, dtype=complex))
    w, v = np.linalg.eigh(proj)
    inside = w > 0.5
    d = int(inside.sum())
    expected = predict_count(dims, d)
    if d == 0:
        return PvCensus(tag, d, expected, 0, 0)
    budget = budget or default_budget(expected)
    comp = v[:, ~inside]
    A = np.eye(dims.n) - v[:, inside] @ v[:, inside].conj().T
    found = find_zeros(A, [(comp, False)], dims, budget, seed)
    indep = independent_count(found, projector=v[:, inside] @ v[:, inside].conj().T)
    limit = INFINITE_FACTOR * (expected.count if expected.kind == "finite" else max(d, 1))
    if expected.kind == "infinite" or len(found) > limit:
        total = "inf"
    else:
        total = len(found)
    return PvCensus(tag, d, expected, total, indep, found)
