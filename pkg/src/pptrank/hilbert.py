"""Linear algebra on a bipartite Hilbert space H_A (x) H_B.

Conventions used everywhere in the package:

* A vector index is ``a * n_b + b`` for subsystem indices ``(a, b)``
  (row-major, the same ordering as ``np.kron(phi, chi)``).
* Partial transposition always acts on subsystem B in the computational
  basis.
* Hermitian matrices are identified with real coordinate vectors through
  the orthonormal basis returned by :func:`build_basis`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DIM = 36
RANK_TOL = 1e-8
RANK_FLOOR = 1e-12
PSD_TOL = 1e-9


@dataclass(frozen=True)
class BipartiteDims:
    n_a: int
    n_b: int

    def __post_init__(self):
        if int(self.n_a) < 1 or int(self.n_b) < 1:
            raise ValueError(f"subsystem dimensions must be positive, got {self.n_a}x{self.n_b}")
        if self.n_a * self.n_b > MAX_DIM:
            raise ValueError(f"total dimension {self.n_a * self.n_b} exceeds {MAX_DIM}")

    @property
    def n(self) -> int:
        return self.n_a * self.n_b

    @classmethod
    def parse(cls, text: str) -> "BipartiteDims":
        """Parse ``"3x4"`` (or ``"3,4"``) into dims."""
        parts = text.lower().replace(",", "x").split("x")
        if len(parts) != 2:
            raise ValueError(f"cannot parse dims {text!r}, expected e.g. 3x3")
        return cls(int(parts[0]), int(parts[1]))

    def __str__(self):
        return f"{self.n_a}x{self.n_b}"


@dataclass(frozen=True, eq=False)
class HermitianBasis:
    """Orthonormal basis ``M_i`` of the N^2-dimensional real space of
    Hermitian N x N matrices, ``Tr(M_i M_j) = delta_ij``.

    ``matrices`` has shape ``(N**2, N, N)``.
    """

    dims: BipartiteDims
    matrices: np.ndarray

    def __len__(self):
        return self.matrices.shape[0]

    def gram(self) -> np.ndarray:
        m = self.matrices
        # Tr(M_i M_j) = sum_ab (M_i)_ab (M_j)_ba
        return np.einsum("iab,jba->ij", m, m).real


@lru_cache(maxsize=None)
def _canonical_matrices(n: int) -> np.ndarray:
    mats = np.zeros((n * n, n, n), dtype=complex)
    mats[0] = np.eye(n) / np.sqrt(n)
    idx = 1
    for l in range(1, n):
        d = np.zeros(n)
        d[:l] = 1.0
        d[l] = -l
        mats[idx] = np.diag(d) / np.sqrt(l * (l + 1))
        idx += 1
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    for j, k in pairs:
        mats[idx, j, k] = mats[idx, k, j] = 1 / np.sqrt(2)
        idx += 1
    for j, k in pairs:
        mats[idx, j, k] = 1j / np.sqrt(2)
        mats[idx, k, j] = -1j / np.sqrt(2)
        idx += 1
    mats.setflags(write=False)
    return mats


def build_basis(dims: BipartiteDims) -> HermitianBasis:
    """Canonical orthonormal Hermitian basis.

    Order: identity/sqrt(N); the N-1 generalized Gell-Mann diagonal
    matrices diag(1,..,1,-l,0,..)/sqrt(l(l+1)) for l = 1..N-1; then
    (E_jk + E_kj)/sqrt(2) for j < k in lexicographic order; then
    i(E_jk - E_kj)/sqrt(2) in the same order.
    """
    return HermitianBasis(dims, _canonical_matrices(dims.n))


def _check_dim(h: np.ndarray, basis: HermitianBasis):
    n = basis.dims.n
    if h.shape[-2:] != (n, n):
        raise ValueError(f"matrix shape {h.shape} does not match dims {basis.dims}")


def to_coords(h: np.ndarray, basis: HermitianBasis) -> np.ndarray:
    """Coordinates ``x_i = Tr(H M_i)``. Accepts a stack of matrices."""
    h = np.asarray(h)
    _check_dim(h, basis)
    # Tr(H M_i) = sum_ab H_ab (M_i)_ba
    return np.einsum("...ab,iba->...i", h, basis.matrices).real


def from_coords(x: np.ndarray, basis: HermitianBasis) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != len(basis):
        raise ValueError(f"coordinate vector length {x.shape[-1]} != {len(basis)}")
    return np.tensordot(x, basis.matrices, axes=(-1, 0))


def partial_transpose(h: np.ndarray, dims: BipartiteDims) -> np.ndarray:
    """Transpose on subsystem B: ``H'[(a,b),(a',b')] = H[(a,b'),(a',b)]``.

    Works on stacks of matrices (leading axes are kept).
    """
    h = np.asarray(h)
    lead = h.shape[:-2]
    t = h.reshape(lead + (dims.n_a, dims.n_b, dims.n_a, dims.n_b))
    t = np.swapaxes(t, -3, -1)
    return t.reshape(lead + (dims.n, dims.n))


def reduced_states(rho: np.ndarray, dims: BipartiteDims) -> tuple[np.ndarray, np.ndarray]:
    """Partial traces ``(Tr_B rho, Tr_A rho)``."""
    t = np.asarray(rho).reshape(dims.n_a, dims.n_b, dims.n_a, dims.n_b)
    return np.einsum("ajbj->ab", t), np.einsum("iaib->ab", t)


def hermitize(h: np.ndarray) -> np.ndarray:
    return (h + np.conj(np.swapaxes(h, -1, -2))) / 2


def eigh(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""
    return np.linalg.eigh(hermitize(h))


def rank_from_spectrum(evals: np.ndarray, tau: float = RANK_TOL) -> int:
    lam_max = float(np.max(evals)) if len(evals) else 0.0
    if lam_max <= RANK_FLOOR:
        return 0
    return int(np.sum(evals > tau * lam_max))


def numerical_rank(h: np.ndarray, tau: float = RANK_TOL) -> int:
    """Number of eigenvalues above ``tau * lambda_max``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return rank_from_spectrum(np.linalg.eigvalsh(hermitize(h)), tau)


def image_projector(h: np.ndarray, tau: float = RANK_TOL) -> tuple[np.ndarray, int]:
    """Orthogonal projector onto the numerical image of a PSD matrix."""
    w, v = eigh(h)
    r = rank_from_spectrum(w, tau)
    vi = v[:, len(w) - r:]
    return vi @ vi.conj().T, r


def local_ranks(rho: np.ndarray, dims: BipartiteDims, tau: float = RANK_TOL) -> tuple[int, int]:
    ra, rb = reduced_states(rho, dims)
    return numerical_rank(ra, tau), numerical_rank(rb, tau)


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_density(dims: BipartiteDims, rank_hint: int, rng_seed=None) -> np.ndarray:
    """Wishart-random state ``G G^dag / Tr(G G^dag)`` with ``G`` of shape
    ``(N, rank_hint)`` and standard complex Gaussian entries."""
    if not 1 <= rank_hint <= dims.n:
        raise ValueError(f"rank_hint must lie in [1, {dims.n}], got {rank_hint}")
    rng = as_rng(rng_seed)
    g = rng.standard_normal((dims.n, rank_hint)) + 1j * rng.standard_normal((dims.n, rank_hint))
    rho = g @ g.conj().T
    return hermitize(rho / np.trace(rho).real)


def random_unit(rng: np.random.Generator, size: int) -> np.ndarray:
    z = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return z / np.linalg.norm(z)


def min_eig(h: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(h))[0])


def is_ppt(rho: np.ndarray, dims: BipartiteDims, tol: float = PSD_TOL) -> bool:
    return min_eig(rho) >= -tol and min_eig(partial_transpose(rho, dims)) >= -tol
