"""Explicit PPT states: low-rank separable mixtures and the rank-raising
extension of an entangled state by one product vector outside its local
supports."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .hilbert import BipartiteDims, as_rng, random_unit, reduced_states
from .product_vectors import ProductVector
from .state import PptState, certify, state_from_dict

SUPPORT_TOL = 1e-8
SEED_FIXTURE = "seed_3x3_rank44.json"


@dataclass
class ConstructionRecipe:
    kind: str  # "separable_mixture" | "hlvc_saturating"
    dims: tuple[int, int]
    seed: int
    mixing: list = field(default_factory=list)
    k: int | None = None
    levels: int | None = None
    orthogonal: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        return {k: v for k, v in d.items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "ConstructionRecipe":
        d = dict(d)
        d["dims"] = tuple(d["dims"])
        return cls(**d)


@dataclass
class Construction:
    state: PptState
    recipe: ConstructionRecipe
    components: list = field(default_factory=list)  # (weight, ProductVector)


def random_product(dims: BipartiteDims, rng, real_chi: bool = False) -> ProductVector:
    rng = as_rng(rng)
    phi = random_unit(rng, dims.n_a)
    if real_chi:
        chi = rng.standard_normal(dims.n_b).astype(complex)
        chi /= np.linalg.norm(chi)
    else:
        chi = random_unit(rng, dims.n_b)
    return ProductVector(phi, chi, 0.0)


def separable_mixture(dims: BipartiteDims, k: int, seed: int = 0, real_chi: bool = False) -> Construction:
    """Random convex combination of ``k`` random pure product states."""
    if not 1 <= k <= dims.n:
        raise ValueError(f"k must lie in [1, {dims.n}], got {k}")
    rng = as_rng(seed)
    vecs = [random_product(dims, rng, real_chi) for _ in range(k)]
    weights = rng.uniform(0.5, 1.5, size=k)
    weights /= weights.sum()
    rho = sum(w * np.outer(v.psi, v.psi.conj()) for w, v in zip(weights, vecs))
    recipe = ConstructionRecipe("separable_mixture", (dims.n_a, dims.n_b), seed, weights.tolist(), k=k)
    state = certify(rho, dims, seed=seed, meta={"recipe": recipe.to_dict()})
    return Construction(state, recipe, list(zip(weights.tolist(), vecs)))


def embed_state(base: PptState, dims: BipartiteDims) -> PptState:
    """Place ``base`` on the leading ``n_a x n_b`` block of a larger system."""
    a, b = base.dims.n_a, base.dims.n_b
    if dims.n_a < a or dims.n_b < b:
        raise ValueError(f"cannot embed {base.dims} into {dims}")
    t = base.rho.reshape(a, b, a, b)
    big = np.zeros((dims.n_a, dims.n_b, dims.n_a, dims.n_b), dtype=complex)
    big[:a, :b, :a, :b] = t
    return certify(big.reshape(dims.n, dims.n), dims, seed=base.seed, meta=dict(base.meta))


def _support(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return v[:, w > SUPPORT_TOL * w[-1]]


def _outside(vec: np.ndarray, support: np.ndarray) -> float:
    """Norm of the part of the unit vector ``vec`` orthogonal to ``support``."""
    u = vec / np.linalg.norm(vec)
    return float(np.linalg.norm(u - support @ (support.conj().T @ u)))


def hlvc_saturating(base: PptState, new_product: ProductVector, x: float = 0.5) -> PptState:
    """``(1 - x) base + x w w^dag`` with ``w = u (x) v``, where ``u`` and ``v``
    lie outside the local supports of ``base``.

    Independence of ``u`` from ``U1 = Im base_A`` (and of ``v`` from
    ``V1``) makes Im rho and Im rho^P the direct sums of those of base and
    the new vector, so both ranks grow by exactly one.
    """
    if not 0 < x < 1:
        raise ValueError(f"mixing weight must lie in (0, 1), got {x}")
    dims = base.dims
    if new_product.phi.shape != (dims.n_a,) or new_product.chi.shape != (dims.n_b,):
        raise ValueError("product vector does not match the state dimensions")
    ra, rb = reduced_states(base.rho, dims)
    if _outside(new_product.phi, _support(ra)) < SUPPORT_TOL:
        raise ValueError("u lies in the local support of the base state on A")
    if _outside(new_product.chi, _support(rb)) < SUPPORT_TOL:
        raise ValueError("v lies in the local support of the base state on B")
    w = new_product.psi / np.linalg.norm(new_product.psi)
    rho = (1 - x) * base.rho + x * np.outer(w, w.conj())
    return certify(rho, dims, seed=base.seed, meta=dict(base.meta))


def complement_product(base: PptState, rng, orthogonal: bool = False) -> ProductVector:
    """Random ``u (x) v`` with ``u`` and ``v`` outside the local supports.

    With ``orthogonal`` the vectors lie in the orthogonal complements;
    otherwise they also carry random components inside the supports.
    """
    rng = as_rng(rng)
    ra, rb = reduced_states(base.rho, base.dims)
    out = []
    for h in (ra, rb):
        s = _support(h)
        comp = np.linalg.svd(np.eye(len(h)) - s @ s.conj().T)[0][:, : len(h) - s.shape[1]]
        if comp.shape[1] == 0:
            raise ValueError("base state has full local rank; embed it in a larger system first")
        vec = comp @ random_unit(rng, comp.shape[1])
        if not orthogonal:
            vec = vec + s @ random_unit(rng, s.shape[1])
        out.append(vec / np.linalg.norm(vec))
    return ProductVector(out[0], out[1], 0.0)


def hlvc_chain(base: PptState, levels: int = 1, mixing=None, seed: int = 0,
               orthogonal: bool = False) -> Construction:
    """Repeat embed-and-extend ``levels`` times, each time growing both
    subsystems by one dimension."""
    mixing = list(mixing) if mixing is not None else [0.5] * levels
    if len(mixing) != levels:
        raise ValueError("need one mixing weight per level")
    rng = as_rng(seed)
    state = base
    comps = []
    for x in mixing:
        big = BipartiteDims(state.dims.n_a + 1, state.dims.n_b + 1)
        state = embed_state(state, big)
        w = complement_product(state, rng, orthogonal)
        state = hlvc_saturating(state, w, x)
        comps.append((x, w))
    recipe = ConstructionRecipe("hlvc_saturating", (state.dims.n_a, state.dims.n_b), seed,
                                mixing, levels=levels, orthogonal=orthogonal)
    state.meta = {"recipe": recipe.to_dict()}
    return Construction(state, recipe, comps)


def extract_extremal(state: PptState, w: np.ndarray) -> tuple[PptState, float]:
    """Split off the pure state ``w w^dag`` with the largest weight that keeps
    the remainder PSD: ``x = 1 / (w^dag rho^+ w)`` for ``w`` in Im rho.

    Returns the normalized remainder and ``x``.
    """
    w = w / np.linalg.norm(w)
    pinv = np.linalg.pinv(state.rho, rcond=1e-10, hermitian=True)
    x = 1.0 / float(np.real(w.conj() @ pinv @ w))
    rest = state.rho - x * np.outer(w, w.conj())
    return certify(rest, state.dims, seed=state.seed), x


def hlvc_bounds(dims: BipartiteDims) -> tuple[int, int]:
    """Lowest rank of an entangled PPT state with full local ranks, and the
    conjectured lowest rank of such an extremal state."""
    return max(dims.n_a, dims.n_b) + 1, dims.n_a + dims.n_b - 2


def load_seed_state() -> PptState:
    """The shipped 3x3 extremal state of ranks (4, 4)."""
    text = resources.files("pptrank.data").joinpath(SEED_FIXTURE).read_text(encoding="utf-8")
    return state_from_dict(json.loads(text))


def replay(recipe: ConstructionRecipe) -> Construction:
    dims = BipartiteDims(*recipe.dims)
    if recipe.kind == "separable_mixture":
        return separable_mixture(dims, recipe.k, recipe.seed)
    if recipe.kind == "hlvc_saturating":
        return hlvc_chain(load_seed_state(), recipe.levels, recipe.mixing, recipe.seed,
                          recipe.orthogonal)
    raise ValueError(f"unknown construction kind {recipe.kind!r}")
