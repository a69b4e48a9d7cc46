"""Certified PPT states and the JSON state-file format.

File layout::

    {"dims": [n_a, n_b],
     "matrix": [[[re, im], ...], ...],
     "meta": {"seed": ..., "target_ranks": [m, n], "achieved_ranks": [m, n],
              "residual": ..., "iterations": ...}}

Complex numbers are always ``[re, im]`` pairs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hilbert import (
    PSD_TOL,
    RANK_TOL,
    BipartiteDims,
    hermitize,
    local_ranks,
    partial_transpose,
    rank_from_spectrum,
)


class NotPPTError(ValueError):
    """Raised when a matrix fails the PSD certificate for rho or rho^P."""

    def __init__(self, message, min_eig_rho, min_eig_pt):
        super().__init__(message)
        self.min_eig_rho = min_eig_rho
        self.min_eig_pt = min_eig_pt


@dataclass
class PptState:
    dims: BipartiteDims
    rho: np.ndarray
    ranks: tuple[int, int]
    local_ranks: tuple[int, int]
    seed: int | None = None
    iterations_used: int = 0
    residual: float = 0.0
    target_ranks: tuple[int, int] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def rho_pt(self) -> np.ndarray:
        return partial_transpose(self.rho, self.dims)


def certify(rho: np.ndarray, dims: BipartiteDims, *, psd_tol: float = PSD_TOL,
            rank_tol: float = RANK_TOL, **provenance) -> PptState:
    """Normalize ``rho`` and check it is PPT with fresh eigensolves.

    Raises :class:`NotPPTError` when the smallest eigenvalue of rho or of
    rho^P is below ``-psd_tol``.
    """
    rho = hermitize(np.asarray(rho, dtype=complex))
    if rho.shape != (dims.n, dims.n):
        raise ValueError(f"matrix shape {rho.shape} does not match dims {dims}")
    tr = np.trace(rho).real
    if tr <= 0:
        raise NotPPTError("trace is not positive", float("nan"), float("nan"))
    rho = rho / tr
    w = np.linalg.eigvalsh(rho)
    wp = np.linalg.eigvalsh(partial_transpose(rho, dims))
    if w[0] < -psd_tol or wp[0] < -psd_tol:
        raise NotPPTError(
            f"not PPT: min eig(rho) = {w[0]:.3e}, min eig(rho^P) = {wp[0]:.3e}",
            float(w[0]), float(wp[0]))
    return PptState(
        dims=dims,
        rho=rho,
        ranks=(rank_from_spectrum(w, rank_tol), rank_from_spectrum(wp, rank_tol)),
        local_ranks=local_ranks(rho, dims, rank_tol),
        **provenance,
    )


def _pairs(a: np.ndarray) -> list:
    return np.stack([a.real, a.imag], axis=-1).tolist()


def state_to_dict(state: PptState) -> dict:
    meta = {
        "seed": state.seed,
        "target_ranks": list(state.target_ranks) if state.target_ranks else None,
        "achieved_ranks": list(state.ranks),
        "residual": state.residual,
        "iterations": state.iterations_used,
    }
    meta.update(state.meta)
    return {"dims": [state.dims.n_a, state.dims.n_b], "matrix": _pairs(state.rho), "meta": meta}


def matrix_from_pairs(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim < 1 or arr.shape[-1] != 2:
        raise ValueError("complex entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def state_from_dict(d: dict, *, certify_ppt: bool = True) -> PptState:
    try:
        dims = BipartiteDims(*[int(v) for v in d["dims"]])
        rho = matrix_from_pairs(d["matrix"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed state: {exc}") from exc
    if rho.shape != (dims.n, dims.n):
        raise ValueError(f"matrix shape {rho.shape} does not match dims {dims}")
    meta = dict(d.get("meta") or {})
    prov = dict(
        seed=meta.pop("seed", None),
        iterations_used=meta.pop("iterations", 0) or 0,
        residual=meta.pop("residual", 0.0) or 0.0,
        target_ranks=tuple(meta.pop("target_ranks")) if meta.get("target_ranks") else None,
    )
    meta.pop("target_ranks", None)
    meta.pop("achieved_ranks", None)
    if certify_ppt:
        return certify(rho, dims, meta=meta, **prov)
    w = np.linalg.eigvalsh(hermitize(rho))
    wp = np.linalg.eigvalsh(partial_transpose(hermitize(rho), dims))
    return PptState(dims, rho, (rank_from_spectrum(w), rank_from_spectrum(wp)),
                    local_ranks(rho, dims), meta=meta, **prov)


def save_state(state: PptState, path) -> None:
    Path(path).write_text(json.dumps(state_to_dict(state), indent=1), encoding="utf-8")


def load_state(path, *, certify_ppt: bool = True) -> PptState:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    return state_from_dict(d, certify_ppt=certify_ppt)
