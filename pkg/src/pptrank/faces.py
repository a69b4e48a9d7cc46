"""Dimension of the face of the PPT cone at a state.

In coordinates, ``P`` projects onto the Hermitian matrices H with
``Im H`` inside ``Im rho`` (the map ``H -> Pi H Pi``) and ``Q_bar`` onto those
with ``Im H^P`` inside ``Im rho^P`` (the map ``H -> (Pi' H^P Pi')^P``). The
face of the PPT cone at rho is the intersection of the two subspaces, so its
dimension is the multiplicity of the eigenvalue 1 of ``P Q_bar P``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import (
    RANK_TOL,
    BipartiteDims,
    HermitianBasis,
    build_basis,
    eigh,
    partial_transpose,
    rank_from_spectrum,
    to_coords,
)
from .state import PptState

UNIT_TOL = 1e-6
GAP_WARN = 1e-4


class RankAmbiguityError(ValueError):
    """An eigenvalue sits too close to the rank threshold to call the rank."""


@dataclass
class FaceProjectors:
    p: np.ndarray
    q_bar: np.ndarray
    ranks: tuple[int, int]
    dims: BipartiteDims


@dataclass(frozen=True)
class FaceReport:
    dim_f: int
    lower_bound: int
    is_extremal: bool
    eigen_gap: float
    unreliable: bool

    def to_dict(self) -> dict:
        return {"dimF": self.dim_f, "bound": self.lower_bound,
                "extremal": self.is_extremal, "eigen_gap": self.eigen_gap}


def _image(h: np.ndarray, tau: float, what: str):
    w, v = eigh(h)
    lam_max = w[-1]
    r = rank_from_spectrum(w, tau)
    thr = tau * lam_max
    near = (w > thr / 10) & (w < thr * 10)
    if np.any(near):
        raise RankAmbiguityError(
            f"eigenvalue {w[near][0]:.3e} of {what} is within a factor 10 of the "
            f"rank threshold {thr:.3e}")
    vi = v[:, len(w) - r:]
    return vi @ vi.conj().T, r


def face_projectors(state: PptState, basis: HermitianBasis | None = None,
                    tau: float = RANK_TOL) -> FaceProjectors:
    dims = state.dims
    basis = basis or build_basis(dims)
    pi, m = _image(state.rho, tau, "rho")
    pi_pt, n = _image(partial_transpose(state.rho, dims), tau, "rho^P")
    mats = basis.matrices
    # column j holds the coordinates of the image of M_j
    p = to_coords(pi @ mats @ pi, basis).T
    q = to_coords(partial_transpose(pi_pt @ partial_transpose(mats, dims) @ pi_pt, dims), basis).T
    return FaceProjectors((p + p.T) / 2, (q + q.T) / 2, (m, n), dims)


def face_dimension(proj: FaceProjectors, order: str = "PQP") -> FaceReport:
    """Count eigenvalues of ``P Q_bar P`` (or ``Q_bar P Q_bar``) within
    ``UNIT_TOL`` of 1."""
    if order == "PQP":
        comp = proj.p @ proj.q_bar @ proj.p
    elif order == "QPQ":
        comp = proj.q_bar @ proj.p @ proj.q_bar
    else:
        raise ValueError(f"order must be 'PQP' or 'QPQ', got {order!r}")
    ev = np.linalg.eigvalsh((comp + comp.T) / 2)
    cnt = int(np.sum(ev > 1 - UNIT_TOL))
    if cnt == 0:
        gap = 0.0
    elif cnt == len(ev):
        gap = float(ev[-cnt])
    else:
        gap = float(ev[-cnt] - ev[-cnt - 1])
    m, n = proj.ranks
    return FaceReport(cnt, m * m + n * n - proj.dims.n ** 2, cnt == 1, gap, gap < GAP_WARN)


def analyze_face(state: PptState, basis: HermitianBasis | None = None) -> FaceReport:
    return face_dimension(face_projectors(state, basis))


def extremity_rank_bound(dims: BipartiteDims, m: int, n: int) -> bool:
    """Necessary condition for an extremal PPT state of ranks (m, n)."""
    return m * m + n * n <= dims.n ** 2 + 1
