"""Batch MMSE designs from known second-order statistics.

Given moments ``(R, p, sigma_d^2)`` these functions compute the Wiener
filter, the optimal reduced-rank weights for a fixed projection, the optimal
projection for fixed weights, and the alternating fixed point between the
two. All MSE values are linear (not dB).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .filters import initial_projection
from .numkernel import MomentSet, as_cmatrix, as_cvector, hermitian_solve

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITERS = 200


class DegenerateWeightsError(ValueError):
    """The projection update needs a nonzero weight vector."""


@dataclass(frozen=True)
class ReducedMoments:
    """Moments of the projected data ``S^H r`` together with the ``S`` that produced them."""

    S: np.ndarray
    R_bar: np.ndarray
    p_bar: np.ndarray

    @classmethod
    def project(cls, S, m: MomentSet) -> "ReducedMoments":
        S = as_cmatrix(S, (m.dim, None), name="S")
        R_bar = S.conj().T @ m.R @ S
        R_bar = 0.5 * (R_bar + R_bar.conj().T)
        return cls(S=S, R_bar=R_bar, p_bar=S.conj().T @ m.p)


@dataclass
class JointDesign:
    S: np.ndarray
    w_bar: np.ndarray
    mse_trajectory: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def mse(self) -> float:
        return self.mse_trajectory[-1]

    @property
    def composite(self) -> np.ndarray:
        """Equivalent full-rank filter ``S w_bar``."""
        return self.S @ self.w_bar


def fullrank_mmse(m: MomentSet) -> tuple[np.ndarray, float]:
    """Wiener filter ``R^-1 p`` and its MMSE ``sigma_d^2 - p^H R^-1 p``."""
    w = hermitian_solve(m.R, m.p)
    J = m.sigma_d_sq - np.vdot(m.p, w).real
    return w, max(J, 0.0)


def reduced_w_mmse(S, m: MomentSet) -> np.ndarray:
    """Optimal reduced-rank weights ``(S^H R S)^-1 S^H p`` for a fixed projection."""
    red = ReducedMoments.project(S, m)
    return hermitian_solve(red.R_bar, red.p_bar)


def projection_mmse(m: MomentSet, w_bar, S_prev=None) -> np.ndarray:
    """Optimal projection for fixed reduced-rank weights.

    The stationarity condition ``R S R_w = P_D`` with ``P_D = p w^H`` and the
    rank-one ``R_w = w w^H`` is solved with the pseudo-inverse of ``R_w``,
    giving ``S = R^-1 p w^H / |w|^2``. Only the component of ``S`` along
    ``w_bar`` is determined; when ``S_prev`` is given its component in the
    orthogonal complement of ``w_bar`` is carried over.
    """
    w_bar = as_cvector(w_bar, name="w_bar")
    nrm2 = np.vdot(w_bar, w_bar).real
    if nrm2 == 0:
        raise DegenerateWeightsError("degenerate weights: w_bar is zero")
    f = hermitian_solve(m.R, m.p)
    S = np.outer(f, w_bar.conj()) / nrm2
    if S_prev is not None:
        S_prev = as_cmatrix(S_prev, (m.dim, w_bar.shape[0]), name="S_prev")
        complement = np.eye(w_bar.shape[0]) - np.outer(w_bar, w_bar.conj()) / nrm2
        S = S + S_prev @ complement
    return S


def mse_given(S, w_bar, m: MomentSet) -> float:
    """MSE ``sigma_d^2 - 2 Re(w^H S^H p) + w^H S^H R S w`` of a given design."""
    S = as_cmatrix(S, (m.dim, None), name="S")
    w_bar = as_cvector(w_bar, S.shape[1], name="w_bar")
    f = S @ w_bar
    return float(m.sigma_d_sq - 2 * np.vdot(f, m.p).real + np.vdot(f, m.R @ f).real)


def mmse_given_S(S, m: MomentSet) -> float:
    """MMSE attainable with projection ``S``: ``sigma_d^2 - p_bar^H R_bar^-1 p_bar``."""
    red = ReducedMoments.project(S, m)
    w = hermitian_solve(red.R_bar, red.p_bar)
    return float(m.sigma_d_sq - np.vdot(red.p_bar, w).real)


def joint_fixed_point(m: MomentSet, D: int, init_S=None, tol: float = DEFAULT_TOL,
                      max_iters: int = DEFAULT_MAX_ITERS) -> JointDesign:
    """Alternate the weight and projection designs until the MSE settles.

    Each iteration computes the optimal weights for the current projection,
    records the resulting MSE, then updates the projection for those weights.
    Stops when successive MSE values differ by less than ``tol``.
    """
    M = m.dim
    if not 1 <= D <= M:
        raise ValueError(f"rank D={D} must satisfy 1 <= D <= M={M}")
    S = initial_projection(M, D) if init_S is None else as_cmatrix(init_S, (M, D), name="init_S")
    design = JointDesign(S=S, w_bar=np.zeros(D, complex))
    for _ in range(max_iters):
        w = reduced_w_mmse(S, m)
        J = mse_given(S, w, m)
        design.S, design.w_bar = S, w
        design.mse_trajectory.append(J)
        if len(design.mse_trajectory) > 1 and abs(design.mse_trajectory[-2] - J) < tol:
            design.converged = True
            break
        if not np.any(w):
            # p has no component in span(S); the projection update is undefined
            break
        S = projection_mmse(m, w, S_prev=S)
    return design
