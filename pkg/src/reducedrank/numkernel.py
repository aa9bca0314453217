"""Complex linear-algebra substrate shared by the filters, oracle and simulator.

Vectors and matrices are plain ``numpy`` arrays of ``complex128``. The helpers
here validate shapes and finiteness, solve Hermitian positive-definite systems
with an explicit pivot floor, estimate second-order moments and build
orthonormal bases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.linalg import solve_triangular

PIVOT_FLOOR = 1e-12
HERMITIAN_TOL = 1e-12
DEFLATION_TOL = 1e-10


class IllConditionedError(np.linalg.LinAlgError):
    """Raised when a Hermitian solve meets a pivot below the floor."""

    def __init__(self, pivot: float, index: int):
        self.pivot = pivot
        self.index = index
        super().__init__(
            f"ill-conditioned solve: pivot {index} has magnitude {pivot:.3e} "
            f"(floor {PIVOT_FLOOR:g})"
        )


class DegenerateBasisError(ValueError):
    """Raised when a set of columns spans only the zero vector."""


def as_cvector(x, length: int | None = None, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.complex128)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if length is not None and v.shape[0] != length:
        raise ValueError(f"{name} has length {v.shape[0]}, expected {length}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def as_cmatrix(a, shape: tuple[int | None, int | None] = (None, None),
               name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    for axis, want in enumerate(shape):
        if want is not None and m.shape[axis] != want:
            raise ValueError(f"{name} has shape {m.shape}, expected {shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return a.shape[0] == a.shape[1] and bool(np.all(np.abs(a - a.conj().T) <= tol))


def cholesky(a) -> np.ndarray:
    """Lower Cholesky factor of a Hermitian positive-definite matrix.

    Raises
    ------
    IllConditionedError
        If any pivot ``L[j, j]**2`` falls below ``PIVOT_FLOOR`` (this includes
        indefinite matrices, whose pivots go negative).
    """
    a = as_cmatrix(a, name="A")
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError(f"A must be square, got shape {a.shape}")
    if not is_hermitian(a):
        raise ValueError("A is not Hermitian within 1e-12")
    low = np.zeros_like(a)
    for j in range(n):
        row = low[j, :j]
        pivot = (a[j, j] - np.vdot(row, row)).real
        if not pivot >= PIVOT_FLOOR:
            raise IllConditionedError(abs(pivot), j)
        ljj = np.sqrt(pivot)
        low[j, j] = ljj
        if j + 1 < n:
            low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ row.conj()) / ljj
    return low


def hermitian_solve(a, b) -> np.ndarray:
    """Solve ``A x = b`` for Hermitian positive-definite ``A``.

    No diagonal loading is applied: a pivot under the floor raises
    :class:`IllConditionedError` and the caller decides what to do.
    """
    low = cholesky(a)
    b = as_cvector(b, low.shape[0], name="b")
    y = solve_triangular(low, b, lower=True)
    return solve_triangular(low.conj().T, y, lower=False)


@dataclass(frozen=True)
class MomentSet:
    """Second-order statistics of an observation ``r`` and desired signal ``d``.

    Attributes
    ----------
    R : ndarray, shape (M, M)
        Hermitian covariance ``E[r r^H]``.
    p : ndarray, shape (M,)
        Cross-correlation ``E[d^* r]``.
    sigma_d_sq : float
        Desired-signal power ``E[|d|^2]``.
    sample_count : int
        Number of samples averaged, 0 for analytic moments.
    """

    R: np.ndarray
    p: np.ndarray
    sigma_d_sq: float
    sample_count: int = 0

    def __post_init__(self):
        R = as_cmatrix(self.R, name="R")
        if R.shape[0] != R.shape[1]:
            raise ValueError(f"R must be square, got {R.shape}")
        p = as_cvector(self.p, R.shape[0], name="p")
        if self.sigma_d_sq < 0:
            raise ValueError(f"sigma_d_sq must be nonnegative, got {self.sigma_d_sq}")
        if self.sample_count < 0:
            raise ValueError("sample_count must be nonnegative")
        R.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "sigma_d_sq", float(self.sigma_d_sq))

    @property
    def dim(self) -> int:
        return self.R.shape[0]


def estimate_moments(samples: Iterable) -> MomentSet:
    """Sample-average moments from ``(r, d)`` pairs.

    ``samples`` may be an iterable of pairs or a tuple ``(r_block, d_block)``
    with ``r_block`` of shape ``(T, M)`` and ``d_block`` of shape ``(T,)``.
    """
    if (isinstance(samples, tuple) and len(samples) == 2
            and np.ndim(samples[0]) == 2):
        r = np.asarray(samples[0], dtype=np.complex128)
        d = np.asarray(samples[1], dtype=np.complex128)
    else:
        pairs = list(samples)
        if not pairs:
            raise ValueError("no samples")
        lengths = {np.size(r) for r, _ in pairs}
        if len(lengths) != 1:
            raise ValueError(f"samples have differing lengths {sorted(lengths)}")
        r = np.array([np.asarray(r, dtype=np.complex128).ravel() for r, _ in pairs])
        d = np.array([complex(d) for _, d in pairs])
    if r.shape[0] == 0:
        raise ValueError("no samples")
    if d.shape != (r.shape[0],):
        raise ValueError(f"desired block shape {d.shape} does not match {r.shape}")
    t = r.shape[0]
    R = (r.T @ r.conj()) / t
    R = 0.5 * (R + R.conj().T)
    p = (d.conj() @ r) / t
    sigma_d_sq = float(np.sum(np.abs(d) ** 2) / t)
    return MomentSet(R=R, p=p, sigma_d_sq=sigma_d_sq, sample_count=t)


def orthonormalize_columns(b) -> np.ndarray:
    """Orthonormal basis for the column span of ``b``, in column order.

    Modified Gram-Schmidt with one re-orthogonalization pass. Columns whose
    residual norm drops below ``DEFLATION_TOL`` are dropped, so the result may
    have fewer columns than the input. Each kept column has a real positive
    component along its generator, which makes the basis a continuous function
    of the input.
    """
    b = as_cmatrix(b, name="B")
    kept: list[np.ndarray] = []
    for j in range(b.shape[1]):
        v = b[:, j].copy()
        for _ in range(2):
            for q in kept:
                v -= np.vdot(q, v) * q
        nrm = np.linalg.norm(v)
        if nrm < DEFLATION_TOL:
            continue
        kept.append(v / nrm)
    if not kept:
        raise DegenerateBasisError("degenerate basis: all columns vanish")
    return np.column_stack(kept)


def projector(basis: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the column span of ``basis``."""
    q = orthonormalize_columns(basis)
    return q @ q.conj().T


def random_hpd(m: int, rng: np.random.Generator, cond_floor: float = 0.1) -> np.ndarray:
    """Random Hermitian positive-definite matrix, used by tests and examples."""
    g = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    a = g @ g.conj().T / m + cond_floor * np.eye(m)
    return 0.5 * (a + a.conj().T)


def crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Circular complex Gaussian samples with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
