"""Online adaptive estimators.

Single-step functions are pure: ``(state, r, d) -> (StepOutput, new_state)``.
The array kernels they are built on (``_jio_*``, ``_lms_*``) broadcast over
leading batch axes so the Monte Carlo harness can advance many independent
runs at once with the same arithmetic.

Conventions
-----------
* ``S`` has shape ``(..., M, D)``, ``w_bar`` ``(..., D)``, ``r`` ``(..., M)``.
* Outputs are ``x = w_bar^H S^H r`` and errors ``e = d - x``.
* Gradients are conjugate (Wirtinger) gradients ``dJ/dw_bar^*``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .numkernel import DegenerateBasisError, as_cmatrix, as_cvector, orthonormalize_columns


class DivergenceError(FloatingPointError):
    """Adaptive state became non-finite."""

    def __init__(self, step: int | None = None, what: str = "state"):
        self.step = step
        where = "" if step is None else f" at step {step}"
        super().__init__(f"divergence: non-finite {what}{where}")


@dataclass(frozen=True)
class StepOutput:
    x: complex
    e: complex


@dataclass(frozen=True)
class JioState:
    """Projection matrix ``S`` (M x D), reduced-rank weights ``w_bar`` and step sizes.

    ``eta = 0`` freezes the projection.
    """

    S: np.ndarray
    w_bar: np.ndarray
    mu: float
    eta: float
    step: int = 0

    def __post_init__(self):
        S = as_cmatrix(self.S, name="S")
        m, d = S.shape
        if not 1 <= d <= m:
            raise ValueError(f"rank D={d} must satisfy 1 <= D <= M={m}")
        w = as_cvector(self.w_bar, d, name="w_bar")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not self.eta >= 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        S.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "w_bar", w)

    @property
    def M(self) -> int:
        return self.S.shape[0]

    @property
    def D(self) -> int:
        return self.S.shape[1]

    @classmethod
    def initial(cls, M: int, D: int, mu: float, eta: float) -> "JioState":
        """Default start: ``S`` = first D identity columns, ``w_bar`` = 0."""
        return cls(S=initial_projection(M, D), w_bar=np.zeros(D, complex), mu=mu, eta=eta)


@dataclass(frozen=True)
class FullRankState:
    w: np.ndarray
    mu: float
    step: int = 0

    def __post_init__(self):
        w = as_cvector(self.w, name="w")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def initial(cls, M: int, mu: float) -> "FullRankState":
        return cls(w=np.zeros(M, complex), mu=mu)


def initial_projection(M: int, D: int) -> np.ndarray:
    return np.eye(M, D, dtype=np.complex128)


# array kernels, broadcast over leading axes

def _project(S, r):
    return np.einsum("...md,...m->...d", S.conj(), r)


def _inner(w, v):
    return np.einsum("...d,...d->...", w.conj(), v)


def _jio_output(S, w_bar, r):
    return _inner(w_bar, _project(S, r))


def _jio_gradients(S, w_bar, r, d):
    r_bar = _project(S, r)
    x = _inner(w_bar, r_bar)
    e = d - x
    ec = np.conj(e)
    grad_w = -ec[..., None] * r_bar
    grad_S = -ec[..., None, None] * (r[..., :, None] * w_bar.conj()[..., None, :])
    return x, e, grad_w, grad_S


def _jio_update(S, w_bar, r, d, mu, eta):
    x, e, grad_w, grad_S = _jio_gradients(S, w_bar, r, d)
    return x, e, S - eta * grad_S, w_bar - mu * grad_w


def _lms_update(w, r, d, mu):
    x = _inner(w, r)
    e = d - x
    return x, e, w - mu * (-np.conj(e)[..., None] * r)


def _check_step_inputs(r, d, M):
    r = as_cvector(r, M, name="r")
    d = complex(d)
    if not np.isfinite(d):
        raise ValueError("desired sample is non-finite")
    return r, d


# public single-step API

def jio_output(state: JioState, r) -> complex:
    """Scalar estimate ``x = w_bar^H S^H r``."""
    r = as_cvector(r, state.M, name="r")
    return complex(_jio_output(state.S, state.w_bar, r))


def gradient_w(state: JioState, r, d) -> np.ndarray:
    """Instantaneous conjugate gradient of ``|d - x|^2`` w.r.t. ``w_bar``: ``-e^* S^H r``."""
    r, d = _check_step_inputs(r, d, state.M)
    return _jio_gradients(state.S, state.w_bar, r, d)[2]


def gradient_S(state: JioState, r, d) -> np.ndarray:
    """Instantaneous conjugate gradient w.r.t. ``S``: ``-e^* r w_bar^H``."""
    r, d = _check_step_inputs(r, d, state.M)
    return _jio_gradients(state.S, state.w_bar, r, d)[3]


def jio_lms_step(state: JioState, r, d) -> tuple[StepOutput, JioState]:
    """One coupled LMS update of ``w_bar`` and ``S``.

    Both updates use the pre-update ``S``, ``w_bar`` and the shared error.
    """
    r, d = _check_step_inputs(r, d, state.M)
    x, e, S_new, w_new = _jio_update(state.S, state.w_bar, r, d, state.mu, state.eta)
    if not (np.all(np.isfinite(S_new)) and np.all(np.isfinite(w_new))):
        raise DivergenceError(state.step)
    out = StepOutput(x=complex(x), e=complex(e))
    return out, replace(state, S=S_new, w_bar=w_new, step=state.step + 1)


def fullrank_lms_step(state: FullRankState, r, d) -> tuple[StepOutput, FullRankState]:
    r, d = _check_step_inputs(r, d, state.w.shape[0])
    x, e, w_new = _lms_update(state.w, r, d, state.mu)
    if not np.all(np.isfinite(w_new)):
        raise DivergenceError(state.step)
    return StepOutput(complex(x), complex(e)), replace(state, w=w_new, step=state.step + 1)


def krylov_generators(R, p, D: int) -> np.ndarray:
    """Unnormalized generators ``[p, R p, ..., R^(D-1) p]``."""
    cols = [np.asarray(p, dtype=np.complex128)]
    for _ in range(D - 1):
        cols.append(R @ cols[-1])
    return np.column_stack(cols)


def krylov_projection(R, p, D: int) -> np.ndarray:
    """Orthonormal basis of the Krylov subspace spanned by ``p, Rp, ..., R^(D-1)p``.

    Returns fewer than ``D`` columns when the subspace degenerates.
    """
    R = as_cmatrix(R, name="R")
    M = R.shape[0]
    p = as_cvector(p, M, name="p")
    if not 1 <= D <= M:
        raise ValueError(f"rank D={D} must satisfy 1 <= D <= M={M}")
    if not np.any(p):
        raise DegenerateBasisError("degenerate basis: p is zero")
    # Normalizing each power keeps large D from overflowing; spans are unchanged.
    cols = [p / np.linalg.norm(p)]
    for _ in range(D - 1):
        v = R @ cols[-1]
        nrm = np.linalg.norm(v)
        if nrm == 0:
            break
        cols.append(v / nrm)
    return orthonormalize_columns(np.column_stack(cols))


def detect_bpsk(x):
    """Hard BPSK decision on the real part; ``Re(x) = 0`` maps to +1."""
    s = np.where(np.real(x) >= 0, 1.0, -1.0)
    return float(s) if np.ndim(s) == 0 else s


@dataclass(frozen=True)
class KrylovLmsState:
    """Krylov-subspace reduced-rank baseline.

    Running estimates of ``R`` and ``p`` (exponentially weighted with factor
    ``forgetting``) define an orthonormal Krylov basis of rank ``D``; a
    D-tap LMS filter with step ``mu`` adapts on the projected data. The basis
    is rebuilt from the moments available before each sample.
    """

    R_hat: np.ndarray
    p_hat: np.ndarray
    w_bar: np.ndarray
    mu: float
    forgetting: float = 0.998
    step: int = 0

    @classmethod
    def initial(cls, M: int, D: int, mu: float, forgetting: float = 0.998) -> "KrylovLmsState":
        if not 1 <= D <= M:
            raise ValueError(f"rank D={D} must satisfy 1 <= D <= M={M}")
        if not 0 < forgetting <= 1:
            raise ValueError(f"forgetting factor must lie in (0, 1], got {forgetting}")
        return cls(np.zeros((M, M), complex), np.zeros(M, complex),
                   np.zeros(D, complex), mu, forgetting)

    @property
    def basis(self) -> np.ndarray:
        return _krylov_basis(self.R_hat, self.p_hat, self.w_bar.shape[-1])


def _krylov_basis(R, p, D):
    """Classical Gram-Schmidt Krylov basis broadcast over leading axes.

    Unlike :func:`krylov_projection` no column is dropped; a vanishing
    generator yields a zero column so the batch keeps a fixed shape.
    """
    tiny = 1e-300
    cols = []
    v = p
    for k in range(D):
        if k:
            v = np.einsum("...ij,...j->...i", R, cols[-1])
        for _ in range(2):
            for q in cols:
                v = v - _inner(q, v)[..., None] * q
        nrm = np.linalg.norm(v, axis=-1, keepdims=True)
        ok = nrm > 1e-10 * np.maximum(np.linalg.norm(p, axis=-1, keepdims=True), tiny)
        cols.append(np.where(ok, v / np.maximum(nrm, tiny), 0.0))
    return np.stack(cols, axis=-1)


def _krylov_update(R_hat, p_hat, w_bar, r, d, mu, lam, count):
    S = _krylov_basis(R_hat, p_hat, w_bar.shape[-1])
    r_bar = _project(S, r)
    x = _inner(w_bar, r_bar)
    e = d - x
    w_new = w_bar + mu * np.conj(e)[..., None] * r_bar
    # lam = 1 gives the plain running average
    g = np.maximum(1.0 / (count + 1), 1.0 - lam)
    R_new = (1 - g) * R_hat + g * (r[..., :, None] * r.conj()[..., None, :])
    p_new = (1 - g) * p_hat + g * (np.conj(d)[..., None] * r)
    return x, e, R_new, p_new, w_new


def krylov_lms_step(state: KrylovLmsState, r, d) -> tuple[StepOutput, KrylovLmsState]:
    r, d = _check_step_inputs(r, d, state.p_hat.shape[0])
    x, e, R_new, p_new, w_new = _krylov_update(
        state.R_hat, state.p_hat, state.w_bar, r, d, state.mu, state.forgetting, state.step)
    if not np.all(np.isfinite(w_new)):
        raise DivergenceError(state.step)
    new = replace(state, R_hat=R_new, p_hat=p_new, w_bar=w_new, step=state.step + 1)
    return StepOutput(complex(x), complex(e)), new
