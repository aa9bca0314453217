"""Monte Carlo engine: per-run data synthesis and batched filter runs.

Run ``j`` draws everything (codes, powers, channels, bits, noise) from
``numpy.random.default_rng(base_seed + j)``. Filters for all runs advance
together along a leading batch axis; step sizes may add one more leading
axis so a whole step-size grid is evaluated in a single pass.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import cdma
from ..filters import (_jio_update, _krylov_basis, _krylov_update, _lms_update,
                       _inner, _project, detect_bpsk, initial_projection)
from ..numkernel import estimate_moments
from ..oracle import fullrank_mmse
from .config import ExperimentConfig

log = logging.getLogger(__name__)

# |x| beyond this counts as divergence before it overflows to inf
_BLOWUP = 1e100


@dataclass
class RunData:
    """Received vectors and desired symbols for a batch of runs."""

    seeds: np.ndarray
    r: np.ndarray                       # (R, T, M)
    d: np.ndarray                       # (R, T) real +-1
    scenarios: list = field(default_factory=list)
    channels: list = field(default_factory=list)
    mmse: np.ndarray | None = None      # (R,) linear MMSE of each static run

    @property
    def num_runs(self) -> int:
        return self.r.shape[0]

    @property
    def num_symbols(self) -> int:
        return self.r.shape[1]

    def subset(self, n: int) -> "RunData":
        return RunData(self.seeds[:n], self.r[:n], self.d[:n], self.scenarios[:n],
                       self.channels[:n], None if self.mmse is None else self.mmse[:n])


def draw_run(cfg: ExperimentConfig, seed: int, num_symbols: int, fading: bool):
    rng = np.random.default_rng(seed)
    sc = cdma.CdmaScenario.draw(K=cfg.K, N=cfg.N, snr_db=cfg.snr_db, sigma_db=cfg.sigma_db,
                                L=cfg.L, L_s=cfg.L_s, seed=seed, rng=rng)
    if fading:
        ch = cdma.fading_multipath(rng, cfg.K, num_symbols, cfg.doppler, L=cfg.L)
    else:
        ch = cdma.draw_multipath(rng, cfg.K, L=cfg.L)
    stream = cdma.generate_stream(sc, ch, num_symbols, rng)
    return sc, ch, stream


def static_mmse(cfg: ExperimentConfig, sc, ch, seed: int) -> float:
    """MMSE of the full-rank Wiener receiver for one static run.

    Uses the exact moments of the scenario, or sample moments from
    ``cfg.moment_samples`` fresh frames when that is positive.
    """
    if cfg.moment_samples > 0:
        rng = np.random.default_rng([seed, 1])
        big = cdma.generate_stream(sc, ch, cfg.moment_samples, rng)
        moments = estimate_moments((big.r, big.desired))
    else:
        moments = cdma.scenario_moments(sc, ch.taps)
    return fullrank_mmse(moments)[1]


def generate_runs(cfg: ExperimentConfig, num_runs: int | None = None,
                  num_symbols: int | None = None, fading: bool = False) -> RunData:
    num_runs = cfg.num_runs if num_runs is None else num_runs
    T = cfg.num_symbols if num_symbols is None else num_symbols
    seeds = cfg.base_seed + np.arange(num_runs)
    rs, ds, scs, chs, mmses = [], [], [], [], []
    for seed in seeds:
        sc, ch, stream = draw_run(cfg, int(seed), T, fading)
        rs.append(stream.r)
        ds.append(stream.desired.real)
        scs.append(sc)
        chs.append(ch)
        if not fading:
            mmses.append(static_mmse(cfg, sc, ch, int(seed)))
    return RunData(seeds=seeds, r=np.stack(rs), d=np.stack(ds), scenarios=scs, channels=chs,
                   mmse=None if fading else np.array(mmses))


@dataclass
class Trace:
    """Filter outputs ``x`` with shape ``(*grid, R, T)`` and a divergence mask ``(*grid, R)``."""

    x: np.ndarray
    diverged: np.ndarray

    def sq_error(self, d: np.ndarray) -> np.ndarray:
        return np.abs(d - self.x) ** 2

    def decision_errors(self, d: np.ndarray) -> np.ndarray:
        return (detect_bpsk(self.x) != d).astype(float)


def _grid_shape(params: dict) -> tuple[int, ...]:
    shapes = [np.shape(v) for v in params.values()]
    return np.broadcast_shapes(*shapes) if shapes else ()


def _expand(v, extra: int):
    v = np.asarray(v, float)
    return v.reshape(v.shape + (1,) * extra)


def run_filter(algorithm: str, data: RunData, rank: int = 3, training: int | None = None,
               forgetting: float = 0.998, **steps) -> Trace:
    """Run one algorithm on every run of ``data``.

    Step sizes (``mu``, and ``eta`` for JIO) may be scalars or arrays; array
    step sizes broadcast into leading grid axes of the result. With
    ``training`` set, symbols at and after that index adapt on the detector's
    own decisions instead of the true symbols.
    """
    r, d = data.r, data.d.astype(np.complex128)
    R, T, M = r.shape
    grid = _grid_shape(steps)
    lead = grid + (R,)
    training = T if training is None else training
    mu = _expand(steps["mu"], 2)
    if algorithm == "full":
        state = [np.zeros(lead + (M,), complex)]
    elif algorithm == "jio":
        eta = _expand(steps.get("eta", 0.0), 3)
        S0 = np.broadcast_to(initial_projection(M, rank), lead + (M, rank)).copy()
        state = [S0, np.zeros(lead + (rank,), complex)]
    elif algorithm == "krylov":
        state = [np.zeros(lead + (M, M), complex), np.zeros(lead + (M,), complex),
                 np.zeros(lead + (rank,), complex)]
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")

    xs = np.empty(lead + (T,), complex)
    diverged = np.zeros(lead, bool)
    with np.errstate(all="ignore"):
        for i in range(T):
            ri = r[:, i]
            if i < training:
                ref = d[:, i]
            else:
                ref = detect_bpsk(_output(algorithm, state, ri, rank)).astype(complex)
            if algorithm == "full":
                x, _, w = _lms_update(state[0], ri, ref, mu)
                state = [w]
            elif algorithm == "jio":
                x, _, S, w = _jio_update(state[0], state[1], ri, ref, mu, eta)
                state = [S, w]
            else:
                x, _, Rh, ph, w = _krylov_update(state[0], state[1], state[2], ri, ref,
                                                 mu, forgetting, i)
                state = [Rh, ph, w]
            bad = ~np.isfinite(x) | (np.abs(x) > _BLOWUP)
            bad |= ~np.all(np.isfinite(state[-1]), axis=-1)
            if np.any(bad & ~diverged):
                diverged |= bad
                for s in state:
                    s[diverged] = 0
            xs[..., i] = np.where(diverged, np.nan, x)
    n_div = int(diverged.sum())
    if n_div:
        log.warning("%s: %d of %d runs diverged and are excluded", algorithm, n_div, diverged.size)
    return Trace(x=xs, diverged=diverged)


def _output(algorithm: str, state, r, rank):
    if algorithm == "full":
        return _inner(state[0], r)
    if algorithm == "jio":
        return _inner(state[1], _project(state[0], r))
    return _inner(state[2], _project(_krylov_basis(state[0], state[1], rank), r))


def run_mean(values: np.ndarray, diverged: np.ndarray) -> np.ndarray:
    """Mean over the run axis (second to last), skipping diverged runs.

    Values are sorted along the run axis before summing, so the result does
    not depend on the order in which runs were executed.
    """
    keep = ~diverged
    vals = np.where(keep[..., None], values, 0.0)
    count = keep.sum(axis=-1)[..., None]
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.sort(vals, axis=-2).sum(axis=-2) / count


def oracle_receiver_outputs(cfg: ExperimentConfig, data: RunData) -> np.ndarray:
    """Outputs of the MMSE receiver recomputed each symbol from the true moments."""
    xs = np.empty(data.d.shape, complex)
    for j, (sc, ch) in enumerate(zip(data.scenarios, data.channels)):
        taps = ch.taps if not ch.static else np.broadcast_to(ch.taps, (data.num_symbols,) + ch.taps.shape)
        R, p = cdma.batched_moments(sc, taps)
        w = np.linalg.solve(R, p[..., None])[..., 0]
        xs[j] = np.einsum("tm,tm->t", w.conj(), data.r[j])
    return xs
