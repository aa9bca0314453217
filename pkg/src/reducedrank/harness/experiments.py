"""The three experiments: MSE learning curves, MSE versus rank, BER tracking."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .montecarlo import (RunData, generate_runs, oracle_receiver_outputs, run_filter,
                         run_mean)

log = logging.getLogger(__name__)


@dataclass
class LearningCurve:
    """Columns of a metric against a shared x axis, in insertion order.

    ``metric`` is ``"mse_db"`` (10 log10 of the run-averaged squared error)
    or ``"ber"``.
    """

    x_name: str
    x: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)
    metric: str = "mse_db"
    runs: int = 0
    diverged: dict[str, int] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x)
        for name, col in self.columns.items():
            if np.shape(col) != self.x.shape:
                raise ValueError(f"column {name!r} has shape {np.shape(col)}, x has {self.x.shape}")

    def add(self, name: str, values) -> None:
        values = np.asarray(values, float)
        if values.shape != self.x.shape:
            raise ValueError(f"column {name!r} has shape {values.shape}, x has {self.x.shape}")
        self.columns[name] = values


def to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


def steady_state(mse_linear: np.ndarray, fraction: float = 0.1) -> np.ndarray:
    """Mean of the last ``fraction`` of a linear MSE curve (along the last axis)."""
    n = max(1, int(round(mse_linear.shape[-1] * fraction)))
    return mse_linear[..., -n:].mean(axis=-1)


def smooth(curve: np.ndarray, width: int) -> np.ndarray:
    """Centered moving average with shrinking windows at the edges."""
    if width <= 1:
        return curve
    kernel = np.ones(width)
    num = np.convolve(curve, kernel, mode="same")
    den = np.convolve(np.ones_like(curve), kernel, mode="same")
    return num / den


def convergence_index(mse_linear: np.ndarray, steady_linear: float, tol_db: float = 1.0,
                      width: int = 25) -> int:
    """First symbol index (0-based) where the smoothed curve is within ``tol_db`` of steady state.

    Returns the curve length if it never gets there.
    """
    db = to_db(smooth(mse_linear, width))
    hit = np.nonzero(db <= to_db(steady_linear) + tol_db)[0]
    return int(hit[0]) if hit.size else int(mse_linear.shape[-1])


def _mse_curve(cfg: ExperimentConfig, algorithm: str, data: RunData, rank: int,
               **steps) -> tuple[np.ndarray, np.ndarray]:
    trace = run_filter(algorithm, data, rank=rank, forgetting=cfg.forgetting, **steps)
    return run_mean(trace.sq_error(data.d), trace.diverged), trace.diverged


def run_mse_vs_symbols(cfg: ExperimentConfig, data: RunData | None = None) -> LearningCurve:
    """Run-averaged squared error per symbol for each configured algorithm.

    Adds an ``mmse`` column holding the Wiener-receiver floor averaged over
    runs. The desired signal is user 1's symbol.
    """
    data = generate_runs(cfg) if data is None else data
    curve = LearningCurve("symbol", np.arange(1, data.num_symbols + 1), runs=data.num_runs)
    for alg in cfg.algorithms:
        mse, div = _mse_curve(cfg, alg, data, cfg.rank, **cfg.step_sizes(alg))
        curve.add(alg, to_db(mse))
        curve.diverged[alg] = int(div.sum())
        curve.meta[alg] = {"steady_db": float(to_db(steady_state(mse, cfg.steady_fraction))),
                           "convergence_index": convergence_index(mse, steady_state(mse, cfg.steady_fraction))}
    curve.add("mmse", np.full(data.num_symbols, to_db(data.mmse.mean())))
    return curve


def _grid(algorithm: str, cfg: ExperimentConfig) -> dict:
    g = np.asarray(cfg.step_grid, float)
    if algorithm == "jio":
        mu, eta = np.meshgrid(g, g, indexing="ij")
        return {"mu": mu.ravel(), "eta": eta.ravel()}
    return {"mu": g}


def tune_steps(cfg: ExperimentConfig, algorithm: str, data: RunData, rank: int) -> dict:
    """Grid-search step sizes minimizing steady-state MSE.

    Any grid point with a diverged run is disqualified.
    """
    grid = _grid(algorithm, cfg)
    mse, div = _mse_curve(cfg, algorithm, data, rank, **grid)
    ss = steady_state(mse, cfg.steady_fraction)
    ss = np.where(div.any(axis=-1) | ~np.isfinite(ss), np.inf, ss)
    best = int(np.argmin(ss))
    return {k: float(v[best]) for k, v in grid.items()}


def run_mse_vs_rank(cfg: ExperimentConfig, ranks=None, data: RunData | None = None) -> LearningCurve:
    """Steady-state MSE (dB) per rank with grid-optimized step sizes.

    Step sizes are searched on the first ``grid_runs`` runs, then every
    algorithm is evaluated on all runs. The full-rank filter does not depend
    on the rank and is evaluated once.
    """
    ranks = tuple(cfg.ranks if ranks is None else ranks)
    bad = [D for D in ranks if not 1 <= D <= cfg.M]
    if bad:
        raise ValueError(f"ranks {bad} outside [1, M={cfg.M}]")
    data = generate_runs(cfg) if data is None else data
    search = data.subset(min(cfg.grid_runs, data.num_runs))
    curve = LearningCurve("rank", np.asarray(ranks), runs=data.num_runs)
    chosen: dict = {}
    for alg in cfg.algorithms:
        col = np.empty(len(ranks))
        div_total = 0
        if alg == "full":
            steps = tune_steps(cfg, alg, search, rank=1)
            mse, div = _mse_curve(cfg, alg, data, 1, **steps)
            col[:] = to_db(steady_state(mse, cfg.steady_fraction))
            chosen[alg] = {D: steps for D in ranks}
            div_total = int(div.sum())
        else:
            chosen[alg] = {}
            for j, D in enumerate(ranks):
                steps = tune_steps(cfg, alg, search, rank=D)
                mse, div = _mse_curve(cfg, alg, data, D, **steps)
                col[j] = to_db(steady_state(mse, cfg.steady_fraction))
                chosen[alg][D] = steps
                div_total += int(div.sum())
                log.info("%s D=%d steps=%s steady=%.2f dB", alg, D, steps, col[j])
        curve.add(alg, col)
        curve.diverged[alg] = div_total
    curve.add("mmse", np.full(len(ranks), to_db(data.mmse.mean())))
    curve.meta["steps"] = chosen
    return curve


def trailing_mean(values: np.ndarray, width: int) -> np.ndarray:
    """Mean over the last ``width`` samples up to and including each index."""
    c = np.cumsum(np.concatenate([[0.0], values]))
    idx = np.arange(1, values.shape[0] + 1)
    lo = np.maximum(0, idx - width)
    return (c[idx] - c[lo]) / (idx - lo)


def run_ber_vs_symbols(cfg: ExperimentConfig, data: RunData | None = None,
                       oracle: bool = True) -> LearningCurve:
    """BER tracking under Clarke fading with training then decision-directed mode.

    Each column is the run-averaged bit error rate over a trailing window of
    ``ber_window`` symbols. The optional ``oracle`` column is the MMSE
    receiver rebuilt every symbol from the true channel.
    """
    if cfg.training_symbols >= cfg.num_symbols:
        raise ValueError("training_symbols must be smaller than num_symbols for a BER run")
    data = generate_runs(cfg, fading=True) if data is None else data
    curve = LearningCurve("symbol", np.arange(1, data.num_symbols + 1), metric="ber",
                          runs=data.num_runs)
    for alg in cfg.algorithms:
        trace = run_filter(alg, data, rank=cfg.rank, training=cfg.training_symbols,
                           forgetting=cfg.forgetting, **cfg.step_sizes(alg))
        ber = run_mean(trace.decision_errors(data.d), trace.diverged)
        curve.add(alg, trailing_mean(ber, cfg.ber_window))
        curve.diverged[alg] = int(trace.diverged.sum())
    if oracle:
        x = oracle_receiver_outputs(cfg, data)
        errs = (np.where(np.real(x) >= 0, 1.0, -1.0) != data.d).astype(float)
        curve.add("oracle", trailing_mean(errs.mean(axis=0), cfg.ber_window))
    return curve


def match_fullrank_step(cfg: ExperimentConfig, target_db: float, data: RunData,
                        candidates=None) -> tuple[float, float]:
    """Full-rank LMS step whose steady-state MSE is closest to ``target_db``.

    Steady-state MSE is not monotone in the step size: below the best step
    the filter has simply not finished converging inside the record. Only
    steps at or above the best one, where the level is set by misadjustment,
    are eligible. Returns ``(mu, steady_db)``.
    """
    mus = np.geomspace(1e-3, 0.2, 41) if candidates is None else np.sort(np.asarray(candidates, float))
    mse, div = _mse_curve(cfg, "full", data, 1, mu=mus)
    ss = to_db(steady_state(mse, cfg.steady_fraction))
    ss = np.where(div.any(axis=-1), np.inf, ss)
    converged = np.arange(mus.size) >= int(np.argmin(ss))
    gap = np.where(converged, np.abs(ss - target_db), np.inf)
    best = int(np.argmin(gap))
    return float(mus[best]), float(ss[best])
