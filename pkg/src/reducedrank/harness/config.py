"""Experiment configuration: flat ``key = value`` files plus CLI overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

ALGORITHMS = ("full", "jio", "krylov")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ranks(text: str) -> tuple[int, ...]:
    out: list[int] = []
    for part in text.replace(",", " ").split():
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _algorithms(text: str) -> tuple[str, ...]:
    return tuple(a.strip() for a in text.replace(",", " ").split())


@dataclass(frozen=True)
class ExperimentConfig:
    """All knobs of an experiment run.

    Scenario fields mirror :class:`reducedrank.cdma.CdmaScenario`; ``doppler``
    is the normalized Doppler ``f_d T`` used by the BER experiment.
    """

    # scenario
    K: int = 6
    N: int = 16
    L: int = 8
    L_s: int = 2
    snr_db: float = 15.0
    sigma_db: float = 1.5
    doppler: float = 3e-4
    # algorithms
    algorithms: tuple[str, ...] = ALGORITHMS
    rank: int = 3
    mu_full: float = 0.01
    mu_jio: float = 0.003
    eta_jio: float = 0.1
    mu_krylov: float = 0.01
    forgetting: float = 0.998
    # protocol
    num_runs: int = 100
    num_symbols: int = 1500
    training_symbols: int = 500
    base_seed: int = 1
    ber_window: int = 200
    steady_fraction: float = 0.1
    ranks: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8)
    step_grid: tuple[float, ...] = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 1e-1)
    grid_runs: int = 20
    moment_samples: int = 0
    output: str = "results.csv"

    def __post_init__(self):
        errors = []
        if self.K < 1:
            errors.append(f"K must be >= 1 (got {self.K})")
        if self.N < 2:
            errors.append(f"N must be >= 2 (got {self.N})")
        if self.L < 1 or self.L_s < 1:
            errors.append(f"L and L_s must be >= 1 (got L={self.L}, L_s={self.L_s})")
        M = self.N + self.L - 1
        if not 1 <= self.rank <= M:
            errors.append(f"rank D={self.rank} must lie in [1, M={M}]")
        bad = [d for d in self.ranks if not 1 <= d <= M]
        if bad:
            errors.append(f"ranks {bad} outside [1, M={M}]")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            errors.append(f"unknown algorithms {unknown}; choose from {list(ALGORITHMS)}")
        if self.num_runs < 1:
            errors.append(f"num_runs must be >= 1 (got {self.num_runs})")
        if self.num_symbols < 1:
            errors.append(f"num_symbols must be >= 1 (got {self.num_symbols})")
        if not 0 <= self.training_symbols <= self.num_symbols:
            errors.append(f"training_symbols={self.training_symbols} must lie in "
                          f"[0, num_symbols={self.num_symbols}]")
        for name in ("mu_full", "mu_jio", "mu_krylov"):
            if not getattr(self, name) > 0:
                errors.append(f"{name} must be positive")
        if self.eta_jio < 0:
            errors.append("eta_jio must be nonnegative")
        if not 0 < self.doppler < 0.5:
            errors.append(f"doppler must lie in (0, 0.5) (got {self.doppler})")
        if not 0 < self.forgetting <= 1:
            errors.append(f"forgetting must lie in (0, 1] (got {self.forgetting})")
        if not 0 < self.steady_fraction <= 1:
            errors.append("steady_fraction must lie in (0, 1]")
        if self.ber_window < 1 or self.grid_runs < 1:
            errors.append("ber_window and grid_runs must be >= 1")
        if errors:
            raise ConfigError("; ".join(errors))

    @property
    def M(self) -> int:
        return self.N + self.L - 1

    def step_sizes(self, algorithm: str) -> dict:
        return {"full": {"mu": self.mu_full},
                "jio": {"mu": self.mu_jio, "eta": self.eta_jio},
                "krylov": {"mu": self.mu_krylov}}[algorithm]

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_PARSERS = {int: int, float: float, str: str}
_SPECIAL = {"algorithms": _algorithms, "ranks": _ranks, "step_grid": _floats}


def _coerce(name: str, raw: str):
    if name in _SPECIAL:
        return _SPECIAL[name](raw)
    kind = {f.name: f.type for f in fields(ExperimentConfig)}[name]
    kind = {"int": int, "float": float, "str": str}.get(kind, kind)
    try:
        return _PARSERS[kind](raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    known = {f.name for f in fields(ExperimentConfig)}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def parse_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a validated config from an optional file and override mapping.

    Override values may be strings (as from the command line) or already
    typed values.
    """
    values = {}
    if path is not None:
        path = Path(path)
        values.update(parse_config_text(path.read_text(), str(path)))
    known = {f.name for f in fields(ExperimentConfig)}
    for key, val in (overrides or {}).items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _coerce(key, val) if isinstance(val, str) else val
    return ExperimentConfig(**values)


def format_config(cfg: ExperimentConfig) -> str:
    """Canonical ``key = value`` rendering, readable by :func:`parse_config`."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
