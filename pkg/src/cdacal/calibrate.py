"""Scalar temperature fitting and class-distribution-aware temperature vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ClassFrequencyProfile, LogitSet, ProbSet, TemperatureVector, softmax
from .errors import FitFailureError, InvalidInputError, InvalidTemperatureError, ShapeError

CDA_TS_GAMMA = 0.1


@dataclass(frozen=True)
class TsFitConfig:
    t_min: float = 0.05
    t_max: float = 10.0
    coarse_steps: int = 200
    refine_rounds: int = 3
    refine_factor: float = 0.1

    def __post_init__(self):
        if not 0 < self.t_min < self.t_max:
            raise InvalidInputError(f"need 0 < t_min < t_max, got {self.t_min}, {self.t_max}")
        if self.coarse_steps < 10:
            raise InvalidInputError("coarse_steps must be >= 10")
        if self.refine_rounds < 0:
            raise InvalidInputError("refine_rounds must be >= 0")
        if not 0 < self.refine_factor < 1:
            raise InvalidInputError("refine_factor must be in (0, 1)")


@dataclass(frozen=True)
class CdaConfig:
    gamma: float = CDA_TS_GAMMA

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise InvalidInputError(f"gamma must be finite and >= 0, got {self.gamma}")


@dataclass
class TemperatureFit:
    """Result of the NLL line search, with every evaluated grid point."""

    t_opt: float
    nll: float
    temperatures: np.ndarray = field(repr=False)
    nlls: np.ndarray = field(repr=False)


class _NllCurve:
    """NLL(T) for a fixed logit set, with the row max precomputed.

    For T > 0, max(z / T) = max(z) / T, so the shifted logits only need to be
    formed once.
    """

    def __init__(self, logits: LogitSet):
        z = logits.values
        with np.errstate(over="ignore", invalid="ignore"):
            self.shifted = z - z.max(axis=1, keepdims=True)
        self.true_shifted = self.shifted[np.arange(len(logits)), logits.labels]

    def __call__(self, t: float) -> float:
        with np.errstate(over="ignore", invalid="ignore"):
            s = self.shifted / t
            lse = np.log(np.exp(s).sum(axis=1))
            return float(np.mean(lse - self.true_shifted / t))


def _grid_min(grid, values):
    # np.argmin returns the first minimum; grids are ascending so ties go to smaller T
    finite = np.where(np.isfinite(values), values, np.inf)
    i = int(np.argmin(finite))
    return grid[i], finite[i]


def temperature_line_search(logits: LogitSet, cfg: TsFitConfig = TsFitConfig()) -> TemperatureFit:
    """Coarse grid over [t_min, t_max] followed by shrinking local re-grids.

    Each refinement round lays a grid with spacing `refine_factor` times the
    previous spacing over +/- one previous spacing around the incumbent.
    """
    curve = _NllCurve(logits)
    grid = np.linspace(cfg.t_min, cfg.t_max, cfg.coarse_steps)
    values = np.array([curve(t) for t in grid])
    if not np.isfinite(values).any():
        raise FitFailureError("NLL is non-finite over the whole temperature grid")
    all_t, all_v = [grid], [values]
    best_t, best_v = _grid_min(grid, values)
    step = grid[1] - grid[0]
    n_local = int(round(2 / cfg.refine_factor)) + 1
    for _ in range(cfg.refine_rounds):
        lo = max(cfg.t_min, best_t - step)
        hi = min(cfg.t_max, best_t + step)
        step *= cfg.refine_factor
        local = np.linspace(lo, hi, n_local)
        local_v = np.array([curve(t) for t in local])
        all_t.append(local)
        all_v.append(local_v)
        t, v = _grid_min(local, local_v)
        if v < best_v or (v == best_v and t < best_t):
            best_t, best_v = t, v
    ts = np.concatenate(all_t)
    vs = np.concatenate(all_v)
    order = np.argsort(ts, kind="stable")
    return TemperatureFit(float(best_t), float(best_v), ts[order], vs[order])


def fit_optimal_temperature(logits: LogitSet, cfg: TsFitConfig = TsFitConfig()) -> float:
    """Scalar temperature minimizing mean NLL on `logits` (use a held-out split)."""
    return temperature_line_search(logits, cfg).t_opt


def cda_temperature(
    t_opt: float, profile: ClassFrequencyProfile, cfg: CdaConfig = CdaConfig()
) -> TemperatureVector:
    """T_c = t_opt + gamma * f_c, with f the max-normalized class frequencies.

    Head classes get the largest temperature; unseen classes keep t_opt.
    """
    if not t_opt > 0:
        raise InvalidTemperatureError(f"t_opt must be > 0, got {t_opt}")
    return TemperatureVector(t_opt + cfg.gamma * profile.normalized)


def apply_temperature(logits: LogitSet, temps: TemperatureVector) -> ProbSet:
    t = temps.t if isinstance(temps, TemperatureVector) else np.atleast_1d(temps)
    if t.size not in (1, logits.num_classes):
        raise ShapeError(f"{t.size} temperatures for {logits.num_classes} classes")
    return ProbSet(softmax(logits.values, temps), logits.labels)
