"""Protocol-parameter search maximizing the secure key rate at one distance.

The search space is six-dimensional and symmetric across the two sides:
``(mu_x, mu_y, mu_z, p_x, p_y, p_z)`` with the vacuum probability implied by
normalization.  The rate landscape is piecewise smooth with hard feasibility
cliffs (decoy-condition failures score zero), so the search runs a
derivative-free simplex from several seeded random starts and keeps the best
feasible point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as _scipy_optimize

from .channel_sim import ChannelParams, build_observables
from .keyrate_core import AnalysisInputs, secure_key_rate
from .source_model import SideSources, SourceEnsemble

# Box constraints for (mu_x, mu_y, mu_z, p_x, p_y, p_z).
BOX_LOWER = np.array([1e-4, 2e-3, 1e-3, 1e-3, 1e-3, 1e-3])
BOX_UPPER = np.array([1.0, 1.0, 1.0, 0.98, 0.98, 0.98])
_MIN_VACUUM_PROB = 1e-3

# Deterministic first start; the remaining restarts probe random feasible
# points and prefer ones with a nonzero rate (the landscape is a plateau of
# zeros outside the living region, which a simplex cannot climb).
DEFAULT_START = np.array([0.03, 0.25, 0.45, 0.18, 0.05, 0.6])
_START_PROBES = 40


@dataclass(frozen=True)
class OptimizationProblem:
    """Fixed experimental conditions the search runs under."""

    channel: ChannelParams
    vacuum_cap: float = 0.0
    fluctuation: float = 0.0
    k_max: int = 20
    h_grid: int = 401


@dataclass(frozen=True)
class OptimizationResult:
    point: tuple[float, float, float, float, float, float]
    rate: float
    evaluations: tuple[tuple[tuple[float, ...], float], ...] = field(repr=False)

    @property
    def n_evaluations(self) -> int:
        return len(self.evaluations)


def _ensemble_at(problem: OptimizationProblem, point: np.ndarray) -> SourceEnsemble | None:
    mu_x, mu_y, mu_z, p_x, p_y, p_z = (float(v) for v in point)
    p_v = 1.0 - p_x - p_y - p_z
    if p_v < _MIN_VACUUM_PROB:
        return None
    if not (0.0 < mu_x < mu_y) or mu_z <= 0.0:
        return None
    # Fluctuation-widened decoy intervals must stay disjoint.
    if mu_x * (1.0 + problem.fluctuation) >= mu_y * (1.0 - problem.fluctuation):
        return None
    side = SideSources(
        mu_x=mu_x,
        mu_y=mu_y,
        mu_z=mu_z,
        p_v=p_v,
        p_x=p_x,
        p_y=p_y,
        p_z=p_z,
        vacuum_cap=problem.vacuum_cap,
        fluctuation=problem.fluctuation,
    )
    return SourceEnsemble.symmetric(side)


def evaluate(problem: OptimizationProblem, point) -> float:
    """Secure key rate at one parameter point; infeasible points score zero."""
    arr = np.asarray(point, dtype=float)
    if arr.shape != (6,):
        raise ValueError(f"expected a 6-vector (mu_x, mu_y, mu_z, p_x, p_y, p_z), got shape {arr.shape}")
    if np.any(arr < BOX_LOWER) or np.any(arr > BOX_UPPER):
        return 0.0
    ensemble = _ensemble_at(problem, arr)
    if ensemble is None:
        return 0.0
    observables = build_observables(ensemble, problem.channel)
    inputs = AnalysisInputs.from_simulation(ensemble, problem.channel, observables=observables, k_max=problem.k_max)
    report = secure_key_rate(inputs, h_grid=problem.h_grid)
    return report.rate


def _random_start(problem: OptimizationProblem, rng: np.random.Generator) -> np.ndarray:
    for _ in range(1000):
        mu_x = rng.uniform(0.01, 0.25)
        mu_y = rng.uniform(mu_x * 2.0 + 0.05, min(1.0, mu_x * 2.0 + 0.7))
        mu_z = rng.uniform(0.1, 0.8)
        p_x = rng.uniform(0.03, 0.3)
        p_y = rng.uniform(0.03, 0.3)
        p_z = rng.uniform(0.3, 0.8)
        point = np.array([mu_x, mu_y, mu_z, p_x, p_y, p_z])
        if 1.0 - p_x - p_y - p_z >= 0.02 and _ensemble_at(problem, point) is not None:
            return point
    raise RuntimeError("could not sample a feasible starting point")


def optimize(
    problem: OptimizationProblem,
    seed: int = 1,
    budget: int = 1600,
    restarts: int = 8,
) -> OptimizationResult:
    """Multi-start simplex search; deterministic for a given seed.

    ``budget`` caps the simplex rate evaluations across restarts (start
    probing is logged on top).  The returned point is the best over every
    evaluation made, so it dominates the whole log by construction.
    """
    if budget < 1:
        raise ValueError(f"budget must be at least 1, got {budget}")
    if restarts < 1:
        raise ValueError(f"restarts must be at least 1, got {restarts}")

    log: list[tuple[tuple[float, ...], float]] = []

    def logged_rate(point: np.ndarray) -> float:
        clipped = np.clip(point, BOX_LOWER, BOX_UPPER)
        rate = evaluate(problem, clipped)
        log.append((tuple(float(v) for v in clipped), rate))
        return rate

    per_restart = max(budget // restarts, 10)
    bounds = _scipy_optimize.Bounds(BOX_LOWER, BOX_UPPER)
    root = np.random.SeedSequence(seed)
    for index, child in enumerate(root.spawn(restarts)):
        rng = np.random.default_rng(child)
        if index == 0:
            start = DEFAULT_START.copy()
        else:
            start = _random_start(problem, rng)
            for _ in range(_START_PROBES):
                if logged_rate(start) > 0.0:
                    break
                start = _random_start(problem, rng)
        _scipy_optimize.minimize(
            lambda point: -logged_rate(point),
            start,
            method="Nelder-Mead",
            bounds=bounds,
            options={"maxfev": per_restart, "xatol": 1e-4, "fatol": 1e-12, "adaptive": True},
        )

    best_point, best_rate = max(log, key=lambda entry: entry[1])
    return OptimizationResult(point=best_point, rate=best_rate, evaluations=tuple(log))
