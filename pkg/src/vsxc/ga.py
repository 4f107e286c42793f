"""Real-coded genetic algorithm over the VMD penalty ``alpha`` and dual step ``tau``."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .series import TimeSeries
from .vmd import VmdError, VmdParams, vmd_decompose

log = logging.getLogger(__name__)

TOURNAMENT_SIZE = 3
MUTATION_SCALE = 0.1


@dataclass(frozen=True)
class GaConfig:
    pop_size: int = 50
    generations: int = 100
    crossover_p: float = 0.7
    mutation_p: float = 0.1
    alpha_bounds: tuple[float, float] = (1.0, 5000.0)
    tau_bounds: tuple[float, float] = (0.0, 1.0)
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.pop_size < 2:
            raise ValueError("pop_size must be >= 2")
        if self.generations < 0:
            raise ValueError("generations must be >= 0")
        for name in ("crossover_p", "mutation_p"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")
        for name in ("alpha_bounds", "tau_bounds"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} needs lo < hi, got {(lo, hi)}")

    @property
    def bounds(self) -> np.ndarray:
        return np.array([self.alpha_bounds, self.tau_bounds], dtype=np.float64)


@dataclass(frozen=True)
class GaResult:
    best_alpha: float
    best_tau: float
    best_fitness: float
    history: list[float]

    def to_dict(self) -> dict:
        return {
            "best_alpha": self.best_alpha,
            "best_tau": self.best_tau,
            "best_fitness": self.best_fitness,
            "history": list(self.history),
        }


def evaluate_fitness(series: TimeSeries, alpha: float, tau: float,
                     vmd_base: VmdParams = VmdParams()) -> float:
    """Reconstruction MSE of a decomposition at ``(alpha, tau)``; failures map to +inf."""
    try:
        params = replace(vmd_base, alpha=float(alpha), tau=float(tau))
        mse = vmd_decompose(series, params).recon_mse
    except (VmdError, ValueError, FloatingPointError) as exc:
        log.debug("fitness evaluation failed at alpha=%g tau=%g: %s", alpha, tau, exc)
        return math.inf
    return mse if math.isfinite(mse) else math.inf


def clamp(genes: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    return np.clip(genes, bounds[:, 0], bounds[:, 1])


def crossover(a: np.ndarray, b: np.ndarray, rng: np.random.Generator,
              bounds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Arithmetic blend with an independent weight per gene."""
    w = rng.random(a.shape)
    return clamp(w * a + (1 - w) * b, bounds), clamp(w * b + (1 - w) * a, bounds)


def mutate(genes: np.ndarray, rng: np.random.Generator, bounds: np.ndarray,
           p: float) -> np.ndarray:
    width = bounds[:, 1] - bounds[:, 0]
    hit = rng.random(genes.shape) < p
    noise = rng.normal(0.0, MUTATION_SCALE * width, size=genes.shape)
    return clamp(np.where(hit, genes + noise, genes), bounds)


def _tournament(fitness: np.ndarray, rng: np.random.Generator) -> int:
    picks = rng.integers(0, fitness.size, size=TOURNAMENT_SIZE)
    # ties resolve to the earliest draw
    return int(picks[np.argmin(fitness[picks])])


def _evaluate_all(pop: np.ndarray, fitness_fn: Callable[[float, float], float],
                  n_jobs: int) -> np.ndarray:
    args = [(float(a), float(t)) for a, t in pop]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            vals = list(pool.map(lambda at: fitness_fn(*at), args))
    else:
        vals = [fitness_fn(a, t) for a, t in args]
    out = np.array(vals, dtype=np.float64)
    out[~np.isfinite(out)] = np.inf
    return out


def ga_minimize(fitness_fn: Callable[[float, float], float], ga: GaConfig = GaConfig()) -> GaResult:
    """Minimize a two-gene objective. The evaluation order never depends on ``n_jobs``."""
    rng = np.random.default_rng(ga.seed)
    bounds = ga.bounds
    lo, hi = bounds[:, 0], bounds[:, 1]
    pop = lo + rng.random((ga.pop_size, 2)) * (hi - lo)
    fit = _evaluate_all(pop, fitness_fn, ga.n_jobs)
    best = int(np.argmin(fit))
    history = [float(fit[best])]

    for gen in range(ga.generations):
        elite, elite_fit = pop[best].copy(), fit[best]
        children = [elite]
        while len(children) < ga.pop_size:
            pa = pop[_tournament(fit, rng)]
            pb = pop[_tournament(fit, rng)]
            if rng.random() < ga.crossover_p:
                ca, cb = crossover(pa, pb, rng, bounds)
            else:
                ca, cb = pa.copy(), pb.copy()
            children.append(mutate(ca, rng, bounds, ga.mutation_p))
            if len(children) < ga.pop_size:
                children.append(mutate(cb, rng, bounds, ga.mutation_p))
        pop = np.vstack(children)
        fit = np.empty(ga.pop_size)
        fit[0] = elite_fit
        fit[1:] = _evaluate_all(pop[1:], fitness_fn, ga.n_jobs)
        best = int(np.argmin(fit))
        history.append(float(fit[best]))
        log.debug("generation %d best=%.6g", gen + 1, history[-1])

    return GaResult(float(pop[best, 0]), float(pop[best, 1]), float(fit[best]), history)


def ga_optimize(series: TimeSeries, ga: GaConfig = GaConfig(),
                vmd_base: VmdParams = VmdParams(),
                fitness: Callable[[float, float], float] | None = None) -> GaResult:
    """Search ``(alpha, tau)`` minimizing the decomposition's reconstruction MSE.

    ``fitness`` replaces the VMD objective when given (used for harness tests).
    """
    if fitness is None:
        def fitness(alpha, tau):
            return evaluate_fitness(series, alpha, tau, vmd_base)
    return ga_minimize(fitness, ga)


def random_search_fitness(series: TimeSeries, n: int, ga: GaConfig,
                          vmd_base: VmdParams = VmdParams(), seed: int = 0) -> Sequence[float]:
    """Fitness of ``n`` uniformly drawn candidates, a reference for GA quality."""
    rng = np.random.default_rng(seed)
    b = ga.bounds
    pts = b[:, 0] + rng.random((n, 2)) * (b[:, 1] - b[:, 0])
    return [evaluate_fitness(series, a, t, vmd_base) for a, t in pts]
