"""Genetic search for integer release plans under an epsilon time bound.

A plan assigns an integer release to each day of a horizon T (multiple of
the release period p).  For p = 1 every day may release up to L insects;
for p > 1 each p-day block holds at most one nonzero gene bounded by pL.
Fitness is the reciprocal of the released total, penalized by p*L*T when
the end state misses the secure region, so any feasible plan outranks
every infeasible one.  Evolution uses tournament selection, block-aligned
two-point crossover, segment mutation, and truncation survival with a
single elite.

The outer epsilon loop shrinks the horizon while feasible plans keep
appearing, warm-starting each round with truncations of the previous
round's best plans.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .model import rhs_arrays
from .params import StrainParams


@dataclass(frozen=True)
class ReleasePlan:
    """Integer releases per day over a horizon that is a multiple of p."""

    genes: np.ndarray
    block_p: int

    @property
    def horizon_t(self) -> int:
        return int(self.genes.shape[0])

    @property
    def j_value(self) -> int:
        return int(self.genes.sum())

    @property
    def num_releases(self) -> int:
        return int(np.count_nonzero(self.genes))


def validate_plan(plan: ReleasePlan, cap_l: float) -> None:
    """Raise ValueError when a plan violates the gene invariants."""
    genes, p = plan.genes, plan.block_p
    t = plan.horizon_t
    if t % p != 0:
        raise ValueError("horizon must be a multiple of the block period")
    if np.any(genes < 0):
        raise ValueError("genes must be nonnegative")
    if p == 1:
        if np.any(genes > cap_l):
            raise ValueError("daily genes must not exceed cap_l")
        return
    if np.any(genes > p * cap_l):
        raise ValueError("block genes must not exceed p * cap_l")
    for b in range(t // p):
        block = genes[b * p:(b + 1) * p]
        if np.count_nonzero(block) > 1:
            raise ValueError("at most one nonzero gene per block")


@dataclass(frozen=True)
class GAConfig:
    pop_n: int = 100
    generations_g: int = 100
    elite_m: int = 1
    cap_l: float = 750.0
    block_p: int = 1
    mutation_rate: float = 0.05
    rng_seed: int = 0
    relocate_in_block: bool = False  # optional extra exploration for p > 1
    fitness_substeps: int = 4
    n_workers: int = 0

    def __post_init__(self) -> None:
        if self.pop_n <= 0 or self.generations_g < 0:
            raise ValueError("pop_n must be positive, generations_g nonnegative")
        if not 0 <= self.elite_m < self.pop_n:
            raise ValueError("elite size must be below the population size")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation_rate must lie in [0, 1]")
        if self.block_p < 1:
            raise ValueError("block_p must be at least 1")


@dataclass(frozen=True)
class FitnessReport:
    j_value: int
    feasible: bool
    fitness_f: float
    entry_time: Optional[float]


@dataclass(frozen=True)
class EpsilonLoopConfig:
    epsilon_0: int
    step: int
    max_rounds: int = 50
    restarts_per_epsilon: int = 3

    def __post_init__(self) -> None:
        if self.epsilon_0 <= 0 or self.step <= 0:
            raise ValueError("epsilon_0 and step must be positive")


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    best_j: int
    feasible_count: int


@dataclass
class GAResult:
    best: ReleasePlan
    report: FitnessReport
    history: list[GenerationRecord]


@dataclass
class EpsilonLoopResult:
    horizon: Optional[int]
    best: Optional[ReleasePlan]
    report: Optional[FitnessReport]
    per_epsilon: list[tuple[int, Optional[int]]]  # (epsilon, best feasible J or None)


def simulate_batch(
    params: StrainParams,
    genes: np.ndarray,
    initial_wild: float,
    substeps: int = 4,
    target: Optional[tuple[float, float]] = None,
) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    """Final states for a batch of plans; releases jump y at integer days.

    Uses fixed-step RK4 between jumps (the flow is smooth and mild at
    these tolerances); day t's release is applied after flowing through
    [t-1, t], and the state after the final jump is what feasibility is
    judged on.  When ``target`` is given, also returns first entry times
    at substep resolution (NaN where never).
    """
    b, t_days = genes.shape
    x = np.full(b, float(initial_wild))
    y = np.zeros(b)
    h = 1.0 / substeps
    entry = None
    if target is not None:
        entry = np.full(b, np.nan)
    for day in range(1, t_days + 1):
        for k in range(substeps):
            k1x, k1y = rhs_arrays(params, x, y)
            k2x, k2y = rhs_arrays(params, x + 0.5 * h * k1x, y + 0.5 * h * k1y)
            k3x, k3y = rhs_arrays(params, x + 0.5 * h * k2x, y + 0.5 * h * k2y)
            k4x, k4y = rhs_arrays(params, x + h * k3x, y + h * k3y)
            x = x + (h / 6.0) * (k1x + 2.0 * (k2x + k3x) + k4x)
            y = y + (h / 6.0) * (k1y + 2.0 * (k2y + k3y) + k4y)
            if entry is not None:
                now = day - 1 + (k + 1) * h
                hit = np.isnan(entry) & (x < target[0]) & (y > target[1])
                entry[hit] = now
        y = y + genes[:, day - 1]
        if entry is not None:
            hit = np.isnan(entry) & (x < target[0]) & (y > target[1])
            entry[hit] = float(day)
    return x, y, entry


def _penalty(cfg: GAConfig, horizon_t: int) -> float:
    return float(cfg.block_p) * float(cfg.cap_l) * float(horizon_t)


def evaluate_population(
    params: StrainParams,
    genes: np.ndarray,
    target: tuple[float, float],
    initial_wild: float,
    cfg: GAConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Fitness, J, feasibility, entry times for a gene matrix.

    ``n_workers`` > 1 splits the batch into row chunks evaluated on a
    thread pool; results are identical to the serial path because each
    row evolves independently through elementwise arithmetic.
    """
    b = genes.shape[0]
    pen = _penalty(cfg, genes.shape[1])

    def run(chunk: np.ndarray):
        return simulate_batch(
            params, chunk, initial_wild, cfg.fitness_substeps, target
        )

    if cfg.n_workers > 1 and b > 1:
        bounds = np.linspace(0, b, cfg.n_workers + 1).astype(int)
        chunks = [genes[lo:hi] for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
        with ThreadPoolExecutor(max_workers=cfg.n_workers) as pool:
            parts = list(pool.map(run, chunks))
        x = np.concatenate([p[0] for p in parts])
        y = np.concatenate([p[1] for p in parts])
        entry = np.concatenate([p[2] for p in parts])
    else:
        x, y, entry = run(genes)
    feas = (x < target[0]) & (y > target[1])
    j = genes.sum(axis=1).astype(float)
    fitness = 1.0 / (j + pen * (~feas))
    return fitness, j, feas, entry


def fitness(
    plan: ReleasePlan,
    params: StrainParams,
    target: tuple[float, float],
    initial_wild: float,
    cfg: GAConfig,
) -> FitnessReport:
    """Evaluate one plan; the batch kernel with a single row."""
    f, j, feas, entry = evaluate_population(
        params, plan.genes[None, :], target, initial_wild, cfg
    )
    et = None if np.isnan(entry[0]) else float(entry[0])
    return FitnessReport(
        j_value=int(j[0]), feasible=bool(feas[0]), fitness_f=float(f[0]), entry_time=et
    )


def init_population(
    cfg: GAConfig, horizon_t: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform random gene matrix respecting the block invariants."""
    if horizon_t % cfg.block_p != 0:
        raise ValueError("horizon must be a multiple of block_p")
    n, p = cfg.pop_n, cfg.block_p
    cap = int(cfg.cap_l)
    if p == 1:
        return rng.integers(0, cap + 1, size=(n, horizon_t), dtype=np.int64)
    nb = horizon_t // p
    genes = np.zeros((n, horizon_t), dtype=np.int64)
    positions = rng.integers(0, p, size=(n, nb))
    values = rng.integers(0, p * cap + 1, size=(n, nb), dtype=np.int64)
    for i in range(n):
        for bidx in range(nb):
            genes[i, bidx * p + positions[i, bidx]] = values[i, bidx]
    return genes


def tournament_select(
    fitness_values: np.ndarray, rng: np.random.Generator
) -> int:
    """Two-way tournament: the fitter of two uniform draws (first on ties)."""
    n = fitness_values.shape[0]
    r = int(rng.integers(0, n))
    s = int(rng.integers(0, n))
    return r if fitness_values[r] >= fitness_values[s] else s


def crossover(
    a: np.ndarray, b: np.ndarray, block_p: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Two-point crossover with cut points on block boundaries.

    Cuts are multiples of p so the one-release-per-block structure is
    preserved; the gene segment strictly after the first cut through the
    second cut is exchanged.
    """
    t = a.shape[0]
    cuts = np.arange(0, t + 1, block_p)
    if cuts.shape[0] < 2:
        return a.copy(), b.copy()
    picked = rng.choice(cuts, size=2, replace=False)
    r1, r2 = int(picked.min()), int(picked.max())
    c, d = a.copy(), b.copy()
    c[r1:r2], d[r1:r2] = b[r1:r2], a[r1:r2]
    return c, d


def mutate(
    genes: np.ndarray, cfg: GAConfig, rng: np.random.Generator
) -> np.ndarray:
    """Segment mutation applied with per-individual probability.

    For p = 1 a random day range is refilled with uniform integers in
    [0, L].  For p > 1 the nonzero gene of each block in a random block
    range is redrawn in [0, pL] (position kept unless relocation is
    enabled; an all-zero block gets a uniform position).
    """
    if rng.random() >= cfg.mutation_rate:
        return genes
    out = genes.copy()
    t = genes.shape[0]
    p = cfg.block_p
    cap = int(cfg.cap_l)
    if p == 1:
        r3 = int(rng.integers(1, t + 1))
        r4 = int(rng.integers(r3, t + 1))
        out[r3 - 1:r4] = rng.integers(0, cap + 1, size=r4 - r3 + 1, dtype=np.int64)
        return out
    nb = t // p
    b1 = int(rng.integers(0, nb))
    b2 = int(rng.integers(b1, nb))
    for bidx in range(b1, b2 + 1):
        block = out[bidx * p:(bidx + 1) * p]
        nz = np.nonzero(block)[0]
        if nz.size:
            pos = int(nz[0])
        else:
            pos = int(rng.integers(0, p))
        if cfg.relocate_in_block:
            pos = int(rng.integers(0, p))
        block[:] = 0
        block[pos] = rng.integers(0, p * cap + 1)
    return out


@dataclass
class PopulationState:
    genes: np.ndarray
    fitness: np.ndarray
    j: np.ndarray
    feasible: np.ndarray
    entry: np.ndarray
    elite_idx: int


def _truncate(
    genes: np.ndarray,
    fit: np.ndarray,
    feas: np.ndarray,
    j: np.ndarray,
    entry: np.ndarray,
    n: int,
):
    """Keep the n fittest rows; stable, so earlier insertion wins ties."""
    order = np.argsort(-fit, kind="stable")[:n]
    return genes[order], fit[order], feas[order], j[order], entry[order]


def evolve(
    state: PopulationState,
    params: StrainParams,
    target: tuple[float, float],
    initial_wild: float,
    cfg: GAConfig,
    rng: np.random.Generator,
) -> PopulationState:
    """One generation: select, pair, cross, mutate, evaluate, truncate.

    Survivors are the best pop_n of the union of the current population
    and the offspring, so the elite (any elite_m, in fact the whole
    current top) can never be lost and best fitness is nondecreasing.
    """
    n = cfg.pop_n
    selected = [tournament_select(state.fitness, rng) for _ in range(n)]
    offspring = np.empty_like(state.genes)
    for k in range(0, n - 1, 2):
        c, d = crossover(
            state.genes[selected[k]], state.genes[selected[k + 1]], cfg.block_p, rng
        )
        offspring[k], offspring[k + 1] = c, d
    if n % 2:
        offspring[n - 1] = state.genes[selected[n - 1]].copy()
    for k in range(n):
        offspring[k] = mutate(offspring[k], cfg, rng)
    ofit, oj, ofeas, oentry = evaluate_population(
        params, offspring, target, initial_wild, cfg
    )
    pool_genes = np.vstack([state.genes, offspring])
    pool_fit = np.concatenate([state.fitness, ofit])
    pool_j = np.concatenate([state.j, oj])
    pool_feas = np.concatenate([state.feasible, ofeas])
    pool_entry = np.concatenate([state.entry, oentry])
    genes, fit, feas, j, entry = _truncate(
        pool_genes, pool_fit, pool_feas, pool_j, pool_entry, n
    )
    return PopulationState(
        genes=genes, fitness=fit, j=j, feasible=feas, entry=entry,
        elite_idx=int(np.argmax(fit)),
    )


def run_ga(
    cfg: GAConfig,
    horizon_t: int,
    params: StrainParams,
    target: tuple[float, float],
    initial_wild: float,
    seed_plans: Sequence[np.ndarray] = (),
) -> GAResult:
    """Run the fixed number of generations and return the elite plan.

    ``seed_plans`` inject known-good gene vectors (already valid for this
    horizon) into the initial population; used by the epsilon loop for
    warm starts.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    genes = init_population(cfg, horizon_t, rng)
    for i, plan in enumerate(seed_plans):
        if i >= genes.shape[0]:
            break
        genes[i] = plan
    fit, j, feas, entry = evaluate_population(
        params, genes, target, initial_wild, cfg
    )
    state = PopulationState(
        genes=genes, fitness=fit, j=j, feasible=feas, entry=entry,
        elite_idx=int(np.argmax(fit)),
    )
    history: list[GenerationRecord] = []
    for gen in range(cfg.generations_g):
        state = evolve(state, params, target, initial_wild, cfg, rng)
        best = state.elite_idx
        history.append(
            GenerationRecord(
                generation=gen + 1,
                best_fitness=float(state.fitness[best]),
                best_j=int(state.j[best]),
                feasible_count=int(state.feasible.sum()),
            )
        )
    best = state.elite_idx
    plan = ReleasePlan(genes=state.genes[best].copy(), block_p=cfg.block_p)
    et = None if np.isnan(state.entry[best]) else float(state.entry[best])
    report = FitnessReport(
        j_value=int(state.j[best]),
        feasible=bool(state.feasible[best]),
        fitness_f=float(state.fitness[best]),
        entry_time=et,
    )
    return GAResult(best=plan, report=report, history=history)


def _roll_tail(genes: np.ndarray, eps: int, cfg: GAConfig) -> np.ndarray:
    """Truncate to ``eps`` days, pushing dropped releases into the kept tail."""
    out = genes[:eps].copy()
    dropped = int(genes[eps:].sum())
    cap = int(cfg.cap_l) if cfg.block_p == 1 else int(cfg.block_p * cfg.cap_l)
    for i in range(eps - 1, -1, -1):
        if dropped <= 0:
            break
        if cfg.block_p > 1 and out[i] == 0:
            continue
        room = cap - int(out[i])
        add = min(room, dropped)
        out[i] += add
        dropped -= add
    return out


def epsilon_loop(
    loop_cfg: EpsilonLoopConfig,
    ga_cfg: GAConfig,
    params: StrainParams,
    target: tuple[float, float],
    initial_wild: float,
) -> EpsilonLoopResult:
    """Shrink the horizon while the GA keeps finding feasible plans.

    Each epsilon round runs ``restarts_per_epsilon`` independent GA runs
    (seeds derived from the base seed) whose initial populations are
    seeded with truncations of the best plans found at the previous
    epsilon; truncation drops trailing days (whole blocks for p > 1), and
    a repaired variant rolls the dropped releases into the remaining tail
    up to the gene cap.  Returns the smallest feasible horizon with its
    best plan.
    """
    p = ga_cfg.block_p
    if loop_cfg.epsilon_0 % p or loop_cfg.step % p:
        raise ValueError("epsilon_0 and step must be multiples of block_p")
    best_overall: Optional[tuple[int, ReleasePlan, FitnessReport]] = None
    carry: list[np.ndarray] = []
    per_epsilon: list[tuple[int, Optional[int]]] = []
    eps = loop_cfg.epsilon_0
    for round_idx in range(loop_cfg.max_rounds):
        if eps < p:
            break
        round_best: Optional[tuple[ReleasePlan, FitnessReport]] = None
        seeds = []
        for arr in carry:
            if arr.shape[0] < eps:
                continue
            seeds.append(arr[:eps].copy())
            seeds.append(_roll_tail(arr, eps, ga_cfg))
        for restart in range(loop_cfg.restarts_per_epsilon):
            cfg_r = replace(
                ga_cfg, rng_seed=ga_cfg.rng_seed + 1000 * round_idx + restart
            )
            result = run_ga(cfg_r, eps, params, target, initial_wild, seeds)
            if result.report.feasible and (
                round_best is None or result.report.j_value < round_best[1].j_value
            ):
                round_best = (result.best, result.report)
        if round_best is None:
            per_epsilon.append((eps, None))
            break
        per_epsilon.append((eps, round_best[1].j_value))
        best_overall = (eps, round_best[0], round_best[1])
        carry = [round_best[0].genes.copy()] + [s for s in carry[:2]]
        eps -= loop_cfg.step
    if best_overall is None:
        return EpsilonLoopResult(horizon=None, best=None, report=None, per_epsilon=per_epsilon)
    return EpsilonLoopResult(
        horizon=best_overall[0],
        best=best_overall[1],
        report=best_overall[2],
        per_epsilon=per_epsilon,
    )
