"""Non-learning optimizers over complete layouts, sharing the composite objective.

Layouts are flat vectors of (x, y, k) per item in placement order.  Decoding
is sequential: placements that violate the room or overlap the accepted items
are skipped and penalized, so the search landscape stays informative instead
of terminating like the RL environment does.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import transform
from .rewards import GuidelineMask, RewardBreakdown, composite_reward
from .scene import Catalog, FurnitureSpec, PlacedItem, Room, placement_valid, sort_by_area

INVALID_ITEM_PENALTY = 0.5


@dataclass
class ScoreContext:
    catalog: Catalog
    room: Room
    specs: list[FurnitureSpec]  # in placement order (largest first)
    mask: GuidelineMask = GuidelineMask()
    grid_resolution: float = 0.1

    @staticmethod
    def build(
        catalog: Catalog,
        room: Room,
        furniture_ids: list[str],
        mask: GuidelineMask = GuidelineMask(),
        grid_resolution: float = 0.1,
    ) -> "ScoreContext":
        return ScoreContext(
            catalog=catalog,
            room=room,
            specs=sort_by_area(catalog, furniture_ids),
            mask=mask,
            grid_resolution=grid_resolution,
        )

    @property
    def dims(self) -> int:
        return 3 * len(self.specs)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.tile([0.0, 0.0, 0.0], len(self.specs))
        hi = np.tile([self.room.n, self.room.m, 4.0 - 1e-9], len(self.specs))
        return lo, hi


def decode_layout(vec: np.ndarray, ctx: ScoreContext) -> tuple[list[PlacedItem], int]:
    """Sequentially accept valid placements; return them with the invalid count."""
    placed: list[PlacedItem] = []
    invalid = 0
    for i, spec in enumerate(ctx.specs):
        x, y, k_raw = vec[3 * i : 3 * i + 3]
        k = min(3, max(0, int(math.floor(k_raw))))
        pos = np.array([x, y])
        footprint = transform(pos, k, spec.footprint())
        if placement_valid(ctx.room, placed, footprint):
            placed.append(PlacedItem.place(spec, pos, k))
        else:
            invalid += 1
    return placed, invalid


def score_with_breakdown(vec: np.ndarray, ctx: ScoreContext) -> tuple[float, RewardBreakdown, list[PlacedItem]]:
    placed, invalid = decode_layout(vec, ctx)
    breakdown = composite_reward(placed, ctx.catalog, ctx.room, ctx.mask, ctx.grid_resolution)
    return breakdown.r_composite - INVALID_ITEM_PENALTY * invalid, breakdown, placed


def score(vec: np.ndarray, ctx: ScoreContext) -> float:
    return score_with_breakdown(vec, ctx)[0]


def random_vector(ctx: ScoreContext, rng: np.random.Generator) -> np.ndarray:
    vec = np.empty(ctx.dims)
    for i in range(len(ctx.specs)):
        vec[3 * i] = rng.uniform(0.0, ctx.room.n)
        vec[3 * i + 1] = rng.uniform(0.0, ctx.room.m)
        vec[3 * i + 2] = float(rng.integers(4))
    return vec


@dataclass
class SearchResult:
    vec: np.ndarray
    score: float
    breakdown: RewardBreakdown
    placed: list[PlacedItem]
    evaluations: int
    wall_time_s: float
    archive: list[tuple[np.ndarray, list[float], float]] = field(default_factory=list)


def metropolis_accept(delta: float, temperature: float, rng: np.random.Generator) -> bool:
    """Accept improving moves always, worsening moves with probability exp(delta/T)."""
    if delta >= 0.0:
        return True
    return rng.random() < math.exp(delta / max(temperature, 1e-12))


def mh_optimize(
    ctx: ScoreContext,
    budget: int,
    seed: int = 0,
    move_sigma: float = 0.5,
    temp_hi: float = 1.0,
    temp_lo: float = 0.01,
) -> SearchResult:
    """Annealed random-walk search: move one item, re-rotate, or swap two items."""
    if budget <= 0:
        raise ValueError("budget must be positive")
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    n = len(ctx.specs)
    lo, hi = ctx.bounds()
    current = random_vector(ctx, rng)
    current_score = score(current, ctx)
    best, best_score = current.copy(), current_score
    for evals in range(1, budget):
        frac = evals / max(budget - 1, 1)
        temp = temp_hi * (temp_lo / temp_hi) ** frac
        proposal = current.copy()
        kind = int(rng.integers(3)) if n >= 2 else int(rng.integers(2))
        i = int(rng.integers(n))
        if kind == 0:
            proposal[3 * i] += rng.normal(0.0, move_sigma)
            proposal[3 * i + 1] += rng.normal(0.0, move_sigma)
            np.clip(proposal, lo, hi, out=proposal)
        elif kind == 1:
            proposal[3 * i + 2] = float(rng.integers(4))
        else:
            j = int(rng.integers(n - 1))
            j = j if j < i else j + 1
            block_i = proposal[3 * i : 3 * i + 3].copy()
            proposal[3 * i : 3 * i + 3] = proposal[3 * j : 3 * j + 3]
            proposal[3 * j : 3 * j + 3] = block_i
        proposal_score = score(proposal, ctx)
        if metropolis_accept(proposal_score - current_score, temp, rng):
            current, current_score = proposal, proposal_score
        if current_score > best_score:
            best, best_score = current.copy(), current_score
    final_score, breakdown, placed = score_with_breakdown(best, ctx)
    return SearchResult(
        vec=best,
        score=final_score,
        breakdown=breakdown,
        placed=placed,
        evaluations=budget,
        wall_time_s=time.perf_counter() - started,
    )


ARCHIVE_CAP = 64


def _dominates(a, b) -> bool:
    ge = True
    gt = False
    for x, y in zip(a, b):
        if x < y:
            ge = False
            break
        if x > y:
            gt = True
    return ge and gt


def _archive_add(archive: list, vec: np.ndarray, components: np.ndarray, value: float) -> None:
    comp = components.tolist()
    for _, other, _ in archive:
        if _dominates(other, comp) or other == comp:
            return
    archive[:] = [entry for entry in archive if not _dominates(comp, entry[1])]
    archive.append((vec.copy(), comp, value))
    if len(archive) > ARCHIVE_CAP:
        drop = min(range(len(archive)), key=lambda i: archive[i][2])
        archive.pop(drop)


def _components(breakdown: RewardBreakdown) -> np.ndarray:
    return np.array(
        [
            breakdown.r_pair,
            breakdown.r_access,
            breakdown.r_vis,
            breakdown.r_path,
            breakdown.r_balance,
            breakdown.r_align,
        ]
    )


def pso_optimize(
    ctx: ScoreContext,
    budget: int,
    seed: int = 0,
    swarm_size: int = 40,
    inertia: float = 0.7,
    c_personal: float = 1.5,
    c_global: float = 1.5,
) -> SearchResult:
    """Particle swarm over relaxed layout vectors with a Pareto archive.

    The archive keeps layouts non-dominated across the six component rewards;
    the swarm's global attractor and the returned result are the archive
    member with the highest composite score.
    """
    if swarm_size < 2:
        raise ValueError("swarm must have at least 2 particles")
    if budget < swarm_size:
        raise ValueError("budget must cover at least one evaluation sweep")
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    lo, hi = ctx.bounds()
    positions = np.stack([random_vector(ctx, rng) for _ in range(swarm_size)])
    positions[:, 2::3] += rng.uniform(0.0, 1.0, size=(swarm_size, len(ctx.specs)))  # relax k
    np.clip(positions, lo, hi, out=positions)
    velocities = np.zeros_like(positions)
    archive: list[tuple[np.ndarray, np.ndarray, float]] = []

    def evaluate_all() -> np.ndarray:
        values = np.empty(swarm_size)
        for s in range(swarm_size):
            value, breakdown, _ = score_with_breakdown(positions[s], ctx)
            values[s] = value
            _archive_add(archive, positions[s], _components(breakdown), value)
        return values

    def gbest() -> np.ndarray:
        best_idx = int(np.argmax([entry[2] for entry in archive]))
        return archive[best_idx][0]

    scores = evaluate_all()
    evals = swarm_size
    pbest = positions.copy()
    pbest_scores = scores.copy()

    while evals + swarm_size <= budget:
        g = gbest()
        r1 = rng.random(positions.shape)
        r2 = rng.random(positions.shape)
        velocities = inertia * velocities + c_personal * r1 * (pbest - positions) + c_global * r2 * (g - positions)
        positions = np.clip(positions + velocities, lo, hi)
        scores = evaluate_all()
        evals += swarm_size
        improved = scores > pbest_scores
        pbest[improved] = positions[improved]
        pbest_scores[improved] = scores[improved]

    best_idx = int(np.argmax([entry[2] for entry in archive]))
    best_vec = archive[best_idx][0]
    final_score, breakdown, placed = score_with_breakdown(best_vec, ctx)
    return SearchResult(
        vec=best_vec,
        score=final_score,
        breakdown=breakdown,
        placed=placed,
        evaluations=evals,
        wall_time_s=time.perf_counter() - started,
        archive=archive,
    )


def random_search(ctx: ScoreContext, budget: int, seed: int = 0) -> SearchResult:
    if budget <= 0:
        raise ValueError("budget must be positive")
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    best, best_score = None, -math.inf
    for _ in range(budget):
        vec = random_vector(ctx, rng)
        value = score(vec, ctx)
        if value > best_score:
            best, best_score = vec, value
    final_score, breakdown, placed = score_with_breakdown(best, ctx)
    return SearchResult(
        vec=best,
        score=final_score,
        breakdown=breakdown,
        placed=placed,
        evaluations=budget,
        wall_time_s=time.perf_counter() - started,
    )
