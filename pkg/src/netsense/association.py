"""Range data association: feasible matchings, ghost detection, and solvers.

Each BS reports an unordered set of target distances. A hypothesis assigns
every BS distance to a target slot; anchor 1's assignment is fixed to the
identity, so the search space holds (K!)^(M-1) hypotheses for K targets and
M anchors. A hypothesis is feasible when every target slot trilaterates with
residual at or below the feasibility tolerance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GeometryError, InfeasibleAssociationError, UnequalCardinalityError
from .localization import PositionEstimate, circle_intersections, solve_ranges_batch
from .scene import Bounds, Point2, Scene, points_are_collinear, random_scene, true_distance

# Residuals within this band of the minimum are treated as ties and broken
# by lexicographic hypothesis order, keeping runs reproducible when several
# hypotheses are feasible at numerical-zero residual.
RESIDUAL_TIE_EPS_M = 1e-12

# Branch-and-bound candidate gate, relative to the feasibility tolerance.
# The gate only prunes; final feasibility is always decided by the
# trilateration residual, so the gate errs wide to stay conservative.
CANDIDATE_GATE_FACTOR = 6.0


@dataclass(frozen=True)
class DistanceProfile:
    """One BS's unordered set of extracted target distances, meters."""

    anchor_id: str
    distances: tuple[float, ...]

    def __post_init__(self):
        if any(d < 0 for d in self.distances):
            raise ValueError("distances must be nonnegative")


@dataclass(frozen=True)
class AssociationHypothesis:
    """Per-anchor mapping from target slot k to a distance index.

    assignment[m][k] indexes anchor m's distance list; assignment[0] is the
    identity by construction.
    """

    assignment: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class AssociationSolution:
    hypothesis: AssociationHypothesis
    estimates: tuple[PositionEstimate, ...]
    max_residual_m: float


@dataclass(frozen=True)
class GhostReport:
    feasible_solutions: tuple[AssociationSolution, ...]
    unique: bool
    ghost_positions: tuple[Point2, ...]


def _as_anchor_array(anchors) -> np.ndarray:
    if isinstance(anchors, np.ndarray):
        return np.asarray(anchors, float).reshape(-1, 2)
    return np.array([[a.x, a.y] for a in anchors], dtype=float).reshape(-1, 2)


def _check_inputs(profiles: Sequence[DistanceProfile], anchors_xy: np.ndarray) -> tuple[int, int]:
    n_anchors = len(anchors_xy)
    if len(profiles) != n_anchors:
        raise ValueError("one distance profile per anchor required")
    if n_anchors < 3:
        raise ValueError("need at least 3 anchors")
    cardinalities = {len(p.distances) for p in profiles}
    if len(cardinalities) > 1:
        raise UnequalCardinalityError(
            f"profiles report different target counts: {sorted(cardinalities)}"
        )
    n_targets = cardinalities.pop()
    if n_targets == 0:
        raise ValueError("profiles are empty")
    for triple in itertools.combinations(range(n_anchors), 3):
        if points_are_collinear(anchors_xy[list(triple)]):
            raise GeometryError(f"anchors {triple} are collinear")
    return n_targets, n_anchors


class _SubproblemTable:
    """Trilateration results for every distance index combination.

    The residual of target slot k under a hypothesis depends only on the
    chosen distance index at each anchor, so all K^M combinations are solved
    once in a single vectorized batch and shared by every hypothesis.
    """

    def __init__(self, profiles: Sequence[DistanceProfile], anchors_xy: np.ndarray,
                 n_targets: int):
        self.k = n_targets
        self.m = len(anchors_xy)
        dists = [np.array(p.distances, float) for p in profiles]
        combos = np.indices((n_targets,) * self.m).reshape(self.m, -1).T  # (K^M, M)
        rows = np.stack([dists[m][combos[:, m]] for m in range(self.m)], axis=1)
        self.positions, self.rms, self.converged, self.iterations = solve_ranges_batch(
            anchors_xy, rows
        )

    def flat_index(self, idx_by_anchor: np.ndarray) -> np.ndarray:
        """Row index for combinations given as (..., M) anchor-wise indices."""
        flat = idx_by_anchor[..., 0]
        for m in range(1, self.m):
            flat = flat * self.k + idx_by_anchor[..., m]
        return flat

    def estimate(self, flat: int) -> PositionEstimate:
        return PositionEstimate(
            position=Point2(float(self.positions[flat, 0]), float(self.positions[flat, 1])),
            residual_rms_m=float(self.rms[flat]),
            converged=bool(self.converged[flat]),
            iterations=int(self.iterations[flat]),
        )


def _hypothesis_tables(n_targets: int, n_anchors: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """All hypotheses as per-anchor permutation indices, in lexicographic order.

    Returns (perms, perm_idx) where perms lists the K! permutations and
    perm_idx has shape (H, M-1) with H = (K!)^(M-1).
    """
    perms = list(itertools.permutations(range(n_targets)))
    n_perms = len(perms)
    n_free = n_anchors - 1
    total = n_perms ** n_free
    h = np.arange(total)
    cols = [(h // n_perms ** (n_free - 1 - j)) % n_perms for j in range(n_free)]
    return perms, np.stack(cols, axis=1)


def _slot_residuals(table: _SubproblemTable, perms: list[tuple[int, ...]],
                    perm_idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Residual and flat subproblem index per (hypothesis, slot)."""
    k = table.k
    perm_arr = np.array(perms)  # (K!, K)
    flat = np.broadcast_to(np.arange(k), (len(perm_idx), k)).copy()  # anchor 1 identity
    for m in range(perm_idx.shape[1]):
        flat = flat * k + perm_arr[perm_idx[:, m]]
    return table.rms[flat], flat


def enumerate_feasible(
    profiles: Sequence[DistanceProfile],
    anchors,
    feas_tol_m: float,
    stats: dict | None = None,
) -> list[AssociationSolution]:
    """Exhaustively test every association hypothesis and keep the feasible ones.

    Anchor 1's assignment is fixed to the identity; all (K!)^(M-1)
    permutation tuples for anchors 2..M are examined. A hypothesis is kept
    iff every target slot trilaterates with residual_rms <= feas_tol_m.
    Results are sorted by max residual ascending (ties in lexicographic
    hypothesis order).

    When given, ``stats`` receives bookkeeping: hypotheses_examined and
    best_max_residual_m over the whole search space.
    """
    anchors_xy = _as_anchor_array(anchors)
    n_targets, n_anchors = _check_inputs(profiles, anchors_xy)

    table = _SubproblemTable(profiles, anchors_xy, n_targets)
    perms, perm_idx = _hypothesis_tables(n_targets, n_anchors)
    residuals, flat = _slot_residuals(table, perms, perm_idx)
    max_residual = residuals.max(axis=1)
    feasible = (residuals <= feas_tol_m).all(axis=1)

    if stats is not None:
        stats["hypotheses_examined"] = len(perm_idx)
        stats["best_max_residual_m"] = float(max_residual.min())

    solutions = []
    for h in np.flatnonzero(feasible):
        assignment = (tuple(range(n_targets)),) + tuple(
            perms[perm_idx[h, m]] for m in range(n_anchors - 1)
        )
        estimates = tuple(table.estimate(int(flat[h, k])) for k in range(n_targets))
        solutions.append(AssociationSolution(
            hypothesis=AssociationHypothesis(assignment),
            estimates=estimates,
            max_residual_m=float(max_residual[h]),
        ))
    solutions.sort(key=lambda s: (s.max_residual_m, s.hypothesis.assignment))
    return solutions


def _pick_minimal(solutions: Sequence[AssociationSolution]) -> AssociationSolution:
    best = min(s.max_residual_m for s in solutions)
    tied = [s for s in solutions if s.max_residual_m <= best + RESIDUAL_TIE_EPS_M]
    return min(tied, key=lambda s: s.hypothesis.assignment)


def solve_association(
    profiles: Sequence[DistanceProfile],
    anchors,
    feas_tol_m: float,
) -> AssociationSolution:
    """Best feasible hypothesis by exhaustive search.

    Returns the feasible solution with minimal max residual; residuals within
    RESIDUAL_TIE_EPS_M of the minimum tie and are broken by lexicographic
    hypothesis order. Raises InfeasibleAssociationError (carrying the best
    residual found) when nothing meets the tolerance.
    """
    stats: dict = {}
    solutions = enumerate_feasible(profiles, anchors, feas_tol_m, stats=stats)
    if not solutions:
        raise InfeasibleAssociationError(
            f"no hypothesis met tol {feas_tol_m}; best max residual was "
            f"{stats['best_max_residual_m']:.6g} m",
            best_residual_m=stats["best_max_residual_m"],
        )
    return _pick_minimal(solutions)


def solve_association_bnb(
    profiles: Sequence[DistanceProfile],
    anchors,
    feas_tol_m: float,
) -> AssociationSolution:
    """Branch-and-bound solver, oracle-equivalent to solve_association.

    For each target slot, pairing an anchor-1 distance with an unused
    anchor-2 distance yields at most two candidate points (circle
    intersection). A candidate survives only if every remaining anchor still
    has an unused distance within the candidate gate of it; surviving index
    tuples are verified by trilateration and the search branches slot by
    slot, bounding on the partial max residual.
    """
    anchors_xy = _as_anchor_array(anchors)
    n_targets, n_anchors = _check_inputs(profiles, anchors_xy)
    dists = [np.array(p.distances, float) for p in profiles]
    gate = CANDIDATE_GATE_FACTOR * feas_tol_m

    a1 = Point2(float(anchors_xy[0, 0]), float(anchors_xy[0, 1]))
    a2 = Point2(float(anchors_xy[1, 0]), float(anchors_xy[1, 1]))
    solved: dict[tuple[int, ...], tuple[float, PositionEstimate]] = {}

    def solve_tuple(combo: tuple[int, ...]) -> tuple[float, PositionEstimate]:
        if combo not in solved:
            row = np.array([dists[m][combo[m]] for m in range(n_anchors)])
            positions, rms, converged, iterations = solve_ranges_batch(anchors_xy, row[None, :])
            est = PositionEstimate(
                position=Point2(float(positions[0, 0]), float(positions[0, 1])),
                residual_rms_m=float(rms[0]),
                converged=bool(converged[0]),
                iterations=int(iterations[0]),
            )
            solved[combo] = (float(rms[0]), est)
        return solved[combo]

    def candidate_points(r1: float, r2: float) -> list[Point2]:
        pts = list(circle_intersections(a1, r1, a2, r2))
        if not pts:
            gap = max(true_distance(a1, a2) - r1 - r2,
                      abs(r1 - r2) - true_distance(a1, a2))
            if gap <= gate:
                # Nearly tangent circles: take the closest-approach point.
                dx, dy = a2.x - a1.x, a2.y - a1.y
                d = math.hypot(dx, dy)
                a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
                pts = [Point2(a1.x + a * dx / d, a1.y + a * dy / d)]
        return pts

    def slot_candidates(k: int, used: list[np.ndarray]) -> list[tuple[tuple[int, ...], float]]:
        found: dict[tuple[int, ...], float] = {}
        r1 = dists[0][k]
        for j2 in range(n_targets):
            if used[0][j2]:
                continue
            for p in candidate_points(r1, dists[1][j2]):
                options = []
                p_xy = p.as_array()
                ok = True
                for m in range(2, n_anchors):
                    gaps = np.abs(np.linalg.norm(anchors_xy[m] - p_xy) - dists[m])
                    usable = [j for j in range(n_targets)
                              if not used[m - 1][j] and gaps[j] <= gate]
                    if not usable:
                        ok = False
                        break
                    options.append(usable)
                if not ok:
                    continue
                for rest in itertools.product(*options):
                    combo = (k, j2) + rest
                    if combo in found:
                        continue
                    rms, _ = solve_tuple(combo)
                    if rms <= feas_tol_m:
                        found[combo] = rms
        return sorted(found.items())

    incumbent = [math.inf]
    complete: list[tuple[tuple[tuple[int, ...], ...], float, tuple[tuple[int, ...], ...]]] = []

    def record(chosen: list[tuple[int, ...]], max_res: float) -> None:
        assignment = (tuple(range(n_targets)),) + tuple(
            tuple(chosen[k][m] for k in range(n_targets)) for m in range(1, n_anchors)
        )
        complete.append((assignment, max_res, tuple(chosen)))
        incumbent[0] = min(incumbent[0], max_res)
        complete[:] = [c for c in complete if c[1] <= incumbent[0] + RESIDUAL_TIE_EPS_M]

    def dfs(k: int, used: list[np.ndarray], chosen: list[tuple[int, ...]],
            partial_max: float) -> None:
        if partial_max > incumbent[0] + RESIDUAL_TIE_EPS_M:
            return
        if k == n_targets:
            record(chosen, partial_max)
            return
        for combo, rms in slot_candidates(k, used):
            new_max = max(partial_max, rms)
            if new_max > incumbent[0] + RESIDUAL_TIE_EPS_M:
                continue
            for m in range(1, n_anchors):
                used[m - 1][combo[m]] = True
            chosen.append(combo)
            dfs(k + 1, used, chosen, new_max)
            chosen.pop()
            for m in range(1, n_anchors):
                used[m - 1][combo[m]] = False

    used0 = [np.zeros(n_targets, bool) for _ in range(n_anchors - 1)]
    dfs(0, used0, [], 0.0)

    if not complete:
        # The candidate gates can prune a barely-feasible hypothesis on noisy
        # ranges; degrade to the exhaustive solver rather than miss it. This
        # also makes the infeasibility error carry the true best residual.
        return solve_association(profiles, anchors_xy, feas_tol_m)

    best = min(c[1] for c in complete)
    tied = [c for c in complete if c[1] <= best + RESIDUAL_TIE_EPS_M]
    assignment, max_res, combos = min(tied, key=lambda c: c[0])
    estimates = tuple(solve_tuple(c)[1] for c in combos)
    return AssociationSolution(
        hypothesis=AssociationHypothesis(assignment),
        estimates=estimates,
        max_residual_m=max(e.residual_rms_m for e in estimates),
    )


def build_ghost_report(
    solutions: Sequence[AssociationSolution],
    ground_truth: Sequence[Point2] | None = None,
    match_radius_m: float = 1e-3,
) -> GhostReport:
    """Summarize feasible solutions and flag estimates far from every true target."""
    ghosts: list[Point2] = []
    if ground_truth:
        for sol in solutions:
            for est in sol.estimates:
                p = est.position
                if min(true_distance(p, t) for t in ground_truth) <= match_radius_m:
                    continue
                if any(true_distance(p, g) <= match_radius_m for g in ghosts):
                    continue
                ghosts.append(p)
    return GhostReport(
        feasible_solutions=tuple(solutions),
        unique=len(solutions) == 1,
        ghost_positions=tuple(ghosts),
    )


def exact_profiles(scene: Scene) -> list[DistanceProfile]:
    """Noiseless per-BS distance profiles in target order."""
    profiles = []
    for bs in scene.base_stations:
        d = tuple(true_distance(bs.position, t.position) for t in scene.targets)
        profiles.append(DistanceProfile(anchor_id=bs.id, distances=d))
    return profiles


@dataclass(frozen=True)
class GhostTrialOutcome:
    trial: int
    seed: int
    feasible_count: int
    ghost: bool
    infeasible: bool
    correct_found: bool


@dataclass(frozen=True)
class GhostProbabilityResult:
    """Monte Carlo estimate of how often multiple feasible associations exist."""

    fraction: float
    num_trials: int
    ghost_seeds: tuple[int, ...]
    infeasible_seeds: tuple[int, ...]
    outcomes: tuple[GhostTrialOutcome, ...]


def ghost_probability(
    num_trials: int,
    num_bs: int,
    num_targets: int,
    bounds: Bounds,
    feas_tol_m: float = 1e-4,
    seed: int = 0,
    scene: Scene | None = None,
    rcs_dbsm: float = -10.0,
    match_radius_m: float = 1e-3,
) -> GhostProbabilityResult:
    """Fraction of trials whose exact-range association is non-unique.

    Each trial draws a fresh random scene (or reuses ``scene`` when given),
    synthesizes exact distances, and counts the feasible hypotheses. Trials
    with zero feasible hypotheses are reported separately.
    """
    if num_trials < 1:
        raise ValueError("num_trials must be at least 1")
    if num_bs < 3:
        raise ValueError("num_bs must be at least 3")

    trial_seeds = np.random.SeedSequence(seed).generate_state(num_trials)
    outcomes = []
    ghost_seeds = []
    infeasible_seeds = []
    for trial, trial_seed in enumerate(int(s) for s in trial_seeds):
        trial_scene = scene if scene is not None else random_scene(
            num_bs, num_targets, bounds, rcs_dbsm=rcs_dbsm, seed=trial_seed
        )
        profiles = exact_profiles(trial_scene)
        solutions = enumerate_feasible(profiles, trial_scene.bs_positions(), feas_tol_m)
        truth = [t.position for t in trial_scene.targets]
        correct = any(
            all(true_distance(est.position, truth[k]) <= match_radius_m
                for k, est in enumerate(sol.estimates))
            for sol in solutions
        )
        ghost = len(solutions) > 1
        infeasible = len(solutions) == 0
        if ghost:
            ghost_seeds.append(trial_seed)
        if infeasible:
            infeasible_seeds.append(trial_seed)
        outcomes.append(GhostTrialOutcome(
            trial=trial, seed=trial_seed, feasible_count=len(solutions),
            ghost=ghost, infeasible=infeasible, correct_found=correct,
        ))
    return GhostProbabilityResult(
        fraction=len(ghost_seeds) / num_trials,
        num_trials=num_trials,
        ghost_seeds=tuple(ghost_seeds),
        infeasible_seeds=tuple(infeasible_seeds),
        outcomes=tuple(outcomes),
    )
