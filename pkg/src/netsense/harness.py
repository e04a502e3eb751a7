"""End-to-end experiments: noisy range synthesis, uniqueness and accuracy sweeps.

Every trial draws from its own child stream of the master seed (indexed by
trial number), so reports are byte-identical regardless of execution order
or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .association import (
    AssociationSolution,
    DistanceProfile,
    enumerate_feasible,
    solve_association_bnb,
)
from .errors import InfeasibleAssociationError
from .link_budget import LinkBudgetParams, covered, range_resolution
from .scene import Bounds, Scene, random_scene, scene_to_dict, true_distance

CORRECT_MATCH_RADIUS_M = 1e-3


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian range error with optional rounding to the range resolution."""

    range_sigma_m: float = 0.0
    quantize_to_resolution: bool = False
    bandwidth_hz: float = 100e6

    def __post_init__(self):
        if self.range_sigma_m < 0:
            raise ValueError("range_sigma_m must be nonnegative")

    def effective_sigma_m(self) -> float:
        """Standard deviation including the quantization contribution."""
        var = self.range_sigma_m ** 2
        if self.quantize_to_resolution:
            step = range_resolution(self.bandwidth_hz)
            var += step * step / 12.0
        return math.sqrt(var)


@dataclass(frozen=True)
class RandomScenePlan:
    """Parameters for drawing a fresh random scene each trial."""

    num_bs: int = 3
    num_targets: int = 2
    bounds: Bounds = Bounds(-150.0, -150.0, 150.0, 150.0)
    rcs_dbsm: float = -10.0


@dataclass(frozen=True)
class ExperimentSpec:
    """A reproducible experiment: scene source, link budget, noise, and seeds."""

    scene: Scene | None = None
    random_plan: RandomScenePlan | None = None
    link: LinkBudgetParams = None  # type: ignore[assignment]
    snr_min_db: float = 10.0
    noise: NoiseModel = NoiseModel()
    trials: int = 1
    seed: int = 0
    feas_tol_m: float = 1e-4

    def __post_init__(self):
        if (self.scene is None) == (self.random_plan is None):
            raise ValueError("provide exactly one of scene or random_plan")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.link is None:
            object.__setattr__(self, "link", LinkBudgetParams())

    def to_dict(self) -> dict:
        return {
            "scene": scene_to_dict(self.scene) if self.scene is not None else None,
            "random_plan": None if self.random_plan is None else {
                "num_bs": self.random_plan.num_bs,
                "num_targets": self.random_plan.num_targets,
                "bounds": list(self.random_plan.bounds.as_tuple()),
                "rcs_dbsm": self.random_plan.rcs_dbsm,
            },
            "link": {
                "pt_watts": self.link.pt_watts,
                "gt_dbi": self.link.gt_dbi,
                "gr_dbi": self.link.gr_dbi,
                "gp_db": self.link.gp_db,
                "carrier_hz": self.link.carrier_hz,
                "rcs_dbsm": self.link.rcs_dbsm,
                "temperature_k": self.link.temperature_k,
                "bandwidth_hz": self.link.bandwidth_hz,
                "noise_factor_db": self.link.noise_factor_db,
            },
            "snr_min_db": self.snr_min_db,
            "noise": {
                "range_sigma_m": self.noise.range_sigma_m,
                "quantize_to_resolution": self.noise.quantize_to_resolution,
                "bandwidth_hz": self.noise.bandwidth_hz,
            },
            "trials": self.trials,
            "seed": self.seed,
            "feas_tol_m": self.feas_tol_m,
        }


@dataclass(frozen=True)
class MeasurementSet:
    """Per-BS distance profiles plus detection and provenance bookkeeping.

    origins[m][i] is the target index behind profiles[m].distances[i]; it is
    simulator-side ground truth used only for scoring, never by the solvers.
    """

    profiles: tuple[DistanceProfile, ...]
    detected: np.ndarray  # (num_bs, num_targets) bool
    origins: tuple[tuple[int, ...], ...]

    @property
    def full_detection(self) -> bool:
        return bool(self.detected.all())


@dataclass(frozen=True)
class ExperimentReport:
    kind: str
    spec: dict
    records: tuple[dict, ...]
    aggregates: dict

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "spec": self.spec,
            "records": list(self.records),
            "aggregates": self.aggregates,
        }


def measure_distances(
    scene: Scene,
    link: LinkBudgetParams,
    snr_min_db: float,
    noise: NoiseModel,
    seed: int,
) -> MeasurementSet:
    """Synthesize each BS's unordered distance set with coverage gating.

    A (BS, target) pair contributes a distance only when the sensing SNR at
    the true distance meets the threshold, evaluated with the target's own
    RCS. Covered distances get Gaussian noise, optional quantization to the
    range resolution, and a deterministic per-BS shuffle.
    """
    stations = scene.base_stations
    targets = scene.targets
    detected = np.zeros((len(stations), len(targets)), dtype=bool)
    step = range_resolution(noise.bandwidth_hz) if noise.quantize_to_resolution else None

    profiles = []
    origins = []
    for m, bs in enumerate(stations):
        rng = np.random.default_rng([seed, m])
        values: list[float] = []
        sources: list[int] = []
        for k, target in enumerate(targets):
            d_true = true_distance(bs.position, target.position)
            gate_params = replace(link, rcs_dbsm=target.rcs_dbsm)
            # Zero distance (target at the BS) is trivially inside coverage.
            if d_true > 0.0 and not covered(gate_params, snr_min_db, d_true):
                continue
            detected[m, k] = True
            d = d_true + rng.normal(0.0, noise.range_sigma_m)
            if step is not None:
                d = round(d / step) * step
            values.append(max(d, 0.0))
            sources.append(k)
        perm = rng.permutation(len(values))
        profiles.append(DistanceProfile(
            anchor_id=bs.id,
            distances=tuple(values[i] for i in perm),
        ))
        origins.append(tuple(sources[i] for i in perm))
    return MeasurementSet(profiles=tuple(profiles), detected=detected, origins=tuple(origins))


def _trial_seeds(seed: int, trials: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(trials)]


def _trial_scene(spec: ExperimentSpec, trial_seed: int) -> Scene:
    if spec.scene is not None:
        return spec.scene
    plan = spec.random_plan
    return random_scene(plan.num_bs, plan.num_targets, plan.bounds,
                        rcs_dbsm=plan.rcs_dbsm, seed=trial_seed)


def _association_tol(base_tol: float, sigma_eff: float, num_bs: int) -> float:
    # Exact ranges keep the configured tolerance; noisy ranges widen it to
    # 3 * sigma * sqrt(M) so the true hypothesis stays feasible.
    if sigma_eff == 0.0:
        return base_tol
    return max(base_tol, 3.0 * sigma_eff * math.sqrt(num_bs))


def _matching_rmse(solution: AssociationSolution, scene: Scene,
                   origins: tuple[tuple[int, ...], ...]) -> tuple[bool, float]:
    """Score one solution against ground truth via measurement provenance."""
    truth_xy = scene.target_positions()
    assignment = solution.hypothesis.assignment
    consistent = all(
        origins[m][assignment[m][k]] == origins[0][k]
        for m in range(len(assignment))
        for k in range(len(assignment[0]))
    )
    errors = []
    for k, est in enumerate(solution.estimates):
        t = truth_xy[origins[0][k]]
        errors.append((est.position.x - t[0]) ** 2 + (est.position.y - t[1]) ** 2)
    rmse = math.sqrt(sum(errors) / len(errors))
    matched = consistent and all(math.sqrt(e) <= CORRECT_MATCH_RADIUS_M for e in errors)
    return matched, rmse


def _uniqueness_trial(args: tuple[ExperimentSpec, int, int]) -> dict:
    spec, trial, trial_seed = args
    scene = _trial_scene(spec, trial_seed)
    exact = NoiseModel(0.0, False, spec.noise.bandwidth_hz)
    ms = measure_distances(scene, spec.link, spec.snr_min_db, exact, trial_seed)

    record = {
        "trial": trial,
        "seed": trial_seed,
        "detected_pairs": int(ms.detected.sum()),
        "total_pairs": int(ms.detected.size),
        "partial": not ms.full_detection,
        "feasible_count": None,
        "ghost": None,
        "correct_found": None,
        "rmse_m": None,
    }
    if record["partial"]:
        return record

    solutions = enumerate_feasible(ms.profiles, scene.bs_positions(), spec.feas_tol_m)
    matches = [_matching_rmse(s, scene, ms.origins) for s in solutions]
    correct = [rmse for ok, rmse in matches if ok]
    record.update(
        feasible_count=len(solutions),
        ghost=len(solutions) > 1,
        correct_found=bool(correct),
        rmse_m=min(correct) if correct else None,
    )
    return record


def _accuracy_trial(args: tuple[ExperimentSpec, float, int, int]) -> dict:
    spec, sigma, trial, trial_seed = args
    scene = _trial_scene(spec, trial_seed)
    noise = NoiseModel(sigma, spec.noise.quantize_to_resolution, spec.noise.bandwidth_hz)
    ms = measure_distances(scene, spec.link, spec.snr_min_db, noise, trial_seed)

    record = {
        "sigma_m": sigma,
        "trial": trial,
        "seed": trial_seed,
        "partial": not ms.full_detection,
        "infeasible": None,
        "correct": None,
        "rmse_m": None,
    }
    if record["partial"]:
        return record

    tol = _association_tol(spec.feas_tol_m, noise.effective_sigma_m(), len(ms.profiles))
    try:
        solution = solve_association_bnb(ms.profiles, scene.bs_positions(), tol)
    except InfeasibleAssociationError:
        record.update(infeasible=True, correct=False)
        return record

    truth_xy = scene.target_positions()
    assignment = solution.hypothesis.assignment
    correct = all(
        ms.origins[m][assignment[m][k]] == ms.origins[0][k]
        for m in range(len(assignment))
        for k in range(len(assignment[0]))
    )
    errors = [
        (est.position.x - truth_xy[ms.origins[0][k]][0]) ** 2
        + (est.position.y - truth_xy[ms.origins[0][k]][1]) ** 2
        for k, est in enumerate(solution.estimates)
    ]
    record.update(
        infeasible=False,
        correct=correct,
        rmse_m=math.sqrt(sum(errors) / len(errors)),
    )
    return record


def _run_trials(worker, jobs: list, workers: int) -> list[dict]:
    if workers <= 1 or len(jobs) <= 1:
        return [worker(job) for job in jobs]
    chunk = max(1, len(jobs) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, jobs, chunksize=chunk))


def uniqueness_aggregates(records: Sequence[dict]) -> dict:
    completed = [r for r in records if not r["partial"]]
    ghosts = sum(1 for r in completed if r["ghost"])
    correct = sum(1 for r in completed if r["correct_found"])
    rmses = [r["rmse_m"] for r in completed if r["rmse_m"] is not None]
    detected = sum(r["detected_pairs"] for r in records)
    total = sum(r["total_pairs"] for r in records)
    return {
        "trials": len(records),
        "completed": len(completed),
        "partial": len(records) - len(completed),
        "ghost_count": ghosts,
        "ghost_fraction": ghosts / len(completed) if completed else 0.0,
        "correct_rate": correct / len(completed) if completed else 0.0,
        "rmse_m": math.sqrt(sum(r * r for r in rmses) / len(rmses)) if rmses else None,
        "detection_fraction": detected / total if total else 0.0,
    }


def accuracy_aggregates(records: Sequence[dict]) -> dict:
    by_sigma: dict[float, list[dict]] = {}
    for r in records:
        by_sigma.setdefault(r["sigma_m"], []).append(r)
    levels = []
    for sigma in sorted(by_sigma):
        rows = by_sigma[sigma]
        completed = [r for r in rows if not r["partial"]]
        solved = [r for r in completed if not r["infeasible"]]
        rmses = [r["rmse_m"] for r in solved if r["rmse_m"] is not None]
        levels.append({
            "sigma_m": sigma,
            "trials": len(rows),
            "completed": len(completed),
            "infeasible": sum(1 for r in completed if r["infeasible"]),
            "correct_rate": (sum(1 for r in solved if r["correct"]) / len(solved))
            if solved else 0.0,
            "rmse_m": math.sqrt(sum(r * r for r in rmses) / len(rmses)) if rmses else None,
        })
    return {"levels": levels}


def run_uniqueness_experiment(spec: ExperimentSpec, workers: int = 1) -> ExperimentReport:
    """Exact-range association uniqueness over seeded trials.

    Trials without full detection are recorded but excluded from the
    headline ghost fraction.
    """
    seeds = _trial_seeds(spec.seed, spec.trials)
    jobs = [(spec, t, s) for t, s in enumerate(seeds)]
    records = sorted(_run_trials(_uniqueness_trial, jobs, workers), key=lambda r: r["trial"])
    return ExperimentReport(
        kind="uniqueness",
        spec=spec.to_dict(),
        records=tuple(records),
        aggregates=uniqueness_aggregates(records),
    )


def run_accuracy_experiment(
    spec: ExperimentSpec,
    sigma_list_m: Sequence[float],
    workers: int = 1,
) -> ExperimentReport:
    """Noisy-range association accuracy across a sigma sweep."""
    if not sigma_list_m:
        raise ValueError("sigma_list_m must not be empty")
    if any(s < 0 for s in sigma_list_m):
        raise ValueError("sigma values must be nonnegative")
    seeds = _trial_seeds(spec.seed, spec.trials)
    jobs = [
        (spec, float(sigma), t, s)
        for sigma in sigma_list_m
        for t, s in enumerate(seeds)
    ]
    records = sorted(
        _run_trials(_accuracy_trial, jobs, workers),
        key=lambda r: (r["sigma_m"], r["trial"]),
    )
    return ExperimentReport(
        kind="accuracy",
        spec=spec.to_dict(),
        records=tuple(records),
        aggregates=accuracy_aggregates(records),
    )
