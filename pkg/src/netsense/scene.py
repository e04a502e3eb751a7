"""Geometric ground truth: anchors, passive targets, and scene validation.

Scenes are immutable once constructed and safe to share across workers.
All coordinates are meters in a flat 2D plane; RCS values are dB re 1 m².
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import SceneGenerationError

DEFAULT_COLLINEARITY_TOL = 1e-9


class AnchorKind(str, Enum):
    BS = "bs"
    IRS = "irs"


@dataclass(frozen=True)
class Point2:
    """A point in the plane, meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"coordinates must be finite, got ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class Anchor:
    id: str
    kind: AnchorKind
    position: Point2


@dataclass(frozen=True)
class Target:
    id: str
    position: Point2
    rcs_dbsm: float = -10.0


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned rectangle, meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("bounds must have positive extent")

    def contains(self, p: Point2) -> bool:
        return self.xmin <= p.x <= self.xmax and self.ymin <= p.y <= self.ymax

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)


@dataclass(frozen=True)
class Scene:
    anchors: tuple[Anchor, ...]
    targets: tuple[Target, ...]
    bounds: Bounds

    @property
    def base_stations(self) -> tuple[Anchor, ...]:
        return tuple(a for a in self.anchors if a.kind is AnchorKind.BS)

    @property
    def irs_anchors(self) -> tuple[Anchor, ...]:
        return tuple(a for a in self.anchors if a.kind is AnchorKind.IRS)

    def bs_positions(self) -> np.ndarray:
        """Active-BS coordinates as an (M, 2) array."""
        return np.array([[a.position.x, a.position.y] for a in self.base_stations],
                        dtype=float).reshape(-1, 2)

    def target_positions(self) -> np.ndarray:
        return np.array([[t.position.x, t.position.y] for t in self.targets],
                        dtype=float).reshape(-1, 2)


def true_distance(a: Point2, b: Point2) -> float:
    """Euclidean distance between two points, meters."""
    return math.hypot(a.x - b.x, a.y - b.y)


def triangle_area(p: Point2, q: Point2, r: Point2) -> float:
    """Unsigned area of the triangle spanned by three points."""
    return 0.5 * abs((q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y))


def _triple_is_collinear(p: Point2, q: Point2, r: Point2, tol: float) -> bool:
    # Area threshold is relative to the squared triangle diameter so the
    # check is scale invariant.
    scale = max(true_distance(p, q), true_distance(q, r), true_distance(p, r))
    return triangle_area(p, q, r) < tol * scale * scale


def find_collinear_bs_triples(
    scene: Scene, tol: float = DEFAULT_COLLINEARITY_TOL
) -> list[tuple[str, str, str]]:
    """Ids of every active-BS triple that is collinear within tolerance."""
    out = []
    for a, b, c in itertools.combinations(scene.base_stations, 3):
        if _triple_is_collinear(a.position, b.position, c.position, tol):
            out.append((a.id, b.id, c.id))
    return out


def points_are_collinear(points: np.ndarray, tol: float = DEFAULT_COLLINEARITY_TOL) -> bool:
    """True when an entire point set fails to span the plane.

    The set is collinear when every triple is collinear within tolerance.
    Fewer than three points are always considered collinear.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        return True
    as_points = [Point2(float(p[0]), float(p[1])) for p in pts]
    return all(
        _triple_is_collinear(p, q, r, tol)
        for p, q, r in itertools.combinations(as_points, 3)
    )


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of validate_scene; empty violations means the scene is valid."""

    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_scene(scene: Scene, collinearity_tol: float = DEFAULT_COLLINEARITY_TOL) -> ValidationReport:
    """Check a scene for duplicate ids, stray targets, and collinear BS triples.

    Validation never raises; every problem found is reported as one line.
    """
    violations: list[str] = []

    seen: set[str] = set()
    for a in scene.anchors:
        if a.id in seen:
            violations.append(f"duplicate anchor id: {a.id}")
        seen.add(a.id)
    seen = set()
    for t in scene.targets:
        if t.id in seen:
            violations.append(f"duplicate target id: {t.id}")
        seen.add(t.id)

    for t in scene.targets:
        if not scene.bounds.contains(t.position):
            violations.append(f"target {t.id} outside bounds at ({t.position.x}, {t.position.y})")

    for ids in find_collinear_bs_triples(scene, collinearity_tol):
        violations.append(f"collinear BS triple: {', '.join(ids)}")

    return ValidationReport(tuple(violations))


def random_scene(
    num_bs: int,
    num_targets: int,
    bounds: Bounds,
    rcs_dbsm: float = -10.0,
    seed: int = 0,
    collinearity_tol: float = DEFAULT_COLLINEARITY_TOL,
    max_attempts: int = 1000,
) -> Scene:
    """Draw a uniform random scene, rejecting BS layouts with collinear triples.

    Deterministic for a given seed. Raises SceneGenerationError when the
    rejection loop exceeds max_attempts (e.g. with an absurd tolerance).
    """
    if num_bs < 3:
        raise ValueError("need at least 3 base stations")
    if num_targets < 0:
        raise ValueError("num_targets must be nonnegative")

    rng = np.random.default_rng(seed)
    lo = np.array([bounds.xmin, bounds.ymin])
    hi = np.array([bounds.xmax, bounds.ymax])

    for _ in range(max_attempts):
        xy = rng.uniform(lo, hi, size=(num_bs, 2))
        pts = [Point2(float(x), float(y)) for x, y in xy]
        bad = any(
            _triple_is_collinear(p, q, r, collinearity_tol)
            for p, q, r in itertools.combinations(pts, 3)
        )
        if not bad:
            anchors = tuple(
                Anchor(f"bs{i + 1}", AnchorKind.BS, p) for i, p in enumerate(pts)
            )
            break
    else:
        raise SceneGenerationError(
            f"could not place {num_bs} BSs without a collinear triple "
            f"in {max_attempts} attempts (tol={collinearity_tol})"
        )

    txy = rng.uniform(lo, hi, size=(num_targets, 2))
    targets = tuple(
        Target(f"t{i + 1}", Point2(float(x), float(y)), rcs_dbsm)
        for i, (x, y) in enumerate(txy)
    )
    return Scene(anchors=anchors, targets=targets, bounds=bounds)


# --- JSON serialization -----------------------------------------------------
#
# Schema: {"bounds": [xmin, ymin, xmax, ymax],
#          "anchors": [{"id", "kind": "bs"|"irs", "x", "y"}],
#          "targets": [{"id", "x", "y", "rcs_dbsm"}]}
# Units: meters and dBsm throughout.


def scene_to_dict(scene: Scene) -> dict:
    return {
        "bounds": list(scene.bounds.as_tuple()),
        "anchors": [
            {"id": a.id, "kind": a.kind.value, "x": a.position.x, "y": a.position.y}
            for a in scene.anchors
        ],
        "targets": [
            {"id": t.id, "x": t.position.x, "y": t.position.y, "rcs_dbsm": t.rcs_dbsm}
            for t in scene.targets
        ],
    }


def scene_from_dict(data: dict) -> Scene:
    bounds = Bounds(*[float(v) for v in data["bounds"]])
    anchors = tuple(
        Anchor(str(a["id"]), AnchorKind(a["kind"]), Point2(float(a["x"]), float(a["y"])))
        for a in data["anchors"]
    )
    targets = tuple(
        Target(str(t["id"]), Point2(float(t["x"]), float(t["y"])), float(t.get("rcs_dbsm", -10.0)))
        for t in data["targets"]
    )
    return Scene(anchors=anchors, targets=targets, bounds=bounds)


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n")


def load_scene(path: str | Path) -> Scene:
    return scene_from_dict(json.loads(Path(path).read_text()))
