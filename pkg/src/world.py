from __future__ import annotations

from pathlib import Path
import math
from typing import Any, Callable

import numpy as np
import yaml

from .config import PARALLEL_EPS, RAY_CHUNK, SAMPLING_ATTEMPTS
from .errors import SamplingExhaustedError, ScenarioParseError, ScenarioValidationError, WorldDomainError
from .models import Rect, Scenario, Segment, Vec2

SCENARIO_FIELDS = ("name", "bounds", "segments", "spawn_window")


def _number_list(raw: Any, label: str, length: int) -> list[float]:
    if not isinstance(raw, (list, tuple)) or len(raw) != length:
        raise ScenarioParseError(label, f"expected a list of {length} numbers, got {raw!r}")
    out = []
    for value in raw:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioParseError(label, f"non-numeric value {value!r}")
        out.append(float(value))
    if not np.all(np.isfinite(out)):
        raise ScenarioParseError(label, "non-finite value")
    return out


def wrap_angle(angle: float) -> float:
    """Wrap into (-pi, pi]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    return math.pi if wrapped <= -math.pi else wrapped


def boundary_segments(bounds: Rect) -> list[Segment]:
    c = [
        Vec2(bounds.xmin, bounds.ymin),
        Vec2(bounds.xmax, bounds.ymin),
        Vec2(bounds.xmax, bounds.ymax),
        Vec2(bounds.xmin, bounds.ymax),
    ]
    return [Segment(c[i], c[(i + 1) % 4]) for i in range(4)]


def build_scenario(name: str, bounds: Rect, segments: list[Segment], spawn_window: Rect) -> Scenario:
    if bounds.width <= 0 or bounds.height <= 0:
        raise ScenarioValidationError(f"{name}: bounds must have positive area")
    return Scenario(
        name=name,
        bounds=bounds,
        obstacles=tuple(boundary_segments(bounds) + list(segments)),
        spawn_window=spawn_window,
    )


def parse_scenario(text: str) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError("document", f"not valid YAML ({exc})") from exc
    if not isinstance(doc, dict):
        raise ScenarioParseError("document", "expected a mapping at the top level")

    unknown = sorted(set(doc) - set(SCENARIO_FIELDS))
    if unknown:
        raise ScenarioParseError(str(unknown[0]), "unknown field")
    for key in SCENARIO_FIELDS:
        if key not in doc:
            raise ScenarioParseError(key, "missing field")

    name = doc["name"]
    if not isinstance(name, str) or not name.strip():
        raise ScenarioParseError("name", "expected non-empty text")

    bounds = Rect(*_number_list(doc["bounds"], "bounds", 4))
    window = Rect(*_number_list(doc["spawn_window"], "spawn_window", 4))
    raw_segments = doc["segments"] if doc["segments"] is not None else []
    if not isinstance(raw_segments, list):
        raise ScenarioParseError("segments", "expected a list of [ax, ay, bx, by]")

    segments = []
    for i, raw in enumerate(raw_segments):
        ax, ay, bx, by = _number_list(raw, f"segments[{i}]", 4)
        segments.append(Segment(Vec2(ax, ay), Vec2(bx, by)))
    return build_scenario(name.strip(), bounds, segments, window)


def load_scenario(source: str | Path) -> Scenario:
    """Load a scenario from a YAML path or from the document text itself."""
    if isinstance(source, Path):
        return parse_scenario(source.read_text(encoding="utf-8"))
    return parse_scenario(source)


def scale_scenario(s: Scenario, rho: float) -> Scenario:
    if rho <= 0:
        raise ValueError("scale factor must be positive")
    segments = [Segment(seg.a.scaled(rho), seg.b.scaled(rho)) for seg in s.obstacles]
    return Scenario(
        name=f"{s.name}_x{rho:g}",
        bounds=s.bounds.scaled(rho),
        obstacles=tuple(segments),
        spawn_window=s.spawn_window.scaled(rho),
    )


def _cast_chunk(segs: np.ndarray, ox: np.ndarray, oy: np.ndarray, angles: np.ndarray, max_range: float) -> np.ndarray:
    dx = np.cos(angles)[:, None]
    dy = np.sin(angles)[:, None]
    ax, ay = segs[None, :, 0], segs[None, :, 1]
    ex, ey = segs[None, :, 2] - ax, segs[None, :, 3] - ay
    wx, wy = ax - ox[:, None], ay - oy[:, None]

    det = dx * ey - dy * ex
    parallel = np.abs(det) < PARALLEL_EPS
    safe = np.where(parallel, 1.0, det)
    t = (wx * ey - wy * ex) / safe
    u = (wx * dy - wy * dx) / safe

    hit = ~parallel & (t > 0.0) & (u >= 0.0) & (u <= 1.0)
    dist = np.where(hit, t, np.inf).min(axis=1)
    return np.minimum(dist, max_range)


def cast_rays(s: Scenario, origins: np.ndarray, angles: np.ndarray, max_range: float) -> np.ndarray:
    """Distances along many rays at once; `origins` is (N, 2), `angles` is (N,)."""
    if max_range <= 0:
        raise ValueError("max_range must be positive")
    origins = np.asarray(origins, dtype=float).reshape(-1, 2)
    angles = np.asarray(angles, dtype=float).reshape(-1)
    if len(origins) == 1 and len(angles) > 1:
        origins = np.repeat(origins, len(angles), axis=0)
    if len(origins) != len(angles):
        raise ValueError("origins and angles must have matching lengths")

    b = s.bounds
    inside = (
        (origins[:, 0] > b.xmin) & (origins[:, 0] < b.xmax) & (origins[:, 1] > b.ymin) & (origins[:, 1] < b.ymax)
    )
    if not np.all(inside):
        bad = origins[~inside][0]
        raise WorldDomainError(f"ray origin ({bad[0]}, {bad[1]}) is outside the bounds of {s.name}")

    out = np.empty(len(angles), dtype=float)
    for start in range(0, len(angles), RAY_CHUNK):
        sl = slice(start, start + RAY_CHUNK)
        out[sl] = _cast_chunk(s.segment_array, origins[sl, 0], origins[sl, 1], angles[sl], max_range)
    return out


def raycast(s: Scenario, origin: Vec2, angle: float, max_range: float) -> float:
    return float(cast_rays(s, np.array([[origin.x, origin.y]]), np.array([angle]), max_range)[0])


def beam_angles(heading: float, fov: float, n_beams: int) -> np.ndarray:
    if n_beams < 2:
        raise ValueError("a scan needs at least two beams")
    return heading - fov / 2.0 + np.arange(n_beams) * (fov / (n_beams - 1))


def lidar_scan(s: Scenario, pose: tuple[Vec2, float], fov: float, n_beams: int, max_range: float) -> np.ndarray:
    position, heading = pose
    angles = beam_angles(heading, fov, n_beams)
    return cast_rays(s, np.array([[position.x, position.y]]), angles, max_range)


def obstacle_clearance(s: Scenario, center: Vec2) -> float:
    """Minimum point-to-segment distance from `center` to any obstacle."""
    segs = s.segment_array
    ax, ay = segs[:, 0], segs[:, 1]
    ex, ey = segs[:, 2] - ax, segs[:, 3] - ay
    px, py = center.x - ax, center.y - ay
    t = np.clip((px * ex + py * ey) / (ex * ex + ey * ey), 0.0, 1.0)
    return float(np.min(np.hypot(px - t * ex, py - t * ey)))


def collision_check(s: Scenario, center: Vec2, radius: float) -> bool:
    if radius <= 0:
        raise ValueError("collision radius must be positive")
    return obstacle_clearance(s, center) < radius


def sample_free_pose(
    s: Scenario,
    rng: np.random.Generator,
    clearance: float,
    window: Rect,
    accept: Callable[[Vec2], bool] | None = None,
) -> Vec2:
    if window.intersection(s.bounds) is None:
        raise ScenarioValidationError(f"sampling window does not intersect the bounds of {s.name}")
    for _ in range(SAMPLING_ATTEMPTS):
        p = Vec2(float(rng.uniform(window.xmin, window.xmax)), float(rng.uniform(window.ymin, window.ymax)))
        if not s.bounds.contains(p, strict=True):
            continue
        if collision_check(s, p, clearance):
            continue
        if accept is not None and not accept(p):
            continue
        return p
    raise SamplingExhaustedError(
        f"no free point with clearance {clearance:g} m found in {SAMPLING_ATTEMPTS} draws on {s.name}"
    )
