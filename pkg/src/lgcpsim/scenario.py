"""Road-of-interest grid, CAV states and scenario generation / persistence.

Cells are indexed row-major: ``index = row * n_cols + col`` with ``col``
counting along x from the grid origin. Edge cells are clipped to the RoI
when the extent is not a multiple of the cell size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgumentError, ParseError, ValidationError

SCHEMA_VERSION = 1
DEFAULT_CAV_COMPUTE = 0.1e12  # FLOP/s
DEFAULT_POSITION_MARGIN = 10.0  # m

Point = tuple[float, float]


@dataclass(frozen=True)
class RoiGrid:
    width_m: float
    height_m: float
    cell_w: float
    cell_h: float
    origin: Point = (0.0, 0.0)
    occupied: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        for name in ("width_m", "height_m", "cell_w", "cell_h"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgumentError(f"{name} must be > 0, got {value!r}")
        bad = [c for c in self.occupied if not 0 <= c < self.n_cells]
        if bad:
            raise InvalidArgumentError(f"occupied cells out of range: {sorted(bad)}")

    @property
    def n_cols(self) -> int:
        return math.ceil(self.width_m / self.cell_w)

    @property
    def n_rows(self) -> int:
        return math.ceil(self.height_m / self.cell_h)

    @property
    def n_cells(self) -> int:
        return self.n_cols * self.n_rows

    @property
    def cell_area(self) -> float:
        return self.cell_w * self.cell_h

    @property
    def roi_area(self) -> float:
        return self.width_m * self.height_m

    def contains(self, point: Point) -> bool:
        x, y = point
        ox, oy = self.origin
        return ox <= x <= ox + self.width_m and oy <= y <= oy + self.height_m

    def cell_of(self, point: Point) -> int | None:
        """Cell index containing ``point``, or None outside the RoI.

        Points on the far RoI boundary belong to the last row/column.
        """
        if not self.contains(point):
            return None
        x, y = point
        ox, oy = self.origin
        col = min(int((x - ox) // self.cell_w), self.n_cols - 1)
        row = min(int((y - oy) // self.cell_h), self.n_rows - 1)
        return row * self.n_cols + col

    def cell_bounds(self, index: int) -> tuple[float, float, float, float]:
        """(x0, y0, x1, y1) of a cell, clipped to the RoI."""
        if not 0 <= index < self.n_cells:
            raise InvalidArgumentError(f"cell index {index} out of range")
        row, col = divmod(index, self.n_cols)
        ox, oy = self.origin
        x0 = ox + col * self.cell_w
        y0 = oy + row * self.cell_h
        x1 = min(x0 + self.cell_w, ox + self.width_m)
        y1 = min(y0 + self.cell_h, oy + self.height_m)
        return x0, y0, x1, y1

    def cell_center(self, index: int) -> Point:
        x0, y0, x1, y1 = self.cell_bounds(index)
        return (x0 + x1) / 2, (y0 + y1) / 2

    def areas(self) -> list[int]:
        """Occupied cells in ascending index order; these are the perception areas."""
        return sorted(self.occupied)


@dataclass(frozen=True)
class CavState:
    id: int
    position: Point
    heading: float = 0.0
    compute: float = DEFAULT_CAV_COMPUTE
    is_infrastructure: bool = False


@dataclass(frozen=True)
class Scenario:
    grid: RoiGrid
    cavs: tuple[CavState, ...]
    background: tuple[Point, ...] = ()
    seed: int = 0
    confidence_source: str = "synthetic"
    confidence_path: str | None = None

    def __post_init__(self):
        validate_scenario(self)

    @property
    def cav_ids(self) -> list[int]:
        return sorted(c.id for c in self.cavs)

    def cav(self, cav_id: int) -> CavState:
        for c in self.cavs:
            if c.id == cav_id:
                return c
        raise KeyError(cav_id)

    def positions(self) -> dict[int, Point]:
        return {c.id: c.position for c in self.cavs}

    def compute_map(self) -> dict[int, float]:
        return {c.id: c.compute for c in self.cavs}


def validate_scenario(scenario: Scenario, margin: float = DEFAULT_POSITION_MARGIN) -> None:
    if not scenario.cavs:
        raise ValidationError("scenario needs at least one CAV")
    ids = [c.id for c in scenario.cavs]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate CAV ids: {sorted(ids)}")
    if scenario.confidence_source not in ("synthetic", "file"):
        raise ValidationError(f"unknown confidence source {scenario.confidence_source!r}")
    if scenario.confidence_source == "file" and not scenario.confidence_path:
        raise ValidationError("confidence source 'file' requires a path")
    g = scenario.grid
    ox, oy = g.origin
    for c in scenario.cavs:
        if not c.compute > 0:
            raise ValidationError(f"CAV {c.id}: compute must be > 0")
        x, y = c.position
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValidationError(f"CAV {c.id}: non-finite position")
        if not (ox - margin <= x <= ox + g.width_m + margin
                and oy - margin <= y <= oy + g.height_m + margin):
            raise ValidationError(f"CAV {c.id} at {c.position} lies outside the RoI margin")


def build_grid(width_m: float, height_m: float, cell_w: float, cell_h: float,
               origin: Point = (0.0, 0.0)) -> RoiGrid:
    return RoiGrid(width_m, height_m, cell_w, cell_h, origin=tuple(origin))


def mark_occupancy(grid: RoiGrid, vehicle_positions: Iterable[Point]) -> RoiGrid:
    """Return a copy of ``grid`` whose occupied set is the cells holding any vehicle.

    Positions outside the RoI are ignored.
    """
    cells = set()
    for p in vehicle_positions:
        c = grid.cell_of(p)
        if c is not None:
            cells.add(c)
    return replace(grid, occupied=frozenset(cells))


@dataclass(frozen=True)
class GridSpec:
    width_m: float = 280.0
    height_m: float = 80.0
    cell_w: float = 10.0
    cell_h: float = 6.0
    origin: Point = (0.0, 0.0)


def generate_scenario(seed: int, n_cavs: int, n_background_vehicles: int = 0,
                      grid_spec: GridSpec | None = None, lane_width: float | None = None,
                      compute: float = DEFAULT_CAV_COMPUTE) -> Scenario:
    """Draw CAV and background vehicle positions uniformly over the RoI.

    With ``lane_width`` set, y coordinates snap to lane centres.
    """
    if n_cavs < 1:
        raise InvalidArgumentError(f"n_cavs must be >= 1, got {n_cavs}")
    if n_background_vehicles < 0:
        raise InvalidArgumentError("n_background_vehicles must be >= 0")
    spec = grid_spec or GridSpec()
    grid = build_grid(spec.width_m, spec.height_m, spec.cell_w, spec.cell_h, spec.origin)
    rng = np.random.default_rng(seed)
    n = n_cavs + n_background_vehicles
    ox, oy = grid.origin
    xs = ox + rng.uniform(0.0, grid.width_m, size=n)
    ys = oy + rng.uniform(0.0, grid.height_m, size=n)
    if lane_width:
        n_lanes = max(1, int(grid.height_m // lane_width))
        lane = np.minimum((ys - oy) // lane_width, n_lanes - 1)
        ys = oy + (lane + 0.5) * lane_width
    headings = rng.uniform(0.0, 360.0, size=n_cavs)
    cavs = tuple(
        CavState(id=i, position=(float(xs[i]), float(ys[i])), heading=float(headings[i]),
                 compute=compute)
        for i in range(n_cavs)
    )
    background = tuple((float(xs[i]), float(ys[i])) for i in range(n_cavs, n))
    grid = mark_occupancy(grid, [c.position for c in cavs] + list(background))
    return Scenario(grid=grid, cavs=cavs, background=background, seed=int(seed))


def scenario_to_dict(scenario: Scenario) -> dict:
    g = scenario.grid
    confidence = {"source": scenario.confidence_source}
    if scenario.confidence_path is not None:
        confidence["path"] = scenario.confidence_path
    return {
        "version": SCHEMA_VERSION,
        "grid": {"origin": list(g.origin), "width_m": g.width_m, "height_m": g.height_m,
                 "cell_w": g.cell_w, "cell_h": g.cell_h},
        "cavs": [{"id": c.id, "x": c.position[0], "y": c.position[1], "heading": c.heading,
                  "compute_flops": c.compute, "infra": c.is_infrastructure}
                 for c in scenario.cavs],
        "background": [{"x": x, "y": y} for x, y in scenario.background],
        "seed": scenario.seed,
        "confidence": confidence,
    }


def scenario_from_dict(doc: dict) -> Scenario:
    try:
        version = doc["version"]
        if version != SCHEMA_VERSION:
            raise ValidationError(f"unsupported scenario version {version!r}")
        g = doc["grid"]
        grid = build_grid(float(g["width_m"]), float(g["height_m"]), float(g["cell_w"]),
                          float(g["cell_h"]), tuple(float(v) for v in g.get("origin", (0, 0))))
        cavs = tuple(
            CavState(id=int(c["id"]), position=(float(c["x"]), float(c["y"])),
                     heading=float(c.get("heading", 0.0)),
                     compute=float(c.get("compute_flops", DEFAULT_CAV_COMPUTE)),
                     is_infrastructure=bool(c.get("infra", False)))
            for c in doc["cavs"]
        )
        background = tuple((float(b["x"]), float(b["y"])) for b in doc.get("background", []))
        conf = doc.get("confidence", {"source": "synthetic"})
        source, path = conf.get("source", "synthetic"), conf.get("path")
        seed = int(doc.get("seed", 0))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed scenario document: {exc!r}") from exc
    except InvalidArgumentError as exc:
        raise ValidationError(str(exc)) from exc
    grid = mark_occupancy(grid, [c.position for c in cavs] + list(background))
    return Scenario(grid=grid, cavs=cavs, background=background, seed=seed,
                    confidence_source=source, confidence_path=path)


def dumps_scenario(scenario: Scenario) -> str:
    return json.dumps(scenario_to_dict(scenario), indent=2) + "\n"


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(dumps_scenario(scenario))


def load_scenario(path: str | Path) -> Scenario:
    """Read a scenario JSON document.

    Raises FileNotFoundError for a missing file, ParseError for invalid JSON
    and ValidationError when the document breaks a scenario invariant.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top-level JSON value must be an object")
    return scenario_from_dict(doc)


def vehicle_positions(scenario: Scenario) -> Sequence[Point]:
    return [c.position for c in scenario.cavs] + list(scenario.background)
