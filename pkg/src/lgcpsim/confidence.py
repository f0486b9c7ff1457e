"""Per-(area, CAV) confidence values and the group / global confidence formulas.

The learned confidence decoder of a real perception stack is replaced by two
providers: a distance/occlusion synthetic model and a CSV loader for values
exported from an actual model.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidArgumentError, ParseError, ValidationError
from .scenario import Point, RoiGrid, Scenario

_MAX_NOISE_REDRAWS = 64


@dataclass(frozen=True, eq=False)
class ConfidenceMap:
    """Dense matrix of confidences; rows are areas, columns are CAVs.

    ``area_ids`` are grid cell indices in ascending order and ``cav_ids`` are
    ascending CAV ids; ``values[r, c]`` is the confidence of CAV ``cav_ids[c]``
    for area ``area_ids[r]``.
    """

    values: np.ndarray
    area_ids: tuple[int, ...]
    cav_ids: tuple[int, ...]

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            values = values.reshape(len(self.area_ids), len(self.cav_ids))
        if values.shape != (len(self.area_ids), len(self.cav_ids)):
            raise ValidationError(
                f"confidence matrix shape {values.shape} does not match "
                f"{len(self.area_ids)} areas x {len(self.cav_ids)} CAVs")
        if not np.all(np.isfinite(values)) or values.min(initial=0.0) < 0 or values.max(initial=0.0) > 1:
            raise ValidationError("confidence values must lie in [0, 1]")
        if len(set(self.cav_ids)) != len(self.cav_ids) or len(set(self.area_ids)) != len(self.area_ids):
            raise ValidationError("duplicate area or CAV ids")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "area_ids", tuple(int(a) for a in self.area_ids))
        object.__setattr__(self, "cav_ids", tuple(int(c) for c in self.cav_ids))
        object.__setattr__(self, "_row", {a: r for r, a in enumerate(self.area_ids)})
        object.__setattr__(self, "_col", {c: k for k, c in enumerate(self.cav_ids)})

    @classmethod
    def from_matrix(cls, values, area_ids: Sequence[int] | None = None,
                    cav_ids: Sequence[int] | None = None) -> "ConfidenceMap":
        values = np.asarray(values, dtype=float)
        n_areas, n_cavs = values.shape
        return cls(values,
                   tuple(range(n_areas)) if area_ids is None else tuple(area_ids),
                   tuple(range(n_cavs)) if cav_ids is None else tuple(cav_ids))

    @property
    def n_areas(self) -> int:
        return len(self.area_ids)

    @property
    def n_cavs(self) -> int:
        return len(self.cav_ids)

    def value(self, area_id: int, cav_id: int) -> float:
        return float(self.values[self._row[area_id], self._col[cav_id]])

    def row(self, area_id: int) -> dict[int, float]:
        r = self.values[self._row[area_id]]
        return {c: float(r[k]) for k, c in enumerate(self.cav_ids)}

    def __eq__(self, other):
        if not isinstance(other, ConfidenceMap):
            return NotImplemented
        return (self.area_ids == other.area_ids and self.cav_ids == other.cav_ids
                and np.array_equal(self.values, other.values))

    __hash__ = None


@dataclass(frozen=True)
class SyntheticConfidenceParams:
    base: float = 0.9
    decay_length: float = 80.0
    occlusion_penalty: float = 0.7
    noise_sigma: float = 0.02

    def __post_init__(self):
        if not 0 < self.base <= 1:
            raise InvalidArgumentError("base must lie in (0, 1]")
        if not self.decay_length > 0:
            raise InvalidArgumentError("decay_length must be > 0")
        if not 0 <= self.occlusion_penalty <= 1:
            raise InvalidArgumentError("occlusion_penalty must lie in [0, 1]")
        if not self.noise_sigma >= 0:
            raise InvalidArgumentError("noise_sigma must be >= 0")


def cells_between(grid: RoiGrid, start: Point, end: Point) -> set[int]:
    """Cells crossed with positive length by the open segment start->end.

    The cells containing either endpoint are excluded.
    """
    (x0, y0), (x1, y1) = start, end
    dx, dy = x1 - x0, y1 - y0
    ox, oy = grid.origin
    cuts = {0.0, 1.0}
    if dx != 0:
        for k in range(1, grid.n_cols):
            t = (ox + k * grid.cell_w - x0) / dx
            if 0 < t < 1:
                cuts.add(t)
    if dy != 0:
        for k in range(1, grid.n_rows):
            t = (oy + k * grid.cell_h - y0) / dy
            if 0 < t < 1:
                cuts.add(t)
    ts = sorted(cuts)
    crossed = set()
    for a, b in zip(ts, ts[1:]):
        if b - a <= 1e-12:
            continue
        m = (a + b) / 2
        c = grid.cell_of((x0 + m * dx, y0 + m * dy))
        if c is not None:
            crossed.add(c)
    crossed.discard(grid.cell_of(start))
    crossed.discard(grid.cell_of(end))
    return crossed


def synthetic_confidence(scenario: Scenario, params: SyntheticConfidenceParams | None = None,
                         seed: int = 0) -> ConfidenceMap:
    """Distance-decay and occlusion confidence model with truncated Gaussian noise."""
    params = params or SyntheticConfidenceParams()
    grid = scenario.grid
    areas = grid.areas()
    cav_ids = scenario.cav_ids
    rng = np.random.default_rng([int(seed), 0x5EED])
    values = np.zeros((len(areas), len(cav_ids)))
    for r, area in enumerate(areas):
        centre = grid.cell_center(area)
        for k, cav_id in enumerate(cav_ids):
            pos = scenario.cav(cav_id).position
            d = math.dist(pos, centre)
            n_occ = len(cells_between(grid, pos, centre) & grid.occupied)
            clean = params.base * math.exp(-d / params.decay_length) * params.occlusion_penalty ** n_occ
            values[r, k] = _perturb(clean, params.noise_sigma, rng)
    return ConfidenceMap(values, tuple(areas), tuple(cav_ids))


def _perturb(value: float, sigma: float, rng: np.random.Generator) -> float:
    if sigma == 0:
        return min(max(value, 0.0), 1.0)
    for _ in range(_MAX_NOISE_REDRAWS):
        noisy = value + rng.normal(0.0, sigma)
        if 0.0 <= noisy <= 1.0:
            return float(noisy)
    return min(max(float(noisy), 0.0), 1.0)


def dumps_confidence(cmap: ConfidenceMap) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in cmap.values:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def save_confidence(cmap: ConfidenceMap, path: str | Path) -> None:
    Path(path).write_text(dumps_confidence(cmap))


def load_confidence(path: str | Path, scenario: Scenario) -> ConfidenceMap:
    """Load a CSV confidence matrix aligned with ``scenario``.

    Rows follow the occupied cells in ascending index order and columns the
    CAV ids in ascending order. No header row.
    """
    text = Path(path).read_text()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(s.strip() for s in r)]
    try:
        values = [[float(s) for s in r] for r in rows]
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    areas = scenario.grid.areas()
    cav_ids = scenario.cav_ids
    if len(values) != len(areas):
        raise ValidationError(f"{path}: expected {len(areas)} rows (areas), found {len(values)}")
    for i, r in enumerate(values):
        if len(r) != len(cav_ids):
            raise ValidationError(f"{path}: row {i} has {len(r)} columns, expected {len(cav_ids)}")
    arr = np.array(values, dtype=float).reshape(len(areas), len(cav_ids))
    bad = np.argwhere(~((arr >= 0) & (arr <= 1)))
    if bad.size:
        i, j = bad[0]
        raise ValidationError(f"{path}: value {arr[i, j]} at row {i}, column {j} outside [0, 1]")
    return ConfidenceMap(arr, tuple(areas), tuple(cav_ids))


def combine(values: Iterable[float]) -> float:
    """1 - prod(1 - f) over the given per-CAV confidences."""
    miss = 1.0
    for f in values:
        miss *= 1.0 - f
    return 1.0 - miss


def group_confidence(cmap: ConfidenceMap, area_id: int, members: Iterable[int]) -> float:
    members = list(members)
    if not members:
        raise InvalidArgumentError("group_confidence needs at least one member")
    return combine(cmap.value(area_id, m) for m in members)


def global_confidence(cmap: ConfidenceMap, groups: Mapping[int, Iterable[int]],
                      n_areas: int | None = None) -> float:
    """Mean collaborative confidence over all areas; unassigned areas count as 0.

    ``groups`` maps area id to member CAV ids; an Assignment is accepted too.
    """
    if hasattr(groups, "members_by_area"):
        groups = groups.members_by_area()
    n = cmap.n_areas if n_areas is None else n_areas
    if n == 0:
        return 0.0
    total = sum(group_confidence(cmap, a, m) for a, m in groups.items() if m)
    return total / n
