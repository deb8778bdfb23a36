"""Voxel maps of water-quality readings and trajectory error reports."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import AlignmentError, GridError
from .geo import GeoRef, to_geo
from .trajectory import TrajectoryEstimate

GRID_COLUMNS = ("x", "y", "z", "lat", "lon", "parameter", "value", "count")
ALIGN_TOL = 0.25


@dataclass(frozen=True)
class GridSpec:
    """Cell size (m), search radius in cells and IDW power.

    ``origin`` and ``shape`` fix the grid extent; left as ``None`` they are
    taken from the bounding box of the samples.
    """

    cell: tuple[float, float, float] = (1.0, 1.0, 0.25)
    radius: float = 3.0
    power: float = 2.0
    origin: tuple[float, float, float] | None = None
    shape: tuple[int, int, int] | None = None

    def __post_init__(self):
        if len(self.cell) != 3 or min(self.cell) <= 0:
            raise ValueError("cell sizes must be three positive numbers")
        if self.radius <= 0 or self.power <= 0:
            raise ValueError("radius and power must be positive")
        if (self.origin is None) != (self.shape is None):
            raise ValueError("origin and shape must be given together")
        if self.shape is not None and min(self.shape) <= 0:
            raise ValueError("grid dimensions must be positive")


@dataclass
class WqGrid:
    param: str
    origin: np.ndarray
    cell: np.ndarray
    values: np.ndarray  # NaN where unfilled
    counts: np.ndarray

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def filled(self) -> np.ndarray:
        return self.counts > 0

    def centers(self) -> np.ndarray:
        """Cell centres, shaped ``shape + (3,)``."""
        axes = [self.origin[i] + (np.arange(n) + 0.5) * self.cell[i] for i, n in enumerate(self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def rows(self, ref: GeoRef | None = None) -> list[tuple]:
        c = self.centers()[self.filled]
        v = self.values[self.filled]
        n = self.counts[self.filled]
        if ref is not None:
            lat, lon = to_geo(c[:, 0], c[:, 1], ref)
        else:
            lat = lon = np.full(len(c), math.nan)
        return [
            (float(c[i, 0]), float(c[i, 1]), float(c[i, 2]), float(lat[i]), float(lon[i]),
             self.param, float(v[i]), int(n[i]))
            for i in range(len(c))
        ]


def _extent(xyz: np.ndarray, spec: GridSpec):
    cell = np.asarray(spec.cell, dtype=float)
    if spec.origin is not None:
        return np.asarray(spec.origin, dtype=float), tuple(int(n) for n in spec.shape)
    lo = np.floor(xyz.min(axis=0) / cell) * cell
    shape = np.floor((xyz.max(axis=0) - lo) / cell).astype(int) + 1
    return lo, tuple(int(n) for n in shape)


def build_grid(xyz, values, spec: GridSpec = GridSpec(), param: str = "") -> WqGrid:
    """Inverse-distance-weighted voxel grid.

    Distances are measured in cell units, so the search radius spans the
    same number of cells on every axis. A sample sitting exactly on a cell
    centre sets that cell's value outright.
    """
    xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
    values = np.asarray(values, dtype=float).reshape(-1)
    if xyz.shape[0] != values.shape[0] or xyz.shape[1:] != (3,):
        raise ValueError("need one (x, y, z) row per value")
    cell = np.asarray(spec.cell, dtype=float)
    if len(values):
        origin, shape = _extent(xyz, spec)
        hi = origin + cell * np.asarray(shape)
        keep = np.all((xyz >= origin) & (xyz <= hi), axis=1) & np.isfinite(values)
        xyz, values = xyz[keep], values[keep]
    if len(values) == 0:
        raise GridError("no water-quality samples inside the grid bounds")

    grid = WqGrid(param, origin, cell, np.full(shape, math.nan), np.zeros(shape, dtype=int))
    centers = grid.centers().reshape(-1, 3) / cell
    pairs = cKDTree(centers).sparse_distance_matrix(
        cKDTree(xyz / cell), spec.radius, output_type="ndarray"
    )
    if len(pairs) == 0:
        return grid
    i, j, d = pairs["i"], pairs["j"], pairs["v"]
    n_cells = len(centers)
    counts = np.bincount(i, minlength=n_cells)

    exact = d <= 1e-12
    w = np.where(exact, 0.0, 1.0 / np.where(exact, 1.0, d) ** spec.power)
    # Averaging deviations from a common reference keeps constant fields exact.
    ref = float(np.median(values))
    num = np.bincount(i, weights=w * (values[j] - ref), minlength=n_cells)
    den = np.bincount(i, weights=w, minlength=n_cells)
    out = np.full(n_cells, math.nan)
    hit = den > 0
    out[hit] = ref + num[hit] / den[hit]
    n_exact = np.bincount(i[exact], minlength=n_cells)
    if n_exact.any():
        s_exact = np.bincount(i[exact], weights=values[j[exact]], minlength=n_cells)
        on = n_exact > 0
        out[on] = s_exact[on] / n_exact[on]

    grid.values = out.reshape(shape)
    grid.counts = counts.reshape(shape)
    return grid


def build_grids(samples, spec: GridSpec = GridSpec()) -> dict[str, WqGrid]:
    """One grid per parameter from synchronised samples."""
    by_param: dict[str, list] = {}
    for s in samples:
        by_param.setdefault(s.param, []).append(s)
    if not by_param:
        raise GridError("no water-quality samples to grid")
    return {
        name: build_grid([s.position for s in group], [s.value for s in group], spec, name)
        for name, group in sorted(by_param.items())
    }


def write_grid_csv(grids, path, ref: GeoRef | None = None) -> int:
    """Write every filled cell of ``grids``; returns the number of rows."""
    n = 0
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GRID_COLUMNS)
        for grid in grids:
            for row in grid.rows(ref):
                w.writerow([repr(x) if isinstance(x, float) else x for x in row])
                n += 1
    return n


# --- trajectory error ---------------------------------------------------------

# Row labels of the comparison table, in order.
REPORT_ROWS = ("MAE x", "MAE y", "MAE z", "Total Error", "Total Variance", "Runtime")


@dataclass(frozen=True)
class ErrorReport:
    mae_x: float
    mae_y: float
    mae_z: float
    total_error: float
    total_variance: float
    runtime: float
    samples: int
    extra: dict = field(default_factory=dict)

    def rows(self) -> dict[str, float]:
        return dict(zip(REPORT_ROWS, (self.mae_x, self.mae_y, self.mae_z, self.total_error,
                                      self.total_variance, self.runtime)))

    def to_dict(self) -> dict:
        out = {"rows": self.rows(), "samples": self.samples}
        if self.extra:
            out["extra"] = dict(self.extra)
        return out

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> ErrorReport:
        r = d["rows"]
        return cls(*(float(r[k]) for k in REPORT_ROWS), int(d["samples"]), dict(d.get("extra", {})))


def compute_errors(est: TrajectoryEstimate, truth: TrajectoryEstimate, runtime: float = 0.0,
                   tol: float = ALIGN_TOL) -> ErrorReport:
    """Position error of ``est`` against ``truth`` at nearest-in-time pairs.

    Total error is the RMS of the 3-D Euclidean error and total variance
    the population variance of that same Euclidean error.
    """
    idx, ok = truth.nearest_index(est.t, tol)
    if not ok.any():
        span = lambda tr: f"[{tr.t[0]}, {tr.t[-1]}]" if len(tr) else "[]"  # noqa: E731
        raise AlignmentError(
            f"no estimate timestamp within {tol} s of the reference "
            f"(estimate {span(est)} s, reference {span(truth)} s)"
        )
    diff = est.p[ok] - truth.p[idx[ok]]
    mae = np.mean(np.abs(diff), axis=0)
    norm = np.linalg.norm(diff, axis=1)
    return ErrorReport(
        float(mae[0]), float(mae[1]), float(mae[2]),
        float(np.sqrt(np.mean(norm**2))), float(np.var(norm)),
        float(runtime), int(ok.sum()),
    )


def format_table(reports: dict[str, ErrorReport], digits: int = 4) -> str:
    """Text table with one row per metric and one column per estimator."""
    names = list(reports)
    label_w = max(len(r) for r in REPORT_ROWS)
    cols = [max(len(n), digits + 6) for n in names]
    lines = ["  ".join([" " * label_w] + [n.rjust(w) for n, w in zip(names, cols)])]
    for row in REPORT_ROWS:
        cells = [f"{reports[n].rows()[row]:.{digits}f}".rjust(w) for n, w in zip(names, cols)]
        lines.append("  ".join([row.ljust(label_w)] + cells))
    return "\n".join(lines)


def report_from_json(path) -> ErrorReport:
    return ErrorReport.from_dict(json.loads(Path(path).read_text()))

