"""Parameter sweeps over one or two scenario keys, producing a regime map.

Sweep file::

    base:                      # a full scenario mapping
      model: {kind: pde, alpha: 1, beta: 1, gamma: 0, kappa: 0.5}
      grid: {L: 30, N: 300, T: 8}
      initial: {kind: gaussian, center: 2.0, width: 0.2}
    axes:
      - {param: gamma, min: -2, max: 2, steps: 10}
      - {param: beta, min: 0, max: 2, steps: 10, spacing: linear}
    workers: 4
    output: regime

``param`` names a model key, or ``grid.<key>`` / ``initial.<key>``.
Cells run independently (optionally on a thread pool) and rows are
written in cell-index order, so the CSV does not depend on scheduling.
"""
from __future__ import annotations

import copy
import itertools
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..classify import co_occurrence, format_value
from ..core import InputError
from .scenario import ConfigError, Scenario, _Checker, execute, load_yaml, output_root

__all__ = ["Axis", "SweepSpec", "CellResult", "REGIME_MAP_HEADER", "run_sweep", "sweep",
           "dips_then_grows"]

REGIME_MAP_HEADER = "param1,param2,verdict,dip_ratio,growth_ratio,rho,region_meets_iR"
MAX_CELLS = 10_000


@dataclass(frozen=True)
class Axis:
    param: str
    min: float
    max: float
    steps: int
    spacing: str = "linear"

    def __post_init__(self) -> None:
        if int(self.steps) != self.steps or self.steps < 2:
            raise InputError(f"axis {self.param}: steps must be an integer >= 2")
        if self.spacing not in ("linear", "log"):
            raise InputError(f"axis {self.param}: spacing must be 'linear' or 'log'")
        if self.spacing == "log" and not (self.min > 0 and self.max > 0):
            raise InputError(f"axis {self.param}: log spacing needs positive bounds")

    @property
    def values(self) -> np.ndarray:
        if self.spacing == "log":
            return np.geomspace(self.min, self.max, int(self.steps))
        return np.linspace(self.min, self.max, int(self.steps))


def _assign(raw: dict, param: str, value: float) -> None:
    section, _, key = param.rpartition(".")
    raw.setdefault(section or "model", {})[key] = value


@dataclass
class SweepSpec:
    base: dict
    axes: tuple[Axis, ...]
    workers: int = 1
    output: str | None = None
    label: str = "sweep"
    source: str = "<sweep>"
    overrides: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str, source: str = "<sweep>", **overrides) -> "SweepSpec":
        data, lines = load_yaml(text, source)
        chk = _Checker(lines, source)
        chk.mapping(data, (), {"base", "axes"}, {"workers", "output", "label"})
        axes_raw = data["axes"]
        if not isinstance(axes_raw, list) or not 1 <= len(axes_raw) <= 2:
            chk.fail(("axes",), "axes must be a list of one or two axis mappings")
        axes = []
        for i, a in enumerate(axes_raw):
            chk.mapping(a, ("axes", i), {"param", "min", "max", "steps"}, {"spacing"})
            for k in ("min", "max"):
                chk.number(a, ("axes", i), k)
            chk.number(a, ("axes", i), "steps", integer=True)
            try:
                axes.append(Axis(str(a["param"]), float(a["min"]), float(a["max"]),
                                 int(a["steps"]), a.get("spacing", "linear")))
            except InputError as exc:
                chk.fail(("axes", i), str(exc))
        n = int(np.prod([a.steps for a in axes]))
        if n > MAX_CELLS:
            chk.fail(("axes",), f"{n} cells exceed the limit of {MAX_CELLS}")
        workers = data.get("workers", 1)
        if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
            chk.fail(("workers",), "workers must be a positive integer")
        # validate the base scenario once, with line numbers
        base_lines = {k[1:]: v for k, v in lines.items() if k[:1] == ("base",)}
        Scenario.from_mapping(data["base"], base_lines, source, **overrides)
        return cls(copy.deepcopy(data["base"]), tuple(axes), workers, data.get("output"),
                   str(data.get("label", Path(source).stem if source != "<sweep>" else "sweep")),
                   source, overrides)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "SweepSpec":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read sweep file: {exc.strerror}", None, str(path)) from None
        return cls.from_text(text, str(path), **overrides)

    def cells(self) -> list[tuple[float, ...]]:
        return list(itertools.product(*(a.values for a in self.axes)))

    def cell_scenario(self, point: tuple[float, ...]) -> Scenario:
        raw = copy.deepcopy(self.base)
        for axis, v in zip(self.axes, point):
            _assign(raw, axis.param, float(v))
        raw["label"] = "cell"
        try:
            return Scenario.from_mapping(raw, None, self.source, **self.overrides)
        except ConfigError as exc:
            raise ConfigError(f"cell {point}: {exc}", None, self.source) from None


def dips_then_grows(values: np.ndarray, low: float = 0.5, high: float = 2.0) -> bool:
    """Trace drops below ``low * v0`` and later exceeds ``high * v0``."""
    v0 = values[0]
    below = np.nonzero(values < low * v0)[0]
    return bool(below.size) and bool(np.any(values[below[0]:] > high * v0))


@dataclass(frozen=True)
class CellResult:
    index: int
    point: tuple[float, ...]
    verdict: str
    dip_ratio: float
    growth_ratio: float
    rho: float | None
    region_meets_iR: bool | None
    overflow: bool
    dips_then_grows: bool

    def csv_row(self) -> str:
        p1 = self.point[0]
        p2 = self.point[1] if len(self.point) > 1 else None
        vals = [p1, p2, None, self.dip_ratio, self.growth_ratio, self.rho, self.region_meets_iR]
        cells = [format_value(v) for v in vals]
        cells[2] = self.verdict
        return ",".join(cells)


def _run_cell(spec: SweepSpec, index: int, point: tuple[float, ...]) -> CellResult:
    res = execute(spec.cell_scenario(point))
    s, sp = res.verdict.summary, res.spectral
    return CellResult(
        index=index,
        point=tuple(float(p) for p in point),
        verdict=str(res.verdict.kind),
        dip_ratio=s.dip_ratio,
        growth_ratio=s.growth_ratio,
        rho=None if sp is None else sp.rho,
        region_meets_iR=None if sp is None else sp.region_meets_imaginary_axis,
        overflow=s.overflow,
        dips_then_grows=dips_then_grows(res.trace.values),
    )


def run_sweep(spec: SweepSpec, workers: int | None = None,
              order: list[int] | None = None) -> list[CellResult]:
    """Evaluate every cell; results are sorted by cell index.

    ``order`` permutes the submission order (used to check that results do
    not depend on scheduling).
    """
    points = spec.cells()
    idx = list(range(len(points))) if order is None else list(order)
    if sorted(idx) != list(range(len(points))):
        raise InputError("order must be a permutation of the cell indices")
    n = spec.workers if workers is None else workers
    if n <= 1:
        results = [_run_cell(spec, i, points[i]) for i in idx]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(lambda i: _run_cell(spec, i, points[i]), idx))
    return sorted(results, key=lambda r: r.index)


def _notable(results: list[CellResult], spec: SweepSpec) -> dict:
    names = [a.param for a in spec.axes]

    def first(pred) -> dict | None:
        for r in results:
            if pred(r):
                return {"index": r.index, **dict(zip(names, r.point)), "verdict": r.verdict,
                        "dip_ratio": r.dip_ratio, "growth_ratio": r.growth_ratio}
        return None

    return {
        "decaying": first(lambda r: r.verdict == "DECAYING"),
        "growing": first(lambda r: r.verdict == "GROWING"),
        "dip_then_growth": first(lambda r: r.dips_then_grows),
    }


def write_regime_map(results: list[CellResult], fh) -> None:
    fh.write(REGIME_MAP_HEADER + "\n")
    for r in results:
        fh.write(r.csv_row() + "\n")


def sweep(path: str | Path, out_root: Path | None = None, workers: int | None = None,
          **overrides) -> tuple[Path, list[CellResult]]:
    """Run a sweep file and write ``regime_map.csv`` plus a manifest."""
    start = time.perf_counter()
    spec = SweepSpec.from_file(path, **overrides)
    results = run_sweep(spec, workers)
    root = output_root() if out_root is None else Path(out_root)
    outdir = root / (spec.output or spec.label)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "regime_map.csv", "w", newline="") as fh:
        write_regime_map(results, fh)
    rows = [(r.verdict, r.rho) for r in results if r.rho is not None]
    manifest = {
        "label": spec.label,
        "source": spec.source,
        "base": spec.base,
        "axes": [vars(a) for a in spec.axes],
        "cells": len(results),
        "workers": workers if workers is not None else spec.workers,
        "overflow_cells": [r.index for r in results if r.overflow],
        "notable_cells": _notable(results, spec),
        "verdict_by_rho": co_occurrence(rows) if rows else None,
        "artifact_version": __version__,
        "wall_time_s": time.perf_counter() - start,
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "cpu_count": os.cpu_count(),
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return outdir, results
