"""Scenario files: parsing, validation and execution of a single run.

A scenario is a YAML mapping::

    label: transition
    model:
      kind: pde            # pde | diagonal | matrix | bumpspike | splitting
      alpha: 1.0
      beta: 1.0
      gamma: 0.5
      kappa: 0.3
      boundary: one_sided  # or ghost
      solver: direct       # or conjugated
    grid: {L: 20.0, N: 200, T: 5.0, safety: 0.9}
    initial: {kind: gaussian, center: 1.0, width: 0.5}
    thresholds: {eps_dip: 1.0e-3}
    snapshots: 5
    output: transition

Errors carry the line of the offending mapping in the file.
"""
from __future__ import annotations

import copy
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .. import __version__
from ..classify import (VERDICT_CSV_HEADER, ClassifierThresholds, SpectralIndicators,
                        Verdict, classify_trace, dsw_indicator, verdict_csv_row, verdict_text)
from ..core import InputError, TrajectoryTrace, deviation_trace, uniform_times, write_trace_csv
from ..pde import (BOUNDARY_SCHEMES, GridSpec, PDERun, RobinParams, energy_trace,
                   initial_data, solve_conjugated, solve_direct, write_snapshot_csv)
from ..synthetic import (BumpSpikeConfig, BumpSpikeModel, DiagonalModel, MatrixModel,
                         MatrixModelConfig, SplittingModel, SplittingModelConfig,
                         write_certificate_csv)

__all__ = ["ConfigError", "Scenario", "RunResult", "load_yaml", "execute", "run_scenario",
           "write_outputs", "output_root", "OUTPUT_ENV"]

OUTPUT_ENV = "RELCHAOS_OUTPUT"
MODEL_KINDS = ("pde", "diagonal", "matrix", "bumpspike", "splitting")
TOP_KEYS = {"label", "model", "grid", "initial", "thresholds", "snapshots", "output"}
THRESHOLD_KEYS = {"burn_in_fraction", "eps_dip", "big_growth", "bounded_band"}
MODEL_KEYS = {
    "pde": ({"alpha", "beta", "gamma", "kappa"}, {"boundary", "solver"}),
    "diagonal": ({"lambdas"}, set()),
    "matrix": ({"generator"}, set()),
    "bumpspike": (set(), {"K", "h", "bump_positions", "bump_amplitudes",
                          "spike_positions", "spike_heights"}),
    "splitting": (set(), {"stable_rates", "omega_s", "M_s", "K", "h"}),
}
GRID_KEYS = {
    "pde": ({"L", "N", "T"}, {"safety", "save_every"}),
    "synthetic": ({"T"}, {"dt", "samples"}),
}
TARGET_SAVES = 500
DEFAULT_SAMPLES = 1001


class ConfigError(InputError):
    """Invalid scenario; ``line`` points into the source file when known."""

    def __init__(self, message: str, line: int | None = None, source: str = "<scenario>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


# ---------------------------------------------------------------------------
# parsing


def _lines(node: yaml.Node, path: tuple, out: dict) -> None:
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _lines(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _lines(v, path + (i,), out)


def load_yaml(text: str, source: str = "<scenario>") -> tuple[Any, dict]:
    """Parse YAML text; returns the data and a ``path -> line`` map."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"YAML syntax error: {problem}", line, source) from None
    lines: dict = {}
    if node is not None:
        _lines(node, (), lines)
    return data, lines


class _Checker:
    def __init__(self, lines: dict, source: str):
        self.lines = lines
        self.source = source

    def line(self, path: tuple) -> int | None:
        while path not in self.lines and path:
            path = path[:-1]
        return self.lines.get(path)

    def fail(self, path: tuple, msg: str):
        raise ConfigError(msg, self.line(path), self.source)

    def mapping(self, data: Any, path: tuple, required: set, optional: set) -> dict:
        name = ".".join(map(str, path)) or "top level"
        if not isinstance(data, dict):
            self.fail(path, f"{name} must be a mapping")
        for key in sorted(required):
            if key not in data:
                self.fail(path, f"{name}: missing required key '{key}'")
        unknown = sorted(set(data) - required - optional)
        if unknown:
            self.fail(path + (unknown[0],), f"{name}: unknown key '{unknown[0]}'")
        return data

    def number(self, data: dict, path: tuple, key: str, *, integer: bool = False) -> None:
        v = data.get(key)
        ok = isinstance(v, (int, float)) and not isinstance(v, bool)
        if ok and integer:
            ok = float(v).is_integer()
        if not ok or not math.isfinite(float(v)):
            self.fail(path + (key,), f"'{key}' must be a finite {'integer' if integer else 'number'}")


@dataclass
class Scenario:
    label: str
    model: dict
    grid: dict
    initial: dict
    thresholds: ClassifierThresholds
    snapshots: int = 5
    output: str | None = None
    raw: dict = field(default_factory=dict)
    source: str = "<scenario>"

    @property
    def is_pde(self) -> bool:
        return self.model["kind"] == "pde"

    @classmethod
    def from_text(cls, text: str, source: str = "<scenario>", **overrides) -> "Scenario":
        data, lines = load_yaml(text, source)
        return cls.from_mapping(data, lines, source, **overrides)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "Scenario":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read scenario: {exc.strerror}", None, str(path)) from None
        return cls.from_text(text, str(path), **overrides)

    @classmethod
    def from_mapping(cls, data: Any, lines: dict | None = None, source: str = "<scenario>",
                     safety: float | None = None, **threshold_overrides) -> "Scenario":
        chk = _Checker(lines or {}, source)
        raw = copy.deepcopy(data)
        chk.mapping(data, (), {"model", "grid"}, TOP_KEYS - {"model", "grid"})
        model = chk.mapping(data["model"], ("model",), {"kind"},
                            set().union(*(a | b for a, b in MODEL_KEYS.values())))
        kind = model["kind"]
        if kind not in MODEL_KINDS:
            chk.fail(("model", "kind"), f"unknown model kind '{kind}'; use one of {MODEL_KINDS}")
        req, opt = MODEL_KEYS[kind]
        chk.mapping(model, ("model",), req | {"kind"}, opt)
        if kind == "pde":
            for k in ("alpha", "beta", "gamma", "kappa"):
                chk.number(model, ("model",), k)
            if model.get("boundary", "one_sided") not in BOUNDARY_SCHEMES:
                chk.fail(("model", "boundary"), f"boundary must be one of {BOUNDARY_SCHEMES}")
            if model.get("solver", "direct") not in ("direct", "conjugated"):
                chk.fail(("model", "solver"), "solver must be 'direct' or 'conjugated'")
        greq, gopt = GRID_KEYS["pde" if kind == "pde" else "synthetic"]
        grid = dict(chk.mapping(data["grid"], ("grid",), greq, gopt))
        for k in grid:
            chk.number(grid, ("grid",), k, integer=k in ("N", "save_every", "samples"))
        if safety is not None:
            if kind != "pde":
                raise ConfigError("--safety applies to PDE scenarios only", None, source)
            grid["safety"] = float(safety)
        initial = data.get("initial") or {}
        if not isinstance(initial, dict):
            chk.fail(("initial",), "initial must be a mapping")
        th = data.get("thresholds") or {}
        chk.mapping(th, ("thresholds",), set(), THRESHOLD_KEYS)
        th = dict(th)
        th.update({k: v for k, v in threshold_overrides.items() if v is not None})
        try:
            thresholds = ClassifierThresholds(**th)
        except (InputError, TypeError) as exc:
            raise ConfigError(f"thresholds: {exc}", chk.line(("thresholds",)), source) from None
        snaps = data.get("snapshots", 5)
        if isinstance(snaps, bool) or not isinstance(snaps, int) or snaps < 0:
            chk.fail(("snapshots",), "snapshots must be a non-negative integer")
        label = str(data.get("label", Path(source).stem if source != "<scenario>" else "run"))
        sc = cls(label, dict(model), grid, dict(initial), thresholds, snaps,
                 data.get("output"), raw, source)
        try:
            sc.build_model()
        except InputError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), chk.line(("model",)), source) from None
        return sc

    def with_model_values(self, **values) -> "Scenario":
        sc = copy.deepcopy(self)
        sc.model.update(values)
        sc.raw.setdefault("model", {}).update(values)
        return sc

    # -- model construction ------------------------------------------------

    def robin_params(self) -> RobinParams:
        m = self.model
        return RobinParams(m["alpha"], m["beta"], m["gamma"], m["kappa"])

    def build_model(self):
        m = self.model
        kind = m["kind"]
        if kind == "pde":
            p = self.robin_params()
            g = self.grid
            grid = GridSpec.build(p, float(g["L"]), int(g["N"]), float(g["T"]),
                                  safety=float(g.get("safety", 0.9)),
                                  boundary=m.get("boundary", "one_sided"))
            save = int(g.get("save_every", max(1, grid.n_steps // TARGET_SAVES)))
            return GridSpec(grid.L, grid.N, grid.dt, grid.T, save, grid.safety)
        if kind == "diagonal":
            return DiagonalModel([_complex(z) for z in m["lambdas"]])
        if kind == "matrix":
            return MatrixModel(MatrixModelConfig(np.array(m["generator"], dtype=float)))
        if kind == "bumpspike":
            return BumpSpikeModel(_bumpspike_config(m))
        stable = {k: m[k] for k in ("stable_rates", "omega_s", "M_s") if k in m}
        return SplittingModel(SplittingModelConfig(unstable_block=_bumpspike_config(m), **stable))


def _complex(z: Any) -> complex:
    if isinstance(z, (list, tuple)) and len(z) == 2:
        return complex(float(z[0]), float(z[1]))
    if isinstance(z, str):
        return complex(z.replace(" ", ""))
    return complex(z)


def _bumpspike_config(m: dict) -> BumpSpikeConfig:
    explicit = ("bump_positions", "bump_amplitudes", "spike_positions", "spike_heights")
    h = float(m.get("h", 1.0))
    if any(k in m for k in explicit):
        return BumpSpikeConfig(*(m[k] for k in explicit), h=h)
    base = BumpSpikeConfig.default(int(m.get("K", 24)))
    return BumpSpikeConfig(base.bump_positions, base.bump_amplitudes, base.spike_positions,
                           base.spike_heights, h=h)


# ---------------------------------------------------------------------------
# execution


@dataclass
class RunResult:
    scenario: Scenario
    trace: TrajectoryTrace
    verdict: Verdict
    spectral: SpectralIndicators | None = None
    pde_run: PDERun | None = None
    certificate: BumpSpikeConfig | None = None
    outdir: Path | None = None


def _synthetic_initial(sc: Scenario, model) -> Any:
    init = sc.initial
    kind = init.get("kind", "default")
    if "values" in init:
        vals = init["values"]
        return model.check_state(np.array([_complex(v) for v in vals])
                                 if isinstance(model, DiagonalModel) else np.array(vals, float))
    if isinstance(model, BumpSpikeModel):
        if kind != "default":
            raise ConfigError("bump-spike initial kind must be 'default'", None, sc.source)
        return model.initial_state()
    if isinstance(model, SplittingModel):
        if kind != "default":
            raise ConfigError("splitting initial kind must be 'default'", None, sc.source)
        return model.default_state()
    n = model.zero().shape[0]
    if kind in ("default", "ones"):
        return model.zero() + 1
    if kind == "random":
        rng = np.random.default_rng(int(init.get("seed", 0)))
        z = rng.standard_normal(n)
        if isinstance(model, DiagonalModel):
            z = z + 1j * rng.standard_normal(n)
        return z
    raise ConfigError(f"unknown initial kind '{kind}' for a {sc.model['kind']} model",
                      None, sc.source)


def _synthetic_times(sc: Scenario, model) -> np.ndarray:
    g = sc.grid
    T = float(g["T"])
    step = getattr(model, "step", None)
    if "dt" in g:
        return uniform_times(T, dt=float(g["dt"]))
    if step is not None:
        return uniform_times(T, dt=float(step))
    return uniform_times(T, n=int(g.get("samples", DEFAULT_SAMPLES)))


def execute(sc: Scenario) -> RunResult:
    """Run a scenario in memory (no files written)."""
    built = sc.build_model()
    if sc.is_pde:
        p = sc.robin_params()
        init = dict(sc.initial) or {"kind": "gaussian"}
        kind = init.pop("kind", "gaussian")
        sampler = initial_data(kind, params=p, L=built.L, **init)
        solver = solve_conjugated if sc.model.get("solver") == "conjugated" else solve_direct
        run = solver(p, built, sampler, boundary=sc.model.get("boundary", "one_sided"),
                     label=sc.label)
        trace = energy_trace(run)
        verdict = classify_trace(trace, sc.thresholds)
        return RunResult(sc, trace, verdict, dsw_indicator(p), pde_run=run)
    model = built
    u0 = _synthetic_initial(sc, model)
    trace = deviation_trace(model, u0, model.zero(), _synthetic_times(sc, model), sc.label)
    verdict = classify_trace(trace, sc.thresholds)
    cert = None
    if isinstance(model, BumpSpikeModel):
        cert = model.config
    elif isinstance(model, SplittingModel):
        cert = model.config.unstable_block
    return RunResult(sc, trace, verdict, certificate=cert)


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "relchaos-out"))


def _snapshot_indices(n_saved: int, count: int) -> list[int]:
    if count == 0 or n_saved == 0:
        return []
    return sorted(set(np.linspace(0, n_saved - 1, min(count, n_saved)).round().astype(int)))


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    return x


def write_outputs(result: RunResult, outdir: Path, wall_time: float | None = None) -> list[str]:
    outdir.mkdir(parents=True, exist_ok=True)
    files = []

    def emit(name: str, writer) -> None:
        path = outdir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer(fh)
        files.append(name)

    emit("trace.csv", lambda fh: write_trace_csv(result.trace, fh))
    emit("verdict.txt", lambda fh: fh.write(verdict_text(result.verdict, result.spectral)))
    emit("verdict.csv", lambda fh: fh.write(
        VERDICT_CSV_HEADER + "\n" + verdict_csv_row(result.verdict, result.spectral) + "\n"))
    run = result.pde_run
    if run is not None:
        for i in _snapshot_indices(len(run), result.scenario.snapshots):
            t, u = run.times[i], run.fields[i]
            emit(f"snapshots/snapshot_t{t:012.6f}.csv", lambda fh: write_snapshot_csv(run.x, u, fh))
    if result.certificate is not None:
        emit("certificate.csv", lambda fh: write_certificate_csv(result.certificate, fh))
    manifest = {
        "label": result.scenario.label,
        "source": result.scenario.source,
        "inputs": _jsonable(result.scenario.raw),
        "thresholds": _jsonable(vars(result.scenario.thresholds)),
        "verdict": str(result.verdict.kind),
        "overflow": result.trace.overflow,
        "artifact_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_s": wall_time,
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "files": files,
    }
    if run is not None:
        manifest["grid"] = {"L": run.grid.L, "N": run.grid.N, "dt": run.grid.dt,
                            "T": run.grid.T, "save_every": run.grid.save_every}
        manifest["truncation_contaminated"] = run.truncation_contaminated
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return files + ["manifest.json"]


def run_scenario(path: str | Path, out_root: Path | None = None, **overrides) -> RunResult:
    """Parse, run and persist one scenario; returns the in-memory result.

    Raises :class:`ConfigError` on parse or validation failure.
    """
    start = time.perf_counter()
    sc = Scenario.from_file(path, **overrides)
    result = execute(sc)
    root = output_root() if out_root is None else Path(out_root)
    outdir = root / (sc.output or sc.label)
    write_outputs(result, outdir, time.perf_counter() - start)
    result.outdir = outdir
    return result
