"""Trajectory traces, reference states and deviation diagnostics.

Every evolvable model in this package exposes the same small duck-typed
surface:

``norm(state)``
    the model's single physical norm (Euclidean for synthetic models,
    trapezoid L2 for the PDE),
``evolve(state, t)``
    the state at time ``t``,
``orbit(state, times)``
    states along an increasing time grid (models with a time step march
    incrementally instead of restarting from ``state``),
``check_state(state)``
    validated/normalized copy of ``state`` or :class:`InputError`,
``linear`` and ``step``
    linearity flag and the grid step (``None`` for continuous time).

States support ``a - b`` and ``c * a``, which is all the linear-algebra
the checks below need.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "InputError",
    "UnsupportedOperationError",
    "TrajectoryTrace",
    "ReferenceState",
    "GrowthBound",
    "GrowthCheck",
    "uniform_times",
    "stable_norm",
    "deviation_trace",
    "linear_reduction_check",
    "check_growth_bound",
    "verify_cocycle",
    "time_shift_invariance",
    "scaling_invariance_check",
]

# relative tolerance for matching a requested time against a grid
_GRID_RTOL = 1e-9


class InputError(ValueError):
    """Invalid input to an operation (bad shapes, out-of-range parameters)."""


class UnsupportedOperationError(TypeError):
    """The operation needs a property (e.g. linearity) the model lacks."""


def stable_norm(x: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Weighted 2-norm ``sqrt(sum(w |x|^2))`` that does not overflow early."""
    x = np.asarray(x)
    if x.size == 0:
        return 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        scale = float(np.max(np.abs(x)))
        if scale == 0.0:
            return 0.0
        if not math.isfinite(scale):
            return math.inf
        y = np.abs(x) / scale
        s = np.sum(y * y) if weights is None else np.sum(weights * y * y)
        return scale * math.sqrt(float(s))


@dataclass(frozen=True, eq=False)
class TrajectoryTrace:
    """Sampled scalar observable (deviation norm or energy) along one orbit.

    ``overflow`` marks a trace that was cut at the first non-finite value.
    """

    times: np.ndarray
    values: np.ndarray
    label: str = ""
    overflow: bool = False

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float)
        values = np.array(self.values, dtype=float)
        if times.ndim != 1 or values.ndim != 1:
            raise InputError("times and values must be one-dimensional")
        if times.shape != values.shape:
            raise InputError(
                f"length mismatch: {times.size} times vs {values.size} values"
            )
        if times.size:
            if times[0] != 0.0:
                raise InputError("trace times must start at 0")
            if np.any(np.diff(times) <= 0):
                raise InputError("trace times must be strictly increasing")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InputError("trace values must be finite and non-negative")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.times.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrajectoryTrace):
            return NotImplemented
        return (self.label == other.label and self.overflow == other.overflow
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    __hash__ = None  # type: ignore[assignment]

    @property
    def horizon(self) -> float:
        return float(self.times[-1]) if self.times.size else 0.0

    def scaled(self, c: float) -> "TrajectoryTrace":
        return TrajectoryTrace(self.times, c * self.values, self.label, self.overflow)

    def index_of(self, t: float) -> int:
        """Index of grid time ``t``; raises if ``t`` is not on the grid."""
        i = int(np.searchsorted(self.times, t))
        tol = _GRID_RTOL * max(1.0, abs(t))
        for j in (i - 1, i):
            if 0 <= j < self.times.size and abs(self.times[j] - t) <= tol:
                return j
        raise InputError(f"time {t!r} is not on the trace grid")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            write_trace_csv(self, fh)

    @classmethod
    def from_csv(cls, path: str | Path, label: str = "") -> "TrajectoryTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["t", "value"]:
                raise InputError(f"{path}: expected header 't,value', got {header}")
            rows = []
            for r in reader:
                if not r:
                    continue
                try:
                    rows.append((float(r[0]), float(r[1])))
                except (ValueError, IndexError):
                    raise InputError(f"{path}:{reader.line_num}: malformed row {r}") from None
        t, v = (zip(*rows) if rows else ((), ()))
        return cls(np.array(t), np.array(v), label or Path(path).stem)


def write_trace_csv(trace: TrajectoryTrace, fh: Any) -> None:
    fh.write("t,value\n")
    for t, v in zip(trace.times, trace.values):
        fh.write(f"{t:.17g},{v:.17g}\n")


@dataclass(frozen=True)
class ReferenceState:
    """Fixed point of a semigroup used as the baseline of deviations."""

    state: Any
    is_fixed_point: bool = True

    @classmethod
    def zero(cls, model: Any) -> "ReferenceState":
        return cls(model.zero(), True)

    @classmethod
    def checked(
        cls,
        model: Any,
        state: Any,
        times: Sequence[float] | None = None,
        rtol: float = 1e-12,
    ) -> "ReferenceState":
        """Build a reference after verifying ``evolve(state, t) == state``."""
        state = model.check_state(state)
        if times is None:
            step = model.step or 0.5
            times = [step, 3 * step, 10 * step]
        scale = max(model.norm(state), 1.0)
        for t in times:
            gap = model.norm(model.evolve(state, t) - state)
            if gap > rtol * scale:
                raise InputError(
                    f"reference is not a fixed point: drift {gap:.3e} at t={t}"
                )
        return cls(state, True)


@dataclass(frozen=True)
class GrowthBound:
    """Exponential bound ``||T(t)|| <= M exp(omega t)``."""

    M: float
    omega: float

    def __post_init__(self) -> None:
        if not (self.M >= 1.0 and math.isfinite(self.M)):
            raise InputError(f"growth bound needs M >= 1, got {self.M}")
        if not math.isfinite(self.omega):
            raise InputError("omega must be finite")


@dataclass(frozen=True)
class GrowthCheck:
    ok: bool
    first_violation: float | None = None

    def __bool__(self) -> bool:
        return self.ok


def uniform_times(horizon: float, n: int | None = None, dt: float | None = None) -> np.ndarray:
    """Uniform grid ``0, dt, ..., horizon``; give exactly one of ``n`` (points) or ``dt``."""
    if horizon < 0:
        raise InputError("horizon must be non-negative")
    if (n is None) == (dt is None):
        raise InputError("give exactly one of n or dt")
    if dt is not None:
        if dt <= 0:
            raise InputError("dt must be positive")
        steps = int(round(horizon / dt))
        if abs(steps * dt - horizon) > _GRID_RTOL * max(1.0, horizon):
            raise InputError(f"horizon {horizon} is not a multiple of dt {dt}")
        return np.arange(steps + 1) * dt
    if n < 1:
        raise InputError("need at least one sample")
    if n == 1:
        return np.zeros(1)
    return np.linspace(0.0, horizon, n)


def _check_times(times: Iterable[float]) -> np.ndarray:
    t = np.asarray(list(times) if not isinstance(times, np.ndarray) else times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise InputError("need a non-empty one-dimensional time grid")
    if t[0] != 0.0 or np.any(np.diff(t) <= 0):
        raise InputError("time grid must start at 0 and increase strictly")
    return t


def _orbit(model: Any, state: Any, times: np.ndarray):
    orbit = getattr(model, "orbit", None)
    if orbit is not None:
        return orbit(state, times)
    return (model.evolve(state, t) for t in times)


def deviation_trace(
    model: Any,
    u0: Any,
    uref: ReferenceState | Any,
    times: Iterable[float],
    label: str = "",
) -> TrajectoryTrace:
    """``||T(t) u0 - T(t) uref||`` sampled on ``times``.

    Both states are evolved; the reference is never assumed fixed here.
    The trace stops at the first non-finite value and sets ``overflow``.
    """
    t = _check_times(times)
    u0 = model.check_state(u0)
    ref = model.check_state(_as_reference(uref).state)
    _same_shape(u0, ref)
    values: list[float] = []
    overflow = False
    with np.errstate(over="ignore", invalid="ignore"):
        for a, b in zip(_orbit(model, u0, t), _orbit(model, ref, t)):
            v = model.norm(a - b)
            if not math.isfinite(v):
                overflow = True
                break
            values.append(v)
    return TrajectoryTrace(t[: len(values)], np.array(values), label, overflow)


def _as_reference(uref: Any) -> ReferenceState:
    return uref if isinstance(uref, ReferenceState) else ReferenceState(uref)


def _same_shape(a: Any, b: Any) -> None:
    sa = getattr(a, "shape", None)
    sb = getattr(b, "shape", None)
    if sa is not None and sb is not None and sa != sb:
        raise InputError(f"dimension mismatch: {sa} vs {sb}")


def linear_reduction_check(
    model: Any, u0: Any, uref: ReferenceState | Any, times: Iterable[float]
) -> float:
    """Max over ``times`` of ``| ||T u0 - uref|| - ||T (u0 - uref)|| |``."""
    if not getattr(model, "linear", False):
        raise UnsupportedOperationError("linear reduction needs a linear model")
    uref = _as_reference(uref)
    if not uref.is_fixed_point:
        raise InputError("reference state must be a fixed point")
    t = _check_times(times)
    u0 = model.check_state(u0)
    ref = model.check_state(uref.state)
    _same_shape(u0, ref)
    worst = 0.0
    for a, b in zip(_orbit(model, u0, t), _orbit(model, u0 - ref, t)):
        worst = max(worst, abs(model.norm(a - ref) - model.norm(b)))
    return worst


def check_growth_bound(
    trace: TrajectoryTrace, bound: GrowthBound, initial_gap: float, rtol: float = 1e-9
) -> GrowthCheck:
    if not initial_gap > 0:
        raise InputError("initial gap ||u0 - uref|| must be positive")
    with np.errstate(over="ignore"):
        env = bound.M * np.exp(bound.omega * trace.times) * initial_gap
    bad = np.nonzero(trace.values > env * (1.0 + rtol))[0]
    if bad.size:
        return GrowthCheck(False, float(trace.times[bad[0]]))
    return GrowthCheck(True, None)


def _on_step_grid(model: Any, t: float) -> None:
    step = getattr(model, "step", None)
    if step is None:
        return
    k = round(t / step)
    if abs(k * step - t) > _GRID_RTOL * max(1.0, abs(t)):
        raise InputError(f"time {t} is not a multiple of the model step {step}")


def verify_cocycle(model: Any, u0: Any, t: float, s: float) -> float:
    """``||T(t+s) u0 - T(t) T(s) u0||``."""
    if t < 0 or s < 0:
        raise InputError("t and s must be non-negative")
    _on_step_grid(model, t)
    _on_step_grid(model, s)
    u0 = model.check_state(u0)
    return model.norm(model.evolve(u0, t + s) - model.evolve(model.evolve(u0, s), t))


def time_shift_invariance(trace: TrajectoryTrace, tau: float) -> TrajectoryTrace:
    """Deviation trace of ``T(tau) u0``, read off the unshifted trace.

    Pure re-indexing: ``shifted.values[i] == trace.values[i + j]`` where
    ``trace.times[j] == tau``.
    """
    if tau < 0:
        raise InputError("tau must be non-negative")
    if trace.times.size == 0 or tau > trace.horizon * (1 + _GRID_RTOL):
        raise InputError(f"tau={tau} lies beyond the trace horizon")
    j = trace.index_of(tau)
    times = trace.times[j:] - trace.times[j]
    return TrajectoryTrace(times, trace.values[j:], trace.label, trace.overflow)


def scaling_invariance_check(
    model: Any,
    u0: Any,
    uref: ReferenceState,
    lambda_scale: float,
    times: Iterable[float],
) -> float:
    """Max relative error of ``D(lam u0, lam uref)`` against ``|lam| D(u0, uref)``."""
    if lambda_scale == 0:
        raise InputError("lambda_scale must be non-zero")
    if not getattr(model, "linear", False):
        raise UnsupportedOperationError("scaling check needs a linear model")
    uref = _as_reference(uref)
    base = deviation_trace(model, u0, uref, times)
    scaled_ref = ReferenceState(lambda_scale * model.check_state(uref.state), uref.is_fixed_point)
    scaled = deviation_trace(model, lambda_scale * model.check_state(u0), scaled_ref, times)
    n = min(len(base), len(scaled))
    expected = abs(lambda_scale) * base.values[:n]
    got = scaled.values[:n]
    denom = np.maximum(np.abs(expected), np.finfo(float).tiny)
    err = np.where(expected == 0, np.abs(got), np.abs(got - expected) / denom)
    return float(err.max()) if n else 0.0

