"""Exactly computable semigroup models.

* :class:`DiagonalModel` -- ``T(t) e_k = exp(lambda_k t) e_k`` on C^n.
* :class:`MatrixModel` -- ``T(t) = expm(t A)`` for a dense generator.
* :class:`BumpSpikeModel` -- left translation on a weighted integer line.
  Bumps of amplitude ``c_k`` start at cells ``a_k`` and move towards 0;
  the weight is 1 except at isolated spike cells ``s_j`` where it is
  ``1 + H_j``.  The orbit norm jumps whenever a bump sits on a spike and
  falls back to the (vanishing) bump tail otherwise.
* :class:`SplittingModel` -- direct sum of a diagonal exponentially stable
  block and a bump-spike block.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from .core import GrowthBound, InputError, stable_norm

__all__ = [
    "DiagonalModelConfig",
    "DiagonalModel",
    "diagonal_evolve",
    "MatrixModelConfig",
    "MatrixModel",
    "matrix_evolve",
    "ExpmAccuracyWarning",
    "EXPM_RTOL",
    "SparseLine",
    "BumpSpikeConfig",
    "BumpSpikeModel",
    "bumpspike_norm",
    "bumpspike_certificate",
    "bumpspike_envelope",
    "write_certificate_csv",
    "SplittingModelConfig",
    "SplitState",
    "SplittingModel",
    "splitting_evolve",
    "perturb_to_chaotic",
]

EXPM_RTOL = 1e-10
MAX_MATRIX_DIM = 64


# ---------------------------------------------------------------------------
# diagonal


@dataclass(frozen=True)
class DiagonalModelConfig:
    lambdas: tuple[complex, ...]

    def __post_init__(self) -> None:
        lam = tuple(complex(x) for x in np.atleast_1d(self.lambdas))
        if not lam:
            raise InputError("need at least one rate")
        if not all(math.isfinite(z.real) and math.isfinite(z.imag) for z in lam):
            raise InputError("rates must be finite")
        object.__setattr__(self, "lambdas", lam)

    @property
    def truncation_dim(self) -> int:
        return len(self.lambdas)


def diagonal_evolve(config: DiagonalModelConfig, coeffs, t: float) -> np.ndarray:
    if t < 0:
        raise InputError("t must be non-negative")
    c = np.asarray(coeffs, dtype=complex)
    if c.shape != (config.truncation_dim,):
        raise InputError(
            f"expected {config.truncation_dim} coefficients, got shape {c.shape}"
        )
    with np.errstate(over="ignore", invalid="ignore"):
        return c * np.exp(np.asarray(config.lambdas) * t)


class DiagonalModel:
    linear = True
    step = None

    def __init__(self, config: DiagonalModelConfig | Sequence[complex]):
        if not isinstance(config, DiagonalModelConfig):
            config = DiagonalModelConfig(tuple(config))
        self.config = config

    @property
    def dim(self) -> int:
        return self.config.truncation_dim

    def zero(self) -> np.ndarray:
        return np.zeros(self.dim, dtype=complex)

    def basis(self, k: int) -> np.ndarray:
        e = self.zero()
        e[k] = 1.0
        return e

    def check_state(self, state) -> np.ndarray:
        c = np.asarray(state, dtype=complex)
        if c.shape != (self.dim,):
            raise InputError(f"dimension mismatch: expected ({self.dim},), got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise InputError("state must be finite")
        return c

    def evolve(self, state, t: float) -> np.ndarray:
        return diagonal_evolve(self.config, state, t)

    def norm(self, state) -> float:
        return stable_norm(state)

    @property
    def growth_bound(self) -> GrowthBound:
        # normal operator: ||T(t)|| = exp(max Re lambda t) exactly
        return GrowthBound(1.0, max(z.real for z in self.config.lambdas))


# ---------------------------------------------------------------------------
# dense matrix


class ExpmAccuracyWarning(RuntimeWarning):
    """Step-halving self-check of the matrix exponential exceeded its target."""


@dataclass(frozen=True)
class MatrixModelConfig:
    generator: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        a = np.array(self.generator)
        if a.dtype.kind not in "fc":
            a = a.astype(float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InputError(f"generator must be a non-empty square matrix, got {a.shape}")
        if a.shape[0] > MAX_MATRIX_DIM:
            raise InputError(f"generator dimension {a.shape[0]} exceeds {MAX_MATRIX_DIM}")
        if not np.all(np.isfinite(a)):
            raise InputError("generator entries must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "generator", a)

    @property
    def n(self) -> int:
        return self.generator.shape[0]


def _halving_error(a: np.ndarray, u0: np.ndarray, t: float, full: np.ndarray) -> float:
    """Normwise relative gap between ``expm(tA) u0`` and ``expm(tA/2)^2 u0``."""
    half = expm(a * (t / 2))
    ref = half @ (half @ u0)
    scale = np.linalg.norm(full, 2) * np.linalg.norm(u0)
    if scale == 0 or not np.isfinite(scale):
        return 0.0
    return float(np.linalg.norm(full @ u0 - ref) / scale)


def matrix_evolve(config: MatrixModelConfig, u0, t: float, *, check: bool = True) -> np.ndarray:
    """``expm(t A) u0`` with a step-halving accuracy self-check.

    The check compares against ``expm(tA/2)^2 u0`` in the normwise sense
    (relative to ``||expm(tA)|| ||u0||``) and warns with
    :class:`ExpmAccuracyWarning` above ``EXPM_RTOL``.
    """
    if t < 0:
        raise InputError("t must be non-negative")
    a = config.generator
    u = np.asarray(u0)
    if u.shape != (config.n,):
        raise InputError(f"expected state of length {config.n}, got {u.shape}")
    full = expm(a * t)
    if check and t > 0:
        err = _halving_error(a, u, t, full)
        if err > EXPM_RTOL:
            warnings.warn(
                f"expm self-check error {err:.2e} exceeds {EXPM_RTOL:.0e} at t={t}",
                ExpmAccuracyWarning,
                stacklevel=2,
            )
    return full @ u


class MatrixModel:
    linear = True
    step = None

    def __init__(self, config: MatrixModelConfig | np.ndarray):
        if not isinstance(config, MatrixModelConfig):
            config = MatrixModelConfig(np.asarray(config))
        self.config = config

    @property
    def dim(self) -> int:
        return self.config.n

    def zero(self) -> np.ndarray:
        return np.zeros(self.dim, dtype=self.config.generator.dtype)

    def check_state(self, state) -> np.ndarray:
        u = np.asarray(state)
        if u.dtype.kind not in "fc":
            u = u.astype(float)
        if u.shape != (self.dim,):
            raise InputError(f"dimension mismatch: expected ({self.dim},), got {u.shape}")
        if not np.all(np.isfinite(u)):
            raise InputError("state must be finite")
        return u

    def evolve(self, state, t: float) -> np.ndarray:
        return matrix_evolve(self.config, state, t)

    def orbit(self, state, times: np.ndarray):
        a = self.config.generator
        u = np.asarray(state)
        with np.errstate(over="ignore", invalid="ignore"):
            props = expm(np.asarray(times)[:, None, None] * a)
            if times[-1] > 0:
                err = _halving_error(a, u, float(times[-1]), props[-1])
                if err > EXPM_RTOL:
                    warnings.warn(
                        f"expm self-check error {err:.2e} at t={times[-1]}",
                        ExpmAccuracyWarning,
                        stacklevel=2,
                    )
            states = props @ u
        return iter(states)

    def norm(self, state) -> float:
        return stable_norm(state)


# ---------------------------------------------------------------------------
# bump-and-spike weighted translation


@dataclass(frozen=True)
class SparseLine:
    """Finitely supported function on the integer cells ``0, 1, 2, ...``."""

    positions: tuple[int, ...] = ()
    amplitudes: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        pos = tuple(int(p) for p in self.positions)
        amp = tuple(float(a) for a in self.amplitudes)
        if len(pos) != len(amp):
            raise InputError("positions and amplitudes differ in length")
        if any(p < 0 for p in pos):
            raise InputError("cell positions must be non-negative")
        if len(set(pos)) != len(pos):
            raise InputError("cell positions must be distinct")
        order = sorted(range(len(pos)), key=pos.__getitem__)
        object.__setattr__(self, "positions", tuple(pos[i] for i in order))
        object.__setattr__(self, "amplitudes", tuple(amp[i] for i in order))

    @classmethod
    def from_dict(cls, cells: dict[int, float]) -> "SparseLine":
        items = [(p, a) for p, a in cells.items() if a != 0.0]
        return cls(tuple(p for p, _ in items), tuple(a for _, a in items))

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.positions, self.amplitudes))

    def shifted(self, m: int) -> "SparseLine":
        """Translate left by ``m`` cells; mass below cell 0 leaves the line."""
        keep = [(p - m, a) for p, a in zip(self.positions, self.amplitudes) if p >= m]
        return SparseLine(tuple(p for p, _ in keep), tuple(a for _, a in keep))

    def __bool__(self) -> bool:
        return any(a != 0.0 for a in self.amplitudes)

    def __add__(self, other: "SparseLine") -> "SparseLine":
        cells = self.as_dict()
        for p, a in zip(other.positions, other.amplitudes):
            cells[p] = cells.get(p, 0.0) + a
        return SparseLine.from_dict(cells)

    def __neg__(self) -> "SparseLine":
        return SparseLine(self.positions, tuple(-a for a in self.amplitudes))

    def __sub__(self, other: "SparseLine") -> "SparseLine":
        return self + (-other)

    def __mul__(self, c: float) -> "SparseLine":
        return SparseLine.from_dict({p: c * a for p, a in self.as_dict().items()})

    __rmul__ = __mul__


def _strictly_increasing_ints(name: str, xs: Sequence[int]) -> tuple[int, ...]:
    out = tuple(int(x) for x in xs)
    if any(int(x) != x for x in xs):
        raise InputError(f"{name} must be integers")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise InputError(f"{name} must be strictly increasing")
    if out and out[0] < 0:
        raise InputError(f"{name} must be non-negative")
    return out


def _positive(name: str, xs: Sequence[float]) -> tuple[float, ...]:
    out = tuple(float(x) for x in xs)
    if not all(x > 0 and math.isfinite(x) for x in out):
        raise InputError(f"{name} must be positive and finite")
    return out


@dataclass(frozen=True)
class BumpSpikeConfig:
    """Bump train and spike weights on the integer line (cells of width ``h``).

    :meth:`default` builds ``s_j = 3 j^2``, ``H_j = 8^j``, ``c_k = 2^-k``,
    ``a_k = s_k + k`` so that bump ``k`` lies on spike ``k`` at step ``k``
    with ``c_k^2 H_k = 2^k``.
    """

    bump_positions: tuple[int, ...]
    bump_amplitudes: tuple[float, ...]
    spike_positions: tuple[int, ...]
    spike_heights: tuple[float, ...]
    h: float = 1.0

    def __post_init__(self) -> None:
        a = _strictly_increasing_ints("bump_positions", self.bump_positions)
        s = _strictly_increasing_ints("spike_positions", self.spike_positions)
        c = _positive("bump_amplitudes", self.bump_amplitudes)
        H = _positive("spike_heights", self.spike_heights)
        if len(a) != len(c) or len(s) != len(H):
            raise InputError("positions and amplitudes/heights must pair up")
        if not a:
            raise InputError("need at least one bump")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise InputError("h must be positive")
        object.__setattr__(self, "bump_positions", a)
        object.__setattr__(self, "bump_amplitudes", c)
        object.__setattr__(self, "spike_positions", s)
        object.__setattr__(self, "spike_heights", H)
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def default(cls, K: int = 24, h: float = 1.0) -> "BumpSpikeConfig":
        s = tuple(3 * j * j for j in range(K))
        return cls(
            bump_positions=tuple(s[k] + k for k in range(K)),
            bump_amplitudes=tuple(2.0 ** -k for k in range(K)),
            spike_positions=s,
            spike_heights=tuple(8.0 ** j for j in range(K)),
            h=h,
        )

    @property
    def K(self) -> int:
        return len(self.bump_positions)

    def weight(self, cell: int) -> float:
        w = 1.0
        for s, H in zip(self.spike_positions, self.spike_heights):
            if s == cell:
                w += H
        return w

    def initial_state(self) -> SparseLine:
        return SparseLine(self.bump_positions, self.bump_amplitudes)


def bumpspike_norm(config: BumpSpikeConfig, m: int) -> float:
    """Closed-form orbit norm of the bump train after ``m`` steps.

    ``sqrt(sum_{k: a_k >= m} c_k^2 h (1 + sum_j H_j [a_k - m == s_j]))``,
    summed directly over all (bump, spike) pairs.
    """
    if m < 0:
        raise InputError("m must be non-negative")
    total = 0.0
    for a, c in zip(config.bump_positions, config.bump_amplitudes):
        if a < m:
            continue
        w = 1.0
        for s, H in zip(config.spike_positions, config.spike_heights):
            if a - m == s:
                w += H
        total += c * c * config.h * w
    return math.sqrt(total)


def bumpspike_certificate(config: BumpSpikeConfig) -> list[tuple[int, float, float]]:
    """Crossing events ``(k, t_k, peak_lower_bound)``: bump ``k`` on spike ``k``."""
    rows = []
    n = min(config.K, len(config.spike_positions))
    for k in range(n):
        gap = config.bump_positions[k] - config.spike_positions[k]
        if gap < 0:
            continue
        c = config.bump_amplitudes[k]
        peak = c * math.sqrt(config.h * (1.0 + config.spike_heights[k]))
        rows.append((k, gap * config.h, peak))
    return rows


def write_certificate_csv(config: BumpSpikeConfig, fh) -> None:
    fh.write("k,t_k,peak_lower_bound\n")
    for k, t, p in bumpspike_certificate(config):
        fh.write(f"{k},{t:.17g},{p:.17g}\n")


def bumpspike_envelope(config: BumpSpikeConfig, initial_gap: float) -> GrowthBound:
    """Orbit envelope ``M exp(omega t) initial_gap`` of the bump train.

    At step ``m`` a bump ``k`` can only sit on a spike ``j`` with
    ``a_k - s_j == m``, contributing ``c_k^2 h H_j <= B 2^m`` where ``B`` is
    the max of ``c_k^2 h H_j / 2^(a_k - s_j)`` over reachable pairs.  Hence
    ``norm^2 <= S + K B 2^m <= (S + K B) 2^m`` with ``S = h sum c_k^2``.
    """
    if initial_gap <= 0:
        raise InputError("initial gap must be positive")
    S = config.h * sum(c * c for c in config.bump_amplitudes)
    B = 0.0
    for a, c in zip(config.bump_positions, config.bump_amplitudes):
        for s, H in zip(config.spike_positions, config.spike_heights):
            if s <= a:
                B = max(B, math.ldexp(c * c * config.h * H, -int(a - s)))
    M = math.sqrt(S + config.K * B) / initial_gap
    return GrowthBound(max(1.0, M), math.log(2.0) / (2.0 * config.h))


def _steps(t: float, h: float) -> int:
    if t < 0:
        raise InputError("t must be non-negative")
    m = round(t / h)
    if abs(m * h - t) > 1e-9 * max(1.0, abs(t)):
        raise InputError(f"time {t} is not a multiple of the cell width {h}")
    return int(m)


class BumpSpikeModel:
    linear = True

    def __init__(self, config: BumpSpikeConfig | None = None):
        self.config = config or BumpSpikeConfig.default()
        self._weights = {}
        for s, H in zip(self.config.spike_positions, self.config.spike_heights):
            self._weights[s] = self._weights.get(s, 1.0) + H

    @property
    def step(self) -> float:
        return self.config.h

    def zero(self) -> SparseLine:
        return SparseLine()

    def initial_state(self) -> SparseLine:
        return self.config.initial_state()

    def check_state(self, state) -> SparseLine:
        if isinstance(state, SparseLine):
            return state
        if isinstance(state, dict):
            return SparseLine.from_dict(state)
        raise InputError(f"bump-spike states are SparseLine objects, got {type(state).__name__}")

    def evolve(self, state: SparseLine, t: float) -> SparseLine:
        return state.shifted(_steps(t, self.config.h))

    def orbit(self, state: SparseLine, times: Iterable[float]):
        prev = 0
        cur = state
        for t in times:
            m = _steps(float(t), self.config.h)
            cur = cur.shifted(m - prev)
            prev = m
            yield cur

    def norm(self, state: SparseLine) -> float:
        amps = np.array(state.amplitudes)
        w = np.array([self._weights.get(p, 1.0) for p in state.positions])
        return stable_norm(amps, w * self.config.h)


# ---------------------------------------------------------------------------
# stable/unstable splitting


@dataclass(frozen=True)
class SplittingModelConfig:
    """Diagonal stable block ``(rates <= -omega_s)`` plus a bump-spike block.

    ``M_u``/``omega_u`` describe a uniformly unstable block; they are carried
    for completeness but the bump-spike block only grows along its crossing
    times.
    """

    stable_rates: tuple[float, ...] = (-0.5, -1.0)
    omega_s: float = 0.5
    M_s: float = 1.0
    unstable_block: BumpSpikeConfig = field(default_factory=BumpSpikeConfig.default)
    M_u: float | None = None
    omega_u: float | None = None

    def __post_init__(self) -> None:
        rates = tuple(float(r) for r in self.stable_rates)
        if not self.omega_s > 0:
            raise InputError("omega_s must be positive")
        if not self.M_s >= 1:
            raise InputError("M_s must be >= 1")
        if any(r > -self.omega_s for r in rates):
            raise InputError(f"every stable rate must be <= -omega_s = {-self.omega_s}")
        if not bumpspike_certificate(self.unstable_block):
            raise InputError("unstable block has no crossing events")
        object.__setattr__(self, "stable_rates", rates)


@dataclass(frozen=True)
class SplitState:
    stable: np.ndarray
    unstable: SparseLine

    def __post_init__(self) -> None:
        object.__setattr__(self, "stable", np.asarray(self.stable, dtype=float))

    def __add__(self, other: "SplitState") -> "SplitState":
        return SplitState(self.stable + other.stable, self.unstable + other.unstable)

    def __sub__(self, other: "SplitState") -> "SplitState":
        return SplitState(self.stable - other.stable, self.unstable - other.unstable)

    def __mul__(self, c: float) -> "SplitState":
        return SplitState(c * self.stable, c * self.unstable)

    __rmul__ = __mul__

    @property
    def shape(self) -> tuple[int, ...]:
        return self.stable.shape


class SplittingModel:
    linear = True

    def __init__(self, config: SplittingModelConfig | None = None):
        self.config = config or SplittingModelConfig()
        self._unstable = BumpSpikeModel(self.config.unstable_block)
        self._rates = np.array(self.config.stable_rates)

    @property
    def step(self) -> float:
        return self.config.unstable_block.h

    def zero(self) -> SplitState:
        return SplitState(np.zeros(self._rates.size), SparseLine())

    def default_state(self) -> SplitState:
        """Mixed data: unit stable coefficients plus the full bump train."""
        return SplitState(np.ones(self._rates.size), self._unstable.initial_state())

    def check_state(self, state) -> SplitState:
        if not isinstance(state, SplitState):
            raise InputError("splitting states are SplitState objects")
        if state.stable.shape != self._rates.shape:
            raise InputError(
                f"dimension mismatch: stable part {state.stable.shape} vs {self._rates.shape}"
            )
        return state

    def evolve(self, state: SplitState, t: float) -> SplitState:
        stable = state.stable * np.exp(self._rates * t)
        return SplitState(stable, self._unstable.evolve(state.unstable, t))

    def orbit(self, state: SplitState, times: Iterable[float]):
        times = list(times)
        for t, u in zip(times, self._unstable.orbit(state.unstable, times)):
            yield SplitState(state.stable * np.exp(self._rates * t), u)

    def stable_norm(self, state: SplitState) -> float:
        return stable_norm(state.stable)

    def unstable_norm(self, state: SplitState) -> float:
        return self._unstable.norm(state.unstable)

    def norm(self, state: SplitState) -> float:
        return math.hypot(self.stable_norm(state), self.unstable_norm(state))


def splitting_evolve(
    config: SplittingModelConfig, u0: SplitState, t: float
) -> tuple[SplitState, float]:
    model = SplittingModel(config)
    out = model.evolve(model.check_state(u0), t)
    return out, model.norm(out)


def perturb_to_chaotic(
    config: SplittingModelConfig, u0: SplitState, epsilon: float
) -> SplitState:
    """Nearby state (gap ``epsilon / 2``) with a non-zero unstable component.

    The added unstable part is the whole bump train rescaled to norm
    ``epsilon / 2``; by homogeneity its orbit keeps the dip/peak pattern
    of the unscaled train.  States that already carry an unstable part are
    returned unchanged.
    """
    if not epsilon > 0:
        raise InputError("epsilon must be positive")
    model = SplittingModel(config)
    u0 = model.check_state(u0)
    if u0.unstable:
        return u0
    train = model._unstable.initial_state()
    z = (0.5 * epsilon / model._unstable.norm(train)) * train
    return SplitState(u0.stable.copy(), z)
