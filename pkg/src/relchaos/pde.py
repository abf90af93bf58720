"""Explicit finite differences for ``u_t = alpha u_xx + beta u_x + gamma u``.

The half-line is truncated to ``[0, L]`` with ``u(L) = 0``; the left end
carries the Robin condition ``u_x(0) + kappa u(0) = 0``.  Two boundary
closures are available:

``"one_sided"`` (default)
    ``(u_1 - u_0)/h + kappa u_0 = 0``, i.e. ``u_0 = u_1 / (1 - kappa h)``,
    imposed after every step (first order).
``"ghost"``
    ghost node ``u_{-1} = u_1 + 2 h kappa u_0`` and the full stencil at
    ``x = 0`` (second order).

:func:`solve_conjugated` is an independent route to the same evolution:
with ``eta = -beta/(2 alpha)`` and ``rho = gamma - beta^2/(4 alpha)`` the
substitution ``u = exp(eta x) exp(rho t) v`` turns the problem into the
heat equation for ``v`` with Robin coefficient ``kappa + eta``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .core import InputError, TrajectoryTrace, stable_norm

__all__ = [
    "RobinParams",
    "EffectiveParams",
    "GridSpec",
    "PDERun",
    "PDEModel",
    "RobinMode",
    "BOUNDARY_SCHEMES",
    "cfl_timestep",
    "step_direct",
    "solve_direct",
    "solve_conjugated",
    "energy_trace",
    "energy_identity_residual",
    "energy_identity_report",
    "robin_eigenvalue",
    "trapezoid_weights",
    "l2_norm",
    "gaussian",
    "boundary_layer",
    "band_limited_noise",
    "eigenmode",
    "initial_data",
    "write_snapshot_csv",
]

log = logging.getLogger(__name__)

BOUNDARY_SCHEMES = ("one_sided", "ghost")
MIN_INTERVALS = 16
# beyond this |eta L| the conjugation weight exp(eta x) leaves float range
MAX_WEIGHT_EXPONENT = 700.0
TRUNCATION_RTOL = 1e-6


@dataclass(frozen=True)
class RobinParams:
    alpha: float
    beta: float = 0.0
    gamma: float = 0.0
    kappa: float = 0.0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma", "kappa"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InputError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if not self.alpha > 0:
            raise InputError("alpha must be positive")

    @property
    def effective(self) -> "EffectiveParams":
        return EffectiveParams.from_params(self)


@dataclass(frozen=True)
class EffectiveParams:
    eta: float
    rho: float
    shifted_kappa: float

    @classmethod
    def from_params(cls, p: RobinParams) -> "EffectiveParams":
        eta = -p.beta / (2.0 * p.alpha) + 0.0  # no negative zero
        rho = p.gamma - p.beta * p.beta / (4.0 * p.alpha)
        return cls(eta=eta, rho=rho, shifted_kappa=p.kappa + eta)


def cfl_timestep(params: RobinParams, h: float, safety: float = 0.9,
                 boundary: str = "one_sided") -> float:
    """``safety / (2 alpha/h^2 + |beta|/h + |gamma|)``.

    The ghost-node closure adds the boundary-row rate
    ``2 alpha |kappa| / h + |beta kappa|`` to the denominator.
    """
    if not h > 0:
        raise InputError("h must be positive")
    if not 0 < safety <= 1:
        raise InputError("safety must lie in (0, 1]")
    _check_scheme(boundary)
    rate = 2 * params.alpha / h ** 2 + abs(params.beta) / h + abs(params.gamma)
    if boundary == "ghost":
        rate += 2 * params.alpha * abs(params.kappa) / h + abs(params.beta * params.kappa)
    return safety / rate


@dataclass(frozen=True)
class GridSpec:
    """Truncated domain ``[0, L]`` with ``N`` intervals, step ``dt`` up to ``T``."""

    L: float
    N: int
    dt: float
    T: float
    save_every: int = 1
    safety: float = 0.9

    def __post_init__(self) -> None:
        if not self.L > 0:
            raise InputError("L must be positive")
        if int(self.N) != self.N or self.N < MIN_INTERVALS:
            raise InputError(f"N must be an integer >= {MIN_INTERVALS}")
        if not self.dt > 0:
            raise InputError("dt must be positive")
        if self.T < 0:
            raise InputError("T must be non-negative")
        if int(self.save_every) != self.save_every or self.save_every < 1:
            raise InputError("save_every must be a positive integer")
        n = round(self.T / self.dt)
        if abs(n * self.dt - self.T) > 1e-9 * max(1.0, self.T):
            raise InputError(f"T={self.T} is not a multiple of dt={self.dt}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "save_every", int(self.save_every))

    @classmethod
    def build(
        cls,
        params: RobinParams,
        L: float,
        N: int,
        T: float,
        *,
        safety: float = 0.9,
        save_every: int = 1,
        boundary: str = "one_sided",
    ) -> "GridSpec":
        """Largest ``dt`` within the CFL bound that divides ``T`` evenly."""
        h = L / N
        bound = cfl_timestep(params, h, safety, boundary)
        steps = max(1, math.ceil(T / bound - 1e-12))
        return cls(L=L, N=N, dt=T / steps if T > 0 else bound, T=T,
                   save_every=save_every, safety=safety)

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def n_steps(self) -> int:
        return round(self.T / self.dt)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.h

    def check_cfl(self, params: RobinParams, boundary: str = "one_sided") -> None:
        bound = cfl_timestep(params, self.h, self.safety, boundary)
        if self.dt > bound * (1 + 1e-12):
            raise InputError(f"dt={self.dt:.3e} violates the CFL bound {bound:.3e}")


def trapezoid_weights(n_points: int, h: float) -> np.ndarray:
    w = np.full(n_points, h)
    w[0] = w[-1] = h / 2
    return w


def l2_norm(u: np.ndarray, h: float) -> float:
    """Trapezoid L2 norm on the uniform grid."""
    return stable_norm(u, trapezoid_weights(len(u), h))


def _robin_factor(kappa: float, h: float) -> float:
    d = 1.0 - kappa * h
    if abs(d) < 1e-12:
        raise InputError("kappa*h = 1 makes the one-sided Robin relation singular")
    return 1.0 / d


def _apply_boundary(u: np.ndarray, kappa: float, h: float, scheme: str) -> None:
    u[-1] = 0.0
    if scheme == "one_sided":
        u[0] = u[1] * _robin_factor(kappa, h)


def _check_scheme(scheme: str) -> None:
    if scheme not in BOUNDARY_SCHEMES:
        raise InputError(f"unknown boundary scheme {scheme!r}; use one of {BOUNDARY_SCHEMES}")


def _step(u: np.ndarray, a: float, b: float, g: float, k: float, h: float, dt: float,
          scheme: str) -> np.ndarray:
    out = np.empty_like(u)
    c2 = a / h ** 2
    c1 = b / (2 * h)
    out[1:-1] = u[1:-1] + dt * (
        c2 * (u[2:] - 2 * u[1:-1] + u[:-2]) + c1 * (u[2:] - u[:-2]) + g * u[1:-1]
    )
    if scheme == "ghost":
        out[0] = u[0] + dt * (2 * c2 * (u[1] - u[0]) + (2 * a * k / h - b * k + g) * u[0])
    _apply_boundary(out, k, h, scheme)
    return out


def step_direct(params: RobinParams, grid: GridSpec, field: np.ndarray,
                boundary: str = "one_sided") -> np.ndarray:
    """One explicit Euler step of the full equation, boundary relations applied."""
    _check_scheme(boundary)
    u = np.asarray(field, dtype=float)
    if u.shape != (grid.N + 1,):
        raise InputError(f"field must have {grid.N + 1} samples, got {u.shape}")
    with np.errstate(over="ignore", invalid="ignore"):
        return _step(u, params.alpha, params.beta, params.gamma, params.kappa,
                     grid.h, grid.dt, boundary)


Sampler = Callable[[np.ndarray], np.ndarray]


@dataclass
class PDERun:
    """Saved fields of one run; iterating yields ``(t, field)`` pairs."""

    params: RobinParams
    grid: GridSpec
    times: np.ndarray
    fields: np.ndarray
    boundary: str = "one_sided"
    overflow: bool = False
    truncation_contaminated: bool = False
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def __iter__(self) -> Iterator[tuple[float, np.ndarray]]:
        return iter(zip(self.times, self.fields))

    def __len__(self) -> int:
        return len(self.times)


def _sample(u0: Sampler | np.ndarray, x: np.ndarray) -> np.ndarray:
    u = np.asarray(u0(x) if callable(u0) else u0, dtype=float).copy()
    if u.shape != x.shape:
        raise InputError(f"initial data must have {x.size} samples, got {u.shape}")
    if not np.all(np.isfinite(u)):
        raise InputError("initial data must be finite on [0, L]")
    return u


def _march(u: np.ndarray, a: float, b: float, g: float, k: float, grid: GridSpec,
           scheme: str, post: Callable[[float, np.ndarray], np.ndarray] | None = None):
    """Advance ``u`` over ``grid``; returns saved times, fields and overflow flag."""
    h, dt = grid.h, grid.dt
    times = [0.0]
    fields = [u.copy() if post is None else post(0.0, u)]
    overflow = False
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, grid.n_steps + 1):
            u = _step(u, a, b, g, k, h, dt, scheme)
            if n % grid.save_every == 0 or n == grid.n_steps:
                if not np.all(np.isfinite(u)):
                    overflow = True
                    break
                t = n * dt
                f = u.copy() if post is None else post(t, u)
                if not np.all(np.isfinite(f)):
                    overflow = True
                    break
                times.append(t)
                fields.append(f)
    return np.array(times), np.array(fields), overflow


def _truncation_check(run: PDERun) -> None:
    tail = np.abs(run.fields[:, -2])
    peak = np.max(np.abs(run.fields), axis=1)
    bad = tail > TRUNCATION_RTOL * peak
    if np.any(bad):
        run.truncation_contaminated = True
        t = run.times[int(np.argmax(bad))]
        log.warning("truncation contamination: |u(L-h)| > %.0e max|u| from t=%.4g",
                    TRUNCATION_RTOL, t)


def solve_direct(params: RobinParams, grid: GridSpec, u0: Sampler | np.ndarray,
                 boundary: str = "one_sided", label: str = "") -> PDERun:
    grid.check_cfl(params, boundary)
    u = _sample(u0, grid.x)
    _robin_factor(params.kappa, grid.h)
    _apply_boundary(u, params.kappa, grid.h, boundary)
    times, fields, overflow = _march(u, params.alpha, params.beta, params.gamma,
                                     params.kappa, grid, boundary)
    run = PDERun(params, grid, times, fields, boundary, overflow, label=label)
    _truncation_check(run)
    return run


def solve_conjugated(params: RobinParams, grid: GridSpec, u0: Sampler | np.ndarray,
                     boundary: str = "one_sided", label: str = "") -> PDERun:
    """Solve through the drift-free heat problem and map back."""
    _check_scheme(boundary)
    eff = params.effective
    if abs(eff.eta * grid.L) > MAX_WEIGHT_EXPONENT:
        raise InputError(
            f"|eta L| = {abs(eff.eta * grid.L):.1f} exceeds {MAX_WEIGHT_EXPONENT}: "
            "the exponential weight leaves float range"
        )
    heat = RobinParams(params.alpha, 0.0, 0.0, eff.shifted_kappa)
    grid.check_cfl(heat, boundary)
    x = grid.x
    v = np.exp(-eff.eta * x) * _sample(u0, x)
    _robin_factor(heat.kappa, grid.h)
    _apply_boundary(v, heat.kappa, grid.h, boundary)
    weight = np.exp(eff.eta * x)

    def back(t: float, vt: np.ndarray) -> np.ndarray:
        return weight * math.exp(min(eff.rho * t, MAX_WEIGHT_EXPONENT)) * vt

    times, fields, overflow = _march(v, heat.alpha, 0.0, 0.0, heat.kappa, grid,
                                     boundary, post=back)
    run = PDERun(params, grid, times, fields, boundary, overflow, label=label)
    _truncation_check(run)
    return run


def energy_trace(run: PDERun, h: float | None = None) -> TrajectoryTrace:
    """``E(t) = ||u(t)||_{L2(0,L)}`` at the saved times (trapezoid rule)."""
    h = run.grid.h if h is None else h
    w = trapezoid_weights(run.fields.shape[1], h)
    values = np.array([stable_norm(f, w) for f in run.fields])
    return TrajectoryTrace(run.times, values, run.label, run.overflow)


def _residuals(run: PDERun, params: RobinParams, h: float, dt: float,
               signs: tuple[float, ...]) -> list[np.ndarray]:
    if len(run) < 2:
        raise InputError("energy identity needs at least two saved fields")
    a, b, g, k = params.alpha, params.beta, params.gamma, params.kappa
    w = trapezoid_weights(run.fields.shape[1], h)
    out = [np.empty(len(run)) for _ in signs]
    with np.errstate(over="ignore", invalid="ignore"):
        for i, u in enumerate(run.fields):
            nxt = _step(u, a, b, g, k, h, dt, run.boundary)
            e2 = float(np.sum(w * u * u))
            lhs = 0.5 * (float(np.sum(w * nxt * nxt)) - e2) / dt
            grad2 = h * float(np.sum(np.diff(u) ** 2 / h ** 2))
            u0sq = u[0] ** 2
            for s, r in zip(signs, out):
                rhs = -a * grad2 + s * a * k * u0sq - 0.5 * b * u0sq + g * e2
                r[i] = lhs - rhs
    return out


def energy_identity_residual(run: PDERun, params: RobinParams, h: float, dt: float,
                             boundary_sign: float = 1.0) -> TrajectoryTrace:
    """|residual| of the energy balance at each saved field.

    The left side is the one-step difference quotient of ``E^2 / 2`` (the
    field is advanced by one scheme step from each saved state); the right
    side is ``-alpha ||D+ u||^2 + s alpha kappa u(0)^2 - beta/2 u(0)^2
    + gamma E^2`` with boundary sign ``s``.
    """
    (r,) = _residuals(run, params, h, dt, (boundary_sign,))
    return TrajectoryTrace(run.times, np.abs(r), run.label, run.overflow)


def energy_identity_report(run: PDERun, params: RobinParams | None = None) -> dict:
    """Max residual of both boundary-sign variants of the energy balance."""
    params = run.params if params is None else params
    plus, minus = _residuals(run, params, run.grid.h, run.grid.dt, (1.0, -1.0))
    return {"max_residual_plus": float(np.max(np.abs(plus))),
            "max_residual_minus": float(np.max(np.abs(minus)))}


class RobinMode(NamedTuple):
    lambda_kappa: float
    mode: Sampler


def robin_eigenvalue(params: RobinParams) -> RobinMode | None:
    """Boundary eigenpair ``(alpha k^2 - beta k + gamma, exp(-k x))``.

    Returns ``None`` when ``kappa <= 0``: the mode is then not square
    integrable on the half-line.
    """
    k = params.kappa
    if not k > 0:
        return None
    lam = params.alpha * k * k - params.beta * k + params.gamma
    return RobinMode(lam, lambda x: np.exp(-k * np.asarray(x, dtype=float)))


# ---------------------------------------------------------------------------
# initial data


def gaussian(center: float = 1.0, width: float = 0.5, amplitude: float = 1.0) -> Sampler:
    if not width > 0:
        raise InputError("width must be positive")
    return lambda x: amplitude * np.exp(-0.5 * ((np.asarray(x) - center) / width) ** 2)


def boundary_layer(length: float = 1.0, amplitude: float = 1.0) -> Sampler:
    if not length > 0:
        raise InputError("length must be positive")
    return lambda x: amplitude * np.exp(-np.asarray(x) / length)


def eigenmode(kappa: float) -> Sampler:
    if not kappa > 0:
        raise InputError("the boundary mode needs kappa > 0")
    return lambda x: np.exp(-kappa * np.asarray(x))


def band_limited_noise(L: float, seed: int = 0, modes: int = 32,
                       taper: float = 0.25) -> Sampler:
    """Random cosine/sine series with ``modes`` frequencies, seeded.

    Coefficients decay like ``1/sqrt(n)`` (rough but band limited); a
    smooth taper over the last ``taper * L`` brings the data to 0 at ``L``.
    """
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(modes) / np.sqrt(np.arange(1, modes + 1))
    b = rng.standard_normal(modes) / np.sqrt(np.arange(1, modes + 1))
    n = np.arange(1, modes + 1)

    def f(x):
        x = np.asarray(x, dtype=float)
        ph = np.pi * np.outer(x, n) / L
        u = np.cos(ph) @ a + np.sin(ph) @ b
        s = np.clip((L - x) / (taper * L), 0.0, 1.0)
        return u * (3 * s ** 2 - 2 * s ** 3)

    return f


def initial_data(kind: str, params: RobinParams | None = None, L: float | None = None,
                 **kw) -> Sampler:
    """Initial-data library: gaussian, boundary_layer, noise, eigenmode."""
    if kind == "gaussian":
        return gaussian(**kw)
    if kind == "boundary_layer":
        return boundary_layer(**kw)
    if kind == "noise":
        if L is None:
            raise InputError("noise initial data needs the domain length")
        return band_limited_noise(L, **kw)
    if kind == "eigenmode":
        kappa = kw.pop("kappa", None)
        if kappa is None and params is not None:
            kappa = params.kappa
        if kw:
            raise InputError(f"unexpected eigenmode options {sorted(kw)}")
        return eigenmode(kappa)
    raise InputError(f"unknown initial data kind {kind!r}")


# ---------------------------------------------------------------------------
# semigroup view


class PDEModel:
    """The discrete scheme as an evolvable model (state = field samples)."""

    linear = True

    def __init__(self, params: RobinParams, grid: GridSpec, boundary: str = "one_sided"):
        grid.check_cfl(params, boundary)
        self.params = params
        self.grid = grid
        self.boundary = boundary

    @property
    def step(self) -> float:
        return self.grid.dt

    def zero(self) -> np.ndarray:
        return np.zeros(self.grid.N + 1)

    def sample(self, u0: Sampler | np.ndarray) -> np.ndarray:
        u = _sample(u0, self.grid.x)
        _apply_boundary(u, self.params.kappa, self.grid.h, self.boundary)
        return u

    def check_state(self, state) -> np.ndarray:
        u = np.asarray(state, dtype=float)
        if u.shape != (self.grid.N + 1,):
            raise InputError(f"dimension mismatch: expected ({self.grid.N + 1},), got {u.shape}")
        if not np.all(np.isfinite(u)):
            raise InputError("field must be finite")
        return u

    def _n(self, t: float) -> int:
        if t < 0:
            raise InputError("t must be non-negative")
        n = round(t / self.grid.dt)
        if abs(n * self.grid.dt - t) > 1e-9 * max(1.0, t):
            raise InputError(f"time {t} is not a multiple of dt={self.grid.dt}")
        return n

    def _advance(self, u: np.ndarray, n: int) -> np.ndarray:
        p, g = self.params, self.grid
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(n):
                u = _step(u, p.alpha, p.beta, p.gamma, p.kappa, g.h, g.dt, self.boundary)
        return u

    def evolve(self, state, t: float) -> np.ndarray:
        return self._advance(np.asarray(state, dtype=float), self._n(t))

    def orbit(self, state, times):
        u = np.asarray(state, dtype=float)
        done = 0
        for t in times:
            n = self._n(float(t))
            u = self._advance(u, n - done)
            done = n
            yield u

    def norm(self, state) -> float:
        return l2_norm(np.asarray(state), self.grid.h)


def write_snapshot_csv(x: np.ndarray, u: np.ndarray, fh) -> None:
    fh.write("x,u\n")
    for xi, ui in zip(x, u):
        fh.write(f"{xi:.17g},{ui:.17g}\n")
