"""Finite-horizon liminf/limsup proxies, verdicts and spectral indicators.

An orbit whose deviation both returns close to the reference (small
post-burn-in minimum) and makes large excursions (large maximum, or
overflow) is flagged ``IRREGULAR_CANDIDATE``.  The asymptotic statement
cannot be certified from finite data, hence "candidate".
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .core import InputError, TrajectoryTrace
from .pde import EffectiveParams, RobinParams, robin_eigenvalue

__all__ = [
    "ClassifierThresholds",
    "DeviationSummary",
    "VerdictKind",
    "Verdict",
    "SpectralIndicators",
    "summarize",
    "classify",
    "classify_trace",
    "spectral_region_member",
    "dsw_indicator",
    "VERDICT_CSV_HEADER",
    "verdict_csv_row",
    "verdict_text",
    "co_occurrence",
    "format_value",
]

FINAL_WINDOW_FRACTION = 0.1
REGION_MARGIN = 1e-12
SCAN_POINTS = 512


@dataclass(frozen=True)
class ClassifierThresholds:
    burn_in_fraction: float = 0.05
    eps_dip: float = 1e-3
    big_growth: float = 1e3
    bounded_band: tuple[float, float] = (0.1, 10.0)

    def __post_init__(self) -> None:
        band = tuple(float(b) for b in self.bounded_band)
        if len(band) != 2 or not 0 < band[0] <= band[1]:
            raise InputError("bounded_band must be (lo, hi) with 0 < lo <= hi")
        object.__setattr__(self, "bounded_band", band)
        if not 0 <= self.burn_in_fraction < 1:
            raise InputError("burn_in_fraction must lie in [0, 1)")
        if not 0 < self.eps_dip < 1 < self.big_growth:
            raise InputError("need 0 < eps_dip < 1 < big_growth")

    def with_overrides(self, **kw) -> "ClassifierThresholds":
        d = asdict(self)
        d.update({k: v for k, v in kw.items() if v is not None})
        return ClassifierThresholds(**d)


@dataclass(frozen=True)
class DeviationSummary:
    initial: float
    min_after_burn: float
    max_overall: float
    t_min: float
    t_max: float
    alternation_count: int
    overflow: bool
    final_window_median: float
    horizon: float
    label: str = ""

    @property
    def dip_ratio(self) -> float:
        return self.min_after_burn / self.initial

    @property
    def growth_ratio(self) -> float:
        return self.max_overall / self.initial


def summarize(trace: TrajectoryTrace,
              thresholds: ClassifierThresholds | None = None) -> DeviationSummary:
    th = thresholds or ClassifierThresholds()
    t, v = trace.times, trace.values
    if v.size == 0:
        raise InputError("empty trace")
    initial = float(v[0])
    if not initial > 0:
        raise InputError("initial deviation is 0: the trace carries no information")
    after = t >= th.burn_in_fraction * trace.horizon
    if not np.any(after):
        after[-1] = True
    tb, vb = t[after], v[after]
    i_min = int(np.argmin(vb))
    i_max = int(np.argmax(v))
    dip, peak = float(vb[i_min]), float(v[i_max])
    above = vb > math.sqrt(dip) * math.sqrt(peak)
    alternations = int(np.count_nonzero(above[1:] != above[:-1]))
    n_final = max(1, int(math.ceil(FINAL_WINDOW_FRACTION * v.size)))
    return DeviationSummary(
        initial=initial,
        min_after_burn=dip,
        max_overall=peak,
        t_min=float(tb[i_min]),
        t_max=float(t[i_max]),
        alternation_count=alternations,
        overflow=bool(trace.overflow),
        final_window_median=float(np.median(v[-n_final:])),
        horizon=trace.horizon,
        label=trace.label,
    )


class VerdictKind(str, enum.Enum):
    DECAYING = "DECAYING"
    BOUNDED = "BOUNDED"
    GROWING = "GROWING"
    IRREGULAR_CANDIDATE = "IRREGULAR_CANDIDATE"
    INCONCLUSIVE = "INCONCLUSIVE"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    thresholds: ClassifierThresholds
    explanation: str
    summary: DeviationSummary


def classify(summary: DeviationSummary,
             thresholds: ClassifierThresholds | None = None) -> Verdict:
    th = thresholds or ClassifierThresholds()
    s = summary
    lo, hi = th.bounded_band
    big = s.growth_ratio > th.big_growth or s.overflow
    figures = f"dip_ratio={s.dip_ratio:.3e} growth_ratio={s.growth_ratio:.3e}"
    if s.dip_ratio < th.eps_dip and big and s.alternation_count >= 1:
        kind, why = VerdictKind.IRREGULAR_CANDIDATE, (
            f"returns below {th.eps_dip:g} of the initial gap and exceeds "
            f"{th.big_growth:g} of it{' (overflow)' if s.overflow else ''}, "
            f"{s.alternation_count} alternation(s)")
    elif s.growth_ratio <= hi and s.final_window_median < th.eps_dip * s.initial:
        kind, why = VerdictKind.DECAYING, (
            f"final-window median {s.final_window_median / s.initial:.3e} of the initial gap")
    elif s.dip_ratio >= lo and big:
        kind, why = VerdictKind.GROWING, "no return toward the reference, large growth"
    elif s.dip_ratio >= lo and s.growth_ratio <= hi:
        kind, why = VerdictKind.BOUNDED, f"whole trace within [{lo:g}, {hi:g}] x initial"
    else:
        kind, why = VerdictKind.INCONCLUSIVE, "no rule matched at this horizon"
    return Verdict(kind, th, f"{why}; {figures}", s)


def classify_trace(trace: TrajectoryTrace,
                   thresholds: ClassifierThresholds | None = None) -> Verdict:
    return classify(summarize(trace, thresholds), thresholds)


# ---------------------------------------------------------------------------
# spectral indicators


def _quadratic_roots(a: float, b: float, c: complex) -> tuple[complex, complex]:
    """Roots of ``a z^2 + b z + c`` without cancellation."""
    sq = cmath.sqrt(b * b - 4 * a * c)
    sign = 1.0 if (b * sq.real) >= 0 else -1.0
    q = -0.5 * (b + sign * sq)
    if q == 0:
        return 0j, 0j
    return q / a, c / q


def spectral_region_member(params: RobinParams, lam: complex) -> bool:
    """Both roots of ``alpha mu^2 + beta mu + (gamma - lam)`` in Re < 0."""
    r1, r2 = _quadratic_roots(params.alpha, params.beta, params.gamma - complex(lam))
    return r1.real < -REGION_MARGIN and r2.real < -REGION_MARGIN


@dataclass(frozen=True)
class SpectralIndicators:
    rho: float
    eta: float
    rho_positive: bool
    region_meets_imaginary_axis: bool
    lambda_kappa: float | None = None
    lambda_kappa_positive: bool | None = None
    scan_hits: int = field(default=0, compare=False)


def _scan_taus(params: RobinParams) -> np.ndarray:
    if params.gamma > 0:
        scale = max(1.0, abs(params.beta) * math.sqrt(params.gamma / params.alpha))
    else:
        scale = 1.0
    pos = np.geomspace(1e-6 * scale, 10 * scale, SCAN_POINTS)
    return np.concatenate([-pos[::-1], [0.0], pos])


def dsw_indicator(params: RobinParams) -> SpectralIndicators:
    """``rho``, ``eta``, whether the two-decaying-root region meets ``iR``, ``lambda_kappa``.

    The scan over ``lambda = i tau`` is combined with the closed-form
    answer: by Routh-Hurwitz the region contains ``lambda = 0`` exactly
    when ``beta > 0`` and ``gamma > 0``.  Note this is not the same
    condition as ``rho > 0``.
    """
    eff = EffectiveParams.from_params(params)
    hits = sum(spectral_region_member(params, 1j * tau) for tau in _scan_taus(params))
    meets = hits > 0 or (params.beta > 0 and params.gamma > 0)
    mode = robin_eigenvalue(params)
    lk = None if mode is None else float(mode.lambda_kappa)
    return SpectralIndicators(
        rho=eff.rho,
        eta=eff.eta,
        rho_positive=eff.rho > 0,
        region_meets_imaginary_axis=bool(meets),
        lambda_kappa=lk,
        lambda_kappa_positive=None if lk is None else lk > 0,
        scan_hits=int(hits),
    )


# ---------------------------------------------------------------------------
# serialization

VERDICT_CSV_HEADER = ("label,verdict,dip_ratio,growth_ratio,t_min,t_max,alternations,"
                      "overflow,rho,region_meets_iR,lambda_kappa")


def format_value(x) -> str:
    """CSV/text rendering: 17 significant digits, lowercase booleans, empty for None."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def verdict_csv_row(verdict: Verdict, spectral: SpectralIndicators | None = None) -> str:
    s, sp = verdict.summary, spectral
    values = [s.dip_ratio, s.growth_ratio, s.t_min, s.t_max, s.alternation_count, s.overflow]
    if sp is None:
        values += [None, None, None]
    else:
        values += [sp.rho, sp.region_meets_imaginary_axis, sp.lambda_kappa]
    cells = [s.label, str(verdict.kind)] + [format_value(v) for v in values]
    return ",".join(cells)


def verdict_text(verdict: Verdict, spectral: SpectralIndicators | None = None) -> str:
    s, th = verdict.summary, verdict.thresholds
    pairs: list[tuple[str, object]] = [
        ("label", s.label),
        ("verdict", str(verdict.kind)),
        ("explanation", verdict.explanation),
        ("initial", s.initial),
        ("dip_ratio", s.dip_ratio),
        ("growth_ratio", s.growth_ratio),
        ("t_min", s.t_min),
        ("t_max", s.t_max),
        ("alternations", s.alternation_count),
        ("overflow", s.overflow),
        ("final_window_median", s.final_window_median),
        ("horizon", s.horizon),
        ("burn_in_fraction", th.burn_in_fraction),
        ("eps_dip", th.eps_dip),
        ("big_growth", th.big_growth),
        ("bounded_band_min", th.bounded_band[0]),
        ("bounded_band_max", th.bounded_band[1]),
    ]
    if spectral is not None:
        pairs += [
            ("rho", spectral.rho),
            ("eta", spectral.eta),
            ("rho_positive", spectral.rho_positive),
            ("region_meets_iR", spectral.region_meets_imaginary_axis),
            ("lambda_kappa", spectral.lambda_kappa),
        ]
    lines = [f"{k}={v if isinstance(v, str) else format_value(v)}" for k, v in pairs]
    return "\n".join(lines) + "\n"


def co_occurrence(rows: Iterable[tuple[str, float]], rho_cut: float = 0.5) -> dict:
    """Count verdicts split by ``rho >= rho_cut``."""
    table: dict[str, dict[str, int]] = {}
    for verdict, rho in rows:
        col = "rho_high" if rho >= rho_cut else "rho_low"
        table.setdefault(str(verdict), {"rho_high": 0, "rho_low": 0})[col] += 1
    return table
