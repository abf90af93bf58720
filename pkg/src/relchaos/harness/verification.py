"""Verification suites: closed-form oracles, refinement studies and identities.

Each suite is a list of named checks; :func:`verify` runs the selected
suites in a fixed order and returns a JSON-ready report.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ..classify import VerdictKind, classify_trace, dsw_indicator
from ..core import (check_growth_bound, deviation_trace, linear_reduction_check,
                    scaling_invariance_check, time_shift_invariance, uniform_times,
                    verify_cocycle)
from ..pde import (GridSpec, RobinParams, energy_identity_report, energy_identity_residual,
                   energy_trace, eigenmode, gaussian, l2_norm, solve_conjugated, solve_direct)
from ..synthetic import (BumpSpikeConfig, BumpSpikeModel, DiagonalModel, MatrixModel,
                         MatrixModelConfig, SplittingModel, SplittingModelConfig,
                         SplitState, bumpspike_certificate, bumpspike_envelope, bumpspike_norm,
                         perturb_to_chaotic)

__all__ = ["Check", "SUITES", "verify", "halving_ratios", "pde_convergence_study",
           "eigenmode_study", "random_matrix_corpus"]

HALVING = (0.5 * 0.7, 0.5 * 1.3)
IDENTITY_RTOL = 1e-12


@dataclass
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)


def halving_ratios(errors: list[float]) -> list[float]:
    return [errors[i + 1] / errors[i] for i in range(len(errors) - 1)]


def _halves(errors: list[float]) -> bool:
    return all(HALVING[0] <= r <= HALVING[1] for r in halving_ratios(errors))


# ---------------------------------------------------------------------------
# oracle


def _oracle_checks() -> list[Check]:
    cfg = BumpSpikeConfig.default()
    model = BumpSpikeModel(cfg)
    times = np.arange(0.0, cfg.bump_positions[20] - cfg.spike_positions[20] + 1)
    sim = np.array([model.norm(s) for s in model.orbit(model.initial_state(), times)])
    exact = np.array([bumpspike_norm(cfg, int(m)) for m in times])
    rel = float(np.max(np.abs(sim - exact) / exact))
    checks = [Check("bumpspike_norm_matches_simulation", rel <= 1e-12,
                    {"max_rel_err": rel, "through_time": float(times[-1])})]

    peaks = []
    for k, t_k, lower in bumpspike_certificate(cfg)[:21]:
        n2 = bumpspike_norm(cfg, int(round(t_k))) ** 2
        peaks.append(n2 >= 4.0 ** -k * (1 + 8.0 ** k) * (1 - 1e-12) and math.sqrt(n2) >= lower)
    checks.append(Check("crossing_peaks_above_lower_bound", all(peaks), {"crossings": len(peaks)}))

    u0 = model.initial_state()
    long_t = uniform_times(400.0, dt=1.0)
    tr = deviation_trace(model, u0, model.zero(), long_t)
    env = bumpspike_envelope(cfg, tr.values[0])
    gc = check_growth_bound(tr, env, tr.values[0])
    checks.append(Check("growth_envelope_holds", bool(gc), {"M": env.M, "omega": env.omega}))

    split = SplittingModel()
    st = split.default_state()
    horizon = 330.0
    v = classify_trace(deviation_trace(split, st, split.zero(), uniform_times(horizon, dt=1.0)))
    checks.append(Check("splitting_orbit_irregular_at_long_horizon",
                        v.kind is VerdictKind.IRREGULAR_CANDIDATE,
                        {"horizon": horizon, "verdict": str(v.kind),
                         "dip_ratio": v.summary.dip_ratio, "growth_ratio": v.summary.growth_ratio}))

    stable_only = SplitState(np.ones(len(split.config.stable_rates)), split.zero().unstable)
    pert = perturb_to_chaotic(split.config, stable_only, 1e-3)
    gap = split.norm(pert - stable_only)
    checks.append(Check("perturbation_gap", abs(gap - 5e-4) <= 1e-15 + 1e-12 * 5e-4,
                        {"gap": gap}))
    return checks


# ---------------------------------------------------------------------------
# pde


def pde_convergence_study(Ns=(200, 400, 800)) -> dict:
    """Direct vs conjugated relative L2 discrepancy at T for each N."""
    p = RobinParams(1.0, 1.0, 0.5, 0.3)
    u0 = gaussian(1.0, 0.5)
    errs = []
    for N in Ns:
        grid = GridSpec.build(p, 10.0, N, 0.5)
        d = solve_direct(p, grid, u0).fields[-1]
        c = solve_conjugated(p, grid, u0).fields[-1]
        errs.append(l2_norm(d - c, grid.h) / l2_norm(d, grid.h))
    return {"N": list(Ns), "rel_l2": errs, "ratios": halving_ratios(errs)}


def eigenmode_study(Ns=(240, 480, 960, 1920), T: float = 1.0) -> dict:
    """Growth rate fit and energy-identity residual on the boundary mode."""
    p = RobinParams(1.0, 0.0, 0.0, 1.0)
    slopes, plus, minus = [], [], []
    for N in Ns:
        grid = GridSpec.build(p, 12.0, N, T)
        grid = GridSpec(grid.L, grid.N, grid.dt, grid.T, max(1, grid.n_steps // 50))
        run = solve_direct(p, grid, eigenmode(p.kappa))
        E = energy_trace(run)
        slopes.append(float(np.polyfit(E.times, np.log(E.values), 1)[0]))
        rep = energy_identity_report(run)
        plus.append(float(np.max(energy_identity_residual(run, p, grid.h, grid.dt).values)))
        minus.append(rep["max_residual_minus"])
    return {"N": list(Ns), "slope": slopes, "lambda_kappa": 1.0, "residual_plus": plus,
            "residual_minus": minus, "ratios_plus": halving_ratios(plus)}


def _pde_checks() -> list[Check]:
    conv = pde_convergence_study()
    eig = eigenmode_study()
    i480 = eig["N"].index(480)
    slope = eig["slope"][i480]
    return [
        Check("direct_vs_conjugated_within_2pct_at_N400", conv["rel_l2"][1] <= 0.02, conv),
        Check("direct_vs_conjugated_discrepancy_halves", _halves(conv["rel_l2"]), conv),
        Check("eigenmode_growth_rate_within_5pct", abs(slope - 1.0) <= 0.05,
              {"slope": slope, "N": 480}),
        Check("energy_identity_residual_halves", _halves(eig["residual_plus"]), eig),
    ]


# ---------------------------------------------------------------------------
# lemmas


def _exact_models(rng: np.random.Generator):
    lam = -rng.uniform(0.0, 1.0, 4) + 1j * rng.uniform(-2, 2, 4)
    diag = DiagonalModel(lam)
    u0 = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    yield "diagonal", diag, u0, diag.zero(), uniform_times(5.0, n=51)
    A = rng.standard_normal((4, 4)) * 0.5
    mat = MatrixModel(MatrixModelConfig(A))
    yield "matrix", mat, rng.standard_normal(4), np.zeros(4), uniform_times(5.0, n=51)
    bs = BumpSpikeModel(BumpSpikeConfig.default(8))
    yield "bumpspike", bs, bs.initial_state(), bs.zero(), uniform_times(60.0, dt=1.0)
    sp = SplittingModel(SplittingModelConfig(unstable_block=BumpSpikeConfig.default(8)))
    yield "splitting", sp, sp.default_state(), sp.zero(), uniform_times(60.0, dt=1.0)


def _lemma_checks() -> list[Check]:
    rng = np.random.default_rng(20240501)
    checks = []
    for name, model, u0, ref, times in _exact_models(rng):
        scale = max(1.0, model.norm(u0))
        tr = deviation_trace(model, u0, ref, times)
        lr = linear_reduction_check(model, u0, ref, times) / float(np.max(tr.values))
        checks.append(Check(f"linear_reduction_{name}", lr <= IDENTITY_RTOL, {"max_rel": lr}))
        worst = max(scaling_invariance_check(model, u0, ref, lam, times)
                    for lam in (0.1, -0.1, 1.0, -1.0, 10.0, -10.0))
        checks.append(Check(f"scaling_{name}", worst <= IDENTITY_RTOL, {"max_rel": worst}))
        j = len(times) // 3
        shifted = time_shift_invariance(tr, float(times[j]))
        direct = deviation_trace(model, model.evolve(u0, float(times[j])), ref,
                                 times[: len(times) - j])
        ts_err = float(np.max(np.abs(shifted.values - direct.values) /
                              np.maximum(direct.values, 1e-300)))
        checks.append(Check(f"time_shift_{name}", ts_err <= IDENTITY_RTOL, {"max_rel": ts_err}))
        step = getattr(model, "step", None) or 0.25
        t, s = 3 * step, 5 * step
        cc = verify_cocycle(model, u0, t, s)
        tol = IDENTITY_RTOL * max(scale, model.norm(model.evolve(u0, t + s)))
        checks.append(Check(f"cocycle_{name}", cc <= tol, {"discrepancy": cc}))
    viol = 0
    for _ in range(20):
        lam = rng.uniform(-1, 1, 5) + 1j * rng.uniform(-3, 3, 5)
        d = DiagonalModel(lam)
        u0 = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        tr = deviation_trace(d, u0, d.zero(), uniform_times(10.0, n=101))
        viol += not check_growth_bound(tr, d.growth_bound, tr.values[0])
    checks.append(Check("growth_bound_diagonal", viol == 0, {"violations": viol, "models": 20}))
    return checks


# ---------------------------------------------------------------------------
# finite-dimensional models


def random_matrix_corpus(count: int = 100, seed: int = 7, max_dim: int = 8):
    """Seeded random generators (entries uniform in [-2, 2], n <= max_dim) and states."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(1, max_dim + 1))
        yield rng.uniform(-2.0, 2.0, (n, n)), rng.standard_normal(n)


def _finite_dim_checks() -> list[Check]:
    counts: dict[str, int] = {}
    for A, u0 in random_matrix_corpus():
        m = MatrixModel(MatrixModelConfig(A))
        v = classify_trace(deviation_trace(m, u0, m.zero(), uniform_times(50.0, n=1001)))
        counts[str(v.kind)] = counts.get(str(v.kind), 0) + 1
    checks = [Check("no_irregular_matrix_orbit", counts.get("IRREGULAR_CANDIDATE", 0) == 0,
                    {"verdicts": counts})]
    rng = np.random.default_rng(11)
    worst, kinds = 0.0, set()
    for _ in range(20):
        d = DiagonalModel(1j * rng.uniform(-5, 5, 6))
        u0 = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        tr = deviation_trace(d, u0, d.zero(), uniform_times(50.0, n=501))
        worst = max(worst, float(np.max(np.abs(tr.values / tr.values[0] - 1))))
        kinds.add(str(classify_trace(tr).kind))
    checks.append(Check("isometry_constant_and_bounded",
                        worst <= 1e-12 and kinds == {"BOUNDED"},
                        {"max_rel_dev": worst, "verdicts": sorted(kinds)}))
    return checks


# ---------------------------------------------------------------------------
# spectral


def _spectral_checks() -> list[Check]:
    rng = np.random.default_rng(3)
    bad = 0
    for _ in range(1000):
        a, b, g = rng.uniform(0.1, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)
        ind = dsw_indicator(RobinParams(a, b, g, 0.0))
        bad += ind.rho != g - b * b / (4 * a) or ind.eta != -b / (2 * a)
    beta0 = [dsw_indicator(RobinParams(rng.uniform(0.1, 3), 0.0, g, 0.5))
             .region_meets_imaginary_axis for g in np.linspace(-3, 3, 25)]
    neg_gamma = [dsw_indicator(RobinParams(1.0, b, -0.5, 0.5)).scan_hits
                 for b in np.linspace(-3, 3, 13)]
    ex = dsw_indicator(RobinParams(1.0, 2.0, 2.0, 0.3))
    return [
        Check("rho_eta_arithmetic", bad == 0, {"mismatches": bad, "triples": 1000}),
        Check("beta_zero_never_meets_axis", not any(beta0), {"cases": len(beta0)}),
        Check("negative_gamma_scan_empty", not any(neg_gamma), {"cases": len(neg_gamma)}),
        Check("example_rho", ex.rho == 1.0 and ex.rho_positive, {"rho": ex.rho}),
    ]


SUITES: dict[str, Callable[[], list[Check]]] = {
    "oracle": _oracle_checks,
    "pde-convergence": _pde_checks,
    "lemmas": _lemma_checks,
    "finite-dim": _finite_dim_checks,
    "spectral": _spectral_checks,
}


def verify(selector: str = "all") -> dict:
    """Run suites sequentially; ``report["passed"]`` is the overall outcome."""
    names = list(SUITES) if selector == "all" else [selector]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite {unknown[0]!r}; choose from {['all', *SUITES]}")
    report: dict = {"suites": {}}
    for name in names:
        t0 = time.perf_counter()
        checks = SUITES[name]()
        report["suites"][name] = {
            "passed": all(c.passed for c in checks),
            "wall_time_s": round(time.perf_counter() - t0, 3),
            "checks": [asdict(c) for c in checks],
        }
    report["passed"] = all(s["passed"] for s in report["suites"].values())
    return report
