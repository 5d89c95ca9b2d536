"""Self-verification: oracle equivalences (quick) and scaling experiments (full).

Failures are collected in the report, never raised.
"""

from __future__ import annotations

import time
import traceback
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate as _integrate

from . import _fallback, kernels
from .config import ExperimentConfig, InviscidConfig, parse_config
from .experiment import Check, initial_field, run_experiment
from .noise import IncrementSampler, LevyMeasureConfig, measure_density
from .solver import (
    CellField,
    SolverConfig,
    cole_hopf_reference,
    convolution_nonlinear_term,
    integrate,
    inviscid_integrate,
    nonlinear_term,
    step,
)
from .spectral import TWO_PI, FourierField, synthesize, synthesize_array
from .statistics import StatAccumulator, StatRequests, increment_moment, merge

LEVELS = ("quick", "full")


@dataclass
class VerifyReport:
    level: str
    checks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    wall: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            tag = {"pass": "PASS", "fail": "FAIL", "warn": "WARN"}[c.status]
            out.append(f"{tag}  {c.name}: {c.detail}")
        out.extend(f"warning: {w}" for w in self.warnings)
        return out


def _random_field(rng, n, decay=1.0) -> FourierField:
    k = np.arange(1, n + 1)
    c = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / k**decay
    return FourierField(c)


def check_nonlinear_term(tol=1e-12) -> Check:
    u = _random_field(np.random.default_rng(1), 32)
    err = np.max(np.abs(nonlinear_term(u).coeffs - convolution_nonlinear_term(u).coeffs))
    scale = max(1.0, float(np.max(np.abs(convolution_nonlinear_term(u).coeffs))))
    val = float(err / scale)
    return Check("nonlinear_term_vs_convolution", "pass" if val <= tol else "fail", val, tol,
                 f"relative max error {val:.2e} (tol {tol:g}) at N = 32")


def check_cole_hopf(tol=1e-5, nu=0.05, t=0.5, dt=1e-4, max_mode=64) -> Check:
    cfg = SolverConfig(nu=nu, dt=dt, max_mode=max_mode, scheme="etdrk4")
    u0 = initial_field("sine", max_mode)
    ut = integrate(u0, cfg, t)
    ref = cole_hopf_reference(synthesize(u0), nu, t)
    got = synthesize(ut).samples
    val = float(np.max(np.abs(got - ref.samples)) / np.max(np.abs(ref.samples)))
    return Check("solver_vs_cole_hopf", "pass" if val <= tol else "fail", val, tol,
                 f"relative Linf error {val:.2e} (tol {tol:g}), nu = {nu}, t = {t}, dt = {dt}")


def check_parseval(tol=1e-10) -> Check:
    rng = np.random.default_rng(2)
    u = _random_field(rng, 64)
    c = u.coeffs
    power = np.abs(c) ** 2
    e_grid = float(np.mean(synthesize(u).samples ** 2))
    e_modes = float(2.0 * np.sum(power))
    worst = abs(e_grid - e_modes) / e_modes
    k = u.wavenumbers
    for l in (0.013, 0.1, 0.37, 0.5):
        s2 = increment_moment(u, l, 2.0)
        ident = float(2.0 * np.sum(4.0 * np.sin(np.pi * k * l) ** 2 * power))
        worst = max(worst, abs(s2 - ident) / ident)
    return Check("parseval_and_s2_identity", "pass" if worst <= tol else "fail", worst, tol,
                 f"worst relative deviation {worst:.2e} (tol {tol:g})")


def check_heat_decay(tol=1e-14) -> Check:
    cfg = SolverConfig(nu=0.1, dt=0.01, max_mode=4, enable_nonlinearity=False)
    c = np.zeros(4, dtype=complex)
    c[0] = 1.0
    out = step(FourierField(c), cfg).coeffs[0]
    exact = np.exp(-4.0 * np.pi**2 * 0.001)
    val = float(abs(out - exact))
    return Check("heat_decay_factor", "pass" if val <= tol else "fail", val, tol,
                 f"|factor - exp(-4 pi^2 nu dt)| = {val:.1e} (tol {tol:g})")


def levy_moment_oracle(m: LevyMeasureConfig, order: int) -> float:
    """``int y**order mu(dy)`` over the whole measure by adaptive quadrature."""
    f = lambda y: y**order * measure_density(y, m)
    pts = [m.small_jump_cutoff, m.inner_radius]
    val, _ = _integrate.quad(f, 0.0, m.outer_radius, points=pts, limit=400, epsabs=0.0, epsrel=1e-11)
    return 2.0 * val


def check_levy_moments(samples=1_000_000, dt=0.01, alpha=1.5, delta=0.1, seed=3) -> list[Check]:
    m = LevyMeasureConfig(alpha=alpha, small_jump_cutoff=delta)
    x = IncrementSampler(m, dt).sample(np.random.default_rng(seed), samples)
    m2 = dt * levy_moment_oracle(m, 2)
    m4 = dt * levy_moment_oracle(m, 4) + 3.0 * m2**2
    out = []
    se = x.std() / np.sqrt(samples)
    z = abs(x.mean()) / se
    out.append(Check("levy_increment_mean", "pass" if z <= 4 else "fail", float(z), 4.0,
                     f"mean {x.mean():.3e}, {z:.2f} standard errors from 0"))
    x2 = x * x
    z = abs(x2.mean() - m2) / (x2.std() / np.sqrt(samples))
    out.append(Check("levy_increment_variance", "pass" if z <= 4 else "fail", float(z), 4.0,
                     f"variance {x2.mean():.5g} vs {m2:.5g}, {z:.2f} standard errors"))
    x4 = x2 * x2
    z = abs(x4.mean() - m4) / (x4.std() / np.sqrt(samples))
    out.append(Check("levy_increment_fourth_moment", "pass" if z <= 5 else "fail", float(z), 5.0,
                     f"fourth moment {x4.mean():.5g} vs {m4:.5g}, {z:.2f} standard errors"))
    return out


def check_merge(tol=1e-12) -> Check:
    rng = np.random.default_rng(4)
    req = StatRequests(l_values=(0.01, 0.1, 0.5))
    snaps = [(_random_field(rng, 32, 1.5), 1.0 + 0.1 * i) for i in range(12)]
    whole = StatAccumulator.empty(req, 32)
    for u, t in snaps:
        whole.add(u, t)
    halves = [StatAccumulator.empty(req, 32) for _ in range(2)]
    quarters = [StatAccumulator.empty(req, 32) for _ in range(4)]
    for i, (u, t) in enumerate(snaps):
        halves[i // 6].add(u, t)
        quarters[i // 3].add(u, t)
    a = merge(halves[0], halves[1])
    q = quarters
    b = merge(merge(q[0], q[1]), merge(q[2], q[3]))
    c = merge(q[3], merge(q[2], merge(q[1], q[0])))

    def dev(x, y):
        worst = 0.0
        for name in ("mode_power", "increments", "sobolev", "oleinik_max"):
            p, r = getattr(x, name), getattr(y, name)
            worst = max(worst, float(np.max(np.abs(p - r) / np.maximum(1.0, np.abs(r)))))
        return worst if x.count == y.count and x.oleinik_records == y.oleinik_records else np.inf

    val = max(dev(a, whole), dev(b, whole), dev(c, b))
    return Check("accumulator_merge", "pass" if val <= tol else "fail", val, tol,
                 f"worst relative deviation {val:.1e} (tol {tol:g})")


def check_backends(tol=1e-12) -> Check:
    rng = np.random.default_rng(5)
    v = rng.standard_normal(512)
    d = rng.standard_normal((3, 256))
    p = np.array([0.5, 1.0, 2.0, 3.0, 1.7])
    e1 = np.max(np.abs(kernels.godunov_update(v, 0.3) - _fallback.godunov_update(v, 0.3)))
    e2 = np.max(np.abs(kernels.increment_power_means(d, p) - _fallback.increment_power_means(d, p)))
    val = float(max(e1, e2))
    return Check("kernel_backends_agree", "pass" if val <= tol else "fail", val, tol,
                 f"{kernels.BACKEND} vs numpy fallback, max deviation {val:.1e}")


def check_shock_speed(tol=2e-3) -> Check:
    g = 400
    x = (np.arange(g) + 0.5) / g
    u0 = CellField(np.where(x < 0.5, 1.0, 0.0))
    # 1 | 0 jump at x = 1/2 is a shock moving at speed 1/2; the rarefaction
    # from x = 0 stays left of 0.45 until t = 0.45, so the mass right of 0.45
    # locates the shock
    t = 0.4
    ut = inviscid_integrate(u0, None, t, cfl=0.9)
    front = 0.45 + float(np.sum(ut.values[x > 0.45])) / g
    expected = 0.5 + 0.5 * t
    val = abs(front - expected)
    return Check("godunov_shock_speed", "pass" if val <= tol else "fail", float(val), tol,
                 f"shock at {front:.5f}, exact {expected:.5f}")


def inviscid_l1_gap(nu: float, t: float = 1.0, cells: int = 4096) -> float:
    """L1 distance at time ``t`` between the viscous and entropy solutions from sin(2 pi x)."""
    from .solver import default_max_mode

    n = max(default_max_mode(nu), 64)
    cfg = SolverConfig(nu=nu, max_mode=n)
    # modes beyond the cell grid's reach are far inside the dissipation range
    ut = integrate(initial_field("sine", n), cfg, t).truncate(min(n, (cells - 2) // 2))
    phase = np.exp(1j * np.pi * ut.wavenumbers / cells)
    visc = synthesize_array(ut.coeffs * phase, cells)
    ent = inviscid_integrate(CellField.from_function(lambda x: np.sin(TWO_PI * x), cells), None, t, cfl=0.9)
    return float(np.mean(np.abs(visc - ent.values)))


def check_inviscid_convergence() -> Check:
    fine, coarse = inviscid_l1_gap(1e-3), inviscid_l1_gap(4e-3)
    ok = fine < coarse
    return Check("inviscid_convergence", "pass" if ok else "fail", {"nu=1e-3": fine, "nu=4e-3": coarse},
                 "fine < coarse", f"L1 gap {fine:.3e} at nu = 1e-3 vs {coarse:.3e} at nu = 4e-3")


QUICK_CHECKS = (
    check_nonlinear_term,
    check_cole_hopf,
    check_parseval,
    check_heat_decay,
    check_levy_moments,
    check_merge,
    check_backends,
    check_shock_speed,
)


def _run(fn, name) -> list[Check]:
    try:
        out = fn()
    except Exception as exc:  # a crash in one check must not hide the others
        return [Check(name, "fail", None, None, f"raised {type(exc).__name__}: {exc}\n{traceback.format_exc()}")]
    return out if isinstance(out, list) else [out]


def verify_suite(
    level: str = "quick",
    *,
    ensemble_size: int | None = None,
    config: ExperimentConfig | None = None,
    out_dir=None,
    threads: int | None = None,
) -> VerifyReport:
    """Run the oracle checks; ``level="full"`` adds the scaling experiments.

    ``ensemble_size`` overrides the ensemble of the full run; ensembles that
    are too small turn scaling-law failures into warnings.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    start = time.perf_counter()
    report = VerifyReport(level)
    for fn in QUICK_CHECKS:
        report.checks.extend(_run(fn, fn.__name__.removeprefix("check_")))
    if level == "full":
        report.checks.extend(_run(check_inviscid_convergence, "inviscid_convergence"))
        cfg = config or parse_config("")
        cfg = replace(cfg, inviscid=InviscidConfig(enabled=True, cells=cfg.inviscid.cells, cfl=cfg.inviscid.cfl))
        if ensemble_size is not None:
            cfg = replace(cfg, window=replace(cfg.window, ensemble_size=ensemble_size))
        try:
            run = run_experiment(cfg, threads=threads, out_dir=out_dir, write=out_dir is not None)
        except Exception as exc:
            report.checks.append(Check("scaling_experiment", "fail", None, None, f"raised {exc}"))
        else:
            for c in run.checks:
                report.checks.append(replace(c, detail=c.detail or f"value {c.value}, bounds {c.bounds}"))
            report.warnings.extend(run.warnings)
    report.wall = time.perf_counter() - start
    return report
