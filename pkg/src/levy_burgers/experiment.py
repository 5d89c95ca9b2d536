"""Ensemble runs over a viscosity sweep, result files and scaling checks.

Each trajectory is an independent task ``(config, seed, trajectory id)``
that returns a :class:`~levy_burgers.statistics.StatAccumulator`. Tasks may
run in a process pool; the orchestrator merges the returned accumulators in
trajectory-id order, so results do not depend on the worker count.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import BlowUpError, BurgersError, FitError, StepSizeError
from .noise import CylindricalNoiseConfig
from .solver import CellField, SolverConfig, auto_dt, integrate, inviscid_integrate
from .spectral import FourierField
from .statistics import (
    AveragingWindow,
    ScalingFit,
    SpectrumConfig,
    StatAccumulator,
    StatRequests,
    energy_spectrum,
    fit_power_law,
    merge_all,
    sobolev_moment,
    structure_function,
)

log = logging.getLogger(__name__)

MIN_RELIABLE_ENSEMBLE = 4

# acceptance bounds used by the report checks
SPECTRUM_SLOPE = (-2.3, -1.7)
SPECTRUM_R2 = 0.95
ZETA_BOUNDS = {0.5: (0.4, 0.6), 1.0: (0.85, 1.15), 2.0: (0.8, 1.2), 3.0: (0.75, 1.25)}
DISSIPATION_SLOPE = (1.7, 2.3)
ENERGY_DISSIPATION_SLOPE = (-1.25, -0.75)
SOBOLEV2_SLOPE = (-3.6, -2.4)
ORDER_ONE_FACTOR = 3.0
OLEINIK_FACTOR = 2.0


def fmt(x) -> str:
    """17 significant digits, the precision of every output file."""
    return f"{float(x):.17g}"


def initial_field(kind: str, max_mode: int) -> FourierField:
    if kind == "zero":
        return FourierField.zeros(max_mode)
    if kind == "sine":
        sin = np.zeros(max_mode)
        sin[0] = 1.0 / np.sqrt(2.0)
        return FourierField.from_real_basis(np.zeros(max_mode), sin)
    raise ValueError(f"unknown initial condition {kind!r}")


class WindowSampler:
    """Observer that adds snapshots on the time grid ``T + j * interval``.

    It is called after every solver step and keeps the first state at or
    after each grid time, so the sampling density in time does not depend on
    the (state-dependent) step size.
    """

    def __init__(self, acc: StatAccumulator, window: AveragingWindow, interval: float, to_fourier=None):
        self.acc = acc
        self.window = window
        self.interval = interval
        self.next_t = window.burn_in
        self.to_fourier = to_fourier

    def __call__(self, t, u, n):
        if t < self.next_t - 1e-12 or not self.window.contains(t):
            return
        f = self.to_fourier(u) if self.to_fourier is not None else u
        self.acc.add(f, t)
        while self.next_t <= t + 1e-12:
            self.next_t += self.interval


@dataclass(frozen=True)
class TrajectoryTask:
    solver: SolverConfig | None
    window: AveragingWindow
    requests: StatRequests
    t_end: float
    seed: int
    trajectory: int
    initial: str = "zero"
    dump_dir: str | None = None
    # inviscid runs: solver is None and these are used instead
    noise: CylindricalNoiseConfig | None = None
    cells: int = 0
    cfl: float = 0.5


@dataclass
class TrajectoryResult:
    trajectory: int
    accumulator: StatAccumulator | None
    steps: int
    wall: float
    error: str | None = None


def inviscid_modes(cells: int) -> int:
    return (cells - 2) // 2


def run_trajectory(task: TrajectoryTask) -> TrajectoryResult:
    start = time.perf_counter()
    if task.solver is not None:
        return _run_viscous(task, start)
    return _run_inviscid(task, start)


def _run_viscous(task: TrajectoryTask, start: float) -> TrajectoryResult:
    from .solver import IntegrationInfo

    cfg = task.solver
    nominal = cfg.dt if cfg.dt is not None else auto_dt(cfg, 1.0)
    acc = StatAccumulator.empty(task.requests, cfg.max_mode)
    sampler = WindowSampler(acc, task.window, task.window.sample_stride * nominal)
    info = IntegrationInfo()
    u0 = initial_field(task.initial, cfg.max_mode)
    try:
        integrate(
            u0,
            cfg,
            task.t_end,
            [sampler],
            seed=task.seed,
            trajectory=task.trajectory,
            info=info,
            dump_dir=task.dump_dir,
        )
    except (BlowUpError, StepSizeError) as exc:
        log.warning("trajectory %d failed: %s", task.trajectory, exc)
        return TrajectoryResult(task.trajectory, None, info.steps, time.perf_counter() - start, str(exc))
    return TrajectoryResult(task.trajectory, acc, info.steps, time.perf_counter() - start)


def _run_inviscid(task: TrajectoryTask, start: float) -> TrajectoryResult:
    from .solver import IntegrationInfo

    g = task.cells
    n = inviscid_modes(g)
    acc = StatAccumulator.empty(task.requests, n)
    nominal = task.cfl / g
    sampler = WindowSampler(acc, task.window, task.window.sample_stride * nominal, lambda c: c.to_fourier(n))
    info = IntegrationInfo()
    if task.initial == "sine":
        u0 = CellField.from_function(lambda x: np.sin(2 * np.pi * x), g)
    else:
        u0 = CellField(np.zeros(g))
    try:
        inviscid_integrate(
            u0,
            task.noise,
            task.t_end,
            [sampler],
            seed=task.seed,
            trajectory=task.trajectory,
            cfl=task.cfl,
            info=info,
        )
    except BlowUpError as exc:
        return TrajectoryResult(task.trajectory, None, info.steps, time.perf_counter() - start, str(exc))
    return TrajectoryResult(task.trajectory, acc, info.steps, time.perf_counter() - start)


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: ``BURG_THREADS`` wins over the argument; default 1."""
    env = os.environ.get("BURG_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            raise ValueError(f"BURG_THREADS must be an integer, got {env!r}")
    threads = 1 if threads is None else int(threads)
    if threads < 1:
        raise ValueError("thread count must be positive")
    return threads


def run_ensemble(tasks, threads: int = 1) -> list[TrajectoryResult]:
    tasks = list(tasks)
    if threads <= 1 or len(tasks) <= 1:
        results = [run_trajectory(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
            results = list(pool.map(run_trajectory, tasks))
    return sorted(results, key=lambda r: r.trajectory)


# --- report -----------------------------------------------------------------


@dataclass
class Check:
    name: str
    status: str  # "pass", "fail" or "warn"
    value: object
    bounds: object
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "value": self.value, "bounds": self.bounds, "detail": self.detail}


@dataclass
class FitBand:
    fit: ScalingFit
    jackknife_stderr: float = float("nan")

    def band(self, width: float = 2.0) -> tuple[float, float]:
        s = self.jackknife_stderr
        if not np.isfinite(s):
            return (float("nan"), float("nan"))
        return (self.fit.slope - width * s, self.fit.slope + width * s)

    def as_dict(self) -> dict:
        d = self.fit.as_dict()
        d["jackknife_stderr"] = self.jackknife_stderr
        d["band"] = list(self.band())
        return d


@dataclass
class PointResult:
    """Statistics of one sweep point."""

    nu: float
    max_mode: int
    survivors: int
    failures: list
    steps: list
    wall: float
    spectrum: list  # (n, E_n)
    structure: list  # (p, l, S_p)
    moments: list  # (n, k, value)
    oleinik_sup: tuple
    oleinik_records: list
    fits: dict = field(default_factory=dict)
    label: str = ""

    def moment(self, n: float, k: float = 2.0) -> float:
        for nn, kk, v in self.moments:
            if nn == n and kk == k:
                return v
        raise KeyError((n, k))

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "nu": self.nu,
            "max_mode": self.max_mode,
            "survivors": self.survivors,
            "failures": self.failures,
            "steps": self.steps,
            "oleinik_sup": {"u_inf": self.oleinik_sup[0], "du_l1": self.oleinik_sup[1], "du_plus": self.oleinik_sup[2]},
            "fits": {k: v.as_dict() for k, v in self.fits.items()},
        }


@dataclass
class RunReport:
    config_hash: str
    points: list = field(default_factory=list)
    inviscid: PointResult | None = None
    sweep_fits: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    wall: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def all_points(self) -> list:
        return list(self.points) + ([self.inviscid] if self.inviscid is not None else [])

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "version": __version__,
            "config_hash": self.config_hash,
            "points": [p.as_dict() for p in self.points],
            "inviscid": None if self.inviscid is None else self.inviscid.as_dict(),
            "sweep_fits": {k: v.as_dict() for k, v in self.sweep_fits.items()},
            "checks": [c.as_dict() for c in self.checks],
            "warnings": list(self.warnings),
        }


class EnsembleFailure(BurgersError):
    """Fewer than half of the trajectories at a sweep point survived."""


# --- statistics tables -------------------------------------------------------


def spectrum_modes(max_mode: int, spec: SpectrumConfig) -> list[int]:
    n = 1
    out = []
    while spec.layer(n)[1] <= max_mode:
        out.append(n)
        n += 1
    return out


def _spectrum_fit(acc, spec, rng) -> ScalingFit:
    ns = [n for n in spectrum_modes(acc.max_mode, spec) if rng[0] <= n <= rng[1]]
    return fit_power_law([(n, energy_spectrum(acc, n, spec)) for n in ns], rng)


def _structure_fit(acc, p, rng) -> ScalingFit:
    ls = [l for l in acc.requests.l_values if rng[0] * (1 - 1e-12) <= l <= rng[1] * (1 + 1e-12)]
    return fit_power_law([(l, structure_function(acc, p, l)) for l in ls], rng)


def _jackknife(accs, fitter) -> float:
    """Leave-one-trajectory-out standard error of a fitted slope."""
    if len(accs) < 2:
        return float("nan")
    slopes = []
    for i in range(len(accs)):
        rest = merge_all(accs[:i] + accs[i + 1 :])
        try:
            slopes.append(fitter(rest).slope)
        except (FitError, BurgersError):
            return float("nan")
    s = np.asarray(slopes)
    r = len(s)
    return float(np.sqrt((r - 1) / r * np.sum((s - s.mean()) ** 2)))


def _point_fits(accs, merged, cfg: ExperimentConfig, nu: float, spectrum_only: bool) -> dict:
    fits = {}
    fitters = {}
    spec = cfg.spectrum
    srange = (cfg.fits.spectrum.lo, cfg.fits.spectrum.hi)
    fitters["spectrum"] = lambda a: _spectrum_fit(a, spec, srange)
    if not spectrum_only:
        inertial = cfg.fits.inertial.resolve(nu)
        dissipation = cfg.fits.dissipation.resolve(nu)
        for p in merged.requests.p_values:
            fitters[f"zeta_{p:g}"] = lambda a, p=p: _structure_fit(a, p, inertial)
        if 2.0 in merged.requests.p_values:
            fitters["dissipation_S2"] = lambda a: _structure_fit(a, 2.0, dissipation)
    for name, fitter in fitters.items():
        try:
            fit = fitter(merged)
        except FitError as exc:
            log.warning("fit %s at nu=%g skipped: %s", name, nu, exc)
            continue
        fits[name] = FitBand(fit, _jackknife(accs, fitter))
    return fits


def summarize_point(label, nu, max_mode, results, cfg, spectrum_only=False) -> PointResult:
    ok = [r for r in results if r.accumulator is not None]
    failures = [{"trajectory": r.trajectory, "error": r.error} for r in results if r.accumulator is None]
    if len(ok) * 2 < len(results) or not ok:
        raise EnsembleFailure(f"{label}: only {len(ok)} of {len(results)} trajectories survived")
    accs = [r.accumulator for r in ok]
    merged = merge_all(accs)
    req = merged.requests
    spectrum = [(n, energy_spectrum(merged, n, cfg.spectrum)) for n in spectrum_modes(max_mode, cfg.spectrum)]
    structure = [(p, l, structure_function(merged, p, l)) for p in req.p_values for l in req.l_values]
    moments = [(n, k, sobolev_moment(merged, n, k)) for n, k in req.sobolev]
    point = PointResult(
        nu=nu,
        max_mode=max_mode,
        survivors=len(ok),
        failures=failures,
        steps=[r.steps for r in results],
        wall=sum(r.wall for r in results),
        spectrum=spectrum,
        structure=structure,
        moments=moments,
        oleinik_sup=tuple(float(x) for x in merged.oleinik_max),
        oleinik_records=list(merged.oleinik_records),
        label=label,
    )
    point.fits = _point_fits(accs, merged, cfg, nu, spectrum_only)
    return point


# --- output files ------------------------------------------------------------


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header] + [",".join(fmt(x) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _dump_json(path: Path, data) -> None:
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, str)) or x is None:
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        # 17 significant digits; non-finite values become null
        return float(fmt(x)) if math.isfinite(x) else None
    return str(x)


def write_point(point: PointResult, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    _write_csv(directory / "spectrum.csv", "n,E_n", point.spectrum)
    _write_csv(directory / "structure.csv", "p,l,S_p", point.structure)
    _write_csv(directory / "moments.csv", "n,k,value", point.moments)
    _write_csv(directory / "oleinik.csv", "t,u_inf,du_l1,du_plus", point.oleinik_records)
    _dump_json(directory / "fits.json", {k: v.as_dict() for k, v in point.fits.items()})


def point_dir(out_dir: Path, point_label: str) -> Path:
    return out_dir / point_label


# --- checks -------------------------------------------------------------------


def _within(x, lo, hi) -> bool:
    return x is not None and np.isfinite(x) and lo <= x <= hi


def _status(ok: bool, reliable: bool) -> str:
    if ok:
        return "pass"
    return "fail" if reliable else "warn"


def evaluate_checks(report: RunReport, cfg: ExperimentConfig) -> None:
    """Compare fitted exponents with the theoretical laws.

    Checks that need a larger ensemble than was run are downgraded from
    failures to warnings.
    """
    reliable = cfg.window.ensemble_size >= MIN_RELIABLE_ENSEMBLE
    if not reliable:
        report.warnings.append(
            f"insufficient statistics: ensemble size {cfg.window.ensemble_size} < {MIN_RELIABLE_ENSEMBLE}; "
            "scaling checks are advisory"
        )
    checks = report.checks
    if report.points:
        finest = min(report.points, key=lambda p: p.nu)
        fb = finest.fits.get("spectrum")
        if fb is not None:
            ok = _within(fb.fit.slope, *SPECTRUM_SLOPE) and fb.fit.r_squared >= SPECTRUM_R2
            checks.append(
                Check("spectral_power_law", _status(ok, reliable), {"slope": fb.fit.slope, "r2": fb.fit.r_squared},
                      {"slope": SPECTRUM_SLOPE, "r2_min": SPECTRUM_R2}, f"nu = {finest.nu:g}")
            )
        for p, bounds in ZETA_BOUNDS.items():
            fb = finest.fits.get(f"zeta_{p:g}")
            if fb is not None:
                checks.append(
                    Check(f"structure_zeta_{p:g}", _status(_within(fb.fit.slope, *bounds), reliable),
                          fb.fit.slope, bounds, f"nu = {finest.nu:g}")
                )
        fb = finest.fits.get("dissipation_S2")
        if fb is not None:
            checks.append(
                Check("dissipation_S2", _status(_within(fb.fit.slope, *DISSIPATION_SLOPE), reliable),
                      fb.fit.slope, DISSIPATION_SLOPE, f"nu = {finest.nu:g}")
            )
    for name, key, bounds in (
        ("energy_dissipation", "moment_1_2", ENERGY_DISSIPATION_SLOPE),
        ("sobolev_2", "moment_2_2", SOBOLEV2_SLOPE),
    ):
        fb = report.sweep_fits.get(key)
        if fb is not None:
            checks.append(Check(name, _status(_within(fb.fit.slope, *bounds), reliable), fb.fit.slope, bounds))
    if len(report.points) >= 2:
        try:
            energies = [p.moment(0.0, 2.0) for p in report.points]
        except KeyError:
            energies = []
        if energies:
            ratio = max(energies) / min(energies) if min(energies) > 0 else float("inf")
            checks.append(Check("order_one_energy", _status(ratio < ORDER_ONE_FACTOR, reliable), ratio,
                                [0, ORDER_ONE_FACTOR]))
        pts = sorted(report.points, key=lambda p: -p.nu)
        ratios = []
        for a, b in zip(pts, pts[1:]):
            if abs(b.nu / a.nu - 0.5) < 1e-9:
                ratios.append(b.oleinik_sup[2] / a.oleinik_sup[2] if a.oleinik_sup[2] > 0 else float("inf"))
        if ratios:
            worst = max(max(r, 1.0 / r) if r > 0 else float("inf") for r in ratios)
            detail = "bounds t|u|_inf <= {:.4g}, t|u_x|_1 <= {:.4g}".format(
                max(p.oleinik_sup[0] for p in pts), max(p.oleinik_sup[1] for p in pts)
            )
            checks.append(Check("oleinik_stability", _status(worst < OLEINIK_FACTOR, reliable), worst,
                                [1.0 / OLEINIK_FACTOR, OLEINIK_FACTOR], detail))
    if report.inviscid is not None:
        fb = report.inviscid.fits.get("spectrum")
        if fb is not None:
            checks.append(Check("inviscid_spectrum", _status(_within(fb.fit.slope, *SPECTRUM_SLOPE), reliable),
                                fb.fit.slope, SPECTRUM_SLOPE))


def _sweep_fits(points, requests) -> dict:
    fits = {}
    if len(points) < 3:
        return fits
    for n, k in requests.sobolev:
        pts = [(p.nu, p.moment(n, k)) for p in points]
        try:
            fits[f"moment_{n:g}_{k:g}"] = FitBand(fit_power_law(pts))
        except FitError as exc:
            log.warning("sweep fit for moment (%g, %g) skipped: %s", n, k, exc)
    return fits


# --- driver -------------------------------------------------------------------


def _label(nu: float) -> str:
    return f"nu_{nu:g}"


def run_experiment(
    cfg: ExperimentConfig,
    *,
    threads: int | None = None,
    out_dir: str | Path | None = None,
    write: bool = True,
) -> RunReport:
    """Run every sweep point (and the inviscid run if enabled).

    Results of each point are written as soon as it completes, so a later
    failure does not lose finished points.

    Raises
    ------
    EnsembleFailure
        When fewer than half of a point's trajectories survive.
    """
    threads = resolve_threads(threads)
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    start = time.perf_counter()
    report = RunReport(cfg.config_hash())
    if write:
        out.mkdir(parents=True, exist_ok=True)
        _dump_json(out / "config.json", cfg.as_dict(include_output=False))
    r = cfg.window.ensemble_size
    for nu in cfg.sweep:
        scfg = cfg.solver_for(nu)
        label = _label(nu)
        log.info("%s: N = %d, %d trajectories", label, scfg.max_mode, r)
        dump = str(point_dir(out, label)) if write else None
        tasks = [
            TrajectoryTask(scfg, cfg.window, cfg.requests, cfg.t_end, cfg.seed, i, cfg.initial, dump)
            for i in range(r)
        ]
        results = run_ensemble(tasks, threads)
        point = summarize_point(label, nu, scfg.max_mode, results, cfg)
        report.points.append(point)
        for f in point.failures:
            report.warnings.append(f"{label}: trajectory {f['trajectory']} failed: {f['error']}")
        if write:
            write_point(point, point_dir(out, label))
    if cfg.inviscid.enabled:
        g = cfg.inviscid.cells
        n = inviscid_modes(g)
        req = StatRequests(p_values=cfg.requests.p_values, l_values=(), sobolev=((0.0, 2.0),))
        noise = cfg.noise.with_modes(n)
        tasks = [
            TrajectoryTask(None, cfg.window, req, cfg.t_end, cfg.seed, i, cfg.initial,
                           noise=noise, cells=g, cfl=cfg.inviscid.cfl)
            for i in range(r)
        ]
        results = run_ensemble(tasks, threads)
        report.inviscid = summarize_point("inviscid", 0.0, n, results, cfg, spectrum_only=True)
        if write:
            write_point(report.inviscid, point_dir(out, "inviscid"))
    report.sweep_fits = _sweep_fits(report.points, cfg.requests)
    evaluate_checks(report, cfg)
    report.wall = time.perf_counter() - start
    if write:
        _dump_json(out / "report.json", report.as_dict())
        # timings vary between runs; kept apart so the report is reproducible
        _dump_json(
            out / "timing.json",
            {
                "wall_seconds": report.wall,
                "points": {p.label: {"wall_seconds": p.wall, "steps": p.steps} for p in report.all_points()},
            },
        )
    return report
