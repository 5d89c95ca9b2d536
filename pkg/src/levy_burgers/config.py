"""Experiment configuration: a sectioned TOML document.

Sections are ``[solver]``, ``[noise]``, ``[averaging]``, ``[statistics]``,
``[sweep]``, ``[inviscid]`` and ``[output]``. Keys written before the first
section header are looked up by name across the sections, so the one-line
document ``nu = 0.002`` is a complete config. Every value has a default.

Fit ranges are written ``"lo:hi"``; an endpoint may carry a ``nu`` suffix
(``"10nu:0.1"``) to scale with the viscosity of each sweep point.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import tomli

from .errors import ConfigError
from .noise import CylindricalNoiseConfig, LevyMeasureConfig
from .solver import SCHEMES, SolverConfig, default_max_mode
from .statistics import AveragingWindow, SpectrumConfig, StatRequests

DEFAULT_SWEEP = (8e-3, 4e-3, 2e-3)
INITIAL_CONDITIONS = ("zero", "sine")


def default_l_values() -> tuple:
    """36 log-spaced increment lengths from 1e-4 to 0.5 (6 significant digits)."""
    return tuple(float(f"{x:.6g}") for x in np.geomspace(1e-4, 0.5, 36))


@dataclass(frozen=True)
class ScaleRange:
    """Closed interval whose endpoints may be multiples of ``nu``."""

    lo: float
    hi: float
    lo_nu: bool = False
    hi_nu: bool = False

    _END = re.compile(r"^\s*([0-9.eE+-]+)\s*(nu)?\s*$")

    @classmethod
    def parse(cls, text: str) -> ScaleRange:
        parts = str(text).split(":")
        if len(parts) != 2:
            raise ValueError(f"range {text!r} must look like 'lo:hi'")
        ends = []
        for p in parts:
            m = cls._END.match(p)
            if not m:
                raise ValueError(f"bad range endpoint {p!r}")
            ends.append((float(m.group(1)), m.group(2) is not None))
        (lo, lo_nu), (hi, hi_nu) = ends
        if lo <= 0 or hi <= 0:
            raise ValueError("range endpoints must be positive")
        return cls(lo, hi, lo_nu, hi_nu)

    def resolve(self, nu: float) -> tuple[float, float]:
        lo = self.lo * nu if self.lo_nu else self.lo
        hi = self.hi * nu if self.hi_nu else self.hi
        if lo >= hi:
            raise ValueError(f"empty range [{lo}, {hi}] at nu = {nu}")
        return lo, hi

    def __str__(self) -> str:
        fmt = lambda v, s: f"{v:g}nu" if s else f"{v:g}"
        return f"{fmt(self.lo, self.lo_nu)}:{fmt(self.hi, self.hi_nu)}"


@dataclass(frozen=True)
class FitRanges:
    spectrum: ScaleRange = ScaleRange(4.0, 80.0)
    inertial: ScaleRange = ScaleRange(10.0, 0.1, lo_nu=True)
    dissipation: ScaleRange = ScaleRange(0.1, 1.0, lo_nu=True, hi_nu=True)


@dataclass(frozen=True)
class InviscidConfig:
    enabled: bool = False
    cells: int = 2048
    cfl: float = 0.5


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved experiment.

    ``solver`` carries the first sweep point; :meth:`solver_for` builds the
    config for any other viscosity (with the automatic resolution unless
    ``max_mode`` was fixed).
    """

    solver: SolverConfig = field(default_factory=lambda: SolverConfig(nu=DEFAULT_SWEEP[0]))
    noise: CylindricalNoiseConfig = field(default_factory=CylindricalNoiseConfig)
    window: AveragingWindow = field(default_factory=AveragingWindow)
    requests: StatRequests = field(default_factory=lambda: StatRequests(l_values=default_l_values()))
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    fits: FitRanges = field(default_factory=FitRanges)
    sweep: tuple = DEFAULT_SWEEP
    auto_modes: bool = True
    t_end: float = 6.0
    initial: str = "zero"
    inviscid: InviscidConfig = field(default_factory=InviscidConfig)
    seed: int = 0
    out_dir: str = "runs"

    def modes_for(self, nu: float) -> int:
        return default_max_mode(nu) if self.auto_modes else self.solver.max_mode

    def solver_for(self, nu: float) -> SolverConfig:
        n = self.modes_for(nu)
        return replace(self.solver, nu=nu, max_mode=n, grid_size=None, noise=self.noise.with_modes(n))

    def as_dict(self, include_output: bool = True) -> dict:
        """Nested plain-data view; ``include_output=False`` drops the output location."""
        d = {
            "solver": {
                "nu": self.solver.nu,
                "dt": "auto" if self.solver.dt is None else self.solver.dt,
                "max_mode": "auto" if self.auto_modes else self.solver.max_mode,
                "t_end": self.t_end,
                "scheme": self.solver.scheme,
                "cfl_safety": self.solver.cfl_safety,
                "initial": self.initial,
            },
            "noise": {
                "alpha": self.noise.measure.alpha,
                "gamma0": self.noise.gamma0,
                "amplitude": self.noise.amplitude,
                "small_jump_cutoff": self.noise.measure.small_jump_cutoff,
                "intensity_scale": self.noise.measure.intensity_scale,
                "seed": self.seed,
            },
            "averaging": asdict(self.window),
            "statistics": {
                "p_values": list(self.requests.p_values),
                "l_values": list(self.requests.l_values),
                "sobolev": [list(x) for x in self.requests.sobolev],
                "layer_width": self.spectrum.layer_width,
                "spectrum_range": str(self.fits.spectrum),
                "inertial_range": str(self.fits.inertial),
                "dissipation_range": str(self.fits.dissipation),
            },
            "sweep": {"nu": list(self.sweep)},
            "inviscid": asdict(self.inviscid),
        }
        if include_output:
            d["output"] = {"out_dir": self.out_dir}
        return d

    def config_hash(self) -> str:
        # where results go does not change them
        text = json.dumps(self.as_dict(include_output=False), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


# --- parsing --------------------------------------------------------------

_SCHEMA = {
    "solver": {"nu", "dt", "max_mode", "t_end", "scheme", "cfl_safety", "initial"},
    "noise": {"alpha", "gamma0", "amplitude", "small_jump_cutoff", "intensity_scale", "seed"},
    "averaging": {"burn_in", "sigma", "sample_stride", "ensemble_size"},
    "statistics": {
        "p_values",
        "l_values",
        "sobolev_orders",
        "moment_powers",
        "layer_width",
        "spectrum_range",
        "inertial_range",
        "dissipation_range",
    },
    "sweep": {"nu"},
    "inviscid": {"enabled", "cells", "cfl"},
    "output": {"out_dir"},
}


def _owner(key: str) -> str:
    owners = [s for s, keys in _SCHEMA.items() if key in keys]
    if not owners:
        raise ConfigError(f"unknown key {key!r}")
    # a bare "nu" means the solver viscosity, not a sweep list
    return "solver" if "solver" in owners else owners[0]


def _split_sections(doc: dict) -> dict:
    out = {s: {} for s in _SCHEMA}
    for key, val in doc.items():
        if isinstance(val, dict):
            if key not in _SCHEMA:
                raise ConfigError(f"unknown section [{key}]")
            for k, v in val.items():
                if k not in _SCHEMA[key]:
                    raise ConfigError(f"[{key}] unknown key {k!r}")
                if k in out[key]:
                    raise ConfigError(f"[{key}] {k} given twice")
                out[key][k] = v
        else:
            sec = _owner(key)
            if key in out[sec]:
                raise ConfigError(f"[{sec}] {key} given twice")
            out[sec][key] = val
    return out


def _num(sec, key, val, kind=float):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"[{sec}] {key}: expected a number, got {val!r}")
    if kind is int:
        if int(val) != val:
            raise ConfigError(f"[{sec}] {key}: expected an integer, got {val!r}")
        return int(val)
    return float(val)


def _float_list(sec, key, val):
    vals = val if isinstance(val, list) else [val]
    return tuple(_num(sec, key, v) for v in vals)


class _Checked:
    """Turn ValueErrors raised while building a block into named config errors."""

    def __init__(self, where: str):
        self.where = where

    def __enter__(self):
        return self

    def __exit__(self, typ, exc, tb):
        if exc is not None and isinstance(exc, ValueError) and not isinstance(exc, ConfigError):
            raise ConfigError(f"[{self.where}] {exc}") from exc
        return False


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document.

    Raises
    ------
    ConfigError
        On TOML syntax errors (with line and column), unknown keys, or values
        out of range (naming the offending key).
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"syntax error: {exc}") from exc
    sec = _split_sections(doc)

    s = sec["solver"]
    n = sec["noise"]
    a = sec["averaging"]
    st = sec["statistics"]

    with _Checked("noise"):
        alpha = _num("noise", "alpha", n.get("alpha", 1.5))
        if not 1.0 < alpha < 2.0:
            raise ConfigError(f"[noise] alpha: must lie in (1, 2), got {alpha}")
        measure = LevyMeasureConfig(
            alpha=alpha,
            small_jump_cutoff=_num("noise", "small_jump_cutoff", n.get("small_jump_cutoff", 0.05)),
            intensity_scale=_num("noise", "intensity_scale", n.get("intensity_scale", 1.0)),
        )
        amp = n.get("amplitude")
        noise = CylindricalNoiseConfig(
            gamma0=_num("noise", "gamma0", n.get("gamma0", 1.1)),
            amplitude=None if amp is None else _num("noise", "amplitude", amp),
            measure=measure,
        )
        seed = _num("noise", "seed", n.get("seed", 0), int)
        if seed < 0:
            raise ConfigError("[noise] seed: must be nonnegative")

    with _Checked("sweep"):
        if "nu" in sec["sweep"]:
            sweep = _float_list("sweep", "nu", sec["sweep"]["nu"])
        elif "nu" in s:
            sweep = (_num("solver", "nu", s["nu"]),)
        else:
            sweep = DEFAULT_SWEEP
        if not sweep:
            raise ConfigError("[sweep] nu: empty sweep")
        for nu in sweep:
            if not 0.0 < nu <= 1.0:
                raise ConfigError(f"[sweep] nu: values must lie in (0, 1], got {nu}")
        base_nu = _num("solver", "nu", s["nu"]) if "nu" in s else sweep[0]
        if not 0.0 < base_nu <= 1.0:
            raise ConfigError(f"[solver] nu: must lie in (0, 1], got {base_nu}")

    with _Checked("averaging"):
        window = AveragingWindow(
            burn_in=_num("averaging", "burn_in", a.get("burn_in", 1.0)),
            sigma=_num("averaging", "sigma", a.get("sigma", 5.0)),
            sample_stride=_num("averaging", "sample_stride", a.get("sample_stride", 50), int),
            ensemble_size=_num("averaging", "ensemble_size", a.get("ensemble_size", 8), int),
        )

    with _Checked("solver"):
        dt = s.get("dt", "auto")
        dt = None if dt == "auto" else _num("solver", "dt", dt)
        modes = s.get("max_mode", "auto")
        auto_modes = modes == "auto"
        modes = default_max_mode(base_nu) if auto_modes else _num("solver", "max_mode", modes, int)
        scheme = s.get("scheme", "exp_euler")
        if scheme not in SCHEMES:
            raise ConfigError(f"[solver] scheme: must be one of {SCHEMES}, got {scheme!r}")
        initial = s.get("initial", "zero")
        if initial not in INITIAL_CONDITIONS:
            raise ConfigError(f"[solver] initial: must be one of {INITIAL_CONDITIONS}")
        t_end = _num("solver", "t_end", s.get("t_end", window.end))
        if t_end < window.end - 1e-12:
            raise ConfigError(f"[solver] t_end: must reach the window end {window.end}")
        solver = SolverConfig(
            nu=base_nu,
            dt=dt,
            max_mode=modes,
            noise=noise.with_modes(modes),
            scheme=scheme,
            cfl_safety=_num("solver", "cfl_safety", s.get("cfl_safety", 0.5)),
        )

    with _Checked("statistics"):
        sob_n = _float_list("statistics", "sobolev_orders", st.get("sobolev_orders", [0, 1, 2]))
        sob_k = _float_list("statistics", "moment_powers", st.get("moment_powers", [2]))
        l_values = st.get("l_values")
        l_values = default_l_values() if l_values is None else _float_list("statistics", "l_values", l_values)
        for l in l_values:
            if not 0.0 < l < 1.0:
                raise ConfigError(f"[statistics] l_values: {l} is not in (0, 1)")
        requests = StatRequests(
            p_values=_float_list("statistics", "p_values", st.get("p_values", [0.5, 1, 2, 3])),
            l_values=l_values,
            sobolev=tuple((nn, kk) for nn in sob_n for kk in sob_k),
        )
        spectrum = SpectrumConfig(_num("statistics", "layer_width", st.get("layer_width", 2.0)))
        fits = FitRanges(
            spectrum=ScaleRange.parse(st.get("spectrum_range", "4:80")),
            inertial=ScaleRange.parse(st.get("inertial_range", "10nu:0.1")),
            dissipation=ScaleRange.parse(st.get("dissipation_range", "0.1nu:1nu")),
        )
        if fits.spectrum.lo_nu or fits.spectrum.hi_nu:
            raise ConfigError("[statistics] spectrum_range: endpoints are mode numbers, not multiples of nu")

    iv = sec["inviscid"]
    with _Checked("inviscid"):
        enabled = iv.get("enabled", False)
        if not isinstance(enabled, bool):
            raise ConfigError("[inviscid] enabled: expected true or false")
        inviscid = InviscidConfig(
            enabled=enabled,
            cells=_num("inviscid", "cells", iv.get("cells", 2048), int),
            cfl=_num("inviscid", "cfl", iv.get("cfl", 0.5)),
        )
        if inviscid.cells < 8 or not 0.0 < inviscid.cfl <= 1.0:
            raise ConfigError("[inviscid] need cells >= 8 and 0 < cfl <= 1")

    out_dir = sec["output"].get("out_dir", "runs")
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("[output] out_dir: expected a nonempty string")

    cfg = ExperimentConfig(
        solver=solver,
        noise=noise.with_modes(modes),
        window=window,
        requests=requests,
        spectrum=spectrum,
        fits=fits,
        sweep=sweep,
        auto_modes=auto_modes,
        t_end=t_end,
        initial=initial,
        inviscid=inviscid,
        seed=seed,
        out_dir=out_dir,
    )
    _check_ranges(cfg)
    return cfg


def _check_ranges(cfg: ExperimentConfig) -> None:
    m = cfg.spectrum.layer_width
    for nu in cfg.sweep:
        n = cfg.modes_for(nu)
        _, hi = cfg.spectrum.layer(int(cfg.fits.spectrum.hi))
        if hi > n:
            raise ConfigError(
                f"[statistics] spectrum_range: layer n = {cfg.fits.spectrum.hi:g} "
                f"with M = {m:g} needs max_mode >= {hi}, have {n} at nu = {nu}"
            )
        for name in ("inertial", "dissipation"):
            try:
                getattr(cfg.fits, name).resolve(nu)
            except ValueError as exc:
                raise ConfigError(f"[statistics] {name}_range: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
