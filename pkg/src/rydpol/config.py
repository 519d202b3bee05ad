"""Experiment configuration: JSON in, validated frozen dataclasses out.

File units are MHz, kHz and microseconds, with polarizabilities in
1e-30 C m^2/V; the accessor methods convert to SI.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, RydpolError
from .kick import DEFAULT_KAPPA, KickModel
from .lineshape import VoigtParams
from .phonon_stats import PhononDistribution
from .sideband_dynamics import lamb_dicke_parameter
from .trap_model import TrapParameters, max_confining_polarizability, secular_frequencies
from .units import POL_UNIT, TWO_PI, mhz_to_angular, us_to_s

BUNDLED = ("table1-49S", "table1-53S", "table1-57S")


@lru_cache(maxsize=None)
def schema(name):
    path = resources.files("rydpol").joinpath("schemas").joinpath(f"{name}.schema.json")
    return json.loads(path.read_text())


def _validate(doc, name):
    try:
        jsonschema.validate(doc, schema(name))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{name}: {where}: {exc.message}") from None


@dataclass(frozen=True)
class StateSettings:
    label: str
    principal_n: int
    polarizability: float  # 1e-30 C m^2/V

    @property
    def pol_si(self):
        return self.polarizability * POL_UNIT


@dataclass(frozen=True)
class RabiSettings:
    omega0_khz: float = 100.0
    eta: float | None = None
    gamma_dec: float = 300.0
    amplitude: float = 0.95
    carrier_us: tuple = (1.0, 40.0, 40)
    sideband_us: tuple = (10.0, 400.0, 40)
    coherent_us: tuple = (2.5, 150.0, 60)
    shots: int = 100

    @staticmethod
    def _taus(spec):
        start, stop, count = spec
        return us_to_s(np.linspace(start, stop, int(count)))

    def carrier_taus(self):
        return self._taus(self.carrier_us)

    def sideband_taus(self):
        return self._taus(self.sideband_us)

    def coherent_taus(self):
        return self._taus(self.coherent_us)

    @property
    def omega0(self):
        return TWO_PI * 1e3 * self.omega0_khz


@dataclass(frozen=True)
class KickSettings:
    """Either an explicit ``alpha`` or a kick voltage (mV) to be converted."""

    alpha: float | None = None
    voltage_mv: float | None = None
    cycles: int = 100
    detuning_khz: float = 0.0

    def model(self, mode_freq, kappa, drift=0.0):
        drive = mode_freq + TWO_PI * 1e3 * self.detuning_khz
        return KickModel(self.voltage_mv * 1e-3, kappa, self.cycles, drive,
                         mode_freq * (1.0 + drift))


@dataclass(frozen=True)
class MotionSettings:
    nbar_x: float = 0.4
    nbar_y: float = 0.4
    kicks: tuple = (KickSettings(alpha=2.4), KickSettings(alpha=3.8), KickSettings(alpha=6.0))
    kappa: float = DEFAULT_KAPPA
    drift_rel: float = 0.0  # relative 1-sigma trap-frequency drift per kick; 0 disables


@dataclass(frozen=True)
class SpectrumSettings:
    sigma_mhz: float = 0.5
    lorentz_fwhm_mhz: float = 2.0
    amplitude: float = 0.6
    baseline: float = 0.0
    center_mhz: float = 0.0
    grid_mhz: tuple = (-12.0, 6.0, 0.15)
    shots: int = 100
    axes: tuple = ("x", "y")

    def grid(self):
        start, stop, step = self.grid_mhz
        count = int(round((stop - start) / step)) + 1
        return mhz_to_angular(np.linspace(start, stop, max(count, 0)))

    def voigt(self):
        return VoigtParams(float(mhz_to_angular(self.sigma_mhz)),
                           float(mhz_to_angular(self.lorentz_fwhm_mhz)))


@dataclass(frozen=True)
class FitSettings:
    starts: int = 8
    weighting: str = "model"


@dataclass(frozen=True)
class McSettings:
    replicas: int = 20
    eta_rel_sigma: float = 0.1
    alpha_rel_sigma: float = 0.077
    nbar_rel_sigma: float = 0.25
    pol_start_range: tuple = (0.5, 2.0)
    noiseless: bool = False


_SECTIONS = {"rabi": RabiSettings, "motion": MotionSettings, "spectrum": SpectrumSettings,
             "fit": FitSettings, "mc": McSettings}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    state: StateSettings
    trap: dict
    rabi: RabiSettings = field(default_factory=RabiSettings)
    motion: MotionSettings = field(default_factory=MotionSettings)
    spectrum: SpectrumSettings = field(default_factory=SpectrumSettings)
    fit: FitSettings = field(default_factory=FitSettings)
    mc: McSettings = field(default_factory=McSettings)
    seed: int | None = None

    def trap_parameters(self) -> TrapParameters:
        return _trap_from_dict(_freeze(self.trap))

    def eta(self):
        if self.rabi.eta is not None:
            return self.rabi.eta
        return float(lamb_dicke_parameter(secular_frequencies(self.trap_parameters())["y"]))

    def thermal_dists(self):
        return (PhononDistribution.thermal(self.motion.nbar_x),
                PhononDistribution.thermal(self.motion.nbar_y))

    def to_dict(self):
        out = {"name": self.name, "seed": self.seed, "state": asdict(self.state),
               "trap": json.loads(json.dumps(self.trap))}
        for key in _SECTIONS:
            section = asdict(getattr(self, key))
            if key == "motion":
                section["kicks"] = [{k: v for k, v in kick.items() if v is not None}
                                    for kick in section["kicks"]]
            out[key] = _listify(section)
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc, base_dir=None):
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
        _validate(doc, "experiment_config")
        trap = _resolve_trap(doc["trap"], base_dir)
        kw = {}
        for key, kind in _SECTIONS.items():
            sec = dict(doc.get(key, {}))
            if key == "motion" and "kicks" in sec:
                sec["kicks"] = tuple(KickSettings(**k) for k in sec["kicks"])
            for f in fields(kind):
                if isinstance(sec.get(f.name), list):
                    sec[f.name] = tuple(sec[f.name])
            kw[key] = kind(**sec)
        cfg = cls(name=doc["name"], state=StateSettings(**doc["state"]), trap=trap,
                  seed=doc.get("seed"), **kw)
        cfg.check()
        return cfg

    def check(self):
        """Semantic checks beyond the JSON schema."""
        try:
            trap = self.trap_parameters()
        except (RydpolError, ValueError, KeyError) as exc:
            raise ConfigError(f"trap: {exc}") from None
        try:
            self.eta()
        except ValueError as exc:
            raise ConfigError(f"rabi.eta: {exc}") from None
        for i, kick in enumerate(self.motion.kicks):
            if (kick.alpha is None) == (kick.voltage_mv is None):
                raise ConfigError(f"motion.kicks[{i}]: give exactly one of alpha, voltage_mv")
        for key in ("carrier_us", "sideband_us", "coherent_us"):
            start, stop, count = getattr(self.rabi, key)
            if not (0 <= start < stop) or int(count) != count or count < 2:
                raise ConfigError(f"rabi.{key}: need 0 <= start < stop and an integer count >= 2")
        start, stop, step = self.spectrum.grid_mhz
        if not (start < stop and step > 0):
            raise ConfigError("spectrum.grid_mhz: need start < stop and step > 0")
        sp = self.spectrum
        if sp.amplitude + sp.baseline > 1:
            raise ConfigError("spectrum: amplitude + baseline exceeds 1")
        try:
            sp.voigt()
        except ValueError as exc:
            raise ConfigError(f"spectrum: {exc}") from None
        lo, hi = self.mc.pol_start_range
        if not lo < hi:
            raise ConfigError("mc.pol_start_range must be increasing")
        if self.state.pol_si >= max_confining_polarizability(trap):
            raise ConfigError("state.polarizability deconfines the trap")

    def override(self, **changes):
        """Copy with dotted-path overrides, e.g. ``override(**{"spectrum.shots": 1000})``."""
        cfg = self
        for path, value in changes.items():
            if value is None:
                continue
            if "." not in path:
                cfg = replace(cfg, **{path: value})
                continue
            section, key = path.split(".", 1)
            cfg = replace(cfg, **{section: replace(getattr(cfg, section), **{key: value})})
        cfg.check()
        return cfg


def _listify(obj):
    if isinstance(obj, dict):
        return {k: _listify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_listify(v) for v in obj]
    return obj


def _freeze(obj):
    if isinstance(obj, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in obj.items()))
    return obj


@lru_cache(maxsize=64)
def _trap_from_dict(frozen):
    def thaw(x):
        return {k: thaw(v) for k, v in x} if isinstance(x, tuple) else x
    return TrapParameters.from_dict(thaw(frozen))


def _resolve_trap(ref, base_dir):
    if isinstance(ref, dict):
        doc = ref
    else:
        doc = _load_json(_find(ref, base_dir), "trap calibration")
    _validate(doc, "trap_calibration")
    return doc


def _find(ref, base_dir):
    candidates = []
    if base_dir is not None:
        candidates.append(Path(base_dir) / ref)
    candidates.append(Path(ref))
    bundled = resources.files("rydpol").joinpath("configs").joinpath(ref)
    for path in candidates:
        if path.is_file():
            return path
    if bundled.is_file():
        return bundled
    raise ConfigError(f"cannot resolve reference {ref!r}")


def _load_json(path, what):
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path}: invalid JSON ({exc})") from None


def load_config(ref) -> ExperimentConfig:
    """Load from a path or a bundled name such as ``table1-57S``."""
    path = Path(ref)
    if path.is_file():
        return ExperimentConfig.from_dict(_load_json(path, "config"), path.parent)
    name = ref if str(ref).endswith(".json") else f"{ref}.json"
    bundled = resources.files("rydpol").joinpath("configs").joinpath(name)
    if bundled.is_file():
        return ExperimentConfig.from_dict(_load_json(bundled, "config"), None)
    raise ConfigError(f"no config file or bundled config named {ref!r}")
