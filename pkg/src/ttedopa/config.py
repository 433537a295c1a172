"""Run configuration: flat ``section.key = value`` text parsed as TOML.

Precedence: built-in defaults, then the ``--desk`` profile (if requested),
then keys present in the config file, then command-line overrides.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .spectral import SpectralModel, SystemModel, ThermalizedSpectralModel, rescaled_alpha
from .tensornet.tdvp import EvolutionConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralSection:
    s: float = 1.0
    alpha_prime: float = 0.01
    alpha: float | None = None  # overrides the alpha_prime rescaling when set
    omega_c: float = 1.0
    kappa: float | None = 400.0
    beta: float | None = None


@dataclass(frozen=True)
class SystemSection:
    epsilon: float = 0.2
    initial_state: str = "excited"
    theta: float = 0.0  # only for initial_state = "bloch"
    phi: float = 0.0


@dataclass(frozen=True)
class ChainSection:
    n_sites: int = 120
    n_quad: int | None = None
    m_pad: int = 700


@dataclass(frozen=True)
class EvolutionSection:
    dt: float = 0.1
    t_final: float = 100.0
    d: int = 10
    chi_max: int = 100
    precision_p: float = 1e-3
    krylov_dim: int = 30
    krylov_tol: float = 1e-12


@dataclass(frozen=True)
class OutputSection:
    directory: str = "run"
    occ_every: int = 10  # chain occupations every this many steps
    corr_stride: int = 2  # corr.csv keeps every k-th star mode per axis (full matrix in corr_*.npz)


@dataclass(frozen=True)
class AnalysisSection:
    peak_window: tuple[float, float] = (0.5, 1.5)  # in units of epsilon, mirrored for negative peaks
    delta: float = 0.02  # half-width of the peak population windows
    fit_t_min: float = 0.0
    fit_t_max: float | None = None
    polaron_band: tuple[float, float] = (0.5, 1.0)  # in units of omega_c


@dataclass(frozen=True)
class DebugSection:
    zero_coupling: bool = False


@dataclass(frozen=True)
class RunConfig:
    spectral: SpectralSection = field(default_factory=SpectralSection)
    system: SystemSection = field(default_factory=SystemSection)
    chain: ChainSection = field(default_factory=ChainSection)
    evolution: EvolutionSection = field(default_factory=EvolutionSection)
    snapshots: tuple[float, ...] = (80.0, 100.0)
    output: OutputSection = field(default_factory=OutputSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    debug: DebugSection = field(default_factory=DebugSection)

    # --- derived objects ----------------------------------------------------------

    @property
    def alpha(self) -> float:
        sp = self.spectral
        if sp.alpha is not None:
            return sp.alpha
        return rescaled_alpha(sp.alpha_prime, sp.s, self.system.epsilon)

    @property
    def beta(self) -> float:
        sp = self.spectral
        return sp.beta if sp.beta is not None else sp.kappa / self.system.epsilon

    def spectral_model(self) -> SpectralModel:
        return SpectralModel(self.spectral.s, self.alpha, self.spectral.omega_c)

    def thermal_model(self) -> ThermalizedSpectralModel:
        return ThermalizedSpectralModel(self.spectral_model(), self.beta, self.system.epsilon)

    def system_model(self) -> SystemModel:
        sy = self.system
        state = ("bloch", sy.theta, sy.phi) if sy.initial_state == "bloch" else sy.initial_state
        return SystemModel(sy.epsilon, state)

    def evolution_config(self) -> EvolutionConfig:
        ev = self.evolution
        return EvolutionConfig(ev.dt, ev.t_final, ev.chi_max, ev.precision_p, ev.d, ev.krylov_dim, ev.krylov_tol)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["snapshots"] = list(self.snapshots)
        return d

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form (independent of key order in the file)."""
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


DESK_PROFILE = {
    "chain.n_sites": 60,
    "evolution.t_final": 40.0,
    "snapshots": [30.0, 40.0],
    "evolution.d": 6,
    "evolution.chi_max": 40,
}

_SECTIONS = {f.name: f for f in fields(RunConfig)}


def _flatten(data: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _coerce(value, target_type: str, key: str):
    """Check/convert a parsed value against a field annotation string."""
    try:
        if value is None:
            if "None" not in target_type:
                raise TypeError
            return None
        if isinstance(value, bool) != ("bool" in target_type):
            raise TypeError
        if "tuple" in target_type:
            if not isinstance(value, (list, tuple)) or len(value) != 2:
                raise TypeError
            return tuple(float(v) for v in value)
        if "bool" in target_type:
            return value
        if target_type.startswith("int"):
            if isinstance(value, float) and not value.is_integer():
                raise TypeError
            return int(value)
        if target_type.startswith("float"):
            return float(value)
        if target_type.startswith("str") and isinstance(value, str):
            return value
        raise TypeError
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot use {value!r} as {target_type}") from None


def apply_overrides(config: RunConfig, flat: dict) -> RunConfig:
    """Return ``config`` with dotted-key values replaced (unknown keys are errors)."""
    sections: dict[str, dict] = {}
    for key, value in flat.items():
        if key == "snapshots":
            if not isinstance(value, (list, tuple)):
                raise ConfigError("snapshots must be a list of times")
            config = replace(config, snapshots=tuple(_coerce(v, "float", key) for v in value))
            continue
        section, _, name = key.partition(".")
        if section not in _SECTIONS or section == "snapshots" or not name:
            raise ConfigError(f"unknown configuration key {key!r}")
        sec_type = type(getattr(config, section))
        sec_fields = {f.name: f for f in fields(sec_type)}
        if name not in sec_fields:
            raise ConfigError(f"unknown configuration key {key!r}")
        sections.setdefault(section, {})[name] = _coerce(value, str(sec_fields[name].type), key)
    for section, values in sections.items():
        config = replace(config, **{section: replace(getattr(config, section), **values)})
    return config


def parse_config_text(text: str) -> dict:
    try:
        return _flatten(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error: {exc}") from None


def load_config(path=None, desk: bool = False, overrides: dict | None = None) -> RunConfig:
    config = RunConfig()
    if desk:
        config = apply_overrides(config, DESK_PROFILE)
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        config = apply_overrides(config, parse_config_text(text))
    if overrides:
        config = apply_overrides(config, overrides)
    validate_config(config)
    return config


def validate_config(config: RunConfig) -> None:
    sp, sy, ch, ev, out = config.spectral, config.system, config.chain, config.evolution, config.output
    checks = [
        (sp.s > 0, "spectral.s must be > 0"),
        (sp.omega_c > 0, "spectral.omega_c must be > 0"),
        (sp.alpha is not None or sp.alpha_prime > 0, "spectral.alpha_prime must be > 0"),
        (sp.alpha is None or sp.alpha > 0, "spectral.alpha must be > 0"),
        (sp.kappa is not None or sp.beta is not None, "one of spectral.kappa / spectral.beta is required"),
        (sp.beta is None or sp.beta > 0, "spectral.beta must be > 0"),
        (sp.kappa is None or sp.kappa > 0, "spectral.kappa must be > 0"),
        (sy.epsilon > 0, "system.epsilon must be > 0"),
        (sy.initial_state in ("excited", "ground", "plus", "minus", "bloch"), "system.initial_state is not recognised"),
        (ch.n_sites >= 1, "chain.n_sites must be >= 1"),
        (ch.n_quad is None or ch.n_quad >= 10 * ch.n_sites, "chain.n_quad must be >= 10 * chain.n_sites"),
        (ch.m_pad >= ch.n_sites, "chain.m_pad must be >= chain.n_sites"),
        (ev.dt > 0, "evolution.dt must be > 0"),
        (ev.t_final >= 0, "evolution.t_final must be >= 0"),
        (ev.d >= 2, "evolution.d must be >= 2"),
        (ev.chi_max >= 1, "evolution.chi_max must be >= 1"),
        (ev.precision_p > 0, "evolution.precision_p must be > 0"),
        (ev.krylov_dim >= 2, "evolution.krylov_dim must be >= 2"),
        (out.occ_every >= 1, "output.occ_every must be >= 1"),
        (out.corr_stride >= 1, "output.corr_stride must be >= 1"),
    ]
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)
    steps = ev.t_final / ev.dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ConfigError(f"evolution.t_final = {ev.t_final} is not a multiple of dt = {ev.dt}")
    for t in config.snapshots:
        if not 0 <= t <= ev.t_final + 1e-12:
            raise ConfigError(f"snapshot time {t} is outside [0, t_final]")
        steps = t / ev.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ConfigError(f"snapshot time {t} is not a multiple of dt = {ev.dt}")
    if math.isnan(config.beta):
        raise ConfigError("spectral.beta is not a number")
