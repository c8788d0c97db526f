"""Run configuration: sectioned ``key = value`` text with '#' comments.

Every section and key is optional; missing ones take the defaults of the
dataclasses below. Unknown sections or keys raise ``ConfigError`` in strict
mode and only warn otherwise. Errors carry the offending line and key.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

__all__ = [
    "AtomicSection",
    "CombSection",
    "ProbeSection",
    "SpectrumSection",
    "Chi3Section",
    "MaskSection",
    "QuantumSection",
    "TomographySection",
    "OutputSection",
    "RunConfig",
    "parse_config",
    "load_config",
    "REFERENCE_RABI_PER_SQRT_WATT",
]

# Rabi frequency (Hz) of the reference dipole d_J/sqrt(3) for 1 W in one comb
# line focused to a 100 um waist: d E / (2 pi hbar) with E = sqrt(2 P / (c eps0 pi w^2)).
REFERENCE_RABI_PER_SQRT_WATT = 4.83655e9


@dataclass
class AtomicSection:
    isotope: str = "Rb87"
    temperature: float = 333.15
    ground_decoherence_hz: float = 17.8e6
    pattern: str = ""  # empty: the isotope's default drive pattern


@dataclass
class CombSection:
    repetition_rate_hz: float = 250e6
    span_hz: float = 4e9
    envelope: str = "flat"
    # line Rabi frequency (reference dipole) = rabi_per_sqrt_watt * sqrt(line_power_w)
    rabi_per_sqrt_watt: float = REFERENCE_RABI_PER_SQRT_WATT
    line_power_w: float = 4.2749e-4  # 100 MHz per line


@dataclass
class ProbeSection:
    detuning_hz: float = 470e6
    rabi_hz: float = 1e3


@dataclass
class SpectrumSection:
    scan_start_hz: float = -250e6
    scan_stop_hz: float = 250e6
    points: int = 1001
    doppler: str = "uniform"  # uniform | gauss-hermite | none
    doppler_order: int = 64
    fit_half_width_hz: float = 60e6
    prominence_factor: float = 3.0


@dataclass
class Chi3Section:
    sweep: str = "detuning"  # detuning | omega_c
    start: float = 70e6
    stop: float = 640e6
    points: int = 20
    omega_c_hz: float = 500e6
    b_offset_hz: float = float("nan")  # nan: repetition rate minus the b-c splitting
    waist_m: float = 100e-6
    interaction_length_m: float = 0.075


@dataclass
class MaskSection:
    center_offset_hz: float = 0.0
    width_hz: float = 0.2e12
    phase_rad: float = math.pi
    gamma_eff_hz: float = 30e6
    span_hz: float = 2e12
    phase_points: int = 73
    center_span_hz: float = 1e12
    center_points: int = 101


@dataclass
class QuantumSection:
    alpha: float = 2.0
    alpha_phase_rad: float = 0.0
    kappa: float = 0.3
    efficiency: float = 0.72
    dim: int = 0  # 0: chosen from |alpha|
    grid_half_width: float = 6.0
    grid_points: int = 121


@dataclass
class TomographySection:
    input: str = ""  # state JSON or dataset CSV; empty: vacuum
    phases: int = 24
    samples: int = 100000
    seed: int = 12345
    cutoff: float = 2.5
    efficiency: float = 1.0
    grid_half_width: float = 5.0
    grid_points: int = 101


@dataclass
class OutputSection:
    directory: str = "nleit-out"


@dataclass
class RunConfig:
    atomic: AtomicSection = field(default_factory=AtomicSection)
    comb: CombSection = field(default_factory=CombSection)
    probe: ProbeSection = field(default_factory=ProbeSection)
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    chi3: Chi3Section = field(default_factory=Chi3Section)
    mask: MaskSection = field(default_factory=MaskSection)
    quantum: QuantumSection = field(default_factory=QuantumSection)
    tomography: TomographySection = field(default_factory=TomographySection)
    output: OutputSection = field(default_factory=OutputSection)

    @property
    def comb_line_rabi(self) -> float:
        return self.comb.rabi_per_sqrt_watt * math.sqrt(max(self.comb.line_power_w, 0.0))


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#\s][^=:]*?)\s*[=:]")


def _locate(text: str) -> dict[tuple[str, str | None], int]:
    """Line numbers of section headers and keys, as configparser does not keep them."""
    where: dict[tuple[str, str | None], int] = {}
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        if raw.lstrip().startswith(("#", ";")):
            continue
        m = _SECTION_RE.match(raw)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), n)
            continue
        m = _KEY_RE.match(raw)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), n)
    return where


def _convert(raw: str, kind: str, key: str, line: int | None):
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as {kind}", line=line, key=key) from None


def parse_config(text: str, *, strict: bool = False) -> RunConfig:
    parser = configparser.ConfigParser(
        comment_prefixes=("#", ";"), inline_comment_prefixes=("#",), interpolation=None, strict=True
    )
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"syntax error: {str(exc).splitlines()[0]}", line=line) from None
    where = _locate(text)
    cfg = RunConfig()
    sections = {f.name: f for f in dataclasses.fields(cfg)}

    def unknown(msg: str, line: int | None, key: str | None):
        if strict:
            raise ConfigError(msg, line=line, key=key)
        warnings.warn(str(ConfigError(msg, line=line, key=key)), UserWarning, stacklevel=3)

    for name in parser.sections():
        if name not in sections:
            unknown(f"unknown section [{name}]", where.get((name, None)), None)
            continue
        target = getattr(cfg, name)
        kinds = {f.name: f.type for f in dataclasses.fields(target)}
        for key, raw in parser.items(name):
            line = where.get((name, key))
            if key not in kinds:
                unknown(f"unknown key in [{name}]", line, f"{name}.{key}")
                continue
            setattr(target, key, _convert(raw.strip(), kinds[key], f"{name}.{key}", line))
    _validate(cfg, where)
    return cfg


def _validate(cfg: RunConfig, where) -> None:
    def need(ok: bool, section: str, key: str, msg: str):
        if not ok:
            raise ConfigError(msg, line=where.get((section, key)), key=f"{section}.{key}")

    need(cfg.atomic.isotope.lower() in ("rb85", "rb87", "85rb", "87rb"), "atomic", "isotope", "isotope must be Rb85 or Rb87")
    need(cfg.atomic.temperature > 0, "atomic", "temperature", "temperature must be positive")
    need(cfg.atomic.ground_decoherence_hz > 0, "atomic", "ground_decoherence_hz", "must be positive")
    need(cfg.comb.repetition_rate_hz > 0, "comb", "repetition_rate_hz", "must be positive")
    need(cfg.comb.span_hz >= cfg.comb.repetition_rate_hz, "comb", "span_hz", "span must cover one period")
    need(cfg.comb.envelope in ("flat", "gaussian"), "comb", "envelope", "envelope must be flat or gaussian")
    need(cfg.comb.line_power_w >= 0, "comb", "line_power_w", "must be non-negative")
    need(cfg.comb.rabi_per_sqrt_watt > 0, "comb", "rabi_per_sqrt_watt", "must be positive")
    need(cfg.probe.rabi_hz > 0, "probe", "rabi_hz", "must be positive")
    need(cfg.spectrum.points >= 8, "spectrum", "points", "need at least 8 points")
    need(cfg.spectrum.scan_stop_hz > cfg.spectrum.scan_start_hz, "spectrum", "scan_stop_hz", "stop must exceed start")
    need(cfg.spectrum.doppler in ("uniform", "gauss-hermite", "none"), "spectrum", "doppler",
         "doppler must be uniform, gauss-hermite or none")
    need(cfg.chi3.sweep in ("detuning", "omega_c"), "chi3", "sweep", "sweep must be detuning or omega_c")
    need(cfg.chi3.points >= 0, "chi3", "points", "must be non-negative")
    need(cfg.chi3.omega_c_hz > 0, "chi3", "omega_c_hz", "must be positive")
    need(cfg.mask.width_hz > 0, "mask", "width_hz", "must be positive")
    need(cfg.mask.phase_points >= 2, "mask", "phase_points", "need at least 2 points")
    need(cfg.mask.center_points >= 2, "mask", "center_points", "need at least 2 points")
    need(0 <= cfg.quantum.efficiency <= 1, "quantum", "efficiency", "must lie in [0, 1]")
    need(cfg.quantum.dim >= 0, "quantum", "dim", "must be non-negative")
    need(cfg.quantum.grid_points >= 2, "quantum", "grid_points", "need at least 2 points")
    need(cfg.tomography.phases >= 1, "tomography", "phases", "must be positive")
    need(cfg.tomography.samples >= 1, "tomography", "samples", "must be positive")
    need(cfg.tomography.cutoff > 0, "tomography", "cutoff", "must be positive")
    need(0 <= cfg.tomography.efficiency <= 1, "tomography", "efficiency", "must lie in [0, 1]")


def load_config(path: str | Path, *, strict: bool = False) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    return parse_config(text, strict=strict)
