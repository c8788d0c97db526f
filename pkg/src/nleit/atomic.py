"""Rubidium D2 hyperfine structure, dipole moments and vapor density.

Constants are loaded from ``data/rubidium_d2.ini``; nothing numeric about
the atoms is hard-coded here. Every frequency in the public API is cyclic
(Hz). Conversions to angular frequency happen only where hbar appears.
"""

from __future__ import annotations

import configparser
import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from importlib import resources

from scipy import constants as sc

from .errors import InvalidInputError

__all__ = [
    "Isotope",
    "Manifold",
    "Level",
    "Transition",
    "AtomicSystem",
    "IsotopeData",
    "builtin_system",
    "number_density",
    "vapor_pressure_pa",
    "isotope_data",
    "DEFAULT_GROUND_DECOHERENCE_HZ",
]

# Ground-state (Raman) coherence decay. Chosen so the Doppler-averaged Rb87
# spectrum at 470 MHz with 100 MHz comb lines fits to a 30 MHz half-width
# over a +-60 MHz window; it lumps transit, collisional and laser-linewidth
# broadening into one rate.
DEFAULT_GROUND_DECOHERENCE_HZ = 17.8e6

BUILTIN_T_RANGE = (273.0, 400.0)


class Isotope(str, enum.Enum):
    RB85 = "Rb85"
    RB87 = "Rb87"

    @classmethod
    def parse(cls, value: "Isotope | str") -> "Isotope":
        if isinstance(value, Isotope):
            return value
        for iso in cls:
            if str(value).strip().lower() == iso.value.lower():
                return iso
        raise InvalidInputError(f"unsupported isotope {value!r}; expected Rb85 or Rb87")


class Manifold(str, enum.Enum):
    GROUND = "ground"
    EXCITED = "excited"


@dataclass(frozen=True)
class Level:
    label: str
    energy_offset: float  # Hz, relative to the manifold centroid
    manifold: Manifold
    f: int = 0

    @property
    def degeneracy(self) -> int:
        return 2 * self.f + 1


@dataclass(frozen=True)
class Transition:
    lower: str
    upper: str
    dipole_moment: float  # C m
    relaxation_rate: float  # Hz, decay rate of the optical coherence
    relative_strength: float = 1.0

    @property
    def label(self) -> str:
        return f"{self.lower} -> {self.upper}"


@dataclass(frozen=True)
class IsotopeData:
    isotope: Isotope
    mass_amu: float
    nuclear_spin: float
    abundance: float
    line_center_hz: float
    natural_linewidth_hz: float
    reduced_dipole_cm: float
    ground_a_hz: float
    excited_a_hz: float
    excited_b_hz: float

    @property
    def mass_kg(self) -> float:
        return self.mass_amu * sc.atomic_mass

    @property
    def wavelength_m(self) -> float:
        return sc.c / self.line_center_hz

    @property
    def reference_dipole_cm(self) -> float:
        """Dipole of a unit-strength hyperfine transition, d_J / sqrt(3).

        Comb amplitudes are quoted as the Rabi frequency this dipole would
        see; a transition with strength S sees |a| * sqrt(S).
        """
        return self.reduced_dipole_cm / math.sqrt(3.0)


@dataclass(frozen=True)
class AtomicSystem:
    isotope: Isotope
    levels: tuple[Level, ...]
    transitions: tuple[Transition, ...]
    number_density: float  # m^-3
    temperature: float  # K
    ground_decoherence: float = DEFAULT_GROUND_DECOHERENCE_HZ  # Hz
    natural_linewidth: float = 6.0666e6  # Hz, population decay of excited levels

    def __post_init__(self):
        object.__setattr__(self, "isotope", Isotope.parse(self.isotope))
        object.__setattr__(self, "levels", tuple(self.levels))
        object.__setattr__(self, "transitions", tuple(self.transitions))
        self.validate()

    def validate(self) -> None:
        if not (self.number_density > 0 and math.isfinite(self.number_density)):
            raise InvalidInputError("number_density must be positive")
        if not self.temperature > 0:
            raise InvalidInputError("temperature must be positive")
        if not (self.ground_decoherence > 0 and self.natural_linewidth > 0):
            raise InvalidInputError("relaxation rates must be positive")
        labels = [lv.label for lv in self.levels]
        if len(set(labels)) != len(labels):
            raise InvalidInputError("level labels must be unique")
        for man in Manifold:
            energies = [lv.energy_offset for lv in self.levels if lv.manifold == man]
            if any(b <= a for a, b in zip(energies, energies[1:])):
                raise InvalidInputError(f"{man.value} level energies must be strictly increasing")
        ground = [lv for lv in self.levels if lv.manifold == Manifold.GROUND]
        if len(ground) >= 2 and ground[-1].energy_offset - ground[0].energy_offset <= 0:
            raise InvalidInputError("ground hyperfine splitting must be positive")
        by_label = {lv.label: lv for lv in self.levels}
        for tr in self.transitions:
            lo, up = by_label.get(tr.lower), by_label.get(tr.upper)
            if lo is None or up is None:
                raise InvalidInputError(f"transition {tr.label} references an unknown level")
            if lo.manifold != Manifold.GROUND or up.manifold != Manifold.EXCITED:
                raise InvalidInputError(f"transition {tr.label} must go ground -> excited")
            if not tr.dipole_moment > 0:
                raise InvalidInputError(f"transition {tr.label} needs a positive dipole moment")
            if not tr.relaxation_rate > 0:
                raise InvalidInputError(f"transition {tr.label} needs a positive relaxation rate")

    # lookups -------------------------------------------------------------

    @property
    def data(self) -> IsotopeData:
        return isotope_data(self.isotope)

    def level(self, label: str) -> Level:
        for lv in self.levels:
            if lv.label == label:
                return lv
        raise InvalidInputError(f"no level {label!r} in {self.isotope.value}")

    def transition(self, lower: str, upper: str) -> Transition:
        lower, upper = _expand_label(lower, Manifold.GROUND), _expand_label(upper, Manifold.EXCITED)
        for tr in self.transitions:
            if tr.lower == lower and tr.upper == upper:
                return tr
        raise InvalidInputError(f"no transition {lower} -> {upper} in {self.isotope.value}")

    def transition_frequency(self, lower: str, upper: str) -> float:
        """Absolute optical frequency of a hyperfine transition in Hz."""
        lo = self.level(_expand_label(lower, Manifold.GROUND))
        up = self.level(_expand_label(upper, Manifold.EXCITED))
        return self.data.line_center_hz + up.energy_offset - lo.energy_offset

    def ground_levels(self) -> list[Level]:
        return [lv for lv in self.levels if lv.manifold == Manifold.GROUND]

    def excited_levels(self) -> list[Level]:
        return [lv for lv in self.levels if lv.manifold == Manifold.EXCITED]

    def ground_splitting(self) -> float:
        g = self.ground_levels()
        return g[-1].energy_offset - g[0].energy_offset

    def with_scaled_rates(self, factor: float) -> "AtomicSystem":
        trs = tuple(replace(t, relaxation_rate=t.relaxation_rate * factor) for t in self.transitions)
        return replace(
            self,
            transitions=trs,
            ground_decoherence=self.ground_decoherence * factor,
            natural_linewidth=self.natural_linewidth * factor,
        )

    # serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["isotope"] = self.isotope.value
        for lv in d["levels"]:
            lv["manifold"] = lv["manifold"].value if isinstance(lv["manifold"], Manifold) else lv["manifold"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AtomicSystem":
        levels = tuple(
            Level(lv["label"], float(lv["energy_offset"]), Manifold(lv["manifold"]), int(lv.get("f", 0)))
            for lv in d["levels"]
        )
        trs = tuple(Transition(**t) for t in d["transitions"])
        return cls(
            isotope=Isotope.parse(d["isotope"]),
            levels=levels,
            transitions=trs,
            number_density=float(d["number_density"]),
            temperature=float(d["temperature"]),
            ground_decoherence=float(d["ground_decoherence"]),
            natural_linewidth=float(d["natural_linewidth"]),
        )

    def to_json(self) -> str:
        # repr-based float formatting in json round-trips doubles exactly
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AtomicSystem":
        return cls.from_dict(json.loads(text))


def _expand_label(label: str, manifold: Manifold) -> str:
    """Accept short labels like 'F=2' or "F'=1" as well as full ones."""
    s = label.strip()
    if s.startswith("5"):
        return s
    if manifold == Manifold.GROUND:
        return f"5S1/2 {s}"
    if not s.startswith("F'"):
        s = s.replace("F=", "F'=", 1)
    return f"5P3/2 {s}"


# data file -----------------------------------------------------------------


@dataclass(frozen=True)
class _AtomTables:
    isotopes: dict = field(default_factory=dict)
    levels: dict = field(default_factory=dict)
    transitions: dict = field(default_factory=dict)
    vapor: dict = field(default_factory=dict)


@lru_cache(maxsize=None)
def _tables() -> _AtomTables:
    text = resources.files("nleit").joinpath("data/rubidium_d2.ini").read_text()
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    cp.read_string(text)
    tables = _AtomTables()
    for name in cp.sections():
        sec = cp[name]
        kind, _, rest = name.partition(" ")
        if kind == "isotope":
            iso = Isotope.parse(rest)
            tables.isotopes[iso] = IsotopeData(
                isotope=iso,
                **{k: float(v) for k, v in sec.items()},
            )
        elif kind == "level":
            iso = Isotope.parse(rest.split(" ", 1)[0])
            tables.levels.setdefault(iso, []).append(
                Level(
                    label=sec["label"],
                    energy_offset=float(sec["energy_offset_hz"]),
                    manifold=Manifold(sec["manifold"]),
                    f=int(sec["f"]),
                )
            )
        elif kind == "transition":
            iso = Isotope.parse(rest.split(" ", 1)[0])
            lower, upper = (s.strip() for s in sec["label"].split("->"))
            tables.transitions.setdefault(iso, []).append(
                Transition(
                    lower=lower,
                    upper=upper,
                    dipole_moment=float(sec["dipole_cm"]),
                    relaxation_rate=float(sec["gamma_hz"]),
                    relative_strength=float(sec["relative_strength"]),
                )
            )
        elif name == "vapor_pressure":
            tables.vapor.update({k: float(v) for k, v in sec.items()})
    return tables


def isotope_data(isotope: Isotope | str) -> IsotopeData:
    return _tables().isotopes[Isotope.parse(isotope)]


# vapor density -------------------------------------------------------------


def vapor_pressure_pa(temperature: float) -> float:
    """Saturated Rb vapor pressure in pascal (solid/liquid two-branch fit)."""
    vp = _tables().vapor
    if not (vp["valid_min_k"] <= temperature <= vp["valid_max_k"]):
        raise InvalidInputError(
            f"temperature {temperature} K outside vapor-pressure validity "
            f"[{vp['valid_min_k']}, {vp['valid_max_k']}] K"
        )
    if temperature < vp["melt_k"]:
        log_torr = vp["offset"] + vp["solid_a"] - vp["solid_b"] / temperature
    else:
        log_torr = vp["offset"] + vp["liquid_a"] - vp["liquid_b"] / temperature
    return 10.0**log_torr * sc.torr


def number_density(isotope: Isotope | str, temperature: float, fraction: float) -> float:
    """Atoms per m^3 of one isotope in saturated vapor (ideal gas)."""
    Isotope.parse(isotope)
    if not (0.0 < fraction <= 1.0):
        raise InvalidInputError("fraction must be in (0, 1]")
    return fraction * vapor_pressure_pa(temperature) / (sc.k * temperature)


def builtin_system(
    isotope: Isotope | str,
    temperature: float,
    *,
    ground_decoherence: float = DEFAULT_GROUND_DECOHERENCE_HZ,
) -> AtomicSystem:
    """Full D2 hyperfine system for one isotope at the natural abundance."""
    iso = Isotope.parse(isotope)
    lo, hi = BUILTIN_T_RANGE
    if not (lo <= temperature <= hi):
        raise InvalidInputError(f"temperature must be in [{lo}, {hi}] K")
    tables = _tables()
    data = tables.isotopes[iso]
    levels = sorted(tables.levels[iso], key=lambda lv: (lv.manifold != Manifold.GROUND, lv.energy_offset))
    return AtomicSystem(
        isotope=iso,
        levels=tuple(levels),
        transitions=tuple(tables.transitions[iso]),
        number_density=number_density(iso, temperature, data.abundance),
        temperature=float(temperature),
        ground_decoherence=ground_decoherence,
        natural_linewidth=data.natural_linewidth_hz,
    )
