"""Third-order susceptibility, Kerr phases and the detuning-to-squeezing chain.

chi3 here is the coefficient in  Re chi(E_b) = Re chi(0) + 2 chi3 E_b^2,
i.e. chi3 = (1/2) d Re chi / d(E_b^2) with E_b the field amplitude of the
coupling line b (Omega_b = mu_24 E_b / hbar). The four-level closed form
N mu13^2 mu24^2 / (2 eps0 hbar^3 Omega_c^2 Delta_b) is the large-Omega_c
limit of that derivative at two-photon resonance. The two-level
reference is the saturable self-Kerr term of a bare transition under the
same definition.

Angular frequencies appear only where hbar does; every argument is in
cyclic Hz.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import constants as sc

from .atomic import AtomicSystem, Isotope, Manifold, _expand_label, builtin_system
from .comb import CombSpectrum
from .eit import PATTERNS, DrivePattern, FieldDrive, _chi_prefactor, default_pattern, lindblad_steady_state
from .errors import DegenerateConfigurationError, InvalidInputError

__all__ = [
    "Chi3Result",
    "KerrGeometry",
    "transit_time",
    "FourLevelCoupling",
    "four_level_coupling",
    "chi3_four_level_analytic",
    "chi3_numeric",
    "chi3_numeric_four_level",
    "chi3_two_level_analytic",
    "chi3_two_level_numeric",
    "chi3_to_kerr_rate",
    "single_photon_phase_shift",
    "rabi_from_line_power",
    "OperatingPoint",
    "OPERATING_POINTS",
    "CALIBRATED_LINE_POWER_W",
    "CALIBRATED_ALPHA2",
    "DETECTION_EFFICIENCY",
    "operating_point_chi3",
    "kerr_coherent_moments",
    "squeezing_from_moments",
    "gaussian_kerr_squeezing_db",
    "squeezing_at",
]

Method = Literal["analytic_4L", "numeric_finite_difference", "numeric_two_level", "analytic_2L"]


@dataclass(frozen=True)
class Chi3Result:
    value: float  # m^2 V^-2
    method: Method
    detuning_context: float  # Hz, probe one-photon detuning
    valid: bool = True
    message: str = ""

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DegenerateConfigurationError(f"chi3 is not finite ({self.value})")


def transit_time(system: AtomicSystem, waist: float) -> float:
    """2 w / v_mean with the Maxwell-Boltzmann mean speed sqrt(8 k T / (pi m))."""
    v = math.sqrt(8 * sc.k * system.temperature / (math.pi * system.data.mass_kg))
    return 2 * waist / v


DEFAULT_WAIST_M = 100e-6
# transit time of Rb87 at 60 C through a 100 um waist, about 0.70 us
DEFAULT_INTERACTION_TIME_S = 2 * DEFAULT_WAIST_M / math.sqrt(
    8 * sc.k * 333.15 / (math.pi * 86.909180527 * sc.atomic_mass)
)


@dataclass(frozen=True)
class KerrGeometry:
    wavelength: float = 780.241e-9
    interaction_length: float = 0.075
    mode_area: float = math.pi * DEFAULT_WAIST_M**2
    interaction_time: float = DEFAULT_INTERACTION_TIME_S
    refractive_index: float = 1.0

    def __post_init__(self):
        for name in ("wavelength", "interaction_length", "mode_area", "interaction_time", "refractive_index"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")

    @classmethod
    def for_system(cls, system: AtomicSystem, waist: float = DEFAULT_WAIST_M, **kw) -> "KerrGeometry":
        kw.setdefault("wavelength", system.data.wavelength_m)
        return cls(mode_area=math.pi * waist**2, interaction_time=transit_time(system, waist), **kw)


# ---------------------------------------------------------------------------
# four-level couplings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FourLevelCoupling:
    """Dipoles and offsets of the probe / c / b chain picked out of a drive pattern."""

    probe: tuple[str, str]
    ground: str  # level 2 (comb ground)
    excited_c: str  # level 3 (shared with the probe)
    excited_b: str  # level 4
    mu13: float
    mu_c: float
    mu24: float
    gamma13: float
    gamma14: float
    b_minus_c: float  # nu(2 -> 4) - nu(2 -> 3), Hz


def four_level_coupling(system: AtomicSystem, pattern: DrivePattern | None = None) -> FourLevelCoupling:
    """Level b is the lowest comb-excited level above the probe's excited level."""
    pattern = pattern or default_pattern(system)
    g_p, e_a = pattern.probe
    e_a = _expand_label(e_a, Manifold.EXCITED)
    g = _expand_label(pattern.comb_ground, Manifold.GROUND)
    excited = [_expand_label(e, Manifold.EXCITED) for e in pattern.comb_excited]
    if e_a not in excited:
        raise InvalidInputError("the probe's excited level must be driven by the comb")
    e_energy = system.level(e_a).energy_offset
    above = sorted((system.level(e).energy_offset, e) for e in excited if system.level(e).energy_offset > e_energy)
    if not above:
        raise InvalidInputError(f"pattern {pattern.name} has no comb-excited level above the probe's")
    e_b = above[0][1]
    tr_p = system.transition(g_p, e_a)
    tr_c = system.transition(g, e_a)
    tr_b = system.transition(g, e_b)
    return FourLevelCoupling(
        probe=(tr_p.lower, tr_p.upper),
        ground=g,
        excited_c=e_a,
        excited_b=e_b,
        mu13=tr_p.dipole_moment,
        mu_c=tr_c.dipole_moment,
        mu24=tr_b.dipole_moment,
        gamma13=tr_p.relaxation_rate,
        gamma14=tr_b.relaxation_rate,
        b_minus_c=system.transition_frequency(g, e_b) - system.transition_frequency(g, e_a),
    )


def chi3_four_level_analytic(
    system: AtomicSystem,
    omega_c: float,
    delta_b: float,
    *,
    pattern: DrivePattern | None = None,
    detuning_context: float = float("nan"),
) -> Chi3Result:
    """N |mu13|^2 |mu24|^2 / (2 eps0 hbar^3) / (Omega_c^2 Delta_b)."""
    if not omega_c > 0:
        raise InvalidInputError("omega_c must be positive")
    if delta_b == 0:
        raise DegenerateConfigurationError("delta_b = 0 makes the four-level chi3 singular")
    cpl = four_level_coupling(system, pattern)
    wc = 2 * math.pi * omega_c
    wb = 2 * math.pi * delta_b
    value = system.number_density * cpl.mu13**2 * cpl.mu24**2 / (2 * sc.epsilon_0 * sc.hbar**3) / (wc**2 * wb)
    return Chi3Result(float(value), "analytic_4L", float(detuning_context))


# ---------------------------------------------------------------------------
# numeric extraction
# ---------------------------------------------------------------------------


def _derivative_at_zero(f, scale: float, *, central: bool = True, max_halvings: int = 60) -> tuple[float, bool]:
    """f'(0) by a five-point stencil, shrinking h until the step is safely perturbative.

    The step is accepted once the second-order term is at most 1% of the
    first-order one, |f''| h / (2 |f'|) <= 0.01, and the estimate is stable
    under halving.
    """
    h = scale
    prev = None
    for _ in range(max_halvings):
        if central:
            fm2, fm1, f0, f1, f2 = (f(k * h) for k in (-2, -1, 0, 1, 2))
            d1 = (fm2 - 8 * fm1 + 8 * f1 - f2) / (12 * h)
            d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * f1 - f2) / (12 * h * h)
        else:
            f0, f1, f2, f3, f4 = (f(k * h) for k in range(5))
            d1 = (-25 * f0 + 48 * f1 - 36 * f2 + 16 * f3 - 3 * f4) / (12 * h)
            d2 = (35 * f0 - 104 * f1 + 114 * f2 - 56 * f3 + 11 * f4) / (12 * h * h)
        ok = d1 != 0 and abs(d2) * h / (2 * abs(d1)) <= 0.01
        if ok and prev is not None and abs(d1 - prev) <= 1e-6 * abs(d1):
            return float(d1), True
        prev = d1
        h *= 0.5
    return float(prev), False


def chi3_numeric_four_level(
    system: AtomicSystem,
    probe: FieldDrive,
    comb_c: FieldDrive,
    comb_b: FieldDrive,
    *,
    pattern: DrivePattern | None = None,
    gamma12: float | None = None,
) -> Chi3Result:
    """(1/2) d Re chi / d(E_b^2) at E_b = 0 from the full four-level coherence.

    The derivative is the Taylor coefficient, so the value of
    ``comb_b.rabi_frequency`` only enters the validity check: the result is
    flagged when the actual b-line intensity is outside the regime where
    the cubic term dominates, or when the probe is not weak.
    """
    cpl = four_level_coupling(system, pattern)
    g12 = system.ground_decoherence if gamma12 is None else gamma12
    gammas = (cpl.gamma13, g12, cpl.gamma14)
    oa = probe.rabi_frequency
    if not oa > 0:
        raise InvalidInputError("probe Rabi frequency must be positive")
    pref = _chi_prefactor(system, cpl.mu13, oa)

    def re_chi(x: float) -> float:
        # x = Omega_b^2 in Hz^2; allow x < 0 since Re chi is rational in Omega_b^2
        ob = complex(math.sqrt(x)) if x >= 0 else 1j * math.sqrt(-x)
        return float((pref * _rho4(probe, comb_c, ob, comb_b.detuning, gammas)).real)

    delta = comb_c.detuning - probe.detuning
    h = delta - comb_b.detuning + 1j * cpl.gamma14
    g = delta + 1j * g12
    scale = 4 * abs(h) * abs(g)
    dfdx, converged = _derivative_at_zero(re_chi, scale)
    # x = Omega_b^2 (cyclic) = (mu24 E / (2 pi hbar))^2
    dx_de2 = (cpl.mu24 / (2 * math.pi * sc.hbar)) ** 2
    value = 0.5 * dfdx * dx_de2

    problems = []
    if not converged:
        problems.append("finite-difference step did not converge")
    if oa >= 0.1 * max(comb_c.rabi_frequency, 1e-300):
        problems.append("probe is not weak compared with the coupling line")
    if comb_b.rabi_frequency**2 > 0.1 * scale:
        problems.append("b-line intensity beyond the cubic regime")
    msg = "; ".join(problems)
    if problems:
        warnings.warn(f"chi3_numeric: {msg}", RuntimeWarning, stacklevel=2)
    return Chi3Result(float(value), "numeric_finite_difference", float(probe.detuning), not problems, msg)


def _rho4(probe: FieldDrive, comb_c: FieldDrive, ob: complex, delta_b: float, gammas) -> complex:
    g13, g12, g14 = gammas
    oa, da = probe.rabi_frequency, probe.detuning
    oc, dc = comb_c.rabi_frequency, comb_c.detuning
    return (oa / 2) / ((da - 1j * g13) + (oc**2 / 4) / ((dc - da + 1j * g12) - (ob**2 / 4) / (dc - da - delta_b + 1j * g14)))


def chi3_two_level_analytic(system: AtomicSystem, detuning: float, transition: tuple[str, str]) -> Chi3Result:
    """-N mu^4 gamma Delta / (2 eps0 hbar^3 Gamma (Delta^2 + gamma^2)^2), saturable self-Kerr."""
    tr = system.transition(*transition)
    mu = tr.dipole_moment
    w = 2 * math.pi
    d, g, gam = w * detuning, w * tr.relaxation_rate, w * system.natural_linewidth
    value = -system.number_density * mu**4 * g * d / (2 * sc.epsilon_0 * sc.hbar**3 * gam * (d * d + g * g) ** 2)
    return Chi3Result(float(value), "analytic_2L", float(detuning))


def chi3_two_level_numeric(system: AtomicSystem, detuning: float, transition: tuple[str, str]) -> Chi3Result:
    """Self-Kerr chi3 of a bare transition from Lindblad steady states versus probe intensity."""
    tr = system.transition(*transition)
    mu = tr.dipole_moment
    gam = system.natural_linewidth
    extra = 2.0 * (tr.relaxation_rate - 0.5 * gam)
    jumps = [np.array([[0.0, math.sqrt(gam)], [0.0, 0.0]])]
    if extra > 0:
        jumps.append(np.array([[0.0, 0.0], [0.0, math.sqrt(extra)]]))

    def re_chi(x: float) -> float:
        if x == 0:
            return float((_chi_prefactor(system, mu, 1.0) * 0.5 / (detuning - 1j * tr.relaxation_rate)).real)
        om = math.sqrt(x)
        h = np.array([[0.0, om / 2], [om / 2, -detuning]], dtype=complex)
        rho = lindblad_steady_state(h, jumps)
        return float((_chi_prefactor(system, mu, om) * rho[0, 1]).real)

    scale = (detuning**2 + tr.relaxation_rate**2) * gam / tr.relaxation_rate
    dfdx, converged = _derivative_at_zero(re_chi, scale, central=False)
    value = 0.5 * dfdx * (mu / (2 * math.pi * sc.hbar)) ** 2
    return Chi3Result(float(value), "numeric_two_level", float(detuning), converged,
                      "" if converged else "finite-difference step did not converge")


def chi3_numeric(
    system: AtomicSystem,
    comb: CombSpectrum,
    probe: FieldDrive,
    *,
    pattern: DrivePattern | None = None,
) -> Chi3Result:
    """Numeric chi3 for a probe inside a comb-driven medium.

    The coupling line c is the comb line nearest two-photon resonance with
    the probe; line b is the next line up, detuned from the b transition.
    A comb with no power on line c leaves only the bare probe transition,
    whose saturable self-Kerr chi3 is returned instead.
    """
    if len(comb) == 0:
        raise InvalidInputError("empty comb")
    pattern = pattern or default_pattern(system)
    cpl = four_level_coupling(system, pattern)
    nu_c = system.transition_frequency(cpl.ground, cpl.excited_c)
    ref = comb.nearest_line(nu_c + probe.detuning)
    nu_b = nu_c + cpl.b_minus_c
    strength = {e: system.transition(cpl.ground, e).relative_strength for e in (cpl.excited_c, cpl.excited_b)}
    amp_c = abs(comb.amplitudes[ref]) * math.sqrt(strength[cpl.excited_c])
    if amp_c == 0:
        return chi3_two_level_numeric(system, probe.detuning, cpl.probe)
    b_idx = min(ref + 1, len(comb) - 1)
    amp_b = abs(comb.amplitudes[b_idx]) * math.sqrt(strength[cpl.excited_b])
    freqs = comb.frequencies
    comb_c = FieldDrive(amp_c, freqs[ref] - nu_c)
    comb_b = FieldDrive(amp_b, freqs[b_idx] - nu_b)
    return chi3_numeric_four_level(system, probe, comb_c, comb_b, pattern=pattern)


# ---------------------------------------------------------------------------
# Kerr rates
# ---------------------------------------------------------------------------


def _chi3_value(chi3) -> float:
    return float(chi3.value if isinstance(chi3, Chi3Result) else chi3)


def chi3_to_kerr_rate(chi3: Chi3Result | float, geom: KerrGeometry) -> float:
    """kappa = 3 hbar omega^2 Re chi3 L / (4 eps0 c^2 n^2 A t).

    This is the nonlinear phase per photon of a temporal mode of duration
    t = ``interaction_time`` crossing a beam of area A over the length L.
    """
    omega = 2 * math.pi * sc.c / geom.wavelength
    num = 3 * sc.hbar * omega**2 * _chi3_value(chi3) * geom.interaction_length
    den = 4 * sc.epsilon_0 * sc.c**2 * geom.refractive_index**2 * geom.mode_area * geom.interaction_time
    return num / den


def single_photon_phase_shift(chi3: Chi3Result | float, geom: KerrGeometry) -> float:
    """Cross-Kerr phase from one photon in the other mode, 2 kappa."""
    return 2.0 * chi3_to_kerr_rate(chi3, geom)


# ---------------------------------------------------------------------------
# operating points and squeezing
# ---------------------------------------------------------------------------


def rabi_from_line_power(power_w: float, dipole_cm: float, mode_area: float) -> float:
    """Cyclic Rabi frequency of one comb line of ``power_w`` spread over ``mode_area``."""
    if power_w < 0:
        raise InvalidInputError("line power must be non-negative")
    field = math.sqrt(2 * power_w / (sc.c * sc.epsilon_0 * mode_area))
    return dipole_cm * field / sc.hbar / (2 * math.pi)


@dataclass(frozen=True)
class OperatingPoint:
    name: str
    isotope: Isotope
    pattern: str
    detuning: float  # probe one-photon detuning, Hz
    absorption: float  # single-pass probe absorption at this detuning
    repetition_rate: float = 250e6

    @property
    def delta_b(self) -> float:
        """Detuning of the next comb line up from the b transition."""
        system = builtin_system(self.isotope, 333.15)
        cpl = four_level_coupling(system, PATTERNS[self.pattern])
        return self.detuning + self.repetition_rate - cpl.b_minus_c


OPERATING_POINTS: dict[str, OperatingPoint] = {
    "rb87_470": OperatingPoint("rb87_470", Isotope.RB87, "rb87_n4", 470e6, 0.20),
    "rb87_70": OperatingPoint("rb87_70", Isotope.RB87, "rb87_n4", 70e6, 0.20),
    "rb85_640": OperatingPoint("rb85_640", Isotope.RB85, "rb85_n7", 640e6, 0.10),
    "rb85_370": OperatingPoint("rb85_370", Isotope.RB85, "rb85_n6", 370e6, 0.30),
}

# Power per comb line (W) that puts the four-level chi3 of the rb87_470
# point at 1.5e-7 m^2/V^2 with the default mode area; about 3.4e-7 W over a
# 4001-line comb. Derived once with calibrate_line_power() and frozen.
CALIBRATED_LINE_POWER_W = 8.465945439943145e-11
# Mean photon number of the probe temporal mode, fixed once so the
# rb87_470 and rb85_640 points land near 1.9 dB and 3.5 dB after losses.
CALIBRATED_ALPHA2 = 850.0
DETECTION_EFFICIENCY = 0.72


def operating_point_chi3(
    point: OperatingPoint | str,
    *,
    line_power: float = CALIBRATED_LINE_POWER_W,
    mode_area: float = math.pi * DEFAULT_WAIST_M**2,
    temperature: float = 333.15,
    detuning: float | None = None,
) -> Chi3Result:
    """Four-level chi3 at an operating point with the comb field set by ``line_power``."""
    point = OPERATING_POINTS[point] if isinstance(point, str) else point
    system = builtin_system(point.isotope, temperature)
    pattern = PATTERNS[point.pattern]
    cpl = four_level_coupling(system, pattern)
    det = point.detuning if detuning is None else detuning
    omega_c = rabi_from_line_power(line_power, cpl.mu_c, mode_area)
    delta_b = det + point.repetition_rate - cpl.b_minus_c
    return chi3_four_level_analytic(system, omega_c, delta_b, pattern=pattern, detuning_context=det)


def calibrate_line_power(target: float = 1.5e-7, point: str = "rb87_470") -> float:
    """Line power giving ``target`` chi3 at ``point`` (chi3 scales as 1/power)."""
    ref = operating_point_chi3(point, line_power=1.0).value
    return ref / target


def _eix_minus_one(x: float) -> complex:
    return 2j * math.sin(0.5 * x) * complex(math.cos(0.5 * x), math.sin(0.5 * x))


def kerr_coherent_moments(alpha: complex, kappa: float) -> tuple[complex, complex, float]:
    """Exact (<a>, <a^2>, <n>) after exp(i kappa n^2) acts on |alpha>."""
    n = abs(alpha) ** 2
    a1 = alpha * complex(math.cos(kappa), math.sin(kappa)) * np.exp(n * _eix_minus_one(2 * kappa))
    a2 = alpha**2 * complex(math.cos(4 * kappa), math.sin(4 * kappa)) * np.exp(n * _eix_minus_one(4 * kappa))
    return complex(a1), complex(a2), n


def squeezing_from_moments(a1: complex, a2: complex, n: float, eta: float = 1.0) -> float:
    """Squeezing in dB after a loss channel of transmissivity ``eta``."""
    a1, a2, n = math.sqrt(eta) * a1, eta * a2, eta * n
    vmin = 0.5 + (n - abs(a1) ** 2) - abs(a2 - a1 * a1)
    return -10.0 * math.log10(vmin / 0.5)


def gaussian_kerr_squeezing_db(alpha2: float, kappa: float, eta: float = 1.0) -> float:
    """Linearized Kerr squeezing, V/V0 = 1 + 2 mu^2 - 2 mu sqrt(1 + mu^2) with mu = 2 kappa |alpha|^2."""
    mu = 2 * kappa * alpha2
    s = (math.sqrt(1 + mu * mu) - abs(mu)) ** 2
    return -10.0 * math.log10(eta * s + 1 - eta)


def squeezing_at(
    point: OperatingPoint | str,
    *,
    alpha2: float = CALIBRATED_ALPHA2,
    geometry: KerrGeometry | None = None,
    efficiency: float = DETECTION_EFFICIENCY,
    line_power: float = CALIBRATED_LINE_POWER_W,
) -> tuple[float, float, float]:
    """(chi3, kappa, squeezing dB) for the detuning-to-squeezing chain at ``point``.

    Total transmission is the detection efficiency times (1 - absorption).
    """
    point = OPERATING_POINTS[point] if isinstance(point, str) else point
    geometry = geometry or KerrGeometry()
    chi3 = operating_point_chi3(point, line_power=line_power, mode_area=geometry.mode_area)
    kappa = chi3_to_kerr_rate(chi3, geometry)
    eta = efficiency * (1.0 - point.absorption)
    a1, a2, n = kerr_coherent_moments(math.sqrt(alpha2), kappa)
    return chi3.value, kappa, squeezing_from_moments(a1, a2, n, eta)
