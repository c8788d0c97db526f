"""Optical frequency comb lines, spectral phase masks and mask enhancement.

A comb is stored as its first line frequency, the repetition rate and one
complex amplitude per line. Amplitudes are Rabi-equivalent frequencies in
Hz for a unit-strength hyperfine transition (see
``IsotopeData.reference_dipole_cm``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DegenerateConfigurationError, InvalidInputError

__all__ = [
    "CombSpectrum",
    "PhaseMask",
    "make_comb",
    "apply_phase_mask",
    "enhancement_factor",
    "mask_phase_scan",
    "mask_center_scan",
]

# Relative slack on the closed mask boundary so that a line sitting exactly
# on the edge is masked despite rounding in f0 + n * rep.
_EDGE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class CombSpectrum:
    repetition_rate: float
    center_frequency: float
    first_frequency: float
    amplitudes: np.ndarray  # complex, one per line

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size == 0:
            raise InvalidInputError("a comb needs at least one line")
        if not np.all(np.isfinite(amps)):
            raise InvalidInputError("comb amplitudes must be finite")
        if not self.repetition_rate > 0:
            raise InvalidInputError("repetition rate must be positive")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def __len__(self) -> int:
        return self.amplitudes.size

    @property
    def frequencies(self) -> np.ndarray:
        return self.first_frequency + self.repetition_rate * np.arange(len(self))

    @property
    def lines(self) -> list[tuple[float, complex]]:
        return list(zip(self.frequencies.tolist(), self.amplitudes.tolist()))

    def with_amplitudes(self, amplitudes: np.ndarray) -> "CombSpectrum":
        return CombSpectrum(self.repetition_rate, self.center_frequency, self.first_frequency, amplitudes)

    def scaled(self, factor: float) -> "CombSpectrum":
        return self.with_amplitudes(self.amplitudes * factor)

    def shifted(self, offset: float) -> "CombSpectrum":
        """Same amplitudes with every line moved by ``offset`` Hz."""
        return CombSpectrum(
            self.repetition_rate, self.center_frequency + offset, self.first_frequency + offset, self.amplitudes
        )

    def same_grid(self, other: "CombSpectrum") -> bool:
        return (
            len(self) == len(other)
            and self.repetition_rate == other.repetition_rate
            and self.first_frequency == other.first_frequency
        )

    def nearest_line(self, frequency: float) -> int:
        n = int(round((frequency - self.first_frequency) / self.repetition_rate))
        return min(max(n, 0), len(self) - 1)

    def total_power_proxy(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))


@dataclass(frozen=True)
class PhaseMask:
    center: float
    width: float
    phase: float

    def __post_init__(self):
        if not self.width > 0:
            raise InvalidInputError("mask width must be positive")


def make_comb(
    repetition_rate: float,
    center: float,
    span: float,
    envelope: Literal["flat", "gaussian"] = "flat",
    amplitude: float = 1.0,
) -> CombSpectrum:
    """Comb of floor(span/rep) + 1 lines placed symmetrically about ``center``.

    An odd line count puts a line exactly on ``center``. The gaussian
    envelope has its 1/e^2 intensity half-width at span/2.
    """
    if not repetition_rate > 0:
        raise InvalidInputError("repetition rate must be positive")
    if span < repetition_rate:
        raise InvalidInputError("span must be at least one repetition period")
    n = int(math.floor(span / repetition_rate * (1 + 1e-12))) + 1
    first = center - 0.5 * (n - 1) * repetition_rate
    if envelope == "flat":
        amps = np.full(n, amplitude, dtype=complex)
    elif envelope == "gaussian":
        k = np.arange(n) - 0.5 * (n - 1)
        half = 0.5 * span / repetition_rate
        amps = amplitude * np.exp(-((k / half) ** 2)).astype(complex)
    else:
        raise InvalidInputError(f"unknown envelope {envelope!r}")
    return CombSpectrum(repetition_rate, center, first, amps)


def _mask_selector(comb: CombSpectrum, mask: PhaseMask) -> np.ndarray:
    half = 0.5 * mask.width
    tol = _EDGE_RTOL * max(abs(mask.center), half, comb.repetition_rate)
    return np.abs(comb.frequencies - mask.center) <= half + tol


def apply_phase_mask(comb: CombSpectrum, mask: PhaseMask) -> CombSpectrum:
    """Multiply lines inside the closed window |f - center| <= width/2 by e^{i phase}."""
    if mask.phase == 0.0:
        return comb
    sel = _mask_selector(comb, mask)
    amps = comb.amplitudes.copy()
    amps[sel] *= np.exp(1j * mask.phase)
    return comb.with_amplitudes(amps)


def _amplitude_weights(freqs: np.ndarray, resonance: float, gamma_eff: float) -> np.ndarray:
    delta = freqs - resonance
    w = np.empty(delta.shape, dtype=complex)
    resonant = np.abs(delta) < 0.5 * gamma_eff
    above = ~resonant & (delta > 0)
    below = ~resonant & (delta < 0)
    w[resonant] = 1.0 / gamma_eff
    w[above] = 1j / np.abs(delta[above])
    w[below] = -1j / np.abs(delta[below])
    return w


def enhancement_factor(
    comb: CombSpectrum,
    masked: CombSpectrum,
    resonance: float,
    gamma_eff: float = 30e6,
) -> float:
    """|S_masked|^2 / |S_unmasked|^2 for the pathway sum S = sum_k a_k w_k.

    Off-resonant lines carry w_k = +-i/|Delta_k| (sign of Delta_k); a line
    within gamma_eff/2 of the resonance counts as resonant with real weight
    1/gamma_eff.
    """
    if not comb.same_grid(masked):
        raise InvalidInputError("masked comb must share the unmasked line grid")
    w = _amplitude_weights(comb.frequencies, resonance, gamma_eff)
    s0 = np.sum(comb.amplitudes * w)
    if abs(s0) == 0.0:
        raise DegenerateConfigurationError("unmasked pathway amplitude vanishes")
    if masked is comb or np.array_equal(masked.amplitudes, comb.amplitudes):
        return 1.0
    s1 = np.sum(masked.amplitudes * w)
    return float(abs(s1) ** 2 / abs(s0) ** 2)


def mask_phase_scan(
    comb: CombSpectrum, resonance: float, width: float, phases: np.ndarray, *, gamma_eff: float = 30e6
) -> np.ndarray:
    return np.array(
        [enhancement_factor(comb, apply_phase_mask(comb, PhaseMask(resonance, width, p)), resonance, gamma_eff)
         for p in phases]
    )


def mask_center_scan(
    comb: CombSpectrum,
    resonance: float,
    width: float,
    phase: float,
    offsets: np.ndarray,
    *,
    gamma_eff: float = 30e6,
) -> np.ndarray:
    return np.array(
        [enhancement_factor(comb, apply_phase_mask(comb, PhaseMask(resonance + o, width, phase)), resonance, gamma_eff)
         for o in offsets]
    )
