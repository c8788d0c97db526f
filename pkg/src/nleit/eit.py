"""Steady-state coherences, susceptibility spectra and lineshape analysis.

Sign convention, used everywhere in this module: a field of frequency nu on
a transition of frequency nu_0 has one-photon detuning Delta = nu - nu_0,
and the bare probe coherence is (Omega/2) / (Delta - i*gamma), so that
Im rho > 0 means absorption. In the rotating frame the upper level of a
driven transition sits at energy  eps_upper = eps_lower - Delta.

All frequencies, detunings, Rabi frequencies and relaxation rates are
cyclic (Hz). The coherence formulas are invariant under a common rescaling
of these, so no 2*pi appears until hbar enters the susceptibility.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import constants as sc
from scipy import optimize, signal, special
from scipy.ndimage import median_filter, uniform_filter1d

from .atomic import AtomicSystem, Manifold, Transition, _expand_label
from .comb import CombSpectrum
from .errors import DegenerateConfigurationError, InvalidInputError

__all__ = [
    "FieldDrive",
    "ChainSpec",
    "rho13_four_level",
    "rho_chain",
    "lindblad_steady_state",
    "chain_steady_state",
    "steady_state_liouvillian",
    "DrivePattern",
    "PATTERNS",
    "default_pattern",
    "SusceptibilitySpectrum",
    "susceptibility_spectrum",
    "doppler_width",
    "doppler_average",
    "velocity_nodes",
    "LorentzianFit",
    "generalized_lorentzian",
    "fit_lorentzian",
    "fit_lorentzian_curve",
    "Peak",
    "find_peaks",
]


# ---------------------------------------------------------------------------
# chain coherences
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FieldDrive:
    rabi_frequency: float
    detuning: float = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.rabi_frequency) < 0):
            raise InvalidInputError("Rabi frequency must be non-negative")


@dataclass(frozen=True)
class ChainSpec:
    """Probe plus an ordered ladder of links, each (drive, coherence relaxation).

    Link k couples chain level k+1 to level k+2 (levels counted from the
    probe's lower level 0 and upper level 1). Odd links point downward
    (excited -> ground), even links upward, as in a comb-driven zigzag.
    """

    probe: FieldDrive
    links: tuple[tuple[FieldDrive, float], ...] = ()
    probe_relaxation: float = 3.0333e6

    def __post_init__(self):
        object.__setattr__(self, "links", tuple((d, float(g)) for d, g in self.links))
        if not self.probe_relaxation > 0 or any(not g > 0 for _, g in self.links):
            raise InvalidInputError("all relaxation rates must be positive")

    @property
    def n_levels(self) -> int:
        return len(self.links) + 2


def _require_positive(gammas: Iterable[float]) -> None:
    if any(not g > 0 for g in gammas):
        raise InvalidInputError("relaxation rates must be positive")


def rho13_four_level(
    probe: FieldDrive,
    comb_b: FieldDrive,
    comb_c: FieldDrive,
    gammas: tuple[float, float, float],
) -> complex:
    """Weak-probe coherence of the four-level N scheme.

    ``gammas`` is (gamma_13, gamma_12, gamma_14).
    """
    g13, g12, g14 = gammas
    _require_positive(gammas)
    oa, da = probe.rabi_frequency, probe.detuning
    ob, db = comb_b.rabi_frequency, comb_b.detuning
    oc, dc = comb_c.rabi_frequency, comb_c.detuning
    return (oa / 2) / ((da - 1j * g13) + (oc**2 / 4) / ((dc - da + 1j * g12) - (ob**2 / 4) / (dc - da - db + 1j * g14)))


def rho_chain(spec: ChainSpec) -> complex:
    """Continued fraction for an arbitrary ladder, evaluated deepest link first.

    Node k (k >= 1) has energy E_k = r_k + i*gamma_k with r_1 = Delta_1 - Delta_a
    and r_k = r_{k-1} + (-1)^(k+1) Delta_k. The operation order mirrors
    ``rho13_four_level`` so two links reproduce it bit for bit.
    """
    oa, da = spec.probe.rabi_frequency, spec.probe.detuning
    links = spec.links
    if not links:
        return (oa / 2) / (da - 1j * spec.probe_relaxation)
    energies = []
    r = None
    for k, (drive, gamma) in enumerate(links, start=1):
        if k == 1:
            r = drive.detuning - da
        elif k % 2 == 0:
            r = r - drive.detuning
        else:
            r = r + drive.detuning
        energies.append(r + 1j * gamma)
    t = energies[-1]
    for k in range(len(links) - 1, 0, -1):
        t = energies[k - 1] - (links[k][0].rabi_frequency ** 2 / 4) / t
    o1 = links[0][0].rabi_frequency
    return (oa / 2) / ((da - 1j * spec.probe_relaxation) + (o1**2 / 4) / t)


# ---------------------------------------------------------------------------
# Lindblad oracle
# ---------------------------------------------------------------------------


def _liouvillian(h: np.ndarray, jumps: Sequence[np.ndarray]) -> np.ndarray:
    """Superoperator acting on row-major vec(rho)."""
    n = h.shape[0]
    eye = np.eye(n)
    lv = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in jumps:
        cdc = c.conj().T @ c
        lv += np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)
    return lv


def lindblad_steady_state(h: np.ndarray, jumps: Sequence[np.ndarray], *, tol: float = 1e-9) -> np.ndarray:
    """Solve L(rho) = 0 with tr(rho) = 1 by dense linear algebra."""
    n = h.shape[0]
    lv = _liouvillian(np.asarray(h, dtype=complex), [np.asarray(c, dtype=complex) for c in jumps])
    # Replace the first equation (d rho_00 / dt) by the trace condition.
    a = lv.copy()
    a[0, :] = 0.0
    a[0, :: n + 1] = 1.0
    b = np.zeros(n * n, dtype=complex)
    b[0] = 1.0
    scale = np.max(np.abs(lv))
    if scale == 0:
        raise DegenerateConfigurationError("Liouvillian is identically zero")
    a[1:] /= scale
    try:
        cond = np.linalg.cond(a)
        if not np.isfinite(cond) or cond > 1e14:
            raise DegenerateConfigurationError(f"singular Liouvillian (condition number {cond:.3g})")
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConfigurationError(f"singular Liouvillian: {exc}") from exc
    rho = x.reshape(n, n)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -tol:
        raise DegenerateConfigurationError(f"steady state not positive (min eigenvalue {evals.min():.3g})")
    return rho


def chain_steady_state(spec: ChainSpec) -> np.ndarray:
    """Density matrix of the ladder in ``spec`` from the full master equation.

    Each level k >= 1 decays to level 0 at rate gamma_k and is dephased at
    rate gamma_k, so the coherence rho_0k relaxes at exactly gamma_k and the
    weak-probe limit is the continued fraction. Level order: 0 (probe
    lower), 1 (probe upper), then one level per link.
    """
    n = spec.n_levels
    eps = np.zeros(n)
    eps[1] = -spec.probe.detuning
    gammas = [spec.probe_relaxation] + [g for _, g in spec.links]
    h = np.zeros((n, n), dtype=complex)
    h[1, 0] = h[0, 1] = spec.probe.rabi_frequency / 2
    for k, (drive, _) in enumerate(spec.links, start=1):
        a, b = k, k + 1  # link k couples chain levels k and k+1
        if k % 2 == 1:  # downward link: level b is a ground level below a
            eps[b] = eps[a] + drive.detuning
        else:
            eps[b] = eps[a] - drive.detuning
        h[a, b] = h[b, a] = drive.rabi_frequency / 2
    h += np.diag(eps)
    jumps = []
    for k in range(1, n):
        g = gammas[k - 1]
        decay = np.zeros((n, n))
        decay[0, k] = math.sqrt(g)
        deph = np.zeros((n, n))
        deph[k, k] = math.sqrt(g)
        jumps += [decay, deph]
    return lindblad_steady_state(h, jumps)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i: int, j: int) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        self.parent[ri] = rj
        return True


def steady_state_liouvillian(
    system: AtomicSystem,
    drives: Sequence[tuple[Transition | tuple[str, str], FieldDrive]],
    *,
    ground_populations: dict[str, float] | None = None,
) -> np.ndarray:
    """Rotating-wave steady state of the full hyperfine system.

    Excited levels decay at the natural linewidth into the ground levels,
    and ground levels relax among themselves at the ground decoherence
    rate; both repopulate according to ``ground_populations`` (default:
    weighted by 2F+1). Extra pure dephasing brings each driven optical
    coherence up to its transition's relaxation rate when that rate
    exceeds the radiative value. Levels are indexed in ``system.levels``
    order.
    """
    levels = list(system.levels)
    index = {lv.label: i for i, lv in enumerate(levels)}
    n = len(levels)
    ground = [i for i, lv in enumerate(levels) if lv.manifold == Manifold.GROUND]
    excited = [i for i, lv in enumerate(levels) if lv.manifold == Manifold.EXCITED]

    if ground_populations is None:
        weights = np.array([levels[i].degeneracy for i in ground], dtype=float)
    else:
        weights = np.array(
            [ground_populations.get(levels[i].label, 0.0) for i in ground], dtype=float
        )
        if np.any(weights < 0) or weights.sum() <= 0:
            raise InvalidInputError("ground populations must be non-negative and not all zero")
    weights = weights / weights.sum()

    # rotating frame from a spanning forest of the drive graph
    uf = _UnionFind(n)
    adjacency: dict[int, list[tuple[int, float]]] = {i: [] for i in range(n)}
    h = np.zeros((n, n), dtype=complex)
    target: dict[int, float] = {}
    for tr, drive in drives:
        if not isinstance(tr, Transition):
            tr = system.transition(*tr)
        lo, up = index[tr.lower], index[tr.upper]
        if not uf.union(lo, up):
            raise InvalidInputError(
                f"drive on {tr.label} closes a loop; only tree (ladder/chain) topologies admit a rotating frame"
            )
        adjacency[lo].append((up, -drive.detuning))
        adjacency[up].append((lo, drive.detuning))
        h[lo, up] = h[up, lo] = drive.rabi_frequency / 2
        target[up] = max(target.get(up, 0.0), tr.relaxation_rate)
    eps = np.full(n, np.nan)
    for root in [*ground, *excited]:
        if not np.isnan(eps[root]):
            continue
        eps[root] = 0.0
        stack = [root]
        while stack:
            i = stack.pop()
            for j, shift in adjacency[i]:
                if np.isnan(eps[j]):
                    eps[j] = eps[i] + shift
                    stack.append(j)
    h += np.diag(eps)

    gamma_nat = system.natural_linewidth
    gamma_g = system.ground_decoherence
    jumps = []
    for e in excited:
        for w, g in zip(weights, ground):
            if w > 0:
                c = np.zeros((n, n))
                c[g, e] = math.sqrt(gamma_nat * w)
                jumps.append(c)
    for g_from in ground:
        for w, g_to in zip(weights, ground):
            if w > 0:
                c = np.zeros((n, n))
                c[g_to, g_from] = math.sqrt(gamma_g * w)
                jumps.append(c)
    radiative = 0.5 * (gamma_nat + gamma_g)
    for e, g_target in target.items():
        extra = 2.0 * (g_target - radiative)
        if extra > 0:
            c = np.zeros((n, n))
            c[e, e] = math.sqrt(extra)
            jumps.append(c)
    return lindblad_steady_state(h, jumps)


# ---------------------------------------------------------------------------
# comb-driven susceptibility
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DrivePattern:
    """Which transitions the probe and the comb address.

    The probe couples ``probe`` = (ground, excited). The comb couples one
    ground level to a set of excited levels; chains alternate between that
    ground level and the excited set, ``depth`` comb links deep. The
    probe's excited level must be in the comb's excited set.
    """

    name: str
    probe: tuple[str, str]
    comb_ground: str
    comb_excited: tuple[str, ...]
    depth: int

    @property
    def n_levels(self) -> int:
        return self.depth + 2


PATTERNS: dict[str, DrivePattern] = {
    "rb87_n4": DrivePattern("rb87_n4", ("F=2", "F'=1"), "F=1", ("F'=1", "F'=2"), 2),
    "rb85_n6": DrivePattern("rb85_n6", ("F=2", "F'=2"), "F=3", ("F'=2", "F'=3", "F'=4"), 4),
    "rb85_n7": DrivePattern("rb85_n7", ("F=3", "F'=2"), "F=2", ("F'=1", "F'=2", "F'=3"), 5),
}


def default_pattern(system: AtomicSystem) -> DrivePattern:
    return PATTERNS["rb87_n4"] if system.isotope.value == "Rb87" else PATTERNS["rb85_n6"]


@dataclass(frozen=True, eq=False)
class SusceptibilitySpectrum:
    detunings: np.ndarray  # two-photon detuning delta = Delta_c - Delta_a, Hz
    chi: np.ndarray
    probe_one_photon_detuning: float
    chi_background: np.ndarray | None = None  # same system with the comb switched off
    wavelength: float = 780.241e-9
    cell_length: float = 0.075

    def __post_init__(self):
        d = np.asarray(self.detunings, dtype=float)
        c = np.asarray(self.chi, dtype=complex)
        if d.ndim != 1 or d.size == 0 or np.any(np.diff(d) <= 0):
            raise InvalidInputError("detunings must be a non-empty strictly increasing grid")
        if c.shape != d.shape:
            raise InvalidInputError("chi must match the detuning grid")
        object.__setattr__(self, "detunings", d)
        object.__setattr__(self, "chi", c)
        if self.chi_background is not None:
            object.__setattr__(self, "chi_background", np.asarray(self.chi_background, dtype=complex))

    @property
    def wavenumber(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def optical_depth(self) -> np.ndarray:
        return self.wavenumber * self.cell_length * self.chi.imag

    @property
    def transmission(self) -> np.ndarray:
        return np.exp(-self.optical_depth)

    @property
    def transmission_signal(self) -> np.ndarray:
        """Transmission with the comb-free background subtracted."""
        if self.chi_background is None:
            return self.transmission
        bg = np.exp(-self.wavenumber * self.cell_length * self.chi_background.imag)
        return self.transmission - bg

    @property
    def transparency(self) -> np.ndarray:
        """Reduction of Im chi caused by the comb (positive on EIT peaks)."""
        bg = 0.0 if self.chi_background is None else self.chi_background.imag
        return bg - self.chi.imag


def _chi_prefactor(system: AtomicSystem, dipole: float, probe_rabi: float) -> float:
    omega_a = 2 * math.pi * probe_rabi
    return 2 * system.number_density * dipole**2 / (sc.epsilon_0 * sc.hbar * omega_a)


class _CombTree:
    """Sum over comb-line chains attached to the probe's excited level."""

    def __init__(self, system: AtomicSystem, comb: CombSpectrum, pattern: DrivePattern, window: float):
        self.comb = comb
        self.window = window
        self.rep = comb.repetition_rate
        self.n_lines = len(comb)
        self.span = int(math.ceil(window / self.rep))
        self.offsets = np.arange(-self.span, self.span + 1)
        g = pattern.comb_ground
        ref = comb.first_frequency
        self.excited = [_expand_label(e, Manifold.EXCITED) for e in pattern.comb_excited]
        self.nu = {}
        self.strength = {}
        self.gamma_e = {}
        for e in self.excited:
            tr = system.transition(g, e)
            # transition frequency relative to line 0, in Hz
            self.nu[e] = system.transition_frequency(g, e) - ref
            self.strength[e] = tr.relative_strength
            self.gamma_e[e] = tr.relaxation_rate
        self.gamma_g = system.ground_decoherence
        self.rabi2 = np.abs(comb.amplitudes) ** 2
        self.depth = pattern.depth

    def _children(self, r: np.ndarray, e: str, up: bool, shift: float):
        """Candidate lines n, their child r and squared Rabi for one transition.

        ``r`` has shape (..., ) and the output gains a trailing axis of
        candidates. A down link adds the line detuning, an up link subtracts it.
        """
        # Excited nodes carry the Doppler shift (r = r_static + shift); ground
        # nodes are Raman resonances and shift-free for co-propagating beams.
        # Lines are chosen and windowed on r_static, so every velocity class
        # sees the same chain and the velocity integrand stays smooth.
        sign = -1.0 if up else 1.0
        r_static = r if up else r - shift
        n0 = np.rint((self.nu[e] - sign * r_static) / self.rep)
        n = n0[..., None] + self.offsets
        d_static = n * self.rep - self.nu[e]
        r_child = r[..., None] + sign * (d_static - shift)
        valid = (n >= 0) & (n < self.n_lines) & (np.abs(r_static[..., None] + sign * d_static) < self.window)
        idx = np.clip(n, 0, self.n_lines - 1).astype(np.int64)
        om2 = np.where(valid, self.rabi2[idx] * self.strength[e], 0.0)
        return idx, r_child, om2

    def _t(self, r, kind, e, depth_left, parent, shift):
        """Node denominator T = E - sum_children (Omega^2/4) / T_child.

        ``parent`` is (line index array, excited label) of the link that led
        here; re-using that same line on the same transition would just
        retrace the link, so it is excluded.
        """
        gamma = self.gamma_g if kind == "g" else self.gamma_e[e]
        t = r + 1j * gamma
        if depth_left == 0:
            return t
        return t - self._sigma(r, kind, e, depth_left, parent, shift)

    def _sigma(self, r, kind, e, depth_left, parent, shift):
        total = np.zeros(r.shape, dtype=complex)
        p_idx, p_e = parent
        if kind == "e":
            idx, rc, om2 = self._children(r, e, up=False, shift=shift)
            om2 = np.where(idx == p_idx[..., None], 0.0, om2)
            tc = self._t(rc, "g", None, depth_left - 1, (idx, e), shift)
            total += np.sum((om2 / 4) / tc, axis=-1)
        else:
            for ex in self.excited:
                idx, rc, om2 = self._children(r, ex, up=True, shift=shift)
                if ex == p_e:
                    om2 = np.where(idx == p_idx[..., None], 0.0, om2)
                tc = self._t(rc, "e", ex, depth_left - 1, (idx, ex), shift)
                total += np.sum((om2 / 4) / tc, axis=-1)
        return total

    def root_sigma(self, delta_a: np.ndarray, e_a: str, shift: float = 0.0) -> np.ndarray:
        """Self-energy seen by the probe coherence; the root has r = -Delta_a."""
        r = -np.asarray(delta_a, dtype=float)
        if self.depth == 0:
            return np.zeros(r.shape, dtype=complex)
        idx, rc, om2 = self._children(r, e_a, up=False, shift=shift)
        tc = self._t(rc, "g", None, self.depth - 1, (idx, e_a), shift)
        return np.sum((om2 / 4) / tc, axis=-1)


def susceptibility_spectrum(
    system: AtomicSystem,
    comb: CombSpectrum,
    probe_rabi: float,
    scan: np.ndarray,
    *,
    pattern: DrivePattern | None = None,
    window: float | None = None,
    probe_detuning: float = 0.0,
    doppler: str | None = None,
    doppler_order: int = 64,
    doppler_step: float | None = None,
    cell_length: float = 0.075,
    chunk: int = 64,
) -> SusceptibilitySpectrum:
    """Probe susceptibility versus two-photon detuning for a comb-driven chain.

    The reference comb line is the one whose detuning from the (comb ground
    -> probe excited) transition is nearest ``probe_detuning``; its detuning
    Delta is reported as the probe one-photon detuning, and the probe sits
    at Delta - delta for each scan value delta (delta = 0 is the Raman
    resonance with the reference line). Chains of comb lines hang off
    the probe's excited level; links whose node detuning exceeds ``window``
    (default twice the repetition rate) are dropped. With ``doppler`` set
    to "uniform" or "gauss-hermite" the result is averaged over a
    Maxwell-Boltzmann velocity distribution (co-propagating beams); see
    ``velocity_nodes`` for the two rules.
    """
    scan = np.asarray(scan, dtype=float)
    if scan.ndim != 1 or scan.size == 0 or np.any(np.diff(scan) <= 0):
        raise InvalidInputError("scan must be a non-empty strictly increasing grid")
    if len(comb) == 0:
        raise InvalidInputError("empty comb")
    if not probe_rabi > 0:
        raise InvalidInputError("probe Rabi frequency must be positive")
    pattern = pattern or default_pattern(system)
    window = 2.0 * comb.repetition_rate if window is None else float(window)

    g_p, e_a = pattern.probe
    e_a = _expand_label(e_a, Manifold.EXCITED)
    probe_tr = system.transition(g_p, e_a)
    nu_c = system.transition_frequency(pattern.comb_ground, e_a)
    ref_line = comb.nearest_line(nu_c + probe_detuning)
    delta_ref = comb.first_frequency + ref_line * comb.repetition_rate - nu_c
    delta_a = delta_ref - scan
    tree = _CombTree(system, comb, pattern, window)
    g13 = probe_tr.relaxation_rate

    def rho_over_omega(da: np.ndarray, shift: float) -> np.ndarray:
        out = np.empty(da.shape, dtype=complex)
        for s in range(0, da.size, chunk):
            part = da[s : s + chunk]
            # a velocity class sees every field shifted by -shift; the root r
            # uses the shifted probe detuning and line detunings shift too
            sig = tree.root_sigma(part - shift, e_a, shift=shift)
            out[s : s + chunk] = 0.5 / ((part - shift - 1j * g13) + sig)
        return out

    def bare(da: np.ndarray, shift: float) -> np.ndarray:
        return 0.5 / ((da - shift) - 1j * g13)

    if doppler:
        step = doppler_step
        if step is None and doppler == "uniform":
            step = 0.5 * min(tree.gamma_e[e] for e in tree.excited)
        shifts, weights = velocity_nodes(doppler_width(system), doppler, order=doppler_order, step=step)
        rho = np.zeros(scan.shape, dtype=complex)
        rho_bg = np.zeros(scan.shape, dtype=complex)
        for u, w in zip(shifts, weights):
            rho += w * rho_over_omega(delta_a, u)
            rho_bg += w * bare(delta_a, u)
    else:
        rho = rho_over_omega(delta_a, 0.0)
        rho_bg = bare(delta_a, 0.0)

    # rho is per unit probe Rabi frequency, so use Omega_a = 1 Hz in the prefactor
    pref = _chi_prefactor(system, probe_tr.dipole_moment, 1.0)
    chi = pref * rho
    chi_bg = pref * rho_bg
    return SusceptibilitySpectrum(
        detunings=scan,
        chi=chi,
        probe_one_photon_detuning=float(delta_ref),
        chi_background=chi_bg,
        wavelength=system.data.wavelength_m,
        cell_length=cell_length,
    )


# ---------------------------------------------------------------------------
# Doppler averaging
# ---------------------------------------------------------------------------


def doppler_width(system: AtomicSystem) -> float:
    """Standard deviation of the Doppler shift k*v/(2 pi) in Hz."""
    data = system.data
    sigma_v = math.sqrt(sc.k * system.temperature / data.mass_kg)
    return sigma_v / data.wavelength_m


def _gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order < 1:
        raise InvalidInputError("quadrature order must be >= 1")
    # scipy switches to an asymptotic rule at high order where hermgauss overflows
    x, w = special.roots_hermite(order)
    return x, w / math.sqrt(math.pi)


DOPPLER_EXTENT_SIGMA = 5.0


def velocity_nodes(
    width: float,
    method: str = "uniform",
    *,
    order: int = 64,
    step: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Doppler shifts (Hz) and weights summing to 1 for a Gaussian of std ``width``.

    "gauss-hermite" uses ``order`` nodes; it is spectrally accurate only if
    the node spacing near the centre (about 2.2 width / sqrt(order))
    resolves every velocity-dependent resonance. "uniform" is the
    trapezoid rule on a grid of spacing ``step`` over +-5 width, which
    converges exponentially for Lorentzian features wider than ``step``.
    """
    if not width > 0:
        raise InvalidInputError("Doppler width must be positive")
    if method == "gauss-hermite":
        nodes, weights = _gauss_hermite(order)
        return math.sqrt(2.0) * width * nodes, weights
    if method != "uniform":
        raise InvalidInputError(f"unknown Doppler rule {method!r}")
    if step is None or not step > 0:
        raise InvalidInputError("uniform Doppler rule needs a positive step")
    half = int(math.ceil(DOPPLER_EXTENT_SIGMA * width / step))
    shifts = step * np.arange(-half, half + 1, dtype=float)
    weights = np.exp(-0.5 * (shifts / width) ** 2)
    return shifts, weights / weights.sum()


def doppler_average(
    spectrum_fn: Callable[[np.ndarray], np.ndarray],
    system: AtomicSystem | None = None,
    *,
    width: float | None = None,
    method: str = "uniform",
    order: int = 64,
    step: float | None = None,
) -> Callable[[np.ndarray], np.ndarray]:
    """Average f(Delta - k v) over a 1-D Maxwell-Boltzmann velocity distribution."""
    if width is None:
        if system is None:
            raise InvalidInputError("need a system or an explicit Doppler width")
        width = doppler_width(system)
    if step is None and system is not None:
        step = 0.5 * min(t.relaxation_rate for t in system.transitions)
    shifts, weights = velocity_nodes(width, method, order=order, step=step)

    def averaged(delta):
        delta = np.asarray(delta, dtype=float)
        acc = None
        for u, w in zip(shifts, weights):
            term = w * np.asarray(spectrum_fn(delta - u))
            acc = term if acc is None else acc + term
        return acc

    return averaged


# ---------------------------------------------------------------------------
# lineshape fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LorentzianFit:
    gamma: float
    delta0: float
    A: float
    B: float
    C: float
    residual_rms: float
    valid: bool = True
    message: str = ""


def generalized_lorentzian(delta, gamma, delta0, a, b, c=0.0):
    delta = np.asarray(delta, dtype=float)
    x = delta - delta0
    return gamma * (a * gamma + b * x) / (gamma**2 + (delta0 - delta) ** 2 + c)


def fit_lorentzian_curve(
    x: np.ndarray,
    y: np.ndarray,
    *,
    fit_c: bool = False,
    c: float = 0.0,
    max_nfev: int = 2000,
) -> LorentzianFit:
    """Least-squares fit of the generalized (Fano-like) Lorentzian.

    gamma, A and C are not separately identifiable (only gamma^2 + C,
    A gamma^2 and B gamma are), so C is held at ``c`` unless ``fit_c``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 8:
        raise InvalidInputError("fit window needs at least 8 samples")
    xs = max(float(np.ptp(x)), 1e-300)
    ys = max(float(np.max(np.abs(y))), 1e-300)
    u = (x - x.mean()) / xs
    v = y / ys
    # initial guess from the extremum and its half-width
    k = int(np.argmax(np.abs(v)))
    half = np.abs(v) >= 0.5 * abs(v[k])
    width = max(float(np.ptp(u[half])) / 2, 2 * float(np.min(np.diff(u))))
    p0 = [width, u[k], v[k], 0.0]
    if fit_c:
        p0.append(c / xs**2)

    def model(p):
        cc = p[4] if fit_c else c / xs**2
        return generalized_lorentzian(u, p[0], p[1], p[2], p[3], cc)

    lower = [1e-12, -np.inf, -np.inf, -np.inf] + ([-np.inf] if fit_c else [])
    res = optimize.least_squares(
        lambda p: model(p) - v, p0, bounds=(lower, np.inf), method="trf",
        x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev,
    )
    p = res.x
    rms = float(np.sqrt(np.mean((model(p) - v) ** 2)))
    gamma = p[0] * xs
    fit = LorentzianFit(
        gamma=float(gamma),
        delta0=float(p[1] * xs + x.mean()),
        A=float(p[2] * ys),
        B=float(p[3] * ys),
        C=float(p[4] * xs**2) if fit_c else float(c),
        residual_rms=rms * ys,
        valid=bool(res.status > 0),
        message=str(res.message),
    )
    if not fit.valid:
        warnings.warn(f"Lorentzian fit did not converge: {res.message}", RuntimeWarning, stacklevel=2)
    return fit


def fit_lorentzian(
    spectrum: SusceptibilitySpectrum,
    window: tuple[float, float],
    *,
    fit_c: bool = False,
) -> LorentzianFit:
    """Fit the comb-induced transparency -Im(chi - chi_background) in a window."""
    lo, hi = window
    sel = (spectrum.detunings >= lo) & (spectrum.detunings <= hi)
    if int(sel.sum()) < 8:
        raise InvalidInputError("fit window needs at least 8 samples")
    return fit_lorentzian_curve(spectrum.detunings[sel], spectrum.transparency[sel], fit_c=fit_c)


# ---------------------------------------------------------------------------
# peak finding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Peak:
    position: float
    height: float
    width: float
    prominence: float = 0.0


def find_peaks(
    x: np.ndarray,
    y: np.ndarray,
    *,
    background: np.ndarray | None = None,
    prominence_factor: float = 3.0,
    rms_window: int | None = None,
) -> list[Peak]:
    """Local maxima standing out of the background-subtracted curve.

    Without an explicit ``background`` a running median (an eighth of the
    curve wide) is removed first. A maximum is kept when its prominence
    exceeds ``prominence_factor`` times the RMS of the residual in a
    window around it. Positions are refined by a parabola through the
    three samples at the maximum.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 16 or y.shape != x.shape:
        raise InvalidInputError("peak finding needs a curve of at least 16 samples")
    if background is None:
        size = max(3, x.size // 8) | 1
        background = median_filter(y, size=size, mode="nearest")
    resid = y - np.asarray(background, dtype=float)
    if not np.any(resid != resid[0]):
        return []
    win = rms_window or max(5, x.size // 4)
    local_rms = np.sqrt(np.clip(uniform_filter1d(resid**2, size=win, mode="nearest"), 0.0, None))
    idx, props = signal.find_peaks(resid, prominence=0.0)
    if idx.size == 0:
        return []
    keep = props["prominences"] > prominence_factor * local_rms[idx]
    keep &= props["prominences"] > 1e-9 * float(np.ptp(resid))
    idx = idx[keep]
    prominences = props["prominences"][keep]
    if idx.size == 0:
        return []
    widths, _, left, right = signal.peak_widths(resid, idx, rel_height=0.5)
    grid = np.arange(x.size)
    out = []
    for i, prom, lft, rgt in zip(idx, prominences, left, right):
        pos = x[i]
        if 0 < i < x.size - 1:
            y0, y1, y2 = resid[i - 1], resid[i], resid[i + 1]
            denom = y0 - 2 * y1 + y2
            if denom != 0:
                frac = 0.5 * (y0 - y2) / denom
                pos = float(np.interp(i + frac, grid, x))
        width = float(np.interp(rgt, grid, x) - np.interp(lft, grid, x))
        out.append(Peak(position=float(pos), height=float(resid[i]), width=width, prominence=float(prom)))
    return out
