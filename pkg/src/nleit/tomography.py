"""Homodyne detection forward model and filtered back-projection.

Quadrature pdfs come from the Hermite-function expansion of the density
matrix. Sampling is by inverse CDF on a fine grid, with one child seed per
phase spawned from the master seed (``numpy.random.SeedSequence.spawn``
in phase order), so a dataset depends only on (state, phases, n, seed).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, InvalidInputError
from .quantum import QuantumState, WignerGrid, loss_channel

__all__ = [
    "hermite_functions",
    "quadrature_pdf",
    "QuadratureDataset",
    "sample_homodyne",
    "default_phases",
    "histogram",
    "inverse_radon",
    "Reconstruction",
    "reconstruction_error",
    "filter_kernel",
]

MIN_PHASES = 12
MIN_SAMPLES_PER_PHASE = 1000
PHASE_ATOL = 1e-9


def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """psi_0..psi_{n_max-1} at x, shape (n_max, len(x)), by the stable three-term recurrence."""
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max, x.size))
    out[0] = math.pi**-0.25 * np.exp(-0.5 * x**2)
    if n_max > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def _default_axis(state: QuantumState, points: int = 4001) -> np.ndarray:
    half = math.sqrt(2 * state.dim + 1) + 6.0
    return np.linspace(-half, half, points)


def quadrature_pdf(
    state: QuantumState, theta: float, x: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(x, <x_theta|rho|x_theta>) on ``x`` (a default grid covers the truncation)."""
    x = _default_axis(state) if x is None else np.asarray(x, dtype=float)
    psi = hermite_functions(state.dim, x)
    n = np.arange(state.dim)
    phase = np.exp(-1j * theta * n)
    amp = psi * phase[:, None]
    pdf = np.einsum("mx,mn,nx->x", amp, state.rho, amp.conj()).real
    return x, np.maximum(pdf, 0.0)


@dataclass(frozen=True, eq=False)
class QuadratureDataset:
    phases: np.ndarray  # one entry per record
    values: np.ndarray
    seed: int
    efficiency: float = 1.0

    def __post_init__(self):
        ph = np.asarray(self.phases, dtype=float)
        va = np.asarray(self.values, dtype=float)
        if ph.shape != va.shape or ph.ndim != 1:
            raise InvalidInputError("phases and values must be matching 1-D arrays")
        if np.any((ph < 0) | (ph >= 2 * math.pi)):
            raise InvalidInputError("phases must lie in [0, 2 pi)")
        if not 0 < self.efficiency <= 1:
            raise InvalidInputError("efficiency must lie in (0, 1]")
        object.__setattr__(self, "phases", ph)
        object.__setattr__(self, "values", va)

    def __len__(self) -> int:
        return self.values.size

    def distinct_phases(self) -> np.ndarray:
        return _cluster(self.phases)

    def at_phase(self, phase: float) -> np.ndarray:
        sel = np.abs(self.phases - phase) <= PHASE_ATOL
        return self.values[sel]

    def concatenate(self, other: "QuadratureDataset") -> "QuadratureDataset":
        return QuadratureDataset(
            np.concatenate([self.phases, other.phases]),
            np.concatenate([self.values, other.values]),
            self.seed,
            self.efficiency,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"#meta seed={self.seed} efficiency={self.efficiency!r}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phase_rad", "quadrature"])
        for ph, v in zip(self.phases, self.values):
            w.writerow([f"{ph:.17g}", f"{v:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "QuadratureDataset":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#meta"):
            raise DataFormatError("dataset must start with a '#meta' header line", row=1)
        meta = {}
        for item in lines[0][len("#meta"):].split():
            key, sep, val = item.partition("=")
            if not sep:
                raise DataFormatError(f"bad #meta entry {item!r}", row=1)
            meta[key] = val
        try:
            seed = int(meta["seed"])
            eff = float(meta["efficiency"])
        except (KeyError, ValueError) as exc:
            raise DataFormatError(f"#meta needs integer seed and float efficiency ({exc})", row=1) from exc
        if len(lines) < 2 or [c.strip() for c in lines[1].split(",")] != ["phase_rad", "quadrature"]:
            raise DataFormatError("expected header 'phase_rad,quadrature'", row=2)
        phases, values = [], []
        for row, line in enumerate(lines[2:], start=3):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataFormatError("expected two columns", row=row)
            try:
                phases.append(float(parts[0]))
                values.append(float(parts[1]))
            except ValueError as exc:
                raise DataFormatError(f"not a number: {exc}", row=row) from exc
        try:
            return cls(np.array(phases), np.array(values), seed, eff)
        except InvalidInputError as exc:
            raise DataFormatError(str(exc)) from exc


def _cluster(phases: np.ndarray) -> np.ndarray:
    u = np.unique(phases)
    if u.size == 0:
        return u
    keep = np.concatenate([[True], np.diff(u) > PHASE_ATOL])
    return u[keep]


def default_phases(n: int = 24) -> np.ndarray:
    return np.arange(n) * (math.pi / n)


def sample_homodyne(
    state: QuantumState,
    phases,
    n_per_phase: int,
    seed: int,
    *,
    efficiency: float = 1.0,
    grid_points: int = 8001,
) -> QuadratureDataset:
    """Draw ``n_per_phase`` quadrature values at each phase.

    Efficiency below one is applied as a loss channel before detection.
    """
    if n_per_phase < 1:
        raise InvalidInputError("n_per_phase must be at least 1")
    if not 0 < efficiency <= 1:
        raise InvalidInputError("efficiency must lie in (0, 1]")
    phases = np.mod(np.asarray(phases, dtype=float), 2 * math.pi)
    detected = loss_channel(state, efficiency) if efficiency < 1 else state
    x = _default_axis(detected, grid_points)
    children = np.random.SeedSequence(seed).spawn(phases.size)
    out_p, out_v = [], []
    for theta, child in zip(phases, children):
        _, pdf = quadrature_pdf(detected, theta, x)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(x))])
        cdf /= cdf[-1]
        # drop flat stretches so the inverse is single valued
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        u = np.random.default_rng(child).random(n_per_phase)
        out_v.append(np.interp(u, cdf[keep], x[keep]))
        out_p.append(np.full(n_per_phase, theta))
    return QuadratureDataset(np.concatenate(out_p), np.concatenate(out_v), int(seed), float(efficiency))


def histogram(data: QuadratureDataset, phase: float, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """(counts, edges) at one phase, edges uniform over that phase's data range."""
    vals = data.at_phase(phase)
    if vals.size == 0:
        raise InvalidInputError(f"phase {phase!r} not present in dataset")
    if bins < 1:
        raise InvalidInputError("bins must be positive")
    lo, hi = float(vals.min()), float(vals.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(vals, bins=bins, range=(lo, hi))
    return counts, edges


# ---------------------------------------------------------------------------
# filtered back-projection
# ---------------------------------------------------------------------------


def filter_kernel(z: np.ndarray, cutoff: float, rolloff: float = 0.5, n_k: int = 4097) -> np.ndarray:
    """K(z) = int_0^kc k A(k) cos(k z) dk for the apodized ramp filter.

    ``cutoff`` is a spatial frequency in cycles per quadrature unit, so
    kc = 2 pi cutoff. A(k) is a raised-cosine roll-off: flat up to
    (1 - rolloff) kc, then a half cosine down to zero at kc. rolloff = 1
    gives the Hann window.
    """
    if not 0 < rolloff <= 1:
        raise InvalidInputError("rolloff must lie in (0, 1]")
    kc = 2 * math.pi * cutoff
    k = np.linspace(0.0, kc, n_k)
    k0 = (1.0 - rolloff) * kc
    a = np.where(k <= k0, 1.0, 0.5 * (1.0 + np.cos(math.pi * (k - k0) / (kc - k0))))
    z = np.asarray(z, dtype=float)
    integrand = (k * a)[None, :] * np.cos(np.outer(z.ravel(), k))
    return np.trapezoid(integrand, k, axis=1).reshape(z.shape)


@dataclass(frozen=True, eq=False)
class Reconstruction:
    wigner: WignerGrid
    raw_norm: float
    renormalized: bool
    std_error: np.ndarray  # sampling standard error per grid point, same scaling as wigner

    def statistical_floor(self, n_sigma: float = 4.0) -> float:
        """Largest n_sigma * standard error on the grid."""
        return float(n_sigma * np.max(self.std_error))


def _folded(data: QuadratureDataset) -> tuple[np.ndarray, np.ndarray]:
    """Map phase theta in [pi, 2pi) to theta - pi with x -> -x."""
    ph = data.phases.copy()
    va = data.values.copy()
    upper = ph >= math.pi - PHASE_ATOL
    ph[upper] -= math.pi
    va[upper] = -va[upper]
    ph[np.abs(ph) <= PHASE_ATOL] = 0.0
    return ph, va


def inverse_radon(
    data: QuadratureDataset,
    x: np.ndarray,
    p: np.ndarray | None = None,
    cutoff: float = 2.5,
    *,
    renormalize: bool = True,
    rolloff: float = 0.5,
    bin_width: float = 0.02,
    min_samples: int = MIN_SAMPLES_PER_PHASE,
) -> Reconstruction:
    """Wigner function from homodyne data by filtered back-projection.

    W(x, p) = 1/(2 pi^2) int_0^pi dtheta int dy pr(y, theta) K(x cos theta + p sin theta - y).

    Samples are binned on a fixed grid of width ``bin_width`` centred on
    zero, so the estimate is linear in the empirical measure. Phases are
    integrated with the trapezoid rule on the periodic interval [0, pi).
    """
    x = np.asarray(x, dtype=float)
    p = x if p is None else np.asarray(p, dtype=float)
    ph, va = _folded(data)
    thetas = _cluster(ph)
    if thetas.size < MIN_PHASES:
        raise InvalidInputError(
            f"inverse Radon needs at least {MIN_PHASES} distinct phases in [0, pi); got {thetas.size}"
        )
    if not cutoff > 0:
        raise InvalidInputError("cutoff must be positive")

    reach = math.hypot(np.max(np.abs(x)), np.max(np.abs(p)))
    span = max(reach, float(np.max(np.abs(va)))) + 1.0
    nb = int(math.ceil(span / bin_width))
    centers = bin_width * np.arange(-nb, nb + 1)
    edges = np.concatenate([centers - 0.5 * bin_width, [centers[-1] + 0.5 * bin_width]])
    # filtered projections are evaluated on t = centers grid (reach <= span)
    kern = filter_kernel(bin_width * np.arange(-2 * nb, 2 * nb + 1), cutoff, rolloff)

    # trapezoid weights on the periodic phase circle [0, pi)
    order = np.argsort(thetas)
    thetas = thetas[order]
    gaps = np.diff(np.concatenate([thetas, [thetas[0] + math.pi]]))
    weights = 0.5 * (gaps + np.roll(gaps, 1))

    xx, pp = np.meshgrid(x, p)
    w = np.zeros(xx.shape)
    var = np.zeros(xx.shape)
    for theta, wt in zip(thetas, weights):
        vals = va[np.abs(ph - theta) <= PHASE_ATOL]
        if vals.size < min_samples:
            raise InvalidInputError(
                f"phase {theta:.6g} has {vals.size} samples; at least {min_samples} are required"
            )
        counts, _ = np.histogram(vals, bins=edges)
        density = counts / (vals.size * bin_width)
        # q(t_i) = sum_j density_j * h * K(t_i - y_j)
        q = np.convolve(density * bin_width, kern)[2 * nb : 4 * nb + 1]
        q2 = np.convolve(density * bin_width, kern**2)[2 * nb : 4 * nb + 1]
        t = xx * math.cos(theta) + pp * math.sin(theta)
        qt = np.interp(t, centers, q)
        w += wt * qt
        var += wt**2 * np.maximum(np.interp(t, centers, q2) - qt**2, 0.0) / vals.size
    scale = 1.0 / (2 * math.pi**2)
    w *= scale
    err = np.sqrt(var) * scale
    grid = WignerGrid(x, p, w)
    raw = grid.norm
    if renormalize and raw != 0:
        grid = WignerGrid(x, p, w / raw)
        err = err / abs(raw)
    return Reconstruction(grid, raw, renormalize, err)


def reconstruction_error(w_est: WignerGrid, w_ref: WignerGrid) -> tuple[float, float, float]:
    """(L-infinity, L2 norm of the difference, normalized overlap)."""
    if not w_est.same_axes(w_ref):
        raise InvalidInputError("reconstruction and reference must share the same grid")
    d = w_est.values - w_ref.values
    l_inf = float(np.max(np.abs(d)))
    l2 = math.sqrt(max(w_ref.integrate(d * d), 0.0))
    ee = w_est.integrate(w_est.values**2)
    rr = w_ref.integrate(w_ref.values**2)
    er = w_ref.integrate(w_est.values * w_ref.values)
    fid = er / math.sqrt(ee * rr) if ee > 0 and rr > 0 else 0.0
    return l_inf, l2, float(fid)
