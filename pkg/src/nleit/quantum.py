"""Single-mode states in a truncated Fock basis.

Quadratures are x = (a + a^dag)/sqrt(2) and p = (a - a^dag)/(i sqrt(2)),
so [x, p] = i, the vacuum variance is 1/2 and the Wigner function
integrates to 1. The rotated quadrature is
x_theta = (a e^{-i theta} + a^dag e^{i theta}) / sqrt(2).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import gammaln

from .errors import DataFormatError, InvalidInputError, TruncationError

__all__ = [
    "QuantumState",
    "WignerGrid",
    "required_dim",
    "coherent_state",
    "fock_state",
    "vacuum",
    "squeezed_vacuum",
    "displace",
    "kerr_evolve",
    "loss_channel",
    "wigner",
    "wigner_centered",
    "moments",
    "quadrature_variance",
    "squeezing_db",
    "negativity",
]

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-9
TAIL_TOL = 1e-6


def required_dim(alpha: complex) -> int:
    """Truncation whose top tenth starts beyond |alpha|^2 + 7|alpha| + 10.

    The Poisson tail past seven standard deviations is far below TAIL_TOL,
    so a coherent state of this amplitude passes ``validate``.
    """
    a = abs(alpha)
    return int(math.ceil((a * a + 7 * a + 10) / 0.9)) + 1


@dataclass(frozen=True, eq=False)
class QuantumState:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 1:
            raise InvalidInputError("rho must be a non-empty square matrix")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        self.validate()

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def validate(self) -> None:
        rho = self.rho
        scale = max(1.0, float(np.max(np.abs(rho))))
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL * scale:
            raise InvalidInputError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1.0) > TRACE_TOL:
            raise InvalidInputError(f"trace {np.trace(rho).real:.12g} differs from 1")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -POSITIVITY_TOL:
            raise InvalidInputError("density matrix has a negative eigenvalue")
        top = max(1, int(math.ceil(0.1 * self.dim)))
        if self.dim > top and np.diag(rho).real[-top:].sum() > TAIL_TOL:
            raise TruncationError(
                f"population {np.diag(rho).real[-top:].sum():.3g} in the top {top} Fock levels",
                suggested_dim=2 * self.dim,
            )

    def populations(self) -> np.ndarray:
        return np.diag(self.rho).real.copy()

    def mean_photon_number(self) -> float:
        return float(np.dot(np.arange(self.dim), self.populations()))

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "rho": [[{"re": float(z.real), "im": float(z.imag)} for z in row] for row in self.rho],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QuantumState":
        try:
            dim = int(data["dim"])
            rows = data["rho"]
            rho = np.array([[complex(c["re"], c["im"]) for c in row] for row in rows], dtype=complex)
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"malformed state document: {exc}") from exc
        if rho.shape != (dim, dim):
            raise DataFormatError(f"rho has shape {rho.shape}, expected ({dim}, {dim})")
        return cls(rho)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "QuantumState":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"state file is not valid JSON: {exc}", row=exc.lineno) from exc


def _pure(psi: np.ndarray) -> QuantumState:
    return QuantumState(np.outer(psi, psi.conj()))


def coherent_state(alpha: complex, dim: int | None = None) -> QuantumState:
    """|alpha><alpha| from Poisson amplitudes; ``dim`` defaults to ``required_dim``."""
    need = required_dim(alpha)
    if dim is None:
        dim = need
    elif dim < need:
        raise TruncationError(f"dim {dim} too small for |alpha| = {abs(alpha):.4g}", suggested_dim=need)
    n = np.arange(dim)
    if alpha == 0:
        psi = np.zeros(dim, dtype=complex)
        psi[0] = 1.0
    else:
        mag = np.exp(-0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1))
        psi = mag * np.exp(1j * n * np.angle(alpha))
    return _pure(psi)


def fock_state(n: int, dim: int | None = None) -> QuantumState:
    dim = dim if dim is not None else max(n + 2, int(math.ceil((n + 1) / 0.9)) + 1)
    if not 0 <= n < dim:
        raise InvalidInputError("Fock index outside the truncation")
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return _pure(psi)


def vacuum(dim: int = 2) -> QuantumState:
    return fock_state(0, dim)


def squeezed_vacuum(r: float, phi: float = 0.0, dim: int = 60) -> QuantumState:
    """S(xi)|0> with xi = r e^{i phi}; phi = 0 squeezes x to variance e^{-2r}/2."""
    psi = np.zeros(dim, dtype=complex)
    t = -np.exp(1j * phi) * math.tanh(r)
    c = 1.0 / math.sqrt(math.cosh(r))
    for m in range(0, (dim + 1) // 2):
        psi[2 * m] = c
        # c_{2m+2} / c_{2m} = t * sqrt((2m+1)(2m+2)) / (2(m+1))
        c = c * t * math.sqrt((2 * m + 1) * (2 * m + 2)) / (2 * (m + 1))
    return _pure(psi)


def _annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def displace(state: QuantumState, alpha: complex) -> QuantumState:
    """D(alpha) rho D(alpha)^dag, computed with a matrix exponential in the truncation."""
    a = _annihilation(state.dim)
    d = linalg.expm(alpha * a.conj().T - np.conj(alpha) * a)
    rho = d @ state.rho @ d.conj().T
    return QuantumState(0.5 * (rho + rho.conj().T))


def kerr_evolve(state: QuantumState, kappa: float) -> QuantumState:
    """U rho U^dag with U = exp(i kappa n^2)."""
    if kappa == 0:
        return state
    n = np.arange(state.dim)
    u = np.exp(1j * kappa * n.astype(float) ** 2)
    return QuantumState(u[:, None] * state.rho * u.conj()[None, :])


def loss_channel(state: QuantumState, eta: float) -> QuantumState:
    """Beam splitter of transmissivity ``eta`` with a vacuum ancilla, ancilla traced out.

    rho'_{mn} = sum_k sqrt(C(m+k,k) C(n+k,k)) eta^{(m+n)/2} (1-eta)^k rho_{m+k,n+k}.
    """
    if not 0.0 <= eta <= 1.0:
        raise InvalidInputError("eta must lie in [0, 1]")
    if eta == 1.0:
        return state
    dim = state.dim
    rho = state.rho
    out = np.zeros_like(rho)
    if eta == 0.0:
        out[0, 0] = np.trace(rho)
        return QuantumState(out)
    m = np.arange(dim)
    for k in range(dim):
        mm = m[: dim - k]
        # log of sqrt(C(m+k, k)) eta^{m/2} (1-eta)^{k/2}
        logv = 0.5 * (gammaln(mm + k + 1) - gammaln(mm + 1) - gammaln(k + 1))
        logv = logv + 0.5 * mm * math.log(eta) + 0.5 * k * math.log1p(-eta)
        v = np.exp(logv)
        out[: dim - k, : dim - k] += np.outer(v, v) * rho[k:, k:]
    return QuantumState(0.5 * (out + out.conj().T))


# ---------------------------------------------------------------------------
# phase space
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WignerGrid:
    x: np.ndarray
    p: np.ndarray
    values: np.ndarray  # values[i, j] = W(x[j], p[i])

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        p = np.asarray(self.p, dtype=float)
        v = np.asarray(self.values, dtype=float)
        for axis, name in ((x, "x"), (p, "p")):
            if axis.ndim != 1 or axis.size < 2:
                raise InvalidInputError(f"{name} axis needs at least two points")
            steps = np.diff(axis)
            if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * abs(steps[0]):
                raise InvalidInputError(f"{name} axis must be uniform and increasing")
        if v.shape != (p.size, x.size):
            raise InvalidInputError("values must have shape (len(p), len(x))")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "values", v)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dp(self) -> float:
        return float(self.p[1] - self.p[0])

    def integrate(self, f: np.ndarray | None = None) -> float:
        f = self.values if f is None else f
        return float(np.trapezoid(np.trapezoid(f, self.x, axis=1), self.p))

    @property
    def norm(self) -> float:
        return self.integrate()

    def same_axes(self, other: "WignerGrid") -> bool:
        return np.array_equal(self.x, other.x) and np.array_equal(self.p, other.p)

    def marginal_x(self) -> np.ndarray:
        return np.trapezoid(self.values, self.p, axis=0)

    def marginal_p(self) -> np.ndarray:
        return np.trapezoid(self.values, self.x, axis=1)

    def to_csv(self) -> str:
        """Matrix layout: header ``p\\x,x_0,x_1,...``, then one row ``p_i,W(x_0,p_i),...``."""
        fmt = "{:.17g}".format
        lines = [",".join(["p\\x", *map(fmt, self.x)])]
        for pi, row in zip(self.p, self.values):
            lines.append(",".join([fmt(pi), *map(fmt, row)]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "WignerGrid":
        rows = [ln for ln in text.splitlines() if ln.strip()]
        if len(rows) < 3:
            raise DataFormatError("Wigner CSV needs a header and at least two rows", row=len(rows))
        try:
            x = [float(v) for v in rows[0].split(",")[1:]]
        except ValueError as exc:
            raise DataFormatError(f"bad x axis: {exc}", row=1) from exc
        p, vals = [], []
        for k, ln in enumerate(rows[1:], start=2):
            parts = ln.split(",")
            if len(parts) != len(x) + 1:
                raise DataFormatError(f"expected {len(x) + 1} columns, got {len(parts)}", row=k)
            try:
                nums = [float(v) for v in parts]
            except ValueError as exc:
                raise DataFormatError(f"non-numeric entry: {exc}", row=k) from exc
            p.append(nums[0])
            vals.append(nums[1:])
        return cls(np.array(x), np.array(p), np.array(vals))


def moments(state: QuantumState) -> tuple[complex, complex, float]:
    """(<a>, <a^2>, <a^dag a>)."""
    rho = state.rho
    s = np.sqrt(np.arange(1, state.dim))
    a1 = complex(np.sum(s * np.diagonal(rho, -1)))
    s2 = s[:-1] * s[1:]
    a2 = complex(np.sum(s2 * np.diagonal(rho, -2))) if state.dim > 2 else 0j
    return a1, a2, state.mean_photon_number()


def _variance_terms(state: QuantumState) -> tuple[float, complex]:
    a1, a2, n = moments(state)
    return n - abs(a1) ** 2, a2 - a1 * a1


def quadrature_variance(state: QuantumState, theta: float) -> float:
    dn, m = _variance_terms(state)
    return float(0.5 + dn + (m * np.exp(-2j * theta)).real)


def squeezing_db(state: QuantumState) -> tuple[float, float]:
    """(level, angle) of the least noisy quadrature; positive dB is below vacuum."""
    dn, m = _variance_terms(state)
    vmin = 0.5 + dn - abs(m)
    if vmin <= 0:
        raise TruncationError("non-positive quadrature variance; truncation too small", 2 * state.dim)
    angle = (0.5 * (np.angle(m) + math.pi)) % math.pi if m != 0 else 0.0
    return float(-10.0 * math.log10(vmin / 0.5)), float(angle)


def _state_extent(state: QuantumState) -> tuple[float, float]:
    a1, _, _ = moments(state)
    return math.sqrt(2) * a1.real, math.sqrt(2) * a1.imag


def wigner(
    state: QuantumState,
    x: np.ndarray,
    p: np.ndarray | None = None,
    *,
    norm_tol: float = 1e-3,
    check_extent: bool = True,
) -> WignerGrid:
    """Wigner function on the grid x (columns) by p (rows).

    Evaluated with the iterative Laguerre recurrence in A = (x + i p)/sqrt(2),
    starting from W_00 = exp(-2|A|^2)/pi; no factorials are formed, so it
    stays stable for dim in the hundreds.
    """
    x = np.asarray(x, dtype=float)
    p = x if p is None else np.asarray(p, dtype=float)
    if check_extent:
        cx, cp = _state_extent(state)
        reach = 5.0 * math.sqrt(0.5)
        if (x.min() > cx - reach or x.max() < cx + reach or p.min() > cp - reach or p.max() < cp + reach):
            raise InvalidInputError("grid must extend five vacuum widths beyond the state's mean")
    xx, pp = np.meshgrid(x, p)
    amp = (xx + 1j * pp) / math.sqrt(2)
    rho = state.rho
    dim = state.dim
    wlist = [np.exp(-2.0 * np.abs(amp) ** 2) / math.pi + 0j]
    w = rho[0, 0].real * wlist[0].real
    for n in range(1, dim):
        wlist.append(2.0 * amp * wlist[n - 1] / math.sqrt(n))
        w = w + 2.0 * (rho[0, n] * wlist[n]).real
    for m in range(1, dim):
        temp = wlist[m].copy()
        wlist[m] = (2.0 * np.conj(amp) * temp - math.sqrt(m) * wlist[m - 1]) / math.sqrt(m)
        w = w + (rho[m, m] * wlist[m]).real
        for n in range(m + 1, dim):
            temp2 = (2.0 * amp * wlist[n - 1] - math.sqrt(m) * temp) / math.sqrt(n)
            temp = wlist[n].copy()
            wlist[n] = temp2
            w = w + 2.0 * (rho[m, n] * wlist[n]).real
    grid = WignerGrid(x, p, w)
    if norm_tol is not None and abs(grid.norm - 1.0) > norm_tol:
        raise TruncationError(
            f"Wigner normalization {grid.norm:.6f} off by more than {norm_tol:g}; widen the grid or the truncation",
            suggested_dim=2 * dim,
        )
    return grid


def wigner_centered(
    state: QuantumState,
    half_width: float,
    points: int,
    *,
    tail_tol: float = 1e-12,
    norm_tol: float = 1e-3,
) -> WignerGrid:
    """Wigner function on a square grid of half-width ``half_width``.

    Dim states (|<a>| < 3) use a grid centred on the origin. Bright states
    use one centred on their mean; they are displaced back to the origin
    and truncated to the levels holding all but ``tail_tol`` of the
    population, since the recurrence in ``wigner`` underflows once |alpha|^2
    reaches a few hundred.
    """
    x0, p0 = _state_extent(state)
    rel = np.linspace(-half_width, half_width, points)
    a1 = complex(x0, p0) / math.sqrt(2)
    if abs(a1) < 3.0:
        return wigner(state, rel, rel, norm_tol=norm_tol, check_extent=False)
    shifted = displace(state, -a1)
    tail = np.cumsum(shifted.populations()[::-1])[::-1]
    keep = int(np.argmax(tail < tail_tol)) if np.any(tail < tail_tol) else shifted.dim
    keep = max(keep, 2)
    block = shifted.rho[:keep, :keep]
    small = QuantumState(block / np.trace(block).real)
    w = wigner(small, rel, rel, norm_tol=norm_tol, check_extent=False)
    return WignerGrid(x0 + rel, p0 + rel, w.values)


def negativity(w: WignerGrid) -> tuple[float, float]:
    """(minimum value, integral of max(-W, 0))."""
    return float(w.values.min()), w.integrate(np.maximum(-w.values, 0.0))
