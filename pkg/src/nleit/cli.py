"""Command-line front end.

    nleit [--config PATH] [--out DIR] [--seed N] [--strict] COMMAND

Commands: spectrum, chi3, mask-scan, evolve, tomo. Exit codes: 0 success,
2 configuration error, 3 numerical failure, 4 I/O or data-format error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io as nio
from .atomic import builtin_system
from .comb import PhaseMask, apply_phase_mask, enhancement_factor, make_comb, mask_center_scan, mask_phase_scan
from .config import RunConfig, load_config, parse_config
from .eit import PATTERNS, FieldDrive, default_pattern, find_peaks, fit_lorentzian, susceptibility_spectrum
from .errors import ConfigError, DataFormatError, InvalidInputError, NleitError, TruncationError
from .nonlinearity import (
    KerrGeometry,
    chi3_four_level_analytic,
    chi3_numeric_four_level,
    chi3_to_kerr_rate,
    four_level_coupling,
)
from .quantum import (
    QuantumState,
    coherent_state,
    kerr_evolve,
    loss_channel,
    negativity,
    required_dim,
    squeezing_db,
    vacuum,
    wigner,
    wigner_centered,
)
from .tomography import QuadratureDataset, default_phases, inverse_radon, reconstruction_error, sample_homodyne

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _metrics_text(metrics: dict) -> str:
    """JSON with sorted keys and 17-digit floats so reruns are byte-identical."""
    def clean(v):
        if isinstance(v, float):
            return float(f"{v:.17g}") if math.isfinite(v) else str(v)
        return v

    return json.dumps({k: clean(v) for k, v in metrics.items()}, sort_keys=True, indent=2) + "\n"


def _system(cfg: RunConfig):
    system = builtin_system(cfg.atomic.isotope, cfg.atomic.temperature, ground_decoherence=cfg.atomic.ground_decoherence_hz)
    if cfg.atomic.pattern:
        if cfg.atomic.pattern not in PATTERNS:
            raise ConfigError(f"unknown pattern {cfg.atomic.pattern!r}; known: {', '.join(sorted(PATTERNS))}",
                              key="atomic.pattern")
        pattern = PATTERNS[cfg.atomic.pattern]
    else:
        pattern = default_pattern(system)
    return system, pattern


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_spectrum(cfg: RunConfig, out: Path) -> list[Path]:
    system, pattern = _system(cfg)
    nu_c = system.transition_frequency(pattern.comb_ground, pattern.probe[1])
    comb = make_comb(
        cfg.comb.repetition_rate_hz,
        nu_c + cfg.probe.detuning_hz,
        cfg.comb.span_hz,
        envelope=cfg.comb.envelope,
        amplitude=cfg.comb_line_rabi,
    )
    sc = cfg.spectrum
    scan = np.linspace(sc.scan_start_hz, sc.scan_stop_hz, sc.points)
    sp = susceptibility_spectrum(
        system,
        comb,
        cfg.probe.rabi_hz,
        scan,
        pattern=pattern,
        probe_detuning=cfg.probe.detuning_hz,
        doppler=None if sc.doppler == "none" else sc.doppler,
        doppler_order=sc.doppler_order,
    )
    trans = sp.transmission
    written = [
        nio.write_csv(
            out / "spectrum.csv",
            ["delta_hz", "re_chi", "im_chi", "transmission"],
            zip(scan, sp.chi.real, sp.chi.imag, trans),
        )
    ]
    signal = sp.transmission_signal
    has_comb = cfg.comb_line_rabi > 0 and float(np.max(np.abs(signal))) > 0
    peaks = find_peaks(scan, signal, prominence_factor=sc.prominence_factor) if has_comb else []
    written.append(
        nio.write_csv(
            out / "peaks.csv",
            ["position_hz", "height", "width_hz", "prominence"],
            [(pk.position, pk.height, pk.width, pk.prominence) for pk in peaks],
        )
    )
    fits = []
    if has_comb:
        centers = [("raman", 0.0)] + [("peak", pk.position) for pk in peaks]
        for kind, c in centers:
            window = (c - sc.fit_half_width_hz, c + sc.fit_half_width_hz)
            if int(np.sum((scan >= window[0]) & (scan <= window[1]))) < 8:
                continue
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                f = fit_lorentzian(sp, window)
            fits.append((kind, c, f.gamma, f.delta0, f.A, f.B, f.C, f.residual_rms, f.valid))
    written.append(
        nio.write_csv(
            out / "fits.csv",
            ["kind", "center_hz", "gamma_hz", "delta0_hz", "A", "B", "C", "residual_rms", "valid"],
            fits,
        )
    )
    return written


def cmd_chi3(cfg: RunConfig, out: Path) -> list[Path]:
    system, pattern = _system(cfg)
    cpl = four_level_coupling(system, pattern)
    c3 = cfg.chi3
    b_offset = c3.b_offset_hz if math.isfinite(c3.b_offset_hz) else cfg.comb.repetition_rate_hz - cpl.b_minus_c
    geom = KerrGeometry.for_system(system, c3.waist_m, interaction_length=c3.interaction_length_m)
    values = np.linspace(c3.start, c3.stop, c3.points) if c3.points else np.array([])
    rows = []
    for v in values:
        if c3.sweep == "detuning":
            det, omega_c = float(v), c3.omega_c_hz
        else:
            det, omega_c = cfg.probe.detuning_hz, float(v)
        delta_b = det + b_offset
        if delta_b == 0 or omega_c <= 0:
            rows.append((det, math.nan, math.nan, math.nan, omega_c, "singular"))
            continue
        analytic = chi3_four_level_analytic(system, omega_c, delta_b, pattern=pattern, detuning_context=det)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            numeric = chi3_numeric_four_level(
                system,
                FieldDrive(cfg.probe.rabi_hz, det),
                FieldDrive(omega_c, det),
                FieldDrive(0.0, delta_b),
                pattern=pattern,
            )
        flag = "ok" if numeric.valid else "nonperturbative"
        rows.append((det, analytic.value, numeric.value, chi3_to_kerr_rate(analytic, geom), omega_c, flag))
    path = nio.write_csv(
        out / "chi3.csv",
        ["detuning_hz", "chi3_analytic", "chi3_numeric", "kappa", "omega_c_hz", "flag"],
        rows,
    )
    return [path]


def cmd_mask_scan(cfg: RunConfig, out: Path) -> list[Path]:
    system, pattern = _system(cfg)
    m = cfg.mask
    resonance = system.transition_frequency(pattern.comb_ground, pattern.probe[1]) + cfg.probe.detuning_hz
    # the enhancement is a ratio of pathway sums, so the line amplitude scale drops out
    comb = make_comb(cfg.comb.repetition_rate_hz, resonance, m.span_hz, envelope=cfg.comb.envelope)
    phases = np.linspace(0.0, 2 * math.pi, m.phase_points)
    if m.center_offset_hz == 0:
        e_phase = mask_phase_scan(comb, resonance, m.width_hz, phases, gamma_eff=m.gamma_eff_hz)
    else:
        center = resonance + m.center_offset_hz
        e_phase = np.array([
            enhancement_factor(comb, apply_phase_mask(comb, PhaseMask(center, m.width_hz, ph)), resonance, m.gamma_eff_hz)
            for ph in phases
        ])
    offsets = np.linspace(-m.center_span_hz, m.center_span_hz, m.center_points)
    e_center = mask_center_scan(comb, resonance, m.width_hz, m.phase_rad, offsets, gamma_eff=m.gamma_eff_hz)
    return [
        nio.write_csv(out / "mask_phase.csv", ["phase_rad", "enhancement"], zip(phases, e_phase)),
        nio.write_csv(out / "mask_center.csv", ["center_offset_hz", "enhancement"], zip(offsets, e_center)),
    ]


def cmd_evolve(cfg: RunConfig, out: Path) -> list[Path]:
    q = cfg.quantum
    alpha = q.alpha * complex(math.cos(q.alpha_phase_rad), math.sin(q.alpha_phase_rad))
    dim = q.dim or required_dim(alpha)
    state = coherent_state(alpha, dim)
    state = kerr_evolve(state, q.kappa)
    state = loss_channel(state, q.efficiency)
    db, angle = squeezing_db(state)
    grid = wigner_centered(state, q.grid_half_width, q.grid_points)
    w_min, w_neg = negativity(grid)
    metrics = {
        "alpha": abs(alpha),
        "kappa": q.kappa,
        "efficiency": q.efficiency,
        "dim": dim,
        "mean_photon_number": state.mean_photon_number(),
        "squeezing_db": db,
        "squeezing_angle_rad": angle,
        "wigner_min": w_min,
        "negative_volume": w_neg,
        "wigner_norm": grid.norm,
    }
    return [
        nio.atomic_write_text(out / "state.json", state.to_json()),
        nio.atomic_write_text(out / "wigner.csv", grid.to_csv()),
        nio.atomic_write_text(out / "metrics.json", _metrics_text(metrics)),
    ]


def _read_input(path: Path) -> QuantumState | QuadratureDataset:
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        return QuantumState.from_json(text)
    return QuadratureDataset.from_csv(text)


def cmd_tomo(cfg: RunConfig, out: Path, input_path: str | None = None) -> list[Path]:
    t = cfg.tomography
    src = input_path or t.input
    source = _read_input(Path(src)) if src else vacuum(2)
    written = []
    exact = None
    axis = np.linspace(-t.grid_half_width, t.grid_half_width, t.grid_points)
    if isinstance(source, QuantumState):
        data = sample_homodyne(source, default_phases(t.phases), t.samples, t.seed, efficiency=t.efficiency)
        written.append(nio.atomic_write_text(out / "dataset.csv", data.to_csv()))
        reference = loss_channel(source, t.efficiency)
        exact = wigner(reference, axis, norm_tol=None, check_extent=False)
    else:
        data = source
    rec = inverse_radon(data, axis, cutoff=t.cutoff)
    written.append(nio.atomic_write_text(out / "reconstruction.csv", rec.wigner.to_csv()))
    report = {
        "samples": len(data),
        "phases": int(data.distinct_phases().size),
        "seed": data.seed,
        "cutoff": t.cutoff,
        "raw_norm": rec.raw_norm,
        "reconstructed_min": float(rec.wigner.values.min()),
        "statistical_floor": rec.statistical_floor(),
    }
    if exact is not None:
        l_inf, l2, overlap = reconstruction_error(rec.wigner, exact)
        peak = float(np.max(np.abs(exact.values)))
        report.update({
            "linf_error": l_inf,
            "linf_error_rel_peak": l_inf / peak,
            "l2_error": l2,
            "overlap": overlap,
            "exact_min": float(exact.values.min()),
        })
    written.append(nio.atomic_write_text(out / "report.json", _metrics_text(report)))
    return written


COMMANDS = {
    "spectrum": cmd_spectrum,
    "chi3": cmd_chi3,
    "mask-scan": cmd_mask_scan,
    "evolve": cmd_evolve,
    "tomo": cmd_tomo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nleit", description="Comb-driven EIT, Kerr squeezing and homodyne tomography")
    parser.add_argument("--config", type=Path, help="run configuration file")
    parser.add_argument("--out", type=Path, help="output directory (overrides [output] directory)")
    parser.add_argument("--seed", type=int, help="random seed (overrides [tomography] seed)")
    parser.add_argument("--strict", action="store_true", help="reject unknown config sections and keys")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    sub.add_parser("spectrum", help="probe transmission, peaks and lineshape fits")
    sub.add_parser("chi3", help="analytic and numeric chi3 sweep")
    sub.add_parser("mask-scan", help="phase-mask enhancement scans")
    sub.add_parser("evolve", help="coherent state through Kerr and loss; Wigner and metrics")
    tomo = sub.add_parser("tomo", help="homodyne sampling and inverse Radon reconstruction")
    tomo.add_argument("--input", help="state JSON or dataset CSV (overrides [tomography] input)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, strict=args.strict) if args.config else parse_config("", strict=args.strict)
        if args.seed is not None:
            cfg.tomography.seed = args.seed
        out = args.out or Path(cfg.output.directory)
        fn = COMMANDS[args.command]
        written = fn(cfg, out, args.input) if args.command == "tomo" else fn(cfg, out)
    except (ConfigError, InvalidInputError) as exc:
        print(f"nleit: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"nleit: data format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TruncationError as exc:
        hint = f"; try dim = {exc.suggested_dim}" if exc.suggested_dim else ""
        print(f"nleit: truncation failure: {exc}{hint}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NleitError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"nleit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"nleit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
