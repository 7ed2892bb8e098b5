"""Command-line front end.

Every command writes plot-ready CSV next to ``--out PREFIX`` and prints a short
summary. Exit codes: 0 success, 2 input error, 3 precondition not met (no zero
crossing), 4 fit did not converge (the report is still written).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import sys
from pathlib import Path

import numpy as np

from .coherence import simulate_fringe
from .config import ConfigError, RunConfig, load_config, parse_range
from .errors import IllConditionedError, NotCrossedError
from .estimate.crb import crb_single_tone
from .estimate.finetune import fine_tune_fit, initial_from_dips
from .estimate.fringe import fit_fringe
from .estimate.peaks import identify_peaks
from .estimate.scan import ScanGrid, scan_coherence
from .estimate.zerocross import SHAPE_CONSTANT, magnitude_by_zero_crossing
from .noise import UnitsConfig, default_units
from .schedule import (SCHEMES, PulseSchedule, filter_peak, filter_transform, make_equidistant,
                       make_schedule, make_uhrig, toggling)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PRECONDITION = 3
EXIT_NOT_CONVERGED = 4


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _g(x) -> str:
    return f"{float(x):.17g}"


def _prefix(args, default: str) -> str:
    return args.out if args.out else default


def _input_prefix(path: str, suffix: str = "_scan") -> str:
    stem = str(Path(path).with_suffix(""))
    return stem[: -len(suffix)] if stem.endswith(suffix) else stem


def _load(args) -> RunConfig:
    return load_config(args.config)


def _measurement(cfg: RunConfig, args):
    m = cfg.measurement
    if m is not None and args.seed is not None:
        m = dataclasses.replace(m, seed=args.seed)
    return m


def _units(args) -> UnitsConfig:
    return UnitsConfig(args.kappa) if getattr(args, "kappa", None) else default_units()


def _read_scan(path: str, scheme: str) -> ScanGrid:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise _Fail(EXIT_INPUT, f"{path}: {exc.strerror}") from None
    try:
        return ScanGrid.from_csv(text, scheme)
    except ValueError as exc:
        raise _Fail(EXIT_INPUT, f"{path}: {exc}") from None


# ---------------------------------------------------------------- commands

def cmd_simulate_fringe(args) -> int:
    cfg = _load(args)
    m = _measurement(cfg, args)
    if m is None:
        raise _Fail(EXIT_INPUT, f"{args.config}: [measurement] kind must be 'fringe' for simulate-fringe")
    prefix = _prefix(args, cfg.prefix)
    n_values = cfg.scheme.n_values
    for i, n in enumerate(n_values):
        f_mods = cfg.scheme.f_mod_for(int(n))
        if f_mods.size != 1:
            raise _Fail(EXIT_INPUT, f"{args.config}: simulate-fringe needs a single f_mod (or T)")
        f_mod = float(f_mods[0])
        if cfg.scheme.T is not None and cfg.scheme.kind == "uhrig" and n > 0:
            sched = make_uhrig(int(n), cfg.scheme.T)
        else:
            sched = make_schedule(cfg.scheme.kind, int(n), f_mod)
        scan = simulate_fringe(cfg.spectrum, toggling(sched), m.phi_grid, m.shots, m.seed,
                               m.common_period, stream=(m.tag, i, 0), threads=args.threads)
        name = f"{prefix}_fringe.csv" if n_values.size == 1 else f"{prefix}_n{int(n)}_fringe.csv"
        _write(Path(name), scan.to_csv())
        fit = fit_fringe(scan)
        print(f"n={int(n)} f_mod={f_mod:g} Hz T={sched.total_duration:.6g} s  "
              f"A = {fit.A:.4f} +- {fit.sigma:.4f}  -> {name}")
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = _load(args)
    m = _measurement(cfg, args)
    sch = cfg.scheme
    if sch.f_values is None:
        # one column per n: f_mod follows n at fixed T
        grids = [scan_coherence(cfg.spectrum, sch.kind, sch.f_mod_for(int(n)), [n], m, args.threads)
                 for n in sch.n_values]
        rows = np.vstack([g.records() for g in grids])
        text = _csv_text(("f_mod_hz", "n_pulses", "coherence", "sigma"),
                         [[_g(f), int(n), _g(a), _g(s)] for f, n, a, s in rows])
    else:
        grid = scan_coherence(cfg.spectrum, sch.kind, sch.f_values, sch.n_values, m, args.threads)
        text = grid.to_csv()
    name = f"{_prefix(args, cfg.prefix)}_scan.csv"
    _write(Path(name), text)
    n_cells = text.count("\n") - 1
    print(f"{sch.kind} scan: {n_cells} cells ({'fringe' if m else 'analytic'}) -> {name}")
    return EXIT_OK


def cmd_identify(args) -> int:
    grid = _read_scan(args.scan, "equidistant")
    cands = identify_peaks(grid, comb=args.comb, dip_threshold=args.threshold,
                           merge_width=args.merge_width)
    name = f"{_prefix(args, _input_prefix(args.scan))}_candidates.csv"
    _write(Path(name), _csv_text(("freq_hz", "dip_depth", "first_n"),
                                 [[_g(c.frequency), _g(c.dip_depth), c.first_n_detected] for c in cands]))
    for c in cands:
        print(f"candidate {c.frequency:.6g} Hz  dip {c.dip_depth:.3f}  first n = {c.first_n_detected}")
    print(f"{len(cands)} candidate(s) -> {name}")
    return EXIT_OK


def cmd_zero_cross(args) -> int:
    grid = _read_scan(args.series, args.scheme)
    tol = 1e-6 * max(1.0, abs(args.freq))
    cols = np.flatnonzero(np.abs(grid.freqs - args.freq) <= tol)
    if cols.size == 0:
        raise _Fail(EXIT_INPUT, f"{args.series}: no rows with f_mod_hz = {args.freq:g}")
    j = int(cols[0])
    ok = np.isfinite(grid.A[:, j])
    rows = np.column_stack([grid.n_values[ok], grid.A[ok, j], grid.sigma[ok, j]])
    try:
        zc = magnitude_by_zero_crossing(rows, args.freq, args.scheme, _units(args))
    except NotCrossedError as exc:
        raise _Fail(EXIT_PRECONDITION, f"{exc}. Hint: extend the scan to larger n.") from None
    print(f"f = {args.freq:g} Hz  crossing between n = {zc.n_bracket[0]} and {zc.n_bracket[1]}")
    print(f"amplitude = {zc.amplitude_ug:.6g} uG = {zc.amplitude_rad_s:.6g} rad/s")
    print(f"T* = {zc.T_star:.6g} s  eta = {zc.eta:.4g}")
    return EXIT_OK


def _read_init(path: str, tones: np.ndarray) -> np.ndarray:
    try:
        rows = list(csv.DictReader(io.StringIO(Path(path).read_text())))
        table = {float(r["freq_hz"]): float(r["amp_ug"]) for r in rows}
    except OSError as exc:
        raise _Fail(EXIT_INPUT, f"{path}: {exc.strerror}") from None
    except (KeyError, ValueError, TypeError):
        raise _Fail(EXIT_INPUT, f"{path}: expected columns freq_hz,amp_ug") from None
    out = []
    for f in tones:
        match = [a for g, a in table.items() if abs(g - f) <= 1e-6 * max(1.0, f)]
        if not match:
            raise _Fail(EXIT_INPUT, f"{path}: no starting amplitude for {f:g} Hz")
        out.append(match[0])
    return np.array(out)


def cmd_fit(args) -> int:
    try:
        tones = np.array([float(t) for t in args.tones.split(",") if t.strip()])
    except ValueError:
        raise _Fail(EXIT_INPUT, f"--tones: cannot parse {args.tones!r}") from None
    if tones.size == 0:
        raise _Fail(EXIT_INPUT, "--tones: at least one model tone is required")
    grid = _read_scan(args.scan, args.scheme)
    units = _units(args)
    initial = _read_init(args.init, tones) if args.init else initial_from_dips(grid, tones, args.scheme, units)
    report = fine_tune_fit(grid, tones, initial, args.scheme, fit_slow_drift=args.slow_drift,
                           initial_drift=args.drift_init, units=units)
    prefix = _prefix(args, _input_prefix(args.scan))
    _write(Path(f"{prefix}_report.csv"), report.to_csv())
    _write(Path(f"{prefix}_report.txt"), report.to_text())
    sys.stdout.write(report.to_text())
    if not report.converged:
        print(f"fit did not converge ({report.message}); report written to {prefix}_report.*",
              file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def _schedule_from_flags(scheme: str, n: int, T: float | None, f_mod: float | None) -> PulseSchedule:
    if (T is None) == (f_mod is None):
        raise _Fail(EXIT_INPUT, "give exactly one of --T or --f-mod")
    if T is None:
        T = (n + 1) / (2.0 * f_mod)
    if n == 0:
        return PulseSchedule(T, np.empty(0), scheme)
    if scheme == "uhrig":
        return make_uhrig(n, T)
    return make_equidistant(n, (n + 1) / (2.0 * T))


def cmd_filter(args) -> int:
    sched = _schedule_from_flags(args.scheme, args.n, args.T, args.f_mod)
    T = sched.total_duration
    if args.f_range:
        parts = [float(p) for p in args.f_range.split(":")]
        if len(parts) not in (2, 3):
            raise _Fail(EXIT_INPUT, f"--f-range: expected lo:hi[:step], got {args.f_range!r}")
        lo, hi = parts[:2]
        step = parts[2] if len(parts) == 3 else min(0.125 / T, (hi - lo) / 1000.0)
    else:
        lo, hi = 0.0, max(2.0 * (args.n + 1) / (2.0 * T), 4.0 / T)
        step = min(0.125 / T, hi / 1000.0)
    if not (hi > lo >= 0 and step > 0):
        raise _Fail(EXIT_INPUT, "--f-range: need 0 <= lo < hi and step > 0")
    tf = toggling(sched)
    f = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    mag = np.abs(filter_transform(tf, f))
    prefix = _prefix(args, f"{args.scheme}_n{args.n}")
    name = f"{prefix}_filter.csv"
    _write(Path(name), _csv_text(("f_hz", "abs_FT", "abs_FT_sq"),
                                 [[_g(a), _g(b), _g(b * b)] for a, b in zip(f, mag)]))
    f_peak, m_peak = filter_peak(tf, lo, hi, min(step, 0.25 / T))
    print(f"{args.scheme} n={args.n} T={T:.6g} s  f_peak = {f_peak:.4f} Hz  "
          f"|F_T(f_peak)|/T = {m_peak / T:.4f}  -> {name}")
    return EXIT_OK


def cmd_crb(args) -> int:
    try:
        etas = parse_range(args.eta_range) if args.eta_range.count(":") != 2 else None
        if etas is None:
            lo, hi, count = args.eta_range.split(":")
            etas = np.linspace(float(lo), float(hi), int(count))
    except ValueError:
        raise _Fail(EXIT_INPUT, f"--eta-range: expected lo:hi:count or a list, got {args.eta_range!r}") from None
    if etas.size == 0 or np.any(etas <= 0):
        raise _Fail(EXIT_INPUT, "--eta-range: values must be positive")
    if args.shots < 1 or args.phi_points < 3:
        raise _Fail(EXIT_INPUT, "--shots must be >= 1 and --phi-points >= 3")
    f0 = args.f_mod
    f_mods = f0 * (1.0 + args.f_span * np.linspace(-1.0, 1.0, args.f_points)) if args.f_points > 1 else [f0]
    T = (args.n + 1) / (2.0 * f0)
    c = SHAPE_CONSTANT[args.scheme]
    phi = np.linspace(0.0, 2.0 * math.pi, args.phi_points, endpoint=False)
    rows = []
    for eta in etas:
        res = crb_single_tone(eta / (c * T), f0, args.scheme, args.n, f_mods, args.shots, phi)
        rows.append([_g(eta), _g(res.sigma_N), _g(res.sigma_f)])
    name = f"{_prefix(args, f'{args.scheme}_n{args.n}')}_crb.csv"
    _write(Path(name), _csv_text(("eta", "sigma_N_bound", "sigma_f_bound"), rows))
    print(f"{len(rows)} eta values, {len(f_mods)} schedule(s) around {f0:g} Hz -> {name}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinspec", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=None, help="override the measurement seed (u64)")
    parser.add_argument("--out", default=None, help="output path prefix")
    parser.add_argument("--threads", type=int, default=1, help="worker threads")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-fringe", parents=[common], help="simulate Ramsey fringes from a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_simulate_fringe)

    p = sub.add_parser("scan", parents=[common], help="coherence scan over f_mod x n from a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("identify", parents=[common], help="candidate tones from a scan CSV")
    p.add_argument("scan")
    p.add_argument("--comb", type=float, default=None, help="snap to multiples of this base (Hz)")
    p.add_argument("--threshold", type=float, default=0.3, help="minimum dip depth 1 - A")
    p.add_argument("--merge-width", type=float, default=None, help="cluster width in Hz (default 2/T)")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("zero-cross", parents=[common], help="tone magnitude from a pulse-number series")
    p.add_argument("series")
    p.add_argument("--freq", type=float, required=True)
    p.add_argument("--scheme", choices=SCHEMES, default="equidistant")
    p.add_argument("--kappa", type=float, default=None, help="rad/s per gauss")
    p.set_defaults(func=cmd_zero_cross)

    p = sub.add_parser("fit", parents=[common], help="fine-tune tone amplitudes on a scan CSV")
    p.add_argument("scan")
    p.add_argument("--tones", required=True, help="comma list of tone frequencies in Hz")
    p.add_argument("--scheme", choices=SCHEMES, default="equidistant")
    p.add_argument("--slow-drift", action="store_true", help="also fit the slow-drift product")
    p.add_argument("--drift-init", type=float, default=10.0, help="starting drift product (Hz^2)")
    p.add_argument("--init", default=None, help="CSV with freq_hz,amp_ug starting values")
    p.add_argument("--kappa", type=float, default=None, help="rad/s per gauss")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("filter", parents=[common], help="filter spectrum |F_T(f)| of one schedule")
    p.add_argument("--scheme", choices=SCHEMES, default="equidistant")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--T", type=float, default=None, help="total duration (s)")
    p.add_argument("--f-mod", type=float, default=None, help="modulation frequency (Hz)")
    p.add_argument("--f-range", default=None, help="lo:hi[:step] in Hz")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("crb", parents=[common], help="Cramer-Rao bounds vs noise index")
    p.add_argument("--eta-range", required=True, help="lo:hi:count or comma list")
    p.add_argument("--scheme", choices=SCHEMES, default="equidistant")
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--n", type=int, default=11)
    p.add_argument("--f-mod", type=float, default=100.0, help="tone / centre modulation frequency")
    p.add_argument("--f-span", type=float, default=0.1, help="relative half-width of the f_mod set")
    p.add_argument("--f-points", type=int, default=9, help="schedules in the f_mod set")
    p.add_argument("--phi-points", type=int, default=16)
    p.set_defaults(func=cmd_crb)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        parser.error("--seed must be an unsigned 64-bit integer")
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"spinspec {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except NotCrossedError as exc:
        print(f"spinspec {args.command}: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except IllConditionedError as exc:
        print(f"spinspec {args.command}: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except (ConfigError, ValueError, OSError) as exc:
        print(f"spinspec {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
