"""Coherence scans over modulation frequency and pulse number."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..coherence import coherence_mixing, coherence_product, simulate_fringe
from ..errors import InvalidArgumentError
from ..noise import DiscreteSpectrum
from ..schedule import make_schedule, toggling
from .fringe import fit_fringe

CSV_HEADER = ("f_mod_hz", "n_pulses", "coherence", "sigma")


@dataclass(frozen=True)
class FringeMeasurement:
    """Simulate every cell as a fringe of ``phi_points`` phases x ``shots``."""

    shots: int
    phi_points: int
    seed: int
    common_period: float | None = None
    tag: int = 0

    @property
    def phi_grid(self) -> np.ndarray:
        return np.linspace(0.0, 2.0 * math.pi, self.phi_points, endpoint=False)


@dataclass(eq=False)
class ScanGrid:
    """Coherence on a ``len(n_values) x len(freqs)`` grid.

    Rows are pulse counts, columns modulation frequencies. ``sigma == 0``
    marks exact (analytic or unweighted) cells.
    """

    freqs: np.ndarray
    n_values: np.ndarray
    A: np.ndarray
    sigma: np.ndarray
    scheme: str = "equidistant"

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.n_values = np.asarray(self.n_values, dtype=np.int64)
        self.A = np.asarray(self.A, dtype=float).reshape(self.n_values.size, self.freqs.size)
        self.sigma = np.asarray(self.sigma, dtype=float).reshape(self.A.shape)

    def row(self, n: int) -> np.ndarray:
        return self.A[int(np.flatnonzero(self.n_values == n)[0])]

    def records(self) -> np.ndarray:
        """Long-format ``(f_mod, n, A, sigma)`` rows, NaN cells dropped."""
        F, N = np.meshgrid(self.freqs, self.n_values)
        rec = np.column_stack([F.ravel(), N.ravel(), self.A.ravel(), self.sigma.ravel()])
        return rec[np.isfinite(rec[:, 2])]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, n in enumerate(self.n_values):
            for j, f in enumerate(self.freqs):
                w.writerow([f"{f:.17g}", int(n), f"{self.A[i, j]:.17g}", f"{self.sigma[i, j]:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_records(cls, records, scheme: str = "equidistant") -> "ScanGrid":
        rec = np.asarray(records, dtype=float).reshape(-1, 4)
        freqs = np.unique(rec[:, 0])
        n_values = np.unique(rec[:, 1]).astype(np.int64)
        A = np.full((n_values.size, freqs.size), np.nan)
        sigma = np.zeros_like(A)
        i = np.searchsorted(n_values, rec[:, 1].astype(np.int64))
        j = np.searchsorted(freqs, rec[:, 0])
        A[i, j] = rec[:, 2]
        sigma[i, j] = rec[:, 3]
        return cls(freqs, n_values, A, sigma, scheme)

    @classmethod
    def from_csv(cls, text: str, scheme: str = "equidistant") -> "ScanGrid":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"scan CSV header must be {','.join(CSV_HEADER)}, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"line {lineno}: expected 4 fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        if not rows:
            raise ValueError("scan CSV has no data rows")
        return cls.from_records(rows, scheme)


def cell_coherence(spectrum: DiscreteSpectrum, scheme: str, f_mod: float, n: int,
                   measurement: FringeMeasurement | None = None, stream=()):
    """``(A, sigma)`` for one schedule, exact or fringe-simulated and fitted.

    Exact cells use the Bessel product for random-phase spectra and the
    mixing sum when every tone is phase-locked.
    """
    tf = toggling(make_schedule(scheme, int(n), float(f_mod)))
    if measurement is None:
        if spectrum.tones and spectrum.all_locked:
            return coherence_mixing(spectrum, tf).value, 0.0
        return coherence_product(spectrum, tf).value, 0.0
    scan = simulate_fringe(spectrum, tf, measurement.phi_grid, measurement.shots,
                           measurement.seed, measurement.common_period,
                           stream=(measurement.tag, *stream))
    fit = fit_fringe(scan)
    return fit.A, fit.sigma


def scan_coherence(spectrum: DiscreteSpectrum, scheme: str, freqs: Sequence[float],
                   n_values: Sequence[int], measurement: FringeMeasurement | None = None,
                   threads: int = 1) -> ScanGrid:
    """Fill a scan grid. Both schemes use ``T = (n + 1) / (2 f_mod)``.

    Fringe cells ``(i, j)`` draw from substreams keyed by the cell indices, so
    the grid is reproducible for any ``threads``.
    """
    freqs = np.asarray(freqs, dtype=float).ravel()
    n_values = np.asarray(n_values, dtype=np.int64).ravel()
    if not freqs.size or not n_values.size:
        raise InvalidArgumentError("scan axes must be non-empty")
    cells = [(i, j) for i in range(n_values.size) for j in range(freqs.size)]

    def run(ij):
        i, j = ij
        return cell_coherence(spectrum, scheme, freqs[j], n_values[i], measurement, stream=(i, j))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(run, cells))
    else:
        out = [run(ij) for ij in cells]
    vals = np.array(out, dtype=float).reshape(n_values.size, freqs.size, 2)
    return ScanGrid(freqs, n_values, vals[..., 0], vals[..., 1], scheme)
