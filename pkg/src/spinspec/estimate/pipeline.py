"""Three-stage characterization: identify tones, size them, then fit jointly."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import NotCrossedError
from ..noise import DiscreteSpectrum, UnitsConfig, default_units
from .finetune import EstimateReport, fine_tune_fit, initial_from_dips
from .peaks import CandidateTone, identify_peaks
from .scan import FringeMeasurement, ScanGrid, scan_coherence
from .zerocross import ZeroCrossing, magnitude_by_zero_crossing

log = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    candidates: list[CandidateTone]
    crossings: dict[float, ZeroCrossing | None]
    initial: np.ndarray
    report: EstimateReport
    id_grid: ScanGrid
    fit_grid: ScanGrid
    series: dict[float, ScanGrid] = field(default_factory=dict)


def characterize(spectrum: DiscreteSpectrum, scheme: str, id_freqs: Sequence[float],
                 id_n_values: Sequence[int], zc_n_values: Sequence[int],
                 measurement: FringeMeasurement | None = None, comb: float | None = None,
                 dip_threshold: float = 0.3, fit_freqs: Sequence[float] | None = None,
                 fit_n_values: Sequence[int] | None = None, fit_slow_drift: bool = False,
                 units: UnitsConfig | None = None, threads: int = 1) -> PipelineResult:
    """Run the full estimation chain against a simulated noise environment.

    1. scan ``id_freqs x id_n_values`` and pick candidate tones,
    2. for every candidate, scan ``n`` at ``f_mod = f_k`` and size the tone
       from the first zero crossing (falling back to a dip inversion when the
       series never crosses),
    3. fit all amplitudes (and optionally the drift) on the fit grid, which
       defaults to the identification grid.

    Each stage uses its own substream tag so no two scans share noise draws.
    """
    units = units or default_units()

    def meas(tag):
        return None if measurement is None else dataclasses.replace(measurement, tag=tag)

    id_grid = scan_coherence(spectrum, scheme, id_freqs, id_n_values, meas(1), threads)
    candidates = identify_peaks(id_grid, comb=comb, dip_threshold=dip_threshold)
    tones = [c.frequency for c in candidates]

    crossings: dict[float, ZeroCrossing | None] = {}
    series: dict[float, ScanGrid] = {}
    initial = initial_from_dips(id_grid, tones, scheme, units) if tones else np.empty(0)
    for k, f in enumerate(tones):
        grid = scan_coherence(spectrum, scheme, [f], zc_n_values, meas(100 + k), threads)
        series[f] = grid
        rows = np.column_stack([grid.n_values, grid.A[:, 0], grid.sigma[:, 0]])
        try:
            zc = magnitude_by_zero_crossing(rows, f, scheme, units)
        except NotCrossedError:
            log.info("no zero crossing at %g Hz; keeping dip-based start", f)
            zc = None
        crossings[f] = zc
        if zc is not None:
            initial[k] = zc.amplitude_ug

    if fit_freqs is None and fit_n_values is None:
        fit_grid = id_grid
    else:
        fit_grid = scan_coherence(
            spectrum, scheme,
            id_freqs if fit_freqs is None else fit_freqs,
            id_n_values if fit_n_values is None else fit_n_values,
            meas(2), threads,
        )
    if not tones:
        raise NotCrossedError("no candidate tones identified; nothing to fit")
    report = fine_tune_fit(fit_grid, tones, initial, scheme, fit_slow_drift=fit_slow_drift,
                           units=units)
    return PipelineResult(candidates, crossings, initial, report, id_grid, fit_grid, series)
