"""Spectral peak identification from coherence scans."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from .scan import ScanGrid


@dataclass(frozen=True)
class CandidateTone:
    frequency: float
    dip_depth: float
    first_n_detected: int


def local_minima(A: np.ndarray) -> np.ndarray:
    """Indices of interior local minima (left strict, right non-strict)."""
    A = np.asarray(A, dtype=float)
    if A.size < 3:
        return np.empty(0, dtype=int)
    mid = A[1:-1]
    ok = (mid < A[:-2]) & (mid <= A[2:]) & np.isfinite(mid)
    return np.flatnonzero(ok) + 1


def default_merge_width(n: int, f: float) -> float:
    """``2/T`` for the schedule of ``n`` pulses centred on ``f``."""
    T = (n + 1) / (2.0 * f)
    return 2.0 / T


def identify_peaks(grid: ScanGrid, comb: float | None = None, dip_threshold: float = 0.3,
                   merge_width: float | None = None) -> list[CandidateTone]:
    """Candidate tone frequencies from the largest-``n`` row of a scan.

    Local minima with dip ``1 - A >= dip_threshold`` are grouped by a
    dip-weighted mean shift: starting from every minimum, the centre moves to
    the weighted centroid of the minima inside a window of total width
    ``merge_width`` until it stops moving. Minima that converge to the same
    centre form one group. Groups are then merged strongest first (summed dip
    depth, lower frequency on ties): a group absorbs every weaker group whose
    centre lies inside its window. There is no chaining, so merging cannot
    bridge two separate tones through a run of weak minima. Each candidate
    sits at the dip-weighted centroid of its minima. This folds the extra
    minima of a single power-broadened tone into one candidate.
    ``merge_width=None`` uses ``2/T`` of the schedule centred on the window.

    With ``comb`` set, candidates snap to the nearest positive multiple of
    ``comb`` and duplicates on a tooth keep the deepest dip.
    """
    if grid.A.size == 0:
        raise InvalidArgumentError("empty scan grid")
    if comb is not None and not comb > 0:
        raise InvalidArgumentError("comb base must be positive")
    if merge_width is not None and not merge_width > 0:
        raise InvalidArgumentError("merge_width must be positive")
    i_top = int(np.argmax(grid.n_values))
    n_top = int(grid.n_values[i_top])
    row = grid.A[i_top]
    idx = [i for i in local_minima(row) if 1.0 - row[i] >= dip_threshold]
    if not idx:
        return []
    f = grid.freqs[idx]
    depth = 1.0 - row[idx]

    def width(centre):
        return merge_width if merge_width is not None else default_merge_width(n_top, centre)

    modes = np.array([_shift_to_mode(f, depth, start, width) for start in f])
    centres, label = np.unique(np.round(modes, 9), return_inverse=True)
    strength = np.bincount(label, weights=depth)
    free = np.ones(centres.size, dtype=bool)
    clusters = []
    for a in np.lexsort((centres, -strength)):
        if not free[a]:
            continue
        near = free & (np.abs(centres - centres[a]) <= 0.5 * width(centres[a]))
        free &= ~near
        members = near[label]
        w = depth[members]
        centre = float(np.sum(w * f[members]) / np.sum(w))
        clusters.append((centre, float(w.max()), width(centre)))

    if comb is not None:
        teeth = {}
        for freq, d, wd in clusters:
            k = max(int(round(freq / comb)), 1)
            if k not in teeth or d > teeth[k][1]:
                teeth[k] = (k * comb, d, wd)
        clusters = [teeth[k] for k in sorted(teeth)]

    out = []
    for freq, d, wd in sorted(clusters):
        out.append(CandidateTone(freq, min(d, 2.0), _first_detection(grid, freq, wd, dip_threshold)))
    return out


def _shift_to_mode(f, depth, start, width, max_rounds=100):
    """Move ``start`` to the dip-weighted centroid of the minima within half
    a window until it is stationary."""
    centre = float(start)
    for _ in range(max_rounds):
        inside = np.abs(f - centre) <= 0.5 * width(centre)
        new = float(np.sum(depth[inside] * f[inside]) / np.sum(depth[inside]))
        if abs(new - centre) <= 1e-12 * max(1.0, abs(centre)):
            return new
        centre = new
    return centre


def _first_detection(grid: ScanGrid, freq: float, width: float, threshold: float) -> int:
    near = np.abs(grid.freqs - freq) <= 0.5 * width
    if not near.any():
        near = np.abs(grid.freqs - freq) == np.min(np.abs(grid.freqs - freq))
    for i in np.argsort(grid.n_values):
        vals = grid.A[i, near]
        if np.any(1.0 - vals[np.isfinite(vals)] >= threshold):
            return int(grid.n_values[i])
    return int(grid.n_values.max())
