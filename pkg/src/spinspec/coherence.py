"""
Coherence of a pulse-modulated probe under discrete dephasing noise.

With ``phi = int_0^T N(t) F(t) dt`` the accumulated phase, the coherence is
``A = <exp(i phi)>`` over noise realizations. Each tone contributes
``x_k cos(alpha_k - arg F_T(f_k))`` to ``phi`` with Bessel argument
``x_k = N_k |F_T(f_k)|``, which gives

* a product of ``J_0(x_k)`` when all phases are independent and uniform,
* a sum over resonant integer vectors of higher-order Bessel products when
  tone phases are locked to a common time origin,
* ``exp(-sum x_k^2 / 4)`` in the weak (Gaussian) limit.

The slow-drift term enters every engine as one more random-phase factor with
argument ``2 pi P |dF_T/df(0)|``.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import jv

from ._rng import substream
from .errors import InvalidArgumentError, ModeMismatchError
from .noise import DiscreteSpectrum
from .schedule import TogglingFunction, filter_dc_slope, filter_transform

MC_CHUNK = 1 << 14
MAX_MIXING_ORDER = 8
_MC_TAG = 1
_FRINGE_TAG = 2


@dataclass(frozen=True)
class CoherenceValue:
    """Signed coherence ``A``; Monte Carlo results also carry ``stderr`` and the
    mean imaginary part ``imag`` as a diagnostic."""

    value: float
    stderr: float | None = None
    imag: float | None = None

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True, eq=False)
class FringeScan:
    phi_rf: np.ndarray
    p_up: np.ndarray
    shots: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi_rf, dtype=float).ravel()
        p = np.asarray(self.p_up, dtype=float).ravel()
        shots = np.broadcast_to(np.asarray(self.shots, dtype=np.int64), phi.shape).copy()
        if p.shape != phi.shape:
            raise InvalidArgumentError("phi_rf and p_up must have the same length")
        if np.any(shots < 1):
            raise InvalidArgumentError("every point needs at least one shot")
        if np.unique(phi).size != phi.size:
            raise InvalidArgumentError("phi_rf values must be distinct")
        object.__setattr__(self, "phi_rf", phi)
        object.__setattr__(self, "p_up", p)
        object.__setattr__(self, "shots", shots)

    def __len__(self):
        return self.phi_rf.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phi_rf_rad", "p_up", "shots"])
        for phi, p, r in zip(self.phi_rf, self.p_up, self.shots):
            w.writerow([f"{phi:.17g}", f"{p:.17g}", int(r)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FringeScan":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(
            [float(r["phi_rf_rad"]) for r in rows],
            [float(r["p_up"]) for r in rows],
            [int(r["shots"]) for r in rows],
        )


def tone_arguments(spectrum: DiscreteSpectrum, tf: TogglingFunction):
    """Bessel arguments ``x_k`` and filter phases ``arg F_T(f_k)`` per tone."""
    if not len(spectrum):
        return np.empty(0), np.empty(0)
    F = np.atleast_1d(filter_transform(tf, spectrum.frequencies))
    return spectrum.amplitudes * np.abs(F), np.angle(F)


def drift_argument(spectrum: DiscreteSpectrum, tf: TogglingFunction) -> float:
    if spectrum.slow_drift == 0:
        return 0.0
    return 2.0 * math.pi * spectrum.slow_drift * abs(filter_dc_slope(tf))


def phase_integral(spectrum: DiscreteSpectrum, phases: Sequence[float], tf: TogglingFunction) -> float:
    """Exact ``int_0^T N(t) F(t) dt`` for one set of tone phases (drift excluded)."""
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (len(spectrum),):
        raise InvalidArgumentError(f"expected {len(spectrum)} phases")
    u = tf.breakpoints
    total = 0.0
    for tone, alpha in zip(spectrum.tones, phases):
        if tone.frequency == 0:
            total += tone.amplitude * math.cos(alpha) * float(np.sum(tf.signs * np.diff(u)))
            continue
        w = 2.0 * math.pi * tone.frequency
        s = np.sin(w * u + alpha)
        total += tone.amplitude * float(np.sum(tf.signs * (s[1:] - s[:-1]))) / w
    return total


def _batch_phase(x, filt_phase, alphas, drift_x=0.0, drift_phase=None):
    """Vectorized phase for rows of tone phases ``alphas`` with shape (M, d)."""
    phi = np.sum(x * np.cos(alphas - filt_phase), axis=-1)
    if drift_x and drift_phase is not None:
        phi = phi + drift_x * np.cos(drift_phase)
    return phi


def _require_random(spectrum):
    if not spectrum.all_random:
        raise ModeMismatchError("locked-phase tones require coherence_mixing")


def coherence_product(spectrum: DiscreteSpectrum, tf: TogglingFunction) -> CoherenceValue:
    """``prod_k J_0(N_k |F_T(f_k)|)`` times the slow-drift factor."""
    _require_random(spectrum)
    x, _ = tone_arguments(spectrum, tf)
    A = float(np.prod(jv(0, x))) * float(jv(0, drift_argument(spectrum, tf)))
    return CoherenceValue(A)


def weak_coherence(spectrum: DiscreteSpectrum, tf: TogglingFunction) -> CoherenceValue:
    """Gaussian approximation ``exp(-<phi^2>/2)`` with ``<phi^2> = sum x_k^2 / 2``."""
    _require_random(spectrum)
    x, _ = tone_arguments(spectrum, tf)
    xs = drift_argument(spectrum, tf)
    return CoherenceValue(math.exp(-(float(np.sum(x**2)) + xs**2) / 4.0))


def _l1_ball(d: int, budget: int):
    if d == 0:
        yield ()
        return
    for h in range(-budget, budget + 1):
        for rest in _l1_ball(d - 1, budget - abs(h)):
            yield (h,) + rest


def resonant_vectors(freqs: Sequence[float], h_max: int, f_tol: float = 1e-6) -> np.ndarray:
    """Integer vectors with ``sum|h| <= h_max``, ``|h . f| <= f_tol`` and even ``sum h``."""
    freqs = np.asarray(freqs, dtype=float)
    H = np.array(list(_l1_ball(freqs.size, h_max)), dtype=np.int64).reshape(-1, freqs.size)
    keep = (np.abs(H @ freqs) <= f_tol) & (H.sum(axis=1) % 2 == 0)
    return H[keep]


def coherence_mixing(spectrum: DiscreteSpectrum, tf: TogglingFunction,
                     h_max: int = 6, f_tol: float = 1e-6) -> CoherenceValue:
    """Coherence for phase-locked tones, including frequency-mixing terms.

    Sums ``(-1)^(S/2) cos(sum h_k a_k) prod_k J_{h_k}(x_k)`` over resonant
    vectors (``S = sum h_k`` even), with ``a_k`` the locked offset minus the
    filter phase ``arg F_T(f_k)``. The series is truncated at ``sum|h_k| <= h_max``.
    """
    if not spectrum.all_locked:
        raise ModeMismatchError("coherence_mixing needs every tone phase-locked")
    if not 1 <= int(h_max) <= MAX_MIXING_ORDER:
        raise InvalidArgumentError(f"h_max must be in [1, {MAX_MIXING_ORDER}], got {h_max}")
    h_max = int(h_max)
    drift = float(jv(0, drift_argument(spectrum, tf)))
    if not len(spectrum):
        return CoherenceValue(drift)
    x, filt = tone_arguments(spectrum, tf)
    H = resonant_vectors(spectrum.frequencies, h_max, f_tol)
    orders = np.arange(-h_max, h_max + 1)
    table = jv(orders[None, :], x[:, None])  # (d, 2 h_max + 1)
    d = x.size
    bessel = np.prod(table[np.arange(d)[None, :], H + h_max], axis=1)
    eff = spectrum.offsets - filt
    sign = np.where((H.sum(axis=1) // 2) % 2 == 0, 1.0, -1.0)
    A = float(np.sum(sign * np.cos(H @ eff) * bessel))
    return CoherenceValue(A * drift)


def _draw_phases(rng, spectrum, size, common_period):
    d = len(spectrum)
    alphas = rng.uniform(0.0, 2.0 * math.pi, size=(size, d))
    if common_period is not None:
        tau = rng.uniform(0.0, common_period, size=size)
        locked = np.array([t.locked for t in spectrum.tones], dtype=bool)
        if locked.any():
            shifted = spectrum.offsets + 2.0 * math.pi * spectrum.frequencies * tau[:, None]
            alphas = np.where(locked, shifted, alphas)
    return alphas


def _check_period(common_period):
    if common_period is not None and not common_period > 0:
        raise InvalidArgumentError(f"common time-origin period must be positive, got {common_period}")


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def coherence_monte_carlo(spectrum: DiscreteSpectrum, tf: TogglingFunction, samples: int,
                          seed: int, common_period: float | None = None,
                          threads: int = 1) -> CoherenceValue:
    """Sample mean of ``cos(phi)`` over random noise realizations.

    ``common_period=None`` draws every tone phase independently and uniformly.
    Otherwise a single time origin ``tau`` uniform in ``[0, common_period)`` is
    drawn per sample and each locked tone gets ``alpha_k = offset_k + 2 pi f_k tau``;
    unlocked tones stay independent. Samples are generated in fixed-size chunks,
    each on its own substream, so the result is independent of ``threads``.
    """
    if samples < 100:
        raise InvalidArgumentError(f"need at least 100 samples, got {samples}")
    _check_period(common_period)
    x, filt = tone_arguments(spectrum, tf)
    xs = drift_argument(spectrum, tf)
    if not len(spectrum) and xs == 0:
        return CoherenceValue(1.0, 0.0, 0.0)

    n_chunks = -(-samples // MC_CHUNK)

    def run(c):
        size = min(MC_CHUNK, samples - c * MC_CHUNK)
        rng = substream(seed, _MC_TAG, c)
        alphas = _draw_phases(rng, spectrum, size, common_period)
        beta = rng.uniform(0.0, 2.0 * math.pi, size=size) if xs else None
        phi = _batch_phase(x, filt, alphas, xs, beta)
        cos = np.cos(phi)
        return cos.sum(), (cos * cos).sum(), np.sin(phi).sum()

    parts = np.array(_map(run, range(n_chunks), threads))
    s1, s2, si = parts.sum(axis=0)
    mean = s1 / samples
    var = max(s2 - samples * mean * mean, 0.0) / (samples - 1)
    return CoherenceValue(float(mean), math.sqrt(var / samples), float(si / samples))


def ramsey_probability(A: float, phi_rf):
    """``P_up = 1/2 - (A/2) cos(phi_rf)``."""
    if abs(A) > 1:
        raise InvalidArgumentError(f"|A| must be <= 1, got {A}")
    return 0.5 - 0.5 * A * np.cos(phi_rf)


def simulate_fringe(spectrum: DiscreteSpectrum, tf: TogglingFunction, phi_grid: Sequence[float],
                    shots: int, seed: int, common_period: float | None = None,
                    stream: tuple[int, ...] = (), threads: int = 1) -> FringeScan:
    """Shot-by-shot Ramsey fringe with projection noise.

    Every shot draws its own noise realization, accumulates ``phi`` and yields
    one Bernoulli outcome with ``p = 1/2 - cos(phi_rf - phi)/2``. Phase point
    ``i`` uses substream ``(seed, *stream, i)``.
    """
    phi_grid = np.asarray(phi_grid, dtype=float).ravel()
    if shots < 1:
        raise InvalidArgumentError("shots must be >= 1")
    if phi_grid.size == 0:
        raise InvalidArgumentError("empty phase grid")
    _check_period(common_period)
    x, filt = tone_arguments(spectrum, tf)
    xs = drift_argument(spectrum, tf)

    def run(i):
        rng = substream(seed, _FRINGE_TAG, *stream, i)
        alphas = _draw_phases(rng, spectrum, shots, common_period)
        beta = rng.uniform(0.0, 2.0 * math.pi, size=shots) if xs else None
        phi = _batch_phase(x, filt, alphas, xs, beta)
        p = 0.5 - 0.5 * np.cos(phi_grid[i] - phi)
        return np.count_nonzero(rng.random(shots) < p)

    ups = np.array(_map(run, range(phi_grid.size), threads), dtype=float)
    return FringeScan(phi_grid, ups / shots, np.full(phi_grid.size, shots))
