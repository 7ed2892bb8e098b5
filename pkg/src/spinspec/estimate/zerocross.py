"""Tone magnitude from the first zero crossing of coherence vs. pulse number."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import jn_zeros

from ..errors import InvalidArgumentError, NotCrossedError
from ..noise import UnitsConfig, default_units
from ..schedule import filter_transform, make_schedule, toggling

Z0 = float(jn_zeros(0, 1)[0])
SHAPE_CONSTANT = {"equidistant": 2.0 / math.pi, "uhrig": 0.42}


@dataclass(frozen=True)
class ZeroCrossing:
    amplitude_ug: float
    amplitude_rad_s: float
    T_star: float
    n_bracket: tuple[int, int]
    eta: float


def filter_magnitude(scheme: str, n: int, f_mod: float, f: float) -> float:
    return float(abs(filter_transform(toggling(make_schedule(scheme, int(n), f_mod)), f)))


def magnitude_by_zero_crossing(series, f_k: float, scheme: str = "equidistant",
                               units: UnitsConfig | None = None) -> ZeroCrossing:
    """Estimate ``N_k`` from the first sign change of ``A(n)`` at ``f_mod = f_k``.

    ``series`` holds ``(n, A[, sigma])`` rows. The crossing time ``T*`` is
    linearly interpolated between the bracketing schedules, ``|F_T(f_k)|`` is
    interpolated the same way from the two exact filter values, and
    ``N |F_T*(f_k)| = z_0`` is solved for ``N``.
    """
    units = units or default_units()
    data = np.asarray(series, dtype=float)
    if data.ndim != 2 or data.shape[1] < 2:
        raise InvalidArgumentError("series rows must be (n, A[, sigma])")
    data = data[np.argsort(data[:, 0])]
    n, A = data[:, 0].astype(int), data[:, 1]
    T = (n + 1) / (2.0 * f_k)
    for i in range(len(A) - 1):
        a, b = A[i], A[i + 1]
        if a == 0.0 or a * b < 0:
            break
    else:
        raise NotCrossedError(f"coherence never changes sign up to n={n.max()}; extend the scan")
    frac = 0.0 if a == 0.0 else a / (a - b)
    T_star = T[i] + frac * (T[i + 1] - T[i])
    F_a = filter_magnitude(scheme, n[i], f_k, f_k)
    F_b = filter_magnitude(scheme, n[i + 1], f_k, f_k)
    F_star = F_a + frac * (F_b - F_a)
    N = Z0 / F_star
    eta = SHAPE_CONSTANT.get(scheme, 2.0 / math.pi) * N * T_star
    return ZeroCrossing(N / units.kappa_per_ug, N, float(T_star), (int(n[i]), int(n[i + 1])), eta)
