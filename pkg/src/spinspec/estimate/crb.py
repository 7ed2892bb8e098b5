"""Cramer-Rao bound for the amplitude and frequency of a single tone."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import jv

from ..schedule import filter_transform, make_schedule, toggling

P_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class CRBResult:
    """Fisher information and covariance bound for ``(N, f0)``.

    ``singular`` flags a rank-deficient information matrix, in which case
    ``covariance`` is the pseudo-inverse. The ``*_known_*`` fields are the
    one-parameter bounds with the other parameter taken as known.
    """

    fisher: np.ndarray
    covariance: np.ndarray
    singular: bool

    @property
    def sigma_N(self) -> float:
        return float(np.sqrt(self.covariance[0, 0])) if not self.singular else np.inf

    @property
    def sigma_f(self) -> float:
        return float(np.sqrt(self.covariance[1, 1])) if not self.singular else np.inf

    @property
    def sigma_N_known_f(self) -> float:
        I = self.fisher[0, 0]
        return float(1.0 / np.sqrt(I)) if I > 0 else np.inf

    @property
    def sigma_f_known_N(self) -> float:
        I = self.fisher[1, 1]
        return float(1.0 / np.sqrt(I)) if I > 0 else np.inf


def crb_single_tone(N: float, f0: float, scheme: str, n: int, f_mod, shots: int,
                    phi_grid) -> CRBResult:
    """Bound on ``(N, f0)`` from binomial fringes ``P = 1/2 - (A/2) cos(phi_rf)``.

    ``A = J_0(N |F_T(f0)|)``. ``f_mod`` may be a single modulation frequency or
    a sequence of them (one fringe per schedule); a single schedule constrains
    only the product ``N |F_T(f0)|``, so its information matrix is always
    rank one and flagged singular.
    """
    phi = np.asarray(phi_grid, dtype=float)
    cos_phi = np.cos(phi)
    I = np.zeros((2, 2))
    for fm in np.atleast_1d(np.asarray(f_mod, dtype=float)):
        tf = toggling(make_schedule(scheme, int(n), float(fm)))
        F = abs(filter_transform(tf, f0))
        h = 1e-6 * max(abs(f0), 1.0)
        dF = (abs(filter_transform(tf, f0 + h)) - abs(filter_transform(tf, f0 - h))) / (2.0 * h)
        x = N * F
        dA_dx = -jv(1, x)
        grad_A = dA_dx * np.array([F, N * dF])
        A = jv(0, x)
        P = np.clip(0.5 - 0.5 * A * cos_phi, P_FLOOR, 1.0 - P_FLOOR)
        dP_dA = -0.5 * cos_phi
        weight = shots * np.sum(dP_dA**2 / (P * (1.0 - P)))
        I += weight * np.outer(grad_A, grad_A)
    scale = np.max(np.abs(I))
    singular = scale == 0 or np.linalg.matrix_rank(I, tol=1e-10 * scale) < 2
    cov = np.linalg.pinv(I) if singular else np.linalg.inv(I)
    return CRBResult(I, cov, bool(singular))
