"""Ramsey fringe contrast fitting."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..coherence import FringeScan
from ..errors import IllConditionedError

P_CLAMP = (0.01, 0.99)


class FringeFit(NamedTuple):
    A: float
    sigma: float
    intercept: float


def fit_fringe(scan: FringeScan) -> FringeFit:
    """Fit ``P_up = c0 + c1 cos(phi_rf)`` and return ``A = -2 c1``.

    Weighted linear least squares with binomial weights
    ``shots / (p (1 - p))`` (``p`` clamped to ``[0.01, 0.99]``). The
    uncertainty comes from the weighted covariance scaled by the reduced
    chi-square, so noiseless input gives ``sigma ~ 0``. ``c0`` is returned as a
    diagnostic; the contrast model itself is ``1/2 - (A/2) cos(phi_rf)``.
    """
    phi = scan.phi_rf
    y = scan.p_up
    m = phi.size
    c = np.cos(phi)
    if m < 3 or np.unique(np.round(c, 12)).size < 2:
        raise IllConditionedError("fringe fit needs >= 3 points and >= 2 distinct cos(phi_rf)")
    p_hat = np.clip(y, *P_CLAMP)
    w = scan.shots / (p_hat * (1.0 - p_hat))
    X = np.column_stack([np.ones(m), c])
    XtW = X.T * w
    normal = XtW @ X
    if np.linalg.cond(normal) > 1e12:
        raise IllConditionedError("fringe design matrix is singular")
    beta = np.linalg.solve(normal, XtW @ y)
    resid = y - X @ beta
    chi2_red = float(np.sum(w * resid**2)) / (m - 2)
    cov = np.linalg.inv(normal) * chi2_red
    return FringeFit(float(-2.0 * beta[1]), float(2.0 * np.sqrt(cov[1, 1])), float(beta[0]))
