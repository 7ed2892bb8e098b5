"""
Multi-tone amplitude fit of the Bessel-product coherence model.

Tone frequencies are held fixed; the free parameters are the field amplitudes
(microgauss) and, optionally, the slow-drift product P (Hz^2). Non-negativity
is enforced by fitting square roots of the parameters with a damped
Gauss-Newton (Levenberg-Marquardt) iteration on a finite-difference Jacobian.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

from ..errors import IllConditionedError, InvalidArgumentError
from ..noise import UnitsConfig, default_units
from ..schedule import filter_dc_slope, filter_transform, make_schedule, toggling
from .scan import ScanGrid
from .zerocross import Z0

FD_STEP = 1e-6
FTOL = 1e-10
GTOL = 1e-8
MAX_ITER = 200
LAMBDA_MAX = 1e16


@dataclass
class EstimateReport:
    frequencies: np.ndarray
    amplitudes: np.ndarray
    sigmas: np.ndarray
    slow_drift: float | None = None
    slow_drift_sigma: float | None = None
    rss: float = 0.0
    chi2_red: float = float("nan")
    iterations: int = 0
    converged: bool = False
    grad_norm: float = float("nan")
    message: str = ""
    cost_history: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["freq_hz", "amp_ug", "sigma_ug"])
        for f, a, s in zip(self.frequencies, self.amplitudes, self.sigmas):
            w.writerow([f"{f:.17g}", f"{a:.17g}", f"{s:.17g}"])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [f"tone_{f:g}_hz = {a:.6g} +- {s:.2g} uG"
                 for f, a, s in zip(self.frequencies, self.amplitudes, self.sigmas)]
        if self.slow_drift is not None:
            lines.append(f"slow_drift_hz2 = {self.slow_drift:.6g} +- {self.slow_drift_sigma:.2g}")
        lines += [
            f"rss = {self.rss:.6g}",
            f"chi2_red = {self.chi2_red:.6g}",
            f"iterations = {self.iterations}",
            f"converged = {str(self.converged).lower()}",
            f"grad_norm = {self.grad_norm:.3g}",
            f"message = {self.message}",
        ]
        return "\n".join(lines) + "\n"


class BesselProductModel:
    """Coherence of fixed-frequency tones on a set of schedules.

    The filter magnitudes depend only on the schedules and tone frequencies,
    so they are computed once; evaluating the model is then a product of
    ``J_0`` terms.
    """

    def __init__(self, f_mod, n, tones: Sequence[float], scheme: str = "equidistant",
                 units: UnitsConfig | None = None):
        units = units or default_units()
        self.tones = np.asarray(tones, dtype=float)
        self.kappa = units.kappa_per_ug
        f_mod = np.asarray(f_mod, dtype=float)
        n = np.asarray(n, dtype=np.int64)
        F = np.empty((f_mod.size, self.tones.size))
        D = np.empty(f_mod.size)
        for i, (fm, nn) in enumerate(zip(f_mod, n)):
            tf = toggling(make_schedule(scheme, int(nn), float(fm)))
            F[i] = np.abs(filter_transform(tf, self.tones))
            D[i] = abs(filter_dc_slope(tf))
        self.F = F
        self.D = D

    def __call__(self, amplitudes, drift=0.0):
        x = self.kappa * self.F * np.asarray(amplitudes, dtype=float)
        return np.prod(jv(0, x), axis=1) * jv(0, 2.0 * math.pi * drift * self.D)


def _as_records(data) -> np.ndarray:
    if isinstance(data, ScanGrid):
        return data.records()
    rec = np.asarray(data, dtype=float)
    if rec.ndim != 2 or rec.shape[1] != 4:
        raise InvalidArgumentError("data rows must be (f_mod, n, A, sigma)")
    return rec


def _jacobian(fun, p, steps):
    J = np.empty((fun(p).size, p.size))
    for j in range(p.size):
        e = np.zeros_like(p)
        e[j] = steps[j]
        J[:, j] = (fun(p + e) - fun(p - e)) / (2.0 * steps[j])
    return J


def levenberg_marquardt(residuals, q0, max_iter=MAX_ITER, ftol=FTOL, gtol=GTOL):
    """Minimize ``0.5 |r(q)|^2``; accepted steps never raise the cost.

    Returns ``(q, info)`` with the cost history of accepted iterates.
    """
    q = np.asarray(q0, dtype=float).copy()
    r = residuals(q)
    cost = 0.5 * float(r @ r)
    history = [cost]
    lam = 1e-3
    converged, message = False, "iteration limit reached"
    g_norm = float("nan")
    it = 0
    for it in range(1, max_iter + 1):
        steps = FD_STEP * np.maximum(np.abs(q), 1e-3)
        J = _jacobian(residuals, q, steps)
        g = J.T @ r
        g_norm = float(np.linalg.norm(g))
        if g_norm < gtol:
            converged, message = True, "gradient norm below tolerance"
            break
        JtJ = J.T @ J
        diag = np.maximum(np.diag(JtJ), 1e-12 * max(np.max(np.diag(JtJ)), 1e-300))
        while True:
            try:
                delta = np.linalg.solve(JtJ + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                delta = None
            if delta is not None:
                r_new = residuals(q + delta)
                cost_new = 0.5 * float(r_new @ r_new)
                if np.isfinite(cost_new) and cost_new < cost:
                    break
            lam *= 10.0
            if lam > LAMBDA_MAX:
                return q, dict(cost=cost, history=history, iterations=it, converged=False,
                               grad_norm=g_norm, message="no decrease possible at maximum damping")
        rel = (cost - cost_new) / cost
        q, r, cost = q + delta, r_new, cost_new
        history.append(cost)
        lam = max(lam / 10.0, 1e-12)
        if rel < ftol:
            converged, message = True, "relative cost change below tolerance"
            break
    return q, dict(cost=cost, history=history, iterations=it, converged=converged,
                   grad_norm=g_norm, message=message)


def fine_tune_fit(data, tones: Sequence[float], initial: Sequence[float],
                  scheme: str = "equidistant", fit_slow_drift: bool = False,
                  initial_drift: float = 10.0, units: UnitsConfig | None = None,
                  max_iter: int = MAX_ITER) -> EstimateReport:
    """Weighted least-squares fit of tone amplitudes (and drift) to coherence data.

    Parameters
    ----------
    data : ScanGrid or array of (f_mod, n, A, sigma) rows
        Cells with ``sigma <= 0`` get unit weight.
    tones : sequence of float
        Fixed tone frequencies in Hz.
    initial : sequence of float
        Starting amplitudes in microgauss, e.g. from zero-crossing estimates.
    fit_slow_drift : bool
        Also fit the slow-drift product P (Hz^2), starting at ``initial_drift``.

    Raises
    ------
    IllConditionedError
        If the normal matrix at the solution is singular.
    """
    rec = _as_records(data)
    tones = np.asarray(tones, dtype=float)
    initial = np.asarray(initial, dtype=float)
    if tones.size == 0:
        raise InvalidArgumentError("at least one model tone is required")
    if initial.shape != tones.shape or np.any(initial < 0):
        raise InvalidArgumentError("need one non-negative initial amplitude per tone")
    n_par = tones.size + int(fit_slow_drift)
    m = rec.shape[0]
    if m < n_par + 2:
        raise InvalidArgumentError(f"need at least {n_par + 2} data points, got {m}")

    model = BesselProductModel(rec[:, 0], rec[:, 1], tones, scheme, units)
    y = rec[:, 2]
    sig = rec[:, 3]
    inv_sigma = np.where(sig > 0, 1.0 / np.where(sig > 0, sig, 1.0), 1.0)
    k = tones.size

    def unpack(p):
        return p[:k], (p[k] if fit_slow_drift else 0.0)

    def resid_params(p):
        a, P = unpack(p)
        return (model(a, P) - y) * inv_sigma

    q0 = np.sqrt(np.maximum(initial, 1e-3))
    if fit_slow_drift:
        q0 = np.append(q0, math.sqrt(max(initial_drift, 1e-3)))
    q, info = levenberg_marquardt(lambda q: resid_params(q * q), q0, max_iter=max_iter)
    p = q * q

    # covariance in parameter space; parameters pinned near zero get a forward difference
    steps = FD_STEP * np.maximum(p, 1.0)
    J = np.empty((m, p.size))
    r0 = resid_params(p)
    for j in range(p.size):
        e = np.zeros_like(p)
        e[j] = steps[j]
        if p[j] > steps[j]:
            J[:, j] = (resid_params(p + e) - resid_params(p - e)) / (2.0 * steps[j])
        else:
            J[:, j] = (resid_params(p + e) - r0) / steps[j]
    JtJ = J.T @ J
    if not np.all(np.isfinite(JtJ)) or np.linalg.cond(JtJ) > 1e14:
        raise IllConditionedError("normal matrix is singular at the solution")
    rss = float(r0 @ r0)
    chi2_red = rss / (m - n_par)
    cov = np.linalg.inv(JtJ) * chi2_red
    err = np.sqrt(np.maximum(np.diag(cov), 0.0))
    a, P = unpack(p)
    return EstimateReport(
        frequencies=tones,
        amplitudes=a.copy(),
        sigmas=err[:k].copy(),
        slow_drift=float(P) if fit_slow_drift else None,
        slow_drift_sigma=float(err[k]) if fit_slow_drift else None,
        rss=rss,
        chi2_red=chi2_red,
        iterations=info["iterations"],
        converged=info["converged"],
        grad_norm=info["grad_norm"],
        message=info["message"],
        cost_history=info["history"],
    )


def initial_from_dips(data, tones: Sequence[float], scheme: str = "equidistant",
                      units: UnitsConfig | None = None) -> np.ndarray:
    """Rough starting amplitudes from the coherence nearest each tone.

    For each tone the cell with ``f_mod`` closest to the tone (largest ``n``
    among ties) is read and ``J_0(x) = max(A, 0)`` is inverted on ``[0, z_0]``.
    """
    units = units or default_units()
    rec = _as_records(data)
    out = []
    for f in tones:
        dist = np.abs(rec[:, 0] - f)
        cand = rec[dist == dist.min()]
        f_mod, n, A, _ = cand[np.argmax(cand[:, 1])]
        if A <= 0:
            x = Z0
        elif A >= 1:
            x = 0.0
        else:
            x = brentq(lambda z: jv(0, z) - A, 0.0, Z0)
        tf = toggling(make_schedule(scheme, int(n), float(f_mod)))
        F = abs(filter_transform(tf, f))
        out.append(x / (units.kappa_per_ug * F) if F > 0 else 0.0)
    return np.array(out)
