"""Fitters for decay traces, saturation curves, fringes and coherence decay."""

import math

import numpy as np

from ..errors import ConstraintViolation, FitError, InsufficientDataError, UnderConstrainedError
from .lm import FitResult, as_series, levenberg_marquardt


def _need(series, n, what):
    if len(series) < n:
        raise InsufficientDataError(f"{what} needs at least {n} points, got {len(series)}")


def _flat(y, sigma):
    spread = float(np.ptp(y))
    if sigma is not None:
        return spread <= 1e-9 * float(np.median(sigma))
    return spread <= 1e-12 * max(1.0, float(np.max(np.abs(y))))


def _degenerate(names, values, n, message):
    k = len(names)
    return FitResult(tuple(names), np.asarray(values, dtype=float), np.zeros((k, k)), 0.0,
                     n - k, True, 0, ("degenerate",), message)


def exp_decay(x, A, b, c):
    return A * np.exp(-b * x) + c


def fit_exponential_decay(series, y=None, sigma=None):
    """Fit ``y = A exp(-b x) + c``.

    Starts from a log-linear fit of the data above a tail-estimated
    background. Flat data returns ``b = 0`` flagged ``degenerate``.
    """
    s = as_series(series, y, sigma)
    _need(s, 4, "exponential fit")
    x, yy = s.x, s.y
    if _flat(yy, s.sigma):
        return _degenerate(("A", "b", "c"), (0.0, 0.0, float(yy.mean())), len(s),
                           "constant data")
    order = np.argsort(x)
    tail = max(2, len(x) // 10)
    c0 = float(np.mean(yy[order[-tail:]]))
    z = yy - c0
    head = float(np.mean(z[order[:tail]]))
    sign = 1.0 if head >= 0 else -1.0
    z = sign * z
    ok = z > 0.05 * max(abs(head), 1e-300)
    if ok.sum() >= 2 and np.ptp(x[ok]) > 0:
        slope, icept = np.polyfit(x[ok], np.log(z[ok]), 1)
        b0 = max(-slope, 1e-6 / max(np.ptp(x), 1e-300))
        A0 = sign * math.exp(icept)
    else:
        b0 = 1.0 / max(np.ptp(x), 1e-300)
        A0 = head * sign
    fit = levenberg_marquardt(exp_decay, x, yy, (A0, b0, c0), s.sigma, ("A", "b", "c"))
    span_effect = abs(fit["A"]) * abs(1 - math.exp(-fit["b"] * np.ptp(x))) if np.isfinite(fit["b"]) else 0
    noise = float(np.median(s.sigma)) if s.sigma is not None else 1e-12 * max(1.0, float(np.max(np.abs(yy))))
    if span_effect <= noise * 1e-6:
        fit.flags = fit.flags + ("degenerate",)
    return fit


SATURATION_RUNAWAY = 1e3


def saturation_power(b, p_sat, gammaR):
    """Power that produces decay constant ``b``; infinite at ``b >= gammaR / 2``."""
    b = np.asarray(b, dtype=float)
    den = gammaR - 2 * b
    return np.where(den > 0, 2 * b * p_sat / np.where(den > 0, den, 1.0), np.inf)


def fit_branching_saturation(b, p, sigma_p=None, gamma=None, gamma_rel_err=0.0,
                             absolute_sigma=False):
    """Fit ``p = 2 b p_sat / (gammaR - 2 b)`` with power as the dependent variable.

    ``gamma`` turns ``gammaR`` into the branching ratio ``R``; its relative
    uncertainty is added to the fitted one in quadrature. Iterates with
    ``gammaR <= 2 max(b)`` are rejected by the optimizer, and a start or end
    point there raises :class:`FitError`.
    """
    b = np.asarray(b, dtype=float)
    p = np.asarray(p, dtype=float)
    if len(b) != len(p):
        raise ConstraintViolation("b", "b and p must be the same length")
    if len(b) < 3:
        raise InsufficientDataError("saturation fit needs at least 3 points")
    if np.any(b <= 0) or np.any(p <= 0):
        raise ConstraintViolation("b", "decay constants and powers must be > 0")
    # 1/p = (gammaR / 2 p_sat)(1/b) - 1/p_sat is linear in 1/b.
    slope, icept = np.polyfit(1.0 / b, 1.0 / p, 1)
    if icept < 0 and slope > 0:
        ps0 = -1.0 / icept
        gR0 = 2.0 * slope * ps0
    else:
        ps0, gR0 = float(np.median(p)), 0.0
    bmax = float(b.max())
    if not gR0 > 2 * bmax:
        gR0 = 3.0 * bmax
        ps0 = float(np.median(p * (gR0 - 2 * b) / (2 * b)))
    fit = levenberg_marquardt(saturation_power, b, p, (ps0, gR0), sigma_p, ("p_sat", "gammaR"),
                              absolute_sigma=absolute_sigma)
    if not fit["gammaR"] > 2 * bmax:
        raise FitError(f"gammaR = {fit['gammaR']:.6g} is not above 2 max(b) = {2 * bmax:.6g}")
    # Without visible saturation p_sat and gammaR run off together.
    if fit["gammaR"] > SATURATION_RUNAWAY * 2 * bmax:
        raise FitError(f"no saturation in the data: gammaR = {fit['gammaR']:.6g} exceeds "
                       f"{SATURATION_RUNAWAY:g} x 2 max(b)")
    if gamma is not None:
        R = fit["gammaR"] / gamma
        rel_fit = fit.stderr("gammaR") / fit["gammaR"]
        fit.derived["R"] = R
        fit.derived["R_stderr"] = R * math.hypot(rel_fit, gamma_rel_err)
        fit.derived["R_stderr_fit"] = R * rel_fit
    return fit


def sinusoid(x, A, f, phi, offset):
    return offset + A * np.cos(2 * np.pi * f * x + phi)


def _periodogram(x, y, span):
    """Frequency minimizing the residual of a linear cos/sin/offset fit."""
    n = len(x)
    dx = np.median(np.diff(np.sort(x)))
    fmax = 0.5 / dx if dx > 0 else (n - 1) / (2 * span)
    freqs = np.arange(0.25 / span, fmax, 1.0 / (16 * span))
    best, fbest = np.inf, freqs[0] if len(freqs) else 1.0 / span
    ones = np.ones(n)
    for f in freqs:
        ph = 2 * np.pi * f * x
        X = np.column_stack([np.cos(ph), np.sin(ph), ones])
        coef, res, *_ = np.linalg.lstsq(X, y, rcond=None)
        r = float(res[0]) if len(res) else float(np.sum((X @ coef - y) ** 2))
        if r < best:
            best, fbest = r, f
    return fbest


def fit_sinusoid(series, y=None, sigma=None):
    """Fit ``y = offset + A cos(2 pi f x + phi)``; ``A >= 0``, ``phi`` in (-pi, pi].

    Raises :class:`UnderConstrainedError` if the data span less than one
    period. Flat data returns ``A = 0`` flagged ``degenerate``.
    """
    s = as_series(series, y, sigma)
    _need(s, 8, "sinusoid fit")
    x, yy = s.x, s.y
    if _flat(yy, s.sigma):
        return _degenerate(("A", "f", "phi", "offset"), (0.0, 0.0, 0.0, float(yy.mean())),
                           len(s), "constant data")
    span = float(np.ptp(x))
    f0 = _periodogram(x, yy, span)
    if f0 * span < 1.0:
        raise UnderConstrainedError(f"data span {span:.6g} covers {f0 * span:.3f} periods; need >= 1")
    ph = 2 * np.pi * f0 * x
    X = np.column_stack([np.cos(ph), np.sin(ph), np.ones_like(x)])
    (a, bsin, off), *_ = np.linalg.lstsq(X, yy, rcond=None)
    A0 = math.hypot(a, bsin)
    phi0 = math.atan2(-bsin, a)
    fit = levenberg_marquardt(sinusoid, x, yy, (A0, f0, phi0, off), s.sigma,
                              ("A", "f", "phi", "offset"))
    A, f, phi, off = fit.values
    if A < 0:
        A, phi = -A, phi + math.pi
    if f < 0:
        f, phi = -f, -phi
    fit.values = np.array([A, f, math.remainder(phi, 2 * math.pi), off])
    if f * span < 1.0:
        raise UnderConstrainedError(f"fitted frequency gives {f * span:.3f} periods over the data")
    noise = float(np.median(s.sigma)) if s.sigma is not None else 0.0
    if A <= max(1e-9 * max(1.0, abs(off)), 1e-6 * noise):
        fit.flags = fit.flags + ("degenerate",)
    return fit


def gaussian_decay(T, A0, tau):
    return A0 * np.exp(-(T / tau) ** 2)


def fit_gaussian_decay(series, y=None, sigma=None):
    """Fit ``A(T) = A0 exp(-(T / tau)^2)``; ``tau`` is reported positive.

    Data that do not decrease get the flag ``non-decaying``.
    """
    s = as_series(series, y, sigma)
    _need(s, 3, "gaussian decay fit")
    T, A = s.x, s.y
    ok = A > 0
    flags = ()
    if ok.sum() >= 2 and np.ptp(T[ok]) > 0:
        slope, icept = np.polyfit(T[ok] ** 2, np.log(A[ok]), 1)
    else:
        slope, icept = 0.0, math.log(max(float(np.max(A)), 1e-300))
    if slope >= 0:
        flags = ("non-decaying",)
        tau0 = 10.0 * max(float(np.max(np.abs(T))), 1e-300)
    else:
        tau0 = 1.0 / math.sqrt(-slope)
    fit = levenberg_marquardt(gaussian_decay, T, A, (math.exp(icept), tau0), s.sigma, ("A0", "tau"))
    fit.values[1] = abs(fit.values[1])
    span = float(np.max(np.abs(T)))
    if fit["tau"] > 10 * span and "non-decaying" not in flags:
        flags = ("non-decaying",)
    fit.flags = fit.flags + flags
    return fit
