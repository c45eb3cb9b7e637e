"""Photon counting, threshold classification and detection fidelity.

Two error models live here. The closed-form race model reproduces the
theoretical fidelity table from one calibrated leak constant. The
finite-window model uses the actual detection window and the physical
leak rate from the rate equations, and is what the simulated histograms
converge to.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, stats

from . import rng as rngmod
from .atom import D32, EMISSION_369, F72, S12
from .dynamics.rates import photon_rate_vector
from .errors import ConstraintViolation, InsufficientDataError

ZERO, ONE = 0, 1


@dataclass(frozen=True)
class DetectionConfig:
    """Detector model. A shot reads |1> when ``counts > threshold``."""

    window: float = 1e-3
    threshold: int = 1
    efficiency: float = 0.001
    dark_rate: float = 150.0

    def __post_init__(self):
        if not self.window > 0:
            raise ConstraintViolation("window", "must be > 0")
        if not 0 < self.efficiency <= 1:
            raise ConstraintViolation("efficiency", "must lie in (0, 1]")
        if not self.dark_rate >= 0:
            raise ConstraintViolation("dark_rate", "must be >= 0")
        if self.threshold < 0:
            raise ConstraintViolation("threshold", "must be >= 0")

    @property
    def dark_mean(self):
        return self.dark_rate * self.window

    def to_dict(self):
        return {"window_s": self.window, "threshold_counts": self.threshold,
                "efficiency": self.efficiency, "dark_rate_per_s": self.dark_rate}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d.get("window_s", 1e-3)), int(d.get("threshold_counts", 1)),
                   float(d.get("efficiency", 0.001)), float(d.get("dark_rate_per_s", 150.0)))


@dataclass
class Histogram:
    """Tally of photon counts. ``occurrences[n]`` shots saw ``n`` counts."""

    occurrences: dict = field(default_factory=dict)

    @property
    def total(self):
        return sum(self.occurrences.values())

    def __add__(self, other):
        out = dict(self.occurrences)
        for k, v in other.occurrences.items():
            out[k] = out.get(k, 0) + v
        return Histogram(out)

    def merge(self, other):
        return self + other

    def arrays(self):
        """``(counts, occurrences)`` sorted by count."""
        keys = sorted(self.occurrences)
        return (np.array(keys, dtype=np.int64),
                np.array([self.occurrences[k] for k in keys], dtype=np.int64))

    def mean(self):
        k, n = self.arrays()
        return float((k * n).sum() / n.sum()) if len(n) else float("nan")

    def fraction_above(self, threshold):
        if self.total == 0:
            raise InsufficientDataError("empty histogram")
        return sum(v for k, v in self.occurrences.items() if k > threshold) / self.total

    def mode(self):
        return max(self.occurrences, key=lambda k: (self.occurrences[k], -k))

    def rows(self):
        k, n = self.arrays()
        return [(int(a), int(b)) for a, b in zip(k, n)]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["count", "occurrences"])
            w.writerows(self.rows())

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            r = csv.DictReader(fh)
            return cls({int(row["count"]): int(row["occurrences"]) for row in r})


def accumulate_histogram(counts):
    keys, occ = np.unique(np.asarray(counts, dtype=np.int64), return_counts=True)
    return Histogram({int(k): int(v) for k, v in zip(keys, occ)})


def _emitted(events):
    if hasattr(events, "photon_times"):
        return len(events.photon_times(EMISSION_369))
    if np.ndim(events) == 0:
        return int(events)
    return len(events)


def detect_counts(events, cfg, seed, shot_index):
    """Detector counts for one shot.

    ``events`` is a :class:`TrajectoryResult`, an array of countable photon
    times, or an integer number of emitted countable photons. Each photon
    is kept with probability ``cfg.efficiency``; Poisson dark counts with
    mean ``dark_rate * window`` are added.
    """
    g = rngmod.stream(seed, shot_index, rngmod.DETECTION)
    n = _emitted(events)
    kept = g.binomial(n, cfg.efficiency) if n else 0
    return int(kept + g.poisson(cfg.dark_mean))


def detect_many(emitted, cfg, seed, shot_indices):
    """Vectorized :func:`detect_counts` over per-shot emitted totals."""
    emitted = np.asarray(emitted, dtype=np.int64)
    out = np.empty(len(emitted), dtype=np.int64)
    for j, (n, idx) in enumerate(zip(emitted, shot_indices)):
        out[j] = detect_counts(int(n), cfg, seed, int(idx))
    return out


def classify(count, cfg):
    """``ONE`` if ``count > cfg.threshold`` else ``ZERO``; broadcasts over arrays."""
    if np.ndim(count):
        return (np.asarray(count) > cfg.threshold).astype(np.int64)
    return ONE if count > cfg.threshold else ZERO


@dataclass(frozen=True)
class FidelityReport:
    fidelity_dark: float
    fidelity_bright: float
    error_dark: float
    error_bright: float
    threshold: int
    shots_dark: int
    shots_bright: int

    @property
    def average(self):
        return 0.5 * (self.fidelity_dark + self.fidelity_bright)

    @property
    def error_average(self):
        return 0.5 * math.hypot(self.error_dark, self.error_bright)

    def to_dict(self):
        return {"fidelity_dark": self.fidelity_dark, "fidelity_bright": self.fidelity_bright,
                "fidelity_average": self.average, "stderr_dark": self.error_dark,
                "stderr_bright": self.error_bright, "stderr_average": self.error_average,
                "threshold_counts": self.threshold, "shots_dark": self.shots_dark,
                "shots_bright": self.shots_bright}


def _binomial_stderr(p, n):
    # Floor at one event so a perfect score still carries an error.
    return math.sqrt(max(p * (1 - p), 1.0 / n) / n)


def estimate_fidelity(hist_dark, hist_bright, cfg):
    if hist_dark.total == 0 or hist_bright.total == 0:
        raise InsufficientDataError("both histograms need at least one shot")
    fd = 1.0 - hist_dark.fraction_above(cfg.threshold)
    fb = hist_bright.fraction_above(cfg.threshold)
    return FidelityReport(fd, fb, _binomial_stderr(fd, hist_dark.total),
                          _binomial_stderr(fb, hist_bright.total), cfg.threshold,
                          hist_dark.total, hist_bright.total)


def threshold_sweep(hist_dark, hist_bright, thresholds=range(0, 11)):
    """Average fidelity for each threshold; returns ``[(threshold, report)]``."""
    out = []
    for t in thresholds:
        cfg = DetectionConfig(threshold=int(t))
        out.append((int(t), estimate_fidelity(hist_dark, hist_bright, cfg)))
    return out


def best_threshold(hist_dark, hist_bright, thresholds=range(0, 11)):
    return max(threshold_sweep(hist_dark, hist_bright, thresholds),
               key=lambda tr: (tr[1].average, -tr[0]))[0]


# Race model ----------------------------------------------------------------

@dataclass(frozen=True)
class LeakModel:
    """Bright-state pump-out probability per scattered photon.

    With ``kappa_applied`` the scattering is reduced threefold while the
    absolute leak rate is not, so the per-photon leak is ``3 * q_leak``.
    """

    q_leak: float
    kappa_applied: bool = True

    def __post_init__(self):
        if not 0 < self.q_leak < 1:
            raise ConstraintViolation("q_leak", "must lie in (0, 1)")

    @property
    def q_effective(self):
        return 3.0 * self.q_leak if self.kappa_applied else self.q_leak


def race_error(mu):
    """P(at most one detection before the leak) for detection/leak odds ``mu``."""
    mu = np.asarray(mu, dtype=float)
    out = (1 + 2 * mu) / (1 + mu) ** 2
    return out if out.ndim else float(out)


def race_mu(error):
    """Inverse of :func:`race_error` on ``mu > 0``."""
    if not 0 < error < 1:
        raise ConstraintViolation("error", "must lie in (0, 1)")
    r = math.sqrt(1 - error)
    return (1 - error + r) / error


def theoretical_fidelity(efficiency, leak):
    if not 0 < efficiency <= 1:
        raise ConstraintViolation("efficiency", "must lie in (0, 1]")
    return 1.0 - race_error(efficiency / leak.q_effective)


def calibrate_q_leak(efficiency, fidelity, kappa_applied=True):
    """The leak model whose theoretical fidelity at ``efficiency`` is ``fidelity``."""
    q_eff = efficiency / race_mu(1.0 - fidelity)
    return LeakModel(q_eff / 3.0 if kappa_applied else q_eff, kappa_applied)


# Calibrated against the (0.003, 99.51%) row of the theoretical table.
TABLE_CALIBRATION = (0.003, 0.9951)
DEFAULT_LEAK = calibrate_q_leak(*TABLE_CALIBRATION)


# Physical leak and finite-window model -------------------------------------

@dataclass(frozen=True)
class BrightCycle:
    """Quasi-stationary bright-state behaviour under a detection field.

    ``photon_rate`` counts detectable photons per second; ``leak_rate`` is
    the rate of escape into the dark qubit state.
    """

    photon_rate: float
    leak_rate: float

    @property
    def q_per_photon(self):
        return self.leak_rate / self.photon_rate


def dark_sinks(scheme):
    """Manifolds a bright Yb171 ion can fall into and stay dark for the window.

    S F=0 is the qubit dark state. D3/2 F=2 is not repumped without the
    3.07 GHz sideband, and F7/2 is not repumped during detection.
    """
    out = [scheme.index(S12, 0), scheme.index(D32, 2)]
    if any(m.term == F72 for m in scheme.manifolds):
        out.append(scheme.index(F72))
    return out


def bright_cycle(scheme, rate_matrix):
    """Quasi-stationary photon and escape rates of the bright cycle."""
    sinks = set(dark_sinks(scheme))
    keep = [i for i in range(len(scheme)) if i not in sinks]
    M = rate_matrix.matrix if hasattr(rate_matrix, "matrix") else np.asarray(rate_matrix)
    sub = M[np.ix_(keep, keep)]
    w, v = np.linalg.eig(sub)
    j = int(np.argmax(w.real))
    vec = np.abs(v[:, j].real)
    vec /= vec.sum()
    rv = photon_rate_vector(scheme)[keep]
    return BrightCycle(float(rv @ vec), float(-w[j].real))


def leak_weight_for(scheme, build, q_target):
    """Leak weight that makes the per-photon leak equal ``q_target``.

    ``build(weight)`` must return the detection rate matrix for a weight.
    """
    def f(logw):
        return math.log(bright_cycle(scheme, build(math.exp(logw))).q_per_photon / q_target)

    return math.exp(optimize.brentq(f, math.log(1e-6), math.log(1e3), xtol=1e-12))


def window_errors(efficiency, cycle, cfg):
    """``(dark error, bright error)`` for a finite window.

    The bright ion scatters until an exponential leak time, after which it
    is dark; counts are Poisson in the collected light plus dark counts.
    Dark-state leaks into the bright cycle are neglected.
    """
    T = cfg.window
    k = cfg.threshold
    d = cfg.dark_mean
    g = efficiency * cycle.photon_rate
    lam = cycle.leak_rate
    err_dark = float(stats.poisson.sf(k, d))

    def integrand(t):
        return lam * math.exp(-lam * t) * stats.poisson.cdf(k, g * t + d)

    early, _ = integrate.quad(integrand, 0.0, T, limit=200, points=[min(T, 10.0 / max(g, 1e-300))])
    late = math.exp(-lam * T) * stats.poisson.cdf(k, g * T + d)
    return err_dark, float(early + late)


def window_fidelity(efficiency, cycle, cfg):
    ed, eb = window_errors(efficiency, cycle, cfg)
    return 1.0 - 0.5 * (ed + eb)


def calibrate_efficiency(target, cycle, cfg):
    """Collection efficiency at which :func:`window_fidelity` equals ``target``."""
    lo, hi = 1e-6, 1.0
    f = lambda e: window_fidelity(e, cycle, cfg) - target
    if f(lo) * f(hi) > 0:
        raise ConstraintViolation("target", f"fidelity {target} not reachable for any efficiency")
    return optimize.brentq(f, lo, hi, xtol=1e-12)
