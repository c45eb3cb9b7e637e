"""Rate-equation model of optical pumping between hyperfine manifolds.

A driven transition with upper-state decay rate ``gamma`` is represented by
equal absorption and stimulated-emission rates ``W``. ``W`` is chosen so that
the isolated two-level steady state scatters exactly
``scattering_rate(excited_population(s, delta, gamma), gamma, kappa)``
photons per second; for ``kappa = 1`` this gives the textbook
``W = gamma * s / (2 * (1 + (4 pi delta / gamma)^2))``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from ..atom import AtomSpecies, F72, P12, S12, allowed_transitions, transition_offset
from ..errors import ConstraintViolation
from ..fields import interval_spectrum

# Couplings detuned by more than this many natural linewidths count as
# off-resonant leaks and are scaled by the interval's leak weight.
LEAK_LINEWIDTHS = 100.0

CONSERVATION_TOL = 1e-9


@dataclass(frozen=True)
class DarkStateFactor:
    """Scattering multiplier for the Yb171 detection line (coherent dark states)."""

    kappa: float = 1.0 / 3.0

    def __post_init__(self):
        if not 0 < self.kappa <= 1:
            raise ConstraintViolation("kappa", "must lie in (0, 1]")


def excited_population(s, delta, gamma):
    """Steady-state upper-state population of a driven two-level system.

    Parameters
    ----------
    s : float or array
        Saturation parameter p / p_sat.
    delta : float or array
        Detuning in Hz.
    gamma : float
        Upper-state decay rate in s^-1.
    """
    x = 4.0 * np.pi * np.asarray(delta, dtype=float) / gamma
    s = np.asarray(s, dtype=float)
    out = (s / 2.0) / (1.0 + s + x * x)
    return out if out.ndim else float(out)


def scattering_rate(P_e, gamma, kappa=1.0):
    return kappa * gamma * P_e


def pump_rate(s, delta, gamma, kappa=1.0):
    """Absorption (= stimulated emission) rate reproducing the target scattering."""
    q = scattering_rate(excited_population(s, delta, gamma), gamma, kappa) / gamma
    return gamma * q / (1.0 - 2.0 * q)


@dataclass(frozen=True)
class RateMatrix:
    """Generator ``M`` with ``dp/dt = M @ p``; ``M[to, from]`` in s^-1.

    ``spontaneous`` holds the part of each off-diagonal rate due to
    spontaneous decay, which is what emits photons.
    """

    matrix: np.ndarray
    spontaneous: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        M = self.matrix
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ConstraintViolation("matrix", "must be square")
        off = M - np.diag(np.diag(M))
        if np.any(off < 0):
            raise ConstraintViolation("matrix", "negative off-diagonal rate")
        scale = max(1.0, float(np.abs(M).max()))
        if np.any(np.abs(M.sum(axis=0)) > CONSERVATION_TOL * scale):
            raise ConstraintViolation("matrix", "columns do not sum to zero")

    @property
    def size(self):
        return self.matrix.shape[0]


def _coupling(scheme, comps, kappa, leak_weight):
    n = len(scheme)
    W = np.zeros((n, n))
    if not comps:
        return W
    kappa_line = None
    if scheme.species is AtomSpecies.YB171:
        kappa_line = (scheme.index(S12, 1), scheme.index(P12, 0))
    for lo, up, wl in allowed_transitions(scheme):
        gamma = scheme.linewidth(up)
        line = transition_offset(scheme, lo, up)
        k = kappa if (lo, up) == kappa_line else 1.0
        for c in comps:
            if c.wavelength_class != wl or c.power <= 0:
                continue
            delta = c.frequency_offset - line
            w = pump_rate(c.saturation, delta, gamma, k)
            if abs(delta) > LEAK_LINEWIDTHS * gamma / (2 * np.pi):
                w *= leak_weight
            W[lo, up] += w
    return W


def build_rate_matrix(scheme, components, kappa=1.0, leak_weight=1.0):
    """Assemble the rate matrix for a set of spectral components.

    ``kappa`` multiplies the scattering of the Yb171 detection line
    S1/2 F=1 <-> P1/2 F=0 only. Components that address no allowed
    transition contribute nothing.
    """
    if not 0 < kappa <= 1:
        raise ConstraintViolation("kappa", "must lie in (0, 1]")
    n = len(scheme)
    W = _coupling(scheme, list(components), kappa, leak_weight)
    M = np.zeros((n, n))
    spont = np.zeros((n, n))
    # W[lo, up]: absorption lo -> up and stimulated emission up -> lo.
    M += W.T
    M += W
    for ch in scheme.channels:
        r = ch.branching_fraction * scheme.decay_rate(ch.upper)
        M[ch.lower, ch.upper] += r
        spont[ch.lower, ch.upper] += r
    trap = scheme.constants.F72_trap_rate
    if trap > 0:
        f = scheme.index(F72)
        for i in range(n):
            if i != f:
                M[f, i] += trap
    np.fill_diagonal(M, 0.0)
    np.fill_diagonal(M, -M.sum(axis=0))
    return RateMatrix(M, spont, tuple(scheme.labels))


def interval_rate_matrix(scheme, interval):
    return build_rate_matrix(scheme, interval_spectrum(interval),
                             interval.dark_state_factor, interval.leak_weight)


def _as_generator(matrix):
    M = matrix.matrix if isinstance(matrix, RateMatrix) else np.asarray(matrix, dtype=float)
    scale = max(1.0, float(np.abs(M).max()))
    if np.any(np.abs(M.sum(axis=0)) > CONSERVATION_TOL * scale):
        raise ConstraintViolation("matrix", "non-conservative rate matrix")
    return M


def _check_populations(p):
    p = np.asarray(p, dtype=float)
    if np.any(p < -1e-12) or np.any(p > 1 + 1e-12) or abs(p.sum() - 1) > CONSERVATION_TOL:
        raise ConstraintViolation("p0", "not a probability vector")
    return p


def evolve_populations(matrix, p0, duration):
    """Solve dp/dt = M p over ``duration`` seconds by matrix exponential."""
    M = _as_generator(matrix)
    p = _check_populations(p0)
    if duration < 0:
        raise ConstraintViolation("duration", "must be >= 0")
    return expm(M * duration) @ p


def steady_state(matrix):
    """Stationary distribution of the rate matrix (least squares if reducible)."""
    M = _as_generator(matrix)
    n = M.shape[0]
    # Rates span many decades; scaling keeps the normalization row comparable.
    A = np.vstack([M / max(1.0, float(np.abs(M).max())), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    p, *_ = np.linalg.lstsq(A, b, rcond=None)
    return np.clip(p, 0.0, None) / np.clip(p, 0.0, None).sum()


def propagators(matrix, dt):
    """``(expm(M dt), integral_0^dt expm(M t) dt)`` for one step."""
    M = _as_generator(matrix)
    n = M.shape[0]
    big = np.zeros((2 * n, 2 * n))
    big[:n, :n] = M
    big[:n, n:] = np.eye(n)
    E = expm(big * dt)
    return E[:n, :n], E[:n, n:]


def photon_rate_vector(scheme, emission_class="369"):
    """Per-manifold emission rate of photons of one class (s^-1 per unit population)."""
    r = np.zeros(len(scheme))
    for ch in scheme.channels:
        if ch.emission_class == emission_class:
            r[ch.upper] += ch.branching_fraction * scheme.decay_rate(ch.upper)
    return r


def evolve_timeline(scheme, timeline, p0, sample_times=()):
    """Piecewise-constant evolution across a timeline.

    Returns ``(final populations, populations at each sample time)``.
    Sample times are absolute (measured from the start of the timeline).
    """
    p = _check_populations(p0)
    sample_times = np.asarray(sample_times, dtype=float)
    order = np.argsort(sample_times)
    samples = np.zeros((len(sample_times), len(p)))
    t0 = 0.0
    j = 0
    for iv in timeline.intervals:
        M = interval_rate_matrix(scheme, iv)
        t1 = t0 + iv.duration
        while j < len(order) and sample_times[order[j]] < t1:
            samples[order[j]] = expm(M.matrix * (sample_times[order[j]] - t0)) @ p
            j += 1
        p = expm(M.matrix * iv.duration) @ p
        t0 = t1
    while j < len(order):
        samples[order[j]] = p
        j += 1
    return p, samples


def binned_emission(matrix, p0, bin_width, nbins, rate_vector):
    """Expected photons per bin for a constant matrix, starting from ``p0``.

    Exact: uses the integrated propagator, not a quadrature rule.
    """
    step, integral = propagators(matrix, bin_width)
    p = _check_populations(p0)
    out = np.empty(nbins)
    for k in range(nbins):
        out[k] = rate_vector @ (integral @ p)
        p = step @ p
    return out, p
