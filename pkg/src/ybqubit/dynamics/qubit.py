"""Coherent two-level qubit evolution under microwave pulses.

Amplitudes may be scalars or equal-length arrays (one entry per shot); every
function here broadcasts.
"""

from dataclasses import dataclass

import numpy as np

from .. import rng as rngmod


@dataclass(frozen=True)
class QubitState:
    c0: complex
    c1: complex

    @classmethod
    def zero(cls, n=None):
        if n is None:
            return cls(1.0 + 0j, 0j)
        return cls(np.ones(n, dtype=complex), np.zeros(n, dtype=complex))

    @classmethod
    def one(cls, n=None):
        z = cls.zero(n)
        return cls(z.c1, z.c0)

    @property
    def p1(self):
        return np.abs(self.c1) ** 2

    @property
    def norm(self):
        return np.sqrt(np.abs(self.c0) ** 2 + np.abs(self.c1) ** 2)


def apply_pulse(q, pulse, shot_detuning=0.0):
    """Exact rotation for a square pulse in the drive's rotating frame.

    The Hamiltonian is ``(Omega/2)(cos(phi) X + sin(phi) Y) - (Delta/2) Z``
    with ``Z = |1><1| - |0><0|`` and ``Delta = 2 pi (pulse.detuning +
    shot_detuning)``. A zero-amplitude pulse is free precession.
    """
    omega = pulse.rabi_frequency
    delta = 2.0 * np.pi * (pulse.detuning + np.asarray(shot_detuning, dtype=float))
    og = np.sqrt(omega * omega + delta * delta)
    half = 0.5 * og * pulse.duration
    c = np.cos(half)
    s = np.sin(half)
    safe = np.where(og > 0, og, 1.0)
    nxy = np.where(og > 0, omega / safe, 0.0)
    nz = np.where(og > 0, -delta / safe, 0.0)
    e = np.exp(1j * pulse.phase)
    c0 = (c + 1j * s * nz) * q.c0 - 1j * s * nxy * np.conj(e) * q.c1
    c1 = -1j * s * nxy * e * q.c0 + (c - 1j * s * nz) * q.c1
    if np.ndim(c0) == 0:
        return QubitState(complex(c0), complex(c1))
    return QubitState(c0, c1)


def born_sample(q, u):
    """Projective measurement: 1 where ``u < |c1|^2``, else 0."""
    return (np.asarray(u) < q.p1).astype(np.int64)


def site_offset(env, site):
    return 0.0 if site == 0 else env.differential_offset


def sample_shot_detuning(env, seed, shot_index, site=0, segment=0):
    """Quasi-static detuning (Hz) for one shot, site and free-evolution segment.

    Gaussian with mean equal to the site's deterministic offset and standard
    deviation ``env.freq_noise_rms``. Four values (two sites by two segments)
    are drawn from the shot's stream, so each is fixed by
    ``(seed, shot_index, site, segment)``.
    """
    if site not in (0, 1) or segment not in (0, 1):
        raise ValueError("site and segment must be 0 or 1")
    z = rngmod.stream(seed, shot_index, rngmod.SHOT_NOISE).standard_normal(4)
    return site_offset(env, site) + env.freq_noise_rms * z[2 * site + segment]


def draw_shot_detunings(env, rng, n_shots, site=0):
    """``n_shots`` quasi-static detunings from an existing generator."""
    return site_offset(env, site) + env.freq_noise_rms * rng.standard_normal(n_shots)
