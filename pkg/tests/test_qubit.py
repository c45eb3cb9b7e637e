import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from ybqubit.atom import MagneticEnvironment
from ybqubit.dynamics import (QubitState, apply_pulse, born_sample, draw_shot_detunings,
                              sample_shot_detuning)
from ybqubit.fields import MicrowavePulse

OMEGA = math.pi / 6.0e-6
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([-1.0, 1.0]).astype(complex)  # basis (|0>, |1>), Z = |1><1| - |0><0|


def reference(q, pulse, shot_detuning=0.0):
    delta = 2 * math.pi * (pulse.detuning + shot_detuning)
    H = 0.5 * pulse.rabi_frequency * (math.cos(pulse.phase) * X + math.sin(pulse.phase) * Y) - 0.5 * delta * Z
    return expm(-1j * H * pulse.duration) @ np.array([q.c0, q.c1])


def test_pi_pulse_flips_the_qubit():
    q = apply_pulse(QubitState.zero(), MicrowavePulse(OMEGA, 6.0e-6))
    assert q.p1 == pytest.approx(1.0, abs=1e-15)


def test_zero_duration_is_identity():
    q0 = QubitState(0.6 + 0j, 0.8j)
    q = apply_pulse(q0, MicrowavePulse(OMEGA, 0.0, phase=1.0), 123.0)
    assert (q.c0, q.c1) == pytest.approx((q0.c0, q0.c1), abs=1e-15)


@given(phi=st.floats(-2 * math.pi, 2 * math.pi))
def test_two_half_pulses_with_relative_phase(phi):
    half = MicrowavePulse(OMEGA, 3.0e-6)
    q = apply_pulse(apply_pulse(QubitState.zero(), half), MicrowavePulse(OMEGA, 3.0e-6, phase=phi))
    assert q.p1 == pytest.approx(math.cos(phi / 2) ** 2, abs=1e-12)


@given(t=st.floats(0, 1e-4), phase=st.floats(-4, 4), det=st.floats(-1e6, 1e6),
       a=st.floats(0, 2 * math.pi))
def test_matches_matrix_exponential(t, phase, det, a):
    q = QubitState(complex(math.cos(a)), complex(0, math.sin(a)))
    pulse = MicrowavePulse(OMEGA, t, phase=phase, detuning=det)
    got = apply_pulse(q, pulse, 17.0)
    assert np.array([got.c0, got.c1]) == pytest.approx(reference(q, pulse, 17.0), abs=1e-9)


def test_free_precession_without_drive():
    q = QubitState(1 / math.sqrt(2) + 0j, 1 / math.sqrt(2) + 0j)
    pulse = MicrowavePulse(0.0, 1e-3, detuning=250.0)
    got = apply_pulse(q, pulse)
    assert np.array([got.c0, got.c1]) == pytest.approx(reference(q, pulse), abs=1e-12)


def test_norm_preserved_over_many_pulses():
    rng = np.random.default_rng(0)
    q = QubitState.zero()
    for _ in range(10_000):
        q = apply_pulse(q, MicrowavePulse(OMEGA, rng.uniform(0, 1e-5), phase=rng.uniform(0, 6.3)),
                        rng.normal(0, 1e3))
    assert abs(q.norm - 1) < 1e-12


def test_array_shots_broadcast():
    q = apply_pulse(QubitState.zero(4), MicrowavePulse(OMEGA, 3e-6, phase=np.arange(4.0)))
    assert q.p1 == pytest.approx(np.full(4, 0.5))
    assert born_sample(q, np.array([0.1, 0.6, 0.49, 0.51])).tolist() == [1, 0, 1, 0]


def test_detuning_without_noise_is_the_site_offset():
    env = MagneticEnvironment()
    assert sample_shot_detuning(env, 1, 5, site=0) == 0.0
    assert sample_shot_detuning(env, 1, 5, site=1) == 2430.0


def test_detuning_statistics():
    env = MagneticEnvironment(freq_noise_rms=3.0)
    n = 100_000
    a = np.array([sample_shot_detuning(env, 2, i, site=0) for i in range(n)])
    b = np.array([sample_shot_detuning(env, 2, i, site=1) for i in range(n)])
    assert a.std() == pytest.approx(3.0, rel=0.02)
    assert (b - a).mean() == pytest.approx(2430.0, abs=5 * 3.0 * math.sqrt(2 / n))
    assert sample_shot_detuning(env, 2, 9, 1, 1) == sample_shot_detuning(env, 2, 9, 1, 1)


def test_draw_from_generator():
    env = MagneticEnvironment(freq_noise_rms=0.5)
    d = draw_shot_detunings(env, np.random.default_rng(1), 100_000, site=1)
    assert d.mean() == pytest.approx(2430.0, abs=0.01)
    assert d.std() == pytest.approx(0.5, rel=0.02)
