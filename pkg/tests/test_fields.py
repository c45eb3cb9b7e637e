import pytest
from hypothesis import given
from hypothesis import strategies as st

from ybqubit.atom import P12, S12, transition_offset
from ybqubit.errors import ConstraintViolation
from ybqubit.fields import (Interval, LaserBeam, MicrowavePulse, Modulator, Timeline,
                            effective_spectrum, saturation_parameter, validate_timeline)


def beam(power=6e-6, det=-10e6, mods=()):
    return LaserBeam(369, det, power, 0.8e-6, modulators=mods)


def test_unmodulated_beam_is_one_component():
    (c,) = effective_spectrum(beam())
    assert (c.frequency_offset, c.power) == (-10e6, 6e-6)


def test_second_order_sideband_reaches_the_other_hyperfine_line(yb171):
    comps = effective_spectrum(beam(mods=(Modulator(7.37e9, {2: 0.1}),)))
    (c,) = comps
    assert c.frequency_offset == pytest.approx(-10e6 + 14.74e9)
    line = transition_offset(yb171, (S12, 0), (P12, 1))
    # Within a few natural linewidths (19.7 MHz) of S F=0 <-> P F=1.
    assert abs(c.frequency_offset - line) < 20e6


def test_one_third_sidebands_of_6_mw():
    comps = effective_spectrum(LaserBeam(935, 0.0, 6e-3, 0.25e-3, waist=200e-6,
                                         modulators=(Modulator(3.07e9, {1: 1 / 3, -1: 1 / 3}),)))
    assert sorted(c.frequency_offset for c in comps) == [-3.07e9, 3.07e9]
    assert all(c.power == pytest.approx(2e-3) for c in comps)


fractions = st.dictionaries(st.integers(-3, 3), st.floats(0, 1), min_size=1, max_size=4).filter(
    lambda d: sum(d.values()) <= 1)


@given(fa=fractions, fb=fractions, power=st.floats(0, 1e-2))
def test_power_conserved_and_composition_commutes(fa, fb, power):
    a, b = Modulator(7.37e9, fa), Modulator(2.1e9, fb)
    base = beam(power=power)
    ab = effective_spectrum(base, (a, b))
    ba = effective_spectrum(base, (b, a))
    assert sum(c.power for c in ab) <= power * (1 + 1e-12)
    key = lambda c: (round(c.frequency_offset), c.power)
    assert sorted(map(key, ab)) == pytest.approx(sorted(map(key, ba)))


def test_disabled_beam_emits_nothing():
    assert effective_spectrum(LaserBeam(369, 0, 1e-6, 1e-6, enabled=False)) == []


@given(p=st.floats(0, 1.0))
def test_saturation_linear_in_power(p):
    assert saturation_parameter(beam(power=2 * p)) == 2 * saturation_parameter(beam(power=p))


def test_saturation_examples():
    assert saturation_parameter(LaserBeam(369, 0, 0.8e-6, 0.8e-6)) == 1.0
    assert saturation_parameter(LaserBeam(369, 0, 0.0, 0.8e-6)) == 0.0


def test_invariants():
    with pytest.raises(ConstraintViolation):
        LaserBeam(369, 0, -1.0, 1.0)
    with pytest.raises(ConstraintViolation):
        LaserBeam(369, 0, 1.0, 0.0)
    with pytest.raises(ConstraintViolation):
        LaserBeam(369, 0, 1.0, 1.0, waist=0.0)
    with pytest.raises(ConstraintViolation):
        LaserBeam(532, 0, 1.0, 1.0)
    with pytest.raises(ConstraintViolation):
        Modulator(1e9, {1: 0.6, -1: 0.6})
    with pytest.raises(ConstraintViolation):
        MicrowavePulse(1.0, -1.0)


def test_beam_dict_round_trip():
    b = beam(mods=(Modulator(7.37e9, {0: 0.8, 2: 0.1}),))
    assert LaserBeam.from_dict(b.to_dict()) == b


def test_detection_timeline_is_valid():
    tl = Timeline([Interval(500e-9, (beam(),), label="prep"), Interval(1000e-6, (beam(),), label="detect")])
    assert validate_timeline(tl) == []
    assert tl.duration == pytest.approx(1000.5e-6)
    assert tl.start_of("detect") == 500e-9


def test_timeline_violations():
    p = MicrowavePulse(1.0, 1.0)
    tl = Timeline([Interval(0.0, label="a"), Interval(1.0, pulse=p, pulses=(p,), label="b"),
                   Interval(1.0, label="b")])
    problems = validate_timeline(tl)
    assert any("non-positive duration" in x for x in problems)
    assert any("multiple pulses" in x for x in problems)
    assert any("duplicate label" in x for x in problems)


def test_pulse_from_pi_time():
    p = MicrowavePulse.from_pi_time(6.0e-6)
    assert p.rabi_frequency * p.duration == pytest.approx(3.141592653589793)
    assert p.duration == pytest.approx(6.0e-6)
