"""Laser beams, EOM sidebands, microwave pulses and experiment timelines.

All frequencies are in Hz, powers in W, durations in s. A beam's
``carrier_detuning`` is measured from the reference transition of its
wavelength class (see :func:`ybqubit.atom.transition_offset`).
"""

import itertools
import math
from dataclasses import dataclass, field, replace

from .errors import ConstraintViolation

WAVELENGTH_CLASSES = (369, 935, 638)


@dataclass(frozen=True)
class Modulator:
    """Phase modulator with power fractions per sideband order.

    Orders absent from ``order_fractions`` carry no power; whatever the
    fractions do not account for is lost. List order 0 explicitly to keep
    the carrier.
    """

    drive_frequency: float
    order_fractions: tuple = ((0, 1.0),)

    def __post_init__(self):
        fr = self.order_fractions
        if isinstance(fr, dict):
            fr = tuple(sorted((int(k), float(v)) for k, v in fr.items()))
            object.__setattr__(self, "order_fractions", fr)
        for order, frac in fr:
            if not 0.0 <= frac <= 1.0:
                raise ConstraintViolation("order_fractions", f"order {order} fraction {frac} outside [0, 1]")
        if sum(f for _, f in fr) > 1.0 + 1e-12:
            raise ConstraintViolation("order_fractions", "fractions sum to more than 1")
        if self.drive_frequency < 0:
            raise ConstraintViolation("drive_frequency", "must be >= 0")

    @property
    def fractions(self):
        return dict(self.order_fractions)

    def to_dict(self):
        return {"drive_frequency_Hz": self.drive_frequency,
                "order_fractions": {int(k): v for k, v in self.order_fractions}}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["drive_frequency_Hz"]),
                   {int(k): float(v) for k, v in d["order_fractions"].items()})


@dataclass(frozen=True)
class LaserBeam:
    wavelength_class: int
    carrier_detuning: float
    power: float
    p_sat: float
    waist: float = 30e-6
    enabled: bool = True
    modulators: tuple = ()

    def __post_init__(self):
        if self.wavelength_class not in WAVELENGTH_CLASSES:
            raise ConstraintViolation("wavelength_class", f"{self.wavelength_class} not in {WAVELENGTH_CLASSES}")
        if not self.power >= 0:
            raise ConstraintViolation("power", "must be >= 0")
        if not self.waist > 0:
            raise ConstraintViolation("waist", "must be > 0")
        if not self.p_sat > 0:
            raise ConstraintViolation("p_sat", "must be > 0")
        object.__setattr__(self, "modulators", tuple(self.modulators))

    def with_power(self, power):
        return replace(self, power=power)

    def to_dict(self):
        return {"wavelength_nm": self.wavelength_class,
                "carrier_detuning_Hz": self.carrier_detuning,
                "power_W": self.power, "p_sat_W": self.p_sat, "waist_m": self.waist,
                "enabled": self.enabled,
                "modulators": [m.to_dict() for m in self.modulators]}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["wavelength_nm"]), float(d.get("carrier_detuning_Hz", 0.0)),
                   float(d["power_W"]), float(d["p_sat_W"]), float(d.get("waist_m", 30e-6)),
                   bool(d.get("enabled", True)),
                   tuple(Modulator.from_dict(m) for m in d.get("modulators", ())))


@dataclass(frozen=True)
class SpectralComponent:
    wavelength_class: int
    frequency_offset: float
    power: float
    p_sat: float

    def __post_init__(self):
        if not self.power >= 0:
            raise ConstraintViolation("power", "must be >= 0")

    @property
    def saturation(self):
        return self.power / self.p_sat


@dataclass(frozen=True)
class MicrowavePulse:
    """Resonant-frame qubit drive. ``rabi_frequency`` is angular (rad/s)."""

    rabi_frequency: float
    duration: float
    phase: float = 0.0
    detuning: float = 0.0
    phase_scrambled: bool = False

    def __post_init__(self):
        if not self.duration >= 0:
            raise ConstraintViolation("duration", "must be >= 0")
        if not self.rabi_frequency >= 0:
            raise ConstraintViolation("rabi_frequency", "must be >= 0")

    @classmethod
    def from_pi_time(cls, pi_time, area=math.pi, **kw):
        """Pulse of rotation angle ``area`` on a drive with the given pi time."""
        omega = math.pi / pi_time
        return cls(omega, area / omega, **kw)


@dataclass(frozen=True)
class Interval:
    duration: float
    beams: tuple = ()
    pulse: MicrowavePulse = None
    label: str = ""
    dark_state_factor: float = 1.0
    leak_weight: float = 1.0
    pulses: tuple = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "beams", tuple(self.beams))
        object.__setattr__(self, "pulses", tuple(self.pulses))

    def all_pulses(self):
        out = list(self.pulses)
        if self.pulse is not None:
            out.insert(0, self.pulse)
        return out


@dataclass(frozen=True)
class Timeline:
    intervals: tuple

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))

    @property
    def duration(self):
        return sum(iv.duration for iv in self.intervals)

    def boundaries(self):
        """Start time of each interval followed by the total duration."""
        out = [0.0]
        for iv in self.intervals:
            out.append(out[-1] + iv.duration)
        return out

    def start_of(self, label):
        t = 0.0
        for iv in self.intervals:
            if iv.label == label:
                return t
            t += iv.duration
        raise KeyError(label)


def effective_spectrum(beam, mods=()):
    """Split a beam into spectral components, one per combination of orders.

    Modulators in ``beam.modulators`` are applied first, then ``mods``.
    Order frequencies add and power fractions multiply, so the result does
    not depend on modulator order.
    """
    if not beam.enabled:
        return []
    chain = list(beam.modulators) + list(mods)
    if not chain:
        return [SpectralComponent(beam.wavelength_class, beam.carrier_detuning, beam.power, beam.p_sat)]
    out = []
    for combo in itertools.product(*(m.order_fractions for m in chain)):
        offset = beam.carrier_detuning
        frac = 1.0
        for mod, (order, f) in zip(chain, combo):
            offset += order * mod.drive_frequency
            frac *= f
        out.append(SpectralComponent(beam.wavelength_class, offset, beam.power * frac, beam.p_sat))
    return out


def saturation_parameter(beam):
    """p / p_sat for the whole beam (components carry their own s)."""
    return beam.power / beam.p_sat


def interval_spectrum(interval):
    comps = []
    for beam in interval.beams:
        comps.extend(effective_spectrum(beam))
    return comps


def validate_timeline(timeline):
    """Return a list of invariant violations; an empty list means valid."""
    problems = []
    seen = set()
    for k, iv in enumerate(timeline.intervals):
        name = iv.label or f"#{k}"
        if not iv.duration > 0:
            problems.append(f"{name}: non-positive duration")
        if len(iv.all_pulses()) > 1:
            problems.append(f"{name}: multiple pulses")
        if iv.label in seen:
            problems.append(f"{name}: duplicate label")
        seen.add(iv.label)
        if not 0 < iv.dark_state_factor <= 1:
            problems.append(f"{name}: dark_state_factor outside (0, 1]")
        if iv.leak_weight < 0:
            problems.append(f"{name}: negative leak_weight")
    return problems
