"""Yb+ level structure at the level of hyperfine manifolds.

Manifolds are F-resolved but not m_F-resolved. Energies are offsets within
each electronic level; optical transition frequencies are reported relative
to one reference transition per wavelength class (369 nm and 935 nm).
"""

from dataclasses import asdict, dataclass, field
from enum import Enum

import yaml

from .errors import ConstraintViolation, ForbiddenTransitionError

S12, P12, D32, D3HALF, F72 = "S12", "P12", "D32", "D3half", "F72"

# Photon labels of spontaneous decays. Only "369" reaches the detector.
EMISSION_369 = "369"
EMISSION_P_TO_D = "2438"
EMISSION_D3HALF = "297"
EMISSION_D32 = "435"
EMISSION_F72_RETURN = "638"

# J = 1/2 -> J = 1/2 decay with I = 1/2: F=1 goes 1/3 to F'=0 and 2/3 to F'=1.
_HALF_TO_HALF = {1: {0: 1.0 / 3.0, 1: 2.0 / 3.0}, 0: {1: 1.0}}


class AtomSpecies(str, Enum):
    YB171 = "Yb171"
    YB174 = "Yb174"


_CONSTANT_KEYS = {
    "gamma_P12": "gamma_P12_per_s",
    "R_branch": "R_branch",
    "tau_D32": "tau_D32_s",
    "S12_splitting": "S12_splitting_Hz",
    "P12_splitting": "P12_splitting_Hz",
    "D32_splitting": "D32_splitting_Hz",
    "D3half_splitting": "D3half_splitting_Hz",
    "zeeman_coeff": "zeeman_coeff_Hz_per_G2",
    "F72_trap_rate": "F72_trap_rate_per_s",
    "gamma_D3half": "gamma_D3half_per_s",
    "F72_repump_time": "F72_repump_time_s",
    "gamma_P12_rel_err": "gamma_P12_rel_err",
}


@dataclass(frozen=True)
class PhysicalConstants:
    """Rates (s^-1), lifetimes (s) and splittings (Hz).

    ``gamma_D3half`` (decay rate of 3D[3/2]1/2), ``F72_repump_time`` and
    ``gamma_P12_rel_err`` are not part of the minimal constant set but are
    needed by the 935 nm pumping model, the optional F-state trap and the
    branching-ratio error budget.
    """

    gamma_P12: float = 1.0 / 8.07e-9
    R_branch: float = 0.00501
    tau_D32: float = 52.7e-3
    S12_splitting: float = 12_642_812_118.5
    P12_splitting: float = 2.1e9
    D32_splitting: float = 0.86e9
    D3half_splitting: float = 2.2095e9
    zeeman_coeff: float = 310.8
    F72_trap_rate: float = 0.0
    gamma_D3half: float = 1.0 / 37.7e-9
    F72_repump_time: float = 0.1
    gamma_P12_rel_err: float = 0.09 / 8.07

    def __post_init__(self):
        for name in ("gamma_P12", "tau_D32", "S12_splitting", "P12_splitting",
                     "D32_splitting", "D3half_splitting", "zeeman_coeff",
                     "gamma_D3half", "F72_repump_time"):
            if not getattr(self, name) > 0:
                raise ConstraintViolation(name, "must be strictly positive")
        if not 0.0 <= self.R_branch < 1.0:
            raise ConstraintViolation("R_branch", "must lie in [0, 1)")
        if not self.F72_trap_rate >= 0:
            raise ConstraintViolation("F72_trap_rate", "must be >= 0")
        if not self.gamma_P12_rel_err >= 0:
            raise ConstraintViolation("gamma_P12_rel_err", "must be >= 0")

    def to_dict(self):
        return {_CONSTANT_KEYS[k]: v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data):
        inverse = {v: k for k, v in _CONSTANT_KEYS.items()}
        kwargs = {}
        for key, value in data.items():
            if key not in inverse:
                raise ConstraintViolation(key, "unknown constant")
            kwargs[inverse[key]] = float(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class MagneticEnvironment:
    """Static field (gauss) and qubit frequency noise / site offset (Hz)."""

    B_static: float = 5.0
    freq_noise_rms: float = 0.0
    differential_offset: float = 2430.0

    def __post_init__(self):
        if not self.B_static >= 0:
            raise ConstraintViolation("B_static", "must be >= 0")
        if not self.freq_noise_rms >= 0:
            raise ConstraintViolation("freq_noise_rms", "must be >= 0")

    def to_dict(self):
        return {"B_static_G": self.B_static,
                "freq_noise_rms_Hz": self.freq_noise_rms,
                "differential_offset_Hz": self.differential_offset}

    @classmethod
    def from_dict(cls, data):
        names = {"B_static_G": "B_static", "freq_noise_rms_Hz": "freq_noise_rms",
                 "differential_offset_Hz": "differential_offset"}
        unknown = set(data) - set(names)
        if unknown:
            raise ConstraintViolation(sorted(unknown)[0], "unknown environment key")
        return cls(**{names[k]: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class HyperfineManifold:
    term: str
    F: float
    energy_offset: float
    degeneracy: int

    def __post_init__(self):
        if self.degeneracy < 1:
            raise ConstraintViolation("degeneracy", "must be >= 1")

    @property
    def label(self):
        if float(self.F).is_integer():
            return f"{self.term}(F={int(self.F)})"
        return self.term


@dataclass(frozen=True)
class DecayChannel:
    upper: int
    lower: int
    branching_fraction: float
    emission_class: str


@dataclass(frozen=True)
class LevelScheme:
    species: AtomSpecies
    manifolds: tuple
    channels: tuple
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        n = len(self.manifolds)
        for ch in self.channels:
            if not (0 <= ch.upper < n and 0 <= ch.lower < n):
                raise ConstraintViolation("channels", f"{ch} references a missing manifold")

    def __len__(self):
        return len(self.manifolds)

    @property
    def labels(self):
        return [m.label for m in self.manifolds]

    def index(self, term, F=None):
        """Index of the manifold with ``term`` and (for Yb171) ``F``."""
        for i, m in enumerate(self.manifolds):
            if m.term == term and (F is None or m.F == F):
                if F is None and sum(mm.term == term for mm in self.manifolds) > 1:
                    raise KeyError(f"{term} is hyperfine-split; give F")
                return i
        raise KeyError(f"no manifold {term} F={F}")

    def resolve(self, ref):
        """Accept an index, a label like ``"S12(F=1)"`` or a ``(term, F)`` pair."""
        if isinstance(ref, (int,)) and not isinstance(ref, bool):
            if not 0 <= ref < len(self.manifolds):
                raise KeyError(f"manifold index {ref} out of range")
            return ref
        if isinstance(ref, tuple):
            return self.index(*ref)
        if isinstance(ref, HyperfineManifold):
            return self.manifolds.index(ref)
        return self.labels.index(ref)

    def decay_rate(self, i):
        """Total spontaneous decay rate out of manifold ``i`` (s^-1)."""
        term = self.manifolds[i].term
        c = self.constants
        return {P12: c.gamma_P12, D3HALF: c.gamma_D3half,
                D32: 1.0 / c.tau_D32, F72: 1.0 / c.F72_repump_time}.get(term, 0.0)

    def linewidth(self, upper):
        return self.decay_rate(upper)

    def channels_from(self, i):
        return [ch for ch in self.channels if ch.upper == i]

    def channel_index(self, upper, lower):
        for k, ch in enumerate(self.channels):
            if ch.upper == upper and ch.lower == lower:
                return k
        raise KeyError((upper, lower))

    @property
    def ground(self):
        """Index of |0> for Yb171, of S1/2 for Yb174."""
        return 0

    def qubit_index(self, bit):
        if self.species is AtomSpecies.YB171:
            return self.index(S12, bit)
        return self.index(S12)

    def to_dict(self):
        return {
            "species": self.species.value,
            "constants": self.constants.to_dict(),
            "manifolds": [
                {"term": m.term, "F": m.F, "energy_offset_Hz": m.energy_offset,
                 "degeneracy": m.degeneracy} for m in self.manifolds],
            "channels": [
                {"upper": self.manifolds[c.upper].label, "lower": self.manifolds[c.lower].label,
                 "branching_fraction": c.branching_fraction,
                 "emission_class": c.emission_class} for c in self.channels],
        }

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        manifolds = tuple(
            HyperfineManifold(m["term"], float(m["F"]), float(m["energy_offset_Hz"]),
                              int(m["degeneracy"])) for m in data["manifolds"])
        labels = [m.label for m in manifolds]
        channels = tuple(
            DecayChannel(labels.index(c["upper"]), labels.index(c["lower"]),
                         float(c["branching_fraction"]), str(c["emission_class"]))
            for c in data["channels"])
        return cls(AtomSpecies(data["species"]), manifolds, channels,
                   PhysicalConstants.from_dict(data["constants"]))


def _manifold(term, F, offset):
    return HyperfineManifold(term, float(F), float(offset), int(round(2 * F + 1)))


def build_level_scheme(species=AtomSpecies.YB171, constants=None):
    """Construct the manifold list and decay channels for ``species``.

    The 2F7/2 manifold is added only when ``constants.F72_trap_rate > 0``.
    """
    species = AtomSpecies(species)
    c = PhysicalConstants() if constants is None else constants
    R = c.R_branch
    if species is AtomSpecies.YB174:
        manifolds = [_manifold(S12, 0.5, 0), _manifold(P12, 0.5, 0),
                     _manifold(D32, 1.5, 0), _manifold(D3HALF, 0.5, 0)]
        s, p, d, d3 = range(4)
        channels = [DecayChannel(p, s, 1.0 - R, EMISSION_369),
                    DecayChannel(p, d, R, EMISSION_P_TO_D),
                    DecayChannel(d3, s, 1.0, EMISSION_D3HALF),
                    DecayChannel(d, s, 1.0, EMISSION_D32)]
        ground = [s]
        ground_weights = [1.0]
    else:
        # D3/2 F=2 sits below F=1; see transition_offset for the resulting
        # 3.07 GHz repump frequency.
        manifolds = [_manifold(S12, 0, 0), _manifold(S12, 1, c.S12_splitting),
                     _manifold(P12, 0, 0), _manifold(P12, 1, c.P12_splitting),
                     _manifold(D32, 1, 0), _manifold(D32, 2, -c.D32_splitting),
                     _manifold(D3HALF, 0, 0), _manifold(D3HALF, 1, c.D3half_splitting)]
        s0, s1, p0, p1, d1, d2, e0, e1 = range(8)
        s_of = {0: s0, 1: s1}
        channels = []
        for p, F in ((p0, 0), (p1, 1)):
            for Fs, frac in _HALF_TO_HALF[F].items():
                channels.append(DecayChannel(p, s_of[Fs], (1.0 - R) * frac, EMISSION_369))
        channels.append(DecayChannel(p0, d1, R, EMISSION_P_TO_D))
        channels.append(DecayChannel(p1, d1, R * 3.0 / 8.0, EMISSION_P_TO_D))
        channels.append(DecayChannel(p1, d2, R * 5.0 / 8.0, EMISSION_P_TO_D))
        for e, F in ((e0, 0), (e1, 1)):
            for Fs, frac in _HALF_TO_HALF[F].items():
                channels.append(DecayChannel(e, s_of[Fs], frac, EMISSION_D3HALF))
        for d in (d1, d2):
            channels.append(DecayChannel(d, s0, 0.25, EMISSION_D32))
            channels.append(DecayChannel(d, s1, 0.75, EMISSION_D32))
        ground = [s0, s1]
        ground_weights = [0.25, 0.75]
    if c.F72_trap_rate > 0:
        manifolds.append(_manifold(F72, 3.5, 0))
        f = len(manifolds) - 1
        for g, w in zip(ground, ground_weights):
            channels.append(DecayChannel(f, g, w, EMISSION_F72_RETURN))
    return LevelScheme(species, tuple(manifolds), tuple(channels), c)


def qubit_splitting(constants, env):
    """Clock-transition frequency in Hz including the quadratic Zeeman shift."""
    return constants.S12_splitting + constants.zeeman_coeff * env.B_static ** 2


_OPTICAL = {(S12, P12): 369, (D32, D3HALF): 935}


def _reference(scheme, wavelength_class):
    if scheme.species is AtomSpecies.YB174:
        pairs = {369: ((S12, None), (P12, None)), 935: ((D32, None), (D3HALF, None))}
    else:
        pairs = {369: ((S12, 1), (P12, 0)), 935: ((D32, 1), (D3HALF, 0))}
    lo, up = pairs[wavelength_class]
    return scheme.index(*lo), scheme.index(*up)


def wavelength_class(scheme, lower, upper):
    """369 or 935 for an allowed dipole transition, else raise."""
    lo, up = scheme.manifolds[lower], scheme.manifolds[upper]
    wl = _OPTICAL.get((lo.term, up.term))
    if wl is None:
        raise ForbiddenTransitionError(f"{lo.label} -> {up.label} is not a driven dipole line")
    if scheme.species is AtomSpecies.YB171:
        dF = up.F - lo.F
        if abs(dF) > 1 or (lo.F == 0 and up.F == 0):
            raise ForbiddenTransitionError(f"{lo.label} -> {up.label} violates the F selection rule")
    return wl


def allowed_transitions(scheme):
    """All (lower, upper, wavelength class) triples the lasers can drive."""
    out = []
    for i in range(len(scheme)):
        for j in range(len(scheme)):
            try:
                out.append((i, j, wavelength_class(scheme, i, j)))
            except ForbiddenTransitionError:
                pass
    return out


def transition_offset(scheme, lower, upper):
    """Frequency of ``lower -> upper`` relative to its class's reference line (Hz)."""
    lower, upper = scheme.resolve(lower), scheme.resolve(upper)
    wl = wavelength_class(scheme, lower, upper)
    ref_lo, ref_up = _reference(scheme, wl)
    m = scheme.manifolds
    return ((m[upper].energy_offset - m[lower].energy_offset)
            - (m[ref_up].energy_offset - m[ref_lo].energy_offset))
