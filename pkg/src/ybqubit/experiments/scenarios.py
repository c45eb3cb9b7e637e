"""End-to-end scenario runners.

Each runner takes an :class:`ExperimentConfig`, simulates the experiment
with seeded streams, analyses the synthetic data with the same fits used
on measured data, and returns a :class:`RunArtifact`.
"""

import math
import time
from dataclasses import replace

import numpy as np

from .. import rng as rngmod
from ..analysis import fit_branching_saturation, fit_exponential_decay, fit_gaussian_decay, fit_sinusoid
from ..analysis import exp_decay, find_peaks
from ..atom import D32, S12, AtomSpecies, build_level_scheme
from ..detection import (DetectionConfig, LeakModel, accumulate_histogram, bright_cycle,
                         calibrate_efficiency, classify, detect_many, estimate_fidelity,
                         leak_weight_for, window_fidelity)
from ..dynamics import (QubitState, apply_pulse, binned_emission, born_sample, build_rate_matrix,
                        compile_timeline, evolve_populations, interval_rate_matrix,
                        photon_rate_vector, simulate_batch, steady_state)
from ..dynamics.rates import propagators
from ..errors import ScanCoverageError
from ..fields import Interval, LaserBeam, MicrowavePulse, Modulator, Timeline, effective_spectrum
from .artifacts import RunArtifact, Table
from .config import grid, load_defaults


def _scheme(cfg):
    return build_level_scheme(AtomSpecies(cfg.params.get("species", "Yb171")), cfg.constants)


def _detection_config(p, efficiency=None):
    return DetectionConfig(float(p["window_s"]), int(p["threshold_counts"]),
                           float(efficiency if efficiency is not None else p["efficiency"]),
                           float(p["dark_rate_per_s"]))


# Detection chain -------------------------------------------------------------

class DetectionChain:
    """Optical detection of a prepared manifold: MC fluorescence, then the detector.

    Resolves the leak weight from the configured per-photon leak and, if
    asked, the collection efficiency that meets a target fidelity.
    """

    def __init__(self, cfg, scheme=None):
        p = cfg.params
        self.scheme = scheme or _scheme(cfg)
        self.beams = cfg.scenario_beams()
        self.kappa = float(p.get("kappa", 1.0))
        self.leak = LeakModel(float(p["q_leak"]), self.kappa < 1.0)
        comps = [c for b in self.beams for c in effective_spectrum(b)]

        def build(weight):
            return build_rate_matrix(self.scheme, comps, self.kappa, weight)

        self.physical_cycle = bright_cycle(self.scheme, build(1.0))
        if p.get("leak_enabled", True):
            self.leak_weight = leak_weight_for(self.scheme, build, self.leak.q_effective)
        else:
            self.leak_weight = 0.0
        self.cycle = bright_cycle(self.scheme, build(self.leak_weight))
        det = _detection_config(p)
        target = p.get("calibrate_efficiency_to")
        if target is not None:
            det = replace(det, efficiency=calibrate_efficiency(float(target), self.cycle, det))
        self.config = det
        self.timeline = Timeline([Interval(det.window, self.beams, label="detect",
                                           dark_state_factor=self.kappa,
                                           leak_weight=self.leak_weight)])
        self.compiled = compile_timeline(self.scheme, self.timeline)

    def counts(self, manifolds, seed, indices, workers=1):
        """Detector counts for shots starting in ``manifolds`` (one per index)."""
        b = simulate_batch(self.scheme, self.timeline, seed, indices, initial=manifolds,
                           per_trajectory_counts=True, workers=workers, compiled=self.compiled)
        return detect_many(b.counts, self.config, seed, indices)

    def bits(self, qubit_bits, seed, indices, workers=1):
        man = np.where(np.asarray(qubit_bits) == 1, self.scheme.qubit_index(1),
                       self.scheme.qubit_index(0))
        return classify(self.counts(man, seed, indices, workers), self.config)

    def summary(self):
        return {"efficiency": self.config.efficiency, "leak_weight": self.leak_weight,
                "q_leak": self.leak.q_leak, "q_per_photon_effective": self.leak.q_effective,
                "q_per_photon_physical": self.physical_cycle.q_per_photon,
                "bright_photon_rate_per_s": self.cycle.photon_rate,
                "bright_leak_rate_per_s": self.cycle.leak_rate,
                "window_model_fidelity": window_fidelity(self.config.efficiency, self.cycle,
                                                         self.config)}


def _prepare(n, pulse, seed, stream_index):
    """Ideal |0>, one pulse, Born-sampled outcome per shot."""
    q = apply_pulse(QubitState.zero(n), pulse)
    u = rngmod.stream(seed, stream_index, rngmod.PREPARATION).random(n)
    return born_sample(q, u)


def run_detection(cfg):
    """Dark- and bright-prepared histograms and the resulting fidelity."""
    t0 = time.perf_counter()
    p = cfg.params
    chain = DetectionChain(cfg)
    nd, nb = int(p["shots_dark"]), int(p["shots_bright"])
    pi = MicrowavePulse.from_pi_time(6.0e-6)
    bits = np.concatenate([np.zeros(nd, dtype=np.int64), _prepare(nb, pi, cfg.seed, 0)])
    idx = np.arange(nd + nb)
    man = np.where(bits == 1, chain.scheme.qubit_index(1), chain.scheme.qubit_index(0))
    counts = chain.counts(man, cfg.seed, idx, int(p.get("workers", 1)))
    hd = accumulate_histogram(counts[:nd])
    hb = accumulate_histogram(counts[nd:])
    report = estimate_fidelity(hd, hb, chain.config)
    art = RunArtifact("detect", cfg)
    art.tables["hist_dark"] = Table(("count", "occurrences"), hd.rows())
    art.tables["hist_bright"] = Table(("count", "occurrences"), hb.rows())
    art.reports["fidelity"] = report.to_dict() | chain.summary() | chain.config.to_dict()
    art.derived.update(report=report, hist_dark=hd, hist_bright=hb, chain=chain)
    art.wall_time_s = time.perf_counter() - t0
    return art


# Rabi ------------------------------------------------------------------------

def run_rabi(cfg):
    """P(|1>) against pulse duration, fitted with a sinusoid."""
    t0 = time.perf_counter()
    p = cfg.params
    durations = grid(p["durations_s"])
    n = int(p["shots_per_point"])
    omega = math.pi / float(p["pi_time_s"])
    chain = DetectionChain(cfg) if p["detection_mode"] == "full" else None
    rows = []
    for k, tau in enumerate(durations):
        bits = _prepare(n, MicrowavePulse(omega, float(tau)), cfg.seed, k)
        if chain is not None:
            bits = chain.bits(bits, cfg.seed, np.arange(k * n, (k + 1) * n))
        p1 = float(bits.mean())
        rows.append((float(tau), n, p1, math.sqrt(max(p1 * (1 - p1), 1.0 / n) / n)))
    x = np.array([r[0] for r in rows])
    y = np.array([r[2] for r in rows])
    sig = np.array([r[3] for r in rows])
    fit = fit_sinusoid(x, y, sig)
    f = fit["f"]
    pi_time = 1.0 / (2.0 * f)
    art = RunArtifact("rabi", cfg)
    art.tables["rabi"] = Table(("duration_s", "shots", "p1", "p1_stderr"), rows)
    art.reports["summary"] = {"pi_time_s": pi_time, "pi_time_stderr_s": pi_time * fit.stderr("f") / f,
                              "configured_pi_time_s": float(p["pi_time_s"]),
                              "fit": fit.to_dict()}
    art.derived.update(fit=fit, pi_time=pi_time, chain=chain)
    art.wall_time_s = time.perf_counter() - t0
    return art


# Branching ratio -------------------------------------------------------------

def branching_timeline(cfg, power):
    p = cfg.params
    r = p["repump_935"]
    probe = LaserBeam(369, 0.0, float(power), float(p["p_sat_W"]))
    fiber = Modulator(float(r["sideband_Hz"]), {int(k): float(v) for k, v in r["order_fractions"].items()})
    on = LaserBeam(935, float(r["carrier_detuning_Hz"]), float(r["power_W"]), float(r["p_sat_W"]),
                   waist=200e-6, modulators=(fiber,))
    off = replace(on, modulators=())
    return Timeline([Interval(float(p["repump_interval_s"]), (probe, on), label="repump"),
                     Interval(float(p["decay_interval_s"]), (probe, off), label="decay")])


def _nbins(p):
    return int(round(float(p["decay_interval_s"]) / float(p["bin_width_s"])))


def branching_traces(cfg, scheme=None):
    """Expected detected counts per decay-interval bin, one trace per power.

    ``ode`` gives exact expectations from the rate equations; ``mc``
    returns detected counts from simulated trajectories directly.
    """
    p = cfg.params
    scheme = scheme or _scheme(cfg)
    bw = float(p["bin_width_s"])
    nb = _nbins(p)
    reps = int(p["repetitions"])
    eta = float(p["efficiency"])
    dark = float(p["dark_rate_per_s"]) * bw * reps
    rv = photon_rate_vector(scheme)
    out = []
    for k, power in enumerate(p["powers_W"]):
        tl = branching_timeline(cfg, power)
        if p["method"] == "ode":
            p0 = np.zeros(len(scheme))
            p0[scheme.ground] = 1.0
            start = evolve_populations(interval_rate_matrix(scheme, tl.intervals[0]), p0,
                                       tl.intervals[0].duration)
            mean, _ = binned_emission(interval_rate_matrix(scheme, tl.intervals[1]), start, bw, nb, rv)
            out.append(reps * eta * mean + dark)
        else:
            t_decay = tl.start_of("decay")
            b = simulate_batch(scheme, tl, cfg.seed + 7919 * k, np.arange(reps),
                               bins=(t_decay, bw, nb))
            g = rngmod.stream(cfg.seed, k, rngmod.SCAN_NOISE)
            out.append(g.binomial(b.histogram, eta) + g.poisson(dark, nb))
    return out


def fit_decay_trace(t, counts, passes=3):
    """Exponential fit of one fluorescence trace with Poisson weights.

    The first pass weights by the data, later passes by the previous
    model, which removes the low-count bias of data weights.
    """
    fit = fit_exponential_decay(t, counts, np.sqrt(np.maximum(counts, 1.0)))
    for _ in range(passes - 1):
        model = exp_decay(t, *fit.values)
        fit = fit_exponential_decay(t, counts, np.sqrt(np.maximum(model, 1e-3)))
    return fit


def branching_analysis(cfg, traces, replica=0, noisy=None):
    """Poisson-sample the traces (ODE method), fit each, then fit saturation.

    Returns ``(decay fits, saturation fit, sampled traces)``.
    """
    p = cfg.params
    bw = float(p["bin_width_s"])
    t = bw * np.arange(len(traces[0]))
    # Skip the 3D[3/2] decay transient right after the sideband switches off.
    keep = t >= float(p.get("fit_start_s", 0.0))
    if noisy is None:
        noisy = p["method"] == "ode"
    sampled = []
    fits = []
    for k, tr in enumerate(traces):
        if noisy:
            g = rngmod.stream(cfg.seed, replica * len(traces) + k, rngmod.REPLICA)
            y = g.poisson(tr).astype(float)
        else:
            y = np.asarray(tr, dtype=float)
        sampled.append(y)
        fits.append(fit_decay_trace(t[keep], y[keep]))
    b = np.array([f["b"] for f in fits])
    powers = np.asarray(p["powers_W"], dtype=float)
    sat = fit_branching_saturation(b, powers, float(p["power_error_fraction"]) * powers,
                                   gamma=cfg.constants.gamma_P12,
                                   gamma_rel_err=cfg.constants.gamma_P12_rel_err)
    return fits, sat, sampled


def run_branching(cfg, replica=0):
    t0 = time.perf_counter()
    p = cfg.params
    traces = branching_traces(cfg)
    fits, sat, sampled = branching_analysis(cfg, traces, replica)
    bw = float(p["bin_width_s"])
    art = RunArtifact("branching", cfg)
    rows = []
    for power, y in zip(p["powers_W"], sampled):
        rows.extend((float(power), bw * j, int(c)) for j, c in enumerate(y))
    art.tables["traces"] = Table(("power_W", "time_s", "counts"), rows)
    art.tables["decay_fits"] = Table(
        ("power_W", "saturation", "A_counts", "b_per_s", "b_stderr_per_s", "c_counts", "reduced_chi2"),
        [(float(pw), float(pw) / float(p["p_sat_W"]), f["A"], f["b"], f.stderr("b"), f["c"],
          f.reduced_chi2) for pw, f in zip(p["powers_W"], fits)])
    art.reports["summary"] = {"R": sat["R"], "R_stderr": sat["R_stderr"],
                              "R_stderr_fit_only": sat["R_stderr_fit"],
                              "gammaR_per_s": sat["gammaR"], "p_sat_W": sat["p_sat"],
                              "saturation_fit": sat.to_dict()}
    art.derived.update(decay_fits=fits, saturation_fit=sat, traces=traces)
    art.wall_time_s = time.perf_counter() - t0
    return art


# Hyperfine scans -------------------------------------------------------------

NOISE_SIGMAS = 5.0

def _probe(p, carrier, f):
    fr = {int(k): float(v) for k, v in p["order_fractions"].items()}
    return LaserBeam(935, float(carrier), float(p["probe_935_power_W"]),
                     float(p["probe_935_p_sat_W"]), waist=200e-6, modulators=(Modulator(float(f), fr),))


def hyperfine_signal(cfg, stage, freqs, scheme=None):
    """Expected fluorescence (369 nm photons/s) for each sideband frequency.

    Stage 1 is the steady state. Stage 2 starts in D3/2 F=2 and reports
    the mean rate over ``stage2_window_s``.
    """
    p = cfg.params
    scheme = scheme or _scheme(cfg)
    base = [c for b in cfg.scenario_beams() for c in effective_spectrum(b)]
    rv = photon_rate_vector(scheme)
    carrier = p["stage1_carrier_Hz"] if stage == 1 else p["stage2_carrier_Hz"]
    window = float(p["stage2_window_s"])
    p0 = np.zeros(len(scheme))
    p0[scheme.index(D32, 2)] = 1.0
    out = np.empty(len(freqs))
    for i, f in enumerate(freqs):
        M = build_rate_matrix(scheme, base + effective_spectrum(_probe(p, carrier, f)))
        if stage == 1:
            out[i] = rv @ steady_state(M)
        else:
            _, integral = propagators(M, window)
            out[i] = rv @ (integral @ p0) / window
    return out


def _scan_counts(cfg, rates, offset):
    p = cfg.params
    lam = float(p["efficiency"]) * float(p["integration_time_s"]) * rates
    return np.array([rngmod.stream(cfg.seed, offset + i, rngmod.SCAN_NOISE).poisson(l)
                     for i, l in enumerate(lam)])


def _peaks(freqs, counts, frac, n, stage):
    # A relative threshold alone accepts shot-noise bumps on a featureless scan.
    floor = NOISE_SIGMAS * np.sqrt(float(np.median(counts)) + 1.0)
    ps = find_peaks(freqs, counts.astype(float), min_prominence=max(frac * float(np.ptp(counts)), floor))
    if len(ps) < n or np.ptp(counts) == 0:
        raise ScanCoverageError(f"stage {stage}: found {len(ps)} resonance(s), need {n}; "
                                f"scan {freqs[0]:.6g}-{freqs[-1]:.6g} Hz may not cover them")
    return ps.strongest(n)


def run_hyperfine_scan(cfg):
    t0 = time.perf_counter()
    p = cfg.params
    scheme = _scheme(cfg)
    g1 = grid(p["stage1_grid_Hz"])
    g2 = grid(p["stage2_grid_Hz"])
    frac = float(p["min_prominence_fraction"])
    r1 = hyperfine_signal(cfg, 1, g1, scheme)
    c1 = _scan_counts(cfg, r1, 0)
    pk1 = _peaks(g1, c1, frac, 2, 1)
    split_3d = float(pk1.centers[1] - pk1.centers[0])
    r2 = hyperfine_signal(cfg, 2, g2, scheme)
    c2 = _scan_counts(cfg, r2, len(g1))
    pk2 = _peaks(g2, c2, frac, 1, 2)
    # Stage 2 carrier sits on D F=1 <-> 3D F=0, so the F=2 <-> F'=1 resonance
    # lies at the sum of the two splittings.
    split_d = float(pk2.centers[0] - float(p["stage2_carrier_Hz"]) - split_3d)
    art = RunArtifact("hyperfine", cfg)
    art.tables["stage1_scan"] = Table(("frequency_Hz", "counts", "rate_per_s"),
                                      list(zip(g1.tolist(), c1.tolist(), r1.tolist())))
    art.tables["stage2_scan"] = Table(("frequency_Hz", "counts", "rate_per_s"),
                                      list(zip(g2.tolist(), c2.tolist(), r2.tolist())))
    art.tables["peaks"] = Table(("stage", "center_Hz", "height_counts", "width_Hz", "prominence_counts"),
                                [(1,) + r for r in pk1.rows()] + [(2,) + r for r in pk2.rows()])
    art.reports["summary"] = {"D3half_splitting_Hz": split_3d, "D32_splitting_Hz": split_d,
                              "grid_step_stage1_Hz": float(g1[1] - g1[0]),
                              "grid_step_stage2_Hz": float(g2[1] - g2[0])}
    art.derived.update(stage1_peaks=pk1, stage2_peaks=pk2, D3half_splitting=split_3d,
                       D32_splitting=split_d)
    art.wall_time_s = time.perf_counter() - t0
    return art


# Ramsey echo -----------------------------------------------------------------

def ramsey_probabilities(env, pi_time, T, dt, n, g):
    """P(|1>) of both ions after the echo sequence, for ``n`` shots.

    Each ion draws independent quasi-static detunings for the two free
    evolution halves. The analysis pulse phase is uniform in [0, 2 pi) per
    shot and common to both ions. Returns ``(p1_site0, p1_site1)``.
    """
    omega = math.pi / pi_time
    z = g.standard_normal((2, 2, n))
    theta = g.uniform(0.0, 2 * math.pi, n)
    half = MicrowavePulse(omega, 0.5 * pi_time)
    full = MicrowavePulse(omega, pi_time)
    out = []
    for site in (0, 1):
        off = 0.0 if site == 0 else env.differential_offset
        d0 = off + env.freq_noise_rms * z[site, 0]
        d1 = off + env.freq_noise_rms * z[site, 1]
        q = apply_pulse(QubitState.zero(n), half, d0)
        q = apply_pulse(q, MicrowavePulse(0.0, 0.5 * T), d0)
        q = apply_pulse(q, full, d0)
        q = apply_pulse(q, MicrowavePulse(0.0, 0.5 * T + dt), d1)
        q = apply_pulse(q, MicrowavePulse(omega, 0.5 * pi_time, phase=theta,
                                          phase_scrambled=True), d1)
        out.append(q.p1)
    return out[0], out[1]


def _fringe_amplitude(x, y, f):
    """Amplitude of the component of ``y`` at the known frequency ``f``."""
    ph = 2 * math.pi * f * x
    X = np.column_stack([np.cos(ph), np.sin(ph), np.ones_like(x)])
    (a, b, _), *_ = np.linalg.lstsq(X, y, rcond=None)
    return math.hypot(a, b)


def run_ramsey(cfg):
    """Two-ion echo parity fringes against delay, and the Gaussian coherence decay."""
    t0 = time.perf_counter()
    p = cfg.params
    env = replace(cfg.environment, freq_noise_rms=float(p["freq_noise_rms_Hz"]))
    Ts = grid(p["T_s"])
    dts = grid(p["dt_grid_s"])
    n = int(p["shots_per_point"])
    pi_time = float(p["pi_time_s"])
    chain = DetectionChain(_ramsey_detection_cfg(cfg)) if p["detection_mode"] == "full" else None
    rows, fringe_rows, fits = [], [], []
    k = 0
    for T in Ts:
        par = np.empty(len(dts))
        err = np.empty(len(dts))
        pa = np.empty(len(dts))
        for j, dt in enumerate(dts):
            g = rngmod.stream(cfg.seed, k, rngmod.SHOT_NOISE)
            p1a, p1b = ramsey_probabilities(env, pi_time, float(T), float(dt), n, g)
            ua, ub = g.random(n), g.random(n)
            a = (ua < p1a).astype(np.int64)
            b = (ub < p1b).astype(np.int64)
            if chain is not None:
                base = 2 * n * k
                a = chain.bits(a, cfg.seed, np.arange(base, base + n))
                b = chain.bits(b, cfg.seed, np.arange(base + n, base + 2 * n))
            s = np.where(a == b, 1.0, -1.0)
            par[j] = s.mean()
            err[j] = max(s.std(ddof=1), 1e-3) / math.sqrt(n)
            pa[j] = a.mean()
            rows.append((float(T), float(dt), par[j], err[j], pa[j], float(b.mean())))
            k += 1
        fit = fit_sinusoid(dts, par, err)
        fits.append(fit)
        single = _fringe_amplitude(dts, pa, fit["f"])
        fringe_rows.append((float(T), fit["A"], fit.stderr("A"), 1.0 / fit["f"], fit["f"], single))
    amp = np.array([r[1] for r in fringe_rows])
    amp_err = np.array([r[2] for r in fringe_rows])
    decay = fit_gaussian_decay(Ts, amp, np.maximum(amp_err, 1e-6))
    art = RunArtifact("ramsey", cfg)
    art.tables["parity"] = Table(("T_s", "dt_s", "parity", "parity_stderr", "p1_site0", "p1_site1"), rows)
    art.tables["fringes"] = Table(("T_s", "amplitude", "amplitude_stderr", "period_s", "frequency_Hz",
                                   "single_ion_amplitude"), fringe_rows)
    art.reports["summary"] = {"tau_s": decay["tau"], "tau_stderr_s": decay.stderr("tau"),
                              "A0": decay["A0"], "gaussian_fit": decay.to_dict()}
    art.derived.update(fringe_fits=fits, decay_fit=decay, fringes=fringe_rows)
    art.wall_time_s = time.perf_counter() - t0
    return art


def _ramsey_detection_cfg(cfg):
    # The Ramsey scenario borrows the Rabi scenario's detection settings,
    # keeping this run's constants and beams.
    params = load_defaults()["scenarios"]["rabi"] | {"species": cfg.params["species"]}
    return replace(cfg, scenario="rabi", params=params)


# State preparation -----------------------------------------------------------

def run_state_prep(cfg):
    """Optical pumping from S F=1 into |0> under the pump beams."""
    t0 = time.perf_counter()
    p = cfg.params
    scheme = _scheme(cfg)
    tp = float(p["pump_time_s"])
    M = build_rate_matrix(scheme, [c for b in cfg.scenario_beams() for c in effective_spectrum(b)])
    p0 = np.zeros(len(scheme))
    p0[scheme.index(S12, 1)] = 1.0
    times = tp * np.linspace(0.0, 2.0, 41)
    zero = scheme.qubit_index(0)
    pops = [float(evolve_populations(M, p0, t)[zero]) for t in times]
    final = float(evolve_populations(M, p0, tp)[zero])
    art = RunArtifact("prep", cfg)
    art.tables["pumping"] = Table(("time_s", "population_zero"), list(zip(times.tolist(), pops)))
    art.reports["summary"] = {"pump_time_s": tp, "population_zero": final,
                              "target_population": float(p["target_population"])}
    art.derived.update(population_zero=final, matrix=M)
    art.wall_time_s = time.perf_counter() - t0
    return art


RUNNERS = {
    "detect": run_detection,
    "rabi": run_rabi,
    "branching": run_branching,
    "hyperfine": run_hyperfine_scan,
    "ramsey": run_ramsey,
    "prep": run_state_prep,
}
