"""Quantum-jump Monte Carlo over manifolds.

Each trajectory is a continuous-time Markov chain driven by the same rate
matrices as the deterministic solver. Waiting times are exponential in the
total outflow rate, the destination is chosen in proportion to the
individual rates, and every spontaneous decay emits a photon event.

Trajectory ``i`` of master seed ``s`` draws only from its own stream
``rng.stream(s, i)``, in fixed-size doubling blocks, so its result is the
same whatever other trajectories run, in any order or thread.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .. import rng as rngmod
from ..atom import EMISSION_369
from ..errors import ConstraintViolation
from ..fields import validate_timeline
from .rates import interval_rate_matrix

_DONE, _NEED_RANDOM, _NEED_SPACE = 0, 1, 2
_FIRST_BLOCK = 4096
_MAX_BLOCK = 1 << 20


@nb.njit(nogil=True, cache=True)
def _advance(st_f, st_i, ends, n_out, dest, cum, tot, emit, countable,
             u_exp, u_sel, sample_t, occ, bin_t0, bin_w, hist,
             ev_t, ev_c, jump_t, jump_s, record):
    t = st_f[0]
    s = st_i[0]
    k = st_i[1]
    i = st_i[2]
    js = st_i[3]
    ne = st_i[4]
    nj = st_i[5]
    K = ends.shape[0]
    nr = u_exp.shape[0]
    ns = sample_t.shape[0]
    nbins = hist.shape[0]
    status = 0
    while k < K:
        end = ends[k]
        rate = tot[k, s]
        if rate > 0.0:
            if i >= nr:
                status = 1
                break
            t_new = t + u_exp[i] / rate
        else:
            t_new = end
        if t_new >= end:
            while js < ns and sample_t[js] < end:
                occ[js, s] += 1
                js += 1
            t = end
            k += 1
            if rate > 0.0:
                i += 1
            continue
        if record and (ne >= ev_t.shape[0] or nj >= jump_t.shape[0]):
            status = 2
            break
        while js < ns and sample_t[js] < t_new:
            occ[js, s] += 1
            js += 1
        x = u_sel[i] * rate
        i += 1
        c = 0
        last = n_out[k, s] - 1
        while c < last and cum[k, s, c] < x:
            c += 1
        ch = emit[k, s, c]
        s = dest[k, s, c]
        t = t_new
        if ch >= 0:
            if countable[ch] and t >= bin_t0:
                b = int((t - bin_t0) / bin_w)
                if b < nbins:
                    hist[b] += 1
            if record:
                ev_t[ne] = t
                ev_c[ne] = ch
                ne += 1
        if record:
            jump_t[nj] = t
            jump_s[nj] = s
            nj += 1
    if status == 0:
        while js < ns:
            occ[js, s] += 1
            js += 1
    st_f[0] = t
    st_i[0] = s
    st_i[1] = k
    st_i[2] = i
    st_i[3] = js
    st_i[4] = ne
    st_i[5] = nj
    return status


@dataclass
class CompiledTimeline:
    """Per-interval jump tables derived from the rate matrices."""

    scheme: object
    timeline: object
    ends: np.ndarray
    n_out: np.ndarray
    dest: np.ndarray
    cum: np.ndarray
    tot: np.ndarray
    emit: np.ndarray
    countable: np.ndarray
    matrices: list = field(default_factory=list)


def compile_timeline(scheme, timeline, countable_class=EMISSION_369):
    problems = validate_timeline(timeline)
    if problems:
        raise ConstraintViolation("timeline", "; ".join(problems))
    n = len(scheme)
    K = len(timeline.intervals)
    C = 2 * n
    n_out = np.zeros((K, n), dtype=np.int64)
    dest = np.zeros((K, n, C), dtype=np.int64)
    cum = np.zeros((K, n, C))
    tot = np.zeros((K, n))
    emit = -np.ones((K, n, C), dtype=np.int64)
    chan = {(ch.upper, ch.lower): idx for idx, ch in enumerate(scheme.channels)}
    matrices = []
    for k, iv in enumerate(timeline.intervals):
        rm = interval_rate_matrix(scheme, iv)
        matrices.append(rm)
        M, S = rm.matrix, rm.spontaneous
        for s in range(n):
            acc = 0.0
            c = 0
            for j in range(n):
                if j == s:
                    continue
                driven = M[j, s] - S[j, s]
                if driven > 0:
                    acc += driven
                    dest[k, s, c], cum[k, s, c] = j, acc
                    c += 1
                if S[j, s] > 0:
                    acc += S[j, s]
                    dest[k, s, c], cum[k, s, c] = j, acc
                    emit[k, s, c] = chan[(s, j)]
                    c += 1
            n_out[k, s] = c
            tot[k, s] = acc
    countable = np.array([ch.emission_class == countable_class for ch in scheme.channels])
    ends = np.cumsum([iv.duration for iv in timeline.intervals]).astype(float)
    return CompiledTimeline(scheme, timeline, ends, n_out, dest, cum, tot, emit,
                            countable, matrices)


_EMPTY_F = np.zeros(0)
_EMPTY_I = np.zeros(0, dtype=np.int64)


def _run(ct, seed, index, initial, sample_t, occ, bin_t0, bin_w, hist, record):
    rng = rngmod.stream(seed, index, rngmod.TRAJECTORY)
    block = _FIRST_BLOCK
    u_exp = rng.standard_exponential(block)
    u_sel = rng.random(block)
    st_f = np.zeros(1)
    st_i = np.array([initial, 0, 0, 0, 0, 0], dtype=np.int64)
    if record:
        ev_t, ev_c = np.zeros(1024), np.zeros(1024, dtype=np.int64)
        jump_t, jump_s = np.zeros(1024), np.zeros(1024, dtype=np.int64)
    else:
        ev_t, ev_c, jump_t, jump_s = _EMPTY_F, _EMPTY_I, _EMPTY_F, _EMPTY_I
    while True:
        status = _advance(st_f, st_i, ct.ends, ct.n_out, ct.dest, ct.cum, ct.tot, ct.emit,
                          ct.countable, u_exp, u_sel, sample_t, occ, bin_t0, bin_w, hist,
                          ev_t, ev_c, jump_t, jump_s, record)
        if status == _DONE:
            break
        if status == _NEED_RANDOM:
            block = min(2 * block, _MAX_BLOCK)
            u_exp = rng.standard_exponential(block)
            u_sel = rng.random(block)
            st_i[2] = 0
        else:
            ev_t = np.concatenate([ev_t, np.zeros_like(ev_t)])
            ev_c = np.concatenate([ev_c, np.zeros_like(ev_c)])
            jump_t = np.concatenate([jump_t, np.zeros_like(jump_t)])
            jump_s = np.concatenate([jump_s, np.zeros_like(jump_s)])
    ne, nj = st_i[4], st_i[5]
    return int(st_i[0]), ev_t[:ne], ev_c[:ne], jump_t[:nj], jump_s[:nj]


@dataclass
class TrajectoryResult:
    """One Monte-Carlo shot.

    ``occupation_starts[k]`` is the time the trajectory entered
    ``occupation_manifolds[k]``; consecutive entries tile ``[0, duration]``.
    ``first_entry`` maps manifold labels to the first time they were
    occupied (the pump-out time for a dark manifold).
    """

    scheme: object
    duration: float
    event_times: np.ndarray
    event_channels: np.ndarray
    occupation_starts: np.ndarray
    occupation_manifolds: np.ndarray
    final_manifold: int
    first_entry: dict

    def photon_times(self, emission_class=EMISSION_369):
        cls = np.array([c.emission_class == emission_class for c in self.scheme.channels])
        return self.event_times[cls[self.event_channels]] if len(self.event_channels) else self.event_times

    def photon_count(self, emission_class=EMISSION_369, t0=0.0, t1=np.inf):
        t = self.photon_times(emission_class)
        return int(np.count_nonzero((t >= t0) & (t < t1)))

    def manifold_at(self, t):
        k = np.searchsorted(self.occupation_starts, t, side="right") - 1
        return int(self.occupation_manifolds[k])

    def occupation_intervals(self):
        ends = np.append(self.occupation_starts[1:], self.duration)
        return list(zip(self.occupation_starts, ends, self.occupation_manifolds))

    def write_events_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time_s", "channel"])
            for t, c in zip(self.event_times, self.event_channels):
                w.writerow([repr(float(t)), int(c)])

    def write_events_binary(self, path):
        rec = np.zeros(len(self.event_times), dtype=[("time_s", "<f8"), ("channel", "<i8")])
        rec["time_s"] = self.event_times
        rec["channel"] = self.event_channels
        np.save(path, rec, allow_pickle=False)


def simulate_trajectory(scheme, timeline, seed, trajectory_index, initial=None,
                        compiled=None):
    """Run one recorded trajectory starting in manifold ``initial``."""
    ct = compiled or compile_timeline(scheme, timeline)
    s0 = scheme.ground if initial is None else scheme.resolve(initial)
    occ = np.zeros((0, len(scheme)), dtype=np.int64)
    hist = np.zeros(0, dtype=np.int64)
    final, ev_t, ev_c, jt, js = _run(ct, seed, trajectory_index, s0, _EMPTY_F, occ,
                                     0.0, 1.0, hist, True)
    starts = np.concatenate([[0.0], jt])
    mans = np.concatenate([[s0], js]).astype(np.int64)
    first = {}
    for t, m in zip(starts, mans):
        first.setdefault(scheme.manifolds[m].label, float(t))
    return TrajectoryResult(scheme, float(ct.ends[-1]), ev_t.copy(), ev_c.copy(), starts,
                            mans, final, first)


@dataclass
class BatchResult:
    """Aggregates over many unrecorded trajectories.

    ``occupancy[j, m]`` counts trajectories in manifold ``m`` at
    ``sample_times[j]``; ``histogram`` sums countable photon arrivals per
    bin; ``counts[i]`` is trajectory ``i``'s countable photon total inside
    the binned range (only when requested).
    """

    n_trajectories: int
    sample_times: np.ndarray
    occupancy: np.ndarray
    bin_edges: np.ndarray
    histogram: np.ndarray
    counts: np.ndarray = None

    def populations(self):
        return self.occupancy / self.n_trajectories


def _batch_chunk(ct, seed, indices, initials, sample_t, bin_t0, bin_w, nbins, want_counts):
    occ = np.zeros((len(sample_t), len(ct.scheme)), dtype=np.int64)
    hist = np.zeros(nbins, dtype=np.int64)
    counts = np.zeros(len(indices), dtype=np.int64) if want_counts else None
    scratch = np.zeros(nbins, dtype=np.int64)
    for n, (idx, s0) in enumerate(zip(indices, initials)):
        if want_counts:
            scratch[:] = 0
            _run(ct, seed, int(idx), int(s0), sample_t, occ, bin_t0, bin_w, scratch, False)
            counts[n] = scratch.sum()
            hist += scratch
        else:
            _run(ct, seed, int(idx), int(s0), sample_t, occ, bin_t0, bin_w, hist, False)
    return occ, hist, counts


def simulate_batch(scheme, timeline, seed, indices, initial=None, sample_times=(),
                   bins=None, per_trajectory_counts=False, workers=1, compiled=None):
    """Run trajectories ``indices`` without recording individual events.

    Parameters
    ----------
    initial : int, label, or array of manifold indices (one per trajectory)
    sample_times : absolute times at which occupancy is tallied
    bins : ``(t0, width, nbins)`` for the countable-photon histogram;
        defaults to one bin spanning the whole timeline
    workers : threads to spread the trajectories over; results do not
        depend on this value
    """
    ct = compiled or compile_timeline(scheme, timeline)
    indices = np.asarray(indices, dtype=np.int64)
    if initial is None:
        initials = np.full(len(indices), scheme.ground, dtype=np.int64)
    elif np.ndim(initial) == 0:
        initials = np.full(len(indices), scheme.resolve(initial), dtype=np.int64)
    else:
        initials = np.asarray(initial, dtype=np.int64)
        if len(initials) != len(indices):
            raise ValueError("need one initial manifold per trajectory")
    sample_t = np.sort(np.asarray(sample_times, dtype=float))
    if bins is None:
        bins = (0.0, float(ct.ends[-1]) * (1 + 1e-12), 1)
    bin_t0, bin_w, nbins = float(bins[0]), float(bins[1]), int(bins[2])
    chunks = np.array_split(np.arange(len(indices)), max(1, int(workers)))
    args = [(ct, seed, indices[c], initials[c], sample_t, bin_t0, bin_w, nbins,
             per_trajectory_counts) for c in chunks]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _batch_chunk(*a), args))
    else:
        parts = [_batch_chunk(*a) for a in args]
    occ = sum(p[0] for p in parts)
    hist = sum(p[1] for p in parts)
    counts = np.concatenate([p[2] for p in parts]) if per_trajectory_counts else None
    edges = bin_t0 + bin_w * np.arange(nbins + 1)
    return BatchResult(len(indices), sample_t, occ, edges, hist, counts)


def bin_events(times, width=16e-9, t0=0.0, t1=None):
    """Histogram event times with a fixed bin width (default 16 ns)."""
    times = np.asarray(times, dtype=float)
    if t1 is None:
        t1 = times.max() if len(times) else t0 + width
    nb_ = max(1, int(np.ceil((t1 - t0) / width - 1e-9)))
    edges = t0 + width * np.arange(nb_ + 1)
    counts, _ = np.histogram(times, bins=edges)
    return edges, counts
