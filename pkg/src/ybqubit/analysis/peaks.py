"""Resonance location in frequency scans, and two-ion parity."""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks as _scipy_find_peaks
from scipy.signal import peak_widths

from ..errors import ConstraintViolation, InsufficientDataError
from .lm import as_series

SMOOTH_WINDOW = 5


@dataclass(frozen=True)
class PeakSet:
    centers: np.ndarray
    heights: np.ndarray
    widths: np.ndarray
    prominences: np.ndarray

    def __len__(self):
        return len(self.centers)

    def strongest(self, n):
        """The ``n`` most prominent peaks, returned in ascending center order."""
        idx = np.sort(np.argsort(self.prominences)[::-1][:n])
        return PeakSet(self.centers[idx], self.heights[idx], self.widths[idx], self.prominences[idx])

    def rows(self):
        return list(zip(*(a.tolist() for a in (self.centers, self.heights, self.widths, self.prominences))))


def find_peaks(scan, y=None, min_prominence=0.0, smooth=SMOOTH_WINDOW):
    """Local maxima of the smoothed scan whose prominence exceeds ``min_prominence``.

    The scan must be on a uniform grid. Centers are refined by a parabola
    through the smoothed maximum and its two neighbours.
    """
    s = as_series(scan, y)
    x, yy = s.x, s.y
    if len(x) < 3:
        raise InsufficientDataError("peak search needs at least 3 points")
    dx = np.diff(x)
    if np.any(dx <= 0) or np.ptp(dx) > 1e-6 * abs(dx[0]):
        raise ConstraintViolation("x", "scan grid must be uniform and increasing")
    step = float(dx[0])
    ys = uniform_filter1d(yy, smooth, mode="nearest") if smooth > 1 else yy
    idx, props = _scipy_find_peaks(ys, prominence=(min_prominence if min_prominence > 0 else None))
    if len(idx) == 0:
        empty = np.zeros(0)
        return PeakSet(empty, empty, empty, empty)
    prom = props["prominences"] if "prominences" in props else np.zeros(len(idx))
    widths = peak_widths(ys, idx, rel_height=0.5)[0] * step
    centers = x[idx].astype(float)
    heights = ys[idx].astype(float)
    for n, i in enumerate(idx):
        if 0 < i < len(ys) - 1:
            a, b, c = ys[i - 1], ys[i], ys[i + 1]
            den = a - 2 * b + c
            if den < 0:
                shift = 0.5 * (a - c) / den
                centers[n] = x[i] + np.clip(shift, -0.5, 0.5) * step
                heights[n] = b - 0.25 * (a - c) * shift
    order = np.argsort(centers)
    return PeakSet(centers[order], heights[order], widths[order], np.asarray(prom, dtype=float)[order])


def parity(outcome_pairs):
    """Mean of +1 (outcomes equal) and -1 (outcomes differ) over shots."""
    a = np.asarray(outcome_pairs)
    if a.ndim != 2 or a.shape[1] != 2 or len(a) == 0:
        raise InsufficientDataError("need a non-empty (n, 2) array of outcomes")
    return float(np.mean(np.where(a[:, 0] == a[:, 1], 1.0, -1.0)))
