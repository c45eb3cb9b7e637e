from .fits import (exp_decay, fit_branching_saturation, fit_exponential_decay,
                   fit_gaussian_decay, fit_sinusoid, gaussian_decay, saturation_power, sinusoid)
from .lm import DataSeries, FitResult, as_series, levenberg_marquardt
from .peaks import PeakSet, find_peaks, parity

__all__ = [
    "DataSeries", "FitResult", "PeakSet", "as_series", "exp_decay", "find_peaks",
    "fit_branching_saturation", "fit_exponential_decay", "fit_gaussian_decay", "fit_sinusoid",
    "gaussian_decay", "levenberg_marquardt", "parity", "saturation_power", "sinusoid",
]
