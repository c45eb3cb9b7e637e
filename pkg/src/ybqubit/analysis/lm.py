"""Damped Gauss-Newton (Levenberg-Marquardt) least squares.

Jacobians are central differences with relative step 1e-6. A model that
returns non-finite values for a trial step makes that step fail, which is
how fitters keep parameters out of singular regions.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConstraintViolation

REL_STEP = 1e-6
MAX_ITER = 200
RTOL = 1e-8


@dataclass
class DataSeries:
    """Points ``(x, y, sigma)`` with axis labels that carry units, e.g. ``"time_s"``."""

    x: np.ndarray
    y: np.ndarray
    sigma: np.ndarray = None
    x_label: str = "x"
    y_label: str = "y"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ConstraintViolation("x", "x and y must be 1-d and the same length")
        if self.sigma is not None:
            self.sigma = np.broadcast_to(np.asarray(self.sigma, dtype=float), self.y.shape).copy()
            if np.any(~(self.sigma > 0)):
                raise ConstraintViolation("sigma", "must be > 0")

    def __len__(self):
        return len(self.x)

    def require_increasing(self):
        if np.any(np.diff(self.x) <= 0):
            raise ConstraintViolation("x", "must be strictly increasing")
        return self

    def write_csv(self, path):
        cols = [self.x_label, self.y_label]
        data = [self.x, self.y]
        if self.sigma is not None:
            cols.append(f"sigma_{self.y_label}")
            data.append(self.sigma)
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(cols) + "\n")
            for row in zip(*data):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def as_series(data, y=None, sigma=None):
    if isinstance(data, DataSeries):
        return data
    if y is None:
        arr = np.asarray(data, dtype=float)
        return DataSeries(arr[:, 0], arr[:, 1], arr[:, 2] if arr.shape[1] > 2 else None)
    return DataSeries(data, y, sigma)


@dataclass
class FitResult:
    names: tuple
    values: np.ndarray
    covariance: np.ndarray
    chi2: float
    dof: int
    converged: bool
    iterations: int
    flags: tuple = ()
    message: str = ""
    derived: dict = field(default_factory=dict)

    @property
    def params(self):
        return dict(zip(self.names, (float(v) for v in self.values)))

    @property
    def errors(self):
        return dict(zip(self.names, (float(e) for e in np.sqrt(np.clip(np.diag(self.covariance), 0, None)))))

    @property
    def reduced_chi2(self):
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    def __getitem__(self, name):
        if name in self.derived:
            return self.derived[name]
        return self.params[name]

    def stderr(self, name):
        return self.errors[name]

    @property
    def degenerate(self):
        return "degenerate" in self.flags

    def to_dict(self):
        return {"parameters": self.params, "stderr": self.errors,
                "covariance": np.asarray(self.covariance).tolist(),
                "chi2": self.chi2, "dof": self.dof, "reduced_chi2": self.reduced_chi2,
                "converged": self.converged, "iterations": self.iterations,
                "flags": list(self.flags), "message": self.message,
                "derived": {k: float(v) for k, v in self.derived.items()}}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _steps(p, scale):
    return REL_STEP * np.where(p != 0, np.abs(p), scale)


def jacobian(func, p, scale):
    """Central-difference Jacobian of ``func`` (vector-valued) at ``p``."""
    h = _steps(p, scale)
    cols = []
    for j in range(len(p)):
        dp = np.zeros_like(p)
        dp[j] = h[j]
        cols.append((func(p + dp) - func(p - dp)) / (2 * h[j]))
    return np.column_stack(cols)


def _chi2(r):
    c = float(r @ r)
    return c if np.isfinite(c) else np.inf


def _covariance(J):
    # Column scaling keeps parameters of very different magnitude from
    # being truncated by the pseudo-inverse cutoff.
    norms = np.sqrt(np.sum(J * J, axis=0))
    norms[norms == 0] = 1.0
    Js = J / norms
    return np.linalg.pinv(Js.T @ Js) / np.outer(norms, norms)


def levenberg_marquardt(model, x, y, p0, sigma=None, names=None, absolute_sigma=False,
                        max_iter=MAX_ITER, rtol=RTOL):
    """Minimize ``sum(((y - model(x, *p)) / sigma)**2)``.

    Converged when an accepted step changes every parameter by less than
    ``rtol`` relative, or the residual vanishes. Hitting ``max_iter``
    returns ``converged=False``. Without ``absolute_sigma`` the covariance
    is scaled by the reduced chi-square.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    p = np.asarray(p0, dtype=float).copy()
    names = tuple(names or (f"p{i}" for i in range(len(p))))
    if len(p) > len(y):
        raise ConstraintViolation("p0", "more parameters than points")
    scale = np.where(p != 0, np.abs(p), 1.0)

    def resid(q):
        with np.errstate(all="ignore"):
            return (y - model(x, *q)) * w

    r = resid(p)
    chi2 = _chi2(r)
    if not np.isfinite(chi2):
        raise ConstraintViolation("p0", "model is not finite at the initial parameters")
    lam = None
    converged = False
    message = "iteration limit reached"
    it = 0
    tiny = 1e-30 * max(1.0, float(y @ y * (w @ w) / max(len(y), 1)))
    for it in range(1, max_iter + 1):
        if chi2 <= tiny:
            converged, message = True, "exact fit"
            break
        J = -jacobian(resid, p, scale)
        if not np.all(np.isfinite(J)):
            message = "non-finite Jacobian"
            break
        A = J.T @ J
        g = J.T @ r
        d = np.diag(A).copy()
        d[d <= 0] = 1e-300
        if lam is None:
            lam = 1e-3
        accepted = False
        while lam < 1e300:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = p + step
            r_new = resid(trial)
            c_new = _chi2(r_new)
            if c_new <= chi2:
                accepted = True
                break
            lam *= 10
        if not accepted:
            converged, message = True, "no further decrease"
            break
        small = np.all(np.abs(step) <= rtol * np.maximum(np.abs(trial), 1e-300))
        p, r, chi2 = trial, r_new, c_new
        lam = max(lam / 10, 1e-300)
        if small:
            converged, message = True, "relative step below tolerance"
            break
    J = -jacobian(resid, p, scale)
    dof = len(y) - len(p)
    cov = _covariance(J) if np.all(np.isfinite(J)) else np.full((len(p), len(p)), np.nan)
    if not absolute_sigma and dof > 0:
        cov = cov * (chi2 / dof)
    cov = 0.5 * (cov + cov.T)
    return FitResult(names, p, cov, float(chi2), dof, converged, it, (), message)
