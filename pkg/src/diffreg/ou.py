"""Closed-form quantities of the forward Ornstein-Uhlenbeck noising process.

The forward process dY = -delta(t) Y dt + sqrt(2 delta(t)) dB contracts data
toward N(0, I).  Its transition kernel is Gaussian,

    Y_t | Y_0 = y  ~  N(m_t y, s_t^2 I),
    m_t = exp(-int_0^t delta),   s_t^2 = 1 - m_t^2,

so perturbed samples, the regression target for denoising score matching
(the gradient of the log transition density), and the marginal score of
Gaussian data families are all available exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_VAR_FLOOR = 16.0 * np.finfo(float).eps
_SCORE_VAR_MIN = 1e-12


@dataclass(frozen=True)
class OUSchedule:
    """Drift coefficient delta(t) of the forward process.

    ``constant`` uses delta(t) = delta0 everywhere (the practical norm).
    ``tabulated`` interpolates a finite grid of (time, delta) pairs with a
    monotone cubic (PCHIP); the integral int_0^t delta is the exact
    antiderivative of the interpolant, and delta is held at its last value
    beyond the grid.
    """

    kind: str = "constant"
    delta0: float = 1.0
    times: np.ndarray | None = None
    deltas: np.ndarray | None = None
    _interp: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind == "constant":
            if not self.delta0 > 0:
                raise ValueError("constant drift requires delta0 > 0")
        elif self.kind == "tabulated":
            t = np.asarray(self.times, dtype=float)
            d = np.asarray(self.deltas, dtype=float)
            if t.ndim != 1 or t.shape != d.shape or t.size < 2:
                raise ValueError("tabulated schedule needs matching 1-D grids of length >= 2")
            if t[0] != 0.0 or np.any(np.diff(t) <= 0):
                raise ValueError("times must start at 0 and be strictly increasing")
            if np.any(d <= 0):
                raise ValueError("drift values must be positive")
            from scipy.interpolate import PchipInterpolator

            object.__setattr__(self, "times", t)
            object.__setattr__(self, "deltas", d)
            object.__setattr__(self, "_interp", PchipInterpolator(t, d, extrapolate=False))
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    def delta(self, t):
        """Drift value delta(t); constant extension past the last table knot."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("time must be nonnegative")
        if self.kind == "constant":
            return np.broadcast_to(np.float64(self.delta0), t.shape).copy() if t.ndim else np.float64(self.delta0)
        t_max = self.times[-1]
        inside = np.minimum(t, t_max)
        out = np.asarray(self._interp(inside), dtype=float)
        out = np.where(t > t_max, self.deltas[-1], out)
        return out if t.ndim else np.float64(out)

    def drift_integral(self, t):
        """int_0^t delta(s) ds, exact for both schedule kinds."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise ValueError("time must be nonnegative")
        if self.kind == "constant":
            out = self.delta0 * t
        else:
            anti = self._interp.antiderivative()
            t_max = self.times[-1]
            inside = np.minimum(t, t_max)
            out = np.asarray(anti(inside), dtype=float)
            out = out + np.maximum(t - t_max, 0.0) * self.deltas[-1]
        return out if t.ndim else np.float64(out)


def mean_coeff(schedule: OUSchedule, t):
    """m_t = exp(-int_0^t delta); 1 at t=0, strictly decreasing."""
    return np.exp(-schedule.drift_integral(t))


def noise_var(schedule: OUSchedule, t):
    """Transition-kernel variance s_t^2 = 1 - m_t^2 in [0, 1)."""
    m = mean_coeff(schedule, t)
    return 1.0 - m * m


def sigma(schedule: OUSchedule, t):
    """Transition-kernel standard deviation, guarded against a rounding-negative radicand."""
    m = mean_coeff(schedule, t)
    return np.sqrt(np.maximum(1.0 - m * m, _VAR_FLOOR))


def _coef_like(c, y):
    """Broadcast a per-time coefficient against points with a trailing coordinate axis."""
    c = np.asarray(c, dtype=float)
    if c.ndim and np.ndim(y) == c.ndim + 1:
        return c[..., None]
    return c


def perturb(schedule: OUSchedule, y0, t, rng: np.random.Generator):
    """Draw y_t ~ N(m_t y0, s_t^2 I), the forward kernel at time t > 0.

    ``y0`` may be a single point (D,) or a batch (k, D) with scalar or
    per-row t.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("perturb requires t > 0 (kernel degenerates at t = 0)")
    y0 = np.asarray(y0, dtype=float)
    m = _coef_like(mean_coeff(schedule, t), y0)
    s = _coef_like(sigma(schedule, t), y0)
    return m * y0 + s * rng.standard_normal(y0.shape)


def kernel_score(schedule: OUSchedule, y_t, y0, t):
    """Gradient of log p_t(y_t | y0): (m_t y0 - y_t) / s_t^2.

    This is the regression target of denoising score matching.  Raises for
    s_t^2 below 1e-12 (training never queries below the early-stopping time).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("kernel_score requires t > 0")
    v = noise_var(schedule, t)
    if np.any(v < _SCORE_VAR_MIN):
        raise ValueError("kernel variance below 1e-12; evaluate above the early-stopping time")
    y_t = np.asarray(y_t, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    m = _coef_like(mean_coeff(schedule, t), y_t)
    v = _coef_like(v, y_t)
    return (m * y0 - y_t) / v


def gaussian_marginal_score(schedule: OUSchedule, f_x, s: float, y, t):
    """Score of the noised marginal when Y|x ~ N(f(x), s^2 I).

    p_t(.|x) = N(m_t f(x), (m_t^2 s^2 + s_t^2) I), so the score is
    (m_t f(x) - y) / (m_t^2 s^2 + s_t^2).  Analytic oracle for tests and
    sampler checks.
    """
    if not s > 0:
        raise ValueError("gaussian_marginal_score requires s > 0")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("gaussian_marginal_score requires t > 0")
    y = np.asarray(y, dtype=float)
    f_x = np.asarray(f_x, dtype=float)
    m = _coef_like(mean_coeff(schedule, t), y)
    v = m * m * s * s + _coef_like(noise_var(schedule, t), y)
    return (m * f_x - y) / v
