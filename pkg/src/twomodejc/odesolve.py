"""Adaptive Dormand-Prince 5(4) integrator for complex first-order systems.

Written out rather than delegated to scipy so that rejected steps, the failing
component of a non-finite derivative and an early-stop hook are all visible
to the callers (the Wei-Norman chart switching relies on the last one).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NonFiniteDerivative, StepSizeUnderflow, ValidationError

# Dormand-Prince tableau (same constants as scipy.integrate.RK45).
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# Continuous extension: y(t_old + x h) = y_old + h * K^T P [x, x^2, x^3, x^4].
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1 / 5


@dataclass(frozen=True)
class OdeProblem:
    rhs: Callable[[float, np.ndarray], np.ndarray]
    t_span: tuple
    dimension: int
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_step: float = np.inf

    def __post_init__(self):
        t0, t1 = self.t_span
        if int(self.dimension) < 1:
            raise ValidationError("must be >= 1", key="dimension")
        if not t1 > t0:
            raise ValidationError(f"need t1 > t0, got {self.t_span}", key="t_span")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValidationError("tolerances must be > 0", key="tol")
        if not self.max_step > 0:
            raise ValidationError("must be > 0", key="max_step")


class DenseOutput:
    """Piecewise quartic interpolant over the accepted steps."""

    def __init__(self):
        self._t0: list[float] = []
        self._h: list[float] = []
        self._y0: list[np.ndarray] = []
        self._Q: list[np.ndarray] = []

    def _append(self, t0, h, y0, Q):
        self._t0.append(t0)
        self._h.append(h)
        self._y0.append(y0)
        self._Q.append(Q)

    @property
    def t_min(self):
        return self._t0[0]

    @property
    def t_max(self):
        return self._t0[-1] + self._h[-1]

    def __call__(self, t: float) -> np.ndarray:
        if not self._t0:
            raise ValueError("empty dense output")
        if t < self.t_min - 1e-12 * max(1.0, abs(self.t_min)) or t > self.t_max * (1 + 1e-12) + 1e-12:
            raise ValueError(f"t={t!r} outside [{self.t_min}, {self.t_max}]")
        i = min(max(bisect.bisect_right(self._t0, t) - 1, 0), len(self._t0) - 1)
        return _interp(self._t0[i], self._h[i], self._y0[i], self._Q[i], t)


@dataclass
class SampledSolution:
    times: np.ndarray
    states: np.ndarray  # shape (len(times), dimension)
    step_count: int
    rejected_steps: int
    rhs_evaluations: int
    t_final: float
    y_final: np.ndarray
    stopped: bool = False
    dense: Optional[DenseOutput] = field(default=None, repr=False)


def _interp(t_old, h, y_old, Q, t):
    x = (t - t_old) / h
    return y_old + h * (Q @ np.array([x, x * x, x ** 3, x ** 4]))


def _initial_step(rhs, t0, y0, f0, direction_span, rtol, atol):
    scale = atol + np.abs(y0) * rtol
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, direction_span)


def _check_finite(f, t):
    if not np.all(np.isfinite(f)):
        bad = int(np.flatnonzero(~np.isfinite(f))[0])
        raise NonFiniteDerivative(t, bad)


def integrate(
    problem: OdeProblem,
    y0,
    sample_grid: Sequence[float],
    monitor: Optional[Callable[[float, np.ndarray], bool]] = None,
    dense: bool = False,
    first_step: Optional[float] = None,
) -> SampledSolution:
    """Integrate ``problem`` from ``y0`` and return the state at each sample.

    ``monitor(t, y)`` is called after every accepted step; returning True stops
    the integration there. Samples beyond the stopping time are then absent
    from the result and ``stopped`` is set.
    """
    t0, t1 = (float(v) for v in problem.t_span)
    grid = np.asarray(sample_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValidationError("sample grid must be a non-empty 1-d sequence", key="sample_grid")
    if grid[0] != t0:
        raise ValidationError(f"sample grid must start at t0={t0!r}", key="sample_grid")
    if np.any(np.diff(grid) <= 0):
        raise ValidationError("sample grid must be strictly increasing", key="sample_grid")
    if grid[-1] > t1:
        raise ValidationError(f"sample grid exceeds t1={t1!r}", key="sample_grid")

    y = np.array(y0, dtype=complex).reshape(-1)
    if y.size != problem.dimension:
        raise ValidationError(f"y0 has size {y.size}, expected {problem.dimension}", key="y0")
    rtol, atol = problem.rel_tol, problem.abs_tol
    rhs = problem.rhs
    n = y.size

    out = np.empty((grid.size, n), dtype=complex)
    out[0] = y
    next_sample = 1
    dense_out = DenseOutput() if dense else None

    t = t0
    f = np.asarray(rhs(t, y), dtype=complex)
    nfev = 1
    _check_finite(f, t)
    if first_step is not None:
        h = min(first_step, problem.max_step, t1 - t0)
    else:
        h = min(_initial_step(rhs, t, y, f, t1 - t0, rtol, atol), problem.max_step)
        nfev += 1
    K = np.empty((7, n), dtype=complex)
    steps = rejected = 0
    stopped = False

    while t < t1 and next_sample <= grid.size:
        min_step = 10 * abs(np.nextafter(t, np.inf) - t)
        if h < min_step:
            raise StepSizeUnderflow(t, h)
        h = min(h, problem.max_step)
        # land exactly on t1 rather than overshooting by rounding
        if t + h > t1 or t1 - (t + h) < min_step:
            h = t1 - t

        K[0] = f
        for s in range(1, 6):
            dy = K[:s].T @ _A[s] * h
            K[s] = rhs(t + _C[s] * h, y + dy)
        y_new = y + h * (K[:6].T @ _B)
        t_new = t + h if h != t1 - t else t1
        f_new = np.asarray(rhs(t_new, y_new), dtype=complex)
        nfev += 6
        K[6] = f_new

        if not np.all(np.isfinite(K)):
            bad_stage = np.flatnonzero(~np.all(np.isfinite(K), axis=1))[0]
            bad = int(np.flatnonzero(~np.isfinite(K[bad_stage]))[0])
            if bad_stage == 6 or h <= min_step * 1e3:
                raise NonFiniteDerivative(t + _C[min(bad_stage, 5)] * h, bad)
            # overflow in a trial stage; retry with a smaller step
            h *= MIN_FACTOR
            rejected += 1
            continue

        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = np.max(np.abs(h * (K.T @ _E)) / scale)

        if err <= 1.0:
            Q = K.T @ _P
            while next_sample < grid.size and grid[next_sample] <= t_new:
                ts = grid[next_sample]
                out[next_sample] = y_new if ts == t_new else _interp(t, h, y, Q, ts)
                next_sample += 1
            if dense_out is not None:
                dense_out._append(t, h, y.copy(), Q)
            steps += 1
            t, y, f = t_new, y_new, f_new
            factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** ERROR_EXPONENT)
            h *= factor
            if monitor is not None and monitor(t, y):
                stopped = t < t1
                break
        else:
            rejected += 1
            h *= max(MIN_FACTOR, SAFETY * err ** ERROR_EXPONENT)

    return SampledSolution(
        times=grid[:next_sample].copy(),
        states=out[:next_sample],
        step_count=steps,
        rejected_steps=rejected,
        rhs_evaluations=nfev,
        t_final=t,
        y_final=y,
        stopped=stopped,
        dense=dense_out,
    )
